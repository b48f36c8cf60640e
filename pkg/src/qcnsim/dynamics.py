"""Master-equation solvers: right-hand side, steady state, time evolution, metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import hilbert as hs
from .errors import LayoutError, NonUniqueSteadyState, SolverError, TraceDriftError, WindowTruncationError
from .hilbert import DensityMatrix, QuantumOperator
from .integrate import IntegrationStats, dopri5
from .model import CascadeSpec, GeneratorBundle, QcnParams, field_operator

log = logging.getLogger(__name__)

TRACE_DRIFT_LIMIT = 1e-6
COND_LIMIT = 1e12
DENSE_NULLITY_LIMIT = 4096


class Generator:
    """Bundle compiled into sparse matrices for repeated RHS evaluation."""

    def __init__(self, bundle: GeneratorBundle):
        self.bundle = bundle
        self.layout = bundle.layout
        heff = bundle.h_static.matrix.astype(complex)
        self.jumps = []
        self.dyn_jumps = []
        for term in bundle.lindblad:
            o = term.op.matrix
            odo = (o.conj().T @ o).tocsr()
            self.jumps.append((term, o))
            if term.is_static:
                heff = heff - 0.5j * term.rate * odo
            else:
                self.dyn_jumps.append((term, odo))
        self.heff = sp.csr_matrix(heff)
        self.network = [(n, n.src.matrix, n.sink.matrix, n.sink.matrix.conj().T.tocsr())
                        for n in bundle.network]

    def __call__(self, t: float, rho: np.ndarray) -> np.ndarray:
        a = self.heff @ rho
        if self.bundle.h_schedule is not None:
            a = a + self.bundle.h_schedule(t).matrix @ rho
        for term, odo in self.dyn_jumps:
            r = term.rate_at(t)
            if r:
                a = a - 0.5j * r * (odo @ rho)
        # rho is hermitian, so rho H_eff^+ = (H_eff rho)^+
        out = -1j * (a - a.conj().T)
        for term, o in self.jumps:
            r = term.rate_at(t)
            if r:
                x = o @ rho
                out += r * (o @ x.conj().T).conj().T
        for term, src, sink, sink_dag in self.network:
            r = term.rate_at(t)
            if r:
                x = src @ rho
                b = sink_dag @ x - (sink @ x.conj().T).conj().T
                out -= r * (b + b.conj().T)
        return out

    def vector_rhs(self, t, y):
        n = self.layout.total_dim
        return self(t, y.reshape(n, n)).ravel()


def lindblad_rhs(rho: DensityMatrix, bundle: GeneratorBundle, t: float = 0.0) -> np.ndarray:
    """``d rho/dt`` of the master equation (including cascade network terms)."""
    if rho.layout != bundle.layout:
        raise LayoutError("density matrix and generator live on different layouts")
    return Generator(bundle)(t, rho.matrix)


def liouvillian(bundle: GeneratorBundle, t: float = 0.0) -> sp.csr_matrix:
    """Superoperator acting on row-major ``rho.ravel()``.

    Uses ``vec(A X B) = (A kron B^T) vec(X)``.
    """
    n = bundle.layout.total_dim
    eye = sp.identity(n, dtype=complex, format="csr")
    kron = lambda x, y: sp.kron(x, y, format="csr")  # noqa: E731
    h = bundle.h_static.matrix
    if bundle.h_schedule is not None:
        h = h + bundle.h_schedule(t).matrix
    L = -1j * (kron(h, eye) - kron(eye, h.T))
    for term in bundle.lindblad:
        r = term.rate_at(t)
        if not r:
            continue
        o = term.op.matrix
        odo = o.conj().T @ o
        L = L + r * (kron(o, o.conj()) - 0.5 * kron(odo, eye) - 0.5 * kron(eye, odo.T))
    for term in bundle.network:
        r = term.rate_at(t)
        if not r:
            continue
        src, sink = term.src.matrix, term.sink.matrix
        L = L - r * (kron(sink.conj().T @ src, eye) - kron(src, sink.conj())
                     + kron(eye, (src.conj().T @ sink).T) - kron(sink, src.conj()))
    return sp.csr_matrix(L)


@dataclass
class SteadyStateResult:
    rho: DensityMatrix
    residual: float
    method: str
    shifts: dict = field(default_factory=dict)
    condition: float = float("nan")


def _fix_phase(vec: np.ndarray, n: int) -> np.ndarray:
    rho = vec.reshape(n, n)
    diag = np.diag(rho)
    k = int(np.argmax(np.abs(diag)))
    rho = rho * (abs(diag[k]) / diag[k])
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _nullity(L: sp.csr_matrix, tol=1e-10) -> int:
    s = np.linalg.svd(L.toarray(), compute_uv=False)
    if s[0] == 0:
        return len(s)
    return int(np.sum(s < tol * s[0]))


def steady_state(bundle: GeneratorBundle, long_time: float | None = None, rtol: float = 1e-10) -> SteadyStateResult:
    """Unique steady state of a time-independent generator.

    Solves ``L vec(rho) = 0`` with one row replaced by the trace condition.
    Falls back to long-time integration when that system is ill-conditioned.
    """
    if not bundle.is_static:
        raise SolverError("steady_state needs a time-independent generator")
    n = bundle.layout.total_dim
    L = liouvillian(bundle)
    trace_row = sp.csr_matrix((np.ones(n), (np.zeros(n, dtype=int), np.arange(n) * (n + 1))), shape=(1, n * n))
    M = sp.vstack([trace_row, L[1:]], format="csc")
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    cond = math.inf
    vec = None
    try:
        lu = spla.splu(M)
        inv = spla.LinearOperator(M.shape, matvec=lu.solve, rmatvec=lambda x: lu.solve(x, trans="H"),
                                  dtype=complex)
        cond = spla.onenormest(M) * spla.onenormest(inv)
        if np.isfinite(cond) and cond < COND_LIMIT:
            vec = lu.solve(rhs)
    except RuntimeError:
        pass
    if vec is None or not np.all(np.isfinite(vec)):
        if n * n <= DENSE_NULLITY_LIMIT:
            k = _nullity(L)
            if k > 1:
                raise NonUniqueSteadyState(f"steady state not unique: null space of dimension {k}")
        log.warning("steady-state linear system ill-conditioned (cond ~ %.2e); integrating to long times", cond)
        return _long_time_steady(bundle, L, long_time, rtol)
    rho = _fix_phase(vec, n)
    residual = float(np.linalg.norm(L @ rho.ravel()))
    return SteadyStateResult(DensityMatrix(bundle.layout, rho), residual, "nullspace", dict(bundle.shifts), cond)


def _long_time_steady(bundle, L, long_time, rtol):
    layout = bundle.layout
    rho0 = bundle.rho0 or DensityMatrix.product_state(layout)
    rates = [t.rate for t in bundle.lindblad if t.rate > 0]
    if long_time is None and not rates:
        raise SolverError("no dissipation: cannot integrate to a steady state")
    T = long_time or 100.0 / min(rates)
    run = evolve(rho0, bundle, np.array([0.0, T]), {}, rtol=rtol, atol=1e-12)
    rho = run.final_rho.hermitized().normalized()
    residual = float(np.linalg.norm(L @ rho.matrix.ravel()))
    return SteadyStateResult(rho, residual, "long_time", dict(bundle.shifts))


@dataclass
class EvolutionResult:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    trace_drift: float
    final_rho: DensityMatrix
    min_eigenvalue: float = float("nan")
    stats: IntegrationStats | None = None
    states: np.ndarray | None = None


def _expectation_table(observables: dict, layout):
    table = {}
    for name, op in observables.items():
        if op.layout != layout:
            raise LayoutError(f"observable {name!r} is on a different layout")
        m = op.matrix.tocoo()
        table[name] = (m.data, m.row, m.col, op.hermiticity_error() < 1e-12)
    return table


def evolve(rho0: DensityMatrix, bundle: GeneratorBundle, t_grid, observables: dict[str, QuantumOperator],
           rtol: float = 1e-8, atol: float = 1e-10, max_step: float = np.inf,
           positivity_stride: int = 0, keep_states: bool = False) -> EvolutionResult:
    """Integrate the master equation and sample observables on ``t_grid``.

    ``positivity_stride > 0`` checks the smallest eigenvalue of every
    ``positivity_stride``-th sample.
    """
    if rho0.layout != bundle.layout:
        raise LayoutError("initial state and generator live on different layouts")
    t_grid = np.asarray(t_grid, dtype=float)
    n = bundle.layout.total_dim
    gen = Generator(bundle)
    table = _expectation_table(observables, bundle.layout)
    values = {name: np.empty(len(t_grid)) for name in observables}
    traces = np.empty(len(t_grid))
    min_eig = [math.inf]
    states = np.empty((len(t_grid), n, n), dtype=complex) if keep_states else None
    final = {}

    def project(y):
        r = y.reshape(n, n)
        return (0.5 * (r + r.conj().T)).ravel()

    def sample(i, t, y):
        rho = y.reshape(n, n)
        traces[i] = np.trace(rho).real
        for name, (data, row, col, herm) in table.items():
            z = complex(np.sum(data * rho[col, row]))
            if herm and abs(z.imag) > 1e-9:
                raise SolverError(f"observable {name!r} has imaginary part {z.imag:.2e} at t={t:.4g}")
            values[name][i] = z.real
        if positivity_stride and i % positivity_stride == 0:
            min_eig[0] = min(min_eig[0], float(np.linalg.eigvalsh(rho)[0]))
        if keep_states:
            states[i] = rho
        if i == len(t_grid) - 1:
            final["rho"] = rho.copy()

    _, stats = dopri5(gen.vector_rhs, t_grid, project(rho0.matrix.ravel()), rtol=rtol, atol=atol,
                      max_step=max_step, project=project, on_sample=sample)
    drift = float(np.max(np.abs(traces - 1.0)))
    if drift > TRACE_DRIFT_LIMIT:
        raise TraceDriftError(f"trace drifted by {drift:.2e} (> {TRACE_DRIFT_LIMIT:g})")
    return EvolutionResult(t_grid, values, drift, DensityMatrix(bundle.layout, final["rho"]),
                           min_eig[0] if positivity_stride else float("nan"), stats, states)


def transmittance_steady(ss: SteadyStateResult, params: QcnParams):
    """``(T_a, T_b)`` of a steady state; a metric is ``None`` when its drive is zero."""
    layout = ss.rho.layout
    out = []
    for label, amp, k_out in (("cav_a", params.alpha, params.kappa_ex[1]),
                              ("cav_b", params.beta, params.kappa_ex[3])):
        if abs(amp) == 0:
            out.append(None)
            continue
        c = field_operator(layout, label, ss.shifts)
        n = hs.real_value(hs.expect(c.dag() @ c, ss.rho), f"<{label} photons>")
        out.append(k_out * n / abs(amp) ** 2)
    return tuple(out)


def steady_observables(ss: SteadyStateResult, params: QcnParams) -> dict:
    """Transmissions, excited-state populations and photon numbers of a steady state."""
    layout = ss.rho.layout
    ta, tb = transmittance_steady(ss, params)
    obs = {"T_a": ta, "T_b": tb,
           "sigma22": hs.real_value(hs.expect(hs.transition(layout, 2, 2), ss.rho)),
           "sigma33": hs.real_value(hs.expect(hs.transition(layout, 3, 3), ss.rho))}
    for label, key in (("cav_a", "n_a"), ("cav_b", "n_b")):
        c = field_operator(layout, label, ss.shifts)
        obs[key] = hs.real_value(hs.expect(c.dag() @ c, ss.rho))
    return obs


def cascade_observables(layout) -> dict[str, QuantumOperator]:
    """Hermitian observables needed for the input/output fluxes of a cascaded run."""
    a = hs.destroy(layout, "cav_a")
    b = hs.destroy(layout, "cav_b")
    obs = {
        "n_a": a.dag() @ a,
        "n_b": b.dag() @ b,
        "b_re": 0.5 * (b + b.dag()),
        "b_im": -0.5j * (b - b.dag()),
        "sigma22": hs.transition(layout, 2, 2),
        "sigma33": hs.transition(layout, 3, 3),
    }
    d1 = hs.destroy(layout, "src_d1")
    obs["n_d1"] = d1.dag() @ d1
    obs["x_d1_a"] = d1.dag() @ a + a.dag() @ d1
    if "src_d2" in layout:
        d2 = hs.destroy(layout, "src_d2")
        obs["n_d2"] = d2.dag() @ d2
        obs["x_d2_b"] = d2.dag() @ b + b.dag() @ d2
    return obs


def cascade_fluxes(run: EvolutionResult, params: QcnParams, bundle: GeneratorBundle, spec: CascadeSpec) -> dict:
    """Photon fluxes of the input/output channels, sampled on the run's grid."""
    t = run.times
    o = run.observables
    k1, k2, k3, k4 = params.kappa_ex
    kd1 = bundle.schedule.kappa_array(t)
    fl = {
        "signal_in": kd1 * o["n_d1"],
        "signal_transmitted": k2 * o["n_a"],
        # a_r = sqrt(kd1) d1 + sqrt(k1) a; the cross term is essential
        "signal_out": kd1 * o["n_d1"] + k1 * o["n_a"] + np.sqrt(kd1 * k1) * o["x_d1_a"],
        "probe_out": k4 * o["n_b"],
    }
    if spec.probe_mode == "cascaded_source":
        kd2 = spec.kappa_d2
        fl["probe_in"] = kd2 * o["n_d2"]
        fl["probe_reflected"] = kd2 * o["n_d2"] + k3 * o["n_b"] + math.sqrt(kd2 * k3) * o["x_d2_b"]
    else:
        beta = params.beta
        b_mean = o["b_re"] + 1j * o["b_im"]
        fl["probe_in"] = np.full_like(t, abs(beta) ** 2)
        fl["probe_reflected"] = (abs(beta) ** 2 + k3 * o["n_b"]
                                 + 2 * math.sqrt(k3) * np.real(np.conj(beta) * b_mean))
    return fl


@dataclass
class PulseMetrics:
    T_a: float | None
    R_a: float | None
    T_b: float | None
    R_b: float | None
    input_photons: float
    T_b_peak: float | None = None
    residual_excitation: float = 0.0
    window: tuple[float, float] = (0.0, 0.0)
    probe_window: tuple[float, float] = (0.0, 0.0)


def _integral(y, t, mask):
    return float(np.trapezoid(y[mask], t[mask]))


def pulse_metrics(run: EvolutionResult, params: QcnParams, bundle: GeneratorBundle, spec: CascadeSpec,
                  t0: float, t1: float, probe_window: tuple[float, float] | None = None) -> PulseMetrics:
    """Integrated transmittance/reflectance of the signal and probe channels.

    Signal metrics are normalized by the photons leaving the source in
    ``[t0, t1]``; probe metrics by the probe input in ``probe_window``
    (defaults to ``[t0, t1]``).
    """
    t = run.times
    fl = cascade_fluxes(run, params, bundle, spec)
    mask = (t >= t0) & (t <= t1)
    total_in = float(np.trapezoid(fl["signal_in"], t))
    n_in = _integral(fl["signal_in"], t, mask)
    if spec.n_s > 0:
        if total_in - n_in > 1e-3 * max(total_in, 1e-300):
            raise WindowTruncationError(
                f"window [{t0:g}, {t1:g}] misses {100 * (total_in - n_in) / total_in:.3f}% of the input packet")
        t_a = _integral(fl["signal_transmitted"], t, mask) / n_in
        r_a = _integral(fl["signal_out"], t, mask) / n_in
    else:
        n_in = 0.0
        t_a = r_a = None
    pw = probe_window or (t0, t1)
    pmask = (t >= pw[0]) & (t <= pw[1])
    p_in = _integral(fl["probe_in"], t, pmask)
    if p_in > 0:
        t_b = _integral(fl["probe_out"], t, pmask) / p_in
        r_b = _integral(fl["probe_reflected"], t, pmask) / p_in
        with np.errstate(divide="ignore", invalid="ignore"):
            inst = np.where(fl["probe_in"] > 0, fl["probe_out"] / fl["probe_in"], 0.0)
        t_b_peak = float(np.max(inst[pmask]))
    else:
        t_b = r_b = t_b_peak = None
    i1 = np.searchsorted(t, t1, side="right") - 1
    residual = float(run.observables["n_a"][i1] + run.observables["sigma22"][i1])
    return PulseMetrics(t_a, r_a, t_b, r_b, n_in, t_b_peak, residual, (t0, t1), tuple(pw))
