import numpy as np
import pytest

from qcnsim import dynamics
from qcnsim import hilbert as hs
from qcnsim.analytic import bare_cavity_photons
from qcnsim.dynamics import (
    evolve,
    lindblad_rhs,
    liouvillian,
    pulse_metrics,
    steady_observables,
    steady_state,
    transmittance_steady,
)
from qcnsim.errors import NonUniqueSteadyState, SolverError, TraceDriftError, WindowTruncationError
from qcnsim.model import (
    CascadeSpec,
    GeneratorBundle,
    LindbladTerm,
    QcnParams,
    build_cascaded,
    build_driven,
    default_layout,
    swap_ab,
)

FIG2 = QcnParams()


def _emitter_decay(gamma):
    layout = default_layout(0, 0)
    return GeneratorBundle(layout, hs.zero(layout), [LindbladTerm(gamma, hs.transition(layout, 1, 2))])


def test_rhs_on_mixed_state():
    layout = default_layout(2, 0)
    b = GeneratorBundle(layout, hs.zero(layout), [LindbladTerm(1.0, hs.destroy(layout, "cav_a"))])
    n = layout.total_dim
    d = lindblad_rhs(hs.DensityMatrix(layout, np.eye(n) / n), b)
    assert abs(np.trace(d)) < 1e-12
    vac = [hs.basis_index(layout, {"qe": q}) for q in (1, 2, 3)]
    assert all(d[i, i].real > 0 for i in vac)


def test_emitter_decay_exponential():
    b = _emitter_decay(0.3)
    t = np.linspace(0, 10, 21)
    rho0 = hs.DensityMatrix.product_state(b.layout, {"qe": 2})
    run = evolve(rho0, b, t, {"s22": hs.transition(b.layout, 2, 2)}, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(run.observables["s22"], np.exp(-0.3 * t), atol=1e-8)


def test_no_generator_leaves_state_fixed():
    layout = default_layout(1, 1)
    b = GeneratorBundle(layout, hs.zero(layout), [])
    rng = np.random.default_rng(0)
    x = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    rho0 = hs.DensityMatrix(layout, x @ x.conj().T).normalized()
    run = evolve(rho0, b, np.linspace(0, 5, 6), {}, keep_states=True)
    for rho in run.states:
        assert np.array_equal(rho, rho0.hermitized().matrix)


def test_liouvillian_matches_rhs():
    p = FIG2.with_drives(1e-2, 1e-3)
    b = build_driven(p, default_layout(2, 2))
    n = b.layout.total_dim
    rng = np.random.default_rng(3)
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = x @ x.conj().T
    L = liouvillian(b)
    np.testing.assert_allclose((L @ rho.ravel()).reshape(n, n), lindblad_rhs(hs.DensityMatrix(b.layout, rho), b),
                               atol=1e-12)


def test_vacuum_steady_state():
    p = QcnParams(g1=0, g2=0)
    ss = steady_state(build_driven(p, default_layout(2, 2)))
    assert ss.method == "nullspace"
    assert ss.residual < 1e-9
    assert ss.rho.matrix[0, 0].real == pytest.approx(1.0)


def test_nonunique_steady_state_reported():
    layout = default_layout(1, 0)
    with pytest.raises(NonUniqueSteadyState):
        steady_state(GeneratorBundle(layout, hs.zero(layout), []))


def test_steady_needs_static_bundle():
    b = build_cascaded(QcnParams(kappa_ex=(1, 0, 0.5, 0.5), beta=0.1), CascadeSpec(), default_layout(1, 1, 1))
    with pytest.raises(SolverError):
        steady_state(b)


@pytest.mark.parametrize("displace", [False, True])
def test_bare_cavity_photon_number(displace):
    p = QcnParams(g1=0, g2=0).with_drives(1e-1, 1e-2)
    ss = steady_state(build_driven(p, default_layout(7, 4), displace))
    obs = steady_observables(ss, p)
    na, nb = bare_cavity_photons(p)
    assert obs["n_a"] == pytest.approx(na, abs=1e-6)
    assert obs["n_b"] == pytest.approx(nb, abs=1e-6)
    assert obs["T_a"] == pytest.approx(1, abs=1e-6)
    assert obs["T_b"] == pytest.approx(1, abs=1e-6)


def test_transmittance_examples():
    # frozen solver outputs at (n_a, n_b) = (3, 3)
    ss = steady_state(build_driven(FIG2.with_drives(1e-4, 0), default_layout(3, 3)))
    ta, tb = transmittance_steady(ss, FIG2.with_drives(1e-4, 0))
    assert tb is None
    assert ta == pytest.approx(0.046, abs=0.002)
    p = FIG2.with_drives(1e-2, 0)
    ta, _ = transmittance_steady(steady_state(build_driven(p, default_layout(3, 3))), p)
    assert ta == pytest.approx(0.41, abs=0.01)


def test_symmetric_drives_give_equal_transmissions():
    p = FIG2.with_drives(3e-3, 3e-3)
    obs = steady_observables(steady_state(build_driven(p, default_layout(3, 3))), p)
    assert obs["T_a"] == pytest.approx(obs["T_b"], abs=1e-10)
    assert obs["sigma22"] == pytest.approx(obs["sigma33"], abs=1e-10)


def test_exchange_symmetry():
    p = QcnParams(g1=0.1, g2=0.15, kappa_ex=(0.5, 0.4, 0.6, 0.5), gamma21=0.01, gamma31=0.02,
                  delta1=0.05, alpha=0.05, beta=0.08)
    o1 = steady_observables(steady_state(build_driven(p, default_layout(3, 2))), p)
    q = swap_ab(p)
    o2 = steady_observables(steady_state(build_driven(q, default_layout(2, 3))), q)
    for x, y in (("T_a", "T_b"), ("sigma22", "sigma33"), ("n_a", "n_b")):
        assert o1[x] == pytest.approx(o2[y], abs=1e-10)


def test_steady_matches_long_evolution():
    p = FIG2.with_drives(1e-2, 1e-2)
    b = build_driven(p, default_layout(2, 2))
    ss = steady_state(b)
    run = evolve(hs.DensityMatrix.product_state(b.layout), b, [0.0, 1e4], {})
    assert hs.trace_distance(ss.rho, run.final_rho) < 1e-6


def test_long_time_fallback(monkeypatch):
    p = FIG2.with_drives(1e-2, 1e-2)
    b = build_driven(p, default_layout(2, 2))
    monkeypatch.setattr(dynamics, "COND_LIMIT", 0.0)
    ss = steady_state(b)
    assert ss.method == "long_time"
    monkeypatch.undo()
    assert hs.trace_distance(ss.rho, steady_state(b).rho) < 1e-5


def test_trace_drift_guard(monkeypatch):
    b = _emitter_decay(1.0)
    monkeypatch.setattr(dynamics, "TRACE_DRIFT_LIMIT", 0.0)
    rho0 = hs.DensityMatrix.product_state(b.layout, {"qe": 2})
    with pytest.raises(TraceDriftError):
        evolve(rho0, b, np.linspace(0, 5, 11), {}, rtol=1e-4, atol=1e-6)


def test_positivity_tracked():
    p = FIG2.with_drives(1e-1, 1e-2)
    b = build_driven(p, default_layout(2, 2))
    rho0 = hs.DensityMatrix.product_state(b.layout)
    run = evolve(rho0, b, np.linspace(0, 50, 51), {}, positivity_stride=5)
    assert run.min_eigenvalue >= -1e-6
    assert run.trace_drift < 1e-6


FIG4 = QcnParams(kappa_ex=(1.0, 0.0, 0.5, 0.5), beta=0.1)
SHORT = CascadeSpec(n_s=1, tau_d=30.0, tau_s=6.0, t_window=(0.0, 90.0))


def _pulse(params, spec, n_b=1):
    b = build_cascaded(params, spec, default_layout(spec.n_s, n_b, spec.n_s))
    t = np.linspace(*spec.t_window, int(4 * spec.t_window[1]) + 1)
    run = evolve(b.rho0, b, t, dynamics.cascade_observables(b.layout), max_step=spec.sigma / 2)
    return run, b


def test_bare_mirror_reflects_everything():
    p = QcnParams(g1=0.0, kappa_ex=(1.0, 0.0, 0.5, 0.5), beta=0.1)
    run, b = _pulse(p, SHORT)
    m = pulse_metrics(run, p, b, SHORT, 0.0, 90.0)
    assert m.R_a == pytest.approx(1.0, abs=1e-4)
    assert m.input_photons == pytest.approx(1.0, abs=1e-4)


def test_lossless_reflection_bound():
    p = QcnParams(kappa_ex=(1.0, 0.0, 0.5, 0.5), gamma21=0.0, beta=0.1)
    run, b = _pulse(p, SHORT)
    m = pulse_metrics(run, p, b, SHORT, 0.0, 90.0)
    assert 0 <= m.R_a <= 1 + 1e-6
    assert m.T_a == 0
    assert m.T_b >= 0 and m.R_b >= 0


def test_window_truncation_error():
    run, b = _pulse(FIG4, SHORT)
    with pytest.raises(WindowTruncationError):
        pulse_metrics(run, FIG4, b, SHORT, 28.0, 90.0)


def test_empty_pulse_metrics():
    spec = CascadeSpec(n_s=0, tau_d=30.0, t_window=(0.0, 90.0))
    run, b = _pulse(FIG4, spec)
    m = pulse_metrics(run, FIG4, b, spec, 0.0, 90.0, (40.0, 80.0))
    assert m.input_photons == 0
    assert m.R_a is None and m.T_a is None
    assert m.T_b is not None


def test_cascade_fluxes_energy_balance():
    # with no emitter coupling, what leaves the source comes back out of a
    p = QcnParams(g1=0.0, kappa_ex=(1.0, 0.0, 0.5, 0.5), beta=0.1)
    run, b = _pulse(p, SHORT)
    fl = dynamics.cascade_fluxes(run, p, b, SHORT)
    t = run.times
    assert np.trapezoid(fl["signal_in"], t) == pytest.approx(np.trapezoid(fl["signal_out"], t), abs=1e-4)
    assert np.allclose(fl["probe_in"], 0.01)


def test_cascaded_probe_matches_classical_probe():
    spec = CascadeSpec(n_s=0, tau_d=30.0, t_window=(0.0, 400.0), probe_mode="cascaded_source", kappa_d2=1.0)
    b = build_cascaded(FIG4, spec, default_layout(0, 2, 0, 2))
    t = np.linspace(0, 400, 401)
    run = evolve(b.rho0, b, t, dynamics.cascade_observables(b.layout))
    fl = dynamics.cascade_fluxes(run, FIG4, b, spec)
    # the driven source cavity delivers |beta|^2 and drives b like the classical probe
    assert fl["probe_in"][-1] == pytest.approx(0.01, rel=1e-3)
    p = FIG4.with_drives(0, 1e-2)
    ss = steady_observables(steady_state(build_driven(p, default_layout(0, 2))), p)
    assert fl["probe_out"][-1] / fl["probe_in"][-1] == pytest.approx(ss["T_b"], abs=5e-4)
