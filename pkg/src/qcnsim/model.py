"""Generators for the driven V-emitter / two-cavity system and its cascaded variant.

All rates are in units of a reference rate kappa, times in 1/kappa. Drive
amplitudes are square roots of photon fluxes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import erf

from . import hilbert as hs
from .errors import LayoutError, ParameterError
from .hilbert import DensityMatrix, QuantumOperator, SpaceLayout

Schedule = Callable[[float], float]

PROBE_MODES = ("classical_drive", "cascaded_source")
PULSE_SHAPES = ("gaussian", "exponential")
WIDTH_CONVENTIONS = ("amplitude_fwhm", "intensity_fwhm")


@dataclass(frozen=True)
class QcnParams:
    g1: float = 0.1
    g2: float = 0.1
    # mirrors M1..M4; alpha enters through M1, beta through M3
    kappa_ex: tuple[float, float, float, float] = (0.5, 0.5, 0.5, 0.5)
    kappa_in_a: float = 0.0
    kappa_in_b: float = 0.0
    gamma21: float = 0.01
    gamma31: float = 0.01
    delta1: float = 0.0
    delta2: float = 0.0
    delta_a: float = 0.0
    delta_b: float = 0.0
    alpha: complex = 0.0
    beta: complex = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kappa_ex", tuple(float(k) for k in self.kappa_ex))
        if len(self.kappa_ex) != 4:
            raise ParameterError("kappa_ex needs four mirror rates")
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))

    @property
    def kappa_a(self) -> float:
        return self.kappa_ex[0] + self.kappa_ex[1] + self.kappa_in_a

    @property
    def kappa_b(self) -> float:
        return self.kappa_ex[2] + self.kappa_ex[3] + self.kappa_in_b

    @property
    def delta3(self) -> float:
        return self.delta_a + self.delta1

    @property
    def delta4(self) -> float:
        return self.delta_b + self.delta2

    def with_drives(self, alpha2: float | None = None, beta2: float | None = None) -> QcnParams:
        """Copy with real drive amplitudes set from photon fluxes ``|alpha|^2``, ``|beta|^2``."""
        changes = {}
        if alpha2 is not None:
            changes["alpha"] = math.sqrt(alpha2)
        if beta2 is not None:
            changes["beta"] = math.sqrt(beta2)
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kappa_ex"] = list(self.kappa_ex)
        d["alpha"] = [self.alpha.real, self.alpha.imag]
        d["beta"] = [self.beta.real, self.beta.imag]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> QcnParams:
        d = dict(d)
        for key in ("alpha", "beta"):
            if key in d and isinstance(d[key], (list, tuple)):
                d[key] = complex(*d[key])
        if "kappa_ex" in d:
            d["kappa_ex"] = tuple(d["kappa_ex"])
        return cls(**d)


def swap_ab(params: QcnParams) -> QcnParams:
    """Exchange the roles of the two cavity/transition pairs."""
    k1, k2, k3, k4 = params.kappa_ex
    return replace(
        params, g1=params.g2, g2=params.g1, kappa_ex=(k3, k4, k1, k2),
        kappa_in_a=params.kappa_in_b, kappa_in_b=params.kappa_in_a,
        gamma21=params.gamma31, gamma31=params.gamma21,
        delta1=params.delta2, delta2=params.delta1,
        delta_a=params.delta_b, delta_b=params.delta_a,
        alpha=params.beta, beta=params.alpha,
    )


def validate(params: QcnParams) -> list[str]:
    """Hard-check the parameters and return QND-regime warnings."""
    rates = {
        "g1": params.g1, "g2": params.g2, "kappa_in_a": params.kappa_in_a,
        "kappa_in_b": params.kappa_in_b, "gamma21": params.gamma21, "gamma31": params.gamma31,
        **{f"kappa_ex{i + 1}": k for i, k in enumerate(params.kappa_ex)},
    }
    for name, value in rates.items():
        if not np.isfinite(value):
            raise ParameterError(f"{name} is not finite")
        if value < 0:
            raise ParameterError(f"{name} = {value} is negative")
    for name in ("delta1", "delta2", "delta_a", "delta_b"):
        if not np.isfinite(getattr(params, name)):
            raise ParameterError(f"{name} is not finite")
    for name in ("alpha", "beta"):
        z = getattr(params, name)
        if not (np.isfinite(z.real) and np.isfinite(z.imag)):
            raise ParameterError(f"drive amplitude {name} is NaN/inf")
    if params.kappa_a <= 0 or params.kappa_b <= 0:
        raise ParameterError("total cavity losses kappa_a, kappa_b must be > 0")
    warns = []
    if params.gamma21 > 0.1 * params.kappa_a:
        warns.append(f"gamma21 = {params.gamma21:g} > 0.1 kappa_a: outside the QND regime")
    if params.kappa_in_a > 0.1 * params.kappa_a:
        warns.append(f"kappa_in_a = {params.kappa_in_a:g} > 0.1 kappa_a: outside the QND regime")
    return warns


def _require(layout: SpaceLayout, *labels):
    missing = [lab for lab in labels if lab not in layout]
    if missing:
        raise LayoutError(f"layout {layout} is missing {missing}")


def bare_amplitudes(params: QcnParams) -> dict[str, complex]:
    """Steady coherent amplitudes of the driven empty cavities."""
    return {
        "cav_a": -math.sqrt(params.kappa_ex[0]) * params.alpha / (params.kappa_a / 2 + 1j * params.delta1),
        "cav_b": -math.sqrt(params.kappa_ex[2]) * params.beta / (params.kappa_b / 2 + 1j * params.delta2),
    }


def field_operator(layout: SpaceLayout, label: str, shifts: dict | None = None) -> QuantumOperator:
    """Cavity annihilation operator, including a c-number shift in a displaced frame."""
    op = hs.destroy(layout, label)
    s = (shifts or {}).get(label, 0)
    if s:
        op = op + s * hs.identity(layout)
    return op


def build_h_qcn(params: QcnParams, layout: SpaceLayout, shifts: dict | None = None) -> QuantumOperator:
    _require(layout, "qe", "cav_a", "cav_b")
    a = field_operator(layout, "cav_a", shifts)
    b = field_operator(layout, "cav_b", shifts)
    s = lambda m, n: hs.transition(layout, m, n)  # noqa: E731
    h = (params.delta1 * (a.dag() @ a) + params.delta2 * (b.dag() @ b)
         + params.delta3 * s(2, 2) + params.delta4 * s(3, 3)
         + params.g1 * (s(2, 1) @ a + a.dag() @ s(1, 2))
         + params.g2 * (s(3, 1) @ b + b.dag() @ s(1, 3)))
    return h


def _drive_term(layout, label, rate, amp, shifts):
    c = field_operator(layout, label, shifts)
    return 1j * math.sqrt(rate) * (np.conj(amp) * c - amp * c.dag())


def build_h_drive(params: QcnParams, layout: SpaceLayout, shifts: dict | None = None,
                  include: tuple[str, ...] = ("cav_a", "cav_b")) -> QuantumOperator:
    """Coherent probe drives through mirrors M1 (alpha) and M3 (beta)."""
    _require(layout, *include)
    h = hs.zero(layout)
    if "cav_a" in include:
        h = h + _drive_term(layout, "cav_a", params.kappa_ex[0], params.alpha, shifts)
    if "cav_b" in include:
        h = h + _drive_term(layout, "cav_b", params.kappa_ex[2], params.beta, shifts)
    return h


def frame_correction(params: QcnParams, layout: SpaceLayout, shifts: dict) -> QuantumOperator:
    """Hamiltonian left over from the cavity dissipator after a displacement.

    With ``b = c + s`` the dissipator ``kappa D[b]`` equals ``kappa D[c]`` plus
    ``-i[H, .]`` for ``H = i kappa/2 (s* c - s c^+)``.
    """
    h = hs.zero(layout)
    for label, s in shifts.items():
        if not s:
            continue
        kappa = params.kappa_a if label == "cav_a" else params.kappa_b
        c = hs.destroy(layout, label)
        h = h + 0.5j * kappa * (np.conj(s) * c - s * c.dag())
    return h


@dataclass(frozen=True)
class LindbladTerm:
    """``rate/2 (2 O rho O^+ - O^+O rho - rho O^+O)``; ``rate`` may be a schedule."""

    rate: float | Schedule
    op: QuantumOperator
    name: str = ""

    def __post_init__(self):
        if not callable(self.rate) and self.rate < 0:
            raise ParameterError(f"Lindblad rate {self.rate} < 0")

    @property
    def is_static(self) -> bool:
        return not callable(self.rate)

    def rate_at(self, t: float) -> float:
        return self.rate(t) if callable(self.rate) else self.rate


@dataclass(frozen=True)
class NetworkTerm:
    """Unidirectional coupling of a source mode into a sink mode.

    Contributes ``-r(t) ([sink^+, src rho] + [rho src^+, sink])`` with
    ``r(t) = sqrt(kappa_src(t) kappa_sink)``.
    """

    rate: float | Schedule
    src: QuantumOperator
    sink: QuantumOperator
    name: str = ""

    @property
    def is_static(self) -> bool:
        return not callable(self.rate)

    def rate_at(self, t: float) -> float:
        return self.rate(t) if callable(self.rate) else self.rate


def collapse_terms(params: QcnParams, layout: SpaceLayout, spec: CascadeSpec | None = None,
                   schedule: PulseSchedule | None = None) -> list[LindbladTerm]:
    _require(layout, "qe", "cav_a", "cav_b")
    terms = [
        LindbladTerm(params.kappa_a, hs.destroy(layout, "cav_a"), "kappa_a"),
        LindbladTerm(params.kappa_b, hs.destroy(layout, "cav_b"), "kappa_b"),
        LindbladTerm(params.gamma21, hs.transition(layout, 1, 2), "gamma21"),
        LindbladTerm(params.gamma31, hs.transition(layout, 1, 3), "gamma31"),
    ]
    if "src_d1" in layout:
        if schedule is None:
            if spec is None:
                raise ParameterError("source cavity present but no cascade spec given")
            schedule = pulse_coupling_schedule(spec)
        # the source has no intrinsic loss: total decay = output-port coupling
        terms.append(LindbladTerm(schedule.kappa, hs.destroy(layout, "src_d1"), "kappa_d1"))
    if "src_d2" in layout:
        kd2 = spec.kappa_d2 if spec is not None else CascadeSpec().kappa_d2
        terms.append(LindbladTerm(kd2, hs.destroy(layout, "src_d2"), "kappa_d2"))
    return terms


@dataclass(frozen=True)
class CascadeSpec:
    n_s: int = 1
    kappa_d1_ex2_max: float = 10.0
    shape: str = "gaussian"
    tau_d: float = 150.0
    # gaussian: FWHM under ``width_convention``; exponential: unused (rate = kappa_d1_ex2_max)
    tau_s: float = 6.0
    t_window: tuple[float, float] = (0.0, 250.0)
    probe_mode: str = "classical_drive"
    kappa_d2: float = 1.0
    width_convention: str = "amplitude_fwhm"

    def __post_init__(self):
        if self.shape not in PULSE_SHAPES:
            raise ParameterError(f"pulse shape must be one of {PULSE_SHAPES}")
        if self.width_convention not in WIDTH_CONVENTIONS:
            raise ParameterError(f"width_convention must be one of {WIDTH_CONVENTIONS}")
        if self.probe_mode not in PROBE_MODES:
            raise ParameterError(f"probe_mode must be one of {PROBE_MODES}")
        if self.n_s < 0:
            raise ParameterError("n_s must be >= 0")
        if self.tau_s <= 0 or self.kappa_d1_ex2_max <= 0 or self.kappa_d2 <= 0:
            raise ParameterError("tau_s, kappa_d1_ex2_max and kappa_d2 must be > 0")
        object.__setattr__(self, "t_window", tuple(float(t) for t in self.t_window))

    @property
    def sigma(self) -> float:
        """Standard deviation of the Gaussian intensity envelope ``|xi(t)|^2``.

        ``tau_s`` is the FWHM of the field amplitude ``|xi(t)|`` by default,
        or of the intensity with ``width_convention = "intensity_fwhm"``.
        """
        s = self.tau_s / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return s / math.sqrt(2.0) if self.width_convention == "amplitude_fwhm" else s


@dataclass
class PulseSchedule:
    """Time-dependent output coupling of the signal source cavity.

    ``kappa(t)`` empties a Fock-loaded cavity into the normalized target
    intensity ``envelope(t)`` (so the emitted flux is ``n_s * envelope``),
    except where it would exceed ``kappa_max``.
    """

    spec: CascadeSpec
    norm: float
    t_clip: float
    clipped_fraction: float
    diagnostics: list[str] = field(default_factory=list)

    def envelope(self, t):
        """Target intensity ``|xi(t)|^2``."""
        s = self.spec
        t = np.asarray(t, dtype=float)
        if s.shape == "gaussian":
            return self.norm * np.exp(-((t - s.tau_d) ** 2) / (2 * s.sigma**2)) / (s.sigma * math.sqrt(2 * math.pi))
        k = s.kappa_d1_ex2_max
        return np.where(t >= s.tau_d, self.norm * k * np.exp(-k * np.clip(t - s.tau_d, 0, None)), 0.0)

    def cumulative(self, t):
        """Fraction of the target energy emitted before ``t``."""
        s = self.spec
        t = np.asarray(t, dtype=float)
        t0 = s.t_window[0]
        if s.shape == "gaussian":
            z = lambda x: erf((x - s.tau_d) / (s.sigma * math.sqrt(2)))  # noqa: E731
            return self.norm * 0.5 * (z(t) - z(t0))
        k = s.kappa_d1_ex2_max
        return np.where(t >= s.tau_d, self.norm * (1 - np.exp(-k * np.clip(t - s.tau_d, 0, None))), 0.0)

    def kappa_array(self, t):
        s = self.spec
        t = np.asarray(t, dtype=float)
        if s.shape == "exponential":
            return np.where(t >= s.tau_d, s.kappa_d1_ex2_max, 0.0)
        env = self.envelope(t)
        rest = 1.0 - self.cumulative(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(rest > 0, env / rest, np.inf)
        k = np.where(t >= self.t_clip, s.kappa_d1_ex2_max, k)
        return np.minimum(k, s.kappa_d1_ex2_max)

    def kappa(self, t: float) -> float:
        return float(self.kappa_array(t))

    def emitted_flux(self, t, n_s: int | None = None):
        """Flux leaving a source cavity loaded with ``n_s`` photons under this schedule."""
        n_s = self.spec.n_s if n_s is None else n_s
        t = np.asarray(t, dtype=float)
        if self.spec.shape == "exponential":
            k = self.spec.kappa_d1_ex2_max
            return np.where(t >= self.spec.tau_d, n_s * k * np.exp(-k * np.clip(t - self.spec.tau_d, 0, None)), 0.0)
        ts = np.union1d(np.linspace(self.spec.t_window[0], t.max(), 20001), t)
        k = self.kappa_array(ts)
        integral = np.concatenate([[0.0], np.cumsum(0.5 * (k[1:] + k[:-1]) * np.diff(ts))])
        flux = n_s * k * np.exp(-integral)
        return np.interp(t, ts, flux)


def pulse_coupling_schedule(spec: CascadeSpec, t_window=None) -> PulseSchedule:
    if t_window is not None:
        spec = replace(spec, t_window=tuple(t_window))
    t0, t1 = spec.t_window
    if not t0 < spec.tau_d < t1:
        raise ParameterError(f"pulse delay {spec.tau_d} outside window {spec.t_window}")
    kmax = spec.kappa_d1_ex2_max
    if spec.shape == "gaussian":
        z = lambda x: erf((x - spec.tau_d) / (spec.sigma * math.sqrt(2)))  # noqa: E731
        inside = 0.5 * (z(t1) - z(t0))
    else:
        inside = 1.0 - math.exp(-kmax * (t1 - spec.tau_d))
    if 1.0 - inside > 1e-4:
        raise ParameterError(f"pulse not normalizable in window: only {inside:.6f} of its energy fits")
    sched = PulseSchedule(spec, norm=1.0 / inside, t_clip=math.inf, clipped_fraction=0.0)
    if spec.shape == "gaussian":
        # the ideal coupling grows monotonically past the pulse centre; find where it hits the cap
        def excess(t):
            rest = 1.0 - float(sched.cumulative(t))
            return float(sched.envelope(t)) - kmax * rest

        ts = np.linspace(t0, t1, 20001)
        over = np.flatnonzero(sched.envelope(ts) - kmax * (1.0 - sched.cumulative(ts)) >= 0)
        if over.size:
            i = over[0]
            sched.t_clip = ts[0] if i == 0 else brentq(excess, ts[i - 1], ts[i])
            sched.clipped_fraction = float(1.0 - sched.cumulative(sched.t_clip))
    if sched.clipped_fraction > 0.01:
        msg = f"coupling clipped at {kmax:g} for {100 * sched.clipped_fraction:.2f}% of the emitted energy"
        sched.diagnostics.append(msg)
        warnings.warn(msg, stacklevel=2)
    return sched


@dataclass
class GeneratorBundle:
    layout: SpaceLayout
    h_static: QuantumOperator
    lindblad: list[LindbladTerm]
    network: list[NetworkTerm] = field(default_factory=list)
    h_schedule: Callable[[float], QuantumOperator] | None = None
    rho0: DensityMatrix | None = None
    # c-number displacement of cavity fields (displaced frame), by label
    shifts: dict = field(default_factory=dict)
    schedule: PulseSchedule | None = None

    def __post_init__(self):
        ops = [self.h_static] + [t.op for t in self.lindblad]
        ops += [o for n in self.network for o in (n.src, n.sink)]
        for op in ops:
            if op.layout != self.layout:
                raise LayoutError("generator bundle mixes operators from different layouts")
        herm = self.h_static.hermiticity_error()
        if herm > 1e-12:
            raise ParameterError(f"static Hamiltonian not hermitian ({herm:.2e})")

    @property
    def is_static(self) -> bool:
        return (self.h_schedule is None and all(t.is_static for t in self.lindblad)
                and all(n.is_static for n in self.network))


def default_layout(n_a=3, n_b=3, n_d1=None, n_d2=None) -> SpaceLayout:
    """Layout with the given Fock truncations (dimension = N + 1)."""
    specs = [("qe", 3), ("cav_a", n_a + 1), ("cav_b", n_b + 1)]
    if n_d1 is not None:
        specs.append(("src_d1", n_d1 + 1))
    if n_d2 is not None:
        specs.append(("src_d2", n_d2 + 1))
    return hs.make_layout(specs)


def build_driven(params: QcnParams, layout: SpaceLayout, displace: bool = False) -> GeneratorBundle:
    """Time-independent generator of the classically driven system.

    With ``displace`` the cavity fields are written relative to their bare
    driven amplitudes, which keeps the truncation small at strong drive
    without changing the physics.
    """
    validate(params)
    shifts = bare_amplitudes(params) if displace else {}
    h = build_h_qcn(params, layout, shifts) + build_h_drive(params, layout, shifts)
    if shifts:
        h = h + frame_correction(params, layout, shifts)
    return GeneratorBundle(layout, h, collapse_terms(params, layout), shifts=shifts)


def build_cascaded(params: QcnParams, spec: CascadeSpec, layout: SpaceLayout) -> GeneratorBundle:
    """Signal source ``d1`` (Fock ``|n_s>``) cascaded into cavity ``a``.

    The probe on ``b`` is either the classical ``beta`` drive or a driven
    source cavity ``d2`` cascaded into ``b``.
    """
    validate(params)
    _require(layout, "qe", "cav_a", "cav_b", "src_d1")
    cascaded_probe = spec.probe_mode == "cascaded_source"
    if cascaded_probe != ("src_d2" in layout):
        raise LayoutError(f"probe mode {spec.probe_mode!r} does not match layout {layout}")
    if layout.dim("src_d1") < spec.n_s + 1:
        raise LayoutError(f"src_d1 dimension {layout.dim('src_d1')} cannot hold {spec.n_s} photons")
    schedule = pulse_coupling_schedule(spec)
    h = build_h_qcn(params, layout)
    network = [NetworkTerm(lambda t, k1=params.kappa_ex[0]: math.sqrt(schedule.kappa(t) * k1),
                           hs.destroy(layout, "src_d1"), hs.destroy(layout, "cav_a"), "net_a")]
    if cascaded_probe:
        d2 = hs.destroy(layout, "src_d2")
        # steady output sqrt(kappa_d2) <d2> equals beta
        eta = -params.beta * math.sqrt(spec.kappa_d2) / 2
        h = h + 1j * (np.conj(eta) * d2 - eta * d2.dag())
        network.append(NetworkTerm(math.sqrt(spec.kappa_d2 * params.kappa_ex[2]), d2,
                                   hs.destroy(layout, "cav_b"), "net_b"))
    else:
        h = h + build_h_drive(params, layout, include=("cav_b",))
    rho0 = DensityMatrix.product_state(layout, {"src_d1": spec.n_s})
    return GeneratorBundle(layout, h, collapse_terms(params, layout, spec, schedule), network,
                           rho0=rho0, schedule=schedule)
