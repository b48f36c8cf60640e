"""Closed-form resonant steady state of the symmetric two-cavity system.

Valid for resonant drives and cavities (all detunings zero) and symmetric
mirrors (kappa_ex1 = kappa_ex2, kappa_ex3 = kappa_ex4) in the weak-drive
regime. Used as an independent check of the numerical solver.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ParameterError
from .model import QcnParams


@dataclass(frozen=True)
class AnalyticInputs:
    g1: float
    g2: float
    kappa_a: float
    kappa_b: float
    gamma21: float
    gamma31: float
    alpha2: float
    beta2: float

    @classmethod
    def from_params(cls, p: QcnParams, rtol: float = 1e-12) -> AnalyticInputs:
        if any(abs(x) > 0 for x in (p.delta1, p.delta2, p.delta3, p.delta4)):
            raise ParameterError("closed forms hold only at resonance (all detunings zero)")
        k1, k2, k3, k4 = p.kappa_ex
        if abs(k1 - k2) > rtol * max(k1, k2, 1) or abs(k3 - k4) > rtol * max(k3, k4, 1):
            raise ParameterError("closed forms assume symmetric cavities (kappa_ex1 = kappa_ex2, kappa_ex3 = kappa_ex4)")
        return cls(p.g1, p.g2, p.kappa_a, p.kappa_b, p.gamma21, p.gamma31, abs(p.alpha) ** 2, abs(p.beta) ** 2)

    def __post_init__(self):
        for name in ("kappa_a", "kappa_b", "gamma21", "gamma31", "alpha2", "beta2"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.kappa_a <= 0 or self.kappa_b <= 0:
            raise ParameterError("cavity losses must be > 0")


def _as_inputs(x) -> AnalyticInputs:
    return x if isinstance(x, AnalyticInputs) else AnalyticInputs.from_params(x)


def denominator(x) -> float:
    """``Gamma_A Gamma_B kappa_a kappa_b + 16 (g1^2 kappa_b |alpha|^2 + g2^2 kappa_a |beta|^2)``."""
    x = _as_inputs(x)
    gamma_a = x.gamma21 + 4 * x.g1**2 / x.kappa_a
    gamma_b = x.gamma31 + 4 * x.g2**2 / x.kappa_b
    return (gamma_a * gamma_b * x.kappa_a * x.kappa_b
            + 16 * (x.g1**2 * x.kappa_b * x.alpha2 + x.g2**2 * x.kappa_a * x.beta2))


def _checked_denominator(x) -> float:
    d = denominator(x)
    if not d > 0:
        raise ParameterError("degenerate closed form: denominator is zero")
    return d


def transmissions_analytic(x) -> tuple[float, float]:
    """Resonant steady-state transmissions ``(T_a, T_b)``; raw values, not clamped."""
    x = _as_inputs(x)
    d = _checked_denominator(x)
    ta = 1 - 8 * x.g1**2 * (x.kappa_b / x.kappa_a) * (x.gamma21 * x.kappa_a + 2 * x.g1**2) / d
    tb = 1 - 8 * x.g2**2 * (x.kappa_a / x.kappa_b) * (x.gamma31 * x.kappa_b + 2 * x.g2**2) / d
    return ta, tb


def populations_analytic(x) -> tuple[float, float]:
    """Excited-state populations ``(<sigma22>, <sigma33>)``."""
    x = _as_inputs(x)
    d = _checked_denominator(x)
    return 8 * x.g1**2 * x.kappa_b * x.alpha2 / d, 8 * x.g2**2 * x.kappa_a * x.beta2 / d


def bare_cavity_photons(p: QcnParams) -> tuple[float, float]:
    """Empty-cavity photon numbers ``2|alpha|^2/kappa_a``, ``2|beta|^2/kappa_b`` (symmetric mirrors)."""
    return 2 * abs(p.alpha) ** 2 / p.kappa_a, 2 * abs(p.beta) ** 2 / p.kappa_b
