"""Fock-truncation ladder.

Each bosonic mode starts at a low photon-number cutoff. Raising a mode's
cutoff by one is adopted when it moves any reported observable by at least
``tolerance``. Once no single raise matters, all modes are raised together
as a final check. The reported levels are that upper set, so every reported
number is within ``tolerance`` of the run one level below it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from ..errors import ConvergenceError


@dataclass
class TruncationReport:
    levels: dict
    deltas: dict = field(default_factory=dict)
    evaluations: int = 0
    mode: str = "auto"
    dimension: int = 0

    def as_dict(self) -> dict:
        out = {f"level_{k}": v for k, v in self.levels.items()}
        out.update({f"delta_{k}": v for k, v in self.deltas.items()})
        out["evaluations"] = self.evaluations
        out["mode"] = self.mode
        out["dimension"] = self.dimension
        return out


def max_change(a: dict, b: dict) -> float:
    """Largest absolute difference over observables present (not None) in both."""
    diffs = [abs(a[k] - b[k]) for k in a if k in b and a[k] is not None and b[k] is not None]
    return max(diffs, default=0.0)


def ladder(evaluate: Callable[[dict], dict], start: dict, dim_of: Callable[[dict], int],
           tolerance: float = 1e-3, max_dim: int = 1500, fixed: dict | None = None):
    """Run the ladder and return ``(observables, report)``.

    ``start`` maps the adjustable modes to their initial cutoffs; ``fixed``
    holds cutoffs that never change. ``evaluate`` receives the merged dict.
    """
    fixed = dict(fixed or {})
    cache = {}

    def run(levels):
        key = tuple(sorted(levels.items()))
        if key not in cache:
            full = {**fixed, **levels}
            dim = dim_of(full)
            if dim > max_dim:
                raise ConvergenceError(
                    f"truncation not converged within dimension cap {max_dim} "
                    f"(needed {full}, dim {dim}); last deltas {deltas}")
            cache[key] = evaluate(full)
        return cache[key]

    levels = dict(start)
    deltas = {m: math.inf for m in levels}
    obs = run(levels)
    while True:
        changed = False
        for mode in list(levels):
            up = {**levels, mode: levels[mode] + 1}
            obs_up = run(up)
            deltas[mode] = max_change(obs, obs_up)
            if deltas[mode] >= tolerance:
                levels, obs, changed = up, obs_up, True
        if changed:
            continue
        upper = {m: n + 1 for m, n in levels.items()}
        obs_upper = run(upper)
        joint = max_change(obs, obs_upper)
        if joint < tolerance:
            deltas = {m: max(d, joint) for m, d in deltas.items()}
            full = {**fixed, **upper}
            report = TruncationReport(full, deltas, len(cache), "auto", dim_of(full))
            return obs_upper, report
        levels, obs = upper, obs_upper


def fixed_levels(evaluate: Callable[[dict], dict], levels: dict, dim_of: Callable[[dict], int]):
    """Evaluate at fixed cutoffs, with a report of the same shape as :func:`ladder`."""
    return evaluate(dict(levels)), TruncationReport(dict(levels), {}, 1, "fixed", dim_of(levels))
