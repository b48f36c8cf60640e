"""Steady-state cross modulation: a weak probe on cavity a switched by the drive on cavity b.

Prints the numerical transmittance T_a next to the closed-form value while
the control power |beta|^2/kappa is swept over six decades.
"""

import numpy as np

from qcnsim.analytic import AnalyticInputs, transmissions_analytic
from qcnsim.experiments.config import Truncation
from qcnsim.experiments.scenarios import FIG2_PARAMS, solve_steady

alpha2 = 1e-4
print(f"probe |alpha|^2/kappa = {alpha2:g}")
print(f"{'|beta|^2/kappa':>15} {'T_a numeric':>12} {'T_a closed':>11} {'levels':>14}")
for beta2 in [0.0, *np.logspace(-4, 2, 7)]:
    p = FIG2_PARAMS.with_drives(alpha2, beta2)
    obs, report = solve_steady(p, Truncation())
    closed = transmissions_analytic(AnalyticInputs.from_params(p))[0]
    print(f"{beta2:15.3g} {obs['T_a']:12.4f} {closed:11.4f} {str(tuple(report.levels.values())):>14}")

# the dark cavity becomes transparent once the b transition is saturated
