"""Dormand-Prince 5(4) integrator with dense output, for complex state vectors.

A hand-rolled stepper rather than ``scipy.integrate.solve_ivp`` because the
master-equation solver projects every accepted state (hermitian
re-symmetrization) before the next step.
"""

from __future__ import annotations

import numpy as np

from .errors import StepSizeUnderflow

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Shampine's continuous extension, y(t + th) = y + h K^T P [th, th^2, th^3, th^4]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


def _rms(x):
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


def _initial_step(fun, t0, y0, f0, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


class IntegrationStats:
    def __init__(self):
        self.nfev = 0
        self.accepted = 0
        self.rejected = 0

    def __repr__(self):
        return f"IntegrationStats(nfev={self.nfev}, accepted={self.accepted}, rejected={self.rejected})"


def dopri5(fun, t_grid, y0, rtol=1e-8, atol=1e-10, max_step=np.inf, first_step=None,
           project=None, on_sample=None):
    """Integrate ``y' = fun(t, y)`` and return ``y`` sampled on ``t_grid``.

    ``project`` (optional) maps an accepted state onto the admissible set and
    must commute with ``fun`` (true for hermitian symmetrization of a
    hermiticity-preserving linear generator); it is applied to both the state
    and its derivative. ``on_sample(i, t, y)`` is called for each grid point;
    when given, the samples are not stored and ``None`` is returned.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    stats = IntegrationStats()

    def f(t, y):
        stats.nfev += 1
        return fun(t, y)

    y = np.array(y0, dtype=complex)
    t = float(t_grid[0])
    t_end = float(t_grid[-1])
    out = None if on_sample else np.empty((len(t_grid), y.size), dtype=complex)

    def emit(i, value):
        if on_sample:
            on_sample(i, t_grid[i], value)
        else:
            out[i] = value

    emit(0, y)
    nxt = 1
    if len(t_grid) == 1:
        return out, stats
    fy = f(t, y)
    h = first_step or _initial_step(f, t, y, fy, rtol, atol)
    K = np.empty((7, y.size), dtype=complex)
    while nxt < len(t_grid):
        h = min(h, max_step, t_end - t)
        if h < 1e-12 * max(1.0, abs(t)):
            raise StepSizeUnderflow(t, h)
        K[0] = fy
        for s in range(1, 7):
            dy = np.tensordot(A[s], K[:s], axes=1)
            K[s] = f(t + C[s] * h, y + h * dy)
        y_new = y + h * np.tensordot(B[:6], K[:6], axes=1)
        # K[6] is f at y_new (the 7th stage row equals B)
        err = h * np.tensordot(E, K, axes=1)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms(err / scale)
        if err_norm <= 1.0:
            stats.accepted += 1
            t_new = t + h if t_end - (t + h) > 1e-12 * max(1.0, abs(t_end)) else t_end
            if nxt < len(t_grid) and t_grid[nxt] <= t_new:
                Q = K.T @ P
                while nxt < len(t_grid) and t_grid[nxt] <= t_new:
                    x = (t_grid[nxt] - t) / h
                    sample = y_new if t_grid[nxt] == t_new else y + h * (Q @ (x ** np.arange(1, 5)))
                    emit(nxt, project(sample) if project else sample)
                    nxt += 1
            if project is not None:
                y_new = project(y_new)
                K[6] = project(K[6])
            t, y, fy = t_new, y_new, K[6].copy()
            factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.2)
        else:
            stats.rejected += 1
            factor = max(MIN_FACTOR, SAFETY * err_norm ** -0.2)
        h *= factor
    return out, stats
