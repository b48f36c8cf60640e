import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qcnsim.errors import StepSizeUnderflow
from qcnsim.integrate import dopri5


def test_exponential_decay():
    t = np.linspace(0, 5, 51)
    out, stats = dopri5(lambda t, y: -0.7j * y - 0.3 * y, t, np.array([1.0 + 0j]), rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(out[:, 0], np.exp((-0.7j - 0.3) * t), atol=1e-9)
    assert stats.accepted > 0 and stats.nfev >= 6 * stats.accepted


def test_dense_output_between_steps():
    # grid much finer than the natural step
    t = np.linspace(0, 2, 2001)
    out, stats = dopri5(lambda t, y: np.cos(t) * np.ones_like(y), t, np.zeros(1, complex), rtol=1e-9, atol=1e-12)
    assert stats.accepted < 200
    np.testing.assert_allclose(out[:, 0].real, np.sin(t), atol=1e-8)


def test_matches_scipy_oracle():
    rng = np.random.default_rng(7)
    n = 6
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    A = A - (np.abs(np.linalg.eigvals(A)).max() + 0.1) * np.eye(n)

    def f(t, y):
        return A @ y * (1 + 0.5 * np.sin(t))

    y0 = rng.normal(size=n) + 0j
    t = np.linspace(0, 3, 31)
    ours, _ = dopri5(f, t, y0, rtol=1e-10, atol=1e-12)
    ref = solve_ivp(f, (0, 3), y0, t_eval=t, method="DOP853", rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ours, ref.y.T, atol=1e-8)


def test_projection_applied_to_samples():
    seen = []
    # taking the real part commutes with y' = -y, as the contract requires
    dopri5(lambda t, y: -y, np.linspace(0, 1, 5), np.array([1.0 + 1e-3j]),
           project=lambda y: y.real.astype(complex), on_sample=lambda i, t, y: seen.append(y.copy()))
    assert len(seen) == 5
    assert all(y.imag[0] == 0 for y in seen[1:])
    assert seen[-1][0].real == pytest.approx(np.exp(-1), rel=1e-6)


def test_underflow_at_blowup():
    with pytest.raises(StepSizeUnderflow) as info:
        dopri5(lambda t, y: y**2, [0.0, 2.0], np.array([1.0 + 0j]))
    assert abs(info.value.t - 1.0) < 1e-3


def test_grid_validation():
    with pytest.raises(ValueError):
        dopri5(lambda t, y: y, [0.0, 0.0], np.ones(1))
    out, _ = dopri5(lambda t, y: y, [0.0], np.ones(1))
    assert out.shape == (1, 1)
