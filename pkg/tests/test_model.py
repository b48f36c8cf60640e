import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcnsim import hilbert as hs
from qcnsim.dynamics import evolve, lindblad_rhs
from qcnsim.errors import LayoutError, ParameterError
from qcnsim.model import (
    CascadeSpec,
    GeneratorBundle,
    LindbladTerm,
    QcnParams,
    build_cascaded,
    build_driven,
    build_h_drive,
    build_h_qcn,
    collapse_terms,
    default_layout,
    pulse_coupling_schedule,
    swap_ab,
    validate,
)

FIG4 = QcnParams(kappa_ex=(1.0, 0.0, 0.5, 0.5), beta=0.1)


@pytest.fixture
def lay():
    return default_layout(2, 2)


def test_h_qcn_zero_when_uncoupled_and_resonant(lay):
    h = build_h_qcn(QcnParams(g1=0, g2=0), lay)
    assert abs(h.full()).max() == 0


def test_h_qcn_coupling_element(lay):
    h = build_h_qcn(QcnParams(g1=0.1, g2=0.0), lay).full()
    for n in range(2):
        i = hs.basis_index(lay, {"qe": 1, "cav_a": n + 1})
        j = hs.basis_index(lay, {"qe": 2, "cav_a": n})
        assert h[j, i] == pytest.approx(0.1 * math.sqrt(n + 1))


def test_h_qcn_detuning_terms(lay):
    p = QcnParams(g1=0, g2=0, delta1=0.3, delta2=-0.2, delta_a=0.5, delta_b=0.7)
    assert p.delta3 == pytest.approx(0.8)
    assert p.delta4 == pytest.approx(0.5)
    h = build_h_qcn(p, lay).full()
    i = hs.basis_index(lay, {"qe": 3, "cav_a": 1, "cav_b": 2})
    assert h[i, i].real == pytest.approx(0.3 - 0.4 + 0.5)


finite = st.floats(-2, 2, allow_nan=False)


@given(finite, finite, finite, finite, finite, finite, finite, finite)
def test_generators_hermitian(g1, g2, d1, d2, ar, ai, br, bi):
    lay = default_layout(2, 2)
    p = QcnParams(g1=abs(g1), g2=abs(g2), delta1=d1, delta2=d2, alpha=complex(ar, ai), beta=complex(br, bi))
    assert build_h_qcn(p, lay).hermiticity_error() < 1e-12
    assert build_h_drive(p, lay).hermiticity_error() < 1e-12


def test_drive_element(lay):
    assert abs(build_h_drive(QcnParams(), lay).full()).max() == 0
    p = QcnParams(alpha=0.3)
    h = build_h_drive(p, lay).full()
    vac = hs.basis_index(lay, {})
    one = hs.basis_index(lay, {"cav_a": 1})
    assert h[vac, one] == pytest.approx(1j * math.sqrt(0.5) * 0.3)


def test_collapse_rates_fig2(lay):
    terms = collapse_terms(QcnParams(), lay)
    assert [t.rate for t in terms] == pytest.approx([1.0, 1.0, 0.01, 0.01])
    np.testing.assert_allclose(terms[2].op.full(), hs.transition(lay, 1, 2).full())


def test_collapse_terms_cascaded():
    layout = default_layout(1, 1, 1, 1)
    spec = CascadeSpec(probe_mode="cascaded_source")
    terms = collapse_terms(FIG4, layout, spec, pulse_coupling_schedule(spec))
    assert len(terms) == 6
    assert terms[4].name == "kappa_d1"


def test_kappa_totals():
    p = QcnParams(kappa_ex=(0.4, 0.3, 0.2, 0.1), kappa_in_a=0.05)
    assert p.kappa_a == pytest.approx(0.75)
    assert p.kappa_b == pytest.approx(0.3)


def test_validate():
    assert validate(QcnParams()) == []
    assert validate(QcnParams(gamma21=1.0))
    assert validate(QcnParams(kappa_in_a=0.5))
    with pytest.raises(ParameterError):
        validate(QcnParams(kappa_ex=(0.5, -0.1, 0.5, 0.5)))
    with pytest.raises(ParameterError):
        validate(QcnParams(alpha=complex(float("nan"), 0)))
    with pytest.raises(ParameterError):
        validate(QcnParams(kappa_ex=(0, 0, 0.5, 0.5)))


def test_swap_is_involution():
    p = QcnParams(g1=0.1, g2=0.2, kappa_ex=(0.1, 0.2, 0.3, 0.4), gamma21=0.01, gamma31=0.02, alpha=0.1, beta=0.2j)
    assert swap_ab(swap_ab(p)) == p


def test_params_roundtrip():
    p = QcnParams(alpha=0.1 + 0.2j, kappa_ex=(1, 0, 0.5, 0.5))
    assert QcnParams.from_dict(p.to_dict()) == p


@given(st.integers(0, 2**32 - 1))
def test_rhs_traceless(seed):
    rng = np.random.default_rng(seed)
    layout = default_layout(1, 1, 1)
    spec = CascadeSpec(n_s=1)
    bundle = build_cascaded(FIG4, spec, layout)
    n = layout.total_dim
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = x @ x.conj().T
    rho /= np.trace(rho)
    t = rng.uniform(0, 250)
    d = lindblad_rhs(hs.DensityMatrix(layout, rho), bundle, t)
    assert abs(np.trace(d)) < 1e-10


def test_bundle_checks(lay):
    other = default_layout(1, 1)
    with pytest.raises(LayoutError):
        GeneratorBundle(lay, build_h_qcn(QcnParams(), lay), [LindbladTerm(1.0, hs.destroy(other, "cav_a"))])
    with pytest.raises(ParameterError):
        GeneratorBundle(lay, 1j * hs.number(lay, "cav_a"), [])
    with pytest.raises(ParameterError):
        LindbladTerm(-1.0, hs.destroy(lay, "cav_a"))


def test_cascade_layout_checks():
    with pytest.raises(LayoutError):
        build_cascaded(FIG4, CascadeSpec(n_s=2), default_layout(1, 1, 1))
    with pytest.raises(LayoutError):
        build_cascaded(FIG4, CascadeSpec(probe_mode="cascaded_source"), default_layout(1, 1, 1))
    with pytest.raises(LayoutError):
        build_cascaded(FIG4, CascadeSpec(), default_layout(1, 1))


def test_schedule_bounds_and_normalization():
    spec = CascadeSpec()
    s = pulse_coupling_schedule(spec)
    t = np.linspace(0, 250, 20001)
    k = s.kappa_array(t)
    assert k.min() >= 0 and k.max() <= spec.kappa_d1_ex2_max
    assert abs(np.trapezoid(s.envelope(t), t) - 1) < 1e-4
    assert s.clipped_fraction < 0.01


def test_schedule_errors():
    with pytest.raises(ParameterError):
        pulse_coupling_schedule(CascadeSpec(tau_d=300))
    with pytest.raises(ParameterError):
        pulse_coupling_schedule(CascadeSpec(tau_d=245, tau_s=6))
    with pytest.raises(ParameterError):
        CascadeSpec(shape="square")
    with pytest.warns(UserWarning):
        pulse_coupling_schedule(CascadeSpec(tau_s=0.5, kappa_d1_ex2_max=1.0))


def test_exponential_schedule_flux():
    spec = CascadeSpec(shape="exponential", kappa_d1_ex2_max=0.7, tau_d=1.0, t_window=(0, 60))
    s = pulse_coupling_schedule(spec)
    t = np.linspace(1, 20, 50)
    np.testing.assert_allclose(s.emitted_flux(t, 1), 0.7 * np.exp(-0.7 * (t - 1)), rtol=1e-6)


def _source_only(spec):
    layout = hs.make_layout([("src_d1", spec.n_s + 1), ("qe", 3)])
    sched = pulse_coupling_schedule(spec)
    d = hs.destroy(layout, "src_d1")
    bundle = GeneratorBundle(layout, hs.zero(layout), [LindbladTerm(sched.kappa, d, "kappa_d1")], schedule=sched)
    rho0 = hs.DensityMatrix.product_state(layout, {"src_d1": spec.n_s})
    t0, t1 = spec.t_window
    t = np.linspace(t0, t1, 4001)
    run = evolve(rho0, bundle, t, {"n": d.dag() @ d}, max_step=spec.sigma / 2)
    return t, sched.kappa_array(t) * run.observables["n"], spec.n_s * sched.envelope(t)


@pytest.mark.parametrize("scale,n_s", [(1.0, 1), (2 * math.pi, 1), (1.0, 3)])
def test_source_only_matches_target_envelope(scale, n_s):
    spec = CascadeSpec(n_s=n_s, tau_d=150 * scale, tau_s=6 * scale, t_window=(0, 250 * scale))
    t, flux, target = _source_only(spec)
    err = math.sqrt(np.trapezoid((flux - target) ** 2, t) / np.trapezoid(target**2, t))
    assert err < 0.02


def test_empty_source_emits_nothing():
    t, flux, target = _source_only(CascadeSpec(n_s=0))
    assert abs(flux).max() == 0 and abs(target).max() == 0


def test_empty_source_matches_plain_system():
    t = np.linspace(0, 60, 121)
    p = QcnParams(kappa_ex=(1.0, 0.0, 0.5, 0.5), beta=0.1)
    casc = build_cascaded(p, CascadeSpec(n_s=0, t_window=(0, 250)), default_layout(1, 2, 0))
    plain = build_driven(p, default_layout(1, 2))
    obs = lambda b: {"n_b": hs.number(b.layout, "cav_b"), "s33": hs.transition(b.layout, 3, 3)}  # noqa: E731
    r1 = evolve(casc.rho0, casc, t, obs(casc), rtol=1e-10, atol=1e-12)
    r2 = evolve(hs.DensityMatrix.product_state(plain.layout), plain, t, obs(plain), rtol=1e-10, atol=1e-12)
    for key in ("n_b", "s33"):
        np.testing.assert_allclose(r1.observables[key], r2.observables[key], atol=1e-8)


def test_source_population_independent_of_sink():
    spec = CascadeSpec(n_s=1, shape="exponential", kappa_d1_ex2_max=0.5, tau_d=2.0, t_window=(0, 40))
    t = np.linspace(0, 30, 61)
    traces = []
    for g1 in (0.0, 0.1, 0.5):
        p = QcnParams(g1=g1, kappa_ex=(1.0, 0.0, 0.5, 0.5), beta=0.1)
        b = build_cascaded(p, spec, default_layout(1, 1, 1))
        run = evolve(b.rho0, b, t, {"n_d1": hs.number(b.layout, "src_d1")}, rtol=1e-10, atol=1e-12, max_step=0.5)
        traces.append(run.observables["n_d1"])
    np.testing.assert_allclose(traces[1], traces[0], atol=1e-8)
    np.testing.assert_allclose(traces[2], traces[0], atol=1e-8)
    # while the output coupling is off the source keeps its photon
    assert traces[1][t < 2.0] == pytest.approx(1.0, abs=1e-10)


def test_factorized_without_coupling():
    p = QcnParams(g1=0, g2=0, alpha=0.2, beta=0.1)
    b = build_driven(p, default_layout(2, 2))
    rho0 = hs.DensityMatrix.product_state(b.layout, {"qe": 2})
    run = evolve(rho0, b, np.linspace(0, 10, 6), {}, keep_states=True)
    for rho in run.states:
        dm = hs.DensityMatrix(b.layout, rho)
        q = hs.ptrace(dm, ["qe"])
        c = hs.ptrace(dm, ["cav_a", "cav_b"])
        assert np.abs(rho - np.kron(q, c)).max() < 1e-7

