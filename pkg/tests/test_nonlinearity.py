import numpy as np
import pytest

from dirac_graph import (
    HypothesisError,
    Potential,
    ProblemParameters,
    THEOREM_11_SET,
    THEOREM_12_SET,
    check_hypotheses,
    hessian_consistency,
    make_asym_linear,
    make_power,
)
from dirac_graph.nonlinearity import ALL_HYPOTHESES

FREE = ProblemParameters(a=1.0, omega=0.0, V=Potential.constant(0.0))


def u_of(r, direction=None):
    d = np.array([1.0, 0.0]) if direction is None else direction
    return r * d


def test_power_values():
    nl = make_power(2.5)
    u = u_of(1.0)
    assert nl.F(u) == pytest.approx(1 / 2.5)
    assert nl.Fhat(u) == pytest.approx(0.1)
    # pointwise identity Fhat / F = (p - 2) / 2
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        assert nl.Fhat(v) / nl.F(v) == pytest.approx(0.25, rel=1e-12)


def test_power_f7ii_with_stated_constants():
    # |F_u|^sigma <= c3 Fhat |u|^sigma for |u| >= 1 with sigma = 5, c3 = 10
    nl = make_power(2.5)
    assert nl.metadata["sigma"] == pytest.approx(5.0)
    rs = np.geomspace(1.0, 1e3, 200)
    us = np.stack([rs + 0j, np.zeros_like(rs)], axis=-1)
    lhs = np.sqrt(np.sum(np.abs(nl.F_u(us)) ** 2, axis=-1)) ** 5
    rhs = 10.0 * nl.Fhat(us) * rs**5
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_power_small_u_behavior():
    nl = make_power(2.5)
    assert np.allclose(nl.F_u(np.zeros(2, dtype=complex)), 0.0)
    rs = np.geomspace(1e-8, 1e-2, 10)
    ratios = [np.linalg.norm(nl.F_u(u_of(r))) / r for r in rs]
    assert ratios[0] < 1e-3
    assert all(a <= b for a, b in zip(ratios, ratios[1:]))


def test_power_exponent_range_enforced():
    for p in (2.0, 3.0, 4.0, 1.5):
        with pytest.raises(HypothesisError):
            make_power(p)


def test_asym_linear_values():
    nl = make_asym_linear(4.0, FREE)
    u = u_of(1.0)
    assert nl.F(u) == pytest.approx(4 * (0.5 - 1 + np.log(2)), rel=1e-12)
    u99 = u_of(99.0)
    dev = np.linalg.norm(nl.F_u(u99) - 4.0 * u99) / (4.0 * 99.0)
    assert dev == pytest.approx(0.01, rel=1e-10)


def test_asym_linear_fhat_asymptote():
    nl = make_asym_linear(4.0, FREE)
    vals = {r: float(nl.Fhat(u_of(r))) / r for r in (1e2, 1e4)}
    assert abs(vals[1e4] - 2.0) / 2.0 < 0.05
    assert abs(vals[1e2] - 2.0) > abs(vals[1e4] - 2.0)


def test_asym_linear_slope_hypothesis_enforced():
    with pytest.raises(HypothesisError):
        make_asym_linear(0.9, FREE)  # inf b <= sup V + a + omega
    params = ProblemParameters(a=1.0, omega=0.5, V=Potential.constant(0.5))
    with pytest.raises(HypothesisError):
        make_asym_linear(1.9, params)
    nl = make_asym_linear(2.1, params)
    assert nl.metadata["b_inf"] == pytest.approx(2.1)


def test_fhat_positive_away_from_zero():
    rng = np.random.default_rng(1)
    for nl in (make_power(2.5), make_asym_linear(4.0, FREE)):
        for _ in range(200):
            v = rng.standard_normal(2) * 10 ** rng.uniform(-5, 5) + 1j * rng.standard_normal(2)
            b = 4.0 if nl.uses_b else None
            assert nl.Fhat(v, b) > 0


def test_hypothesis_matrix_power():
    nl = make_power(2.5)
    rep = check_hypotheses(nl, ALL_HYPOTHESES, params=FREE)
    passed = {k for k, v in rep.items() if v["pass"]}
    assert set(THEOREM_12_SET) <= passed
    assert "F3" not in passed


def test_hypothesis_matrix_asym():
    nl = make_asym_linear(4.0, FREE)
    rep = check_hypotheses(nl, ALL_HYPOTHESES, params=FREE)
    passed = {k for k, v in rep.items() if v["pass"]}
    assert set(THEOREM_11_SET) <= passed
    assert "F6" not in passed
    assert "witness" in rep["F6"]


def test_hypothesis_failure_reports_witness():
    nl = make_power(2.5)
    rep = check_hypotheses(nl, ("F3",), params=FREE)
    assert not rep["F3"]["pass"]
    assert "witness" in rep["F3"]


def test_omega_gate():
    nl = make_power(2.5)
    bad = ProblemParameters.__new__(ProblemParameters)
    object.__setattr__(bad, "a", 1.0)
    object.__setattr__(bad, "omega", 1.5)
    object.__setattr__(bad, "V", Potential.constant(0.0))
    rep = check_hypotheses(nl, ("omega",), params=bad)
    assert not rep["omega"]["pass"]


def test_hessian_consistency_both_families():
    rng = np.random.default_rng(2)
    samples = rng.standard_normal((30, 2)) + 1j * rng.standard_normal((30, 2))
    for nl, b in ((make_power(2.5), None), (make_asym_linear(4.0, FREE), 4.0)):
        rep = hessian_consistency(nl, samples, b=b)
        assert rep["max_relative_defect"] < 1e-6
        assert rep["gauge_defect"] < 1e-12
        assert rep["evenness_defect"] < 1e-12


def test_hessian_symmetric():
    nl = make_power(2.5)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    H = nl.F_uu(v)
    assert np.allclose(H, H.T)


def test_f1_invariance_via_per_edge_coefficients():
    # b constant per cell edge: any translation permutes identical values
    params = FREE
    nl = make_asym_linear(np.array([4.0, 5.0]), params)
    idx = np.array([0, 1, 0, 1, 0, 1])
    rolled = np.roll(idx, 2)  # translation by one cell on a 3-cell closure
    assert np.array_equal(nl.b_values(idx), nl.b_values(rolled))


def test_gauge_invariance_property():
    from hypothesis import given, settings
    from hypothesis import strategies as st

    @settings(max_examples=40, deadline=None)
    @given(
        theta=st.floats(0, 2 * np.pi, allow_nan=False),
        r=st.floats(1e-6, 1e3, allow_nan=False),
        c1=st.floats(-1, 1),
        c2=st.floats(-1, 1),
    )
    def inner(theta, r, c1, c2):
        d = np.array([c1 + 0.3j, c2 - 0.5j])
        nrm = np.sqrt(np.sum(np.abs(d) ** 2))
        if nrm == 0:
            return
        u = r * d / nrm
        for nl, b in ((make_power(2.5), None), (make_asym_linear(4.0, FREE), 4.0)):
            fu = nl.F(u, b)
            fg = nl.F(np.exp(1j * theta) * u, b)
            assert fg == pytest.approx(fu, rel=1e-12, abs=1e-300)

    inner()
