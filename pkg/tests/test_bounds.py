from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ringbounds import bounds, weights
from ringbounds.core import DomainError, HypothesisViolated, NotConvergedError, Params, RegimeError


# --- I(x0, r1, r2) -------------------------------------------------------------


def test_I_constant_weight_closed_forms():
    assert bounds.integral_I(Params(3, 2), weights.constant_weight(1, 3), np.zeros(3), 0.5, 1.0) == pytest.approx(1.0)
    assert bounds.integral_I(Params(3, 3), weights.constant_weight(1, 3), np.zeros(3), 0.5, 1.0) == pytest.approx(
        math.log(2), rel=1e-12
    )


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(2, 5),
    p=st.floats(1.2, 6.0),
    s=st.floats(-2.0, 2.0),
    r1=st.floats(0.01, 0.5),
    w=st.floats(0.05, 0.5),
)
def test_I_matches_scipy_for_power_weights(n, p, s, r1, w):
    r2 = r1 + w
    P = Params(n, p)
    Q = weights.radial_power_weight(s, n, 1.7)
    e = P.radial_exponent
    ref = integrate.quad(lambda r: r**-e * (1.7 * r**s) ** (-1 / (p - 1)), r1, r2, epsabs=0, epsrel=1e-13)[0]
    assert bounds.integral_I(P, Q, np.zeros(n), r1, r2) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("lam", [0.1, 2.0, 17.0])
def test_I_scaling_in_weight(lam):
    P = Params(3, 2.5)
    Q = weights.radial_log_weight(3)
    base = bounds.integral_I(P, Q, np.zeros(3), 0.05, 0.5)
    scaled = bounds.integral_I(P, Q.scaled(lam), np.zeros(3), 0.05, 0.5)
    assert scaled == pytest.approx(base * lam ** (-1 / (P.p - 1)), rel=1e-10)


def test_I_infinite_when_weight_vanishes():
    P = Params(3, 2)
    rep = bounds.integral_I_report(P, weights.constant_weight(0.0, 3), np.zeros(3), 0.5, 1.0)
    assert rep.value == math.inf
    assert rep.diagnostics


def test_I_zero_when_weight_infinite():
    P = Params(2, 2)
    Q = weights.WeightField(lambda x: np.full(len(x), np.inf), 2, lambda r: np.full(np.shape(r), np.inf))
    assert bounds.integral_I(P, Q, np.zeros(2), 0.5, 1.0) == 0.0


def test_I_non_radial_path_agrees_with_radial():
    P = Params(3, 2)
    radial = weights.radial_power_weight(1.0, 3)
    blind = weights.pointwise_weight(lambda x: np.linalg.norm(x, axis=1), 3)
    exact = bounds.integral_I(P, radial, np.zeros(3), 0.2, 0.9)
    rep = bounds.integral_I_report(P, blind, np.zeros(3), 0.2, 0.9, budget=20_000)
    assert rep.method == "monte-carlo"
    # Every sphere sample of |x| equals r, so the sampled means are exact.
    assert rep.value == pytest.approx(exact, rel=1e-12)


def test_I_non_radial_anisotropic_weight():
    P = Params(3, 2)
    Q = weights.pointwise_weight(lambda x: 1 + x[:, 0] ** 2 / np.sum(x**2, axis=1), 3)
    # spherical mean of 1 + x1^2/|x|^2 is 4/3 at every radius
    exact = (1 / 0.2 - 1 / 0.9) * 0.75
    rep = bounds.integral_I_report(P, Q, np.zeros(3), 0.2, 0.9, budget=50_000)
    assert abs(rep.value - exact) <= rep.abs_error_estimate


def test_integral_I_raises_when_not_converged(monkeypatch):
    fake = bounds.IntegralReport(1.0, 1.0, False, "quadrature")
    monkeypatch.setattr(bounds, "integral_I_report", lambda *a, **k: fake)
    with pytest.raises(NotConvergedError):
        bounds.integral_I(Params(3, 2), weights.constant_weight(1, 3), np.zeros(3), 0.5, 1.0)


# --- psi and J -----------------------------------------------------------------


def test_primitive_of_inverse_psi():
    assert bounds.primitive_J(bounds.inverse_psi(), 1e-3) == pytest.approx(math.log(1e3))


def test_primitive_by_quadrature_for_plain_callable():
    J = bounds.primitive_J(lambda t: 1.0 / np.sqrt(t), 0.25)
    assert J == pytest.approx(1.0, rel=1e-10)


def test_primitive_diverges_for_log_psi_up_to_one():
    # (t log 1/t)^(-n/p) is not integrable at t -> 1 when n/p > 1.
    fpsi = bounds.FmoPsi(Params(3, 2), 0.3)
    raw = lambda t: (t * np.log(1.0 / t)) ** (-1.5)
    with pytest.raises(HypothesisViolated), np.errstate(divide="ignore"):
        bounds.primitive_J(raw, 1e-3)
    # The version cut off at eps0 is fine.
    assert 0 < bounds.primitive_J(fpsi.psi, 1e-3) < math.inf


@pytest.mark.parametrize("n, p", [(3, 3), (3, 2), (2, 1.5), (4, 3.5)])
@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_fmo_psi_integral_two_routes(n, p, eps):
    f = bounds.fmo_psi(Params(n, p), 0.3)
    direct = bounds.primitive_J(f.psi, eps, top=0.3)
    assert f.I(eps) == pytest.approx(direct, rel=1e-8)


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-8])
def test_fmo_psi_at_p_equal_n_is_loglog(eps):
    f = bounds.fmo_psi(Params(3, 3), 0.3)
    assert f.I(eps) == pytest.approx(f.lower_bound(eps), rel=1e-10)


@pytest.mark.parametrize("n, p", [(3, 2), (3, 2.5)])
def test_fmo_psi_lower_bound_holds(n, p):
    f = bounds.fmo_psi(Params(n, p), 0.3)
    for eps in (1e-2, 1e-5):
        assert f.I(eps) >= f.lower_bound(eps)


def test_fmo_psi_eps0_range():
    with pytest.raises(DomainError):
        bounds.fmo_psi(Params(3, 3), 0.5)


# --- growth conditions ---------------------------------------------------------


def test_growth_condition_constant_weight_p_equals_n():
    n = 3
    P = Params(n, n)
    hyp = bounds.GrowthHypothesis("lemma31", alpha=1.0, c=P.omega)
    chk = bounds.check_growth_condition(P, weights.constant_weight(1.0, n), hyp)
    assert chk.min_feasible_c == pytest.approx(P.omega, rel=1e-9)
    assert chk.verdict == "pass"
    bad = bounds.check_growth_condition(P, weights.constant_weight(1.0, n),
                                        bounds.GrowthHypothesis("lemma31", c=0.5 * P.omega))
    assert bad.verdict == "fail" and bad.notes


def test_growth_condition_cond6xc():
    P = Params(2, 2)
    chk = bounds.check_growth_condition(P, weights.constant_weight(1.0, 2), bounds.GrowthHypothesis("cond6xc", c=10))
    assert chk.min_feasible_c == pytest.approx(2 * math.pi, rel=1e-9)


def test_growth_condition_lemma6_needs_regime():
    with pytest.raises(RegimeError):
        bounds.check_growth_condition(Params(3, 2), weights.constant_weight(1.0, 3),
                                      bounds.GrowthHypothesis("lemma6", eps0=0.5))


def test_growth_condition_non_integrable_weight():
    P = Params(3, 3)
    prof = lambda r: 1.0 / np.abs(np.asarray(r) - 0.5)
    Q = weights.WeightField(lambda x: prof(np.linalg.norm(x, axis=1)), 3, prof)
    with pytest.raises(HypothesisViolated), np.errstate(divide="ignore"):
        bounds.check_growth_condition(P, Q, bounds.GrowthHypothesis("lemma31"), r_grid=[0.1])


def test_growth_condition_alpha_above_p():
    with pytest.raises(HypothesisViolated):
        bounds.check_growth_condition(Params(3, 2), weights.constant_weight(1.0, 3),
                                      bounds.GrowthHypothesis("lemma31", alpha=2.5))


# --- measure bounds ------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_measure_bound_sharp_at_p_equals_n(n, a):
    P = Params(n, n)
    c = P.omega * a ** (1 - n)
    for r in (1e-1, 1e-3, 1e-5):
        b = bounds.measure_bound(P, 1.0, c, math.log(1 / r))
        assert b == pytest.approx(P.Omega * r ** (n * a), rel=1e-10)


def test_measure_bound_at_J_zero_is_ball_volume():
    assert bounds.measure_bound(Params(3, 2), 1.0, 1.0, 0.0) == pytest.approx(4 * math.pi / 3)
    assert bounds.measure_bound(Params(3, 3), 1.0, 1.0, 0.0) == pytest.approx(4 * math.pi / 3)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(1.1, 2.9), c=st.floats(0.1, 50.0), J1=st.floats(0.0, 20.0), dJ=st.floats(0.01, 20.0))
def test_measure_bound_decreases_in_J_and_increases_in_c(p, c, J1, dJ):
    P = Params(3, p)
    b1 = bounds.measure_bound(P, 1.0, c, J1)
    b2 = bounds.measure_bound(P, 1.0, c, J1 + dJ)
    assert b2 <= b1
    assert bounds.measure_bound(P, 1.0, 2 * c, J1 + dJ) >= b2


def test_measure_bound_regime_and_hypotheses():
    with pytest.raises(RegimeError):
        bounds.measure_bound(Params(3, 4), 1.0, 1.0, 1.0)
    with pytest.raises(HypothesisViolated):
        bounds.measure_bound(Params(3, 2), 2.5, 1.0, 1.0)
    with pytest.raises(DomainError):
        bounds.measure_bound(Params(3, 2), 1.0, -1.0, 1.0)


def test_constants():
    P = Params(3, 2)
    assert bounds.beta_constant(P, 4 * math.pi) == pytest.approx(1.0)
    Pn = Params(3, 3)
    assert bounds.gamma_constant(Pn, 4 * math.pi / 4) == pytest.approx(6.0)
    assert bounds.gamma0_constant(Pn, 4 * math.pi / 4) == pytest.approx(2.0)


def test_comparison_radius_is_nth_root_of_normalised_measure():
    for P in (Params(3, 2), Params(3, 3), Params(4, 2.5)):
        J = 2.3
        R = bounds.comparison_radius(P, 1.0, 5.0, J)
        assert R == pytest.approx((bounds.measure_bound(P, 1.0, 5.0, J) / P.Omega) ** (1 / P.n), rel=1e-13)


def test_measure_bound_scan_detects_violation():
    P = Params(3, 3)
    c = P.omega
    psi = bounds.inverse_psi()
    ok = bounds.measure_bound_scan(P, 1.0, c, psi, lambda r: P.Omega * r**3)
    assert ok.verdict == "pass"
    bad = bounds.measure_bound_scan(P, 1.0, c, psi, lambda r: P.Omega * r**2.5)
    assert bad.verdict == "fail"
    rows = ok.rows()
    assert set(rows[0]) == {"r", "bound", "measured", "slack"}


def test_schwarz_scan_identity_and_regime_guard():
    P = Params(3, 3)
    rep = bounds.schwarz_ratio_scan(lambda r: r, P, 1.0, P.omega, bounds.inverse_psi())
    assert rep.verdict == "pass"
    assert np.allclose(rep.ratio, 1.0, rtol=1e-12)
    with pytest.raises(RegimeError):
        bounds.schwarz_ratio_scan(lambda r: r, P, 1.0, P.omega, bounds.inverse_psi(), regime="p<n")


# --- origin-derivative bound -----------------------------------------------------


@pytest.mark.parametrize("n, p", [(3, 2), (3, 2.5), (2, 1.5), (5, 1.7)])
def test_theorem1_constant_from_symbolic_chain(n, p):
    eps, M = sp.symbols("epsilon M", positive=True)
    nn, pp = sp.Integer(n), sp.nsimplify(p)
    Omega = sp.pi ** (nn / 2) / sp.gamma(nn / 2 + 1)
    c1 = nn * Omega ** (pp / nn) * ((nn - pp) / (pp - 1)) ** (pp - 1)
    # cap of the image condenser: c1 m^((n-p)/n) <= eps^(-p) * Omega (2 eps)^n M
    m = (Omega * (2 * eps) ** nn * M * eps ** (-pp) / c1) ** (nn / (nn - pp))
    ratio = (m / Omega) ** (1 / nn) / eps
    simplified = sp.simplify(sp.powsimp(sp.expand_power_base(ratio, force=True), force=True))
    assert eps not in simplified.free_symbols
    value = float(simplified.subs(M, 1))
    assert bounds.theorem1_constant(Params(n, p)) == pytest.approx(value, rel=1e-12)


def test_theorem1_constant_value_n3_p2():
    assert bounds.theorem1_constant(Params(3, 2)) == pytest.approx(8 / 3, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(K=st.floats(1e-3, 1e3), lam=st.floats(0.1, 10.0))
def test_theorem1_bound_homogeneity(K, lam):
    P = Params(3, 2.5)
    ratio = bounds.theorem1_bound(P, lam * K) / bounds.theorem1_bound(P, K)
    assert ratio == pytest.approx(lam ** (1 / (P.n - P.p)), rel=1e-12)


def test_theorem1_bound_edges():
    P = Params(3, 2)
    assert bounds.theorem1_bound(P, 0.0) == 0.0
    assert bounds.theorem1_bound(P, math.inf) == math.inf
    with pytest.raises(RegimeError, match="requires p<n"):
        bounds.theorem1_bound(Params(3, 3), 1.0)


# --- log-Holder envelope ---------------------------------------------------------


def test_holder_exponents():
    assert bounds.holder_exponent(Params(3, 2.5)) == -1.2
    assert bounds.holder_exponent(Params(3, 2.5), 2.0) == pytest.approx(-0.4)


def test_holder_envelope_fit_and_stability():
    P = Params(3, 2.5)
    eps = np.geomspace(1e-1, 1e-4, 10)
    I = 3 * (eps ** (-1 / 3) - 1)
    deltas = 0.7 * I**-1.2
    rep = bounds.holder_envelope(P, eps, I, deltas)
    assert rep.N == pytest.approx(0.7)
    assert rep.stable and rep.stability_ratio == pytest.approx(1.0)
    # Growing deltas toward the centre break stability.
    rep = bounds.holder_envelope(P, eps, I, deltas * (eps[0] / eps))
    assert not rep.stable


def test_holder_envelope_input_checks():
    P = Params(3, 2.5)
    with pytest.raises(RegimeError):
        bounds.holder_envelope(Params(3, 2), [0.1, 0.01], [1, 2], [1, 1])
    with pytest.raises(DomainError):
        bounds.holder_envelope(P, [0.01, 0.1], [1, 2], [1, 1])
    with pytest.raises(HypothesisViolated):
        bounds.holder_envelope(P, [0.1, 0.01], [2, 1], [1, 1])
    with pytest.raises(HypothesisViolated):
        bounds.holder_envelope(P, [0.1, 0.01], [1, 2], [1, 1], q_exponent=3.0)
    rep = bounds.holder_envelope(P, [0.1, 0.01], [1, 2], [1, 1])
    assert rep.notes
