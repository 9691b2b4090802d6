from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ringbounds import bounds, maps, modcap, weights
from ringbounds.core import DomainError, Params, SphericalRing

points3 = st.lists(st.floats(-0.57, 0.57), min_size=3, max_size=3)


def test_apply_examples():
    f = maps.RadialMap(2.0, 3)
    assert np.allclose(f.apply([0.5, 0.0, 0.0]), [0.25, 0.0, 0.0])
    assert np.array_equal(f.apply(np.zeros(3)), np.zeros(3))
    assert np.array_equal(maps.RadialMap(0.5, 3).apply(np.zeros(3)), np.zeros(3))
    with pytest.raises(DomainError):
        f.apply([1.0, 1.0, 0.0])
    with pytest.raises(DomainError):
        maps.RadialMap(0.0, 3)


@settings(max_examples=50)
@given(x=points3, a=st.floats(0.2, 4.0))
def test_apply_modulus_and_identity(x, a):
    x = np.array(x)
    y = maps.RadialMap(a, 3).apply(x)
    assert math.hypot(*y) == pytest.approx(math.hypot(*x) ** a, rel=1e-14, abs=1e-300)
    assert np.array_equal(maps.identity_map(3).apply(x), x)


@settings(max_examples=50)
@given(x=points3, a=st.floats(0.3, 3.0), b=st.floats(0.3, 3.0))
def test_composition_law(x, a, b):
    x = np.array(x)
    fa, fb = maps.RadialMap(a, 3), maps.RadialMap(b, 3)
    assert np.allclose(fa.apply(fb.apply(x)), fa.compose(fb).apply(x), rtol=1e-13, atol=1e-300)


def test_composed_oracle_at_p_equals_n():
    P = Params(3, 3)
    f = maps.RadialMap(2.0, 3).compose(maps.RadialMap(1.5, 3))
    assert maps.oracle_Q(f, P).profile(np.array([0.3]))[0] == pytest.approx(3.0**-2, rel=1e-14)


def test_min_modulus_and_image_measure():
    assert maps.identity_map(3).min_modulus(0.3) == pytest.approx(0.3)
    assert maps.RadialMap(2, 3).min_modulus(0.1) == pytest.approx(0.01, rel=1e-14)
    f = maps.RadialMap(2, 3)
    assert f.image_ball_measure(0.1) == pytest.approx(4 * math.pi / 3 * 1e-6, rel=1e-14)
    for a in (0.5, 1, 2):
        g = maps.RadialMap(a, 3)
        # inradius bound holds with equality for radial maps
        assert g.min_modulus(0.2) == pytest.approx((g.image_ball_measure(0.2) / (4 * math.pi / 3)) ** (1 / 3), rel=1e-14)
    with pytest.raises(DomainError):
        f.min_modulus(1.5)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("r", [0.9, 0.1, 1e-3])
def test_inclusion_check(a, r):
    rep = maps.RadialMap(a, 3).inclusion_check(r)
    assert rep.passed
    assert rep.max_preimage_radius < r


def test_image_ring_modulus():
    P = Params(3, 3)
    assert maps.RadialMap(2, 3).image_ring_modulus(P, 0.5, 1.0) == pytest.approx(4 * math.pi * math.log(4) ** -2)
    P2 = Params(3, 2)
    assert maps.identity_map(3).image_ring_modulus(P2, 0.5, 1.0) == modcap.ring_modulus_exact(3, 2, 0.5, 1.0)
    values = [maps.RadialMap(a, 3).image_ring_modulus(P2, 0.5, 1.0) for a in (0.5, 1, 2, 4)]
    assert np.all(np.diff(values) < 0)


def test_oracle_examples():
    assert maps.oracle_Q(maps.identity_map(3), Params(3, 2)).profile(np.array([0.3]))[0] == 1.0
    assert maps.oracle_Q(maps.RadialMap(2, 3), Params(3, 3)).profile(np.array([0.3]))[0] == pytest.approx(0.25)
    r = np.array([0.1, 0.4, 0.9])
    assert np.allclose(maps.oracle_Q(maps.RadialMap(2, 3), Params(3, 2)).profile(r), r / 2, rtol=1e-15)


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(2, 4),
    p=st.floats(1.2, 5.0),
    a=st.floats(0.3, 3.0),
    r1=st.floats(0.05, 0.6),
    w=st.floats(0.05, 0.4),
)
def test_oracle_makes_I_equal_image_integral(n, p, a, r1, w):
    r2 = r1 + w
    P = Params(n, p)
    I = bounds.integral_I(P, maps.oracle_Q(maps.RadialMap(a, n), P), np.zeros(n), r1, r2)
    e = (n - 1) / (p - 1)
    ref = integrate.quad(lambda s: s**-e, r1**a, r2**a, epsabs=0, epsrel=1e-13)[0]
    assert I == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("n, p, a", [(3, 2, 2), (3, 3, 2), (2, 1.5, 0.5), (3, 2.5, 3), (2, 4, 1.5), (3, 2, 1)])
def test_definition_holds_with_equality_for_oracle(n, p, a):
    P = Params(n, p)
    f = maps.RadialMap(a, n)
    ring = SphericalRing(np.zeros(n), 0.3, 0.9)
    rep = maps.verify_ring_pQ(f, maps.oracle_Q(f, P), P, ring)
    assert rep.verdict == "pass"
    assert rep.equality_gap <= 1e-8
    assert rep.min_right >= rep.left * (1 - 1e-9)


@pytest.mark.parametrize("factor", [0.5, 0.9])
def test_definition_detects_scaled_oracle(factor):
    P = Params(3, 2)
    f = maps.RadialMap(2, 3)
    ring = SphericalRing(np.zeros(3), 0.3, 0.9)
    rep = maps.verify_ring_pQ(f, maps.oracle_Q(f, P).scaled(factor), P, ring)
    assert rep.verdict == "fail"
    assert rep.right_eta0 == pytest.approx(factor * rep.left, rel=1e-9)


def test_definition_identity_constant_weight():
    P = Params(3, 2)
    rep = maps.verify_ring_pQ(maps.identity_map(3), weights.constant_weight(1.0, 3), P,
                              SphericalRing(np.zeros(3), 0.5, 1.0))
    assert rep.verdict == "pass" and rep.equality_gap <= 1e-8


def test_definition_guards():
    P = Params(3, 2)
    f = maps.identity_map(3)
    Q = weights.constant_weight(1.0, 3)
    with pytest.raises(DomainError):
        maps.verify_ring_pQ(f, Q, P, SphericalRing((0.1, 0.0, 0.0), 0.2, 0.5))
    with pytest.raises(DomainError):
        maps.verify_ring_pQ(f, Q, P, SphericalRing(np.zeros(3), 0.2, 0.5), trials=5)


def test_theorem1_scan_constant_weight():
    P = Params(3, 2)
    rep = maps.theorem1_scan(maps.identity_map(3), P, weights.constant_weight(2.0, 3))
    assert rep.q0.trend == "constant"
    assert rep.liminf_bound == pytest.approx(bounds.theorem1_constant(P) * 2.0)
    assert rep.table.verdict == "pass"


def test_holder_scan_identity():
    rep = maps.holder_scan(maps.identity_map(3), Params(3, 2.5))
    assert rep.stable
    assert rep.exponent == -1.2
