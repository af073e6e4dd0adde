import cmath
import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, strategies as st

from perclab import theory as th

upper = st.builds(complex, st.floats(-5, 5), st.floats(0.05, 5))


def rel(a, b):
    return abs(a - b) / abs(b)


# --- special functions -----------------------------------------------------------------


def test_gamma_exact_values(golden):
    assert th.gamma_fn(1.0) == 1.0
    assert abs(th.gamma_fn(0.5) - math.sqrt(math.pi)) < 1e-15
    assert rel(th.gamma_fn(1 / 3), float(golden["gamma_one_third"])) < 1e-13


@given(st.floats(0.01, 10))
def test_gamma_recurrence(x):
    assert rel(th.gamma_fn(x + 1), x * th.gamma_fn(x)) < 1e-12


def test_gamma_domain():
    with pytest.raises(ValueError):
        th.gamma_fn(0.0)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 4), st.floats(0, 0.95))
def test_hyp2f1_matches_scipy(a, b, c, z):
    want = sp.hyp2f1(a, b, c, z)
    assert abs(th.hyp2f1(a, b, c, z) - want) <= 1e-11 * max(1.0, abs(want))


def test_hyp2f1_edges():
    assert th.hyp2f1(-0.5, -1 / 3, 7 / 6, 0.0) == 1.0
    gauss = math.gamma(7 / 6) * math.gamma(2) / (math.gamma(5 / 3) * math.gamma(1.5))
    assert abs(th.hyp2f1(-0.5, -1 / 3, 7 / 6, 1.0) - gauss) < 1e-14
    with pytest.raises(ValueError):
        th.hyp2f1(1, 1, 1.5, 1.0)
    with pytest.raises(ValueError):
        th.hyp2f1(1, 1, -2, 0.5)
    with pytest.raises(ValueError):
        th.hyp2f1(1, 1, 2, 1.5)


def test_gauss_summation_against_series_limit():
    eps = 1e-6
    near = th.hyp2f1(-0.5, -1 / 3, 7 / 6, 1 - eps)
    nearer = th.hyp2f1(-0.5, -1 / 3, 7 / 6, 1 - 2 * eps)
    # leading correction is linear in eps since c - a - b = 2 > 1
    assert abs(2 * near - nearer - th.h0()) < 1e-8
    assert abs(near - th.h0()) < 1e-5


def test_h_decreases_to_one(golden):
    xs = np.linspace(0, 3, 31)
    h = [th.h_function(x) for x in xs]
    assert np.all(np.diff(h) < 0) and h[-1] > 1.0 and h[-1] - 1 < 1e-7
    for x, v in golden["H"].items():
        assert rel(th.h_function(float(x)), float(v)) < 1e-12


# --- constants ------------------------------------------------------------------------------


def test_constants_match_oracle(golden):
    for name, fn in (("K_F", th.k_f), ("K1", th.k1), ("K2", th.k2), ("H0", th.h0)):
        assert rel(fn(), float(golden[name])) < 1e-12, name
    assert th.k_f() > 1


def test_kf_two_routes():
    assert rel(th.k_f(), th.k_f_via_logs()) < 1e-12


def test_k1_k2_relation():
    assert rel(th.k1() * th.h0() / th.k2(), (math.pi / 2) ** (5 / 48)) < 1e-13
    assert abs(th.k2() - 18 / (5 * math.pi)) < 1e-15 and th.k1() > 0


# --- maps --------------------------------------------------------------------------------------


def test_mobius_defining_conditions():
    P = th.mobius_to_pm1(0.0, 1.0, 10.0)
    assert abs(P(0.0) + 1) < 1e-12 and abs(P(1.0) - 1) < 1e-12
    assert -1 < P(0.5).real < 1
    assert P.preserves_half_plane


@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.2, 5), upper)
def test_mobius_derivative_finite_differences(u1, s, gap, w):
    u2 = u1 + s + gap
    P = th.mobius_to_pm1(u1, s, u2)
    h = 1e-5 * max(1.0, abs(w - u2))
    fd = (P(w + h) - P(w - h)) / (2 * h)
    assert abs(fd - P.derivative(w)) <= 1e-8 * max(1.0, abs(P.derivative(w)))
    assert P(w).imag > 0


def test_strip_anchor_points():
    p = th.strip_map(0.0, 1.0, 3.0, 1e-9 + 1e-9j)
    assert abs(p.x) < 1e-4 and abs(p.y - 1) < 1e-4
    p = th.strip_map(0.0, 1.0, 3.0, 1.0 + 1e-9j)
    assert abs(p.x) < 1e-4 and abs(p.y) < 1e-4


@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.2, 5), upper)
def test_strip_image_in_strip(u1, s, gap, w):
    p = th.strip_map(u1, s, u1 + s + gap, w)
    assert 0 < p.y < 1


@given(upper)
def test_strip_derivative_finite_differences(w):
    u1, s, u2 = 0.0, 1.0, 3.0

    def psi_t(z):
        return th.strip_tilde(th.mobius_to_pm1(u1, s, u2)(z))

    h = 1e-6 * max(1.0, abs(w))
    fd = abs((psi_t(w + h) - psi_t(w - h)) / (2 * h))
    assert abs(fd - th.strip_derivative_abs(u1, s, u2, w)) <= 1e-6 * max(1.0, fd)


def test_harmonic_measure():
    assert abs(th.harmonic_measure(-1.0, 2.0, 1j) - 0.5) < 1e-15
    assert th.harmonic_measure(0.0, 1.0, 1000 + 1000j) < 1e-3


@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.2, 5), upper)
def test_identity_chain(u1, s, gap, w):
    u2 = u1 + s + gap
    wt = th.mobius_to_pm1(u1, s, u2)(w)
    p = th.strip_map(u1, s, u2, w)
    a = abs(1 - wt * wt)
    assert abs(2 * math.cos(cmath.asin(wt).real) ** 2 - (a + 1 - abs(wt) ** 2)) < 1e-9 * max(1, a)
    sh2, sn2 = math.sinh(math.pi * p.x) ** 2, math.sin(math.pi * p.y) ** 2
    assert abs(sh2 * sn2 - wt.imag ** 2) < 1e-9 * max(1.0, wt.imag ** 2)
    assert abs(sh2 + sn2 - a) < 1e-9 * max(1.0, a)
    om = th.harmonic_measure(u1, s, w)
    assert abs(math.sin(math.pi * om / 2) - th.sin_half_omega(wt)) < 1e-9
    assert abs(th.last_factor(wt) - 1) < 1e-9


# --- predictions --------------------------------------------------------------------------------


def test_psi_matches_oracle(golden):
    for row in golden["psi"]:
        w = complex(*row["w"])
        assert rel(th.psi_factor(row["u1"], row["s"], row["u2"], w), float(row["value"])) < 1e-10


def test_psi_shape():
    assert th.psi_of_x(0.0) == 1.0
    xs = np.linspace(0, 5, 101)
    assert np.all(np.diff([th.psi_of_x(x) for x in xs]) > 0)
    assert abs(th.psi_of_x(8.0) / math.exp(8 * math.pi / 3) - 1 / th.h0()) < 1e-12


@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.2, 5), upper, st.floats(-4, 4), st.floats(0.2, 5))
def test_conformal_covariance(u1, s, gap, w, shift, scale):
    u2 = u1 + s + gap
    s3 = 0.1

    def moved(z):
        return scale * z + shift

    assert rel(th.psi_factor(moved(u1), scale * s, moved(u2), moved(w)), th.psi_factor(u1, s, u2, w)) < 1e-10
    k = scale ** (5 / 48)
    a = th.lemma22_prediction(moved(u1), scale * s, moved(w), scale * s3)
    assert rel(a, th.lemma22_prediction(u1, s, w, s3)) < 1e-10
    b = th.bi_prediction(moved(u1), scale * s, moved(u2), moved(w), scale * s3)
    assert rel(b, th.bi_prediction(u1, s, u2, w, s3)) < 1e-10
    c = th.cardy_crossing(moved(u1), moved(u1 + s), moved(u2), moved(u2 + 1))
    assert abs(c - th.cardy_crossing(u1, u1 + s, u2, u2 + 1)) < 1e-12
    # direct scaling law of the s3-carrying predictions
    assert rel(th.lemma22_prediction(u1, s, w, 2 * s3), 2 ** (5 / 48) * th.lemma22_prediction(u1, s, w, s3)) < 1e-12
    assert k > 0


@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.2, 5), upper)
def test_bi_over_lemma22_reproduces_psi(u1, s, gap, w):
    u2 = u1 + s + gap
    ratio = th.bi_prediction(u1, s, u2, w, 0.3) / th.lemma22_prediction(u1, s, w, 0.3)
    assert rel(ratio, th.psi_factor(u1, s, u2, w)) < 1e-9


def test_lemma22_reflection_symmetry():
    u1, s, w = 0.3, 1.1, complex(0.2, 0.7)
    mirrored = th.lemma22_prediction(-(u1 + s), s, -w.conjugate(), 0.2)
    assert rel(mirrored, th.lemma22_prediction(u1, s, w, 0.2)) < 1e-12


def test_g_positive():
    for x in (0.1, 0.5, 2.0):
        for y in (0.1, 0.5, 0.9):
            assert th.g_function(th.StripPoint(x, y)) > 0


def test_cardy_matches_oracle(golden):
    for row in golden["cardy"]:
        assert rel(th.cardy_crossing(*row["x"]), float(row["value"])) < 1e-10


@given(st.integers(0, 2**30))
def test_cardy_duality(k):
    lam = k / 2**30  # dyadic, so 1 - lam is exact
    assert abs(th.cardy_of_lambda(lam) + th.cardy_of_lambda(1 - lam) - 1) < 1e-12


def test_cardy_degenerations():
    assert abs(th.cardy_of_lambda(0.5) - 0.5) < 1e-14
    assert th.cardy_of_lambda(1e-12) < 1e-3 and th.cardy_of_lambda(1 - 1e-12) > 1 - 1e-3
    with pytest.raises(ValueError):
        th.cardy_crossing(0, 2, 1, 3)
