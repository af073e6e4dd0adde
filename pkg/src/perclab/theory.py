"""Closed-form predictions: special functions, the strip map and the limit constants.

Everything here is a pure function of floats. Complex arcsin uses the
principal branch (cuts on the real axis outside ``[-1, 1]``), which maps the
upper half-plane onto the half-strip ``{|Re| < pi/2, Im > 0}``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

SERIES_RTOL = 1e-16
MAX_TERMS = 50_000_000
_CHUNK = 4096


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise ValueError("gamma_fn is defined here for x > 0 only")
    return math.gamma(x)


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric ``2F1(a, b; c; z)`` for real ``z`` in ``[0, 1]``.

    Power series with the term recurrence, stopped at the first term below
    ``1e-16`` times the partial sum; Gauss summation at ``z = 1``.
    """
    if c <= 0 and float(c).is_integer():
        raise ValueError("c must not be a non-positive integer")
    if not 0.0 <= z <= 1.0:
        raise ValueError("z must lie in [0, 1]")
    if z == 1.0:
        if not c - a - b > 0:
            raise ValueError("series diverges at z = 1 unless c - a - b > 0")
        return math.gamma(c) * math.gamma(c - a - b) / (math.gamma(c - a) * math.gamma(c - b))
    if z == 0.0:
        return 1.0

    total = 1.0
    term = 1.0
    n0 = 0
    while n0 < MAX_TERMS:
        n = n0 + np.arange(_CHUNK, dtype=np.float64)
        ratios = (a + n) * (b + n) / ((c + n) * (1.0 + n)) * z
        terms = term * np.cumprod(ratios)
        partial = total + np.cumsum(terms)
        small = np.flatnonzero(np.abs(terms) < SERIES_RTOL * np.abs(partial))
        if len(small):
            return float(partial[small[0]])
        total = float(partial[-1])
        term = float(terms[-1])
        n0 += _CHUNK
    raise RuntimeError("hypergeometric series did not converge")


def h_function(x: float) -> float:
    """``H(x) = 2F1(-1/2, -1/3; 7/6; exp(-2 pi x))`` for ``x >= 0``."""
    if x < 0:
        raise ValueError("H is used for x >= 0")
    return hyp2f1(-0.5, -1.0 / 3.0, 7.0 / 6.0, math.exp(-2.0 * math.pi * x))


def h0() -> float:
    return h_function(0.0)


# --- constants --------------------------------------------------------------------


def k_f() -> float:
    """Three-point factorization constant ``2^7 pi^5 / (3^{3/2} Gamma(1/3)^9)``."""
    return 2.0**7 * math.pi**5 / (3.0**1.5 * gamma_fn(1.0 / 3.0) ** 9)


def k_f_via_logs() -> float:
    log_val = 7 * math.log(2.0) + 5 * math.log(math.pi) - 1.5 * math.log(3.0) - 9 * math.lgamma(1.0 / 3.0)
    return math.exp(log_val)


def k2() -> float:
    return 18.0 / (5.0 * math.pi)


def k1() -> float:
    return 18.0 * math.pi ** (5.0 / 48.0) / (5.0 * math.pi * 2.0 ** (5.0 / 48.0)) / h0()


# --- conformal maps ---------------------------------------------------------------


@dataclass(frozen=True)
class StripPoint:
    x: float
    y: float

    def __post_init__(self):
        if not 0.0 < self.y < 1.0:
            raise ValueError("strip point needs 0 < y < 1")
        if not math.isfinite(self.x):
            raise ValueError("strip point needs finite x")


@dataclass(frozen=True)
class MobiusMap:
    """``z -> k (z - m) / (z - u2)``, sending ``u1, u1 + s, u2`` to ``-1, 1, inf``."""

    k: float
    m: float
    u2: float

    def __call__(self, z: complex) -> complex:
        return self.k * (z - self.m) / (z - self.u2)

    def derivative(self, z: complex) -> complex:
        return self.k * (self.m - self.u2) / (z - self.u2) ** 2

    @property
    def preserves_half_plane(self) -> bool:
        return self.k * (self.m - self.u2) > 0


def mobius_to_pm1(u1: float, s: float, u2: float) -> MobiusMap:
    if not s > 0:
        raise ValueError("s must be positive")
    if u1 <= u2 <= u1 + s:
        raise ValueError("u2 must lie outside [u1, u1 + s]")
    k = (2.0 * u1 + s - 2.0 * u2) / s
    m = u1 + (u1 - u2) / k
    return MobiusMap(k, m, u2)


def _check_upper(w: complex) -> complex:
    w = complex(w)
    if not w.imag > 0:
        raise ValueError("w must lie in the open upper half-plane")
    return w


def strip_tilde(z: complex) -> complex:
    """``(-i/pi) arcsin(z) + i/2``: upper half-plane onto the half-strip, ``-1, 1 -> i, 0``."""
    return -1j / math.pi * cmath.asin(z) + 0.5j


def strip_map(u1: float, s: float, u2: float, w: complex) -> StripPoint:
    w = _check_upper(w)
    z = strip_tilde(mobius_to_pm1(u1, s, u2)(w))
    return StripPoint(z.real, z.imag)


def strip_derivative_abs(u1: float, s: float, u2: float, w: complex) -> float:
    """``|Psi'(w)| = |Pi'(w)| / (pi sqrt|1 - wt^2|)``."""
    w = _check_upper(w)
    P = mobius_to_pm1(u1, s, u2)
    wt = P(w)
    return abs(P.derivative(w)) / (math.pi * math.sqrt(abs(1.0 - wt * wt)))


def disk_derivative_abs(u1: float, s: float, u2: float, w: complex) -> float:
    """``|phi'(w)|`` for a map of the half-plane onto the unit disc with ``phi(w) = 0``.

    Evaluated as ``|Pi'(w)| / (2 Im Pi(w))``; any real Mobius ``Pi`` gives
    the same value ``1 / (2 Im w)``.
    """
    w = _check_upper(w)
    P = mobius_to_pm1(u1, s, u2)
    return abs(P.derivative(w)) / (2.0 * P(w).imag)


def harmonic_measure(u1: float, s: float, w: complex) -> float:
    """Harmonic measure of ``(u1, u1 + s)`` from ``w``: the subtended angle over pi."""
    w = _check_upper(w)
    if not s > 0:
        raise ValueError("s must be positive")
    return cmath.phase((u1 + s - w) / (u1 - w)) / math.pi


def sin_half_omega(wt: complex) -> float:
    """``sin(pi omega / 2)`` from the normalized point: ``sqrt(1/2 - (|wt|^2 - 1) / (2|1 - wt^2|))``."""
    wt = complex(wt)
    a = abs(1.0 - wt * wt)
    y = abs(wt) ** 2 - 1.0
    # a - y cancels when |wt| > 1 and Im wt is small; (a - y)(a + y) = 4 Im(wt)^2
    num = 4.0 * wt.imag**2 / (a + y) if y > 0 else a - y
    return math.sqrt(num / (2.0 * a))


def last_factor(wt: complex) -> float:
    """``(cos(Re arcsin wt) / (sqrt|1 - wt^2| sin(pi omega / 2)))^{1/3}``, identically 1."""
    wt = complex(wt)
    num = math.cos(cmath.asin(wt).real)
    return (num / (math.sqrt(abs(1.0 - wt * wt)) * sin_half_omega(wt))) ** (1.0 / 3.0)


# --- predictions --------------------------------------------------------------------


def psi_of_x(x: float) -> float:
    return math.exp(math.pi * x / 3.0) * h_function(x) / h0()


def psi_factor(u1: float, s: float, u2: float, w: complex) -> float:
    """Predicted limit of ``P(u2, w in C(I)) / (P(w in C(I)) P(u2 in C(I)))`` for ``I = [u1, u1+s]``."""
    if not u2 > u1 + s:
        raise ValueError("need u2 > u1 + s")
    return psi_of_x(strip_map(u1, s, u2, w).x)


def g_function(p: StripPoint) -> float:
    x, y = p.x, p.y
    if not x > 0:
        raise ValueError("G needs x > 0")
    sh2 = math.sinh(math.pi * x) ** 2
    sn2 = math.sin(math.pi * y) ** 2
    return (
        math.exp(math.pi * x / 3.0)
        * h_function(x)
        * math.sinh(math.pi * x) ** (-1.0 / 3.0)
        * (sh2 * sn2 / (sh2 + sn2)) ** (11.0 / 96.0)
    )


def bi_prediction(u1: float, s: float, u2: float, w: complex, s3: float) -> float:
    """``s3^{5/48} K1 |Psi'(w)|^{5/48} G(x, y)``: predicted conditional probability of
    the interval-to-radius event given the interval-interval event, small ``s2``."""
    if not s3 > 0:
        raise ValueError("s3 must be positive")
    p = strip_map(u1, s, u2, w)
    return s3 ** (5.0 / 48.0) * k1() * strip_derivative_abs(u1, s, u2, w) ** (5.0 / 48.0) * g_function(p)


def lemma22_prediction(u1: float, s: float, w: complex, s3: float) -> float:
    """``s3^{5/48} K2 |phi'(w)|^{5/48} sin(pi omega / 2)^{1/3}``."""
    w = _check_upper(w)
    if not s3 > 0:
        raise ValueError("s3 must be positive")
    dphi = 1.0 / (2.0 * w.imag)
    om = harmonic_measure(u1, s, w)
    return s3 ** (5.0 / 48.0) * k2() * dphi ** (5.0 / 48.0) * math.sin(math.pi * om / 2.0) ** (1.0 / 3.0)


def cardy_crossing(x1: float, x2: float, x3: float, x4: float) -> float:
    """Crossing probability between boundary arcs ``[x1, x2]`` and ``[x3, x4]`` of the half-plane."""
    if not x1 < x2 < x3 < x4:
        raise ValueError("need x1 < x2 < x3 < x4")
    lam = (x2 - x1) * (x4 - x3) / ((x3 - x1) * (x4 - x2))
    return cardy_of_lambda(lam)


def cardy_of_lambda(lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("cross-ratio must lie in [0, 1]")
    if lam > 0.5:
        return 1.0 - cardy_of_lambda(1.0 - lam)
    c = gamma_fn(2.0 / 3.0) / (gamma_fn(1.0 / 3.0) * gamma_fn(4.0 / 3.0))
    return c * lam ** (1.0 / 3.0) * hyp2f1(1.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0, lam)
