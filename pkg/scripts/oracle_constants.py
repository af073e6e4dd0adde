"""Produce tests/golden.json with mpmath at 50 digits.

Run once before the build (and again only if the list of golden
quantities changes):  python3 scripts/oracle_constants.py
Nothing here imports the package, so the values are an independent oracle.
"""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50
third = mp.mpf(1) / 3


def H(x):
    return mp.hyp2f1(-mp.mpf(1) / 2, -third, mp.mpf(7) / 6, mp.e ** (-2 * mp.pi * x))


def strip_x_y(u1, s, u2, w):
    u1, s, u2, w = mp.mpf(u1), mp.mpf(s), mp.mpf(u2), mp.mpc(w)
    # solve the two linear conditions directly
    k = (2 * u1 + s - 2 * u2) / s
    m = u1 + (u1 - u2) / k
    wt = k * (w - m) / (w - u2)
    z = -1j / mp.pi * mp.asin(wt) + 0.5j
    return mp.re(z), mp.im(z)


def psi(u1, s, u2, w):
    x, _ = strip_x_y(u1, s, u2, w)
    return mp.e ** (mp.pi * x / 3) * H(x) / H(0)


def cardy(x1, x2, x3, x4):
    lam = mp.mpf(x2 - x1) * (x4 - x3) / ((x3 - x1) * (x4 - x2))
    c = mp.gamma(2 * third) / (mp.gamma(third) * mp.gamma(4 * third))
    return c * lam**third * mp.hyp2f1(third, 2 * third, 4 * third, lam)


def s(v):
    return mp.nstr(v, 20)


golden = {
    "gamma_one_third": s(mp.gamma(third)),
    "K_F": s(2**7 * mp.pi**5 / (3 ** mp.mpf(1.5) * mp.gamma(third) ** 9)),
    "H0": s(H(0)),
    "K1": s(18 * mp.pi ** (mp.mpf(5) / 48) / (5 * mp.pi * 2 ** (mp.mpf(5) / 48)) / H(0)),
    "K2": s(18 / (5 * mp.pi)),
    "H": {str(x): s(H(x)) for x in (0.25, 0.5, 1, 2)},
    "psi": [
        {"u1": 0, "s": 1, "u2": 3, "w": [3.0, 0.866], "value": s(psi(0, 1, 3, mp.mpc(3.0, 0.866)))},
        {"u1": 0, "s": 1, "u2": 3, "w": [1.0, 1.0], "value": s(psi(0, 1, 3, mp.mpc(1.0, 1.0)))},
        {"u1": -1, "s": 0.5, "u2": 2, "w": [0.3, 2.5], "value": s(psi(-1, 0.5, 2, mp.mpc(0.3, 2.5)))},
    ],
    "cardy": [
        {"x": [0, 1, 2, 3], "value": s(cardy(0, 1, 2, 3))},
        {"x": [0, 1, 2.5, 3.5], "value": s(cardy(0, 1, 2.5, 3.5))},
        {"x": [-1, 0.5, 0.75, 4], "value": s(cardy(-1, 0.5, 0.75, 4))},
    ],
}

out = Path(__file__).resolve().parent.parent / "tests" / "golden.json"
out.write_text(json.dumps(golden, indent=2) + "\n")
print(f"wrote {out}")
