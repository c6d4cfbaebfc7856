"""Regenerates the special-function fixture tables with mpmath.

Usage: python3 tools/gen_fixtures.py   (writes crates/core/fixtures/*.csv)

Values are stored as (mantissa, log_scale) with mantissa = ±1, so that
value = mantissa * exp(log_scale) never overflows.
"""
import csv
import os

import mpmath as mp

mp.mp.dps = 60
HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "crates", "core", "fixtures")


def split(v):
    v = mp.mpf(v)
    if v == 0:
        return "0", "-inf"
    return ("1" if v > 0 else "-1"), mp.nstr(mp.log(abs(v)), 25)


def pi_tau(lmax, z):
    # Legendre-derivative recurrence in high precision
    pis = [mp.mpf(0), mp.mpf(1)]
    for l in range(2, lmax + 1):
        pis.append(((2 * l - 1) * z * pis[l - 1] - l * pis[l - 2]) / (l - 1))
    taus = [None] + [l * z * pis[l] - (l + 1) * pis[l - 1] for l in range(1, lmax + 1)]
    return pis, taus


def riccati_i(l, x):
    return mp.sqrt(x) * mp.besseli(l + mp.mpf(1) / 2, x)


def riccati_k(l, x):
    return mp.sqrt(x) * mp.besselk(l + mp.mpf(1) / 2, x)


def mie(l, x):
    x = mp.mpf(x)
    b = (-1) ** (l + 1) * mp.pi / 2 * mp.besseli(l + 0.5, x) / mp.besselk(l + 0.5, x)
    a = (-1) ** (l + 1) * mp.pi / 2 * mp.diff(lambda t: riccati_i(l, t), x) / mp.diff(
        lambda t: riccati_k(l, t), x
    )
    return a, b


def amplitudes(x, z):
    x, z = mp.mpf(x), mp.mpf(z)
    lmax = int(4 * x * mp.sqrt(abs(z)) + 60)
    pis, taus = pi_tau(lmax, z)
    sp = mp.mpf(0)
    sa = mp.mpf(0)
    for l in range(1, lmax + 1):
        a, b = mie(l, x)
        c = mp.mpf(2 * l + 1) / (l * (l + 1))
        sp += c * (a * pis[l] + b * taus[l])
        sa += c * (a * taus[l] + b * pis[l])
    return sp, sa


def main():
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "special_functions.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "ell", "x_or_z", "mantissa", "log_scale"])
        for l, x in [(0, 1), (1, 0.1), (3, 2.5), (10, 0.5), (50, 30), (50, 300), (200, 7), (120, 1000)]:
            nu = l + mp.mpf(1) / 2
            w.writerow(["bessel_i", l, x, *split(mp.besseli(nu, x))])
            w.writerow(["bessel_k", l, x, *split(mp.besselk(nu, x))])
        for lmax, z in [(200, -1.0), (200, -1.001), (200, -3.0), (60, -25.0)]:
            pis, taus = pi_tau(lmax, mp.mpf(z))
            for l in sorted({1, 2, 3, 7, 10, 33, lmax // 2, lmax}):
                w.writerow(["pi", l, z, *split(pis[l])])
                w.writerow(["tau", l, z, *split(taus[l])])
        for l, x in [(1, 1), (2, 1), (5, 3), (20, 10), (40, 80)]:
            a, b = mie(l, x)
            w.writerow(["mie_a", l, x, *split(a)])
            w.writerow(["mie_b", l, x, *split(b)])
    with open(os.path.join(OUT, "amplitudes.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "x", "cos_theta", "mantissa", "log_scale"])
        for x, z in [(5, -2.0), (1, -1.0), (2, -7.5), (12, -1.3)]:
            sp, sa = amplitudes(x, z)
            w.writerow(["s_perp", x, z, *split(sp)])
            w.writerow(["s_par", x, z, *split(sa)])


if __name__ == "__main__":
    main()
