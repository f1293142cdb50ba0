"""Independent reference computations used to freeze expected values.

Nothing here imports the package's numerical code paths: values come from
mpmath at 50 digits, brute-force enumeration or scipy's own solvers.
"""

import math

import mpmath
import numpy as np
from scipy.optimize import least_squares

mpmath.mp.dps = 50

ROCK_SHELTER = ("0.0006875", "1.72e-7", "8.7468e-11")


def hyperbolic_mp(coefs, t):
    t = mpmath.mpf(t)
    return 1 / sum(mpmath.mpf(a) * t ** i for i, a in enumerate(coefs))


def growth_rate_mp(coefs, t):
    """-(d/dt) log N(t) by mpmath numerical differentiation."""
    return -mpmath.diff(lambda s: mpmath.log(hyperbolic_mp(coefs, s)), mpmath.mpf(t))


def first_nonpositive_bruteforce(coefs, lo, hi, n=200001):
    t = np.linspace(lo, hi, n)
    d = sum(a * t ** i for i, a in enumerate(coefs))
    bad = np.flatnonzero(d <= 0)
    return None if bad.size == 0 else t[bad[0]]


def sign_test_exact(k, n):
    """Two-sided sign test by explicit enumeration of binomial(n, 1/2)."""
    probs = [math.comb(n, i) / 2 ** n for i in range(n + 1)]
    lower = sum(probs[: k + 1])
    upper = sum(probs[k:])
    return min(1.0, 2 * min(lower, upper))


def exponential_lsq(t, y):
    """Raw-scale exponential fit via scipy's trust-region solver."""
    s = max(t.max(), 1.0)
    z = np.polyfit(t / s, np.log(y), 1)
    res = least_squares(lambda p: y - np.exp(p[0] - p[1] * t / s), [z[1], -z[0]],
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return math.exp(res.x[0]), res.x[1] / s, float(np.sum(res.fun ** 2))


def hyperbolic_lsq(t, y, init):
    """Raw-scale hyperbolic fit via scipy's trust-region solver."""
    s = t.max()
    k = len(init) - 1
    b0 = np.array(init) * s ** np.arange(k + 1)
    V = np.vander(t / s, k + 1, increasing=True)
    res = least_squares(lambda b: y - 1 / (V @ b), b0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return res.x / s ** np.arange(k + 1), float(np.sum(res.fun ** 2))


def two_segment_affine_bruteforce(t, z, min_segment):
    """Best split of an affine fit by np.polyfit on every admissible split."""
    best = None
    for j in range(min_segment, len(t) - min_segment + 1):
        rss = 0.0
        for sl in (slice(0, j), slice(j, None)):
            c = np.polyfit(t[sl], z[sl], 1)
            rss += float(np.sum((z[sl] - np.polyval(c, t[sl])) ** 2))
        if best is None or rss < best[0]:
            best = (rss, t[j])
    return best
