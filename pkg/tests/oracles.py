"""Independent brute-force and high-precision oracles used by the tests.

Nothing here imports the package's numerical routines; each function
enumerates definitions directly (or uses mpmath) so it can serve as the
second route of a dual-route check.
"""

import itertools
import math

import mpmath as mp
import numpy as np


def ordered_entries(k, canonical):
    """Expand canonical tuple -> value into every ordering."""
    out = {}
    for t, v in canonical.items():
        for p in itertools.permutations(t):
            out[p] = v
    return out


def naive_eval(k, canonical, X):
    total = 0.0
    for t, v in ordered_entries(k, canonical).items():
        total += v * math.prod(X[i] for i in t)
    return total


def naive_inner(k1, f1, k2, f2):
    if k1 != k2:
        return 0.0
    a, b = ordered_entries(k1, f1), ordered_entries(k2, f2)
    return math.factorial(k1) * math.fsum(v * b[t] for t, v in a.items() if t in b)


def naive_contract(p, f, q, g, r):
    """(f *_r g)(i, l) = sum_j f(j, i) g(j, l) over all ordered entries.

    Ordered entries of g are bucketed by their first r coordinates, so every
    matching pair is still visited once, without the quadratic scan.
    """
    a, b = ordered_entries(p, f), ordered_entries(q, g)
    buckets = {}
    for tb, vb in b.items():
        buckets.setdefault(tb[:r], []).append((tb[r:], vb))
    out = {}
    for ta, va in a.items():
        for rest, vb in buckets.get(ta[:r], ()):
            key = ta[r:] + rest
            out[key] = out.get(key, 0.0) + va * vb
    return {t: v for t, v in out.items() if v != 0.0}


def brute_partial_sum_kernel(a, k, N, M, A=1.0):
    """f_N(i) = A^{-1} sum_n a(n - i) over windows, as canonical dict."""
    out = {}
    for n in range(1, N + 1):
        for lags in itertools.product(range(1, M + 1), repeat=k):
            if len(set(lags)) < k:
                continue
            idx = tuple(n - l for l in lags)
            if list(idx) != sorted(idx):
                continue
            out[idx] = out.get(idx, 0.0) + a(lags) / A
    return {t: v for t, v in out.items() if v != 0.0}


def brute_path(a, k, N, M, eps):
    """X(n) by a double loop; eps[j + M - 1] holds the innovation at index j."""
    X = np.zeros(N)
    for n in range(1, N + 1):
        s = 0.0
        for lags in itertools.product(range(1, M + 1), repeat=k):
            if len(set(lags)) < k:
                continue
            s += a(lags) * math.prod(eps[n - l + M - 1] for l in lags)
        X[n - 1] = s
    return X


def brute_gamma(a, k, n, H):
    """sum over distinct ordered tuples in [1, H]^k of a(i) a(i + n)."""
    total = []
    for t in itertools.product(range(1, H + 1), repeat=k):
        if len(set(t)) < k:
            continue
        total.append(a(t) * a(tuple(v + n for v in t)))
    return math.fsum(total)


def product_power(gammas, c=1.0):
    def a(t):
        return c * math.prod(float(v) ** g for v, g in zip(t, gammas))
    return a


def mp_beta_cg(rows, coefs=None, dps=30):
    """sum w w' prod_l B(g_l + 1, -g_l - g'_l - 1) at high precision."""
    coefs = coefs or [1.0] * len(rows)
    with mp.workdps(dps):
        total = mp.mpf(0)
        for r1, w1 in zip(rows, coefs):
            for r2, w2 in zip(rows, coefs):
                term = mp.mpf(w1) * w2
                for a, b in zip(r1, r2):
                    term *= mp.beta(mp.mpf(a) + 1, -mp.mpf(a) - b - 1)
                total += term
        return float(total)


def mp_pair_sum(a, b, h, upper=None, dps=25):
    """sum_{i=1}^{U} i^a (i+h)^b with mpmath.

    For infinite U: direct head up to H = max(2000, 20 h), then the
    Euler-Maclaurin tail: integral from mp.quad after a power substitution,
    derivatives from mp.diff (H is far beyond the shift scale, so the
    remainder is tiny).  mp.sumem alone was found inaccurate for large h.
    """
    with mp.workdps(dps):
        f = lambda i: mp.power(i, a) * mp.power(i + h, b)  # noqa: E731
        if upper is not None:
            return float(mp.fsum(f(i) for i in range(1, int(upper) + 1)))
        H = max(2000, 20 * int(h))
        head = mp.fsum(f(i) for i in range(1, H + 1))
        # x = H w^(-s) with s = 1/p turns the x^(a+b) tail into a smooth
        # integrand on (0, 1]
        s = 1 / (-mp.mpf(a) - b - 1)
        integral = mp.quad(lambda w: f(H * w ** (-s)) * H * s * w ** (-s - 1), [0, 1])
        tail = integral - f(H) / 2 - mp.diff(f, H) / 12 + mp.diff(f, H, 3) / 720
        return float(head + tail)


def mp_zeta(s, dps=25):
    with mp.workdps(dps):
        return float(mp.zeta(s))


def harmonic(n):
    return math.fsum(1.0 / i for i in range(1, n + 1))


def linear_gamma_exact(n):
    """sum_{i>=1} 1/(i (i+n)) = H_n / n for n >= 1, pi^2/6 for n = 0."""
    if n == 0:
        return math.pi**2 / 6
    return harmonic(n) / n


def centered_exp_third_abs():
    """E|E - 1| ^ 3 for E ~ Exp(1) by mpmath quadrature."""
    with mp.workdps(30):
        return float(mp.quad(lambda x: abs(x - 1) ** 3 * mp.exp(-x), [0, 1, mp.inf]))


def normal_abs_moment(p):
    """E|Z|^p by mpmath quadrature of the normal density."""
    with mp.workdps(30):
        return float(2 * mp.quad(lambda x: x**p * mp.npdf(x), [0, mp.inf]))


def ks_statistic(sample, cdf):
    """One-sample KS distance by the order-statistic formula."""
    x = np.sort(np.asarray(sample, dtype=float))
    R = x.size
    F = np.array([cdf(v) for v in x])
    i = np.arange(1, R + 1)
    return float(max(np.max(i / R - F), np.max(F - (i - 1) / R)))


def ks_two_sample(x, y):
    """sup |F_x - F_y| over the pooled sample points."""
    x, y = np.sort(x), np.sort(y)
    pts = np.concatenate([x, y])
    fx = np.searchsorted(x, pts, side="right") / x.size
    fy = np.searchsorted(y, pts, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))
