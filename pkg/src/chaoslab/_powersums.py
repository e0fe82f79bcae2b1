"""Sums of products of powers, exact up to floating point.

The workhorse is ``pair_sums``: ``s(h) = sum_{i=1}^{U} i^a (i+h)^b`` for many
shifts ``h`` at once.  The first ``head`` terms are summed directly; the rest
is an Euler-Maclaurin tail whose integral part is a Gauss hypergeometric
function.
"""

import numpy as np
from scipy import special

from .errors import DivergenceError

HEAD = 1024
_CHUNK = 256


def _tail_integral(a, b, A, h):
    # int_A^inf x^a (x+h)^b dx = (A+h)^(-p)/p * 2F1(p, -a; p+1; h/(A+h))
    p = -a - b - 1.0
    z = h / (A + h)
    return (A + h) ** (-p) / p * special.hyp2f1(p, -a, p + 1.0, z)


def _tail_sum(a, b, A, h):
    """Euler-Maclaurin estimate of sum_{i>A} i^a (i+h)^b."""
    A = np.asarray(A, dtype=float)
    h = np.asarray(h, dtype=float)
    f = A**a * (A + h) ** b
    u = a / A + b / (A + h)
    du = -a / A**2 - b / (A + h) ** 2
    d2u = 2 * a / A**3 + 2 * b / (A + h) ** 3
    f1 = f * u
    f3 = f * (u**3 + 3 * u * du + d2u)
    return _tail_integral(a, b, A, h) - f / 2 - f1 / 12 + f3 / 720


def pair_sums(a, b, hs, upper=None, head=HEAD):
    """Vector of ``sum_{i=1}^{U_h} i^a (i+h)^b`` over shifts ``hs``.

    ``upper`` is None (infinite sum), a scalar, or an array matching ``hs``.
    Entries with ``U_h < 1`` are zero.
    """
    hs = np.atleast_1d(np.asarray(hs, dtype=np.int64))
    p = -a - b - 1.0
    if p <= 0:
        raise DivergenceError(f"sum of i^{a} (i+h)^{b} diverges (a+b >= -1)")
    if upper is None:
        ups = None
    else:
        ups = np.broadcast_to(np.asarray(upper, dtype=np.int64), hs.shape)
    out = np.zeros(hs.shape, dtype=float)
    i = np.arange(1, head + 1, dtype=float)
    ia = i**a
    for start in range(0, hs.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        hc = hs[sl].astype(float)[:, None]
        terms = ia[None, :] * (i[None, :] + hc) ** b
        if ups is not None:
            terms[i[None, :] > ups[sl][:, None]] = 0.0
        out[sl] = terms.sum(axis=1)
    if ups is None:
        out += _tail_sum(a, b, float(head), hs.astype(float))
    else:
        far = ups > head
        if np.any(far):
            hf = hs[far].astype(float)
            out[far] += _tail_sum(a, b, float(head), hf) - _tail_sum(
                a, b, ups[far].astype(float), hf
            )
    return out


def power_range_sums(e, lo, hi):
    """Vector of ``sum_{l=lo}^{hi} l^e`` (zero where ``hi < lo``), ``e < -1``."""
    if e >= -1:
        raise DivergenceError(f"power sums with exponent {e} >= -1 diverge")
    lo = np.atleast_1d(np.asarray(lo, dtype=np.int64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.int64))
    lo, hi = np.broadcast_arrays(lo, hi)
    n = hi - lo + 1
    out = np.zeros(lo.shape, dtype=float)
    short = (n > 0) & (n <= 32)
    if np.any(short):
        base = lo[short].astype(float)
        cnt = n[short]
        acc = np.zeros(base.shape)
        for t in range(32):
            acc += np.where(t < cnt, (base + t) ** e, 0.0)
        out[short] = acc
    longr = n > 32
    if np.any(longr):
        s = -e
        out[longr] = special.zeta(s, lo[longr].astype(float)) - special.zeta(
            s, hi[longr].astype(float) + 1.0
        )
    return out


def zeta_mass(e):
    """``sum_{i>=1} i^e`` for ``e < -1``."""
    if e >= -1:
        raise DivergenceError(f"power sum with exponent {e} >= -1 diverges")
    return float(special.zeta(-e, 1.0))
