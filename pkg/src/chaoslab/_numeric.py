"""Small numerical helpers: exact summation and set partitions."""

import math
from functools import lru_cache

import numpy as np


def exact_sum(values):
    """Correctly rounded sum of a float array (order independent)."""
    arr = np.asarray(values, dtype=float).ravel()
    return math.fsum(arr.tolist())


def exact_sumsq(values):
    arr = np.asarray(values, dtype=float).ravel()
    return math.fsum((arr * arr).tolist())


def exact_dot(a, b):
    """fsum of elementwise products; exact up to the rounding of each product."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return math.fsum((a * b).tolist())


@lru_cache(maxsize=None)
def set_partitions(k):
    """All set partitions of {0, ..., k-1} with their Moebius weights.

    Returns a tuple of ``(blocks, weight)`` pairs where ``blocks`` is a tuple
    of index tuples and ``weight = prod_B (-1)^(|B|-1) (|B|-1)!``.  Summing
    ``weight * prod_B sum_i prod_{l in B} phi_l(i)`` over all partitions
    gives the sum of ``prod_l phi_l(i_l)`` over tuples with distinct entries.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")

    def build(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for part in build(rest):
            yield [(first,)] + part
            for j in range(len(part)):
                yield part[:j] + [(first,) + part[j]] + part[j + 1:]

    out = []
    for blocks in build(list(range(k))):
        blocks = tuple(sorted(tuple(sorted(b)) for b in blocks))
        weight = 1
        for b in blocks:
            weight *= (-1) ** (len(b) - 1) * math.factorial(len(b) - 1)
        out.append((blocks, weight))
    out.sort()
    return tuple(out)
