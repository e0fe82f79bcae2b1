"""Simulation of the discrete chaos process and its partial sums.

``X(n) = sum over ordered tuples of distinct lags l in [1, M]^k of
a(l) eps_{n-l_1} ... eps_{n-l_k}``, driven by innovations at indices
``1-M .. N``.  Index ``j`` lives at stream position ``j + M - 1``, so a
seed fixes the stream independently of how it is consumed.
"""

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ._numeric import set_partitions
from ._windowed import windowed_sum
from .errors import (
    DegenerateWindowError,
    DomainError,
    InvalidInputError,
    ResourceError,
    UnsupportedKernelError,
)
from .kernels import MemoryRegime, coefficients

DEFAULT_BUDGET = 1e10


@dataclass(frozen=True)
class PathConfig:
    """Path length N, lag horizon M, sampling times and seed."""

    N: int
    M: int
    grid: Tuple[float, ...] = (1.0,)
    seed: int = 0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidInputError(f"N must be a positive integer, got {self.N!r}")
        if int(self.M) != self.M or self.M < 1:
            raise InvalidInputError(f"M must be a positive integer, got {self.M!r}")
        grid = tuple(float(t) for t in self.grid)
        if not grid:
            raise InvalidInputError("time grid is empty")
        if any(not 0 < t <= 1 for t in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidInputError("time grid must be strictly increasing in (0, 1]")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def stream_length(self):
        return self.N + self.M


class ChaosPath:
    """Immutable path X(1..N) with its configuration and field."""

    def __init__(self, values, config, field):
        vals = np.array(values, dtype=float)
        vals.setflags(write=False)
        self.values = vals
        self.config = config
        self.field = field

    def __len__(self):
        return self.values.size

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "X(n)"])
            for n, x in enumerate(self.values.tolist(), 1):
                w.writerow([n, repr(x)])


def _regime(value):
    if isinstance(value, MemoryRegime):
        return value
    try:
        return MemoryRegime(str(value).lower())
    except ValueError:
        raise InvalidInputError(f"unknown regime {value!r}") from None


def normalization_factor(regime, N, k=None, alpha=None):
    """A(N): sqrt(N), sqrt(N ln N), sqrt(N) ln N or N^H by regime."""
    regime = _regime(regime)
    N = float(N)
    if not N >= 2:
        raise DomainError(f"normalization needs N >= 2, got {N}")
    if regime is MemoryRegime.SHORT:
        return math.sqrt(N)
    if regime is MemoryRegime.BOUNDARY:
        return math.sqrt(N * math.log(N))
    if regime is MemoryRegime.LONG_K1_BOUNDARY:
        return math.sqrt(N) * math.log(N)
    if k is None or alpha is None:
        raise InvalidInputError("long-memory normalization needs k and alpha")
    H = alpha + k / 2 + 1
    return N**H


def floor_nt(N, t):
    """floor(N t), snapping to the nearest integer within 1e-9 relative."""
    x = N * t
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, x):
        return int(r)
    return int(math.floor(x))


def _innovation_stream(innovations, cfg):
    n = cfg.stream_length
    if hasattr(innovations, "sample"):
        eps = np.asarray(innovations.sample(n, cfg.seed), dtype=float)
    else:
        eps = np.asarray(innovations, dtype=float)
    if eps.shape != (n,):
        raise InvalidInputError(f"innovation stream must have length N + M = {n}")
    return eps


def reference_work(field, N, M):
    """Multiply-add estimate of the direct windowed sum."""
    k = field.k
    return float(N) * math.comb(M, k) * k


def _reference_values(field, N, M, eps, budget):
    k = field.k
    work = reference_work(field, N, M)
    if work > budget:
        raise ResourceError(
            f"direct simulation needs about {work:.3g} multiply-adds per path (budget {budget:.3g})",
            estimate=work, budget=budget,
        )
    combos = np.array(list(itertools.combinations(range(1, M + 1), k)), dtype=np.int64)
    a = coefficients(field, combos) * math.factorial(k)
    keep = a != 0
    combos, a = combos[keep], a[keep]
    n = np.arange(1, N + 1, dtype=np.int64)
    out = np.zeros(N)
    step = max(1, int(2_000_000 // max(N, 1)))
    for s in range(0, len(a), step):
        lag = combos[s:s + step]
        prod = np.ones((N, len(lag)))
        for l in range(k):
            prod *= eps[n[:, None] - lag[None, :, l] + M - 1]
        out += prod @ a[s:s + step]
    return out


def simulate_path(field, cfg, innovations, budget=DEFAULT_BUDGET):
    """Direct windowed evaluation of X(1..N) over ordered distinct lag tuples.

    ``innovations`` is an object with ``sample(count, seed)`` or an array of
    length N + M holding eps at indices ``1-M .. N``.  The lag window is
    ``cfg.M``.
    """
    if cfg.M < field.k:
        raise DegenerateWindowError(f"window M={cfg.M} cannot hold k={field.k} distinct lags")
    eps = _innovation_stream(innovations, cfg)
    vals = _reference_values(field, cfg.N, cfg.M, eps, budget)
    return ChaosPath(vals, cfg, field)


def _row_groups(field):
    # rows that are permutations of each other give the same ordered sum
    groups = {}
    for row, w in zip(field.kernel.rows, field.kernel.coefs):
        key = tuple(sorted(float(g) for g in row))
        groups[key] = groups.get(key, 0.0) + float(w)
    return [(np.array(key), w) for key, w in sorted(groups.items()) if w != 0]


def _channels(field):
    chans = set()
    for gam, _ in _row_groups(field):
        for blocks, _ in set_partitions(field.k):
            for b in blocks:
                chans.add((float(sum(gam[list(b)])), len(b)))
    return sorted(chans)


def fast_work(field, N, M):
    """Multiply-add estimate of the partition/convolution route per path."""
    chans = _channels(field)
    return len(chans) * windowed_sum(chans[0][0], N, M).cost() + N * len(set_partitions(field.k))


def fast_values(field, N, M, eps):
    """X for a batch of streams ``eps`` (shape ``(R, N+M)``) of a separable field.

    For product rows the sum over distinct ordered lags is obtained from the
    moving sums ``U_{e,m}(n) = sum_l l^e eps_{n-l}^m`` by inclusion-exclusion
    over set partitions of the k coordinates.
    """
    if not field.separable:
        raise UnsupportedKernelError("fast path needs a product-power kernel with L = 1")
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    k = field.k
    cache = {}
    powers = {1: eps}

    def channel(e, m):
        key = (e, m)
        if key not in cache:
            if m not in powers:
                powers[m] = eps**m
            cache[key] = windowed_sum(e, N, M)(powers[m])
        return cache[key]

    out = np.zeros((eps.shape[0], N))
    for gam, w in _row_groups(field):
        acc = np.zeros_like(out)
        for blocks, mu in set_partitions(k):
            term = np.full_like(out, float(mu))
            for b in blocks:
                term *= channel(float(sum(gam[list(b)])), len(b))
            acc += term
        out += w * acc
    return out


def fast_path_product_kernel(field, cfg, innovations, budget=DEFAULT_BUDGET):
    """X(1..N) through per-coordinate moving sums (separable kernels only)."""
    if not field.separable:
        raise UnsupportedKernelError("fast path needs a product-power kernel with L = 1")
    if cfg.M < field.k:
        raise DegenerateWindowError(f"window M={cfg.M} cannot hold k={field.k} distinct lags")
    work = fast_work(field, cfg.N, cfg.M)
    if work > budget:
        raise ResourceError(f"fast path needs about {work:.3g} operations (budget {budget:.3g})",
                            estimate=work, budget=budget)
    eps = _innovation_stream(innovations, cfg)
    return ChaosPath(fast_values(field, cfg.N, cfg.M, eps)[0], cfg, field)


def path_values(field, N, M, eps, budget=DEFAULT_BUDGET):
    """X for a batch of streams with the cheapest available route."""
    if M < field.k:
        raise DegenerateWindowError(f"window M={M} cannot hold k={field.k} distinct lags")
    eps = np.atleast_2d(eps)
    if field.separable:
        work = fast_work(field, N, M)
        if work > budget:
            raise ResourceError(f"path needs about {work:.3g} operations (budget {budget:.3g})",
                                estimate=work, budget=budget)
        return fast_values(field, N, M, eps)
    return np.stack([_reference_values(field, N, M, row, budget) for row in eps])


def partial_sums_at(values, grid, A):
    """Y_N(t) = A^{-1} sum_{n <= floor(N t)} X(n) for each t (last axis = n)."""
    values = np.asarray(values, dtype=float)
    N = values.shape[-1]
    csum = np.cumsum(values, axis=-1)
    cols = []
    for t in grid:
        m = floor_nt(N, t)
        cols.append(csum[..., m - 1] / A if m >= 1 else np.zeros(values.shape[:-1]))
    return np.stack(cols, axis=-1)


def partial_sum_process(path, regime=None):
    """Map t -> Y_N(t) on the path's grid, with A(N) from the regime."""
    if len(path) == 0:
        raise InvalidInputError("empty path")
    field = path.field
    regime = regime or field.regime()
    A = normalization_factor(regime, len(path), k=field.k, alpha=field.alpha)
    ys = partial_sums_at(path.values, path.config.grid, A)
    return {t: float(y) for t, y in zip(path.config.grid, ys)}


def write_partial_sums_csv(ys, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "Y_N(t)"])
        for t, y in ys.items():
            w.writerow([repr(float(t)), repr(float(y))])
