"""Symmetric off-diagonal kernels, power-law coefficient fields and regimes.

A ``SymmetricKernel`` is a finitely supported function on Z^k that is
invariant under permutation of its arguments and zero whenever two
arguments coincide.  Only canonical (strictly increasing) tuples are
stored.

A ``PowerKernelSpec`` describes a homogeneous function g on the positive
orthant that is a finite combination of product powers
``x_1^{g_1} ... x_k^{g_k}`` (or an arbitrary rule dominated by such a
combination).  ``CoefficientField`` turns it into the coefficient sequence
a(i) = g(i) L(i) on tuples of distinct positive lags.
"""

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from ._powersums import zeta_mass
from .errors import (
    DivergenceError,
    DomainError,
    InvalidInputError,
    OutOfModelError,
    ResourceError,
)

SUM_TOL = 1e-12
DEFAULT_MAX_ENTRIES = 50_000_000


class MemoryRegime(enum.Enum):
    SHORT = "short"
    BOUNDARY = "boundary"
    LONG_K1_BOUNDARY = "long_k1_boundary"
    LONG = "long"


def classify_regime(k, alpha):
    """Memory regime of an order-k kernel with homogeneity exponent alpha.

    Long for alpha in (-(k+1)/2, -k/2), boundary at -(k+1)/2, short below.
    For k = 1 the boundary point alpha = -1 is the a(n) ~ c/n case and is
    reported as ``LONG_K1_BOUNDARY``.
    """
    if int(k) != k or k < 1:
        raise InvalidInputError(f"order must be a positive integer, got {k!r}")
    alpha = float(alpha)
    if math.isnan(alpha):
        raise InvalidInputError("alpha is NaN")
    if alpha >= -k / 2:
        raise OutOfModelError(
            f"alpha={alpha} >= -k/2={-k / 2}: coefficients are not square summable"
        )
    edge = -(k + 1) / 2
    if abs(alpha - edge) <= SUM_TOL:
        return MemoryRegime.LONG_K1_BOUNDARY if k == 1 else MemoryRegime.BOUNDARY
    if alpha > edge:
        return MemoryRegime.LONG
    return MemoryRegime.SHORT


@dataclass(frozen=True)
class RowCheck:
    row: tuple
    in_range: tuple
    row_sum: float
    sum_ok: bool
    partial_sums_ok: Optional[bool]

    @property
    def valid(self):
        return all(self.in_range) and self.sum_ok and self.partial_sums_ok is not False


@dataclass(frozen=True)
class ExponentReport:
    alpha: float
    rows: tuple

    @property
    def valid(self):
        return all(r.valid for r in self.rows)

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "valid": self.valid,
            "rows": [
                {
                    "exponents": list(r.row),
                    "in_range": list(r.in_range),
                    "row_sum": r.row_sum,
                    "sum_ok": r.sum_ok,
                    "partial_sums_ok": r.partial_sums_ok,
                }
                for r in self.rows
            ],
        }


def _as_rows(rows):
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInputError("exponent matrix must be a non-empty m x k array")
    if np.isnan(arr).any():
        raise InvalidInputError("exponent matrix contains NaN")
    return arr


def validate_exponents(rows, alpha):
    """Check each row of exponents against the product-power family.

    Every exponent must lie in (-1, -1/2) and each row must sum to alpha
    (absolute tolerance 1e-12).  When alpha >= -(k+1)/2 we also check that
    every sum of r exponents lies in (-(r+1)/2, -r/2) for r = 1..k-1; this
    follows from the first two conditions and is kept as a consistency check.
    """
    arr = _as_rows(rows)
    alpha = float(alpha)
    if math.isnan(alpha):
        raise InvalidInputError("alpha is NaN")
    k = arr.shape[1]
    checks = []
    for row in arr:
        in_range = tuple(bool(-1.0 < g < -0.5) for g in row)
        s = float(math.fsum(row))
        sum_ok = abs(s - alpha) <= SUM_TOL
        partial = None
        if alpha >= -(k + 1) / 2 - SUM_TOL and k > 1:
            partial = True
            for r in range(1, k):
                for sub in itertools.combinations(row, r):
                    ps = math.fsum(sub)
                    if not (-r / 2 - 0.5 < ps < -r / 2):
                        partial = False
        checks.append(RowCheck(tuple(float(g) for g in row), in_range, s, sum_ok, partial))
    return ExponentReport(alpha, tuple(checks))


def _merge_rows(rows, coefs):
    table = {}
    for row, w in zip(rows, coefs):
        key = tuple(float(g) for g in row)
        table[key] = table.get(key, 0.0) + float(w)
    keys = sorted(table)
    return np.array(keys, dtype=float), np.array([table[key] for key in keys])


class PowerKernelSpec:
    """Homogeneous kernel g dominated by product powers.

    Parameters
    ----------
    rows : (m, k) array_like
        Exponents ``gamma_jl``.  Without ``func``, ``g(x) = sum_j coefs_j
        prod_l x_l^{gamma_jl}``; with ``func`` the rows only define the
        majorant ``g*(x) = scale * sum_j prod_l x_l^{gamma_jl}``.
    coefs : array_like, optional
        Row weights (default all ones).
    alpha : float, optional
        Homogeneity exponent; inferred from the row sums when omitted.
    scale : float, optional
        Constant c of the majorant (default ``max |coefs|``).
    func : callable, optional
        Rule ``func(x) -> g(x)`` on arrays of shape ``(..., k)`` with
        positive entries.
    strict : bool
        If True (default) the rows must pass ``validate_exponents``.  Use
        ``strict=False`` for deliberately out-of-family test kernels such as
        non-homogeneous cancelling combinations; those get ``in_family=False``.
    """

    def __init__(self, rows, coefs=None, alpha=None, scale=None, func=None,
                 strict=True, label=None):
        arr = _as_rows(rows)
        m, k = arr.shape
        w = np.ones(m) if coefs is None else np.asarray(coefs, dtype=float).ravel()
        if w.shape != (m,) or not np.all(np.isfinite(w)):
            raise InvalidInputError("coefs must be finite with one entry per row")
        sums = arr.sum(axis=1)
        homogeneous = bool(np.all(np.abs(sums - sums[0]) <= SUM_TOL))
        if alpha is None:
            alpha = float(sums[0]) if homogeneous else float(sums.max())
        report = validate_exponents(arr, alpha)
        in_family = report.valid and homogeneous
        if strict and not in_family:
            raise InvalidInputError(
                "exponent rows violate the product-power family; pass strict=False "
                "to build an out-of-family kernel"
            )
        if scale is None:
            if func is not None:
                raise InvalidInputError("a custom rule needs an explicit scale")
            scale = float(np.max(np.abs(w)))
        scale = float(scale)
        if not scale > 0:
            raise InvalidInputError("scale must be positive")
        self._rows = arr
        self._rows.setflags(write=False)
        self._coefs = w
        self._coefs.setflags(write=False)
        self._alpha = float(alpha)
        self._scale = scale
        self._func = func
        self._k = k
        self._homogeneous = homogeneous
        self._in_family = in_family
        self.label = label or ("product-power" if in_family else "outside product-power family")

    @classmethod
    def product(cls, gammas, coef=1.0, **kw):
        """Single product power ``coef * prod_l x_l^{gammas_l}``."""
        return cls([list(gammas)], [coef], **kw)

    @property
    def k(self):
        return self._k

    @property
    def alpha(self):
        return self._alpha

    @property
    def rows(self):
        return self._rows

    @property
    def coefs(self):
        return self._coefs

    @property
    def scale(self):
        return self._scale

    @property
    def func(self):
        return self._func

    @property
    def homogeneous(self):
        return self._homogeneous

    @property
    def in_family(self):
        return self._in_family

    @property
    def separable(self):
        """True when g is an explicit combination of product powers."""
        return self._func is None

    def _row_terms(self, x):
        x = np.asarray(x, dtype=float)
        pos = np.all(x > 0, axis=-1)
        logx = np.log(np.where(x > 0, x, 1.0))
        terms = np.exp(logx @ self._rows.T)
        return terms * pos[..., None]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self._k:
            raise InvalidInputError(f"expected points of dimension {self._k}")
        if self._func is not None:
            pos = np.all(x > 0, axis=-1)
            safe = np.where(x > 0, x, 1.0)
            val = np.asarray(self._func(safe), dtype=float) * pos
        else:
            val = self._row_terms(x) @ self._coefs
        return float(val) if np.ndim(val) == 0 else val

    def bound(self, x):
        """Majorant ``g*(x) = c sum_j prod_l x_l^{gamma_jl}``."""
        val = self._scale * self._row_terms(x).sum(axis=-1)
        return float(val) if np.ndim(val) == 0 else val

    def symmetrized(self):
        """Average of g over all permutations of its arguments."""
        perms = list(itertools.permutations(range(self._k)))
        rows = [row[list(p)] for row in self._rows for p in perms]
        if self._func is None:
            coefs = [w / len(perms) for w in self._coefs for _ in perms]
            r, c = _merge_rows(rows, coefs)
            return PowerKernelSpec(r, c, alpha=self._alpha, scale=self._scale,
                                   strict=False, label=self.label)._with_family(self._in_family)
        f = self._func
        idx = [list(p) for p in perms]

        def sym(x):
            return sum(f(x[..., p]) for p in idx) / len(idx)

        r, _ = _merge_rows(rows, np.ones(len(rows)))
        return PowerKernelSpec(r, None, alpha=self._alpha, scale=self._scale,
                               func=sym, strict=False, label=self.label)._with_family(self._in_family)

    def _with_family(self, flag):
        self._in_family = flag
        return self

    @property
    def is_symmetric(self):
        if self._func is not None:
            return False
        base = _merge_rows(self._rows, self._coefs)
        sym = self.symmetrized()
        return (base[0].shape == sym.rows.shape and np.allclose(base[0], sym.rows)
                and np.allclose(base[1], sym.coefs, rtol=1e-14, atol=0.0))

    def __repr__(self):
        return (f"PowerKernelSpec(k={self._k}, alpha={self._alpha}, rows={self._rows.tolist()}, "
                f"coefs={self._coefs.tolist()})")


def _certificate(rule, k, radii):
    # sup of |L - 1| over lag tuples with largest coordinate equal to R
    fracs = np.array([1.0, 0.9, 0.75, 0.5, 0.3, 0.1, 0.05])
    sups = []
    for R in radii:
        pts = []
        for combo in itertools.combinations(fracs, k):
            lags = np.maximum(np.round(np.array(combo) * R), 1).astype(np.int64)
            lags[0] = R
            if len(set(lags.tolist())) == k:
                pts.append(lags)
        pts = np.array(pts)
        sups.append(float(np.max(np.abs(np.asarray(rule(pts), dtype=float) - 1.0))))
    return np.array(sups)


class CoefficientField:
    """Coefficients a(i) = g(i) L(i) on distinct positive lags, truncated at M.

    The kernel is symmetrized on construction.  ``perturbation`` is an
    optional rule L on integer lag arrays of shape ``(n, k)``; it must tend
    to 1.  The sup of |L - 1| on shells of radius 2^3 .. 2^20 is stored as
    ``decay_certificate`` and must fall below ``certificate_tol`` at the
    largest radius.
    """

    def __init__(self, kernel, M, perturbation=None, certificate_tol=1e-2):
        if not isinstance(kernel, PowerKernelSpec):
            raise InvalidInputError("kernel must be a PowerKernelSpec")
        if int(M) != M or M < 1:
            raise InvalidInputError(f"lag horizon M must be a positive integer, got {M!r}")
        self.kernel = kernel.symmetrized()
        self.M = int(M)
        self.perturbation = perturbation
        self.decay_certificate = None
        if perturbation is not None:
            radii = [2**j for j in range(3, 21)]
            cert = _certificate(perturbation, self.kernel.k, radii)
            if not np.all(np.isfinite(cert)) or cert[-1] > certificate_tol:
                raise InvalidInputError(
                    f"perturbation does not tend to 1: sup|L-1| at radius 2^20 is {cert[-1]:.3g}"
                )
            self.decay_certificate = cert

    @property
    def k(self):
        return self.kernel.k

    @property
    def alpha(self):
        return self.kernel.alpha

    @property
    def separable(self):
        return self.perturbation is None and self.kernel.separable

    def with_horizon(self, M):
        out = object.__new__(CoefficientField)
        out.__dict__.update(self.__dict__)
        if int(M) != M or M < 1:
            raise InvalidInputError(f"lag horizon M must be a positive integer, got {M!r}")
        out.M = int(M)
        return out

    def regime(self):
        return classify_regime(self.k, self.alpha)


def coefficients(field, lags):
    """Vectorized a(lags) for an integer array of shape ``(n, k)``."""
    lags = np.asarray(lags, dtype=np.int64)
    if lags.ndim != 2 or lags.shape[1] != field.k:
        raise InvalidInputError(f"lags must have shape (n, {field.k})")
    if np.any(lags <= 0):
        raise DomainError("lags must be positive")
    vals = np.asarray(field.kernel(lags.astype(float)), dtype=float).reshape(-1)
    if field.perturbation is not None:
        vals = vals * np.asarray(field.perturbation(lags), dtype=float).reshape(-1)
    srt = np.sort(lags, axis=1)
    diag = np.any(srt[:, 1:] == srt[:, :-1], axis=1) if field.k > 1 else np.zeros(len(lags), bool)
    vals[diag] = 0.0
    return vals


def eval_coefficient(field, lags):
    """a(lags) = g(lags) L(lags) for distinct lags, exactly 0 otherwise."""
    lags = tuple(int(v) for v in lags)
    if len(lags) != field.k:
        raise InvalidInputError(f"expected {field.k} lags, got {len(lags)}")
    if any(v <= 0 for v in lags):
        raise DomainError(f"lags must be positive, got {lags}")
    if len(set(lags)) < len(lags):
        return 0.0
    return float(coefficients(field, np.array([lags]))[0])


def _tail_one(e, M):
    # sum_{i>M} i^e <= M^(e+1)/(-e-1) + M^e
    return M ** (e + 1) / (-e - 1) + M**e


def _pair_exponents(kernel):
    rows, k = kernel.rows, kernel.k
    for j1 in range(len(rows)):
        for j2 in range(len(rows)):
            e = rows[j1] + rows[j2]
            if np.any(e >= -1):
                raise DivergenceError("some 2*gamma + 1 >= 0: coefficients are not square summable")
            yield e


def tail_mass_bound(field, M):
    """Upper bound on sum of g*(i)^2 over k-tuples with max coordinate > M.

    Expands ``g*^2`` into product powers and applies a union bound over the
    coordinate that exceeds M, with ``sum_{i>M} i^e <= M^(e+1)/(-e-1) + M^e``.
    """
    if M < 1:
        raise DomainError("M must be >= 1")
    M = float(M)
    total = []
    for e in _pair_exponents(field.kernel):
        z = [zeta_mass(v) for v in e]
        for l, v in enumerate(e):
            others = math.prod(z[:l] + z[l + 1:])
            total.append(_tail_one(v, M) * others)
    return field.kernel.scale**2 * math.fsum(total)


def full_mass(field):
    """Sum of g*(i)^2 over all positive k-tuples."""
    total = [math.prod(zeta_mass(v) for v in e) for e in _pair_exponents(field.kernel)]
    return field.kernel.scale**2 * math.fsum(total)


def relative_tail_bound(field, M):
    return tail_mass_bound(field, M) / full_mass(field)


def horizon_for_tolerance(field, tol=1e-3):
    """Smallest M whose relative tail bound is at most ``tol``."""
    if not 0 < tol < 1:
        raise DomainError("tolerance must lie in (0, 1)")
    hi = 1
    while relative_tail_bound(field, hi) > tol:
        hi *= 2
        if hi > 2**62:
            raise ResourceError("no finite horizon reaches the tolerance")
    lo = hi // 2
    if relative_tail_bound(field, max(lo, 1)) <= tol:
        return max(lo, 1)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if relative_tail_bound(field, mid) <= tol:
            hi = mid
        else:
            lo = mid
    return hi


class SymmetricKernel:
    """Finitely supported symmetric function on Z^k vanishing on diagonals.

    Parameters
    ----------
    k : int
        Order.
    entries : mapping, optional
        Tuple -> value.  Tuples are sorted into canonical order; tuples with
        a repeated coordinate must carry the value 0.  Permutations of the
        same tuple must agree.
    """

    def __init__(self, k, entries=None):
        if int(k) != k or k < 1:
            raise InvalidInputError(f"order must be a positive integer, got {k!r}")
        k = int(k)
        entries = dict(entries or {})
        if entries:
            idx = np.array([tuple(int(v) for v in t) for t in entries], dtype=np.int64)
            if idx.ndim != 2 or idx.shape[1] != k:
                raise InvalidInputError(f"every tuple must have length {k}")
            vals = np.array([float(v) for v in entries.values()])
        else:
            idx = np.zeros((0, k), dtype=np.int64)
            vals = np.zeros(0)
        self._set(k, *_canonicalize(idx, vals, merge="agree"))

    def _set(self, k, idx, vals):
        self._k = k
        self._index = np.ascontiguousarray(idx, dtype=np.int64)
        self._values = np.ascontiguousarray(vals, dtype=float)
        self._index.setflags(write=False)
        self._values.setflags(write=False)
        self._lookup = None

    @classmethod
    def from_arrays(cls, k, index, values, merge="sum", canonical=False):
        """Build from an index array ``(S, k)`` and values ``(S,)``.

        ``merge="sum"`` adds values of repeated canonical tuples,
        ``merge="agree"`` requires them to coincide.  With
        ``canonical=True`` the caller guarantees sorted, unique, strictly
        increasing rows and no further checks are made.
        """
        out = object.__new__(cls)
        index = np.asarray(index, dtype=np.int64).reshape(-1, k)
        values = np.asarray(values, dtype=float).reshape(-1)
        if index.shape[0] != values.shape[0]:
            raise InvalidInputError("index and values differ in length")
        if canonical:
            keep = values != 0
            out._set(k, index[keep], values[keep])
        else:
            out._set(k, *_canonicalize(index, values, merge=merge))
        return out

    @property
    def order(self):
        return self._k

    k = order

    @property
    def index(self):
        return self._index

    @property
    def values(self):
        return self._values

    def __len__(self):
        return self._values.size

    def entries(self):
        return {tuple(int(v) for v in row): float(x) for row, x in zip(self._index, self._values)}

    def value(self, *idx):
        if len(idx) == 1 and isinstance(idx[0], (tuple, list)):
            idx = tuple(idx[0])
        if len(idx) != self._k:
            raise InvalidInputError(f"expected {self._k} indices")
        key = tuple(sorted(int(v) for v in idx))
        if self._lookup is None:
            self._lookup = self.entries()
        return self._lookup.get(key, 0.0)

    __getitem__ = value

    @property
    def permutations_per_tuple(self):
        return math.factorial(self._k)

    def squared_norm(self):
        """Sum of squares over all ordered tuples."""
        from ._numeric import exact_sumsq

        return self.permutations_per_tuple * exact_sumsq(self._values)

    def ordered(self):
        """Expand to every ordered tuple: ``(index (S*k!, k), values)``."""
        perms = list(itertools.permutations(range(self._k)))
        idx = np.concatenate([self._index[:, list(p)] for p in perms]) if len(self) else \
            np.zeros((0, self._k), dtype=np.int64)
        vals = np.tile(self._values, len(perms)) if len(self) else np.zeros(0)
        return idx, vals

    def support_box(self):
        if not len(self):
            return None
        return int(self._index.min()), int(self._index.max())

    def to_dense(self, lo=None, hi=None):
        """Dense symmetric array over ``[lo, hi]^k`` (full box by default)."""
        box = self.support_box()
        if lo is None or hi is None:
            if box is None:
                return np.zeros((0,) * self._k), 0
            lo, hi = box
        n = hi - lo + 1
        dense = np.zeros((n,) * self._k)
        idx, vals = self.ordered()
        if vals.size:
            dense[tuple((idx - lo).T)] = vals
        return dense, lo

    def _combine(self, other, sign):
        if not isinstance(other, SymmetricKernel) or other._k != self._k:
            return NotImplemented
        idx = np.concatenate([self._index, other._index])
        vals = np.concatenate([self._values, sign * other._values])
        return SymmetricKernel.from_arrays(self._k, idx, vals, merge="sum")

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        c = float(c)
        return SymmetricKernel.from_arrays(self._k, self._index, c * self._values, canonical=True)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __eq__(self, other):
        if not isinstance(other, SymmetricKernel):
            return NotImplemented
        return (self._k == other._k and np.array_equal(self._index, other._index)
                and np.array_equal(self._values, other._values))

    __hash__ = None

    def __repr__(self):
        return f"SymmetricKernel(k={self._k}, entries={len(self)})"

    def to_text(self):
        lines = [f"k={self._k}"]
        for row, v in zip(self._index.tolist(), self._values.tolist()):
            lines.append(" ".join(str(i) for i in row) + " " + repr(v))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = text.splitlines()
        k = None
        idx, vals = [], []
        for no, raw in enumerate(lines, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if k is None:
                if not line.startswith("k="):
                    raise InvalidInputError(f"line {no}: expected header 'k=<int>'")
                try:
                    k = int(line[2:])
                except ValueError:
                    raise InvalidInputError(f"line {no}: bad order {line[2:]!r}") from None
                if k < 1:
                    raise InvalidInputError(f"line {no}: order must be positive")
                continue
            parts = line.split()
            if len(parts) != k + 1:
                raise InvalidInputError(f"line {no}: expected {k} indices and a value")
            try:
                idx.append([int(p) for p in parts[:k]])
                vals.append(float(parts[k]))
            except ValueError:
                raise InvalidInputError(f"line {no}: cannot parse {line!r}") from None
        if k is None:
            raise InvalidInputError("missing header 'k=<int>'")
        return cls.from_arrays(k, np.array(idx, dtype=np.int64).reshape(-1, k), vals, merge="agree")


def _canonicalize(idx, vals, merge):
    k = idx.shape[1]
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError("kernel values must be finite")
    srt = np.sort(idx, axis=1)
    if k > 1:
        diag = np.any(srt[:, 1:] == srt[:, :-1], axis=1)
        if np.any(diag & (vals != 0)):
            bad = tuple(int(v) for v in srt[np.argmax(diag & (vals != 0))])
            raise InvalidInputError(f"tuple {bad} has a repeated coordinate and nonzero value")
        srt, vals = srt[~diag], vals[~diag]
    if srt.shape[0] == 0:
        return srt, vals
    order = np.lexsort(srt.T[::-1])
    srt, vals = srt[order], vals[order]
    new = np.ones(len(srt), dtype=bool)
    new[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    starts = np.flatnonzero(new)
    if merge == "sum":
        merged = np.add.reduceat(vals, starts)
    else:
        merged = vals[starts]
        grp = np.cumsum(new) - 1
        if np.any(vals != merged[grp]):
            raise InvalidInputError("permutations of one tuple carry different values")
    out_idx = srt[starts]
    keep = merged != 0
    return out_idx[keep], merged[keep]


def read_kernel(path):
    with open(path, encoding="utf-8") as fh:
        return SymmetricKernel.from_text(fh.read())


def write_kernel(kernel, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(kernel.to_text())


def _shape_offsets(M, k):
    # offsets (0, d_2, ..., d_k), strictly increasing, d_k <= M-1
    if k == 1:
        return np.zeros((1, 1), dtype=np.int64)
    rest = np.array(list(itertools.combinations(range(1, M), k - 1)), dtype=np.int64).reshape(-1, k - 1)
    return np.hstack([np.zeros((len(rest), 1), dtype=np.int64), rest])


def partial_sum_kernel(field, N, normalization, max_entries=DEFAULT_MAX_ENTRIES):
    """Kernel f_N of the normalized partial sum of the truncated process.

    ``f_N(i) = (1/A) sum_{n=1}^{N} a(n - i) 1{n - M <= i_j < n for all j}``,
    so that ``Q_k(f_N, eps) = A^{-1} sum_{n<=N} X(n)``.  Values are built per
    shape ``i - i_1`` with prefix sums along the diagonal direction.
    """
    N, M, k = int(N), field.M, field.k
    A = float(normalization)
    if not A > 0 or math.isnan(A):
        raise DomainError("normalization must be positive")
    if N < 1:
        raise DomainError("N must be >= 1")
    if M < k:
        return SymmetricKernel(k)
    n_shapes = math.comb(M - 1, k - 1)
    estimate = n_shapes * (N + M - 1)
    if estimate > max_entries:
        raise ResourceError(
            f"partial-sum kernel needs about {estimate:.3g} entries (cap {max_entries:.3g})",
            estimate=estimate, budget=max_entries,
        )
    shapes = _shape_offsets(M, k)
    blocks_idx, blocks_val = [], []
    for delta in shapes:
        dk = int(delta[-1])
        t = np.arange(dk + 1, M + 1, dtype=np.int64)
        u = coefficients(field, t[:, None] - delta[None, :])
        prefix = np.concatenate([[0.0], np.cumsum(u)])  # prefix[j] = sum of first j terms
        i1 = np.arange(1 - M, N - dk, dtype=np.int64)
        lo = np.maximum(dk + 1, 1 - i1)
        hi = np.minimum(M, N - i1)
        vals = prefix[hi - dk] - prefix[lo - dk - 1]
        blocks_idx.append(i1[:, None] + delta[None, :])
        blocks_val.append(vals)
    idx = np.concatenate(blocks_idx)
    vals = np.concatenate(blocks_val) / A
    order = np.lexsort(idx.T[::-1])
    return SymmetricKernel.from_arrays(k, idx[order], vals[order], canonical=True)
