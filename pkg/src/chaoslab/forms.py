"""Polynomial forms, inner products and contractions of symmetric kernels.

Conventions
-----------
``Q_k(f, X) = sum over ordered tuples of f(i) X_{i_1} ... X_{i_k}``; with
independent standardized X, ``E[Q(f1) Q(f2)] = k! sum_ordered f1 f2``, which
is what ``inner_product`` returns.  Contractions are unsymmetrized:
``(f *_r g)(i, l) = sum_j f(j, i) g(j, l)`` with ``j`` an r-tuple.
"""

import math
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.linalg import blas, toeplitz

from ._numeric import exact_dot, exact_sum, exact_sumsq
from ._powersums import pair_sums, power_range_sums
from .errors import (
    DomainError,
    IncompleteInputError,
    InsufficientDataError,
    InvalidInputError,
)
from .kernels import SymmetricKernel, partial_sum_kernel, DEFAULT_MAX_ENTRIES


def _lookup_values(f, X, start):
    """Values of X at the unique indices of f, plus inverse positions."""
    uniq, inv = np.unique(f.index, return_inverse=True)
    inv = inv.reshape(f.index.shape)
    if isinstance(X, Mapping):
        vals = np.empty(uniq.size)
        for j, i in enumerate(uniq.tolist()):
            try:
                vals[j] = X[i]
            except KeyError:
                raise IncompleteInputError(i) from None
        return vals, inv
    arr = np.asarray(X, dtype=float)
    if start is None:
        raise InvalidInputError("array input needs the index of its first entry (start=)")
    pos = uniq - int(start)
    n = arr.shape[-1]
    bad = (pos < 0) | (pos >= n)
    if np.any(bad):
        raise IncompleteInputError(int(uniq[np.argmax(bad)]))
    return arr[..., pos], inv


def eval_form(f, X, start=None):
    """Q_k(f, X) = sum over ordered tuples of f(i) prod_l X_{i_l}.

    ``X`` is a mapping index -> value, or an array whose last axis holds
    consecutive indices beginning at ``start``; a 2-D array evaluates one
    form per row.
    """
    if len(f) == 0:
        arr = np.asarray(X) if not isinstance(X, Mapping) else None
        if arr is not None and arr.ndim == 2:
            return np.zeros(arr.shape[0])
        return 0.0
    vals, inv = _lookup_values(f, X, start)
    prod = np.ones(vals.shape[:-1] + (len(f),))
    for l in range(f.order):
        prod = prod * vals[..., inv[:, l]]
    kf = math.factorial(f.order)
    if prod.ndim == 1:
        return kf * exact_dot(prod, f.values)
    return kf * (prod @ f.values)


def _row_view(idx):
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    return idx.view(np.dtype((np.void, idx.dtype.itemsize * idx.shape[1]))).ravel()


def inner_product(f1, f2):
    """E[Q(f1) Q(f2)] = k! sum over ordered tuples of f1 f2 (0 if orders differ)."""
    if f1.order != f2.order:
        return 0.0
    if len(f1) == 0 or len(f2) == 0:
        return 0.0
    k = f1.order
    _, i1, i2 = np.intersect1d(_row_view(f1.index), _row_view(f2.index),
                               assume_unique=True, return_indices=True)
    kf = math.factorial(k)
    return kf * kf * exact_dot(f1.values[i1], f2.values[i2])


@dataclass(frozen=True)
class ContractionResult:
    """f *_r g stored over ordered (p + q - 2r)-tuples."""

    p: int
    q: int
    r: int
    index: np.ndarray
    values: np.ndarray
    squared_norm: float

    @property
    def norm(self):
        return math.sqrt(self.squared_norm)

    def entries(self):
        return {tuple(int(v) for v in row): float(x) for row, x in zip(self.index, self.values)}

    def scalar(self):
        if self.p + self.q - 2 * self.r != 0:
            raise DomainError("result is not a scalar")
        return float(self.values[0]) if self.values.size else 0.0


def _codes(rows):
    if rows.shape[1] == 0:
        return np.zeros(rows.shape[0], dtype=np.int64), np.zeros((1, 0), dtype=np.int64)
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    return inv.reshape(-1), uniq


def _join(f, g, r):
    fi, fv = f.ordered()
    gi, gv = g.ordered()
    pref = np.concatenate([fi[:, :r], gi[:, :r]])
    pcode, puniq = _codes(pref)
    pf, pg = pcode[: len(fv)], pcode[len(fv):]
    sf, uf = _codes(fi[:, r:])
    sg, ug = _codes(gi[:, r:])
    nP = len(puniq)
    A = sparse.csr_matrix((fv, (pf, sf)), shape=(nP, len(uf)))
    B = sparse.csr_matrix((gv, (pg, sg)), shape=(nP, len(ug)))
    C = (A.T @ B).tocoo()
    C.sum_duplicates()
    keep = C.data != 0
    return C.row[keep], C.col[keep], C.data[keep], uf, ug


def contract(f, g, r):
    """Contraction f *_r g over the first r coordinates.

    The join indexes ordered tuples of both kernels by their r-prefix and
    multiplies the resulting sparse (prefix x remainder) matrices, so the
    work scales with matching prefix pairs rather than all pairs.
    """
    p, q = f.order, g.order
    if int(r) != r or r < 0 or r > min(p, q):
        raise DomainError(f"contraction index r={r} outside [0, {min(p, q)}]")
    r = int(r)
    width = p + q - 2 * r
    if len(f) == 0 or len(g) == 0:
        idx = np.zeros((0, width), dtype=np.int64)
        return ContractionResult(p, q, r, idx, np.zeros(0), 0.0)
    rows, cols, data, uf, ug = _join(f, g, r)
    idx = np.hstack([uf[rows], ug[cols]]).astype(np.int64)
    if width:
        order = np.lexsort(idx.T[::-1])
        idx, data = idx[order], data[order]
    elif data.size == 0:
        idx, data = np.zeros((1, 0), dtype=np.int64), np.zeros(1)
    return ContractionResult(p, q, r, idx, data, exact_sumsq(data))


def contraction_norm(f, r):
    """||f *_r f|| for 1 <= r <= k - 1."""
    k = f.order
    if k < 2 or int(r) != r or not 1 <= r <= k - 1:
        raise DomainError(f"contraction norm needs 1 <= r <= k-1, got r={r}, k={k}")
    if len(f) == 0:
        return 0.0
    _, _, data, _, _ = _join(f, f, int(r))
    return math.sqrt(exact_sumsq(data))


@dataclass
class CriterionReport:
    """Inner products and contraction norms of f_N along an N-grid."""

    n_grid: list
    inner_products: list
    contraction_norms: dict  # r -> list over the grid
    target_variance: float
    band: float = 0.15
    notes: list = dc_field(default_factory=list)

    def __post_init__(self):
        if len(self.n_grid) < 3:
            raise InsufficientDataError("criterion report needs a grid of at least 3 sizes")

    @property
    def variance_ok(self):
        target = self.target_variance
        last = self.inner_products[-1]
        return bool(target > 0 and abs(last - target) <= self.band * target)

    def decay_ok(self, r):
        vals = np.asarray(self.contraction_norms[r])
        top = vals[len(vals) // 2:]
        return bool(np.all(np.diff(top) < 0))

    def decay_ratio(self, r):
        vals = self.contraction_norms[r]
        return vals[-1] / vals[0] if vals[0] != 0 else float("nan")

    @property
    def passed(self):
        return self.variance_ok and all(self.decay_ok(r) for r in self.contraction_norms)

    def to_csv(self):
        rs = sorted(self.contraction_norms)
        lines = [",".join(["N", "inner_product"] + [f"contraction_r{r}" for r in rs])]
        for j, N in enumerate(self.n_grid):
            cells = [str(N), repr(float(self.inner_products[j]))]
            cells += [repr(float(self.contraction_norms[r][j])) for r in rs]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def clt_criterion_report(kernels, target_variance, n_grid=None, band=0.15):
    """Tabulate <f_N, f_N> and ||f_N *_r f_N||, r = 1..k-1, along a grid.

    ``kernels`` is a mapping N -> SymmetricKernel or a sequence matched with
    ``n_grid``.  PASS needs the last inner product within ``band`` (relative)
    of ``target_variance`` and every norm sequence strictly decreasing over
    the top half of the grid.
    """
    if isinstance(kernels, Mapping):
        n_grid = list(kernels)
        kernels = [kernels[N] for N in n_grid]
    else:
        kernels = list(kernels)
        n_grid = list(n_grid) if n_grid is not None else list(range(1, len(kernels) + 1))
    if len(kernels) != len(n_grid):
        raise InvalidInputError("one kernel per grid point is required")
    if len(kernels) < 3:
        raise InsufficientDataError("criterion report needs a grid of at least 3 sizes")
    k = kernels[0].order
    if k < 2 or any(f.order != k for f in kernels):
        raise InvalidInputError("all kernels must share an order k >= 2")
    inner = [inner_product(f, f) for f in kernels]
    norms = {r: [contraction_norm(f, r) for f in kernels] for r in range(1, k)}
    return CriterionReport(n_grid, inner, norms, float(target_variance), band)


# -- exact second and fourth traces for k = 2 partial-sum kernels ----------

CHEB_NODES = 24


def _cheb_basis(N, P):
    """Lagrange basis (N x P) at n = 1..N for Chebyshev nodes on [1, N]."""
    j = np.arange(P)
    theta = (2 * j + 1) * np.pi / (2 * P)
    nodes = (N + 1) / 2 + (N - 1) / 2 * np.cos(theta)
    wts = (-1.0) ** j * np.sin(theta)
    n = np.arange(1, N + 1, dtype=float)[:, None]
    diff = n - nodes[None, :]
    hit = diff == 0
    diff[hit] = 1.0
    tmp = wts[None, :] / diff
    basis = tmp / tmp.sum(axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    basis[rows] = hit[rows].astype(float)
    return nodes, basis


def _syrk_acc(acc, a):
    # acc (upper triangle) += a a^T ; a in Fortran order
    return blas.dsyrk(1.0, a, beta=1.0, c=acc, trans=0, lower=0, overwrite_c=1)


def _full_sym(upper):
    return np.triu(upper) + np.triu(upper, 1).T


def _chunked_dot(a, b, rows=1024):
    return math.fsum(float(np.dot(a[s:s + rows].ravel(), b[s:s + rows].ravel()))
                     for s in range(0, a.shape[0], rows))


def gram_traces_k2(gamma, N, M, far_field=True, chunk=2048):
    """Exact ``||F||_F^2`` and ``tr F^4`` for the unnormalized k = 2 kernel.

    ``F_ij = sum_{n=1}^{N} b(n-i) b(n-j)`` for ``i != j`` (zero diagonal),
    with ``b(l) = l^gamma`` on ``1 <= l <= M``.  With ``B`` the N x (N+M-1)
    matrix of ``b(n-i)``, ``K = B B^T`` (Toeplitz, from shifted power sums),
    ``d_i = ||b_i||^2`` and ``W_q = B diag(d^q) B^T``:

        ||F||^2 = ||K||^2 - sum d^2
        tr F^4  = ||K^2||^2 - 4<K^2, W_1> + 4<K, W_2> + 2||W_1||^2 - 3 sum d^4

    Columns of B with ``i <= -N`` and a full window are smooth in n; with
    ``far_field`` their contribution to ``W_q`` is summed through a
    Chebyshev interpolant in n, which keeps the cost independent of M.
    """
    N, M = int(N), int(M)
    if M < 2 or N < 1:
        return 0.0, 0.0
    hs = np.arange(N)
    s = pair_sums(gamma, gamma, hs, upper=M - hs)
    s[M - hs < 1] = 0.0
    i_all = np.arange(1 - M, N, dtype=np.int64)
    d = power_range_sums(2 * gamma, np.maximum(1, 1 - i_all), np.minimum(M, N - i_all))
    d2 = d * d
    sum_d2 = exact_sum(d2)
    sum_d4 = exact_sumsq(d2)
    w = (N - hs[1:]).astype(float)
    normK2 = N * s[0] ** 2 + 2 * exact_dot(w, s[1:] ** 2)
    frob = normK2 - sum_d2

    T = N
    far_lo, far_hi = N - M, -T  # far columns i in [N-M, -T]
    use_far = far_field and far_hi - far_lo + 1 > 2 * N
    if use_far:
        exact_cols = np.concatenate([np.arange(1 - M, far_lo), np.arange(far_hi + 1, N)])
    else:
        exact_cols = i_all

    def dmap(cols):
        return d[cols - (1 - M)]

    K = np.asfortranarray(toeplitz(s))
    K2 = _full_sym(blas.dsyrk(1.0, K, trans=0, lower=0))
    W1 = np.zeros((N, N), order="F")
    W2 = np.zeros((N, N), order="F")
    n = np.arange(1, N + 1, dtype=np.int64)[:, None]
    for start in range(0, exact_cols.size, chunk):
        cols = exact_cols[start:start + chunk]
        lag = n - cols[None, :]
        ok = (lag >= 1) & (lag <= M)
        Bc = np.where(ok, np.where(ok, lag, 1).astype(float) ** gamma, 0.0)
        dc = dmap(cols)
        W1 = _syrk_acc(W1, np.asfortranarray(Bc * np.sqrt(dc)[None, :]))
        W2 = _syrk_acc(W2, np.asfortranarray(Bc * dc[None, :]))
    W1 = _full_sym(W1)
    W2 = _full_sym(W2)
    if use_far:
        nodes, Phi = _cheb_basis(N, CHEB_NODES)
        C1 = np.zeros((CHEB_NODES, CHEB_NODES))
        C2 = np.zeros((CHEB_NODES, CHEB_NODES))
        xs = -np.arange(far_lo, far_hi + 1, dtype=np.int64)  # x = -i in [T, M-N]
        step = 1 << 16
        for a in range(0, xs.size, step):
            x = xs[a:a + step]
            cx = (nodes[None, :] + x[:, None].astype(float)) ** gamma
            dx = dmap(-x)
            C1 += (cx * dx[:, None]).T @ cx
            C2 += (cx * (dx * dx)[:, None]).T @ cx
        W1 += Phi @ C1 @ Phi.T
        W2 += Phi @ C2 @ Phi.T
    t4 = (_chunked_dot(K2, K2) - 4 * _chunked_dot(K2, W1) + 4 * _chunked_dot(K, W2)
          + 2 * _chunked_dot(W1, W1) - 3 * sum_d4)
    return frob, t4


def _single_equal_row(field):
    g = field.kernel
    return (field.separable and g.k == 2 and g.rows.shape[0] == 1
            and g.rows[0, 0] == g.rows[0, 1])


def field_criterion_report(field, n_grid, target_variance, regime=None, band=0.15,
                           max_entries=DEFAULT_MAX_ENTRIES, far_field=True):
    """Criterion report for the partial-sum kernels of a coefficient field.

    A k = 2 field with a single product row ``x1^g x2^g`` uses the exact
    trace identities of ``gram_traces_k2`` (any horizon M); other fields
    build ``partial_sum_kernel`` explicitly and contract it.
    """
    from .process import normalization_factor

    n_grid = [int(N) for N in n_grid]
    if len(n_grid) < 3:
        raise InsufficientDataError("criterion report needs a grid of at least 3 sizes")
    regime = regime or field.regime()
    k = field.k
    if k < 2:
        raise InvalidInputError("criterion needs k >= 2")
    if _single_equal_row(field):
        gamma = float(field.kernel.rows[0, 0])
        c = float(field.kernel.coefs[0])
        inner, norm1 = [], []
        for N in n_grid:
            A = normalization_factor(regime, N, k=k, alpha=field.alpha)
            frob, t4 = gram_traces_k2(gamma, N, field.M, far_field=far_field)
            inner.append(2 * c * c * frob / A**2)
            norm1.append(c * c * math.sqrt(max(t4, 0.0)) / A**2)
        rep = CriterionReport(n_grid, inner, {1: norm1}, float(target_variance), band)
        rep.notes.append("exact trace route")
        return rep
    kernels = {}
    for N in n_grid:
        A = normalization_factor(regime, N, k=k, alpha=field.alpha)
        kernels[N] = partial_sum_kernel(field, N, A, max_entries=max_entries)
    rep = clt_criterion_report(kernels, target_variance, band=band)
    rep.notes.append("sparse contraction route")
    return rep
