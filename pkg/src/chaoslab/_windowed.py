"""Windowed power-weighted moving sums ``U(n) = sum_{l=1}^{M} l^e s(n - l)``.

For moderate M this is one FFT convolution.  When M is much larger than the
path length N, indices are split three ways:

* near (``j`` in ``[1-N, N-1]``): FFT convolution,
* edge (``j`` in ``[1-M, N-M-1]``, where the window boundary cuts through):
  FFT correlation with the reversed weights ``(M - r)^e``,
* far (``j`` in ``[N-M, -N]``): every n sees the full window and
  ``(n + x)^e`` is smooth in n, so it is replaced by a Chebyshev
  interpolant in n on dyadic blocks of ``x = -j``; the block sums become a
  small matrix product.
"""

import math
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

FAR_MIN_M = 1 << 16
FAR_RATIO = 16
_EPS_TARGET = 1e-16


def _cheb_block(N, x0):
    # nodes and Lagrange basis on [1, N]; node count from the distance of
    # the branch point n = -x0 to the interval
    c, h = (N + 1) / 2, max((N - 1) / 2, 0.5)
    u = (x0 + c) / h
    rho = u + math.sqrt(u * u - 1)
    P = int(min(40, max(4, math.ceil(-math.log(_EPS_TARGET) / math.log(rho)) + 1)))
    j = np.arange(P)
    theta = (2 * j + 1) * np.pi / (2 * P)
    nodes = c + h * np.cos(theta)
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


class WindowedSum:
    """Callable computing U for batches of sequences.

    The input array has shape ``(R, N + M)``; column ``p`` holds the value at
    index ``p + 1 - M`` (indices ``1-M .. N``).  Output has shape ``(R, N)``.
    """

    def __init__(self, e, N, M):
        self.e, self.N, self.M = float(e), int(N), int(M)
        N, M = self.N, self.M
        self.far = M >= FAR_MIN_M and M >= FAR_RATIO * N
        if not self.far:
            self.w = np.arange(1, M + 1, dtype=float) ** self.e
            return
        T = N
        self.T = T
        self.w_near = np.arange(1, N + T, dtype=float) ** self.e
        if N >= 2:
            r = np.arange(N - 1, dtype=float)
            self.v_edge_rev = ((M - r) ** self.e)[::-1].copy()
        blocks = []
        x0, x_end = T, M - N  # far x range [T, M - N]
        while x0 <= x_end:
            x1 = min(2 * x0, x_end + 1)
            nodes, basis = _cheb_block(N, x0)
            x = np.arange(x0, x1, dtype=float)
            # rows ordered by increasing index j = -x so blocks slice contiguously
            W = np.ascontiguousarray(((x[:, None] + nodes[None, :]) ** self.e)[::-1])
            blocks.append((x0, x1, W, np.ascontiguousarray(basis.T)))
            x0 = x1
        self.blocks = blocks

    def cost(self):
        """Rough multiply-add count per sequence."""
        N, M = self.N, self.M
        if not self.far:
            L = N + M
            return 5 * L * max(1, math.log2(L))
        L = 2 * N + 2 * self.T
        return 10 * L * math.log2(L) + sum(W.size for _, _, W, _ in self.blocks) \
            + N * sum(W.shape[1] for _, _, W, _ in self.blocks)

    def __call__(self, seq):
        seq = np.asarray(seq, dtype=float)
        squeeze = seq.ndim == 1
        seq = np.atleast_2d(seq)
        N, M = self.N, self.M
        if seq.shape[1] != N + M:
            raise ValueError(f"expected sequences of length {N + M}")
        if not self.far:
            c = fftconvolve(seq[:, : N + M - 1], self.w[None, :], axes=1)
            out = c[:, M - 1 : M - 1 + N]
        else:
            out = self._far_call(seq)
        return out[0] if squeeze else out

    def _far_call(self, seq):
        N, M, T = self.N, self.M, self.T

        def pos(j):
            return j + M - 1

        near = seq[:, pos(1 - T) : pos(N - 1) + 1]
        c = fftconvolve(near, self.w_near[None, :], axes=1)
        out = c[:, T - 1 : T - 1 + N].copy()
        if N >= 2:
            edge = seq[:, pos(1 - M) : pos(N - M - 1) + 1]
            L = N - 1
            ce = fftconvolve(edge, self.v_edge_rev[None, :], axes=1)
            out[:, : N - 1] += ce[:, L - 1 : L - 1 + N - 1]
        for x0, x1, W, basisT in self.blocks:
            # indices j = -x for x in [x0, x1) are positions pos(-x1+1) .. pos(-x0)
            block = seq[:, pos(-(x1 - 1)) : pos(-x0) + 1]
            out += (block @ W) @ basisT
        return out


@lru_cache(maxsize=16)
def windowed_sum(e, N, M):
    return WindowedSum(e, N, M)
