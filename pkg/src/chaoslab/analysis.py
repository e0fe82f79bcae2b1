"""Second-order theory: covariance gamma(n), C_g, exact partial-sum variance.

Normalization: ``covariance_gamma`` returns ``sum over ordered tuples of
distinct lags i of a(i) a(i + n 1)``.  The covariance of the process is
``k!`` times this (each unordered tuple of innovations appears in k!
orders), so ``E[S_N^2] = k! * exact_variance``; ``partial_sum_variance``
returns the latter.
"""

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import List, Optional

import numpy as np
from scipy import integrate, special

from ._numeric import exact_sum, set_partitions
from ._powersums import pair_sums
from .errors import (
    AccuracyError,
    DivergenceError,
    DomainError,
    InvalidInputError,
    ResourceError,
)
from .kernels import CoefficientField, PowerKernelSpec, coefficients, horizon_for_tolerance


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerance and substitution settings for ``C_g_quadrature``.

    ``max_stretch`` caps the power substitutions ``x = u^s`` near 0 and
    ``x = w^{-s}`` at infinity; ``split`` is the point separating the two.
    """

    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    max_stretch: float = 8.0
    split: float = 1.0

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise InvalidInputError("relative tolerance must lie in (0, 1)")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise InvalidInputError("max_subdivisions must be a positive integer")
        if not self.max_stretch >= 1 or not self.split > 0:
            raise InvalidInputError("max_stretch must be >= 1 and split positive")


def _beta_factor(a, b):
    # int_0^inf x^a (1+x)^b dx
    if not (a > -1 and a + b < -1):
        raise DivergenceError(f"int x^{a} (1+x)^{b} dx diverges")
    return special.beta(a + 1.0, -a - b - 1.0)


def cg_closed_form(g):
    """C_g for an explicit combination of product powers (1-D Beta factors)."""
    if not g.separable:
        raise InvalidInputError("closed form needs an explicit product-power combination")
    total = []
    for r1, w1 in zip(g.rows, g.coefs):
        for r2, w2 in zip(g.rows, g.coefs):
            total.append(w1 * w2 * math.prod(_beta_factor(a, b) for a, b in zip(r1, r2)))
    return math.fsum(total)


def cg_majorant(g):
    """C computed for the majorant g*; scale for deciding C_g = 0."""
    total = []
    for r1 in g.rows:
        for r2 in g.rows:
            total.append(math.prod(_beta_factor(a, b) for a, b in zip(r1, r2)))
    return g.scale**2 * math.fsum(total)


def _scalar_rule(g):
    if g.separable:
        rows = [tuple(float(v) for v in r) for r in g.rows]
        ws = [float(w) for w in g.coefs]

        def rule(x):
            total = 0.0
            for r, w in zip(rows, ws):
                term = w
                for xv, e in zip(x, r):
                    term *= xv**e
                total += term
            return total

        return rule

    def rule(x):
        return float(g(np.array(x, dtype=float)))

    return rule


def C_g_quadrature(g, spec=None):
    """Integral of g(x) g(1+x) over the positive orthant.

    Each coordinate is split at ``spec.split``.  Near 0 we substitute
    ``x = T u^s`` with ``s = 1/(1 + min gamma)`` so the ``x^gamma``
    singularity becomes integrable-flat; on ``[T, inf)`` we substitute
    ``x = T w^{-s2}`` with ``s2 = 1/(-a - 1)``, a the slowest pair exponent,
    which maps the tail to a bounded integrand on ``(0, 1]``.  The pieces
    are integrated with nested adaptive Gauss-Kronrod rules.
    """
    spec = spec or QuadratureSpec()
    if not isinstance(g, PowerKernelSpec):
        raise InvalidInputError("expected a PowerKernelSpec")
    rows = g.rows
    if np.any(rows <= -1) or np.any(rows >= -0.5):
        raise DivergenceError("exponents must lie in (-1, -1/2) for C_g to be finite")
    k = g.k
    T = float(spec.split)
    gmin = rows.min(axis=0)
    amax = np.array([max(r1[l] + r2[l] for r1 in rows for r2 in rows) for l in range(k)])
    s_head = np.minimum(1.0 / (1.0 + gmin), spec.max_stretch)
    s_tail = np.minimum(1.0 / (-amax - 1.0), spec.max_stretch)
    rule = _scalar_rule(g)
    worst = [0.0]

    def mapped(l, piece, u):
        if piece == 0:
            s = s_head[l]
            return T * u**s, T * s * u ** (s - 1.0)
        s = s_tail[l]
        return T * u ** (-s), T * s * u ** (-s - 1.0)

    def integrand(pieces, us):
        xs, jac = [], 1.0
        for l, (pc, u) in enumerate(zip(pieces, us)):
            if u <= 0.0:
                return 0.0
            x, j = mapped(l, pc, u)
            xs.append(x)
            jac *= j
        val = rule(xs) * rule([x + 1.0 for x in xs]) * jac
        return val if math.isfinite(val) else 0.0

    def nested(pieces, fixed):
        level = len(fixed)

        def f(u):
            if level + 1 == k:
                return integrand(pieces, fixed + [u])
            return nested(pieces, fixed + [u])

        val, err = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=spec.rel_tol / 4,
                                  limit=int(spec.max_subdivisions))
        if level > 0 and val != 0:
            worst[0] = max(worst[0], abs(err / val))
        return val if level > 0 else (val, err)

    vals, errs = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for pieces in np.ndindex(*(2,) * k):
            v, e = nested(tuple(pieces), [])
            vals.append(v)
            errs.append(e)
    total = math.fsum(vals)
    bound = math.fsum(errs) + worst[0] * math.fsum(abs(v) for v in vals)
    # relative to |C_g|, floored by the majorant's constant when C_g is ~0
    if bound > spec.rel_tol * max(abs(total), 1e-4 * cg_majorant(g)):
        raise AccuracyError(
            f"C_g quadrature reached error {bound:.3g} for estimate {total:.6g}", total, bound
        )
    return total


def _gamma_separable(field, ns, truncation):
    g = field.kernel
    k = g.k
    ns = np.asarray(ns, dtype=np.int64)
    upper = None if truncation is None else np.maximum(truncation - ns, 0)
    cache = {}

    def ps(a, b):
        key = (round(a, 15), round(b, 15))
        if key not in cache:
            vals = pair_sums(a, b, ns, upper=upper)
            if upper is not None:
                vals = np.where(upper >= 1, vals, 0.0)
            cache[key] = vals
        return cache[key]

    out = np.zeros(ns.shape)
    parts = set_partitions(k)
    for r1, w1 in zip(g.rows, g.coefs):
        for r2, w2 in zip(g.rows, g.coefs):
            acc = np.zeros(ns.shape)
            for blocks, mu in parts:
                term = np.full(ns.shape, float(mu))
                for b in blocks:
                    term = term * ps(float(sum(r1[list(b)])), float(sum(r2[list(b)])))
                acc += term
            out += w1 * w2 * acc
    if upper is not None:
        # a box with fewer than k lags holds no distinct tuple
        out = np.where(upper >= k, out, 0.0)
    return out


def _gamma_direct(field, ns, horizon, max_work=2e9):
    k = field.k
    H = int(horizon)
    work = float(H) ** k * len(ns)
    if work > max_work:
        raise ResourceError(f"direct covariance needs about {work:.3g} terms", estimate=work,
                            budget=max_work)
    grids = np.meshgrid(*[np.arange(1, H + 1)] * k, indexing="ij")
    tup = np.stack([g.ravel() for g in grids], axis=1)
    if k > 1:
        srt = np.sort(tup, axis=1)
        tup = tup[np.all(srt[:, 1:] != srt[:, :-1], axis=1)]
    base = coefficients(field, tup)
    out = []
    for n in ns:
        shifted = coefficients(field, tup + int(n))
        out.append(math.fsum((base * shifted).tolist()))
    return np.array(out)


def covariance_sequence(field, ns, horizon=None, truncation=None):
    """gamma(n) for each n in ``ns``.

    ``truncation=M`` gives the covariance of the lag-M truncated process,
    i.e. the sum over tuples in ``[1, M - n]^k``.  ``horizon=H`` sums over
    ``[1, H]^k`` for every n.  Without either, separable kernels are summed
    to infinity exactly (direct head plus analytic tail); other kernels use
    the horizon at which the g*-tail bound falls below 1e-6.
    """
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    if np.any(ns < 0):
        raise DomainError("lags n must be nonnegative")
    if horizon is not None and truncation is not None:
        raise InvalidInputError("give either horizon or truncation, not both")
    if horizon is not None and horizon < 1:
        raise DomainError("horizon must be >= 1")
    rows = field.kernel.rows
    if np.any(2 * rows + 1 >= 0):
        raise DivergenceError("exponent rows outside the square-summable range")
    if field.separable:
        if horizon is not None:
            H = int(horizon)
            out = np.empty(ns.shape)
            for j, n in enumerate(ns):
                out[j] = _gamma_separable_fixed(field, int(n), H)
            return out
        return _gamma_separable(field, ns, truncation)
    if truncation is not None:
        return np.array([_gamma_direct(field, [n], max(truncation - n, 0))[0]
                         if truncation - n >= 1 else 0.0 for n in ns])
    H = horizon if horizon is not None else horizon_for_tolerance(field, 1e-6)
    return _gamma_direct(field, ns, H)


def _gamma_separable_fixed(field, n, H):
    g = field.kernel
    if H < g.k:
        return 0.0
    out = 0.0
    for r1, w1 in zip(g.rows, g.coefs):
        for r2, w2 in zip(g.rows, g.coefs):
            acc = 0.0
            for blocks, mu in set_partitions(g.k):
                term = float(mu)
                for b in blocks:
                    term *= pair_sums(float(sum(r1[list(b)])), float(sum(r2[list(b)])),
                                      [n], upper=H)[0]
                acc += term
            out += w1 * w2 * acc
    return out


def covariance_gamma(field, n, horizon=None, truncation=None):
    """gamma(n) = sum over ordered distinct tuples of a(i) a(i + n)."""
    if int(n) != n or n < 0:
        raise DomainError("n must be a nonnegative integer")
    return float(covariance_sequence(field, [int(n)], horizon=horizon, truncation=truncation)[0])


def _variance_from_gamma(gam, N):
    # N gamma(0) + 2 sum_{h=1}^{N-1} (N - h) gamma(h)
    h = np.arange(1, N)
    terms = np.concatenate([[N * gam[0]], 2.0 * (N - h) * gam[1:N]])
    return exact_sum(terms)


def exact_variance(field, N, horizon=None, truncation=None):
    """N sum_{|n|<N} gamma(n) - sum_{|n|<N} |n| gamma(n)."""
    if int(N) != N or N < 1:
        raise DomainError("N must be a positive integer")
    N = int(N)
    gam = covariance_sequence(field, np.arange(N), horizon=horizon, truncation=truncation)
    return _variance_from_gamma(gam, N)


def partial_sum_variance(field, N, truncation=None):
    """E[(X(1) + ... + X(N))^2] = k! * exact_variance."""
    return math.factorial(field.k) * exact_variance(field, N, truncation=truncation)


@dataclass
class VarianceTable:
    """Rows (N, exact variance, reference, ratio)."""

    rows: List[tuple]
    cg: float
    degenerate: bool = False
    notes: List[str] = dc_field(default_factory=list)

    @property
    def header(self):
        if self.degenerate:
            return ["N", "exact_variance", "NlnN", "ratio_to_NlnN"]
        return ["N", "exact_variance", "reference_2Cg_NlnN", "ratio_to_2Cg_NlnN"]

    @property
    def ratios(self):
        return [r[3] for r in self.rows]

    def to_csv(self):
        lines = [",".join(self.header)]
        for N, v, ref, ratio in self.rows:
            lines.append(f"{N},{v!r},{ref!r},{ratio!r}")
        return "\n".join(lines) + "\n"


def variance_ratio_table(field, n_grid, truncation=None, cg=None, quad=None):
    """exact_variance(N) against 2 C_g N ln N along an increasing grid.

    When C_g vanishes (relative to the majorant's constant) the table
    switches to the ratio against N ln N, the scale it must be small against.
    """
    grid = [int(N) for N in n_grid]
    if not grid or any(N < 2 for N in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("grid must be increasing with every N >= 2")
    if cg is None:
        cg = C_g_quadrature(field.kernel, quad)
    scale = cg_majorant(field.kernel)
    degenerate = abs(cg) <= 1e-7 * scale
    gam = covariance_sequence(field, np.arange(grid[-1]), truncation=truncation)
    rows = []
    for N in grid:
        v = _variance_from_gamma(gam, N)
        base = N * math.log(N)
        ref = base if degenerate else 2 * cg * base
        rows.append((N, v, ref, v / ref))
    table = VarianceTable(rows, float(cg), degenerate)
    if degenerate:
        table.notes.append("C_g = 0: kernel outside the positive product-power family")
    if not field.kernel.in_family:
        table.notes.append(f"kernel label: {field.kernel.label}")
    return table


def bound_diff_constant(gamma1, gamma2, grid, horizon=None):
    """Max over (n1, n2) of sum_p (n1-p)_+^g1 (n2-p)_+^g2 / (n1,n2)_0^(g1+g2+1).

    ``(x1, x2)_0`` is ``|x1 - x2|`` for distinct arguments and 1 otherwise;
    the sum runs over all integers p below both n1 and n2 (``j <= horizon``
    terms when a horizon is given).
    """
    for g in (gamma1, gamma2):
        if not -1 < g < -0.5:
            raise DomainError(f"exponent {g} outside (-1, -1/2)")
    pairs = [(int(a), int(b)) for a, b in grid]
    if not pairs:
        raise InvalidInputError("empty grid")
    best = -math.inf
    for n1, n2 in pairs:
        d = abs(n2 - n1)
        lo_exp, hi_exp = (gamma1, gamma2) if n1 <= n2 else (gamma2, gamma1)
        num = pair_sums(lo_exp, hi_exp, [d], upper=horizon)[0]
        den = d ** (gamma1 + gamma2 + 1) if d else 1.0
        best = max(best, num / den)
    return best


@dataclass
class LinearTable:
    """Exact k = 1, a(n) = c/n quantities and their asymptotic ratios."""

    c: float
    rows: List[tuple]  # (N, gamma(N), gamma ratio, variance, variance ratio)

    header = ["N", "gamma_N", "ratio_to_c2_lnN_over_N", "variance",
              "ratio_to_2c2_N_lnN_squared"]

    def to_csv(self):
        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]))
        return "\n".join(lines) + "\n"


def linear_case_table(c, n_grid, horizon=None):
    """gamma(n) = c^2 sum_i 1/(i (i+n)) and E[S_N^2] for a(n) = c/n."""
    c = float(c)
    if c == 0 or not math.isfinite(c):
        raise DomainError("c must be finite and nonzero")
    grid = [int(N) for N in n_grid]
    if not grid or any(N < 2 for N in grid):
        raise InvalidInputError("grid entries must be >= 2")
    nmax = max(grid)
    gam = c * c * pair_sums(-1.0, -1.0, np.arange(nmax + 1), upper=horizon)
    rows = []
    for N in grid:
        gN = float(gam[N])
        v = _variance_from_gamma(gam, N)
        rows.append((N, gN, gN / (c * c * math.log(N) / N), v,
                     v / (2 * c * c * N * math.log(N) ** 2)))
    return LinearTable(c, rows)


def cancelling_kernel(a=-0.75, b=-0.9):
    """Mixed-sign kernel g(x) = phi(x1) phi(x2), phi(x) = x^a - lam x^b, with C_g = 0.

    ``lam`` is the smaller root of ``int phi(x) phi(1+x) dx = 0`` so the
    1-D factor, and hence C_g, vanishes.  g is not homogeneous and is
    labelled as outside the product-power family.
    """
    A = _beta_factor(a, a)
    B = _beta_factor(a, b) + _beta_factor(b, a)
    C = _beta_factor(b, b)
    disc = B * B - 4 * A * C
    if disc < 0:
        raise DomainError(f"no real cancelling weight for exponents ({a}, {b})")
    lam = (B - math.sqrt(disc)) / (2 * C)
    rows = [[a, a], [a, b], [b, a], [b, b]]
    coefs = [1.0, -lam, -lam, lam * lam]
    g = PowerKernelSpec(rows, coefs, strict=False, label="cancelling mixed-sign kernel (C_g = 0)")
    return g, lam
