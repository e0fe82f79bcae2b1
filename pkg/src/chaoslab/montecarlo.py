"""Innovation laws, seeded replication, normality and universality statistics.

Replicate ``r`` of a run with base seed ``s`` draws its whole innovation
stream from a Philox generator keyed by ``splitmix64(s + (r + 1) * G)``
(``G`` the 64-bit golden-ratio increment).  Replicates are computed in
batches of fixed size and written to their own slot, so the sample does not
depend on the number of worker threads.
"""

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional

import numpy as np
from scipy import stats

from .analysis import exact_variance
from .errors import (
    ConfigError,
    DegenerateSampleError,
    DomainError,
    InsufficientDataError,
    InvalidComparisonError,
    InvalidInputError,
    ResourceError,
)
from .process import (
    DEFAULT_BUDGET,
    PathConfig,
    fast_work,
    floor_nt,
    normalization_factor,
    partial_sums_at,
    path_values,
    reference_work,
)

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1
BATCH = 16  # fixed, so BLAS blocking (and hence rounding) never depends on threads

KS_ONE_SAMPLE_5 = 1.358
KS_TWO_SAMPLE_1 = 1.628

FAMILIES = ("gaussian", "rademacher", "standardized_uniform", "centered_exponential")

# (E|eps|^3, third central moment, fourth moment)
_MOMENTS = {
    "gaussian": (2.0 * math.sqrt(2.0 / math.pi), 0.0, 3.0),
    "rademacher": (1.0, 0.0, 1.0),
    "standardized_uniform": (3.0 * math.sqrt(3.0) / 4.0, 0.0, 9.0 / 5.0),
    "centered_exponential": (12.0 / math.e - 2.0, 2.0, 9.0),
}


def splitmix64(x):
    """One SplitMix64 output for state ``x`` (64-bit integer arithmetic)."""
    z = (int(x) + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed, r):
    """Seed of replicate r: splitmix64(base_seed + (r + 1) * GOLDEN mod 2^64)."""
    if int(r) < 0:
        raise InvalidInputError("replicate index must be nonnegative")
    return splitmix64((int(base_seed) + (int(r) + 1) * GOLDEN) & MASK64)


def generator(seed):
    """Counter-based Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


@dataclass(frozen=True)
class InnovationSpec:
    """Standardized innovation law with analytic moments."""

    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown innovation family {self.family!r}; "
                              f"expected one of {', '.join(FAMILIES)}")

    mean = 0.0
    variance = 1.0

    @property
    def third_abs_moment(self):
        return _MOMENTS[self.family][0]

    @property
    def third_moment(self):
        return _MOMENTS[self.family][1]

    @property
    def fourth_moment(self):
        return _MOMENTS[self.family][2]

    def draw(self, rng, size):
        fam = self.family
        if fam == "gaussian":
            return rng.standard_normal(size)
        if fam == "rademacher":
            return rng.integers(0, 2, size=size).astype(float) * 2.0 - 1.0
        if fam == "standardized_uniform":
            s3 = math.sqrt(3.0)
            return rng.uniform(-s3, s3, size=size)
        return rng.standard_exponential(size) - 1.0

    def sample(self, count, seed):
        return sample_innovations(self, count, seed)


def sample_innovations(spec, count, seed):
    """``count`` draws of the law, determined by ``seed``."""
    if int(count) != count or count < 1:
        raise InvalidInputError("count must be a positive integer")
    if not isinstance(spec, InnovationSpec):
        spec = InnovationSpec(str(spec))
    return spec.draw(generator(seed), int(count))


def _as_spec(spec):
    if isinstance(spec, str):
        return InnovationSpec(spec)
    if not hasattr(spec, "sample"):
        raise InvalidInputError("innovations need a sample(count, seed) method")
    return spec


def replicate_cost(field, cfg):
    """Per-replicate operation estimate of the route ``path_values`` takes."""
    if field.separable:
        return fast_work(field, cfg.N, cfg.M)
    return reference_work(field, cfg.N, cfg.M)


def replicate_partial_sums(field, cfg, spec, R, base_seed=None, regime=None, threads=1,
                           budget=DEFAULT_BUDGET, normalize=True, min_replicates=100):
    """Y_N(t) on ``cfg.grid`` for R replicates, shape (R, len(grid)).

    ``base_seed`` defaults to ``cfg.seed``.  With ``normalize=False`` the raw
    partial sums S_{floor(Nt)} are returned.
    """
    if int(R) != R or R < min_replicates:
        raise InvalidInputError(f"need at least {min_replicates} replicates, got {R}")
    R = int(R)
    spec = _as_spec(spec)
    base_seed = cfg.seed if base_seed is None else int(base_seed)
    cost = replicate_cost(field, cfg)
    if cost > budget:
        raise ResourceError(f"each replicate needs about {cost:.3g} operations "
                            f"(budget {budget:.3g})", estimate=cost, budget=budget)
    if normalize:
        A = normalization_factor(regime or field.regime(), cfg.N, k=field.k, alpha=field.alpha)
    else:
        A = 1.0
    out = np.empty((R, len(cfg.grid)))
    L = cfg.stream_length

    def run(start):
        stop = min(start + BATCH, R)
        eps = np.stack([np.asarray(spec.sample(L, derive_seed(base_seed, r)), dtype=float)
                        for r in range(start, stop)])
        vals = path_values(field, cfg.N, cfg.M, eps, budget=budget)
        out[start:stop] = partial_sums_at(vals, cfg.grid, A)

    starts = range(0, R, BATCH)
    if threads <= 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            list(pool.map(run, starts))
    return out


def replicate_endpoint(field, cfg, spec, R, base_seed=None, **kw):
    """Y_N(1) for R independent replicates."""
    cfg1 = PathConfig(cfg.N, cfg.M, (1.0,), cfg.seed)
    return replicate_partial_sums(field, cfg1, spec, R, base_seed, **kw)[:, 0]


def write_endpoint_csv(sample, path, header="Y_N(1)"):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([header])
        for v in np.asarray(sample, dtype=float).tolist():
            w.writerow([repr(v)])


def _checked_sample(sample, minimum=2):
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < minimum:
        raise InsufficientDataError(f"need at least {minimum} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("sample contains non-finite values")
    return x


def _central_moments(x):
    d = x - x.mean()
    return float(np.mean(d * d)), float(np.mean(d**3)), float(np.mean(d**4))


@dataclass
class NormalityReport:
    """One-sample KS distance to N(0, sigma^2) with shape and variance summaries."""

    R: int
    target_sigma: float
    ks: float
    skewness: float
    excess_kurtosis: float
    variance: float
    stderr: float
    critical: float

    @property
    def passed(self):
        return self.ks < self.critical

    def as_dict(self):
        return {
            "ks": self.ks,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "variance": self.variance,
            "stderr": self.stderr,
            "pass": self.passed,
            "R": self.R,
            "target_sigma": self.target_sigma,
            "critical": self.critical,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


def normality_report(sample, target_sigma, critical=None, min_size=100):
    """KS distance (sorted-sample formula), skewness, excess kurtosis, variance and SE.

    The variance standard error is ``sqrt((m4 - s^4 (R-3)/(R-1)) / R)``.
    ``critical`` defaults to the one-sample 5% value 1.358/sqrt(R).
    """
    x = _checked_sample(sample, min_size)
    if not target_sigma > 0:
        raise DomainError("target sigma must be positive")
    R = x.size
    m2, m3, m4 = _central_moments(x)
    if m2 <= 1e-300 or np.ptp(x) == 0:
        raise DegenerateSampleError("sample has zero variance")
    ks = float(stats.kstest(x, stats.norm(0.0, target_sigma).cdf).statistic)
    s2 = m2 * R / (R - 1)
    se = math.sqrt(max(m4 - s2 * s2 * (R - 3) / (R - 1), 0.0) / R)
    crit = KS_ONE_SAMPLE_5 / math.sqrt(R) if critical is None else float(critical)
    return NormalityReport(R, float(target_sigma), ks, m3 / m2**1.5, m4 / m2**2 - 3.0,
                           s2, se, crit)


@dataclass
class UniversalityReport:
    """Pairwise two-sample KS distances and per-sample normality reports."""

    R: int
    critical: float
    pairs: Dict[tuple, float]
    reports: Dict[str, NormalityReport]

    @property
    def passed(self):
        return all(d < self.critical for d in self.pairs.values())

    def as_dict(self):
        return {
            "R": self.R,
            "critical": self.critical,
            "pairs": [{"a": a, "b": b, "ks": d, "pass": d < self.critical}
                      for (a, b), d in self.pairs.items()],
            "reports": {name: rep.as_dict() for name, rep in self.reports.items()},
            "pass": self.passed,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


def universality_compare(samples, target_sigma=None):
    """Two-sample KS for every pair of endpoint samples (equal sizes required).

    Passes when every distance is below the 1% value 1.628 sqrt(2/R).
    Normality reports use ``target_sigma`` when given, else each sample's sd.
    """
    if len(samples) < 2:
        raise InsufficientDataError("need at least two samples to compare")
    arrs = {}
    for key, val in samples.items():
        name = key.family if isinstance(key, InnovationSpec) else str(key)
        arrs[name] = _checked_sample(val)
    sizes = {a.size for a in arrs.values()}
    if len(sizes) != 1:
        raise InvalidComparisonError(f"samples have different sizes {sorted(sizes)}")
    R = sizes.pop()
    pairs = {}
    for a, b in itertools.combinations(arrs, 2):
        pairs[(a, b)] = float(stats.ks_2samp(arrs[a], arrs[b]).statistic)
    reports = {}
    for name, x in arrs.items():
        sigma = target_sigma if target_sigma is not None else float(np.std(x))
        if R >= 100 and sigma > 0:
            reports[name] = normality_report(x, sigma)
    return UniversalityReport(R, KS_TWO_SAMPLE_1 * math.sqrt(2.0 / R), pairs, reports)


@dataclass
class FddReport:
    """Empirical covariances of Y_N on a grid against finite-N and limiting values."""

    rows: List[dict]
    increments: List[dict] = dc_field(default_factory=list)

    @property
    def passed(self):
        return all(abs(r["z_exact"]) < 4 for r in self.rows + self.increments)

    def as_dict(self):
        return {"covariances": self.rows, "increments": self.increments, "pass": self.passed}


def _cov_and_se(x, y):
    dx, dy = x - x.mean(), y - y.mean()
    prod = dx * dy
    n = x.size
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n))


def fdd_covariance_check(field, cfg, spec, R, base_seed=None, regime=None, threads=1,
                         budget=DEFAULT_BUDGET, cg=None):
    """Cov(Y_N(s), Y_N(t)) on ``cfg.grid`` versus its exact finite-N value.

    The exact value uses Cov(S_a, S_b) = k! [V(a) + V(b) - V(b - a)] / 2
    with V the truncated exact variance; when ``cg`` is given the limit
    2 k! C_g min(s, t) is reported too.  Consecutive increments are checked
    the same way.
    """
    if len(cfg.grid) < 2:
        raise InsufficientDataError("fdd check needs at least two grid points")
    ys = replicate_partial_sums(field, cfg, spec, R, base_seed, regime=regime, threads=threads,
                                budget=budget, min_replicates=500)
    N, k = cfg.N, field.k
    A = normalization_factor(regime or field.regime(), N, k=k, alpha=field.alpha)
    idx = [floor_nt(N, t) for t in cfg.grid]
    kf = math.factorial(k)
    cache = {0: 0.0}

    def V(m):
        if m not in cache:
            cache[m] = exact_variance(field, m, truncation=cfg.M)
        return cache[m]

    def exact_cov(a, b):
        a, b = min(a, b), max(a, b)
        return kf * (V(a) + V(b) - V(b - a)) / 2.0 / A**2

    rows = []
    for i, j in itertools.combinations_with_replacement(range(len(cfg.grid)), 2):
        emp, se = _cov_and_se(ys[:, i], ys[:, j])
        ex = exact_cov(idx[i], idx[j])
        row = {"s": cfg.grid[i], "t": cfg.grid[j], "empirical": emp, "stderr": se,
               "exact": ex, "z_exact": (emp - ex) / se if se > 0 else 0.0}
        if cg is not None:
            row["limit"] = 2.0 * kf * cg * min(cfg.grid[i], cfg.grid[j])
        rows.append(row)
    incs = []
    for i in range(1, len(cfg.grid)):
        a, b = idx[i - 1], idx[i]
        inc = ys[:, i] - ys[:, i - 1]
        emp, se = _cov_and_se(inc, ys[:, i - 1])
        ex = exact_cov(a, b) - exact_cov(a, a)
        incs.append({"s": cfg.grid[i - 1], "t": cfg.grid[i], "empirical": emp, "stderr": se,
                     "exact": ex, "z_exact": (emp - ex) / se if se > 0 else 0.0,
                     "z_zero": emp / se if se > 0 else 0.0})
    return FddReport(rows, incs)


@dataclass
class MomentRatioTable:
    p: float
    rows: List[tuple]  # (N, ratio)
    cap: Optional[float] = None

    @property
    def spread(self):
        vals = [r for _, r in self.rows]
        return max(vals) / min(vals) - 1.0

    @property
    def passed(self):
        return self.cap is None or all(r < self.cap for _, r in self.rows)

    def to_csv(self):
        lines = ["N,moment_ratio"]
        lines += [f"{N},{r!r}" for N, r in self.rows]
        return "\n".join(lines) + "\n"


def moment_ratio(sample, p):
    x = _checked_sample(sample)
    m2 = float(np.mean(x * x))
    if m2 <= 0:
        raise DegenerateSampleError("sample is identically zero")
    return float(np.mean(np.abs(x) ** p)) ** (1.0 / p) / math.sqrt(m2)


def normal_moment_ratio(p):
    """(E|Z|^p)^{1/p} for Z ~ N(0, 1)."""
    return (2.0 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)) ** (1.0 / p)


def moment_ratio_diagnostic(samples, p, cap=None):
    """(E|Y|^p)^{1/p} / (E Y^2)^{1/2} for each N in ``samples`` (mapping N -> sample)."""
    if not 2 < p < 3:
        raise DomainError("p must lie in (2, 3)")
    if not samples:
        raise InsufficientDataError("no samples")
    rows = [(int(N), moment_ratio(samples[N], p)) for N in sorted(samples)]
    return MomentRatioTable(float(p), rows, cap)
