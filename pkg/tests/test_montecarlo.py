import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from chaoslab import (
    CoefficientField,
    InnovationSpec,
    PathConfig,
    PowerKernelSpec,
    fdd_covariance_check,
    moment_ratio_diagnostic,
    normality_report,
    partial_sum_variance,
    replicate_endpoint,
    replicate_partial_sums,
    sample_innovations,
    universality_compare,
)
from chaoslab.errors import (
    ConfigError,
    DegenerateSampleError,
    DomainError,
    InsufficientDataError,
    InvalidComparisonError,
    InvalidInputError,
    ResourceError,
)
from chaoslab.montecarlo import (
    FAMILIES,
    derive_seed,
    normal_moment_ratio,
    splitmix64,
    write_endpoint_csv,
)
from chaoslab.process import normalization_factor

import oracles


# -- seeds and innovations ---------------------------------------------------

def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 stream started at state 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6))
def test_derive_seed_range_and_distinctness(base, r):
    s = derive_seed(base, r)
    assert 0 <= s < 2**64
    assert s != derive_seed(base, r + 1)


def test_innovation_unknown_family():
    with pytest.raises(ConfigError):
        InnovationSpec("cauchy")
    with pytest.raises(InvalidInputError):
        sample_innovations(InnovationSpec("gaussian"), 0, 1)


def test_centered_exponential_third_abs_moment():
    spec = InnovationSpec("centered_exponential")
    assert spec.third_abs_moment == pytest.approx(12 / math.e - 2, rel=1e-15)
    assert spec.third_abs_moment == pytest.approx(oracles.centered_exp_third_abs(), rel=1e-13)


@pytest.mark.parametrize("family", FAMILIES)
def test_innovation_moments(family):
    spec = InnovationSpec(family)
    x = spec.sample(1_000_000, 5)
    R = x.size
    for power, target in ((1, 0.0), (2, 1.0), (3, spec.third_moment), (4, spec.fourth_moment)):
        v = x**power
        assert abs(v.mean() - target) <= 5 * v.std() / math.sqrt(R) + 1e-12
    a3 = np.abs(x) ** 3
    assert abs(a3.mean() - spec.third_abs_moment) <= 5 * a3.std() / math.sqrt(R) + 1e-12


def test_sampling_deterministic():
    spec = InnovationSpec("standardized_uniform")
    assert np.array_equal(spec.sample(100, 3), spec.sample(100, 3))
    assert not np.array_equal(spec.sample(100, 3), spec.sample(100, 4))


# -- replication -------------------------------------------------------------

def test_replicates_independent_of_threads(boundary_kernel):
    field = CoefficientField(boundary_kernel, 40)
    cfg = PathConfig(128, 40, grid=[0.5, 1.0], seed=77)
    a = replicate_partial_sums(field, cfg, "gaussian", 150, threads=1)
    b = replicate_partial_sums(field, cfg, "gaussian", 150, threads=3)
    assert a.shape == (150, 2)
    assert np.array_equal(a, b)


def test_replicate_matches_single_paths(boundary_kernel):
    from chaoslab import simulate_path

    field = CoefficientField(boundary_kernel, 10)
    cfg = PathConfig(30, 10, seed=5)
    ys = replicate_endpoint(field, cfg, "rademacher", 100, normalize=False)
    spec = InnovationSpec("rademacher")
    for r in (0, 17, 99):
        path = simulate_path(field, PathConfig(30, 10, seed=derive_seed(5, r)), spec)
        assert ys[r] == pytest.approx(path.values.sum(), rel=1e-10, abs=1e-10)


def test_replicate_variance_matches_exact(boundary_kernel):
    field = CoefficientField(boundary_kernel, 32)
    cfg = PathConfig(64, 32, seed=12)
    R = 4000
    y = replicate_endpoint(field, cfg, "centered_exponential", R, normalize=False)
    target = partial_sum_variance(field, 64, truncation=32)
    se = math.sqrt(max(np.mean((y - y.mean()) ** 4) - y.var() ** 2, 0) / R)
    assert abs(y.var(ddof=1) - target) < 4 * se


def test_replicate_errors(boundary_kernel, tmp_path):
    field = CoefficientField(boundary_kernel, 8)
    cfg = PathConfig(16, 8)
    with pytest.raises(InvalidInputError):
        replicate_endpoint(field, cfg, "gaussian", 10)
    with pytest.raises(ResourceError):
        replicate_endpoint(field, cfg, "gaussian", 100, budget=1.0)
    with pytest.raises(ConfigError):
        replicate_endpoint(field, cfg, "levy", 100)
    write_endpoint_csv([1.5, -2.0], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "Y_N(1)\n1.5\n-2.0\n"


# -- normality and universality ---------------------------------------------

def test_ks_matches_hand_oracle():
    x = np.random.default_rng(3).standard_normal(500) * 1.7
    rep = normality_report(x, 1.7)
    cdf = stats.norm(0, 1.7).cdf
    assert rep.ks == pytest.approx(oracles.ks_statistic(x, cdf), abs=1e-14)
    assert rep.critical == pytest.approx(1.358 / math.sqrt(500))
    y = np.random.default_rng(4).standard_normal(500)
    d = universality_compare({"a": x, "b": y}).pairs[("a", "b")]
    assert d == pytest.approx(oracles.ks_two_sample(x, y), abs=1e-14)


def test_normality_report_gaussian_passes():
    x = np.random.default_rng(8).standard_normal(4000) * 2.0
    rep = normality_report(x, 2.0)
    assert rep.passed
    d = rep.as_dict()
    assert set(d) == {"ks", "skewness", "excess_kurtosis", "variance", "stderr", "pass", "R",
                      "target_sigma", "critical"}
    assert json.loads(rep.to_json())["R"] == 4000
    assert abs(rep.variance - 4.0) < 4 * rep.stderr
    assert rep.stderr == pytest.approx(4.0 * math.sqrt(2 / 4000), rel=0.1)


def test_normality_report_wrong_scale_fails():
    x = np.random.default_rng(8).standard_normal(4000) * 2.0
    assert not normality_report(x, 1.0).passed


def test_normality_errors():
    with pytest.raises(DegenerateSampleError):
        normality_report(np.ones(200), 1.0)
    with pytest.raises(InsufficientDataError):
        normality_report(np.arange(10.0), 1.0)
    with pytest.raises(DomainError):
        normality_report(np.arange(200.0), 0.0)


def test_universality_self_distance_zero():
    x = np.random.default_rng(1).standard_normal(300)
    rep = universality_compare({"a": x, "b": x.copy()})
    assert rep.pairs[("a", "b")] == 0.0 and rep.passed
    assert rep.critical == pytest.approx(1.628 * math.sqrt(2 / 300))


def test_universality_detects_scale_change():
    rng = np.random.default_rng(2)
    rep = universality_compare({"a": rng.standard_normal(2000), "b": 3 * rng.standard_normal(2000)})
    assert not rep.passed


def test_universality_errors():
    with pytest.raises(InvalidComparisonError):
        universality_compare({"a": np.arange(100.0), "b": np.arange(101.0)})
    with pytest.raises(InsufficientDataError):
        universality_compare({"a": np.arange(100.0)})


def test_unnormalized_endpoints_fail_normality(boundary_kernel):
    field = CoefficientField(boundary_kernel, 16)
    cfg = PathConfig(256, 16, seed=3)
    y = replicate_endpoint(field, cfg, "gaussian", 300, normalize=False)
    A = normalization_factor("boundary", 256)
    sigma = math.sqrt(partial_sum_variance(field, 256, truncation=16)) / A
    assert not normality_report(y, sigma).passed
    assert normality_report(y / A, sigma).ks < normality_report(y, sigma).ks


# -- finite-dimensional covariances -----------------------------------------

def test_fdd_covariance_check(boundary_kernel):
    field = CoefficientField(boundary_kernel, 24)
    cfg = PathConfig(96, 24, grid=[0.25, 0.5, 1.0], seed=31)
    rep = fdd_covariance_check(field, cfg, "standardized_uniform", 1000, cg=27.500743272081486)
    assert rep.passed
    assert len(rep.rows) == 6 and len(rep.increments) == 2
    assert rep.rows[0]["limit"] == pytest.approx(2 * 2 * 27.500743272081486 * 0.25)
    with pytest.raises(InsufficientDataError):
        fdd_covariance_check(field, PathConfig(96, 24), "gaussian", 1000)
    with pytest.raises(InvalidInputError):
        fdd_covariance_check(field, cfg, "gaussian", 100)


# -- moment ratio ------------------------------------------------------------

def test_normal_moment_ratio_oracle():
    assert normal_moment_ratio(2.5) == pytest.approx(oracles.normal_abs_moment(2.5) ** 0.4,
                                                     rel=1e-13)
    assert normal_moment_ratio(2.5) == pytest.approx(1.0875, abs=5e-5)


def test_moment_ratio_diagnostic():
    rng = np.random.default_rng(6)
    samples = {64: rng.standard_normal(200_000), 128: rng.standard_normal(200_000) * 3}
    tab = moment_ratio_diagnostic(samples, 2.5, cap=1.2)
    assert [N for N, _ in tab.rows] == [64, 128]
    for _, r in tab.rows:
        assert r == pytest.approx(normal_moment_ratio(2.5), rel=5e-3)
    assert tab.passed and tab.spread < 1e-2
    assert tab.to_csv().startswith("N,moment_ratio\n64,")
    with pytest.raises(DomainError):
        moment_ratio_diagnostic(samples, 3.0)
    with pytest.raises(InsufficientDataError):
        moment_ratio_diagnostic({}, 2.5)
