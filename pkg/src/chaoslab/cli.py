"""Command-line front end: ``chaoslab <subcommand> --config run.json --out DIR``.

Config files are JSON objects.  Unknown keys are errors.  Every run writes
``resolved_config.json`` (all defaults filled in, seed and budget overrides
applied; ``out`` and ``threads`` omitted) next to its outputs.  Re-running
with that file reproduces the outputs byte for byte.

Exit codes: 0 success, 2 configuration error, 3 resource budget exceeded,
4 statistical check failed.
"""

import argparse
import json
import math
import sys
from pathlib import Path

from . import analysis, montecarlo
from .errors import ChaosLabError, ConfigError, ResourceError
from .forms import field_criterion_report
from .kernels import (
    CoefficientField,
    MemoryRegime,
    PowerKernelSpec,
    classify_regime,
    horizon_for_tolerance,
    validate_exponents,
)
from .process import DEFAULT_BUDGET, PathConfig, normalization_factor

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_FAIL = 0, 2, 3, 4

KERNEL_DEFAULTS = {
    "rows": [[-0.75, -0.75]],
    "coefs": None,
    "alpha": None,
    "scale": None,
    "preset": None,
}

DEFAULTS = {
    "kernel": KERNEL_DEFAULTS,
    "L": "one",
    "regime": None,
    "N_grid": [256, 512, 1024],
    "M": None,
    "tail_tolerance": 1e-3,
    "innovations": ["gaussian"],
    "R": 2000,
    "seed": 0,
    "out": "out",
    "budget": DEFAULT_BUDGET,
    "threads": 1,
    "band": 0.15,
    "target_variance": None,
    "c": 1.0,
}

PRESETS = ("cancelling",)
RUNTIME_ONLY = ("out", "threads")


def _fail(msg):
    raise ConfigError(msg)


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        _fail(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        _fail(f"{where}: unknown key(s) {', '.join(repr(k) for k in extra)}; "
              f"allowed: {', '.join(sorted(allowed))}")


def _pos_int(v, where, minimum=1):
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        _fail(f"{where}: expected an integer >= {minimum}, got {v!r}")
    return v


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def resolve_config(raw, overrides=None):
    """Merge ``raw`` with defaults and overrides, validating every field."""
    _check_keys(raw, DEFAULTS, "config")
    cfg = json.loads(json.dumps(DEFAULTS))
    for key, val in raw.items():
        if key == "kernel":
            _check_keys(val, KERNEL_DEFAULTS, "kernel")
            cfg["kernel"].update(val)
        else:
            cfg[key] = val
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val

    kern = cfg["kernel"]
    if kern["preset"] is not None and kern["preset"] not in PRESETS:
        _fail(f"kernel.preset: unknown preset {kern['preset']!r}; allowed: {', '.join(PRESETS)}")
    rows = kern["rows"]
    if (not isinstance(rows, list) or not rows
            or not all(isinstance(r, list) and r for r in rows)
            or len({len(r) for r in rows}) != 1):
        _fail("kernel.rows: expected a non-empty list of equal-length exponent lists")
    for i, r in enumerate(rows):
        for j, v in enumerate(r):
            _number(v, f"kernel.rows[{i}][{j}]")
    if kern["coefs"] is not None:
        if not isinstance(kern["coefs"], list) or len(kern["coefs"]) != len(rows):
            _fail("kernel.coefs: expected one coefficient per row")
        for i, v in enumerate(kern["coefs"]):
            _number(v, f"kernel.coefs[{i}]")
    for key in ("alpha", "scale"):
        if kern[key] is not None:
            _number(kern[key], f"kernel.{key}")
    if cfg["L"] != "one":
        _fail("L: only 'one' (L identically 1) is supported in configs")
    if cfg["regime"] is not None:
        try:
            MemoryRegime(cfg["regime"])
        except ValueError:
            _fail(f"regime: unknown value {cfg['regime']!r}; allowed: "
                  f"{', '.join(m.value for m in MemoryRegime)}")
    grid = cfg["N_grid"]
    if not isinstance(grid, list) or not grid:
        _fail("N_grid: expected a non-empty list of integers")
    for i, N in enumerate(grid):
        _pos_int(N, f"N_grid[{i}]", 2)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        _fail("N_grid: must be strictly increasing")
    if cfg["M"] is not None:
        _pos_int(cfg["M"], "M")
    tol = _number(cfg["tail_tolerance"], "tail_tolerance")
    if not 0 < tol < 1:
        _fail("tail_tolerance: must lie in (0, 1)")
    fams = cfg["innovations"]
    if not isinstance(fams, list) or not fams:
        _fail("innovations: expected a non-empty list of family names")
    for i, f in enumerate(fams):
        if f not in montecarlo.FAMILIES:
            _fail(f"innovations[{i}]: unknown family {f!r}; allowed: "
                  f"{', '.join(montecarlo.FAMILIES)}")
    _pos_int(cfg["R"], "R", 2)
    _pos_int(cfg["seed"], "seed", 0)
    if cfg["seed"] >= 2**64:
        _fail("seed: must fit in 64 bits")
    if not isinstance(cfg["out"], str) or not cfg["out"]:
        _fail("out: expected a directory path")
    if _number(cfg["budget"], "budget") <= 0:
        _fail("budget: must be positive")
    _pos_int(cfg["threads"], "threads")
    band = _number(cfg["band"], "band")
    if not 0 < band < 1:
        _fail("band: must lie in (0, 1)")
    if cfg["target_variance"] is not None and _number(cfg["target_variance"], "target_variance") <= 0:
        _fail("target_variance: must be positive")
    if _number(cfg["c"], "c") == 0:
        _fail("c: must be nonzero")
    return cfg


def load_config(path):
    """Read and parse a JSON config, reporting line and column on syntax errors."""
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(f"{path}: cannot read config ({exc.strerror})")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        _fail(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")


def build_kernel(cfg):
    kern = cfg["kernel"]
    if kern["preset"] == "cancelling":
        return analysis.cancelling_kernel()[0]
    try:
        return PowerKernelSpec(kern["rows"], kern["coefs"], alpha=kern["alpha"],
                               scale=kern["scale"])
    except ChaosLabError as exc:
        _fail(f"kernel: {exc}")


def _horizon(cfg, field):
    if cfg["M"] is not None:
        return cfg["M"]
    return horizon_for_tolerance(field, cfg["tail_tolerance"])


def _field(cfg):
    g = build_kernel(cfg)
    field = CoefficientField(g, 1)
    return field.with_horizon(_horizon(cfg, field))


def _regime(cfg, field):
    return MemoryRegime(cfg["regime"]) if cfg["regime"] else field.regime()


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(out, name, text):
    path = Path(out) / name
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def cmd_classify(cfg, out):
    kern = cfg["kernel"]
    if kern["preset"] is not None:
        g = build_kernel(cfg)
        rows, alpha = g.rows.tolist(), g.alpha
    else:
        rows = kern["rows"]
        alpha = kern["alpha"] if kern["alpha"] is not None else max(math.fsum(r) for r in rows)
    k = len(rows[0])
    report = validate_exponents(rows, alpha)
    result = {"k": k, "alpha": alpha, "valid": report.valid, "rows": report.as_dict()["rows"]}
    try:
        result["regime"] = classify_regime(k, alpha).value
    except ChaosLabError as exc:
        result["regime"] = None
        result["valid"] = False
        result["error"] = str(exc)
    text = _dump_json(result)
    _write(out, "classify.json", text)
    sys.stdout.write(text)
    return EXIT_OK if result["valid"] else EXIT_CONFIG


def cmd_variance(cfg, out):
    field = _field(cfg)
    trunc = cfg["M"]
    table = analysis.variance_ratio_table(field, cfg["N_grid"], truncation=trunc)
    _write(out, "variance.csv", table.to_csv())
    return EXIT_OK


def _target_variance(cfg, field, regime):
    if cfg["target_variance"] is not None:
        return cfg["target_variance"]
    k = field.k
    if regime is MemoryRegime.BOUNDARY:
        return 2 * math.factorial(k) * analysis.cg_closed_form(field.kernel)
    N = cfg["N_grid"][-1]
    A = normalization_factor(regime, N, k=k, alpha=field.alpha)
    return analysis.partial_sum_variance(field, N, truncation=field.M) / A**2


def cmd_contractions(cfg, out):
    field = _field(cfg)
    regime = _regime(cfg, field)
    target = _target_variance(cfg, field, regime)
    rep = field_criterion_report(field, cfg["N_grid"], target, regime=regime, band=cfg["band"])
    _write(out, "contractions.csv", rep.to_csv())
    return EXIT_OK if rep.passed else EXIT_FAIL


def _endpoint_samples(cfg, field, regime, N):
    pc = PathConfig(N, field.M, (1.0,), cfg["seed"])
    samples = {}
    for fam in cfg["innovations"]:
        samples[fam] = montecarlo.replicate_endpoint(
            field, pc, fam, cfg["R"], regime=regime, threads=cfg["threads"],
            budget=cfg["budget"])
    return samples


def _exact_sigma(field, regime, N):
    A = normalization_factor(regime, N, k=field.k, alpha=field.alpha)
    return math.sqrt(analysis.partial_sum_variance(field, N, truncation=field.M)) / A


def cmd_clt(cfg, out):
    field = _field(cfg)
    regime = _regime(cfg, field)
    results, ok = [], True
    for N in cfg["N_grid"]:
        sigma = _exact_sigma(field, regime, N)
        for fam, sample in _endpoint_samples(cfg, field, regime, N).items():
            rep = montecarlo.normality_report(sample, sigma)
            ok = ok and rep.passed
            montecarlo.write_endpoint_csv(sample, Path(out) / f"endpoints_N{N}_{fam}.csv")
            results.append({"N": N, "family": fam, "M": field.M, "report": rep.as_dict()})
    _write(out, "clt.json", _dump_json({"results": results, "pass": ok}))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_universality(cfg, out):
    field = _field(cfg)
    regime = _regime(cfg, field)
    if len(cfg["innovations"]) < 2:
        _fail("innovations: universality needs at least two families")
    results, ok = [], True
    for N in cfg["N_grid"]:
        sigma = _exact_sigma(field, regime, N)
        rep = montecarlo.universality_compare(_endpoint_samples(cfg, field, regime, N), sigma)
        ok = ok and rep.passed
        results.append({"N": N, "M": field.M, "comparison": rep.as_dict()})
    _write(out, "universality.json", _dump_json({"results": results, "pass": ok}))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_linear(cfg, out):
    table = analysis.linear_case_table(cfg["c"], cfg["N_grid"])
    _write(out, "linear.csv", table.to_csv())
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "variance": cmd_variance,
    "contractions": cmd_contractions,
    "clt": cmd_clt,
    "universality": cmd_universality,
    "linear": cmd_linear,
}


def _global_flags(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=d, help="JSON experiment config")
    parser.add_argument("--out", metavar="DIR", default=d, help="output directory")
    parser.add_argument("--seed", metavar="U64", type=int, default=d, help="override base seed")
    parser.add_argument("--threads", metavar="N", type=int, default=d, help="worker threads")
    parser.add_argument("--budget", metavar="FLOPS", type=float, default=d,
                        help="per-replicate operation cap")


def build_parser():
    parser = argparse.ArgumentParser(prog="chaoslab",
                                     description="Discrete chaos process laboratory")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        _global_flags(sp, suppress=True)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        raw = load_config(args.config)
        cfg = resolve_config(raw, {"out": args.out, "seed": args.seed,
                                   "threads": args.threads, "budget": args.budget})
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        # location and parallelism do not affect results, so they are not echoed
        resolved = {k: v for k, v in cfg.items() if k not in RUNTIME_ONLY}
        _write(out, "resolved_config.json", _dump_json(resolved))
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ChaosLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
