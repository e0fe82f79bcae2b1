import json
import shutil
import subprocess

import pytest

from chaoslab.cli import main, resolve_config
from chaoslab.errors import ConfigError


def write_config(tmp_path, obj, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


def run(tmp_path, sub, cfg, *extra, out="out"):
    path = write_config(tmp_path, cfg)
    outdir = tmp_path / out
    code = main([sub, "--config", path, "--out", str(outdir), *extra])
    return code, outdir


def test_classify_boundary(tmp_path, capsys):
    code, out = run(tmp_path, "classify", {"kernel": {"rows": [[-0.75, -0.75]]}})
    assert code == 0
    res = json.loads((out / "classify.json").read_text())
    assert res["regime"] == "boundary" and res["valid"] and res["k"] == 2
    assert json.loads(capsys.readouterr().out) == res


@pytest.mark.parametrize("rows,regime", [([[-0.6, -0.6]], "long"), ([[-0.9, -0.9]], "short"),
                                         ([[-0.6, -0.7, -0.7]], "boundary")])
def test_classify_regimes(tmp_path, rows, regime):
    code, out = run(tmp_path, "classify", {"kernel": {"rows": rows}})
    assert code == 0
    assert json.loads((out / "classify.json").read_text())["regime"] == regime


def test_classify_invalid_exponents(tmp_path):
    code, out = run(tmp_path, "classify", {"kernel": {"rows": [[-0.5, -1.0]]}})
    assert code == 2
    assert json.loads((out / "classify.json").read_text())["valid"] is False


def test_unknown_keys_rejected(tmp_path, capsys):
    code, _ = run(tmp_path, "variance", {"N_grid": [16], "colour": "red"})
    assert code == 2
    assert "'colour'" in capsys.readouterr().err
    code, _ = run(tmp_path, "variance", {"kernel": {"rowz": [[-0.75, -0.75]]}})
    assert code == 2


def test_malformed_config_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "R": 10,\n  "seed": ,\n}\n')
    assert main(["classify", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "line 3, column 11" in capsys.readouterr().err
    assert main(["classify", "--config", str(tmp_path / "missing.json")]) == 2


@pytest.mark.parametrize("bad", [
    {"N_grid": [64, 32]}, {"N_grid": [1]}, {"R": 0}, {"seed": -1}, {"seed": 2**64},
    {"innovations": ["cauchy"]}, {"tail_tolerance": 2.0}, {"regime": "medium"},
    {"kernel": {"rows": [[-0.75], [-0.75, -0.75]]}}, {"kernel": {"preset": "other"}},
    {"budget": 0}, {"L": "log"}, {"c": 0}, {"M": 0}, {"band": 1.5},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        resolve_config(bad)


def test_variance_output(tmp_path):
    code, out = run(tmp_path, "variance", {"N_grid": [16, 64], "M": 64})
    assert code == 0
    lines = (out / "variance.csv").read_text().splitlines()
    assert lines[0] == "N,exact_variance,reference_2Cg_NlnN,ratio_to_2Cg_NlnN"
    assert [l.split(",")[0] for l in lines[1:]] == ["16", "64"]


def test_linear_output(tmp_path):
    code, out = run(tmp_path, "linear", {"N_grid": [10, 100], "c": 2.0})
    assert code == 0
    assert (out / "linear.csv").read_text().startswith("N,gamma_N,")


def test_contractions_exit_code(tmp_path):
    code, out = run(tmp_path, "contractions", {"N_grid": [64, 128, 256], "M": 32})
    assert code in (0, 4)
    assert (out / "contractions.csv").read_text().startswith("N,inner_product,contraction_r1")


def test_resource_budget_exit(tmp_path, capsys):
    code, _ = run(tmp_path, "clt", {"N_grid": [64], "M": 16, "R": 100}, "--budget", "10")
    assert code == 3
    assert "budget" in capsys.readouterr().err


def test_clt_outputs_identical_across_threads(tmp_path):
    cfg = {"N_grid": [64], "M": 16, "R": 200, "seed": 99,
           "innovations": ["gaussian", "rademacher"]}
    c1, o1 = run(tmp_path, "clt", cfg, "--threads", "1", out="t1")
    c2, o2 = run(tmp_path, "clt", cfg, "--threads", "3", out="t2")
    assert c1 == c2 and c1 in (0, 4)
    names = sorted(p.name for p in o1.iterdir())
    assert names == sorted(p.name for p in o2.iterdir())
    assert "endpoints_N64_rademacher.csv" in names
    for n in names:
        assert (o1 / n).read_bytes() == (o2 / n).read_bytes()


def test_resolved_config_reproduces(tmp_path):
    cfg = {"N_grid": [48], "M": 12, "R": 150, "innovations": ["gaussian", "standardized_uniform"]}
    c1, o1 = run(tmp_path, "universality", cfg, "--seed", "5", out="a")
    resolved = json.loads((o1 / "resolved_config.json").read_text())
    assert resolved["seed"] == 5 and "out" not in resolved and "threads" not in resolved
    path = write_config(tmp_path, resolved, "resolved.json")
    c2 = main(["universality", "--config", path, "--out", str(tmp_path / "b")])
    assert c1 == c2
    for n in ("universality.json", "resolved_config.json"):
        assert (o1 / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_universality_needs_two_families(tmp_path):
    code, _ = run(tmp_path, "universality", {"N_grid": [32], "M": 8, "R": 100})
    assert code == 2


def test_flags_after_or_before_subcommand(tmp_path):
    path = write_config(tmp_path, {"kernel": {"rows": [[-0.9, -0.9]]}})
    assert main(["--config", path, "--out", str(tmp_path / "x"), "classify"]) == 0
    assert (tmp_path / "x" / "classify.json").exists()


def test_console_script(tmp_path):
    exe = shutil.which("chaoslab")
    if exe is None:
        pytest.skip("console script not installed")
    path = write_config(tmp_path, {"kernel": {"rows": [[-0.75, -0.75]]}})
    proc = subprocess.run([exe, "classify", "--config", path, "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["regime"] == "boundary"
