import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from ruintail.analytic import solve_beta
from ruintail.cli import main
from ruintail.model import reference_model

from oracles import pareto_samples

REFERENCE = """
output_dir = "{out}"

[regime]
a0 = 1.0
a1 = 2.0
sigma0 = 1.0
sigma1 = 1.0
lambda01 = 1.0
lambda10 = 1.0

[claims]
c = 1.2
alpha1 = 1.0
F1 = {{ family = "exponential", rate = 1.0 }}

[simulation]
seed = {seed}
n_paths = {n_paths}

[grids]
u = [10, 20, 50, 100]
"""


def make_config(tmp_path, name="run.toml", seed=1, n_paths=4, text=REFERENCE, **subs):
    out = tmp_path / (name + ".out")
    body = text.format(out=out, seed=seed, n_paths=n_paths)
    for old, new in subs.items():
        body = body.replace(old, new)
    path = tmp_path / name
    path.write_text(body)
    return path, out


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_help_lists_flags(capsys):
    for cmd in ("solve-beta", "simulate", "estimate-ruin", "tail-fit", "verify"):
        with pytest.raises(SystemExit) as info:
            main([cmd, "--help"])
        assert info.value.code == 0
        text = capsys.readouterr().out
        for flag in ("--config", "--seed", "--paths", "--workers", "--out"):
            assert flag in text
    with pytest.raises(SystemExit):
        main(["tail-fit", "--help"])
    assert "--samples" in capsys.readouterr().out


def test_solve_beta_reference(tmp_path, capsys):
    cfg, out = make_config(tmp_path)
    assert main(["solve-beta", "--config", str(cfg)]) == 0
    text = capsys.readouterr().out
    assert "identities       ok" in text
    raw = (out / "beta.csv").read_bytes()
    assert raw.startswith(b"beta0,beta1,beta,residual_f,residual_cubic\n")
    assert b"\r" not in raw
    (row,) = read_rows(out / "beta.csv")
    assert float(row["beta"]) == solve_beta(reference_model().regimes).beta
    assert float(row["beta0"]) == 1.0 and float(row["beta1"]) == 3.0
    assert 1.64 < float(row["beta"]) < 1.65


def test_solve_beta_swapped_labels(tmp_path, capsys):
    cfg, out = make_config(tmp_path, **{"\na0 = 1.0": "\na0 = 2.0", "\na1 = 2.0": "\na1 = 1.0"})
    assert main(["solve-beta", "-c", str(cfg)]) == 0
    assert "exchanged" in capsys.readouterr().out
    (row,) = read_rows(out / "beta.csv")
    assert float(row["beta0"]) == 1.0


def test_solve_beta_degenerate(tmp_path, capsys):
    cfg, _ = make_config(tmp_path, **{"\na1 = 2.0": "\na1 = 1.0"})
    assert main(["solve-beta", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "2a/sigma^2 - 1 = 1.0" in err


def test_solve_beta_out_of_scope(tmp_path, capsys):
    cfg, _ = make_config(tmp_path, **{"\na0 = 1.0": "\na0 = 0.4"})
    assert main(["solve-beta", "--config", str(cfg)]) == 2


def test_config_errors(tmp_path, capsys):
    cfg, _ = make_config(tmp_path, **{"[claims]": "typo = 1\n[claims]"})
    assert main(["solve-beta", "--config", str(cfg)]) == 1
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 1
    assert main(["simulate"]) == 1


def test_simulate_deterministic_across_workers(tmp_path):
    cfg, out = make_config(tmp_path, n_paths=4)
    assert main(["simulate", "--config", str(cfg), "--workers", "1", "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", str(cfg), "--workers", "4", "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a" / "y_samples.csv", tmp_path / "b" / "y_samples.csv"
    assert a.read_bytes() == b.read_bytes()
    rows = read_rows(a)
    assert list(rows[0]) == ["path_id", "initial_regime", "y_inf", "y_sup", "n_cycles_used", "truncation_bound"]
    assert len(rows) == 8 and {r["initial_regime"] for r in rows} == {"0", "1"}
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    entry = manifest["runs"]["simulate"]
    assert entry["outputs"]["y_samples.csv"] == sha(a)
    assert entry["seed"] == 1 and manifest["version"]


def test_simulate_reproducible_from_manifest(tmp_path):
    cfg, out = make_config(tmp_path, n_paths=50, seed=3)
    assert main(["simulate", "--config", str(cfg)]) == 0
    first = sha(out / "y_samples.csv")
    rerun = tmp_path / "rerun"
    assert main(["simulate", "--config", str(out / "manifest.json"), "--out", str(rerun)]) == 0
    assert sha(rerun / "y_samples.csv") == first


def test_simulate_without_claims(tmp_path):
    cfg, out = make_config(tmp_path, n_paths=20, **{"alpha1 = 1.0": "alpha1 = 0.0"})
    assert main(["simulate", "--config", str(cfg)]) == 0
    rows = read_rows(out / "y_samples.csv")
    assert all(float(r["y_inf"]) < 0 for r in rows)
    assert all(float(r["y_sup"]) == 0 for r in rows)


def test_one_manifest_per_directory(tmp_path):
    cfg, out = make_config(tmp_path)
    main(["solve-beta", "--config", str(cfg)])
    main(["simulate", "--config", str(cfg)])
    assert [p.name for p in out.glob("*.json")] == ["manifest.json"]
    runs = json.loads((out / "manifest.json").read_text())["runs"]
    assert set(runs) == {"solve-beta", "simulate"}


def test_estimate_ruin(tmp_path, capsys):
    cfg, out = make_config(tmp_path, n_paths=20_000, seed=8)
    assert main(["estimate-ruin", "--config", str(cfg)]) == 0
    rows = read_rows(out / "ruin.csv")
    assert list(rows[0]) == ["u", "initial_regime", "psi_hat", "ci_lo", "ci_hi", "sandwich_lo", "sandwich_hi",
                             "trunc_bias"]
    assert {r["initial_regime"] for r in rows} == {"0", "1"}
    for i in ("0", "1"):
        sub = [r for r in rows if r["initial_regime"] == i]
        psi = [float(r["psi_hat"]) for r in sub]
        assert psi == sorted(psi, reverse=True)
        assert [float(r["u"]) for r in sub] == [10, 20, 50, 100]
        for r in sub:
            assert float(r["sandwich_lo"]) <= float(r["sandwich_hi"])
            assert float(r["trunc_bias"]) < 1e-8


def test_estimate_ruin_needs_grid(tmp_path):
    cfg, _ = make_config(tmp_path, **{"u = [10, 20, 50, 100]": ""})
    assert main(["estimate-ruin", "--config", str(cfg)]) == 1


def write_samples(path, y):
    with open(path, "w") as fh:
        fh.write("path_id,initial_regime,y_inf\n")
        for i, v in enumerate(y):
            fh.write(f"{i},0,{float(v)!r}\n")


def test_tail_fit_on_pareto_file(tmp_path, capsys):
    y = pareto_samples(np.random.default_rng(5), 10**6, 2.0)
    write_samples(tmp_path / "y.csv", y)
    assert main(["tail-fit", "--samples", str(tmp_path / "y.csv"), "--out", str(tmp_path / "t")]) == 0
    summary = json.loads((tmp_path / "t" / "tail_summary.json").read_text())
    assert summary["beta_hill"] == pytest.approx(2.0, abs=0.05)
    assert summary["beta_analytic"] is None
    assert set(summary["hill_sweep"]) == {"n^1/2", "n^2/3", "n^0.8"}
    rows = read_rows(tmp_path / "t" / "tail.csv")
    assert list(rows[0]) == ["u", "g_bar", "ci", "u_beta_gbar"]


def test_tail_fit_too_few_samples(tmp_path, capsys):
    write_samples(tmp_path / "y.csv", np.arange(1, 101.0))
    assert main(["tail-fit", "--samples", str(tmp_path / "y.csv"), "--out", str(tmp_path / "t")]) == 3
    assert "InsufficientTailPoints" in capsys.readouterr().err


def test_verify_negative_control(tmp_path, capsys):
    cfg, out = make_config(tmp_path, n_paths=2000,
                           **{'{ family = "exponential", rate = 1.0 }': '{ family = "pareto", scale = 1.0, shape = 1.5 }',
                              "[grids]": "n_cycles = 20000\n\n[grids]"})
    assert main(["verify", "--config", str(cfg)]) == 4
    rows = {r["item"]: r["status"] for r in read_rows(out / "verify.csv")}
    assert rows["assumption: moment condition"] == "FAIL"


def _verify_pattern(tmp_path, seed):
    cfg, out = make_config(tmp_path, name=f"v{seed}.toml", n_paths=10_000, seed=seed)
    code = main(["verify", "--config", str(cfg)])
    return code, {r["item"]: r["status"] for r in read_rows(out / "verify.csv")}


def test_verify_reference_all_pass(tmp_path, capsys):
    code, pattern = _verify_pattern(tmp_path, 1)
    failed = sorted(k for k, v in pattern.items() if v != "PASS")
    assert failed == [] and code == 0


def test_verify_pattern_stable_under_reseeding(tmp_path, capsys):
    _, a = _verify_pattern(tmp_path, 1)
    _, b = _verify_pattern(tmp_path, 2)
    assert a == b


def test_module_entry_point(tmp_path):
    cfg, out = make_config(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "ruintail", "solve-beta", "-c", str(cfg)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "beta " in proc.stdout
