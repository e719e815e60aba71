import csv
from pathlib import Path

import pytest

from costly_obs import experiment
from costly_obs.cli import main

SMALL = ["--episodes", "3", "--step-cap", "150", "--batch-size", "16", "--hidden", "8,8"]


def train(tmp_path, name, *extra, variant="locf-counters", seed="3"):
    out = tmp_path / name
    code = main(["train", "--variant", variant, "--seed", seed, "--out", str(out), *SMALL, *extra])
    return code, out


def test_train_writes_run_artifacts(tmp_path, capsys):
    code, out = train(tmp_path, "a")
    assert code == 0
    for f in ("manifest.json", "stats.csv", "transitions.csv", "qnet.mlp"):
        assert (out / f).is_file()
    assert str(out) in capsys.readouterr().out
    m = experiment.read_manifest(out)
    assert m["seed"] == 3


def test_train_is_deterministic(tmp_path):
    _, a = train(tmp_path, "a")
    _, b = train(tmp_path, "b")
    assert (a / "stats.csv").read_bytes() == (b / "stats.csv").read_bytes()
    assert (a / "transitions.csv").read_bytes() == (b / "transitions.csv").read_bytes()
    _, c = train(tmp_path, "c", seed="4")
    assert (a / "transitions.csv").read_bytes() != (c / "transitions.csv").read_bytes()


def test_dynamics_variant_requires_model(tmp_path, capsys):
    code, _ = train(tmp_path, "d", variant="dynamics-counters")
    assert code == 2
    assert "dynamics-model" in capsys.readouterr().err


def test_unknown_variant_is_usage_error(tmp_path):
    assert main(["train", "--variant", "oracle", "--out", str(tmp_path / "x")]) == 2


def test_fit_dynamics_and_dynamics_training(tmp_path, capsys):
    _, run = train(tmp_path, "src")
    capsys.readouterr()
    model = tmp_path / "dyn.model"
    assert main(["fit-dynamics", "--log", str(run / "transitions.csv"), "--out", str(model),
                 "--epochs", "2", "--hidden", "8"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    keys = [kv.split("=")[0] for kv in line.split()]
    assert keys == ["rmse_pos", "rmse_vel", "baseline_pos", "baseline_vel"]
    code, out = train(tmp_path, "dyn", "--dynamics-model", str(model), variant="dynamics-counters")
    assert code == 0 and (out / "stats.csv").is_file()


def test_fit_dynamics_zero_epochs_warns(tmp_path, caplog):
    _, run = train(tmp_path, "src")
    with caplog.at_level("WARNING"):
        assert main(["fit-dynamics", "--log", str(run / "transitions.csv"),
                     "--out", str(tmp_path / "m"), "--epochs", "0"]) == 0
    assert any("epoch" in r.message for r in caplog.records)


def test_fit_dynamics_missing_log(tmp_path):
    assert main(["fit-dynamics", "--log", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "m")]) == 2


def test_analyze_outputs(tmp_path, capsys):
    _, run = train(tmp_path, "a")
    out = tmp_path / "analysis"
    assert main(["analyze", "--run", str(run), "--out", str(out), "--window", "2"]) == 0
    csvs = sorted(p.name for p in out.glob("*.csv"))
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert len(csvs) == 4 and len(svgs) == 3
    for p in out.glob("*.svg"):
        assert p.read_text().startswith("<svg")


def test_analyze_compare(tmp_path):
    _, a = train(tmp_path, "a")
    _, b = train(tmp_path, "b", variant="locf")
    out = tmp_path / "cmp"
    assert main(["analyze", "--compare", str(a), str(b), "--out", str(out)]) == 0
    with open(out / "compare.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 3
    assert (out / "compare.svg").is_file()


def test_analyze_missing_directory(tmp_path):
    assert main(["analyze", "--run", str(tmp_path / "missing")]) == 2
    assert main(["analyze"]) == 2


def sweep(out, *extra):
    return main(["sweep", "--variants", "locf,locf-counters,dynamics-counters", "--obs-costs", "-8",
                 "--seeds", "1,2", "--dynamics-epochs", "1", "--out", str(out), *SMALL, *extra])


def read_sweep(out):
    with open(out / "sweep.csv") as fh:
        return list(csv.DictReader(fh))


def test_sweep_grid_and_parallel_equivalence(tmp_path):
    assert sweep(tmp_path / "serial") == 0
    rows = read_sweep(tmp_path / "serial")
    assert len(rows) == 6 and all(r["status"] == "ok" for r in rows)
    assert {(r["variant"], r["seed"]) for r in rows} == {
        (v, s) for v in ("locf", "locf-counters", "dynamics-counters") for s in ("1", "2")}
    assert sweep(tmp_path / "par", "--parallel", "2") == 0
    par = read_sweep(tmp_path / "par")
    strip = lambda rs: sorted((r["variant"], r["seed"], r["mean_steps_last50"]) for r in rs)
    assert strip(rows) == strip(par)
    for r in rows:
        name = Path(r["run_dir"]).name
        assert (tmp_path / "serial" / name / "stats.csv").read_bytes() == \
            (tmp_path / "par" / name / "stats.csv").read_bytes()


def test_sweep_empty_variants(tmp_path):
    assert main(["sweep", "--variants", "", "--out", str(tmp_path)]) == 2


def test_config_file_overrides_defaults(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\nepisodes = 2\nstep-cap=100\nhidden=4\n")
    out = tmp_path / "r"
    assert main(["--config", str(cfg), "train", "--variant", "locf", "--out", str(out)]) == 0
    with open(out / "stats.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and all(int(r["steps"]) <= 100 for r in rows)
    cfg.write_text("bogus=1\n")
    assert main(["--config", str(cfg), "train", "--variant", "locf"]) == 2


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("COSTLY_OBS_OUT", str(tmp_path / "root"))
    assert main(["train", "--variant", "vanilla", "--seed", "5", *SMALL]) == 0
    assert (tmp_path / "root" / "vanilla_cost0_seed5" / "stats.csv").is_file()
