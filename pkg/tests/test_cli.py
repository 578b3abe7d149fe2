import csv
import json

import pytest

from liouville_ext import cli, experiments
from liouville_ext.config import ConfigError, ExperimentConfig, load_config, parse_config
from liouville_ext.experiments import Report


def test_parse_typed_values():
    cfg = parse_config("# comment\ngenus = 3\nh = 0.2\nflow_times = 100, 200\nseeds = 4\ncurves = a1, a1 b1\n")
    assert cfg.genus == 3 and cfg.h == 0.2
    assert cfg.flow_times == (100.0, 200.0) and cfg.seeds == (4,)
    assert cfg.curves == ("a1", "a1 b1")


@pytest.mark.parametrize("text", ["colour = red\n", "genus = two\n", "genus = 2\ngenus = 3\n", "h = 7\n",
                                  "genus\n", "genus = 1\n"])
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_text_round_trip_and_hash(tmp_path):
    cfg = ExperimentConfig(h=0.15, seeds=(3, 4), curves=("a1", "b2 a1"))
    (tmp_path / "c.cfg").write_text(cfg.to_text())
    back = load_config(tmp_path / "c.cfg")
    assert back == cfg
    assert back.config_hash == cfg.config_hash
    assert cfg.replace(out="elsewhere").config_hash == cfg.config_hash
    assert cfg.replace(h=0.2).config_hash != cfg.config_hash


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_singular_example_command(tmp_path):
    code = cli.main(["singular-example", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "singular-example.json").read_text())
    assert set(summary) >= {"experiment", "config_hash", "pass", "metrics"}
    assert summary["pass"] is True
    assert summary["metrics"]["boundary_discrepancy"] is True
    rows = read_csv(tmp_path / "singular-example.csv")
    assert len(rows) == 4
    assert all(r["config_hash"] == summary["config_hash"] and r["tolerance"] for r in rows)
    # sorted by the first column
    eps = [float(r["eps"]) for r in rows]
    assert eps == sorted(eps)


def test_build_surface_and_mesh(tmp_path):
    assert cli.main(["build-surface", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "surface_g2.txt").exists()
    cfg = tmp_path / "m.cfg"
    cfg.write_text("h = 0.3\n")
    assert cli.main(["build-mesh", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "mesh_g2_h0.3.txt").exists()


def test_outputs_are_reproducible(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text("flow_times = 300\nseeds = 0, 1\nn_densities = 2\n")
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        rep = experiments.ergodic_check(load_config(cfg).replace(out=str(out)))
        cli.write_report(rep, load_config(cfg), out)
    assert (a / "ergodic.csv").read_bytes() == (b / "ergodic.csv").read_bytes()
    rows = read_csv(a / "ergodic.csv")
    hyp = [r for r in rows if r["density"] == "hyperbolic"]
    assert all(float(r["gap"]) < 1e-12 for r in hyp)


def test_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setitem(experiments.EXPERIMENTS, "singular-example",
                        lambda cfg: Report("singular-example", [{"x": 1.0}], False))
    assert cli.main(["singular-example", "--out", str(tmp_path)]) == 2

    def boom(cfg):
        raise RuntimeError("solver exploded")

    monkeypatch.setitem(experiments.EXPERIMENTS, "singular-example", boom)
    assert cli.main(["singular-example", "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert cli.main(["build-surface", str(bad)]) == 3


def test_seed_override(tmp_path):
    assert cli.main(["singular-example", "--seed", "7", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "singular-example.json").read_text())
    assert summary["config"]["seeds"] == [7]
    assert summary["config_hash"] == ExperimentConfig(seeds=(7,)).config_hash
