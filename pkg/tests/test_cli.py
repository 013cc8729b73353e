import filecmp
import json
import subprocess
import sys

import pytest

from mcloran.cli import main
from mcloran.config import ConfigError, load_config
from mcloran.io import SchemaError, read_fixes_csv, read_tor_csv


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--out", str(out), "--seed", "5"]) == 0
    return out


def test_simulate_outputs(sim_dir):
    for name in ("ref_tor.csv", "rover_tor.csv"):
        lines = (sim_dir / name).read_text().splitlines()
        assert lines[0] == "epoch_s,chain,letter,tor_us"
        assert len(lines) == 3889
        assert lines[1].split(",")[3].split(".")[1].__len__() == 6
    for name in ("calib_ref_tor.csv", "calib_rover_tor.csv", "truth.csv", "truth.json", "manifest.json"):
        assert (sim_dir / name).exists()
    truth = json.loads((sim_dir / "truth.json").read_text())
    assert truth["n_epochs"] == 432 and truth["seed"] == 5
    assert len((sim_dir / "truth.csv").read_text().splitlines()) == 3889


def test_simulate_deterministic(tmp_path, sim_dir):
    assert main(["simulate", "--out", str(tmp_path), "--seed", "5"]) == 0
    assert tree_bytes(tmp_path) == tree_bytes(sim_dir)


def test_bad_config_path(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) != 0
    assert not out.exists()
    assert "cannot read" in capsys.readouterr().err


def test_config_unknown_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"scenario": {"noise_sigma": 0.1}}))
    with pytest.raises(ConfigError, match="noise_sigma"):
        load_config(p)


def test_config_values_and_network(tmp_path):
    from mcloran.network import load_network, network_to_dict

    doc = network_to_dict(load_network())
    doc["n_atm"] = 1.0003
    (tmp_path / "net.json").write_text(json.dumps(doc))
    p = tmp_path / "c.json"
    p.write_text(json.dumps({
        "network": "net.json",
        "seed": 9,
        "scenario": {"noise_sigma_us": 0.03, "temporal_asf": {"walk_sigma_us": 0.0}},
        "processing": {"threshold": 3.5, "solver": {"max_iter": 10}},
    }))
    cfg = load_config(p)
    assert cfg.scenario.seed == 9 and cfg.scenario.noise_sigma_us == 0.03
    assert cfg.network.n_atm == 1.0003
    assert cfg.processing.threshold == 3.5 and cfg.processing.solver.max_iter == 10
    assert cfg.initial == cfg.scenario.ref_truth
    assert cfg.digest() == load_config(p).digest()


def test_filter_stage(sim_dir, tmp_path):
    assert main(["filter", "--input", str(sim_dir / "ref_tor.csv"), "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "outliers.csv").read_text().splitlines()
    assert rows[0] == "chain,letter,n_samples,n_outliers" and len(rows) == 10
    rep = json.loads((tmp_path / "outliers.json").read_text())
    assert len(read_tor_csv(tmp_path / "tor_clean.csv")) == 3888 - rep["total_outliers"]


def test_correct_missing_designator(sim_dir, tmp_path, capsys):
    assert main(["correct", "--ref", str(sim_dir / "ref_tor.csv"), "--rover", str(sim_dir / "rover_tor.csv"),
                 "--calib-ref", str(sim_dir / "calib_ref_tor.csv"), "--calib-rover", str(sim_dir / "calib_rover_tor.csv"),
                 "--out", str(tmp_path / "c")]) == 0
    table = (tmp_path / "c" / "spatial_asf_ref.csv").read_text().splitlines()
    (tmp_path / "partial.csv").write_text("\n".join(l for l in table if not l.startswith("8390,X")) + "\n")
    rc = main(["correct", "--ref", str(sim_dir / "ref_tor.csv"), "--rover", str(sim_dir / "rover_tor.csv"),
               "--spatial-ref", str(tmp_path / "partial.csv"), "--spatial-rover", str(tmp_path / "c" / "spatial_asf_rover.csv"),
               "--out", str(tmp_path / "d")])
    assert rc != 0
    assert "8390X" in capsys.readouterr().err


def test_schema_errors_are_row_numbered(tmp_path, sim_dir):
    lines = (sim_dir / "ref_tor.csv").read_text().splitlines()
    lines[4] = "20.000,9930,Q,123.0"
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match=r"bad.csv:5:"):
        read_tor_csv(bad)
    lines[4] = "20.000,9930,M,99300.5"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match=r":5: tor_us"):
        read_tor_csv(bad)
    bad.write_text("epoch,chain\n1,2\n")
    with pytest.raises(SchemaError, match="header"):
        read_tor_csv(bad)
    assert main(["filter", "--input", str(bad), "--out", str(tmp_path / "x")]) != 0


def test_solve_zero_noise_pipeline(tmp_path):
    cfg = tmp_path / "quiet.json"
    cfg.write_text(json.dumps({"scenario": {"noise_sigma_us": 0.0, "outlier_rate": 0.0, "temporal_asf": {"walk_sigma_us": 0.0}}}))
    c = ["--config", str(cfg)]
    assert main(["simulate", *c, "--out", str(tmp_path / "s")]) == 0
    s = tmp_path / "s"
    assert main(["correct", *c, "--ref", str(s / "ref_tor.csv"), "--rover", str(s / "rover_tor.csv"),
                 "--calib-ref", str(s / "calib_ref_tor.csv"), "--calib-rover", str(s / "calib_rover_tor.csv"),
                 "--out", str(tmp_path / "c")]) == 0
    assert main(["solve", *c, "--input", str(tmp_path / "c" / "rover_toa.csv"), "--out", str(tmp_path / "f")]) == 0
    fixes = read_fixes_csv(tmp_path / "f" / "fixes.csv")
    assert len(fixes) == 432 - 59
    assert all(f.converged for f in fixes)
    assert main(["evaluate", *c, "--input", str(tmp_path / "f" / "fixes.csv"), "--out", str(tmp_path / "e")]) == 0
    report = json.loads((tmp_path / "e" / "report.json").read_text())
    # file quantisation (1e-6 us) is the only error left
    assert report["max_m"] < 0.01


def test_experiment_equals_stage_sequence(tmp_path):
    assert main(["experiment", "--seed", "3", "--out", str(tmp_path / "exp")]) == 0
    s, w = tmp_path / "s", tmp_path / "w"
    assert main(["simulate", "--seed", "3", "--out", str(s)]) == 0
    assert main(["filter", "--input", str(s / "ref_tor.csv"), "--out", str(w)]) == 0
    assert main(["correct", "--ref", str(w / "tor_clean.csv"), "--rover", str(s / "rover_tor.csv"),
                 "--calib-ref", str(s / "calib_ref_tor.csv"), "--calib-rover", str(s / "calib_rover_tor.csv"),
                 "--out", str(w)]) == 0
    assert main(["solve", "--input", str(w / "rover_toa.csv"), "--out", str(w)]) == 0
    assert main(["evaluate", "--input", str(w / "fixes.csv"), "--out", str(w)]) == 0
    arm = tmp_path / "exp" / "seed_3" / "treatment"
    for name in ("report.json", "cdf.csv", "fixes.csv", "corrections.csv", "outliers.json"):
        assert filecmp.cmp(arm / name, w / name, shallow=False), name
    assert tree_bytes(tmp_path / "exp" / "seed_3" / "data") == tree_bytes(s)


def test_experiment_without_removal_has_zero_delta(tmp_path):
    assert main(["experiment", "--seed", "1", "--no-removal", "--out", str(tmp_path)]) == 0
    seed = tmp_path / "seed_1"
    assert (seed / "baseline" / "report.json").read_bytes() == (seed / "treatment" / "report.json").read_bytes()
    delta = json.loads((seed / "delta.json").read_text())["baseline_minus_treatment"]
    assert delta == {"p95_m": 0.0, "p99_m": 0.0, "max_m": 0.0}


def test_experiment_summary_layout(tmp_path):
    assert main(["experiment", "--seed", "0", "--seeds", "2", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["n_ok"] == 2
    assert set(summary["median"]) == {"baseline", "treatment", "delta"}
    assert len(summary["outliers_per_designator"]) == 9
    assert summary["reference"]["baseline_minus_treatment"] == {"p95_m": 0.19, "p99_m": 0.79, "max_m": 1.92}
    assert "1.88" in summary["reference"]["note"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == [0, 1] and len(manifest["config_sha256"]) == 64
    assert len((tmp_path / "summary.csv").read_text().splitlines()) == 3


def test_failed_seed_is_recorded(tmp_path):
    cfg = tmp_path / "c.json"
    # an iteration cap of 0 leaves every fix unconverged, so evaluation fails
    cfg.write_text(json.dumps({"processing": {"solver": {"max_iter": 0}}}))
    assert main(["experiment", "--config", str(cfg), "--seeds", "2", "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["n_ok"] == 0
    assert all(r["status"].startswith("failed") for r in summary["seeds"])


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "mcloran", "simulate", "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert json.loads(r.stdout)["n_epochs"] == 432
