"""File-based pipeline stages and the seeded A/B experiment.

Each stage reads the files written by the previous one, so running the
stages by hand reproduces an experiment run byte for byte.
"""

from __future__ import annotations

import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .accuracy import REFERENCE_NOTE, AccuracyReport, build_report, compare_runs, reference_delta
from .config import ExperimentConfig
from .corrections import apply_corrections, build_corrections, calibrate_spatial_asf, estimate_temporal_asf
from .io import (
    read_corrections_csv,
    read_fixes_csv,
    read_spatial_csv,
    read_toa_csv,
    read_tor_csv,
    write_corrections_csv,
    write_fixes_csv,
    write_spatial_csv,
    write_toa_csv,
    write_tor_csv,
)
from .outliers import remove_outliers
from .simulate import SessionTruth, simulate_session
from .solver import group_epochs, solve_session

log = logging.getLogger(__name__)

ARMS = ("baseline", "treatment")


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _truth_csv(truth: SessionTruth) -> str:
    lines = ["epoch_s,chain,letter,ref_temporal_asf_us,rover_temporal_asf_us,ref_outlier,rover_outlier"]
    n_d = len(truth.designators)
    for i, t in enumerate(truth.epochs):
        for j, d in enumerate(truth.designators):
            k = i * n_d + j
            lines.append(
                f"{t:.3f},{d.gri},{d.letter},{truth.ref_temporal_us[i, j]:.6f},{truth.rover_temporal_us[i, j]:.6f},"
                f"{int(truth.ref_outlier_mask[k])},{int(truth.rover_outlier_mask[k])}"
            )
    return "\n".join(lines) + "\n"


def manifest(cfg: ExperimentConfig, seeds: list[int]) -> dict:
    return {"package": "mcloran", "version": __version__, "config_sha256": cfg.digest(), "seeds": seeds}


def stage_simulate(cfg: ExperimentConfig, out: Path) -> dict:
    """Write reference/rover TOR streams, calibration streams and truth files."""
    sc = cfg.scenario
    ref, rover, truth = simulate_session(sc)
    cal_ref, cal_rover, _ = simulate_session(sc.calibration())
    out.mkdir(parents=True, exist_ok=True)
    write_tor_csv(out / "ref_tor.csv", ref)
    write_tor_csv(out / "rover_tor.csv", rover)
    write_tor_csv(out / "calib_ref_tor.csv", cal_ref)
    write_tor_csv(out / "calib_rover_tor.csv", cal_rover)
    (out / "truth.csv").write_text(_truth_csv(truth))
    info = {
        "seed": sc.seed,
        "n_epochs": sc.n_epochs,
        "n_designators": len(truth.designators),
        "rover": {"lat_deg": sc.rover_truth.lat_deg, "lon_deg": sc.rover_truth.lon_deg},
        "ref": {"lat_deg": sc.ref_truth.lat_deg, "lon_deg": sc.ref_truth.lon_deg},
        "spatial_asf_rover_us": {str(d): v for d, v in sc.spatial_table("rover").items()},
        "spatial_asf_ref_us": {str(d): v for d, v in sc.spatial_table("ref").items()},
        "injected_outliers": {"ref": int(truth.ref_outlier_mask.sum()), "rover": int(truth.rover_outlier_mask.sum())},
    }
    write_json(out / "truth.json", info)
    write_json(out / "manifest.json", manifest(cfg, [sc.seed]))
    return info


def stage_filter(cfg: ExperimentConfig, tor_csv: Path, out: Path) -> dict:
    """Remove scaled-MAD outliers from a TOR file; writes the cleaned stream and a per-designator report."""
    pr = cfg.processing
    stream = read_tor_csv(tor_csv)
    cleaned, report = remove_outliers(stream, pr.threshold, pr.filter_mode, pr.filter_window_s)
    out.mkdir(parents=True, exist_ok=True)
    write_tor_csv(out / "tor_clean.csv", cleaned)
    (out / "outliers.csv").write_text(report.to_csv())
    (out / "outliers.json").write_text(report.to_json())
    return report.to_dict()


def stage_correct(
    cfg: ExperimentConfig,
    ref_csv: Path,
    rover_csv: Path,
    out: Path,
    calib_ref_csv: Path | None = None,
    calib_rover_csv: Path | None = None,
    spatial_ref_csv: Path | None = None,
    spatial_rover_csv: Path | None = None,
) -> dict:
    """Build temporal corrections at the reference station and apply them to the rover.

    Static ASF tables come from the given CSVs, or are calibrated from the
    calibration streams and written next to the outputs.
    """
    net = cfg.network
    sc = cfg.scenario
    pr = cfg.processing
    ref = read_tor_csv(ref_csv)
    rover = read_tor_csv(rover_csv)
    out.mkdir(parents=True, exist_ok=True)
    tables = {}
    for site, table_csv, calib_csv, pos in (
        ("ref", spatial_ref_csv, calib_ref_csv, sc.ref_truth),
        ("rover", spatial_rover_csv, calib_rover_csv, sc.rover_truth),
    ):
        if table_csv is not None:
            tables[site] = read_spatial_csv(table_csv)
        elif calib_csv is not None:
            write_spatial_csv(out / f"spatial_asf_{site}.csv", calibrate_spatial_asf(read_tor_csv(calib_csv), pos, net))
            # round-trip through the file so standalone runs see identical values
            tables[site] = read_spatial_csv(out / f"spatial_asf_{site}.csv")
        else:
            raise ValueError(f"need a spatial ASF table or a calibration stream for the {site} site")

    samples = estimate_temporal_asf(ref, sc.ref_truth, tables["ref"], net)
    write_corrections_csv(out / "corrections.csv", build_corrections(samples, pr.window_s, pr.update_s))
    corrections = read_corrections_csv(out / "corrections.csv")
    toas, skipped = apply_corrections(rover, corrections, tables["rover"], net, cfg.initial)
    write_toa_csv(out / "rover_toa.csv", toas)
    info = {"n_corrections": len(corrections), "n_corrected": len(toas), "n_skipped": skipped}
    write_json(out / "correct.json", info)
    return info


def stage_solve(cfg: ExperimentConfig, toa_csv: Path, out: Path) -> dict:
    toas = read_toa_csv(toa_csv)
    fixes = solve_session(group_epochs(toas), cfg.network, cfg.initial, cfg.processing.solver)
    out.mkdir(parents=True, exist_ok=True)
    write_fixes_csv(out / "fixes.csv", fixes)
    failed = [{"epoch_s": f.epoch_s, "error": f.error} for f in fixes if f.error]
    info = {"n_epochs": len(fixes), "n_converged": sum(f.converged for f in fixes), "failed": failed}
    write_json(out / "solve.json", info)
    return info


def stage_evaluate(cfg: ExperimentConfig, fixes_csv: Path, out: Path) -> dict:
    report = build_report(read_fixes_csv(fixes_csv), cfg.scenario.rover_truth)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "cdf.csv").write_text(report.cdf_csv())
    return report.to_dict()


def _detection_scores(outlier_json: Path, truth_csv: Path) -> dict:
    doc = json.loads(outlier_json.read_text())
    flagged = {i for v in doc["designators"].values() for i in v["indices"]}
    lines = truth_csv.read_text().splitlines()[1:]
    injected = {k for k, line in enumerate(lines) if line.split(",")[5] == "1"}
    n = len(lines)
    tp = len(flagged & injected)
    fp = len(flagged - injected)
    return {
        "n_injected": len(injected),
        "n_flagged": len(flagged),
        "recall": round(tp / len(injected), 6) if injected else None,
        "false_positive_rate": round(fp / (n - len(injected)), 6) if n > len(injected) else None,
    }


def run_arm(cfg: ExperimentConfig, data: Path, out: Path, removal: bool) -> dict:
    ref_csv = data / "ref_tor.csv"
    if removal:
        stage_filter(cfg, ref_csv, out)
        ref_csv = out / "tor_clean.csv"
    stage_correct(
        cfg, ref_csv, data / "rover_tor.csv", out,
        calib_ref_csv=data / "calib_ref_tor.csv", calib_rover_csv=data / "calib_rover_tor.csv",
    )
    stage_solve(cfg, out / "rover_toa.csv", out)
    return stage_evaluate(cfg, out / "fixes.csv", out)


def run_seed(cfg: ExperimentConfig, seed: int, out: Path) -> dict:
    """Simulate one seed and evaluate both arms; failures are recorded, not raised."""
    cfg = cfg.with_seed(seed)
    root = out / f"seed_{seed}"
    row: dict = {"seed": seed, "status": "ok"}
    try:
        stage_simulate(cfg, root / "data")
        reports = {}
        for arm, removal in zip(ARMS, cfg.removal):
            reports[arm] = run_arm(cfg, root / "data", root / arm, removal)
            write_json(root / arm / "arm.json", {"arm": arm, "removal": removal})
            if removal:
                row[f"{arm}_detection"] = _detection_scores(root / arm / "outliers.json", root / "data" / "truth.csv")
        base, treat = (AccuracyReport.from_dict(reports[a]) for a in ARMS)
        delta = compare_runs(base, treat)
        write_json(root / "delta.json", {"baseline_minus_treatment": delta.to_dict()})
        row.update({arm: reports[arm] for arm in ARMS})
        row["delta"] = delta.to_dict()
    except Exception as exc:  # one bad seed must not sink the batch
        log.error("seed %d failed: %s", seed, exc)
        row["status"] = f"failed: {type(exc).__name__}: {exc}"
    return row


def _median(rows: list[dict], *path: str) -> float | None:
    vals = []
    for r in rows:
        v = r
        for p in path:
            v = v.get(p) if isinstance(v, dict) else None
        if v is not None:
            vals.append(v)
    return round(statistics.median(vals), 6) if vals else None


def run_experiment(cfg: ExperimentConfig, seeds: list[int], out: Path, jobs: int = 1) -> dict:
    """Run the A/B experiment over ``seeds`` and write per-seed trees plus a summary."""
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.to_dict())
    write_json(out / "manifest.json", manifest(cfg, seeds))
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_seed, [cfg] * len(seeds), seeds, [out] * len(seeds)))
    else:
        rows = [run_seed(cfg, s, out) for s in seeds]

    ok = [r for r in rows if r["status"] == "ok"]
    summary = {
        "arms": {arm: {"removal": flag} for arm, flag in zip(ARMS, cfg.removal)},
        "n_seeds": len(seeds),
        "n_ok": len(ok),
        "median": {
            arm: {k: _median(ok, arm, k) for k in ("p95_m", "p99_m", "max_m")} for arm in ARMS
        }
        | {"delta": {k: _median(ok, "delta", k) for k in ("p95_m", "p99_m", "max_m")}},
        "outliers_per_designator": _outlier_table(out, ok),
        "reference": {"baseline_minus_treatment": reference_delta().to_dict(), "note": REFERENCE_NOTE},
        "seeds": rows,
    }
    write_json(out / "summary.json", summary)
    (out / "summary.csv").write_text(_summary_csv(rows))
    return summary


def _outlier_table(out: Path, ok: list[dict]) -> dict:
    """Mean removed-outlier count per designator over seeds (first arm with removal)."""
    counts: dict[str, list[int]] = {}
    for r in ok:
        for arm in ARMS:
            f = out / f"seed_{r['seed']}" / arm / "outliers.json"
            if f.exists():
                for d, v in json.loads(f.read_text())["designators"].items():
                    counts.setdefault(d, []).append(v["n_outliers"])
                break
    return {d: round(float(np.mean(v)), 6) for d, v in counts.items()}


def _summary_csv(rows: list[dict]) -> str:
    keys = ("p95_m", "p99_m", "max_m")
    head = ["seed", "status"] + [f"{a}_{k}" for a in (*ARMS, "delta") for k in keys]
    lines = [",".join(head)]
    for r in rows:
        cells = [str(r["seed"]), "ok" if r["status"] == "ok" else "failed"]
        for a in (*ARMS, "delta"):
            cells += [f"{r[a][k]:.6f}" if a in r else "" for k in keys]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
