"""Experiment configuration loaded from JSON.

Top-level keys: ``network`` (path or null for the bundled database),
``seed``, ``n_seeds``, ``scenario``, ``processing``, ``removal``. Unknown
keys are rejected so typos do not silently fall back to defaults. Relative
network paths resolve against the config file's directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .geodesy import GeoPoint
from .network import NetworkDb, load_network, network_to_dict
from .outliers import MODES
from .simulate import Scenario, ScenarioError, TemporalAsfProcess
from .solver import SolverOptions


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Processing:
    threshold: float = 3.0
    filter_mode: str = "session"
    filter_window_s: float = 300.0
    window_s: float = 300.0
    update_s: float = 60.0
    # rover a-priori position; None uses the reference station
    initial: GeoPoint | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = field(default_factory=Scenario)
    processing: Processing = field(default_factory=Processing)
    # (arm A, arm B) outlier removal flags; A is the baseline
    removal: tuple[bool, bool] = (False, True)
    n_seeds: int = 1
    network_path: str | None = None

    @property
    def network(self) -> NetworkDb:
        return self.scenario.network

    @property
    def initial(self) -> GeoPoint:
        return self.processing.initial or self.scenario.ref_truth

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, scenario=replace(self.scenario, seed=seed))

    def to_dict(self) -> dict:
        sc = self.scenario
        pr = self.processing
        return {
            "network": network_to_dict(sc.network),
            "seed": sc.seed,
            "n_seeds": self.n_seeds,
            "removal": list(self.removal),
            "scenario": {
                "rover": _pt(sc.rover_truth),
                "ref": _pt(sc.ref_truth),
                "session_s": sc.session_s,
                "sample_interval_s": sc.sample_interval_s,
                "noise_sigma_us": sc.noise_sigma_us,
                "temporal_asf": asdict(sc.temporal_asf),
                "spatial_asf_rover": dict(sorted(sc.spatial_asf_rover.items())),
                "spatial_asf_ref": dict(sorted(sc.spatial_asf_ref.items())),
                "outlier_rate": sc.outlier_rate,
                "outlier_min_sigma": sc.outlier_min_sigma,
                "outlier_max_sigma": sc.outlier_max_sigma,
                "outlier_sites": list(sc.outlier_sites),
                "max_range_km": sc.max_range_km,
            },
            "processing": {
                "threshold": pr.threshold,
                "filter_mode": pr.filter_mode,
                "filter_window_s": pr.filter_window_s,
                "window_s": pr.window_s,
                "update_s": pr.update_s,
                "initial": _pt(pr.initial) if pr.initial else None,
                "solver": asdict(pr.solver),
            },
        }

    def digest(self) -> str:
        """SHA-256 of the resolved configuration (seed excluded)."""
        doc = self.to_dict()
        doc.pop("seed")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _pt(p: GeoPoint) -> dict:
    return {"lat_deg": p.lat_deg, "lon_deg": p.lon_deg}


def _point(doc, where: str) -> GeoPoint:
    try:
        _check_keys(doc, {"lat_deg", "lon_deg"}, where)
        return GeoPoint(doc["lat_deg"], doc["lon_deg"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _check_keys(doc, allowed: set[str], where: str) -> None:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def config_from_dict(doc: dict, base_dir: Path | None = None, network: NetworkDb | None = None) -> ExperimentConfig:
    _check_keys(doc, {"network", "seed", "n_seeds", "scenario", "processing", "removal"}, "config")
    net_path = doc.get("network")
    if network is None:
        if net_path is not None and base_dir is not None:
            net_path = str((base_dir / net_path))
        network = load_network(net_path)

    s = dict(doc.get("scenario", {}))
    sc_keys = {f.name for f in fields(Scenario)} - {"network", "rover_truth", "ref_truth", "temporal_asf", "seed"}
    _check_keys(s, sc_keys | {"rover", "ref", "temporal_asf", "n_atm"}, "scenario")
    if "n_atm" in s:
        network = network.with_n_atm(float(s.pop("n_atm")))
    kw: dict = {"network": network, "seed": int(doc.get("seed", 0))}
    if "rover" in s:
        kw["rover_truth"] = _point(s.pop("rover"), "scenario.rover")
    if "ref" in s:
        kw["ref_truth"] = _point(s.pop("ref"), "scenario.ref")
    if "temporal_asf" in s:
        t = s.pop("temporal_asf")
        _check_keys(t, {f.name for f in fields(TemporalAsfProcess)}, "scenario.temporal_asf")
        kw["temporal_asf"] = TemporalAsfProcess(**t)
    if "outlier_sites" in s:
        s["outlier_sites"] = tuple(s["outlier_sites"])
    kw.update(s)
    try:
        scenario = Scenario(**kw)
        scenario.validate()
    except (TypeError, ScenarioError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc

    p = dict(doc.get("processing", {}))
    _check_keys(p, {f.name for f in fields(Processing)}, "processing")
    if "initial" in p:
        p["initial"] = _point(p["initial"], "processing.initial") if p["initial"] is not None else None
    if "solver" in p:
        _check_keys(p["solver"], {f.name for f in fields(SolverOptions)}, "processing.solver")
        p["solver"] = SolverOptions(**p["solver"])
    processing = Processing(**p)
    if processing.filter_mode not in MODES:
        raise ConfigError(f"processing.filter_mode must be one of {MODES}")
    if processing.threshold <= 0:
        raise ConfigError("processing.threshold must be positive")
    if not 0 < processing.update_s <= processing.window_s:
        raise ConfigError("processing: need 0 < update_s <= window_s")

    removal = doc.get("removal", [False, True])
    if not (isinstance(removal, list) and len(removal) == 2 and all(isinstance(b, bool) for b in removal)):
        raise ConfigError("removal must be a list of two booleans")
    n_seeds = int(doc.get("n_seeds", 1))
    if n_seeds < 1:
        raise ConfigError("n_seeds must be >= 1")
    return ExperimentConfig(scenario, processing, tuple(removal), n_seeds, net_path)


def load_config(path: str | Path | None = None, network_path: str | Path | None = None) -> ExperimentConfig:
    """Read a config file (``None`` gives all defaults); ``network_path`` overrides the file's network."""
    network = load_network(network_path) if network_path is not None else None
    if path is None:
        return config_from_dict({}, network=network)
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(doc, path.parent, network)
