"""Seeded TOR measurement simulator for a reference station and a rover.

Random numbers come from numpy's PCG64 bit generator. Every stochastic
component draws from its own substream keyed by
``SeedSequence(seed, spawn_key=(component, gri, letter))`` so a designator's
realisation does not depend on which other designators are simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .geodesy import GeoPoint, geodesic_distance
from .network import Chain, Designator, NetworkDb, load_network, predict_toa, toa_to_tor, wrap_tor

# reference session coordinates
ROVER_DEFAULT = GeoPoint(37.3907, 126.7789)
REF_DEFAULT = GeoPoint(37.3818, 126.6702)

# placeholder static ASF values, us; identical for both ratings of a dual-rated station
SPATIAL_ASF_ROVER_DEFAULT = {
    "7430M": 1.20, "8390Y": 1.20,
    "7430X": 2.35, "8390M": 2.35,
    "7430Y": 1.05, "8390X": 3.10,
    "9930M": 0.85, "9930W": 0.60, "9930Z": 1.45,
}
SPATIAL_ASF_REF_DEFAULT = {
    "7430M": 1.15, "8390Y": 1.15,
    "7430X": 2.30, "8390M": 2.30,
    "7430Y": 1.10, "8390X": 3.05,
    "9930M": 0.90, "9930W": 0.55, "9930Z": 1.50,
}

_WALK, _SINE, _DECOR, _NOISE, _OUTLIER = 1, 2, 3, 4, 5
_SITE = {"ref": 0, "rover": 1}


class ScenarioError(ValueError):
    pass


class TorMeasurement(NamedTuple):
    designator: Designator
    epoch_s: float
    tor_us: float


@dataclass(frozen=True)
class TemporalAsfProcess:
    """Random walk plus optional sinusoid, shared by both sites.

    ``decorrelation_sigma_us`` adds an independent white term per site.
    """

    initial_us: dict[str, float] = field(default_factory=dict)
    walk_sigma_us: float = 0.004
    sine_amplitude_us: float = 0.0
    sine_period_s: float = 3600.0
    decorrelation_sigma_us: float = 0.0


@dataclass(frozen=True)
class Scenario:
    network: NetworkDb = field(default_factory=load_network)
    rover_truth: GeoPoint = ROVER_DEFAULT
    ref_truth: GeoPoint = REF_DEFAULT
    session_s: float = 2160.0
    sample_interval_s: float = 5.0
    noise_sigma_us: float = 0.02
    temporal_asf: TemporalAsfProcess = field(default_factory=TemporalAsfProcess)
    spatial_asf_rover: dict[str, float] = field(default_factory=lambda: dict(SPATIAL_ASF_ROVER_DEFAULT))
    spatial_asf_ref: dict[str, float] = field(default_factory=lambda: dict(SPATIAL_ASF_REF_DEFAULT))
    outlier_rate: float = 0.017
    # gross error magnitude range in units of noise_sigma_us
    outlier_min_sigma: float = 10.0
    outlier_max_sigma: float = 30.0
    outlier_sites: tuple[str, ...] = ("ref",)
    max_range_km: float = 3000.0
    seed: int = 0

    @property
    def n_epochs(self) -> int:
        return int(round(self.session_s / self.sample_interval_s))

    @property
    def epochs(self) -> np.ndarray:
        return self.sample_interval_s * np.arange(1, self.n_epochs + 1)

    @property
    def outlier_magnitude_us(self) -> tuple[float, float]:
        return self.outlier_min_sigma * self.noise_sigma_us, self.outlier_max_sigma * self.noise_sigma_us

    def spatial_table(self, site: str) -> dict[Designator, float]:
        table = self.spatial_asf_ref if site == "ref" else self.spatial_asf_rover
        return {d: float(table.get(str(d), 0.0)) for d in self.network.designators}

    def validate(self) -> None:
        if self.sample_interval_s <= 0 or self.session_s <= 0:
            raise ScenarioError("session_s and sample_interval_s must be positive")
        ratio = self.session_s / self.sample_interval_s
        if abs(ratio - round(ratio)) > 1e-9:
            raise ScenarioError(f"session_s / sample_interval_s = {ratio} is not an integer")
        if not 0 <= self.outlier_rate <= 1:
            raise ScenarioError(f"outlier_rate {self.outlier_rate} outside [0, 1]")
        if self.noise_sigma_us < 0:
            raise ScenarioError("noise_sigma_us must be non-negative")
        if not 0 <= self.outlier_min_sigma <= self.outlier_max_sigma:
            raise ScenarioError("need 0 <= outlier_min_sigma <= outlier_max_sigma")
        tp = self.temporal_asf
        if tp.walk_sigma_us < 0 or tp.decorrelation_sigma_us < 0 or tp.sine_period_s <= 0:
            raise ScenarioError("invalid temporal ASF process parameters")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError(f"seed {self.seed} is not an unsigned 64-bit integer")
        bad_sites = set(self.outlier_sites) - set(_SITE)
        if bad_sites:
            raise ScenarioError(f"unknown outlier sites {sorted(bad_sites)}")
        known = {str(d) for d in self.network.designators}
        for name, table in (
            ("spatial_asf_rover", self.spatial_asf_rover),
            ("spatial_asf_ref", self.spatial_asf_ref),
            ("temporal_asf.initial_us", tp.initial_us),
        ):
            extra = set(table) - known
            if extra:
                raise ScenarioError(f"{name}: designators not in network: {sorted(extra)}")
        for label, pos in (("rover", self.rover_truth), ("ref", self.ref_truth)):
            for r in self.network.ratings:
                if geodesic_distance(r.position, pos) > self.max_range_km * 1e3:
                    raise ScenarioError(f"{label} is beyond {self.max_range_km} km from {r.station} ({r.designator})")

    def calibration(self) -> Scenario:
        """Companion session for static-ASF calibration: no temporal ASF, no outliers, own seed."""
        return replace(
            self,
            temporal_asf=TemporalAsfProcess(walk_sigma_us=0.0),
            outlier_rate=0.0,
            seed=(self.seed + 0x9E3779B97F4A7C15) % 2**64,
        )


@dataclass
class SessionTruth:
    epochs: np.ndarray
    designators: list[Designator]
    # shape (n_epochs, n_designators)
    ref_temporal_us: np.ndarray
    rover_temporal_us: np.ndarray
    ref_outlier_mask: np.ndarray
    rover_outlier_mask: np.ndarray
    ref_truth: GeoPoint
    rover_truth: GeoPoint


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _dkey(d: Designator) -> tuple[int, int]:
    return d.gri, ord(d.letter)


def temporal_asf_paths(sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """True temporal ASF at (ref, rover), each shaped (n_epochs, n_designators)."""
    tp = sc.temporal_asf
    t = sc.epochs
    n = len(t)
    cols_ref, cols_rov = [], []
    for d in sc.network.designators:
        steps = _rng(sc.seed, _WALK, *_dkey(d)).normal(0.0, tp.walk_sigma_us, n)
        common = tp.initial_us.get(str(d), 0.0) + np.cumsum(steps)
        if tp.sine_amplitude_us:
            phase = _rng(sc.seed, _SINE, *_dkey(d)).uniform(0, 2 * math.pi)
            common = common + tp.sine_amplitude_us * np.sin(2 * math.pi * t / tp.sine_period_s + phase)
        ref, rov = common, common
        if tp.decorrelation_sigma_us:
            ref = common + _rng(sc.seed, _DECOR, _SITE["ref"], *_dkey(d)).normal(0, tp.decorrelation_sigma_us, n)
            rov = common + _rng(sc.seed, _DECOR, _SITE["rover"], *_dkey(d)).normal(0, tp.decorrelation_sigma_us, n)
        cols_ref.append(ref)
        cols_rov.append(rov)
    return np.column_stack(cols_ref), np.column_stack(cols_rov)


def _site_stream(sc: Scenario, site: str, pos: GeoPoint, temporal: np.ndarray) -> list[TorMeasurement]:
    net = sc.network
    spatial = sc.spatial_table(site)
    epochs = sc.epochs
    columns = []
    for j, d in enumerate(net.designators):
        r = net.rating(d)
        base = predict_toa(r, pos, spatial[d], 0.0, 0.0, n_atm=net.n_atm)
        noise = _rng(sc.seed, _NOISE, _SITE[site], *_dkey(d)).normal(0.0, sc.noise_sigma_us, len(epochs))
        toa = base + temporal[:, j] + noise
        columns.append([toa_to_tor(float(v), r.chain) for v in toa])
    return [
        TorMeasurement(d, float(t), columns[j][i])
        for i, t in enumerate(epochs)
        for j, d in enumerate(net.designators)
    ]


def inject_outliers(
    stream: list[TorMeasurement],
    rate: float,
    magnitude_us: tuple[float, float],
    seed: int,
    stream_id: int = 0,
) -> tuple[list[TorMeasurement], np.ndarray]:
    """Corrupt each sample with probability ``rate`` by a gross signed offset.

    Offsets are uniform in ``magnitude_us`` with a random sign and the result
    is re-wrapped into [0, GRI). Returns the new stream and the boolean mask
    of corrupted positions.
    """
    if not 0 <= rate <= 1:
        raise ValueError(f"outlier rate {rate} outside [0, 1]")
    n = len(stream)
    rng = _rng(seed, _OUTLIER, stream_id)
    hit = rng.random(n) < rate
    mag = rng.uniform(magnitude_us[0], magnitude_us[1], n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    out = list(stream)
    for i in np.flatnonzero(hit):
        m = stream[i]
        out[i] = m._replace(tor_us=wrap_tor(m.tor_us + sign[i] * mag[i], Chain(m.designator.gri)))
    return out, hit


def simulate_session(sc: Scenario) -> tuple[list[TorMeasurement], list[TorMeasurement], SessionTruth]:
    """Generate reference and rover TOR streams plus ground truth.

    Streams are epoch-major with designators in network order, so a default
    session gives 432 epochs x 9 designators = 3888 samples per site.
    """
    sc.validate()
    ref_tmp, rov_tmp = temporal_asf_paths(sc)
    ref = _site_stream(sc, "ref", sc.ref_truth, ref_tmp)
    rover = _site_stream(sc, "rover", sc.rover_truth, rov_tmp)
    masks = {}
    streams = {"ref": ref, "rover": rover}
    for site in ("ref", "rover"):
        if site in sc.outlier_sites and sc.outlier_rate > 0:
            streams[site], masks[site] = inject_outliers(
                streams[site], sc.outlier_rate, sc.outlier_magnitude_us, sc.seed, _SITE[site]
            )
        else:
            masks[site] = np.zeros(len(streams[site]), dtype=bool)
    truth = SessionTruth(
        epochs=sc.epochs,
        designators=sc.network.designators,
        ref_temporal_us=ref_tmp,
        rover_temporal_us=rov_tmp,
        ref_outlier_mask=masks["ref"],
        rover_outlier_mask=masks["rover"],
        ref_truth=sc.ref_truth,
        rover_truth=sc.rover_truth,
    )
    return streams["ref"], streams["rover"], truth
