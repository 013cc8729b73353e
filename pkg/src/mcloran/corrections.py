"""Differential temporal-ASF corrections.

The reference station sits at a surveyed position, so the difference between
its resolved TOA and the geometric+static-ASF prediction is the temporal ASF
(plus noise). Those samples are averaged over a trailing window and issued
on a fixed schedule; the rover subtracts the latest issued value.
"""

from __future__ import annotations

import bisect
import logging
import math
from collections import defaultdict
from typing import NamedTuple

from .geodesy import GeoPoint
from .network import Designator, NetworkDb, predict_toa, resolve_toa
from .simulate import TorMeasurement

log = logging.getLogger(__name__)

SpatialAsfTable = dict  # Designator -> us

_EPS = 1e-9


class CorrectionError(ValueError):
    pass


class TemporalAsfSample(NamedTuple):
    designator: Designator
    epoch_s: float
    temporal_asf_us: float


class CorrectionEpoch(NamedTuple):
    designator: Designator
    issue_time_s: float
    correction_us: float
    n_samples: int


class ToaMeasurement(NamedTuple):
    designator: Designator
    epoch_s: float
    toa_us: float


def _mean(xs: list[float]) -> float:
    # offset by the first sample so a constant series averages to itself exactly
    x0 = xs[0]
    return x0 + math.fsum(x - x0 for x in xs) / len(xs)


def _spatial(table: SpatialAsfTable, d: Designator, what: str) -> float:
    try:
        return table[d]
    except KeyError:
        raise CorrectionError(f"designator {d} missing from {what} spatial ASF table") from None


def _predictions(net: NetworkDb, pos: GeoPoint, designators, spatial: SpatialAsfTable | None, what: str):
    out = {}
    for d in designators:
        s = _spatial(spatial, d, what) if spatial is not None else 0.0
        out[d] = predict_toa(net.rating(d), pos, s, 0.0, 0.0, n_atm=net.n_atm)
    return out


def estimate_temporal_asf(
    ref_stream: list[TorMeasurement],
    ref_truth: GeoPoint,
    ref_spatial_asf: SpatialAsfTable,
    net: NetworkDb,
) -> list[TemporalAsfSample]:
    """Per-sample temporal ASF at the reference station (its clock bias taken as zero)."""
    pred = _predictions(net, ref_truth, {m.designator for m in ref_stream}, ref_spatial_asf, "reference")
    out = []
    for m in ref_stream:
        p = pred[m.designator]
        toa = resolve_toa(m.tor_us, net.rating(m.designator).chain, p)
        out.append(TemporalAsfSample(m.designator, m.epoch_s, toa - p))
    return out


def build_corrections(
    samples: list[TemporalAsfSample],
    window_s: float = 300.0,
    update_s: float = 60.0,
    start_s: float = 0.0,
) -> list[CorrectionEpoch]:
    """Trailing-window averages issued every ``update_s`` seconds.

    Issue times are ``start_s + window_s + k * update_s`` up to the last
    sample epoch. Each correction averages the samples with epoch in the
    closed interval [t - window_s, t]. A designator with no samples in a
    window gets no epoch at that issue time.
    """
    if update_s <= 0 or window_s < update_s:
        raise CorrectionError(f"need 0 < update_s <= window_s, got {update_s}, {window_s}")
    if not samples:
        return []
    series: dict[Designator, tuple[list[float], list[float]]] = defaultdict(lambda: ([], []))
    for s in samples:
        t, v = series[s.designator]
        if t and s.epoch_s < t[-1]:
            raise CorrectionError(f"{s.designator}: samples not time-ordered at {s.epoch_s}")
        t.append(s.epoch_s)
        v.append(s.temporal_asf_us)
    last = max(s.epoch_s for s in samples)

    issue_times = []
    k = 0
    while (t := start_s + window_s + k * update_s) <= last + _EPS:
        issue_times.append(t)
        k += 1

    out = []
    for d in sorted(series):
        times, values = series[d]
        for t in issue_times:
            lo = bisect.bisect_left(times, t - window_s - _EPS)
            hi = bisect.bisect_right(times, t + _EPS)
            if hi > lo:
                out.append(CorrectionEpoch(d, t, _mean(values[lo:hi]), hi - lo))
    return out


def apply_corrections(
    rover_stream: list[TorMeasurement],
    corrections: list[CorrectionEpoch],
    rover_spatial_asf: SpatialAsfTable,
    net: NetworkDb,
    initial_position: GeoPoint,
) -> tuple[list[ToaMeasurement], int]:
    """Resolve rover TORs to TOAs and remove static and temporal ASF.

    Each sample uses the latest correction issued at or before its epoch.
    Samples without one are skipped; the skip count is returned alongside
    the corrected measurements and logged.
    """
    pred = _predictions(net, initial_position, {m.designator for m in rover_stream}, None, "rover")
    for d in pred:
        _spatial(rover_spatial_asf, d, "rover")
    issued: dict[Designator, tuple[list[float], list[float]]] = defaultdict(lambda: ([], []))
    for c in sorted(corrections, key=lambda c: (c.designator, c.issue_time_s)):
        issued[c.designator][0].append(c.issue_time_s)
        issued[c.designator][1].append(c.correction_us)

    out = []
    skipped = 0
    for m in rover_stream:
        times, values = issued.get(m.designator, ((), ()))
        k = bisect.bisect_right(times, m.epoch_s + _EPS) - 1
        if k < 0:
            skipped += 1
            continue
        toa = resolve_toa(m.tor_us, net.rating(m.designator).chain, pred[m.designator])
        out.append(ToaMeasurement(m.designator, m.epoch_s, toa - rover_spatial_asf[m.designator] - values[k]))
    if skipped:
        log.warning("skipped %d rover samples with no applicable correction", skipped)
    return out, skipped


def calibrate_spatial_asf(
    stream: list[TorMeasurement],
    truth: GeoPoint,
    net: NetworkDb,
) -> SpatialAsfTable:
    """Static ASF per designator from data taken at a surveyed point.

    Assumes the calibration data carries no temporal ASF (or that it was
    removed beforehand).
    """
    pred = _predictions(net, truth, net.designators, None, "calibration")
    residuals: dict[Designator, list[float]] = defaultdict(list)
    for m in stream:
        if m.designator not in pred:
            raise CorrectionError(f"designator {m.designator} not in network")
        p = pred[m.designator]
        residuals[m.designator].append(resolve_toa(m.tor_us, net.rating(m.designator).chain, p) - p)
    missing = [str(d) for d in net.designators if d not in residuals]
    if missing:
        raise CorrectionError(f"calibration stream has no samples for {', '.join(missing)}")
    return {d: _mean(residuals[d]) for d in net.designators}
