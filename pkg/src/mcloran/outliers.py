"""Scaled-MAD outlier detection on per-designator TOR series.

A sample is an outlier when it lies more than ``threshold`` scaled MADs from
the series median. With the default threshold of 3 this flags about 0.27%
of normally distributed samples.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .network import Designator
from .simulate import TorMeasurement

# -1 / (sqrt(2) * erfcinv(3/2)); makes the MAD a consistent sigma estimate under normality
MAD_SCALE = 1.4826022185056018

MODES = ("session", "window")


def scaled_mad(xs) -> float:
    """Scaled median absolute deviation about the median."""
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        raise ValueError("scaled_mad of an empty series")
    med = np.median(x)
    return float(MAD_SCALE * np.median(np.abs(x - med)))


def detect_outliers(xs, threshold: float = 3.0) -> np.ndarray:
    """Boolean mask of samples further than ``threshold`` scaled MADs from the median.

    If the scaled MAD is zero (more than half the samples identical) only
    samples that differ from the median are flagged.
    """
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    x = np.asarray(xs, dtype=float)
    if x.size == 0:
        raise ValueError("detect_outliers on an empty series")
    med = np.median(x)
    dev = np.abs(x - med)
    spread = MAD_SCALE * np.median(dev)
    if spread == 0:
        return dev > 0
    return dev > threshold * spread


@dataclass
class DesignatorOutliers:
    n_samples: int
    indices: list[int] = field(default_factory=list)

    @property
    def n_outliers(self) -> int:
        return len(self.indices)


@dataclass
class OutlierReport:
    per_designator: dict[Designator, DesignatorOutliers]

    @property
    def total_samples(self) -> int:
        return sum(v.n_samples for v in self.per_designator.values())

    @property
    def total_outliers(self) -> int:
        return sum(v.n_outliers for v in self.per_designator.values())

    @property
    def mean_outliers(self) -> float:
        if not self.per_designator:
            return 0.0
        return self.total_outliers / len(self.per_designator)

    @property
    def indices(self) -> list[int]:
        return sorted(i for v in self.per_designator.values() for i in v.indices)

    def to_csv(self) -> str:
        lines = ["chain,letter,n_samples,n_outliers"]
        for d, v in self.per_designator.items():
            lines.append(f"{d.gri},{d.letter},{v.n_samples},{v.n_outliers}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "designators": {
                str(d): {"n_samples": v.n_samples, "n_outliers": v.n_outliers, "indices": v.indices}
                for d, v in self.per_designator.items()
            },
            "total_samples": self.total_samples,
            "total_outliers": self.total_outliers,
            "mean_outliers_per_designator": round(self.mean_outliers, 6),
            "outlier_fraction": round(self.total_outliers / self.total_samples, 6) if self.total_samples else 0.0,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def remove_outliers(
    stream: list[TorMeasurement],
    threshold: float = 3.0,
    mode: str = "session",
    window_s: float = 300.0,
) -> tuple[list[TorMeasurement], OutlierReport]:
    """Drop scaled-MAD outliers from each designator's TOR series.

    ``mode="session"`` runs one detection over each designator's full series.
    ``mode="window"`` runs it separately inside consecutive ``window_s``
    blocks ((k-1)W, kW]. Report indices refer to positions in ``stream``.
    Detection is applied once; the cleaned series is not re-screened.
    """
    if mode not in MODES:
        raise ValueError(f"unknown detection mode {mode!r}; expected one of {MODES}")
    groups: dict[Designator, list[int]] = defaultdict(list)
    for i, m in enumerate(stream):
        groups[m.designator].append(i)

    flagged = np.zeros(len(stream), dtype=bool)
    per: dict[Designator, DesignatorOutliers] = {}
    for d in sorted(groups):
        idx = np.asarray(groups[d])
        values = np.array([stream[i].tor_us for i in idx])
        if mode == "session":
            mask = detect_outliers(values, threshold)
        else:
            block = np.array([math.ceil(stream[i].epoch_s / window_s) for i in idx])
            mask = np.zeros(len(idx), dtype=bool)
            for b in np.unique(block):
                sel = block == b
                mask[sel] = detect_outliers(values[sel], threshold)
        flagged[idx[mask]] = True
        per[d] = DesignatorOutliers(len(idx), [int(i) for i in idx[mask]])
    cleaned = [m for m, f in zip(stream, flagged) if not f]
    return cleaned, OutlierReport(per)
