"""CSV readers and writers for every pipeline stage.

Microsecond values carry 6 fractional digits, degrees 9, seconds 3. Readers
check the header and report the offending row number on any bad value.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Callable, Iterable

from .corrections import CorrectionEpoch, SpatialAsfTable, ToaMeasurement
from .geodesy import GeoPoint
from .network import Designator, NetworkError
from .simulate import TorMeasurement
from .solver import Fix

TOR_HEADER = ["epoch_s", "chain", "letter", "tor_us"]
TOA_HEADER = ["epoch_s", "chain", "letter", "toa_us"]
CORRECTION_HEADER = ["issue_time_s", "chain", "letter", "correction_us", "n_samples"]
SPATIAL_HEADER = ["chain", "letter", "spatial_asf_us"]
FIX_HEADER = ["epoch_s", "lat_deg", "lon_deg", "clock_bias_us", "converged", "residual_rms_us", "n_obs"]


class SchemaError(ValueError):
    pass


def _write(path: Path, header: list[str], rows: Iterable[str]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(r + "\n")


def _read(path: str | Path, header: list[str], parse: Callable[[dict], object]) -> list:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != header:
            raise SchemaError(f"{path}: header {reader.fieldnames} != expected {header}")
        out = []
        for row_no, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise SchemaError(f"{path}:{row_no}: wrong number of fields")
            try:
                out.append(parse(row))
            except (ValueError, NetworkError) as exc:
                raise SchemaError(f"{path}:{row_no}: {exc}") from exc
    return out


def _finite(text: str, name: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"{name} is not finite")
    return v


def _designator(row: dict) -> Designator:
    return Designator.parse(f"{int(row['chain'])}{row['letter']}")


def write_tor_csv(path: Path, stream: Iterable[TorMeasurement]) -> None:
    _write(path, TOR_HEADER, (f"{m.epoch_s:.3f},{m.designator.gri},{m.designator.letter},{m.tor_us:.6f}" for m in stream))


def read_tor_csv(path: str | Path) -> list[TorMeasurement]:
    def parse(row):
        d = _designator(row)
        tor = _finite(row["tor_us"], "tor_us")
        if not 0 <= tor < d.gri * 10:
            raise ValueError(f"tor_us {tor} outside [0, GRI) for {d}")
        return TorMeasurement(d, _finite(row["epoch_s"], "epoch_s"), tor)

    return _read(path, TOR_HEADER, parse)


def write_toa_csv(path: Path, toas: Iterable[ToaMeasurement]) -> None:
    _write(path, TOA_HEADER, (f"{m.epoch_s:.3f},{m.designator.gri},{m.designator.letter},{m.toa_us:.6f}" for m in toas))


def read_toa_csv(path: str | Path) -> list[ToaMeasurement]:
    return _read(
        path,
        TOA_HEADER,
        lambda r: ToaMeasurement(_designator(r), _finite(r["epoch_s"], "epoch_s"), _finite(r["toa_us"], "toa_us")),
    )


def write_corrections_csv(path: Path, corrections: Iterable[CorrectionEpoch]) -> None:
    _write(
        path,
        CORRECTION_HEADER,
        (
            f"{c.issue_time_s:.3f},{c.designator.gri},{c.designator.letter},{c.correction_us:.6f},{c.n_samples}"
            for c in corrections
        ),
    )


def read_corrections_csv(path: str | Path) -> list[CorrectionEpoch]:
    def parse(r):
        n = int(r["n_samples"])
        if n < 1:
            raise ValueError("n_samples must be >= 1")
        return CorrectionEpoch(_designator(r), _finite(r["issue_time_s"], "issue_time_s"), _finite(r["correction_us"], "correction_us"), n)

    return _read(path, CORRECTION_HEADER, parse)


def write_spatial_csv(path: Path, table: SpatialAsfTable) -> None:
    _write(path, SPATIAL_HEADER, (f"{d.gri},{d.letter},{v:.6f}" for d, v in sorted(table.items())))


def read_spatial_csv(path: str | Path) -> SpatialAsfTable:
    rows = _read(path, SPATIAL_HEADER, lambda r: (_designator(r), _finite(r["spatial_asf_us"], "spatial_asf_us")))
    table = {}
    for d, v in rows:
        if d in table:
            raise SchemaError(f"{path}: duplicate entry for {d}")
        table[d] = v
    return table


def write_fixes_csv(path: Path, fixes: Iterable[Fix]) -> None:
    def fmt(f: Fix) -> str:
        if f.position is None:
            return f"{f.epoch_s:.3f},,,,0,,{f.n_obs}"
        return (
            f"{f.epoch_s:.3f},{f.position.lat_deg:.9f},{f.position.lon_deg:.9f},{f.clock_bias_us:.6f},"
            f"{int(f.converged)},{f.residual_rms_us:.6f},{f.n_obs}"
        )

    _write(path, FIX_HEADER, (fmt(f) for f in fixes))


def read_fixes_csv(path: str | Path) -> list[Fix]:
    def parse(r):
        conv = r["converged"]
        if conv not in ("0", "1"):
            raise ValueError(f"converged must be 0 or 1, got {conv!r}")
        n_obs = int(r["n_obs"])
        epoch = _finite(r["epoch_s"], "epoch_s")
        if r["lat_deg"] == "":
            return Fix(epoch, None, math.nan, 0, math.nan, False, n_obs, "no solution")
        pos = GeoPoint(_finite(r["lat_deg"], "lat_deg"), _finite(r["lon_deg"], "lon_deg"))
        return Fix(epoch, pos, float(r["clock_bias_us"]), 0, float(r["residual_rms_us"]), conv == "1", n_obs)

    return _read(path, FIX_HEADER, parse)
