"""Loran chains, transmitting stations and TOA/TOR timing arithmetic.

Times are microseconds throughout. A chain's GRI is its designator times
10 us. The time of reception (TOR) shown by a receiver is the time of
arrival (TOA) reduced modulo the GRI, so recovering a TOA from a TOR needs a
prior prediction good to half a GRI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple

from .geodesy import GeoPoint, geodesic_distance

SPEED_OF_LIGHT_M_S = 299792458.0
# surface refractive index conventionally used for the Loran primary factor
N_ATM_DEFAULT = 1.000338

LETTERS = ("M", "V", "W", "X", "Y", "Z")


class NetworkError(ValueError):
    pass


class Designator(NamedTuple):
    """Transmitter designator, e.g. ``Designator(9930, "M")`` printed as 9930M."""

    gri: int
    letter: str

    def __str__(self) -> str:
        return f"{self.gri}{self.letter}"

    @classmethod
    def parse(cls, text: str) -> Designator:
        text = text.strip()
        if len(text) < 5 or not text[:-1].isdigit() or text[-1] not in LETTERS:
            raise NetworkError(f"bad designator {text!r}")
        return cls(int(text[:-1]), text[-1])


def gri_microseconds(gri_designator: int) -> float:
    """Group repetition interval in microseconds for a chain designator."""
    if isinstance(gri_designator, bool) or int(gri_designator) != gri_designator:
        raise NetworkError(f"GRI designator must be an integer, got {gri_designator!r}")
    if not 4000 <= gri_designator <= 9999:
        raise NetworkError(f"GRI designator {gri_designator} outside [4000, 9999]")
    return float(gri_designator * 10)


@dataclass(frozen=True)
class Chain:
    gri_designator: int

    def __post_init__(self) -> None:
        gri_microseconds(self.gri_designator)

    @property
    def gri_us(self) -> float:
        return gri_microseconds(self.gri_designator)


@dataclass(frozen=True)
class StationRating:
    chain: Chain
    letter: str
    emission_delay_us: float
    station: str
    position: GeoPoint

    def __post_init__(self) -> None:
        if self.letter not in LETTERS:
            raise NetworkError(f"unknown designator letter {self.letter!r}")
        if self.letter == "M" and self.emission_delay_us != 0:
            raise NetworkError(f"master {self.designator} must have zero emission delay")
        if not 0 <= self.emission_delay_us < self.chain.gri_us:
            raise NetworkError(f"{self.designator}: emission delay outside [0, GRI)")

    @property
    def designator(self) -> Designator:
        return Designator(self.chain.gri_designator, self.letter)


@dataclass(frozen=True)
class Station:
    name: str
    position: GeoPoint
    ratings: tuple[StationRating, ...]

    def __post_init__(self) -> None:
        if not self.ratings:
            raise NetworkError(f"station {self.name} has no ratings")
        chains = [r.chain.gri_designator for r in self.ratings]
        if len(set(chains)) != len(chains):
            raise NetworkError(f"station {self.name} rated twice in one chain")


@dataclass(frozen=True)
class NetworkDb:
    chains: tuple[Chain, ...]
    stations: tuple[Station, ...]
    n_atm: float = N_ATM_DEFAULT
    _by_designator: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        known = {c.gri_designator for c in self.chains}
        index: dict[Designator, StationRating] = {}
        for st in self.stations:
            for r in st.ratings:
                if r.chain.gri_designator not in known:
                    raise NetworkError(f"{r.designator}: chain {r.chain.gri_designator} not in network")
                if r.designator in index:
                    raise NetworkError(f"duplicate designator {r.designator}")
                index[r.designator] = r
        if self.n_atm < 1.0:
            raise NetworkError(f"refractive index {self.n_atm} < 1")
        object.__setattr__(self, "_by_designator", dict(sorted(index.items())))

    @property
    def ratings(self) -> list[StationRating]:
        return list(self._by_designator.values())

    @property
    def designators(self) -> list[Designator]:
        return list(self._by_designator)

    @property
    def v_prop_m_per_us(self) -> float:
        return SPEED_OF_LIGHT_M_S / self.n_atm * 1e-6

    def rating(self, designator: Designator | str) -> StationRating:
        if isinstance(designator, str):
            designator = Designator.parse(designator)
        try:
            return self._by_designator[designator]
        except KeyError:
            raise NetworkError(f"designator {designator} not in network") from None

    def chain(self, gri_designator: int) -> Chain:
        for c in self.chains:
            if c.gri_designator == gri_designator:
                return c
        raise NetworkError(f"chain {gri_designator} not in network")

    def with_n_atm(self, n_atm: float) -> NetworkDb:
        return replace(self, n_atm=n_atm)

    def subset(self, designators: Iterable[Designator]) -> NetworkDb:
        """Network restricted to the given designators (stations kept if any rating survives)."""
        keep = set(designators)
        stations = []
        for st in self.stations:
            rs = tuple(r for r in st.ratings if r.designator in keep)
            if rs:
                stations.append(Station(st.name, st.position, rs))
        gris = {d.gri for d in keep}
        return NetworkDb(tuple(c for c in self.chains if c.gri_designator in gris), tuple(stations), self.n_atm)


def predict_toa(
    rating: StationRating,
    rx: GeoPoint,
    spatial_asf_us: float = 0.0,
    temporal_asf_us: float = 0.0,
    clock_bias_us: float = 0.0,
    n_atm: float = N_ATM_DEFAULT,
) -> float:
    """Predicted time of arrival at ``rx`` relative to the chain's master epoch."""
    v = SPEED_OF_LIGHT_M_S / n_atm * 1e-6
    d = geodesic_distance(rating.position, rx)
    return rating.emission_delay_us + d / v + spatial_asf_us + temporal_asf_us + clock_bias_us


def toa_to_tor(toa_us: float, chain: Chain) -> float:
    """Reduce a TOA modulo the chain GRI; exact in floating point."""
    if not math.isfinite(toa_us):
        raise ValueError(f"non-finite TOA {toa_us}")
    if toa_us < 0:
        raise ValueError(f"negative TOA {toa_us}")
    return math.fmod(toa_us, chain.gri_us)


def resolve_toa(tor_us: float, chain: Chain, predicted_toa_us: float) -> float:
    """Pick the TOA congruent to ``tor_us`` closest to a prediction."""
    gri = chain.gri_us
    if not 0 <= tor_us < gri:
        raise ValueError(f"TOR {tor_us} outside [0, {gri})")
    if predicted_toa_us < 0:
        raise ValueError(f"negative predicted TOA {predicted_toa_us}")
    k = max(0, round((predicted_toa_us - tor_us) / gri))
    return tor_us + k * gri


def wrap_tor(value_us: float, chain: Chain) -> float:
    """Wrap any real value into [0, GRI)."""
    gri = chain.gri_us
    r = math.fmod(value_us, gri)
    if r < 0:
        r += gri
        if r >= gri:  # -tiny + gri rounds up to gri
            r = 0.0
    return r


def network_from_dict(doc: dict) -> NetworkDb:
    try:
        chains = {int(g): Chain(int(g)) for g in doc["chains"]}
        stations = []
        for s in doc["stations"]:
            pos = GeoPoint(s["lat_deg"], s["lon_deg"])
            ratings = []
            for r in s["ratings"]:
                gri = int(r["chain"])
                if gri not in chains:
                    raise NetworkError(f"station {s['name']}: chain {gri} not declared")
                ratings.append(
                    StationRating(chains[gri], r["letter"], float(r.get("emission_delay_us", 0.0)), s["name"], pos)
                )
            stations.append(Station(s["name"], pos, tuple(ratings)))
        return NetworkDb(tuple(chains.values()), tuple(stations), float(doc.get("n_atm", N_ATM_DEFAULT)))
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed network document: {exc!r}") from exc


def network_to_dict(net: NetworkDb) -> dict:
    return {
        "n_atm": net.n_atm,
        "chains": [c.gri_designator for c in net.chains],
        "stations": [
            {
                "name": st.name,
                "lat_deg": st.position.lat_deg,
                "lon_deg": st.position.lon_deg,
                "ratings": [
                    {"chain": r.chain.gri_designator, "letter": r.letter, "emission_delay_us": r.emission_delay_us}
                    for r in st.ratings
                ],
            }
            for st in net.stations
        ],
    }


def load_network(path: str | Path | None = None) -> NetworkDb:
    """Load a station database; ``None`` loads the bundled Northeast Asia network."""
    if path is None:
        text = resources.files("mcloran.data").joinpath("network_default.json").read_text()
    else:
        text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"{path}: {exc}") from exc
    return network_from_dict(doc)
