import pytest

from mcloran.geodesy import GeoPoint
from mcloran.network import Chain, NetworkDb, Station, StationRating, load_network


@pytest.fixture(scope="session")
def net():
    return load_network()


@pytest.fixture(scope="session")
def rover():
    return GeoPoint(37.3907, 126.7789)


@pytest.fixture(scope="session")
def ref():
    return GeoPoint(37.3818, 126.6702)


@pytest.fixture(scope="session")
def synthetic_net():
    """Four single-rated stations around a point at (36, 127), one chain."""
    chain = Chain(9930)
    sites = [("N", 38.5, 127.0, "M", 0.0), ("E", 36.0, 130.0, "W", 13000.0),
             ("S", 33.5, 126.5, "X", 27000.0), ("W", 36.5, 123.5, "Y", 41000.0)]
    stations = []
    for name, lat, lon, letter, ed in sites:
        p = GeoPoint(lat, lon)
        stations.append(Station(name, p, (StationRating(chain, letter, ed, name, p),)))
    return NetworkDb((chain,), tuple(stations))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
