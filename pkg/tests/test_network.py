import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcloran.geodesy import GeoPoint, geodesic_distance
from mcloran.network import (
    Chain,
    Designator,
    NetworkError,
    StationRating,
    gri_microseconds,
    load_network,
    network_to_dict,
    predict_toa,
    resolve_toa,
    toa_to_tor,
    wrap_tor,
)

C = 299792458.0
CHAINS = [Chain(7430), Chain(8390), Chain(9930)]


@pytest.mark.parametrize("designator,us", [(9930, 99300.0), (7430, 74300.0), (8390, 83900.0)])
def test_gri_microseconds(designator, us):
    assert gri_microseconds(designator) == us
    assert Chain(designator).gri_us == us


@pytest.mark.parametrize("bad", [3999, 10000, 0, -7430])
def test_gri_out_of_range(bad):
    with pytest.raises(NetworkError):
        gri_microseconds(bad)


def test_default_network_shape(net):
    assert len(net.chains) == 3
    assert len(net.stations) == 7
    assert len(net.designators) == 9
    assert [str(d) for d in net.designators] == [
        "7430M", "7430X", "7430Y", "8390M", "8390X", "8390Y", "9930M", "9930W", "9930Z",
    ]
    dual = {st.name: [str(r.designator) for r in st.ratings] for st in net.stations if len(st.ratings) == 2}
    assert dual == {"Rongcheng": ["7430M", "8390Y"], "Xuancheng": ["7430X", "8390M"]}
    for r in net.ratings:
        if r.letter == "M":
            assert r.emission_delay_us == 0


def test_network_round_trip(tmp_path, net):
    p = tmp_path / "net.json"
    p.write_text(json.dumps(network_to_dict(net)))
    again = load_network(p)
    assert again.designators == net.designators
    assert again.n_atm == net.n_atm


def test_network_rejects_duplicate_designator(net):
    doc = network_to_dict(net)
    doc["stations"][2]["ratings"][0]["letter"] = "X"  # Helong 7430Y -> 7430X clashes with Xuancheng
    from mcloran.network import network_from_dict

    with pytest.raises(NetworkError, match="duplicate"):
        network_from_dict(doc)


def test_master_needs_zero_delay():
    p = GeoPoint(36, 129)
    with pytest.raises(NetworkError):
        StationRating(Chain(9930), "M", 5.0, "x", p)


def test_designator_parse():
    assert Designator.parse("9930W") == Designator(9930, "W")
    assert str(Designator(7430, "M")) == "7430M"
    with pytest.raises(NetworkError):
        Designator.parse("99Q")


def _rating(distance_m=0.0, delay=0.0):
    p = GeoPoint(0.0, 0.0)
    return StationRating(Chain(9930), "W" if delay else "M", delay, "s", p)


def test_predict_toa_trivial():
    r = _rating()
    assert predict_toa(r, r.position) == 0.0


def test_predict_toa_speed_of_light():
    r = _rating()
    # find a point 299.792458 km away along the equator
    lon = 299792.458 / 111319.49079327357
    rx = GeoPoint(0.0, lon)
    d = geodesic_distance(r.position, rx)
    assert predict_toa(r, rx, n_atm=1.0) == pytest.approx(d / C * 1e6, rel=1e-15)
    assert d == pytest.approx(299792.458, abs=1e-3)
    assert predict_toa(r, rx, n_atm=1.0) == pytest.approx(1000.0, abs=1e-5)


def test_predict_toa_pohang(net, rover):
    r = net.rating("9930M")
    expected = geodesic_distance(r.position, rover) / (C / 1.000338) * 1e6
    assert predict_toa(r, rover, n_atm=1.000338) == pytest.approx(expected, rel=1e-15)


def test_predict_toa_additive(net, rover):
    r = net.rating("9930W")
    base = predict_toa(r, rover)
    assert predict_toa(r, rover, 0.4, 0.3, 1.1) == pytest.approx(base + 1.8, abs=1e-9)
    assert base == pytest.approx(r.emission_delay_us + geodesic_distance(r.position, rover) / (C / 1.000338) * 1e6)


def test_predict_toa_increasing_in_distance(net):
    r = net.rating("9930M")
    pts = [GeoPoint(r.position.lat_deg + k * 0.5, r.position.lon_deg) for k in range(1, 6)]
    toas = [predict_toa(r, p) for p in pts]
    assert toas == sorted(toas) and len(set(toas)) == 5


@pytest.mark.parametrize(
    "toa,expected", [(50.0, 50.0), (99300.0, 0.0), (250000.0, 51400.0)]
)
def test_toa_to_tor(toa, expected):
    assert toa_to_tor(toa, Chain(9930)) == expected


def test_toa_to_tor_negative():
    with pytest.raises(ValueError):
        toa_to_tor(-1.0, Chain(9930))


def test_resolve_toa_examples():
    assert resolve_toa(51400.0, Chain(9930), 249000.0) == 250000.0
    assert resolve_toa(10.0, Chain(9930), 15.0) == 10.0
    with pytest.raises(ValueError):
        resolve_toa(99300.0, Chain(9930), 0.0)
    with pytest.raises(ValueError):
        resolve_toa(-0.5, Chain(9930), 0.0)


@settings(max_examples=500)
@given(st.sampled_from(CHAINS), st.floats(0, 2e6), st.floats(-0.4999, 0.4999))
def test_round_trip_property(chain, toa, frac):
    # clamping a negative prediction to 0 keeps |error| < GRI/2
    predicted = max(toa + frac * chain.gri_us, 0.0)
    tor = toa_to_tor(toa, chain)
    assert 0 <= tor < chain.gri_us
    assert resolve_toa(tor, chain, predicted) == toa


@settings(max_examples=300)
@given(st.sampled_from(CHAINS), st.floats(-1e6, 1e6))
def test_wrap_tor_range(chain, x):
    w = wrap_tor(x, chain)
    assert 0 <= w < chain.gri_us


def test_wrap_tor_tiny_negative():
    assert wrap_tor(-1e-30, Chain(9930)) == 0.0
