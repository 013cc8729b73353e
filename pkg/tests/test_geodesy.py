import math

import pytest
from geographiclib.geodesic import Geodesic
from hypothesis import given, settings
from hypothesis import strategies as st

from mcloran.geodesy import (
    GeodesicError,
    GeoPoint,
    geodesic_distance,
    geodesic_inverse,
    haversine_distance,
    horizontal_error,
)

KARNEY = Geodesic.WGS84

# Korea / Northeast Asia box
lat_r = st.floats(20.0, 50.0)
lon_r = st.floats(110.0, 140.0)
points = st.builds(GeoPoint, lat_r, lon_r)


def karney(a, b):
    return KARNEY.Inverse(a.lat_deg, a.lon_deg, b.lat_deg, b.lon_deg)


def test_identity_is_zero(rover):
    assert geodesic_distance(rover, rover) == 0.0
    assert horizontal_error(rover, rover) == 0.0


def test_rover_to_reference_station(rover, ref):
    # ~10 km baseline; Karney gives 9676.9515 m
    d = geodesic_distance(rover, ref)
    assert 9600 < d < 9700
    assert d == pytest.approx(karney(rover, ref)["s12"], abs=1e-3)


def test_one_degree_of_latitude_at_equator():
    d = geodesic_distance(GeoPoint(0, 0), GeoPoint(1, 0))
    assert d == pytest.approx(110574.388558, abs=1e-3)


def test_small_northward_displacement():
    truth = GeoPoint(37.39, 126.7789)
    est = GeoPoint(37.3901, 126.7789)
    # meridian arc over 1e-4 deg at 37.39 deg, from Karney: 11.0985 m
    assert horizontal_error(est, truth) == pytest.approx(11.098497, abs=1e-5)


@pytest.mark.parametrize(
    "a,b",
    [
        ((37.3907, 126.7789), (36.184722, 129.340833)),
        ((37.3907, 126.7789), (23.723908, 116.895722)),
        ((37.3907, 126.7789), (44.5325, 131.639722)),
        ((0.0, 0.0), (0.0, 10.0)),
        ((-33.9, 18.4), (-34.2, 25.6)),
        ((60.0, -170.0), (61.0, 175.0)),
    ],
)
def test_matches_karney(a, b):
    pa, pb = GeoPoint(*a), GeoPoint(*b)
    s, az1, az2 = geodesic_inverse(pa, pb)
    ref = karney(pa, pb)
    assert s == pytest.approx(ref["s12"], abs=1e-3)
    assert az1 == pytest.approx(ref["azi1"], abs=1e-6)
    assert az2 == pytest.approx(ref["azi2"], abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_random_in_region_vs_karney(a, b):
    assert geodesic_distance(a, b) == pytest.approx(karney(a, b)["s12"], abs=0.5)


@settings(max_examples=200, deadline=None)
@given(points, points)
def test_symmetric_and_nonnegative(a, b):
    d = horizontal_error(a, b)
    assert d >= 0
    assert d == pytest.approx(horizontal_error(b, a), rel=1e-12, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert geodesic_distance(a, c) <= (geodesic_distance(a, b) + geodesic_distance(b, c)) * (1 + 1e-6) + 1e-9


@settings(max_examples=200, deadline=None)
@given(points, st.floats(-4.0, 4.0), st.floats(-4.0, 4.0))
def test_haversine_envelope(a, dlat, dlon):
    b = GeoPoint(a.lat_deg + dlat, a.lon_deg + dlon)
    d = geodesic_distance(a, b)
    if d > 1000:
        assert abs(haversine_distance(a, b) - d) / d < 0.005


def test_deterministic(rover, ref):
    assert geodesic_distance(rover, ref) == geodesic_distance(rover, ref)


def test_near_antipodal_raises():
    with pytest.raises(GeodesicError):
        geodesic_inverse(GeoPoint(0.0, 0.0), GeoPoint(0.5, 179.7))


def test_geopoint_validation():
    assert GeoPoint(10, 180).lon_deg == -180.0
    assert GeoPoint(10, 190).lon_deg == pytest.approx(-170.0)
    with pytest.raises(ValueError):
        GeoPoint(91, 0)
    with pytest.raises(ValueError):
        GeoPoint(math.nan, 0)
