"""WGS-84 positions and ellipsoidal distances.

Distances use Vincenty's inverse formula on the WGS-84 ellipsoid. All points
sit on the ellipsoid surface; heights are not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# WGS-84
WGS84_A = 6378137.0
WGS84_F = 1 / 298.257223563
WGS84_B = (1 - WGS84_F) * WGS84_A
WGS84_E2 = WGS84_F * (2 - WGS84_F)


class GeodesicError(ArithmeticError):
    """Raised when the inverse geodesic iteration fails to converge."""


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        lat = float(self.lat_deg)
        lon = float(self.lon_deg)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        object.__setattr__(self, "lat_deg", lat)
        object.__setattr__(self, "lon_deg", normalize_lon(lon))

    def __str__(self) -> str:
        return f"({self.lat_deg:.6f}, {self.lon_deg:.6f})"


def normalize_lon(lon_deg: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    if -180.0 <= lon_deg < 180.0:
        return lon_deg
    return (lon_deg + 180.0) % 360.0 - 180.0


def geodesic_inverse(
    a: GeoPoint, b: GeoPoint, tol: float = 1e-13, max_iter: int = 200
) -> tuple[float, float, float]:
    """Solve the inverse geodesic problem between two points.

    Returns ``(distance_m, azimuth_a_deg, azimuth_b_deg)``. Azimuths are
    clockwise from north: the forward azimuth at ``a`` toward ``b`` and the
    forward azimuth at ``b`` continuing away from ``a``.

    Raises GeodesicError when the lambda iteration does not converge, which
    only happens for nearly antipodal pairs.
    """
    if a == b:
        return 0.0, 0.0, 0.0

    f = WGS84_F
    L = math.radians(b.lon_deg - a.lon_deg)
    U1 = math.atan((1 - f) * math.tan(math.radians(a.lat_deg)))
    U2 = math.atan((1 - f) * math.tan(math.radians(b.lat_deg)))
    sinU1, cosU1 = math.sin(U1), math.cos(U1)
    sinU2, cosU2 = math.sin(U2), math.cos(U2)

    lam = L
    for _ in range(max_iter):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.hypot(cosU2 * sin_lam, cosU1 * sinU2 - sinU1 * cosU2 * cos_lam)
        if sin_sigma == 0.0:
            # coincident after rounding
            return 0.0, 0.0, 0.0
        cos_sigma = sinU1 * sinU2 + cosU1 * cosU2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cosU1 * cosU2 * sin_lam / sin_sigma
        cos2_alpha = 1 - sin_alpha**2
        # equatorial line: cos2_alpha == 0
        cos_2sm = cos_sigma - 2 * sinU1 * sinU2 / cos2_alpha if cos2_alpha != 0 else 0.0
        C = f / 16 * cos2_alpha * (4 + f * (4 - 3 * cos2_alpha))
        lam_prev = lam
        lam = L + (1 - C) * f * sin_alpha * (
            sigma + C * sin_sigma * (cos_2sm + C * cos_sigma * (-1 + 2 * cos_2sm**2))
        )
        if abs(lam - lam_prev) < tol:
            break
    else:
        raise GeodesicError(f"inverse geodesic did not converge between {a} and {b}")

    u2 = cos2_alpha * (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    A = 1 + u2 / 16384 * (4096 + u2 * (-768 + u2 * (320 - 175 * u2)))
    B = u2 / 1024 * (256 + u2 * (-128 + u2 * (74 - 47 * u2)))
    d_sigma = B * sin_sigma * (
        cos_2sm
        + B / 4 * (
            cos_sigma * (-1 + 2 * cos_2sm**2)
            - B / 6 * cos_2sm * (-3 + 4 * sin_sigma**2) * (-3 + 4 * cos_2sm**2)
        )
    )
    s = WGS84_B * A * (sigma - d_sigma)

    sin_lam, cos_lam = math.sin(lam), math.cos(lam)
    az1 = math.atan2(cosU2 * sin_lam, cosU1 * sinU2 - sinU1 * cosU2 * cos_lam)
    az2 = math.atan2(cosU1 * sin_lam, -sinU1 * cosU2 + cosU1 * sinU2 * cos_lam)
    return s, math.degrees(az1), math.degrees(az2)


def geodesic_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Ellipsoidal distance in meters between two points."""
    return geodesic_inverse(a, b)[0]


def horizontal_error(estimate: GeoPoint, truth: GeoPoint) -> float:
    """Horizontal position error in meters; the accuracy metric used throughout."""
    return geodesic_distance(estimate, truth)


def haversine_distance(a: GeoPoint, b: GeoPoint, radius_m: float = 6371008.8) -> float:
    """Great-circle distance on a sphere of mean Earth radius. Sanity check only."""
    p1, p2 = math.radians(a.lat_deg), math.radians(b.lat_deg)
    dp = p2 - p1
    dl = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius_m * math.asin(min(1.0, math.sqrt(h)))


def curvature_radii(lat_deg: float) -> tuple[float, float]:
    """Meridian (M) and prime-vertical (N) radii of curvature in meters."""
    s2 = math.sin(math.radians(lat_deg)) ** 2
    w = math.sqrt(1 - WGS84_E2 * s2)
    n = WGS84_A / w
    m = WGS84_A * (1 - WGS84_E2) / w**3
    return m, n
