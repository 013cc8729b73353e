"""Common-clock TOA positioning across Loran chains.

Every transmitter is assumed synchronised to a common time scale, so the
TOAs of all chains share one receiver clock bias. Unknowns are latitude,
longitude (on the ellipsoid surface) and that bias; they are found by
Gauss-Newton with step halving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import groupby
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .corrections import ToaMeasurement
from .geodesy import GeoPoint, curvature_radii, geodesic_distance, geodesic_inverse
from .network import Designator, NetworkDb


class SolverError(ValueError):
    pass


class UnderdeterminedError(SolverError):
    pass


class SingularGeometryError(SolverError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 20
    pos_tol_m: float = 1e-4
    bias_tol_us: float = 1e-6
    max_halvings: int = 8


class EpochObservations(NamedTuple):
    epoch_s: float
    obs: tuple[tuple[Designator, float], ...]


@dataclass(frozen=True)
class Fix:
    epoch_s: float
    position: GeoPoint | None
    clock_bias_us: float
    iterations: int
    residual_rms_us: float
    converged: bool
    n_obs: int
    error: str | None = None


def group_epochs(toas: Iterable[ToaMeasurement]) -> list[EpochObservations]:
    """Collect corrected TOAs into per-epoch observation sets, ordered by epoch."""
    ordered = sorted(toas, key=lambda m: (m.epoch_s, m.designator))
    return [
        EpochObservations(t, tuple((m.designator, m.toa_us) for m in grp))
        for t, grp in groupby(ordered, key=lambda m: m.epoch_s)
    ]


def _model(obs, net: NetworkDb, lat: float, lon: float, bias: float):
    """Residuals (us) and Jacobian in (us/deg lat, us/deg lon, us/us)."""
    v = net.v_prop_m_per_us
    p = GeoPoint(lat, lon)
    m_rad, n_rad = curvature_radii(lat)
    dn_dlat = m_rad * math.pi / 180.0
    de_dlon = n_rad * math.cos(math.radians(lat)) * math.pi / 180.0
    res = np.empty(len(obs))
    jac = np.empty((len(obs), 3))
    for i, (d, toa) in enumerate(obs):
        r = net.rating(d)
        dist, az, _ = geodesic_inverse(p, r.position)
        res[i] = toa - (r.emission_delay_us + dist / v + bias)
        a = math.radians(az)
        jac[i] = (-math.cos(a) * dn_dlat / v, -math.sin(a) * de_dlon / v, 1.0)
    return res, jac


def predicted_toas(obs, net: NetworkDb, lat: float, lon: float, bias: float) -> np.ndarray:
    v = net.v_prop_m_per_us
    p = GeoPoint(lat, lon)
    return np.array(
        [net.rating(d).emission_delay_us + geodesic_distance(net.rating(d).position, p) / v + bias for d, _ in obs]
    )


def analytic_jacobian(obs, net: NetworkDb, lat: float, lon: float, bias: float = 0.0) -> np.ndarray:
    """Jacobian of predicted TOA w.r.t. (lat deg, lon deg, bias us)."""
    return _model(obs, net, lat, lon, bias)[1]


def numerical_jacobian(obs, net: NetworkDb, lat: float, lon: float, bias: float = 0.0, step_deg: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of predicted TOA; a check on the analytic one."""
    cols = []
    for dlat, dlon in ((step_deg, 0.0), (0.0, step_deg)):
        hi = predicted_toas(obs, net, lat + dlat, lon + dlon, bias)
        lo = predicted_toas(obs, net, lat - dlat, lon - dlon, bias)
        cols.append((hi - lo) / (2 * step_deg))
    cols.append(np.ones(len(obs)))
    return np.column_stack(cols)


def _check_rank(jac: np.ndarray) -> None:
    scaled = jac / np.linalg.norm(jac, axis=0)
    if np.linalg.matrix_rank(scaled, tol=1e-9) < 3:
        raise SingularGeometryError("observation geometry does not determine position and clock bias")


def solve_epoch(
    obs: EpochObservations,
    net: NetworkDb,
    initial: GeoPoint,
    opts: SolverOptions = SolverOptions(),
    initial_bias_us: float = 0.0,
) -> Fix:
    """Least-squares position and clock bias from one epoch of corrected TOAs.

    Raises UnderdeterminedError with fewer than three observations and
    SingularGeometryError when the Jacobian is rank deficient. Running out
    of iterations returns a Fix with ``converged=False``.
    """
    rows = obs.obs
    if len(rows) < 3:
        raise UnderdeterminedError(f"epoch {obs.epoch_s}: {len(rows)} observations for 3 unknowns")
    if len({d for d, _ in rows}) != len(rows):
        raise SolverError(f"epoch {obs.epoch_s}: repeated designator")

    lat, lon, bias = initial.lat_deg, initial.lon_deg, initial_bias_us
    res, jac = _model(rows, net, lat, lon, bias)
    _check_rank(jac)
    cost = float(res @ res)
    converged = False
    it = 0
    while it < opts.max_iter:
        it += 1
        step, *_ = np.linalg.lstsq(jac, res, rcond=None)
        m_rad, n_rad = curvature_radii(lat)
        pos_step_m = math.hypot(
            math.radians(step[0]) * m_rad, math.radians(step[1]) * n_rad * math.cos(math.radians(lat))
        )
        if pos_step_m < opts.pos_tol_m and abs(step[2]) < opts.bias_tol_us:
            lat, lon, bias = lat + step[0], lon + step[1], bias + step[2]
            res, jac = _model(rows, net, lat, lon, bias)
            converged = True
            break
        scale = 1.0
        for _ in range(opts.max_halvings + 1):
            cand = (lat + scale * step[0], lon + scale * step[1], bias + scale * step[2])
            c_res, c_jac = _model(rows, net, *cand)
            c_cost = float(c_res @ c_res)
            if c_cost <= cost:
                break
            scale /= 2
        else:
            # no descent along the Gauss-Newton direction
            break
        lat, lon, bias = cand
        res, jac, cost = c_res, c_jac, c_cost

    return Fix(
        epoch_s=obs.epoch_s,
        position=GeoPoint(lat, lon),
        clock_bias_us=float(bias),
        iterations=it,
        residual_rms_us=float(math.sqrt(float(res @ res) / len(rows))),
        converged=converged,
        n_obs=len(rows),
    )


def solve_session(
    epochs: Sequence[EpochObservations],
    net: NetworkDb,
    initial: GeoPoint,
    opts: SolverOptions = SolverOptions(),
    warm_start: bool = True,
) -> list[Fix]:
    """Solve every epoch in order, seeding each from the last converged fix.

    An epoch that cannot be solved yields a Fix with ``converged=False`` and
    ``error`` set; the session continues.
    """
    fixes = []
    guess, guess_bias = initial, 0.0
    for ep in epochs:
        try:
            fix = solve_epoch(ep, net, guess, opts, guess_bias)
        except SolverError as exc:
            fixes.append(Fix(ep.epoch_s, None, math.nan, 0, math.nan, False, len(ep.obs), str(exc)))
            continue
        fixes.append(fix)
        if warm_start and fix.converged:
            guess, guess_bias = fix.position, fix.clock_bias_us
    return fixes
