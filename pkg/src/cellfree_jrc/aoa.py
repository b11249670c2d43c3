"""Bearing-intersection localization and clutter-blockage geometry.

Echo bearings reported by two APs intersect at the target.  With the first
AP at the origin of a frame whose x-axis points at the second AP (baseline
length L), and the interior angles alpha_1 (at AP 1, from the baseline) and
alpha_2 (at AP 2, from the reversed baseline), the intersection is

    x = L cos(a1) sin(a2) / sin(a1 + a2),
    y = L sin(a1) sin(a2) / sin(a1 + a2).

With more than two reports, the pairwise intersections of AP 1 with every
other AP are stacked behind identity blocks and solved by least squares,
which averages them.  The first-order area displaced by small bearing
errors d_a1, d_a2 is

    L^2 |sin(a1) sin(a2) / sin^3(a1 + a2)| d_a1 d_a2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateGeometryError, InvalidConfigError
from .rng import as_rng
from .topology import TWO_PI, bearing


@dataclass(frozen=True)
class AoaReport:
    """One estimated echo bearing, in world coordinates."""

    ap_index: int
    angle: float  # [0, 2pi)
    quality: Optional[float] = None  # optional variance of the estimate

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % TWO_PI)


@dataclass(frozen=True)
class PositionEstimate:
    point: np.ndarray  # (2,) meters
    residual: float  # least-squares residual norm, meters
    used_reports: tuple


def _wrap_pi(angle: float) -> float:
    return (angle + math.pi) % TWO_PI - math.pi


def _pair_intersection_local(a1: float, a2: float, baseline: float):
    """Intersection in the baseline frame; raises on parallel bearings."""
    s = math.sin(a1 + a2)
    if abs(s) < 1e-12:
        raise DegenerateGeometryError("bearings are parallel: sin(a1 + a2) = 0")
    x = baseline * math.cos(a1) * math.sin(a2) / s
    y = baseline * math.sin(a1) * math.sin(a2) / s
    return x, y


def _pair_intersection_world(p1, pd, theta1, theta_d):
    """World-frame intersection of bearings from two APs."""
    p1 = np.asarray(p1, dtype=float)
    pd = np.asarray(pd, dtype=float)
    base = pd - p1
    baseline = float(np.hypot(*base))
    if baseline == 0.0:
        raise DegenerateGeometryError("AP positions coincide")
    beta = math.atan2(base[1], base[0])
    a1 = _wrap_pi(theta1 - beta)
    a2 = _wrap_pi(math.pi - (theta_d - beta))
    x, y = _pair_intersection_local(a1, a2, baseline)
    rot = np.array([[math.cos(beta), -math.sin(beta)], [math.sin(beta), math.cos(beta)]])
    return p1 + rot @ np.array([x, y])


def intersect_aoa(ap_positions, angles, method: str = "pairwise") -> PositionEstimate:
    """Least-squares intersection of two or more echo bearings.

    ``"pairwise"`` stacks the pairwise intersections of the first AP with
    every other AP behind identity blocks, so the solution is their average
    and, with exactly two consistent reports, the exact ray intersection.
    ``"bearing-lines"`` solves the stacked bearing-line equations instead.
    """
    ap_positions = np.atleast_2d(np.asarray(ap_positions, dtype=float))
    angles = np.asarray(angles, dtype=float)
    n = ap_positions.shape[0]
    if n < 2 or angles.size != n:
        raise InvalidConfigError("need at least two APs with matching bearings")
    if method == "pairwise":
        points = [
            _pair_intersection_world(ap_positions[0], ap_positions[d], angles[0], angles[d])
            for d in range(1, n)
        ]
        b = np.concatenate(points)
        estimate = np.mean(points, axis=0)
        residual = float(np.linalg.norm(b - np.tile(estimate, n - 1)))
        return PositionEstimate(point=estimate, residual=residual, used_reports=tuple(range(n)))
    if method == "bearing-lines":
        g = np.column_stack([np.sin(angles), -np.cos(angles)])
        b = np.sin(angles) * ap_positions[:, 0] - np.cos(angles) * ap_positions[:, 1]
        if np.linalg.matrix_rank(g, tol=1e-10) < 2:
            raise DegenerateGeometryError("bearing lines are parallel")
        estimate, res, _, _ = np.linalg.lstsq(g, b, rcond=None)
        residual = float(np.sqrt(res[0])) if res.size else float(np.linalg.norm(g @ estimate - b))
        return PositionEstimate(point=estimate, residual=residual, used_reports=tuple(range(n)))
    raise InvalidConfigError(f"unknown intersection method {method!r}")


def intersection_error_area(a1, a2, d_a1, d_a2, baseline) -> float:
    """First-order area displaced by bearing errors d_a1 and d_a2.

    Equals |det| of the 2x2 matrix of derivatives of the intersection with
    respect to the two bearings, times d_a1 * d_a2.
    """
    s = math.sin(a1 + a2)
    if abs(s) < 1e-12:
        raise DegenerateGeometryError("singular configuration: sin(a1 + a2) = 0")
    return baseline**2 * abs(math.sin(a1) * math.sin(a2) / s**3) * d_a1 * d_a2


def segment_blocked(p0, p1, positions, capture_radius: float) -> np.ndarray:
    """Which of ``positions`` lie within the capture radius of the open segment p0-p1."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    seg = p1 - p0
    seg_len2 = float(seg @ seg)
    if seg_len2 == 0.0:
        raise DegenerateGeometryError("segment endpoints coincide")
    t = (pts - p0) @ seg / seg_len2
    perp = pts - p0 - np.outer(t, seg)
    dist = np.hypot(perp[:, 0], perp[:, 1])
    return (t > 0.0) & (t < 1.0) & (dist <= capture_radius)


def detect_blocked_aps(layout, ue_true, clutter, serving, capture_radius: float = 1.0) -> set:
    """Serving APs with a scatterer on their line of sight to the UE.

    An AP is blocked when some scatterer lies within ``capture_radius`` of
    the open AP-to-UE segment; those are exactly the APs whose synthetic
    echo bearings get corrupted downstream.
    """
    blocked = set()
    if clutter is None or clutter.num_scatterers == 0:
        return blocked
    for l in serving:
        hits = segment_blocked(
            layout.ap_positions[l], ue_true, clutter.positions, capture_radius
        )
        if hits.any():
            blocked.add(int(l))
    return blocked


def synthesize_reports(
    layout,
    ue_index: int,
    ue_true,
    clutter,
    aps=None,
    capture_radius: float = 1.0,
    noise_std: float = 0.0,
    seed=None,
) -> dict:
    """Synthetic echo bearings keyed by (ue, ap) for a simulation scenario.

    A clear AP reports the true bearing to the UE (plus optional Gaussian
    noise); a blocked AP reports the bearing to its nearest blocking
    scatterer instead, the strongest corruption consistent with the
    echo arriving from the obstruction.
    """
    rng = as_rng(seed) if noise_std > 0 else None
    if aps is None:
        aps = range(layout.num_aps)
    reports = {}
    for l in aps:
        ap = layout.ap_positions[l]
        angle = bearing(ap, ue_true)
        if clutter is not None and clutter.num_scatterers:
            hits = segment_blocked(ap, ue_true, clutter.positions, capture_radius)
            if hits.any():
                blockers = clutter.positions[hits]
                dists = np.hypot(blockers[:, 0] - ap[0], blockers[:, 1] - ap[1])
                angle = bearing(ap, blockers[np.argmin(dists)])
        if rng is not None:
            angle = (angle + rng.normal(0.0, noise_std)) % TWO_PI
        reports[(ue_index, int(l))] = float(angle)
    return reports


def rmse(estimates, truth) -> float:
    """Root-mean-square position error over a batch of estimates."""
    pts = np.atleast_2d(np.asarray(estimates, dtype=float))
    if pts.shape[0] == 0:
        raise InvalidConfigError("rmse needs at least one estimate")
    truth = np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(np.sum((pts - truth) ** 2, axis=1))))
