"""Network layouts, Poisson clutter fields, and planar geometry primitives.

The world is strictly 2-D: APs and UEs are points in a rectangular service
area, clutter scatterers form a Poisson point process over a rectangle or an
annulus, and all bearings are standard atan2 angles in [0, 2pi).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, InvalidConfigError
from .rng import as_rng

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [xmin, xmax] x [ymin, ymax] in meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (pts[:, 0] >= self.xmin)
            & (pts[:, 0] <= self.xmax)
            & (pts[:, 1] >= self.ymin)
            & (pts[:, 1] <= self.ymax)
        )

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        xs = rng.uniform(self.xmin, self.xmax, size=n)
        ys = rng.uniform(self.ymin, self.ymax, size=n)
        return np.column_stack([xs, ys])


@dataclass(frozen=True)
class Annulus:
    """Annulus {r_inner <= |p - center| <= r_outer} in meters."""

    center: tuple
    r_inner: float
    r_outer: float

    @property
    def area(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        return (d >= self.r_inner - 1e-12) & (d <= self.r_outer + 1e-12)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # Area-uniform radius: inverse CDF of f(r) ~ r on [r_inner, r_outer].
        u = rng.uniform(size=n)
        radii = np.sqrt(self.r_inner**2 + u * (self.r_outer**2 - self.r_inner**2))
        angles = rng.uniform(0.0, TWO_PI, size=n)
        return np.column_stack(
            [
                self.center[0] + radii * np.cos(angles),
                self.center[1] + radii * np.sin(angles),
            ]
        )


@dataclass
class NetworkLayout:
    """AP and UE positions inside a rectangular service area."""

    ap_positions: np.ndarray  # (L, 2) meters
    ue_positions: np.ndarray  # (K, 2) meters
    area: Rect

    def __post_init__(self):
        self.ap_positions = np.atleast_2d(np.asarray(self.ap_positions, dtype=float))
        self.ue_positions = np.atleast_2d(np.asarray(self.ue_positions, dtype=float))
        if self.ap_positions.shape[0] < 1 or self.ue_positions.shape[0] < 1:
            raise InvalidConfigError("layout needs at least one AP and one UE")
        if not self.area.contains(self.ap_positions).all():
            raise InvalidConfigError("AP positions outside the service area")
        if not self.area.contains(self.ue_positions).all():
            raise InvalidConfigError("UE positions outside the service area")

    @property
    def num_aps(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def num_ues(self) -> int:
        return self.ue_positions.shape[0]

    def distances(self) -> np.ndarray:
        """(K, L) matrix of UE-to-AP distances in meters."""
        diff = self.ue_positions[:, None, :] - self.ap_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass
class ClutterField:
    """One realization of a Poisson clutter process.

    Each scatterer has a position, a radar cross-section draw, and a fading
    gain (fixed at 1 under the worst-case model where clutter returns add
    constructively).
    """

    positions: np.ndarray  # (n, 2) meters
    rcs: np.ndarray  # (n,) m^2
    fading_gain: np.ndarray  # (n,) unitless
    intensity: float  # scatterers per m^2
    region: object = None  # Rect or Annulus

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.rcs = np.asarray(self.rcs, dtype=float).reshape(-1)
        self.fading_gain = np.asarray(self.fading_gain, dtype=float).reshape(-1)
        if (self.rcs < 0).any() or (self.fading_gain < 0).any():
            raise InvalidConfigError("clutter rcs and fading gains must be nonnegative")
        if self.region is not None and len(self.positions):
            if not self.region.contains(self.positions).all():
                raise InvalidConfigError("scatterer positions outside the clutter region")

    @property
    def num_scatterers(self) -> int:
        return self.positions.shape[0]

    def ranges_from(self, origin) -> np.ndarray:
        """Distances of all scatterers from a point."""
        origin = np.asarray(origin, dtype=float)
        if self.num_scatterers == 0:
            return np.empty(0)
        return np.hypot(self.positions[:, 0] - origin[0], self.positions[:, 1] - origin[1])

    def bearings_from(self, origin) -> np.ndarray:
        origin = np.asarray(origin, dtype=float)
        if self.num_scatterers == 0:
            return np.empty(0)
        ang = np.arctan2(self.positions[:, 1] - origin[1], self.positions[:, 0] - origin[0])
        return np.mod(ang, TWO_PI)


def generate_layout(num_aps: int, num_ues: int, area: Rect, seed) -> NetworkLayout:
    """Draw AP and UE positions i.i.d. uniform over the service area.

    Deterministic given the seed.  Raises ``InvalidConfigError`` for a
    zero-area region or nonpositive counts.
    """
    if num_aps < 1 or num_ues < 1:
        raise InvalidConfigError("num_aps and num_ues must be >= 1")
    if area.area <= 0:
        raise InvalidConfigError("service area must have positive area")
    rng = as_rng(seed)
    aps = area.sample(rng, num_aps)
    ues = area.sample(rng, num_ues)
    return NetworkLayout(ap_positions=aps, ue_positions=ues, area=area)


def sample_clutter(
    intensity: float,
    region,
    upsilon_c_avg: float,
    seed,
    fading_model: str = "worst-case",
) -> ClutterField:
    """Draw one Poisson clutter realization over a region.

    The scatterer count is Poisson(intensity * |region|), positions are
    area-uniform, cross-sections are i.i.d. exponential with mean
    ``upsilon_c_avg``, and fading gains are 1 under ``"worst-case"`` or
    i.i.d. Exp(1) under ``"exponential"``.
    """
    if intensity < 0:
        raise InvalidConfigError("clutter intensity must be nonnegative")
    if upsilon_c_avg <= 0:
        raise InvalidConfigError("mean clutter cross-section must be positive")
    if fading_model not in ("worst-case", "exponential"):
        raise InvalidConfigError(f"unknown fading model {fading_model!r}")
    rng = as_rng(seed)
    n = int(rng.poisson(intensity * region.area)) if intensity > 0 else 0
    positions = region.sample(rng, n) if n else np.empty((0, 2))
    rcs = rng.exponential(upsilon_c_avg, size=n)
    if fading_model == "exponential":
        gains = rng.exponential(1.0, size=n)
    else:
        gains = np.ones(n)
    return ClutterField(
        positions=positions,
        rcs=rcs,
        fading_gain=gains,
        intensity=intensity,
        region=region,
    )


def bearing(origin, target) -> float:
    """Bearing from one point to another, in [0, 2pi)."""
    origin = np.asarray(origin, dtype=float)
    target = np.asarray(target, dtype=float)
    dx, dy = target[0] - origin[0], target[1] - origin[1]
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometryError("bearing undefined for coincident points")
    return math.atan2(dy, dx) % TWO_PI


ENTITY_CSV_HEADER = ["kind", "x_m", "y_m", "rcs_m2", "gain"]


def write_entities_csv(path, layout: NetworkLayout = None, clutter: ClutterField = None):
    """Write APs, UEs, and scatterers as one row per entity.

    Schema: ``kind, x_m, y_m, rcs_m2, gain`` where rcs/gain are empty for
    APs and UEs.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENTITY_CSV_HEADER)
        if layout is not None:
            for x, y in layout.ap_positions:
                writer.writerow(["ap", f"{x:.12g}", f"{y:.12g}", "", ""])
            for x, y in layout.ue_positions:
                writer.writerow(["ue", f"{x:.12g}", f"{y:.12g}", "", ""])
        if clutter is not None:
            for (x, y), rcs, g in zip(clutter.positions, clutter.rcs, clutter.fading_gain):
                writer.writerow(
                    ["scatterer", f"{x:.12g}", f"{y:.12g}", f"{rcs:.12g}", f"{g:.12g}"]
                )


def read_entities_csv(path) -> dict:
    """Read an entity CSV back into arrays keyed by kind."""
    rows = {"ap": [], "ue": [], "scatterer": []}
    extras = {"rcs": [], "gain": []}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            kind = row["kind"]
            if kind not in rows:
                raise InvalidConfigError(f"unknown entity kind {kind!r}")
            rows[kind].append((float(row["x_m"]), float(row["y_m"])))
            if kind == "scatterer":
                extras["rcs"].append(float(row["rcs_m2"]))
                extras["gain"].append(float(row["gain"]))
    return {
        "ap": np.asarray(rows["ap"], dtype=float).reshape(-1, 2),
        "ue": np.asarray(rows["ue"], dtype=float).reshape(-1, 2),
        "scatterer": np.asarray(rows["scatterer"], dtype=float).reshape(-1, 2),
        "rcs": np.asarray(extras["rcs"], dtype=float),
        "gain": np.asarray(extras["gain"], dtype=float),
    }
