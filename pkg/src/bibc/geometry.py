"""Planar geometry: AP deployments, the BD uncertainty rectangle, and free-space path gains."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class InfeasibleGeometryError(ValueError):
    """The requested geometry cannot be built or evaluated."""


class DegenerateGeometryError(InfeasibleGeometryError):
    """A BD position coincides with an AP, where the inverse-square model diverges."""


class Point(NamedTuple):
    x: float
    y: float


def as_point(p: Sequence[float]) -> Point:
    return Point(float(p[0]), float(p[1]))


@dataclass(frozen=True)
class Rectangle:
    center: Point
    width: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"rectangle needs positive width/height, got {self.width}x{self.height}")
        if not all(math.isfinite(v) for v in (*self.center, self.width, self.height)):
            raise ValueError("rectangle coordinates must be finite")

    @classmethod
    def square(cls, center: Sequence[float], side: float) -> "Rectangle":
        return cls(Point(*center), side, side)

    @property
    def xmin(self) -> float:
        return self.center.x - self.width / 2

    @property
    def xmax(self) -> float:
        return self.center.x + self.width / 2

    @property
    def ymin(self) -> float:
        return self.center.y - self.height / 2

    @property
    def ymax(self) -> float:
        return self.center.y + self.height / 2

    @property
    def perimeter(self) -> float:
        return 2 * (self.width + self.height)

    def clamp(self, pts: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the rectangle (componentwise clipping)."""
        pts = np.asarray(pts, dtype=float)
        lo = np.array([self.xmin, self.ymin])
        hi = np.array([self.xmax, self.ymax])
        return np.clip(pts, lo, hi)

    def contains(self, p: Sequence[float], tol: float = 0.0) -> bool:
        return (self.xmin - tol <= p[0] <= self.xmax + tol) and (self.ymin - tol <= p[1] <= self.ymax + tol)

    def contains_rect(self, other: "Rectangle") -> bool:
        return (
            other.xmin >= self.xmin
            and other.xmax <= self.xmax
            and other.ymin >= self.ymin
            and other.ymax <= self.ymax
        )


@dataclass(frozen=True, eq=False)
class Deployment:
    """K multi-antenna APs placed in a rectangular coverage area.

    ``ap_positions`` is stored as a read-only ``(K, 2)`` float array.
    """

    ap_positions: np.ndarray
    antennas_per_ap: int
    coverage: Rectangle

    def __post_init__(self):
        aps = np.array(self.ap_positions, dtype=float).reshape(-1, 2)
        if aps.shape[0] < 2:
            raise ValueError("a deployment needs at least 2 APs")
        if not np.all(np.isfinite(aps)):
            raise ValueError("AP coordinates must be finite")
        if len({tuple(p) for p in aps.tolist()}) != aps.shape[0]:
            raise ValueError("AP positions must be distinct")
        if int(self.antennas_per_ap) != self.antennas_per_ap or self.antennas_per_ap < 1:
            raise ValueError("antennas_per_ap must be an integer >= 1")
        aps.setflags(write=False)
        object.__setattr__(self, "ap_positions", aps)
        object.__setattr__(self, "antennas_per_ap", int(self.antennas_per_ap))

    @property
    def K(self) -> int:
        return self.ap_positions.shape[0]

    @property
    def M(self) -> int:
        return self.antennas_per_ap

    def ap(self, k: int) -> Point:
        return as_point(self.ap_positions[k])


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def path_gain(ap: Sequence[float], bd: Sequence[float]) -> float:
    """Free-space LOS gain 1/d^2."""
    d2 = (ap[0] - bd[0]) ** 2 + (ap[1] - bd[1]) ** 2
    if d2 == 0.0:
        raise DegenerateGeometryError(f"BD at {tuple(bd)} is co-located with an AP")
    return 1.0 / d2


def squared_distances(aps: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Squared distances, shape ``(N, K)`` for ``N`` points and ``K`` APs."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    aps = np.asarray(aps, dtype=float)
    diff = pts[:, None, :] - aps[None, :, :]
    return np.einsum("nkc,nkc->nk", diff, diff)


def inverse_square_gains(aps: np.ndarray, pts: np.ndarray, strict: bool = True) -> np.ndarray:
    """Path gains 1/d^2 for every (point, AP) pair, shape ``(N, K)``.

    With ``strict=False`` a point sitting on an AP yields ``inf`` instead of raising;
    grid searches use this since such a point can never be the minimizer.
    """
    d2 = squared_distances(aps, pts)
    if np.any(d2 == 0.0):
        if strict:
            raise DegenerateGeometryError("BD position coincides with an AP")
        with np.errstate(divide="ignore"):
            return 1.0 / d2
    return 1.0 / d2


def nearest_ap(dep: Deployment, p: Sequence[float]) -> int:
    """Index of the closest AP; equidistant APs resolve to the lowest index."""
    d2 = squared_distances(dep.ap_positions, np.asarray(p, dtype=float))[0]
    return int(np.argmin(d2))  # argmin returns the first minimum


def aps_by_distance(dep: Deployment, p: Sequence[float]) -> np.ndarray:
    d2 = squared_distances(dep.ap_positions, np.asarray(p, dtype=float))[0]
    return np.argsort(d2, kind="stable")


def boundary_points(r: Rectangle, step: float) -> list[Point]:
    """Perimeter samples spaced at most ``step`` apart, counter-clockwise from the lower-left corner."""
    return [as_point(p) for p in boundary_array(r, step)]


def boundary_array(r: Rectangle, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError(f"boundary step must be positive, got {step}")
    if step > min(r.width, r.height) * (1 + 1e-12):
        raise ValueError(f"boundary step {step} exceeds the shorter side {min(r.width, r.height)}")
    nx = max(1, math.ceil(r.width / step - 1e-9))
    ny = max(1, math.ceil(r.height / step - 1e-9))
    xs = np.linspace(r.xmin, r.xmax, nx + 1)
    ys = np.linspace(r.ymin, r.ymax, ny + 1)
    bottom = np.column_stack([xs[:-1], np.full(nx, r.ymin)])
    right = np.column_stack([np.full(ny, r.xmax), ys[:-1]])
    top = np.column_stack([xs[::-1][:-1], np.full(nx, r.ymax)])
    left = np.column_stack([np.full(ny, r.xmin), ys[::-1][:-1]])
    return np.vstack([bottom, right, top, left])


def partition_centroids(r: Rectangle, nx: int, ny: int) -> list[Point]:
    """Centroids of an ``nx`` by ``ny`` uniform partition, x varying fastest."""
    return [as_point(p) for p in centroid_array(r, nx, ny)]


def centroid_array(r: Rectangle, nx: int, ny: int) -> np.ndarray:
    if nx < 1 or ny < 1:
        raise ValueError("partition counts must be >= 1")
    xs = r.xmin + (np.arange(nx) + 0.5) * (r.width / nx)
    ys = r.ymin + (np.arange(ny) + 0.5) * (r.height / ny)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def node_grid(r: Rectangle, resolution: float) -> np.ndarray:
    """Grid vertices (edges included) with spacing at most ``resolution``."""
    if not resolution > 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    nx = max(1, math.ceil(r.width / resolution - 1e-9))
    ny = max(1, math.ceil(r.height / resolution - 1e-9))
    xs = np.linspace(r.xmin, r.xmax, nx + 1)
    ys = np.linspace(r.ymin, r.ymax, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def random_deployment(rng: np.random.Generator, K: int, coverage: Rectangle, M: int = 8) -> Deployment:
    """APs uniform over the coverage rectangle."""
    lo = np.array([coverage.xmin, coverage.ymin])
    hi = np.array([coverage.xmax, coverage.ymax])
    return Deployment(rng.uniform(lo, hi, size=(K, 2)), M, coverage)


def random_region(rng: np.random.Generator, coverage: Rectangle, side: float) -> Rectangle:
    """A ``side`` x ``side`` square whose center is uniform over the positions keeping it inside ``coverage``."""
    if side > coverage.width or side > coverage.height:
        raise InfeasibleGeometryError(f"a {side} m region cannot fit in a {coverage.width}x{coverage.height} coverage area")
    lo = np.array([coverage.xmin + side / 2, coverage.ymin + side / 2])
    hi = np.array([coverage.xmax - side / 2, coverage.ymax - side / 2])
    return Rectangle.square(rng.uniform(lo, hi), side)
