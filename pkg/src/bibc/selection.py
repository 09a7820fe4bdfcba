"""Max-min CE and CE-reader pair selection over the BD uncertainty region.

Single CE (all other APs read): for each candidate t, minimize

    f_t(x, y) = (1 / d_t^2) * sum_{r != t} 1 / d_r^2

over the region with multi-start projected gradient descent, then keep the t with
the largest minimum.  CE-reader pair: the round-trip gain 1/(d_t^2 d_r^2) is
minimized on the region boundary (log d_t + log d_r is subharmonic), so pairs are
scored on a boundary grid and pruned to the ``kappa`` best partners of the AP
nearest the region centroid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    Deployment,
    DegenerateGeometryError,
    Point,
    Rectangle,
    aps_by_distance,
    as_point,
    boundary_array,
    centroid_array,
    inverse_square_gains,
    node_grid,
)

MAX_HALVINGS = 20


@dataclass(frozen=True)
class PgdSettings:
    learning_rate: float = 2000.0
    max_iterations: int = 100
    convergence_tol: float = 1e-6  # metres of step length
    starts: tuple[int, int] = (5, 5)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if min(self.starts) < 1:
            raise ValueError("start partition counts must be >= 1")


@dataclass(frozen=True)
class CeSelection:
    ce_index: int
    worst_point: Point
    worst_value: float


@dataclass(frozen=True)
class PairSelection:
    ce_index: int
    reader_index: int
    worst_point: Point
    worst_value: float
    candidates: tuple[int, ...] = ()
    kappa: int | None = None

    @property
    def pair(self) -> frozenset:
        return frozenset((self.ce_index, self.reader_index))


@dataclass(frozen=True)
class GridResult:
    point: Point
    value: float
    n_points: int


@dataclass
class PgdTrace:
    start: Point
    points: list = field(default_factory=list)
    values: list = field(default_factory=list)

    @property
    def end(self) -> Point:
        return as_point(self.points[-1])

    @property
    def value(self) -> float:
        return self.values[-1]


def opc1_values(dep: Deployment, t: int, pts: np.ndarray, strict: bool = True) -> np.ndarray:
    """Vectorized single-CE objective at every row of ``pts``."""
    u = inverse_square_gains(dep.ap_positions, pts, strict=strict)
    with np.errstate(invalid="ignore"):
        return u[:, t] * (u.sum(axis=1) - u[:, t])


def opc1_objective(dep: Deployment, t: int, p) -> tuple[float, np.ndarray]:
    """Value and analytic gradient of f_t at ``p``.

    With u_k = 1/D_k, D_k = |p - a_k|^2: grad u_k = -2 (p - a_k) u_k^2, and
    grad f = grad(u_t) * S + u_t * sum_{r != t} grad(u_r).
    """
    p = np.asarray(p, dtype=float)
    diff = p[None, :] - dep.ap_positions
    d2 = np.einsum("kc,kc->k", diff, diff)
    if np.any(d2 == 0.0):
        raise DegenerateGeometryError(f"point {tuple(p)} coincides with an AP")
    u = 1.0 / d2
    grad_u = -2.0 * diff * (u * u)[:, None]
    others = np.ones(dep.K, dtype=bool)
    others[t] = False
    s = u[others].sum()
    value = u[t] * s
    grad = grad_u[t] * s + u[t] * grad_u[others].sum(axis=0)
    return float(value), grad


def pgd_descend(dep: Deployment, t: int, region: Rectangle, start, settings: PgdSettings = PgdSettings()) -> PgdTrace:
    """One projected-gradient run; a step that raises the objective is halved up to 20 times."""
    p = region.clamp(np.asarray(start, dtype=float))
    value, grad = opc1_objective(dep, t, p)
    trace = PgdTrace(as_point(p), [p.copy()], [value])
    for _ in range(settings.max_iterations):
        lr = settings.learning_rate
        for _ in range(MAX_HALVINGS + 1):
            cand = region.clamp(p - lr * grad)
            try:
                cand_value, cand_grad = opc1_objective(dep, t, cand)
            except DegenerateGeometryError:
                cand_value = math.inf
            if cand_value <= value:
                break
            lr *= 0.5
        else:
            break  # no descent direction inside the box
        step = float(np.linalg.norm(cand - p))
        p, value, grad = cand, cand_value, cand_grad
        trace.points.append(p.copy())
        trace.values.append(value)
        if step < settings.convergence_tol:
            break
    return trace


def pgd_minimize(dep: Deployment, t: int, region: Rectangle, settings: PgdSettings = PgdSettings()) -> CeSelection:
    """Multi-start PGD from the centroids of a uniform partition; best endpoint wins."""
    best = None
    for start in centroid_array(region, *settings.starts):
        try:
            trace = pgd_descend(dep, t, region, start, settings)
        except DegenerateGeometryError:
            continue  # start exactly on an AP
        if best is None or trace.value < best.value:
            best = trace
    if best is None:
        raise DegenerateGeometryError("every PGD start coincides with an AP")
    return CeSelection(t, best.end, best.value)


def _pair_values(dep: Deployment, t: int, r: int, pts: np.ndarray) -> np.ndarray:
    u = inverse_square_gains(dep.ap_positions[[t, r]], pts, strict=False)
    return u[:, 0] * u[:, 1]


def grid_search_min(dep: Deployment, target, region: Rectangle, resolution: float, boundary_only: bool | None = None) -> GridResult:
    """Brute-force minimum over a uniform grid.

    ``target`` is a CE index (single-CE objective, full 2-D vertex grid by default) or a
    ``(t, r)`` pair (pair objective, boundary grid by default).  Grid points sitting on an
    AP evaluate to +inf and so never win.
    """
    is_pair = isinstance(target, (tuple, list))
    if boundary_only is None:
        boundary_only = is_pair
    if boundary_only:
        pts = boundary_array(region, min(resolution, region.width, region.height))
    else:
        pts = node_grid(region, resolution)
    if is_pair:
        t, r = target
        if t == r:
            raise ValueError("CE and reader must differ")
        vals = _pair_values(dep, t, r, pts)
    else:
        vals = opc1_values(dep, int(target), pts, strict=False)
    i = int(np.nanargmin(vals))
    return GridResult(as_point(pts[i]), float(vals[i]), len(pts))


def ce_candidates(dep: Deployment, region: Rectangle, settings: PgdSettings = PgdSettings()) -> list[CeSelection]:
    """Worst point and value m_t for every AP as the single CE."""
    return [pgd_minimize(dep, t, region, settings) for t in range(dep.K)]


def select_ce(dep: Deployment, region: Rectangle, settings: PgdSettings = PgdSettings()) -> CeSelection:
    cands = ce_candidates(dep, region, settings)
    return max(cands, key=lambda c: c.worst_value)  # max keeps the first (lowest index) on ties


def default_boundary_step(region: Rectangle) -> float:
    return region.perimeter / 400


class BoundaryScorer:
    """Pair objectives on a fixed boundary grid, shared by every pair evaluated for one region."""

    def __init__(self, dep: Deployment, region: Rectangle, step: float | None = None):
        self.dep = dep
        self.region = region
        self.step = default_boundary_step(region) if step is None else step
        self.points = boundary_array(region, self.step)
        self.gains = inverse_square_gains(dep.ap_positions, self.points, strict=False)

    def worst(self, t: int, r: int) -> tuple[float, Point]:
        vals = self.gains[:, t] * self.gains[:, r]
        i = int(np.argmin(vals))
        return float(vals[i]), as_point(self.points[i])

    def worst_values(self, t: int) -> np.ndarray:
        """m_{r,t} for every r (entry t is meaningless)."""
        return (self.gains[:, t : t + 1] * self.gains).min(axis=0)

    def all_pairs(self) -> np.ndarray:
        """Symmetric ``(K, K)`` matrix of pair worst values, diagonal set to -inf."""
        K = self.dep.K
        out = np.full((K, K), -np.inf)
        for t in range(K):
            col = self.worst_values(t)
            out[t, t + 1 :] = col[t + 1 :]
            out[t + 1 :, t] = col[t + 1 :]
        return out

    def selection(self, t: int, r: int, candidates=(), kappa=None) -> PairSelection:
        value, point = self.worst(t, r)
        return PairSelection(t, r, point, value, tuple(candidates), kappa)


def select_pair(dep: Deployment, region: Rectangle, kappa: int = 2, boundary_step: float | None = None,
                scorer: BoundaryScorer | None = None) -> PairSelection:
    """Kappa-pruned CE-reader pair search.

    1. t = AP nearest the region centroid.
    2. Score m_{r,t} on the boundary grid for every r != t; keep the ``kappa`` best r.
    3. S = {t} plus those readers.
    4. Score every remaining pair inside S.
    5. Return the pair with the largest worst-case value.

    Ties keep the earlier candidate: readers by ascending index in step 2, pairs in
    the enumeration order of S in step 5.  Within a returned pair the element that
    appears first in S is reported as the CE.
    """
    K = dep.K
    if not 1 <= kappa <= K - 1:
        raise ValueError(f"kappa must be in [1, {K - 1}], got {kappa}")
    scorer = scorer or BoundaryScorer(dep, region, boundary_step)
    t = int(aps_by_distance(dep, region.center)[0])
    m = scorer.worst_values(t)
    others = np.array([r for r in range(K) if r != t])
    order = others[np.argsort(-m[others], kind="stable")]
    S = [t] + [int(r) for r in order[:kappa]]
    best = None
    for i, a in enumerate(S):
        for b in S[i + 1 :]:
            value = m[b] if a == t else scorer.worst(a, b)[0]
            if best is None or value > best[0]:
                best = (value, a, b)
    return scorer.selection(best[1], best[2], S, kappa)


def exhaustive_pair(dep: Deployment, region: Rectangle, boundary_step: float | None = None,
                    scorer: BoundaryScorer | None = None) -> PairSelection:
    """Max-min over all K(K-1)/2 pairs; the oracle for ``select_pair``."""
    scorer = scorer or BoundaryScorer(dep, region, boundary_step)
    table = scorer.all_pairs()
    i = int(np.argmax(table))  # row-major first max: lowest (t, r)
    t, r = divmod(i, dep.K)
    return scorer.selection(t, r, tuple(range(dep.K)), None)


def benchmark_pair(dep: Deployment, region: Rectangle, boundary_step: float | None = None,
                   scorer: BoundaryScorer | None = None) -> PairSelection:
    """The two APs nearest the region centroid."""
    scorer = scorer or BoundaryScorer(dep, region, boundary_step)
    t, r = (int(k) for k in aps_by_distance(dep, region.center)[:2])
    return scorer.selection(t, r, (t, r), None)


def snr_gap_db(metric_a: float, metric_b: float) -> float:
    """Transmit-SNR advantage of metric ``a`` over ``b``: at a fixed target Pe the required SNR scales as 1/metric."""
    if not (metric_a > 0 and metric_b > 0):
        raise ValueError("metrics must be positive")
    return 10.0 * math.log10(metric_a / metric_b)
