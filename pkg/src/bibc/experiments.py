"""Seeded Monte-Carlo campaigns comparing the pruned CE-reader pair with the centroid benchmark.

Every deployment draw is seeded from ``(seed, K, index)``, so results are identical
for any worker count.  Outputs are CSV (curves, heatmaps, per-instance values) and a
YAML summary.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .channel import make_probing_signal
from .detector import DetectorConfig, closed_form_pe, pe_from_metric
from .geometry import (
    Deployment,
    InfeasibleGeometryError,
    Rectangle,
    as_point,
    centroid_array,
    random_deployment,
    random_region,
)
from .io import InvalidConfigError
from .selection import (
    BoundaryScorer,
    CeSelection,
    PairSelection,
    benchmark_pair,
    opc1_values,
    select_pair,
)

log = logging.getLogger(__name__)


def default_snr_grid() -> tuple[float, ...]:
    return tuple(np.round(np.arange(20.0, 80.0 + 1e-9, 0.25), 10).tolist())


@dataclass(frozen=True)
class CampaignConfig:
    k_values: tuple[int, ...] = (20, 30, 50)
    coverage_side: float = 40.0
    region_side: float = 10.0
    kappas: tuple[int, ...] = (2, 6)
    M: int = 8
    gamma0: float = 0.0
    gamma1: float = 1.0
    snr_db: tuple[float, ...] = field(default_factory=default_snr_grid)
    n_deployments: int = 2000
    seed: int = 0
    target_pe: float = 1e-3
    boundary_step: float | None = None

    def __post_init__(self):
        for name in ("k_values", "kappas", "snr_db"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.k_values or min(self.k_values) < 2:
            raise InvalidConfigError(f"every K must be >= 2, got {self.k_values}")
        if not self.kappas or min(self.kappas) < 1:
            raise InvalidConfigError(f"kappa values must be >= 1, got {self.kappas}")
        if self.n_deployments < 1:
            raise InvalidConfigError("n_deployments must be >= 1")
        if self.M < 1:
            raise InvalidConfigError("M must be >= 1")
        if not self.gamma1 > self.gamma0:
            raise InvalidConfigError("need gamma1 > gamma0")
        snr = np.asarray(self.snr_db, dtype=float)
        if snr.size < 2 or np.any(np.diff(snr) <= 0):
            raise InvalidConfigError("snr_db grid must be strictly increasing with >= 2 points")
        if not 0 < self.target_pe < 0.5:
            raise InvalidConfigError("target_pe must lie in (0, 0.5)")
        if not (self.coverage_side > 0 and self.region_side > 0):
            raise InvalidConfigError("coverage and region sides must be positive")
        if self.region_side > self.coverage_side:
            raise InfeasibleGeometryError(
                f"{self.region_side} m region does not fit in {self.coverage_side} m coverage"
            )

    @property
    def coverage(self) -> Rectangle:
        half = self.coverage_side / 2
        return Rectangle.square((half, half), self.coverage_side)

    def effective_kappas(self, K: int) -> tuple[int, ...]:
        return tuple(dict.fromkeys(min(k, K - 1) for k in self.kappas))


def load_campaign_config(path) -> CampaignConfig:
    """Read a YAML mapping whose keys are ``CampaignConfig`` field names.

    ``snr_db`` may be a list or ``{start, stop, step}`` (stop inclusive).
    """
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfigError("campaign config must be a mapping")
    known = set(CampaignConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
    snr = data.get("snr_db")
    if isinstance(snr, dict):
        try:
            n = int(round((snr["stop"] - snr["start"]) / snr["step"]))
            data["snr_db"] = tuple(np.round(snr["start"] + snr["step"] * np.arange(n + 1), 10).tolist())
        except (KeyError, TypeError, ZeroDivisionError) as exc:
            raise InvalidConfigError(f"bad snr_db range {snr!r}") from exc
    try:
        return CampaignConfig(**data)
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from exc


def sample_instance(cfg: CampaignConfig, K: int, index: int) -> tuple[Deployment, Rectangle]:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, K, index]))
    dep = random_deployment(rng, K, cfg.coverage, cfg.M)
    region = random_region(rng, cfg.coverage, cfg.region_side)
    return dep, region


@dataclass(frozen=True)
class InstanceOutcome:
    index: int
    region_center: tuple[float, float]
    benchmark: PairSelection
    optimal: tuple[PairSelection, ...]  # one per kappa


def evaluate_instance(cfg: CampaignConfig, K: int, index: int) -> InstanceOutcome:
    dep, region = sample_instance(cfg, K, index)
    scorer = BoundaryScorer(dep, region, cfg.boundary_step)
    bench = benchmark_pair(dep, region, scorer=scorer)
    opt = tuple(select_pair(dep, region, kappa, scorer=scorer) for kappa in cfg.effective_kappas(K))
    return InstanceOutcome(index, tuple(region.center), bench, opt)


def _evaluate_task(args):
    return evaluate_instance(*args)


def average_pe(snr_db: Sequence[float], metrics: np.ndarray, M: int, gamma_gap: float) -> np.ndarray:
    """Pointwise mean over instances of the worst-case Pe at each transmit SNR."""
    snr = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    pe = pe_from_metric(np.asarray(metrics)[None, :], snr[:, None], M, gamma_gap)
    return pe.mean(axis=1)


def snr_at_pe(snr_db: Sequence[float], pe: Sequence[float], target: float) -> float:
    """Transmit SNR where a decreasing Pe curve crosses ``target``, by linear interpolation of log10 Pe.

    Returns NaN when the grid does not bracket the target.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.log10(np.asarray(pe, dtype=float))
    lt = math.log10(target)
    below = np.nonzero(logp <= lt)[0]
    if below.size == 0 or below[0] == 0:
        return math.nan
    j = below[0]
    x0, x1, y0, y1 = snr_db[j - 1], snr_db[j], logp[j - 1], logp[j]
    if y1 == y0:
        return float(x1)
    return float(x0 + (lt - y0) * (x1 - x0) / (y1 - y0))


def gap_at_pe(snr_db, pe_reference, pe_candidate, target: float) -> float:
    """SNR saving (dB) of the candidate curve over the reference at Pe = ``target``."""
    return snr_at_pe(snr_db, pe_reference, target) - snr_at_pe(snr_db, pe_candidate, target)


@dataclass
class KResult:
    K: int
    kappas: tuple[int, ...]
    outcomes: list[InstanceOutcome]
    pe_benchmark: np.ndarray
    pe_optimal: dict[int, np.ndarray]
    gaps_db: dict[int, float]

    @property
    def benchmark_values(self) -> np.ndarray:
        return np.array([o.benchmark.worst_value for o in self.outcomes])

    def optimal_values(self, kappa: int) -> np.ndarray:
        i = self.kappas.index(kappa)
        return np.array([o.optimal[i].worst_value for o in self.outcomes])


@dataclass
class CampaignResult:
    config: CampaignConfig
    per_k: dict[int, KResult]

    @property
    def snr_db(self) -> np.ndarray:
        return np.asarray(self.config.snr_db, dtype=float)

    def gap(self, K: int, kappa: int) -> float:
        return self.per_k[K].gaps_db[kappa]

    def summary(self) -> dict:
        cfg = self.config
        out = {"config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items() if k != "snr_db"}}
        out["config"]["snr_db"] = {"start": float(cfg.snr_db[0]), "stop": float(cfg.snr_db[-1]), "points": len(cfg.snr_db)}
        rows = {}
        for K, res in self.per_k.items():
            row = {}
            for kappa in res.kappas:
                opt, bench = res.optimal_values(kappa), res.benchmark_values
                row[f"kappa_{kappa}"] = {
                    "gap_db_at_target": _num(res.gaps_db[kappa]),
                    "snr_db_at_target": _num(snr_at_pe(cfg.snr_db, res.pe_optimal[kappa], cfg.target_pe)),
                    "fraction_improved": float(np.mean(opt > bench)),
                    "mean_instance_gap_db": float(np.mean(10 * np.log10(opt / bench))),
                }
            row["benchmark_snr_db_at_target"] = _num(snr_at_pe(cfg.snr_db, res.pe_benchmark, cfg.target_pe))
            rows[f"K_{K}"] = row
        out["results"] = rows
        return out


def _num(x: float):
    return None if math.isnan(x) else float(x)


def run_campaign(cfg: CampaignConfig, workers: int = 1) -> CampaignResult:
    per_k = {}
    for K in cfg.k_values:
        tasks = [(cfg, K, i) for i in range(cfg.n_deployments)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_evaluate_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            outcomes = [evaluate_instance(*t) for t in tasks]
        kappas = cfg.effective_kappas(K)
        gap = cfg.gamma1 - cfg.gamma0
        bench = np.array([o.benchmark.worst_value for o in outcomes])
        pe_bench = average_pe(cfg.snr_db, bench, cfg.M, gap)
        pe_opt, gaps = {}, {}
        for i, kappa in enumerate(kappas):
            vals = np.array([o.optimal[i].worst_value for o in outcomes])
            pe_opt[kappa] = average_pe(cfg.snr_db, vals, cfg.M, gap)
            gaps[kappa] = gap_at_pe(cfg.snr_db, pe_bench, pe_opt[kappa], cfg.target_pe)
        log.info("K=%d: gaps %s", K, gaps)
        per_k[K] = KResult(K, kappas, outcomes, pe_bench, pe_opt, gaps)
    return CampaignResult(cfg, per_k)


def _fmt(x) -> str:
    return repr(float(x))


def write_campaign(result: CampaignResult, outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for K, res in result.per_k.items():
        path = outdir / f"pe_curves_K{K}.csv"
        cols = {"pe_benchmark": res.pe_benchmark}
        cols.update({f"pe_optimal_kappa{k}": res.pe_optimal[k] for k in res.kappas})
        write_curves_csv(path, result.snr_db, cols)
        written.append(path)

        path = outdir / f"instances_K{K}.csv"
        header = ["index", "region_x", "region_y", "bench_ce", "bench_reader", "bench_worst"]
        for k in res.kappas:
            header += [f"opt_k{k}_ce", f"opt_k{k}_reader", f"opt_k{k}_worst"]
        lines = [",".join(header)]
        for o in res.outcomes:
            row = [str(o.index), _fmt(o.region_center[0]), _fmt(o.region_center[1]),
                   str(o.benchmark.ce_index), str(o.benchmark.reader_index), _fmt(o.benchmark.worst_value)]
            for sel in o.optimal:
                row += [str(sel.ce_index), str(sel.reader_index), _fmt(sel.worst_value)]
            lines.append(",".join(row))
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    path = outdir / "summary.yaml"
    path.write_text(yaml.safe_dump(result.summary(), sort_keys=False))
    written.append(path)
    return written


def write_curves_csv(path, snr_db: Sequence[float], columns: Mapping[str, Sequence[float]]) -> None:
    names = list(columns)
    lines = [",".join(["snr_db"] + names)]
    for i, s in enumerate(snr_db):
        lines.append(",".join([_fmt(s)] + [_fmt(columns[n][i]) for n in names]))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class HeatmapGrid:
    region: Rectangle
    nx: int
    ny: int
    points: np.ndarray  # (nx * ny, 2) cell centroids, x fastest
    values: np.ndarray  # single-CE objective per cell
    pe: np.ndarray | None = None

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.values))

    @property
    def cell_size(self) -> tuple[float, float]:
        return self.region.width / self.nx, self.region.height / self.ny

    def as_matrix(self) -> np.ndarray:
        return self.values.reshape(self.ny, self.nx)


def emit_heatmap(dep: Deployment, region: Rectangle, ce_index: int, resolution, transmit_snr_db: float | None = None,
                 gamma0: float = 0.0, gamma1: float = 1.0) -> HeatmapGrid:
    """Single-CE objective (all other APs reading) at the centroid of every cell.

    ``resolution`` is a cell count per axis or an ``(nx, ny)`` pair.  With a transmit
    SNR the matching worst-case Pe is attached per cell.
    """
    if not 0 <= ce_index < dep.K:
        raise ValueError(f"CE index {ce_index} out of range for K={dep.K}")
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    pts = centroid_array(region, int(nx), int(ny))
    vals = opc1_values(dep, ce_index, pts)
    pe = None
    if transmit_snr_db is not None:
        pe = pe_from_metric(vals, 10 ** (transmit_snr_db / 10), dep.M, gamma1 - gamma0)
    return HeatmapGrid(region, int(nx), int(ny), pts, vals, pe)


def write_heatmap_csv(path, grid: HeatmapGrid) -> None:
    header = ["x", "y", "objective"] + (["pe"] if grid.pe is not None else []) + ["is_min"]
    lines = [",".join(header)]
    amin = grid.argmin
    for i, (x, y) in enumerate(grid.points):
        row = [_fmt(x), _fmt(y), _fmt(grid.values[i])]
        if grid.pe is not None:
            row.append(_fmt(grid.pe[i]))
        row.append("1" if i == amin else "0")
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class PeCurve:
    snr_db: np.ndarray
    pe: np.ndarray
    label: str = ""


def pe_curve(dep: Deployment, region: Rectangle, selection, snr_db: Sequence[float],
             gamma0: float = 0.0, gamma1: float = 1.0, label: str = "") -> PeCurve:
    """Worst-case closed-form Pe versus transmit SNR, evaluated at the selection's worst point.

    A ``PairSelection`` uses its single reader; a ``CeSelection`` has every other AP reading.
    """
    if isinstance(selection, PairSelection):
        cfg = DetectorConfig(gamma0, gamma1, (selection.ce_index,), (selection.reader_index,))
    elif isinstance(selection, CeSelection):
        cfg = DetectorConfig(gamma0, gamma1, (selection.ce_index,))
    else:
        raise TypeError(f"unsupported selection {type(selection).__name__}")
    bd = as_point(selection.worst_point)
    M = dep.M
    pes = []
    for s in snr_db:
        phi = make_probing_signal(M, M, 10 ** (s / 10) / M)
        pes.append(closed_form_pe(dep, bd, cfg, phi).pe)
    return PeCurve(np.asarray(snr_db, dtype=float), np.array(pes), label)

