"""Command-line entry point: ``bibc <subcommand> ...``.

Exit codes: 0 success, 2 invalid arguments/config, 3 infeasible geometry.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .channel import make_probing_signal
from .detector import DetectorConfig, closed_form_pe, monte_carlo_ber
from .experiments import (
    emit_heatmap,
    load_campaign_config,
    pe_curve,
    run_campaign,
    write_campaign,
    write_curves_csv,
    write_heatmap_csv,
)
from .geometry import Deployment, InfeasibleGeometryError, Rectangle, random_deployment
from .io import InvalidConfigError, load_deployment
from .selection import (
    PgdSettings,
    benchmark_pair,
    ce_candidates,
    exhaustive_pair,
    select_pair,
    snr_gap_db,
)

EXIT_INVALID = 2
EXIT_GEOMETRY = 3


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _points(text: str) -> list[list[float]]:
    """``"x1,y1;x2,y2;..."``"""
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            xy = [float(v) for v in chunk.split(",")]
            if len(xy) != 2:
                raise argparse.ArgumentTypeError(f"bad point {chunk!r}")
            pts.append(xy)
    return pts


def _snr_grid(args) -> list[float]:
    if args.snr_db:
        return _floats(args.snr_db)
    start, stop, step = args.snr_range
    n = int(round((stop - start) / step))
    return np.round(start + step * np.arange(n + 1), 10).tolist()


def _add_deployment_args(p: argparse.ArgumentParser, region: bool = True):
    g = p.add_argument_group("deployment")
    g.add_argument("--deployment", type=Path, help="YAML deployment file (may carry a region)")
    g.add_argument("--aps", type=_points, help='explicit AP coordinates "x1,y1;x2,y2;..."')
    g.add_argument("-K", "--K", type=int, default=20, help="number of random APs")
    g.add_argument("--area", type=float, default=30.0, help="side of the square coverage area (m)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-M", "--M", type=int, default=8, help="antennas per AP")
    if region:
        g.add_argument("--region-center", type=float, nargs=2, metavar=("X", "Y"))
        g.add_argument("--region-side", type=float, default=5.0)


def _deployment(args) -> tuple[Deployment, Rectangle | None]:
    region = None
    if args.deployment is not None:
        dep, region = load_deployment(args.deployment)
    else:
        cov = Rectangle.square((args.area / 2, args.area / 2), args.area)
        if args.aps is not None:
            dep = Deployment(args.aps, args.M, cov)
        else:
            dep = random_deployment(np.random.default_rng(args.seed), args.K, cov, args.M)
    if getattr(args, "region_center", None) is not None:
        region = Rectangle.square(args.region_center, args.region_side)
    return dep, region


def _require_region(region):
    if region is None:
        raise InvalidConfigError("a region is required (--region-center or a region entry in the deployment file)")
    return region


def _write_text(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_detect_sim(args) -> int:
    dep, _ = _deployment(args)
    bd = args.bd
    cfg = DetectorConfig(args.gamma0, args.gamma1, tuple(args.ce))
    lines = ["snr_db,mc_ber,ci_halfwidth,closed_form_pe"]
    for i, s in enumerate(_snr_grid(args)):
        phi = make_probing_signal(dep.M, args.tau_d, 10 ** (s / 10) / args.tau_d)
        mc = monte_carlo_ber(dep, bd, cfg, phi, args.trials, rng_seed=args.seed * 1_000_003 + i,
                             channel_seed=args.seed)
        pe = closed_form_pe(dep, bd, cfg, phi).pe
        lines.append(f"{s!r},{mc.ber!r},{mc.halfwidth!r},{pe!r}")
    _write_text("\n".join(lines) + "\n", args.out)
    return 0


def _pgd_settings(args) -> PgdSettings:
    return PgdSettings(args.lr, args.max_iter, args.tol, tuple(args.starts))


def cmd_select_ce(args) -> int:
    dep, region = _deployment(args)
    region = _require_region(region)
    cands = ce_candidates(dep, region, _pgd_settings(args))
    best = max(cands, key=lambda c: c.worst_value)
    report = {
        "problem": "single CE, all other APs read",
        "region": {"center": list(region.center), "width": region.width, "height": region.height},
        "ce_index": best.ce_index,
        "worst_point": list(best.worst_point),
        "worst_value": best.worst_value,
        "candidates": [
            {"ap": c.ce_index, "worst_point": list(c.worst_point), "worst_value": c.worst_value} for c in cands
        ],
    }
    _write_text(yaml.safe_dump(report, sort_keys=False), args.out)
    return 0


def _pair_dict(sel) -> dict:
    return {
        "ce_index": sel.ce_index,
        "reader_index": sel.reader_index,
        "worst_point": list(sel.worst_point),
        "worst_value": sel.worst_value,
    }


def cmd_select_pair(args) -> int:
    dep, region = _deployment(args)
    region = _require_region(region)
    chosen = select_pair(dep, region, args.kappa, args.boundary_step)
    bench = benchmark_pair(dep, region, args.boundary_step)
    report = {
        "problem": "CE-reader pair",
        "region": {"center": list(region.center), "width": region.width, "height": region.height},
        "kappa": args.kappa,
        "candidate_set": list(chosen.candidates),
        "selected": _pair_dict(chosen),
        "benchmark": _pair_dict(bench),
        "gain_over_benchmark_db": snr_gap_db(chosen.worst_value, bench.worst_value),
    }
    if args.exhaustive:
        report["exhaustive"] = _pair_dict(exhaustive_pair(dep, region, args.boundary_step))
    _write_text(yaml.safe_dump(report, sort_keys=False), args.out)
    return 0


def cmd_heatmap(args) -> int:
    dep, region = _deployment(args)
    region = _require_region(region)
    grid = emit_heatmap(dep, region, args.ce, args.cells, args.snr_at)
    write_heatmap_csv(args.out, grid)
    return 0


def cmd_pe_curve(args) -> int:
    dep, region = _deployment(args)
    region = _require_region(region)
    snr = _snr_grid(args)
    opt = pe_curve(dep, region, select_pair(dep, region, min(args.kappa, dep.K - 1), args.boundary_step), snr,
                   args.gamma0, args.gamma1)
    bench = pe_curve(dep, region, benchmark_pair(dep, region, args.boundary_step), snr, args.gamma0, args.gamma1)
    write_curves_csv(args.out, snr, {"pe_optimal": opt.pe, "pe_benchmark": bench.pe})
    return 0


def cmd_campaign(args) -> int:
    cfg = load_campaign_config(args.config)
    result = run_campaign(cfg, workers=args.workers)
    for path in write_campaign(result, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bibc", description="Bistatic backscatter AP selection toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def snr_args(p, default_range):
        p.add_argument("--snr-db", help="comma-separated transmit SNR values (dB)")
        p.add_argument("--snr-range", type=float, nargs=3, default=default_range, metavar=("START", "STOP", "STEP"))

    p = sub.add_parser("detect-sim", help="Monte-Carlo BER vs closed-form Pe")
    _add_deployment_args(p, region=False)
    p.add_argument("--bd", type=float, nargs=2, required=True, metavar=("X", "Y"))
    p.add_argument("--ce", type=int, nargs="+", default=[0])
    p.add_argument("--gamma0", type=float, default=0.0)
    p.add_argument("--gamma1", type=float, default=1.0)
    p.add_argument("--tau-d", type=int, default=8)
    p.add_argument("--trials", type=int, default=10_000)
    snr_args(p, [30.0, 50.0, 2.0])
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_detect_sim)

    for name, func, help_ in (("select-ce", cmd_select_ce, "optimal single CE (PGD)"),
                              ("select-pair", cmd_select_pair, "optimal CE-reader pair")):
        p = sub.add_parser(name, help=help_)
        _add_deployment_args(p)
        p.add_argument("--out", type=Path)
        if name == "select-ce":
            p.add_argument("--lr", type=float, default=2000.0)
            p.add_argument("--max-iter", type=int, default=100)
            p.add_argument("--tol", type=float, default=1e-6)
            p.add_argument("--starts", type=int, nargs=2, default=[5, 5], metavar=("NX", "NY"))
        else:
            p.add_argument("--kappa", type=int, default=2)
            p.add_argument("--boundary-step", type=float)
            p.add_argument("--exhaustive", action="store_true", help="also report the exhaustive optimum")
        p.set_defaults(func=func)

    p = sub.add_parser("heatmap", help="single-CE objective over the region (CSV)")
    _add_deployment_args(p)
    p.add_argument("--ce", type=int, required=True)
    p.add_argument("--cells", type=int, default=50)
    p.add_argument("--snr-at", type=float, help="also emit Pe at this transmit SNR (dB)")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("pe-curve", help="worst-case Pe of the selected pair and the benchmark (CSV)")
    _add_deployment_args(p)
    p.add_argument("--kappa", type=int, default=2)
    p.add_argument("--boundary-step", type=float)
    p.add_argument("--gamma0", type=float, default=0.0)
    p.add_argument("--gamma1", type=float, default=1.0)
    snr_args(p, [20.0, 80.0, 0.25])
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_pe_curve)

    p = sub.add_parser("campaign", help="averaged optimal-vs-benchmark campaign")
    p.add_argument("--config", type=Path, required=True, help="YAML campaign config")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_campaign)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InfeasibleGeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (InvalidConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
