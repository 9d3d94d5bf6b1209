"""Command-line entry point: ``uvnlos run --config scene.json --mode sweep-range --out results/``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from . import __version__
from .channel import total_energy
from .config import PRESETS, ScenarioConfig, build_config, emit_config, load_config
from .errors import ConfigError, DomainError, ParseError, UvnlosError, ValidationError
from .mcpt import trace
from .report import ReportRow, write_csv, write_plot, write_summary

MODES = ("analytic", "mcpt", "compare", "sweep-range", "sweep-offset")
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _nodes(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected three integers T,W,U") from None
    if len(parts) != 3 or min(parts) < 2:
        raise argparse.ArgumentTypeError("expected three integers T,W,U, each >= 2")
    return parts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uvnlos", description="UV NLOS channel with one cuboid obstacle")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="evaluate a scenario and write result.csv, summary.json, plot.svg")
    run.add_argument("--config", required=True, help="JSON scenario file")
    run.add_argument("--mode", choices=MODES, default="analytic")
    run.add_argument("--out", required=True, help="output directory (created if missing)")
    run.add_argument("--seed", type=int, help="photon-tracing seed (overrides the config)")
    run.add_argument("--photons", type=float, help="photon count, e.g. 1e7 (overrides the config)")
    run.add_argument("--nodes", type=_nodes, metavar="T,W,U",
                     help="quadrature nodes along tau, varpi and vartheta")
    run.add_argument("--no-plot", action="store_true", help="skip plot.svg")

    emit = sub.add_parser("preset", help="print a preset as a self-contained config document")
    emit.add_argument("name", choices=sorted(PRESETS))
    return parser


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    problems = []
    mc = cfg.mcpt
    try:
        if args.seed is not None:
            mc = dataclasses.replace(mc, rng_seed=args.seed)
        if args.photons is not None:
            if args.photons != int(args.photons):
                raise DomainError("--photons must be an integer")
            mc = dataclasses.replace(mc, n_photons=int(args.photons))
    except DomainError as exc:
        problems.append(str(exc))
    quad = cfg.quadrature
    if args.nodes is not None:
        t, w, u = args.nodes
        quad = dataclasses.replace(quad, n_tau=t, n_varpi=w, n_vartheta=u)
    if problems:
        raise ValidationError(problems)
    return dataclasses.replace(cfg, mcpt=mc, quadrature=quad)


def _analytic_row(cfg: ScenarioConfig, range_m: float, obstacle) -> ReportRow:
    geom = cfg.geometry.replace(range_r=range_m)
    res = total_energy(geom, cfg.atmosphere, obstacle, cfg.surface, cfg.quadrature,
                       blockage=cfg.blockage, exact_omega=cfg.exact_omega)
    return ReportRow(range_m=range_m, x_o_m=obstacle.center_x if obstacle else None,
                     pl_total_db=res.path_loss_db, pl_sca_db=res.pl_sca_db, pl_ref_db=res.pl_ref_db,
                     q_sca_j=res.q_sca, q_ref_j=res.q_ref, blocked_fraction=res.blocked_fraction,
                     diagnostics=res.diagnostics)


def _add_mcpt(row: ReportRow, cfg: ScenarioConfig, obstacle) -> ReportRow:
    geom = cfg.geometry.replace(range_r=row.range_m)
    est = trace(geom, cfg.atmosphere, obstacle, cfg.surface, cfg.mcpt)
    row.mcpt_pl_db = est.path_loss_db
    row.mcpt_stderr_db = est.stderr_db
    row.diagnostics = {**row.diagnostics, "mcpt_n_contributing": est.n_contributing,
                       "mcpt_n_photons": est.n_photons, "mcpt_q_r_j": est.q_r_hat,
                       "mcpt_std_error_j": est.std_error}
    if est.insufficient:
        row.status = "insufficient-samples"
    if row.pl_total_db is not None and math.isfinite(row.pl_total_db) and math.isfinite(est.path_loss_db):
        row.delta_db = row.pl_total_db - est.path_loss_db
    return row


def _points(cfg: ScenarioConfig, mode: str):
    """(range, obstacle) pairs to evaluate."""
    r0 = cfg.geometry.range_r
    if mode in ("analytic", "mcpt"):
        return [(r0, cfg.obstacle)]
    if mode == "sweep-offset":
        if cfg.obstacle is None:
            raise ValidationError(["sweep-offset needs an obstacle"])
        if not cfg.sweep.offsets:
            raise ValidationError(["sweep.offsets: empty"])
        out = []
        for x in cfg.sweep.offsets:
            try:
                out.append((r0, cfg.obstacle.replace(center_x=x)))
            except DomainError as exc:
                out.append((r0, exc))
        return out
    ranges = cfg.sweep.ranges or [r0]
    out = []
    for r in ranges:
        try:
            out.append((r, cfg.obstacle_for(r)))
        except DomainError as exc:
            out.append((r, exc))
    return out


def evaluate(cfg: ScenarioConfig, mode: str) -> list[ReportRow]:
    """Rows for ``mode``; a failing point becomes a row whose status holds the error."""
    rows = []
    for r, obstacle in _points(cfg, mode):
        try:
            if isinstance(obstacle, Exception):
                raise obstacle
            if mode == "mcpt":
                row = _add_mcpt(ReportRow(range_m=r, x_o_m=obstacle.center_x if obstacle else None),
                                cfg, obstacle)
            else:
                row = _analytic_row(cfg, r, obstacle)
                if mode == "compare":
                    row = _add_mcpt(row, cfg, obstacle)
        except (UvnlosError, ValueError) as exc:
            row = ReportRow(range_m=r, status=f"error: {exc}")
        rows.append(row)
    return rows


def _run(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ParseError as exc:
        print(f"uvnlos: cannot parse {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"uvnlos: invalid configuration {args.config}:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, OSError) as exc:
        print(f"uvnlos: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        rows = evaluate(cfg, args.mode)
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"uvnlos: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    write_csv(out / "result.csv", rows)
    failed = [r for r in rows if r.status.startswith("error")]
    summary = {
        "version": __version__,
        "mode": args.mode,
        "preset": cfg.preset,
        "config": emit_config(cfg),
        "points": [{"range_m": r.range_m, "x_o_m": r.x_o_m, "status": r.status,
                    "path_loss_db": r.pl_total_db, "mcpt_path_loss_db": r.mcpt_pl_db,
                    "diagnostics": r.diagnostics} for r in rows],
        "n_failed": len(failed),
    }
    write_summary(out / "summary.json", summary)
    if not args.no_plot:
        write_plot(out / "plot.svg", rows, args.mode, title=cfg.preset or "")
    for r in failed:
        print(f"uvnlos: point r={r.range_m} failed: {r.status}", file=sys.stderr)
    return EXIT_PARTIAL if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "preset":
        doc = emit_config(build_config({"preset": args.name}))
        print(json.dumps(doc, indent=2))
        return 0
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
