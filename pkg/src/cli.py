"""
Command-line front end: gabor-sections {sweep, gram-dump, kernel, fit, bounds, selftest}.

Exit codes: 0 success, 1 configuration error, 2 numerical failure. Every
failure is reported as one stderr line

    error code=<ClassName> exit=<n> message="<text>"
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import List, Optional

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .analysis_report import (
    SweepReport,
    bound_comparison,
    emit_report,
    fit_decay,
    write_envelope_csv,
    write_gram_csv,
    write_json,
    write_kernel_csv,
    write_rows_csv,
    write_sweep_csv,
)
from .config import RunConfig, resolve_workers
from .errors import ConfigError, GaborSectionsError, SingularResolvent, TooFewPoints
from .gram import GramSection, assemble_gram, cv_infty_norm, envelope_extract
from .kernel_projection import (
    ContourSpec,
    decay_fit,
    kernel_vector,
    lemma_bound_check,
    near_kernel_projection,
    resolvent_decay_norm,
)
from .oracles.selftest import run_selftest
from .pointsets import PointSet, enumerate_lattice_in_ball, relative_separation
from .spectrum import (
    EPS,
    GapReport,
    bessel_estimate,
    detect_gap,
    eigs_hermitian,
    floor_gap,
    sweep_section,
    widest_gap,
)
from .weights import subconvolutive_check, submultiplicative_check, tail_remainder

logger = logging.getLogger(__name__)

COMMANDS = ("sweep", "gram-dump", "kernel", "fit", "bounds", "selftest")

console = Console()


class ArgumentParser(argparse.ArgumentParser):
    """argparse, with usage errors raised as ConfigError (exit 1)"""

    def error(self, message):
        raise ConfigError("argv", message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="gabor-sections",
                            description="Finite sections of Gabor systems and their Riesz bounds")
    parser.add_argument("--config", help="TOML run description (defaults when omitted)")
    parser.add_argument("--workers", type=int, help="worker threads (0: one per core)")
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--seed", type=int, help="seed for randomized checks")
    parser.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    parser.add_argument("--csv-dir", help="mirror report tables as CSV into this directory")
    parser.add_argument("--print-config", action="store_true",
                        help="print the fully-defaulted configuration as TOML and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("command", nargs="?", choices=COMMANDS)
    return parser


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_toml(args.config) if args.config else RunConfig.defaults()
    output = config.output
    if args.out:
        output = replace(output, dir=args.out)
    if args.plot:
        output = replace(output, plot=True)
    if args.csv_dir:
        output = replace(output, csv_dir=args.csv_dir)
    run = config.run if args.seed is None else replace(config.run, seed=args.seed)
    config = replace(config, output=output, run=run)
    config.validate()
    return config


# --- pipeline pieces shared by the commands ---

def _pointset(config: RunConfig, radius: float) -> PointSet:
    lattice = config.lattice_spec()
    if lattice is None:
        return config.point_cloud(radius)
    return enumerate_lattice_in_ball(lattice, radius, max_points=config.run.max_points)


def _gap(config: RunConfig, eigs: np.ndarray) -> GapReport:
    top = float(eigs[-1])
    section = config.gap
    if section.mode == "widest":
        return widest_gap(eigs, section.lower * top, section.upper * top, section.min_ratio)
    if section.mode == "floor":
        return floor_gap(eigs)
    return detect_gap(eigs, section.threshold * top)


def _fits(config: RunConfig, sweep) -> tuple:
    fits, skipped = [], {}
    for model in config.fit.models:
        try:
            fits.append(fit_decay(sweep, model, config.fit.b))
        except TooFewPoints as exc:
            logger.warning("%s fit skipped: %s", model, exc)
            skipped[model] = str(exc)
    return fits, skipped


def _section(config: RunConfig, radius: float, workers: int) -> GramSection:
    ps = _pointset(config, radius)
    logger.info("section radius %g: %d points", radius, len(ps))
    return assemble_gram(config.window_spec(), ps, workers=workers)


def _out(config: RunConfig) -> Path:
    return Path(config.output.dir)


def _csv_dir(config: RunConfig) -> Optional[Path]:
    return Path(config.output.csv_dir) if config.output.csv_dir else None


def _sweep_table(sweep, title: str) -> Table:
    table = Table(title=title)
    table.add_column("radius", justify="right")
    table.add_column("N", justify="right")
    table.add_column("a_n", justify="right")
    table.add_column("b_n", justify="right")
    table.add_column("floor", justify="right")
    table.add_column("status")
    for row in sweep:
        status = "[red]below floor[/red]" if row.below_floor else "[green]ok[/green]"
        table.add_row(f"{row.radius:g}", str(row.size), f"{row.a_n:.3e}", f"{row.b_n:.4f}",
                      f"{row.floor:.1e}", status)
    return table


# --- commands ---

def cmd_sweep(config: RunConfig, workers: int) -> int:
    radii = list(config.sweep.radii)
    G = _section(config, radii[-1], workers)
    sweep = sweep_section(G, radii, workers=workers)
    gap = _gap(config, eigs_hermitian(G))
    fits, skipped = _fits(config, sweep)
    b_hat, stabilization = bessel_estimate(sweep)
    diagnostics = {"skipped_fits": skipped}

    comparison = None
    v = config.weight_spec()
    try:
        far = _pointset(config, config.bounds.r_max)
        comparison = bound_comparison(sweep, v, far, n_rel=relative_separation(far))
    except GaborSectionsError as exc:
        logger.warning("bound comparison skipped: %s", exc)
        diagnostics["comparison"] = f"{exc.code}: {exc}"

    report = SweepReport(
        config=config.echo(),
        sweep=sweep,
        gap=gap,
        fits=fits,
        comparison=comparison,
        bessel={"b_hat": b_hat, "stabilization": stabilization},
        diagnostics=diagnostics,
    )
    out = _out(config)
    write_sweep_csv(sweep, out / "sweep.csv", comparison)
    plot = out / "sweep.gp" if config.output.plot else None
    emit_report(report, out / "report.json", plot_path=plot, csv_dir=_csv_dir(config))

    console.print(_sweep_table(sweep, f"Riesz bounds, {config.window.kind} window"))
    if comparison is not None:
        console.print(f"[cyan]{comparison.verdict}")
    console.print(f"gap ({gap.mode}): found={gap.gap_found}, cut {gap.threshold:.3e}")
    return 0


def cmd_gram_dump(config: RunConfig, workers: int) -> int:
    G = _section(config, config.sweep.radii[-1], workers)
    envelope = envelope_extract(G)
    v = config.weight_spec()
    out = _out(config)
    write_gram_csv(G, out / "gram.csv")
    write_envelope_csv(envelope, out / "envelope.csv")
    write_json({
        "config": config.echo(),
        "pointset": G.pointset.to_dict(),
        "size": len(G),
        "cv_infty_norm": cv_infty_norm(G, v),
        "envelope_cubes": len(envelope),
        "envelope_amalgam_sum": envelope.amalgam_sum(v),
        "weight": v.describe(),
    }, out / "gram.json")
    console.print(f"{len(G)} x {len(G)} Gram section written to {out / 'gram.csv'}")
    return 0


def _anchor(config: RunConfig, ps: PointSet) -> Optional[int]:
    if config.kernel.anchor == "argmax":
        return None
    return ps.index_of(np.zeros(2 * ps.d))


def cmd_kernel(config: RunConfig, workers: int) -> int:
    radius = config.kernel_radius
    G = _section(config, radius, workers)
    eigs = eigs_hermitian(G)
    gap = _gap(config, eigs)
    if config.contour.radius > 0:
        contour = ContourSpec(config.contour.radius, config.contour.nodes)
    else:
        contour = ContourSpec.from_gap(gap, config.contour.nodes)
    projection, agreement = near_kernel_projection(G, contour, gap=gap, method=config.kernel.projection,
                                                   workers=workers)

    ps = G.pointset
    mu, c = kernel_vector(projection, ps, anchor=_anchor(config, ps))
    v = config.weight_spec()
    b_hat = float(eigs[-1])
    residual = float(np.linalg.norm(G.entries @ c))
    floor = EPS * len(ps) * b_hat
    diagnostics = {}
    try:
        fit = decay_fit(c, ps, v).to_dict()
    except TooFewPoints as exc:
        logger.warning("kernel decay fit skipped: %s", exc)
        fit, diagnostics["decay_fit"] = None, str(exc)

    lemma = [row.to_dict() for row in lemma_bound_check(c, G, config.kernel.lemma_radii, b_hat, v)]
    norms = []
    for r in config.kernel.resolvent_radii:
        if r > radius:
            continue
        try:
            value = resolvent_decay_norm(G.section_for_radius(r), contour.radius, v)
            norms.append({"radius": r, "z": contour.radius, "norm": value, "error": None})
        except SingularResolvent as exc:
            norms.append({"radius": r, "z": contour.radius, "norm": None, "error": str(exc)})

    out = _out(config)
    write_kernel_csv(c, ps, out / "kernel_vector.csv")
    write_rows_csv(lemma, out / "lemma.csv")
    write_json({
        "config": config.echo(),
        "radius": radius,
        "gap": gap.to_dict(),
        "projection": projection.to_dict(),
        "projection_agreement": agreement,
        "anchor": {"index": mu, "point": ps.coordinates[mu].tolist()},
        "residual_norm": residual,
        "floor": floor,
        "b_hat": b_hat,
        "decay_fit": fit,
        "lemma": lemma,
        "resolvent_norms": norms,
        "diagnostics": diagnostics,
    }, out / "kernel.json")

    table = Table(title=f"Lemma check, kernel vector at radius {radius:g}")
    for name in ("n", "lhs", "rhs", "rigorous", "passed"):
        table.add_column(name, justify="right")
    for row in lemma:
        table.add_row(f"{row['radius']:g}", f"{row['lhs']:.3e}", f"{row['rhs']:.3e}",
                      str(row["rigorous_passed"]), str(row["passed"]))
    console.print(table)
    console.print(f"{projection.method} projection rank {projection.rank_estimate}, "
                  f"defect {projection.idempotency_defect:.1e}, ||G c|| = {residual:.2e} (floor {floor:.2e})")
    return 0


def cmd_fit(config: RunConfig, workers: int) -> int:
    radii = list(config.sweep.radii)
    sweep = sweep_section(_section(config, radii[-1], workers), radii, workers=workers)
    fits, skipped = _fits(config, sweep)
    write_json({
        "config": config.echo(),
        "fits": [fit.to_dict() for fit in fits],
        "skipped": skipped,
    }, _out(config) / "fit.json")
    for fit in fits:
        console.print(f"{fit.model:10s} slope {fit.slope:+.4f}  R^2 {fit.r_squared:.4f}")
    return 0


def cmd_bounds(config: RunConfig, workers: int) -> int:
    radii = list(config.sweep.radii)
    sweep = sweep_section(_section(config, radii[-1], workers), radii, workers=workers)
    v = config.weight_spec()
    far = _pointset(config, config.bounds.r_max)
    n_rel = relative_separation(far)
    comparison = bound_comparison(sweep, v, far, n_rel=n_rel)

    submultiplicative, worst = submultiplicative_check(v, seed=config.run.seed, dim=2 * far.d)
    checks = {
        "submultiplicative": {"passed": submultiplicative, "worst_ratio": worst},
        "sum_converges": v.sum_converges(far.d),
        "relative_separation": n_rel,
        "remainder_at_r_max": tail_remainder(v, far.radius, 2 * far.d, n_rel),
    }
    if far.d == 1:
        passed, constant = subconvolutive_check(v, d=1)
        checks["subconvolutive"] = {"passed": passed, "constant": constant}

    out = _out(config)
    write_rows_csv([asdict(row) for row in comparison.rows], out / "bounds.csv")
    write_json({
        "config": config.echo(),
        "comparison": comparison.to_dict(),
        "weight_checks": checks,
    }, out / "bounds.json")
    console.print(f"[cyan]{comparison.verdict}")
    return 0


def cmd_selftest(config: RunConfig, workers: int) -> int:
    results = run_selftest(config.run.seed)
    table = Table(title="gabor-sections selftest")
    table.add_column("check")
    table.add_column("result")
    table.add_column("detail")
    for result in results:
        mark = "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]"
        table.add_row(result.name, mark, result.detail)
    console.print(table)
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.error("%d of %d checks failed: %s", len(failed), len(results), ", ".join(failed))
        return 2
    return 0


HANDLERS = {
    "sweep": cmd_sweep,
    "gram-dump": cmd_gram_dump,
    "kernel": cmd_kernel,
    "fit": cmd_fit,
    "bounds": cmd_bounds,
    "selftest": cmd_selftest,
}


def run(command: str, config: RunConfig, workers: Optional[int] = None) -> int:
    """Run one command; GaborSectionsError propagates to the caller"""
    if command not in HANDLERS:
        raise ConfigError("command", f"unknown command {command!r}")
    workers = resolve_workers(config, workers)
    logger.info("%s with %d worker(s)", command, workers)
    return HANDLERS[command](config, workers)


def report_error(exc: GaborSectionsError) -> int:
    print(f"error code={exc.code} exit={exc.exit_code} message={json.dumps(str(exc))}",
          file=sys.stderr)
    return exc.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.verbose)
        config = load_config(args)
        if args.print_config:
            sys.stdout.write(config.to_toml())
            return 0
        if args.command is None:
            raise ConfigError("command", f"expected one of {', '.join(COMMANDS)}")
        return run(args.command, config, args.workers)
    except GaborSectionsError as exc:
        return report_error(exc)


if __name__ == "__main__":
    sys.exit(main())
