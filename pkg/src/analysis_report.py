"""
Decay fits, bound comparisons and the report/CSV/plot writers.

Below-floor rows are listed in every table but never enter a fit or a verdict:
they measure machine precision, not A_n. The verdict is a heuristic: finitely
many radii cannot confirm an asymptotic bound.
"""

import csv
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .errors import InvalidInput, IoFailure, TooFewPoints
from .gram import EnvelopeProfile, GramSection
from .pointsets import PointSet
from .spectrum import GapReport, RieszBounds
from .weights import WeightSpec, bound_sum, bound_sup

logger = logging.getLogger(__name__)

MODELS = ("power", "stretched", "gaussian")
SCHEMA_VERSION = 1
SWEEP_COLUMNS = ("radius", "N", "a_n", "b_n", "floor", "below_floor",
                 "bound_sup", "bound_sum", "ratio_sup", "ratio_sum")


@dataclass(frozen=True)
class DecayFit:
    """log a_n = intercept + slope * x(n), x = log n, n^b or n^2"""
    model: str
    slope: float
    intercept: float
    r_squared: float
    points_used: int
    floor_radius: Optional[float]
    b: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _abscissa(model: str, radii: np.ndarray, b: float) -> np.ndarray:
    if model == "power":
        return np.log(radii)
    if model == "stretched":
        return radii ** b
    return radii ** 2


def fit_decay(sweep: Sequence[RieszBounds], model: str, b: float = 0.5) -> DecayFit:
    """Least-squares fit of log a_n over the above-floor rows"""
    if model not in MODELS:
        raise InvalidInput(f"unknown decay model {model!r}; choose from {', '.join(MODELS)}")
    if model == "stretched" and not 0 < b < 1:
        raise InvalidInput(f"stretched model needs 0 < b < 1, got {b}")
    below = [row.radius for row in sweep if row.below_floor]
    usable = [row for row in sweep if not row.below_floor and row.a_n > 0
              and (model != "power" or row.radius > 0)]
    if len(usable) < 3:
        raise TooFewPoints(f"{model} fit needs 3 above-floor rows, have {len(usable)}")
    radii = np.array([row.radius for row in usable])
    values = np.log(np.array([row.a_n for row in usable]))
    result = linregress(_abscissa(model, radii, b), values)
    return DecayFit(
        model=model,
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue ** 2),
        points_used=len(usable),
        floor_radius=min(below) if below else None,
        b=b if model == "stretched" else None,
    )


@dataclass(frozen=True)
class ComparisonRow:
    radius: float
    size: int
    a_n: float
    below_floor: bool
    bound_sup: float
    bound_sum: float
    remainder: float
    ratio_sup: float
    ratio_sum: float


@dataclass(frozen=True)
class BoundComparison:
    """Per-radius ratios a_n / bound and the bounded-constant heuristic"""
    weight: str
    rows: List[ComparisonRow]
    consistent_sup: bool
    consistent_sum: bool
    verdict: str
    heuristic: bool = True

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "rows": [asdict(row) for row in self.rows],
            "consistent_sup": self.consistent_sup,
            "consistent_sum": self.consistent_sum,
            "verdict": self.verdict,
            "heuristic": self.heuristic,
        }


def bounded_constant_witness(ratios: Sequence[float]) -> bool:
    """
    True when the largest ratio sits in the first third of the rows and no
    later row rises more than 10x above the smallest ratio before it (from
    the end of the first third on).
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0 or not np.all(np.isfinite(ratios)):
        return False
    head = int(math.ceil(ratios.size / 3.0))
    if int(np.argmax(ratios)) >= head:
        return False
    later = ratios[head - 1:]
    running_min = np.minimum.accumulate(later)
    return bool(np.all(later <= 10.0 * running_min))


def compare_ratios(sweep: Sequence[RieszBounds], sup_values: Sequence[float],
                   sum_values: Sequence[float], remainders: Optional[Sequence[float]] = None,
                   weight: str = "") -> BoundComparison:
    """Build the comparison table from precomputed bound values (one per sweep row)"""
    if not (len(sweep) == len(sup_values) == len(sum_values)):
        raise InvalidInput("sweep and bound lists differ in length")
    remainders = remainders if remainders is not None else [0.0] * len(sweep)
    rows = []
    for row, sup, total, rem in zip(sweep, sup_values, sum_values, remainders):
        rows.append(ComparisonRow(row.radius, row.size, row.a_n, row.below_floor, float(sup),
                                  float(total), float(rem), row.a_n / sup, row.a_n / total))
    above = [row for row in rows if not row.below_floor]
    consistent_sup = bounded_constant_witness([row.ratio_sup for row in above])
    consistent_sum = bounded_constant_witness([row.ratio_sum for row in above])
    floor_radius = next((row.radius for row in rows if row.below_floor), None)
    if floor_radius is not None:
        head = f"numerically linearly dependent at radius {floor_radius:g}"
    else:
        head = "no radius reached the numerical-zero floor"
    if consistent_sup and consistent_sum:
        tail = f"consistent with both decay bounds for weight {weight}"
    elif consistent_sup or consistent_sum:
        which = "sup" if consistent_sup else "sum"
        tail = f"consistent with the {which} bound only for weight {weight}"
    else:
        tail = f"not consistent with a bounded constant for weight {weight}"
    return BoundComparison(weight, rows, consistent_sup, consistent_sum,
                           f"{head}; {tail} (heuristic)")


def bound_comparison(sweep: Sequence[RieszBounds], v: WeightSpec, ps: PointSet,
                     n_rel: Optional[int] = None) -> BoundComparison:
    """
    ratio_sup(n) = a_n / bound_sup(n), ratio_sum(n) = a_n / (sum + remainder),
    with the bounds evaluated on `ps`, an enumeration of the same Lambda
    reaching beyond the largest sweep radius.
    """
    sups, sums, remainders = [], [], []
    for row in sweep:
        sups.append(bound_sup(v, ps, row.radius))
        total, remainder = bound_sum(v, ps, row.radius, n_rel=n_rel)
        sums.append(total + remainder)
        remainders.append(remainder)
    return compare_ratios(sweep, sups, sums, remainders, weight=v.describe())


@dataclass
class SweepReport:
    """Everything one run produced; `to_dict` is the JSON report"""
    config: Dict[str, Any]
    sweep: List[RieszBounds]
    gap: Optional[GapReport] = None
    fits: List[DecayFit] = field(default_factory=list)
    comparison: Optional[BoundComparison] = None
    bessel: Optional[Dict[str, float]] = None
    kernel: Optional[Dict[str, Any]] = None
    lemma: List[Dict[str, Any]] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "sweep": [row.to_dict() for row in self.sweep],
            "gap": self.gap.to_dict() if self.gap else None,
            "fits": [fit.to_dict() for fit in self.fits],
            "comparison": self.comparison.to_dict() if self.comparison else None,
            "bessel": self.bessel,
            "kernel": self.kernel,
            "lemma": self.lemma,
            "diagnostics": self.diagnostics,
        }


def _finite(value: Any) -> Any:
    """Replace non-finite floats by None, recursively"""
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _open(path: Path, mode: str = "w"):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, newline="")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_json(document: Dict[str, Any], path) -> Dict[str, Any]:
    """
    Sorted, indented JSON with non-finite floats written as null. The text
    goes to a sibling temporary file first and replaces `path` only once
    complete.
    """
    document = _finite(document)
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    try:
        with _open(partial) as handle:
            json.dump(document, handle, indent=2, sort_keys=True)
            handle.write("\n")
        os.replace(partial, path)
    except (TypeError, ValueError) as exc:
        partial.unlink(missing_ok=True)
        raise InvalidInput(f"cannot serialize {path.name}: {exc}") from exc
    except OSError as exc:
        partial.unlink(missing_ok=True)
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return document


def emit_report(report: SweepReport, path, plot_path=None, csv_dir=None) -> dict:
    """Write the JSON report (plus optional gnuplot script and CSV mirrors)"""
    if not report.sweep:
        raise InvalidInput("a report needs at least one sweep row")
    document = write_json(report.to_dict(), path)
    logger.info("report written to %s", path)
    if csv_dir is not None:
        sweep_csv = Path(csv_dir) / "sweep.csv"
        write_sweep_csv(report.sweep, sweep_csv, report.comparison)
        if report.lemma:
            write_rows_csv(report.lemma, Path(csv_dir) / "lemma.csv")
    if plot_path is not None:
        data = Path(csv_dir) / "sweep.csv" if csv_dir is not None else Path(plot_path).with_suffix(".csv")
        if csv_dir is None:
            write_sweep_csv(report.sweep, data, report.comparison)
        write_plot_script(data, plot_path)
    return document


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sweep_csv(sweep: Sequence[RieszBounds], path,
                    comparison: Optional[BoundComparison] = None) -> None:
    """radius, N, a_n, b_n, floor, below_floor, bound_sup, bound_sum, ratio_sup, ratio_sum"""
    bounds = {row.radius: row for row in comparison.rows} if comparison else {}
    with _open(Path(path)) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in sweep:
            match = bounds.get(row.radius)
            extra = ([match.bound_sup, match.bound_sum, match.ratio_sup, match.ratio_sum]
                     if match else ["", "", "", ""])
            cells = [row.radius, row.size, row.a_n, row.b_n, row.floor, row.below_floor] + extra
            writer.writerow([_cell(value) for value in cells])


def write_rows_csv(rows: Sequence[Dict[str, Any]], path) -> None:
    """Generic table writer; the header is the key order of the first row"""
    rows = list(rows)
    with _open(Path(path)) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if not rows:
            return
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if row[key] is None else _cell(row[key]) for key in header])


def write_gram_csv(G: GramSection, path) -> None:
    """row, col, re, im for every entry"""
    entries = G.entries
    with _open(Path(path)) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("row", "col", "re", "im"))
        for i in range(entries.shape[0]):
            for j in range(entries.shape[1]):
                value = entries[i, j]
                writer.writerow((i, j, repr(float(value.real)), repr(float(value.imag))))


def write_envelope_csv(envelope: EnvelopeProfile, path) -> None:
    """k_1..k_{2d}, theta"""
    dim = envelope.offsets.shape[1]
    with _open(Path(path)) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"k_{i + 1}" for i in range(dim)] + ["theta"])
        for k, theta in zip(envelope.offsets, envelope.values):
            writer.writerow([int(x) for x in k] + [repr(float(theta))])


def write_kernel_csv(c: np.ndarray, ps: PointSet, path) -> None:
    """id, x, xi, re, im, abs (x and xi joined by ';' when d > 1)"""
    d = ps.d
    with _open(Path(path)) as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("id", "x", "xi", "re", "im", "abs"))
        for index, (point, value) in enumerate(zip(ps.coordinates, c)):
            x = ";".join(repr(float(t)) for t in point[:d])
            xi = ";".join(repr(float(t)) for t in point[d:])
            writer.writerow((index, x, xi, repr(float(value.real)), repr(float(value.imag)),
                             repr(float(abs(value)))))


def write_plot_script(data_path, path) -> None:
    """gnuplot script: log a_n, floor and both bounds against the radius"""
    script = "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale y",
        "set format y '10^{%L}'",
        "set xlabel 'radius n'",
        "set ylabel 'value'",
        f"plot '{data_path}' using 1:3 with linespoints title 'a_n', \\",
        f"     '{data_path}' using 1:5 with lines dashtype 2 title 'floor', \\",
        f"     '{data_path}' using 1:7 with lines title 'bound sup', \\",
        f"     '{data_path}' using 1:8 with lines title 'bound sum'",
        "",
    ])
    with _open(Path(path)) as handle:
        handle.write(script)
