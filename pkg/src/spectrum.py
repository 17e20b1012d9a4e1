"""
Extremal eigenvalues of nested Gram sections and spectral-gap detection.
"""

import logging
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from .errors import InvalidInput, NoConvergence
from .gram import GramSection, assemble_gram
from .pointsets import (
    DEFAULT_MAX_POINTS,
    LatticeSpec,
    PointSet,
    enumerate_lattice_in_ball,
    nested_masks,
)
from .windows import WindowSpec

logger = logging.getLogger(__name__)

EPS = float(np.finfo(float).eps)
DECADE = 10.0


@dataclass(frozen=True)
class RieszBounds:
    """Extremal eigenvalues of one section; floor = eps * N * b_n"""
    radius: float
    size: int
    a_n: float
    b_n: float
    floor: float
    below_floor: bool

    @classmethod
    def from_eigenvalues(cls, radius: float, eigs: np.ndarray) -> 'RieszBounds':
        a_n, b_n = float(eigs[0]), float(eigs[-1])
        floor = EPS * eigs.size * b_n
        return cls(float(radius), int(eigs.size), a_n, b_n, floor, a_n < floor)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GapReport:
    """
    Split of a spectrum into a near-zero cluster and a band [A_hat, B_hat].

    mode is "threshold" (fixed cut), "widest" (cut inside the widest
    consecutive ratio) or "floor" (cut at eps * N * b). The first two only
    report a gap with A_hat / threshold >= 10.
    """
    eigenvalues: Tuple[float, ...]
    threshold: float
    cluster_zero: Tuple[float, ...]
    band: Tuple[float, float]
    gap_found: bool
    mode: str = "threshold"
    ratio: float = 0.0

    @property
    def a_hat(self) -> float:
        return self.band[0]

    @property
    def b_hat(self) -> float:
        return self.band[1]

    @property
    def cluster_max(self) -> float:
        return max(self.cluster_zero) if self.cluster_zero else float("-inf")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "threshold": self.threshold,
            "gap_found": self.gap_found,
            "cluster_size": len(self.cluster_zero),
            "cluster_max": self.cluster_max if self.cluster_zero else None,
            "band": list(self.band),
            "ratio": self.ratio,
        }


def _as_matrix(G: Union[GramSection, np.ndarray]) -> np.ndarray:
    return G.entries if isinstance(G, GramSection) else np.asarray(G)


def eigs_hermitian(G: Union[GramSection, np.ndarray], vectors: bool = False):
    """
    All eigenvalues in ascending order (and eigenvectors as columns when
    vectors=True, each pair checked against ||G u - theta u|| <= 10 eps N ||G||).
    """
    M = _as_matrix(G)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {M.shape}")
    try:
        if not vectors:
            return linalg.eigh(M, eigvals_only=True)
        eigs, U = linalg.eigh(M)
    except linalg.LinAlgError as exc:
        raise NoConvergence(f"Hermitian eigensolver failed: {exc}") from exc

    n = M.shape[0]
    scale = max(abs(eigs[0]), abs(eigs[-1])) if n else 0.0
    residuals = np.linalg.norm(M @ U - U * eigs, axis=0)
    worst = float(residuals.max()) if n else 0.0
    if worst > 10.0 * EPS * n * scale:
        raise NoConvergence(f"eigenpair residual {worst:.2e} above contract")
    return eigs, U


def sweep_section(G: GramSection, radii: Sequence[float], workers: int = 1) -> List[RieszBounds]:
    """RieszBounds for each radius, from leading blocks of one assembled section"""
    masks = nested_masks(G.pointset, radii)
    sizes = [int(np.count_nonzero(mask)) for mask in masks]

    def one(item: Tuple[float, int]) -> RieszBounds:
        radius, size = item
        return RieszBounds.from_eigenvalues(radius, eigs_hermitian(G.leading(size)))

    items = list(zip(radii, sizes))
    if workers > 1:
        rows = Parallel(n_jobs=workers, prefer="threads")(delayed(one)(item) for item in items)
    else:
        rows = [one(item) for item in items]
    for row in rows:
        if row.below_floor:
            logger.info("radius %.4g (N=%d): a_n=%.3e below floor %.3e", row.radius, row.size,
                        row.a_n, row.floor)
    return rows


def riesz_sweep(w: WindowSpec, lat: Union[LatticeSpec, PointSet], radii: Sequence[float],
                workers: int = 1, max_points: int = DEFAULT_MAX_POINTS) -> List[RieszBounds]:
    """Riesz bounds of G(g, Lambda_n) for every n in radii"""
    radii = [float(r) for r in radii]
    if not radii:
        raise InvalidInput("empty radius list")
    if isinstance(lat, LatticeSpec):
        ps = enumerate_lattice_in_ball(lat, max(radii), max_points=max_points)
    else:
        ps = lat.truncate(max(radii))
    G = assemble_gram(w, ps, workers=workers)
    return sweep_section(G, radii, workers=workers)


def detect_gap(eigs: Sequence[float], gap_threshold: Optional[float] = None) -> GapReport:
    """
    Partition at gap_threshold (default 1e-4 * max eigenvalue). A gap is
    found when the cluster below the cut is nonempty and the band starts at
    least a decade above the cut.
    """
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size == 0:
        raise InvalidInput("empty spectrum")
    if np.any(np.diff(eigs) < 0):
        raise InvalidInput("eigenvalues must be sorted ascending")
    if gap_threshold is None:
        gap_threshold = 1e-4 * float(eigs[-1])
    cluster = eigs[eigs < gap_threshold]
    rest = eigs[eigs >= gap_threshold]
    band = (float(rest[0]), float(rest[-1])) if rest.size else (float("nan"), float("nan"))
    ratio = band[0] / gap_threshold if rest.size else 0.0
    found = bool(cluster.size and rest.size and ratio >= DECADE)
    logger.debug("gap threshold %.3e: %d below, band [%.3e, %.3e], found=%s",
                 gap_threshold, cluster.size, band[0], band[1], found)
    return GapReport(tuple(eigs.tolist()), float(gap_threshold), tuple(cluster.tolist()), band,
                     found, "threshold", float(ratio))


def widest_gap(eigs: Sequence[float], lower: Optional[float] = None, upper: Optional[float] = None,
               min_ratio: float = DECADE) -> GapReport:
    """
    Cut at the largest ratio theta_{i+1} / theta_i among consecutive
    eigenvalues inside [lower, upper] (default [1e-6 b, b]). The cut is the
    geometric mean of the pair, lowered to A_hat / 10 when the pair is less
    than two decades apart, so a found gap keeps A_hat / cut >= 10.
    """
    if min_ratio < DECADE:
        raise InvalidInput(f"min_ratio must be at least {DECADE:g}, got {min_ratio}")
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size == 0:
        raise InvalidInput("empty spectrum")
    top = float(eigs[-1])
    lower = 1e-6 * top if lower is None else lower
    upper = top if upper is None else upper
    window = eigs[(eigs >= lower) & (eigs <= upper)]
    if window.size < 2:
        report = detect_gap(eigs, lower)
        return GapReport(report.eigenvalues, report.threshold, report.cluster_zero, report.band,
                         False, "widest", 0.0)
    ratios = window[1:] / window[:-1]
    i = int(np.argmax(ratios))
    cut = min(float(np.sqrt(window[i] * window[i + 1])), float(window[i + 1]) / DECADE)
    cluster = eigs[eigs < cut]
    rest = eigs[eigs >= cut]
    found = bool(ratios[i] >= min_ratio and window[i] < cut)
    logger.debug("widest ratio %.3g between %.3e and %.3e", ratios[i], window[i], window[i + 1])
    return GapReport(tuple(eigs.tolist()), cut, tuple(cluster.tolist()),
                     (float(rest[0]), float(rest[-1])), found, "widest", float(ratios[i]))


def floor_gap(eigs: Sequence[float]) -> GapReport:
    """
    Cut at the numerical-zero floor eps * N * b. The cluster is the part of
    the spectrum that double precision cannot tell from an exact kernel; a
    gap is found when that part and the band are both nonempty. No decade
    separation is required: finite sections of an overcomplete system fill
    the range below the frame bound with eigenvalues.
    """
    eigs = np.asarray(eigs, dtype=float)
    if eigs.size == 0:
        raise InvalidInput("empty spectrum")
    if np.any(np.diff(eigs) < 0):
        raise InvalidInput("eigenvalues must be sorted ascending")
    floor = EPS * eigs.size * float(eigs[-1])
    cluster = eigs[eigs < floor]
    rest = eigs[eigs >= floor]
    band = (float(rest[0]), float(rest[-1])) if rest.size else (float("nan"), float("nan"))
    found = bool(cluster.size and rest.size)
    ratio = band[0] / floor if rest.size else 0.0
    logger.debug("floor %.3e: %d numerically zero, band starts at %.3e", floor, cluster.size, band[0])
    return GapReport(tuple(eigs.tolist()), floor, tuple(cluster.tolist()), band, found, "floor",
                     float(ratio))


def bessel_estimate(sweep: Sequence[RieszBounds]) -> Tuple[float, float]:
    """(B_hat = max b_n, b_last / b_previous); the ratio is 1.0 for a single row"""
    if not sweep:
        raise InvalidInput("empty sweep")
    b_hat = max(row.b_n for row in sweep)
    stabilization = sweep[-1].b_n / sweep[-2].b_n if len(sweep) > 1 else 1.0
    return b_hat, stabilization
