"""
Spectral projection onto the near-kernel of a Gram section.

P = (1 / 2 pi i) * contour integral of (z I - G)^{-1} dz over the circle of
radius rho, discretized by the trapezoid rule on M nodes:

    P ~ (1/M) sum_j z_j (z_j I - G)^{-1},    z_j = rho e^{2 pi i j / M}.

On a finite section the kernel of G is generically trivial; "kernel" here
means the span of the eigenvectors with eigenvalue below rho.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg
from scipy.stats import linregress

from .errors import (
    GaborSectionsError,
    GapMissing,
    InvalidInput,
    InvariantViolation,
    MassConditionFailed,
    RankZero,
    SingularResolvent,
    TooFewPoints,
)
from .gram import GramSection, weighted_sup
from .pointsets import BALL_TOLERANCE, PointSet
from .spectrum import EPS, GapReport, eigs_hermitian
from .weights import WeightSpec

logger = logging.getLogger(__name__)

MIN_NODES = 16
BACKWARD_ERROR_TOL = 1e-10
DISTANCE_TOL = 1e-8
DECAY_CUTOFF = 1e-14
NORM_TOL = 1e-12

Matrix = Union[GramSection, np.ndarray]


@dataclass(frozen=True)
class ContourSpec:
    """Circle of radius rho around 0, discretized by `nodes` trapezoid nodes"""
    radius: float
    nodes: int = 64
    center: float = 0.0

    def __post_init__(self):
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise InvalidInput(f"contour radius must be positive, got {self.radius}")
        if self.nodes < MIN_NODES:
            raise InvalidInput(f"need at least {MIN_NODES} contour nodes, got {self.nodes}")
        if self.center != 0.0:
            raise InvalidInput("contours are centred at the origin")

    @classmethod
    def from_gap(cls, gap: GapReport, nodes: int = 64) -> 'ContourSpec':
        """
        A_hat / 2 for a threshold cut, the cut itself for a widest-ratio cut.
        At the floor the band may start just above the cluster, so the radius
        is the geometric mean of A_hat and max(cluster max, A_hat / 100).
        """
        if not gap.gap_found:
            raise GapMissing(f"no spectral gap ({gap.mode} cut at {gap.threshold:.3e})")
        if gap.mode == "threshold":
            radius = gap.a_hat / 2.0
        elif gap.mode == "widest":
            radius = gap.threshold
        else:
            radius = math.sqrt(max(gap.cluster_max, gap.a_hat / 100.0) * gap.a_hat)
        return cls(radius, nodes)

    def points(self) -> np.ndarray:
        return self.radius * np.exp(2j * np.pi * np.arange(self.nodes) / self.nodes)

    def validate(self, gap: GapReport) -> None:
        if not gap.gap_found:
            raise GapMissing(f"no spectral gap ({gap.mode} cut at {gap.threshold:.3e})")
        if not gap.cluster_max < self.radius < gap.a_hat:
            raise InvalidInput(
                f"contour radius {self.radius:.3e} not inside the gap "
                f"({gap.cluster_max:.3e}, {gap.a_hat:.3e})"
            )


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    P: np.ndarray
    idempotency_defect: float
    trace: float
    rank_estimate: int
    residual: float
    contour: Optional[ContourSpec] = None
    method: str = "contour"

    def to_dict(self) -> dict:
        return {
            "size": int(self.P.shape[0]),
            "idempotency_defect": self.idempotency_defect,
            "trace": self.trace,
            "rank_estimate": self.rank_estimate,
            "residual": self.residual,
            "contour_radius": self.contour.radius if self.contour else None,
            "contour_nodes": self.contour.nodes if self.contour else None,
            "method": self.method,
            "note": "near-kernel: span of eigenvectors below the contour radius",
        }


def _as_matrix(G: Matrix) -> np.ndarray:
    return G.entries if isinstance(G, GramSection) else np.asarray(G, dtype=complex)


def _finish(G: np.ndarray, P: np.ndarray, contour: Optional[ContourSpec],
            method: str = "contour") -> ProjectionResult:
    P = 0.5 * (P + P.conj().T)
    n = P.shape[0]
    defect = float(np.linalg.norm(P @ P - P))
    trace = float(np.real(np.trace(P)))
    rank = int(round(trace))
    g_norm = float(np.linalg.norm(G))
    residual = float(np.linalg.norm(G @ P)) / g_norm if g_norm > 0 else 0.0
    if defect > 1e-8 * n:
        raise InvariantViolation(f"projection defect ||P^2 - P|| = {defect:.2e}")
    if abs(trace - rank) > 1e-6:
        raise InvariantViolation(f"trace(P) = {trace:.9f} is not an integer")
    return ProjectionResult(P, defect, trace, rank, residual, contour, method)


def _resolvent(A: np.ndarray) -> Tuple[np.ndarray, float]:
    """A^{-1} by LU with one refinement step, plus its normwise backward error"""
    n = A.shape[0]
    identity = np.eye(n, dtype=complex)
    factors = linalg.lu_factor(A, check_finite=False)
    X = linalg.lu_solve(factors, identity)
    X = X + linalg.lu_solve(factors, identity - A @ X)
    residual = np.linalg.norm(A @ X - identity)
    backward = residual / (np.linalg.norm(A) * np.linalg.norm(X) + math.sqrt(n))
    return X, float(backward)


def _checked_resolvent(G: np.ndarray, z: complex, distance: float) -> np.ndarray:
    """(z I - G)^{-1}; SingularResolvent when z is next to the spectrum or the solve is inaccurate"""
    if distance < DISTANCE_TOL * abs(z):
        raise SingularResolvent(f"node {z:.3e} lies within {distance:.2e} of an eigenvalue")
    X, backward = _resolvent(z * np.eye(G.shape[0]) - G)
    if backward > BACKWARD_ERROR_TOL:
        raise SingularResolvent(f"resolvent solve at {z:.3e}: backward error {backward:.2e}")
    return X


def contour_projection(G: Matrix, c: ContourSpec, gap: Optional[GapReport] = None,
                       workers: int = 1) -> ProjectionResult:
    """
    Riesz projection onto the eigenvalues inside the circle of radius c.radius.
    With a GapReport the radius is first checked to lie inside the gap.
    Terms are added in node order as they arrive, so at most a few N x N
    resolvents are alive at once.
    """
    if gap is not None:
        c.validate(gap)
    M = _as_matrix(G)
    nodes = c.points()
    eigs = linalg.eigvalsh(M)
    distances = [float(np.min(np.abs(z - eigs))) for z in nodes]

    def one(j: int) -> np.ndarray:
        return nodes[j] * _checked_resolvent(M, nodes[j], distances[j])

    if workers > 1:
        terms = Parallel(n_jobs=workers, prefer="threads", return_as="generator")(
            delayed(one)(j) for j in range(c.nodes))
    else:
        terms = (one(j) for j in range(c.nodes))
    P = np.zeros_like(M, dtype=complex)
    for term in terms:
        P += term
    P /= c.nodes
    result = _finish(M, P, c)
    logger.info("contour projection: rho=%.3e, M=%d, rank %d, defect %.2e",
                c.radius, c.nodes, result.rank_estimate, result.idempotency_defect)
    return result


def eigen_projection(G: Matrix, rho: float) -> ProjectionResult:
    """sum of u u* over eigenpairs with theta < rho"""
    M = _as_matrix(G)
    eigs, U = eigs_hermitian(M, vectors=True)
    inside = U[:, eigs < rho]
    return _finish(M, inside @ inside.conj().T, None, method="eigen")


def near_kernel_projection(G: Matrix, c: ContourSpec, gap: Optional[GapReport] = None,
                           method: str = "contour", workers: int = 1) -> Tuple[ProjectionResult, dict]:
    """
    The projection used for kernel vectors, plus its distance to the other
    method at the same radius. method="eigen" suits cuts near the floor,
    where the resolvent solves lose about log10(B / rho) digits; a contour
    run that fails there is recorded, not raised.
    """
    if method not in ("contour", "eigen"):
        raise InvalidInput(f"unknown projection method {method!r}")
    if gap is not None:
        c.validate(gap)
    oracle = replace(eigen_projection(G, c.radius), contour=c)
    if method == "contour":
        result = contour_projection(G, c, workers=workers)
        return result, {"frobenius": float(np.linalg.norm(result.P - oracle.P)), "error": None}
    try:
        check = contour_projection(G, c, workers=workers)
    except GaborSectionsError as exc:
        logger.warning("contour projection at rho=%.3e: %s", c.radius, exc)
        return oracle, {"frobenius": None, "error": f"{exc.code}: {exc}"}
    return oracle, {"frobenius": float(np.linalg.norm(check.P - oracle.P)), "error": None}


def kernel_vector(P: ProjectionResult, ps: PointSet,
                  anchor: Optional[int] = None) -> Tuple[int, np.ndarray]:
    """
    (mu, c) with c = P e_mu / ||P e_mu||. mu is the column of largest norm,
    or `anchor` when given.
    """
    if P.rank_estimate == 0:
        raise RankZero("the projection is zero; no near-kernel vector")
    if P.P.shape[0] != len(ps):
        raise InvalidInput(f"projection size {P.P.shape[0]} does not match {len(ps)} points")
    norms = np.linalg.norm(P.P, axis=0)
    mu = int(np.argmax(norms)) if anchor is None else int(anchor)
    if not 0 <= mu < len(ps):
        raise InvalidInput(f"anchor index {mu} out of range")
    if norms[mu] < 1e-12:
        raise RankZero(f"column {mu} of the projection vanishes")
    return mu, P.P[:, mu] / norms[mu]


@dataclass(frozen=True)
class KernelDecayFit:
    """log|c_lambda| regressed on |lambda| and on log(1 + |lambda|)"""
    slope: float
    intercept: float
    r_squared: float
    log_slope: float
    log_r_squared: float
    points_used: int
    l1_v: float
    linf_v: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def decay_fit(c: np.ndarray, ps: PointSet, v: WeightSpec) -> KernelDecayFit:
    c = np.asarray(c)
    if c.shape != (len(ps),):
        raise InvalidInput(f"coefficient vector of length {c.size} for {len(ps)} points")
    if abs(np.linalg.norm(c) - 1.0) > NORM_TOL:
        raise InvalidInput("coefficient vector must be l2-normalized")
    modulus = np.abs(c)
    keep = modulus > DECAY_CUTOFF
    if np.count_nonzero(keep) < 8:
        raise TooFewPoints(f"only {np.count_nonzero(keep)} coefficients above {DECAY_CUTOFF:g}")
    radii = ps.norms
    log_c = np.log(modulus[keep])
    linear = linregress(radii[keep], log_c)
    logarithmic = linregress(np.log1p(radii[keep]), log_c)

    weighted = modulus * v.eval_radius(radii)
    return KernelDecayFit(
        slope=float(linear.slope),
        intercept=float(linear.intercept),
        r_squared=float(linear.rvalue ** 2),
        log_slope=float(logarithmic.slope),
        log_r_squared=float(logarithmic.rvalue ** 2),
        points_used=int(np.count_nonzero(keep)),
        l1_v=float(np.sum(weighted)),
        linf_v=float(np.max(weighted)),
    )


def weighted_tail_constants(c: np.ndarray, ps: PointSet, v: WeightSpec, B_hat: float,
                            n: float) -> Tuple[float, float]:
    """
    (2B sum_{|lambda|>n} |c|^2 v^2,  2B sup_{|lambda|>n} |c|^2 v^2): the
    constants multiplying sup v^{-2} and sum v^{-2} in the two decay bounds.
    """
    tail = ps.norms > n + BALL_TOLERANCE
    modulus = np.abs(np.asarray(c))[tail]
    if not np.any(modulus > 0):
        return 0.0, 0.0
    nonzero = modulus > 0
    logs = 2.0 * np.log(modulus[nonzero]) + 2.0 * v.log_eval(ps.norms[tail][nonzero])
    if np.max(logs) > 700.0:
        return math.inf, math.inf
    terms = np.exp(logs)
    return 2.0 * B_hat * float(terms.sum()), 2.0 * B_hat * float(terms.max())


@dataclass(frozen=True)
class LemmaRow:
    """
    One radius of the check a_n <= 2 B sum_{|lambda|>n} |c|^2 + slack.

    slack = 4 B ||G c||; rigorous_slack = 2 (1 + 2 t) ||G c|| with t the tail
    norm of c, which bounds the perturbation from c being only a near-kernel
    vector. Both comparisons allow the numerical-zero floor of the sub-section.
    """
    radius: float
    size: int
    lhs: float
    tail_mass: float
    rhs: float
    slack: float
    rigorous_slack: float
    floor: float
    mass_ok: bool
    passed: bool
    rigorous_passed: bool
    detail: str
    c_sup: Optional[float] = None
    c_sum: Optional[float] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lemma_bound_check(c: np.ndarray, G_full: GramSection, sub_radii: Sequence[float],
                      B_hat: float, v: Optional[WeightSpec] = None,
                      strict: bool = False) -> List[LemmaRow]:
    """
    Check the Bessel-bound estimate for each sub-radius. A radius whose
    inside mass sum_{|lambda|<=n} |c|^2 is below 1/2 is reported as failed,
    or raises MassConditionFailed with strict=True.
    """
    c = np.asarray(c)
    ps = G_full.pointset
    if c.shape != (len(ps),):
        raise InvalidInput(f"coefficient vector of length {c.size} for {len(ps)} points")
    residual = float(np.linalg.norm(G_full.entries @ c))
    mass = np.abs(c) ** 2
    norms = ps.norms
    rows = []
    for n in sub_radii:
        if n >= G_full.radius:
            raise InvalidInput(f"sub-radius {n} must be below the section radius {G_full.radius}")
        inside = norms <= n + BALL_TOLERANCE
        size = int(np.count_nonzero(inside))
        inside_mass = float(mass[inside].sum())
        tail_mass = float(mass[~inside].sum())
        eigs = eigs_hermitian(G_full.leading(size)) if size else np.array([0.0])
        lhs = float(eigs[0])
        floor = EPS * size * float(eigs[-1])
        slack = 4.0 * B_hat * residual
        rigorous_slack = 2.0 * (1.0 + 2.0 * math.sqrt(tail_mass)) * residual
        bound = 2.0 * B_hat * tail_mass
        c_sup = c_sum = None
        if v is not None:
            c_sup, c_sum = weighted_tail_constants(c, ps, v, B_hat, n)

        if inside_mass < 0.5:
            detail = f"mass condition failed: inside mass {inside_mass:.4f} < 1/2"
            if strict:
                raise MassConditionFailed(f"radius {n}: {detail}")
            logger.warning("radius %.4g: %s", n, detail)
            rows.append(LemmaRow(float(n), size, lhs, tail_mass, bound + slack, slack, rigorous_slack,
                                 floor, False, False, False, detail, c_sup, c_sum))
            continue

        passed = lhs <= bound + slack + floor
        rigorous = lhs <= bound + rigorous_slack + floor
        detail = "holds" if passed else f"a_n exceeds the bound by {lhs - bound - slack:.3e}"
        rows.append(LemmaRow(float(n), size, lhs, tail_mass, bound + slack, slack, rigorous_slack,
                             floor, True, passed, rigorous, detail, c_sup, c_sum))
    return rows


def resolvent_decay_norm(G: GramSection, z: complex, v: WeightSpec) -> float:
    """sup |((z I - G)^{-1})[lambda, mu]| v(lambda - mu) on the section"""
    M = G.entries
    eigs = linalg.eigvalsh(M)
    distance = float(np.min(np.abs(z - eigs)))
    X = _checked_resolvent(M, complex(z), distance)
    return weighted_sup(X, G.pointset, v)
