"""
Self-test suite behind `gabor-sections selftest`.

Every check returns (passed, detail), closed-form values and the adaptive
oracle serving as references.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from ..analysis_report import fit_decay
from ..errors import GaborSectionsError
from ..gram import GramSection, assemble_gram
from ..kernel_projection import (
    ContourSpec,
    contour_projection,
    decay_fit,
    lemma_bound_check,
    resolvent_decay_norm,
)
from ..pointsets import (
    LatticeSpec,
    enumerate_lattice_in_ball,
    explicit_in_ball,
    relative_separation,
)
from ..spectrum import RieszBounds, detect_gap, eigs_hermitian
from ..weights import WeightSpec, bound_sup, grs_profile, submultiplicative_check
from ..windows import (
    TFPoint,
    WindowSpec,
    adaptive_ambiguity_oracle,
    gaussian_ambiguity,
    inner_product_oracle,
    numeric_ambiguity,
)

logger = logging.getLogger(__name__)

Check = Callable[[], Tuple[bool, str]]


@dataclass(frozen=True)
class SelfTestResult:
    name: str
    passed: bool
    detail: str


def _close(value: complex, expected: complex, tol: float, what: str) -> Tuple[bool, str]:
    error = abs(value - expected)
    if error <= tol:
        return True, f"{what}: {value:.6g} (error {error:.1e})"
    return False, f"{what}: got {value:.10g}, expected {expected:.10g} (error {error:.1e})"


def _random_points(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    angle = rng.uniform(0.0, 2.0 * np.pi, count)
    r = radius * np.sqrt(rng.random(count))
    return np.column_stack([r * np.cos(angle), r * np.sin(angle)])


class SelfTest:
    """The trivial and oracle-backed examples, runnable without a config"""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.phi = WindowSpec.gaussian()

    def checks(self) -> List[Tuple[str, Check]]:
        return [
            ("ambiguity at origin", self.check_ambiguity_origin),
            ("ambiguity closed form vs oracle", self.check_ambiguity_examples),
            ("ambiguity oracle agreement", self.check_ambiguity_random),
            ("sampled Gaussian quadrature", self.check_sampled_quadrature),
            ("Gram phase gate", self.check_gram_phase),
            ("2x2 section eigenvalues", self.check_two_point_section),
            ("lattice enumeration counts", self.check_lattice_counts),
            ("relative separation", self.check_relative_separation),
            ("weight values and GRS profiles", self.check_weights),
            ("submultiplicativity", self.check_submultiplicative),
            ("sup bound", self.check_bound_sup),
            ("gap detection", self.check_gap),
            ("contour projection", self.check_contour),
            ("decay fits", self.check_fits),
            ("lemma on exact kernel", self.check_lemma),
            ("resolvent norm", self.check_resolvent),
        ]

    def check_ambiguity_origin(self) -> Tuple[bool, str]:
        return _close(gaussian_ambiguity(TFPoint((0.0,), (0.0,))), 2 ** -0.5, 1e-15, "A(0)")

    def check_ambiguity_examples(self) -> Tuple[bool, str]:
        for z, expected in [((1.0, 0.0), 2 ** -0.5 * math.exp(-math.pi / 2)),
                            ((1.0, 1.0), -(2 ** -0.5) * math.exp(-math.pi))]:
            point = TFPoint.from_vector(z)
            oracle = adaptive_ambiguity_oracle(self.phi, point)
            ok, detail = _close(gaussian_ambiguity(point), oracle, 1e-12, f"A{z}")
            if not ok or abs(oracle - expected) > 1e-12:
                return False, detail
        return True, "A(1,0) and A(1,1) match the adaptive oracle"

    def check_ambiguity_random(self) -> Tuple[bool, str]:
        rng = np.random.default_rng(self.seed)
        errors = []
        for z in _random_points(rng, 100, 4.0):
            point = TFPoint.from_vector(z)
            oracle = adaptive_ambiguity_oracle(self.phi, point)
            errors.append(abs(gaussian_ambiguity(point) - oracle) / abs(oracle))
        worst, median = max(errors), float(np.median(errors))
        detail = f"100 points |z| <= 4: max rel {worst:.1e}, median {median:.1e}"
        return worst <= 1e-6 and median <= 1e-10, detail

    def check_sampled_quadrature(self) -> Tuple[bool, str]:
        sampled = WindowSpec.sampled_gaussian(-6.0, 6.0, 1.0 / 64.0)
        at_origin = numeric_ambiguity(sampled, TFPoint((0.0,), (0.0,)))
        if abs(at_origin.imag) > 1e-12:
            return False, f"A(0) has imaginary part {at_origin.imag:.1e}"
        ok, detail = _close(at_origin, 2 ** -0.5, 1e-8, "sampled A(0)")
        if not ok:
            return ok, detail
        return _close(numeric_ambiguity(sampled, TFPoint((1.0,), (0.0,))),
                      2 ** -0.5 * math.exp(-math.pi / 2), 1e-6, "sampled A(1,0)")

    def check_gram_phase(self) -> Tuple[bool, str]:
        rng = np.random.default_rng(self.seed + 1)
        worst = 0.0
        for _ in range(20):
            pair = rng.uniform(-2.0, 2.0, size=(2, 2))
            ps = explicit_in_ball(pair, 3.0)
            G = assemble_gram(self.phi, ps, check=False)
            lam, mu = ps.points
            oracle = inner_product_oracle(self.phi, mu, lam)
            worst = max(worst, abs(G.entries[0, 1] - oracle) / abs(oracle))
        return worst <= 1e-6, f"20 random pairs: max rel error {worst:.1e}"

    def check_two_point_section(self) -> Tuple[bool, str]:
        ps = explicit_in_ball(np.array([[0.0, 0.0], [2 ** -0.5, 0.0]]), 1.0)
        eigs = eigs_hermitian(assemble_gram(self.phi, ps))
        modulus = 2 ** -0.5 * math.exp(-math.pi / 4)
        expected = np.array([2 ** -0.5 - modulus, 2 ** -0.5 + modulus])
        error = float(np.max(np.abs(eigs - expected)))
        return error <= 1e-10, f"eigenvalues {eigs[0]:.5f}, {eigs[1]:.5f} (error {error:.1e})"

    def check_lattice_counts(self) -> Tuple[bool, str]:
        dense = LatticeSpec.scaled_identity(2 ** -0.5)
        counts = (
            len(enumerate_lattice_in_ball(dense, math.sqrt(2.0))),
            len(enumerate_lattice_in_ball(LatticeSpec.integer(), 1.0)),
            len(enumerate_lattice_in_ball(dense, 0.0)),
        )
        return counts == (13, 5, 1), f"counts {counts}, expected (13, 5, 1)"

    def check_relative_separation(self) -> Tuple[bool, str]:
        value = relative_separation(enumerate_lattice_in_ball(LatticeSpec.integer(), 3.0))
        return value == 5, f"Z^2 relative separation {value}"

    def check_weights(self) -> Tuple[bool, str]:
        checks = [
            (WeightSpec.polynomial(2).eval_radius(3.0), 16.0),
            (WeightSpec.subexponential(1, 0.5).eval_radius(4.0), math.exp(2.0)),
            (grs_profile(WeightSpec.polynomial(2), TFPoint((1.0,), (0.0,)), [10 ** 6])[0],
             math.exp(2.0 * math.log(10 ** 6 + 1) / 10 ** 6)),
            (grs_profile(WeightSpec.exponential(1), TFPoint((0.6,), (0.8,)), [7])[0], math.e),
        ]
        for value, expected in checks:
            if abs(value - expected) > 1e-9 * expected:
                return False, f"got {value!r}, expected {expected!r}"
        return True, "weight values and GRS profiles match closed forms"

    def check_submultiplicative(self) -> Tuple[bool, str]:
        for v in (WeightSpec.polynomial(3), WeightSpec.exponential(1), WeightSpec.subexponential(1, 0.5)):
            passed, worst = submultiplicative_check(v, 1000, seed=self.seed)
            if not passed:
                return False, f"{v.describe()}: worst ratio {worst:.6f}"
        return True, "three weight families, 1000 trials each"

    def check_bound_sup(self) -> Tuple[bool, str]:
        ps = enumerate_lattice_in_ball(LatticeSpec.integer(), 5.0)
        return _close(bound_sup(WeightSpec.polynomial(1), ps, 1.0), (1 + math.sqrt(2)) ** -2,
                      1e-12, "bound_sup")

    def check_gap(self) -> Tuple[bool, str]:
        gap = detect_gap([1e-18, 0.4, 0.9], 1e-6)
        ok = gap.gap_found and gap.cluster_zero == (1e-18,) and gap.band == (0.4, 0.9)
        return ok, f"gap_found={gap.gap_found}, band={gap.band}"

    def check_contour(self) -> Tuple[bool, str]:
        result = contour_projection(np.diag([0.0, 1.0]), ContourSpec(0.5, 32))
        error = float(np.max(np.abs(result.P - np.diag([1.0, 0.0]))))
        traced = contour_projection(np.diag([0.0, 0.0, 1.0, 2.0]), ContourSpec(0.5))
        ok = error <= 1e-9 and traced.rank_estimate == 2
        return ok, f"diag(0,1): error {error:.1e}; diag(0,0,1,2): trace {traced.trace:.12f}"

    def check_fits(self) -> Tuple[bool, str]:
        radii = np.arange(1.0, 6.0, 0.5)
        power = [RieszBounds(r, 1, r ** -4.0, 1.0, 0.0, False) for r in radii]
        slope = fit_decay(power, "power").slope
        if abs(slope + 4.0) > 1e-9:
            return False, f"power slope {slope}"
        ps = enumerate_lattice_in_ball(LatticeSpec.integer(), 6.0)
        c = np.exp(-ps.norms)
        fit = decay_fit(c / np.linalg.norm(c), ps, WeightSpec.constant())
        return abs(fit.slope + 1.0) <= 0.01, f"power slope {slope:.6f}, kernel slope {fit.slope:.6f}"

    def check_lemma(self) -> Tuple[bool, str]:
        u = np.array([0.8, 0.0, 0.6, 0.0])
        ps = explicit_in_ball(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]), 3.0)
        G = GramSection(np.eye(4) - np.outer(u, u), ps, self.phi)
        rows = lemma_bound_check(u, G, [0.5, 1.5], 1.0)
        ok = all(row.passed for row in rows) and all(row.slack <= 1e-14 for row in rows)
        return ok, "; ".join(f"n={row.radius}: {row.lhs:.3f} <= {row.rhs:.3f}" for row in rows)

    def check_resolvent(self) -> Tuple[bool, str]:
        ps = explicit_in_ball(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)
        G = GramSection(np.zeros((2, 2), dtype=complex), ps, self.phi)
        value = resolvent_decay_norm(G, 1.0, WeightSpec.polynomial(2))
        return _close(value, 1.0, 1e-14, "resolvent norm of the zero matrix")

    def run(self) -> List[SelfTestResult]:
        results = []
        for name, check in self.checks():
            try:
                passed, detail = check()
            except GaborSectionsError as exc:
                passed, detail = False, f"{exc.code}: {exc}"
            logger.debug("%s: %s (%s)", name, "ok" if passed else "FAILED", detail)
            results.append(SelfTestResult(name, bool(passed), detail))
        return results


def run_selftest(seed: int = 0) -> List[SelfTestResult]:
    return SelfTest(seed).run()
