import math
import tracemalloc
import unittest

import numpy as np

from src.errors import (
    GapMissing,
    InvalidInput,
    MassConditionFailed,
    RankZero,
    SingularResolvent,
    TooFewPoints,
)
from src.gram import GramSection, assemble_gram
from src.kernel_projection import (
    ContourSpec,
    contour_projection,
    decay_fit,
    eigen_projection,
    kernel_vector,
    lemma_bound_check,
    near_kernel_projection,
    resolvent_decay_norm,
    weighted_tail_constants,
)
from src.pointsets import LatticeSpec, enumerate_lattice_in_ball, explicit_in_ball
from src.spectrum import EPS, GapReport, detect_gap, eigs_hermitian, floor_gap, widest_gap
from src.weights import WeightSpec
from src.windows import WindowSpec


def _line_section(entries):
    """A GramSection on the points (0,0), (1,0), (2,0), (3,0)"""
    ps = explicit_in_ball(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]), 3.0)
    return GramSection(np.asarray(entries, dtype=complex), ps, WindowSpec.gaussian())


def _planted(spectrum, seed=0):
    """Q diag(spectrum) Q* for a random unitary Q"""
    rng = np.random.default_rng(seed)
    n = len(spectrum)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    G = (Q * np.asarray(spectrum, dtype=float)) @ Q.conj().T
    return 0.5 * (G + G.conj().T)


def _dense_section(radius):
    ps = enumerate_lattice_in_ball(LatticeSpec.scaled_identity(2 ** -0.5), radius)
    return assemble_gram(WindowSpec.gaussian(), ps)


class TestContourSpec(unittest.TestCase):

    def test_validation(self):
        """Test radius, node count and centre checks"""
        with self.assertRaises(InvalidInput):
            ContourSpec(0.0)
        with self.assertRaises(InvalidInput):
            ContourSpec(0.5, nodes=8)
        with self.assertRaises(InvalidInput):
            ContourSpec(0.5, center=1.0)

    def test_nodes_on_circle(self):
        """Test node placement"""
        points = ContourSpec(0.25, 32).points()
        self.assertEqual(points.size, 32)
        np.testing.assert_allclose(np.abs(points), 0.25)
        self.assertAlmostEqual(points[0], 0.25)

    def test_from_gap(self):
        """Test radius selection per gap mode"""
        threshold = detect_gap([1e-18, 0.4, 0.9], 1e-6)
        self.assertAlmostEqual(ContourSpec.from_gap(threshold).radius, 0.2)
        widest = widest_gap([1e-12, 1e-3, 0.5, 1.0])
        self.assertAlmostEqual(ContourSpec.from_gap(widest, 32).radius, math.sqrt(5e-4))
        floor = floor_gap([-1e-16, 0.5, 1.0])
        self.assertAlmostEqual(ContourSpec.from_gap(floor).radius, 0.05)
        with self.assertRaises(GapMissing):
            ContourSpec.from_gap(detect_gap([0.1, 0.5, 1.0]))

    def test_validate_against_gap(self):
        """Test radii outside the gap are rejected"""
        gap = detect_gap([1e-18, 0.4, 0.9], 1e-6)
        ContourSpec(0.2).validate(gap)
        with self.assertRaises(InvalidInput):
            ContourSpec(0.5).validate(gap)
        missing = GapReport((0.1, 1.0), 1e-4, (), (0.1, 1.0), False)
        with self.assertRaises(GapMissing):
            ContourSpec(0.05).validate(missing)


class TestContourProjection(unittest.TestCase):

    def test_diagonal_example(self):
        """Test P = diag(1, 0) for diag(0, 1)"""
        result = contour_projection(np.diag([0.0, 1.0]), ContourSpec(0.5, 32))
        np.testing.assert_allclose(result.P, np.diag([1.0, 0.0]), atol=1e-9)
        self.assertEqual(result.rank_estimate, 1)

    def test_trace_counts_eigenvalues(self):
        """Test trace(P) for a double eigenvalue at zero"""
        result = contour_projection(np.diag([0.0, 0.0, 1.0, 2.0]), ContourSpec(0.5))
        self.assertEqual(result.rank_estimate, 2)
        self.assertAlmostEqual(result.trace, 2.0, places=9)
        self.assertLess(result.idempotency_defect, 1e-12)

    def test_node_on_eigenvalue(self):
        """Test a contour through the spectrum"""
        with self.assertRaises(SingularResolvent):
            contour_projection(np.diag([0.0, 0.5, 2.0]), ContourSpec(0.5))

    def test_empty_projection(self):
        """Test a positive definite matrix has no near-kernel"""
        ps = explicit_in_ball(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)
        result = contour_projection(np.diag([1.0, 2.0]), ContourSpec(0.5))
        self.assertEqual(result.rank_estimate, 0)
        with self.assertRaises(RankZero):
            kernel_vector(result, ps)


class TestPlantedGap(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        spectrum = np.concatenate([[0.0, 1e-12, 1e-10, 1e-9], np.linspace(0.2, 1.5, 20)])
        self.G = _planted(spectrum)
        self.eigs = eigs_hermitian(self.G)
        self.gap = detect_gap(self.eigs)
        self.contour = ContourSpec.from_gap(self.gap)

    def test_matches_eigen_projection(self):
        """Test contour projection against the eigenvector oracle"""
        contour = contour_projection(self.G, self.contour, gap=self.gap)
        oracle = eigen_projection(self.G, self.contour.radius)
        self.assertLessEqual(np.linalg.norm(contour.P - oracle.P), 1e-8)
        self.assertEqual(contour.rank_estimate, 4)
        self.assertEqual(oracle.method, "eigen")

    def test_node_doubling(self):
        """Test convergence in the number of nodes"""
        coarse = contour_projection(self.G, self.contour)
        fine = contour_projection(self.G, ContourSpec(self.contour.radius, 128))
        self.assertLessEqual(np.linalg.norm(coarse.P - fine.P), 1e-10)

    def test_projects_below_radius(self):
        """Test ||G P|| <= rho ||P|| and the near-kernel vector residual"""
        result = contour_projection(self.G, self.contour)
        P = result.P
        self.assertLessEqual(np.linalg.norm(self.G @ P),
                             self.contour.radius * np.linalg.norm(P) * (1 + 1e-6))
        ps = enumerate_lattice_in_ball(LatticeSpec.integer(), 3.0)
        _, c = kernel_vector(result, explicit_in_ball(ps.coordinates[:24], 3.0))
        self.assertAlmostEqual(np.linalg.norm(c), 1.0, places=12)
        self.assertLessEqual(np.linalg.norm(self.G @ c), 1e-9 * (1 + 1e-6))

    def test_workers_do_not_change_result(self):
        """Test the ordered sum across worker counts"""
        serial = contour_projection(self.G, self.contour)
        parallel = contour_projection(self.G, self.contour, workers=4)
        np.testing.assert_array_equal(serial.P, parallel.P)

    def test_projection_is_hermitian(self):
        """Test P = P* after symmetrization"""
        result = contour_projection(self.G, self.contour)
        np.testing.assert_array_equal(result.P, result.P.conj().T)
        self.assertLessEqual(result.idempotency_defect, 1e-8 * len(self.G))
        self.assertIn("near-kernel", result.to_dict()["note"])

    def test_near_kernel_projection(self):
        """Test both methods and the recorded distance between them"""
        result, agreement = near_kernel_projection(self.G, self.contour, gap=self.gap)
        self.assertEqual(result.method, "contour")
        self.assertLessEqual(agreement["frobenius"], 1e-8)
        self.assertIsNone(agreement["error"])
        result, agreement = near_kernel_projection(self.G, self.contour, method="eigen")
        self.assertEqual(result.method, "eigen")
        self.assertEqual(result.to_dict()["contour_radius"], self.contour.radius)
        self.assertLessEqual(agreement["frobenius"], 1e-8)
        with self.assertRaises(InvalidInput):
            near_kernel_projection(self.G, self.contour, method="lanczos")

    def test_failed_contour_is_recorded(self):
        """Test a contour through the spectrum under the eigen method"""
        G = np.diag([0.0, 0.5, 2.0])
        result, agreement = near_kernel_projection(G, ContourSpec(0.5), method="eigen")
        self.assertEqual(result.rank_estimate, 1)
        self.assertIsNone(agreement["frobenius"])
        self.assertTrue(agreement["error"].startswith("SingularResolvent"))

    def test_terms_are_not_held(self):
        """Test peak memory stays far below one resolvent per node"""
        G = _planted(np.concatenate([[0.0, 0.0], np.linspace(0.5, 1.0, 118)]), seed=3)
        contour = ContourSpec(0.25, 128)
        term_bytes = G.shape[0] ** 2 * 16
        tracemalloc.start()
        try:
            contour_projection(G, contour)
            _, peak = tracemalloc.get_traced_memory()
        finally:
            tracemalloc.stop()
        self.assertLess(peak, 40 * term_bytes)


class TestGaussianNearKernel(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.G = _dense_section(4.0)
        self.eigs = eigs_hermitian(self.G)
        self.gap = floor_gap(self.eigs)
        self.contour = ContourSpec.from_gap(self.gap)
        self.floor = EPS * len(self.G) * float(self.eigs[-1])

    def test_radius_inside_the_floor_gap(self):
        """Test the contour radius separates the numerically zero cluster"""
        self.contour.validate(self.gap)
        self.assertEqual(int(np.count_nonzero(self.eigs < self.contour.radius)), len(self.gap.cluster_zero))

    def test_kernel_vector_at_the_floor(self):
        """Test ||G c|| <= 10 floor for the anchored near-kernel vector"""
        result, agreement = near_kernel_projection(self.G, self.contour, gap=self.gap, method="eigen")
        self.assertEqual(result.rank_estimate, len(self.gap.cluster_zero))
        self.assertTrue(agreement["frobenius"] is None or agreement["frobenius"] >= 0.0)
        mu, c = kernel_vector(result, self.G.pointset, anchor=0)
        self.assertEqual(mu, 0)
        self.assertAlmostEqual(np.linalg.norm(c), 1.0, places=12)
        self.assertLessEqual(np.linalg.norm(self.G.entries @ c), 10.0 * self.floor)

        argmax, _ = kernel_vector(result, self.G.pointset)
        self.assertTrue(0 <= argmax < len(self.G))
        with self.assertRaises(InvalidInput):
            kernel_vector(result, self.G.pointset, anchor=len(self.G))

    def test_decay(self):
        """Test the near-kernel vector decays away from its anchor"""
        result = eigen_projection(self.G, self.contour.radius)
        _, c = kernel_vector(result, self.G.pointset, anchor=0)
        fit = decay_fit(c, self.G.pointset, WeightSpec.subexponential(1, 0.5))
        self.assertLess(fit.slope, 0.0)
        self.assertTrue(0.0 <= fit.r_squared <= 1.0)

    def test_resolvent_norm(self):
        """Test the weighted resolvent norm off the real axis"""
        z = 1j * self.contour.radius
        section = self.G.section_for_radius(3.0)
        plain = resolvent_decay_norm(section, z, WeightSpec.constant())
        weighted = resolvent_decay_norm(section, z, WeightSpec.polynomial(2))
        self.assertTrue(math.isfinite(weighted))
        self.assertGreaterEqual(weighted, plain)
        self.assertGreater(plain, 0.0)


class TestDecayFit(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.ps = enumerate_lattice_in_ball(LatticeSpec.integer(), 6.0)

    def test_exponential_profile(self):
        """Test slope -1 for c = e^{-|lambda|}"""
        c = np.exp(-self.ps.norms)
        fit = decay_fit(c / np.linalg.norm(c), self.ps, WeightSpec.constant())
        self.assertAlmostEqual(fit.slope, -1.0, places=9)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=9)
        self.assertEqual(fit.points_used, len(self.ps))

    def test_weighted_norms(self):
        """Test the l1_v and linf_v norms"""
        c = np.zeros(len(self.ps))
        c[0] = 1.0
        c = c + 1e-3 * np.exp(-self.ps.norms)
        c /= np.linalg.norm(c)
        fit = decay_fit(c, self.ps, WeightSpec.constant())
        self.assertAlmostEqual(fit.l1_v, float(np.sum(np.abs(c))))
        self.assertAlmostEqual(fit.linf_v, float(np.max(np.abs(c))))

    def test_too_few_points(self):
        """Test the minimum support size"""
        small = enumerate_lattice_in_ball(LatticeSpec.integer(), 1.0)
        with self.assertRaises(TooFewPoints):
            decay_fit(np.full(5, 1 / math.sqrt(5)), small, WeightSpec.constant())

    def test_input_validation(self):
        """Test length and normalization checks"""
        with self.assertRaises(InvalidInput):
            decay_fit(np.ones(3), self.ps, WeightSpec.constant())
        with self.assertRaises(InvalidInput):
            decay_fit(np.ones(len(self.ps)), self.ps, WeightSpec.constant())
        c = np.exp(-self.ps.norms)
        c /= np.linalg.norm(c)
        decay_fit(c * (1 + 1e-13), self.ps, WeightSpec.constant())
        with self.assertRaises(InvalidInput):
            decay_fit(c * (1 + 1e-10), self.ps, WeightSpec.constant())


class TestLemmaCheck(unittest.TestCase):

    def test_exact_kernel(self):
        """Test the exact-kernel block matrix passes with zero slack"""
        u = np.array([0.8, 0.0, 0.6, 0.0])
        G = _line_section(np.eye(4) - np.outer(u, u))
        rows = lemma_bound_check(u, G, [0.5, 1.5], 1.0)
        self.assertEqual(len(rows), 2)
        for row in rows:
            self.assertTrue(row.passed)
            self.assertTrue(row.rigorous_passed)
            self.assertTrue(row.mass_ok)
            self.assertLessEqual(row.slack, 1e-14)
            self.assertAlmostEqual(row.lhs, 0.36)
            self.assertAlmostEqual(row.tail_mass, 0.36)

    def test_mass_condition(self):
        """Test a vector with too little mass inside the sub-section"""
        u = np.array([0.6, 0.0, 0.8, 0.0])
        G = _line_section(np.eye(4) - np.outer(u, u))
        rows = lemma_bound_check(u, G, [0.5], 1.0)
        self.assertFalse(rows[0].mass_ok)
        self.assertFalse(rows[0].passed)
        with self.assertRaises(MassConditionFailed):
            lemma_bound_check(u, G, [0.5], 1.0, strict=True)

    def test_sub_radius_validation(self):
        """Test sub-radii must lie inside the section"""
        u = np.array([0.8, 0.0, 0.6, 0.0])
        G = _line_section(np.eye(4) - np.outer(u, u))
        with self.assertRaises(InvalidInput):
            lemma_bound_check(u, G, [3.0], 1.0)

    def test_tail_constants(self):
        """Test the implied constants of both decay bounds"""
        u = np.array([0.8, 0.0, 0.6, 0.0])
        ps = _line_section(np.eye(4)).pointset
        c_sup, c_sum = weighted_tail_constants(u, ps, WeightSpec.constant(), 1.0, 0.5)
        self.assertAlmostEqual(c_sup, 0.72)
        self.assertAlmostEqual(c_sum, 0.72)
        c_sup, c_sum = weighted_tail_constants(u, ps, WeightSpec.polynomial(1), 1.0, 0.5)
        self.assertAlmostEqual(c_sup, 2 * 0.36 * 9)
        self.assertEqual(weighted_tail_constants(u, ps, WeightSpec.constant(), 1.0, 2.5), (0.0, 0.0))

    def test_gaussian_near_kernel(self):
        """Test the estimate on the radius-4 near-kernel vector cut at the floor"""
        G = _dense_section(4.0)
        eigs = eigs_hermitian(G)
        gap = floor_gap(eigs)
        result, _ = near_kernel_projection(G, ContourSpec.from_gap(gap), gap=gap, method="eigen")
        _, c = kernel_vector(result, G.pointset, anchor=0)
        rows = lemma_bound_check(c, G, [1.5, 2.0, 2.5], float(eigs[-1]), v=WeightSpec.subexponential(1, 0.5))
        self.assertEqual(len(rows), 3)
        for row in rows:
            self.assertIsNotNone(row.c_sup)
            if row.mass_ok:
                self.assertTrue(row.passed, row.detail)
                self.assertTrue(row.rigorous_passed, row.detail)


class TestResolventNorm(unittest.TestCase):

    def test_zero_matrix(self):
        """Test (zI - 0)^{-1} = I / z"""
        G = _line_section(np.zeros((4, 4)))
        self.assertAlmostEqual(resolvent_decay_norm(G, 1.0, WeightSpec.polynomial(2)), 1.0, places=14)
        self.assertAlmostEqual(resolvent_decay_norm(G, 2.0, WeightSpec.constant()), 0.5, places=14)

    def test_singular_point(self):
        """Test z on the spectrum"""
        G = _line_section(np.diag([0.0, 0.5, 1.0, 1.0]))
        with self.assertRaises(SingularResolvent):
            resolvent_decay_norm(G, 0.5, WeightSpec.constant())


if __name__ == '__main__':
    unittest.main()
