import unittest

import numpy as np

from src.errors import InvalidInput, RadiiNotAscending
from src.gram import assemble_gram
from src.pointsets import LatticeSpec, enumerate_lattice_in_ball
from src.spectrum import (
    EPS,
    RieszBounds,
    bessel_estimate,
    detect_gap,
    eigs_hermitian,
    floor_gap,
    riesz_sweep,
    sweep_section,
    widest_gap,
)
from src.windows import WindowSpec

RADII = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]


class TestEigensolver(unittest.TestCase):

    def test_eigenvalues_ascending(self):
        """Test ascending eigenvalues of a Hermitian matrix"""
        M = np.array([[2.0, 1j], [-1j, 2.0]])
        np.testing.assert_allclose(eigs_hermitian(M), [1.0, 3.0], atol=1e-14)

    def test_eigenvectors(self):
        """Test eigenpairs satisfy the residual contract"""
        M = np.diag([3.0, 1.0, 2.0]).astype(complex)
        eigs, U = eigs_hermitian(M, vectors=True)
        np.testing.assert_allclose(eigs, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(np.abs(U[1, 0]), 1.0)

    def test_rejects_non_square(self):
        """Test shape validation"""
        with self.assertRaises(InvalidInput):
            eigs_hermitian(np.zeros((2, 3)))


class TestRieszSweep(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.phi = WindowSpec.gaussian()
        self.dense = LatticeSpec.scaled_identity(2 ** -0.5)
        self.sweep = riesz_sweep(self.phi, self.dense, RADII)

    def test_sizes(self):
        """Test section sizes along the sweep"""
        sizes = [row.size for row in self.sweep]
        self.assertEqual(sizes, [1, 9, 13, 25, 37, 61, 69, 101])
        self.assertTrue(all(a < b for a, b in zip(sizes, sizes[1:])))

    def test_single_point_section(self):
        """Test the one-point section has a_n = b_n = ||g||^2"""
        first = self.sweep[0]
        self.assertAlmostEqual(first.a_n, 2 ** -0.5, places=15)
        self.assertAlmostEqual(first.b_n, 2 ** -0.5, places=15)
        self.assertFalse(first.below_floor)

    def test_interlacing(self):
        """Test a_n nonincreasing and b_n nondecreasing"""
        b_max = max(row.b_n for row in self.sweep)
        for prev, row in zip(self.sweep, self.sweep[1:]):
            self.assertLessEqual(row.a_n, prev.a_n + 1e-12 * b_max)
            self.assertGreaterEqual(row.b_n, prev.b_n - 1e-12 * b_max)

    def test_floor(self):
        """Test floor = eps * N * b_n"""
        for row in self.sweep:
            self.assertAlmostEqual(row.floor, EPS * row.size * row.b_n, places=20)
            self.assertEqual(row.below_floor, row.a_n < row.floor)

    def test_numerical_dependence(self):
        """Test that a_n collapses below the floor by radius 4, at least halving per step"""
        self.assertTrue(any(row.below_floor for row in self.sweep if row.radius <= 4.0))
        above = [row for row in self.sweep if not row.below_floor]
        for prev, row in zip(above, above[1:]):
            if row.radius - prev.radius == 0.5:
                self.assertLessEqual(row.a_n / prev.a_n, 0.5, f"radius {row.radius}")

    def test_bessel_bound_stabilizes(self):
        """Test B_hat and the last-step ratio"""
        b_hat, ratio = bessel_estimate(self.sweep)
        self.assertAlmostEqual(b_hat, self.sweep[-1].b_n, places=12)
        self.assertGreaterEqual(ratio, 1.0 - 1e-12)
        self.assertLess(ratio, 1.05)

    def test_sweep_section_matches(self):
        """Test sweeping one assembled section equals the direct sweep"""
        G = assemble_gram(self.phi, enumerate_lattice_in_ball(self.dense, 4.0))
        rows = sweep_section(G, RADII)
        self.assertEqual(rows, self.sweep)

    def test_workers_do_not_change_result(self):
        """Test the ordered reduction across worker counts"""
        parallel = riesz_sweep(self.phi, self.dense, RADII, workers=4)
        self.assertEqual(parallel, self.sweep)

    def test_point_cloud_input(self):
        """Test sweeping an explicit point set"""
        ps = enumerate_lattice_in_ball(self.dense, 4.0)
        rows = riesz_sweep(self.phi, ps, [1.0, 2.0])
        self.assertEqual([row.size for row in rows], [9, 25])

    def test_radii_validation(self):
        """Test empty and descending radius lists"""
        with self.assertRaises(InvalidInput):
            riesz_sweep(self.phi, self.dense, [])
        with self.assertRaises(RadiiNotAscending):
            riesz_sweep(self.phi, self.dense, [2.0, 1.0])


class TestGapDetection(unittest.TestCase):

    def test_threshold_gap(self):
        """Test a clean gap"""
        gap = detect_gap([1e-18, 0.4, 0.9], 1e-6)
        self.assertTrue(gap.gap_found)
        self.assertEqual(gap.cluster_zero, (1e-18,))
        self.assertEqual(gap.band, (0.4, 0.9))
        self.assertEqual(gap.a_hat, 0.4)
        self.assertEqual(gap.b_hat, 0.9)

    def test_no_cluster(self):
        """Test a spectrum bounded away from zero"""
        gap = detect_gap([0.1, 0.5, 1.0])
        self.assertFalse(gap.gap_found)
        self.assertEqual(gap.cluster_zero, ())
        self.assertIsNone(gap.to_dict()["cluster_max"])

    def test_band_too_close(self):
        """Test the decade separation requirement"""
        gap = detect_gap([1e-6, 5e-4, 1.0])
        self.assertFalse(gap.gap_found)
        self.assertAlmostEqual(gap.ratio, 5.0)

    def test_input_validation(self):
        """Test empty and unsorted spectra"""
        with self.assertRaises(InvalidInput):
            detect_gap([])
        with self.assertRaises(InvalidInput):
            detect_gap([1.0, 0.5])

    def test_widest_gap(self):
        """Test the widest consecutive ratio cut"""
        gap = widest_gap([1e-12, 1e-3, 0.5, 1.0])
        self.assertTrue(gap.gap_found)
        self.assertEqual(gap.mode, "widest")
        self.assertAlmostEqual(gap.threshold, np.sqrt(5e-4))
        self.assertEqual(gap.cluster_zero, (1e-12, 1e-3))
        self.assertEqual(gap.band, (0.5, 1.0))
        self.assertAlmostEqual(gap.ratio, 500.0)
        self.assertGreaterEqual(gap.a_hat / gap.threshold, 10.0)

    def test_widest_gap_keeps_a_decade(self):
        """Test the cut drops to A_hat / 10 when the pair is under two decades apart"""
        gap = widest_gap([0.002, 0.1, 1.0])
        self.assertTrue(gap.gap_found)
        self.assertAlmostEqual(gap.threshold, 0.01)
        self.assertEqual(gap.cluster_zero, (0.002,))
        self.assertGreaterEqual(gap.a_hat, 10.0 * gap.threshold * (1.0 - 1e-12))

    def test_widest_gap_needs_two_values(self):
        """Test a window with fewer than two eigenvalues"""
        gap = widest_gap([1.0])
        self.assertFalse(gap.gap_found)
        self.assertEqual(gap.mode, "widest")

    def test_widest_gap_needs_a_decade(self):
        """Test ratios below 10 are not a gap"""
        self.assertFalse(widest_gap([0.1, 0.5, 1.0]).gap_found)
        self.assertFalse(widest_gap([0.01, 0.1, 1.0]).gap_found)
        self.assertFalse(widest_gap([1e-3, 5e-3, 1.0], min_ratio=1000.0).gap_found)
        with self.assertRaises(InvalidInput):
            widest_gap([0.5, 0.8, 1.0], min_ratio=2.0)

    def test_floor_gap(self):
        """Test the cut at eps * N * b"""
        gap = floor_gap([1e-18, 1e-17, 0.3, 1.0])
        self.assertTrue(gap.gap_found)
        self.assertEqual(gap.mode, "floor")
        self.assertEqual(gap.threshold, EPS * 4)
        self.assertEqual(gap.cluster_zero, (1e-18, 1e-17))
        self.assertEqual(gap.band, (0.3, 1.0))

    def test_floor_gap_cases(self):
        """Test roundoff-negative clusters, empty clusters and bad input"""
        gap = floor_gap([-1e-16, 0.5, 1.0])
        self.assertTrue(gap.gap_found)
        self.assertEqual(gap.cluster_max, -1e-16)
        self.assertFalse(floor_gap([0.1, 1.0]).gap_found)
        with self.assertRaises(InvalidInput):
            floor_gap([])
        with self.assertRaises(InvalidInput):
            floor_gap([1.0, 0.5])

    def test_critical_density_has_no_gap(self):
        """Test Gaussian on Z^2: no near-zero cluster at radius 4 in any mode"""
        ps = enumerate_lattice_in_ball(LatticeSpec.integer(), 4.0)
        eigs = eigs_hermitian(assemble_gram(WindowSpec.gaussian(), ps))
        self.assertFalse(detect_gap(eigs).gap_found)
        self.assertFalse(widest_gap(eigs).gap_found)
        self.assertFalse(floor_gap(eigs).gap_found)

    def test_frame_section_near_kernel(self):
        """Test the dense lattice: no decade gap, but a numerically zero cluster"""
        ps = enumerate_lattice_in_ball(LatticeSpec.scaled_identity(2 ** -0.5), 4.0)
        eigs = eigs_hermitian(assemble_gram(WindowSpec.gaussian(), ps))
        self.assertFalse(widest_gap(eigs).gap_found)
        gap = floor_gap(eigs)
        self.assertTrue(gap.gap_found)
        self.assertGreater(len(gap.cluster_zero), 0)
        self.assertLess(gap.cluster_max, gap.threshold)
        self.assertGreaterEqual(gap.a_hat, gap.threshold)
        self.assertAlmostEqual(gap.threshold, EPS * len(ps) * eigs[-1], places=25)


class TestRieszBounds(unittest.TestCase):

    def test_from_eigenvalues(self):
        """Test construction from a spectrum"""
        row = RieszBounds.from_eigenvalues(2.0, np.array([1e-20, 0.5, 1.0]))
        self.assertEqual(row.size, 3)
        self.assertTrue(row.below_floor)
        self.assertEqual(row.to_dict()["radius"], 2.0)

    def test_bessel_estimate_single_row(self):
        """Test the stabilization ratio of a one-row sweep"""
        row = RieszBounds.from_eigenvalues(1.0, np.array([0.5, 1.0]))
        self.assertEqual(bessel_estimate([row]), (1.0, 1.0))
        with self.assertRaises(InvalidInput):
            bessel_estimate([])


if __name__ == '__main__':
    unittest.main()
