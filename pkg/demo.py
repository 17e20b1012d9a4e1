#!/usr/bin/env python3
"""
Walk-through of the Gaussian finite-section lab on (1/sqrt 2) Z^2
"""

import numpy as np

from src.analysis_report import bound_comparison, fit_decay
from src.gram import assemble_gram, cv_infty_norm
from src.kernel_projection import ContourSpec, kernel_vector, lemma_bound_check, near_kernel_projection
from src.pointsets import LatticeSpec, enumerate_lattice_in_ball, relative_separation
from src.spectrum import EPS, bessel_estimate, eigs_hermitian, floor_gap, riesz_sweep
from src.weights import WeightSpec
from src.windows import TFPoint, WindowSpec, gaussian_ambiguity

RADII = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]


def main():
    print("=" * 60)
    print("GABOR FINITE SECTIONS - DEMO")
    print("=" * 60)
    print()

    # Step 1: Window and lattice
    print("STEP 1: Gaussian window, lattice of density 2")
    print("-" * 40)
    phi = WindowSpec.gaussian()
    lattice = LatticeSpec.scaled_identity(2 ** -0.5)
    print(f"✅ ||phi||^2 = {phi.norm_squared():.6f}")
    print(f"✅ A(1, 1) = {gaussian_ambiguity(TFPoint((1.0,), (1.0,))):.6e}")
    print(f"✅ covolume = {lattice.covolume:.3f}")
    print()

    # Step 2: Gram section
    print("STEP 2: Gram section at radius 4")
    print("-" * 40)
    ps = enumerate_lattice_in_ball(lattice, RADII[-1])
    G = assemble_gram(phi, ps)
    v = WeightSpec.subexponential(1, 0.5)
    print(f"✅ {len(ps)} points, relative separation {relative_separation(ps)}")
    print(f"✅ weighted sup norm for {v.describe()}: {cv_infty_norm(G, v):.4f}")
    print()

    # Step 3: Riesz sweep
    print("STEP 3: Lower Riesz bounds along the radii")
    print("-" * 40)
    sweep = riesz_sweep(phi, lattice, RADII)
    for row in sweep:
        flag = " (below floor)" if row.below_floor else ""
        print(f"   n={row.radius:<4g} N={row.size:<4d} a_n={row.a_n:.3e}  b_n={row.b_n:.4f}{flag}")
    b_hat, ratio = bessel_estimate(sweep)
    print(f"✅ B_hat = {b_hat:.4f} (last-step ratio {ratio:.4f})")
    print()

    # Step 4: Decay fits and bounds
    print("STEP 4: Decay fits and weighted bounds")
    print("-" * 40)
    for model in ("power", "stretched", "gaussian"):
        fit = fit_decay(sweep, model)
        print(f"   {model:10s} slope {fit.slope:+.4f}  R^2 {fit.r_squared:.4f}")
    far = enumerate_lattice_in_ball(lattice, 20.0)
    comparison = bound_comparison(sweep, v, far, n_rel=relative_separation(far))
    print(f"✅ {comparison.verdict}")
    print()

    # Step 5: Near-kernel
    print("STEP 5: Near-kernel vector below the numerical-zero floor")
    print("-" * 40)
    eigs = eigs_hermitian(G)
    gap = floor_gap(eigs)
    if not gap.gap_found:
        print("❌ no eigenvalues below the floor at this radius")
        return
    contour = ContourSpec.from_gap(gap)
    projection, agreement = near_kernel_projection(G, contour, gap=gap, method="eigen")
    _, c = kernel_vector(projection, ps, anchor=0)
    print(f"✅ cut radius {contour.radius:.3e}, rank {projection.rank_estimate}")
    if agreement["error"] is None:
        print(f"   contour vs eigenvectors: {agreement['frobenius']:.3e}")
    else:
        print(f"   contour projection failed: {agreement['error']}")
    residual = float(np.linalg.norm(G.entries @ c))
    floor = EPS * len(ps) * float(eigs[-1])
    mark = "✅" if residual <= 10.0 * floor else "❌"
    print(f"{mark} ||G c|| = {residual:.3e} (10 x floor = {10.0 * floor:.3e})")
    for row in lemma_bound_check(c, G, [1.5, 2.0, 2.5], float(eigs[-1])):
        print(f"   n={row.radius:g}: a_n={row.lhs:.3e} <= {row.rhs:.3e}  {'✅' if row.passed else '❌'}")
    print()

    print("🎯 Demo completed")


if __name__ == "__main__":
    main()
