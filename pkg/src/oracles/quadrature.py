"""
Quadrature engines for time-frequency inner products.

Two independent routes to <pi(z1) f1, pi(z2) f2>:

- a composite trapezoid rule on a uniform grid, with a grid-halving
  comparison (full grid against every other node) as convergence check;
- an adaptive tanh-sinh rule in extended precision (mpmath), used only as
  an oracle for Gaussian windows in d = 1.
"""

import logging
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.integrate import trapezoid

from ..errors import GridTooCoarse

logger = logging.getLogger(__name__)

# Gaussian integrands are below 1e-60 beyond this distance from their centre.
GAUSSIAN_HALF_WIDTH = 7.0
DEFAULT_STEP = 1.0 / 64.0

Profile = Callable[[np.ndarray], np.ndarray]


def uniform_grid(center: float, half_width: float = GAUSSIAN_HALF_WIDTH,
                 step: float = DEFAULT_STEP) -> np.ndarray:
    """Odd-length grid centred on `center`, so that t[::2] keeps both ends"""
    half = int(np.ceil(half_width / step))
    return center + step * np.arange(-half, half + 1)


def halving_check(values: np.ndarray, step: float, rtol: float,
                  scale: float = 0.0, what: str = "integral") -> complex:
    """
    Trapezoid rule on `values` plus the same rule on every other node.

    The relative change is measured against max(|I_h|, 1e-9 * scale), so
    results that are tiny compared with the norms involved are judged on an
    absolute footing.
    """
    fine = trapezoid(values, dx=step)
    coarse = trapezoid(values[::2], dx=2.0 * step)
    denom = max(abs(fine), 1e-9 * scale, np.finfo(float).tiny)
    change = abs(fine - coarse) / denom
    if change > rtol:
        raise GridTooCoarse(
            f"{what}: grid halving changed the result by {change:.2e} (tolerance {rtol:.0e})"
        )
    return complex(fine)


def tf_inner_product(f1: Profile, z1: Sequence[float], f2: Profile, z2: Sequence[float],
                     grid: np.ndarray, rtol: float = 1e-6, scale: float = 0.0) -> complex:
    """
    Trapezoid value of  integral e^{2 pi i xi1 t} f1(t - x1) conj(e^{2 pi i xi2 t} f2(t - x2)) dt.

    z1 = (x1, xi1) and z2 = (x2, xi2) are one-dimensional time-frequency points.
    """
    x1, xi1 = z1
    x2, xi2 = z2
    t = np.asarray(grid, dtype=float)
    step = float(t[1] - t[0])
    values = f1(t - x1) * np.conj(f2(t - x2)) * np.exp(2j * np.pi * (xi1 - xi2) * t)
    return halving_check(values, step, rtol, scale=scale, what="inner product")


def modulated_transform(products: np.ndarray, grid: np.ndarray, xis: np.ndarray) -> np.ndarray:
    """
    Trapezoid values of  integral p(t) e^{-2 pi i xi t} dt  for every row p of
    `products` and every xi; shape (rows, len(xis)).
    """
    t = np.asarray(grid, dtype=float)
    step = float(t[1] - t[0])
    weights = np.full(t.shape, step)
    weights[0] = weights[-1] = 0.5 * step
    kernel = np.exp(-2j * np.pi * np.outer(t, xis)) * weights[:, None]
    return np.atleast_2d(products) @ kernel


def adaptive_gaussian_inner(mu: Sequence[float], lam: Sequence[float],
                            amplitude: float = 1.0, dps: int = 30) -> complex:
    """
    <pi(mu) phi, pi(lam) phi> for phi(t) = amplitude * e^{-pi t^2}, d = 1,
    by tanh-sinh quadrature at `dps` decimal digits.

    The integration range is split into unit pieces around the centre of the
    product so that the oscillating factor never spans many periods.
    """
    mu1, mu2 = (float(c) for c in mu)
    lam1, lam2 = (float(c) for c in lam)
    with mpmath.workdps(dps):
        pi = mpmath.pi
        freq = 2 * pi * (mpmath.mpf(mu2) - mpmath.mpf(lam2))
        amp2 = mpmath.mpf(amplitude) ** 2

        def integrand(t):
            envelope = mpmath.exp(-pi * (t - mu1) ** 2 - pi * (t - lam1) ** 2)
            return amp2 * envelope * mpmath.expj(freq * t)

        center = (mpmath.mpf(mu1) + mpmath.mpf(lam1)) / 2
        pieces = int(2 * GAUSSIAN_HALF_WIDTH)
        nodes = [center - GAUSSIAN_HALF_WIDTH + k for k in range(pieces + 1)]
        value = mpmath.quad(integrand, nodes)
    return complex(value)


def adaptive_gaussian_ambiguity(z: Sequence[float], amplitude: float = 1.0,
                                dps: int = 30) -> complex:
    """<phi, pi(z) phi> = <pi(0) phi, pi(z) phi> by the adaptive oracle"""
    return adaptive_gaussian_inner((0.0, 0.0), z, amplitude=amplitude, dps=dps)
