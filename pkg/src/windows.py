"""
Window functions, ambiguity functions and modulation-space norm estimates.

Conventions: pi(z) g(t) = e^{2 pi i xi.t} g(t - x) for z = (x, xi), and the
ambiguity function is A_g(z) = <g, pi(z) g>. The raw Gaussian
phi(t) = e^{-pi t^2} has ||phi||_2^2 = 2^{-d/2}; normalized windows are
rescaled to unit L2 norm.
"""

import functools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from .errors import InvalidInput, IoFailure, NotConverged
from .oracles import quadrature

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8


@dataclass(frozen=True)
class TFPoint:
    """A point z = (x, xi) of the time-frequency plane R^{2d}"""
    x: Tuple[float, ...]
    xi: Tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(c) for c in np.atleast_1d(self.x))
        xi = tuple(float(c) for c in np.atleast_1d(self.xi))
        if len(x) != len(xi) or not x:
            raise InvalidInput("time and frequency parts must have the same positive length")
        if not all(math.isfinite(c) for c in x + xi):
            raise InvalidInput(f"non-finite time-frequency point {x + xi}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> 'TFPoint':
        vector = np.asarray(vector, dtype=float).ravel()
        d = vector.size // 2
        return cls(tuple(vector[:d]), tuple(vector[d:]))

    @property
    def d(self) -> int:
        return len(self.x)

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.x + self.xi)

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def __neg__(self) -> 'TFPoint':
        return TFPoint.from_vector(-self.vector)

    def __sub__(self, other: 'TFPoint') -> 'TFPoint':
        return TFPoint.from_vector(self.vector - other.vector)


@dataclass(frozen=True, eq=False)
class WindowSpec:
    """
    A window g: the closed-form Gaussian in dimension d, or a sampled
    one-dimensional window on a uniform grid (zero outside the grid,
    linear interpolation between samples).
    """
    kind: str
    d: int = 1
    normalized: bool = False
    start: float = 0.0
    step: float = 0.0
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "sampled"):
            raise InvalidInput(f"unknown window kind {self.kind!r}")
        if self.d < 1:
            raise InvalidInput("window dimension must be positive")
        if self.kind == "gaussian":
            return

        if self.d != 1:
            raise InvalidInput("sampled windows are one-dimensional")
        if not self.step > 0:
            raise InvalidInput(f"sample step must be positive, got {self.step}")
        samples = np.asarray(self.samples, dtype=complex).ravel()
        if samples.size < MIN_SAMPLES:
            raise InvalidInput(f"need at least {MIN_SAMPLES} samples, got {samples.size}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInput("window samples must be finite")
        if self.normalized:
            energy = trapezoid(np.abs(samples) ** 2, dx=self.step)
            if energy <= 0:
                raise InvalidInput("cannot normalize a zero window")
            samples = samples / math.sqrt(energy)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def gaussian(cls, d: int = 1, normalized: bool = False) -> 'WindowSpec':
        """phi(t) = e^{-pi t^2} on R^d"""
        return cls(kind="gaussian", d=d, normalized=normalized)

    @classmethod
    def sampled(cls, start: float, step: float, samples: Sequence[complex],
                normalized: bool = False) -> 'WindowSpec':
        return cls(kind="sampled", d=1, normalized=normalized, start=float(start),
                   step=float(step), samples=np.asarray(samples, dtype=complex))

    @classmethod
    def sampled_gaussian(cls, lo: float = -6.0, hi: float = 6.0, step: float = 1.0 / 64.0,
                         normalized: bool = False) -> 'WindowSpec':
        """The raw Gaussian sampled on lo, lo + step, ..., hi"""
        count = int(round((hi - lo) / step)) + 1
        t = lo + step * np.arange(count)
        return cls.sampled(lo, step, np.exp(-np.pi * t ** 2), normalized=normalized)

    @classmethod
    def from_csv(cls, path, normalized: bool = False) -> 'WindowSpec':
        """Read columns t, re, im (header row required, uniform spacing)"""
        path = Path(path)
        try:
            table = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
        except OSError as exc:
            raise IoFailure(f"cannot read window file {path}: {exc}") from exc
        if table.dtype.names is None or tuple(table.dtype.names) != ("t", "re", "im"):
            raise InvalidInput(f"{path}: expected header t,re,im")
        t = np.atleast_1d(table["t"])
        if t.size < MIN_SAMPLES:
            raise InvalidInput(f"{path}: need at least {MIN_SAMPLES} samples")
        steps = np.diff(t)
        step = float(steps.mean())
        if step <= 0 or np.max(np.abs(steps - step)) > 1e-9 * step:
            raise InvalidInput(f"{path}: sample spacing is not uniform")
        samples = np.atleast_1d(table["re"]) + 1j * np.atleast_1d(table["im"])
        return cls.sampled(float(t[0]), step, samples, normalized=normalized)

    @property
    def amplitude(self) -> float:
        """Gaussian prefactor: 1 for the raw window, 2^{d/4} when normalized"""
        return 2.0 ** (self.d / 4.0) if self.normalized else 1.0

    def norm_squared(self) -> float:
        if self.kind == "gaussian":
            return 1.0 if self.normalized else 2.0 ** (-self.d / 2.0)
        return float(trapezoid(np.abs(self.samples) ** 2, dx=self.step))

    def grid(self) -> np.ndarray:
        """Integration grid covering the window's support"""
        if self.kind == "gaussian":
            return quadrature.uniform_grid(0.0)
        return self.start + self.step * np.arange(self.samples.size)

    def profile(self, t: np.ndarray) -> np.ndarray:
        """One-dimensional window values (per-coordinate factor for Gaussians)"""
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return (self.amplitude ** (1.0 / self.d)) * np.exp(-np.pi * t ** 2) + 0j
        grid = self.grid()
        real = np.interp(t, grid, self.samples.real, left=0.0, right=0.0)
        imag = np.interp(t, grid, self.samples.imag, left=0.0, right=0.0)
        return real + 1j * imag


@dataclass(frozen=True)
class NormEstimate:
    """A truncated norm estimate with the outer-shell share as convergence indicator"""
    value: float
    shell_contribution: float
    argmax: Optional[Tuple[float, ...]] = None

    @property
    def shell_fraction(self) -> float:
        return self.shell_contribution / self.value if self.value > 0 else 0.0


# --- ambiguity functions ---

def gaussian_ambiguity(z: TFPoint, normalized: bool = False) -> complex:
    """A_phi(z) = 2^{-d/2} e^{-pi |z|^2 / 2} e^{-pi i x.xi}, times 2^{d/2} if normalized"""
    value = gaussian_ambiguity_array(z.vector[None, :], z.d, normalized)[0]
    return complex(value)


def gaussian_ambiguity_array(offsets: np.ndarray, d: int, normalized: bool = False) -> np.ndarray:
    """Closed-form Gaussian ambiguity at each row (x, xi) of `offsets`"""
    offsets = np.asarray(offsets, dtype=float)
    x, xi = offsets[..., :d], offsets[..., d:]
    radius_sq = np.sum(offsets ** 2, axis=-1)
    prefactor = 1.0 if normalized else 2.0 ** (-d / 2.0)
    return prefactor * np.exp(-np.pi * radius_sq / 2.0) * np.exp(-1j * np.pi * np.sum(x * xi, axis=-1))


def _separable_inner(w: WindowSpec, f2, z1: TFPoint, z2: TFPoint, rtol: float) -> complex:
    """Product of one-dimensional quadratures over the d coordinates"""
    value = 1.0 + 0j
    scale = math.sqrt(w.norm_squared()) ** (1.0 / w.d)
    for k in range(w.d):
        grid = quadrature.uniform_grid(z1.x[k]) if w.kind == "gaussian" else w.grid() + z1.x[k]
        value *= quadrature.tf_inner_product(
            w.profile, (z1.x[k], z1.xi[k]), f2, (z2.x[k], z2.xi[k]),
            grid, rtol=rtol, scale=scale * scale,
        )
    return value


def numeric_ambiguity(w: WindowSpec, z: TFPoint, rtol: float = 1e-6) -> complex:
    """<g, pi(z) g> by trapezoid quadrature on the window's grid"""
    if z.d != w.d:
        raise InvalidInput(f"point dimension {z.d} does not match window dimension {w.d}")
    origin = TFPoint((0.0,) * w.d, (0.0,) * w.d)
    return _separable_inner(w, w.profile, origin, z, rtol)


def inner_product(w: WindowSpec, mu: TFPoint, lam: TFPoint, rtol: float = 1e-6) -> complex:
    """<pi(mu) g, pi(lam) g> directly by quadrature (no commutation identity)"""
    return _separable_inner(w, w.profile, mu, lam, rtol)


def _require_gaussian_line(w: WindowSpec) -> None:
    if w.kind != "gaussian" or w.d != 1:
        raise InvalidInput("the adaptive oracle covers the one-dimensional Gaussian only")


def adaptive_ambiguity_oracle(w: WindowSpec, z: TFPoint, dps: int = 30) -> complex:
    """A_g(z) by extended-precision adaptive quadrature"""
    _require_gaussian_line(w)
    return quadrature.adaptive_gaussian_ambiguity(z.vector, amplitude=w.amplitude, dps=dps)


def inner_product_oracle(w: WindowSpec, mu: TFPoint, lam: TFPoint, dps: int = 30) -> complex:
    """<pi(mu) g, pi(lam) g> by extended-precision adaptive quadrature"""
    _require_gaussian_line(w)
    return quadrature.adaptive_gaussian_inner(mu.vector, lam.vector, amplitude=w.amplitude, dps=dps)


def _gaussian_profile(t: np.ndarray) -> np.ndarray:
    return np.exp(-np.pi * np.asarray(t, dtype=float) ** 2) + 0j


def stft_gaussian_window(g: WindowSpec, z: TFPoint, rtol: float = 1e-6) -> complex:
    """V_phi g(z) = <g, pi(z) phi> with the raw Gaussian analysis window"""
    if z.d != g.d:
        raise InvalidInput(f"point dimension {z.d} does not match window dimension {g.d}")
    origin = TFPoint((0.0,) * g.d, (0.0,) * g.d)
    return _separable_inner(g, _gaussian_profile, origin, z, rtol)


def ambiguity_modulus_grid(w: WindowSpec, xs: np.ndarray, xis: np.ndarray) -> np.ndarray:
    """|A_g| on the product grid xs x xis (d = 1), shape (len(xs), len(xis))"""
    xs = np.asarray(xs, dtype=float)
    xis = np.asarray(xis, dtype=float)
    if w.kind == "gaussian" and w.d == 1:
        mesh = np.stack(np.meshgrid(xs, xis, indexing="ij"), axis=-1)
        return np.abs(gaussian_ambiguity_array(mesh, 1, w.normalized))
    t = w.grid()
    products = np.array([w.profile(t) * np.conj(w.profile(t - x)) for x in xs])
    return np.abs(quadrature.modulated_transform(products, t, xis))


def stft_modulus_grid(g: WindowSpec, xs: np.ndarray, xis: np.ndarray) -> np.ndarray:
    """|V_phi g| on the product grid xs x xis (d = 1)"""
    xs = np.asarray(xs, dtype=float)
    xis = np.asarray(xis, dtype=float)
    if g.kind == "gaussian":
        mesh = np.stack(np.meshgrid(xs, xis, indexing="ij"), axis=-1)
        # V_phi g = amplitude * A_phi for g = amplitude * phi
        return g.amplitude * np.abs(gaussian_ambiguity_array(mesh, 1, normalized=False))
    t = g.grid()
    products = np.array([g.profile(t) * _gaussian_profile(t - x) for x in xs])
    return np.abs(quadrature.modulated_transform(products, t, xis))


# --- modulation / amalgam norm estimates ---

MAX_GRID_POINTS = 10_000_000


def _ball_points(g: WindowSpec, R: float, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(points, |z|, |V_phi g(z)|) on h Z^{2d} inside B_R(0)"""
    axis = h * np.arange(-int(math.floor(R / h)), int(math.floor(R / h)) + 1)
    dim = 2 * g.d
    if axis.size ** dim > MAX_GRID_POINTS:
        raise InvalidInput(f"{axis.size ** dim} grid points for d={g.d}; use a coarser h or smaller R")
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    points = np.stack([grid.ravel() for grid in grids], axis=-1)
    if g.kind == "gaussian":
        # V_phi g = amplitude * A_phi for g = amplitude * phi
        modulus = g.amplitude * np.abs(gaussian_ambiguity_array(points, g.d, normalized=False))
    else:
        modulus = stft_modulus_grid(g, axis, axis).ravel()
    radius = np.linalg.norm(points, axis=-1)
    inside = radius <= R + 1e-12
    return points[inside], radius[inside], modulus[inside]


def m1v_norm_estimate(g: WindowSpec, v, R: float = 6.0, h: float = 0.25,
                      shell_tolerance: float = 0.01) -> NormEstimate:
    """
    Riemann sum of |V_phi g(z)| v(z) h^{2d} over h Z^{2d} inside B_R(0).

    The outermost unit shell R - 1 < |z| <= R is reported separately and may
    carry at most `shell_tolerance` of the total.
    """
    if R < 4 or h > 0.25:
        raise InvalidInput(f"need R >= 4 and h <= 1/4, got R={R}, h={h}")
    _, radius, modulus = _ball_points(g, R, h)
    integrand = modulus * v.eval_radius(radius) * h ** (2 * g.d)
    total = float(integrand.sum())
    shell = float(integrand[radius > R - 1.0].sum())
    estimate = NormEstimate(total, shell)
    if estimate.shell_fraction > shell_tolerance:
        raise NotConverged(f"M^1_v estimate: outer shell carries {estimate.shell_fraction:.2%}")
    logger.debug("M^1_v estimate %.6g (shell %.2e)", total, estimate.shell_fraction)
    return estimate


def m_inf_v_norm_estimate(g: WindowSpec, v, R: float = 6.0, h: float = 0.25) -> NormEstimate:
    """Maximum of |V_phi g(z)| v(z) over h Z^{2d} inside B_R(0)"""
    if R < 4 or h > 0.25:
        raise InvalidInput(f"need R >= 4 and h <= 1/4, got R={R}, h={h}")
    points, radius, modulus = _ball_points(g, R, h)
    weighted = modulus * v.eval_radius(radius)
    i = int(np.argmax(weighted))
    shell_max = float(np.max(weighted[radius > R - 1.0], initial=0.0))
    return NormEstimate(float(weighted[i]), shell_max, argmax=tuple(float(x) for x in points[i]))


def _cube_sups(w: WindowSpec, K: int, subgrid: int) -> np.ndarray:
    """sup of |A_w| over each square k + [0,1]^2, |k|_inf <= K (d = 1)"""
    offsets = np.linspace(0.0, 1.0, subgrid)
    axis = (np.arange(-K, K + 1)[:, None] + offsets[None, :]).ravel()
    size = 2 * K + 1
    modulus = ambiguity_modulus_grid(w, axis, axis)
    return modulus.reshape(size, subgrid, size, subgrid).max(axis=(1, 3))


def amalgam_norm_estimate(g: WindowSpec, v, K: int = 6, subgrid: int = 8,
                          shell_tolerance: float = 0.01) -> NormEstimate:
    """
    sum over |k|_inf <= K of  sup_{z in k + [0,1]^{2d}} |A_g(z)| v(k),
    each supremum taken over a subgrid^2 sampling of the closed squares. For
    d > 1 the Gaussian factorizes over the pairs (x_j, xi_j), so the cube
    supremum is the product of the planar ones.
    """
    if K < 4:
        raise InvalidInput(f"need K >= 4, got {K}")
    if g.d == 1:
        cube_sup = _cube_sups(g, K, subgrid)
    else:
        planar = _cube_sups(WindowSpec.gaussian(), K, subgrid)
        cube_sup = g.amplitude ** 2 * functools.reduce(np.multiply.outer, [planar] * g.d)
        # axes come as (x_1, xi_1, x_2, xi_2, ...); reorder to (x_1..x_d, xi_1..xi_d)
        cube_sup = cube_sup.transpose(list(range(0, 2 * g.d, 2)) + list(range(1, 2 * g.d, 2)))
    ks = np.arange(-K, K + 1)
    mesh = np.meshgrid(*([ks] * (2 * g.d)), indexing="ij")
    norms = np.sqrt(sum(k.astype(float) ** 2 for k in mesh))
    terms = cube_sup * v.eval_radius(norms)
    total = float(terms.sum())
    boundary = np.max(np.abs(np.stack(mesh)), axis=0) == K
    estimate = NormEstimate(total, float(terms[boundary].sum()))
    if estimate.shell_fraction > shell_tolerance:
        raise NotConverged(f"amalgam estimate: boundary cubes carry {estimate.shell_fraction:.2%}")
    return estimate
