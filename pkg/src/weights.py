"""
Radial weight families v(z) = v(|z|) and the decay bounds built from them.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .errors import InvalidInput, NoTailPoint, NotConverged, RemainderDominates
from .pointsets import BALL_TOLERANCE, PointSet, relative_separation
from .windows import TFPoint

logger = logging.getLogger(__name__)

# exp() of anything above this is reported as +inf
MAX_EXPONENT = 700.0

KINDS = ("polynomial", "subexponential", "exponential", "constant")


@dataclass(frozen=True)
class WeightSpec:
    """A radial, nondecreasing weight with v(0) = 1"""
    kind: str
    s: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown weight kind {self.kind!r}")
        if self.kind == "polynomial" and not self.s >= 0:
            raise InvalidInput(f"polynomial weight needs s >= 0, got {self.s}")
        if self.kind in ("subexponential", "exponential") and not self.a > 0:
            raise InvalidInput(f"{self.kind} weight needs a > 0, got {self.a}")
        if self.kind == "subexponential" and not 0 < self.b < 1:
            raise InvalidInput(f"subexponential weight needs 0 < b < 1, got {self.b}")

    @classmethod
    def polynomial(cls, s: float) -> 'WeightSpec':
        """(1 + |z|)^s"""
        return cls("polynomial", s=float(s))

    @classmethod
    def subexponential(cls, a: float, b: float) -> 'WeightSpec':
        """e^{a |z|^b}, 0 < b < 1"""
        return cls("subexponential", a=float(a), b=float(b))

    @classmethod
    def exponential(cls, a: float) -> 'WeightSpec':
        """e^{a |z|}"""
        return cls("exponential", a=float(a))

    @classmethod
    def constant(cls) -> 'WeightSpec':
        return cls("constant")

    def log_eval(self, r):
        """log v at radius r (scalar or array)"""
        r = np.asarray(r, dtype=float)
        if self.kind == "polynomial":
            out = self.s * np.log1p(r)
        elif self.kind == "subexponential":
            out = self.a * r ** self.b
        elif self.kind == "exponential":
            out = self.a * r
        else:
            out = np.zeros_like(r)
        return float(out) if out.ndim == 0 else out

    def eval_radius(self, r):
        """v at radius r; +inf where the exponent exceeds MAX_EXPONENT"""
        log_v = np.asarray(self.log_eval(r))
        with np.errstate(over="ignore"):
            out = np.where(log_v > MAX_EXPONENT, np.inf, np.exp(np.minimum(log_v, MAX_EXPONENT)))
        return float(out) if out.ndim == 0 else out

    def eval(self, z: TFPoint) -> float:
        return self.eval_radius(z.norm())

    def inverse_square(self, r):
        """v(r)^{-2}, computed in log space (never overflows)"""
        out = np.exp(-2.0 * np.asarray(self.log_eval(r)))
        return float(out) if out.ndim == 0 else out

    def sum_converges(self, d: int) -> bool:
        """Whether sum over a relatively separated set of v^{-2} is finite in R^{2d}"""
        if self.kind == "constant":
            return False
        if self.kind == "polynomial":
            return 2.0 * self.s > 2 * d
        return True

    def describe(self) -> str:
        if self.kind == "polynomial":
            return f"(1+|z|)^{self.s:g}"
        if self.kind == "subexponential":
            return f"exp({self.a:g}|z|^{self.b:g})"
        if self.kind == "exponential":
            return f"exp({self.a:g}|z|)"
        return "1"

    def to_dict(self) -> dict:
        fields = {"polynomial": ("s",), "subexponential": ("a", "b"), "exponential": ("a",)}
        data = asdict(self)
        return {"kind": self.kind, **{k: data[k] for k in fields.get(self.kind, ())}}

    @classmethod
    def from_dict(cls, data: dict) -> 'WeightSpec':
        return cls(**data)


# --- weight conditions ---

def submultiplicative_check(v: WeightSpec, trials: int = 1000, dim: int = 2,
                            seed: int = 0) -> Tuple[bool, float]:
    """
    Random pairs |z_1|, |z_2| <= 10 against v(z_1 + z_2) <= v(z_1) v(z_2) (1 + 1e-12).

    Returns (passed, worst ratio v(z_1 + z_2) / (v(z_1) v(z_2))).
    """
    if trials < 100:
        raise InvalidInput(f"need at least 100 trials, got {trials}")
    rng = np.random.default_rng(seed)

    def draw() -> np.ndarray:
        direction = rng.normal(size=(trials, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return direction * (10.0 * rng.random(trials) ** (1.0 / dim))[:, None]

    z1, z2 = draw(), draw()
    lhs = v.log_eval(np.linalg.norm(z1 + z2, axis=1))
    rhs = v.log_eval(np.linalg.norm(z1, axis=1)) + v.log_eval(np.linalg.norm(z2, axis=1))
    worst = float(np.exp(np.max(lhs - rhs)))
    return worst <= 1.0 + 1e-12, worst


def _convolution_constant(v: WeightSpec, h: float, R: float, dim: int) -> Tuple[float, float]:
    """(max over tested z of (v^{-1} * v^{-1})(z) v(z), worst outer-shell share)"""
    m = int(math.floor(R / h))
    axis = h * np.arange(-m, m + 1)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1)
    inverse = np.exp(-np.asarray(v.log_eval(np.linalg.norm(mesh, axis=-1))))
    sup_norm = np.max(np.abs(mesh), axis=-1)
    shell = sup_norm > R - 1.0
    cell = h ** dim

    conv = fftconvolve(inverse, inverse, mode="same") * cell
    shell_conv = fftconvolve(np.where(shell, inverse, 0.0), inverse, mode="same") * cell
    tested = sup_norm <= R / 4.0
    ratio = conv[tested] * np.asarray(v.eval_radius(np.linalg.norm(mesh[tested], axis=-1)))
    share = np.clip(shell_conv[tested], 0.0, None) / conv[tested]
    return float(np.max(ratio)), float(np.max(share))


def subconvolutive_check(v: WeightSpec, h: float = 0.5, R: float = 12.0, d: int = 1,
                         strict: bool = False, shell_tolerance: float = 0.02,
                         refinement_tolerance: float = 0.10) -> Tuple[bool, float]:
    """
    Estimate C = sup_z (v^{-1} * v^{-1})(z) v(z) by discrete convolution on
    h Z^{2d} cap [-R, R]^{2d}, testing the z with |z|_inf <= R / 4.

    Passes when the outer shell |y|_inf > R - 1 carries at most 2% of every
    tested convolution and halving h moves C by at most 10%. With strict=True
    a heavy outer shell raises NotConverged instead of failing the check.
    Returns (passed, C at step h / 2).
    """
    if h > 0.5 or h <= 0 or R < 8:
        raise InvalidInput(f"need 0 < h <= 1/2 and R >= 8, got h={h}, R={R}")
    dim = 2 * d
    coarse, coarse_share = _convolution_constant(v, h, R, dim)
    fine, fine_share = _convolution_constant(v, h / 2.0, R, dim)
    share = max(coarse_share, fine_share)
    change = abs(coarse - fine) / fine if fine > 0 else math.inf
    logger.debug("subconvolutive %s: C=%.6g shell share %.2e refinement change %.2e",
                 v.describe(), fine, share, change)
    if share > shell_tolerance:
        if strict:
            raise NotConverged(f"outer shell carries {share:.1%} of the convolution")
        return False, fine
    return math.isfinite(fine) and change <= refinement_tolerance, fine


def grs_profile(v: WeightSpec, z: TFPoint, n_list: Sequence[int]) -> List[float]:
    """v(n z)^{1/n} for each n, via exp(log v(n |z|) / n)"""
    n_list = [int(n) for n in n_list]
    if any(n <= 0 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidInput("n_list must be ascending positive integers")
    r = z.norm()
    return [math.exp(v.log_eval(n * r) / n) for n in n_list]


# --- theoretical bounds ---

def _next_radius(ps: PointSet, n: float) -> float:
    norms = ps.norms
    tail = norms[norms > n + BALL_TOLERANCE]
    if tail.size == 0:
        raise NoTailPoint(f"no enumerated point beyond radius {n} (enumerated to {ps.radius})")
    return float(tail.min())


def bound_sup(v: WeightSpec, ps: PointSet, n: float) -> float:
    """
    sup_{|lambda| > n} v(lambda)^{-2} = v(r_next)^{-2}, exact over the whole
    tail because v is radial and nondecreasing.
    """
    if n >= ps.radius:
        raise InvalidInput(f"n={n} must be below the enumerated radius {ps.radius}")
    return v.inverse_square(_next_radius(ps, n))


def _ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def tail_remainder(v: WeightSpec, R: float, dim: int, n_rel: int) -> float:
    """
    Upper bound for sum_{|lambda| > R} v(lambda)^{-2} over a set whose unit
    balls overlap at most n_rel times:
    n_rel / vol(B_1) * int_{R-1}^inf v(max(r - 1, 0))^{-2} surface(r) dr.
    """
    if not v.sum_converges(dim // 2):
        return math.inf
    surface = dim * _ball_volume(dim)

    def integrand(r: float) -> float:
        return math.exp(-2.0 * v.log_eval(max(r - 1.0, 0.0)) + math.log(surface) + (dim - 1) * math.log(r))

    value, _ = integrate.quad(integrand, max(R - 1.0, 0.0), math.inf, limit=200)
    return n_rel / _ball_volume(dim) * value


def bound_sum(v: WeightSpec, ps: PointSet, n: float, n_rel: Optional[int] = None) -> Tuple[float, float]:
    """
    (sum over enumerated n < |lambda| <= R_max of v(lambda)^{-2},
     remainder bound for |lambda| > R_max).
    """
    if n >= ps.radius:
        raise InvalidInput(f"n={n} must be below the enumerated radius {ps.radius}")
    norms = ps.norms
    total = float(np.sum(v.inverse_square(norms[norms > n + BALL_TOLERANCE])))
    if n_rel is None:
        n_rel = relative_separation(ps)
    remainder = tail_remainder(v, ps.radius, 2 * ps.d, n_rel)
    if remainder > total:
        raise RemainderDominates(
            f"remainder {remainder:.3g} exceeds the enumerated sum {total:.3g}; enlarge R_max={ps.radius}"
        )
    return total, remainder
