"""
Gram matrices of finite Gabor sections and their off-diagonal decay diagnostics.

Row lambda, column mu holds <pi(mu) g, pi(lambda) g>, which the commutation
rule T_x M_xi = e^{-2 pi i x.xi} M_xi T_x turns into

    G[lambda, mu] = e^{2 pi i lambda_1 . (mu_2 - lambda_2)} conj(A_g(mu - lambda)).
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from .errors import InvalidInput, InvariantViolation
from .pointsets import PointSet
from .windows import TFPoint, WindowSpec, gaussian_ambiguity_array, numeric_ambiguity

logger = logging.getLogger(__name__)

UNDERFLOW = 1e-300


@dataclass(frozen=True, eq=False)
class GramSection:
    """Hermitian Gram matrix of G(g, Lambda_n) in canonical point order"""
    entries: np.ndarray
    pointset: PointSet
    window: WindowSpec

    def __len__(self) -> int:
        return self.entries.shape[0]

    @property
    def radius(self) -> float:
        return self.pointset.radius

    def leading(self, count: int) -> np.ndarray:
        """Leading principal count x count submatrix"""
        if not 0 <= count <= len(self):
            raise InvalidInput(f"cannot take {count} rows of a {len(self)}-point section")
        return self.entries[:count, :count]

    def section_for_radius(self, n: float) -> 'GramSection':
        """The Gram section of Lambda_n, read off as a leading block"""
        sub = self.pointset.truncate(n)
        return GramSection(self.leading(len(sub)), sub, self.window)

    def check_invariants(self, psd: bool = True) -> None:
        """Raise InvariantViolation unless G is Hermitian with constant diagonal (and PSD)"""
        G = self.entries
        scale = float(np.max(np.abs(G))) if G.size else 0.0
        asymmetry = float(np.max(np.abs(G - G.conj().T))) if G.size else 0.0
        if asymmetry > 1e-12 * scale:
            raise InvariantViolation(f"Gram matrix not Hermitian (defect {asymmetry:.2e})")
        norm_sq = self.window.norm_squared()
        diagonal = float(np.max(np.abs(np.diag(G) - norm_sq))) if G.size else 0.0
        if diagonal > 1e-10:
            raise InvariantViolation(f"diagonal deviates from ||g||^2 by {diagonal:.2e}")
        if psd and G.size:
            eigs = linalg.eigvalsh(G)
            if eigs[0] < -1e-10 * eigs[-1]:
                raise InvariantViolation(f"Gram matrix not PSD: smallest eigenvalue {eigs[0]:.3e}")


@dataclass(frozen=True, eq=False)
class EnvelopeProfile:
    """Theta(k) = max |G[lambda, mu]| over lambda - mu in k + [0,1)^{2d}"""
    offsets: np.ndarray
    values: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.values.size

    def value_at(self, k) -> float:
        hits = np.flatnonzero(np.all(self.offsets == np.asarray(k, dtype=np.int64), axis=1))
        return float(self.values[hits[0]]) if hits.size else 0.0

    def amalgam_sum(self, v) -> float:
        """sum_k Theta(k) v(k) over the populated cubes"""
        return float(np.sum(self.values * v.eval_radius(np.linalg.norm(self.offsets, axis=1))))


def _pair_offsets(ps: PointSet) -> np.ndarray:
    """offsets[i, j] = point_j - point_i"""
    P = ps.coordinates
    return P[None, :, :] - P[:, None, :]


def _ambiguity_table(w: WindowSpec, offsets: np.ndarray, workers: int, rtol: float) -> np.ndarray:
    """A_g at every offset, each distinct offset evaluated once"""
    d = w.d
    if w.kind == "gaussian":
        return gaussian_ambiguity_array(offsets, d, w.normalized)

    flat = offsets.reshape(-1, 2 * d)
    keys, inverse = np.unique(np.round(flat, 9), axis=0, return_inverse=True)
    logger.info("quadrature for %d distinct offsets on %d workers", keys.shape[0], workers)

    def one(row: np.ndarray) -> complex:
        return numeric_ambiguity(w, TFPoint.from_vector(row), rtol=rtol)

    if workers > 1:
        values = np.array(Parallel(n_jobs=workers, prefer="threads")(delayed(one)(row) for row in keys),
                          dtype=complex)
    else:
        values = np.array([one(row) for row in keys], dtype=complex)
    return values[np.asarray(inverse).ravel()].reshape(offsets.shape[:-1])


def assemble_gram(w: WindowSpec, ps: PointSet, workers: int = 1, rtol: float = 1e-6,
                  check: bool = True) -> GramSection:
    """
    Assemble G(g, Lambda_n). The upper triangle is computed and mirrored, so
    the result is exactly Hermitian with a real diagonal.
    """
    if len(ps) == 0:
        raise InvalidInput("cannot assemble the Gram matrix of an empty point set")
    if ps.d != w.d:
        raise InvalidInput(f"point dimension {ps.d} does not match window dimension {w.d}")
    d = w.d
    offsets = _pair_offsets(ps)
    ambiguity = _ambiguity_table(w, offsets, workers, rtol)

    P = ps.coordinates
    # lambda_1 . (mu_2 - lambda_2) for row lambda, column mu
    phase = np.einsum("ik,ijk->ij", P[:, :d], offsets[:, :, d:])
    G = np.exp(2j * np.pi * phase) * np.conj(ambiguity)

    upper = np.triu(G, 1)
    G = upper + upper.conj().T + np.diag(np.real(np.diag(G)))
    G[np.abs(G) < UNDERFLOW] = 0.0
    section = GramSection(G, ps, w)
    logger.debug("assembled %d x %d Gram section at radius %.4g", len(ps), len(ps), ps.radius)
    if check:
        section.check_invariants()
    return section


def weighted_sup(matrix: np.ndarray, ps: PointSet, v) -> float:
    """max |M[lambda, mu]| v(lambda - mu), evaluated in log space; inf on overflow"""
    modulus = np.abs(matrix)
    nonzero = modulus > 0
    if not np.any(nonzero):
        return 0.0
    distances = np.linalg.norm(_pair_offsets(ps), axis=-1)
    logs = np.log(modulus[nonzero]) + v.log_eval(distances[nonzero])
    top = float(np.max(logs))
    return float("inf") if top > 700.0 else float(np.exp(top))


def cv_infty_norm(G: GramSection, v) -> float:
    """The C_v^infty norm sup |G[lambda, mu]| v(lambda - mu) of the section"""
    return weighted_sup(G.entries, G.pointset, v)


def envelope_extract(G: GramSection) -> EnvelopeProfile:
    """Bin |G| by the integer cube floor(lambda - mu) and keep the maximum per cube"""
    offsets = -_pair_offsets(G.pointset)
    cubes = np.floor(offsets.reshape(-1, offsets.shape[-1]) + 1e-12).astype(np.int64)
    keys, inverse = np.unique(cubes, axis=0, return_inverse=True)
    theta = np.zeros(keys.shape[0])
    np.maximum.at(theta, np.asarray(inverse).ravel(), np.abs(G.entries).ravel())
    return EnvelopeProfile(keys, theta)
