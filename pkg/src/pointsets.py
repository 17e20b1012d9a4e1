"""
Ball-truncated point sets Lambda_n = Lambda cap B_n(0).

Points are kept in the canonical order (|lambda|, lexicographic coordinates),
so the section for a smaller radius is always a prefix of the section for a
larger one.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInput, IoFailure, RadiiNotAscending, TooManyPoints
from .windows import TFPoint

logger = logging.getLogger(__name__)

BALL_TOLERANCE = 1e-12
DEFAULT_MAX_POINTS = 20_000


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    """A lattice Lambda = A Z^{2d} in the time-frequency plane"""
    generator: np.ndarray
    d: int = 1

    def __post_init__(self):
        dim = 2 * self.d
        generator = np.array(self.generator, dtype=float)
        if generator.size != dim * dim:
            raise InvalidInput(f"generator must have {dim * dim} entries for d={self.d}")
        generator = generator.reshape(dim, dim)
        if not np.all(np.isfinite(generator)):
            raise InvalidInput("generator entries must be finite")
        if abs(np.linalg.det(generator)) <= 1e-12:
            raise InvalidInput("generator matrix is singular")
        generator.setflags(write=False)
        object.__setattr__(self, "generator", generator)

    @classmethod
    def scaled_identity(cls, spacing: float, d: int = 1) -> 'LatticeSpec':
        """spacing * Z^{2d}; density spacing^{-2d}"""
        return cls(spacing * np.eye(2 * d), d)

    @classmethod
    def integer(cls, d: int = 1) -> 'LatticeSpec':
        """Z^{2d}, the critical-density lattice"""
        return cls.scaled_identity(1.0, d)

    @property
    def dim(self) -> int:
        return 2 * self.d

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.generator)

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(self.generator)))

    @property
    def cell_diameter(self) -> float:
        """Upper bound for the diameter of the cell A [0,1)^{2d}"""
        return float(np.linalg.norm(self.generator, axis=0).sum())

    def to_dict(self) -> dict:
        return {"d": self.d, "generator": self.generator.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'LatticeSpec':
        return cls(np.asarray(data["generator"], dtype=float), int(data.get("d", 1)))


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    A finite point set in canonical order.

    ids are positions in the canonical order; for lattice sets
    `lattice_coordinates` holds the integer vectors k with lambda = A k.
    """
    coordinates: np.ndarray
    radius: float
    source: Union[LatticeSpec, str] = "explicit"
    lattice_coordinates: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        coordinates = np.array(self.coordinates, dtype=float)
        if coordinates.ndim != 2 or coordinates.shape[1] % 2 or coordinates.shape[1] == 0:
            raise InvalidInput("point coordinates must be an (N, 2d) array")
        if not np.all(np.isfinite(coordinates)):
            raise InvalidInput("point coordinates must be finite")
        if self.radius < 0:
            raise InvalidInput(f"radius must be nonnegative, got {self.radius}")
        if coordinates.size and np.max(np.linalg.norm(coordinates, axis=1)) > self.radius + BALL_TOLERANCE:
            raise InvalidInput(f"point set contains points outside the ball of radius {self.radius}")
        coordinates.setflags(write=False)
        object.__setattr__(self, "coordinates", coordinates)

    def __len__(self) -> int:
        return self.coordinates.shape[0]

    @property
    def d(self) -> int:
        return self.coordinates.shape[1] // 2

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.coordinates, axis=1)

    @property
    def is_lattice(self) -> bool:
        return isinstance(self.source, LatticeSpec)

    @property
    def points(self) -> List[TFPoint]:
        return [TFPoint.from_vector(row) for row in self.coordinates]

    def __iter__(self) -> Iterator[TFPoint]:
        return iter(self.points)

    def truncate(self, n: float) -> 'PointSet':
        """The section for radius n <= self.radius (a prefix of this one)"""
        if n < 0 or n > self.radius + BALL_TOLERANCE:
            raise InvalidInput(f"cannot truncate a radius-{self.radius} set to radius {n}")
        count = int(np.count_nonzero(self.norms <= n + BALL_TOLERANCE))
        lattice = None if self.lattice_coordinates is None else self.lattice_coordinates[:count]
        return PointSet(self.coordinates[:count], float(n), self.source, lattice)

    def index_of(self, point: Sequence[float]) -> int:
        """Canonical index of `point`; raises InvalidInput if absent"""
        hits = np.flatnonzero(np.all(np.abs(self.coordinates - np.asarray(point, dtype=float)) <= 1e-9, axis=1))
        if hits.size == 0:
            raise InvalidInput(f"point {tuple(point)} is not in the set")
        return int(hits[0])

    def to_dict(self) -> dict:
        source = self.source.to_dict() if self.is_lattice else self.source
        return {"radius": self.radius, "size": len(self), "source": source}

    @classmethod
    def from_csv(cls, path, n: Optional[float] = None) -> 'PointSet':
        """Read an explicit cloud (columns x_1..x_d, xi_1..xi_d) and truncate at n"""
        path = Path(path)
        try:
            table = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
        except OSError as exc:
            raise IoFailure(f"cannot read point file {path}: {exc}") from exc
        names = table.dtype.names or ()
        d = len(names) // 2
        expected = tuple(f"x_{i + 1}" for i in range(d)) + tuple(f"xi_{i + 1}" for i in range(d))
        if d == 0 or tuple(names) != expected:
            raise InvalidInput(f"{path}: expected header {','.join(expected) or 'x_1,xi_1'}")
        points = np.column_stack([np.atleast_1d(table[name]) for name in names])
        if n is None:
            n = float(np.max(np.linalg.norm(points, axis=1)))
        return explicit_in_ball(points, n)


def _canonical_order(coordinates: np.ndarray) -> np.ndarray:
    norms = np.round(np.linalg.norm(coordinates, axis=1), 12)
    keys = tuple(coordinates[:, j] for j in reversed(range(coordinates.shape[1]))) + (norms,)
    return np.lexsort(keys)


def _integer_candidates(bound: int, dim: int) -> Iterator[np.ndarray]:
    """Integer vectors with |k|_inf <= bound, one slab of the first coordinate at a time"""
    axis = np.arange(-bound, bound + 1)
    if dim == 1:
        yield axis[:, None]
        return
    rest = np.stack(np.meshgrid(*([axis] * (dim - 1)), indexing="ij"), axis=-1).reshape(-1, dim - 1)
    for first in axis:
        yield np.column_stack([np.full(rest.shape[0], first), rest])


def enumerate_lattice_in_ball(lat: LatticeSpec, n: float,
                              max_points: int = DEFAULT_MAX_POINTS) -> PointSet:
    """All lattice points A k with |A k| <= n, in canonical order"""
    if n < 0 or not math.isfinite(n):
        raise InvalidInput(f"radius must be finite and nonnegative, got {n}")

    # |k|_inf <= ||A^{-1}||_inf |lambda|_inf <= ||A^{-1}||_inf n
    bound = int(math.ceil(n * np.linalg.norm(lat.inverse, ord=np.inf) + BALL_TOLERANCE))
    expected = math.pi ** lat.d / math.gamma(lat.d + 1) * n ** lat.dim / lat.covolume
    if expected > 2 * max_points:
        raise TooManyPoints(f"about {expected:.0f} points in the radius-{n} ball (cap {max_points})")

    kept: List[np.ndarray] = []
    for slab in _integer_candidates(bound, lat.dim):
        points = slab @ lat.generator.T
        inside = np.linalg.norm(points, axis=1) <= n + BALL_TOLERANCE
        kept.append(slab[inside])
    ks = np.concatenate(kept).astype(np.int64)
    if ks.shape[0] > max_points:
        raise TooManyPoints(f"{ks.shape[0]} points in the radius-{n} ball (cap {max_points})")

    coordinates = ks @ lat.generator.T
    order = _canonical_order(coordinates)
    logger.debug("radius %.4g: %d lattice points from |k|_inf <= %d", n, ks.shape[0], bound)
    return PointSet(coordinates[order], float(n), lat, ks[order])


def explicit_in_ball(points: np.ndarray, n: float) -> PointSet:
    """The points of an explicit cloud with |lambda| <= n, in canonical order"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if n < 0:
        raise InvalidInput(f"radius must be nonnegative, got {n}")
    inside = points[np.linalg.norm(points, axis=1) <= n + BALL_TOLERANCE]
    if inside.shape[0] > 1 and cKDTree(inside).query_pairs(1e-12):
        raise InvalidInput("explicit point set contains duplicate points")
    return PointSet(inside[_canonical_order(inside)], float(n), "explicit")


def nested_masks(ps: PointSet, radii: Sequence[float]) -> List[np.ndarray]:
    """Boolean masks selecting |lambda| <= r for each radius r (nested, prefix-shaped)"""
    radii = [float(r) for r in radii]
    if any(r < 0 for r in radii):
        raise InvalidInput("radii must be nonnegative")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise RadiiNotAscending(f"radii must be strictly ascending, got {radii}")
    if radii and radii[-1] > ps.radius + BALL_TOLERANCE:
        raise InvalidInput(f"largest radius {radii[-1]} exceeds the enumerated radius {ps.radius}")
    norms = ps.norms
    return [norms <= r + BALL_TOLERANCE for r in radii]


def minimal_distance(ps: PointSet) -> float:
    if len(ps) < 2:
        return math.inf
    distances, _ = cKDTree(ps.coordinates).query(ps.coordinates, k=2)
    return float(distances[:, 1].min())


def _center_grid(lo: np.ndarray, hi: np.ndarray, step: float) -> np.ndarray:
    axes = [step * np.arange(math.floor(a / step), math.ceil(b / step) + 1) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def relative_separation(ps: PointSet) -> int:
    """
    max over centres z of #{lambda : |lambda - z| <= 1}.

    Centres run over a grid of step min(1/2, minimal distance / 2) aligned at
    the origin, together with the points themselves. For lattices the count
    is translation invariant, so only centres near one fundamental cell are
    scanned, against a local enumeration.
    """
    if len(ps) == 0:
        raise InvalidInput("relative separation of an empty set")
    if ps.is_lattice:
        lat = ps.source
        reach = lat.cell_diameter
        local = enumerate_lattice_in_ball(lat, reach + 1.0)
        step = min(0.5, minimal_distance(local) / 2.0)
        centers = _center_grid(np.full(lat.dim, -reach), np.full(lat.dim, reach), step)
        centers = centers[np.linalg.norm(centers, axis=1) <= reach]
        cloud = local.coordinates
    else:
        cloud = ps.coordinates
        step = min(0.5, minimal_distance(ps) / 2.0)
        centers = _center_grid(cloud.min(axis=0) - 1.0, cloud.max(axis=0) + 1.0, step)
    centers = np.vstack([centers, cloud])
    counts = cKDTree(cloud).query_ball_point(centers, r=1.0 + BALL_TOLERANCE, return_length=True)
    return int(np.max(counts))
