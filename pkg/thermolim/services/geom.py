"""Exact and Monte Carlo geometric measure on bounded domains of R^3.

Domains expose a membership oracle, a bounding box, an optional exact volume and
an unsigned boundary distance. Volumes and boundary "sausages"
{x : d(x, boundary) <= s} are estimated by hit-or-miss sampling over the
bounding box; Fisher eta-regularity audits compare sausage volumes against
|Omega| * eta(t).
"""

import itertools
import logging
import math
import sys
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, partial

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from ..errors import GeometryError
from .sampling import STREAM_SAUSAGE, STREAM_VOLUME, integrate_over_box

logger = logging.getLogger(__name__)

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - Python 3.10 backport with 3.11 semantics

    class StrEnum(str, Enum):
        """Backport of enum.StrEnum: members are str and str() gives the value."""

        __str__ = str.__str__
        __format__ = str.__format__

Vec3 = NDArray[np.float64]
DistanceOracle = Callable[[NDArray[np.float64]], NDArray[np.float64]]

# Absolute tolerance on coordinates of order 1
GEOMETRIC_TOL = 1e-9

# One-sided statistical threshold for audits, in standard errors
AUDIT_SIGMA = 3.0

# Above this many boundary triangles, distance queries go through a KD-tree
BRUTE_FORCE_TRIANGLES = 64

# Points per distance-query chunk
DISTANCE_CHUNK = 8192


def as_points(x: ArrayLike) -> NDArray[np.float64]:
    """Coerce a point or a point list into a finite (n, 3) float array."""
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if points.shape[-1] != 3:
        raise GeometryError(f"points must have 3 coordinates, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise GeometryError("points must have finite coordinates")
    return points


class DomainKind(StrEnum):
    """Variants of bounded open regions."""

    BALL = "ball"
    BOX = "box"
    CONVEX_POLYTOPE = "convex_polytope"
    LSHAPE = "lshape"
    TILE_UNION = "tile_union"
    EMPTY = "empty"
    INTERSECTION = "intersection"


# Kinds whose volume_hint is a closed form that volume() may return directly
EXACT_VOLUME_KINDS = frozenset(
    {
        DomainKind.BALL,
        DomainKind.BOX,
        DomainKind.CONVEX_POLYTOPE,
        DomainKind.TILE_UNION,
        DomainKind.EMPTY,
    }
)

# Kinds certified to belong to the regularity class used by experiments
REGULAR_KINDS = frozenset(
    {DomainKind.BALL, DomainKind.BOX, DomainKind.CONVEX_POLYTOPE, DomainKind.LSHAPE}
)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi]."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    @classmethod
    def from_arrays(cls, lo: ArrayLike, hi: ArrayLike) -> "Box":
        lo_arr = np.asarray(lo, dtype=float)
        hi_arr = np.asarray(hi, dtype=float)
        return cls(
            lo=(float(lo_arr[0]), float(lo_arr[1]), float(lo_arr[2])),
            hi=(float(hi_arr[0]), float(hi_arr[1]), float(hi_arr[2])),
        )

    @classmethod
    def around(cls, points: ArrayLike) -> "Box":
        """Smallest box containing the given points."""
        pts = as_points(points)
        return cls.from_arrays(pts.min(axis=0), pts.max(axis=0))

    @property
    def lower(self) -> Vec3:
        return np.array(self.lo)

    @property
    def upper(self) -> Vec3:
        return np.array(self.hi)

    @property
    def extent(self) -> Vec3:
        return self.upper - self.lower

    @property
    def is_degenerate(self) -> bool:
        return bool(np.any(self.extent <= 0))

    @property
    def volume(self) -> float:
        return 0.0 if self.is_degenerate else float(np.prod(self.extent))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(np.maximum(self.extent, 0.0)))

    @property
    def center(self) -> Vec3:
        return 0.5 * (self.lower + self.upper)

    def inflated(self, s: float) -> "Box":
        return Box.from_arrays(self.lower - s, self.upper + s)

    def intersection(self, other: "Box") -> "Box":
        return Box.from_arrays(
            np.maximum(self.lower, other.lower), np.minimum(self.upper, other.upper)
        )

    def corners(self) -> NDArray[np.float64]:
        return np.array(list(itertools.product(*zip(self.lo, self.hi, strict=True))))

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        pts = as_points(points)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)


def _dot(u: NDArray[np.float64], v: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.sum(u * v, axis=-1)


def point_triangle_distance(
    points: NDArray[np.float64],
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    c: NDArray[np.float64],
) -> NDArray[np.float64]:
    """
    Euclidean distance from points to triangles (Ericson's closest-point regions).

    The triangle corners broadcast against the points, so one triangle can be
    tested against many points or paired arrays can be tested elementwise.
    """
    ab = b - a
    ac = c - a
    ap = points - a
    bp = points - b
    cp = points - c
    d1, d2 = _dot(ab, ap), _dot(ac, ap)
    d3, d4 = _dot(ab, bp), _dot(ac, bp)
    d5, d6 = _dot(ab, cp), _dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        v_face = vb / denom
        w_face = vc / denom

    shape = np.broadcast_shapes(points.shape, np.shape(a))
    a_full = np.broadcast_to(a, shape)
    b_full = np.broadcast_to(b, shape)
    c_full = np.broadcast_to(c, shape)

    # Regions applied from lowest to highest priority; later writes win
    closest = a + ab * v_face[..., None] + ac * w_face[..., None]
    regions = [
        ((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0), b + (c - b) * w_bc[..., None]),
        ((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + ac * w_ac[..., None]),
        ((d6 >= 0) & (d5 <= d6), c_full),
        ((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + ab * v_ab[..., None]),
        ((d3 >= 0) & (d4 <= d3), b_full),
        ((d1 <= 0) & (d2 <= 0), a_full),
    ]
    for mask, candidate in regions:
        closest = np.where(mask[..., None], candidate, closest)
    return np.linalg.norm(points - closest, axis=-1)


class TriangleSoup:
    """Set of boundary triangles answering capped distance queries."""

    def __init__(self, triangles: NDArray[np.float64]):
        self.triangles = np.asarray(triangles, dtype=float).reshape(-1, 3, 3)

    def __len__(self) -> int:
        return len(self.triangles)

    @cached_property
    def _tree(self) -> tuple[cKDTree, float]:
        centroids = self.triangles.mean(axis=1)
        reach = float(np.max(np.linalg.norm(self.triangles - centroids[:, None, :], axis=-1)))
        return cKDTree(centroids), reach

    def distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        """
        Distance from each point to the nearest triangle.

        Args:
            points: (n, 3) query points
            cap: Distances up to cap are exact; larger ones are only guaranteed
                to exceed cap

        Returns:
            Array of n distances
        """
        pts = as_points(points)
        if len(self.triangles) == 0:
            return np.full(len(pts), math.inf)
        if len(self.triangles) <= BRUTE_FORCE_TRIANGLES:
            result = np.full(len(pts), math.inf)
            for a, b, c in self.triangles:
                result = np.minimum(result, point_triangle_distance(pts, a, b, c))
            return result
        return np.concatenate(
            [
                self._tree_distance(pts[i : i + DISTANCE_CHUNK], cap)
                for i in range(0, len(pts), DISTANCE_CHUNK)
            ]
        )

    def _tree_distance(self, pts: NDArray[np.float64], cap: float) -> NDArray[np.float64]:
        tree, reach = self._tree
        # Centroids lie on their triangles, so the nearest one bounds the distance
        upper, _ = tree.query(pts)
        radius = np.minimum(upper, cap) + reach
        neighbours = tree.query_ball_point(pts, radius)
        counts = np.fromiter((len(n) for n in neighbours), dtype=np.int64, count=len(pts))
        point_idx = np.repeat(np.arange(len(pts)), counts)
        tri_idx = np.fromiter(
            itertools.chain.from_iterable(neighbours), dtype=np.int64, count=int(counts.sum())
        )
        tris = self.triangles[tri_idx]
        exact = point_triangle_distance(pts[point_idx], tris[:, 0], tris[:, 1], tris[:, 2])
        result = np.array(upper, dtype=float)
        np.minimum.at(result, point_idx, exact)
        return result

    def transformed(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> "TriangleSoup":
        return TriangleSoup(scale * self.triangles @ matrix.T + shift)


@dataclass(frozen=True, eq=False)
class Polytope:
    """Bounded convex solid {x : n_i . x <= b_i} with its vertices and boundary triangles."""

    normals: NDArray[np.float64]
    offsets: NDArray[np.float64]
    vertices: NDArray[np.float64]
    triangles: NDArray[np.float64]
    exact_volume: float

    @classmethod
    def from_vertices(cls, points: ArrayLike) -> "Polytope":
        """
        Build the convex hull of a point cloud.

        Args:
            points: At least four affinely independent points

        Returns:
            Polytope with merged coplanar facets and the hull volume
        """
        pts = as_points(points)
        try:
            hull = ConvexHull(pts)
        except (QhullError, ValueError) as e:
            raise GeometryError(f"degenerate polytope: {e}") from e

        # Triangulated facets repeat their plane; keep one half-space per plane
        equations = np.unique(np.round(hull.equations, 12), axis=0)
        polytope = cls(
            normals=equations[:, :3],
            offsets=-equations[:, 3],
            vertices=pts[hull.vertices],
            triangles=pts[hull.simplices],
            exact_volume=float(hull.volume),
        )
        polytope.validate()
        return polytope

    @classmethod
    def box(cls, lo: ArrayLike, hi: ArrayLike) -> "Polytope":
        return cls.from_vertices(Box.from_arrays(lo, hi).corners())

    def validate(self) -> None:
        """Check the half-space/vertex consistency invariant."""
        scale = max(1.0, float(np.max(np.abs(self.vertices))))
        slack = self.vertices @ self.normals.T - self.offsets
        if np.max(slack) > GEOMETRIC_TOL * scale:
            raise GeometryError(f"vertex violates a half-space by {np.max(slack):.3e}")
        if not np.all(np.isfinite(self.vertices)) or len(self.vertices) == 0:
            raise GeometryError("polytope must have a finite, nonempty vertex set")

    @property
    def bbox(self) -> Box:
        return Box.around(self.vertices)

    @cached_property
    def diameter(self) -> float:
        return float(np.max(pdist(self.vertices)))

    @cached_property
    def barycenter(self) -> Vec3:
        """Centroid of the solid, from the cone decomposition over boundary triangles."""
        apex = self.vertices.mean(axis=0)
        a, b, c = self.triangles[:, 0], self.triangles[:, 1], self.triangles[:, 2]
        volumes = np.abs(np.einsum("ij,ij->i", a - apex, np.cross(b - apex, c - apex))) / 6.0
        centroids = (apex + a + b + c) / 4.0
        return np.asarray(volumes @ centroids / volumes.sum())

    def contains(self, points: ArrayLike, tol: float = GEOMETRIC_TOL) -> NDArray[np.bool_]:
        """Closed membership with tolerance."""
        pts = as_points(points)
        return np.all(pts @ self.normals.T <= self.offsets + tol, axis=1)

    def interior_contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        pts = as_points(points)
        return np.all(pts @ self.normals.T < self.offsets, axis=1)

    def plane_excess(self, points: ArrayLike) -> NDArray[np.float64]:
        """max_i (n_i . x - b_i): minus the inner distance for inside points."""
        pts = as_points(points)
        return np.max(pts @ self.normals.T - self.offsets, axis=1)

    def signed_distance(self, points: ArrayLike) -> NDArray[np.float64]:
        pts = as_points(points)
        result = self.plane_excess(pts)
        outside = result > 0
        if np.any(outside):
            result[outside] = TriangleSoup(self.triangles).distance(pts[outside])
        return result

    def chebyshev_ball(self) -> tuple[Vec3, float]:
        """Center and radius of the largest inscribed ball."""
        m = len(self.normals)
        a_ub = np.hstack([self.normals, np.ones((m, 1))])
        result = linprog(
            c=[0.0, 0.0, 0.0, -1.0],
            A_ub=a_ub,
            b_ub=self.offsets,
            bounds=[(None, None)] * 3 + [(0, None)],
            method="highs",
        )
        if not result.success:
            raise GeometryError(f"inradius program failed: {result.message}")
        return np.asarray(result.x[:3]), float(result.x[3])

    def transformed(self, matrix: NDArray[np.float64], scale: float, shift: ArrayLike) -> "Polytope":
        """Image under x -> matrix @ (scale * x) + shift."""
        if scale <= 0:
            raise GeometryError(f"scale must be positive, got {scale}")
        shift = np.asarray(shift, dtype=float)
        normals = self.normals @ matrix.T
        return Polytope(
            normals=normals,
            offsets=scale * self.offsets + normals @ shift,
            vertices=scale * self.vertices @ matrix.T + shift,
            triangles=scale * self.triangles @ matrix.T + shift,
            exact_volume=self.exact_volume * scale**3,
        )

    def translated(self, shift: ArrayLike) -> "Polytope":
        return self.transformed(np.eye(3), 1.0, shift)

    @cached_property
    def _cones(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        apex = self.vertices.mean(axis=0)
        tets = np.concatenate(
            [np.broadcast_to(apex, (len(self.triangles), 1, 3)), self.triangles], axis=1
        )
        a, b, c = (tets[:, k] - apex for k in (1, 2, 3))
        weights = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
        return tets, weights / weights.sum()

    def sample_uniform(self, rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        """n points uniform in the solid: pick a boundary cone by volume, then Dirichlet weights."""
        tets, weights = self._cones
        picks = rng.choice(len(tets), size=n, p=weights)
        bary = rng.dirichlet(np.ones(4), size=n)
        return np.einsum("nk,nkd->nd", bary, tets[picks])


def signed_distance(p: Polytope, x: ArrayLike) -> float | NDArray[np.float64]:
    """
    Signed distance to a convex polytope.

    Negative inside (minus the nearest face-plane distance), positive outside
    (exact distance to the solid), zero on the boundary.
    """
    values = p.signed_distance(x)
    return float(values[0]) if np.ndim(x) == 1 else values


def convex_sausage_bound(polytope: Polytope, s: float) -> tuple[float, float]:
    """
    Upper bounds on the volume within distance s of a convex body's boundary.

    Returns:
        ((1+s/r)^3 - (1-s/r)^3) |K| and its linear relaxation 8 s/r |K|, with r
        the inradius; only meaningful for s <= r
    """
    _, r = polytope.chebyshev_ball()
    if s > r:
        raise GeometryError(f"bound requires s <= inradius ({s} > {r})")
    ratio = s / r
    cubic = ((1 + ratio) ** 3 - (1 - ratio) ** 3) * polytope.exact_volume
    return cubic, 8 * ratio * polytope.exact_volume


class Domain(ABC):
    """Bounded open region of R^3 seen through oracles."""

    kind: DomainKind

    @property
    @abstractmethod
    def bbox(self) -> Box: ...

    @abstractmethod
    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        """Membership oracle; False everywhere outside bbox."""

    @abstractmethod
    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        """Unsigned distance to the boundary, exact up to cap."""

    @abstractmethod
    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> "Domain":
        """Image under x -> matrix @ (scale * x) + shift."""

    @abstractmethod
    def describe(self) -> str: ...

    @property
    def volume_hint(self) -> float | None:
        return None

    @property
    def diameter_hint(self) -> float | None:
        return None

    @property
    def exact_distance(self) -> bool:
        return True

    @property
    def certified_regular(self) -> bool:
        return self.kind in REGULAR_KINDS

    def signed_distance(self, points: ArrayLike) -> NDArray[np.float64]:
        pts = as_points(points)
        d = self.boundary_distance(pts)
        return np.where(self.contains(pts), -d, d)

    def __str__(self) -> str:
        return self.describe()


@dataclass(frozen=True, eq=False)
class Ball(Domain):
    center: tuple[float, float, float]
    radius: float
    kind: DomainKind = field(default=DomainKind.BALL, init=False)

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise GeometryError(f"ball radius must be positive, got {self.radius}")

    @property
    def _c(self) -> Vec3:
        return np.array(self.center)

    @property
    def bbox(self) -> Box:
        return Box.from_arrays(self._c - self.radius, self._c + self.radius)

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        pts = as_points(points)
        return np.sum((pts - self._c) ** 2, axis=1) < self.radius**2

    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        pts = as_points(points)
        return np.abs(np.linalg.norm(pts - self._c, axis=1) - self.radius)

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> "Ball":
        center = matrix @ (scale * self._c) + shift
        return Ball(center=tuple(float(v) for v in center), radius=scale * self.radius)

    def describe(self) -> str:
        return f"ball(r={self.radius:g})"

    @property
    def volume_hint(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3

    @property
    def diameter_hint(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True, eq=False)
class ConvexDomain(Domain):
    """Interior of a convex polytope; kind BOX for axis-aligned boxes."""

    polytope: Polytope
    kind: DomainKind = DomainKind.CONVEX_POLYTOPE
    label: str = "polytope"

    @property
    def bbox(self) -> Box:
        return self.polytope.bbox

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return self.polytope.interior_contains(points)

    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        return np.abs(self.polytope.signed_distance(points))

    def signed_distance(self, points: ArrayLike) -> NDArray[np.float64]:
        return self.polytope.signed_distance(points)

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> "ConvexDomain":
        kind = self.kind if np.allclose(matrix, np.eye(3)) else DomainKind.CONVEX_POLYTOPE
        return ConvexDomain(self.polytope.transformed(matrix, scale, shift), kind, self.label)

    def describe(self) -> str:
        return f"{self.label}(V={self.polytope.exact_volume:g})"

    @property
    def volume_hint(self) -> float:
        return self.polytope.exact_volume

    @property
    def diameter_hint(self) -> float:
        return self.polytope.diameter


def _box_union_boundary(boxes: Sequence[Box]) -> NDArray[np.float64]:
    """Boundary triangles of a union of grid-aligned boxes meeting face to face."""
    faces: dict[tuple[float, ...], int] = {}
    for bx in boxes:
        for axis in range(3):
            others = [k for k in range(3) if k != axis]
            for side in (bx.lo[axis], bx.hi[axis]):
                key = (
                    axis,
                    round(side, 9),
                    *(round(bx.lo[k], 9) for k in others),
                    *(round(bx.hi[k], 9) for k in others),
                )
                faces[key] = faces.get(key, 0) + 1

    triangles = []
    for key, count in faces.items():
        if count != 1:
            continue
        axis, side, lo1, lo2, hi1, hi2 = key
        others = [k for k in range(3) if k != axis]
        quad = []
        for u, v in ((lo1, lo2), (hi1, lo2), (hi1, hi2), (lo1, hi2)):
            corner = [0.0, 0.0, 0.0]
            corner[axis] = side
            corner[others[0]] = u
            corner[others[1]] = v
            quad.append(corner)
        triangles.append([quad[0], quad[1], quad[2]])
        triangles.append([quad[0], quad[2], quad[3]])
    return np.array(triangles, dtype=float).reshape(-1, 3, 3)


@dataclass(frozen=True, eq=False)
class LShape(Domain):
    """Cube [o, o+size]^3 with the corner cube [o+size-notch, o+size]^3 removed."""

    origin: tuple[float, float, float]
    size: float
    notch: float
    kind: DomainKind = field(default=DomainKind.LSHAPE, init=False)

    def __post_init__(self) -> None:
        if not 0 < self.notch < self.size:
            raise GeometryError(f"notch must lie in (0, size), got {self.notch} vs {self.size}")

    @property
    def bbox(self) -> Box:
        o = np.array(self.origin)
        return Box.from_arrays(o, o + self.size)

    @property
    def _notch_box(self) -> Box:
        o = np.array(self.origin)
        return Box.from_arrays(o + self.size - self.notch, o + self.size)

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        pts = as_points(points)
        outer = self.bbox
        notch = self._notch_box
        in_outer = np.all((pts > outer.lower) & (pts < outer.upper), axis=1)
        in_notch = np.all(pts >= notch.lower, axis=1)
        return in_outer & ~in_notch

    @cached_property
    def _boundary(self) -> TriangleSoup:
        o = self.origin
        split = self.size - self.notch
        cuts = [(o[k], o[k] + split, o[k] + self.size) for k in range(3)]
        pieces = []
        for idx in itertools.product((0, 1), repeat=3):
            if idx == (1, 1, 1):
                continue
            pieces.append(
                Box(
                    lo=tuple(cuts[k][idx[k]] for k in range(3)),
                    hi=tuple(cuts[k][idx[k] + 1] for k in range(3)),
                )
            )
        return TriangleSoup(_box_union_boundary(pieces))

    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        return self._boundary.distance(points, cap)

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> Domain:
        return MovedDomain(self, np.asarray(matrix, dtype=float), scale, np.asarray(shift, dtype=float))

    def describe(self) -> str:
        return f"lshape(size={self.size:g},notch={self.notch:g})"

    @property
    def volume_hint(self) -> float:
        return self.size**3 - self.notch**3

    @property
    def diameter_hint(self) -> float:
        return math.sqrt(3.0) * self.size


@dataclass(frozen=True, eq=False)
class MovedDomain(Domain):
    """Image of a domain under x -> matrix @ (scale * x) + shift, by inverse mapping."""

    base: Domain
    matrix: NDArray[np.float64]
    scale: float
    shift: NDArray[np.float64]

    @property
    def kind(self) -> DomainKind:  # type: ignore[override]
        return self.base.kind

    def _pull_back(self, points: ArrayLike) -> NDArray[np.float64]:
        return ((as_points(points) - self.shift) @ self.matrix) / self.scale

    @property
    def bbox(self) -> Box:
        corners = self.base.bbox.corners()
        return Box.around(self.scale * corners @ self.matrix.T + self.shift)

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return self.base.contains(self._pull_back(points))

    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        return self.scale * self.base.boundary_distance(self._pull_back(points), cap / self.scale)

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> Domain:
        return MovedDomain(
            self.base,
            matrix @ self.matrix,
            scale * self.scale,
            matrix @ (scale * self.shift) + shift,
        )

    def describe(self) -> str:
        return f"moved({self.base.describe()},scale={self.scale:g})"

    @property
    def volume_hint(self) -> float | None:
        base = self.base.volume_hint
        return None if base is None else base * self.scale**3

    @property
    def diameter_hint(self) -> float | None:
        base = self.base.diameter_hint
        return None if base is None else base * self.scale

    @property
    def exact_distance(self) -> bool:
        return self.base.exact_distance


@dataclass(frozen=True, eq=False)
class EmptyDomain(Domain):
    """The empty set."""

    kind: DomainKind = field(default=DomainKind.EMPTY, init=False)

    @property
    def bbox(self) -> Box:
        return Box(lo=(0.0, 0.0, 0.0), hi=(0.0, 0.0, 0.0))

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return np.zeros(len(as_points(points)), dtype=bool)

    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        return np.full(len(as_points(points)), math.inf)

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> "EmptyDomain":
        return self

    def describe(self) -> str:
        return "empty"

    @property
    def volume_hint(self) -> float:
        return 0.0

    @property
    def diameter_hint(self) -> float:
        return 0.0


@dataclass(frozen=True, eq=False)
class IntersectionDomain(Domain):
    """A ∩ B; boundary distances are exact inside and a lower bound outside."""

    first: Domain
    second: Domain
    kind: DomainKind = field(default=DomainKind.INTERSECTION, init=False)

    @property
    def bbox(self) -> Box:
        return self.first.bbox.intersection(self.second.bbox)

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        pts = as_points(points)
        return self.first.contains(pts) & self.second.contains(pts)

    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        pts = as_points(points)
        # max of signed distances: exact inside, a lower bound outside
        return np.abs(np.maximum(self.first.signed_distance(pts), self.second.signed_distance(pts)))

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> Domain:
        return IntersectionDomain(
            self.first.moved(matrix, scale, shift), self.second.moved(matrix, scale, shift)
        )

    def describe(self) -> str:
        return f"({self.first.describe()} & {self.second.describe()})"

    @property
    def exact_distance(self) -> bool:
        return False

    @property
    def is_empty(self) -> bool:
        return self.bbox.is_degenerate


def ball(radius: float, center: ArrayLike = (0.0, 0.0, 0.0)) -> Ball:
    c = np.asarray(center, dtype=float)
    return Ball(center=(float(c[0]), float(c[1]), float(c[2])), radius=float(radius))


def box(lo: ArrayLike, hi: ArrayLike) -> ConvexDomain:
    return ConvexDomain(Polytope.box(lo, hi), DomainKind.BOX, "box")


def cube(side: float, center: ArrayLike = (0.0, 0.0, 0.0)) -> ConvexDomain:
    c = np.asarray(center, dtype=float)
    return box(c - side / 2, c + side / 2)


def convex_hull(points: ArrayLike, label: str = "polytope") -> ConvexDomain:
    return ConvexDomain(Polytope.from_vertices(points), DomainKind.CONVEX_POLYTOPE, label)


def lshape(size: float, notch: float, origin: ArrayLike = (-0.5, -0.5, -0.5)) -> LShape:
    """
    L-shape with its corner at `origin`.

    The default origin puts every face halfway between lattice planes, so
    lshape(n, k) holds exactly n^3 - k^3 sites of Z^3 for integer n and k. Pass origin=(0, 0, 0)
    for the cube [0, size]^3 with its faces on lattice planes.
    """
    o = np.asarray(origin, dtype=float)
    return LShape(origin=(float(o[0]), float(o[1]), float(o[2])), size=float(size), notch=float(notch))


@dataclass(frozen=True)
class MeasureEstimate:
    """Monte Carlo (or exact, stderr 0) measure of a set."""

    value: float
    stderr: float
    samples: int
    seed: int


def volume(domain: Domain, samples: int, seed: int, *, exact: bool = True) -> MeasureEstimate:
    """
    Estimate |Omega| by hit-or-miss sampling over the bounding box.

    Args:
        domain: Region to measure
        samples: Number of uniform points (>= 1)
        seed: Experiment seed
        exact: Return the closed form when the domain kind admits one

    Returns:
        MeasureEstimate; stderr is zero on the exact path
    """
    if samples < 1:
        raise GeometryError(f"samples must be at least 1, got {samples}")
    hint = domain.volume_hint
    if exact and domain.kind in EXACT_VOLUME_KINDS and hint is not None:
        return MeasureEstimate(value=hint, stderr=0.0, samples=samples, seed=seed)
    if domain.kind is DomainKind.EMPTY:
        return MeasureEstimate(value=0.0, stderr=0.0, samples=samples, seed=seed)

    bbox = domain.bbox
    if bbox.is_degenerate:
        raise GeometryError("empty bounding box")
    value, stderr = integrate_over_box(
        lambda pts: domain.contains(pts).astype(float),
        bbox.lower,
        bbox.upper,
        samples,
        seed,
        STREAM_VOLUME,
    )
    return MeasureEstimate(value=value, stderr=stderr, samples=samples, seed=seed)


def reference_volume(domain: Domain, samples: int, seed: int) -> float:
    """|Omega| from the closed form when known, otherwise by Monte Carlo."""
    hint = domain.volume_hint
    return hint if hint is not None else volume(domain, samples, seed).value


def sausage_volume(
    domain: Domain,
    dist_oracle: DistanceOracle | None,
    t: float,
    samples: int,
    seed: int,
) -> MeasureEstimate:
    """
    Estimate |{x : d(x, boundary) <= |Omega|^(1/3) t}|.

    Args:
        domain: Region whose boundary is thickened
        dist_oracle: Unsigned boundary distance; defaults to the domain's own
        t: Scale-free thickness (>= 0)
        samples: Number of uniform points
        seed: Experiment seed

    Returns:
        MeasureEstimate over the bounding box inflated by the absolute thickness
    """
    if t < 0:
        raise GeometryError(f"sausage thickness must be non-negative, got {t}")
    vol = reference_volume(domain, samples, seed)
    s = vol ** (1.0 / 3.0) * t
    if not math.isfinite(s):
        raise GeometryError(f"sausage thickness {s} exceeds the inflated bounding box")
    if s == 0:
        return MeasureEstimate(value=0.0, stderr=0.0, samples=samples, seed=seed)

    oracle = dist_oracle or partial(domain.boundary_distance, cap=s)
    region = domain.bbox.inflated(s)
    value, stderr = integrate_over_box(
        lambda pts: (oracle(pts) <= s).astype(float),
        region.lower,
        region.upper,
        samples,
        seed,
        STREAM_SAUSAGE,
    )
    return MeasureEstimate(value=value, stderr=stderr, samples=samples, seed=seed)


@dataclass(frozen=True)
class EtaClass:
    """eta(t) = a t^b on [0, c)."""

    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise GeometryError(f"a > 0 required, got {self.a}")
        if not 0 < self.b <= 1:
            raise GeometryError(f"b in (0,1] required, got {self.b}")
        if not self.c > 0:
            raise GeometryError(f"c > 0 required, got {self.c}")

    def __call__(self, t: float) -> float:
        if not 0 <= t < self.c:
            raise GeometryError(f"eta undefined at t={t} (domain [0, {self.c}))")
        return self.a * t**self.b

    def scaled(self, m: float) -> "EtaClass":
        return EtaClass(a=self.a * m, b=self.b, c=self.c)


@dataclass(frozen=True)
class RegularityRow:
    t: float
    sausage: float
    stderr: float
    bound: float
    margin_sigma: float
    passed: bool


@dataclass
class RegularityReport:
    """Per-t comparison of sausage volumes against |Omega| eta(t)."""

    domain: str
    volume: float
    rows: list[RegularityRow] = field(default_factory=list)
    m: float | None = None  # smallest passing multiplier, when measured
    probabilistic: bool = False

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def worst(self) -> RegularityRow | None:
        return min(self.rows, key=lambda r: r.margin_sigma, default=None)


def eta_regularity_audit(
    domain: Domain,
    eta: EtaClass,
    t_grid: Sequence[float],
    samples: int,
    seed: int,
) -> RegularityReport:
    """
    Audit Fisher regularity: |{d(x, boundary) <= |Omega|^(1/3) t}| <= |Omega| eta(t).

    One-sided test per t; a row fails when the estimate exceeds the bound by
    more than AUDIT_SIGMA standard errors.
    """
    for t in t_grid:
        eta(t)

    vol = reference_volume(domain, samples, seed)
    report = RegularityReport(domain=domain.describe(), volume=vol, probabilistic=not domain.exact_distance)
    for t in t_grid:
        estimate = sausage_volume(domain, None, t, samples, seed)
        bound = vol * eta(t)
        excess = estimate.value - bound
        if estimate.stderr > 0:
            margin = -excess / estimate.stderr
        else:
            margin = math.inf if excess <= 0 else -math.inf
        passed = excess <= AUDIT_SIGMA * estimate.stderr + GEOMETRIC_TOL * max(1.0, bound)
        if not passed:
            logger.warning(
                f"Regularity violated for {domain.describe()} at t={t}: "
                f"{estimate.value:.6g} > {bound:.6g} ({margin:.2f} sigma)"
            )
        report.rows.append(
            RegularityRow(
                t=t,
                sausage=estimate.value,
                stderr=estimate.stderr,
                bound=bound,
                margin_sigma=margin,
                passed=passed,
            )
        )
    return report


def diameter(domain: Domain) -> float:
    """Exact diameter when known, otherwise the bounding-box diagonal (an upper bound)."""
    hint = domain.diameter_hint
    return hint if hint is not None else domain.bbox.diagonal


def regularized_volume(domain: Domain) -> float:
    """
    Volume of the smallest regular set containing Omega over a candidate family.

    Candidates are Omega itself (when its kind is certified regular), its
    bounding box and the ball circumscribing that box.
    """
    bbox = domain.bbox
    candidates = [bbox.volume, 4.0 / 3.0 * math.pi * (bbox.diagonal / 2.0) ** 3]
    hint = domain.volume_hint
    if domain.certified_regular and hint is not None:
        candidates.append(hint)
    return min(candidates)
