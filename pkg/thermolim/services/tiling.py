"""Simplex tiling of R^3 under Gamma = Z^3 x O, with O the 24 rotations of the cube.

The reference simplex Delta has vertices at the cube center, a face center and
the two corners of one edge of that face; its 24 rotated copies partition the
unit cube centred at the origin. Tile (z, r) of a frame (g, ell, tau) is
ell * g(z + R_r((1 + tau) Delta)).
"""

import itertools
import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import get_settings
from ..errors import GeometryError, GuardViolation, RegularityError
from .geom import (
    GEOMETRIC_TOL,
    Box,
    Domain,
    DomainKind,
    EtaClass,
    Polytope,
    RegularityReport,
    TriangleSoup,
    Vec3,
    as_points,
    eta_regularity_audit,
    reference_volume,
)
from .motion import RigidMotion, Rotation, sample_motion_in_cell
from .sampling import STREAM_FRAME, generator

logger = logging.getLogger(__name__)

DELTA_VERTICES = np.array(
    [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.5, 0.5, -0.5], [0.5, 0.5, 0.5]]
)
DELTA_VOLUME = 1.0 / 24.0

# Tile keys pack (cell, rot) into one int64, ordered like (cell, rot) tuples
CELL_BITS = 19
CELL_OFFSET = 1 << (CELL_BITS - 1)
ROT_BITS = 5

# Faces of a tetrahedron by vertex index
TET_FACES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# Cells per enumeration chunk
CELL_CHUNK = 4096

# Largest tolerated MC fraction of doubly covered or uncovered cell points
COVER_TOL = 1e-3


@lru_cache
def octahedral_rotations() -> NDArray[np.int64]:
    """The 24 signed permutation matrices with determinant +1, identity first."""
    mats = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=np.int64)
            for row in range(3):
                m[row, perm[row]] = signs[row]
            if round(np.linalg.det(m)) == 1:
                mats.append(m)
    identity = np.eye(3, dtype=np.int64)
    mats.sort(key=lambda m: (not np.array_equal(m, identity), tuple(m.flatten())))
    return np.array(mats)


@lru_cache
def _rotated_delta() -> NDArray[np.float64]:
    """Delta's vertices under each of the 24 rotations, shape (24, 4, 3)."""
    return np.einsum("rij,vj->rvi", octahedral_rotations().astype(float), DELTA_VERTICES)


@lru_cache
def _flag_table() -> NDArray[np.int64]:
    """Rotation index by (face axis, face sign, edge axis, edge sign)."""
    table = np.full((3, 2, 3, 2), -1, dtype=np.int64)
    for r, m in enumerate(octahedral_rotations()):
        face = int(np.argmax(np.abs(m[:, 0])))
        edge = int(np.argmax(np.abs(m[:, 1])))
        table[face, int(m[face, 0] < 0), edge, int(m[edge, 1] < 0)] = r
    return table


@lru_cache
def reference_simplex() -> Polytope:
    """Delta: a 24th of the unit cube centred at the origin, with a vertex at 0."""
    return Polytope.from_vertices(DELTA_VERTICES)


@lru_cache
def interior_reference_simplex() -> Polytope:
    """Delta translated so that its barycenter sits at the origin."""
    delta = reference_simplex()
    return delta.translated(-delta.barycenter)


@lru_cache
def reference_cube() -> Polytope:
    return Polytope.box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))


def classify_rotations(v: NDArray[np.float64]) -> NDArray[np.int64]:
    """
    Rotation index of the cell tile containing each cell-local point.

    The largest |coordinate| selects the face, the second largest the edge.
    """
    rows = np.arange(len(v))
    mag = np.abs(v)
    face = np.argmax(mag, axis=1)
    rest = mag.copy()
    rest[rows, face] = -1.0
    edge = np.argmax(rest, axis=1)
    face_sign = (v[rows, face] < 0).astype(np.int64)
    edge_sign = (v[rows, edge] < 0).astype(np.int64)
    return _flag_table()[face, face_sign, edge, edge_sign]


def encode_keys(cells: ArrayLike, rots: ArrayLike) -> NDArray[np.int64]:
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3) + CELL_OFFSET
    rots = np.asarray(rots, dtype=np.int64).reshape(-1)
    if np.any(cells < 0) or np.any(cells >= (1 << CELL_BITS)):
        raise GeometryError("tile cell index out of the addressable range")
    key = (cells[:, 0] << CELL_BITS | cells[:, 1]) << CELL_BITS | cells[:, 2]
    return (key << ROT_BITS) | rots


def decode_keys(keys: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    keys = np.asarray(keys, dtype=np.int64).reshape(-1)
    mask = (1 << CELL_BITS) - 1
    rots = keys & ((1 << ROT_BITS) - 1)
    packed = keys >> ROT_BITS
    cells = np.stack(
        [(packed >> (2 * CELL_BITS)) & mask, (packed >> CELL_BITS) & mask, packed & mask], axis=1
    )
    return cells - CELL_OFFSET, rots


@dataclass(frozen=True, order=True)
class TileIndex:
    """mu = (z, r) in Z^3 x O."""

    cell: tuple[int, int, int]
    rot: int

    def __post_init__(self) -> None:
        if not 0 <= self.rot < 24:
            raise GeometryError(f"rotation index must lie in 0..23, got {self.rot}")

    @property
    def key(self) -> int:
        return int(encode_keys([self.cell], [self.rot])[0])

    @classmethod
    def from_key(cls, key: int) -> "TileIndex":
        cells, rots = decode_keys([key])
        z = cells[0]
        return cls(cell=(int(z[0]), int(z[1]), int(z[2])), rot=int(rots[0]))


def indices_from_keys(keys: ArrayLike) -> list[TileIndex]:
    cells, rots = decode_keys(keys)
    return [
        TileIndex(cell=(int(z[0]), int(z[1]), int(z[2])), rot=int(r))
        for z, r in zip(cells, rots, strict=True)
    ]


@dataclass(frozen=True)
class TilingFrame:
    """Placement (g, ell, tau) of the tiling: tile(mu) = ell g mu (1 + tau) Delta."""

    g: RigidMotion
    ell: float
    tau: float = 0.0

    def __post_init__(self) -> None:
        if not self.ell > 0:
            raise GeometryError(f"ell must be positive, got {self.ell}")
        if not 0 <= self.tau < 1:
            raise GeometryError(f"tau must lie in [0, 1), got {self.tau}")

    @classmethod
    def identity(cls, ell: float = 1.0, tau: float = 0.0) -> "TilingFrame":
        return cls(g=RigidMotion.identity(), ell=ell, tau=tau)

    @property
    def matrix(self) -> NDArray[np.float64]:
        return self.g.rot.matrix

    def to_world(self, local: ArrayLike) -> NDArray[np.float64]:
        pts = np.asarray(local, dtype=float)
        return self.ell * (pts @ self.matrix.T + self.g.translation)

    def to_local(self, points: ArrayLike) -> NDArray[np.float64]:
        return (as_points(points) / self.ell - self.g.translation) @ self.matrix

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> "TilingFrame":
        """Frame whose tiles are the images of this frame's tiles."""
        ell = scale * self.ell
        rot = Rotation.from_matrix(matrix).compose(self.g.rot)
        trans = matrix @ self.g.translation + np.asarray(shift, dtype=float) / ell
        return TilingFrame(g=RigidMotion.of(rot, trans), ell=ell, tau=self.tau)

    @property
    def tile_volume(self) -> float:
        return DELTA_VOLUME * (self.ell * (1 + self.tau)) ** 3

    @property
    def cell_reach(self) -> float:
        """Half-diagonal of an inflated cell, in world units."""
        return self.ell * (1 + self.tau) * math.sqrt(3.0) / 2.0


def sample_frames(seed: int, count: int, ell: float, tau: float = 0.0) -> list[TilingFrame]:
    """Frames at uniformly sampled points of the fundamental cell of G / Gamma."""
    return [TilingFrame(g=sample_motion_in_cell(seed, i), ell=ell, tau=tau) for i in range(count)]


def tile_vertices(frame: TilingFrame, cells: ArrayLike, rots: ArrayLike) -> NDArray[np.float64]:
    """World vertices of tiles, shape (n, 4, 3)."""
    cells = np.asarray(cells, dtype=float).reshape(-1, 3)
    local = cells[:, None, :] + (1 + frame.tau) * _rotated_delta()[np.asarray(rots).reshape(-1)]
    return frame.to_world(local)


def tile(frame: TilingFrame, mu: TileIndex) -> Polytope:
    """The polytope ell g (z + R_rot((1 + tau) Delta))."""
    rot = octahedral_rotations()[mu.rot].astype(float)
    local = reference_simplex().transformed(rot, 1 + frame.tau, mu.cell)
    return local.transformed(frame.matrix, frame.ell, frame.ell * frame.g.translation)


def _cell_block(frame: TilingFrame, region: Box) -> NDArray[np.int64]:
    """Cells whose inflated cube can meet the region, as an (n, 3) array."""
    local = frame.to_local(region.corners())
    reach = 0.5 * (1 + frame.tau)
    lo = np.ceil(local.min(axis=0) - reach - GEOMETRIC_TOL).astype(np.int64)
    hi = np.floor(local.max(axis=0) + reach + GEOMETRIC_TOL).astype(np.int64)
    axes = [np.arange(lo[k], hi[k] + 1) for k in range(3)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grid], axis=1)


def _chunks(cells: NDArray[np.int64]) -> Iterator[NDArray[np.int64]]:
    for start in range(0, len(cells), CELL_CHUNK):
        yield cells[start : start + CELL_CHUNK]


def _expand(cells: NDArray[np.int64]) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """All 24 (cell, rot) pairs of each cell, in key order."""
    return np.repeat(cells, 24, axis=0), np.tile(np.arange(24), len(cells))


def tetra_box_overlap(tets: NDArray[np.float64], region: Box) -> NDArray[np.bool_]:
    """
    Interior intersection test between tetrahedra and an axis-aligned box.

    Separating-axis test over box axes, tetrahedron face normals and edge/axis
    cross products; touching within GEOMETRIC_TOL counts as separated.
    """
    n = len(tets)
    box_axes = np.broadcast_to(np.eye(3), (n, 3, 3))
    face_normals = np.stack(
        [np.cross(tets[:, j] - tets[:, i], tets[:, k] - tets[:, i]) for i, j, k in TET_FACES],
        axis=1,
    )
    edges = np.stack([tets[:, j] - tets[:, i] for i, j in TET_EDGES], axis=1)
    crosses = np.cross(edges[:, :, None, :], np.eye(3)[None, None, :, :]).reshape(n, 18, 3)
    axes = np.concatenate([box_axes, face_normals, crosses], axis=1)

    projections = np.einsum("nkd,nvd->nkv", axes, tets)
    t_min, t_max = projections.min(axis=2), projections.max(axis=2)
    centre = axes @ region.center
    radius = np.abs(axes) @ (0.5 * region.extent)
    norms = np.linalg.norm(axes, axis=2)
    slack = GEOMETRIC_TOL * norms
    separated = (norms > 1e-12) & (
        (t_max <= centre - radius + slack) | (t_min >= centre + radius - slack)
    )
    return ~np.any(separated, axis=1)


def enumerate_intersecting(frame: TilingFrame, region_bbox: Box) -> list[TileIndex]:
    """
    Every tile whose interior meets the box, sorted by (cell, rot).

    Candidate cells come from the box's extent in frame coordinates; each
    candidate is then filtered by an exact separating-axis test.
    """
    if region_bbox.is_degenerate:
        return []
    keys = []
    for block in _chunks(_cell_block(frame, region_bbox)):
        cells, rots = _expand(block)
        hit = tetra_box_overlap(tile_vertices(frame, cells, rots), region_bbox)
        keys.append(encode_keys(cells[hit], rots[hit]))
    return indices_from_keys(np.sort(np.concatenate(keys)))


def locate_tiles(frame: TilingFrame, points: ArrayLike) -> NDArray[np.int64]:
    """Key of the tau = 0 tile containing each point."""
    y = frame.to_local(points)
    z = np.rint(y)
    return encode_keys(z.astype(np.int64), classify_rotations(y - z))


def assign_sites(frame: TilingFrame, points: ArrayLike, tol: float = GEOMETRIC_TOL) -> NDArray[np.int64]:
    """
    Assign each point to the lexicographically smallest closed tau = 0 tile containing it.

    Points on shared faces, edges or vertices would otherwise belong to several
    tiles; the smallest (cell, rot) wins.
    """
    y = frame.to_local(points)
    base = np.rint(y).astype(np.int64)
    delta = reference_simplex()
    rotations = octahedral_rotations().astype(float)
    best = np.full(len(y), np.iinfo(np.int64).max)
    for offset in itertools.product((-1, 0, 1), repeat=3):
        cells = base + np.array(offset)
        v = y - cells
        near = np.all(np.abs(v) <= 0.5 + tol, axis=1)
        if not np.any(near):
            continue
        for r, rot in enumerate(rotations):
            inside = near & delta.contains(v @ rot, tol=tol)
            if np.any(inside):
                keys = encode_keys(cells[inside], np.full(int(inside.sum()), r))
                best[inside] = np.minimum(best[inside], keys)
    return best


@dataclass(frozen=True, eq=False)
class TileUnion(Domain):
    """Union of the tiles of one frame listed by key."""

    frame: TilingFrame
    keys: NDArray[np.int64]
    kind: DomainKind = field(default=DomainKind.TILE_UNION, init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "keys", np.unique(np.asarray(self.keys, dtype=np.int64)))

    def __len__(self) -> int:
        return len(self.keys)

    def tiles(self) -> list[TileIndex]:
        return indices_from_keys(self.keys)

    @cached_property
    def _vertices(self) -> NDArray[np.float64]:
        cells, rots = decode_keys(self.keys)
        return tile_vertices(self.frame, cells, rots)

    @property
    def bbox(self) -> Box:
        if len(self.keys) == 0:
            return Box(lo=(0.0, 0.0, 0.0), hi=(0.0, 0.0, 0.0))
        return Box.around(self._vertices.reshape(-1, 3))

    def _member(self, keys: NDArray[np.int64]) -> NDArray[np.bool_]:
        if len(self.keys) == 0:
            return np.zeros(len(keys), dtype=bool)
        pos = np.clip(np.searchsorted(self.keys, keys), 0, len(self.keys) - 1)
        return self.keys[pos] == keys

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        y = self.frame.to_local(points)
        if self.frame.tau == 0:
            z = np.rint(y)
            return self._member(encode_keys(z.astype(np.int64), classify_rotations(y - z)))

        # Inflated tiles of a cell partition its inflated cube; check every cell in reach
        scale = 1 + self.frame.tau
        base = np.rint(y).astype(np.int64)
        result = np.zeros(len(y), dtype=bool)
        for offset in itertools.product((-1, 0, 1), repeat=3):
            cells = base + np.array(offset)
            v = y - cells
            within = np.all(np.abs(v) < 0.5 * scale, axis=1)
            if np.any(within):
                keys = encode_keys(cells[within], classify_rotations(v[within] / scale))
                result[within] |= self._member(keys)
        return result

    @cached_property
    def _boundary(self) -> TriangleSoup:
        verts = self._vertices
        faces = np.concatenate([verts[:, list(face)] for face in TET_FACES], axis=0)
        if self.frame.tau > 0:
            logger.warning("Inflated tiles overlap; boundary distance is a conservative lower bound")
            return TriangleSoup(faces)

        # At tau = 0 the tiling is face-to-face: interior faces appear exactly twice
        cells, rots = decode_keys(self.keys)
        local = 2.0 * (cells[:, None, :] + _rotated_delta()[rots])
        ids = np.rint(local).astype(np.int64) + (1 << 20)
        vertex_ids = (ids[..., 0] << 42) | (ids[..., 1] << 21) | ids[..., 2]
        face_ids = np.concatenate([vertex_ids[:, list(face)] for face in TET_FACES], axis=0)
        face_ids.sort(axis=1)
        _, inverse, counts = np.unique(face_ids, axis=0, return_inverse=True, return_counts=True)
        return TriangleSoup(faces[counts[np.ravel(inverse)] == 1])

    def boundary_distance(self, points: ArrayLike, cap: float = math.inf) -> NDArray[np.float64]:
        return self._boundary.distance(points, cap)

    def moved(self, matrix: NDArray[np.float64], scale: float, shift: Vec3) -> "TileUnion":
        return TileUnion(frame=self.frame.moved(matrix, scale, shift), keys=self.keys)

    def describe(self) -> str:
        return f"tile_union(n={len(self.keys)},ell={self.frame.ell:g},tau={self.frame.tau:g})"

    @property
    def volume_hint(self) -> float | None:
        if self.frame.tau > 0:
            return None
        return len(self.keys) * self.frame.tile_volume

    @property
    def exact_distance(self) -> bool:
        return self.frame.tau == 0


@dataclass
class InnerApprox:
    """Tiles kept strictly inside Omega with boundary margin delta."""

    keys: NDArray[np.int64]
    union_domain: TileUnion
    delta_margin: float
    probabilistic: bool = False

    @property
    def kept(self) -> list[TileIndex]:
        return indices_from_keys(self.keys)

    @property
    def volume(self) -> float:
        return self.union_domain.volume_hint or 0.0


def _check_guards(omega: Domain, frame: TilingFrame) -> None:
    settings = get_settings()
    size = reference_volume(omega, settings.samples, settings.seed) ** (1.0 / 3.0)
    upper = size * settings.ell_max_ratio
    if not settings.ell_min < frame.ell < upper:
        raise GuardViolation(
            f"inner-approximation guards violated: ell={frame.ell} outside "
            f"({settings.ell_min}, {upper:.6g})"
        )


def _tile_probe_points(verts: NDArray[np.float64]) -> NDArray[np.float64]:
    """Dense barycentric sample of each tetrahedron, shape (n, k, 3)."""
    weights = [
        np.array(w, dtype=float) / 4.0
        for w in itertools.product(range(5), repeat=4)
        if sum(w) == 4
    ]
    bary = np.array(weights)
    return np.einsum("kv,nvd->nkd", bary, verts)


def _keep_tiles(omega: Domain, verts: NDArray[np.float64], delta: float) -> tuple[NDArray[np.bool_], bool]:
    """Which tiles lie in Omega with margin delta; second value flags sampling."""
    n = len(verts)
    if omega.kind in (DomainKind.BALL, DomainKind.BOX, DomainKind.CONVEX_POLYTOPE):
        # Omega convex: its inner parallel set is convex, so the vertices decide
        sd = omega.signed_distance(verts.reshape(-1, 3)).reshape(n, 4)
        return np.all(sd < -delta, axis=1), False

    centroids = verts.mean(axis=1)
    radii = np.max(np.linalg.norm(verts - centroids[:, None, :], axis=2), axis=1)
    sd_centroid = omega.signed_distance(centroids)
    certified = sd_centroid < -(delta + radii)
    undecided = ~certified & (sd_centroid < -delta)
    keep = certified.copy()
    if np.any(undecided):
        probes = _tile_probe_points(verts[undecided])
        sd = omega.signed_distance(probes.reshape(-1, 3)).reshape(len(probes), -1)
        keep[undecided] = np.all(sd < -delta, axis=1)
        return keep, True
    return keep, False


def inner_approximation(omega: Domain, frame: TilingFrame, delta: float) -> InnerApprox:
    """
    Union of the frame's tiles lying inside Omega at boundary distance > delta.

    Args:
        omega: Domain with an exact signed distance
        frame: Tiling placement
        delta: Boundary margin (> 0)

    Returns:
        InnerApprox with keys sorted by (cell, rot)
    """
    if not delta > 0:
        raise GeometryError(f"delta must be positive, got {delta}")
    _check_guards(omega, frame)

    kept = []
    probabilistic = False
    if not omega.bbox.is_degenerate:
        for block in _chunks(_cell_block(frame, omega.bbox)):
            # The cell center is a vertex of all 24 of its tiles
            sd_center = omega.signed_distance(frame.to_world(block.astype(float)))
            full = block[sd_center < -(delta + frame.cell_reach)]
            partial = block[(sd_center < -delta) & (sd_center >= -(delta + frame.cell_reach))]
            if len(full):
                kept.append(encode_keys(*_expand(full)))
            if len(partial):
                cells, rots = _expand(partial)
                keep, sampled = _keep_tiles(omega, tile_vertices(frame, cells, rots), delta)
                probabilistic |= sampled
                kept.append(encode_keys(cells[keep], rots[keep]))

    keys = np.sort(np.concatenate(kept)) if kept else np.zeros(0, dtype=np.int64)
    if probabilistic:
        logger.warning(f"Containment in {omega.describe()} checked by sampling tile points")
    logger.info(f"Inner approximation of {omega.describe()} at ell={frame.ell}: {len(keys)} tiles")
    return InnerApprox(
        keys=keys,
        union_domain=TileUnion(frame=frame, keys=keys),
        delta_margin=delta,
        probabilistic=probabilistic,
    )


def regularity_of_inner_approx_audit(
    omega: Domain,
    eta: EtaClass,
    frame: TilingFrame | None,
    delta: float,
    t_grid: list[float],
    samples: int,
    seed: int,
    m: float | None = None,
) -> RegularityReport:
    """
    Audit the inner approximation against m * eta and measure the smallest passing m.

    Args:
        omega: Domain that must itself pass the eta audit
        eta: Regularity class of omega
        frame: Tiling placement; None audits omega itself
        delta: Boundary margin of the inner approximation
        t_grid: Scale-free sausage thicknesses
        samples: Monte Carlo samples per thickness
        seed: Experiment seed
        m: Multiplier of eta for the union (defaults to Settings.m_max)

    Returns:
        RegularityReport of the union with report.m the smallest empirical multiplier
    """
    base = eta_regularity_audit(omega, eta, t_grid, samples, seed)
    if not base.passed:
        raise RegularityError(f"{omega.describe()} fails the regularity audit it is compared against")
    if frame is None:
        base.m = 1.0
        return base

    multiplier = m if m is not None else get_settings().m_max
    approx = inner_approximation(omega, frame, delta)
    union = approx.union_domain
    if len(union) == 0:
        return RegularityReport(domain=union.describe(), volume=0.0, m=1.0)

    report = eta_regularity_audit(union, eta.scaled(multiplier), t_grid, samples, seed)
    report.probabilistic = report.probabilistic or approx.probabilistic
    needed = [1.0]
    for row in report.rows:
        base_bound = row.bound / multiplier
        if base_bound > 0:
            needed.append((row.sausage - 3.0 * row.stderr) / base_bound)
    report.m = max(needed)
    return report


@dataclass(frozen=True)
class CellTilingCheck:
    """The 24 tiles of one cell against the cell itself."""

    volume_sum: float
    double_cover_fraction: float
    uncovered_fraction: float
    samples: int

    @property
    def passed(self) -> bool:
        return (
            abs(self.volume_sum - 1.0) <= GEOMETRIC_TOL
            and self.double_cover_fraction < COVER_TOL
            and self.uncovered_fraction < COVER_TOL
        )


def check_cell_tiling(samples: int, seed: int) -> CellTilingCheck:
    """
    Check that the 24 tiles of the cell around the origin partition it.

    Volumes are summed from the closed form; overlaps and gaps are measured
    on uniform points of [-1/2, 1/2]^3.
    """
    frame = TilingFrame.identity()
    tiles = [tile(frame, TileIndex(cell=(0, 0, 0), rot=r)) for r in range(len(octahedral_rotations()))]
    volume_sum = math.fsum(p.exact_volume for p in tiles)

    points = generator(seed, STREAM_FRAME, 1).random((samples, 3)) - 0.5
    interior = np.zeros(samples, dtype=np.int64)
    closed = np.zeros(samples, dtype=np.int64)
    for p in tiles:
        interior += p.interior_contains(points)
        closed += p.contains(points)
    check = CellTilingCheck(
        volume_sum=volume_sum,
        double_cover_fraction=float(np.mean(interior >= 2)),
        uncovered_fraction=float(np.mean(closed == 0)),
        samples=samples,
    )
    logger.info(
        f"Cell tiling: volume {volume_sum!r}, double cover {check.double_cover_fraction:.2e}, "
        f"gaps {check.uncovered_fraction:.2e}"
    )
    return check


def uncovered_fractions(omega: Domain, ells: list[float], delta: float) -> list[tuple[float, float]]:
    """(ell, |Omega \\ A| / |Omega|) for the identity frame at each ell."""
    settings = get_settings()
    vol = reference_volume(omega, settings.samples, settings.seed)
    out = []
    for ell in ells:
        approx = inner_approximation(omega, TilingFrame.identity(ell), delta)
        out.append((ell, 1.0 - approx.volume / vol if vol > 0 else 0.0))
    return out
