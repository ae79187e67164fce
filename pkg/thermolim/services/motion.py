"""The sliding group G = R^3 x SO(3): rotations, rigid motions and Haar sampling.

Quaternions are stored scalar-first (w, x, y, z). Haar measure on G is
du x dR with dR the probability measure on SO(3), so integrating the
indicator of g^-1 x over G returns |A| with no extra constant.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, singledispatch

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..errors import GeometryError
from .geom import Domain, MeasureEstimate, Polytope, Vec3, as_points
from .sampling import STREAM_ROTATION, STREAM_TRANSLATION, generator, sample_mean

logger = logging.getLogger(__name__)

# Unit-norm tolerance for stored quaternions
QUATERNION_TOL = 1e-12

# Translation sampling box is the tight support box inflated by this factor
SUPPORT_INFLATION = 1.01


def normalize_quaternions(q: ArrayLike) -> NDArray[np.float64]:
    """Normalize and fold quaternions onto the w >= 0 hemisphere."""
    quats = np.atleast_2d(np.asarray(q, dtype=float))
    quats = quats / np.linalg.norm(quats, axis=1, keepdims=True)
    return np.where(quats[:, :1] < 0, -quats, quats)


def quaternion_matrices(q: ArrayLike) -> NDArray[np.float64]:
    """Rotation matrices of an (n, 4) quaternion array."""
    quats = np.atleast_2d(np.asarray(q, dtype=float))
    w, x, y, z = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    m = np.empty((len(quats), 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - z * w)
    m[:, 0, 2] = 2 * (x * z + y * w)
    m[:, 1, 0] = 2 * (x * y + z * w)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - x * w)
    m[:, 2, 0] = 2 * (x * z - y * w)
    m[:, 2, 1] = 2 * (y * z + x * w)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quaternion_product(p: ArrayLike, q: ArrayLike) -> NDArray[np.float64]:
    """Hamilton product, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, pv = p[..., :1], p[..., 1:]
    qw, qv = q[..., :1], q[..., 1:]
    w = pw * qw - np.sum(pv * qv, axis=-1, keepdims=True)
    v = pw * qv + qw * pv + np.cross(pv, qv)
    return np.concatenate([w, v], axis=-1)


def conjugate(q: ArrayLike) -> NDArray[np.float64]:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def rotate(q: ArrayLike, v: ArrayLike) -> NDArray[np.float64]:
    """Rotate vectors by quaternions (both broadcast over leading axes)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w, qv = q[..., :1], q[..., 1:]
    t = 2.0 * np.cross(qv, v)
    return v + w * t + np.cross(qv, t)


@dataclass(frozen=True)
class Rotation:
    """Element of SO(3) as a unit quaternion."""

    q: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if abs(math.fsum(c * c for c in self.q) - 1.0) > 2 * QUATERNION_TOL:
            raise GeometryError(f"rotation quaternion must be unit, got {self.q}")

    @classmethod
    def from_quaternion(cls, q: ArrayLike) -> "Rotation":
        folded = normalize_quaternions(q)[0]
        return cls(q=(float(folded[0]), float(folded[1]), float(folded[2]), float(folded[3])))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(q=(1.0, 0.0, 0.0, 0.0))

    @classmethod
    def from_matrix(cls, matrix: ArrayLike) -> "Rotation":
        """Quaternion of a proper rotation matrix (Shepperd's branch selection)."""
        m = np.asarray(matrix, dtype=float)
        trace = m[0, 0] + m[1, 1] + m[2, 2]
        if trace > 0:
            s = 2.0 * math.sqrt(trace + 1.0)
            q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        else:
            i = int(np.argmax(np.diag(m)))
            j, k = (i + 1) % 3, (i + 2) % 3
            s = 2.0 * math.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
            q = [0.0, 0.0, 0.0, 0.0]
            q[0] = (m[k, j] - m[j, k]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (m[j, i] + m[i, j]) / s
            q[1 + k] = (m[k, i] + m[i, k]) / s
        return cls.from_quaternion(q)

    @cached_property
    def matrix(self) -> NDArray[np.float64]:
        return quaternion_matrices(self.q)[0]

    def compose(self, other: "Rotation") -> "Rotation":
        """self after other."""
        return Rotation.from_quaternion(quaternion_product(self.q, other.q))

    def inverse(self) -> "Rotation":
        return Rotation.from_quaternion(conjugate(self.q))

    def apply(self, v: ArrayLike) -> NDArray[np.float64]:
        return rotate(np.array(self.q), v)


@dataclass(frozen=True)
class RigidMotion:
    """g = (u, R) acting as x -> R x + u."""

    rot: Rotation
    trans: tuple[float, float, float]

    @classmethod
    def identity(cls) -> "RigidMotion":
        return cls(rot=Rotation.identity(), trans=(0.0, 0.0, 0.0))

    @classmethod
    def of(cls, rot: Rotation, trans: ArrayLike) -> "RigidMotion":
        u = np.asarray(trans, dtype=float)
        return cls(rot=rot, trans=(float(u[0]), float(u[1]), float(u[2])))

    @property
    def translation(self) -> Vec3:
        return np.array(self.trans)

    def act(self, x: ArrayLike) -> NDArray[np.float64]:
        return self.rot.apply(x) + self.translation

    def compose(self, other: "RigidMotion") -> "RigidMotion":
        """self after other: x -> R1 (R2 x + u2) + u1."""
        return RigidMotion.of(self.rot.compose(other.rot), self.act(other.translation))

    def inverse(self) -> "RigidMotion":
        inv = self.rot.inverse()
        return RigidMotion.of(inv, -inv.apply(self.translation))


def sample_rotation(seed: int, index: int) -> Rotation:
    """Haar-uniform rotation, deterministic in (seed, index)."""
    rng = generator(seed, STREAM_ROTATION, 0, index)
    return Rotation.from_quaternion(rng.standard_normal(4))


def sample_rotations(rng: np.random.Generator, count: int) -> NDArray[np.float64]:
    """Draw count Haar-uniform unit quaternions from an existing generator."""
    return normalize_quaternions(rng.standard_normal((count, 4)))


def sample_motion_in_cell(seed: int, index: int) -> RigidMotion:
    """
    Uniform representative of the quotient G / (Z^3 x O).

    Rotation is Haar; translation is R w with w uniform in the unit cell, so
    translations cover a fundamental domain of the rotated lattice.
    """
    rng = generator(seed, STREAM_TRANSLATION, 0, index)
    rot = Rotation.from_quaternion(rng.standard_normal(4))
    return RigidMotion.of(rot, rot.apply(rng.random(3)))


@singledispatch
def _apply(obj: object, g: RigidMotion, scale: float) -> object:
    raise TypeError(f"cannot move object of type {type(obj).__name__}")


@_apply.register
def _(obj: np.ndarray, g: RigidMotion, scale: float) -> NDArray[np.float64]:
    return g.rot.apply(scale * np.asarray(obj, dtype=float)) + g.translation


@_apply.register(list)
@_apply.register(tuple)
def _(obj: list | tuple, g: RigidMotion, scale: float) -> NDArray[np.float64]:
    return _apply(np.asarray(obj, dtype=float), g, scale)  # type: ignore[return-value]


@_apply.register
def _(obj: Polytope, g: RigidMotion, scale: float) -> Polytope:
    return obj.transformed(g.rot.matrix, scale, g.translation)


@_apply.register
def _(obj: Domain, g: RigidMotion, scale: float) -> Domain:
    return obj.moved(g.rot.matrix, scale, g.translation)


def apply(g: RigidMotion, scale: float, obj: object) -> object:
    """
    Image of a point, point array, Polytope or Domain under x -> R (scale x) + u.

    Args:
        g: Rigid motion
        scale: Positive dilation applied before the motion
        obj: Object to move

    Returns:
        Object of the same kind
    """
    if scale <= 0:
        raise GeometryError(f"scale must be positive, got {scale}")
    return _apply(obj, g, scale)


def _support_radius(shape: Polytope | Domain) -> float:
    if isinstance(shape, Polytope):
        return float(np.max(np.linalg.norm(shape.vertices, axis=1)))
    return float(np.max(np.linalg.norm(shape.bbox.corners(), axis=1)))


def haar_translation_identity(
    A: Polytope | Domain,  # noqa: N803
    x: ArrayLike,
    samples: int,
    seed: int,
    half_width: float | None = None,
) -> MeasureEstimate:
    """
    Monte Carlo estimate of the G-integral of 1_A(g^-1 x), which equals |A|.

    Translations are drawn from the cube around x of half-width at least the
    radius of the smallest origin-centred ball containing A; rotations are Haar.

    Args:
        A: Set whose indicator is averaged
        x: Evaluation point
        samples: Number of (u, R) draws
        seed: Experiment seed
        half_width: Override of the translation box half-width

    Returns:
        MeasureEstimate of |A|
    """
    point = as_points(x)[0]
    radius = _support_radius(A)
    if half_width is None:
        half_width = radius * SUPPORT_INFLATION
    elif half_width < radius:
        raise GeometryError(
            f"support not covered: half-width {half_width} below support radius {radius}"
        )

    def membership(points: NDArray[np.float64]) -> NDArray[np.bool_]:
        if isinstance(A, Polytope):
            return A.contains(points, tol=0.0)
        return A.contains(points)

    def draw(rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        shifts = point + half_width * (2.0 * rng.random((n, 3)) - 1.0)
        quats = sample_rotations(rng, n)
        local = rotate(conjugate(quats), point - shifts)
        return membership(local).astype(float)

    mean, stderr = sample_mean(draw, samples, seed, STREAM_TRANSLATION)
    box_volume = (2.0 * half_width) ** 3
    return MeasureEstimate(value=box_volume * mean, stderr=box_volume * stderr, samples=samples, seed=seed)
