"""Tests for the geometry service."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermolim.errors import GeometryError
from thermolim.services.geom import (
    Box,
    DomainKind,
    EmptyDomain,
    EtaClass,
    IntersectionDomain,
    Polytope,
    ball,
    box,
    convex_hull,
    convex_sausage_bound,
    cube,
    diameter,
    eta_regularity_audit,
    lshape,
    point_triangle_distance,
    regularized_volume,
    sausage_volume,
    signed_distance,
    volume,
)
from thermolim.services.models import lattice_sites
from thermolim.services.sampling import generator

coordinates = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
points = st.tuples(coordinates, coordinates, coordinates)


class TestBox:
    """Tests for axis-aligned boxes."""

    def test_volume_and_diagonal(self):
        """Volume and diagonal of a 1 x 2 x 2 box."""
        bx = Box(lo=(0.0, 0.0, 0.0), hi=(1.0, 2.0, 2.0))
        assert bx.volume == 4.0
        assert bx.diagonal == 3.0
        assert len(bx.corners()) == 8

    def test_degenerate(self):
        """Zero or negative extent marks a degenerate box of volume 0."""
        flat = Box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 0.0))
        assert flat.is_degenerate
        assert flat.volume == 0.0

    def test_disjoint_intersection_is_degenerate(self):
        """Disjoint boxes intersect in a degenerate box."""
        a = Box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0))
        b = Box(lo=(2.0, 2.0, 2.0), hi=(3.0, 3.0, 3.0))
        assert a.intersection(b).is_degenerate


class TestPointTriangleDistance:
    """Tests for point_triangle_distance in each closest-point region."""

    A = np.array([0.0, 0.0, 0.0])
    B = np.array([1.0, 0.0, 0.0])
    C = np.array([0.0, 1.0, 0.0])

    @pytest.mark.parametrize(
        ("point", "expected"),
        [
            ((0.25, 0.25, 1.0), 1.0),  # face
            ((-1.0, -1.0, 0.0), math.sqrt(2.0)),  # vertex a
            ((0.5, -1.0, 0.0), 1.0),  # edge ab
            ((1.0, 1.0, 0.0), math.sqrt(0.5)),  # edge bc
            ((2.0, 0.0, 0.0), 1.0),  # vertex b
        ],
    )
    def test_regions(self, point: tuple[float, float, float], expected: float):
        """Distances match the closed form in every region."""
        d = point_triangle_distance(np.array([point]), self.A, self.B, self.C)
        assert d[0] == pytest.approx(expected)


class TestPolytope:
    """Tests for convex polytopes."""

    @pytest.fixture
    def cube2(self) -> Polytope:
        """The cube [-1, 1]^3."""
        return Polytope.box((-1, -1, -1), (1, 1, 1))

    def test_box_volume_and_facets(self, cube2: Polytope):
        """Coplanar hull triangles merge into six half-spaces."""
        assert cube2.exact_volume == pytest.approx(8.0)
        assert len(cube2.normals) == 6

    def test_degenerate_hull(self):
        """Coplanar points do not make a polytope."""
        with pytest.raises(GeometryError, match="degenerate"):
            Polytope.from_vertices([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])

    def test_signed_distance(self, cube2: Polytope):
        """Negative inside, exact Euclidean distance outside."""
        assert signed_distance(cube2, [0.0, 0.0, 0.0]) == pytest.approx(-1.0)
        assert signed_distance(cube2, [2.0, 0.0, 0.0]) == pytest.approx(1.0)
        assert signed_distance(cube2, [2.0, 2.0, 0.0]) == pytest.approx(math.sqrt(2.0))
        assert signed_distance(cube2, [1.0, 0.3, 0.0]) == pytest.approx(0.0, abs=1e-12)
        values = signed_distance(cube2, [[0.5, 0.0, 0.0], [0.0, 3.0, 0.0]])
        np.testing.assert_allclose(values, [-0.5, 2.0])

    def test_chebyshev_ball(self, cube2: Polytope):
        """The inscribed ball of the cube has radius 1 at the origin."""
        center, radius = cube2.chebyshev_ball()
        assert radius == pytest.approx(1.0)
        np.testing.assert_allclose(center, 0.0, atol=1e-9)

    def test_transformed(self, cube2: Polytope):
        """Scaling multiplies the volume by scale^3; rotation keeps membership consistent."""
        angle = 0.3
        rot = np.array(
            [[math.cos(angle), -math.sin(angle), 0], [math.sin(angle), math.cos(angle), 0], [0, 0, 1]]
        )
        moved = cube2.transformed(rot, 2.0, np.array([1.0, 0.0, 0.0]))
        assert moved.exact_volume == pytest.approx(64.0)
        x = np.array([[0.5, 0.2, -0.7]])
        assert moved.contains(rot @ (2.0 * x[0]) + [1.0, 0.0, 0.0])[0]

    def test_sample_uniform(self, cube2: Polytope):
        """Uniform samples lie inside and average to the barycenter."""
        pts = cube2.sample_uniform(generator(1, 0), 20_000)
        assert np.all(cube2.contains(pts))
        np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=0.03)

    def test_convex_sausage_bound(self, cube2: Polytope):
        """((1+s/r)^3 - (1-s/r)^3)|K| and 8 s/r |K| for the cube."""
        cubic, linear = convex_sausage_bound(cube2, 0.1)
        assert cubic == pytest.approx((1.1**3 - 0.9**3) * 8.0)
        assert linear == pytest.approx(6.4)
        with pytest.raises(GeometryError):
            convex_sausage_bound(cube2, 1.5)


class TestDomains:
    """Tests for the Domain variants."""

    def test_ball(self):
        """Closed-form volume and diameter of a ball."""
        b = ball(2.0)
        assert b.volume_hint == pytest.approx(32.0 / 3.0 * math.pi)
        assert diameter(b) == 4.0
        assert b.contains([[0.0, 0.0, 1.9]])[0]
        assert not b.contains([[0.0, 0.0, 2.1]])[0]
        assert b.describe() == "ball(r=2)"

    def test_box_kind(self):
        """Axis-aligned boxes keep kind BOX until rotated."""
        bx = cube(2.0)
        assert bx.kind is DomainKind.BOX
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert bx.moved(rot, 1.0, np.zeros(3)).kind is DomainKind.CONVEX_POLYTOPE
        assert diameter(bx) == pytest.approx(2.0 * math.sqrt(3.0))

    def test_lshape_membership(self):
        """The notch corner is excluded."""
        shape = lshape(2.0, 1.0, origin=(0, 0, 0))
        assert shape.volume_hint == 7.0
        inside = shape.contains([[0.5, 0.5, 0.5], [1.5, 1.5, 0.5], [1.5, 1.5, 1.5]])
        assert inside.tolist() == [True, True, False]

    def test_lshape_boundary_distance(self):
        """Boundary distance sees both outer faces and the notch."""
        shape = lshape(2.0, 1.0, origin=(0, 0, 0))
        d = shape.boundary_distance([[0.5, 0.5, 0.5], [1.5, 1.5, 0.9], [1.0, 1.0, 3.0]])
        np.testing.assert_allclose(d, [0.5, 0.1, 1.0])

    def test_lshape_default_origin_holds_lattice_sites(self):
        """Faces between lattice planes: lshape(n, k) holds n^3 - k^3 sites."""
        assert len(lattice_sites(lshape(4.0, 2.0))) == 56
        assert len(lattice_sites(lshape(16.0, 8.0))) == 3584
        assert len(lattice_sites(lshape(4.0, 2.0, origin=(0, 0, 0)))) == 19

    def test_moved_lshape(self):
        """A moved L-shape scales its volume and maps membership."""
        moved = lshape(2.0, 1.0, origin=(0, 0, 0)).moved(np.eye(3), 2.0, np.array([1.0, 0.0, 0.0]))
        assert moved.volume_hint == 56.0
        assert moved.contains([[2.0, 1.0, 1.0]])[0]
        assert not moved.contains([[4.0, 3.0, 3.0]])[0]

    def test_empty_domain(self):
        """The empty domain has zero volume and contains nothing."""
        empty = EmptyDomain()
        assert volume(empty, 10, 1).value == 0.0
        assert not empty.contains([[0.0, 0.0, 0.0]])[0]

    def test_intersection(self):
        """Membership of A ∩ B and emptiness of disjoint intersections."""
        both = IntersectionDomain(ball(1.0), box((0, 0, 0), (2, 2, 2)))
        assert both.contains([[0.5, 0.5, 0.5]])[0]
        assert not both.contains([[-0.5, 0.0, 0.0]])[0]
        far = IntersectionDomain(ball(1.0), box((5, 5, 5), (6, 6, 6)))
        assert far.is_empty

    def test_regularized_volume(self):
        """Certified regular domains are their own candidate."""
        assert regularized_volume(lshape(2.0, 1.0)) == 7.0
        both = IntersectionDomain(ball(1.0), box((0, 0, 0), (2, 2, 2)))
        assert regularized_volume(both) == pytest.approx(1.0)

    @given(x=points, y=points)
    @settings(max_examples=50, deadline=None)
    def test_ball_distance_lipschitz(self, x: tuple, y: tuple):
        """Boundary distance is 1-Lipschitz."""
        b = ball(1.5)
        dx, dy = b.boundary_distance([x, y])
        assert abs(dx - dy) <= math.dist(x, y) + 1e-9

    @given(x=points, y=points)
    @settings(max_examples=50, deadline=None)
    def test_cube_signed_distance_lipschitz(self, x: tuple, y: tuple):
        """Signed distance to a convex body is 1-Lipschitz."""
        bx = cube(2.0)
        dx, dy = bx.signed_distance([x, y])
        assert abs(dx - dy) <= math.dist(x, y) + 1e-9


class TestVolume:
    """Tests for volume estimation."""

    def test_exact_path(self):
        """Closed forms come back with zero stderr."""
        est = volume(ball(2.0), 100, 1)
        assert est.value == pytest.approx(32.0 / 3.0 * math.pi)
        assert est.stderr == 0.0

    def test_monte_carlo_ball(self):
        """Hit-or-miss volume of a ball lies within three standard errors."""
        est = volume(ball(1.0), 100_000, 1, exact=False)
        assert abs(est.value - 4.0 / 3.0 * math.pi) <= 3 * est.stderr

    def test_monte_carlo_lshape(self):
        """Hit-or-miss volume of an L-shape lies within three standard errors."""
        est = volume(lshape(2.0, 1.0, origin=(0, 0, 0)), 50_000, 3)
        assert est.stderr > 0
        assert abs(est.value - 7.0) <= 3 * est.stderr

    def test_invalid_samples(self):
        """At least one sample is required."""
        with pytest.raises(GeometryError):
            volume(ball(1.0), 0, 1)


class TestSausageVolume:
    """Tests for boundary sausages."""

    def test_annulus_of_unit_ball(self):
        """The sausage of thickness 0.1 around the unit sphere is the annulus 0.9 < |x| < 1.1."""
        unit = ball(1.0)
        t = 0.1 / unit.volume_hint ** (1.0 / 3.0)
        est = sausage_volume(unit, None, t, 200_000, 1)
        exact = 4.0 / 3.0 * math.pi * (1.1**3 - 0.9**3)
        assert exact == pytest.approx(2.5217, abs=1e-3)
        assert abs(est.value - exact) <= 3 * est.stderr

    def test_zero_thickness(self):
        """t = 0 gives an empty sausage."""
        assert sausage_volume(ball(1.0), None, 0.0, 100, 1).value == 0.0

    def test_negative_thickness(self):
        """Negative thickness is rejected."""
        with pytest.raises(GeometryError):
            sausage_volume(ball(1.0), None, -0.1, 100, 1)

    @pytest.mark.slow
    def test_convex_sausage_bound_on_random_polytopes(self):
        """Sausages of random convex polytopes obey the inradius bound."""
        rng = generator(11, 99)
        for k in range(10):
            body = convex_hull(rng.standard_normal((20, 3)))
            _, r = body.polytope.chebyshev_ball()
            size = body.volume_hint ** (1.0 / 3.0)
            for ratio in (0.05, 0.1, 0.2):
                est = sausage_volume(body, None, ratio * r / size, 20_000, k)
                _, linear = convex_sausage_bound(body.polytope, ratio * r)
                assert est.value <= linear + 3 * est.stderr


class TestEtaRegularity:
    """Tests for EtaClass and eta_regularity_audit."""

    def test_eta_class_validation(self):
        """a > 0, b in (0, 1] and c > 0 are enforced."""
        with pytest.raises(GeometryError, match="b in"):
            EtaClass(a=1.0, b=1.5, c=0.25)
        with pytest.raises(GeometryError):
            EtaClass(a=0.0, b=1.0, c=0.25)
        eta = EtaClass(a=2.0, b=0.5, c=0.25)
        assert eta(0.04) == pytest.approx(0.4)
        with pytest.raises(GeometryError, match="undefined"):
            eta(0.3)
        assert eta.scaled(3.0).a == 6.0

    def test_unit_ball_regular(self):
        """The unit ball lies in the class eta(t) = 13 t."""
        report = eta_regularity_audit(ball(1.0), EtaClass(13.0, 1.0, 0.25), [0.05, 0.1, 0.2], 100_000, 1)
        assert report.passed
        assert len(report.rows) == 3
        assert report.worst is not None

    def test_unit_ball_too_tight(self):
        """eta(t) = 8 t is too small for a ball: the normalized shell is about 9.7 t."""
        report = eta_regularity_audit(ball(1.0), EtaClass(8.0, 1.0, 0.25), [0.05, 0.1], 100_000, 1)
        assert not report.passed
        assert report.worst.margin_sigma < -3

    def test_scale_invariance(self):
        """Dilating the domain leaves the scale-free audit unchanged in outcome."""
        eta = EtaClass(13.0, 1.0, 0.25)
        small = eta_regularity_audit(ball(1.0), eta, [0.1], 50_000, 2)
        large = eta_regularity_audit(ball(10.0), eta, [0.1], 50_000, 2)
        assert small.rows[0].sausage / small.volume == pytest.approx(
            large.rows[0].sausage / large.volume, rel=1e-6
        )
