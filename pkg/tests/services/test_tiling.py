"""Tests for the rigid simplex tiling and inner approximations."""

import logging

import numpy as np
import pytest

from thermolim.errors import GeometryError, GuardViolation, RegularityError
from thermolim.services.geom import Box, EtaClass, ball
from thermolim.services.sampling import generator
from thermolim.services.tiling import (
    DELTA_VOLUME,
    TileIndex,
    TileUnion,
    TilingFrame,
    assign_sites,
    check_cell_tiling,
    enumerate_intersecting,
    inner_approximation,
    locate_tiles,
    octahedral_rotations,
    reference_simplex,
    regularity_of_inner_approx_audit,
    sample_frames,
    tile,
    uncovered_fractions,
)


class TestOctahedralGroup:
    """Tests for the 24 cube rotations."""

    def test_group(self):
        """24 distinct proper rotations with the identity first."""
        rotations = octahedral_rotations()
        assert rotations.shape == (24, 3, 3)
        np.testing.assert_array_equal(rotations[0], np.eye(3, dtype=np.int64))
        assert len({tuple(m.flatten()) for m in rotations}) == 24
        for m in rotations:
            assert round(np.linalg.det(m)) == 1

    def test_reference_simplex_volume(self):
        """The reference simplex is a 24th of the unit cube."""
        assert reference_simplex().exact_volume == pytest.approx(DELTA_VOLUME)


class TestTileIndex:
    """Tests for tile indices and their integer keys."""

    def test_rot_range(self):
        """Rotation indices lie in 0..23."""
        with pytest.raises(GeometryError):
            TileIndex(cell=(0, 0, 0), rot=24)

    def test_key_order(self):
        """Keys sort like (cell, rot)."""
        a = TileIndex(cell=(-1, 5, 0), rot=23)
        b = TileIndex(cell=(0, 0, 0), rot=0)
        c = TileIndex(cell=(0, 0, 0), rot=1)
        assert a.key < b.key < c.key
        assert TileIndex.from_key(a.key) == a


class TestTilingFrame:
    """Tests for frame validation."""

    def test_tau_range(self):
        """tau must lie in [0, 1)."""
        with pytest.raises(GeometryError, match="tau"):
            TilingFrame.identity(1.0, 1.0)
        with pytest.raises(GeometryError, match="tau"):
            TilingFrame.identity(1.0, -0.1)

    def test_ell_positive(self):
        """ell must be positive."""
        with pytest.raises(GeometryError, match="ell"):
            TilingFrame.identity(0.0)

    def test_tile_volume(self):
        """Tile volume is ell^3 (1 + tau)^3 / 24."""
        assert TilingFrame.identity(2.0).tile_volume == pytest.approx(8.0 / 24.0)
        assert TilingFrame.identity(1.0, 0.5).tile_volume == pytest.approx(3.375 / 24.0)


class TestCellTiling:
    """The 24 tiles of one cell partition it."""

    def test_check_cell_tiling(self):
        """Volumes sum to 1 with no overlaps and no gaps."""
        check = check_cell_tiling(20_000, 1)
        assert check.volume_sum == pytest.approx(1.0, abs=1e-12)
        assert check.double_cover_fraction == 0.0
        assert check.uncovered_fraction == 0.0
        assert check.passed

    def test_enumerate_small_box(self):
        """A box around a cell center meets exactly that cell's 24 tiles."""
        region = Box(lo=(-0.25, -0.25, -0.25), hi=(0.25, 0.25, 0.25))
        tiles = enumerate_intersecting(TilingFrame.identity(), region)
        assert len(tiles) == 24
        assert all(mu.cell == (0, 0, 0) for mu in tiles)
        assert tiles == sorted(tiles)

    def test_enumerate_covers_points(self):
        """Every point of the box lies in an enumerated tile of a moved frame."""
        frame = sample_frames(4, 1, ell=0.7)[0]
        region = Box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0))
        enumerated = {mu.key for mu in enumerate_intersecting(frame, region)}
        points = generator(4, 0).random((500, 3))
        assert set(locate_tiles(frame, points).tolist()) <= enumerated


class TestLocateTiles:
    """Tests for point location."""

    def test_located_tile_contains_point(self):
        """locate_tiles returns a tile containing each point."""
        frame = sample_frames(2, 1, ell=0.7)[0]
        points = generator(2, 1).random((200, 3)) * 4.0 - 2.0
        keys = locate_tiles(frame, points)
        for point, key in zip(points, keys, strict=True):
            assert tile(frame, TileIndex.from_key(int(key))).contains(point)[0]

    def test_assign_sites_generic_points(self):
        """Off the tile boundaries, assignment agrees with location."""
        frame = TilingFrame.identity(1.0)
        points = generator(3, 1).random((200, 3)) * 3.0
        np.testing.assert_array_equal(assign_sites(frame, points), locate_tiles(frame, points))

    def test_assign_sites_shared_vertices(self):
        """Shared vertices go to the smallest (cell, rot)."""
        frame = TilingFrame.identity(1.0)
        keys = assign_sites(frame, [[0.0, 0.0, 0.0], [0.5, 0.5, 0.5]])
        assert keys[0] == TileIndex(cell=(0, 0, 0), rot=0).key
        assert TileIndex.from_key(int(keys[1])).cell == (0, 0, 0)


class TestTileUnion:
    """Tests for unions of tiles."""

    def test_inflated_membership(self):
        """Inflated tiles reach into the neighbouring cell."""
        key = TileIndex(cell=(0, 0, 0), rot=0).key
        point = [[0.6, 0.1, 0.0]]
        assert not TileUnion(frame=TilingFrame.identity(1.0), keys=np.array([key])).contains(point)[0]
        assert TileUnion(frame=TilingFrame.identity(1.0, 0.5), keys=np.array([key])).contains(point)[0]

    def test_inflated_boundary_distance_is_lower_bound(self, caplog: pytest.LogCaptureFixture):
        """Overlapping inflated tiles keep their interior faces, so distances are underestimated."""
        keys = np.array([TileIndex(cell=(0, 0, 0), rot=r).key for r in range(24)])
        union = TileUnion(frame=TilingFrame.identity(1.0, 0.1), keys=keys)
        with caplog.at_level(logging.WARNING, logger="thermolim.services.tiling"):
            d = union.boundary_distance([[0.0, 0.0, 0.0]])
        assert d[0] == pytest.approx(0.0, abs=1e-12)
        assert "lower bound" in caplog.text

    def test_volume_hint(self):
        """At tau = 0 the union volume is the tile count times the tile volume."""
        keys = np.array([TileIndex(cell=(0, 0, 0), rot=r).key for r in range(24)])
        union = TileUnion(frame=TilingFrame.identity(2.0), keys=keys)
        assert union.volume_hint == pytest.approx(8.0)
        assert TileUnion(frame=TilingFrame.identity(2.0, 0.1), keys=keys).volume_hint is None


class TestInnerApproximation:
    """Tests for inner approximations by tiles."""

    def test_tiles_keep_margin(self):
        """Kept tiles stay delta away from the boundary."""
        omega = ball(5.0)
        frame = TilingFrame.identity(1.0)
        approx = inner_approximation(omega, frame, 0.5)
        assert len(approx.keys) > 0
        assert approx.volume == pytest.approx(len(approx.keys) / 24.0)
        for mu in approx.kept[:: max(1, len(approx.keys) // 50)]:
            assert np.all(np.linalg.norm(tile(frame, mu).vertices, axis=1) < 4.5)
        assert not approx.probabilistic

    def test_guards(self):
        """ell outside (ell_min, |Omega|^(1/3) ell_max_ratio) is rejected."""
        with pytest.raises(GuardViolation):
            inner_approximation(ball(1.0), TilingFrame.identity(0.05), 0.1)
        with pytest.raises(GuardViolation):
            inner_approximation(ball(1.0), TilingFrame.identity(30.0), 0.1)

    def test_delta_positive(self):
        """The boundary margin must be positive."""
        with pytest.raises(GeometryError, match="delta"):
            inner_approximation(ball(5.0), TilingFrame.identity(1.0), 0.0)

    def test_uncovered_fraction_shrinks_with_ell(self):
        """Smaller tiles leave less of the domain uncovered."""
        fractions = [f for _, f in uncovered_fractions(ball(5.0), [0.5, 1.0, 2.0], 0.25)]
        assert all(0.0 <= f <= 1.0 for f in fractions)
        assert fractions[0] < fractions[1] < fractions[2]


class TestInnerApproxRegularity:
    """Tests for the regularity audit of inner approximations."""

    def test_omega_itself(self):
        """Without a frame the domain is audited directly with m = 1."""
        report = regularity_of_inner_approx_audit(
            ball(1.0), EtaClass(13.0, 1.0, 0.25), None, 0.1, [0.1], 50_000, 1
        )
        assert report.passed
        assert report.m == 1.0

    def test_irregular_omega(self):
        """A domain failing its own class is rejected."""
        with pytest.raises(RegularityError):
            regularity_of_inner_approx_audit(
                ball(1.0), EtaClass(8.0, 1.0, 0.25), None, 0.1, [0.05, 0.1], 100_000, 1
            )

    @pytest.mark.slow
    def test_union_regular(self):
        """The tile union of a ball is regular with a bounded multiplier."""
        report = regularity_of_inner_approx_audit(
            ball(6.0), EtaClass(24.0, 1.0, 0.25), TilingFrame.identity(1.0), 1.0, [0.05, 0.1], 20_000, 1
        )
        assert report.passed
        assert 1.0 <= report.m <= 64.0

    @pytest.mark.slow
    @pytest.mark.parametrize("ell", [0.5, 1.0, 2.0])
    def test_union_regular_across_scales(self, ell: float):
        """The tile union of a radius-10 ball stays regular with a finite multiplier at every scale."""
        report = regularity_of_inner_approx_audit(
            ball(10.0), EtaClass(24.0, 1.0, 0.25), TilingFrame.identity(ell), 0.5, [0.05, 0.1], 20_000, 1
        )
        assert report.passed
        assert report.m is not None
        assert 1.0 <= report.m <= 64.0

    @pytest.mark.slow
    def test_uncovered_fraction_monotone_radius_ten(self):
        """On the radius-10 ball the uncovered fraction grows with the tile scale."""
        fractions = [f for _, f in uncovered_fractions(ball(10.0), [0.5, 1.0, 2.0], 0.5)]
        assert all(0.0 < f < 1.0 for f in fractions)
        assert fractions == sorted(fractions)
        assert fractions[0] < fractions[-1]
