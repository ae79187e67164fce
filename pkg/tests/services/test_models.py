"""Tests for the energy models and their tile decompositions."""

import math

import numpy as np
import pytest

from thermolim.errors import ModelError
from thermolim.services.geom import EmptyDomain, Polytope, ball, box
from thermolim.services.models import (
    EnergyEstimate,
    GaussianFreeEnergyModel,
    LatticePairModel,
    LocalFunctionalModel,
    Quality,
    UnstableFixtureModel,
    box_sequence,
    decompose,
    energy,
    exact_limit_oracle,
    gaussian_entropy,
    lattice_sites,
)
from thermolim.services.tiling import TileIndex, TilingFrame

NEIGHBOUR = math.exp(-3.0)  # v(1) for the default lattice model


def site_tiles(sites: np.ndarray) -> list[TileIndex]:
    """The rot-0 tile of each integer site's cell."""
    return [TileIndex(cell=tuple(int(c) for c in np.rint(s)), rot=0) for s in sites]


class TestQuality:
    """Tests for Monte Carlo budgets."""

    def test_validation(self):
        """Samples must be positive and seeds non-negative."""
        with pytest.raises(ValueError, match="samples"):
            Quality(samples=0, seed=1)
        with pytest.raises(ValueError, match="seed"):
            Quality(samples=10, seed=-1)

    def test_derive(self):
        """Derived budgets append stream keys."""
        q = Quality(samples=10, seed=3).derive(4).derive(5)
        assert q.keys == (4, 5)
        assert q.samples == 10

    def test_default_reads_settings(self):
        """Defaults come from THERMOLIM_SAMPLES and THERMOLIM_SEED."""
        q = Quality.default()
        assert q.samples == 20_000
        assert q.seed == 1


class TestEnergyEstimate:
    """Tests for EnergyEstimate."""

    def test_deterministic_has_no_error(self):
        """A deterministic estimate with a nonzero stderr is inconsistent."""
        with pytest.raises(ValueError):
            EnergyEstimate(value=1.0, stderr=0.1, deterministic=True)
        assert EnergyEstimate.exact(2.0).stderr == 0.0


class TestLatticePairModel:
    """Tests for the truncated Yukawa lattice."""

    def test_validation(self):
        """Cutoff and screening mass are checked."""
        with pytest.raises(ModelError, match="r_cut"):
            LatticePairModel(r_cut=0.0)
        with pytest.raises(ModelError):
            LatticePairModel(m=-1.0)

    def test_sites_in_ball(self):
        """Integer points with |x|^2 < 2.25: origin, 6 faces and 12 edges."""
        assert len(lattice_sites(ball(1.5))) == 19

    def test_box_energy(self, lattice: LatticePairModel):
        """27 sites and 54 nearest-neighbour bonds in the 3-box."""
        est = energy(lattice, box_sequence([3])[0])
        assert est.deterministic
        assert est.value == pytest.approx(-27.0 + 54.0 * NEIGHBOUR, rel=1e-12)

    def test_offset(self):
        """Half-integer sites: 8 sites and 12 bonds in the 3-box."""
        model = LatticePairModel(offset=(0.5, 0.5, 0.5))
        est = energy(model, box_sequence([3])[0])
        assert est.value == pytest.approx(-8.0 + 12.0 * NEIGHBOUR, rel=1e-12)

    def test_exact_limit(self, lattice: LatticePairModel):
        """Six neighbours, each bond shared by two sites."""
        assert lattice.exact_limit == pytest.approx(-1.0 + 3.0 * NEIGHBOUR, rel=1e-12)

    def test_empty_domain(self, lattice: LatticePairModel):
        """The empty domain has zero energy."""
        assert energy(lattice, EmptyDomain()).value == 0.0

    def test_decomposition_regroups_energy(self, lattice: LatticePairModel):
        """Tile energies plus half the ordered pair sum give back E."""
        omega = box_sequence([3])[0]
        tiles = site_tiles(lattice.sites(omega))
        dec = decompose(lattice, omega, TilingFrame.identity(), tiles)
        assert dec.tile_total == pytest.approx(-27.0)
        assert dec.pair_total == pytest.approx(2 * 54.0 * NEIGHBOUR)
        assert dec.s_value == 0.0
        assert dec.total == pytest.approx(energy(lattice, omega).value, rel=1e-12)

    def test_pair_interaction(self, lattice: LatticePairModel):
        """Neighbouring sites interact through one bond; equal tiles are rejected."""
        omega = box_sequence([2])[0]
        decomposer = lattice.decomposer
        frame = TilingFrame.identity()
        a = TileIndex(cell=(0, 0, 0), rot=0)
        b = TileIndex(cell=(1, 0, 0), rot=0)
        assert decomposer.pair_interaction(omega, frame, a, b) == pytest.approx(NEIGHBOUR)
        with pytest.raises(ModelError):
            decomposer.pair_interaction(omega, frame, a, a)

    def test_duplicate_tiles(self, lattice: LatticePairModel):
        """A tile listed twice is rejected."""
        mu = TileIndex(cell=(0, 0, 0), rot=0)
        with pytest.raises(ModelError, match="more than once"):
            decompose(lattice, box_sequence([2])[0], TilingFrame.identity(), [mu, mu])

    def test_sliding_average_small_shape(self, lattice: LatticePairModel):
        """No bond fits in a shape of diameter below 1, so only self energies remain."""
        shape = Polytope.box((-0.25, -0.25, -0.25), (0.25, 0.25, 0.25))
        est = lattice.sliding_average(box_sequence([3])[0], shape, 2000, 1)
        assert est.value == pytest.approx(-27.0)

    def test_sliding_average_bounds(self, lattice: LatticePairModel):
        """Surviving bonds lie between none and all."""
        shape = Polytope.box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
        est = lattice.sliding_average(box_sequence([3])[0], shape, 20_000, 1)
        assert -27.0 < est.value < -27.0 + 54.0 * NEIGHBOUR


class TestGaussianFreeEnergyModel:
    """Tests for the Gaussian free energy."""

    def test_validation(self):
        """Temperature and jitter must be positive."""
        with pytest.raises(ModelError, match="temperature"):
            GaussianFreeEnergyModel(temperature=0.0)
        with pytest.raises(ModelError):
            GaussianFreeEnergyModel(rho=0.0)

    def test_single_site_entropy(self):
        """One site carries 1/2 log(2 pi e (1 + rho))."""
        h = gaussian_entropy(np.zeros((1, 3)), rho=1e-6)
        assert h == pytest.approx(0.5 * math.log(2.0 * math.pi * math.e * (1.0 + 1e-6)))

    def test_entropy_subadditive(self):
        """H(A ∪ B) <= H(A) + H(B)."""
        a = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        b = np.array([[0.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
        assert gaussian_entropy(np.vstack([a, b])) <= gaussian_entropy(a) + gaussian_entropy(b)

    def test_energy(self, gaussian: GaussianFreeEnergyModel):
        """F = e0 #sites - T H."""
        model = GaussianFreeEnergyModel(e0=0.5, temperature=2.0)
        omega = box_sequence([2])[0]
        sites = model.sites(omega)
        assert len(sites) == 8
        expected = 0.5 * 8 - 2.0 * gaussian_entropy(sites)
        assert energy(model, omega).value == pytest.approx(expected)

    def test_kappa_does_not_cover_tight_boxes(self, gaussian: GaussianFreeEnergyModel):
        """A box just wider than one cell holds 8 sites, above two per unit volume."""
        omega = box((-0.01, -0.01, -0.01), (1.01, 1.01, 1.01))
        assert len(gaussian.sites(omega)) == 8
        assert -energy(gaussian, omega).value > gaussian.kappa * omega.volume_hint

    def test_decomposition_regroups_energy(self, gaussian: GaussianFreeEnergyModel):
        """Block free energies minus the entropy defect give back F."""
        omega = box_sequence([2])[0]
        tiles = site_tiles(gaussian.sites(omega))
        dec = decompose(gaussian, omega, TilingFrame.identity(), tiles)
        assert len(dec.values) == 0
        assert dec.s_value <= 0.0
        assert dec.total == pytest.approx(energy(gaussian, omega).value, rel=1e-9)


class TestLocalFunctionalModel:
    """Tests for integrals of periodic densities."""

    def test_unit_box(self, local_sin: LocalFunctionalModel, quality: Quality):
        """The integral of sin^2(2 pi x) over a unit box is 1/2."""
        est = energy(local_sin, box((0, 0, 0), (1, 1, 1)), quality)
        assert not est.deterministic
        assert abs(est.value - 0.5) <= 3 * est.stderr + 1e-3

    def test_constant_density_is_exact(self):
        """A constant density on a closed-form volume is exact."""
        est = energy(LocalFunctionalModel.constant_density(2.0), ball(1.0))
        assert est.deterministic
        assert est.value == pytest.approx(8.0 / 3.0 * math.pi)

    def test_not_decomposable(self, local_sin: LocalFunctionalModel):
        """Local models have no tile decomposition."""
        with pytest.raises(ModelError, match="not decomposable"):
            decompose(local_sin, ball(2.0), TilingFrame.identity(), [])

    def test_sliding_average_recovers_energy(self):
        """Averaging a local energy over moved shapes gives E(Omega) back."""
        model = LocalFunctionalModel.constant_density(2.0)
        omega = ball(2.0)
        shape = Polytope.box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
        est = model.sliding_average(omega, shape, 20_000, 1)
        assert abs(est.value - 2.0 * omega.volume_hint) <= 3 * est.stderr

    def test_moved_average(self, local_sin: LocalFunctionalModel):
        """Over a large ball of translations the moved average is the cell average."""
        shape = Polytope.box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
        est = local_sin.moved_average(shape, 4.0, 20_000, 1)
        assert abs(est.value - 0.5) <= 3 * est.stderr + 2e-3


class TestUnstableFixtureModel:
    """The deliberately unstable model."""

    def test_energy(self):
        """E = -|Omega|^2."""
        est = energy(UnstableFixtureModel(), ball(1.0))
        assert est.value == pytest.approx(-((4.0 / 3.0 * math.pi) ** 2))


class TestExactLimitOracle:
    """Tests for extrapolation of box energies."""

    def test_lattice(self, lattice: LatticePairModel):
        """Lattice box densities are linear in 1/L, so extrapolation is exact."""
        value = exact_limit_oracle(lattice, [2, 3, 4])
        assert value == pytest.approx(lattice.exact_limit, rel=1e-9)

    def test_local_analytic(self, local_sin: LocalFunctionalModel):
        """Local models return their cell average."""
        assert exact_limit_oracle(local_sin, [2, 4]) == 0.5

    def test_sizes_validated(self, lattice: LatticePairModel):
        """At least two increasing sizes are required."""
        with pytest.raises(ValueError):
            exact_limit_oracle(lattice, [4])
        with pytest.raises(ValueError):
            exact_limit_oracle(lattice, [4, 2])

    def test_box_sequence(self):
        """Each box holds L^3 integer sites."""
        for size, domain in zip([1, 2, 3], box_sequence([1, 2, 3]), strict=True):
            assert len(lattice_sites(domain)) == size**3
