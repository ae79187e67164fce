"""Tests for the run configuration service."""

from pathlib import Path

import pytest

from thermolim.errors import ConfigError, GeometryError, ModelError
from thermolim.services.geom import DomainKind
from thermolim.services.models import GaussianFreeEnergyModel, LatticePairModel
from thermolim.services.run_config import (
    MODEL_REGISTRY,
    DomainSpec,
    ModelSpec,
    RunConfig,
    load_config_file,
    model_block,
    require_valid,
    validate_config,
)


def reasons(cfg: RunConfig) -> dict[str, str]:
    return {d.field: d.reason for d in validate_config(cfg)}


class TestConfigFile:
    """Tests for YAML loading."""

    def test_packaged_defaults(self):
        """Every registered model has a packaged parameter block."""
        data = load_config_file()
        assert set(data["models"]) == set(MODEL_REGISTRY)
        assert data["run"]["reference"] == "simplex"

    def test_user_file_overrides(self, tmp_path: Path):
        """User values sit on top of the packaged block."""
        path = tmp_path / "exp.yaml"
        path.write_text("models:\n  lattice-yukawa:\n    m: 1.5\n")
        block = model_block("lattice-yukawa", path)
        assert block["m"] == 1.5
        assert block["r_cut"] == 1.0

    def test_missing_file(self, tmp_path: Path):
        """An explicitly named file must exist."""
        with pytest.raises(ConfigError) as exc_info:
            load_config_file(tmp_path / "missing.yaml")
        assert exc_info.value.diagnostics[0].field == "config"

    def test_not_a_mapping(self, tmp_path: Path):
        """The top level must be a mapping."""
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_config_file(path)

    def test_invalid_yaml(self, tmp_path: Path):
        """Syntax errors become diagnostics."""
        path = tmp_path / "bad.yaml"
        path.write_text("models: [unclosed\n")
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_config_file(path)


class TestModelSpec:
    """Tests for building models by name."""

    def test_lattice(self):
        """Packaged lattice parameters build the default model."""
        model = ModelSpec(name="lattice-yukawa", params=model_block("lattice-yukawa")).build()
        assert isinstance(model, LatticePairModel)
        assert model.m == 3.0

    def test_gaussian_temperature_alias(self):
        """T in a parameter block is the temperature."""
        model = ModelSpec(name="gaussian", params={"T": 2.0}).build()
        assert isinstance(model, GaussianFreeEnergyModel)
        assert model.temperature == 2.0

    def test_unknown_parameter(self):
        """Unexpected parameters are model errors."""
        with pytest.raises(ModelError, match="invalid parameters"):
            ModelSpec(name="lattice-yukawa", params={"charge": 1.0}).build()

    def test_unknown_model(self):
        """Unknown names list the registry."""
        with pytest.raises(ModelError, match="unknown model"):
            ModelSpec(name="ising").build()


class TestDomainSpec:
    """Tests for domain descriptors."""

    def test_parse_ball(self):
        """ball:r=3 with an optional centre."""
        spec = DomainSpec.parse("ball:r=3,cx=1")
        assert spec.kind == "ball"
        assert spec.params == {"r": 3.0, "cx": 1.0}
        domain = spec.build()
        assert domain.contains([[3.5, 0.0, 0.0]])[0]

    def test_box_holds_lattice_sites(self):
        """box:L=4 is [-1/2, 7/2]^3."""
        domain = DomainSpec.parse("box:L=4").build()
        assert domain.kind is DomainKind.BOX
        assert domain.volume_hint == pytest.approx(64.0)

    def test_simplex(self):
        """simplex:n=2 is the reference simplex scaled by 2."""
        domain = DomainSpec.parse("simplex:n=2").build()
        assert domain.volume_hint == pytest.approx(8.0 / 24.0)

    @pytest.mark.parametrize("descriptor", ["ball:r", "ball:=3", "ball:r=three"])
    def test_malformed(self, descriptor: str):
        """Malformed descriptors are rejected while parsing."""
        with pytest.raises(ValueError):
            DomainSpec.parse(descriptor)

    def test_problems(self):
        """Unknown kinds, missing and invalid parameters are listed."""
        assert "unknown domain kind" in DomainSpec.parse("torus:R=3").problems()[0]
        assert DomainSpec.parse("ball:cx=1").problems() == ["r is required"]
        assert DomainSpec.parse("ball:r=-1").problems() == ["r must be positive and finite"]
        assert DomainSpec.parse("lshape:size=3,notch=3").problems() == ["notch must be smaller than size"]
        with pytest.raises(GeometryError):
            DomainSpec.parse("ball:r=0").build()


class TestValidateConfig:
    """Tests for run configuration validation."""

    def test_default_is_valid(self):
        """A bare audit configuration has no diagnostics."""
        assert validate_config(RunConfig(command="audit")) == []

    def test_negative_tau(self):
        """tau must be ≥ 0."""
        cfg = RunConfig(command="tiling-check", tiling={"tau": -0.1})
        assert reasons(cfg) == {"tiling.tau": "tau must be ≥ 0"}

    def test_tau_below_one(self):
        """tau must be < 1."""
        cfg = RunConfig(command="tiling-check", tiling={"tau": 1.0})
        assert reasons(cfg)["tiling.tau"] == "tau must be < 1"

    def test_eta_exponent(self):
        """b outside (0, 1] is rejected."""
        cfg = RunConfig(command="limit-general", eta={"a": 24.0, "b": 1.5, "c": 0.25})
        assert reasons(cfg) == {"eta.b": "b∈(0,1] required"}

    def test_ell_grid(self):
        """The ell grid must be nonempty, positive and increasing."""
        assert "tiling.ell_grid" in reasons(RunConfig(command="limit-ref", tiling={"ell_grid": []}))
        assert "tiling.ell_grid" in reasons(RunConfig(command="limit-ref", tiling={"ell_grid": [2.0, -1.0]}))
        assert "tiling.ell_grid" in reasons(RunConfig(command="limit-ref", tiling={"ell_grid": [4.0, 2.0]}))

    def test_zero_delta(self):
        """A zero inner-approximation margin is rejected."""
        cfg = RunConfig(command="tiling-check", tiling={"delta": 0.0})
        assert reasons(cfg) == {"tiling.delta": "delta must be > 0"}

    @pytest.mark.parametrize("ground", [1, 2])
    def test_ground_too_small(self, ground: int):
        """A ground set needs room for a disjoint triple."""
        cfg = RunConfig(command="ssa", ground=ground)
        assert reasons(cfg) == {"ground": "ground must be ≥ 3"}

    def test_exhaustive_ground(self):
        """Exhaustive SSA checks are limited to eight elements."""
        cfg = RunConfig(command="ssa", ground=9, exhaustive=True)
        assert "ground" in reasons(cfg)

    def test_report_needs_file(self):
        """report without --out or sources is invalid."""
        assert "output.out" in reasons(RunConfig(command="report"))

    def test_several_diagnostics(self):
        """Every problem is reported, not just the first."""
        cfg = RunConfig(
            command="audit",
            checks=["A7"],
            quality={"samples": 0},
            domains=[DomainSpec(kind="ball")],
            model={"name": "lattice-yukawa", "params": {"r_cut": -1.0}},
        )
        found = reasons(cfg)
        assert {"checks", "quality.samples", "domains[0]", "model.params"} <= set(found)
        with pytest.raises(ConfigError) as exc_info:
            require_valid(cfg)
        assert len(exc_info.value.diagnostics) == len(found)
