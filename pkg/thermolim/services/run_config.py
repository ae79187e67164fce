"""Run configuration: YAML parameter blocks, domain descriptors and validation."""

import logging
import math
import os
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field

from ..config import get_settings
from ..errors import ConfigError, GeometryError, ModelError
from .geom import ConvexDomain, Domain, EtaClass, ball, box, cube, lshape
from .models import (
    EnergyModel,
    GaussianFreeEnergyModel,
    LatticePairModel,
    LocalFunctionalModel,
    Quality,
    UnstableFixtureModel,
)
from .ssa import EXHAUSTIVE_MAX_GROUND, SSA_MIN_GROUND, fixture_names
from .tiling import reference_simplex

logger = logging.getLogger(__name__)

# Default parameter blocks shipped with the package
CONFIG_FILE = Path(__file__).parent.parent / "experiment_config.yaml"

COMMANDS = ("audit", "limit-ref", "limit-general", "ssa", "tiling-check", "lower-bound", "report")

CHECKS = ("A1", "A2", "A3", "A4", "A5", "A6")

REFERENCE_SETS = ("simplex", "cube")

# Cached YAML files keyed by path: (mtime, contents)
_config_cache: dict[Path, tuple[float, dict[str, Any]]] = {}


class Diagnostic(BaseModel):
    """One failed precondition: dotted field path and the reason."""

    model_config = ConfigDict(frozen=True)

    field: str
    reason: str

    def __str__(self) -> str:
        return f"{self.field}: {self.reason}"


# ============== Config file ==============


def load_config_file(path: Path | str | None = None) -> dict[str, Any]:
    """
    Load a YAML experiment configuration.

    Args:
        path: YAML file; the packaged experiment_config.yaml when None

    Returns:
        Parsed mapping, or an empty dict when the default file is missing

    Raises:
        ConfigError: An explicitly requested file is missing or is not a mapping
    """
    target = Path(path) if path is not None else CONFIG_FILE
    if not target.exists():
        if path is None:
            return {}
        raise ConfigError([Diagnostic(field="config", reason=f"file not found: {target}")])

    mtime = os.path.getmtime(target)
    cached = _config_cache.get(target)
    if cached is not None and cached[0] == mtime:
        return cached[1]

    try:
        with target.open(encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError([Diagnostic(field="config", reason=f"invalid YAML: {e}")]) from e
    if not isinstance(data, dict):
        raise ConfigError([Diagnostic(field="config", reason="top level must be a mapping")])
    _config_cache[target] = (mtime, data)
    return data


def model_block(name: str, path: Path | str | None = None) -> dict[str, float]:
    """Parameter block of a model; the packaged defaults sit under any user file."""
    defaults = load_config_file(None).get("models", {}).get(name) or {}
    if path is None:
        return dict(defaults)
    user = load_config_file(path).get("models", {}).get(name) or {}
    return {**defaults, **user}


# ============== Models ==============


def _local_sin(params: dict[str, float]) -> EnergyModel:
    if params:
        raise TypeError(f"local-sin takes no parameters, got {sorted(params)}")
    return LocalFunctionalModel.sin_squared()


def _local_const(params: dict[str, float]) -> EnergyModel:
    extra = set(params) - {"c"}
    if extra:
        raise TypeError(f"unexpected parameters {sorted(extra)}")
    return LocalFunctionalModel.constant_density(params.get("c", 1.0))


def _gaussian(params: dict[str, float]) -> EnergyModel:
    params = dict(params)
    if "T" in params:
        params["temperature"] = params.pop("T")
    return GaussianFreeEnergyModel(**params)


def _fixture(params: dict[str, float]) -> EnergyModel:
    if params:
        raise TypeError(f"broken-fixture takes no parameters, got {sorted(params)}")
    return UnstableFixtureModel()


MODEL_REGISTRY: dict[str, Callable[[dict[str, float]], EnergyModel]] = {
    "local-sin": _local_sin,
    "local-const": _local_const,
    "lattice-yukawa": lambda params: LatticePairModel(**params),
    "gaussian": _gaussian,
    "broken-fixture": _fixture,
}


class ModelSpec(BaseModel):
    name: str = "local-sin"
    params: dict[str, float] = Field(default_factory=dict)

    def build(self) -> EnergyModel:
        """Instantiate the named model with its parameter block."""
        factory = MODEL_REGISTRY.get(self.name)
        if factory is None:
            raise ModelError(f"unknown model {self.name!r}; choose from {', '.join(MODEL_REGISTRY)}")
        try:
            return factory(dict(self.params))
        except TypeError as e:
            raise ModelError(f"invalid parameters for {self.name}: {e}") from e


# ============== Domains ==============

# Required and optional parameters per descriptor kind
DOMAIN_PARAMS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "ball": (("r",), ("cx", "cy", "cz")),
    "box": (("L",), ()),
    "cube": (("L",), ()),
    "lshape": (("size", "notch"), ()),
    "simplex": (("n",), ()),
}


class DomainSpec(BaseModel):
    """A domain descriptor such as `ball:r=3` or `lshape:size=6,notch=3`."""

    kind: str
    params: dict[str, float] = Field(default_factory=dict)

    @classmethod
    def parse(cls, descriptor: str) -> "DomainSpec":
        """
        Parse `kind:key=value,...`.

        Raises:
            ValueError: Malformed descriptor or non-numeric value
        """
        kind, _, rest = descriptor.strip().partition(":")
        params: dict[str, float] = {}
        for item in filter(None, (part.strip() for part in rest.split(","))):
            key, sep, raw = item.partition("=")
            if not sep or not key:
                raise ValueError(f"expected key=value in domain descriptor, got {item!r}")
            try:
                params[key.strip()] = float(raw)
            except ValueError as e:
                raise ValueError(f"value of {key.strip()!r} is not a number: {raw!r}") from e
        return cls(kind=kind.strip(), params=params)

    def problems(self) -> list[str]:
        if self.kind not in DOMAIN_PARAMS:
            return [f"unknown domain kind {self.kind!r}; choose from {', '.join(DOMAIN_PARAMS)}"]
        required, optional = DOMAIN_PARAMS[self.kind]
        reasons = [f"{key} is required" for key in required if key not in self.params]
        reasons += [f"unknown parameter {key}" for key in self.params if key not in required + optional]
        reasons += [
            f"{key} must be positive and finite"
            for key in required
            if key in self.params and not (math.isfinite(self.params[key]) and self.params[key] > 0)
        ]
        if self.kind == "lshape" and not reasons and self.params["notch"] >= self.params["size"]:
            reasons.append("notch must be smaller than size")
        return reasons

    def build(self) -> Domain:
        problems = self.problems()
        if problems:
            raise GeometryError(f"invalid domain {self.kind}: {'; '.join(problems)}")
        p = self.params
        if self.kind == "ball":
            return ball(p["r"], (p.get("cx", 0.0), p.get("cy", 0.0), p.get("cz", 0.0)))
        if self.kind == "box":
            # [-1/2, L - 1/2]^3 holds exactly L^3 lattice sites for integer L
            return box((-0.5, -0.5, -0.5), (p["L"] - 0.5,) * 3)
        if self.kind == "cube":
            return cube(p["L"])
        if self.kind == "lshape":
            return lshape(p["size"], p["notch"])
        return ConvexDomain(reference_simplex().transformed(np.eye(3), p["n"], np.zeros(3)), label="simplex")


# ============== Run config ==============


class TilingSpec(BaseModel):
    ell_grid: list[float] | None = None  # each command has its own default grid
    tau: float = 0.0
    delta: float | None = None  # Settings.delta when unset


class QualitySpec(BaseModel):
    samples: int | None = None
    seed: int | None = None

    def resolve(self) -> Quality:
        settings = get_settings()
        samples = self.samples if self.samples is not None else settings.samples
        seed = self.seed if self.seed is not None else settings.seed
        return Quality(samples=samples, seed=seed)


class OutputSpec(BaseModel):
    out: Path | None = None
    csv: Path | None = None


class EtaSpec(BaseModel):
    a: float = Field(default_factory=lambda: get_settings().eta_a)
    b: float = Field(default_factory=lambda: get_settings().eta_b)
    c: float = Field(default_factory=lambda: get_settings().eta_c)

    def build(self) -> EtaClass:
        return EtaClass(a=self.a, b=self.b, c=self.c)


class RunConfig(BaseModel):
    """Everything one CLI invocation needs, validated before dispatch."""

    command: str
    model: ModelSpec = Field(default_factory=ModelSpec)
    domains: list[DomainSpec] = Field(default_factory=list)
    tiling: TilingSpec = Field(default_factory=TilingSpec)
    quality: QualitySpec = Field(default_factory=QualitySpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    eta: EtaSpec = Field(default_factory=EtaSpec)
    threads: int | None = None

    # Command-specific knobs
    checks: list[str] = Field(default_factory=list)  # empty runs every applicable check
    g_samples: int = 32
    reference: str = "simplex"
    fn: str = "gaussian"
    ground: int = 8
    trials: int = 10_000
    exhaustive: bool = False
    budget: float = 0.0
    sources: list[Path] = Field(default_factory=list)


def validate_config(cfg: RunConfig) -> list[Diagnostic]:
    """
    Check every parameter against the preconditions of its target operation.

    Returns:
        Diagnostics in field order; empty when the configuration is valid
    """
    out: list[Diagnostic] = []

    def fail(field: str, reason: str) -> None:
        out.append(Diagnostic(field=field, reason=reason))

    if cfg.command not in COMMANDS:
        fail("command", f"unknown command {cfg.command!r}")

    if cfg.model.name not in MODEL_REGISTRY:
        fail("model.name", f"unknown model {cfg.model.name!r}")
    else:
        try:
            cfg.model.build()
        except (ModelError, ValueError) as e:
            fail("model.params", str(e))

    for i, spec in enumerate(cfg.domains):
        for reason in spec.problems():
            fail(f"domains[{i}]", reason)

    grid = cfg.tiling.ell_grid
    if grid is not None:
        if not grid:
            fail("tiling.ell_grid", "at least one ell required")
        elif any(not (math.isfinite(ell) and ell > 0) for ell in grid):
            fail("tiling.ell_grid", "ell must be positive")
        elif any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
            fail("tiling.ell_grid", "ell grid must be increasing")
    if cfg.tiling.tau < 0:
        fail("tiling.tau", "tau must be ≥ 0")
    elif cfg.tiling.tau >= 1:
        fail("tiling.tau", "tau must be < 1")
    if cfg.tiling.delta is not None and cfg.tiling.delta <= 0:
        fail("tiling.delta", "delta must be > 0")

    if cfg.quality.samples is not None and cfg.quality.samples < 1:
        fail("quality.samples", "samples must be ≥ 1")
    if cfg.quality.seed is not None and cfg.quality.seed < 0:
        fail("quality.seed", "seed must be ≥ 0")

    if not cfg.eta.a > 0:
        fail("eta.a", "a > 0 required")
    if not 0 < cfg.eta.b <= 1:
        fail("eta.b", "b∈(0,1] required")
    if not cfg.eta.c > 0:
        fail("eta.c", "c > 0 required")

    if cfg.threads is not None and cfg.threads < 1:
        fail("threads", "threads must be ≥ 1")

    unknown = [check for check in cfg.checks if check not in CHECKS]
    if unknown:
        fail("checks", f"unknown checks {unknown}; choose from {', '.join(CHECKS)}")
    if cfg.g_samples < 1:
        fail("g_samples", "g_samples must be ≥ 1")
    if cfg.reference not in REFERENCE_SETS:
        fail("reference", f"reference must be one of {', '.join(REFERENCE_SETS)}")
    if cfg.fn not in fixture_names():
        fail("fn", f"unknown set function {cfg.fn!r}")
    if cfg.ground < SSA_MIN_GROUND:
        fail("ground", f"ground must be ≥ {SSA_MIN_GROUND}")
    elif cfg.exhaustive and cfg.ground > EXHAUSTIVE_MAX_GROUND:
        fail("ground", f"exhaustive checks need ground ≤ {EXHAUSTIVE_MAX_GROUND}")
    if cfg.trials < 1:
        fail("trials", "trials must be ≥ 1")
    if cfg.budget < 0:
        fail("budget", "budget must be ≥ 0")

    if cfg.command == "report" and not cfg.output.out and not cfg.sources:
        fail("output.out", "report needs a results file (--out)")

    for diagnostic in out:
        logger.debug(f"Config diagnostic {diagnostic}")
    return out


def require_valid(cfg: RunConfig) -> RunConfig:
    """Raise ConfigError carrying every diagnostic of an invalid configuration."""
    diagnostics = validate_config(cfg)
    if diagnostics:
        raise ConfigError(diagnostics)
    return cfg
