"""Flags shared by every subcommand and their translation into a RunConfig."""

import argparse
import logging
from collections.abc import Sequence
from typing import Any

from pydantic import ValidationError

from ..errors import ConfigError
from ..services.records import ExperimentRecord, persist
from ..services.run_config import (
    Diagnostic,
    DomainSpec,
    RunConfig,
    load_config_file,
    model_block,
    require_valid,
)

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_FAILED = 1  # audit failure or runtime error
EXIT_USAGE = 2


def float_list(raw: str) -> list[float]:
    """argparse type for comma-separated floats such as `2,4,8,16`."""
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from e


def common_parser() -> argparse.ArgumentParser:
    """Parent parser holding the flags every subcommand accepts."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="YAML file with model parameter blocks and run defaults")
    parser.add_argument("--threads", type=int, help="worker cap (falls back to THERMOLIM_THREADS)")
    parser.add_argument("--seed", type=int, help="experiment seed")
    parser.add_argument("--samples", type=int, help="Monte Carlo samples per estimate")
    parser.add_argument("--out", help="results file (JSON lines, appended)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO")
    return parser


def add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="energy model name")
    add_domain_arguments(parser)


def add_domain_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--domain",
        action="append",
        metavar="KIND:K=V,...",
        help="domain descriptor, e.g. ball:r=3 (repeatable)",
    )


def add_scale_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ell", type=float_list, help="comma-separated tile scales")
    parser.add_argument("--tau", type=float, help="tile inflation in [0, 1)")
    parser.add_argument("--delta", type=float, help="inner-approximation boundary margin")


def _flag(args: argparse.Namespace, name: str, fallback: Any = None) -> Any:
    value = getattr(args, name, None)
    return fallback if value is None else value


def _checks(raw: Sequence[str] | None) -> list[str]:
    return [part.strip().upper() for item in raw or [] for part in item.split(",") if part.strip()]


def build_config(args: argparse.Namespace) -> RunConfig:
    """
    Assemble and validate the run configuration; flags override the config file.

    Raises:
        ConfigError: A descriptor is malformed or a parameter fails validation
    """
    run_block: dict[str, Any] = dict(load_config_file(args.config).get("run") or {})
    model = _flag(args, "model", run_block.get("model", "local-sin"))

    descriptors = _flag(args, "domain", run_block.get("domains") or [])
    try:
        domains = [DomainSpec.parse(descriptor) for descriptor in descriptors]
    except ValueError as e:
        raise ConfigError([Diagnostic(field="domains", reason=str(e))]) from e

    data = {
        "command": args.command,
        "model": {"name": model, "params": model_block(model, args.config)},
        "domains": domains,
        "tiling": {
            "ell_grid": _flag(args, "ell", run_block.get("ell_grid")),
            "tau": _flag(args, "tau", run_block.get("tau", 0.0)),
            "delta": _flag(args, "delta", run_block.get("delta")),
        },
        "quality": {"samples": _flag(args, "samples"), "seed": _flag(args, "seed")},
        "output": {"out": _flag(args, "out"), "csv": _flag(args, "csv")},
        "threads": _flag(args, "threads"),
        "checks": _checks(_flag(args, "check")),
        "g_samples": _flag(args, "g_samples", run_block.get("g_samples", 32)),
        "reference": _flag(args, "reference", run_block.get("reference", "simplex")),
        "fn": _flag(args, "fn", "gaussian"),
        "ground": _flag(args, "ground", 8),
        "trials": _flag(args, "trials", 10_000),
        "exhaustive": bool(_flag(args, "exhaustive", False)),
        "budget": _flag(args, "budget", 0.0),
        "sources": _flag(args, "sources", []),
    }
    eta = {key: getattr(args, f"eta_{key}") for key in "abc" if getattr(args, f"eta_{key}", None) is not None}
    if eta:
        data["eta"] = eta

    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        diagnostics = [
            Diagnostic(field=".".join(str(p) for p in err["loc"]), reason=err["msg"]) for err in e.errors()
        ]
        raise ConfigError(diagnostics) from e
    return require_valid(cfg)


def emit(records: Sequence[ExperimentRecord], cfg: RunConfig) -> None:
    """Append records to the results file when one is configured."""
    if cfg.output.out is None:
        return
    count = persist(records, cfg.output.out)
    print(f"{count} records appended to {cfg.output.out}")
