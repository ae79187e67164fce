"""`thermolim audit`: run the A1-A6 assumption audits on one model."""

import argparse
import logging

from ..services.audits import (
    AuditReport,
    TranslationAverage,
    audit_A1_normalization,
    audit_A2_stability,
    audit_A3_translation_average,
    audit_A4_continuity,
    audit_A5_subaverage,
    audit_A6,
)
from ..services.geom import Domain, ball
from ..services.harness import standard_suite
from ..services.models import EnergyModel, Quality
from ..services.run_config import CHECKS, REFERENCE_SETS, RunConfig
from ..services.tiling import TilingFrame
from .options import EXIT_FAILED, EXIT_OK, add_model_arguments, add_scale_arguments

logger = logging.getLogger(__name__)

# Domain audited when no --domain is given
DEFAULT_RADIUS = 5.0

# Scale of the reference set and of the A6 tiling
DEFAULT_ELL = 2.0

# Ball radii of the translation average
TRANSLATION_RADII = (2.0, 4.0, 8.0, 16.0)


def format_translation(result: TranslationAverage) -> str:
    lines = [f"A3 [{result.domain}]: translation averages"]
    for row in result.rows:
        lines.append(
            f"  L={row.radius:<6g} average={row.average:.8g} stderr={row.stderr:.3g} "
            f"deviation={row.deviation:.3g}"
        )
    return "\n".join(lines)


def default_checks(model: EnergyModel) -> list[str]:
    """Every check the model supports; A6 needs a local decomposition."""
    return [check for check in CHECKS if check != "A6" or model.decomposer is not None]


def run_check(
    check: str,
    model: EnergyModel,
    omega: Domain,
    domains: list[Domain],
    cfg: RunConfig,
    quality: Quality,
) -> AuditReport:
    ell = (cfg.tiling.ell_grid or [DEFAULT_ELL])[0]
    if check == "A1":
        return audit_A1_normalization(model)
    if check == "A2":
        return audit_A2_stability(model, domains or standard_suite(), quality)
    if check == "A4":
        omega_sub = domains[1] if len(domains) > 1 else omega
        return audit_A4_continuity(
            model, omega, omega_sub, model.kappa, cfg.budget, quality, cfg.tiling.delta
        )
    if check == "A5":
        return audit_A5_subaverage(
            model, omega, ell, quality.samples, quality.seed, alpha=cfg.budget, reference=cfg.reference
        )
    if check == "A6":
        tau = model.decomposer.tau(ell) if model.decomposer is not None else cfg.tiling.tau
        frame = TilingFrame.identity(ell, tau)
        return audit_A6(model, omega, frame, quality.samples, quality.seed, budget=cfg.budget)
    raise ValueError(f"unknown check {check}")


def run_audit(cfg: RunConfig) -> int:
    model = cfg.model.build()
    quality = cfg.quality.resolve()
    domains = [spec.build() for spec in cfg.domains]
    omega = domains[0] if domains else ball(DEFAULT_RADIUS)
    checks = cfg.checks or default_checks(model)

    failed = []
    for check in checks:
        logger.info(f"Running {check} on {model.name}")
        if check == "A3":
            result = audit_A3_translation_average(
                model, omega, TRANSLATION_RADII, quality.samples, quality.seed
            )
            print(format_translation(result))
            continue
        report = run_check(check, model, omega, domains, cfg, quality)
        print(report.summary())
        if not report.passed:
            failed.append(check)

    if failed:
        print(f"{model.name}: failed {', '.join(failed)}")
        return EXIT_FAILED
    print(f"{model.name}: all checks passed")
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("audit", parents=[parent], help="audit assumptions A1-A6")
    add_model_arguments(parser)
    add_scale_arguments(parser)
    parser.add_argument(
        "--check", action="append", metavar="A1..A6", help="checks to run (repeatable, default all)"
    )
    parser.add_argument("--reference", choices=REFERENCE_SETS, help="reference set of A5")
    parser.add_argument("--budget", type=float, help="error budget alpha applied by A4, A5 and A6")
    parser.set_defaults(handler=run_audit)
