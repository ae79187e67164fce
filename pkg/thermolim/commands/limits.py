"""`limit-ref`, `limit-general` and `lower-bound`: convergence experiments."""

import argparse
import logging

from ..services.geom import ball
from ..services.harness import (
    format_curve,
    general_limit_experiment,
    lower_bound_diagnostic,
    reference_limit_experiment,
)
from ..services.run_config import REFERENCE_SETS, RunConfig
from .options import EXIT_FAILED, EXIT_OK, add_model_arguments, add_scale_arguments, emit

logger = logging.getLogger(__name__)

DEFAULT_ELL_GRID = (2.0, 4.0, 8.0, 16.0)

# Regular sequence used when limit-general gets no --domain
DEFAULT_SEQUENCE = (3.0, 6.0, 12.0)

# Lower-bound diagnostic defaults: ball radius and simplex scale
LOWER_BOUND_RADIUS = 8.0
LOWER_BOUND_ELL = 2.0


def run_limit_ref(cfg: RunConfig) -> int:
    model = cfg.model.build()
    quality = cfg.quality.resolve()
    ells = cfg.tiling.ell_grid or list(DEFAULT_ELL_GRID)
    curve = reference_limit_experiment(
        model, ells, cfg.g_samples, quality, quality.seed, reference=cfg.reference
    )
    print(format_curve(curve))
    emit(curve.records, cfg)
    return EXIT_OK


def run_limit_general(cfg: RunConfig) -> int:
    model = cfg.model.build()
    quality = cfg.quality.resolve()
    domains = [spec.build() for spec in cfg.domains] or [ball(r) for r in DEFAULT_SEQUENCE]
    curve = general_limit_experiment(model, domains, quality, quality.seed, eta=cfg.eta.build())
    print(format_curve(curve))
    ratios = ", ".join(f"{ratio:.3f}" for ratio in curve.diameter_ratios)
    print(f"diameter ratios: {ratios}")
    emit(curve.records, cfg)
    return EXIT_OK


def run_lower_bound(cfg: RunConfig) -> int:
    model = cfg.model.build()
    quality = cfg.quality.resolve()
    omega = cfg.domains[0].build() if cfg.domains else ball(LOWER_BOUND_RADIUS)
    ell = (cfg.tiling.ell_grid or [LOWER_BOUND_ELL])[0]
    report = lower_bound_diagnostic(model, omega, ell, quality.samples, quality.seed, budget=cfg.budget)
    status = "PASS" if report.passed else "FAIL"
    print(f"lower-bound [{omega.describe()}, ell={ell:g}]: {status}")
    print(f"  E/|Omega| = {report.normalized_energy:.8g} ± {report.energy_stderr:.3g}")
    print(f"  e_av      = {report.e_av:.8g} ± {report.e_av_stderr:.3g}")
    print(f"  margin    = {report.margin:.6g}, shell fraction {report.shell_fraction:.4g}")
    return EXIT_OK if report.passed else EXIT_FAILED


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    ref = subparsers.add_parser("limit-ref", parents=[parent], help="reference-set limit curve")
    add_model_arguments(ref)
    add_scale_arguments(ref)
    ref.add_argument("--g-samples", type=int, help="sampled placements per ell")
    ref.add_argument("--reference", choices=REFERENCE_SETS, help="reference set")
    ref.set_defaults(handler=run_limit_ref)

    general = subparsers.add_parser(
        "limit-general", parents=[parent], help="limit along a regular domain sequence"
    )
    add_model_arguments(general)
    general.add_argument("--eta-a", type=float, help="regularity class coefficient a")
    general.add_argument("--eta-b", type=float, help="regularity class exponent b in (0, 1]")
    general.add_argument("--eta-c", type=float, help="regularity class range c")
    general.set_defaults(handler=run_limit_general)

    lower = subparsers.add_parser(
        "lower-bound", parents=[parent], help="moved-simplex lower bound of E/|Omega|"
    )
    add_model_arguments(lower)
    add_scale_arguments(lower)
    lower.add_argument("--budget", type=float, help="allowance on top of the boundary shell")
    lower.set_defaults(handler=run_lower_bound)
