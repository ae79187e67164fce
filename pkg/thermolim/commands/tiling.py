"""`thermolim tiling-check`: tiling exactness and inner approximations."""

import argparse
import logging

from ..config import get_settings
from ..services.geom import ball
from ..services.run_config import RunConfig
from ..services.tiling import (
    TilingFrame,
    check_cell_tiling,
    regularity_of_inner_approx_audit,
    uncovered_fractions,
)
from .options import EXIT_FAILED, EXIT_OK, add_domain_arguments, add_scale_arguments

logger = logging.getLogger(__name__)

DEFAULT_RADIUS = 10.0
DEFAULT_ELL_GRID = (0.5, 1.0, 2.0)

# Sausage thicknesses of the inner-approximation audit
T_GRID = [0.02, 0.05, 0.1]


def run_tiling_check(cfg: RunConfig) -> int:
    quality = cfg.quality.resolve()
    settings = get_settings()
    delta = cfg.tiling.delta if cfg.tiling.delta is not None else settings.delta
    omega = cfg.domains[0].build() if cfg.domains else ball(DEFAULT_RADIUS)
    ells = cfg.tiling.ell_grid or list(DEFAULT_ELL_GRID)
    failures = []

    cell = check_cell_tiling(quality.samples, quality.seed)
    print(
        f"cell tiling: volume sum {cell.volume_sum!r}, double cover {cell.double_cover_fraction:.2e}, "
        f"gaps {cell.uncovered_fraction:.2e} ({'PASS' if cell.passed else 'FAIL'})"
    )
    if not cell.passed:
        failures.append("cell tiling")

    fractions = uncovered_fractions(omega, sorted(ells), delta)
    for ell, fraction in fractions:
        print(f"  ell={ell:<6g} |Omega \\ A| / |Omega| = {fraction:.4f}")
    # Smaller tiles must leave less of Omega uncovered
    if any(b[1] < a[1] for a, b in zip(fractions, fractions[1:], strict=False)):
        failures.append("coverage monotonicity")

    eta = cfg.eta.build()
    for ell in sorted(ells):
        frame = TilingFrame.identity(ell, cfg.tiling.tau)
        report = regularity_of_inner_approx_audit(
            omega, eta, frame, delta, T_GRID, quality.samples, quality.seed
        )
        status = "PASS" if report.passed else "FAIL"
        print(f"  ell={ell:<6g} inner approximation regular with m={report.m:.3g} ({status})")
        if not report.passed:
            failures.append(f"regularity at ell={ell:g}")

    if failures:
        print(f"tiling-check failed: {', '.join(failures)}")
        return EXIT_FAILED
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser(
        "tiling-check", parents=[parent], help="tiling exactness and inner approximations"
    )
    add_domain_arguments(parser)
    add_scale_arguments(parser)
    parser.set_defaults(handler=run_tiling_check)
