"""`thermolim ssa`: strong subadditivity checks on a set-function fixture."""

import argparse
import logging

from ..services.audits import AuditReport
from ..services.run_config import RunConfig
from ..services.ssa import (
    audit_ssa,
    build_fixture,
    check_normalization,
    derived_chain_audit,
    exhaustive_pair_bound,
    fixture_names,
)
from .options import EXIT_FAILED, EXIT_OK

logger = logging.getLogger(__name__)

# Subsets checked by the pairwise bound when not exhaustive
PAIR_BOUND_SIZE = 6


def run_ssa(cfg: RunConfig) -> int:
    quality = cfg.quality.resolve()
    fn = build_fixture(cfg.fn, cfg.ground, quality.seed)
    max_block = max(1, cfg.ground // 3)

    reports: list[AuditReport] = [
        check_normalization(fn),
        audit_ssa(fn, cfg.trials, max_block, quality.seed, exhaustive=cfg.exhaustive),
        audit_ssa(fn, cfg.trials, max_block, quality.seed, exhaustive=cfg.exhaustive, empty_middle=True),
        derived_chain_audit(fn, min(cfg.trials, 1000), quality.seed),
        exhaustive_pair_bound(fn, cfg.ground if cfg.exhaustive else PAIR_BOUND_SIZE),
    ]
    for report in reports:
        print(report.summary())
    failed = [report.check for report in reports if not report.passed]
    if failed:
        print(f"{fn.name}: failed {', '.join(failed)}")
        return EXIT_FAILED
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("ssa", parents=[parent], help="strong subadditivity audit")
    parser.add_argument("--fn", choices=fixture_names(), help="set-function fixture")
    parser.add_argument("--ground", type=int, help="ground set size")
    parser.add_argument("--trials", type=int, help="random triples when not exhaustive")
    parser.add_argument(
        "--exhaustive", action="store_true", default=None, help="enumerate every disjoint triple"
    )
    parser.set_defaults(handler=run_ssa)
