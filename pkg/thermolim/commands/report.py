"""`thermolim report`: summarize, merge and export results files."""

import argparse
import logging

from ..services.records import format_report, merge, read_records, summarize, write_csv
from ..services.run_config import RunConfig
from .options import EXIT_OK

logger = logging.getLogger(__name__)


def run_report(cfg: RunConfig) -> int:
    """
    Print the summary table of a results file.

    With source files the sources are first appended to --out (when given)
    and the summary covers the merged records.
    """
    target = cfg.output.out
    if cfg.sources and target is not None:
        count = merge(cfg.sources, target)
        print(f"{count} records merged into {target}")
        records = read_records(target)
    elif cfg.sources:
        records = [record for source in cfg.sources for record in read_records(source)]
    else:
        records = read_records(target)

    print(format_report(summarize(records)))
    if cfg.output.csv is not None:
        write_csv(records, cfg.output.csv)
        print(f"{len(records)} rows written to {cfg.output.csv}")
    return EXIT_OK


def register(subparsers: argparse._SubParsersAction, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("report", parents=[parent], help="summarize a results file")
    parser.add_argument("sources", nargs="*", help="results files to merge into --out")
    parser.add_argument("--csv", help="write one CSV row per record")
    parser.set_defaults(handler=run_report)
