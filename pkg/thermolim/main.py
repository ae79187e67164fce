"""thermolim - command-line entry point."""

import argparse
import logging
import sys
from collections.abc import Sequence

from .commands import audit, limits, report, ssa, tiling
from .commands.options import EXIT_FAILED, EXIT_OK, EXIT_USAGE, build_config, common_parser
from .config import get_settings
from .errors import ConfigError, ThermolimError
from .services.sampling import set_thread_cap

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermolim",
        description="Audits and convergence experiments for thermodynamic limits of energies.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parent = common_parser()
    for module in (audit, limits, ssa, tiling, report):
        module.register(subparsers, parent)
    return parser


def configure_logging(verbose: bool) -> None:
    settings = get_settings()
    level = settings.log_level.upper()
    if verbose and logging.getLevelName(level) > logging.INFO:
        level = "INFO"
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(argv: Sequence[str] | None = None) -> int:
    """
    Parse argv, dispatch one subcommand and map the outcome to an exit code.

    Returns:
        0 when every check passes, 1 on a failed audit or runtime error,
        2 on a usage or configuration error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        configure_logging(args.verbose)
        cfg = build_config(args)
    except ConfigError as e:
        for diagnostic in e.diagnostics:
            print(f"config error: {diagnostic}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        # Settings validation (THERMOLIM_* variables)
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE

    set_thread_cap(cfg.threads)
    try:
        return int(args.handler(cfg))
    except ThermolimError as e:
        logger.debug(f"{cfg.command} failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED
    except ValueError as e:
        # Preconditions only checked by the operation itself
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        set_thread_cap(None)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
