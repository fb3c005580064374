"""pgx-select command-line entry point."""

import argparse
import logging
import sys
from collections.abc import Sequence

from pydantic import ValidationError

from pgxselect import __version__
from pgxselect.commands import calibrate, diagnose, evaluate, fit, rank, simulate
from pgxselect.config import get_settings
from pgxselect.exceptions import (
    ConvergenceError,
    DataValidationError,
    DimensionError,
    DomainError,
    InfeasibleTargetError,
)
from pgxselect.logging_config import setup_logging
from pgxselect.telemetry import setup_telemetry, shutdown_telemetry, tracer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_NOT_CONVERGED = 3

# Failures caused by what the user passed in
INPUT_ERRORS = (
    DataValidationError,
    DomainError,
    DimensionError,
    InfeasibleTargetError,
    ValidationError,
    FileNotFoundError,
)


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return number


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="pgx-select",
        description="Bayesian SNP selection in population pharmacokinetic models",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    parser.add_argument(
        "--jobs",
        type=positive_int,
        default=None,
        help="Worker processes (default: physical cores)",
    )
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["debug", "info", "warning", "error"],
        help="Logging level (default: LOG_LEVEL or info)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Include command modules
    for command in (simulate, calibrate, fit, evaluate, diagnose, rank):
        command.register(subparsers)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one command and map failures to exit codes.

    Args:
        argv: Arguments without the program name; defaults to ``sys.argv[1:]``

    Returns:
        0 on success, 2 on invalid input, 3 when ``fit --strict`` finds
        unconverged chains
    """
    arguments = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(arguments)
    args.argv = arguments
    settings = get_settings()
    setup_logging(args.log_level or settings.log_level)
    setup_telemetry(settings)
    try:
        with tracer.start_as_current_span(
            f"cli.{args.command}", attributes={"command": args.command}
        ):
            status: int = args.func(args, settings)
        return status
    except ConvergenceError as exc:
        logger.error(
            "Convergence check failed",
            extra={
                "command": args.command,
                "worst_rhat": exc.worst_rhat,
                "threshold": exc.threshold,
            },
        )
        return EXIT_NOT_CONVERGED
    except INPUT_ERRORS as exc:
        logger.error(
            "Invalid input: %s",
            exc,
            extra={"command": args.command, "error_type": type(exc).__name__},
        )
        return EXIT_INVALID_INPUT
    finally:
        shutdown_telemetry()


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
