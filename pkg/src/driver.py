"""Application entry point that dispatches to the derive, simulate and verify commands."""

import argparse
import logging
import sys
from typing import Callable, Optional, Sequence

from dotenv import load_dotenv

from gaugeflow.cli.cli import cmd_derive, cmd_simulate, cmd_verify, parse_parameter
from gaugeflow.utils.errors import GaugeFlowError
from gaugeflow.utils.logger import configure_logging, get_logger, level_from_verbosity
from gaugeflow.verification.suites import ALL, SUITES

logger: logging.Logger = get_logger(__name__)

Command = Callable[[argparse.Namespace], int]


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    """Model selection shared by derive and simulate."""
    selection = parser.add_mutually_exclusive_group()
    selection.add_argument(
        "--model",
        type=str,
        choices=["free", "dg", "jackiw", "eip"],
        default=None,
        help="Built-in potential model.",
    )
    selection.add_argument(
        "--potential",
        type=str,
        default=None,
        help='Custom potential in the field DSL, e.g. "lambda*rho^2*S_1".',
    )
    parser.add_argument(
        "--param",
        type=parse_parameter,
        action="append",
        metavar="NAME=VALUE",
        help="Bind a model parameter (repeatable); hbar and m are accepted too.",
    )


def _add_derive_parser(subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]") -> None:
    parser = subparsers.add_parser("derive", help="Print the derived equations as JSON.")
    _add_model_arguments(parser)
    parser.add_argument(
        "--check-paper",
        action="store_true",
        help="Compare against the stored closed forms of the model; exit 1 on mismatch.",
    )
    parser.set_defaults(handler=cmd_derive)


def _add_simulate_parser(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
) -> None:
    parser = subparsers.add_parser("simulate", help="Evolve a configured run and write CSVs.")
    parser.add_argument("--config", type=str, default=None, help="Path to an INI run file.")
    _add_model_arguments(parser)
    parser.add_argument("--out", type=str, default=None, help="Output directory.")
    parser.add_argument(
        "--equation",
        type=str,
        choices=["psi", "phi", "both"],
        default=None,
        help="Which equation to evolve.",
    )
    parser.set_defaults(handler=cmd_simulate)


def _add_verify_parser(
    subparsers: "argparse._SubParsersAction[argparse.ArgumentParser]",
) -> None:
    parser = subparsers.add_parser("verify", help="Run verification suites.")
    parser.add_argument("suite", type=str, help=f"One of {', '.join(SUITES + (ALL,))}.")
    parser.add_argument(
        "--workers",
        type=int,
        default=1,
        help="Run the suites of 'all' on this many threads.",
    )
    parser.set_defaults(handler=cmd_verify)


def create_argument_parser() -> argparse.ArgumentParser:
    """Create and configure the main argument parser."""
    parser = argparse.ArgumentParser(
        prog="gaugeflow",
        description="Nonlinear gauge transformations for Schrodinger equations",
    )
    parser.add_argument(
        "-v",
        "--verbosity",
        action="count",
        default=0,
        help="Increase verbosity (use -v, -vv for more verbosity).",
    )
    parser.add_argument(
        "--log-file",
        type=str,
        default=None,
        help="Optional path to write logs to a file.",
    )

    subparsers = parser.add_subparsers(dest="command", required=True)
    _add_derive_parser(subparsers)
    _add_simulate_parser(subparsers)
    _add_verify_parser(subparsers)
    return parser


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments and return the populated namespace."""
    return create_argument_parser().parse_args(argv)


def initialize_logging(arguments: argparse.Namespace) -> None:
    """Initialize application logging configuration."""
    configure_logging(
        level=level_from_verbosity(arguments.verbosity), log_file=arguments.log_file
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, configure and dispatch; errors become one-line messages and exit codes."""
    load_dotenv()
    arguments = parse_arguments(argv)
    initialize_logging(arguments)
    handler: Command = arguments.handler
    try:
        return handler(arguments)
    except GaugeFlowError as error:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {error}", file=sys.stderr)
        return error.exit_code


def main() -> None:
    """Entry point for the application."""
    sys.exit(run())


if __name__ == "__main__":
    main()
