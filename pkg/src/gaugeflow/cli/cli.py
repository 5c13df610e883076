"""Command implementations behind the `derive`, `simulate` and `verify` subcommands.

Each command takes the parsed argparse namespace and returns the process
exit code; `GaugeFlowError`s propagate to the driver, which maps them.
"""

import argparse
import json
import os
import time
from pathlib import Path
from typing import Any, Optional

from gaugeflow.models.catalog import select_model
from gaugeflow.simulator.config import SimConfig, apply_overrides, load_config
from gaugeflow.simulator.gauge_simulator import GaugeSimulator
from gaugeflow.simulator.services.reporting import SimReport, package_versions, write_report
from gaugeflow.symbolic.field_expr import Params
from gaugeflow.utils.errors import EXIT_FAILURE, ConfigError, GaugeFlowError
from gaugeflow.utils.logger import get_logger
from gaugeflow.verification.suites import results_frame, run_suites

logger = get_logger(__name__)

SEED_VARIABLE = "GAUGEFLOW_SEED"


def parse_parameter(text: str) -> tuple[str, float]:
    """argparse type for `--param NAME=VALUE`."""
    name, separator, value = text.partition("=")
    if not separator or not name.strip():
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"{name.strip()}: {value!r} is not a number") from error


def read_seed() -> int:
    raw = os.environ.get(SEED_VARIABLE, "0")
    try:
        return int(raw)
    except ValueError as error:
        raise ConfigError(SEED_VARIABLE, f"expected an integer, got {raw!r}") from error


def _parameters(arguments: argparse.Namespace) -> dict[str, float]:
    return dict(arguments.param or [])


def cmd_derive(arguments: argparse.Namespace) -> int:
    """Print the derived system as JSON; `--check-paper` adds the model regressions."""
    params = Params.from_mapping(_parameters(arguments))
    model = select_model(arguments.model, arguments.potential, params, require_values=False)
    document: dict[str, Any] = {"model": model.name, **model.system.to_dict()}

    exit_code = 0
    if arguments.check_paper:
        outcomes = model.check()
        document["regression"] = [outcome.to_dict() for outcome in outcomes]
        if not all(outcome.passed for outcome in outcomes):
            exit_code = EXIT_FAILURE

    print(json.dumps(document, indent=2))
    return exit_code


def build_config(arguments: argparse.Namespace) -> SimConfig:
    config = load_config(Path(arguments.config)) if arguments.config else SimConfig()
    return apply_overrides(
        config,
        model=arguments.model,
        potential=arguments.potential,
        parameters=_parameters(arguments),
        directory=arguments.out,
        equation=arguments.equation,
    )


def _manifest(
    config: SimConfig, seed: int, started: float, error: Optional[GaugeFlowError] = None
) -> dict[str, Any]:
    return {
        "config": config.model_dump(mode="json"),
        "versions": package_versions(),
        "seed": seed,
        "wall_time_seconds": time.perf_counter() - started,
        "status": "aborted" if error else "completed",
        "error": str(error) if error else None,
    }


def cmd_simulate(arguments: argparse.Namespace) -> int:
    """Run one simulation and write its CSVs and manifest; partial output on abort."""
    config = build_config(arguments)
    seed = read_seed()
    simulator = GaugeSimulator(config)
    directory = Path(config.output.directory)
    report = SimReport()
    started = time.perf_counter()
    logger.info("Simulating model %s into %s", simulator.model.name, directory)

    try:
        simulator.evolve(report)
    except GaugeFlowError as error:
        logger.error("Simulation aborted: %s", error)
        write_report(report, directory, _manifest(config, seed, started, error))
        raise

    write_report(report, directory, _manifest(config, seed, started))
    print(f"Wrote run to {directory}")
    return 0


def cmd_verify(arguments: argparse.Namespace) -> int:
    """Run the named suite(s) and print a PASS/FAIL table; exit 1 on any failure."""
    seed = read_seed()
    results = run_suites(arguments.suite, seed=seed, workers=arguments.workers)
    frame = results_frame(results)
    print(frame.to_markdown(index=False, floatfmt=".3e"))
    failed = int((frame["status"] == "FAIL").sum())
    print(f"\n{len(frame) - failed} passed, {failed} failed")
    return EXIT_FAILURE if failed else 0
