"""Simulation report tables and their CSV / JSON renderings."""

import json
import platform
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from gaugeflow.simulator.services.grid import FieldOptions, Grid, GridState, phase_gradient
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.17g"
DIAGNOSTIC_COLUMNS = [
    "t",
    "norm",
    "continuity_residual",
    "eq19_residual",
    "gauge_density_error",
]
REPORT_COLUMNS = DIAGNOSTIC_COLUMNS + ["energy"]
SNAPSHOT_COLUMNS = ["t", "x", "rho", "S1", "re_psi", "im_psi"]
PACKAGES = ("gaugeflow", "numpy", "pandas", "pydantic", "tabulate", "python-dotenv")


def snapshot_frame(grid: Grid, state: GridState, options: FieldOptions) -> pd.DataFrame:
    """One snapshot block; S1 is NaN where the density is below the floor."""
    physical = state.psi * np.exp(1j * state.twist * grid.x)
    return pd.DataFrame(
        {
            "t": np.full(grid.N, state.t),
            "x": grid.x,
            "rho": state.rho,
            "S1": phase_gradient(grid, state, options),
            "re_psi": np.real(physical),
            "im_psi": np.imag(physical),
        },
        columns=SNAPSHOT_COLUMNS,
    )


@dataclass
class SimReport:
    """Diagnostics rows and field snapshots collected during one run."""

    rows: list[dict[str, float]] = field(default_factory=list)
    snapshot_blocks: list[pd.DataFrame] = field(default_factory=list)
    phi_snapshot_blocks: list[pd.DataFrame] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def add_row(self, **values: float) -> None:
        self.rows.append({column: values.get(column, np.nan) for column in REPORT_COLUMNS})

    @property
    def diagnostics(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=REPORT_COLUMNS)

    @property
    def snapshots(self) -> pd.DataFrame:
        if not self.snapshot_blocks:
            return pd.DataFrame(columns=SNAPSHOT_COLUMNS)
        return pd.concat(self.snapshot_blocks, ignore_index=True)

    @property
    def phi_snapshots(self) -> Optional[pd.DataFrame]:
        if not self.phi_snapshot_blocks:
            return None
        return pd.concat(self.phi_snapshot_blocks, ignore_index=True)


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def write_report(
    report: SimReport, directory: Path, manifest: dict[str, Any]
) -> list[Path]:
    """Write snapshots.csv, diagnostics.csv, phi_snapshots.csv (if any) and manifest.json."""
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    diagnostics_path = directory / "diagnostics.csv"
    report.diagnostics[DIAGNOSTIC_COLUMNS].to_csv(
        diagnostics_path, index=False, float_format=FLOAT_FORMAT, na_rep="nan"
    )
    written.append(diagnostics_path)

    snapshots_path = directory / "snapshots.csv"
    report.snapshots.to_csv(
        snapshots_path, index=False, float_format=FLOAT_FORMAT, na_rep="nan"
    )
    written.append(snapshots_path)

    phi_snapshots = report.phi_snapshots
    if phi_snapshots is not None:
        phi_path = directory / "phi_snapshots.csv"
        phi_snapshots.to_csv(phi_path, index=False, float_format=FLOAT_FORMAT, na_rep="nan")
        written.append(phi_path)

    manifest_path = directory / "manifest.json"
    manifest_path.write_text(
        json.dumps({**manifest, "summary": report.summary}, indent=2, default=_json_default),
        encoding="utf-8",
    )
    written.append(manifest_path)

    for path in written:
        logger.info("Wrote %s", path)
    return written


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")
