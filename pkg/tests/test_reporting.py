import json

import numpy as np
import pandas as pd
import pytest

from gaugeflow.simulator.services.grid import DEFAULT_FIELD_OPTIONS, Grid, GridState
from gaugeflow.simulator.services.initial_data import plane_wave
from gaugeflow.simulator.services.reporting import (
    DIAGNOSTIC_COLUMNS,
    REPORT_COLUMNS,
    SNAPSHOT_COLUMNS,
    SimReport,
    package_versions,
    snapshot_frame,
    write_report,
)


@pytest.fixture
def grid() -> Grid:
    return Grid(L=40.0, N=16)


def test_rows_fill_missing_columns_with_nan():
    report = SimReport()
    report.add_row(t=0.0, norm=20.0, energy=1.5)
    frame = report.diagnostics
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame.loc[0, "norm"] == 20.0
    assert np.isnan(frame.loc[0, "continuity_residual"])


def test_snapshot_frame_uses_physical_field(grid):
    state = plane_wave(grid, background=0.25)
    twisted = GridState(t=0.5, psi=state.psi, twist=2.0 * np.pi / grid.L)
    frame = snapshot_frame(grid, twisted, DEFAULT_FIELD_OPTIONS)
    assert list(frame.columns) == SNAPSHOT_COLUMNS
    assert len(frame) == grid.N
    np.testing.assert_allclose(frame["rho"], 0.25)
    np.testing.assert_allclose(frame["S1"], 2.0 * np.pi / grid.L)
    np.testing.assert_allclose(frame["re_psi"], 0.5 * np.cos(2.0 * np.pi * grid.x / grid.L))


def test_empty_report_tables():
    report = SimReport()
    assert report.snapshots.empty
    assert report.phi_snapshots is None


def test_write_report(tmp_path, grid):
    report = SimReport()
    state = plane_wave(grid, background=0.25)
    for t in (0.0, 0.1):
        report.add_row(t=t, norm=10.0)
        snapshot = snapshot_frame(grid, state.with_psi(state.psi, t=t), DEFAULT_FIELD_OPTIONS)
        report.snapshot_blocks.append(snapshot)
    report.summary["norm_drift"] = np.float64(0.0)

    written = write_report(report, tmp_path / "run", {"seed": 7})
    assert [path.name for path in written] == ["diagnostics.csv", "snapshots.csv", "manifest.json"]

    diagnostics_path = tmp_path / "run" / "diagnostics.csv"
    header = diagnostics_path.read_text(encoding="utf-8").splitlines()[0]
    assert header == ",".join(DIAGNOSTIC_COLUMNS)
    diagnostics = pd.read_csv(diagnostics_path, float_precision="round_trip")
    assert diagnostics["t"].tolist() == [0.0, 0.1]
    assert diagnostics["continuity_residual"].isna().all()

    snapshots = pd.read_csv(tmp_path / "run" / "snapshots.csv")
    assert list(snapshots.columns) == SNAPSHOT_COLUMNS
    assert len(snapshots) == 2 * grid.N

    manifest = json.loads((tmp_path / "run" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 7
    assert manifest["summary"] == {"norm_drift": 0.0}


def test_floats_round_trip_exactly(tmp_path, grid):
    report = SimReport()
    report.add_row(t=0.1, norm=1.0 / 3.0)
    write_report(report, tmp_path, {})
    diagnostics = pd.read_csv(tmp_path / "diagnostics.csv", float_precision="round_trip")
    assert diagnostics.loc[0, "norm"] == 1.0 / 3.0


def test_package_versions_lists_stack():
    versions = package_versions()
    assert {"python", "numpy", "pandas", "pydantic"} <= set(versions)
