from collections import deque
from typing import Callable, Iterable, Optional

import numpy as np
import numpy.typing as npt

from gaugeflow.models.catalog import PotentialModel, select_model
from gaugeflow.simulator.config import SimConfig
from gaugeflow.simulator.services.diagnostics import (
    continuity_residual,
    drift_current,
    energy,
    eq19_residual,
    gauge_density_error,
    norm,
    phase_agreement,
)
from gaugeflow.simulator.services.equations import (
    apply_gauge,
    enforce_guard,
    invert_gauge,
    phi_rhs,
    psi_rhs,
    samples_for,
)
from gaugeflow.simulator.services.grid import ComplexArray, Grid, GridState
from gaugeflow.simulator.services.initial_data import gaussian_on_background, plane_wave
from gaugeflow.simulator.services.integrator import (
    check_time_step,
    evolve_states,
    march,
    stability_bound,
    step_count,
)
from gaugeflow.simulator.services.reporting import SimReport, snapshot_frame
from gaugeflow.symbolic.variational import DerivedSystem
from gaugeflow.utils.errors import NonConservingPotential, VacuumDensity
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

INITIAL_DATA_NOTE = "initial data are a Gaussian bump on a uniform background chosen for testing"


class GaugeSimulator:
    """Evolves the psi and phi equations of one model on one grid and reports diagnostics."""

    def __init__(self, config: SimConfig, model: Optional[PotentialModel] = None):
        self._config = config
        self._params = config.params()
        self._grid = config.build_grid()
        self._options = config.field_options()
        self._model = model or select_model(
            config.model.name, config.model.potential, self._params
        )

    @property
    def config(self) -> SimConfig:
        return self._config

    @property
    def model(self) -> PotentialModel:
        return self._model

    @property
    def system(self) -> DerivedSystem:
        return self._model.system

    @property
    def grid(self) -> Grid:
        return self._grid

    def initial_state(self) -> GridState:
        """The configured Gaussian bump or plane wave at t = 0."""
        initial = self._config.initial
        if initial.kind == "plane_wave":
            return plane_wave(self._grid, initial.background, initial.momentum)
        return gaussian_on_background(
            self._grid,
            self._params,
            background=initial.background,
            amplitude=initial.amplitude,
            width=initial.width,
            momentum=initial.momentum,
            center=initial.center,
        )

    # --- right-hand sides --------------------------------------------------

    def psi_rhs(self, state: GridState) -> ComplexArray:
        """d_t psi for the dissipative equation, after checking the positivity guard."""
        if self._model.positivity_guard is not None:
            samples = samples_for(
                self._grid, state, [self._model.positivity_guard], self._params, self._options
            )
            enforce_guard(self._grid, self._model, samples, self._params, self._options)
        return psi_rhs(self._grid, self.system, state, self._params, self._options)

    def phi_rhs(self, state: GridState) -> ComplexArray:
        """d_t phi for the closed-form transformed equation."""
        return phi_rhs(self._grid, self._model, state, self._params, self._options)

    def to_phi(self, state_psi: GridState) -> GridState:
        """Apply the gauge map psi -> phi."""
        return apply_gauge(self._grid, state_psi, self.system, self._params, self._options)

    def to_psi(self, state_phi: GridState) -> GridState:
        """Invert the gauge map phi -> psi."""
        return invert_gauge(self._grid, state_phi, self.system, self._params, self._options)

    # --- time stepping ----------------------------------------------------

    def checked_time_step(self) -> float:
        """The configured dt, validated against the stability bound."""
        timing = self._config.time
        bound = stability_bound(self._grid, self._params, timing.stability_factor)
        check_time_step(timing.dt, bound, timing.allow_unstable)
        return timing.dt

    def run(
        self, rhs: Callable[[GridState], ComplexArray], initial: GridState, steps: int
    ) -> GridState:
        """Advance `steps` RK4 steps from `initial` and return the final state."""
        return evolve_states(rhs, initial, self.checked_time_step(), steps)

    def trajectory(
        self,
        rhs: Callable[[GridState], ComplexArray],
        initial: GridState,
        steps: int,
        every: int,
    ) -> list[GridState]:
        """States at every `every`-th step, the initial one included."""
        dt = self.checked_time_step()
        return [state for step, state in march(rhs, initial, dt, steps) if step % every == 0]

    def states_at(
        self,
        rhs: Callable[[GridState], ComplexArray],
        initial: GridState,
        steps: Iterable[int],
    ) -> dict[int, GridState]:
        """States at the requested step numbers of a single march."""
        wanted = set(steps)
        dt = self.checked_time_step()
        return {
            step: state
            for step, state in march(rhs, initial, dt, max(wanted))
            if step in wanted
        }

    def evolve(self, report: Optional[SimReport] = None) -> SimReport:
        """Run the configured equation, collecting diagnostics rows and snapshots.

        Rows are taken every `snapshot_every` steps and at the final step.
        Residual columns use the states one step before and after the row,
        so they are NaN at t = 0 and at the final time.
        """
        report = report if report is not None else SimReport()
        if not self.system.conserves_N:
            raise NonConservingPotential(str(self.system.source))

        dt = self.checked_time_step()
        steps = step_count(self._config.time.T, dt)
        every = self._config.time.snapshot_every
        equation = self._config.output.equation
        logger.info(
            "Evolving %s equation for model %s: %d steps of dt=%.3e",
            equation,
            self._model.name,
            steps,
            dt,
        )

        psi0 = self.initial_state()
        track_psi = equation in ("psi", "both")
        track_phi = equation in ("phi", "both")
        phi0 = self.to_phi(psi0) if track_phi else None

        marches = []
        if track_psi:
            marches.append(march(self.psi_rhs, psi0, dt, steps))
        if track_phi and phi0 is not None:
            marches.append(march(self.phi_rhs, phi0, dt, steps))

        window: deque[tuple[GridState, ...]] = deque(maxlen=3)
        initial_norm: Optional[float] = None
        for states in zip(*marches):
            step = states[0][0]
            current = tuple(state for _, state in states)
            window.append(current)
            if step == 0:
                initial_norm = self._record(report, current, None)
                continue
            previous = step - 1
            if previous > 0 and previous % every == 0:
                self._record(report, window[1], window)
            if step == steps:
                self._record(report, current, None)

        self._summarize(report, window[-1], initial_norm)
        return report

    # --- diagnostics ------------------------------------------------------

    def _psi_and_phi(self, states: tuple[GridState, ...]) -> tuple[GridState, GridState]:
        equation = self._config.output.equation
        if equation == "psi":
            return states[0], self.to_phi(states[0])
        if equation == "phi":
            return self.to_psi(states[0]), states[0]
        return states[0], self.to_phi(states[0])

    def _record(
        self,
        report: SimReport,
        states: tuple[GridState, ...],
        window: Optional[deque[tuple[GridState, ...]]],
    ) -> float:
        equation = self._config.output.equation
        evolved = states[0]
        row: dict[str, float] = {"t": evolved.t, "norm": norm(self._grid, evolved)}

        try:
            psi, mapped_phi = self._psi_and_phi(states)
            row["energy"] = energy(self._grid, psi, self._model.U, self._params, self._options)
            if window is not None:
                row.update(self._residuals(window))
            if equation == "both":
                row["gauge_density_error"] = gauge_density_error(states[1], mapped_phi)
        except VacuumDensity as error:
            logger.warning("Skipping diagnostics at t=%.6g: %s", evolved.t, error)

        report.add_row(**row)
        report.snapshot_blocks.append(snapshot_frame(self._grid, evolved, self._options))
        if equation == "both":
            report.phi_snapshot_blocks.append(
                snapshot_frame(self._grid, states[1], self._options)
            )
        logger.debug("Diagnostics row: %s", row)
        return row["norm"]

    def _residuals(self, window: deque[tuple[GridState, ...]]) -> dict[str, float]:
        equation = self._config.output.equation
        evolved = [states[0] for states in window]
        if equation == "phi":
            continuity = continuity_residual(
                self._grid, evolved, drift_current(), self._params, self._options
            )
            schp = eq19_residual(self._grid, evolved, self.system, self._params, self._options)
        else:
            continuity = continuity_residual(
                self._grid, evolved, self.system.j_psi, self._params, self._options
            )
            mapped = [self.to_phi(state) for state in evolved]
            schp = eq19_residual(
                self._grid,
                mapped,
                self.system,
                self._params,
                self._options,
                trajectory_psi=evolved,
            )
        return {
            "continuity_residual": float(continuity.iloc[0]),
            "eq19_residual": float(schp.iloc[0]),
        }

    def _summarize(
        self,
        report: SimReport,
        final: tuple[GridState, ...],
        initial_norm: Optional[float],
    ) -> None:
        frame = report.diagnostics
        final_norm = norm(self._grid, final[0])
        summary: dict[str, object] = {
            "model": self._model.name,
            "equation": self._config.output.equation,
            "t_final": final[0].t,
            "norm_initial": initial_norm,
            "norm_final": final_norm,
            "norm_drift": (
                abs(final_norm - initial_norm) / initial_norm
                if initial_norm
                else None
            ),
            "energy_initial": _first_finite(frame["energy"]),
            "energy_final": _last_finite(frame["energy"]),
            "max_continuity_residual": _max_finite(frame["continuity_residual"]),
            "max_eq19_residual": _max_finite(frame["eq19_residual"]),
            "initial_data_note": INITIAL_DATA_NOTE,
        }
        if self._config.output.equation == "both":
            mapped = self.to_phi(final[0])
            summary["max_gauge_density_error"] = _max_finite(frame["gauge_density_error"])
            summary["phase_agreement"] = phase_agreement(self._grid, final[1], mapped)
        report.summary.update(summary)
        logger.info("Run finished at t=%.6g, norm drift %s", final[0].t, summary["norm_drift"])


def _finite(values: npt.ArrayLike) -> npt.NDArray[np.float64]:
    array = np.asarray(values, dtype=float)
    return array[np.isfinite(array)]


def _first_finite(values: npt.ArrayLike) -> Optional[float]:
    finite = _finite(values)
    return float(finite[0]) if finite.size else None


def _last_finite(values: npt.ArrayLike) -> Optional[float]:
    finite = _finite(values)
    return float(finite[-1]) if finite.size else None


def _max_finite(values: npt.ArrayLike) -> Optional[float]:
    finite = _finite(values)
    return float(np.max(finite)) if finite.size else None
