"""Classical fourth-order Runge-Kutta time stepping for grid states."""

from typing import Callable, Iterator

import numpy as np

from gaugeflow.simulator.services.grid import ComplexArray, Grid, GridState
from gaugeflow.symbolic.field_expr import Params
from gaugeflow.utils.errors import NaNDetected, StabilityBoundViolated
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_STABILITY_FACTOR = 0.2

RightHandSide = Callable[[GridState], ComplexArray]


def stability_bound(grid: Grid, params: Params, factor: float = DEFAULT_STABILITY_FACTOR) -> float:
    """Largest admissible dt, c * m * dx^2 / hbar; dispersion is the stiffest term."""
    return factor * params.m * grid.dx**2 / params.hbar


def check_time_step(dt: float, bound: float, allow_unstable: bool = False) -> None:
    """Raise StabilityBoundViolated for dt above the bound unless overridden."""
    if dt <= bound:
        return
    if not allow_unstable:
        raise StabilityBoundViolated(dt, bound)
    logger.warning(
        "dt=%.3e exceeds the stability bound %.3e; continuing because the "
        "override is set",
        dt,
        bound,
    )


def step_rk4(rhs: RightHandSide, state: GridState, dt: float) -> GridState:
    """One classical fourth-order Runge-Kutta step; the Bloch twist is carried unchanged."""
    psi = state.psi
    half = 0.5 * dt

    k1 = rhs(state)
    k2 = rhs(state.with_psi(psi + half * k1, state.t + half))
    k3 = rhs(state.with_psi(psi + half * k2, state.t + half))
    k4 = rhs(state.with_psi(psi + dt * k3, state.t + dt))

    return state.with_psi(
        psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), state.t + dt
    )


def march(
    rhs: RightHandSide, initial: GridState, dt: float, steps: int
) -> Iterator[tuple[int, GridState]]:
    """Yield (step, state) for step = 0..steps, aborting on non-finite values."""
    state = initial
    yield 0, state
    for step in range(1, steps + 1):
        advanced = step_rk4(rhs, state, dt)
        if not advanced.is_finite():
            logger.error("Non-finite field after step %d (t=%.6g)", step, advanced.t)
            raise NaNDetected(advanced.t, last_state=state)
        state = advanced
        yield step, state


def evolve_states(
    rhs: RightHandSide, initial: GridState, dt: float, steps: int
) -> GridState:
    """Advance `steps` RK4 steps and return the final state."""
    state = initial
    for _, state in march(rhs, initial, dt, steps):
        pass
    return state


def step_count(duration: float, dt: float) -> int:
    """Number of dt steps covering `duration`, warning when it does not divide evenly."""
    steps = int(round(duration / dt))
    if not np.isclose(steps * dt, duration, rtol=1e-9, atol=0.0):
        logger.warning(
            "T=%.6g is not a multiple of dt=%.3e; running %d steps to t=%.6g",
            duration,
            dt,
            steps,
            steps * dt,
        )
    return steps
