"""Residual and conservation diagnostics over stored trajectories.

Time derivatives are centered differences over neighbouring states, so a
trajectory of n states yields residuals at its n - 2 interior times.
"""

from typing import Optional, Sequence

import numpy as np
import pandas as pd

from gaugeflow.simulator.services.equations import (
    evaluate,
    gauge_phase_values,
    invert_gauge,
    kinetic_term,
    samples_for,
)
from gaugeflow.simulator.services.grid import (
    ComplexArray,
    FieldOptions,
    Grid,
    GridState,
)
from gaugeflow.symbolic.field_expr import Expr, FloatArray, Params
from gaugeflow.symbolic.parser import parse_expression
from gaugeflow.symbolic.variational import DerivedSystem
from gaugeflow.utils.errors import InsufficientSnapshots, NonConservingPotential
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

MIN_SNAPSHOTS = 3
DRIFT_CURRENT = "S_1*rho/m"


def norm(grid: Grid, state: GridState) -> float:
    """Particle number: integral of rho."""
    return grid.integrate(state.rho)


def energy(
    grid: Grid, state: GridState, U: Expr, params: Params, options: FieldOptions
) -> float:
    """Energy-like functional: integral of U over the domain."""
    if U.is_zero:
        return 0.0
    samples = samples_for(grid, state, [U], params, options)
    return grid.integrate(evaluate(grid, U, samples, params, options))


def _require_snapshots(trajectory: Sequence[GridState]) -> None:
    if len(trajectory) < MIN_SNAPSHOTS:
        raise InsufficientSnapshots(
            f"need at least {MIN_SNAPSHOTS} snapshots, got {len(trajectory)}"
        )


def continuity_residual(
    grid: Grid,
    trajectory: Sequence[GridState],
    current: Expr,
    params: Params,
    options: FieldOptions,
) -> pd.Series:
    """max |d_t rho + d_x j| at each interior time of the trajectory."""
    _require_snapshots(trajectory)
    times, values = [], []
    for earlier, middle, later in zip(trajectory, trajectory[1:], trajectory[2:]):
        rate = (later.rho - earlier.rho) / (later.t - earlier.t)
        samples = samples_for(grid, middle, [current], params, options)
        flux = evaluate(grid, current, samples, params, options)
        residual = rate + grid.spectral_deriv(flux, 1)
        times.append(middle.t)
        values.append(float(np.max(np.abs(residual))))
    return pd.Series(values, index=pd.Index(times, name="t"), name="continuity_residual")


def drift_current() -> Expr:
    """The linear-theory current rho S_1 / m."""
    return parse_expression(DRIFT_CURRENT)


def project_global_phase(residual: ComplexArray, phi: ComplexArray) -> ComplexArray:
    """Remove the real multiple of phi that a time-dependent constant in Theta adds."""
    weight = float(np.sum(np.abs(phi) ** 2))
    if weight == 0.0:
        return residual
    coefficient = float(np.real(np.vdot(phi, residual))) / weight
    return residual - coefficient * phi


def eq19_residual(
    grid: Grid,
    trajectory_phi: Sequence[GridState],
    system: DerivedSystem,
    params: Params,
    options: FieldOptions,
    trajectory_psi: Optional[Sequence[GridState]] = None,
) -> pd.Series:
    """max |i hbar d_t phi - [-(hbar^2/2m) phi_xx + (W - m G^2/2 - S_1 G - m d_t Theta) phi]|.

    W, G and S_1 are the hydrodynamic fields of psi: taken from the paired psi
    trajectory when given, otherwise recovered by inverting the gauge map.
    Only the periodic part of Theta is differentiated in time; phi samples are
    differenced without their Bloch factors, which drops the matching x dG/dt term.
    """
    _require_snapshots(trajectory_phi)
    if not system.conserves_N or system.theta is None:
        raise NonConservingPotential(str(system.source))
    if trajectory_psi is None:
        trajectory_psi = [
            invert_gauge(grid, state, system, params, options) for state in trajectory_phi
        ]
    if len(trajectory_psi) != len(trajectory_phi):
        raise InsufficientSnapshots("psi and phi trajectories differ in length")

    phases = [
        gauge_phase_values(grid, system.theta, state, params, options)[0]
        for state in trajectory_psi
    ]
    times, values = [], []
    for index in range(1, len(trajectory_phi) - 1):
        earlier, middle, later = trajectory_phi[index - 1 : index + 2]
        interval = later.t - earlier.t
        phi_rate = (later.psi - earlier.psi) / interval
        theta_rate = (phases[index + 1] - phases[index - 1]) / interval

        local = local_phi_terms(grid, trajectory_psi[index], system, params, options)
        multiplier = local - params.m * theta_rate

        residual = 1j * params.hbar * phi_rate - (
            kinetic_term(grid, middle, params) + multiplier * middle.psi
        )
        residual = project_global_phase(residual, middle.psi)
        times.append(middle.t)
        values.append(float(np.max(np.abs(residual))))
    return pd.Series(values, index=pd.Index(times, name="t"), name="eq19_residual")


def gauge_density_error(direct_phi: GridState, mapped_phi: GridState) -> float:
    """L-infinity distance between the densities of two phi fields."""
    return float(np.max(np.abs(direct_phi.rho - mapped_phi.rho)))


def phase_agreement(grid: Grid, direct_phi: GridState, mapped_phi: GridState) -> float:
    """Largest phase difference (radians) after removing one spatial constant."""
    relative = (
        direct_phi.psi
        * np.conj(mapped_phi.psi)
        * np.exp(1j * (direct_phi.twist - mapped_phi.twist) * grid.x)
    )
    offset = np.angle(np.sum(relative))
    return float(np.max(np.abs(np.angle(relative * np.exp(-1j * offset)))))


def local_phi_terms(
    grid: Grid,
    state_psi: GridState,
    system: DerivedSystem,
    params: Params,
    options: FieldOptions,
) -> FloatArray:
    """W - m G^2 / 2 - S_1 G evaluated on the psi fields."""
    terms = [term for term in system.transformed_terms if not term.is_zero]
    if not terms:
        return np.zeros(grid.N)
    samples = samples_for(grid, state_psi, terms, params, options)
    return np.sum([evaluate(grid, term, samples, params, options) for term in terms], axis=0)
