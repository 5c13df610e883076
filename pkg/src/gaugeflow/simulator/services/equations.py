"""Right-hand sides of the psi and phi evolution equations and the gauge map."""

from dataclasses import replace
from typing import Iterable

import numpy as np

from gaugeflow.models.catalog import PotentialModel
from gaugeflow.simulator.services.grid import (
    ComplexArray,
    FieldOptions,
    Grid,
    GridState,
    hydro_fields,
)
from gaugeflow.symbolic.field_expr import (
    Expr,
    FieldSymbol,
    FloatArray,
    Params,
    eval_on_grid,
    max_order,
)
from gaugeflow.symbolic.variational import DerivedSystem, PhaseForm, evaluate_phase
from gaugeflow.utils.errors import (
    EIPDegenerate,
    GaugeInversionError,
    NoClosedForm,
    NonConservingPotential,
)
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

INVERSION_MAX_ITERATIONS = 200
INVERSION_TOLERANCE = 1e-13


def _field_options(params: Params, options: FieldOptions) -> FieldOptions:
    return replace(options, hbar=params.hbar)


def samples_for(
    grid: Grid,
    state: GridState,
    expressions: Iterable[Expr],
    params: Params,
    options: FieldOptions,
) -> dict[FieldSymbol, FloatArray]:
    """Hydrodynamic samples up to the highest orders the expressions need."""
    rho_order, s_order = 0, 0
    for expression in expressions:
        expression_rho, expression_s = max_order(expression)
        rho_order = max(rho_order, expression_rho)
        s_order = max(s_order, expression_s)
    return hydro_fields(grid, state, rho_order, s_order, _field_options(params, options))


def evaluate(
    grid: Grid,
    expression: Expr,
    samples: dict[FieldSymbol, FloatArray],
    params: Params,
    options: FieldOptions,
) -> FloatArray:
    return eval_on_grid(
        expression,
        samples,
        params,
        integrate=grid.primitive,
        rho_floor=options.effective_floor,
        size=grid.N,
    )


def kinetic_term(grid: Grid, state: GridState, params: Params) -> ComplexArray:
    """-(hbar^2 / 2m) d_x^2 psi, with the state's Bloch twist."""
    laplacian = grid.spectral_deriv(state.psi, 2, state.twist)
    return -(params.hbar**2 / (2.0 * params.m)) * laplacian


def psi_rhs(
    grid: Grid,
    system: DerivedSystem,
    state: GridState,
    params: Params,
    options: FieldOptions,
) -> ComplexArray:
    """d_t psi = (1 / i hbar) [-(hbar^2/2m) psi_xx + (W + i calW) psi]."""
    if not system.conserves_N:
        raise NonConservingPotential(str(system.source))
    hamiltonian = kinetic_term(grid, state, params)
    if not (system.W.is_zero and system.calW.is_zero):
        samples = samples_for(grid, state, (system.W, system.calW), params, options)
        real_part = evaluate(grid, system.W, samples, params, options)
        imaginary_part = evaluate(grid, system.calW, samples, params, options)
        hamiltonian = hamiltonian + (real_part + 1j * imaginary_part) * state.psi
    return hamiltonian / (1j * params.hbar)


def enforce_guard(
    grid: Grid,
    model: PotentialModel,
    samples: dict[FieldSymbol, FloatArray],
    params: Params,
    options: FieldOptions,
) -> None:
    """Raise EIPDegenerate unless the model's positivity guard is > 0 everywhere."""
    if model.positivity_guard is None:
        return
    guard = evaluate(grid, model.positivity_guard, samples, params, options)
    minimum = float(np.min(guard))
    if minimum <= 0.0:
        raise EIPDegenerate(
            f"{model.positivity_guard} reaches {minimum:.3e}; it must stay strictly positive"
        )


def phi_potential(
    grid: Grid,
    model: PotentialModel,
    state: GridState,
    params: Params,
    options: FieldOptions,
) -> FloatArray:
    """Real multiplier of phi: the model's closed-form nonlinearity on the grid."""
    nonlinearity = model.phi_nonlinearity
    if nonlinearity is None:
        raise NoClosedForm(
            f"model {model.name!r} has no closed-form phi equation; "
            "use the psi equation and residual checks instead"
        )
    if nonlinearity.is_zero:
        return np.zeros(grid.N)
    expressions = [nonlinearity.numerator, nonlinearity.denominator]
    if model.positivity_guard is not None:
        expressions.append(model.positivity_guard)
    samples = samples_for(grid, state, expressions, params, options)
    enforce_guard(grid, model, samples, params, options)
    numerator = evaluate(grid, nonlinearity.numerator, samples, params, options)
    denominator = evaluate(grid, nonlinearity.denominator, samples, params, options)
    return numerator / denominator


def phi_rhs(
    grid: Grid,
    model: PotentialModel,
    state: GridState,
    params: Params,
    options: FieldOptions,
) -> ComplexArray:
    """d_t phi = (1 / i hbar) [-(hbar^2/2m) phi_xx + V_phi phi], V_phi real."""
    potential = phi_potential(grid, model, state, params, options)
    hamiltonian = kinetic_term(grid, state, params) + potential * state.psi
    return hamiltonian / (1j * params.hbar)


def gauge_phase_values(
    grid: Grid,
    theta: PhaseForm,
    state: GridState,
    params: Params,
    options: FieldOptions,
) -> tuple[FloatArray, float]:
    """Periodic part of Theta on the grid and the mean gauge velocity.

    A closed form is periodic, so its mean velocity is zero; otherwise the
    mean of G is the secular part that moves into the Bloch twist.
    """
    if theta.integrand.is_zero:
        return np.zeros(grid.N), 0.0
    expressions = [theta.integrand] if theta.closed is None else [theta.closed]
    samples = samples_for(grid, state, expressions, params, options)
    if theta.closed is not None:
        values = evaluate_phase(
            theta, samples, params, grid.primitive, options.effective_floor
        )
        return values, 0.0
    velocity = evaluate(grid, theta.integrand, samples, params, options)
    return grid.cumint(velocity)


def _require_phase(system: DerivedSystem) -> PhaseForm:
    if not system.conserves_N or system.theta is None:
        raise NonConservingPotential(str(system.source))
    return system.theta


def apply_gauge(
    grid: Grid,
    state_psi: GridState,
    system: DerivedSystem,
    params: Params,
    options: FieldOptions,
) -> GridState:
    """phi = psi exp(i (m/hbar) Theta); |phi| = |psi| pointwise."""
    theta = _require_phase(system)
    if theta.integrand.is_zero:
        return state_psi
    periodic, mean_velocity = gauge_phase_values(grid, theta, state_psi, params, options)
    factor = np.exp(1j * (params.m / params.hbar) * periodic)
    return GridState(
        t=state_psi.t,
        psi=state_psi.psi * factor,
        twist=state_psi.twist + params.m * mean_velocity / params.hbar,
    )


def invert_gauge(
    grid: Grid,
    state_phi: GridState,
    system: DerivedSystem,
    params: Params,
    options: FieldOptions,
) -> GridState:
    """Recover psi from phi by iterating psi <- phi exp(-i (m/hbar) Theta[psi])."""
    theta = _require_phase(system)
    if theta.integrand.is_zero:
        return state_phi

    scale = max(float(np.max(np.abs(state_phi.psi))), 1.0)
    current = state_phi
    for iteration in range(1, INVERSION_MAX_ITERATIONS + 1):
        periodic, mean_velocity = gauge_phase_values(grid, theta, current, params, options)
        candidate = GridState(
            t=state_phi.t,
            psi=state_phi.psi * np.exp(-1j * (params.m / params.hbar) * periodic),
            twist=state_phi.twist - params.m * mean_velocity / params.hbar,
        )
        change = max(
            float(np.max(np.abs(candidate.psi - current.psi))),
            abs(candidate.twist - current.twist) * grid.L,
        )
        current = candidate
        if change <= INVERSION_TOLERANCE * scale:
            logger.debug("Gauge inversion converged after %d iterations", iteration)
            return current
    raise GaugeInversionError(
        f"gauge inversion did not converge in {INVERSION_MAX_ITERATIONS} iterations"
    )
