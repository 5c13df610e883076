"""Catalog of built-in potentials and their closed-form gauge-transformed equations.

Each model stores the expressions it is known to produce as DSL strings;
`PotentialModel.check` compares them structurally against the derivation
pipeline. The phi-equation nonlinearity of a model is a rational form
numerator / denominator in rho and the transformed phase sigma, which
occupies the S slot of the phi field samples.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Mapping, Optional

import numpy as np

from gaugeflow.simulator.services.grid import (
    DEFAULT_FIELD_OPTIONS,
    FieldOptions,
    Grid,
    GridState,
    phase_gradient,
)
from gaugeflow.symbolic.field_expr import RESERVED_PARAMETERS, Expr, Params
from gaugeflow.symbolic.parser import parse_expression, parse_potential
from gaugeflow.symbolic.variational import DerivedSystem, derive_system
from gaugeflow.utils.errors import (
    MissingParameter,
    PhaseWindingError,
    RescaleOutOfRange,
    UnknownModel,
    VacuumDensity,
)
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

BUILTIN_MODELS = ("free", "dg", "jackiw", "eip")
WINDING_TOLERANCE = 1e-8


@dataclass(frozen=True)
class PhiNonlinearity:
    """Real multiplier of phi in its evolution equation, numerator / denominator."""

    numerator: Expr
    denominator: Expr = field(default_factory=lambda: Expr.constant(1))

    @property
    def is_zero(self) -> bool:
        return self.numerator.is_zero


@dataclass(frozen=True)
class RegressionOutcome:
    key: str
    expected: str
    derived: str
    passed: bool

    def to_dict(self) -> dict[str, object]:
        return {
            "key": self.key,
            "expected": self.expected,
            "derived": self.derived,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class _ModelSpec:
    potential: str
    required: tuple[str, ...]
    expected: Mapping[str, str]
    phi_numerator: str
    phi_denominator: str = "1"
    positivity_guard: Optional[str] = None


# dg: W = -D*S_2 equals -m*D*dx(j/rho) only for the drift current j = rho*S_1/m,
# and calW takes the sign of the Euler-Lagrange sum. These are the forms that
# reproduce the current, the generator and the phi equation.
_CATALOG: dict[str, _ModelSpec] = {
    "free": _ModelSpec(
        potential="0",
        required=(),
        expected={
            "W": "0",
            "calW": "0",
            "j_psi": "S_1*rho/m",
            "gauge": "0",
        },
        phi_numerator="0",
    ),
    "dg": _ModelSpec(
        potential="D/2*(rho_1*S_1 - rho*S_2)",
        required=("D",),
        expected={
            "W": "-D*S_2",
            "calW": "-hbar*D*rho_2/(2*rho)",
            "j_psi": "S_1/m*rho + D*rho_1",
            "gauge": "D*rho_1/rho",
            "gauge_closed": "D*log(rho)",
        },
        phi_numerator="m*D^2*(rho_2/rho - rho_1^2/(2*rho^2))",
    ),
    "jackiw": _ModelSpec(
        potential="hbar^2*lambda^2/(8*m)*rho^3 - hbar*lambda/(2*m)*rho^2*S_1",
        required=("lambda",),
        expected={
            "W": "3*hbar^2*lambda^2/(8*m)*rho^2 - hbar*lambda/m*rho*S_1",
            "calW": "hbar^2*lambda/(2*m)*rho_1",
            "j_psi": "S_1/m*rho - hbar*lambda/(2*m)*rho^2",
            "gauge": "-hbar*lambda/(2*m)*rho",
        },
        phi_numerator="-lambda*hbar*S_1*rho/m",
    ),
    "eip": _ModelSpec(
        potential="kappa*(S_1*rho)^2/(2*m)",
        required=("kappa",),
        expected={
            "W": "kappa*rho*S_1^2/m",
            "calW": "-kappa*hbar/(2*rho)*(2*rho*rho_1*S_1 + rho^2*S_2)/m",
            "j_psi": "S_1/m*rho*(1 + kappa*rho)",
            "gauge": "kappa/m*rho*S_1",
        },
        phi_numerator=(
            "kappa*S_1^2*rho/m"
            " - kappa*hbar^2/(4*m)*(rho_2 - rho_1^2/rho)*(1 + kappa*rho)"
        ),
        phi_denominator="1 + kappa*rho",
        positivity_guard="1 + kappa*rho",
    ),
}


@dataclass(frozen=True)
class PotentialModel:
    name: str
    U: Expr
    params: Params
    required: tuple[str, ...] = ()
    expected: Mapping[str, Expr] = field(default_factory=dict)
    phi_nonlinearity: Optional[PhiNonlinearity] = None
    positivity_guard: Optional[Expr] = None

    @cached_property
    def system(self) -> DerivedSystem:
        return derive_system(self.U)

    def check(self) -> list[RegressionOutcome]:
        """Compare every stored expression with the derived one."""
        system = self.system
        derived: dict[str, Optional[Expr]] = {
            "W": system.W,
            "calW": system.calW,
            "j_psi": system.j_psi,
            "gauge": system.theta.integrand if system.theta else None,
            "gauge_closed": system.theta.closed if system.theta else None,
        }
        outcomes = []
        for key, expected in self.expected.items():
            actual = derived[key]
            outcomes.append(
                RegressionOutcome(
                    key=key,
                    expected=str(expected),
                    derived=str(actual) if actual is not None else "<none>",
                    passed=actual is not None and actual == expected,
                )
            )
        failed = [o.key for o in outcomes if not o.passed]
        if failed:
            logger.warning("Model %s regression mismatch on %s", self.name, failed)
        else:
            logger.info("Model %s matches %d stored expressions", self.name, len(outcomes))
        return outcomes


def _require_parameters(model: str, names: tuple[str, ...], params: Params) -> None:
    for name in names:
        if not params.has(name):
            raise MissingParameter(name, model)


def builtin(name: str, params: Params, require_values: bool = True) -> PotentialModel:
    """A catalog model; `require_values=False` allows symbolic use with unbound parameters."""
    if name not in _CATALOG:
        raise UnknownModel(
            f"unknown model {name!r}; choose one of {', '.join(BUILTIN_MODELS)}"
        )
    entry = _CATALOG[name]
    if require_values:
        _require_parameters(name, entry.required, params)

    if name == "dg" and params.has("D"):
        ratio = 2.0 * params.m * params.value("D") / params.hbar
        if abs(ratio) >= 1.0:
            logger.warning(
                "|2mD/hbar| = %.3g >= 1: the phase rescaling to the linear "
                "equation is unavailable",
                abs(ratio),
            )

    return PotentialModel(
        name=name,
        U=parse_potential(entry.potential),
        params=params,
        required=entry.required,
        expected={key: parse_expression(text) for key, text in entry.expected.items()},
        phi_nonlinearity=PhiNonlinearity(
            parse_expression(entry.phi_numerator),
            parse_expression(entry.phi_denominator),
        ),
        positivity_guard=(
            parse_expression(entry.positivity_guard)
            if entry.positivity_guard is not None
            else None
        ),
    )


def custom(text: str, params: Params, require_values: bool = True) -> PotentialModel:
    """A user potential: derivation and psi evolution only, no closed phi form."""
    U = parse_potential(text)
    required = tuple(
        sorted(name for name in U.parameter_names() if name not in RESERVED_PARAMETERS)
    )
    if require_values:
        _require_parameters("custom", required, params)
    return PotentialModel(name="custom", U=U, params=params, required=required)


def select_model(
    name: Optional[str],
    potential: Optional[str],
    params: Params,
    require_values: bool = True,
) -> PotentialModel:
    """A custom model when a potential is given, otherwise the named built-in."""
    if potential is not None:
        return custom(potential, params, require_values)
    if name is None or name == "custom":
        raise UnknownModel("a custom model needs a potential expression")
    return builtin(name, params, require_values)


class RescaleDirection(Enum):
    TO_LINEAR = "to_linear"
    FROM_LINEAR = "from_linear"


def rescale_factor(D: float, params: Params) -> float:
    """alpha = sqrt(1 - (2 m D / hbar)^2)."""
    ratio = 2.0 * params.m * D / params.hbar
    if abs(ratio) >= 1.0:
        raise RescaleOutOfRange(
            f"|2mD/hbar| = {abs(ratio):.6g} must be below 1 for the phase rescaling"
        )
    return math.sqrt(1.0 - ratio * ratio)


def dg_rescale_phase(
    grid: Grid,
    state: GridState,
    D: float,
    direction: RescaleDirection,
    params: Params,
    options: FieldOptions = DEFAULT_FIELD_OPTIONS,
) -> GridState:
    """Map between the dg phi equation and the linear equation in time alpha*t.

    With phi = sqrt(rho) exp(i sigma / hbar), a solution chi of the linear
    equation is recovered by chi's phase = sigma / alpha (to_linear), and the
    reverse multiplies by alpha. The substitution sigma -> alpha*sigma is read
    as "the phi phase is alpha times the linear phase", so to_linear divides.
    Phases are rescaled relative to their value at x = 0; the density is left
    untouched.
    """
    alpha = rescale_factor(D, params)
    if alpha == 1.0:
        return state
    scale = 1.0 / alpha if direction is RescaleDirection.TO_LINEAR else alpha

    rho = state.rho
    minimum = float(np.min(rho))
    if minimum < options.rho_floor:
        raise VacuumDensity(minimum, options.rho_floor)

    gradient = phase_gradient(grid, state, replace(options, hbar=params.hbar))
    periodic, mean = grid.cumint(gradient)
    winding = (mean / params.hbar - state.twist) * grid.L / (2.0 * np.pi)
    scaled_winding = scale * round(winding)
    if abs(scaled_winding - round(scaled_winding)) > WINDING_TOLERANCE:
        raise PhaseWindingError(
            f"phase winding {round(winding)} scaled by {scale:.6g} is not an integer"
        )

    anchor = float(np.angle(state.psi[0]))
    stored_phase = (
        anchor
        + scale * (periodic - periodic[0]) / params.hbar
        + 2.0 * np.pi * round(scaled_winding) * grid.x / grid.L
    )
    logger.debug("Rescaled phase by %.12g (%s)", scale, direction.value)
    return GridState(
        t=state.t,
        psi=np.sqrt(rho) * np.exp(1j * stored_phase),
        twist=scale * state.twist,
    )
