"""From a potential U[rho, S] to the complex-nonlinearity Schrodinger system.

The pipeline applies the Euler-Lagrange sum term by term:

    W      = delta U / delta rho
    calW   = (hbar / 2 rho) * delta U / delta S
    j_psi  = S_1 rho / m + sum_n (-1)^n d^n/dx^n (dU/dS_{n+1})
    G      = (j_psi - rho S_1 / m) / rho
    Theta  = int G dx,  sigma = S + m Theta

together with the local multiplier terms of the gauge-transformed equation.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Optional, Union

from gaugeflow.symbolic.field_expr import (
    DEFAULT_RHO_FLOOR,
    RHO,
    Base,
    Expr,
    FieldSamples,
    FieldSymbol,
    FloatArray,
    Params,
    dx,
    dx_n,
    eval_on_grid,
    make_monomial,
    max_order,
    partial,
    phase,
    rho,
)
from gaugeflow.symbolic.parser import parse_expression
from gaugeflow.utils.errors import NonConservingPotential
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

DENSITY = Expr.symbol(RHO)
PHASE_GRADIENT = Expr.symbol(phase(1))
HBAR = Expr.parameter("hbar")
MASS = Expr.parameter("m")


@dataclass(frozen=True)
class PhaseForm:
    """Gauge phase Theta: always the integrand G, plus its antiderivative if found."""

    integrand: Expr
    closed: Optional[Expr] = None

    @property
    def has_closed_form(self) -> bool:
        return self.closed is not None


@dataclass(frozen=True)
class DerivedSystem:
    U: Expr
    W: Expr
    calW: Expr
    j_psi: Expr
    G: Expr
    source: Expr
    theta: Optional[PhaseForm]
    transformed_terms: tuple[Expr, ...]
    conserves_N: bool

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready mapping; every expression is a re-parseable DSL string."""
        return {
            "U": str(self.U),
            "W": str(self.W),
            "calW": str(self.calW),
            "j_psi": str(self.j_psi),
            "G": str(self.G),
            "source": str(self.source),
            "theta_closed": (
                str(self.theta.closed)
                if self.theta is not None and self.theta.closed is not None
                else None
            ),
            "theta_integrand": (
                str(self.theta.integrand) if self.theta is not None else None
            ),
            "transformed_terms": [str(term) for term in self.transformed_terms],
            "conserves_N": self.conserves_N,
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "DerivedSystem":
        theta = None
        if document.get("theta_integrand") is not None:
            closed_text = document.get("theta_closed")
            theta = PhaseForm(
                parse_expression(document["theta_integrand"]),
                parse_expression(closed_text) if closed_text is not None else None,
            )
        return cls(
            U=parse_expression(document["U"]),
            W=parse_expression(document["W"]),
            calW=parse_expression(document["calW"]),
            j_psi=parse_expression(document["j_psi"]),
            G=parse_expression(document["G"]),
            source=parse_expression(document["source"]),
            theta=theta,
            transformed_terms=tuple(
                parse_expression(text) for text in document["transformed_terms"]
            ),
            conserves_N=bool(document["conserves_N"]),
        )


def functional_derivative(U: Expr, base: Base) -> Expr:
    """sum_n (-1)^n d^n/dx^n (dU/da_n), truncated at the highest order in U."""
    rho_order, s_order = max_order(U)
    top = rho_order if base is Base.RHO else s_order
    total = Expr()
    for order in range(top + 1):
        term = dx_n(partial(U, FieldSymbol(base, order)), order)
        total = total + term if order % 2 == 0 else total - term
    return total


def _gauge_flux(U: Expr) -> Expr:
    """sum_n (-1)^n d^n/dx^n (dU/dS_{n+1}): the non-drift part of the current."""
    _, s_order = max_order(U)
    total = Expr()
    for order in range(s_order):
        term = dx_n(partial(U, phase(order + 1)), order)
        total = total + term if order % 2 == 0 else total - term
    return total


def check_conservation(U: Expr) -> bool:
    return partial(U, phase(0)).is_zero


def _require_conservation(U: Expr) -> None:
    source = partial(U, phase(0))
    if not source.is_zero:
        raise NonConservingPotential(str(source))


def _antiderivative(integrand: Expr) -> Optional[Expr]:
    """Match c * rho_1 * rho^k term by term; None when any term does not fit."""
    pieces = Expr()
    for monomial in integrand.terms:
        if monomial.logs or monomial.integrals:
            return None
        fields = dict(monomial.fields)
        if fields.get(rho(1)) != 1 or set(fields) - {rho(0), rho(1)}:
            return None
        power = fields.get(rho(0), 0)
        prefactor = Expr((make_monomial(monomial.coefficient, dict(monomial.parameters)),))
        if power == -1:
            pieces = pieces + prefactor * Expr.log(RHO)
        else:
            pieces = pieces + prefactor * Expr.symbol(RHO, power + 1) * Fraction(
                1, power + 1
            )
    if dx(pieces) != integrand:
        return None
    return pieces


def gauge_phase(U: Expr) -> PhaseForm:
    _require_conservation(U)
    integrand = _gauge_flux(U) / DENSITY
    closed = _antiderivative(integrand)
    logger.debug(
        "Gauge phase integrand %s, closed form %s",
        integrand,
        closed if closed is not None else "<numeric>",
    )
    return PhaseForm(integrand=integrand, closed=closed)


def transformed_terms(U: Expr) -> list[Expr]:
    """Local multipliers of the phi equation: W, -(m/2) G^2, -S_1 G."""
    _require_conservation(U)
    W = functional_derivative(U, Base.RHO)
    G = _gauge_flux(U) / DENSITY
    return [W, -(MASS * G * G) * Fraction(1, 2), -(PHASE_GRADIENT * G)]


def derive_system(U: Expr) -> DerivedSystem:
    logger.info("Deriving system for U = %s", U)
    W = functional_derivative(U, Base.RHO)
    variation_s = functional_derivative(U, Base.S)
    flux = _gauge_flux(U)
    source = partial(U, phase(0))
    conserves = source.is_zero
    system = DerivedSystem(
        U=U,
        W=W,
        calW=HBAR * variation_s * Fraction(1, 2) / DENSITY,
        j_psi=PHASE_GRADIENT * DENSITY / MASS + flux,
        G=flux / DENSITY,
        source=source,
        theta=gauge_phase(U) if conserves else None,
        transformed_terms=tuple(transformed_terms(U)) if conserves else (),
        conserves_N=conserves,
    )
    logger.debug("Derived system: %s", system)
    return system


def evaluate_phase(
    theta: PhaseForm,
    samples: FieldSamples,
    params: Params,
    integrate: Callable[[FloatArray], FloatArray],
    rho_floor: float = DEFAULT_RHO_FLOOR,
) -> FloatArray:
    """Theta on the grid: the closed form if known, else quadrature of G."""
    if theta.closed is not None:
        return eval_on_grid(theta.closed, samples, params, integrate, rho_floor)
    return integrate(eval_on_grid(theta.integrand, samples, params, integrate, rho_floor))


def sigma_from(
    S: Union[Expr, FloatArray],
    theta: PhaseForm,
    samples: Optional[FieldSamples] = None,
    params: Optional[Params] = None,
    integrate: Optional[Callable[[FloatArray], FloatArray]] = None,
) -> Union[Expr, FloatArray]:
    """sigma = S + m Theta, symbolic for Expr input and numeric for samples."""
    if isinstance(S, Expr):
        if theta.closed is not None:
            return S + MASS * theta.closed
        return S + MASS * Expr.integral(theta.integrand)
    if samples is None or params is None or integrate is None:
        raise ValueError("numeric sigma needs field samples, params and a quadrature")
    return S + params.m * evaluate_phase(theta, samples, params, integrate)
