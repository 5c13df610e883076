import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.calculus.euler import euler_equations

from gaugeflow.models.catalog import builtin
from gaugeflow.simulator.services.grid import Grid
from gaugeflow.symbolic.field_expr import Base, Expr, Params, phase, rho
from gaugeflow.symbolic.parser import parse_expression, parse_potential
from gaugeflow.symbolic.variational import (
    DerivedSystem,
    check_conservation,
    derive_system,
    evaluate_phase,
    functional_derivative,
    gauge_phase,
    sigma_from,
    transformed_terms,
)
from gaugeflow.utils.errors import NonConservingPotential
from gaugeflow.verification.suites import (
    density_variation_error,
    random_potential,
    structural_mismatches,
)

X = sp.Symbol("x")
DENSITY_FUNCTION = sp.Function("rho")(X)
PHASE_FUNCTION = sp.Function("S")(X)


def to_sympy(expression: Expr) -> sp.Expr:
    """The expression with rho_n, S_n as x-derivatives of rho(x), S(x)."""
    total = sp.Integer(0)
    for monomial in expression.terms:
        term = sp.Rational(monomial.coefficient.numerator, monomial.coefficient.denominator)
        for name, power in monomial.parameters:
            term *= sp.Symbol(name) ** power
        for symbol, power in monomial.fields:
            function = DENSITY_FUNCTION if symbol.base is Base.RHO else PHASE_FUNCTION
            term *= (sp.diff(function, X, symbol.order) if symbol.order else function) ** power
        total += term
    return total


def euler_lagrange(U: Expr, function: sp.Expr) -> sp.Expr:
    equations = euler_equations(to_sympy(U), [function], X)
    return equations[0].lhs if equations else sp.Integer(0)


def assert_same(left: sp.Expr, right: sp.Expr):
    assert sp.expand(left - right) == 0


@pytest.mark.parametrize(
    "name, parameters",
    [("dg", {"D": 0.05}), ("jackiw", {"lambda": 0.3}), ("eip", {"kappa": 0.2})],
)
def test_functional_derivatives_match_sympy(name, parameters):
    U = builtin(name, Params.from_mapping(parameters)).U
    assert_same(euler_lagrange(U, DENSITY_FUNCTION), to_sympy(functional_derivative(U, Base.RHO)))
    assert_same(euler_lagrange(U, PHASE_FUNCTION), to_sympy(functional_derivative(U, Base.S)))


def test_random_potentials_match_sympy():
    rng = np.random.default_rng(7)
    for _ in range(10):
        U = random_potential(rng, max_order=2, max_degree=3)
        for function, base in ((DENSITY_FUNCTION, Base.RHO), (PHASE_FUNCTION, Base.S)):
            assert_same(euler_lagrange(U, function), to_sympy(functional_derivative(U, base)))


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_structural_identities_hold_for_random_potentials(seed):
    U = random_potential(np.random.default_rng(seed))
    assert structural_mismatches(U) == []


def test_zero_potential_derives_zero_system():
    system = derive_system(parse_potential("0"))
    document = system.to_dict()
    for key in ("U", "W", "calW", "G", "source"):
        assert document[key] == "0"
    assert document["j_psi"] == "rho*S_1/m"
    assert document["theta_integrand"] == "0"
    assert system.conserves_N


def test_dg_system_and_closed_phase():
    system = builtin("dg", Params.of(D=0.05)).system
    assert system.W == parse_expression("-D*S_2")
    assert system.calW == parse_expression("-hbar*D*rho_2/(2*rho)")
    assert system.j_psi == parse_expression("S_1*rho/m + D*rho_1")
    assert system.theta is not None
    assert system.theta.closed == parse_expression("D*log(rho)")
    assert system.theta.has_closed_form


def test_jackiw_phase_has_no_closed_form():
    theta = gauge_phase(builtin("jackiw", Params.of(**{"lambda": 0.3})).U)
    assert theta.integrand == parse_expression("-hbar*lambda*rho/(2*m)")
    assert theta.closed is None


def test_power_law_gauge_integrand_is_integrated():
    theta = gauge_phase(parse_potential("kappa*rho^2*S_2"))
    assert theta.integrand == parse_expression("-2*kappa*rho_1")
    assert theta.closed == parse_expression("-2*kappa*rho")


def test_transformed_terms_for_dg():
    terms = transformed_terms(builtin("dg", Params.of(D=0.05)).U)
    assert terms == [
        parse_expression("-D*S_2"),
        parse_expression("-m*D^2*rho_1^2/(2*rho^2)"),
        parse_expression("-D*S_1*rho_1/rho"),
    ]


def test_non_conserving_potential():
    U = parse_potential("S*rho")
    assert not check_conservation(U)
    system = derive_system(U)
    assert not system.conserves_N
    assert system.source == parse_expression("rho")
    assert system.theta is None
    assert system.transformed_terms == ()
    with pytest.raises(NonConservingPotential):
        gauge_phase(U)
    with pytest.raises(NonConservingPotential):
        transformed_terms(U)


def test_json_document_reparses():
    system = builtin("eip", Params.of(kappa=0.2)).system
    assert DerivedSystem.from_dict(system.to_dict()) == system


def test_sigma_symbolic_forms():
    dg = builtin("dg", Params.of(D=0.05)).system.theta
    jackiw = builtin("jackiw", Params.of(**{"lambda": 0.3})).system.theta
    S = Expr.symbol(phase(0))
    assert sigma_from(S, dg) == parse_expression("S + m*D*log(rho)")
    assert sigma_from(S, jackiw) == parse_expression("S + m*int(-hbar*lambda*rho/(2*m))")


def test_phase_and_sigma_on_samples():
    theta = builtin("dg", Params.of(D=0.05)).system.theta
    density = np.array([0.5, 1.0, 2.0])
    samples = {rho(0): density, rho(1): np.zeros(3)}
    params = Params.of(m=2.0, D=0.05)
    values = evaluate_phase(theta, samples, params, np.cumsum)
    np.testing.assert_allclose(values, 0.05 * np.log(density))
    sigma = sigma_from(np.ones(3), theta, samples, params, np.cumsum)
    np.testing.assert_allclose(sigma, 1.0 + 2.0 * 0.05 * np.log(density))


def test_sigma_needs_samples_for_arrays():
    theta = builtin("dg", Params.of(D=0.05)).system.theta
    with pytest.raises(ValueError):
        sigma_from(np.ones(3), theta)


def test_density_derivative_matches_perturbation_quotient():
    grid = Grid(L=2.0 * math.pi, N=64)
    dg = builtin("dg", Params.of(D=0.05))
    assert density_variation_error(dg.U, grid, dg.params) <= 1e-6
    rng = np.random.default_rng(3)
    for _ in range(5):
        assert density_variation_error(random_potential(rng, max_order=2), grid, Params()) <= 1e-6
