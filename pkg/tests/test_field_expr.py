import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaugeflow.symbolic.field_expr import (
    MAX_ORDER,
    RHO,
    Expr,
    Params,
    dx,
    dx_n,
    equivalent,
    eval_on_grid,
    make_monomial,
    max_order,
    partial,
    phase,
    rho,
)
from gaugeflow.symbolic.parser import parse_expression
from gaugeflow.utils.errors import (
    ConfigError,
    IntegralNodePresent,
    MaxOrderExceeded,
    MissingFieldSamples,
    NonMonomialDivision,
    UnboundParameter,
    VacuumDensity,
)

SYMBOLS = [rho(0), rho(1), rho(2), phase(1), phase(2)]


@st.composite
def expressions(draw: st.DrawFn) -> Expr:
    """Small Laurent polynomials in low-order rho and S symbols."""
    total = Expr()
    for _ in range(draw(st.integers(1, 3))):
        coefficient = Fraction(draw(st.integers(-4, 4)), draw(st.integers(1, 3)))
        powers = draw(
            st.dictionaries(st.sampled_from(SYMBOLS), st.integers(-1, 2), max_size=3)
        )
        total = total + Expr((make_monomial(coefficient, fields=powers),))
    return total


def test_like_terms_are_collected():
    assert parse_expression("rho*S_1 + S_1*rho") == parse_expression("2*rho*S_1")


def test_cancellation_gives_zero():
    zero = parse_expression("rho^2 - rho*rho")
    assert zero.is_zero
    assert str(zero) == "0"


def test_division_by_monomial_and_inverse_powers():
    assert parse_expression("rho^2/rho") == parse_expression("rho")
    assert parse_expression("rho^-2") == Expr.constant(1) / Expr.symbol(RHO, 2)


def test_division_by_sum_is_rejected():
    with pytest.raises(NonMonomialDivision):
        parse_expression("rho/(1 + rho)")


def test_total_derivative_of_products():
    assert dx(parse_expression("rho^2")) == parse_expression("2*rho*rho_1")
    assert dx(parse_expression("rho*S_1")) == parse_expression("rho_1*S_1 + rho*S_2")


def test_total_derivative_of_log_and_parameters():
    assert dx(Expr.log(RHO)) == parse_expression("rho_1/rho")
    assert dx(parse_expression("D*rho/m")) == parse_expression("D*rho_1/m")
    assert dx(parse_expression("kappa")).is_zero


def test_total_derivative_of_integral_node():
    integral = Expr.integral(parse_expression("rho*S_1"))
    assert dx(integral) == parse_expression("rho*S_1")


def test_partial_holds_other_symbols_fixed():
    U = parse_expression("rho^2*S_1 + rho_1*S_1")
    assert partial(U, RHO) == parse_expression("2*rho*S_1")
    assert partial(U, phase(1)) == parse_expression("rho^2 + rho_1")
    assert partial(U, phase(0)).is_zero
    assert partial(Expr.log(RHO), RHO) == parse_expression("1/rho")


def test_partial_of_integral_is_rejected():
    with pytest.raises(IntegralNodePresent):
        partial(Expr.integral(Expr.symbol(RHO)), RHO)


def test_orders_beyond_limit_raise():
    top = Expr.symbol(rho(MAX_ORDER))
    with pytest.raises(MaxOrderExceeded):
        dx(top)
    with pytest.raises(MaxOrderExceeded):
        parse_expression(f"S_{MAX_ORDER + 1}")


def test_max_order_reports_both_bases():
    assert max_order(parse_expression("rho_3*S_1 + S_2^2")) == (3, 2)
    assert max_order(Expr.constant(5)) == (0, 0)


def test_parameter_and_symbol_queries():
    expression = parse_expression("kappa*rho/m + hbar*int(lambda*rho_1)")
    assert expression.parameter_names() == {"kappa", "m", "hbar", "lambda"}
    assert expression.field_symbols() == {rho(0), rho(1)}
    assert expression.has_integral
    assert not parse_expression("rho^2").divides_by_density()
    assert parse_expression("rho_1/rho").divides_by_density()


def test_params_lookup_and_reserved_names():
    params = Params.of(hbar=2.0, kappa=0.1)
    assert params.value("hbar") == 2.0
    assert params.value("m") == 1.0
    assert params.value("kappa") == pytest.approx(0.1)
    assert params.has("m") and not params.has("D")
    with pytest.raises(UnboundParameter):
        params.value("D")
    with pytest.raises(ConfigError):
        Params(bindings=(("hbar", 1.0),))
    assert Params.from_mapping({"m": 2.0, "D": 0.05}).as_dict() == {
        "hbar": 1.0,
        "m": 2.0,
        "D": 0.05,
    }


def test_eval_on_grid_matches_numpy():
    density = np.array([1.0, 2.0, 4.0])
    gradient = np.array([0.5, -1.0, 2.0])
    samples = {rho(0): density, phase(1): gradient}
    expression = parse_expression("kappa*rho*S_1^2/m + log(rho)")
    values = eval_on_grid(expression, samples, Params.of(m=2.0, kappa=0.3))
    np.testing.assert_allclose(values, 0.3 * density * gradient**2 / 2.0 + np.log(density))


def test_eval_on_grid_errors():
    samples = {rho(0): np.array([1.0, 1e-12])}
    with pytest.raises(UnboundParameter):
        eval_on_grid(parse_expression("D*rho"), samples, Params())
    with pytest.raises(MissingFieldSamples):
        eval_on_grid(parse_expression("S_1"), samples, Params())
    with pytest.raises(VacuumDensity) as caught:
        eval_on_grid(parse_expression("1/rho"), samples, Params(), rho_floor=1e-8)
    assert caught.value.min_rho == pytest.approx(1e-12)
    with pytest.raises(IntegralNodePresent):
        eval_on_grid(Expr.integral(Expr.symbol(RHO)), samples, Params())


def test_eval_on_grid_uses_supplied_quadrature():
    samples = {rho(0): np.array([1.0, 2.0, 3.0])}
    values = eval_on_grid(
        Expr.integral(Expr.symbol(RHO)), samples, Params(), integrate=np.cumsum
    )
    np.testing.assert_allclose(values, [1.0, 3.0, 6.0])


def test_constant_evaluates_to_full_array():
    values = eval_on_grid(Expr.constant(Fraction(3, 2)), {}, Params(), size=4)
    np.testing.assert_allclose(values, np.full(4, 1.5))


@settings(max_examples=60, deadline=None)
@given(expressions())
def test_normal_form_is_idempotent(expression: Expr):
    once = expression.normalize()
    assert once.normalize() == once
    assert equivalent(expression, once)


@settings(max_examples=40, deadline=None)
@given(expressions(), expressions())
def test_total_derivative_obeys_product_rule(left: Expr, right: Expr):
    assert dx(left * right) == dx(left) * right + left * dx(right)


@settings(max_examples=40, deadline=None)
@given(expressions(), expressions())
def test_total_derivative_is_linear(left: Expr, right: Expr):
    assert dx(left + right) == dx(left) + dx(right)
    assert dx_n(left, 2) == dx(dx(left))


@pytest.mark.parametrize("hbar, m", [(0.0, 1.0), (1.0, -1.0), (math.nan, 1.0)])
def test_params_reject_bad_constants(hbar, m):
    with pytest.raises(ConfigError) as caught:
        Params(hbar=hbar, m=m)
    assert caught.value.key == ("hbar" if hbar != 1.0 else "m")
