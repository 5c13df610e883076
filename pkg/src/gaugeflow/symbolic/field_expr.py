"""Exact expressions over the hydrodynamic field symbols rho_n and S_n.

An `Expr` is kept in normal form: a sorted tuple of `Monomial`s, each an
exact rational coefficient times integer powers of parameters and field
symbols, optionally multiplied by log factors and opaque spatial integrals.
Structural equality of normal forms is expression equality.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np
import numpy.typing as npt

from gaugeflow.utils.errors import (
    ConfigError,
    ExprError,
    IntegralNodePresent,
    MaxOrderExceeded,
    MissingFieldSamples,
    NonMonomialDivision,
    UnboundParameter,
    VacuumDensity,
)

MAX_ORDER = 8
DEFAULT_RHO_FLOOR = 1e-8
RESERVED_PARAMETERS = ("hbar", "m")

FloatArray = npt.NDArray[np.float64]
Number = Union[int, Fraction]


class Base(Enum):
    RHO = "rho"
    S = "S"


@dataclass(frozen=True)
class FieldSymbol:
    """The n-th spatial derivative of rho or S."""

    base: Base
    order: int = 0

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ExprError(f"negative derivative order {self.order}")
        if self.order > MAX_ORDER:
            raise MaxOrderExceeded(f"{self.base.value}_{self.order}", MAX_ORDER)

    @property
    def sort_key(self) -> tuple[int, int]:
        return (0 if self.base is Base.RHO else 1, self.order)

    def shifted(self, steps: int = 1) -> FieldSymbol:
        if self.order + steps > MAX_ORDER:
            raise MaxOrderExceeded(
                f"{self.base.value}_{self.order + steps}", MAX_ORDER
            )
        return FieldSymbol(self.base, self.order + steps)

    def __str__(self) -> str:
        if self.order == 0:
            return self.base.value
        return f"{self.base.value}_{self.order}"


def rho(order: int = 0) -> FieldSymbol:
    return FieldSymbol(Base.RHO, order)


def phase(order: int = 0) -> FieldSymbol:
    return FieldSymbol(Base.S, order)


RHO = rho(0)


@dataclass(frozen=True)
class Monomial:
    coefficient: Fraction
    parameters: tuple[tuple[str, int], ...] = ()
    fields: tuple[tuple[FieldSymbol, int], ...] = ()
    logs: tuple[FieldSymbol, ...] = ()
    integrals: tuple[Expr, ...] = ()

    @property
    def key(self) -> tuple[object, ...]:
        """Non-coefficient part, ordered parameters first, then Rho < S by order."""
        return (
            self.parameters,
            tuple((symbol.sort_key, power) for symbol, power in self.fields),
            tuple(symbol.sort_key for symbol in self.logs),
            tuple(integrand.key for integrand in self.integrals),
        )

    def with_coefficient(self, coefficient: Fraction) -> Monomial:
        return Monomial(
            coefficient, self.parameters, self.fields, self.logs, self.integrals
        )

    def field_power(self, symbol: FieldSymbol) -> int:
        return dict(self.fields).get(symbol, 0)


def make_monomial(
    coefficient: Number,
    parameters: Optional[Mapping[str, int]] = None,
    fields: Optional[Mapping[FieldSymbol, int]] = None,
    logs: Iterable[FieldSymbol] = (),
    integrals: Iterable[Expr] = (),
) -> Monomial:
    """Build a monomial with zero powers dropped and factors sorted."""
    parameter_items = sorted(
        (name, power) for name, power in (parameters or {}).items() if power
    )
    field_items = sorted(
        ((symbol, power) for symbol, power in (fields or {}).items() if power),
        key=lambda item: item[0].sort_key,
    )
    return Monomial(
        Fraction(coefficient),
        tuple(parameter_items),
        tuple(field_items),
        tuple(sorted(logs, key=lambda symbol: symbol.sort_key)),
        tuple(sorted(integrals, key=lambda integrand: integrand.key)),
    )


def _multiply_monomials(left: Monomial, right: Monomial) -> Monomial:
    parameters: Counter[str] = Counter(dict(left.parameters))
    parameters.update(dict(right.parameters))
    fields: Counter[FieldSymbol] = Counter(dict(left.fields))
    fields.update(dict(right.fields))
    return make_monomial(
        left.coefficient * right.coefficient,
        parameters,
        fields,
        left.logs + right.logs,
        left.integrals + right.integrals,
    )


def _invert_monomial(monomial: Monomial) -> Monomial:
    if monomial.logs or monomial.integrals:
        raise NonMonomialDivision("cannot divide by log or integral factors")
    return make_monomial(
        1 / monomial.coefficient,
        {name: -power for name, power in monomial.parameters},
        {symbol: -power for symbol, power in monomial.fields},
    )


@dataclass(frozen=True)
class Expr:
    terms: tuple[Monomial, ...] = ()

    # --- construction ------------------------------------------------------

    @staticmethod
    def from_monomials(monomials: Iterable[Monomial]) -> Expr:
        """Collect like monomials, drop zeros and sort into normal form."""
        collected: dict[tuple[object, ...], Monomial] = {}
        for monomial in monomials:
            existing = collected.get(monomial.key)
            if existing is None:
                collected[monomial.key] = monomial
            else:
                collected[monomial.key] = existing.with_coefficient(
                    existing.coefficient + monomial.coefficient
                )
        kept = [m for m in collected.values() if m.coefficient != 0]
        return Expr(tuple(sorted(kept, key=lambda m: m.key)))

    @staticmethod
    def constant(value: Number) -> Expr:
        return Expr.from_monomials([make_monomial(value)])

    @staticmethod
    def symbol(symbol: FieldSymbol, power: int = 1) -> Expr:
        return Expr.from_monomials([make_monomial(1, fields={symbol: power})])

    @staticmethod
    def parameter(name: str, power: int = 1) -> Expr:
        return Expr.from_monomials([make_monomial(1, parameters={name: power})])

    @staticmethod
    def log(symbol: FieldSymbol) -> Expr:
        return Expr.from_monomials([make_monomial(1, logs=[symbol])])

    @staticmethod
    def integral(integrand: Expr) -> Expr:
        if integrand.is_zero:
            return Expr()
        return Expr.from_monomials([make_monomial(1, integrals=[integrand])])

    # --- queries -----------------------------------------------------------

    @property
    def key(self) -> tuple[object, ...]:
        return tuple((m.coefficient, m.key) for m in self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    @property
    def has_integral(self) -> bool:
        return any(m.integrals for m in self.terms)

    def parameter_names(self) -> set[str]:
        names: set[str] = set()
        for monomial in self.terms:
            names.update(name for name, _ in monomial.parameters)
            for integrand in monomial.integrals:
                names |= integrand.parameter_names()
        return names

    def field_symbols(self) -> set[FieldSymbol]:
        """All symbols the expression needs samples of, integrands included."""
        symbols: set[FieldSymbol] = set()
        for monomial in self.terms:
            symbols.update(symbol for symbol, _ in monomial.fields)
            symbols.update(monomial.logs)
            for integrand in monomial.integrals:
                symbols |= integrand.field_symbols()
        return symbols

    def divides_by_density(self) -> bool:
        """True when rho appears to a negative power or inside log."""
        for monomial in self.terms:
            if monomial.field_power(RHO) < 0 or RHO in monomial.logs:
                return True
            if any(integrand.divides_by_density() for integrand in monomial.integrals):
                return True
        return False

    def normalize(self) -> Expr:
        return Expr.from_monomials(self.terms)

    # --- arithmetic --------------------------------------------------------

    @staticmethod
    def _coerce(other: object) -> Optional[Expr]:
        if isinstance(other, Expr):
            return other
        if isinstance(other, (int, Fraction)):
            return Expr.constant(other)
        return None

    def __add__(self, other: object) -> Expr:
        """Sum in normal form; ints and Fractions are coerced to constants."""
        other_expr = Expr._coerce(other)
        if other_expr is None:
            return NotImplemented
        return Expr.from_monomials(self.terms + other_expr.terms)

    __radd__ = __add__

    def __neg__(self) -> Expr:
        return Expr(tuple(m.with_coefficient(-m.coefficient) for m in self.terms))

    def __sub__(self, other: object) -> Expr:
        other_expr = Expr._coerce(other)
        if other_expr is None:
            return NotImplemented
        return self + (-other_expr)

    def __rsub__(self, other: object) -> Expr:
        return (-self) + other

    def __mul__(self, other: object) -> Expr:
        """Distributed product, collected into normal form."""
        other_expr = Expr._coerce(other)
        if other_expr is None:
            return NotImplemented
        return Expr.from_monomials(
            _multiply_monomials(left, right)
            for left in self.terms
            for right in other_expr.terms
        )

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> Expr:
        """Division by a single monomial; anything else raises NonMonomialDivision."""
        other_expr = Expr._coerce(other)
        if other_expr is None:
            return NotImplemented
        if other_expr.is_zero:
            raise ExprError("division by zero")
        if not other_expr.is_monomial:
            raise NonMonomialDivision(
                f"cannot divide by the non-monomial expression {other_expr}"
            )
        inverse = Expr((_invert_monomial(other_expr.terms[0]),))
        return self * inverse

    def __rtruediv__(self, other: object) -> Expr:
        other_expr = Expr._coerce(other)
        if other_expr is None:
            return NotImplemented
        return other_expr / self

    def __pow__(self, exponent: int) -> Expr:
        """Integer power; negative powers go through division."""
        if exponent < 0:
            return Expr.constant(1) / (self**-exponent)
        result = Expr.constant(1)
        for _ in range(exponent):
            result = result * self
        return result

    def __str__(self) -> str:
        return format_expr(self)

    def __repr__(self) -> str:
        return f"Expr({format_expr(self)!r})"


# --- canonical printing ------------------------------------------------------


def _format_power(name: str, power: int) -> str:
    return name if power == 1 else f"{name}^{power}"


def _format_monomial(monomial: Monomial) -> str:
    numerator: list[str] = []
    denominator: list[str] = []
    for name, power in monomial.parameters:
        target = numerator if power > 0 else denominator
        target.append(_format_power(name, abs(power)))
    for symbol, power in monomial.fields:
        target = numerator if power > 0 else denominator
        target.append(_format_power(str(symbol), abs(power)))
    numerator.extend(f"log({symbol})" for symbol in monomial.logs)
    numerator.extend(f"int({format_expr(i)})" for i in monomial.integrals)

    magnitude = abs(monomial.coefficient)
    if magnitude.numerator != 1 or not numerator:
        numerator.insert(0, str(magnitude.numerator))
    if magnitude.denominator != 1:
        denominator.insert(0, str(magnitude.denominator))

    text = "*".join(numerator)
    if len(denominator) == 1:
        text += f"/{denominator[0]}"
    elif denominator:
        text += f"/({'*'.join(denominator)})"
    return text


def format_expr(expr: Expr) -> str:
    """Canonical DSL text; re-parses to the same normal form."""
    if expr.is_zero:
        return "0"
    pieces: list[str] = []
    for index, monomial in enumerate(expr.terms):
        body = _format_monomial(monomial)
        negative = monomial.coefficient < 0
        if index == 0:
            pieces.append(f"-{body}" if negative else body)
        else:
            pieces.append(f" - {body}" if negative else f" + {body}")
    return "".join(pieces)


# --- calculus ----------------------------------------------------------------


def partial(expr: Expr, symbol: FieldSymbol) -> Expr:
    """Partial derivative with respect to one symbol, all others held fixed."""
    if expr.has_integral:
        raise IntegralNodePresent("partial derivatives of integral nodes are undefined")
    result: list[Monomial] = []
    for monomial in expr.terms:
        fields = dict(monomial.fields)
        power = fields.get(symbol, 0)
        if power:
            fields[symbol] = power - 1
            result.append(
                make_monomial(
                    monomial.coefficient * power,
                    dict(monomial.parameters),
                    fields,
                    monomial.logs,
                )
            )
        for index, log_symbol in enumerate(monomial.logs):
            if log_symbol != symbol:
                continue
            remaining = monomial.logs[:index] + monomial.logs[index + 1 :]
            inverse_fields = dict(monomial.fields)
            inverse_fields[symbol] = inverse_fields.get(symbol, 0) - 1
            result.append(
                make_monomial(
                    monomial.coefficient,
                    dict(monomial.parameters),
                    inverse_fields,
                    remaining,
                )
            )
    return Expr.from_monomials(result)


def _dx_monomial(monomial: Monomial) -> list[Monomial]:
    parameters = dict(monomial.parameters)
    result: list[Monomial] = []
    for symbol, power in monomial.fields:
        fields = dict(monomial.fields)
        fields[symbol] = power - 1
        next_symbol = symbol.shifted()
        fields[next_symbol] = fields.get(next_symbol, 0) + 1
        result.append(
            make_monomial(
                monomial.coefficient * power,
                parameters,
                fields,
                monomial.logs,
                monomial.integrals,
            )
        )
    for index, symbol in enumerate(monomial.logs):
        fields = dict(monomial.fields)
        fields[symbol] = fields.get(symbol, 0) - 1
        next_symbol = symbol.shifted()
        fields[next_symbol] = fields.get(next_symbol, 0) + 1
        result.append(
            make_monomial(
                monomial.coefficient,
                parameters,
                fields,
                monomial.logs[:index] + monomial.logs[index + 1 :],
                monomial.integrals,
            )
        )
    for index, integrand in enumerate(monomial.integrals):
        rest = make_monomial(
            monomial.coefficient,
            parameters,
            dict(monomial.fields),
            monomial.logs,
            monomial.integrals[:index] + monomial.integrals[index + 1 :],
        )
        result.extend((Expr((rest,)) * integrand).terms)
    return result


def dx(expr: Expr) -> Expr:
    """Total spatial derivative: each a_n contributes a_{n+1} * d(expr)/d(a_n)."""
    return Expr.from_monomials(
        term for monomial in expr.terms for term in _dx_monomial(monomial)
    )


def dx_n(expr: Expr, times: int) -> Expr:
    for _ in range(times):
        expr = dx(expr)
    return expr


def equivalent(left: Expr, right: Expr) -> bool:
    return left.normalize() == right.normalize()


def max_order(expr: Expr) -> tuple[int, int]:
    """Highest rho and S derivative orders occurring in the expression."""
    rho_order = 0
    s_order = 0
    for symbol in expr.field_symbols():
        if symbol.base is Base.RHO:
            rho_order = max(rho_order, symbol.order)
        else:
            s_order = max(s_order, symbol.order)
    return rho_order, s_order


# --- parameters and grid evaluation -----------------------------------------


@dataclass(frozen=True)
class Params:
    """Physical constants hbar, m and named model parameters."""

    hbar: float = 1.0
    m: float = 1.0
    bindings: tuple[tuple[str, float], ...] = field(default=())

    def __post_init__(self) -> None:
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise ConfigError("hbar", f"must be positive and finite, got {self.hbar}")
        if not (math.isfinite(self.m) and self.m > 0):
            raise ConfigError("m", f"must be positive and finite, got {self.m}")
        names = [name for name, _ in self.bindings]
        clash = set(names) & set(RESERVED_PARAMETERS)
        if clash:
            raise ConfigError(", ".join(sorted(clash)), "reserved parameter name")
        object.__setattr__(
            self,
            "bindings",
            tuple(sorted((name, float(value)) for name, value in self.bindings)),
        )

    @classmethod
    def of(cls, hbar: float = 1.0, m: float = 1.0, **values: float) -> Params:
        return cls(hbar=hbar, m=m, bindings=tuple(values.items()))

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> Params:
        """Build from a flat mapping that may include hbar and m."""
        named = dict(values)
        hbar = float(named.pop("hbar", 1.0))
        mass = float(named.pop("m", 1.0))
        return cls(hbar=hbar, m=mass, bindings=tuple(named.items()))

    def value(self, name: str) -> float:
        if name == "hbar":
            return self.hbar
        if name == "m":
            return self.m
        for bound_name, bound_value in self.bindings:
            if bound_name == name:
                return bound_value
        raise UnboundParameter(name)

    def has(self, name: str) -> bool:
        return name in RESERVED_PARAMETERS or any(n == name for n, _ in self.bindings)

    def as_dict(self) -> dict[str, float]:
        return {"hbar": self.hbar, "m": self.m, **dict(self.bindings)}


FieldSamples = Mapping[FieldSymbol, FloatArray]


@dataclass(frozen=True)
class _CompiledTerm:
    coefficient: float
    fields: tuple[tuple[FieldSymbol, int], ...]
    logs: tuple[FieldSymbol, ...]
    integrals: tuple[Expr, ...]


@lru_cache(maxsize=512)
def _compile(expr: Expr, params: Params) -> tuple[_CompiledTerm, ...]:
    compiled = []
    for monomial in expr.terms:
        coefficient = float(monomial.coefficient)
        for name, power in monomial.parameters:
            coefficient *= params.value(name) ** power
        compiled.append(
            _CompiledTerm(coefficient, monomial.fields, monomial.logs, monomial.integrals)
        )
    return tuple(compiled)


def _sample_length(samples: FieldSamples, size: Optional[int]) -> int:
    if size is not None:
        return size
    for values in samples.values():
        return len(values)
    raise MissingFieldSamples("<any>")


def eval_on_grid(
    expr: Expr,
    samples: FieldSamples,
    params: Params,
    integrate: Optional[Callable[[FloatArray], FloatArray]] = None,
    rho_floor: float = DEFAULT_RHO_FLOOR,
    size: Optional[int] = None,
) -> FloatArray:
    """Pointwise evaluation of an expression on field samples.

    Integral nodes are evaluated with `integrate`, the caller's cumulative
    quadrature; without one they raise IntegralNodePresent.
    """
    length = _sample_length(samples, size)
    if expr.divides_by_density() and RHO in samples:
        minimum = float(np.min(samples[RHO]))
        if minimum < rho_floor:
            raise VacuumDensity(minimum, rho_floor)

    result = np.zeros(length)
    for term in _compile(expr, params):
        value = np.full(length, term.coefficient)
        for symbol, power in term.fields:
            if symbol not in samples:
                raise MissingFieldSamples(str(symbol))
            value = value * samples[symbol] ** power
        for symbol in term.logs:
            if symbol not in samples:
                raise MissingFieldSamples(str(symbol))
            value = value * np.log(samples[symbol])
        for integrand in term.integrals:
            if integrate is None:
                raise IntegralNodePresent("no quadrature supplied for integral node")
            inner = eval_on_grid(integrand, samples, params, integrate, rho_floor, length)
            value = value * integrate(inner)
        result = result + value
    return result
