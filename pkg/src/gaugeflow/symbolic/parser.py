"""Recursive-descent parser for the potential DSL.

Grammar (whitespace insignificant, `^` binds tighter than unary minus):

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | factor
    factor := base ("^" integer)?
    base   := rational | ident | ident "(" expr ")" | "(" expr ")"

Potentials are Laurent polynomials, so function calls are rejected there.
Derived expressions additionally print `log(<symbol>)` and `int(<expr>)`,
which `parse_expression` accepts so that every canonical string re-parses.
"""

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from gaugeflow.symbolic.field_expr import Expr, FieldSymbol, phase, rho
from gaugeflow.utils.errors import (
    ExpressionSyntaxError,
    NonIntegerExponent,
    UnknownFunction,
)

TOKEN_PATTERN = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)
RHO_PATTERN = re.compile(r"rho(?:_(\d+))?")
PHASE_PATTERN = re.compile(r"S(?:_(\d+))?")
FUNCTIONS = ("log", "int")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    position = 0
    while position < len(source):
        if source[position:].strip() == "":
            break
        match = TOKEN_PATTERN.match(source, position)
        if match is None or match.end() == position:
            offset = position + len(source[position:]) - len(source[position:].lstrip())
            raise ExpressionSyntaxError(
                offset, ["number", "identifier", "operator"], source[offset]
            )
        kind = match.lastgroup or "op"
        tokens.append(Token(kind, match.group(kind), match.start(kind)))
        position = match.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


def resolve_field_symbol(name: str) -> Optional[FieldSymbol]:
    """Map `rho`, `rho_k`, `S`, `S_k` to field symbols; None for other names."""
    rho_match = RHO_PATTERN.fullmatch(name)
    if rho_match:
        return rho(int(rho_match.group(1) or 0))
    phase_match = PHASE_PATTERN.fullmatch(name)
    if phase_match:
        return phase(int(phase_match.group(1) or 0))
    return None


class _Parser:

    def __init__(self, source: str, allow_functions: bool):
        self._tokens = tokenize(source)
        self._index = 0
        self._allow_functions = allow_functions

    @property
    def _current(self) -> Token:
        return self._tokens[self._index]

    def _advance(self) -> Token:
        token = self._current
        self._index += 1
        return token

    def _at(self, text: str) -> bool:
        return self._current.kind == "op" and self._current.text == text

    def _expect(self, text: str) -> Token:
        if not self._at(text):
            raise ExpressionSyntaxError(
                self._current.position, [repr(text)], self._current.text
            )
        return self._advance()

    def parse(self) -> Expr:
        result = self._expr()
        if self._current.kind != "end":
            raise ExpressionSyntaxError(
                self._current.position,
                ["'+'", "'-'", "'*'", "'/'", "end of input"],
                self._current.text,
            )
        return result

    def _expr(self) -> Expr:
        result = self._term()
        while self._at("+") or self._at("-"):
            operator = self._advance().text
            right = self._term()
            result = result + right if operator == "+" else result - right
        return result

    def _term(self) -> Expr:
        result = self._unary()
        while self._at("*") or self._at("/"):
            operator = self._advance().text
            right = self._unary()
            result = result * right if operator == "*" else result / right
        return result

    def _unary(self) -> Expr:
        if self._at("-"):
            self._advance()
            return -self._unary()
        return self._factor()

    def _factor(self) -> Expr:
        base = self._base()
        if not self._at("^"):
            return base
        self._advance()
        return base ** self._exponent()

    def _exponent(self) -> int:
        sign = 1
        if self._at("-"):
            self._advance()
            sign = -1
        token = self._current
        if token.kind == "number" and "." not in token.text:
            self._advance()
            return sign * int(token.text)
        if token.kind == "end":
            raise ExpressionSyntaxError(token.position, ["integer exponent"])
        raise NonIntegerExponent(token.position, token.text)

    def _base(self) -> Expr:
        token = self._current
        if token.kind == "number":
            self._advance()
            return Expr.constant(Fraction(token.text))
        if token.kind == "ident":
            self._advance()
            if self._at("("):
                return self._call(token)
            return self._identifier(token)
        if self._at("("):
            self._advance()
            inner = self._expr()
            self._expect(")")
            return inner
        raise ExpressionSyntaxError(
            token.position, ["number", "identifier", "'('"], token.text
        )

    def _identifier(self, token: Token) -> Expr:
        symbol = resolve_field_symbol(token.text)
        if symbol is not None:
            return Expr.symbol(symbol)
        if token.text.startswith(("rho_", "S_")):
            raise ExpressionSyntaxError(
                token.position, ["rho_<digits>", "S_<digits>"], token.text
            )
        if token.text in FUNCTIONS:
            raise ExpressionSyntaxError(token.position + len(token.text), ["'('"])
        return Expr.parameter(token.text)

    def _call(self, token: Token) -> Expr:
        if not self._allow_functions or token.text not in FUNCTIONS:
            raise UnknownFunction(token.position, token.text)
        self._expect("(")
        argument_position = self._current.position
        argument = self._expr()
        self._expect(")")
        if token.text == "int":
            return Expr.integral(argument)
        symbols = argument.field_symbols()
        if (
            not argument.is_monomial
            or len(symbols) != 1
            or argument != Expr.symbol(next(iter(symbols)))
        ):
            raise ExpressionSyntaxError(argument_position, ["a single field symbol"])
        return Expr.log(next(iter(symbols)))


def parse_expression(text: str, allow_functions: bool = True) -> Expr:
    """Parse any canonical expression string, including log and int nodes."""
    return _Parser(text, allow_functions).parse()


def parse_potential(text: str) -> Expr:
    """Parse a potential U; function calls (log included) are rejected."""
    return _Parser(text, allow_functions=False).parse()
