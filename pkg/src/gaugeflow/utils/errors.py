"""Exception hierarchy shared by the symbolic, model and simulation layers.

Every error carries the CLI exit code it maps to: 2 for input problems
(parse, configuration, unsupported requests), 3 for runtime aborts.
"""

from typing import Any, Optional, Sequence

EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class GaugeFlowError(Exception):
    """Base class for all gaugeflow errors."""

    exit_code = EXIT_USAGE


# --- expressions -----------------------------------------------------------


class ExprError(GaugeFlowError):
    pass


class ExpressionSyntaxError(ExprError):

    def __init__(self, position: int, expected: Sequence[str], found: str = ""):
        self.position = position
        self.expected = tuple(expected)
        self.found = found
        shown = f" but found {found!r}" if found else ""
        super().__init__(
            f"syntax error at position {position}: expected "
            f"{' or '.join(self.expected)}{shown}"
        )


class NonIntegerExponent(ExprError):

    def __init__(self, position: int, exponent: str):
        self.position = position
        super().__init__(
            f"exponent at position {position} must be an integer literal, "
            f"got {exponent!r}"
        )


class UnknownFunction(ExprError):

    def __init__(self, position: int, name: str):
        self.position = position
        self.name = name
        super().__init__(f"unknown function {name!r} at position {position}")


class NonMonomialDivision(ExprError):
    pass


class IntegralNodePresent(ExprError):
    pass


class MaxOrderExceeded(ExprError):

    def __init__(self, symbol: str, limit: int):
        super().__init__(f"derivative order of {symbol} exceeds MAX_ORDER={limit}")


# --- evaluation ------------------------------------------------------------


class UnboundParameter(GaugeFlowError):

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"parameter {name!r} is not bound")


class MissingFieldSamples(GaugeFlowError):

    def __init__(self, symbol: str):
        self.symbol = symbol
        super().__init__(f"no grid samples for field symbol {symbol}")


class VacuumDensity(GaugeFlowError):

    exit_code = EXIT_RUNTIME

    def __init__(self, min_rho: float, floor: float):
        self.min_rho = min_rho
        self.floor = floor
        super().__init__(f"density minimum {min_rho:.3e} is below rho_floor={floor:.1e}")


# --- derivation and models -------------------------------------------------


class NonConservingPotential(GaugeFlowError):

    def __init__(self, source: str):
        super().__init__(
            f"potential depends on S itself (dU/dS_0 = {source}); "
            "the particle number is not conserved"
        )


class UnknownModel(GaugeFlowError):
    pass


class MissingParameter(GaugeFlowError):

    def __init__(self, name: str, model: str):
        self.name = name
        super().__init__(f"model {model!r} requires parameter {name!r}")


class RescaleOutOfRange(GaugeFlowError):
    pass


class PhaseWindingError(GaugeFlowError):
    pass


class NoClosedForm(GaugeFlowError):
    pass


class EIPDegenerate(GaugeFlowError):

    exit_code = EXIT_RUNTIME


# --- simulation ------------------------------------------------------------


class InvalidGrid(GaugeFlowError):
    pass


class StabilityBoundViolated(GaugeFlowError):

    exit_code = EXIT_RUNTIME

    def __init__(self, dt: float, bound: float):
        self.dt = dt
        self.bound = bound
        super().__init__(f"dt={dt:.3e} exceeds the stability bound {bound:.3e}")


class NaNDetected(GaugeFlowError):

    exit_code = EXIT_RUNTIME

    def __init__(self, t: float, last_state: Optional[Any] = None):
        self.t = t
        self.last_state = last_state
        super().__init__(f"non-finite values in the field at t={t:.6g}")


class InsufficientSnapshots(GaugeFlowError):
    pass


class GaugeInversionError(GaugeFlowError):

    exit_code = EXIT_RUNTIME


# --- configuration ---------------------------------------------------------


class ConfigError(GaugeFlowError):

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnknownSuite(GaugeFlowError):

    def __init__(self, name: str, known: Sequence[str]):
        self.name = name
        super().__init__(f"unknown verification suite {name!r}; choose one of {', '.join(known)}")
