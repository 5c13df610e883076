"""Verification suites behind `gaugeflow verify`.

Each suite returns `CheckResult` rows: a measured value, the tolerance it is
held to and the direction of the comparison. The heavier suites run full
simulations at the default grid (L=40, N=512, dt=1e-4) and take minutes.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np
import numpy.typing as npt
import pandas as pd

from gaugeflow.models.catalog import (
    BUILTIN_MODELS,
    RescaleDirection,
    builtin,
    dg_rescale_phase,
    rescale_factor,
)
from gaugeflow.simulator.config import SimConfig, validate_config
from gaugeflow.simulator.gauge_simulator import GaugeSimulator
from gaugeflow.simulator.services.diagnostics import (
    continuity_residual,
    drift_current,
    eq19_residual,
    gauge_density_error,
    norm,
    phase_agreement,
)
from gaugeflow.simulator.services.grid import ComplexArray, Grid, GridState
from gaugeflow.simulator.services.initial_data import free_gaussian
from gaugeflow.simulator.services.integrator import step_count
from gaugeflow.symbolic.field_expr import (
    RHO,
    Base,
    Expr,
    FieldSymbol,
    FloatArray,
    Params,
    dx,
    eval_on_grid,
    max_order,
    partial,
    phase,
    rho,
)
from gaugeflow.symbolic.parser import parse_expression
from gaugeflow.symbolic.variational import (
    DENSITY,
    HBAR,
    MASS,
    PHASE_GRADIENT,
    derive_system,
    functional_derivative,
)
from gaugeflow.utils.errors import UnknownSuite
from gaugeflow.utils.logger import get_logger

logger = get_logger(__name__)

SUITES = ("symbolic", "conservation", "gauge", "linearize", "convergence")
ALL = "all"

MODEL_PARAMETERS: dict[str, dict[str, float]] = {
    "free": {},
    "dg": {"D": 0.05},
    "jackiw": {"lambda": 0.3},
    "eip": {"kappa": 0.2},
}

STRUCTURAL_SAMPLES = 100
ORACLE_SAMPLES = 20
ORACLE_STEPS = (1e-3, 1e-4, 1e-5, 1e-6)
LINEARIZE_RATIO = 0.5
LOW_ORDER_TERMS = ("rho^2", "rho_1*S_1", "rho*S_1^2", "rho^2*S_1", "rho_1^2", "S_1^2")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    check: str
    measured: float
    tolerance: float
    comparison: str = "<="

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.measured):
            return False
        if self.comparison == ">=":
            return self.measured >= self.tolerance
        return self.measured <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "check": self.check,
            "measured": self.measured,
            "tolerance": f"{self.comparison} {self.tolerance:.3g}",
            "status": "PASS" if self.passed else "FAIL",
        }


def results_frame(results: Sequence[CheckResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [result.to_dict() for result in results],
        columns=["suite", "check", "measured", "tolerance", "status"],
    )


# --- random potentials ------------------------------------------------------


def random_potential(
    rng: np.random.Generator,
    max_order: int = 3,
    max_degree: int = 3,
    max_terms: int = 3,
) -> Expr:
    """A random N-conserving Laurent potential in rho_n and S_n (n >= 1)."""
    symbols = [rho(n) for n in range(max_order + 1)]
    symbols += [phase(n) for n in range(1, max_order + 1)]
    U = Expr()
    while U.is_zero:
        for _ in range(int(rng.integers(1, max_terms + 1))):
            numerator = int(rng.choice([-3, -2, -1, 1, 2, 3]))
            term = Expr.constant(Fraction(numerator, int(rng.integers(1, 4))))
            for _ in range(int(rng.integers(1, max_degree + 1))):
                symbol = symbols[int(rng.integers(len(symbols)))]
                power = int(rng.choice([-1, 1])) if symbol == RHO else 1
                term = term * Expr.symbol(symbol, power)
            U = U + term
    return U


def structural_mismatches(U: Expr) -> list[str]:
    """Names of the exact identities the derived system of U breaks."""
    system = derive_system(U)
    variation_s = functional_derivative(U, Base.S)
    broken = []
    if not system.conserves_N or not partial(U, phase(0)).is_zero:
        broken.append("conservation")
    if variation_s != -dx(system.G * DENSITY):
        broken.append("gauge flux")
    if system.calW * DENSITY * 2 / HBAR != variation_s:
        broken.append("calW")
    if system.j_psi - PHASE_GRADIENT * DENSITY / MASS != system.G * DENSITY:
        broken.append("current")
    return broken


def _low_order_potential(rng: np.random.Generator) -> Expr:
    """Two distinct first-order conserving terms with small positive coefficients.

    At least one term depends on S_1, so the gauge generator is never zero.
    """
    gauged = [index for index, term in enumerate(LOW_ORDER_TERMS) if "S_1" in term]
    first = gauged[int(rng.integers(len(gauged)))]
    others = [index for index in range(len(LOW_ORDER_TERMS)) if index != first]
    chosen = sorted((first, others[int(rng.integers(len(others)))]))
    U = Expr()
    for index in chosen:
        U = U + parse_expression(LOW_ORDER_TERMS[index]) * Fraction(int(rng.integers(1, 4)), 20)
    return U


# --- numeric helpers --------------------------------------------------------


def _config(
    model: str,
    parameters: Mapping[str, float],
    *,
    T: float,
    dt: float = 1e-4,
    N: int = 512,
    background: float = 0.5,
    momentum: float = 0.0,
    potential: Optional[str] = None,
) -> SimConfig:
    return validate_config(
        {
            "model": {"name": model, "potential": potential, "parameters": dict(parameters)},
            "grid": {"L": 40.0, "N": N},
            "time": {"dt": dt, "T": T},
            "initial": {"background": background, "momentum": momentum},
        }
    )


def _l2_distance(grid: Grid, left: ComplexArray, right: ComplexArray) -> float:
    return math.sqrt(grid.integrate(np.abs(left - right) ** 2))


def _gaussian_state(grid: Grid, params: Params, t: float = 0.0, **shape: float) -> GridState:
    return GridState(t=t, psi=free_gaussian(grid, t, params, **shape).astype(np.complex128))


def _smooth_samples(
    grid: Grid, density: FloatArray, phase_values: FloatArray, order: int
) -> dict[FieldSymbol, FloatArray]:
    samples = {rho(0): density}
    for n in range(1, order + 1):
        samples[rho(n)] = np.real(grid.spectral_deriv(density, n))
        samples[phase(n)] = np.real(grid.spectral_deriv(phase_values, n))
    return samples


def density_variation_error(U: Expr, grid: Grid, params: Params) -> float:
    """Relative gap between a central difference quotient of int U and int W eta.

    The smallest gap over the perturbation sizes in ORACLE_STEPS is returned.
    """
    x = grid.x
    density = 2.0 + np.cos(x) + 0.3 * np.sin(2.0 * x)
    phase_values = np.sin(x) + 0.5 * np.cos(3.0 * x)
    eta = np.cos(2.0 * x) + 0.5 * np.sin(x)

    W = functional_derivative(U, Base.RHO)
    order = max(max(max_order(U)), max(max_order(W)), 1)
    samples = _smooth_samples(grid, density, phase_values, order)
    W_values = eval_on_grid(W, samples, params, size=grid.N)
    expected = grid.integrate(W_values * eta)
    scale = grid.integrate(np.abs(W_values * eta))

    def action(step: float) -> float:
        shifted = _smooth_samples(grid, density + step * eta, phase_values, order)
        return grid.integrate(eval_on_grid(U, shifted, params, size=grid.N))

    errors = []
    for step in ORACLE_STEPS:
        gap = abs((action(step) - action(-step)) / (2.0 * step) - expected)
        errors.append(gap / scale if scale > 0.0 else gap)
    return min(errors)


def spectral_oracle_error(grid: Grid) -> float:
    """Spectral second derivative of exp(cos x) against Richardson-extrapolated differences."""
    x = grid.x

    def central(step: float) -> npt.NDArray[np.float64]:
        shifted = np.exp(np.cos(x + step)) + np.exp(np.cos(x - step))
        return (shifted - 2.0 * np.exp(np.cos(x))) / step**2

    step = 2e-3
    extrapolated = (4.0 * central(step / 2.0) - central(step)) / 3.0
    spectral = np.real(grid.spectral_deriv(np.exp(np.cos(x)), 2))
    return float(np.max(np.abs(spectral - extrapolated)))


def _window(center: int, half_width: int) -> tuple[int, int, int]:
    return center - half_width, center, center + half_width


def residual_order(simulator: GaugeSimulator, center: int = 1000, half_width: int = 100) -> float:
    """log2 of the transformed-equation residual ratio between spacings h and h/2."""
    half = half_width // 2
    wanted = set(_window(center, half_width)) | set(_window(center, half))
    states = simulator.states_at(simulator.psi_rhs, simulator.initial_state(), wanted)
    params = simulator.config.params()
    options = simulator.config.field_options()
    residuals = []
    for spacing in (half_width, half):
        psi_window = [states[step] for step in _window(center, spacing)]
        phi_window = [simulator.to_phi(state) for state in psi_window]
        series = eq19_residual(
            simulator.grid, phi_window, simulator.system, params, options, trajectory_psi=psi_window
        )
        residuals.append(float(series.iloc[0]))
    logger.debug("Residuals at spacings h and h/2: %s", residuals)
    return math.log2(residuals[0] / residuals[1])


# --- suites -----------------------------------------------------------------


def symbolic_suite(rng: np.random.Generator) -> list[CheckResult]:
    results = []
    for name in BUILTIN_MODELS:
        model = builtin(name, Params.from_mapping(MODEL_PARAMETERS[name]))
        for outcome in model.check():
            mismatch = 0.0 if outcome.passed else 1.0
            results.append(CheckResult("symbolic", f"{name} {outcome.key}", mismatch, 0.0))

    failures = 0
    for index in range(STRUCTURAL_SAMPLES):
        U = random_potential(rng)
        broken = structural_mismatches(U)
        if broken:
            failures += 1
            logger.warning("Random potential %d (%s) breaks %s", index, U, broken)
    results.append(CheckResult("symbolic", "random structural identities (failures)", failures, 0))

    grid = Grid(L=2.0 * math.pi, N=64)
    worst = max(
        density_variation_error(random_potential(rng, max_order=2), grid, Params())
        for _ in range(ORACLE_SAMPLES)
    )
    results.append(CheckResult("symbolic", "W vs perturbation quotient (relative)", worst, 1e-6))
    return results


def conservation_suite(rng: np.random.Generator) -> list[CheckResult]:
    cases = [
        ("dg", {"D": 0.05}, 1.0),
        ("jackiw", {"lambda": 0.3}, 1.0),
        ("eip", {"kappa": 0.2}, 0.0),
        ("eip", {"kappa": -0.2}, 0.0),
    ]
    results = []
    for name, parameters, momentum in cases:
        simulator = GaugeSimulator(_config(name, parameters, T=1.0, momentum=momentum))
        timing = simulator.config.time
        initial = simulator.initial_state()
        final = simulator.run(simulator.psi_rhs, initial, step_count(timing.T, timing.dt))
        start = norm(simulator.grid, initial)
        drift = abs(norm(simulator.grid, final) - start) / start
        label = ", ".join(f"{key}={value:g}" for key, value in parameters.items())
        results.append(CheckResult("conservation", f"{name} ({label}) norm drift", drift, 1e-10))
    return results


def gauge_suite(rng: np.random.Generator) -> list[CheckResult]:
    results = []

    for name in ("dg", "jackiw", "eip"):
        momentum = 0.0 if name == "eip" else 1.0
        simulator = GaugeSimulator(_config(name, MODEL_PARAMETERS[name], T=0.5, momentum=momentum))
        steps = step_count(simulator.config.time.T, simulator.config.time.dt)
        psi0 = simulator.initial_state()
        psi_final = simulator.run(simulator.psi_rhs, psi0, steps)
        phi_final = simulator.run(simulator.phi_rhs, simulator.to_phi(psi0), steps)
        mapped = simulator.to_phi(psi_final)
        results.append(
            CheckResult(
                "gauge",
                f"{name} |phi|^2 vs |T[psi]|^2",
                gauge_density_error(phi_final, mapped),
                simulator.config.tolerances.gauge_density,
            )
        )
        results.append(
            CheckResult(
                "gauge",
                f"{name} phase agreement",
                phase_agreement(simulator.grid, phi_final, mapped),
                simulator.config.tolerances.phase,
            )
        )

    # dg: phi obeys the drift-only continuity equation, psi needs its full current
    simulator = GaugeSimulator(_config("dg", MODEL_PARAMETERS["dg"], T=0.5, momentum=1.0))
    centers = (1000, 2500, 4000)
    wanted = [step for center in centers for step in _window(center, 1)]
    psi0 = simulator.initial_state()
    phi_states = simulator.states_at(simulator.phi_rhs, simulator.to_phi(psi0), wanted)
    psi_states = simulator.states_at(simulator.psi_rhs, psi0, wanted)
    params = simulator.config.params()
    options = simulator.config.field_options()
    j_psi = simulator.system.j_psi
    drift, mismatched, original = [], [], []
    for center in centers:
        phi_window = [phi_states[step] for step in _window(center, 1)]
        psi_window = [psi_states[step] for step in _window(center, 1)]
        for target, trajectory, current in (
            (drift, phi_window, drift_current()),
            (mismatched, phi_window, j_psi),
            (original, psi_window, j_psi),
        ):
            series = continuity_residual(simulator.grid, trajectory, current, params, options)
            target.append(float(series.iloc[0]))
    results.append(CheckResult("gauge", "dg phi continuity, drift current", max(drift), 1e-6))
    results.append(CheckResult("gauge", "dg psi continuity, j_psi", max(original), 1e-6))
    results.append(
        CheckResult(
            "gauge",
            "dg phi continuity, j_psi / drift current",
            max(mismatched) / max(max(drift), 1e-300),
            1e2,
            ">=",
        )
    )

    configs = [
        (
            name,
            _config(
                name, MODEL_PARAMETERS[name], T=0.2, momentum=0.0 if name == "eip" else 1.0
            ),
        )
        for name in ("dg", "jackiw", "eip")
    ]
    potential = str(_low_order_potential(rng))
    custom = _config("custom", {}, T=0.2, momentum=1.0, potential=potential)
    configs.append((f"custom U = {potential}", custom))
    for label, config in configs:
        order = residual_order(GaugeSimulator(config))
        results.append(
            CheckResult("gauge", f"{label} phi-equation residual order", order, 1.8, ">=")
        )
    return results


def linearization_errors(simulator: GaugeSimulator) -> tuple[float, float, float]:
    """Density and phase gaps between a rescaled dg phi run and the free packet at alpha*T.

    The third value is the round-trip error of the phase rescaling at the final time.
    """
    config = simulator.config
    grid, params = simulator.grid, config.params()
    options = config.field_options()
    D = params.value("D")
    alpha = rescale_factor(D, params)

    chi0 = _gaussian_state(grid, params, background=0.5)
    phi0 = dg_rescale_phase(grid, chi0, D, RescaleDirection.FROM_LINEAR, params, options)
    phi_final = simulator.run(simulator.phi_rhs, phi0, step_count(config.time.T, config.time.dt))
    chi_final = dg_rescale_phase(grid, phi_final, D, RescaleDirection.TO_LINEAR, params, options)
    exact = free_gaussian(grid, alpha * config.time.T, params, background=0.5)
    density_error = float(np.max(np.abs(chi_final.rho - np.abs(exact) ** 2)))
    phase_error = phase_agreement(grid, chi_final, GridState(t=chi_final.t, psi=exact))

    back = dg_rescale_phase(grid, chi_final, D, RescaleDirection.FROM_LINEAR, params, options)
    round_trip = float(np.max(np.abs(back.psi - phi_final.psi)))
    return density_error, phase_error, round_trip


def linearize_suite(rng: np.random.Generator) -> list[CheckResult]:
    """dg at 2mD/hbar = 0.5 maps onto the free equation run for alpha*T."""
    simulator = GaugeSimulator(_config("dg", {"D": LINEARIZE_RATIO / 2.0}, T=0.5))
    density_error, phase_error, round_trip = linearization_errors(simulator)
    return [
        CheckResult("linearize", "dg density vs free solution at alpha*T", density_error, 1e-6),
        CheckResult("linearize", "dg phase vs free solution at alpha*T", phase_error, 1e-5),
        CheckResult("linearize", "phase rescaling round trip", round_trip, 1e-10),
    ]


def convergence_suite(rng: np.random.Generator) -> list[CheckResult]:
    results = []

    config = _config("free", {}, T=1.0, background=0.0, momentum=1.0)
    simulator = GaugeSimulator(config)
    params = config.params()
    initial = _gaussian_state(simulator.grid, params, momentum=1.0)
    final = simulator.run(simulator.psi_rhs, initial, step_count(config.time.T, config.time.dt))
    exact = free_gaussian(simulator.grid, config.time.T, params, momentum=1.0)
    error = _l2_distance(simulator.grid, final.psi, exact)
    results.append(CheckResult("convergence", "free Gaussian L2 error at T=1", error, 1e-8))

    horizon = 0.64
    finals = []
    for dt in (0.016, 0.008, 0.004):
        simulator = GaugeSimulator(_config("free", {}, T=horizon, dt=dt, N=128, background=0.0))
        initial = _gaussian_state(simulator.grid, params, momentum=2.0)
        finals.append(simulator.run(simulator.psi_rhs, initial, step_count(horizon, dt)).psi)
    grid = Grid(L=40.0, N=128)
    ratio = _l2_distance(grid, finals[0], finals[1]) / _l2_distance(grid, finals[1], finals[2])
    results.append(
        CheckResult("convergence", "RK4 self-convergence order", math.log2(ratio), 3.8, ">=")
    )

    oracle = spectral_oracle_error(Grid(L=2.0 * math.pi, N=64))
    results.append(
        CheckResult("convergence", "spectral d2/dx2 vs finite differences", oracle, 1e-8)
    )
    return results


SUITE_RUNNERS: dict[str, Callable[[np.random.Generator], list[CheckResult]]] = {
    "symbolic": symbolic_suite,
    "conservation": conservation_suite,
    "gauge": gauge_suite,
    "linearize": linearize_suite,
    "convergence": convergence_suite,
}


def resolve_suites(name: str) -> tuple[str, ...]:
    if name == ALL:
        return SUITES
    if name not in SUITE_RUNNERS:
        raise UnknownSuite(name, SUITES + (ALL,))
    return (name,)


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    if name not in SUITE_RUNNERS:
        raise UnknownSuite(name, SUITES)
    logger.info("Running verification suite %s (seed %d)", name, seed)
    rng = np.random.default_rng([seed, SUITES.index(name)])
    results = SUITE_RUNNERS[name](rng)
    failed = sum(not result.passed for result in results)
    logger.info("Suite %s: %d checks, %d failed", name, len(results), failed)
    return results


def run_suites(name: str, seed: int = 0, workers: int = 1) -> list[CheckResult]:
    """Run one suite or all of them; results keep the suite order."""
    names = resolve_suites(name)
    if workers <= 1 or len(names) == 1:
        return [result for suite in names for result in run_suite(suite, seed)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        batches = list(executor.map(lambda suite: run_suite(suite, seed), names))
    return [result for batch in batches for result in batch]
