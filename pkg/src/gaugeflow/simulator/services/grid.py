"""Periodic grid, wavefunction states and pseudospectral field operations."""

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np
import numpy.typing as npt

from gaugeflow.symbolic.field_expr import (
    DEFAULT_RHO_FLOOR,
    MAX_ORDER,
    FieldSymbol,
    FloatArray,
    phase,
    rho,
)
from gaugeflow.utils.errors import InvalidGrid, VacuumDensity

ComplexArray = npt.NDArray[np.complex128]

MIN_POINTS = 16
REGULARIZATION_EPSILON = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid x_j = j L / N on [0, L)."""

    L: float = 40.0
    N: int = 512

    def __post_init__(self) -> None:
        if not (math.isfinite(self.L) and self.L > 0):
            raise InvalidGrid(f"domain length must be positive, got L={self.L}")
        if self.N < MIN_POINTS or self.N & (self.N - 1):
            raise InvalidGrid(
                f"N must be a power of two >= {MIN_POINTS}, got N={self.N}"
            )

    @property
    def dx(self) -> float:
        """Grid spacing L / N."""
        return self.L / self.N

    @cached_property
    def x(self) -> FloatArray:
        """Grid points."""
        return np.arange(self.N) * self.dx

    @cached_property
    def k(self) -> FloatArray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    def integrate(self, values: FloatArray) -> float:
        """Rectangle rule, spectrally accurate for periodic data."""
        return float(np.sum(values) * self.dx)

    def spectral_deriv(
        self, values: npt.NDArray[np.generic], order: int, twist: float = 0.0
    ) -> npt.NDArray[np.generic]:
        """n-th derivative by Fourier multiplication with (i(k + twist))^n.

        The Nyquist mode is dropped for every order >= 1; rho_n and S_n share
        one band. Real input with zero twist gives real output.
        """
        if order < 0 or order > MAX_ORDER:
            raise ValueError(f"derivative order must lie in [0, {MAX_ORDER}]")
        if order == 0:
            return values
        multiplier = (1j * (self.k + twist)) ** order
        multiplier[self.N // 2] = 0.0
        derivative = np.fft.ifft(multiplier * np.fft.fft(values))
        if np.isrealobj(values) and twist == 0.0:
            return np.real(derivative)
        return derivative

    def cumint(self, values: FloatArray) -> tuple[FloatArray, float]:
        """Mean-zero antiderivative of (f - mean f), and the removed mean."""
        spectrum = np.fft.fft(values)
        mean = float(np.real(spectrum[0])) / self.N
        wavenumbers = self.k.copy()
        wavenumbers[0] = 1.0
        antiderivative = spectrum / (1j * wavenumbers)
        antiderivative[0] = 0.0
        antiderivative[self.N // 2] = 0.0
        return np.real(np.fft.ifft(antiderivative)), mean

    def primitive(self, values: FloatArray) -> FloatArray:
        """Quadrature handed to expression evaluation for integral nodes."""
        antiderivative, _ = self.cumint(values)
        return antiderivative


@dataclass(frozen=True, eq=False)
class GridState:
    """Samples of a field on the grid; the physical field is psi * exp(i twist x)."""

    t: float
    psi: ComplexArray
    twist: float = 0.0

    @property
    def rho(self) -> FloatArray:
        """|psi|^2; the Bloch factor has unit modulus."""
        return np.abs(self.psi) ** 2

    def with_psi(self, psi: ComplexArray, t: Optional[float] = None) -> "GridState":
        """Copy with new samples and, optionally, a new time; the twist is kept."""
        return replace(self, psi=psi, t=self.t if t is None else t)

    def is_finite(self) -> bool:
        """No NaN or infinity in the samples."""
        return bool(np.all(np.isfinite(self.psi)))


@dataclass(frozen=True)
class FieldOptions:
    """How densities are guarded when they enter 1/rho or log rho."""

    hbar: float = 1.0
    rho_floor: float = DEFAULT_RHO_FLOOR
    regularize: bool = False

    @property
    def effective_floor(self) -> float:
        return 0.0 if self.regularize else self.rho_floor


DEFAULT_FIELD_OPTIONS = FieldOptions()


def density(state: GridState, options: FieldOptions) -> FloatArray:
    """rho, shifted by REGULARIZATION_EPSILON when regularisation is on."""
    values = state.rho
    if options.regularize:
        return values + REGULARIZATION_EPSILON
    return values


def phase_gradient(grid: Grid, state: GridState, options: FieldOptions) -> FloatArray:
    """S_1 = hbar Im(psi* d_x psi) / rho; NaN where rho is below the floor."""
    values = density(state, options)
    current = np.imag(np.conj(state.psi) * grid.spectral_deriv(state.psi, 1, state.twist))
    with np.errstate(divide="ignore", invalid="ignore"):
        gradient = options.hbar * current / values
    return np.where(values >= options.effective_floor, gradient, np.nan)


def hydro_fields(
    grid: Grid,
    state: GridState,
    max_rho_order: int,
    max_s_order: int,
    options: FieldOptions = DEFAULT_FIELD_OPTIONS,
) -> dict[FieldSymbol, FloatArray]:
    """rho_0..rho_n and S_1..S_k samples; S_0 is never produced."""
    values = density(state, options)
    minimum = float(np.min(values))
    if minimum < options.effective_floor:
        raise VacuumDensity(minimum, options.rho_floor)

    samples: dict[FieldSymbol, FloatArray] = {rho(0): values}
    for order in range(1, max_rho_order + 1):
        samples[rho(order)] = grid.spectral_deriv(values, order)
    if max_s_order >= 1:
        gradient = phase_gradient(grid, state, options)
        samples[phase(1)] = gradient
        for order in range(1, max_s_order):
            samples[phase(order + 1)] = grid.spectral_deriv(gradient, order)
    return samples
