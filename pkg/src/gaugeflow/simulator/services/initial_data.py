"""Initial fields on the periodic grid, and exact free-particle solutions."""

import math
from typing import Optional

import numpy as np

from gaugeflow.simulator.services.grid import ComplexArray, Grid, GridState
from gaugeflow.symbolic.field_expr import Params
from gaugeflow.utils.errors import ConfigError

PLANE_WAVE_TOLERANCE = 1e-9


def free_gaussian(
    grid: Grid,
    t: float,
    params: Params,
    amplitude: float = 0.5,
    width: float = 2.0,
    momentum: float = 0.0,
    center: Optional[float] = None,
    background: float = 0.0,
) -> ComplexArray:
    """Dispersing Gaussian packet of the free equation at time t.

    psi = sqrt(bg) + A / sqrt(s) exp(-(x - c - v t)^2 / (4 w^2 s) + i k (x - c) - i w_k t)
    with s = 1 + i hbar t / (2 m w^2), v = hbar k / m and w_k = hbar k^2 / (2 m).
    The constant background is itself a free solution.
    """
    center = grid.L / 2.0 if center is None else center
    spread = 1.0 + 1j * params.hbar * t / (2.0 * params.m * width**2)
    velocity = params.hbar * momentum / params.m
    frequency = params.hbar * momentum**2 / (2.0 * params.m)
    offset = grid.x - center
    packet = (amplitude / np.sqrt(spread)) * np.exp(
        -((offset - velocity * t) ** 2) / (4.0 * width**2 * spread)
        + 1j * momentum * offset
        - 1j * frequency * t
    )
    return math.sqrt(background) + packet


def gaussian_on_background(
    grid: Grid,
    params: Params,
    background: float = 0.5,
    amplitude: float = 0.5,
    width: float = 2.0,
    momentum: float = 0.0,
    center: Optional[float] = None,
) -> GridState:
    """A moving Gaussian bump riding on a uniform density."""
    if background < 0.0:
        raise ConfigError("initial.background", "must be non-negative")
    psi = free_gaussian(grid, 0.0, params, amplitude, width, momentum, center, background)
    return GridState(t=0.0, psi=psi.astype(np.complex128))


def plane_wave(grid: Grid, background: float = 0.5, momentum: float = 0.0) -> GridState:
    """sqrt(rho_0) exp(i k x); k L / 2 pi must be an integer on the periodic grid."""
    if background < 0.0:
        raise ConfigError("initial.background", "must be non-negative")
    winding = momentum * grid.L / (2.0 * math.pi)
    if abs(winding - round(winding)) > PLANE_WAVE_TOLERANCE:
        raise ConfigError(
            "initial.momentum",
            f"k L / 2 pi = {winding:.6g} must be an integer for a periodic plane wave",
        )
    psi = math.sqrt(background) * np.exp(1j * momentum * grid.x)
    return GridState(t=0.0, psi=psi.astype(np.complex128))
