import math

import numpy as np
import pytest

from gaugeflow.models.catalog import builtin, custom
from gaugeflow.simulator.services.equations import (
    apply_gauge,
    gauge_phase_values,
    invert_gauge,
    kinetic_term,
    phi_potential,
    psi_rhs,
)
from gaugeflow.simulator.services.grid import DEFAULT_FIELD_OPTIONS, Grid, GridState
from gaugeflow.simulator.services.initial_data import gaussian_on_background, plane_wave
from gaugeflow.symbolic.field_expr import Params
from gaugeflow.symbolic.parser import parse_potential
from gaugeflow.symbolic.variational import derive_system
from gaugeflow.utils.errors import EIPDegenerate, NoClosedForm, NonConservingPotential

OPTIONS = DEFAULT_FIELD_OPTIONS


@pytest.fixture
def grid() -> Grid:
    return Grid(L=40.0, N=256)


@pytest.fixture
def packet(grid) -> GridState:
    return gaussian_on_background(grid, Params(), background=0.5, momentum=1.0)


def test_free_plane_wave_rotates_at_dispersion_frequency(grid):
    params = Params()
    wavenumber = 2.0 * math.pi * 3 / grid.L
    state = plane_wave(grid, background=0.5, momentum=wavenumber)
    rate = psi_rhs(grid, builtin("free", params).system, state, params, OPTIONS)
    np.testing.assert_allclose(rate, -0.5j * wavenumber**2 * state.psi, atol=1e-12)


def test_kinetic_term_uses_twist(grid):
    state = GridState(t=0.0, psi=np.ones(grid.N, dtype=np.complex128), twist=0.4)
    np.testing.assert_allclose(kinetic_term(grid, state, Params()), 0.08, atol=1e-14)


def test_eip_plane_wave_rate(grid):
    params = Params.of(kappa=0.2)
    wavenumber = 2.0 * math.pi * 2 / grid.L
    state = plane_wave(grid, background=0.5, momentum=wavenumber)
    rate = psi_rhs(grid, builtin("eip", params).system, state, params, OPTIONS)
    energy = wavenumber**2 / 2.0 + 0.2 * 0.5 * wavenumber**2
    np.testing.assert_allclose(rate, -1j * energy * state.psi, atol=1e-12)


def test_non_conserving_potential_has_no_evolution(grid, packet):
    system = derive_system(parse_potential("S*rho"))
    with pytest.raises(NonConservingPotential):
        psi_rhs(grid, system, packet, Params(), OPTIONS)
    with pytest.raises(NonConservingPotential):
        apply_gauge(grid, packet, system, Params(), OPTIONS)


def test_eip_guard_must_stay_positive(grid):
    params = Params.of(kappa=-2.0)
    state = plane_wave(grid, background=0.6)
    with pytest.raises(EIPDegenerate):
        phi_potential(grid, builtin("eip", params), state, params, OPTIONS)


def test_custom_model_has_no_phi_equation(grid, packet):
    params = Params.of(c=0.1)
    with pytest.raises(NoClosedForm):
        phi_potential(grid, custom("c*rho^2*S_1", params), packet, params, OPTIONS)


def test_free_phi_potential_vanishes(grid, packet):
    params = Params()
    np.testing.assert_array_equal(
        phi_potential(grid, builtin("free", params), packet, params, OPTIONS), 0.0
    )


def test_dg_gauge_uses_closed_form(grid, packet):
    params = Params.of(D=0.05)
    system = builtin("dg", params).system
    phi = apply_gauge(grid, packet, system, params, OPTIONS)
    np.testing.assert_allclose(phi.psi, packet.psi * np.exp(0.05j * np.log(packet.rho)))
    assert phi.twist == 0.0


def test_free_gauge_is_identity(grid, packet):
    system = builtin("free", Params()).system
    assert apply_gauge(grid, packet, system, Params(), OPTIONS) is packet


def test_jackiw_gauge_keeps_modulus_and_moves_mean_into_twist(grid, packet):
    params = Params.of(**{"lambda": 0.3})
    system = builtin("jackiw", params).system
    phi = apply_gauge(grid, packet, system, params, OPTIONS)
    np.testing.assert_allclose(np.abs(phi.psi), np.abs(packet.psi), rtol=1e-13)
    assert phi.twist == pytest.approx(-0.3 * np.mean(packet.rho) / 2.0, rel=1e-12)

    periodic, mean = gauge_phase_values(grid, system.theta, packet, params, OPTIONS)
    assert np.mean(periodic) == pytest.approx(0.0, abs=1e-13)
    assert mean == pytest.approx(-0.3 * np.mean(packet.rho) / 2.0, rel=1e-12)


@pytest.mark.parametrize(
    "name, parameters",
    [("dg", {"D": 0.05}), ("jackiw", {"lambda": 0.3}), ("eip", {"kappa": 0.2})],
)
def test_gauge_inversion_round_trip(grid, packet, name, parameters):
    params = Params.from_mapping(parameters)
    system = builtin(name, params).system
    phi = apply_gauge(grid, packet, system, params, OPTIONS)
    back = invert_gauge(grid, phi, system, params, OPTIONS)
    assert np.max(np.abs(back.psi - packet.psi)) <= 1e-10
    assert back.twist == pytest.approx(packet.twist, abs=1e-12)
