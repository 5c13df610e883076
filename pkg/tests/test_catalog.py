import logging
import math

import numpy as np
import pytest

from gaugeflow.models.catalog import (
    BUILTIN_MODELS,
    RescaleDirection,
    builtin,
    custom,
    dg_rescale_phase,
    rescale_factor,
    select_model,
)
from gaugeflow.simulator.services.grid import Grid, GridState
from gaugeflow.simulator.services.initial_data import gaussian_on_background, plane_wave
from gaugeflow.symbolic.field_expr import Params
from gaugeflow.symbolic.parser import parse_expression
from gaugeflow.utils.errors import (
    MissingParameter,
    PhaseWindingError,
    RescaleOutOfRange,
    UnknownModel,
    VacuumDensity,
)

MODEL_PARAMETERS = {
    "free": {},
    "dg": {"D": 0.05},
    "jackiw": {"lambda": 0.3},
    "eip": {"kappa": 0.2},
}


@pytest.fixture
def grid() -> Grid:
    return Grid(L=40.0, N=256)


@pytest.mark.parametrize("name", BUILTIN_MODELS)
def test_builtin_models_reproduce_stored_forms(name):
    model = builtin(name, Params.from_mapping(MODEL_PARAMETERS[name]))
    outcomes = model.check()
    assert outcomes
    assert all(outcome.passed for outcome in outcomes), [o.to_dict() for o in outcomes]


def test_eip_current_and_guard():
    model = builtin("eip", Params.of(kappa=-0.2))
    assert model.system.j_psi == parse_expression("S_1*rho*(1 + kappa*rho)/m")
    assert model.positivity_guard == parse_expression("1 + kappa*rho")
    assert model.phi_nonlinearity is not None
    assert model.phi_nonlinearity.denominator == model.positivity_guard


def test_unknown_and_incomplete_models():
    with pytest.raises(UnknownModel):
        builtin("nosuch", Params())
    with pytest.raises(MissingParameter) as caught:
        builtin("jackiw", Params())
    assert caught.value.name == "lambda"
    assert builtin("jackiw", Params(), require_values=False).name == "jackiw"


def test_dg_warns_outside_linearizable_range(caplog):
    with caplog.at_level(logging.WARNING, logger="gaugeflow.models.catalog"):
        builtin("dg", Params.of(D=0.6))
    assert "phase rescaling" in caplog.text


def test_custom_model_requires_its_parameters():
    with pytest.raises(MissingParameter):
        custom("c*rho^2*S_1", Params())
    model = custom("c*rho^2*S_1", Params.of(c=0.1))
    assert model.required == ("c",)
    assert model.phi_nonlinearity is None
    assert model.check() == []


def test_select_model():
    assert select_model("dg", None, Params.of(D=0.1)).name == "dg"
    assert select_model(None, "rho^2", Params()).name == "custom"
    with pytest.raises(UnknownModel):
        select_model("custom", None, Params())
    with pytest.raises(UnknownModel):
        select_model(None, None, Params())


def test_rescale_factor():
    assert rescale_factor(0.25, Params()) == pytest.approx(math.sqrt(0.75))
    assert rescale_factor(0.0, Params()) == 1.0
    with pytest.raises(RescaleOutOfRange):
        rescale_factor(0.5, Params())
    with pytest.raises(RescaleOutOfRange):
        rescale_factor(-0.75, Params(hbar=1.0, m=1.0))


def test_rescale_round_trip_keeps_density(grid):
    params = Params.of(D=0.25)
    state = gaussian_on_background(grid, params, background=0.5, momentum=1.0)
    linear = dg_rescale_phase(grid, state, 0.25, RescaleDirection.TO_LINEAR, params)
    back = dg_rescale_phase(grid, linear, 0.25, RescaleDirection.FROM_LINEAR, params)

    np.testing.assert_allclose(linear.rho, state.rho, rtol=1e-12)
    assert np.max(np.abs(back.psi - state.psi)) <= 1e-10
    assert np.angle(linear.psi[0]) == pytest.approx(np.angle(state.psi[0]))


def test_rescale_scales_phase_differences(grid):
    params = Params.of(D=0.25)
    alpha = math.sqrt(0.75)
    state = gaussian_on_background(grid, params, background=0.5, momentum=1.0)
    linear = dg_rescale_phase(grid, state, 0.25, RescaleDirection.TO_LINEAR, params)
    original = np.unwrap(np.angle(state.psi))
    rescaled = np.unwrap(np.angle(linear.psi))
    np.testing.assert_allclose(
        rescaled - rescaled[0], (original - original[0]) / alpha, atol=1e-9
    )


def test_rescale_is_identity_without_dissipation(grid):
    state = gaussian_on_background(grid, Params(), background=0.5, momentum=1.0)
    assert dg_rescale_phase(grid, state, 0.0, RescaleDirection.TO_LINEAR, Params()) is state


def test_rescale_rejects_fractional_winding(grid):
    state = plane_wave(grid, background=0.5, momentum=2.0 * math.pi / grid.L)
    with pytest.raises(PhaseWindingError):
        dg_rescale_phase(grid, state, 0.25, RescaleDirection.TO_LINEAR, Params())


def test_rescale_rejects_vacuum(grid):
    state = GridState(t=0.0, psi=np.zeros(grid.N, dtype=np.complex128))
    with pytest.raises(VacuumDensity):
        dg_rescale_phase(grid, state, 0.25, RescaleDirection.TO_LINEAR, Params())
