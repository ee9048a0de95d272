"""Shared fixtures: cached settings reset, canonical qubit states and small models."""

import numpy as np
import pytest

from qthermo.config import get_settings
from qthermo.services.bath import SpectralDensity
from qthermo.services.heom import HeomParams, build_single_qubit
from qthermo.services.operators import ket, projector
from qthermo.services.redfield import RedfieldOptions
from qthermo.services.scenario import Scenario


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def plus_state() -> np.ndarray:
    return projector(ket(1, 1))


@pytest.fixture
def qubit(plus_state):
    return build_single_qubit(1.0, plus_state)


@pytest.fixture
def tight_heom() -> HeomParams:
    return HeomParams(depth=3, rtol=1e-10, atol=1e-12)


def make_scenario(lam: float, omega_c: float, solver=None, initial=None, n_matsubara=None) -> Scenario:
    rho0 = projector(ket(1, 1)) if initial is None else initial
    return Scenario(
        model=build_single_qubit(1.0, rho0),
        spectral_density=SpectralDensity(lam, omega_c),
        solver=HeomParams(depth=3) if solver is None else solver,
        n_matsubara=n_matsubara,
    )


@pytest.fixture
def heom_scenario():
    return make_scenario(0.02, 0.1, HeomParams(depth=3, rtol=1e-9, atol=1e-11), n_matsubara=1)


@pytest.fixture
def brme_scenario():
    return make_scenario(0.01, 0.5, RedfieldOptions(rtol=1e-10, atol=1e-12))


@pytest.fixture
def scenario_factory():
    return make_scenario
