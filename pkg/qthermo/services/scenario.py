"""
A Scenario bundles everything one propagation needs except the temperature:
system model, spectral density, solver choice and truncation. Temperature is
an argument so finite differences and sweeps reuse one immutable object,
which is also what gets shipped to worker processes.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from qthermo.errors import ConfigError
from qthermo.schemas.scenario import (
    Amplitude,
    BrmeSolverConfig,
    HeomSolverConfig,
    ScenarioConfig,
    SingleQubitSystem,
)
from qthermo.services.bath import SpectralDensity, default_n_matsubara, matsubara_expansion
from qthermo.services.heom import (
    HeomParams,
    SteadyStateResult,
    SystemModel,
    Trajectory,
    build_single_qubit,
    build_two_qubit,
    propagate as heom_propagate,
    steady_state as heom_steady_state,
)
from qthermo.services.operators import ket, projector
from qthermo.services.redfield import RedfieldOptions, brme_propagate, brme_steady_state

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Scenario:
    model: SystemModel
    spectral_density: SpectralDensity
    solver: HeomParams | RedfieldOptions
    n_matsubara: int | None = None
    steady_options: dict | None = None

    @property
    def uses_heom(self) -> bool:
        return isinstance(self.solver, HeomParams)

    def resolve_n_matsubara(self, T: float) -> int:
        if self.n_matsubara is not None:
            return self.n_matsubara
        return default_n_matsubara(self.spectral_density, T)

    def propagate(self, T: float, t_grid, n_matsubara: int | None = None) -> Trajectory:
        if self.uses_heom:
            n_k = self.resolve_n_matsubara(T) if n_matsubara is None else n_matsubara
            bath = matsubara_expansion(self.spectral_density, T, n_k)
            return heom_propagate(self.model, bath, self.solver, t_grid)
        return brme_propagate(self.model, self.spectral_density, T, self.solver, t_grid)

    def steady_state(self, T: float, n_matsubara: int | None = None) -> SteadyStateResult:
        if self.uses_heom:
            n_k = self.resolve_n_matsubara(T) if n_matsubara is None else n_matsubara
            bath = matsubara_expansion(self.spectral_density, T, n_k)
            return heom_steady_state(self.model, bath, self.solver, **(self.steady_options or {}))
        rho = brme_steady_state(self.model, self.spectral_density, T, self.solver)
        return SteadyStateResult(rho=rho, time=math.nan, residual=0.0)

    # ── Variants ─────────────────────────────────────────

    def with_initial_state(self, rho: np.ndarray) -> "Scenario":
        return replace(self, model=self.model.with_initial_state(rho))

    def with_control(self, control) -> "Scenario":
        return replace(self, model=self.model.with_control(control))

    def with_solver(self, solver: HeomParams | RedfieldOptions, n_matsubara: int | None = None) -> "Scenario":
        return replace(self, solver=solver, n_matsubara=n_matsubara)

    def with_bath(self, lam: float | None = None, omega_c: float | None = None) -> "Scenario":
        sd = SpectralDensity(
            lam=self.spectral_density.lam if lam is None else lam,
            omega_c=self.spectral_density.omega_c if omega_c is None else omega_c,
        )
        return replace(self, spectral_density=sd)


# ── Construction from config ────────────────────────────────────────────────


def _amplitude(value: Amplitude) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(value[0], value[1])
    return complex(value)


def state_vector(amplitudes: list[Amplitude]) -> np.ndarray:
    return ket(*(_amplitude(a) for a in amplitudes))


def preset_state(name: str, dim: int) -> np.ndarray:
    """Named single-qubit preset; on a register every qubit gets the same state."""
    s = 1.0 / math.sqrt(2.0)
    vectors = {
        "zero": np.array([1, 0], dtype=complex),
        "one": np.array([0, 1], dtype=complex),
        "plus": np.array([s, s], dtype=complex),
        "minus": np.array([s, -s], dtype=complex),
        "plus_i": np.array([s, 1j * s], dtype=complex),
        "minus_i": np.array([s, -1j * s], dtype=complex),
    }
    if name == "mixed":
        return np.eye(dim, dtype=complex) / dim
    if name not in vectors:
        raise ConfigError(f"unknown initial_state preset {name!r}")
    rho = projector(vectors[name])
    product = rho
    while product.shape[0] < dim:
        product = np.kron(product, rho)
    return product


def initial_state_from_config(cfg: ScenarioConfig, dim: int) -> np.ndarray:
    if isinstance(cfg.initial_state, str):
        return preset_state(cfg.initial_state, dim)
    return np.array([[_amplitude(a) for a in row] for row in cfg.initial_state], dtype=complex)


def solver_from_config(solver: HeomSolverConfig | BrmeSolverConfig) -> HeomParams | RedfieldOptions:
    if isinstance(solver, HeomSolverConfig):
        return HeomParams(
            depth=solver.depth,
            use_terminator=solver.use_terminator,
            scaling=solver.scaling,
            integrator=solver.integrator,
            dt=solver.dt,
            rtol=solver.rtol,
            atol=solver.atol,
        )
    return RedfieldOptions(
        include_lamb_shift=solver.include_lamb_shift,
        integrator=solver.integrator,
        dt=solver.dt,
        rtol=solver.rtol,
        atol=solver.atol,
    )


def scenario_from_config(cfg: ScenarioConfig, lam: float | None = None, omega_c: float | None = None) -> Scenario:
    """
    Build the Scenario for one (λ, ω_c) point of the config; by default the
    first value of each bath axis.
    """
    system = cfg.system
    dim = 2 if isinstance(system, SingleQubitSystem) else 4
    rho0 = initial_state_from_config(cfg, dim)
    if isinstance(system, SingleQubitSystem):
        model = build_single_qubit(system.omega0, rho0)
    else:
        model = build_two_qubit(system.omega0, system.g, rho0)

    sd = SpectralDensity(
        lam=cfg.lambdas[0] if lam is None else lam,
        omega_c=cfg.cutoffs[0] if omega_c is None else omega_c,
    )
    n_matsubara = cfg.solver.n_matsubara if isinstance(cfg.solver, HeomSolverConfig) else None
    steady = cfg.steady.model_dump(exclude_none=True)
    return Scenario(
        model=model,
        spectral_density=sd,
        solver=solver_from_config(cfg.solver),
        n_matsubara=n_matsubara,
        steady_options=steady or None,
    )
