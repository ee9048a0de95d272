"""
Pydantic models for the per-run scenario file (JSON, passed via --config).

All physical quantities are in units of ω0 = 1 (k_B = ħ = 1).
"""

from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# ── Sweep axes ──────────────────────────────────────────────────────────────


class SweepRange(BaseModel):
    """Evenly spaced axis, endpoints included."""

    start: float
    stop: float
    count: int = Field(..., ge=1)

    def values(self) -> list[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.count)]


Axis = Union[float, list[float], SweepRange]


def axis_values(axis: Axis) -> list[float]:
    if isinstance(axis, SweepRange):
        return axis.values()
    if isinstance(axis, list):
        return [float(v) for v in axis]
    return [float(axis)]


def _check_axis(v: Axis, name: str, *, positive: bool) -> Axis:
    values = axis_values(v)
    if not values:
        raise ValueError(f"{name} sweep list must not be empty")
    bad = [x for x in values if (x <= 0 if positive else x < 0)]
    if bad:
        raise ValueError(f"{name} must be {'> 0' if positive else '>= 0'}, got {bad[0]}")
    return v


# ── System and state ────────────────────────────────────────────────────────


class SingleQubitSystem(BaseModel):
    kind: Literal["single_qubit"] = "single_qubit"
    omega0: float = Field(default=1.0, gt=0)


class TwoQubitSystem(BaseModel):
    kind: Literal["two_qubit"] = "two_qubit"
    omega0: float = Field(default=1.0, gt=0)
    g: float = Field(..., description="Qubit–qubit exchange coupling (units of ω0).")


SystemConfig = Annotated[Union[SingleQubitSystem, TwoQubitSystem], Field(discriminator="kind")]

# Complex entries are written as a number or a [re, im] pair.
Amplitude = Union[float, tuple[float, float]]

STATE_PRESETS = frozenset(["zero", "one", "plus", "minus", "plus_i", "minus_i", "mixed"])


class BathConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: Axis = Field(..., alias="lambda", description="Reorganization energy λ (sweepable).")
    omega_c: Axis = Field(..., description="Drude cutoff ω_c (sweepable).")

    @field_validator("lam")
    @classmethod
    def check_lambda(cls, v: Axis) -> Axis:
        return _check_axis(v, "lambda", positive=False)

    @field_validator("omega_c")
    @classmethod
    def check_omega_c(cls, v: Axis) -> Axis:
        return _check_axis(v, "omega_c", positive=True)


# ── Solvers ─────────────────────────────────────────────────────────────────


class HeomSolverConfig(BaseModel):
    kind: Literal["heom"] = "heom"
    depth: int = Field(default=4, ge=1)
    n_matsubara: int | None = Field(default=None, ge=0, description="None picks the smallest adequate N_k.")
    use_terminator: bool = True
    scaling: bool = True
    integrator: Literal["adaptive_rk45", "fixed_rk4"] = "adaptive_rk45"
    dt: float = Field(default=0.05, gt=0)
    rtol: float | None = Field(default=None, gt=0)
    atol: float | None = Field(default=None, gt=0)


class BrmeSolverConfig(BaseModel):
    kind: Literal["brme"] = "brme"
    include_lamb_shift: bool = False
    integrator: Literal["adaptive_rk45", "fixed_rk4"] = "adaptive_rk45"
    dt: float = Field(default=0.05, gt=0)
    rtol: float | None = Field(default=None, gt=0)
    atol: float | None = Field(default=None, gt=0)


SolverConfig = Annotated[Union[HeomSolverConfig, BrmeSolverConfig], Field(discriminator="kind")]


# ── Task blocks ─────────────────────────────────────────────────────────────


class GridConfig(BaseModel):
    t_max: float = Field(default=100.0, gt=0)
    n_samples: int = Field(default=401, ge=2)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_samples)


class DerivativeConfig(BaseModel):
    relative_step: float = Field(default=1e-3, gt=0, description="δ = relative_step · T")
    richardson: bool = False


class SteadyConfig(BaseModel):
    method: Literal["auto", "direct", "propagate"] | None = None
    tolerance: float | None = Field(default=None, gt=0)
    probe_window: float | None = Field(default=None, gt=0)
    t_max: float | None = Field(default=None, gt=0)


class StatePairConfig(BaseModel):
    label: str = Field(..., min_length=1)
    state_a: list[Amplitude] = Field(..., min_length=2)
    state_b: list[Amplitude] = Field(..., min_length=2)


class BlpConfig(BaseModel):
    include_builtin: bool = True
    pairs: list[StatePairConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_not_empty(self) -> "BlpConfig":
        if not self.include_builtin and not self.pairs:
            raise ValueError("blp needs the built-in pairs or at least one user pair")
        return self


class OptimizerConfig(BaseModel):
    algorithm: Literal["pso", "qpso"] = "qpso"
    swarm_size: int = Field(default=20, ge=1)
    iterations: int = Field(default=150, ge=1)
    n_segments: int = Field(default=8, ge=1)
    t_max: float = Field(default=320.0, gt=0)
    bound: float = Field(default=0.5, gt=0, description="Amplitude bound |D_i^(k)| ≤ bound (units of ω0).")
    n_time_samples: int = Field(default=64, ge=1)

    # PSO
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5

    # QPSO
    alpha_start: float = Field(default=1.0, ge=0, le=1)
    alpha_end: float = Field(default=0.5, ge=0, le=1)
    attractor: Literal["personal", "local"] = "local"
    seed_origin: bool = True


class SweepConfig(BaseModel):
    include_blp: bool = False


class ConvergenceConfig(BaseModel):
    """Truncation refinement checked alongside dynamics (HEOM only)."""

    depths: list[int] = Field(..., min_length=1)
    n_matsubaras: list[int] = Field(..., min_length=1)

    @field_validator("depths")
    @classmethod
    def check_depths(cls, v: list[int]) -> list[int]:
        if min(v) < 1:
            raise ValueError("depths must be >= 1")
        return v

    @field_validator("n_matsubaras")
    @classmethod
    def check_n_matsubaras(cls, v: list[int]) -> list[int]:
        if min(v) < 0:
            raise ValueError("n_matsubaras must be >= 0")
        return v


# ── Scenario ────────────────────────────────────────────────────────────────


class ScenarioConfig(BaseModel):
    """Top-level run description."""

    system: SystemConfig = Field(default_factory=SingleQubitSystem)
    initial_state: str | list[list[Amplitude]] = Field(
        default="plus",
        description="Preset name (zero, one, plus, minus, plus_i, minus_i, mixed) or explicit density matrix.",
    )
    bath: BathConfig
    temperature: Axis = Field(..., description="Bath temperature T (sweepable).")
    solver: SolverConfig = Field(default_factory=HeomSolverConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    derivative: DerivativeConfig = Field(default_factory=DerivativeConfig)
    steady: SteadyConfig = Field(default_factory=SteadyConfig)
    blp: BlpConfig = Field(default_factory=BlpConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    convergence: ConvergenceConfig | None = None
    seed: int = 0

    @field_validator("temperature")
    @classmethod
    def check_temperature(cls, v: Axis) -> Axis:
        return _check_axis(v, "temperature", positive=True)

    @field_validator("initial_state")
    @classmethod
    def check_initial_state(cls, v):
        if isinstance(v, str) and v not in STATE_PRESETS:
            raise ValueError(f"unknown initial_state preset {v!r}; expected one of {sorted(STATE_PRESETS)}")
        return v

    # ── Axis helpers ─────────────────────────────────────

    @property
    def lambdas(self) -> list[float]:
        return axis_values(self.bath.lam)

    @property
    def cutoffs(self) -> list[float]:
        return axis_values(self.bath.omega_c)

    @property
    def temperatures(self) -> list[float]:
        return axis_values(self.temperature)

    def grid_points(self) -> list[tuple[float, float, float]]:
        """(λ, ω_c, T) keys in deterministic sorted order."""
        return sorted((lam, wc, T) for lam in self.lambdas for wc in self.cutoffs for T in self.temperatures)
