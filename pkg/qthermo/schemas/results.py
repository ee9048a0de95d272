"""
Pydantic models for what a run leaves on disk: the run manifest and the
optimizer checkpoint.
"""

from typing import Any, Literal

from pydantic import BaseModel, Field

CSV_SCHEMA_VERSION = 1
CHECKPOINT_VERSION = 1
UNITS = "omega0 = 1, k_B = hbar = 1; lambda, omega_c, T in units of omega0; time in 1/omega0"


class RunManifest(BaseModel):
    """One per output directory; written before the first row, rewritten on completion."""

    command: str
    status: Literal["running", "completed", "failed"] = "running"
    config: dict[str, Any]
    config_fingerprint: str
    code_version: str
    seed: int
    units: str = UNITS
    csv_schema_version: int = CSV_SCHEMA_VERSION
    started_at: str
    finished_at: str | None = None
    wall_clock_seconds: float | None = None
    convergence: dict[str, Any] = Field(
        default_factory=dict,
        description="Convergence flags and summary numbers keyed by output name.",
    )
    outputs: list[str] = Field(default_factory=list, description="Files written, relative to the output directory.")
    error: str | None = None


class SwarmCheckpoint(BaseModel):
    """Full swarm state after a completed iteration."""

    version: int = CHECKPOINT_VERSION
    config_fingerprint: str
    algorithm: Literal["pso", "qpso"]
    seed: int
    iteration: int = Field(..., ge=0, description="Last completed iteration (0 = initialized swarm).")
    positions: list[list[float]]
    velocities: list[list[float]]
    personal_best: list[list[float]]
    personal_best_fitness: list[float]
    global_best: list[float]
    global_best_fitness: float
    history: list[float]
