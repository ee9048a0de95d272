"""
Piecewise-constant qubit control, the time-weighted QSNR fitness, and the
PSO / QPSO optimizers used to maximize it.

The swarm maximizes. Randomness is drawn from a fresh generator per
(seed, stage, iteration, particle), so results do not depend on evaluation
order or on how many workers evaluate the fitness.
"""

import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from qthermo.errors import ConfigError, ResumeMismatchError
from qthermo.schemas.results import SwarmCheckpoint
from qthermo.services.metrology import MetrologyPoint, qsnr_trajectory
from qthermo.services.operators import PAULIS, SIGMA_Z
from qthermo.services.results_store import load_checkpoint, save_checkpoint
from qthermo.services.scenario import Scenario

logger = logging.getLogger(__name__)

STAGE_INIT = 0
STAGE_PSO = 1
STAGE_QPSO = 2

Mapper = Callable[[Callable, Iterable], Iterable]


# ── Control sequence ────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class ControlSequence:
    """N segments of constant (D_x, D_y, D_z) over [0, t_max]."""

    amplitudes: np.ndarray
    t_max: float
    bound: float = 1.0

    def __post_init__(self) -> None:
        amplitudes = np.asarray(self.amplitudes, dtype=float)
        if amplitudes.ndim != 2 or amplitudes.shape[1] != 3 or amplitudes.shape[0] < 1:
            raise ConfigError(f"control amplitudes must be N x 3 with N >= 1, got {amplitudes.shape}")
        if self.t_max <= 0:
            raise ConfigError(f"control t_max must be > 0, got {self.t_max}")
        if np.max(np.abs(amplitudes)) > self.bound + 1e-12:
            raise ConfigError(f"control amplitude exceeds bound {self.bound}")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def zeros(cls, n_segments: int, t_max: float, bound: float = 1.0) -> "ControlSequence":
        return cls(np.zeros((n_segments, 3)), t_max, bound)

    @classmethod
    def from_vector(cls, x: np.ndarray, t_max: float, bound: float = 1.0) -> "ControlSequence":
        return cls(np.asarray(x, dtype=float).reshape(-1, 3), t_max, bound)

    @property
    def n_segments(self) -> int:
        return self.amplitudes.shape[0]

    def as_vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1).copy()

    def segment_index(self, t: float) -> int:
        """Left-closed segments; the last one also owns t = t_max."""
        if t < 0 or t > self.t_max * (1 + 1e-12):
            raise ConfigError(f"t={t} is outside the control window [0, {self.t_max}]")
        return min(math.floor(t * self.n_segments / self.t_max + 1e-12), self.n_segments - 1)

    def boundaries(self) -> list[float]:
        return [k * self.t_max / self.n_segments for k in range(1, self.n_segments)]


def controlled_hamiltonian(base_omega0: float, cs: ControlSequence, t: float) -> np.ndarray:
    """ω0/2 σ_z + ½ Σ_i D_i^{(k)} σ_i for the segment k containing t."""
    d = cs.amplitudes[cs.segment_index(t)]
    return 0.5 * base_omega0 * SIGMA_Z + 0.5 * sum(d[i] * PAULIS[i] for i in range(3))


# ── Fitness ─────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class FitnessSpec:
    n_time_samples: int = 64

    def __post_init__(self) -> None:
        if self.n_time_samples < 1:
            raise ConfigError(f"n_time_samples must be >= 1, got {self.n_time_samples}")

    @property
    def weights(self) -> np.ndarray:
        n = self.n_time_samples
        return (np.arange(n) + 1.0) / n

    def time_grid(self, t_max: float) -> np.ndarray:
        return np.linspace(0.0, t_max, self.n_time_samples)


def weighted_fitness(points: list[MetrologyPoint] | np.ndarray, spec: FitnessSpec) -> float:
    """(1/N_t) Σ_j w_j Q_T(t_j) with w_j = (j+1)/N_t."""
    values = np.array([p.qsnr if isinstance(p, MetrologyPoint) else float(p) for p in points])
    if values.size != spec.n_time_samples:
        raise ValueError(f"expected {spec.n_time_samples} QSNR samples, got {values.size}")
    return float(spec.weights @ values) / spec.n_time_samples


@dataclass(frozen=True, eq=False)
class QsnrFitness:
    """Decodes a particle into a ControlSequence and scores its QSNR trajectory."""

    scenario: Scenario
    temperature: float
    t_max: float
    bound: float
    spec: FitnessSpec = field(default_factory=FitnessSpec)
    delta: float | None = None

    def control(self, x: np.ndarray) -> ControlSequence:
        return ControlSequence.from_vector(x, self.t_max, self.bound)

    def trajectory(self, x: np.ndarray | None):
        scenario = self.scenario if x is None else self.scenario.with_control(self.control(x))
        return qsnr_trajectory(scenario, self.temperature, self.spec.time_grid(self.t_max), self.delta)

    def __call__(self, x: np.ndarray) -> float:
        return weighted_fitness(self.trajectory(x).points, self.spec)


# ── Swarm ───────────────────────────────────────────────────────────────────


def particle_rng(seed: int, stage: int, iteration: int, particle: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stage, iteration, particle]))


@dataclass
class Swarm:
    positions: np.ndarray
    velocities: np.ndarray
    personal_best: np.ndarray
    personal_best_fitness: np.ndarray
    global_best: np.ndarray
    global_best_fitness: float
    seed: int
    iteration: int = 0

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def mbest(self) -> np.ndarray:
        return self.personal_best.mean(axis=0)

    def refresh(self, fitness: np.ndarray) -> None:
        """Elitist update: a personal best moves only on strict improvement."""
        improved = fitness > self.personal_best_fitness
        self.personal_best[improved] = self.positions[improved]
        self.personal_best_fitness[improved] = fitness[improved]
        leader = int(np.argmax(self.personal_best_fitness))
        if self.personal_best_fitness[leader] > self.global_best_fitness:
            self.global_best = self.personal_best[leader].copy()
            self.global_best_fitness = float(self.personal_best_fitness[leader])

    def to_checkpoint(self, algorithm: str, fingerprint: str, history: list[float]) -> SwarmCheckpoint:
        return SwarmCheckpoint(
            config_fingerprint=fingerprint,
            algorithm=algorithm,
            seed=self.seed,
            iteration=self.iteration,
            positions=self.positions.tolist(),
            velocities=self.velocities.tolist(),
            personal_best=self.personal_best.tolist(),
            personal_best_fitness=self.personal_best_fitness.tolist(),
            global_best=self.global_best.tolist(),
            global_best_fitness=self.global_best_fitness,
            history=list(history),
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: SwarmCheckpoint) -> "Swarm":
        return cls(
            positions=np.array(checkpoint.positions, dtype=float),
            velocities=np.array(checkpoint.velocities, dtype=float),
            personal_best=np.array(checkpoint.personal_best, dtype=float),
            personal_best_fitness=np.array(checkpoint.personal_best_fitness, dtype=float),
            global_best=np.array(checkpoint.global_best, dtype=float),
            global_best_fitness=float(checkpoint.global_best_fitness),
            seed=checkpoint.seed,
            iteration=checkpoint.iteration,
        )


def _evaluate(fitness_fn: Callable[[np.ndarray], float], positions: np.ndarray, mapper: Mapper) -> np.ndarray:
    return np.array(list(mapper(fitness_fn, list(positions))), dtype=float)


def init_swarm(
    fitness_fn: Callable[[np.ndarray], float],
    size: int,
    dimension: int,
    bound: float,
    seed: int,
    mapper: Mapper = map,
    *,
    seed_origin: bool = True,
) -> Swarm:
    """
    Uniform positions in [−bound, bound]^D, zero velocities. With
    ``seed_origin`` particle 0 starts on the zero control, so the global best
    never falls below the uncontrolled fitness.
    """
    positions = np.array([particle_rng(seed, STAGE_INIT, 0, i).uniform(-bound, bound, dimension) for i in range(size)])
    if seed_origin:
        positions[0] = 0.0
    fitness = _evaluate(fitness_fn, positions, mapper)
    leader = int(np.argmax(fitness))
    return Swarm(
        positions=positions,
        velocities=np.zeros_like(positions),
        personal_best=positions.copy(),
        personal_best_fitness=fitness.copy(),
        global_best=positions[leader].copy(),
        global_best_fitness=float(fitness[leader]),
        seed=seed,
    )


def pso_step(
    swarm: Swarm,
    fitness_fn: Callable[[np.ndarray], float],
    bound: float,
    *,
    w: float = 0.7,
    f1: float = 1.5,
    f2: float = 1.5,
    r1: np.ndarray | None = None,
    r2: np.ndarray | None = None,
    mapper: Mapper = map,
) -> Swarm:
    """
    V ← wV + f1 r1 (P − X) + f2 r2 (G − X);  X ← clamp(X + V).

    ``r1`` / ``r2`` override the random draws (shape M × D), for testing.
    """
    iteration = swarm.iteration + 1
    if r1 is None or r2 is None:
        draws = [particle_rng(swarm.seed, STAGE_PSO, iteration, i).random((2, swarm.dimension)) for i in range(swarm.size)]
        r1 = np.array([d[0] for d in draws]) if r1 is None else r1
        r2 = np.array([d[1] for d in draws]) if r2 is None else r2
    x = swarm.positions
    swarm.velocities = w * swarm.velocities + f1 * r1 * (swarm.personal_best - x) + f2 * r2 * (swarm.global_best - x)
    swarm.positions = np.clip(x + swarm.velocities, -bound, bound)
    swarm.refresh(_evaluate(fitness_fn, swarm.positions, mapper))
    swarm.iteration = iteration
    return swarm


def qpso_step(
    swarm: Swarm,
    fitness_fn: Callable[[np.ndarray], float],
    bound: float,
    alpha: float,
    *,
    attractor: Literal["personal", "local"] = "local",
    u: np.ndarray | None = None,
    signs: np.ndarray | None = None,
    phi: np.ndarray | None = None,
    mapper: Mapper = map,
) -> Swarm:
    """
    X ← p ± α |mbest − X| ln(1/u), mbest the mean personal best.

    ``attractor="personal"`` uses p = P_i; ``"local"`` uses
    p = φ P_i + (1 − φ) G with φ ~ U(0, 1) per dimension. One u ∈ (0, 1]
    and one fair sign per dimension; injected arrays replace the draws.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    iteration = swarm.iteration + 1
    shape = (swarm.size, swarm.dimension)
    draws = [particle_rng(swarm.seed, STAGE_QPSO, iteration, i).random((3, swarm.dimension)) for i in range(swarm.size)]
    if u is None:
        u = 1.0 - np.array([d[0] for d in draws])
    if signs is None:
        signs = np.where(np.array([d[1] for d in draws]) < 0.5, 1.0, -1.0)
    if phi is None:
        phi = np.array([d[2] for d in draws])
    u, signs, phi = (np.broadcast_to(a, shape) for a in (u, signs, phi))

    mbest = swarm.mbest
    x = swarm.positions
    if attractor == "personal":
        p = swarm.personal_best
    elif attractor == "local":
        p = phi * swarm.personal_best + (1.0 - phi) * swarm.global_best
    else:
        raise ConfigError(f"unknown QPSO attractor {attractor!r}")
    spread = alpha * np.abs(mbest - x) * np.log(1.0 / u)
    swarm.positions = np.clip(p + signs * spread, -bound, bound)
    swarm.refresh(_evaluate(fitness_fn, swarm.positions, mapper))
    swarm.iteration = iteration
    return swarm


# ── Driver ──────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class RunParams:
    algorithm: Literal["pso", "qpso"] = "qpso"
    swarm_size: int = 20
    iterations: int = 150
    bound: float = 1.0
    seed: int = 0
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    alpha_start: float = 1.0
    alpha_end: float = 0.5
    attractor: Literal["personal", "local"] = "local"
    seed_origin: bool = True

    def alpha(self, iteration: int) -> float:
        """Linear contraction schedule; ``iteration`` counts from 1."""
        if self.iterations <= 1:
            return self.alpha_start
        frac = (iteration - 1) / (self.iterations - 1)
        return self.alpha_start + (self.alpha_end - self.alpha_start) * frac


@dataclass
class OptimizationResult:
    best_position: np.ndarray
    best_fitness: float
    history: list[float]
    swarm: Swarm


def optimize(
    fitness_fn: Callable[[np.ndarray], float],
    dimension: int,
    run: RunParams,
    *,
    checkpoint: Path | None = None,
    resume: Path | None = None,
    fingerprint: str = "",
    mapper: Mapper = map,
) -> OptimizationResult:
    """
    Run ``run.iterations`` swarm steps. ``history[i]`` is the global-best
    fitness after iteration i (``history[0]`` after initialization). The
    swarm is checkpointed after every iteration when ``checkpoint`` is set;
    ``resume`` restarts from a checkpoint of the same configuration.
    """
    if resume is not None:
        saved = load_checkpoint(resume)
        if saved.config_fingerprint != fingerprint or saved.algorithm != run.algorithm:
            raise ResumeMismatchError(
                f"checkpoint {resume} was written for a different configuration "
                f"(fingerprint {saved.config_fingerprint[:12]} vs {fingerprint[:12]})"
            )
        swarm = Swarm.from_checkpoint(saved)
        history = list(saved.history)
        logger.info("optimizer resumed  iteration=%d  best=%.6g", swarm.iteration, swarm.global_best_fitness)
    else:
        swarm = init_swarm(
            fitness_fn, run.swarm_size, dimension, run.bound, run.seed, mapper, seed_origin=run.seed_origin
        )
        history = [swarm.global_best_fitness]
    if checkpoint is not None:
        save_checkpoint(checkpoint, swarm.to_checkpoint(run.algorithm, fingerprint, history))

    while swarm.iteration < run.iterations:
        if run.algorithm == "pso":
            pso_step(swarm, fitness_fn, run.bound, w=run.inertia, f1=run.cognitive, f2=run.social, mapper=mapper)
        else:
            alpha = run.alpha(swarm.iteration + 1)
            qpso_step(swarm, fitness_fn, run.bound, alpha, attractor=run.attractor, mapper=mapper)
        history.append(swarm.global_best_fitness)
        logger.info(
            "optimizer  algorithm=%s  iteration=%d/%d  best=%.6g",
            run.algorithm, swarm.iteration, run.iterations, swarm.global_best_fitness,
        )
        if checkpoint is not None:
            save_checkpoint(checkpoint, swarm.to_checkpoint(run.algorithm, fingerprint, history))

    return OptimizationResult(
        best_position=swarm.global_best.copy(),
        best_fitness=swarm.global_best_fitness,
        history=history,
        swarm=swarm,
    )
