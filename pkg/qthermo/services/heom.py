"""
Hierarchical equations of motion (HEOM) for a finite-dimensional system
coupled to one Drude–Lorentz bath through a single Hermitian operator S.

For every multi-index n⃗ of the truncated hierarchy

    dρ_n/dt = (−i H_S(t)^× − Σ_k n_k ν_k) ρ_n
              + Σ_k Φ ρ_{n+e_k} + Σ_k n_k Θ_k ρ_{n−e_k}
              − Δ [S, [S, ρ_n]]                      (terminator, optional)

with Φρ = −i[S, ρ] and Θ_k ρ = −i(Re c_k [S, ρ] + i Im c_k {S, ρ}).
Every ADO stays Hermitian when the hierarchy starts Hermitian.

The ADO stack is flattened row-major, so vec(AρB) = (A ⊗ Bᵀ) vec(ρ) and the
generator is one sparse matrix per piecewise-constant Hamiltonian segment.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from qthermo.config import get_settings
from qthermo.errors import ConfigError, HierarchyTooLargeError, InvalidStateError, SteadyStateError
from qthermo.services.bath import BathExpansion, SpectralDensity, matsubara_expansion
from qthermo.services.integrate import IntegratorName, evolve_linear
from qthermo.services.operators import (
    PAULIS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    check_density_matrix,
    check_hermitian,
    collective,
    embed,
    expectation,
    is_qubit_register,
    n_qubits,
    trace_norm_distance,
)

if TYPE_CHECKING:
    from qthermo.services.control import ControlSequence

logger = logging.getLogger(__name__)

CONVERGENCE_THRESHOLD = 1e-3


# ── System model ────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    H_S, the coupling operator S, the initial state and an optional control.

    ``control_ops`` are the three operators the control amplitudes multiply
    (½ Σ_i D_i control_ops[i]); for a register they are collective Paulis.
    """

    dim: int
    h_base: np.ndarray
    coupling_op: np.ndarray
    initial_state: np.ndarray
    control_ops: tuple[np.ndarray, np.ndarray, np.ndarray]
    control: "ControlSequence | None" = None
    omega0: float = 1.0

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise InvalidStateError(f"dim must be >= 2, got {self.dim}")
        if self.omega0 <= 0:
            raise ConfigError(f"omega0 must be > 0, got {self.omega0}")
        for name in ("h_base", "coupling_op"):
            matrix = check_hermitian(getattr(self, name), name)
            if matrix.shape != (self.dim, self.dim):
                raise InvalidStateError(f"{name} must be {self.dim}x{self.dim}, got {matrix.shape}")
            object.__setattr__(self, name, matrix)
        object.__setattr__(self, "initial_state", check_density_matrix(self.initial_state, self.dim))

    @property
    def is_time_independent(self) -> bool:
        return self.control is None

    @property
    def reference_observable(self) -> np.ndarray:
        """Σ_i σ_z^{(i)} for a qubit register, H_S otherwise."""
        if not is_qubit_register(self.dim):
            return self.h_base
        return collective(SIGMA_Z, self.dim)

    def hamiltonian(self, t: float = 0.0) -> np.ndarray:
        if self.control is None:
            return self.h_base
        return self.segment_hamiltonian(self.control.segment_index(t))

    def segment_hamiltonian(self, k: int) -> np.ndarray:
        d = self.control.amplitudes[k]
        return self.h_base + 0.5 * sum(d[i] * self.control_ops[i] for i in range(3))

    def with_control(self, control: "ControlSequence | None") -> "SystemModel":
        return replace(self, control=control)

    def with_initial_state(self, rho: np.ndarray) -> "SystemModel":
        return replace(self, initial_state=rho)


def build_single_qubit(
    omega0: float,
    initial: np.ndarray,
    control: "ControlSequence | None" = None,
) -> SystemModel:
    """H_S = ω0/2 σ_z, S = σ_x."""
    return SystemModel(
        dim=2,
        h_base=0.5 * omega0 * SIGMA_Z,
        coupling_op=SIGMA_X.copy(),
        initial_state=np.asarray(initial, dtype=complex),
        control_ops=PAULIS,
        control=control,
        omega0=omega0,
    )


def build_two_qubit(omega0: float, g: float, initial: np.ndarray) -> SystemModel:
    """
    Two qubits in a common bath.

    H_S = ω0/2 (σ_z⊗1 + 1⊗σ_z) + g/2 (σ_x⊗σ_x + σ_y⊗σ_y), S = σ_x⊗1 + 1⊗σ_x.
    """
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (4, 4):
        raise InvalidStateError(f"two-qubit initial state must be 4x4, got {initial.shape}")
    h = 0.5 * omega0 * collective(SIGMA_Z, 4)
    h = h + 0.5 * g * (np.kron(SIGMA_X, SIGMA_X) + np.kron(SIGMA_Y, SIGMA_Y))
    return SystemModel(
        dim=4,
        h_base=h,
        coupling_op=collective(SIGMA_X, 4),
        initial_state=initial,
        control_ops=tuple(collective(p, 4) for p in PAULIS),
        omega0=omega0,
    )


# ── Hierarchy ───────────────────────────────────────────────────────────────


@dataclass(frozen=True, order=True)
class HierarchyIndex:
    counts: tuple[int, ...]

    @property
    def depth(self) -> int:
        return sum(self.counts)

    def shifted(self, k: int, step: int) -> "HierarchyIndex":
        counts = list(self.counts)
        counts[k] += step
        return HierarchyIndex(tuple(counts))


def _compositions(total: int, parts: int):
    # descending lexicographic: (total, 0, ...) first
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


def hierarchy_size(n_exponentials: int, depth: int) -> int:
    return math.comb(n_exponentials + depth, depth)


def enumerate_hierarchy(n_exponentials: int, depth: int, cap: int | None = None) -> list[HierarchyIndex]:
    """
    All multi-indices of length ``n_exponentials`` with sum ≤ ``depth``,
    graded by depth and lexicographic within a depth.
    """
    if n_exponentials < 1:
        raise ConfigError(f"n_exponentials must be >= 1, got {n_exponentials}")
    if depth < 0:
        raise ConfigError(f"depth must be >= 0, got {depth}")
    cap = get_settings().hierarchy_cap if cap is None else cap
    size = hierarchy_size(n_exponentials, depth)
    if size > cap:
        raise HierarchyTooLargeError(
            f"hierarchy with {n_exponentials} exponentials at depth {depth} has {size} ADOs "
            f"(cap {cap}); lower depth or n_matsubara, or raise QTHERMO_HIERARCHY_CAP"
        )
    return [HierarchyIndex(c) for level in range(depth + 1) for c in _compositions(level, n_exponentials)]


# ── Parameters, state, trajectory ───────────────────────────────────────────


@dataclass(frozen=True)
class HeomParams:
    depth: int = 4
    use_terminator: bool = True
    scaling: bool = True
    integrator: IntegratorName = "adaptive_rk45"
    dt: float = 0.05
    rtol: float | None = None
    atol: float | None = None

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ConfigError(f"hierarchy depth must be >= 1, got {self.depth}")
        if self.integrator not in ("adaptive_rk45", "fixed_rk4"):
            raise ConfigError(f"unknown integrator {self.integrator!r}")
        for name in ("dt", "rtol", "atol"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ConfigError(f"{name} must be > 0, got {value}")


@dataclass
class HeomState:
    """ADO stack in canonical hierarchy order; ``ados[0]`` is the reduced state."""

    ados: np.ndarray
    index: list[HierarchyIndex]
    time: float = 0.0
    index_map: dict[HierarchyIndex, int] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.index_map is None:
            self.index_map = {idx: pos for pos, idx in enumerate(self.index)}

    @property
    def rho(self) -> np.ndarray:
        return self.ados[0]

    def ado(self, idx: HierarchyIndex) -> np.ndarray:
        return self.ados[self.index_map[idx]]

    def vector(self) -> np.ndarray:
        return self.ados.reshape(-1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    observables: dict[str, np.ndarray] = field(default_factory=dict)
    final_state: HeomState | None = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("trajectory times must be strictly increasing")
        if not self.observables:
            self.observables = bloch_observables(self.states)

    def expect(self, op: np.ndarray) -> np.ndarray:
        return expectation(op, self.states)

    def __len__(self) -> int:
        return len(self.times)


def bloch_observables(states: np.ndarray) -> dict[str, np.ndarray]:
    """⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩ of the first qubit of the register; empty otherwise."""
    dim = states.shape[-1]
    if not is_qubit_register(dim):
        return {}
    n = n_qubits(dim)
    return {
        name: expectation(embed(p, 0, n), states)
        for name, p in zip(("sx", "sy", "sz"), PAULIS)
    }


def validate_grid(t_grid) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ConfigError("time grid must be a non-empty 1-D array")
    if np.any(np.diff(t_grid) <= 0):
        raise ConfigError("time grid must be strictly increasing")
    return t_grid


# ── Generator ───────────────────────────────────────────────────────────────


def _left(a: np.ndarray) -> sp.csr_matrix:
    return sp.kron(sp.csr_matrix(a), sp.identity(a.shape[0], format="csr"), format="csr")


def _right(b: np.ndarray) -> sp.csr_matrix:
    return sp.kron(sp.identity(b.shape[0], format="csr"), sp.csr_matrix(b.T), format="csr")


def commutator(a: np.ndarray) -> sp.csr_matrix:
    """Superoperator ρ ↦ [a, ρ] on row-major vec(ρ)."""
    return (_left(a) - _right(a)).tocsr()


def anticommutator(a: np.ndarray) -> sp.csr_matrix:
    return (_left(a) + _right(a)).tocsr()


class HeomSolver:
    """
    Assembles the HEOM generator for one (model, bath, params) triple and
    propagates ADO stacks. The bath part is built once; the Hamiltonian part
    is cached per control segment.
    """

    def __init__(self, model: SystemModel, bath: BathExpansion, params: HeomParams):
        settings = get_settings()
        self.model = model
        self.bath = bath
        self.params = params
        self.rtol = params.rtol if params.rtol is not None else settings.rtol
        self.atol = params.atol if params.atol is not None else settings.atol
        self.index = enumerate_hierarchy(bath.n_exponentials, params.depth)
        self.index_map = {idx: pos for pos, idx in enumerate(self.index)}
        self.n_ados = len(self.index)
        self._bath_part = self._assemble_bath_part()
        self._generators: dict[int | None, sp.csr_matrix] = {}
        logger.debug(
            "heom assembled  ados=%d  dim=%d  exponentials=%d  nnz=%d",
            self.n_ados, model.dim, bath.n_exponentials, self._bath_part.nnz,
        )

    def _assemble_bath_part(self) -> sp.csr_matrix:
        d2 = self.model.dim**2
        s = self.model.coupling_op
        comm_s = commutator(s)
        anti_s = anticommutator(s)
        phi = -1j * comm_s
        identity = sp.identity(d2, format="csr", dtype=complex)

        decay = np.array([sum(n * nu for n, nu in zip(idx.counts, self.bath.rates)) for idx in self.index])
        blocks = sp.kron(sp.diags(-decay.astype(complex)), identity, format="csr")

        for k, (c_k, nu_k) in enumerate(self.bath.terms):
            if self.params.scaling and c_k == 0:
                # scaled couplings vanish with |c_k|
                continue
            a_k = abs(c_k) if self.params.scaling else 1.0
            theta = -1j * (c_k.real * comm_s + 1j * c_k.imag * anti_s)
            up_rows, up_cols, up_vals = [], [], []
            down_rows, down_cols, down_vals = [], [], []
            for pos, idx in enumerate(self.index):
                n_k = idx.counts[k]
                upper = self.index_map.get(idx.shifted(k, +1))
                if upper is not None:
                    up_rows.append(pos)
                    up_cols.append(upper)
                    up_vals.append(math.sqrt((n_k + 1) * a_k) if self.params.scaling else 1.0)
                if n_k > 0:
                    down_rows.append(pos)
                    down_cols.append(self.index_map[idx.shifted(k, -1)])
                    down_vals.append(math.sqrt(n_k / a_k) if self.params.scaling else float(n_k))
            shape = (self.n_ados, self.n_ados)
            up = sp.csr_matrix((up_vals, (up_rows, up_cols)), shape=shape)
            down = sp.csr_matrix((down_vals, (down_rows, down_cols)), shape=shape)
            blocks = blocks + sp.kron(up, phi, format="csr") + sp.kron(down, theta, format="csr")

        delta = self.bath.terminator_strength
        if self.params.use_terminator and delta != 0:
            if delta > 0:
                terminator = -delta * (comm_s @ comm_s)
                blocks = blocks + sp.kron(sp.identity(self.n_ados, format="csr"), terminator, format="csr")
            else:
                logger.warning(
                    "terminator skipped  delta=%.3g < 0 (omitted Matsubara poles below omega_c; raise n_matsubara)",
                    delta,
                )
        return blocks.tocsr()

    def generator(self, segment: int | None = None) -> sp.csr_matrix:
        """Full sparse generator with the Hamiltonian of ``segment`` (None: static)."""
        if segment not in self._generators:
            h = self.model.h_base if segment is None else self.model.segment_hamiltonian(segment)
            liouville = -1j * commutator(h)
            system = sp.kron(sp.identity(self.n_ados, format="csr"), liouville, format="csr")
            self._generators[segment] = (self._bath_part + system).tocsr()
        return self._generators[segment]

    def generator_at(self, t: float) -> sp.csr_matrix:
        control = self.model.control
        return self.generator(None if control is None else control.segment_index(t))

    def initial_state(self, rho: np.ndarray | None = None) -> HeomState:
        d = self.model.dim
        ados = np.zeros((self.n_ados, d, d), dtype=complex)
        ados[0] = self.model.initial_state if rho is None else rho
        return HeomState(ados=ados, index=self.index, time=0.0, index_map=self.index_map)

    def _pieces(self, t0: float, t1: float) -> list[tuple[float, float, int | None]]:
        control = self.model.control
        if control is None:
            return [(t0, t1, None)]
        cuts = [t0] + [b for b in control.boundaries() if t0 < b < t1] + [t1]
        return [(a, b, control.segment_index(0.5 * (a + b))) for a, b in zip(cuts[:-1], cuts[1:])]

    def evolve(self, state: HeomState, t_grid) -> tuple[np.ndarray, HeomState]:
        """
        Propagate ``state`` (taken to sit at ``t_grid[0]``) across ``t_grid``.

        Returns the level-0 state at every grid time and the final ADO stack.
        Control segments are integrated separately so the integrator never
        steps across a discontinuity.
        """
        t_grid = validate_grid(t_grid)
        d = self.model.dim
        out = np.empty((len(t_grid), d, d), dtype=complex)
        out[0] = state.ados[0]
        y = state.vector().astype(complex)

        for start, stop, segment in self._pieces(t_grid[0], t_grid[-1]):
            lo = np.searchsorted(t_grid, start, side="right")
            hi = np.searchsorted(t_grid, stop, side="right")
            inner = t_grid[lo:hi]
            local = np.concatenate(([start], inner))
            if inner.size == 0 or inner[-1] < stop:
                local = np.append(local, stop)
            samples, y = evolve_linear(
                self.generator(segment),
                y,
                local,
                integrator=self.params.integrator,
                rtol=self.rtol,
                atol=self.atol,
                dt=self.params.dt,
            )
            for j in range(inner.size):
                out[lo + j] = samples[1 + j].reshape(self.n_ados, d, d)[0]

        final = HeomState(
            ados=y.reshape(self.n_ados, d, d),
            index=self.index,
            time=float(t_grid[-1]),
            index_map=self.index_map,
        )
        return out, final


def heom_generator(
    model: SystemModel,
    bath: BathExpansion,
    params: HeomParams,
    t: float = 0.0,
) -> sp.csr_matrix:
    """Sparse HEOM generator acting on the flattened ADO stack at time ``t``."""
    return HeomSolver(model, bath, params).generator_at(t)


# ── Propagation ─────────────────────────────────────────────────────────────


def propagate(model: SystemModel, bath: BathExpansion, params: HeomParams, t_grid) -> Trajectory:
    """Level-0 trajectory sampled on ``t_grid`` (which must start at 0)."""
    t_grid = validate_grid(t_grid)
    if t_grid[0] != 0.0:
        raise ConfigError(f"time grid must start at 0, got {t_grid[0]}")
    solver = HeomSolver(model, bath, params)
    logger.info(
        "heom propagate  ados=%d  dim=%d  t_end=%.1f  samples=%d",
        solver.n_ados, model.dim, t_grid[-1], len(t_grid),
    )
    states, final = solver.evolve(solver.initial_state(), t_grid)
    return Trajectory(times=t_grid, states=states, final_state=final)


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    rho: np.ndarray
    time: float
    residual: float


SteadyMethod = Literal["auto", "direct", "propagate"]
STATIONARY_RESIDUAL = 1e-9
COMMUTANT_TOL = 1e-10


def conserved_operator_count(model: SystemModel) -> int:
    """
    Dimension of the set of operators commuting with both H_S and S. Above one
    the bath leaves a sector untouched and the steady state depends on ρ(0).
    """
    stacked = np.vstack([commutator(a).toarray() for a in (model.h_base, model.coupling_op)])
    singular = np.linalg.svd(stacked, compute_uv=False)
    return int(np.sum(singular < COMMUTANT_TOL * max(singular[0], 1.0)))


def _solve_stationary(solver: HeomSolver) -> SteadyStateResult:
    generator = solver.generator()
    d = solver.model.dim
    size = generator.shape[0]
    trace_cols = np.arange(d) * (d + 1)

    # row 0 is ρ_0[0, 0]; Tr ρ_0 is conserved, so that equation is redundant
    system = generator.tolil()
    system[0, :] = 0.0
    system[0, trace_cols] = 1.0
    rhs = np.zeros(size, dtype=complex)
    rhs[0] = 1.0

    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(system.tocsc(), rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SteadyStateError(
                f"hierarchy has no unique steady state ({exc}); the bath may not couple every sector",
                residual=math.inf,
                time=math.inf,
            ) from exc

    scale = max(float(np.max(np.abs(x))), 1.0)
    residual = float(np.max(np.abs(generator @ x))) / scale if np.all(np.isfinite(x)) else math.inf
    if residual > STATIONARY_RESIDUAL:
        raise SteadyStateError(
            f"stationary solve is ill-conditioned (residual {residual:.3e}); no unique steady state",
            residual=residual,
            time=math.inf,
        )
    rho = x[: d * d].reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    logger.info("steady state solved  ados=%d  residual=%.2e", solver.n_ados, residual)
    return SteadyStateResult(rho=rho, time=math.inf, residual=residual)


def steady_state(
    model: SystemModel,
    bath: BathExpansion,
    params: HeomParams,
    *,
    method: SteadyMethod | None = None,
    tolerance: float | None = None,
    probe_window: float | None = None,
    t_max: float | None = None,
) -> SteadyStateResult:
    """
    Stationary level-0 state of the hierarchy.

    ``direct`` solves L x = 0 for the whole ADO stack with the first equation
    replaced by Tr ρ_0 = 1; the result has ``time = inf``. ``propagate``
    steps in probe windows until ρ_0 moves less than ``tolerance`` in trace
    distance across one window and records when that happened. ``auto``
    solves directly unless the model conserves more than the identity.
    """
    if not model.is_time_independent:
        raise ConfigError("steady_state needs a time-independent Hamiltonian (no control)")
    settings = get_settings()
    method = settings.steady_method if method is None else method
    tolerance = settings.steady_tolerance if tolerance is None else tolerance
    probe_window = settings.steady_probe_window if probe_window is None else probe_window
    t_max = settings.steady_t_max if t_max is None else t_max

    if method not in ("auto", "direct", "propagate"):
        raise ConfigError(f"unknown steady-state method {method!r}")
    if method == "auto":
        conserved = conserved_operator_count(model)
        method = "direct" if conserved == 1 else "propagate"
        logger.debug("steady method  auto -> %s  conserved_operators=%d", method, conserved)

    solver = HeomSolver(model, bath, params)
    if method == "direct":
        return _solve_stationary(solver)

    state = solver.initial_state()
    residual = math.inf
    while state.time < t_max:
        previous = state.rho.copy()
        _, state = solver.evolve(state, [state.time, state.time + probe_window])
        residual = trace_norm_distance(state.rho, previous)
        if residual < tolerance:
            logger.info("steady state reached  t=%.1f  residual=%.2e  ados=%d", state.time, residual, solver.n_ados)
            return SteadyStateResult(rho=state.rho.copy(), time=state.time, residual=residual)

    logger.warning("steady state not reached  t_max=%.1f  residual=%.2e", t_max, residual)
    raise SteadyStateError(
        f"no steady state by t={state.time:.1f} (last residual {residual:.3e} > {tolerance:g})",
        residual=residual,
        time=state.time,
    )


# ── Convergence ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ConvergenceRow:
    axis: Literal["depth", "n_matsubara"]
    depth: int
    n_matsubara: int
    deviation: float | None
    converged: bool


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]

    @property
    def converged(self) -> bool:
        """True when the last refinement step on every swept axis is below threshold."""
        last: dict[str, ConvergenceRow] = {}
        for row in self.rows:
            if row.deviation is not None:
                last[row.axis] = row
        return bool(last) and all(r.converged for r in last.values())

    def first_converged(self, axis: str) -> ConvergenceRow | None:
        return next((r for r in self.rows if r.axis == axis and r.converged), None)


def convergence_sweep(
    model: SystemModel,
    sd: SpectralDensity,
    T: float,
    params: HeomParams,
    depths: list[int],
    n_matsubaras: list[int],
    t_grid,
    observable: np.ndarray | None = None,
) -> ConvergenceReport:
    """
    Max-over-time deviation of ⟨O⟩(t) between successive truncations:
    depths swept at the largest N_k, then N_k swept at the largest depth.
    O defaults to Σσ_z for a qubit register and to H_S otherwise.
    """
    if not depths or not n_matsubaras:
        raise ConfigError("convergence_sweep needs non-empty depth and n_matsubara lists")
    depths = sorted(set(depths))
    n_matsubaras = sorted(set(n_matsubaras))
    observable = model.reference_observable if observable is None else check_hermitian(observable, "observable")
    cache: dict[tuple[int, int], np.ndarray] = {}

    def signal(depth: int, n_k: int) -> np.ndarray:
        key = (depth, n_k)
        if key not in cache:
            trajectory = propagate(model, matsubara_expansion(sd, T, n_k), replace(params, depth=depth), t_grid)
            cache[key] = trajectory.expect(observable)
        return cache[key]

    rows: list[ConvergenceRow] = []
    sweeps = (
        ("depth", [(L, n_matsubaras[-1]) for L in depths]),
        ("n_matsubara", [(depths[-1], n) for n in n_matsubaras]),
    )
    for axis, settings_list in sweeps:
        previous = None
        for depth, n_k in settings_list:
            current = signal(depth, n_k)
            deviation = None if previous is None else float(np.max(np.abs(current - previous)))
            rows.append(
                ConvergenceRow(
                    axis=axis,
                    depth=depth,
                    n_matsubara=n_k,
                    deviation=deviation,
                    converged=deviation is not None and deviation < CONVERGENCE_THRESHOLD,
                )
            )
            logger.info("convergence  axis=%s  depth=%d  n_matsubara=%d  deviation=%s", axis, depth, n_k, deviation)
            previous = current
    return ConvergenceReport(rows=rows)
