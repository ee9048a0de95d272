"""
Thermometric figures of merit: Bloch vectors, quantum Fisher information with
respect to temperature (Bloch and spectral forms), the QSNR Q_T = T² F_T,
finite-difference ∂_T ρ over paired propagations, and the equilibrium
benchmark (ω0/2T)² sech²(ω0/2T).
"""

import logging
import math
import warnings
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from qthermo.config import get_settings
from qthermo.errors import DerivativeNoiseWarning, InvalidStateError, SingularPurityError
from qthermo.services.heom import SystemModel, validate_grid
from qthermo.services.operators import PAULIS, is_hermitian
from qthermo.services.scenario import Scenario

logger = logging.getLogger(__name__)

EPS_PURE = 1e-9
EPS_RANK = 1e-12
DEFAULT_RELATIVE_STEP = 1e-3
NOISE_FRACTION = 1e-2
# relative accuracy of a linear-algebra steady state
EXACT_SOLVE_RTOL = 1e-12
TRACE_TOL = 1e-8


# ── Types ───────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class BlochVector:
    sx: float
    sy: float
    sz: float

    @classmethod
    def from_array(cls, values) -> "BlochVector":
        sx, sy, sz = (float(v) for v in values)
        return cls(sx, sy, sz)

    def as_array(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


@dataclass(frozen=True)
class MetrologyPoint:
    time: float
    temperature: float
    qfi: float
    qsnr: float
    bloch: BlochVector
    dbloch_dT: BlochVector


@dataclass(frozen=True, eq=False)
class TemperatureDerivative:
    """ρ(T) ≈ (ρ_{T+δ} + ρ_{T−δ})/2 and ∂_T ρ at each grid time."""

    times: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    delta: float
    n_matsubara: int | None


@dataclass
class QsnrSeries:
    points: list[MetrologyPoint]

    @property
    def best(self) -> MetrologyPoint:
        return max(self.points, key=lambda p: p.qsnr)

    @property
    def final(self) -> MetrologyPoint:
        return self.points[-1]

    def qsnr_values(self) -> np.ndarray:
        return np.array([p.qsnr for p in self.points])


# ── Bloch vector and QFI ────────────────────────────────────────────────────


def bloch_vector(rho: np.ndarray) -> BlochVector:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise InvalidStateError(f"bloch_vector needs a 2x2 matrix, got {rho.shape}")
    return BlochVector.from_array(np.real([np.trace(p @ rho) for p in PAULIS]))


def qfi_bloch(s: BlochVector, ds: BlochVector) -> float:
    """
    F_T = |∂_T s|² + (s·∂_T s)² / (1 − |s|²).

    At the Bloch sphere surface (|s| ≥ 1 − 1e−9) only tangential derivatives
    are allowed; a radial component raises SingularPurityError.
    """
    s_vec, ds_vec = s.as_array(), ds.as_array()
    norm2 = float(s_vec @ s_vec)
    tangential = float(ds_vec @ ds_vec)
    radial = float(s_vec @ ds_vec)
    if math.sqrt(norm2) >= 1.0 - EPS_PURE:
        if abs(radial) < EPS_PURE:
            return tangential
        raise SingularPurityError(
            f"radial Bloch derivative {radial:.3g} on a pure state (|s| = {math.sqrt(norm2):.12f})"
        )
    return tangential + radial**2 / (1.0 - norm2)


def qfi_mixed(rho: np.ndarray, drho: np.ndarray, eps_rank: float = EPS_RANK) -> float:
    """F_T = Σ_{i,j} 2|⟨ψ_i|∂_T ρ|ψ_j⟩|² / (p_i + p_j), pairs with p_i + p_j ≤ eps_rank skipped."""
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    if not is_hermitian(drho, 1e-8):
        raise InvalidStateError("drho must be Hermitian")
    if abs(np.trace(drho)) > TRACE_TOL:
        raise InvalidStateError(f"drho must be traceless, got |trace| {abs(np.trace(drho)):.3g}")
    p, vectors = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    p = np.clip(p, 0.0, None)
    elements = np.abs(vectors.conj().T @ drho @ vectors) ** 2
    denom = p[:, None] + p[None, :]
    mask = denom > eps_rank
    return float(np.sum(2.0 * elements[mask] / denom[mask]))


def qsnr(T: float, qfi: float) -> float:
    if T <= 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    if qfi < 0:
        raise ValueError(f"qfi must be >= 0, got {qfi}")
    return T * T * qfi


# ── Thermal reference ───────────────────────────────────────────────────────


def thermal_benchmark(T: float, omega0: float = 1.0) -> float:
    """Equilibrium qubit QSNR (ω0/2T)² sech²(ω0/2T)."""
    if T <= 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    x = omega0 / (2.0 * T)
    # sech x = 2e^{−x}/(1 + e^{−2x}) stays finite for large x
    sech = 2.0 * math.exp(-x) / (1.0 + math.exp(-2.0 * x))
    return x * x * sech * sech


def thermal_benchmark_asymptotic(T: float, omega0: float = 1.0) -> float:
    """Low-temperature form (ω0/T)² e^{−ω0/T}."""
    if T <= 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    return (omega0 / T) ** 2 * math.exp(-omega0 / T)


def gibbs_state(h: np.ndarray, T: float) -> np.ndarray:
    energies, vectors = np.linalg.eigh(h)
    weights = np.exp(-(energies - energies.min()) / T)
    weights /= weights.sum()
    return (vectors * weights) @ vectors.conj().T


def thermal_qfi(h: np.ndarray, T: float) -> float:
    """Exact F_T of a Gibbs state: Var(H)/T⁴."""
    energies = np.linalg.eigvalsh(h)
    weights = np.exp(-(energies - energies.min()) / T)
    weights /= weights.sum()
    mean = weights @ energies
    return float(weights @ (energies - mean) ** 2) / T**4


def reduced_qubit_state(rho: np.ndarray, qubit: int) -> np.ndarray:
    """Partial trace of a two-qubit state onto ``qubit`` (0 or 1)."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise InvalidStateError(f"reduced_qubit_state needs a 4x4 matrix, got {rho.shape}")
    if qubit not in (0, 1):
        raise ValueError(f"qubit must be 0 or 1, got {qubit}")
    tensor = rho.reshape(2, 2, 2, 2)
    return np.einsum("ijkj->ik", tensor) if qubit == 0 else np.einsum("jijk->ik", tensor)


# ── Temperature derivative ──────────────────────────────────────────────────


def _propagate_at(scenario: Scenario, T: float, t_grid: np.ndarray, n_matsubara: int | None):
    return scenario.propagate(T, t_grid, n_matsubara=n_matsubara).states, float(t_grid[-1])


def _steady_at(scenario: Scenario, T: float, t_grid: np.ndarray, n_matsubara: int | None):
    result = scenario.steady_state(T, n_matsubara=n_matsubara)
    return result.rho[None, ...], result.time


def _paired(fn, scenario, temperatures, t_grid, n_k, executor: Executor | None) -> list[tuple[np.ndarray, float]]:
    if executor is None:
        return [fn(scenario, T, t_grid, n_k) for T in temperatures]
    futures = [executor.submit(fn, scenario, T, t_grid, n_k) for T in temperatures]
    return [f.result() for f in futures]


def _derivative(fn, scenario: Scenario, T: float, t_grid, delta: float | None, richardson: bool, executor):
    if T <= 0:
        raise ValueError(f"temperature must be > 0, got {T}")
    delta = DEFAULT_RELATIVE_STEP * T if delta is None else delta
    if delta <= 0 or delta >= T:
        raise ValueError(f"delta must lie in (0, T), got {delta}")
    # one truncation for every temperature of the stencil
    n_k = scenario.resolve_n_matsubara(T) if scenario.uses_heom else None

    temperatures = [T + delta, T - delta]
    if richardson:
        temperatures += [T + 0.5 * delta, T - 0.5 * delta]
    results = _paired(fn, scenario, temperatures, t_grid, n_k, executor)
    states = [r[0] for r in results]
    settled = max(r[1] for r in results)

    coarse = (states[0] - states[1]) / (2.0 * delta)
    drho = coarse
    if richardson:
        fine = (states[2] - states[3]) / delta
        drho = (4.0 * fine - coarse) / 3.0
    rho = 0.5 * (states[0] + states[1])
    drho = 0.5 * (drho + np.conj(np.swapaxes(drho, -1, -2)))

    # stationary solves report +inf (HEOM direct) or NaN (BRME)
    _check_noise(scenario, drho, delta, exact=not math.isfinite(settled))
    return rho, drho, delta, n_k, settled


def _check_noise(scenario: Scenario, drho: np.ndarray, delta: float, *, exact: bool = False) -> None:
    scale = float(np.max(np.abs(drho), initial=0.0))
    if scale == 0.0:
        return
    if exact:
        rtol = EXACT_SOLVE_RTOL
    else:
        rtol = getattr(scenario.solver, "rtol", None) or get_settings().rtol
    noise = rtol / delta
    if noise > NOISE_FRACTION * scale:
        message = (
            f"finite-difference step delta={delta:.3g} is near the solver noise floor "
            f"(rtol/delta={noise:.3g} vs max|drho/dT|={scale:.3g}); increase delta or tighten rtol"
        )
        logger.warning(message)
        warnings.warn(message, DerivativeNoiseWarning, stacklevel=3)


def temperature_derivative(
    scenario: Scenario,
    T: float,
    t_grid,
    delta: float | None = None,
    *,
    richardson: bool = False,
    executor: Executor | None = None,
) -> TemperatureDerivative:
    """
    Central difference (ρ_{T+δ}(t) − ρ_{T−δ}(t)) / 2δ over two full
    propagations with identical grid and truncation; δ defaults to 1e−3·T.

    ``richardson`` adds the T ± δ/2 pair and returns (4D(δ/2) − D(δ))/3.
    ``executor`` runs the propagations concurrently.
    """
    t_grid = validate_grid(t_grid)
    rho, drho, delta, n_k, _ = _derivative(_propagate_at, scenario, T, t_grid, delta, richardson, executor)
    return TemperatureDerivative(times=t_grid, rho=rho, drho=drho, delta=delta, n_matsubara=n_k)


def steady_temperature_derivative(
    scenario: Scenario,
    T: float,
    delta: float | None = None,
    *,
    richardson: bool = False,
    executor: Executor | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """
    (ρ_ss(T), ∂_T ρ_ss, convergence time) from steady states at the stencil
    temperatures; the time is the latest of the stencil (+inf for the direct
    HEOM solve, NaN for BRME).
    """
    rho, drho, _, _, settled = _derivative(_steady_at, scenario, T, np.zeros(1), delta, richardson, executor)
    return rho[0], drho[0], settled


# ── QSNR ────────────────────────────────────────────────────────────────────


def _qfi(rho: np.ndarray, drho: np.ndarray) -> tuple[float, BlochVector, BlochVector]:
    if rho.shape == (2, 2):
        s, ds = bloch_vector(rho), bloch_vector(drho)
        return qfi_bloch(s, ds), s, ds
    # registers report the first qubit's Bloch data alongside the full QFI
    s = bloch_vector(reduced_qubit_state(rho, 0)) if rho.shape == (4, 4) else BlochVector(0.0, 0.0, 0.0)
    ds = bloch_vector(reduced_qubit_state(drho, 0)) if rho.shape == (4, 4) else BlochVector(0.0, 0.0, 0.0)
    return qfi_mixed(rho, drho), s, ds


def metrology_point(time: float, T: float, rho: np.ndarray, drho: np.ndarray) -> MetrologyPoint:
    qfi, s, ds = _qfi(rho, drho)
    return MetrologyPoint(time=float(time), temperature=T, qfi=qfi, qsnr=qsnr(T, qfi), bloch=s, dbloch_dT=ds)


def qsnr_trajectory(
    scenario: Scenario,
    T: float,
    t_grid,
    delta: float | None = None,
    *,
    richardson: bool = False,
    executor: Executor | None = None,
) -> QsnrSeries:
    """Q_T(t) on ``t_grid``; Bloch QFI for a qubit, spectral QFI for larger systems."""
    derivative = temperature_derivative(scenario, T, t_grid, delta, richardson=richardson, executor=executor)
    points = [
        metrology_point(t, T, rho, drho)
        for t, rho, drho in zip(derivative.times, derivative.rho, derivative.drho)
    ]
    series = QsnrSeries(points=points)
    logger.info(
        "qsnr trajectory  T=%.4g  lambda=%.4g  omega_c=%.4g  max=%.5g  final=%.5g",
        T, scenario.spectral_density.lam, scenario.spectral_density.omega_c, series.best.qsnr, series.final.qsnr,
    )
    return series


def steady_qsnr(
    scenario: Scenario,
    T: float,
    delta: float | None = None,
    *,
    richardson: bool = False,
    executor: Executor | None = None,
) -> MetrologyPoint:
    rho, drho, settled = steady_temperature_derivative(scenario, T, delta, richardson=richardson, executor=executor)
    return metrology_point(settled, T, rho, drho)


def thermal_reference(model: SystemModel, T: float) -> float:
    """Equilibrium QSNR of the model's bare Hamiltonian."""
    if model.dim == 2:
        return thermal_benchmark(T, model.omega0)
    return qsnr(T, thermal_qfi(model.h_base, T))
