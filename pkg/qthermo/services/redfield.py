"""
Bloch–Redfield master equation without the secular approximation.

    dρ/dt = −i[H_S, ρ] − [S, Λρ − ρΛ†],   Λ = Σ_ω Γ(ω) S(ω)

S(ω) = Σ_{E_n − E_m = ω} Π_m S Π_n lowers the energy by ω, and
Γ(ω) = ∫_0^∞ e^{iωτ} C(τ) dτ uses the same C(t) normalization as the HEOM
bath expansion, so Re Γ(ω) = J(ω)(1 + n(ω)) and Re Γ(ω)/Re Γ(−ω) = e^{ω/T}.
With ``include_lamb_shift`` the imaginary part of Γ enters Λ directly.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from qthermo.config import get_settings
from qthermo.errors import ConfigError, SteadyStateError
from qthermo.services.bath import SpectralDensity, spectral_density
from qthermo.services.heom import SystemModel, Trajectory, validate_grid
from qthermo.services.integrate import IntegratorName, evolve_linear

logger = logging.getLogger(__name__)

FREQUENCY_TOL = 1e-10
LAMB_SHIFT_RTOL = 1e-8


# ── Types ───────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class BohrDecomposition:
    frequencies: np.ndarray
    jump_ops: tuple[np.ndarray, ...]

    def jump_op(self, omega: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.frequencies - omega)))
        if abs(self.frequencies[i] - omega) > FREQUENCY_TOL:
            raise KeyError(f"no Bohr frequency at {omega}")
        return self.jump_ops[i]


@dataclass(frozen=True)
class RedfieldOptions:
    include_lamb_shift: bool = False
    integrator: IntegratorName = "adaptive_rk45"
    dt: float = 0.05
    rtol: float | None = None
    atol: float | None = None


@dataclass(frozen=True)
class RedfieldRates:
    gamma: dict[float, complex] = field(default_factory=dict)
    include_lamb_shift: bool = False


# ── Bohr decomposition ──────────────────────────────────────────────────────


def bohr_decompose(model: SystemModel) -> BohrDecomposition:
    """
    Split the coupling operator into Bohr-frequency components of H_S.
    Frequencies closer than 1e−10 are merged; components that vanish are
    dropped, so Σ_ω S(ω) = S still holds.
    """
    if not model.is_time_independent:
        raise ConfigError("bohr_decompose needs a time-independent Hamiltonian (no control)")
    energies, vectors = np.linalg.eigh(model.h_base)
    s_eig = vectors.conj().T @ model.coupling_op @ vectors
    dim = model.dim

    # (ω, m, n) for every matrix element: E_n − E_m = ω
    elements = sorted(
        (energies[n] - energies[m], m, n) for m in range(dim) for n in range(dim)
    )
    clusters: list[list[tuple[float, int, int]]] = []
    for element in elements:
        if clusters and element[0] - clusters[-1][0][0] <= FREQUENCY_TOL:
            clusters[-1].append(element)
        else:
            clusters.append([element])

    frequencies, jump_ops = [], []
    for cluster in clusters:
        block = np.zeros((dim, dim), dtype=complex)
        for _, m, n in cluster:
            block[m, n] = s_eig[m, n]
        if np.max(np.abs(block)) < 1e-14:
            continue
        frequencies.append(float(np.mean([omega for omega, _, _ in cluster])))
        jump_ops.append(vectors @ block @ vectors.conj().T)

    logger.debug("bohr decomposition  frequencies=%s", np.round(frequencies, 12).tolist())
    return BohrDecomposition(frequencies=np.array(frequencies), jump_ops=tuple(jump_ops))


# ── Rates ───────────────────────────────────────────────────────────────────


def _emission_kernel(sd: SpectralDensity, T: float, omega: float) -> float:
    """J(ω)(1 + n(ω)) on the whole real line, 2λT/ω_c at ω = 0."""
    if omega == 0.0:
        return 2.0 * sd.lam * T / sd.omega_c
    x = omega / T
    if x > 0:
        return spectral_density(sd, omega) / -math.expm1(-x)
    # J(|ω|) n(|ω|) written without e^{|ω|/T}, which overflows in the far tail
    return spectral_density(sd, -omega) * math.exp(x) / -math.expm1(x)


def _principal_value(sd: SpectralDensity, T: float, omega: float) -> float:
    # P∫ f(x)/(x − ω) dx over the real line
    def f(x: float) -> float:
        return _emission_kernel(sd, T, x)

    scale = max(sd.omega_c, T, abs(omega), 1.0)
    lower = min(omega, 0.0) - 60.0 * max(T, 1e-3) - 10.0 * scale
    upper = max(omega, 0.0) + 50.0 * scale
    core, _ = quad(f, lower, upper, weight="cauchy", wvar=omega, epsrel=LAMB_SHIFT_RTOL, limit=400)
    tail, _ = quad(lambda x: f(x) / (x - omega), upper, np.inf, epsrel=LAMB_SHIFT_RTOL, limit=400)
    head, _ = quad(lambda x: f(x) / (x - omega), -np.inf, lower, epsrel=LAMB_SHIFT_RTOL, limit=400)
    return core + tail + head


def halffourier_rate(
    sd: SpectralDensity,
    T: float,
    omega: float,
    include_lamb_shift: bool = False,
) -> complex:
    """
    Γ(ω) = ∫_0^∞ e^{iωτ} C(τ) dτ.

    Re Γ is J(ω)(1+n(ω)) for ω > 0, J(|ω|)n(|ω|) for ω < 0 and 2λT/ω_c at 0.
    Im Γ = −(1/π) P∫ J(x)(1+n(x))/(x − ω) dx, computed only when requested.
    """
    if T <= 0:
        raise ConfigError(f"temperature must be > 0, got {T}")
    if sd.lam == 0:
        return 0j
    real = _emission_kernel(sd, T, omega)
    imag = -_principal_value(sd, T, omega) / math.pi if include_lamb_shift else 0.0
    return complex(real, imag)


def redfield_rates(
    decomposition: BohrDecomposition,
    sd: SpectralDensity,
    T: float,
    include_lamb_shift: bool = False,
) -> RedfieldRates:
    gamma = {
        float(w): halffourier_rate(sd, T, float(w), include_lamb_shift)
        for w in decomposition.frequencies
    }
    return RedfieldRates(gamma=gamma, include_lamb_shift=include_lamb_shift)


def lamb_shift_hamiltonian(model: SystemModel, sd: SpectralDensity, T: float) -> np.ndarray:
    """H_LS = Σ_ω Im Γ(ω) S(ω)† S(ω)."""
    decomposition = bohr_decompose(model)
    rates = redfield_rates(decomposition, sd, T, include_lamb_shift=True)
    h_ls = np.zeros((model.dim, model.dim), dtype=complex)
    for omega, op in zip(decomposition.frequencies, decomposition.jump_ops):
        h_ls += rates.gamma[float(omega)].imag * (op.conj().T @ op)
    return h_ls


# ── Master equation ─────────────────────────────────────────────────────────


def brme_generator(
    model: SystemModel,
    sd: SpectralDensity,
    T: float,
    options: RedfieldOptions | None = None,
) -> np.ndarray:
    """Dense d²×d² Bloch–Redfield Liouvillian on row-major vec(ρ)."""
    options = options or RedfieldOptions()
    decomposition = bohr_decompose(model)
    rates = redfield_rates(decomposition, sd, T, options.include_lamb_shift)

    dim = model.dim
    eye = np.eye(dim, dtype=complex)
    h, s = model.h_base, model.coupling_op
    lam_op = sum(
        (rates.gamma[float(w)] * op for w, op in zip(decomposition.frequencies, decomposition.jump_ops)),
        np.zeros((dim, dim), dtype=complex),
    )
    lam_dag = lam_op.conj().T

    unitary = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    dissipator = (
        -np.kron(s @ lam_op, eye)
        + np.kron(s, lam_dag.T)
        + np.kron(lam_op, s.T)
        - np.kron(eye, (lam_dag @ s).T)
    )
    return unitary + dissipator


def brme_propagate(
    model: SystemModel,
    sd: SpectralDensity,
    T: float,
    options: RedfieldOptions | None,
    t_grid,
) -> Trajectory:
    options = options or RedfieldOptions()
    t_grid = validate_grid(t_grid)
    if t_grid[0] != 0.0:
        raise ConfigError(f"time grid must start at 0, got {t_grid[0]}")
    settings = get_settings()
    generator = brme_generator(model, sd, T, options)
    logger.info("brme propagate  dim=%d  t_end=%.1f  lamb_shift=%s", model.dim, t_grid[-1], options.include_lamb_shift)
    samples, _ = evolve_linear(
        generator,
        model.initial_state.reshape(-1),
        t_grid,
        integrator=options.integrator,
        rtol=options.rtol or settings.rtol,
        atol=options.atol or settings.atol,
        dt=options.dt,
    )
    states = samples.reshape(len(t_grid), model.dim, model.dim)
    return Trajectory(times=t_grid, states=states)


def brme_steady_state(
    model: SystemModel,
    sd: SpectralDensity,
    T: float,
    options: RedfieldOptions | None = None,
) -> np.ndarray:
    """Unit-trace null vector of the Bloch–Redfield Liouvillian."""
    generator = brme_generator(model, sd, T, options)
    _, singular, vh = np.linalg.svd(generator)
    scale = max(singular[0], 1.0)
    if singular[-2] < 1e-10 * scale:
        raise SteadyStateError(
            "Bloch-Redfield steady state is not unique (lambda = 0 or decoupled sectors)",
            residual=float(singular[-2]),
            time=math.inf,
        )
    rho = vh[-1].conj().reshape(model.dim, model.dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)
