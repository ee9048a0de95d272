"""
Drude–Lorentz bath: spectral density, Matsubara exponential decomposition of
the bath correlation function, and the Bose–Einstein occupation.

All frequencies and temperatures are in units of ω0 (k_B = ħ = 1).
The correlation function normalization is

    C(t) = (1/π) ∫_0^∞ dω J(ω) [coth(ω/2T) cos ωt − i sin ωt]

and is shared by the HEOM and Bloch–Redfield solvers.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from qthermo.errors import ConfigError, DegeneratePoleError

logger = logging.getLogger(__name__)

MAX_AUTO_MATSUBARA = 10
AUTO_TERMINATOR_FRACTION = 0.01


# ── Types ───────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class SpectralDensity:
    """J(ω) = 2 λ ω_c ω / (ω² + ω_c²)."""

    lam: float
    omega_c: float

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.omega_c <= 0:
            raise ConfigError(f"omega_c must be > 0, got {self.omega_c}")


@dataclass(frozen=True)
class BathExpansion:
    """
    Exponential decomposition C(t) ≈ Σ_k c_k e^{−ν_k t} + 2Δ δ(t).

    ``coefficients[0]`` / ``rates[0]`` is the Drude pole (ν_0 = ω_c); the
    remaining entries are Matsubara poles ν_k = 2πkT.
    """

    coefficients: tuple[complex, ...]
    rates: tuple[float, ...]
    terminator_strength: float
    temperature: float
    n_matsubara: int

    @property
    def terms(self) -> list[tuple[complex, float]]:
        return list(zip(self.coefficients, self.rates))

    @property
    def n_exponentials(self) -> int:
        return len(self.rates)

    @property
    def is_trivial(self) -> bool:
        return all(c == 0 for c in self.coefficients) and self.terminator_strength == 0


# ── Operations ──────────────────────────────────────────────────────────────


def spectral_density(sd: SpectralDensity, omega: float | np.ndarray) -> float | np.ndarray:
    """Drude–Lorentz J(ω), odd in ω; peak magnitude λ at |ω| = ω_c."""
    omega = np.asarray(omega, dtype=float)
    value = 2.0 * sd.lam * sd.omega_c * omega / (omega**2 + sd.omega_c**2)
    return float(value) if value.ndim == 0 else value


def thermal_occupation(omega: float, T: float) -> float:
    """Bose–Einstein occupation n(ω) = 1/(e^{ω/T} − 1) for ω > 0."""
    if omega <= 0:
        raise ConfigError(
            f"thermal_occupation needs omega > 0 (got {omega}); "
            "use detailed balance for negative Bohr frequencies"
        )
    if T <= 0:
        raise ConfigError(f"temperature must be > 0, got {T}")
    return 1.0 / math.expm1(omega / T)


def _check_resonance(sd: SpectralDensity, T: float) -> None:
    # cot(ω_c/2T) has a pole exactly where some ν_k = 2πkT hits ω_c
    ratio = sd.omega_c / (2.0 * math.pi * T)
    k = round(ratio)
    if k >= 1 and abs(ratio - k) < 1e-10 * max(1.0, ratio):
        raise DegeneratePoleError(
            f"Matsubara pole nu_{k} = 2*pi*{k}*T coincides with omega_c = {sd.omega_c}; "
            "perturb the temperature slightly or change omega_c"
        )


def matsubara_expansion(sd: SpectralDensity, T: float, n_matsubara: int) -> BathExpansion:
    """
    Standard Drude–Lorentz pole decomposition.

    c_0 = λω_c (cot(ω_c/2T) − i), ν_0 = ω_c;
    c_k = 4λω_c ν_k T / (ν_k² − ω_c²), ν_k = 2πkT for k = 1..N_k;
    Δ = 2λT/ω_c − Re(c_0)/ν_0 − Σ_k c_k/ν_k.
    """
    if T <= 0:
        raise ConfigError(f"temperature must be > 0, got {T}")
    if n_matsubara < 0:
        raise ConfigError(f"n_matsubara must be >= 0, got {n_matsubara}")
    _check_resonance(sd, T)

    lam, wc = sd.lam, sd.omega_c
    c0 = lam * wc * (1.0 / math.tan(wc / (2.0 * T)) - 1j)
    coefficients: list[complex] = [complex(c0)]
    rates: list[float] = [wc]
    for k in range(1, n_matsubara + 1):
        nu = 2.0 * math.pi * k * T
        coefficients.append(complex(4.0 * lam * wc * nu * T / (nu**2 - wc**2)))
        rates.append(nu)

    # Σ_{k>N_k} c_k/ν_k via the cot partial-fraction identity
    delta = 2.0 * lam * T / wc - c0.real / wc
    delta -= sum(c.real / nu for c, nu in zip(coefficients[1:], rates[1:]))

    return BathExpansion(
        coefficients=tuple(coefficients),
        rates=tuple(rates),
        terminator_strength=float(delta),
        temperature=float(T),
        n_matsubara=int(n_matsubara),
    )


def default_n_matsubara(sd: SpectralDensity, T: float) -> int:
    """Smallest N_k with Δ < 1% of 2λT/ω_c, capped at 10."""
    if sd.lam == 0:
        return 0
    scale = 2.0 * sd.lam * T / sd.omega_c
    for n in range(MAX_AUTO_MATSUBARA + 1):
        if matsubara_expansion(sd, T, n).terminator_strength < AUTO_TERMINATOR_FRACTION * scale:
            logger.debug("auto n_matsubara=%d  T=%.4g  omega_c=%.4g", n, T, sd.omega_c)
            return n
    return MAX_AUTO_MATSUBARA


def correlation_function(expansion: BathExpansion, t: float | np.ndarray) -> complex | np.ndarray:
    """Σ_k c_k e^{−ν_k t}; the δ(t) remainder lives in ``terminator_strength``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ConfigError("correlation_function needs t >= 0")
    c = np.asarray(expansion.coefficients, dtype=complex)
    nu = np.asarray(expansion.rates, dtype=float)
    value = np.exp(-np.multiply.outer(t_arr, nu)) @ c
    return complex(value) if value.ndim == 0 else value
