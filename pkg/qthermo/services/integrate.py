"""
Time stepping for linear, time-independent generators dy/dt = A y.

Two schemes share one entry point:
  • ``adaptive_rk45`` – scipy's embedded Runge–Kutta 4(5) (``solve_ivp``)
  • ``fixed_rk4``     – classical RK4 with a fixed step, bitwise reproducible

Both HEOM and Bloch–Redfield propagation go through ``evolve_linear``.
"""

import logging
import math
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from qthermo.errors import IntegrationError

logger = logging.getLogger(__name__)

IntegratorName = Literal["adaptive_rk45", "fixed_rk4"]


def _rk4(generator, y: np.ndarray, t0: float, t1: float, dt: float) -> np.ndarray:
    n_steps = max(1, math.ceil((t1 - t0) / dt - 1e-12))
    h = (t1 - t0) / n_steps
    for _ in range(n_steps):
        k1 = generator @ y
        k2 = generator @ (y + 0.5 * h * k1)
        k3 = generator @ (y + 0.5 * h * k2)
        k4 = generator @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def evolve_linear(
    generator: sp.spmatrix | np.ndarray,
    y0: np.ndarray,
    t_grid: np.ndarray,
    *,
    integrator: IntegratorName = "adaptive_rk45",
    rtol: float = 1e-8,
    atol: float = 1e-10,
    dt: float = 0.05,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Integrate dy/dt = A y from ``t_grid[0]`` (where y = y0) over ``t_grid``.

    Returns
    -------
    samples : ndarray, shape (len(t_grid), len(y0))
        The state at every grid time (row 0 is y0).
    y_final : ndarray
        The state at ``t_grid[-1]``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    y0 = np.asarray(y0, dtype=complex)
    samples = np.empty((len(t_grid), y0.size), dtype=complex)
    samples[0] = y0
    if len(t_grid) == 1:
        return samples, y0.copy()

    if integrator == "fixed_rk4":
        y = y0
        for i in range(1, len(t_grid)):
            y = _rk4(generator, y, t_grid[i - 1], t_grid[i], dt)
            samples[i] = y
        return samples, y

    if integrator != "adaptive_rk45":
        raise ValueError(f"unknown integrator {integrator!r}")

    result = solve_ivp(
        lambda _t, y: generator @ y,
        (t_grid[0], t_grid[-1]),
        y0,
        method="RK45",
        t_eval=t_grid,
        rtol=rtol,
        atol=atol,
    )
    if not result.success:
        logger.error("solve_ivp failed  status=%d  message=%s", result.status, result.message)
        raise IntegrationError(
            f"integrator stopped at t={result.t[-1] if result.t.size else t_grid[0]:.4g}: "
            f"{result.message} (hierarchy depth or n_matsubara is likely too small for this lambda)"
        )
    samples[:] = result.y.T
    return samples, samples[-1].copy()
