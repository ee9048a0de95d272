"""
Exception and warning types shared by the services and the CLI.

Each error family maps onto one process exit code (see ``qthermo.main``).
"""


class QThermoError(Exception):
    """Base class for every error raised on purpose by qthermo."""

    exit_code = 1


# ── Configuration (exit 2) ──────────────────────────────────────────────────


class ConfigError(QThermoError, ValueError):
    exit_code = 2


class DegeneratePoleError(ConfigError):
    """A Matsubara frequency coincides with the Drude cutoff."""


class HierarchyTooLargeError(ConfigError):
    """The requested hierarchy exceeds the configured ADO cap."""


class InvalidStateError(ConfigError):
    """A matrix that should be a density matrix (or Hermitian) is not."""


# ── Convergence (exit 3) ────────────────────────────────────────────────────


class ConvergenceError(QThermoError):
    exit_code = 3


class IntegrationError(ConvergenceError):
    """The ODE integrator gave up (usually step-size underflow)."""


class SteadyStateError(ConvergenceError):
    """No steady state: the detector ran out of time or the stationary solve failed."""

    def __init__(self, message: str, *, residual: float, time: float):
        super().__init__(message)
        self.residual = residual
        self.time = time

    def __reduce__(self):
        # keyword-only fields survive the trip back from a worker process
        return _rebuild_steady_state_error, (str(self), self.residual, self.time)


def _rebuild_steady_state_error(message: str, residual: float, time: float) -> SteadyStateError:
    return SteadyStateError(message, residual=residual, time=time)


class SingularPurityError(QThermoError, ArithmeticError):
    """Radial Bloch derivative at the surface of the Bloch sphere."""


# ── Resume (exit 4) ─────────────────────────────────────────────────────────


class ResumeMismatchError(QThermoError):
    exit_code = 4


class CheckpointError(QThermoError):
    exit_code = 4


# ── Warnings ────────────────────────────────────────────────────────────────


class DerivativeNoiseWarning(RuntimeWarning):
    """Finite-difference step is below the integrator noise floor."""


class GridResolutionWarning(RuntimeWarning):
    """BLP measure is not converged under grid refinement."""
