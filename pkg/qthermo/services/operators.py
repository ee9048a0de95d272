"""
Pauli matrices, density-matrix validation and small linear-algebra helpers
shared by the solvers. Basis convention: |0⟩ = (1, 0) is the excited state,
σ_z|0⟩ = +|0⟩.
"""

import math
from functools import reduce

import numpy as np

from qthermo.errors import InvalidStateError

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

HERMITIAN_TOL = 1e-12


def is_qubit_register(dim: int) -> bool:
    return dim >= 2 and dim & (dim - 1) == 0


def n_qubits(dim: int) -> int:
    n = int(round(math.log2(dim))) if dim > 0 else 0
    if dim < 2 or 2**n != dim:
        raise InvalidStateError(f"dimension {dim} is not a qubit register")
    return n


def embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """``op`` acting on qubit ``site`` of an ``n``-qubit register."""
    factors = [op if i == site else IDENTITY for i in range(n)]
    return reduce(np.kron, factors)


def collective(op: np.ndarray, dim: int) -> np.ndarray:
    """Σ_i op^{(i)} over every qubit of the register."""
    n = n_qubits(dim)
    return sum(embed(op, i, n) for i in range(n))


def ket(*amplitudes: complex) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=complex)
    return v / np.linalg.norm(v)


def projector(vector: np.ndarray) -> np.ndarray:
    v = np.asarray(vector, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def is_hermitian(matrix: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(matrix - matrix.conj().T), initial=0.0) <= tol)


def check_hermitian(matrix: np.ndarray, name: str, tol: float = HERMITIAN_TOL) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidStateError(f"{name} must be a square matrix, got shape {matrix.shape}")
    if not is_hermitian(matrix, tol):
        raise InvalidStateError(f"{name} is not Hermitian within {tol:g}")
    return matrix


def check_density_matrix(rho: np.ndarray, dim: int | None = None, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate a physical state: Hermitian, PSD and unit trace within ``tol``."""
    rho = check_hermitian(rho, "density matrix", tol)
    if dim is not None and rho.shape != (dim, dim):
        raise InvalidStateError(f"density matrix must be {dim}x{dim}, got {rho.shape}")
    trace = np.trace(rho).real
    if abs(trace - 1.0) > tol:
        raise InvalidStateError(f"density matrix trace is {trace:.15g}, expected 1")
    min_eig = np.linalg.eigvalsh(rho).min()
    if min_eig < -tol:
        raise InvalidStateError(f"density matrix has negative eigenvalue {min_eig:.3g}")
    return rho


def trace_norm_distance(rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """½ Σ |eig(ρ_a − ρ_b)| for Hermitian inputs."""
    diff = np.asarray(rho_a) - np.asarray(rho_b)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())


def expectation(op: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Re Tr(op ρ) for one state or a stack of states."""
    return np.real(np.einsum("ij,...ji->...", op, states))
