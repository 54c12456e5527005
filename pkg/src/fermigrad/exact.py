"""Exact reference energies by dense diagonalization."""

from __future__ import annotations

import numpy as np

from . import pauli
from .fermion import jordan_wigner, particle_number_operator, s_squared_operator
from .pauli import DENSE_CAP, PauliSum, to_dense


class TooManyQubitsError(ValueError):
    pass


def _dense(h: PauliSum, n_qubits: int) -> np.ndarray:
    if n_qubits > DENSE_CAP:
        raise TooManyQubitsError(f"{n_qubits} qubits exceeds dense cap {DENSE_CAP}")
    return to_dense(h, n_qubits)


def dense_spectrum(h: PauliSum, n_qubits: int, k: int | None = None) -> list[float]:
    """The ``k`` lowest eigenvalues of ``h`` (all of them if ``k`` is None), ascending."""
    evals = np.linalg.eigvalsh(_dense(h, n_qubits))
    return [float(x) for x in evals[:k]]


def sector_spectrum(
    h: PauliSum,
    n_qubits: int,
    k: int | None = None,
    n_electrons: int | None = None,
    spin: float | None = None,
) -> list[float]:
    """Lowest eigenvalues restricted to a particle-number and total-spin sector.

    ``spin`` is the total spin quantum number S (0 for singlets), so the
    sector is the ``S(S+1)`` eigenspace of ``S²``.  Both operators commute
    with a number- and spin-conserving Hamiltonian.
    """
    hd = _dense(h, n_qubits)
    basis = np.eye(2**n_qubits)
    if n_electrons is not None:
        keep = [i for i in range(2**n_qubits) if bin(i).count("1") == n_electrons]
        basis = basis[:, keep]
    if spin is not None:
        s2 = to_dense(jordan_wigner(s_squared_operator(n_qubits), n_qubits), n_qubits)
        w, v = np.linalg.eigh(basis.T @ s2 @ basis)
        target = spin * (spin + 1)
        basis = basis @ v[:, np.abs(w - target) < 1e-8]
    if basis.shape[1] == 0:
        return []
    evals = np.linalg.eigvalsh(basis.conj().T @ hd @ basis)
    return [float(x) for x in evals[:k]]


def power_iteration_ground(h: PauliSum, n_qubits: int, tol: float = 1e-9, max_iter: int = 200000,
                           seed: int = 0) -> float:
    """Ground energy by power iteration on ``c - H`` using the sparse Pauli action.

    Shares nothing with :func:`dense_spectrum`, so the two cross-check each other.
    """
    shift = sum(abs(c) for _, c in h.items())
    mat = pauli.to_sparse(h, n_qubits)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n_qubits) + 0j
    v /= np.linalg.norm(v)
    hv = mat @ v
    energy = float(np.vdot(v, hv).real)
    for _ in range(max_iter):
        w = shift * v - hv
        v = w / np.linalg.norm(w)
        hv = mat @ v
        energy = float(np.vdot(v, hv).real)
        if np.linalg.norm(hv - energy * v) < tol:
            break
    return energy


def number_operator(n_qubits: int) -> PauliSum:
    return jordan_wigner(particle_number_operator(n_qubits), n_qubits)


def s_squared(n_qubits: int) -> PauliSum:
    return jordan_wigner(s_squared_operator(n_qubits), n_qubits)
