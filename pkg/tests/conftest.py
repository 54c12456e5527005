"""Shared oracles and random-instance builders.

The fermionic oracle here builds ladder matrices directly with numpy
Kronecker products; it shares no code with ``fermigrad.fermion`` or
``fermigrad.pauli`` so it can check both.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse

from fermigrad.fermion import Excitation, FermionOperator
from fermigrad.pauli import PauliString, PauliSum
from fermigrad.simulator import BasisFlip, Circuit, FermionicExcitation

I2 = np.eye(2)
Z2 = np.diag([1.0, -1.0])
# a = |0><1| annihilates the occupied state |1>
LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])


def ladder_matrix(k: int, n: int, dagger: bool) -> np.ndarray:
    """JW ladder operator: identity on qubits < k, σ± on k, Z on qubits > k."""
    op = LOWER.T if dagger else LOWER
    return reduce(np.kron, [I2] * k + [op] + [Z2] * (n - k - 1))


def fermion_dense(f: FermionOperator, n: int) -> np.ndarray:
    out = np.zeros((2**n, 2**n), dtype=complex)
    for coeff, product in f.terms:
        m = np.eye(2**n, dtype=complex)
        for idx, dag in product:
            m = m @ ladder_matrix(idx, n, dag)
        out += coeff * m
    return out


def sparse_generator(e: Excitation, n: int) -> scipy.sparse.csr_matrix:
    """Same construction as :func:`generator_dense` with sparse Kronecker products."""
    def ladder(k, dagger):
        op = LOWER.T if dagger else LOWER
        return reduce(scipy.sparse.kron, [scipy.sparse.identity(2**k)] + [op] + [Z2] * (n - k - 1)).tocsr()

    m = scipy.sparse.identity(2**n, format="csr")
    for p, q in e.pairs:
        m = m @ ladder(p, True) @ ladder(q, False)
    return (1j * (m - m.conj().T)).tocsr()


def generator_dense(e: Excitation, n: int) -> np.ndarray:
    m = np.eye(2**n)
    for p, q in e.pairs:
        m = m @ ladder_matrix(p, n, True) @ ladder_matrix(q, n, False)
    return 1j * (m - m.conj().T)


def nullspace_dense(e: Excitation, n: int) -> np.ndarray:
    """Projector onto basis states the generator annihilates, by direct inspection."""
    g = generator_dense(e, n)
    diag = np.array([0.0 if np.allclose(g[:, i], 0) else 1.0 for i in range(2**n)])
    return np.diag(1.0 - diag)


def expm_excitation(e: Excitation, theta: float, n: int) -> np.ndarray:
    return scipy.linalg.expm(-0.5j * theta * generator_dense(e, n))


def random_excitation(rng: np.random.Generator, n: int, rank: int) -> Excitation:
    idx = rng.choice(n, size=2 * rank, replace=False)
    return Excitation(tuple((int(idx[2 * i]), int(idx[2 * i + 1])) for i in range(rank)))


def random_sz_excitation(rng: np.random.Generator, n: int, rank: int) -> Excitation:
    while True:
        e = random_excitation(rng, n, rank)
        if all(p % 2 == q % 2 for p, q in e.pairs):
            return e


def random_real_hamiltonian(rng: np.random.Generator, n: int, n_terms: int = 12) -> PauliSum:
    """Real symmetric Pauli sum: real coefficients on strings with an even number of Y."""
    terms = {PauliString(()): float(rng.normal())}
    while len(terms) < n_terms:
        axes = rng.choice(["I", "X", "Y", "Z"], size=n)
        if list(axes).count("Y") % 2:
            continue
        s = PauliString(tuple((q, str(a)) for q, a in enumerate(axes) if a != "I"))
        terms[s] = float(rng.normal())
    return PauliSum(terms)


def random_real_circuit(rng: np.random.Generator, n: int, n_gates: int, max_rank: int = 2,
                        n_params: int | None = None) -> Circuit:
    """Basis flips followed by fermionic excitations with named (possibly shared) angles."""
    n_params = n_params or n_gates
    occ = rng.choice(n, size=int(rng.integers(1, n)), replace=False)
    gates: list = [BasisFlip(int(q)) for q in sorted(occ)]
    for _ in range(n_gates):
        rank = int(rng.integers(1, min(max_rank, n // 2) + 1))
        e = random_excitation(rng, n, rank)
        gates.append(FermionicExcitation(e, f"t{int(rng.integers(n_params))}"))
    return Circuit(tuple(gates), n)


def random_values(rng: np.random.Generator, params) -> dict[str, float]:
    return {p: float(rng.uniform(-np.pi, np.pi)) for p in params}


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def illustrative_circuit(kind: str = "G") -> Circuit:
    """X0 X1, exp(-i G_(0,2)(1,3)/2), exp(-i G_(0,4)(1,5)/2), exp(-i A/2), exp(-iθ G_(0,2)(1,3)/2).

    ``kind="G"`` uses A = G_(0,2)(1,3) (a real wavefunction); ``kind="G+"``
    uses A = G_+ of the same excitation, which puts complex phases on the
    nullspace configurations.
    """
    from fermigrad.fermion import encoded_g_pm
    from fermigrad.simulator import PauliRotation

    n = 8
    e1, e2 = Excitation.of(0, 2, 1, 3), Excitation.of(0, 4, 1, 5)
    if kind == "G":
        a = FermionicExcitation(e1, 1.0)
    elif kind == "G+":
        a = PauliRotation(encoded_g_pm(e1, n, 1).real(), 1.0)
    else:
        raise ValueError(kind)
    return Circuit((BasisFlip(0), BasisFlip(1), FermionicExcitation(e1, 1.0), FermionicExcitation(e2, 1.0), a,
                    FermionicExcitation(e1, "theta")), n)


# acceptance verdicts ---------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_verdict(criterion: int, ok: bool, detail: str) -> None:
    """Remember (and print) one pass/fail line; shown again in the terminal summary."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
