"""Second-quantized operators, excitation generators and their projectors.

Spin orbitals are interleaved: spatial orbital ``j`` with spin up is index
``2j`` and spin down is ``2j + 1``.
"""

from __future__ import annotations

import abc
import functools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from numbers import Number

from .pauli import PauliString, PauliSum

Ladder = tuple[int, bool]  # (spin-orbital index, is creation operator)


class FermionOperator:
    """Sum of ordered products of ladder operators.

    Products are kept exactly as written; nothing is normal ordered.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple[Number, Sequence[Ladder]]] = ()):
        self.terms: tuple[tuple[complex, tuple[Ladder, ...]], ...] = tuple(
            (complex(c), tuple((int(i), bool(d)) for i, d in prod)) for c, prod in terms
        )

    @classmethod
    def identity(cls, coeff: Number = 1.0) -> FermionOperator:
        return cls([(coeff, ())])

    @classmethod
    def create(cls, index: int) -> FermionOperator:
        return cls([(1.0, ((index, True),))])

    @classmethod
    def annihilate(cls, index: int) -> FermionOperator:
        return cls([(1.0, ((index, False),))])

    def __add__(self, other) -> FermionOperator:
        if isinstance(other, Number):
            other = FermionOperator.identity(other)
        if not isinstance(other, FermionOperator):
            return NotImplemented
        return FermionOperator(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> FermionOperator:
        return self * -1

    def __sub__(self, other) -> FermionOperator:
        return self + (-other)

    def __rsub__(self, other) -> FermionOperator:
        return (-self) + other

    def __mul__(self, other) -> FermionOperator:
        if isinstance(other, Number):
            return FermionOperator((c * other, p) for c, p in self.terms)
        if isinstance(other, FermionOperator):
            return FermionOperator(
                (ca * cb, pa + pb) for ca, pa in self.terms for cb, pb in other.terms
            )
        return NotImplemented

    def __rmul__(self, other) -> FermionOperator:
        if isinstance(other, Number):
            return self * other
        return NotImplemented

    def dagger(self) -> FermionOperator:
        return FermionOperator(
            (c.conjugate(), tuple((i, not d) for i, d in reversed(p))) for c, p in self.terms
        )

    def max_index(self) -> int:
        return max((i for _, p in self.terms for i, _ in p), default=-1)

    def __repr__(self) -> str:
        def fmt(p):
            return " ".join(f"a{'^' if d else ''}_{i}" for i, d in p) or "1"

        return "FermionOperator(" + " + ".join(f"({c:.4g}) {fmt(p)}" for c, p in self.terms) + ")"


def number_op(k: int) -> FermionOperator:
    """``N_k = a†_k a_k``."""
    return FermionOperator([(1.0, ((k, True), (k, False)))])


def hole_op(k: int) -> FermionOperator:
    """``Ñ_k = a_k a†_k``."""
    return FermionOperator([(1.0, ((k, False), (k, True)))])


def hopping_op(p: int, q: int) -> FermionOperator:
    """Two-index ``N_pq = a†_p a_q``."""
    return FermionOperator([(1.0, ((p, True), (q, False)))])


@dataclass(frozen=True)
class Excitation:
    """n-fold excitation given as ordered ``(p, q)`` pairs, meaning ``∏ a†_p a_q``."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(p), int(q)) for p, q in self.pairs)
        if not pairs:
            raise ValueError("an excitation needs at least one (p, q) pair")
        flat = [i for pq in pairs for i in pq]
        if any(i < 0 for i in flat):
            raise ValueError(f"negative orbital index in {pairs}")
        if len(set(flat)) != len(flat):
            raise ValueError(f"excitation indices must be distinct, got {pairs}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def of(cls, *indices: int) -> Excitation:
        """``Excitation.of(0, 2, 1, 3)`` is the pairs ``((0, 2), (1, 3))``."""
        if len(indices) % 2:
            raise ValueError("need an even number of indices")
        return cls(tuple(zip(indices[::2], indices[1::2])))

    @property
    def rank(self) -> int:
        return len(self.pairs)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for pq in self.pairs for i in pq)

    def max_index(self) -> int:
        return max(self.indices)

    def __str__(self) -> str:
        return " ".join(f"{p} {q}" for p, q in self.pairs)


def _ordered_product(e: Excitation) -> FermionOperator:
    prod = FermionOperator.identity()
    for p, q in e.pairs:
        prod = prod * hopping_op(p, q)
    return prod


def excitation_generator(e: Excitation) -> FermionOperator:
    """``G = i(∏ a†_p a_q - h.c.)``; hermitian by construction."""
    k = _ordered_product(e)
    return 1j * k - 1j * k.dagger()


def nullspace_projector(e: Excitation) -> FermionOperator:
    """``P0 = 1 - ∏ N_p Ñ_q - ∏ N_q Ñ_p`` with diagonal number operators."""
    forward = FermionOperator.identity()
    backward = FermionOperator.identity()
    for p, q in e.pairs:
        forward = forward * number_op(p) * hole_op(q)
        backward = backward * number_op(q) * hole_op(p)
    return FermionOperator.identity() - forward - backward


def g_plus_minus(e: Excitation) -> tuple[FermionOperator, FermionOperator]:
    """Self-inverse splitting ``(G + P0, G - P0)``."""
    g, p0 = excitation_generator(e), nullspace_projector(e)
    return g + p0, g - p0


def eigen_projectors(e: Excitation) -> tuple[FermionOperator, FermionOperator]:
    """Projectors onto the ±1 eigenspaces of ``G``.

    ``P+ = (1 + G-)/2`` and ``P- = (1 - G+)/2``.  Pairing each projector with
    the *opposite* self-inverse part is what removes the nullspace: ``G- = -1``
    and ``G+ = +1`` on the nullspace.
    """
    gp, gm = g_plus_minus(e)
    return 0.5 * (1.0 + gm), 0.5 * (1.0 - gp)


def sz_operator(n_orbitals: int) -> FermionOperator:
    """``S_z = ½ Σ_j (N_{2j} - N_{2j+1})``."""
    op = FermionOperator()
    for k in range(n_orbitals):
        op = op + number_op(k) * (0.5 if k % 2 == 0 else -0.5)
    return op


def s_squared_operator(n_orbitals: int) -> FermionOperator:
    """Total spin ``S² = S₋S₊ + S_z(S_z + 1)``."""
    n_spatial = n_orbitals // 2
    s_plus = FermionOperator()
    for j in range(n_spatial):
        s_plus = s_plus + hopping_op(2 * j, 2 * j + 1)
    s_minus = s_plus.dagger()
    sz = sz_operator(n_orbitals)
    return s_minus * s_plus + sz * sz + sz


def particle_number_operator(n_orbitals: int) -> FermionOperator:
    op = FermionOperator()
    for k in range(n_orbitals):
        op = op + number_op(k)
    return op


# encodings ------------------------------------------------------------------

class Encoding(abc.ABC):
    """Linear map from fermionic operators to qubit Pauli sums."""

    name: str = "abstract"

    @abc.abstractmethod
    def ladder(self, index: int, creation: bool, n_orbitals: int) -> PauliSum:
        """Encoded single ladder operator."""

    def encode(self, f: FermionOperator, n_orbitals: int) -> PauliSum:
        if f.max_index() >= n_orbitals:
            raise IndexError(f"orbital index {f.max_index()} out of range for {n_orbitals} orbitals")
        total = PauliSum()
        for coeff, product in f.terms:
            term = PauliSum.identity(coeff)
            for index, creation in product:
                term = term * self.ladder(index, creation, n_orbitals)
                if term.is_zero():
                    break
            total = total + term
        return total


class JordanWigner(Encoding):
    """``a_k -> σ⁺_k Z_{k+1} ... Z_{N-1}`` and ``a†_k -> σ⁻_k Z_{k+1} ... Z_{N-1}``.

    ``σ± = (X ± iY)/2`` so that ``σ⁺ = |0><1|`` lowers an occupied qubit.  The
    Z string sits on the higher-indexed qubits.
    """

    name = "jordan-wigner"

    def ladder(self, index: int, creation: bool, n_orbitals: int) -> PauliSum:
        return _jw_ladder(index, creation, n_orbitals)


@functools.lru_cache(maxsize=None)
def _jw_ladder(index: int, creation: bool, n_orbitals: int) -> PauliSum:
    if not 0 <= index < n_orbitals:
        raise IndexError(f"orbital index {index} out of range for {n_orbitals} orbitals")
    tail = tuple((k, "Z") for k in range(index + 1, n_orbitals))
    y = -0.5j if creation else 0.5j
    return PauliSum({
        PauliString(((index, "X"),) + tail): 0.5,
        PauliString(((index, "Y"),) + tail): y,
    })


JW = JordanWigner()


def jordan_wigner(f: FermionOperator, n_orbitals: int) -> PauliSum:
    return JW.encode(f, n_orbitals)


@functools.lru_cache(maxsize=None)
def encoded_generator(e: Excitation, n_orbitals: int, encoding: Encoding = JW) -> PauliSum:
    return encoding.encode(excitation_generator(e), n_orbitals)


@functools.lru_cache(maxsize=None)
def encoded_projector(e: Excitation, n_orbitals: int, encoding: Encoding = JW) -> PauliSum:
    return encoding.encode(nullspace_projector(e), n_orbitals)


@functools.lru_cache(maxsize=None)
def encoded_g_pm(e: Excitation, n_orbitals: int, which: int, encoding: Encoding = JW) -> PauliSum:
    """Encoded ``G+`` (``which=+1``) or ``G-`` (``which=-1``)."""
    g = encoded_generator(e, n_orbitals, encoding)
    p0 = encoded_projector(e, n_orbitals, encoding)
    return g + p0 if which > 0 else g - p0
