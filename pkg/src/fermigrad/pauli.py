"""Pauli strings and weighted Pauli sums.

A :class:`PauliString` is a sorted tuple of ``(qubit, axis)`` factors and a
:class:`PauliSum` maps strings to complex coefficients.  Both are immutable
and hashable, so they can be used as cache keys by the simulator.

Qubit 0 is the most significant bit of a computational basis label, i.e. the
leftmost tensor factor.
"""

from __future__ import annotations

import functools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from numbers import Number

import numpy as np
import scipy.sparse as sp

AXES = ("X", "Y", "Z")

#: coefficients below this magnitude are dropped when canonicalizing
CUTOFF = 1e-12

#: largest register the dense oracle will expand
DENSE_CAP = 12

# single-qubit products: (a, b) -> (phase, axis) with a*b = phase * axis
_PRODUCT = {
    ("X", "X"): (1, None),
    ("Y", "Y"): (1, None),
    ("Z", "Z"): (1, None),
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}


class PauliParseError(ValueError):
    """Malformed Pauli-sum text; carries the offending line and token."""

    def __init__(self, message: str, lineno: int | None = None, token: str | None = None):
        self.lineno = lineno
        self.token = token
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{message}")


class OracleCapError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PauliString:
    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        factors = tuple((int(q), str(a)) for q, a in self.factors)
        qubits = [q for q, _ in factors]
        if any(q < 0 for q in qubits):
            raise ValueError(f"negative qubit index in {factors}")
        if any(a not in AXES for _, a in factors):
            raise ValueError(f"unknown Pauli axis in {factors}")
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"repeated qubit index in {factors}")
        object.__setattr__(self, "factors", tuple(sorted(factors)))

    @classmethod
    def from_dict(cls, factors: Mapping[int, str]) -> PauliString:
        return cls(tuple(factors.items()))

    @classmethod
    def parse(cls, text: str) -> PauliString:
        """Parse ``"X0 Z3"`` style text; the empty string is the identity."""
        return cls(tuple(_parse_factor(tok) for tok in text.split()))

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)

    def as_dict(self) -> dict[int, str]:
        return dict(self.factors)

    def is_identity(self) -> bool:
        return not self.factors

    def is_diagonal(self) -> bool:
        return all(a == "Z" for _, a in self.factors)

    def max_qubit(self) -> int:
        return self.factors[-1][0] if self.factors else -1

    def masks(self, n_qubits: int) -> tuple[int, int, int]:
        """Return ``(x_mask, z_mask, n_y)`` for the bitmask action on ``n_qubits``."""
        x = z = ny = 0
        for q, a in self.factors:
            bit = 1 << (n_qubits - 1 - q)
            if a in "XY":
                x |= bit
            if a in "YZ":
                z |= bit
            if a == "Y":
                ny += 1
        return x, z, ny

    def __mul__(self, other: PauliString) -> tuple[complex, PauliString]:
        """Return ``(phase, string)`` with ``self * other == phase * string``."""
        if not isinstance(other, PauliString):
            return NotImplemented
        left, right = dict(self.factors), dict(other.factors)
        phase: complex = 1
        out = {}
        for q in left.keys() | right.keys():
            a, b = left.get(q), right.get(q)
            if a is None:
                out[q] = b
            elif b is None:
                out[q] = a
            else:
                p, axis = _PRODUCT[a, b]
                phase *= p
                if axis is not None:
                    out[q] = axis
        return phase, PauliString(tuple(out.items()))

    def __str__(self) -> str:
        return " ".join(f"{a}{q}" for q, a in self.factors) or "I"


def _parse_factor(token: str) -> tuple[int, str]:
    axis, index = token[:1].upper(), token[1:]
    if axis not in AXES or not index.isdigit():
        raise PauliParseError(f"bad Pauli token {token!r}", token=token)
    return int(index), axis


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the strings anticommute on an even number of shared qubits."""
    left = dict(a.factors)
    clashes = sum(1 for q, axis in b.factors if q in left and left[q] != axis)
    return clashes % 2 == 0


class PauliSum:
    """Canonical complex-weighted sum of Pauli strings.

    Instances are treated as immutable.  Arithmetic returns new sums in
    canonical form: duplicate strings merged, ``|c| < CUTOFF`` dropped and
    terms ordered by string.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[PauliString, Number] | Iterable[tuple[PauliString, Number]] = ()):
        acc: dict[PauliString, complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for string, coeff in items:
            if not isinstance(string, PauliString):
                string = PauliString(tuple(string))
            acc[string] = acc.get(string, 0j) + complex(coeff)
        self._terms = {s: acc[s] for s in sorted(acc) if abs(acc[s]) >= CUTOFF}
        self._hash = None

    @classmethod
    def identity(cls, coeff: Number = 1.0) -> PauliSum:
        return cls({PauliString(): coeff})

    @classmethod
    def single(cls, axis: str, qubit: int, coeff: Number = 1.0) -> PauliSum:
        return cls({PauliString(((qubit, axis),)): coeff})

    @classmethod
    def from_string(cls, text: str, coeff: Number = 1.0) -> PauliSum:
        return cls({PauliString.parse(text): coeff})

    @property
    def terms(self) -> dict[PauliString, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def coefficient(self, string: PauliString) -> complex:
        return self._terms.get(string, 0j)

    def max_qubit(self) -> int:
        return max((s.max_qubit() for s in self._terms), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    # arithmetic -----------------------------------------------------------

    def __add__(self, other) -> PauliSum:
        if isinstance(other, Number):
            other = PauliSum.identity(other)
        if not isinstance(other, PauliSum):
            return NotImplemented
        return PauliSum(list(self._terms.items()) + list(other._terms.items()))

    __radd__ = __add__

    def __neg__(self) -> PauliSum:
        return self * -1

    def __sub__(self, other) -> PauliSum:
        return self + (-other)

    def __rsub__(self, other) -> PauliSum:
        return (-self) + other

    def __mul__(self, other) -> PauliSum:
        if isinstance(other, Number):
            return PauliSum({s: c * other for s, c in self._terms.items()})
        if isinstance(other, PauliSum):
            return multiply(self, other)
        return NotImplemented

    def __rmul__(self, other) -> PauliSum:
        if isinstance(other, Number):
            return self * other
        return NotImplemented

    def __truediv__(self, other: Number) -> PauliSum:
        return self * (1.0 / other)

    def dagger(self) -> PauliSum:
        return PauliSum({s: c.conjugate() for s, c in self._terms.items()})

    # comparison -----------------------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def isclose(self, other: PauliSum, atol: float = 1e-10) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff._terms.values())

    def is_hermitian(self, atol: float = CUTOFF) -> bool:
        return all(abs(c.imag) <= atol for c in self._terms.values())

    def is_diagonal(self) -> bool:
        return all(s.is_diagonal() for s in self._terms)

    def mutually_commuting(self) -> bool:
        strings = list(self._terms)
        return all(commutes(a, b) for i, a in enumerate(strings) for b in strings[i + 1:])

    def real(self) -> PauliSum:
        return PauliSum({s: c.real for s, c in self._terms.items()})

    # text format ----------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for s, c in self._terms.items():
            head = f"{c.real!r} {c.imag!r}"
            lines.append(head + (" " + str(s) if s.factors else ""))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str, first_lineno: int = 1) -> PauliSum:
        terms = []
        for lineno, raw in enumerate(text.splitlines(), start=first_lineno):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            terms.append(parse_term_line(line, lineno))
        return cls(terms)

    def __repr__(self) -> str:
        if not self._terms:
            return "PauliSum(0)"
        parts = [f"({c:.6g})*{s}" for s, c in self._terms.items()]
        return "PauliSum(" + " + ".join(parts) + ")"


def parse_term_line(line: str, lineno: int | None = None) -> tuple[PauliString, complex]:
    """Parse ``<real> <imag> <axis><index> ...`` into a ``(string, coeff)`` pair."""
    tokens = line.split()
    if len(tokens) < 2:
        raise PauliParseError(f"expected '<real> <imag> [paulis]', got {line!r}", lineno)
    try:
        coeff = complex(float(tokens[0]), float(tokens[1]))
    except ValueError:
        bad = tokens[0] if not _is_float(tokens[0]) else tokens[1]
        raise PauliParseError(f"bad coefficient token {bad!r}", lineno, bad) from None
    factors = []
    for tok in tokens[2:]:
        try:
            factors.append(_parse_factor(tok))
        except PauliParseError:
            raise PauliParseError(f"bad Pauli token {tok!r}", lineno, tok) from None
    try:
        string = PauliString(tuple(factors))
    except ValueError as exc:
        raise PauliParseError(str(exc), lineno) from None
    return string, coeff


def _is_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def multiply(a: PauliSum, b: PauliSum) -> PauliSum:
    """Product of two Pauli sums with single-qubit phases tracked."""
    out: list[tuple[PauliString, complex]] = []
    for sa, ca in a.items():
        for sb, cb in b.items():
            phase, s = sa * sb
            out.append((s, phase * ca * cb))
    return PauliSum(out)


def pauli_sum(*terms: tuple[Number, str]) -> PauliSum:
    """Build a sum from ``(coeff, "X0 Y1")`` pairs."""
    return PauliSum([(PauliString.parse(text), c) for c, text in terms])


# dense oracle ---------------------------------------------------------------

_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def to_dense(a: PauliSum, n_qubits: int, cap: int = DENSE_CAP) -> np.ndarray:
    """Naive Kronecker-product expansion of ``a`` on ``n_qubits``.

    Deliberately independent of the bitmask code used by the simulator so it
    can serve as a reference in tests.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    if n_qubits > cap:
        raise OracleCapError(f"{n_qubits} qubits exceeds dense oracle cap {cap}")
    if a.max_qubit() >= n_qubits:
        raise IndexError(f"qubit index {a.max_qubit()} out of range for {n_qubits} qubits")
    dim = 2**n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for s, c in a.items():
        labels = s.as_dict()
        m = np.ones((1, 1), dtype=complex)
        for q in range(n_qubits):
            m = np.kron(m, _MATS[labels.get(q, "I")])
        out += c * m
    return out


# sparse action --------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _basis_index(n_qubits: int) -> np.ndarray:
    return np.arange(2**n_qubits, dtype=np.int64)


@functools.lru_cache(maxsize=4096)
def to_sparse(a: PauliSum, n_qubits: int) -> sp.csr_matrix:
    """CSR matrix of ``a`` built from the bitmask action of each string.

    ``P|b> = i^{n_Y} (-1)^{popcount(b & z)} |b ^ x>``.
    """
    if a.max_qubit() >= n_qubits:
        raise IndexError(f"qubit index {a.max_qubit()} out of range for {n_qubits} qubits")
    idx = _basis_index(n_qubits)
    groups: dict[int, np.ndarray] = {}
    for s, c in a.items():
        x, z, ny = s.masks(n_qubits)
        sign = 1 - 2 * (np.bitwise_count(idx & z) & 1).astype(np.int64)
        diag = (c * (1j) ** ny) * sign
        groups[x] = groups[x] + diag if x in groups else diag
    dim = 2**n_qubits
    if not groups:
        return sp.csr_matrix((dim, dim), dtype=complex)
    rows = np.concatenate([idx ^ x for x in groups])
    cols = np.tile(idx, len(groups))
    data = np.concatenate(list(groups.values()))
    return sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))


def apply(a: PauliSum, state: np.ndarray, n_qubits: int) -> np.ndarray:
    return to_sparse(a, n_qubits) @ state
