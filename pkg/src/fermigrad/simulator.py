"""Dense statevector simulation of excitation circuits.

Fermionic excitation gates ``U(θ) = exp(-iθG/2)`` are applied through the
closed form

    U(θ)|ψ> = cos(θ/2)|ψ> - i sin(θ/2) G|ψ> + (1 - cos(θ/2)) P0|ψ>

with ``G`` and ``P0`` acting as sparse encoded Pauli sums.  Qubit 0 is the
most significant bit of the basis index, so ``|1100>`` has index ``0b1100``.
"""

from __future__ import annotations

import functools
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from . import pauli
from .fermion import JW, Encoding, Excitation, encoded_g_pm, encoded_generator, encoded_projector
from .pauli import PauliString, PauliSum

#: largest register simulate() accepts
SIMULATION_CAP = 24

NORM_TOL = 1e-10
IMAG_TOL = 1e-10


class SimulationError(RuntimeError):
    pass


class UnassignedParameterError(KeyError):
    pass


class CircuitParseError(ValueError):
    def __init__(self, message: str, lineno: int | None = None, token: str | None = None):
        self.lineno = lineno
        self.token = token
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{message}")


# angles ---------------------------------------------------------------------

@dataclass(frozen=True)
class Angle:
    """``scale * values[param] + offset``; a fixed angle has ``param=None``."""

    param: str | None = None
    scale: float = 1.0
    offset: float = 0.0

    @classmethod
    def fixed(cls, value: float) -> Angle:
        return cls(None, 0.0, float(value))

    @classmethod
    def coerce(cls, value: AngleLike) -> Angle:
        if isinstance(value, Angle):
            return value
        if isinstance(value, str):
            return parse_angle(value)
        return cls.fixed(value)

    @property
    def is_fixed(self) -> bool:
        return self.param is None

    def value(self, values: Mapping[str, float]) -> float:
        if self.param is None:
            return self.offset
        try:
            x = values[self.param]
        except KeyError:
            raise UnassignedParameterError(self.param) from None
        return self.scale * float(x) + self.offset

    def shifted(self, delta: float) -> Angle:
        return replace(self, offset=self.offset + delta)

    def negated(self) -> Angle:
        return Angle(self.param, -self.scale, -self.offset)

    def bind(self, values: Mapping[str, float]) -> Angle:
        return Angle.fixed(self.value(values))

    def __str__(self) -> str:
        if self.param is None:
            return repr(self.offset)
        head = self.param if self.scale == 1.0 else f"{self.scale!r}*{self.param}"
        if self.offset:
            head += f"{self.offset:+}"
        return head


AngleLike = Union[Angle, str, float, int]


# gates ----------------------------------------------------------------------

@dataclass(frozen=True)
class BasisFlip:
    qubit: int

    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)

    def adjoint(self) -> BasisFlip:
        return self


@dataclass(frozen=True)
class PauliRotation:
    """``∏_k exp(-i θ c_k σ_k / 2)`` for mutually commuting hermitian strings."""

    generator: PauliSum
    angle: Angle = field(default_factory=lambda: Angle.fixed(0.0))

    def __post_init__(self):
        object.__setattr__(self, "angle", Angle.coerce(self.angle))
        _check_rotation_generator(self.generator)

    def qubits(self) -> tuple[int, ...]:
        return tuple(sorted({q for s in self.generator for q in s.qubits}))

    def adjoint(self) -> PauliRotation:
        return PauliRotation(self.generator, self.angle.negated())


@dataclass(frozen=True)
class FermionicExcitation:
    """``exp(-i θ G / 2)`` for the excitation generator ``G``."""

    excitation: Excitation
    angle: Angle = field(default_factory=lambda: Angle.fixed(0.0))

    def __post_init__(self):
        object.__setattr__(self, "angle", Angle.coerce(self.angle))

    def qubits(self) -> tuple[int, ...]:
        return self.excitation.indices

    def adjoint(self) -> FermionicExcitation:
        return FermionicExcitation(self.excitation, self.angle.negated())


@dataclass(frozen=True)
class NullspacePhase:
    """``exp(-i φ P0)`` for the nullspace projector of ``excitation``."""

    excitation: Excitation
    angle: float = 0.0

    def __post_init__(self):
        a = self.angle
        if isinstance(a, Angle):
            if not a.is_fixed:
                raise ValueError("NullspacePhase takes a fixed angle")
            a = a.offset
        object.__setattr__(self, "angle", float(a))

    def qubits(self) -> tuple[int, ...]:
        return self.excitation.indices

    def adjoint(self) -> NullspacePhase:
        return NullspacePhase(self.excitation, -self.angle)


Gate = Union[BasisFlip, PauliRotation, FermionicExcitation, NullspacePhase]


class NonCommutingGeneratorError(ValueError):
    pass


class NonHermitianGeneratorError(ValueError):
    pass


@functools.lru_cache(maxsize=4096)
def _check_rotation_generator(generator: PauliSum) -> None:
    if not generator.is_hermitian():
        raise NonHermitianGeneratorError(f"rotation generator has complex coefficients: {generator!r}")
    if not generator.mutually_commuting():
        raise NonCommutingGeneratorError(f"rotation generator strings do not commute: {generator!r}")


# circuits -------------------------------------------------------------------

@dataclass(frozen=True)
class Circuit:
    """Ordered gates on ``n_qubits`` qubits; the first gate acts first."""

    gates: tuple[Gate, ...] = ()
    n_qubits: int = 0

    def __post_init__(self):
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        need = max((q for g in gates for q in g.qubits()), default=-1) + 1
        if self.n_qubits < need:
            object.__setattr__(self, "n_qubits", need)

    @property
    def parameters(self) -> tuple[str, ...]:
        """Named parameters in order of first use."""
        seen: dict[str, None] = {}
        for g in self.gates:
            a = getattr(g, "angle", None)
            if isinstance(a, Angle) and a.param is not None:
                seen.setdefault(a.param)
        return tuple(seen)

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: Circuit) -> Circuit:
        if not isinstance(other, Circuit):
            return NotImplemented
        return Circuit(self.gates + other.gates, max(self.n_qubits, other.n_qubits))

    def with_qubits(self, n_qubits: int) -> Circuit:
        return Circuit(self.gates, max(n_qubits, self.n_qubits))

    def adjoint(self) -> Circuit:
        return Circuit(tuple(g.adjoint() for g in reversed(self.gates)), self.n_qubits)

    def bind(self, values: Mapping[str, float]) -> Circuit:
        """Replace every named angle by its numerical value."""
        gates = []
        for g in self.gates:
            if isinstance(g, (PauliRotation, FermionicExcitation)):
                g = replace(g, angle=g.angle.bind(values))
            gates.append(g)
        return Circuit(tuple(gates), self.n_qubits)

    def replace_gate(self, position: int, *new: Gate) -> Circuit:
        gates = self.gates[:position] + tuple(new) + self.gates[position + 1:]
        return Circuit(gates, self.n_qubits)

    def occurrences(self, param: str) -> list[int]:
        return [
            i for i, g in enumerate(self.gates)
            if isinstance(getattr(g, "angle", None), Angle) and g.angle.param == param
        ]

    # text format

    def to_text(self) -> str:
        lines = [f"# n_qubits: {self.n_qubits}"]
        for g in self.gates:
            lines.append(format_gate(g))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int = 0) -> Circuit:
        gates = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                if key.strip() == "n_qubits":
                    try:
                        n_qubits = max(n_qubits, int(value))
                    except ValueError:
                        raise CircuitParseError(f"bad n_qubits {value.strip()!r}", lineno) from None
                continue
            gates.append(parse_gate(line.partition("#")[0], lineno))
        return cls(tuple(gates), n_qubits)


_ANGLE_RE = re.compile(
    r"^(?:(?P<scale>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\*)?"
    r"(?P<sign>-)?(?P<name>[A-Za-z_][\w.]*)"
    r"(?P<offset>[-+](?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?$"
)


def parse_angle(token: str, lineno: int | None = None) -> Angle:
    try:
        return Angle.fixed(float(token))
    except ValueError:
        pass
    m = _ANGLE_RE.match(token)
    if not m:
        raise CircuitParseError(f"bad angle {token!r}", lineno, token)
    scale = float(m["scale"]) if m["scale"] else 1.0
    if m["sign"]:
        scale = -scale
    offset = float(m["offset"]) if m["offset"] else 0.0
    return Angle(m["name"], scale, offset)


def _parse_indices(tokens: Sequence[str], lineno: int | None) -> Excitation:
    try:
        idx = [int(t) for t in tokens]
    except ValueError:
        bad = next(t for t in tokens if not t.lstrip("-").isdigit())
        raise CircuitParseError(f"bad orbital index {bad!r}", lineno, bad) from None
    if not idx or len(idx) % 2:
        raise CircuitParseError("expected an even, nonzero number of orbital indices", lineno)
    try:
        return Excitation.of(*idx)
    except ValueError as exc:
        raise CircuitParseError(str(exc), lineno) from None


def _parse_rotation_terms(tokens: Sequence[str], lineno: int | None) -> PauliSum:
    # each token is coeff*P*P..., e.g. 0.5*X0*Y1; a bare coeff is the identity
    terms = []
    for tok in tokens:
        head, *factors = tok.split("*")
        try:
            coeff = float(head)
        except ValueError:
            raise CircuitParseError(f"bad rotation term {tok!r}", lineno, tok) from None
        try:
            string = PauliString.parse(" ".join(factors))
        except ValueError:
            raise CircuitParseError(f"bad rotation term {tok!r}", lineno, tok) from None
        terms.append((string, coeff))
    if not terms:
        raise CircuitParseError("ROT needs at least one term", lineno)
    return PauliSum(terms)


def parse_gate(line: str, lineno: int | None = None) -> Gate:
    tokens = line.split()
    kind = tokens[0].upper()
    args = tokens[1:]
    try:
        if kind == "X":
            if len(args) != 1 or not args[0].isdigit():
                raise CircuitParseError(f"X expects one qubit index, got {' '.join(args)!r}", lineno)
            return BasisFlip(int(args[0]))
        if kind == "ROT":
            if len(args) < 2:
                raise CircuitParseError("ROT expects an angle and terms", lineno)
            return PauliRotation(_parse_rotation_terms(args[1:], lineno), parse_angle(args[0], lineno))
        if kind == "FERM":
            if len(args) < 3:
                raise CircuitParseError("FERM expects an angle and index pairs", lineno)
            return FermionicExcitation(_parse_indices(args[1:], lineno), parse_angle(args[0], lineno))
        if kind == "NULLPHASE":
            if len(args) < 3:
                raise CircuitParseError("NULLPHASE expects an angle and index pairs", lineno)
            angle = parse_angle(args[0], lineno)
            if not angle.is_fixed:
                raise CircuitParseError("NULLPHASE angle must be numeric", lineno, args[0])
            return NullspacePhase(_parse_indices(args[1:], lineno), angle.offset)
    except (NonHermitianGeneratorError, NonCommutingGeneratorError) as exc:
        raise CircuitParseError(str(exc), lineno) from None
    raise CircuitParseError(f"unknown gate {tokens[0]!r}", lineno, tokens[0])


def format_gate(g: Gate) -> str:
    if isinstance(g, BasisFlip):
        return f"X {g.qubit}"
    if isinstance(g, PauliRotation):
        terms = []
        for s, c in g.generator.items():
            terms.append("*".join([repr(c.real)] + [f"{a}{q}" for q, a in s.factors]))
        return f"ROT {g.angle} " + " ".join(terms)
    if isinstance(g, FermionicExcitation):
        return f"FERM {g.angle} {g.excitation}"
    if isinstance(g, NullspacePhase):
        return f"NULLPHASE {g.angle!r} {g.excitation}"
    raise TypeError(f"unknown gate {g!r}")


def circuit(*gates: Gate, n_qubits: int = 0) -> Circuit:
    return Circuit(tuple(gates), n_qubits)


# statevectors ---------------------------------------------------------------

@dataclass
class Statevector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(f"expected {2**self.n_qubits} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def zero(cls, n_qubits: int) -> Statevector:
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    @classmethod
    def basis(cls, bits: str) -> Statevector:
        """``Statevector.basis("1100")``: qubit 0 is the leftmost character."""
        n = len(bits)
        amps = np.zeros(2**n, dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps, n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> Statevector:
        return Statevector(self.amplitudes.copy(), self.n_qubits)

    def amplitude(self, bits: str) -> complex:
        return complex(self.amplitudes[int(bits, 2)])

    def inner(self, other: Statevector) -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def support(self, atol: float = 1e-12) -> dict[str, complex]:
        fmt = f"0{self.n_qubits}b"
        nz = np.flatnonzero(np.abs(self.amplitudes) > atol)
        return {format(int(i), fmt): complex(self.amplitudes[i]) for i in nz}

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)


def _check_fits(indices: Iterable[int], n_qubits: int) -> None:
    top = max(indices, default=-1)
    if top >= n_qubits:
        raise IndexError(f"qubit index {top} out of range for {n_qubits} qubits")


def _excitation_action(psi: np.ndarray, e: Excitation, theta: float, n: int, encoding: Encoding) -> np.ndarray:
    g = pauli.to_sparse(encoded_generator(e, n, encoding), n)
    p0 = pauli.to_sparse(encoded_projector(e, n, encoding), n)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return c * psi - 1j * s * (g @ psi) + (1 - c) * (p0 @ psi)


def _nullphase_action(psi: np.ndarray, e: Excitation, phi: float, n: int, encoding: Encoding) -> np.ndarray:
    # exp(-iφP0) = 1 + (e^{-iφ} - 1) P0
    p0 = pauli.to_sparse(encoded_projector(e, n, encoding), n)
    return psi + (np.exp(-1j * phi) - 1) * (p0 @ psi)


def _rotation_action(psi: np.ndarray, generator: PauliSum, theta: float, n: int) -> np.ndarray:
    for s, c in generator.items():
        half = theta * c.real / 2
        if s.is_identity():
            psi = np.exp(-1j * half) * psi
            continue
        op = pauli.to_sparse(PauliSum({s: 1.0}), n)
        psi = math.cos(half) * psi - 1j * math.sin(half) * (op @ psi)
    return psi


def _flip_action(psi: np.ndarray, qubit: int, n: int) -> np.ndarray:
    return psi.reshape((2**qubit, 2, 2 ** (n - qubit - 1)))[:, ::-1, :].reshape(-1).copy()


def apply_excitation(state: Statevector, e: Excitation, theta: float, encoding: Encoding = JW) -> Statevector:
    _check_fits(e.indices, state.n_qubits)
    return Statevector(_excitation_action(state.amplitudes, e, theta, state.n_qubits, encoding), state.n_qubits)


def apply_pauli_rotation(state: Statevector, generator: PauliSum, theta: float) -> Statevector:
    _check_rotation_generator(generator)
    _check_fits([generator.max_qubit()], state.n_qubits)
    return Statevector(_rotation_action(state.amplitudes, generator, theta, state.n_qubits), state.n_qubits)


def apply_nullspace_phase(state: Statevector, e: Excitation, phi: float, encoding: Encoding = JW) -> Statevector:
    _check_fits(e.indices, state.n_qubits)
    return Statevector(_nullphase_action(state.amplitudes, e, phi, state.n_qubits, encoding), state.n_qubits)


def apply_gate(psi: np.ndarray, g: Gate, values: Mapping[str, float], n: int, encoding: Encoding = JW) -> np.ndarray:
    if isinstance(g, FermionicExcitation):
        return _excitation_action(psi, g.excitation, g.angle.value(values), n, encoding)
    if isinstance(g, BasisFlip):
        return _flip_action(psi, g.qubit, n)
    if isinstance(g, PauliRotation):
        return _rotation_action(psi, g.generator, g.angle.value(values), n)
    if isinstance(g, NullspacePhase):
        return _nullphase_action(psi, g.excitation, g.angle, n, encoding)
    raise TypeError(f"unknown gate {g!r}")


def simulate(
    c: Circuit,
    values: Mapping[str, float] | None = None,
    initial: Statevector | None = None,
    n_qubits: int | None = None,
    encoding: Encoding = JW,
    check_norm: bool = True,
) -> Statevector:
    """Apply ``c`` to ``|0...0>`` (or ``initial``)."""
    values = values or {}
    n = max(c.n_qubits, n_qubits or 0, initial.n_qubits if initial is not None else 0)
    if n > SIMULATION_CAP:
        raise SimulationError(f"{n} qubits exceeds simulation cap {SIMULATION_CAP}")
    missing = [p for p in c.parameters if p not in values]
    if missing:
        raise UnassignedParameterError(", ".join(missing))
    if initial is None:
        psi = Statevector.zero(n).amplitudes
    else:
        if initial.n_qubits != n:
            raise ValueError(f"initial state has {initial.n_qubits} qubits, circuit needs {n}")
        psi = initial.amplitudes.copy()
    for g in c.gates:
        psi = apply_gate(psi, g, values, n, encoding)
        if check_norm and abs(np.linalg.norm(psi) - 1) > NORM_TOL:
            raise SimulationError(f"norm drifted to {np.linalg.norm(psi)!r} after {format_gate(g)}")
    return Statevector(psi, n)


# observables ----------------------------------------------------------------

@dataclass(frozen=True)
class AllZeroProjector:
    """``|0...0><0...0|``; its expectation is the squared all-zero amplitude."""

    def max_qubit(self) -> int:
        return -1


Observable = Union[PauliSum, AllZeroProjector]


class NonHermitianOperatorError(ValueError):
    pass


class ImaginaryExpectationError(SimulationError):
    pass


def state_expectation(state: Statevector, op: Observable) -> float:
    psi = state.amplitudes
    if isinstance(op, AllZeroProjector):
        return float(abs(psi[0]) ** 2)
    if not op.is_hermitian():
        raise NonHermitianOperatorError(f"operator is not hermitian: {op!r}")
    value = np.vdot(psi, pauli.apply(op, psi, state.n_qubits))
    if abs(value.imag) > IMAG_TOL:
        raise ImaginaryExpectationError(f"expectation has imaginary part {value.imag!r}")
    return float(value.real)


def expectation(
    c: Circuit,
    values: Mapping[str, float] | None,
    op: Observable,
    initial: Statevector | None = None,
    encoding: Encoding = JW,
) -> float:
    """``<0|U† H U|0>``."""
    n = max(c.n_qubits, op.max_qubit() + 1)
    return state_expectation(simulate(c, values, initial, n, encoding), op)


def overlap_squared(a: Circuit, b: Circuit, values: Mapping[str, float] | None = None) -> float:
    """``|<ψ_b|ψ_a>|²`` as the all-zero probability of ``b† a |0>``."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    return expectation(a + b.adjoint(), values, AllZeroProjector())


# gradient circuits ----------------------------------------------------------

class NotAFermionicGateError(TypeError):
    pass


def fermionic_shift_circuit(c: Circuit, position: int, sign: int, alpha: int) -> Circuit:
    """Replace the excitation at ``position`` by ``U(θ ± π/2) U0^α``.

    ``U0^α = exp(-i α (±π/4) P0)`` acts before the shifted excitation; the two
    commute, so the order only matters for readability.
    """
    g = c.gates[position]
    if not isinstance(g, FermionicExcitation):
        raise NotAFermionicGateError(f"gate {position} is {type(g).__name__}, not a fermionic excitation")
    sign, alpha = _unit(sign), _unit(alpha)
    phase = NullspacePhase(g.excitation, alpha * sign * math.pi / 4)
    shifted = FermionicExcitation(g.excitation, g.angle.shifted(sign * math.pi / 2))
    return c.replace_gate(position, phase, shifted)


def compile_excitation(g: FermionicExcitation, n_qubits: int, encoding: Encoding = JW) -> list[PauliRotation]:
    """Split an excitation into single-string rotations sharing its angle."""
    gen = encoded_generator(g.excitation, n_qubits, encoding)
    return [PauliRotation(PauliSum({s: c.real}), g.angle) for s, c in gen.items()]


def generator_approx_gate(g: FermionicExcitation, n_qubits: int, which: int, encoding: Encoding = JW) -> PauliRotation:
    """Rotation generated by ``G+`` or ``G-`` in place of ``G``."""
    gen = encoded_g_pm(g.excitation, n_qubits, _unit(which), encoding).real()
    return PauliRotation(gen, g.angle)


def _unit(x) -> int:
    if x in (1, "+", "+1"):
        return 1
    if x in (-1, "-", "-1"):
        return -1
    raise ValueError(f"expected ±1, got {x!r}")
