"""Differentiable objectives built from circuit expectation values.

An :class:`Objective` is a DAG whose leaves are :class:`Expectation` nodes
(or constants) and whose interior nodes are sums, scalings, products and
squares.  :func:`grad` returns another Objective, so derivatives can be
nested (e.g. the gradient of a squared gradient).

Per-gate derivative rules for a fermionic excitation ``exp(-iθG/2)``:

========  ===========================================  =========
scheme    rule                                         leaves
========  ===========================================  =========
qubit     shift rule on each encoded Pauli rotation    2^(2n)
exact4    ¼ Σ_α (E[U_+^α] - E[U_-^α]), shift π/2        4
real2     ½ (E[U_+^α] - E[U_-^α]) for one α             2
approx    shift rule on exp(-iθG±/2), r = ½              2
========  ===========================================  =========

``U_±^α`` is ``U(θ ± π/2)`` preceded by ``exp(-iα(±π/4)P0)``; see
:func:`fermigrad.simulator.fermionic_shift_circuit`.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .fermion import JW, Encoding
from .pauli import PauliSum
from .simulator import (
    Circuit,
    FermionicExcitation,
    Observable,
    PauliRotation,
    compile_excitation,
    expectation,
    fermionic_shift_circuit,
    generator_approx_gate,
)


class UnknownParameterError(KeyError):
    pass


class GeneratorNotTwoEigenvalueError(ValueError):
    pass


# schemes --------------------------------------------------------------------

@dataclass(frozen=True)
class GradientScheme:
    """How fermionic excitation gates are differentiated."""

    kind: str = "real2"
    alpha: int = 1
    which: int = 1

    KINDS = ("qubit", "exact4", "real2", "approx")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown gradient scheme {self.kind!r}; expected one of {self.KINDS}")
        for name in ("alpha", "which"):
            v = getattr(self, name)
            if v not in (1, -1):
                raise ValueError(f"{name} must be +1 or -1, got {v!r}")

    @classmethod
    def parse(cls, name: str, alpha: str | int = "+") -> GradientScheme:
        sign = -1 if alpha in ("-", -1, "-1") else 1
        if name == "approx":
            return cls("approx", which=sign)
        return cls(name, alpha=sign)

    @property
    def prefactor(self) -> float | None:
        """Prefactor ``r`` per shifted pair; None for qubit (it varies per term)."""
        return {"qubit": None, "exact4": 0.25, "real2": 0.5, "approx": 0.5}[self.kind]

    @property
    def shift(self) -> float | None:
        """Parameter shift in the ``exp(-i s G±/4)`` (exact4) or ``exp(-i s G/2)`` sense."""
        return {"qubit": None, "exact4": math.pi, "real2": math.pi / 2, "approx": math.pi / 2}[self.kind]

    def cost(self, rank: int) -> int:
        """Expectation values per differentiated rank-``rank`` excitation."""
        return {"qubit": 2 ** (2 * rank), "exact4": 4, "real2": 2, "approx": 2}[self.kind]

    def label(self) -> str:
        if self.kind == "qubit":
            return "qubit(r=|c|/2;s=pi/(2|c|))"
        sign = "+" if (self.which if self.kind == "approx" else self.alpha) > 0 else "-"
        extra = f";alpha={sign}" if self.kind == "real2" else f";G{sign}" if self.kind == "approx" else ""
        return f"{self.kind}(r={self.prefactor};s={self.shift:.6f}{extra})"


QUBIT = GradientScheme("qubit")
EXACT4 = GradientScheme("exact4")
REAL2 = GradientScheme("real2")
DEFAULT_SCHEME = REAL2


# nodes ----------------------------------------------------------------------

class Objective:
    """Base class for objective DAG nodes."""

    def children(self) -> tuple[Objective, ...]:
        return ()

    # arithmetic

    def __add__(self, other) -> Objective:
        other = as_objective(other)
        if _is_zero(other):
            return self
        if _is_zero(self):
            return other
        return Sum((self, other))

    def __radd__(self, other) -> Objective:
        return as_objective(other) + self

    def __neg__(self) -> Objective:
        return Scale(-1.0, self)

    def __sub__(self, other) -> Objective:
        return self + (-as_objective(other))

    def __rsub__(self, other) -> Objective:
        return as_objective(other) + (-self)

    def __mul__(self, other) -> Objective:
        if isinstance(other, (int, float)):
            if other == 0 or _is_zero(self):
                return Constant(0.0)
            return Scale(float(other), self)
        other = as_objective(other)
        if _is_zero(self) or _is_zero(other):
            return Constant(0.0)
        return Product(self, other)

    def __rmul__(self, other) -> Objective:
        return self * other

    def __pow__(self, power) -> Objective:
        if power != 2:
            raise ValueError("only squaring is supported")
        return Square(self)

    # evaluation

    def expectations(self) -> list[Expectation]:
        """Distinct expectation leaves, in first-visit order."""
        seen: dict[Expectation, None] = {}
        visited: set[int] = set()
        stack: list[Objective] = [self]
        order: list[Objective] = []
        while stack:
            node = stack.pop()
            if id(node) in visited:
                continue
            visited.add(id(node))
            order.append(node)
            stack.extend(reversed(node.children()))
        for node in order:
            if isinstance(node, Expectation):
                seen.setdefault(node)
        return list(seen)

    @property
    def parameters(self) -> tuple[str, ...]:
        names: dict[str, None] = {}
        for e in self.expectations():
            for p in e.circuit.parameters:
                names.setdefault(p)
        return tuple(names)

    def evaluate(self, values: Mapping[str, float] | None = None, threads: int | None = None) -> float:
        values = dict(values or {})
        leaves = self.expectations()
        if threads and threads > 1 and len(leaves) > 1:
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(lambda e: e.value(values), leaves))
        else:
            results = [e.value(values) for e in leaves]
        return self._combine(dict(zip(leaves, results)), {})

    def __call__(self, values: Mapping[str, float] | None = None, **kw) -> float:
        return self.evaluate(values, **kw)

    def _combine(self, leaves: dict, memo: dict) -> float:
        key = id(self)
        if key not in memo:
            memo[key] = self._reduce(leaves, memo)
        return memo[key]

    def _reduce(self, leaves: dict, memo: dict) -> float:
        raise NotImplementedError


@dataclass(eq=False)
class Constant(Objective):
    value: float = 0.0

    def _reduce(self, leaves, memo):
        return self.value


@dataclass(frozen=True)
class Expectation(Objective):
    """``<0|U† O U|0>`` for circuit ``U`` and observable ``O``."""

    circuit: Circuit
    operator: Observable
    encoding: Encoding = field(default=JW, compare=False)

    def value(self, values: Mapping[str, float]) -> float:
        return expectation(self.circuit, values, self.operator, encoding=self.encoding)

    def _reduce(self, leaves, memo):
        return leaves[self]

    def with_circuit(self, c: Circuit) -> Expectation:
        return Expectation(c, self.operator, self.encoding)


@dataclass(eq=False)
class Sum(Objective):
    terms: tuple[Objective, ...]

    def children(self):
        return self.terms

    def _reduce(self, leaves, memo):
        # fixed left-to-right order keeps results bit-stable
        total = 0.0
        for t in self.terms:
            total += t._combine(leaves, memo)
        return total


@dataclass(eq=False)
class Scale(Objective):
    factor: float
    term: Objective

    def children(self):
        return (self.term,)

    def _reduce(self, leaves, memo):
        return self.factor * self.term._combine(leaves, memo)


@dataclass(eq=False)
class Product(Objective):
    left: Objective
    right: Objective

    def children(self):
        return (self.left, self.right)

    def _reduce(self, leaves, memo):
        return self.left._combine(leaves, memo) * self.right._combine(leaves, memo)


@dataclass(eq=False)
class Square(Objective):
    term: Objective

    def children(self):
        return (self.term,)

    def _reduce(self, leaves, memo):
        x = self.term._combine(leaves, memo)
        return x * x


def as_objective(x) -> Objective:
    if isinstance(x, Objective):
        return x
    if isinstance(x, (int, float)):
        return Constant(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an objective")


def _is_zero(x: Objective) -> bool:
    return isinstance(x, Constant) and x.value == 0.0


def total(terms: Iterable[Objective]) -> Objective:
    terms = [t for t in terms if not _is_zero(t)]
    if not terms:
        return Constant(0.0)
    if len(terms) == 1:
        return terms[0]
    return Sum(tuple(terms))


def _difference(r: float, plus: Expectation, minus: Expectation) -> Objective:
    return Scale(r, Sum((plus, Scale(-1.0, minus))))


# per-gate rules -------------------------------------------------------------

def _rotation_radius(generator: PauliSum) -> float | None:
    """``λ`` if ``generator² = λ²·1`` (two eigenvalues ±λ), else None."""
    sq = generator * generator
    if len(sq) != 1:
        return None
    (s, c), = sq.items()
    if not s.is_identity() or c.real <= 0 or abs(c.imag) > 1e-12:
        return None
    return math.sqrt(c.real)


def shift_rule_gradient(obj: Expectation, position: int, r: float | None = None) -> Objective:
    """Two-term shift rule ``r (E(θ+s) - E(θ-s))``, ``s = π/(4r)``, for a rotation gate.

    The gate ``exp(-i θ gen/2)`` must have ``gen/2`` with eigenvalues ``±r``.
    The result is the derivative with respect to the gate angle.
    """
    gate = obj.circuit.gates[position]
    if not isinstance(gate, PauliRotation):
        raise GeneratorNotTwoEigenvalueError(f"gate {position} is not a Pauli rotation")
    lam = _rotation_radius(gate.generator)
    if lam is None:
        raise GeneratorNotTwoEigenvalueError(f"generator of gate {position} has more than two eigenvalues")
    if r is None:
        r = lam / 2
    elif abs(r - lam / 2) > 1e-12:
        raise GeneratorNotTwoEigenvalueError(f"generator eigenvalues are ±{lam / 2}, not ±{r}")
    s = math.pi / (4 * r)
    c = obj.circuit
    plus = obj.with_circuit(c.replace_gate(position, PauliRotation(gate.generator, gate.angle.shifted(s))))
    minus = obj.with_circuit(c.replace_gate(position, PauliRotation(gate.generator, gate.angle.shifted(-s))))
    return _difference(r, plus, minus)


def _product_rule(obj: Expectation, position: int, factors: list[PauliRotation]) -> Objective:
    # factors replace the gate at `position`; differentiate each in turn
    c = obj.circuit.replace_gate(position, *factors)
    expanded = obj.with_circuit(c)
    return total(shift_rule_gradient(expanded, position + k) for k in range(len(factors)))


def rotation_gradient(obj: Expectation, position: int) -> Objective:
    gate = obj.circuit.gates[position]
    gen = gate.generator
    if _rotation_radius(gen) is not None:
        return shift_rule_gradient(obj, position)
    # an identity part only contributes a global phase
    stripped = PauliSum({s: c for s, c in gen.items() if not s.is_identity()})
    if stripped.is_zero():
        return Constant(0.0)
    if _rotation_radius(stripped) is not None:
        return shift_rule_gradient(obj.with_circuit(obj.circuit.replace_gate(
            position, PauliRotation(stripped, gate.angle))), position)
    factors = [PauliRotation(PauliSum({s: c}), gate.angle) for s, c in stripped.items()]
    return _product_rule(obj, position, factors)


def _require_fermionic(obj: Expectation, position: int) -> FermionicExcitation:
    gate = obj.circuit.gates[position]
    if not isinstance(gate, FermionicExcitation):
        raise TypeError(f"gate {position} is {type(gate).__name__}, not a fermionic excitation")
    return gate


def qubit_level_gradient(obj: Expectation, position: int) -> Objective:
    """Compile the excitation into Pauli rotations and shift each one."""
    gate = _require_fermionic(obj, position)
    n = max(obj.circuit.n_qubits, obj.operator.max_qubit() + 1)
    return _product_rule(obj, position, compile_excitation(gate, n, obj.encoding))


def _shifted(obj: Expectation, position: int, sign: int, alpha: int) -> Expectation:
    return obj.with_circuit(fermionic_shift_circuit(obj.circuit, position, sign, alpha))


def fermionic_gradient_exact(obj: Expectation, position: int) -> Objective:
    """Four-term fermionic shift rule, exact for any wavefunction."""
    _require_fermionic(obj, position)
    parts = [
        _difference(0.25, _shifted(obj, position, +1, a), _shifted(obj, position, -1, a))
        for a in (+1, -1)
    ]
    return Sum(tuple(parts))


def fermionic_gradient_real(obj: Expectation, position: int, alpha: int = 1) -> Objective:
    """Two-term fermionic shift rule; exact for real wavefunctions."""
    _require_fermionic(obj, position)
    return _difference(0.5, _shifted(obj, position, +1, alpha), _shifted(obj, position, -1, alpha))


def generator_approx_gradient(obj: Expectation, position: int, which: int = 1) -> Objective:
    """Shift rule for the excitation with ``G`` replaced by ``G+`` or ``G-``."""
    gate = _require_fermionic(obj, position)
    n = max(obj.circuit.n_qubits, obj.operator.max_qubit() + 1)
    approx = generator_approx_gate(gate, n, which, obj.encoding)
    return shift_rule_gradient(obj.with_circuit(obj.circuit.replace_gate(position, approx)), position, 0.5)


def gate_gradient(obj: Expectation, position: int, scheme: GradientScheme = DEFAULT_SCHEME) -> Objective:
    """Derivative of ``obj`` with respect to the angle of one gate."""
    gate = obj.circuit.gates[position]
    if isinstance(gate, FermionicExcitation):
        if scheme.kind == "qubit":
            return qubit_level_gradient(obj, position)
        if scheme.kind == "exact4":
            return fermionic_gradient_exact(obj, position)
        if scheme.kind == "real2":
            return fermionic_gradient_real(obj, position, scheme.alpha)
        return generator_approx_gradient(obj, position, scheme.which)
    if isinstance(gate, PauliRotation):
        return rotation_gradient(obj, position)
    return Constant(0.0)


# chain rule over the DAG ----------------------------------------------------

def grad(obj: Objective, param: str, scheme: GradientScheme | None = None) -> Objective:
    """Objective for ``∂obj/∂param``; repeated uses of ``param`` are summed."""
    scheme = scheme or DEFAULT_SCHEME
    if obj.expectations() and param not in obj.parameters:
        raise UnknownParameterError(param)
    return _grad(obj, param, scheme, {})


def _grad(node: Objective, param: str, scheme: GradientScheme, memo: dict) -> Objective:
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Constant):
        out = Constant(0.0)
    elif isinstance(node, Expectation):
        parts = []
        for pos in node.circuit.occurrences(param):
            chain = node.circuit.gates[pos].angle.scale
            d = gate_gradient(node, pos, scheme)
            if not _is_zero(d):
                parts.append(d if chain == 1.0 else Scale(chain, d))
        out = total(parts)
    elif isinstance(node, Sum):
        out = total(_grad(t, param, scheme, memo) for t in node.terms)
    elif isinstance(node, Scale):
        d = _grad(node.term, param, scheme, memo)
        out = Constant(0.0) if _is_zero(d) else Scale(node.factor, d)
    elif isinstance(node, Product):
        dl = _grad(node.left, param, scheme, memo)
        dr = _grad(node.right, param, scheme, memo)
        out = total([node.left * dr, dl * node.right])
    elif isinstance(node, Square):
        d = _grad(node.term, param, scheme, memo)
        out = Constant(0.0) if _is_zero(d) else Scale(2.0, Product(node.term, d))
    else:
        raise TypeError(f"cannot differentiate {type(node).__name__}")
    memo[key] = out
    return out


def gradient(obj: Objective, params: Iterable[str] | None = None,
             scheme: GradientScheme | None = None) -> dict[str, Objective]:
    params = obj.parameters if params is None else tuple(params)
    known = set(obj.parameters)
    out = {}
    for p in params:
        out[p] = _grad(obj, p, scheme or DEFAULT_SCHEME, {}) if p in known else Constant(0.0)
    return out


def finite_difference(obj: Objective, param: str, values: Mapping[str, float], h: float = 1e-5) -> float:
    """Central difference ``(f(θ+h) - f(θ-h)) / 2h``."""
    if h <= 0:
        raise ValueError("h must be positive")
    up, down = dict(values), dict(values)
    up[param] = values[param] + h
    down[param] = values[param] - h
    return (obj.evaluate(up) - obj.evaluate(down)) / (2 * h)


def count_expectations(obj: Objective) -> int:
    return len(obj.expectations())
