"""Gradient-based minimization, VQE, adapt-VQE and sequential excited states."""

from __future__ import annotations

import copy
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Constant, Expectation, GradientScheme, Objective, gradient, grad, DEFAULT_SCHEME
from .fermion import Excitation
from .pauli import PauliSum
from .simulator import AllZeroProjector, BasisFlip, Circuit, FermionicExcitation, Gate

log = logging.getLogger(__name__)

DEFAULT_SCREEN_TOL = 1e-3
DEFAULT_ENERGY_TOL = 1e-6
DEFAULT_TOL = 1e-6


class NonFiniteError(ArithmeticError):
    pass


class EmptyPoolError(ValueError):
    pass


# minimizers -----------------------------------------------------------------

@dataclass
class OptimizeResult:
    values: dict[str, float]
    value: float
    trace: list[dict[str, float]]
    converged: bool
    iterations: int
    message: str = ""


def _check_finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise NonFiniteError(f"{what} is not finite: {x!r}")
    return x


def minimize(
    obj: Objective,
    initial: Mapping[str, float] | None = None,
    method: str = "QN",
    scheme: GradientScheme | None = None,
    tol: float = DEFAULT_TOL,
    max_iters: int = 500,
    step: float = 0.1,
    line_search: bool = True,
    memory: int = 10,
    threads: int | None = None,
) -> OptimizeResult:
    """Minimize ``obj`` over its parameters.

    ``method="GD"`` is steepest descent with step ``step`` (backtracked if
    ``line_search``); ``method="QN"`` is L-BFGS with an Armijo backtracking
    line search.  Convergence means the gradient ∞-norm dropped below ``tol``.
    """
    method = method.upper()
    if method not in ("GD", "QN"):
        raise ValueError(f"unknown method {method!r}; expected GD or QN")
    initial = dict(initial or {})
    names = list(obj.parameters)
    for p in initial:
        if p not in names:
            names.append(p)
    x = np.array([float(initial.get(p, 0.0)) for p in names])
    grads = gradient(obj, names, scheme)

    def as_values(v: np.ndarray) -> dict[str, float]:
        return {p: float(t) for p, t in zip(names, v)}

    def f(v: np.ndarray) -> float:
        return _check_finite(obj.evaluate(as_values(v), threads=threads), "objective")

    def g(v: np.ndarray) -> np.ndarray:
        vals = as_values(v)
        out = np.array([grads[p].evaluate(vals, threads=threads) for p in names])
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("gradient is not finite")
        return out

    fx = f(x)
    gx = g(x) if names else np.zeros(0)
    trace = [{"iteration": 0, "value": fx, "grad_norm": float(np.max(np.abs(gx), initial=0.0))}]
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    message = "max iterations reached"
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        if not names or np.max(np.abs(gx)) < tol:
            converged, message = True, "gradient below tolerance"
            it -= 1
            break
        if method == "QN":
            d = -_two_loop(gx, s_hist, y_hist)
            if d @ gx >= 0:
                s_hist.clear()
                y_hist.clear()
                d = -gx
            alpha0 = 1.0
        else:
            d = -gx
            alpha0 = step
        if method == "GD" and not line_search:
            alpha, x_new = alpha0, x + alpha0 * d
            f_new = f(x_new)
        else:
            alpha, x_new, f_new = _backtrack(f, x, fx, gx, d, alpha0)
            if alpha == 0.0 and method == "QN" and s_hist:
                s_hist.clear()
                y_hist.clear()
                alpha, x_new, f_new = _backtrack(f, x, fx, gx, -gx, 1.0)
            if alpha == 0.0:
                message = "line search failed to decrease the objective"
                it -= 1
                converged = bool(np.max(np.abs(gx)) < max(tol, 1e3 * tol))
                break
        g_new = g(x_new)
        s, y = x_new - x, g_new - gx
        if method == "QN" and s @ y > 1e-14:
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        x, fx, gx = x_new, f_new, g_new
        trace.append({"iteration": it, "value": fx, "grad_norm": float(np.max(np.abs(gx)))})
    else:
        if names and np.max(np.abs(gx)) < tol:
            converged, message = True, "gradient below tolerance"
    return OptimizeResult(as_values(x), fx, trace, converged, max(it, 0), message)


def _two_loop(gx: np.ndarray, s_hist: list[np.ndarray], y_hist: list[np.ndarray]) -> np.ndarray:
    q = gx.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((rho, a))
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def _backtrack(f, x, fx, gx, d, alpha, c1=1e-4, shrink=0.5, min_alpha=1e-10):
    slope = float(gx @ d)
    while alpha > min_alpha:
        x_new = x + alpha * d
        f_new = f(x_new)
        if f_new <= fx + c1 * alpha * slope:
            return alpha, x_new, f_new
        alpha *= shrink
    return 0.0, x, fx


# VQE ------------------------------------------------------------------------

@dataclass
class VQEResult:
    energy: float
    values: dict[str, float]
    circuit: Circuit
    trace: list[dict[str, float]]
    converged: bool
    iterations: int


def energy_objective(hamiltonian: PauliSum, circuit: Circuit) -> Expectation:
    return Expectation(circuit.with_qubits(hamiltonian.max_qubit() + 1), hamiltonian)


def vqe(
    hamiltonian: PauliSum,
    ansatz: Circuit,
    reference: Circuit | None = None,
    scheme: GradientScheme | None = None,
    initial: Mapping[str, float] | None = None,
    objective: Callable[[Circuit], Objective] | None = None,
    **opts,
) -> VQEResult:
    """Minimize ``<H>`` over the parameters of ``reference + ansatz``."""
    if not hamiltonian.is_hermitian():
        raise ValueError("Hamiltonian is not hermitian")
    full = ansatz if reference is None else reference + ansatz
    n = max(full.n_qubits, hamiltonian.max_qubit() + 1)
    full = full.with_qubits(n)
    obj = objective(full) if objective else energy_objective(hamiltonian, full)
    start = {p: 0.0 for p in full.parameters}
    start.update(initial or {})
    res = minimize(obj, start, scheme=scheme, **opts)
    energy = Expectation(full, hamiltonian).evaluate(res.values)
    return VQEResult(energy, res.values, full, res.trace, res.converged, res.iterations)


# operator pools -------------------------------------------------------------

PoolOperator = tuple[Excitation, ...]


def preserves_sz(e: Excitation) -> bool:
    return sum((p % 2) - (q % 2) for p, q in e.pairs) == 0


@dataclass(frozen=True)
class OperatorPool:
    """Candidates for adaptive growth.

    Each candidate is a tuple of excitations sharing one angle (a spin-adapted
    single is the up and down excitation together).
    """

    candidates: tuple[PoolOperator, ...]
    spin_filter: bool = True

    def __post_init__(self):
        cands = tuple(tuple(c) if not isinstance(c, Excitation) else (c,) for c in self.candidates)
        object.__setattr__(self, "candidates", cands)
        if self.spin_filter:
            bad = [c for c in cands if not all(preserves_sz(e) for e in c)]
            if bad:
                raise ValueError(f"spin filter rejects {bad[0]}")

    def __len__(self) -> int:
        return len(self.candidates)

    def check(self, n_qubits: int) -> None:
        for c in self.candidates:
            for e in c:
                if e.max_index() >= n_qubits:
                    raise IndexError(f"pool operator {e} does not fit {n_qubits} orbitals")


def make_pool(
    n_qubits: int,
    singles: bool = True,
    doubles: str | None = "paired",
    spin_adapted: bool = True,
    freeze: Sequence[int] = (),
) -> OperatorPool:
    """Generalized Sz-preserving singles plus (paired or all) doubles.

    ``freeze`` lists spatial orbitals excluded from every excitation.
    ``doubles`` is ``"paired"`` (both electrons of one spatial orbital moved
    together), ``"all"`` (every Sz-preserving generalized double) or None.
    """
    if doubles not in (None, "paired", "all"):
        raise ValueError(f"doubles must be 'paired', 'all' or None, got {doubles!r}")
    spatial = [j for j in range(n_qubits // 2) if j not in set(freeze)]
    cands: list[PoolOperator] = []
    if singles:
        for i, j in _pairs(spatial):
            up = Excitation(((2 * j, 2 * i),))
            down = Excitation(((2 * j + 1, 2 * i + 1),))
            cands.extend([(up, down)] if spin_adapted else [(up,), (down,)])
    if doubles == "paired":
        for i, j in _pairs(spatial):
            cands.append((Excitation(((2 * j, 2 * i), (2 * j + 1, 2 * i + 1))),))
    elif doubles == "all":
        orbitals = [2 * j + s for j in spatial for s in (0, 1)]
        seen = set()
        for q1, q2 in _pairs(orbitals):
            for p1, p2 in _pairs(orbitals):
                if len({p1, p2, q1, q2}) < 4 or (p1, p2) <= (q1, q2):
                    continue
                e = Excitation(((p1, q1), (p2, q2)))
                if not preserves_sz(e):
                    e = Excitation(((p1, q2), (p2, q1)))
                    if not preserves_sz(e):
                        continue
                key = frozenset([(p1, p2), (q1, q2)])
                if key not in seen:
                    seen.add(key)
                    cands.append((e,))
    return OperatorPool(tuple(cands), spin_filter=True)


def _pairs(items: Sequence[int]):
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            yield items[a], items[b]


# layouts --------------------------------------------------------------------

@dataclass
class Static:
    gates: tuple[Gate, ...]


@dataclass
class Adaptive:
    ops: list[tuple[PoolOperator, str]] = field(default_factory=list)


@dataclass
class AnsatzLayout:
    """Static gate blocks interleaved with adaptive insertion points."""

    blocks: list[Static | Adaptive] = field(default_factory=lambda: [Adaptive()])

    @classmethod
    def trailing(cls, static: Sequence[Gate] = ()) -> AnsatzLayout:
        blocks: list[Static | Adaptive] = [Static(tuple(static))] if static else []
        return cls(blocks + [Adaptive()])

    @property
    def points(self) -> list[int]:
        return [i for i, b in enumerate(self.blocks) if isinstance(b, Adaptive)]

    @property
    def n_adaptive(self) -> int:
        return sum(len(b.ops) for b in self.blocks if isinstance(b, Adaptive))

    def inserted(self, point: int, op: PoolOperator, param: str) -> AnsatzLayout:
        new = copy.deepcopy(self)
        block = new.blocks[self.points[point]]
        block.ops.append((tuple(op), param))
        return new

    def gates(self) -> list[Gate]:
        out: list[Gate] = []
        for b in self.blocks:
            if isinstance(b, Static):
                out.extend(b.gates)
            else:
                for op, param in b.ops:
                    out.extend(FermionicExcitation(e, param) for e in op)
        return out

    def circuit(self, n_qubits: int, reference: Circuit | None = None) -> Circuit:
        body = Circuit(tuple(self.gates()), n_qubits)
        return body if reference is None else reference.with_qubits(n_qubits) + body

    def describe(self) -> list[dict]:
        out = []
        for b in self.blocks:
            if isinstance(b, Static):
                out.append({"static": len(b.gates)})
            else:
                out.append({"adaptive": [{"operator": [list(map(list, e.pairs)) for e in op], "param": p}
                                         for op, p in b.ops]})
        return out


# adapt ----------------------------------------------------------------------

@dataclass
class AdaptRound:
    index: int
    operator: PoolOperator
    point: int
    gradient: float
    value: float
    energy: float
    converged: bool


@dataclass
class AdaptResult:
    value: float
    energy: float
    values: dict[str, float]
    layout: AnsatzLayout
    circuit: Circuit
    rounds: list[AdaptRound]
    initial_value: float
    stop_reason: str
    trace: list[dict[str, float]] = field(default_factory=list)

    @property
    def values_per_round(self) -> list[float]:
        return [self.initial_value] + [r.value for r in self.rounds]


SCREEN_PARAM = "__screen__"


def screen(
    objective: Callable[[Circuit], Objective],
    layout: AnsatzLayout,
    pool: OperatorPool,
    values: Mapping[str, float],
    n_qubits: int,
    reference: Circuit | None = None,
    scheme: GradientScheme | None = None,
    threads: int | None = None,
) -> list[tuple[int, int, float]]:
    """``(candidate, point, dE/dθ at θ=0)`` for every candidate at every point."""
    vals = dict(values)
    vals[SCREEN_PARAM] = 0.0
    out = []
    for ci, cand in enumerate(pool.candidates):
        for pi in range(len(layout.points)):
            trial = layout.inserted(pi, cand, SCREEN_PARAM).circuit(n_qubits, reference)
            d = grad(objective(trial), SCREEN_PARAM, scheme)
            out.append((ci, pi, d.evaluate(vals, threads=threads)))
    return out


def adapt_vqe(
    hamiltonian: PauliSum,
    layout: AnsatzLayout,
    pool: OperatorPool,
    reference: Circuit | None = None,
    screen_tol: float = DEFAULT_SCREEN_TOL,
    energy_tol: float = DEFAULT_ENERGY_TOL,
    max_ops: int = 20,
    scheme: GradientScheme | None = None,
    objective: Callable[[Circuit], Objective] | None = None,
    param_prefix: str = "adapt",
    screen_scheme: GradientScheme | None = None,
    threads: int | None = None,
    **opts,
) -> AdaptResult:
    """Grow ``layout`` one pool operator at a time, re-optimizing all angles.

    Each round screens every candidate at every adaptive point by the
    gradient of the objective at angle 0, inserts the largest (ties go to
    pool order, then point order) and re-optimizes.  Stops when the largest
    screened gradient is below ``screen_tol``, the objective improved by less
    than ``energy_tol``, or ``max_ops`` operators were added.

    ``scheme`` differentiates during re-optimization; ``screen_scheme``
    (default: ``scheme``) is used for the angle-0 screening gradients.
    """
    if not pool.candidates:
        raise EmptyPoolError("operator pool is empty")
    n = max(hamiltonian.max_qubit() + 1, reference.n_qubits if reference else 0)
    pool.check(n)
    scheme = scheme or DEFAULT_SCHEME
    screen_scheme = screen_scheme or scheme
    if objective is None:
        def objective(c: Circuit) -> Objective:
            return energy_objective(hamiltonian, c)

    def energy(c: Circuit, vals) -> float:
        return Expectation(c.with_qubits(n), hamiltonian).evaluate(vals)

    layout = copy.deepcopy(layout)
    circ = layout.circuit(n, reference)
    values = {p: 0.0 for p in circ.parameters}
    trace: list[dict[str, float]] = []
    obj = objective(circ)
    if circ.parameters:
        res = minimize(obj, values, scheme=scheme, threads=threads, **opts)
        values, value = res.values, res.value
        trace.extend(res.trace)
    else:
        value = obj.evaluate(values)
    initial_value = value
    rounds: list[AdaptRound] = []
    stop = "max_ops reached"
    while layout.n_adaptive < max_ops:
        screened = screen(objective, layout, pool, values, n, reference, screen_scheme, threads)
        best = None
        for ci, pi, gval in screened:
            if best is None or abs(gval) > abs(best[2]):
                best = (ci, pi, gval)
        ci, pi, gval = best
        log.info("adapt round %d: max |grad| %.3e (candidate %d, point %d)", len(rounds) + 1, abs(gval), ci, pi)
        if abs(gval) < screen_tol:
            stop = "screened gradients below tolerance"
            break
        param = f"{param_prefix}{layout.n_adaptive}"
        layout = layout.inserted(pi, pool.candidates[ci], param)
        circ = layout.circuit(n, reference)
        start = dict(values)
        start[param] = 0.0
        res = minimize(objective(circ), start, scheme=scheme, threads=threads, **opts)
        trace.extend(res.trace)
        improvement = value - res.value
        values, value = res.values, res.value
        rounds.append(AdaptRound(len(rounds) + 1, pool.candidates[ci], pi, gval, value,
                                 energy(circ, values), res.converged))
        if improvement < energy_tol:
            stop = "objective improvement below tolerance"
            break
    circ = layout.circuit(n, reference)
    return AdaptResult(value, energy(circ, values), values, layout, circ, rounds, initial_value, stop, trace)


# excited states -------------------------------------------------------------

class PenaltyError(ValueError):
    pass


@dataclass
class SolvedState:
    circuit: Circuit
    energy: float


@dataclass
class ExcitedStateTask:
    hamiltonian: PauliSum
    solved: list[SolvedState] = field(default_factory=list)
    penalties: list[float] | None = None

    def weights(self) -> list[float]:
        """Coefficients ``w_i`` in ``<H> + Σ w_i |<ψ_i|ψ>|²``."""
        if self.penalties is not None:
            if len(self.penalties) != len(self.solved):
                raise PenaltyError("need one penalty per solved state")
            return [float(w) for w in self.penalties]
        out = []
        for s in self.solved:
            if s.energy >= 0:
                raise PenaltyError(
                    f"solved energy {s.energy} is not negative; pass explicit positive penalties"
                )
            out.append(-s.energy)
        return out

    def add(self, circuit: Circuit, values: Mapping[str, float], energy: float) -> None:
        self.solved.append(SolvedState(circuit.bind(values), energy))


def overlap_objective(ansatz: Circuit, target: Circuit) -> Expectation:
    """``|<target|ansatz>|²`` as the all-zero probability of ``target† ansatz``."""
    n = max(ansatz.n_qubits, target.n_qubits)
    return Expectation(ansatz.with_qubits(n) + target.with_qubits(n).adjoint(), AllZeroProjector())


def excited_objective(task: ExcitedStateTask, ansatz: Circuit) -> Objective:
    """``<H>_U - Σ_i E_i |<ψ_i|U>|²`` (or explicit positive weights)."""
    n = max(ansatz.n_qubits, task.hamiltonian.max_qubit() + 1)
    for s in task.solved:
        if s.circuit.parameters:
            raise ValueError("solved circuits must be bound to numerical angles")
        if s.circuit.n_qubits > n:
            raise ValueError("solved circuit acts on more qubits than the Hamiltonian")
    ansatz = ansatz.with_qubits(n)
    obj: Objective = Expectation(ansatz, task.hamiltonian)
    for w, s in zip(task.weights(), task.solved):
        obj = obj + Constant(0.0) if w == 0 else obj + w * overlap_objective(ansatz, s.circuit)
    return obj


def excited_adapt(
    task: ExcitedStateTask,
    layout: AnsatzLayout,
    pool: OperatorPool,
    reference: Circuit | None = None,
    **opts,
) -> AdaptResult:
    """Adapt-VQE driven by the penalized objective; screening uses its full gradient."""
    return adapt_vqe(task.hamiltonian, layout, pool, reference,
                     objective=lambda c: excited_objective(task, c), **opts)


def excited_vqe(task: ExcitedStateTask, ansatz: Circuit, reference: Circuit | None = None,
                **opts) -> VQEResult:
    return vqe(task.hamiltonian, ansatz, reference, objective=lambda c: excited_objective(task, c), **opts)


# references -----------------------------------------------------------------

def prepare_reference(
    occupied: Sequence[int],
    n_qubits: int,
    cis_pair: tuple[tuple[int, int], tuple[int, int]] | None = None,
) -> Circuit:
    """Basis flips for ``occupied``; with ``cis_pair`` an open-shell singlet.

    ``cis_pair = ((i_up, a_up), (i_down, a_down))`` flips to the determinant
    ``D_up`` (``i_up`` replaced by ``a_up``) and applies the double excitation
    ``a†_{a_down} a_{i_down} a†_{i_up} a_{a_up}`` at angle π/2, which moves half
    the weight onto ``D_down``.  The result is real, has amplitudes ±1/√2 on
    the two determinants, and is an ``S² = 0`` eigenstate.
    """
    occ = [int(q) for q in occupied]
    if len(set(occ)) != len(occ) or any(not 0 <= q < n_qubits for q in occ):
        raise ValueError(f"invalid occupied orbitals {occupied!r} for {n_qubits} qubits")
    if cis_pair is None:
        return Circuit(tuple(BasisFlip(q) for q in occ), n_qubits)
    (i_up, a_up), (i_dn, a_dn) = cis_pair
    idx = [i_up, a_up, i_dn, a_dn]
    if len(set(idx)) != 4 or any(not 0 <= q < n_qubits for q in idx):
        raise ValueError(f"invalid cis_pair {cis_pair!r}")
    if i_up not in occ or i_dn not in occ or a_up in occ or a_dn in occ:
        raise ValueError(f"cis_pair {cis_pair!r} must excite occupied into virtual orbitals")
    d_up = sorted(set(occ) - {i_up} | {a_up})
    flips = tuple(BasisFlip(q) for q in d_up)
    mix = FermionicExcitation(Excitation(((a_dn, i_dn), (i_up, a_up))), math.pi / 2)
    return Circuit(flips + (mix,), n_qubits)
