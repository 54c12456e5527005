import math

import numpy as np
import pytest

from conftest import illustrative_circuit, random_real_circuit, random_real_hamiltonian, random_values
from fermigrad.autodiff import (
    EXACT4,
    QUBIT,
    REAL2,
    Constant,
    Expectation,
    GeneratorNotTwoEigenvalueError,
    GradientScheme,
    UnknownParameterError,
    count_expectations,
    finite_difference,
    grad,
    gradient,
    shift_rule_gradient,
)
from fermigrad.fermion import Excitation
from fermigrad.io import load_problem
from fermigrad.pauli import PauliSum, pauli_sum
from fermigrad.simulator import BasisFlip, FermionicExcitation, PauliRotation, circuit

REAL2_MINUS = GradientScheme("real2", alpha=-1)
APPROX_PLUS = GradientScheme("approx", which=1)
APPROX_MINUS = GradientScheme("approx", which=-1)
ALL = [QUBIT, EXACT4, REAL2, REAL2_MINUS, APPROX_PLUS, APPROX_MINUS]


@pytest.fixture(scope="module")
def h2():
    p = load_problem("h2_sto3g_0.7414")
    ansatz = circuit(FermionicExcitation(Excitation.of(0, 2, 1, 3), "theta"), n_qubits=4)
    return Expectation(p.reference_circuit() + ansatz, p.hamiltonian)


# schemes --------------------------------------------------------------------

def test_scheme_constants():
    assert (EXACT4.prefactor, EXACT4.shift) == (0.25, math.pi)
    assert (REAL2.prefactor, REAL2.shift) == (0.5, math.pi / 2)
    assert [EXACT4.cost(2), REAL2.cost(2), QUBIT.cost(2), APPROX_PLUS.cost(2)] == [4, 2, 16, 2]
    assert GradientScheme.parse("real2", "-") == REAL2_MINUS
    with pytest.raises(ValueError):
        GradientScheme("nope")


# shift rule -----------------------------------------------------------------

def test_single_qubit_rotation_shift_rule():
    e = Expectation(circuit(PauliRotation(PauliSum.from_string("X0"), "t"), n_qubits=1), PauliSum.from_string("Z0"))
    d = shift_rule_gradient(e, 0, 0.5)
    assert count_expectations(d) == 2
    for t in np.linspace(-3, 3, 7):
        assert d({"t": t}) == pytest.approx(-math.sin(t), abs=1e-12)


def test_shift_rule_rejects_wrong_radius_and_non_two_eigenvalue():
    e = Expectation(circuit(PauliRotation(pauli_sum((0.5, "X0"), (0.3, "Z1")), "t"), n_qubits=2),
                    PauliSum.from_string("Z0"))
    with pytest.raises(GeneratorNotTwoEigenvalueError):
        shift_rule_gradient(e, 0)
    single = Expectation(circuit(PauliRotation(PauliSum.from_string("X0"), "t"), n_qubits=1), PauliSum.from_string("Z0"))
    with pytest.raises(GeneratorNotTwoEigenvalueError):
        shift_rule_gradient(single, 0, 0.25)


def test_multi_term_rotation_uses_product_rule():
    gen = pauli_sum((0.5, "X0 X1"), (0.3, "Y0 Y1"), (0.2, ""))
    e = Expectation(circuit(BasisFlip(0), PauliRotation(gen, "t"), n_qubits=2), pauli_sum((1, "Z0"), (0.4, "X0 Y1")))
    d = grad(e, "t")
    for t in (0.1, 1.3):
        assert d({"t": t}) == pytest.approx(finite_difference(e, "t", {"t": t}), abs=1e-8)


def test_gradient_vanishes_at_symmetric_extremum():
    e = Expectation(circuit(PauliRotation(PauliSum.from_string("X0"), "t"), n_qubits=1), PauliSum.from_string("Z0"))
    assert grad(e, "t")({"t": 0.0}) == pytest.approx(0.0, abs=1e-14)
    assert grad(e, "t")({"t": math.pi}) == pytest.approx(0.0, abs=1e-14)


# fermionic schemes ---------------------------------------------------------

@pytest.mark.parametrize("scheme, leaves", [(QUBIT, 16), (EXACT4, 4), (REAL2, 2), (REAL2_MINUS, 2), (APPROX_PLUS, 2)])
def test_leaf_counts_double(h2, scheme, leaves):
    assert count_expectations(grad(h2, "theta", scheme)) == leaves


@pytest.mark.parametrize("scheme, leaves", [(QUBIT, 4), (EXACT4, 4), (REAL2, 2), (APPROX_MINUS, 2)])
def test_leaf_counts_single(scheme, leaves):
    e = Expectation(circuit(BasisFlip(0), FermionicExcitation(Excitation.of(0, 1), "t"), n_qubits=2),
                    PauliSum.from_string("Z0"))
    assert count_expectations(grad(e, "t", scheme)) == leaves


@pytest.mark.parametrize("scheme", ALL, ids=lambda s: s.label())
def test_h2_schemes_agree_with_finite_differences(h2, scheme):
    d = grad(h2, "theta", scheme)
    for t in np.linspace(0, 2 * math.pi, 9):
        v = {"theta": t}
        assert d(v) == pytest.approx(finite_difference(h2, "theta", v), abs=1e-7)


def test_approx_equals_exact_without_nullspace_support(h2):
    # |1100> lies entirely in the active space of the (0,2)(1,3) excitation
    for t in (0.3, 2.2):
        v = {"theta": t}
        assert abs(grad(h2, "theta", APPROX_PLUS)(v) - grad(h2, "theta", EXACT4)(v)) < 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_random_eight_qubit_circuits_qubit_scheme_vs_fd(seed):
    rng = np.random.default_rng(seed)
    c = random_real_circuit(rng, 8, 4)
    h = random_real_hamiltonian(rng, 8)
    e = Expectation(c, h)
    vals = random_values(rng, c.parameters)
    for p in c.parameters:
        q = grad(e, p, QUBIT)(vals)
        assert abs(q - finite_difference(e, p, vals)) < 1e-7
        assert abs(q - grad(e, p, EXACT4)(vals)) < 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_exact4_matches_qubit_on_complex_circuits(seed):
    rng = np.random.default_rng(100 + seed)
    n = 6
    c = random_real_circuit(rng, n, 3)
    # a complex phase on a diagonal string spoils reality of the wavefunction
    c = c + circuit(PauliRotation(pauli_sum((0.7, "Z0 Z3")), 0.9), PauliRotation(pauli_sum((0.3, "Z1")), 0.4),
                    n_qubits=n)
    c = c + random_real_circuit(rng, n, 2)
    h = random_real_hamiltonian(rng, n) + pauli_sum((0.3, "X0 Y2"), (-0.3, "Y0 X2"))
    e = Expectation(c, h)
    vals = random_values(rng, c.parameters)
    for p in c.parameters:
        ex = grad(e, p, EXACT4)(vals)
        assert abs(ex - grad(e, p, QUBIT)(vals)) < 1e-10
        assert abs(ex - finite_difference(e, p, vals)) < 1e-7


def test_illustrative_complex_case():
    h = load_problem("h2_631g_0.7414").hamiltonian
    e = Expectation(illustrative_circuit("G+"), h)
    thetas = np.linspace(0, 2 * math.pi, 13)
    dev_plus, dev_minus = [], []
    for t in thetas:
        v = {"theta": t}
        fd = finite_difference(e, "theta", v)
        ex = grad(e, "theta", EXACT4)(v)
        rp, rm = grad(e, "theta", REAL2)(v), grad(e, "theta", REAL2_MINUS)(v)
        assert abs(ex - fd) < 1e-6
        assert abs(0.5 * (rp + rm) - ex) < 1e-9
        dev_plus.append(abs(rp - fd))
        dev_minus.append(abs(rm - fd))
    assert max(dev_plus) > 1e-3 and max(dev_minus) > 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_real_circuits_alpha_independent(seed):
    rng = np.random.default_rng(200 + seed)
    n = int(rng.integers(4, 9))
    c = random_real_circuit(rng, n, int(rng.integers(1, 5)))
    e = Expectation(c, random_real_hamiltonian(rng, n))
    vals = random_values(rng, c.parameters)
    for p in c.parameters:
        a, b, x = (grad(e, p, s)(vals) for s in (REAL2, REAL2_MINUS, EXACT4))
        assert abs(a - b) < 1e-10 and abs(a - x) < 1e-10


# chain rule -----------------------------------------------------------------

def test_grad_of_constant_is_zero():
    d = grad(Constant(3.0), "x")
    assert isinstance(d, Constant) and d.value == 0.0


def test_unknown_parameter(h2):
    with pytest.raises(UnknownParameterError):
        grad(h2, "nope")


def test_gradient_dict_handles_foreign_parameters(h2):
    g = gradient(h2, ["theta", "other"])
    assert g["other"]({"theta": 0.2}) == 0.0


def test_square_gradient(h2):
    sq = h2 ** 2
    d = grad(sq, "theta", EXACT4)
    for t in (0.2, 1.9):
        v = {"theta": t}
        assert d(v) == pytest.approx(2 * h2(v) * grad(h2, "theta", EXACT4)(v), abs=1e-12)
        assert d(v) == pytest.approx(finite_difference(sq, "theta", v), abs=1e-7)


def test_second_derivative(h2):
    d2 = grad(grad(h2, "theta"), "theta")
    h = 1e-4
    for t in (0.3, 2.0):
        fd2 = (h2({"theta": t + h}) - 2 * h2({"theta": t}) + h2({"theta": t - h})) / h**2
        assert d2({"theta": t}) == pytest.approx(fd2, abs=1e-4)


def test_product_sum_scale_chain(h2):
    other = Expectation(h2.circuit, PauliSum.from_string("Z0"))
    obj = 0.5 * h2 * other - 3.0 * other + 1.0
    d = grad(obj, "theta", REAL2)
    for t in (0.4, 1.1):
        v = {"theta": t}
        assert d(v) == pytest.approx(finite_difference(obj, "theta", v), abs=1e-7)


def test_shared_parameter_sums_occurrences():
    c = circuit(BasisFlip(0), BasisFlip(1), FermionicExcitation(Excitation.of(0, 2), "a"),
                FermionicExcitation(Excitation.of(1, 3), "-2.0*a+0.3"), n_qubits=4)
    h = pauli_sum((1.0, "Z0 Z3"), (0.5, "X0 X2"), (0.25, "Z1"))
    e = Expectation(c, h)
    for s in (EXACT4, REAL2, QUBIT):
        d = grad(e, "a", s)
        assert d({"a": 0.7}) == pytest.approx(finite_difference(e, "a", {"a": 0.7}), abs=1e-8)


def test_threaded_evaluation_is_bit_identical(h2):
    d = grad(h2 ** 2 + h2, "theta", QUBIT)
    v = {"theta": 0.77}
    assert d.evaluate(v) == d.evaluate(v, threads=4)


# finite differences -----------------------------------------------------------

def test_finite_difference_linear_is_exact():
    class Linear:
        def evaluate(self, values):
            return 3.0 * values["t"] + 1.0

    assert finite_difference(Linear(), "t", {"t": 0.3}) == pytest.approx(3.0, abs=1e-9)
    assert finite_difference(Linear(), "t", {"t": 0.3}, h=0.7) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(ValueError):
        finite_difference(Linear(), "t", {"t": 0.3}, h=0.0)


def test_finite_difference_is_not_a_shift_rule():
    # E(t) = cos t; a central difference with h = π/2 gives the chord slope -sin(t)·sin(h)/h
    e = Expectation(circuit(PauliRotation(PauliSum.from_string("X0"), "t"), n_qubits=1), PauliSum.from_string("Z0"))
    t, h = 0.8, math.pi / 2
    chord = finite_difference(e, "t", {"t": t}, h=h)
    assert chord == pytest.approx(-math.sin(t) * math.sin(h) / h, abs=1e-12)
    assert abs(chord - grad(e, "t")({"t": t})) > 0.1


def test_finite_difference_richardson(h2):
    v = {"theta": 0.9}
    exact = grad(h2, "theta", EXACT4)(v)
    f1 = finite_difference(h2, "theta", v, 1e-3)
    f2 = finite_difference(h2, "theta", v, 5e-4)
    assert abs((4 * f2 - f1) / 3 - exact) < 1e-9
    assert abs(finite_difference(h2, "theta", v) - exact) < 1e-7
