import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fermion_dense, generator_dense, ladder_matrix, nullspace_dense, random_excitation
from fermigrad.fermion import (
    JW,
    Excitation,
    FermionOperator,
    eigen_projectors,
    encoded_generator,
    encoded_projector,
    excitation_generator,
    g_plus_minus,
    jordan_wigner,
    nullspace_projector,
    particle_number_operator,
    s_squared_operator,
    sz_operator,
)
from fermigrad.pauli import PauliSum, pauli_sum, to_dense


def dense(f: FermionOperator, n: int) -> np.ndarray:
    return to_dense(jordan_wigner(f, n), n)


@st.composite
def excitations(draw, n=4):
    rank = draw(st.integers(1, n // 2))
    idx = draw(st.permutations(range(n)))[: 2 * rank]
    return Excitation(tuple((idx[2 * i], idx[2 * i + 1]) for i in range(rank)))


# Excitation -----------------------------------------------------------------

def test_excitation_fields():
    e = Excitation.of(0, 2, 1, 3)
    assert e.pairs == ((0, 2), (1, 3))
    assert e.rank == 2
    assert str(e) == "0 2 1 3"


@pytest.mark.parametrize("pairs", [((0, 0),), ((0, 1), (1, 2)), ((-1, 2),), ()])
def test_excitation_rejects_invalid(pairs):
    with pytest.raises(ValueError):
        Excitation(pairs)


# generators -----------------------------------------------------------------

def test_single_generator_form():
    g = excitation_generator(Excitation.of(0, 1))
    expected = 1j * (FermionOperator.create(0) * FermionOperator.annihilate(1)
                     - FermionOperator.create(1) * FermionOperator.annihilate(0))
    assert np.allclose(dense(g, 2), dense(expected, 2))


def test_double_generator_form():
    a, c = FermionOperator.annihilate, FermionOperator.create
    g = excitation_generator(Excitation.of(0, 2, 1, 3))
    prod = c(0) * a(2) * c(1) * a(3)
    assert np.allclose(dense(g, 4), dense(1j * (prod - prod.dagger()), 4))


@settings(max_examples=50, deadline=None)
@given(excitations())
def test_encoded_generator_hermitian_traceless(e):
    m = to_dense(encoded_generator(e, 4), 4)
    assert np.allclose(m, m.conj().T, atol=1e-12)
    assert abs(np.trace(m)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(excitations())
def test_encoding_matches_independent_oracle(e):
    assert np.allclose(to_dense(encoded_generator(e, 4), 4), generator_dense(e, 4), atol=1e-12)
    assert np.allclose(to_dense(encoded_projector(e, 4), 4), nullspace_dense(e, 4), atol=1e-12)


@pytest.mark.parametrize("rank, count", [(1, 2), (2, 8), (3, 32)])
def test_encoded_term_count(rank, count, rng):
    e = random_excitation(rng, 6, rank)
    assert len(encoded_generator(e, 6)) == count == 2 ** (2 * rank - 1)


def test_pair_order_flips_sign_only():
    a = to_dense(encoded_generator(Excitation.of(0, 2, 1, 3), 4), 4)
    b = to_dense(encoded_generator(Excitation.of(1, 3, 0, 2), 4), 4)
    assert np.allclose(np.abs(a), np.abs(b))


# nullspace projector ---------------------------------------------------------

def test_single_projector_jw_form():
    p0 = encoded_projector(Excitation.of(0, 3), 4)
    expected = PauliSum.identity() - 0.5 * (PauliSum.identity() - pauli_sum((1.0, "Z0 Z3")))
    assert p0.isclose(expected)


def test_double_projector_q_form():
    def q(sign, k):
        return 0.5 * (PauliSum.identity() + sign * PauliSum.from_string(f"Z{k}"))

    expected = (PauliSum.identity() - q(-1, 0) * q(-1, 1) * q(1, 2) * q(1, 3)
                - q(1, 0) * q(1, 1) * q(-1, 2) * q(-1, 3))
    assert encoded_projector(Excitation.of(0, 2, 1, 3), 4).isclose(expected)


@settings(max_examples=50, deadline=None)
@given(excitations())
def test_projector_properties(e):
    p0 = encoded_projector(e, 4)
    g = encoded_generator(e, 4)
    assert p0.is_diagonal()
    assert (g * p0).isclose(PauliSum(), atol=1e-12)
    assert (p0 * g).isclose(PauliSum(), atol=1e-12)
    assert (p0 * p0).isclose(p0)


def test_two_index_number_operators_supported():
    from fermigrad.fermion import hopping_op
    n01 = hopping_op(0, 1)
    assert np.allclose(dense(n01, 2), ladder_matrix(0, 2, True) @ ladder_matrix(1, 2, False))


# G± and P± ---------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(excitations())
def test_operator_identities(e):
    n = 4
    eye = np.eye(2**n)
    g = dense(excitation_generator(e), n)
    p0 = dense(nullspace_projector(e), n)
    gp, gm = (dense(x, n) for x in g_plus_minus(e))
    pp, pm = (dense(x, n) for x in eigen_projectors(e))
    tol = 1e-10
    assert np.allclose(gp @ gp, eye, atol=tol)
    assert np.allclose(gm @ gm, eye, atol=tol)
    assert np.allclose(gp @ gm, eye - 2 * p0, atol=tol)
    assert np.allclose(g @ p0, 0, atol=tol)
    assert np.allclose(0.5 * (gp + gm), g, atol=tol)
    assert np.allclose(pp + pm + p0, eye, atol=tol)
    assert np.allclose(pp @ pp, pp, atol=tol)
    assert np.allclose(pm @ pm, pm, atol=tol)
    assert np.allclose(pp @ pm, 0, atol=tol)
    assert np.allclose(pp - pm, g, atol=tol)
    ev = np.linalg.eigvalsh(g)
    assert np.all(np.min(np.abs(ev[:, None] - np.array([-1, 0, 1])[None, :]), axis=1) < tol)


def test_eigenvectors_of_generator():
    # |o_q^p> has orbitals q occupied; G maps it into the p-occupied configuration
    e = Excitation.of(0, 2, 1, 3)
    g = to_dense(encoded_generator(e, 4), 4)
    a, b = np.zeros(16), np.zeros(16)
    a[0b0011], b[0b1100] = 1, 1
    ga = g @ a
    phase = ga[0b1100]  # G|a> = phase * |b>
    assert abs(abs(phase) - 1) < 1e-12
    plus = (a + phase * b) / np.sqrt(2)
    minus = (a - phase * b) / np.sqrt(2)
    for v, lam in ((plus, 1), (minus, -1)):
        assert np.allclose(g @ v, lam * v, atol=1e-12)


# Jordan-Wigner ---------------------------------------------------------------

def test_creation_operator_single_mode():
    assert jordan_wigner(FermionOperator.create(0), 1).isclose(pauli_sum((0.5, "X0"), (-0.5j, "Y0")))


def test_anticommutation():
    n = 4
    for p, q in itertools.product(range(n), repeat=2):
        a = jordan_wigner(FermionOperator.annihilate(p), n)
        ad = jordan_wigner(FermionOperator.create(q), n)
        anti = a * ad + ad * a
        assert anti.isclose(PauliSum.identity() if p == q else PauliSum())
        b = jordan_wigner(FermionOperator.annihilate(q), n)
        assert (a * b + b * a).isclose(PauliSum())


def test_ladder_matches_oracle():
    for k in range(3):
        for dag in (False, True):
            assert np.allclose(to_dense(JW.ladder(k, dag, 3), 3), ladder_matrix(k, 3, dag))


@settings(max_examples=30, deadline=None)
@given(excitations(), excitations(), st.floats(-2, 2), st.floats(-2, 2))
def test_encoding_is_linear(e1, e2, x, y):
    f1, f2 = excitation_generator(e1), excitation_generator(e2)
    lhs = jordan_wigner(x * f1 + y * f2, 4)
    assert lhs.isclose(x * jordan_wigner(f1, 4) + y * jordan_wigner(f2, 4), atol=1e-12)


def test_encoding_index_out_of_range():
    with pytest.raises(IndexError):
        jordan_wigner(FermionOperator.create(4), 4)


def test_fermion_dense_oracle_consistency():
    f = excitation_generator(Excitation.of(0, 1)) + 0.3 * nullspace_projector(Excitation.of(1, 2))
    assert np.allclose(dense(f, 3), fermion_dense(f, 3))


# spin operators --------------------------------------------------------------

def test_spin_operators_on_determinants():
    n = 4
    s2 = dense(s_squared_operator(n), n)
    sz = dense(sz_operator(n), n)
    num = dense(particle_number_operator(n), n)
    closed = np.zeros(16)
    closed[0b1100] = 1
    assert np.isclose(closed @ s2 @ closed, 0)
    assert np.isclose(closed @ num @ closed, 2)
    triplet = np.zeros(16)
    triplet[0b1010] = 1  # orbitals 0 and 2: two up electrons
    assert np.isclose(triplet @ sz @ triplet, 1)
    assert np.isclose(triplet @ s2 @ triplet, 2)
