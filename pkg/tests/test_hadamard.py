import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import triple
from selfaffine.errors import NotHadamard, NotRealHadamard, SizeMismatch
from selfaffine.hadamard import character_matrix, gasket_triple, phase_numerators, product_triple, verify_triple

SYLVESTER4 = [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]


def test_phase_numerators_exact():
    P, D = phase_numerators(4, [0, 2], [0, 1])
    assert D == 4
    assert P.tolist() == [[0, 0], [0, 2]]


def test_character_matrix_signs():
    C = character_matrix(4, [0, 2], [0, 1])
    assert np.allclose(C, [[1, 1], [1, -1]])
    assert np.allclose(character_matrix(4, [0, 2], [0, 1], sign=-1), C.conj())


def test_size_mismatch():
    with pytest.raises(SizeMismatch):
        verify_triple(4, [0, 2], [0])


def test_non_simple_rejected_with_reason():
    T = verify_triple(4, [0, 4], [0, 2])
    assert not T.accepted
    with pytest.raises(NotHadamard, match="simple"):
        T.require()


def test_gasket_from_sylvester_matches_preset():
    T = gasket_triple(SYLVESTER4)
    assert T.accepted
    R, B, L = triple("gasket_d3")
    assert sorted(T.L) == sorted(L)


def test_gasket_rejects_bad_input():
    with pytest.raises(NotRealHadamard):
        gasket_triple([[1, 1], [1, 1]])
    with pytest.raises(NotRealHadamard):
        gasket_triple([[1, 2], [1, -1]])
    with pytest.raises(NotRealHadamard):
        gasket_triple([[-1, 1], [1, 1]])


def test_product_triple_k1_identity():
    T = verify_triple(*triple("quarter_cantor"))
    assert product_triple(T, 1) is T


@settings(max_examples=30, deadline=None)
@given(st.integers(-20, 20), st.permutations(range(4)))
def test_translation_and_permutation_invariance(t, perm):
    R, B, L = triple("ex_4_0_1_4")
    base = verify_triple(R, B, L)
    B2 = [tuple(x + t for x in B[i]) for i in perm]
    L2 = [L[i] for i in perm]
    T = verify_triple(R, B2, L2)
    assert T.accepted
    assert abs(T.deviation - base.deviation) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3))
def test_l_shift_by_dual_lattice(a, b):
    R, B, L = triple("ex_4_0_1_2")
    RT = np.array(R).T
    shift = RT @ np.array([a, b])
    L2 = [tuple(int(x) for x in np.array(l) + shift) for l in L]
    assert verify_triple(R, B, L2).accepted
