from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selfaffine.errors import NotSimpleDigitSet
from selfaffine.lattice import (IntegerMatrix, Lattice, ResidueSystem, column_hnf, complete_residue_system,
                                invariant_lattice, is_expansive, is_simple_digit_set, reduce_pair)


def test_integer_matrix_basics():
    R = IntegerMatrix.of([[4, 0], [1, 2]])
    assert R.det == 8
    assert R.T.rows == ((4, 1), (0, 2))
    assert R @ (1, 1) == (4, 3)
    assert (R ** 2).rows == ((16, 0), (6, 4))
    assert R.solve((4, 3)) == (Fraction(1), Fraction(1))
    inv = np.array(R.inverse, dtype=float)
    assert np.allclose(inv @ R.to_array(), np.eye(2))
    assert IntegerMatrix.of(3).rows == ((3,),)


def test_expansive():
    assert is_expansive(4)
    assert is_expansive([[4, 0], [1, 2]])
    assert not is_expansive([[1, 0], [0, 2]])
    assert not is_expansive([[0, -1], [1, 0]])
    assert is_expansive(-2)


def test_column_hnf_preserves_span():
    A = [[2, 4, 6], [0, 3, 9]]
    H, V, r = column_hnf(A)
    assert r == 2
    assert (np.array(A) @ np.array(V) == np.array(H)).all()
    assert round(abs(np.linalg.det(np.array(V, dtype=float)))) == 1


def test_lattice_membership_and_index():
    lat = Lattice.spanned_by([(2, 0), (0, 2), (2, 2)], 2)
    assert lat.full_rank and lat.index == 4
    assert (4, -2) in lat
    assert (1, 0) not in lat
    assert not lat.equals_Zd


def test_residue_system_counts():
    for R in (4, [[4, 0], [1, 2]], [[2, 1], [0, 3]], [[2, 0, 0], [0, 2, 0], [0, 0, 2]]):
        reps = complete_residue_system(R)
        assert len(reps) == abs(IntegerMatrix.of(R).det)
        rs = ResidueSystem(R)
        assert sorted({rs.reduce(v) for v in reps}) == sorted(reps)


def test_simple_digit_sets():
    assert is_simple_digit_set(4, [0, 2])
    assert not is_simple_digit_set(4, [0, 4])


def test_invariant_lattice_quarter_cantor():
    lat, b0 = invariant_lattice(4, [0, 2])
    assert lat.basis_matrix() == IntegerMatrix.of(2)
    assert b0 == (0,)


def test_reduce_pair_identity_for_full_lattice():
    red = reduce_pair([[4, 0], [1, 4]], [(0, 0), (0, 3), (1, 0), (1, 3)])
    assert red.kind == "identity"
    assert red.M == IntegerMatrix.identity(2)


def test_reduce_pair_rank_deficient():
    R = [[2, 0], [0, 3]]
    red = reduce_pair(R, [(0, 0), (1, 0)])
    assert red.kind == "rank-deficient"
    assert red.rank == 1
    assert red.R == IntegerMatrix.of(2)
    assert sorted(red.B) in ([(0,), (1,)], [(-1,), (0,)])


def test_reduce_pair_translation():
    red = reduce_pair(4, [1, 3])
    assert red.translation == (1,)
    assert red.kind == "full-rank"
    assert set(red.B) == {(0,), (1,)}


def test_reduce_pair_rejects_non_simple():
    with pytest.raises(NotSimpleDigitSet):
        reduce_pair(4, [0, 4])


small = st.integers(-4, 4)


@settings(max_examples=60, deadline=None)
@given(st.lists(small, min_size=4, max_size=4), st.tuples(small, small), st.tuples(small, small))
def test_reduce_is_idempotent_on_cosets(entries, v, k):
    A = np.array(entries).reshape(2, 2) + np.diag([5, 5])
    R = IntegerMatrix.of(A.tolist())
    if R.det == 0:
        return
    rs = ResidueSystem(R)
    w = tuple(a + b for a, b in zip(v, R @ k))
    assert rs.reduce(w) == rs.reduce(v)
    assert rs.reduce(rs.reduce(v)) == rs.reduce(v)
