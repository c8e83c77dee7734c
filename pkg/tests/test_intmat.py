import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.matrices.normalforms import smith_normal_form

from sadic import intmat

small = st.integers(-6, 6)


def square(n):
    return st.lists(st.lists(small, min_size=n, max_size=n), min_size=n, max_size=n)


@given(st.integers(1, 5).flatmap(square))
@settings(max_examples=150, deadline=None)
def test_det_matches_sympy(a):
    assert intmat.det(a) == sympy.Matrix(a).det()


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(square(n), square(n))))
@settings(max_examples=100, deadline=None)
def test_matmul_matches_numpy(pair):
    a, b = pair
    assert np.array_equal(np.array(intmat.matmul(a, b)), np.array(a) @ np.array(b))


def test_matpow_fibonacci_big():
    F = intmat.matpow([[1, 1], [1, 0]], 100)
    assert F[0][1] == 354224848179261915075  # F_100, beyond 64 bits
    assert intmat.det(F) == 1


def test_inverse_unimodular_and_rejects_others():
    a = [[2, 1], [1, 1]]
    assert [list(r) for r in intmat.inverse(a)] == [[1, -1], [-1, 2]]
    with pytest.raises(ValueError):
        intmat.inverse([[2, 0], [0, 1]])


@given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=1, max_size=5))
@settings(max_examples=100, deadline=None)
def test_hermite_transform_identity(vecs):
    H, U = intmat.hermite_rows(vecs)
    assert [list(r) for r in intmat.matmul(U, vecs)] == [list(r) for r in H]
    assert abs(intmat.det(U)) == 1


@given(st.lists(st.lists(small, min_size=2, max_size=3).filter(lambda r: len(r) == 3), min_size=3, max_size=4))
@settings(max_examples=80, deadline=None)
def test_elementary_divisors_match_smith_form(vecs):
    M = sympy.Matrix(vecs)
    snf = smith_normal_form(M, domain=sympy.ZZ)
    expected = sorted(abs(snf[i, i]) for i in range(min(snf.shape)) if snf[i, i] != 0)
    assert sorted(intmat.elementary_divisors(vecs)) == expected


def test_norm_inf_is_max_row_sum():
    assert intmat.norm_inf([[1, -3], [2, 2]]) == 4
