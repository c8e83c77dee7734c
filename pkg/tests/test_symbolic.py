import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sadic import intmat
from sadic.symbolic import (FIBONACCI, Substitution, compose, generates_lattice, good_return_words,
                            is_good_return_word, is_simple_word, occurrences, permute_images,
                            population_vector, random_substitution, substitution_matrix, tiling_length)

PHI = (1 + math.sqrt(5)) / 2


def _valid(ims, m):
    return max(map(len, ims)) > 1 and set().union(*ims) == set(range(1, m + 1))


def subs(m):
    word = st.lists(st.integers(1, m), min_size=1, max_size=4).map(tuple)
    return st.lists(word, min_size=m, max_size=m).filter(lambda ims: _valid(ims, m)).map(
        lambda ims: Substitution(m, tuple(ims)))


def as_lists(a):
    return [list(r) for r in a]


def count_matrix(z):
    """Brute-force symbol counts, independent of the class internals."""
    return [[sum(1 for x in z.images[j] if x == i) for j in range(z.m)] for i in range(1, z.m + 1)]


def test_fibonacci_matrix():
    assert as_lists(substitution_matrix(FIBONACCI)) == [[1, 1], [1, 0]]


def test_matrix_of_121_12():
    assert as_lists(Substitution.from_images(["121", "12"]).matrix) == [[2, 1], [1, 1]]


def test_no_expanding_image_rejected():
    with pytest.raises(ValueError):
        Substitution.from_images(["1", "2"])


def test_fibonacci_squared():
    z = compose(FIBONACCI, FIBONACCI)
    assert z.images == ((1, 2, 1), (1, 2))
    assert as_lists(z.matrix) == [[2, 1], [1, 1]]


def test_compose_with_letter_permutation():
    z = Substitution.from_images(["12", "1"])
    assert permute_images(z, (2, 1)).images == ((1,), (1, 2))


@given(st.integers(2, 5).flatmap(lambda m: st.tuples(subs(m), subs(m))))
@settings(max_examples=100, deadline=None)
def test_compose_matrix_is_product(pair):
    a, b = pair
    assert count_matrix(compose(a, b)) == as_lists(intmat.matmul(count_matrix(a), count_matrix(b)))


@given(st.integers(2, 4).flatmap(lambda m: st.tuples(subs(m), st.lists(st.integers(1, m), max_size=12))))
@settings(max_examples=100, deadline=None)
def test_population_of_image(case):
    z, v = case
    lhs = population_vector(z(tuple(v)), z.m)
    rhs = tuple(intmat.matvec(z.matrix, population_vector(tuple(v), z.m)))
    assert lhs == rhs


def test_population_vector_examples():
    assert population_vector("121", 2) == (2, 1)
    assert population_vector("", 3) == (0, 0, 0)


def test_tiling_length():
    assert tiling_length("12", (1, 1)) == 2.0
    assert tiling_length("121", (PHI, 1)) == pytest.approx(PHI ** 3, abs=1e-12)


@given(st.lists(st.integers(1, 3), max_size=10), st.lists(st.integers(1, 3), max_size=10),
       st.lists(st.floats(0.1, 5), min_size=3, max_size=3), st.floats(0.1, 4))
def test_tiling_length_linear(u, v, s, c):
    assert tiling_length(tuple(u) + tuple(v), s) == pytest.approx(tiling_length(u, s) + tiling_length(v, s))
    assert tiling_length(u, [c * x for x in s]) == pytest.approx(c * tiling_length(u, s))


def test_good_return_words_fibonacci_cubed():
    z3 = compose(FIBONACCI, compose(FIBONACCI, FIBONACCI))
    assert z3.images == ((1, 2, 1, 1, 2), (1, 2, 1))
    words = good_return_words(z3, 3)
    assert (1, 2) in words
    for v in words:
        c = v[0]
        pat = tuple(v) + (c,)
        assert all(any(img[i:i + len(pat)] == pat for i in range(len(img))) for img in z3.images)


def test_fibonacci_has_no_good_return_words():
    assert good_return_words(FIBONACCI, 4) == set()
    assert not is_good_return_word(FIBONACCI, (1,))


def test_generates_lattice_examples():
    assert generates_lattice([(1, 0), (0, 1)])
    assert not generates_lattice([(2, 0), (0, 2)])


@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=3, max_size=3))
@settings(max_examples=100, deadline=None)
def test_generates_lattice_of_square_matrix_iff_unimodular(rows):
    assert generates_lattice(rows, 3) == (abs(intmat.det(rows)) == 1)


@given(st.lists(st.lists(st.integers(-3, 3), min_size=2, max_size=2), min_size=2, max_size=4),
       st.integers(0, 3), st.integers(0, 3), st.integers(-3, 3))
@settings(max_examples=100, deadline=None)
def test_generates_lattice_row_operation_invariant(vecs, i, j, k):
    i, j = i % len(vecs), j % len(vecs)
    if i == j:
        return
    moved = [list(v) for v in vecs]
    moved[i] = [a + k * b for a, b in zip(moved[i], moved[j])]
    assert generates_lattice(vecs, 2) == generates_lattice(moved, 2)


def test_simple_word_examples():
    assert is_simple_word("ba")
    assert not is_simple_word("aba")
    assert is_simple_word("bbaa")


@given(st.lists(st.sampled_from("ab"), min_size=1, max_size=6), st.lists(st.sampled_from("ab"), max_size=60))
@settings(max_examples=200, deadline=None)
def test_simple_words_never_overlap(q, noise):
    q = "".join(q)
    if not is_simple_word(q):
        return
    text = q + "".join(noise) + q
    occ = occurrences(q, text)
    assert all(b - a >= len(q) for a, b in zip(occ, occ[1:]))


def test_random_substitution_valid():
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = random_substitution(rng, 4)
        assert max(z.lengths) > 1
