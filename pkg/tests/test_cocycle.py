import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sadic import intmat
from sadic.cocycle import (CocycleAccumulator, cocycle_product, cocycle_products, log_norm, lyapunov_spectrum,
                           max_subset_sum, moment_estimate, unstable_projection, w_series)
from sadic.sequences import IIDSequence, PeriodicSequence
from sadic.symbolic import FIBONACCI, Substitution

PHI = (1 + math.sqrt(5)) / 2
Z2 = Substitution.from_images(["121", "12"])
Z3 = Substitution.from_images(["12", "13", "1"])
Z3b = Substitution.from_images(["13", "2", "21"])


def fib(n):
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def as_lists(a):
    return [list(r) for r in a]


def test_zero_is_identity():
    assert as_lists(cocycle_product(PeriodicSequence([FIBONACCI]), 0).matrix) == [[1, 0], [0, 1]]


def test_fibonacci_power():
    A = cocycle_product(PeriodicSequence([FIBONACCI]), 10).matrix
    assert as_lists(A) == [[fib(11), fib(10)], [fib(10), fib(9)]]


@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_cocycle_identity(n, k, seed):
    seq = IIDSequence([FIBONACCI, Z2], seed)
    lhs = cocycle_product(seq, n + k).matrix
    rhs = intmat.matmul(cocycle_product(seq.shift(n), k).matrix, cocycle_product(seq, n).matrix)
    assert lhs == rhs


@given(st.integers(1, 25), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_negative_times_invert(n, seed):
    seq = IIDSequence([FIBONACCI, Z2], seed)
    back = cocycle_product(seq, -n).matrix
    fwd = cocycle_product(seq.shift(-n), n).matrix
    assert as_lists(intmat.matmul(fwd, back)) == as_lists(intmat.identity(2))


def test_accumulator_matches_products():
    seq = IIDSequence([FIBONACCI, Z2], 3)
    acc = CocycleAccumulator(2)
    mats = cocycle_products(seq, 20)
    for n in range(1, 21):
        assert acc.push(seq[n]).matrix == mats[n]


def test_exact_and_float_log_norms_agree():
    seq = IIDSequence([FIBONACCI, Z2], 4)
    A = np.eye(2)
    for n in range(1, 61):
        A = np.array(intmat.transpose(seq[n].matrix), dtype=float) @ A
        exact = log_norm(cocycle_product(seq, n).matrix)
        assert abs(np.log(np.abs(A).sum(axis=1).max()) - exact) <= 1e-9 * exact


def test_w_series_periodic_constant():
    ws = w_series(PeriodicSequence([FIBONACCI]), 100)
    assert np.all(ws.W == ws.W[0]) and ws.W[0] == pytest.approx(math.log(2))


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.integers(0, 30))
def test_max_subset_sum_rearrangement(vals, k):
    vals = np.array(vals)
    brute = 0.0
    # oracle: greedy over a copy, taking the maximum k times
    left = list(vals)
    for _ in range(min(k, len(left))):
        j = int(np.argmax(left))
        brute += left.pop(j)
    assert max_subset_sum(vals, k) == pytest.approx(brute)


def test_w_series_iid_exceed_counts():
    seq = IIDSequence([FIBONACCI, Z2, Substitution.from_images(["1121", "12"])], seed=9)
    ws = w_series(seq, 10_000, deltas=(0.1,))
    assert np.all(ws.ratios <= ws.L1 * 1.1)
    for (d, C), (count, bound) in ws.exceed_counts.items():
        if C >= 1:
            assert count <= bound


def test_lyapunov_fibonacci():
    est = lyapunov_spectrum(PeriodicSequence([FIBONACCI]), 20_000, trials=3)
    assert est.theta1 == pytest.approx(math.log(PHI), abs=1e-3)
    assert est.exponents.sum() == pytest.approx(0, abs=1e-3)
    assert est.kappa == 1 and est.top_simple


@pytest.mark.parametrize("block", [[FIBONACCI, Z2], [Z3, Z3b]])
def test_lyapunov_periodic_block_eigenvalues(block):
    M = np.eye(block[0].m)
    for z in block:
        M = np.array(intmat.transpose(z.matrix), dtype=float) @ M
    expected = np.sort(np.log(np.abs(np.linalg.eigvals(M))))[::-1] / len(block)
    est = lyapunov_spectrum(PeriodicSequence(block), 30_000, trials=2)
    assert est.exponents == pytest.approx(expected, abs=2e-3)


def test_log_norm_growth_converges():
    seq = PeriodicSequence([FIBONACCI])
    mats = cocycle_products(seq, 400)
    rates = [log_norm(mats[n]) / n for n in range(300, 401)]
    assert max(rates) - min(rates) < 2e-3
    assert rates[-1] == pytest.approx(math.log(PHI), abs=3e-3)


def test_unstable_projection_fibonacci():
    pr = unstable_projection(PeriodicSequence([FIBONACCI]), 40, 1)
    assert pr.P @ np.array([PHI, 1]) == pytest.approx([PHI, 1], abs=1e-10)
    assert pr.P @ np.array([-1 / PHI, 1]) == pytest.approx([0, 0], abs=1e-10)
    assert pr.idempotence_residual < 1e-8


def test_unstable_projection_equivariant():
    seq = IIDSequence([FIBONACCI, Z2], seed=2)
    P0 = unstable_projection(seq, 50, 1).P
    for n in (3, 8):
        A = np.array(cocycle_product(seq, n).matrix, dtype=float)
        Pn = unstable_projection(seq.shift(n), 50, 1).P
        assert np.abs(A @ P0 - Pn @ A).max() / np.abs(A).max() < 1e-8


def test_unstable_projection_needs_two_sided():
    from sadic.sequences import ExplicitSequence
    with pytest.raises(ValueError):
        unstable_projection(ExplicitSequence([FIBONACCI] * 10), 5, 1)


def test_moment_estimate():
    seqs = [IIDSequence([FIBONACCI, Z2], s) for s in range(20)]
    mean, err = moment_estimate(seqs, 10, 0.0)
    assert mean == 1.0 and err == 0.0
    mean, _ = moment_estimate([PeriodicSequence([FIBONACCI])] * 2, 10, 0.5)
    assert mean == pytest.approx(fib(12) ** 0.5)  # ||A(10)|| = F11 + F10
