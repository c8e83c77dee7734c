import pytest

from sadic.rauzy import rauzy_class
from sadic.sequences import (ExplicitSequence, IIDSequence, InducedSequence, PeriodicSequence, RauzyWalkSequence,
                             parse_sequence_spec)
from sadic.symbolic import FIBONACCI, Substitution, compose

Z2 = Substitution.from_images(["121", "12"])


def test_periodic_indexing_two_sided():
    seq = PeriodicSequence([FIBONACCI, Z2])
    assert seq[1] == FIBONACCI and seq[2] == Z2 and seq[3] == FIBONACCI
    assert seq[0] == Z2 and seq[-1] == FIBONACCI


def test_explicit_is_one_sided():
    seq = ExplicitSequence([FIBONACCI, Z2])
    assert seq[2] == Z2
    with pytest.raises(IndexError):
        seq[0]


def test_iid_reproducible_and_order_independent():
    a = IIDSequence([FIBONACCI, Z2], seed=5)
    b = IIDSequence([FIBONACCI, Z2], seed=5)
    late = [b[n] for n in range(2999, 2989, -1)]
    assert [a[n] for n in range(2990, 3000)] == late[::-1]
    assert [a[n] for n in range(-50, 50)] == [b[n] for n in range(-50, 50)]
    c = IIDSequence([FIBONACCI, Z2], seed=6)
    assert [a[n] for n in range(1, 200)] != [c[n] for n in range(1, 200)]


def test_shift():
    seq = IIDSequence([FIBONACCI, Z2], seed=1)
    sh = seq.shift(7)
    assert all(sh[n] == seq[n + 7] for n in range(-20, 20))
    assert all(sh.shift(3)[n] == seq[n + 10] for n in range(1, 20))


def test_rauzy_walk_is_a_path():
    G = rauzy_class((4, 3, 2, 1))
    seq = RauzyWalkSequence(G, seed=3)
    for n in range(-60, 60):
        assert seq.edge(n).target == seq.edge(n + 1).source
    assert seq.edge(1).source == seq.start


def test_induced_blocks():
    q = Z2
    seq = InducedSequence(q, PeriodicSequence([FIBONACCI]))
    assert seq[4] == compose(compose(q, FIBONACCI), q)
    assert InducedSequence(q)[1] == compose(q, q)


def test_parse_specs():
    assert parse_sequence_spec("fib")[5] == FIBONACCI
    assert parse_sequence_spec("periodic:121,12|12,1")[2] == FIBONACCI
    assert parse_sequence_spec("iid:12,1|121,12", seed=2)[1] in (FIBONACCI, Z2)
    assert parse_sequence_spec("rauzy:3,2,1", seed=2).m == 3
    for bad in ("iid:12,1", "rauzy:3,2,1"):
        with pytest.raises(ValueError, match="seed"):
            parse_sequence_spec(bad)
    with pytest.raises(ValueError):
        parse_sequence_spec("nonsense")
