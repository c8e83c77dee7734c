"""Two-sided sequences of substitutions ``... zeta_0 . zeta_1 zeta_2 ...``.

Index ``n >= 1`` is the future ``a+``; ``n <= 0`` is the past. ``shift(k)``
gives the sequence of ``sigma^k a``, i.e. ``shift(k)[n] == self[n + k]``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .symbolic import Substitution, compose

_CHUNK = 1024


class SubstitutionSequence:
    """Base class. Subclasses implement ``_get(n)``."""

    two_sided = True
    label = "sequence"

    def __init__(self, m: int):
        self.m = m

    def __getitem__(self, n: int) -> Substitution:
        n = int(n)
        if n <= 0 and not self.two_sided:
            raise IndexError(f"one-sided sequence has no index {n}")
        return self._get(n)

    def _get(self, n: int) -> Substitution:
        raise NotImplementedError

    def window(self, lo: int, hi: int) -> list[Substitution]:
        """[self[lo], ..., self[hi]] inclusive."""
        return [self[n] for n in range(lo, hi + 1)]

    def shift(self, k: int) -> "SubstitutionSequence":
        return ShiftedSequence(self, k) if k else self

    def alphabet(self) -> list[Substitution]:
        """Distinct substitutions the sequence draws from, when finite."""
        raise NotImplementedError


class ShiftedSequence(SubstitutionSequence):
    def __init__(self, base: SubstitutionSequence, k: int):
        if isinstance(base, ShiftedSequence):
            base, k = base.base, base.k + k
        super().__init__(base.m)
        self.base, self.k = base, k
        self.two_sided = base.two_sided
        self.label = f"{base.label}>>{k}"

    def __getitem__(self, n: int) -> Substitution:
        n = int(n)
        if n <= 0 and not self.base.two_sided and n + self.k <= 0:
            raise IndexError(f"index {n} before the start of a one-sided sequence")
        return self.base._get(n + self.k)

    def alphabet(self):
        return self.base.alphabet()


class PeriodicSequence(SubstitutionSequence):
    """zeta_n = block[(n - 1) mod p]."""

    def __init__(self, block: Sequence[Substitution]):
        if not block:
            raise ValueError("empty period")
        super().__init__(block[0].m)
        if any(z.m != self.m for z in block):
            raise ValueError("alphabet mismatch in period")
        self.block = tuple(block)
        self.label = "periodic"

    def _get(self, n):
        return self.block[(n - 1) % len(self.block)]

    def alphabet(self):
        return list(dict.fromkeys(self.block))


class ExplicitSequence(SubstitutionSequence):
    """A finite one-sided list zeta_1..zeta_L; indexing past the end raises."""

    two_sided = False

    def __init__(self, subs: Sequence[Substitution]):
        if not subs:
            raise ValueError("empty sequence")
        super().__init__(subs[0].m)
        self.subs = tuple(subs)
        self.label = "explicit"

    def _get(self, n):
        if not 1 <= n <= len(self.subs):
            raise IndexError(f"explicit sequence has indices 1..{len(self.subs)}, asked {n}")
        return self.subs[n - 1]

    def alphabet(self):
        return list(dict.fromkeys(self.subs))


class IIDSequence(SubstitutionSequence):
    """I.i.d. choices from a finite set, reproducible from ``seed``.

    The future and the past use independent child streams, each drawn in
    fixed-size chunks, so a value never depends on the order of access.
    """

    def __init__(self, choices: Sequence[Substitution], seed: int, probs: Sequence[float] | None = None):
        if not choices:
            raise ValueError("no substitutions to choose from")
        super().__init__(choices[0].m)
        self.choices = tuple(choices)
        self.seed = seed
        self.probs = None if probs is None else np.asarray(probs, dtype=float)
        fwd, bwd = np.random.SeedSequence(seed).spawn(2)
        self._rngs = {1: np.random.default_rng(fwd), -1: np.random.default_rng(bwd)}
        self._idx: dict[int, list[int]] = {1: [], -1: []}
        self.label = f"iid(seed={seed})"

    def index(self, n: int) -> int:
        side, pos = (1, n - 1) if n >= 1 else (-1, -n)
        buf = self._idx[side]
        while len(buf) <= pos:
            buf.extend(self._rngs[side].choice(len(self.choices), size=_CHUNK, p=self.probs).tolist())
        return buf[pos]

    def _get(self, n):
        return self.choices[self.index(n)]

    def alphabet(self):
        return list(self.choices)


class InducedSequence(SubstitutionSequence):
    """Blocks a_n = q p_n q: zeta(a_n) = zeta_q o zeta(p_n) o zeta_q.

    ``inner`` supplies zeta(p_n); ``None`` means every p_n is trivial.
    """

    def __init__(self, q: Substitution, inner: SubstitutionSequence | None = None):
        super().__init__(q.m)
        self.q = q
        self.inner = inner
        self.two_sided = True if inner is None else inner.two_sided
        self._cache: dict[Substitution, Substitution] = {}
        self.label = f"induced({'trivial' if inner is None else inner.label})"

    def inner_at(self, n: int) -> Substitution | None:
        return None if self.inner is None else self.inner[n]

    def block(self, p: Substitution | None) -> Substitution:
        if p not in self._cache:
            core = self.q if p is None else compose(self.q, p)
            self._cache[p] = compose(core, self.q)
        return self._cache[p]

    def _get(self, n):
        return self.block(self.inner_at(n))

    def alphabet(self):
        if self.inner is None:
            return [self.block(None)]
        return [self.block(p) for p in self.inner.alphabet()]


class RauzyWalkSequence(SubstitutionSequence):
    """Uniform random walk on a Rauzy graph through ``start`` at time 0.

    zeta_n for n >= 1 is the elementary substitution of the n-th outgoing
    edge; zeta_n for n <= 0 walks backwards along uniformly chosen incoming
    edges.
    """

    def __init__(self, graph, seed: int, start=None):
        from .rauzy import LABELS

        start = graph.vertices[0] if start is None else start
        super().__init__(len(start[0]))
        self.graph, self.seed, self.start = graph, seed, start
        fwd, bwd = np.random.SeedSequence(seed).spawn(2)
        self._rngs = {1: np.random.default_rng(fwd), -1: np.random.default_rng(bwd)}
        self._labels = LABELS
        self._incoming: dict = {}
        for e in graph.edges.values():
            self._incoming.setdefault(e.target, []).append(e)
        self._edges: dict[int, list] = {1: [], -1: []}
        self._pos = {1: start, -1: start}
        self.label = f"rauzy-walk(seed={seed})"

    def _extend(self, side: int, pos: int):
        buf = self._edges[side]
        rng = self._rngs[side]
        while len(buf) <= pos:
            v = self._pos[side]
            if side == 1:
                e = self.graph.out_edge(v, self._labels[int(rng.integers(0, 2))])
                self._pos[side] = e.target
            else:
                inc = self._incoming[v]
                e = inc[int(rng.integers(0, len(inc)))]
                self._pos[side] = e.source
            buf.append(e)

    def edge(self, n: int):
        side, pos = (1, n - 1) if n >= 1 else (-1, -n)
        self._extend(side, pos)
        return self._edges[side][pos]

    def _get(self, n):
        return self.edge(n).substitution

    def alphabet(self):
        return list(dict.fromkeys(e.substitution for e in self.graph.edges.values()))


def parse_sequence_spec(spec: str, seed: int | None = None) -> SubstitutionSequence:
    """Build a sequence from a short CLI spec.

    ``fib`` (periodic Fibonacci), ``periodic:12,1|2,1`` (comma-separated
    images, ``|`` between substitutions), ``iid:12,1|1,2`` (uniform i.i.d.
    choice, needs a seed), ``json:[...]`` (periodic, JSON substitutions) or
    ``rauzy:3,2,1`` (random walk on the Rauzy class, needs a seed).
    """
    import json

    from .symbolic import FIBONACCI

    spec = spec.strip()
    if spec in ("fib", "fibonacci"):
        return PeriodicSequence([FIBONACCI])
    kind, _, rest = spec.partition(":")
    if kind == "periodic":
        subs = [Substitution.from_images(block.split(",")) for block in rest.split("|")]
        return PeriodicSequence(subs)
    if kind == "iid":
        if seed is None:
            raise ValueError("seed is mandatory for iid sequences")
        subs = [Substitution.from_images(block.split(",")) for block in rest.split("|")]
        return IIDSequence(subs, seed)
    if kind == "json":
        obj = json.loads(rest)
        return PeriodicSequence([Substitution.from_json(o) for o in obj])
    if kind == "rauzy":
        from .rauzy import rauzy_class

        if seed is None:
            raise ValueError("seed is mandatory for rauzy-walk sequences")
        pi = tuple(int(x) for x in rest.split(","))
        return RauzyWalkSequence(rauzy_class(pi), seed)
    raise ValueError(f"unknown sequence spec {spec!r}")
