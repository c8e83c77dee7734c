"""Interval exchanges, Rauzy induction and Rauzy graphs.

Conventions
-----------
A labelled permutation is a pair ``(top, bottom)`` of tuples of the labels
``1..m``: ``top`` lists the intervals in domain order, ``bottom`` in image
order. The one-row input ``pi`` sends interval ``i`` to image position
``pi[i-1]``, so ``bottom[pi[i-1] - 1] == i``.

One Rauzy step compares the last domain interval ``t = top[-1]`` with the
interval whose image is last, ``b = bottom[-1]``:

* type ``'a'`` when ``lam[t] > lam[b]``: ``lam[t] -= lam[b]`` and ``b`` is
  moved in ``bottom`` to just after ``t``;
* type ``'b'`` when ``lam[b] > lam[t]``: ``lam[b] -= lam[t]`` and ``t`` is
  moved in ``top`` to just after ``b``.

The loser of the step (``b`` for type ``'a'``, ``t`` for type ``'b'``) gets
the image ``(b, t)`` under the elementary substitution; every other letter is
fixed. With these choices the substitution of a path sends each new interval
to its itinerary through the old intervals before its first return: for a path
``V1`` followed by ``V2`` the
substitution is ``zeta_V1 o zeta_V2`` (``zeta_V2`` applied first), and the old
lengths are ``S @ new lengths``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from . import intmat
from .intmat import IntMatrix
from .symbolic import Substitution, compose, generates_lattice, is_good_return_word, is_simple_word, population_vector

Perm = tuple[tuple[int, ...], tuple[int, ...]]
LABELS = ("a", "b")


class RauzyNondeterministic(ValueError):
    """The two competing lengths are equal."""


class SearchBudgetExceeded(RuntimeError):
    pass


def perm_from_one_row(pi: Sequence[int]) -> Perm:
    m = len(pi)
    if sorted(pi) != list(range(1, m + 1)):
        raise ValueError(f"{pi} is not a permutation of 1..{m}")
    bottom = [0] * m
    for i, p in enumerate(pi, start=1):
        bottom[p - 1] = i
    return tuple(range(1, m + 1)), tuple(bottom)


def is_irreducible(perm: Perm) -> bool:
    top, bottom = perm
    return all(set(top[:k]) != set(bottom[:k]) for k in range(1, len(top)))


def perm_str(perm: Perm) -> str:
    top, bottom = perm
    return " ".join(map(str, top)) + " / " + " ".join(map(str, bottom))


def rauzy_move(perm: Perm, label: str) -> Perm:
    """Combinatorial Rauzy move of the given type."""
    top, bottom = perm
    t, b = top[-1], bottom[-1]
    if label == "a":
        rest = list(bottom[:-1])
        rest.insert(rest.index(t) + 1, b)
        return top, tuple(rest)
    if label == "b":
        rest = list(top[:-1])
        rest.insert(rest.index(b) + 1, t)
        return tuple(rest), bottom
    raise ValueError(f"unknown Rauzy label {label!r}")


def elementary_substitution(perm: Perm, label: str) -> Substitution:
    top, bottom = perm
    m = len(top)
    t, b = top[-1], bottom[-1]
    loser = b if label == "a" else t
    images = tuple(((b, t) if x == loser else (x,)) for x in range(1, m + 1))
    return Substitution(m, images)


@dataclass(frozen=True)
class IET:
    """Interval exchange: labelled permutation plus lengths ``lam[label-1]``."""

    perm: Perm
    lam: tuple

    def __post_init__(self):
        if len(self.lam) != len(self.perm[0]):
            raise ValueError("length vector does not match permutation")
        if any(x <= 0 for x in self.lam):
            raise ValueError("lengths must be positive")

    @classmethod
    def from_one_row(cls, pi: Sequence[int], lam: Sequence) -> "IET":
        return cls(perm_from_one_row(pi), tuple(lam))

    @property
    def m(self) -> int:
        return len(self.lam)

    @property
    def total(self):
        return sum(self.lam)

    def _starts(self, order):
        pos, acc = {}, 0
        for label in order:
            pos[label] = acc
            acc += self.lam[label - 1]
        return pos

    def interval_of(self, x) -> int:
        acc = 0
        for label in self.perm[0]:
            acc += self.lam[label - 1]
            if x < acc:
                return label
        raise ValueError(f"{x} outside [0, {self.total})")

    def __call__(self, x):
        label = self.interval_of(x)
        top_start = self._starts(self.perm[0])[label]
        bottom_start = self._starts(self.perm[1])[label]
        return x - top_start + bottom_start


def rauzy_step(T: IET) -> tuple[str, IET]:
    """One step of Rauzy induction: (type, induced IET on a shorter interval)."""
    top, bottom = T.perm
    t, b = top[-1], bottom[-1]
    lt, lb = T.lam[t - 1], T.lam[b - 1]
    if lt == lb:
        raise RauzyNondeterministic(f"Rauzy-nondeterministic: lam[{t}] == lam[{b}]")
    lam = list(T.lam)
    if lt > lb:
        label = "a"
        lam[t - 1] = lt - lb
    else:
        label = "b"
        lam[b - 1] = lb - lt
    return label, IET(rauzy_move(T.perm, label), tuple(lam))


@dataclass(frozen=True)
class Edge:
    source: Perm
    target: Perm
    label: str
    substitution: Substitution

    @property
    def matrix(self) -> IntMatrix:
        return self.substitution.matrix


@dataclass
class RauzyGraph:
    vertices: list[Perm]
    edges: dict[tuple[Perm, str], Edge]

    def out_edge(self, v: Perm, label: str) -> Edge:
        return self.edges[(v, label)]

    def successors(self, v: Perm):
        return [self.edges[(v, lab)].target for lab in LABELS]

    def is_strongly_connected(self) -> bool:
        def reach(start, forward=True):
            adj: dict[Perm, list[Perm]] = {v: [] for v in self.vertices}
            for (src, _), e in self.edges.items():
                if forward:
                    adj[src].append(e.target)
                else:
                    adj[e.target].append(src)
            seen, todo = {start}, [start]
            while todo:
                for w in adj[todo.pop()]:
                    if w not in seen:
                        seen.add(w)
                        todo.append(w)
            return seen

        v0 = self.vertices[0]
        n = len(self.vertices)
        return len(reach(v0)) == n and len(reach(v0, False)) == n

    def pure_cycle_length(self, v: Perm, label: str) -> int:
        w, k = self.out_edge(v, label).target, 1
        while w != v:
            w, k = self.out_edge(w, label).target, k + 1
        return k

    def to_json(self) -> dict:
        index = {v: i for i, v in enumerate(self.vertices)}
        return {
            "vertices": [{"top": list(v[0]), "bottom": list(v[1])} for v in self.vertices],
            "edges": [
                {
                    "source": index[e.source],
                    "target": index[e.target],
                    "label": e.label,
                    "matrix": [list(r) for r in e.matrix],
                    "substitution": e.substitution.to_json(),
                }
                for e in self.edges.values()
            ],
        }

    def to_dot(self) -> str:
        index = {v: i for i, v in enumerate(self.vertices)}
        lines = ["digraph rauzy {"]
        for v, i in index.items():
            lines.append(f'  v{i} [label="{perm_str(v)}"];')
        for e in self.edges.values():
            style = "solid" if e.label == "a" else "dashed"
            lines.append(f'  v{index[e.source]} -> v{index[e.target]} [label="{e.label}", style={style}];')
        lines.append("}")
        return "\n".join(lines)


def rauzy_class(pi0: Sequence[int] | Perm) -> RauzyGraph:
    """Labelled Rauzy class of ``pi0`` by breadth-first closure."""
    start = pi0 if (len(pi0) == 2 and isinstance(pi0[0], tuple)) else perm_from_one_row(pi0)
    if not is_irreducible(start):
        raise ValueError(f"permutation {perm_str(start)} is reducible")
    vertices = [start]
    seen = {start}
    edges: dict[tuple[Perm, str], Edge] = {}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for label in LABELS:
            w = rauzy_move(v, label)
            edges[(v, label)] = Edge(v, w, label, elementary_substitution(v, label))
            if w not in seen:
                seen.add(w)
                vertices.append(w)
                todo.append(w)
    return RauzyGraph(vertices, edges)


@dataclass
class RauzyPath:
    graph: RauzyGraph
    start: Perm
    labels: tuple[str, ...]
    end: Perm = field(init=False)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        if not self.labels:
            raise ValueError("a Rauzy path must have at least one edge")
        if self.start not in self.graph.vertices:
            raise ValueError("start vertex not in graph")
        v = self.start
        for lab in self.labels:
            if lab not in LABELS:
                raise ValueError(f"invalid label {lab!r}")
            v = self.graph.out_edge(v, lab).target
        self.end = v

    def edges(self) -> list[Edge]:
        out, v = [], self.start
        for lab in self.labels:
            e = self.graph.out_edge(v, lab)
            out.append(e)
            v = e.target
        return out

    @property
    def is_loop(self) -> bool:
        return self.end == self.start

    def __add__(self, other: "RauzyPath") -> "RauzyPath":
        if other.start != self.end:
            raise ValueError("paths do not concatenate")
        return RauzyPath(self.graph, self.start, self.labels + other.labels)

    def power(self, k: int) -> "RauzyPath":
        if not self.is_loop:
            raise ValueError("only loops can be iterated")
        return RauzyPath(self.graph, self.start, self.labels * k)

    @property
    def substitution(self) -> Substitution:
        return path_substitution(self)

    @property
    def matrix(self) -> IntMatrix:
        out = intmat.identity(len(self.start[0]))
        for e in self.edges():
            out = intmat.matmul(out, e.matrix)
        return out

    def word(self) -> str:
        return "".join(self.labels)


def path_substitution(path: RauzyPath) -> Substitution:
    """Substitution of the induction block: zeta_e1 o zeta_e2 o ... o zeta_ek."""
    edges = path.edges()
    out = edges[-1].substitution
    for e in reversed(edges[:-1]):
        out = compose(e.substitution, out)
    return out


def rauzy_run(T: IET, steps: int) -> tuple[tuple[str, ...], IET]:
    """Apply ``steps`` Rauzy steps; return the label word and the induced IET."""
    labels = []
    for _ in range(steps):
        lab, T = rauzy_step(T)
        labels.append(lab)
    return tuple(labels), T


def _positive_loop(G: RauzyGraph, start: Perm, max_len: int) -> RauzyPath:
    """Shortest loop at ``start`` (a before b at equal length) with a positive matrix."""
    m = len(start[0])
    for length in range(1, max_len + 1):
        stack = [(start, (), intmat.identity(m))]
        while stack:
            v, labels, mat = stack.pop()
            if len(labels) == length:
                if v == start and intmat.is_positive(mat):
                    return RauzyPath(G, start, labels)
                continue
            for lab in reversed(LABELS):
                e = G.out_edge(v, lab)
                stack.append((e.target, labels + (lab,), intmat.matmul(mat, e.matrix)))
    raise SearchBudgetExceeded(f"no positive loop of length <= {max_len} at {perm_str(start)}")


@dataclass
class GoodWord:
    """Output of :func:`construct_good_word` with its verification record."""

    path: RauzyPath
    loop: RauzyPath
    n: int
    return_words: list[tuple[int, ...]]
    checks: dict[str, bool]

    @property
    def substitution(self) -> Substitution:
        return self.path.substitution

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def verify_good_word(path: RauzyPath, return_words: Sequence[Sequence[int]]) -> dict[str, bool]:
    zeta = path.substitution
    m = zeta.m
    return {
        "simple": is_simple_word(path.labels),
        "positive": intmat.is_positive(zeta.matrix),
        "good_returns": all(is_good_return_word(zeta, u) for u in return_words),
        "lattice": generates_lattice([population_vector(u, m) for u in return_words], m),
    }


def construct_good_word(G: RauzyGraph, start: Perm | None = None, *,
                        max_loop_len: int = 24, max_n: int = 12) -> GoodWord:
    """Build a simple admissible word whose block substitution is positive and
    has good return words with population vectors generating Z^m.

    1. ``V``: shortest loop at ``start`` with a strictly positive matrix.
    2. ``n``: least power such that all images of ``zeta_{V^n}`` begin with
       one letter ``c`` and the words ``zeta_{V^n}(j)`` are good returns.
    3. ``W2``: the pure loop labelled ``V[0]``; ``W1``: the pure loop with the
       other label, repeated until ``|W1| > |V^{2n} W2|``.

    The path is ``V^{2n} W2 W1`` so that ``zeta_q = zeta_{V^n} o zeta_{V^n} o
    zeta_{W2 W1}`` and the label word is ``x...x y^k`` with total length below
    ``2k``, hence simple.
    """
    start = G.vertices[0] if start is None else start
    if not G.is_strongly_connected():
        raise ValueError("Rauzy graph is not strongly connected")
    V = _positive_loop(G, start, max_loop_len)
    first, other = V.labels[0], ("b" if V.labels[0] == "a" else "a")
    w2 = RauzyPath(G, start, (first,) * G.pure_cycle_length(start, first))
    c_other = G.pure_cycle_length(start, other)
    zeta_v = V.substitution
    zeta_vn = zeta_v
    for n in range(1, max_n + 1):
        if n > 1:
            zeta_vn = compose(zeta_v, zeta_vn)
        if len({img[0] for img in zeta_vn.images}) != 1:
            continue
        head = V.power(2 * n) + w2
        reps = len(head.labels) // c_other + 1
        w1 = RauzyPath(G, start, (other,) * (c_other * reps))
        q = head + w1
        words = list(zeta_vn.images)
        checks = verify_good_word(q, words)
        if all(checks.values()):
            return GoodWord(q, V, n, words, checks)
    raise SearchBudgetExceeded(f"no admissible n <= {max_n} for loop {V.word()}")
