"""Words, substitutions and their incidence matrices.

Letters are the integers ``1..m``. A word is a tuple of letters. Strings such
as ``"121"`` are accepted wherever a word is expected as long as ``m <= 9``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Iterable, Sequence, Union

from . import intmat
from .intmat import IntMatrix

Word = tuple[int, ...]
WordLike = Union[str, Sequence[int]]


def as_word(w: WordLike) -> Word:
    if isinstance(w, str):
        return tuple(int(ch) for ch in w)
    return tuple(int(x) for x in w)


def word_str(w: Sequence[int]) -> str:
    if all(1 <= x <= 9 for x in w):
        return "".join(map(str, w))
    return ",".join(map(str, w))


def population_vector(v: WordLike, m: int) -> tuple[int, ...]:
    """Counts of each letter ``1..m`` in ``v``."""
    counts = [0] * m
    for letter in as_word(v):
        if not 1 <= letter <= m:
            raise ValueError(f"letter {letter} outside alphabet 1..{m}")
        counts[letter - 1] += 1
    return tuple(counts)


def tiling_length(v: WordLike, s: Sequence[float], m: int | None = None):
    """Return the tiling length <l(v), s> of ``v`` for the roof vector ``s``."""
    if any(x <= 0 for x in s):
        raise ValueError("roof vector entries must be positive")
    pop = population_vector(v, len(s) if m is None else m)
    return sum(c * x for c, x in zip(pop, s))


def occurs_in(pattern: Sequence[int], text: Sequence[int]) -> bool:
    n, k = len(text), len(pattern)
    if k == 0:
        return True
    first = pattern[0]
    pattern = tuple(pattern)
    text = tuple(text)
    for i in range(n - k + 1):
        if text[i] == first and text[i:i + k] == pattern:
            return True
    return False


@dataclass(frozen=True)
class Substitution:
    """A substitution on the letters ``1..m``.

    Construction enforces that every letter occurs in some image and that at
    least one image has length > 1.
    """

    m: int
    images: tuple[Word, ...]
    _matrix: IntMatrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("alphabet must have at least 2 letters")
        images = tuple(as_word(w) for w in self.images)
        object.__setattr__(self, "images", images)
        if len(images) != self.m:
            raise ValueError(f"expected {self.m} images, got {len(images)}")
        if any(len(w) == 0 for w in images):
            raise ValueError("images must be nonempty")
        seen = set()
        for w in images:
            for letter in w:
                if not 1 <= letter <= self.m:
                    raise ValueError(f"letter {letter} outside alphabet 1..{self.m}")
                seen.add(letter)
        if len(seen) != self.m:
            raise ValueError("every letter must appear in some image")
        if max(len(w) for w in images) < 2:
            raise ValueError("some image must have length > 1")
        cols = [population_vector(w, self.m) for w in images]
        object.__setattr__(self, "_matrix", intmat.transpose(tuple(cols)))

    @classmethod
    def from_images(cls, images: Iterable[WordLike]) -> "Substitution":
        imgs = tuple(as_word(w) for w in images)
        return cls(len(imgs), imgs)

    @property
    def matrix(self) -> IntMatrix:
        """S(i, j) = number of letters i in the image of j."""
        return self._matrix

    def __call__(self, w: WordLike) -> Word:
        out: list[int] = []
        for letter in as_word(w):
            out.extend(self.images[letter - 1])
        return tuple(out)

    def image(self, letter: int) -> Word:
        return self.images[letter - 1]

    @cached_property
    def lengths(self) -> tuple[int, ...]:
        return tuple(len(w) for w in self.images)

    def __matmul__(self, other: "Substitution") -> "Substitution":
        return compose(self, other)

    def to_json(self) -> dict:
        return {"m": self.m, "images": [word_str(w) for w in self.images]}

    @classmethod
    def from_json(cls, obj: dict | str) -> "Substitution":
        if isinstance(obj, str):
            obj = json.loads(obj)
        imgs = []
        for w in obj["images"]:
            if isinstance(w, str) and "," in w:
                w = [int(x) for x in w.split(",")]
            imgs.append(as_word(w))
        return cls(int(obj["m"]), tuple(imgs))

    def __str__(self):
        return ", ".join(f"{a + 1}->{word_str(w)}" for a, w in enumerate(self.images))


def substitution_matrix(zeta: Substitution) -> IntMatrix:
    return zeta.matrix


def compose(zeta1: Substitution, zeta2: Substitution) -> Substitution:
    """The substitution a -> zeta1(zeta2(a)); its matrix is S1 @ S2."""
    if zeta1.m != zeta2.m:
        raise ValueError(f"alphabet mismatch: {zeta1.m} vs {zeta2.m}")
    return Substitution(zeta1.m, tuple(zeta1(w) for w in zeta2.images))


def compose_all(subs: Sequence[Substitution]) -> Substitution:
    """zeta_1 o zeta_2 o ... o zeta_n (the last one is applied first)."""
    if not subs:
        raise ValueError("empty composition")
    out = subs[-1]
    for z in reversed(subs[:-1]):
        out = compose(z, out)
    return out


def permute_images(zeta: Substitution, perm: Sequence[int]) -> Substitution:
    """zeta o pi for the letter permutation pi(a) = perm[a-1].

    Length-one permutation maps are outside the substitution class, so the
    composition is exposed directly instead of through ``compose``.
    """
    return Substitution(zeta.m, tuple(zeta.images[p - 1] for p in perm))


def permute_letters(zeta: Substitution, perm: Sequence[int]) -> Substitution:
    """pi o zeta: rename every letter of every image by a -> perm[a-1]."""
    return Substitution(zeta.m, tuple(tuple(perm[x - 1] for x in w) for w in zeta.images))


def is_good_return_word(zeta: Substitution, v: WordLike) -> bool:
    """v is nonempty and v + v[0] occurs in every image of zeta."""
    v = as_word(v)
    if not v:
        return False
    pattern = v + (v[0],)
    return all(occurs_in(pattern, w) for w in zeta.images)


def good_return_words(zeta: Substitution, max_len: int) -> set[Word]:
    """All good return words of length <= max_len."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    shortest = min(zeta.images, key=len)
    found: set[Word] = set()
    for k in range(2, max_len + 2):
        for i in range(len(shortest) - k + 1):
            factor = shortest[i:i + k]
            if factor[0] != factor[-1]:
                continue
            v = factor[:-1]
            if v not in found and is_good_return_word(zeta, v):
                found.add(v)
    return found


def generates_lattice(vecs: Sequence[Sequence[int]], m: int | None = None) -> bool:
    """True iff the integer span of ``vecs`` is all of Z^m."""
    vecs = [tuple(int(x) for x in v) for v in vecs]
    if m is None:
        if not vecs:
            raise ValueError("cannot infer dimension from an empty list")
        m = len(vecs[0])
    if not vecs:
        return False
    if any(len(v) != m for v in vecs):
        raise ValueError("all vectors must have length m")
    divisors = intmat.elementary_divisors(vecs)
    return len(divisors) == m and all(d == 1 for d in divisors)


def is_simple_word(q: Sequence) -> bool:
    """No proper suffix of q equals a prefix of q."""
    q = tuple(q)
    k = len(q)
    if k < 1:
        raise ValueError("word must be nonempty")
    return all(q[i:] != q[:k - i] for i in range(1, k))


def occurrences(q: Sequence, seq: Sequence) -> list[int]:
    q, seq = tuple(q), tuple(seq)
    k = len(q)
    return [i for i in range(len(seq) - k + 1) if seq[i:i + k] == q]


def random_substitution(rng, m: int, max_len: int = 4) -> Substitution:
    """A random member of the substitution class (rejection sampling)."""
    while True:
        imgs = tuple(tuple(int(x) + 1 for x in rng.integers(0, m, size=int(rng.integers(1, max_len + 1))))
                     for _ in range(m))
        try:
            return Substitution(m, imgs)
        except ValueError:
            continue


def all_words(m: int, length: int):
    return product(range(1, m + 1), repeat=length)


FIBONACCI = Substitution(2, ((1, 2), (1,)))
