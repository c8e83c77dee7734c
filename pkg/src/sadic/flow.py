"""S-adic systems, Kakutani-Rokhlin towers and the special flow over them.

Level ``n`` objects refer to the composed substitution
``zeta^[n] = zeta_1 o ... o zeta_n`` with matrix ``S^[n] = S_1 ... S_n``.
The tower over letter ``b`` at level ``n`` has height ``|zeta^[n](b)|`` (the
column sums of ``S^[n]``) and flow height ``s^(n)_b`` where
``s^(n) = (S^[n])^t s``.

Orbits of the flow are produced in two stages. A :class:`SymbolicPoint` is
a position inside a long legal word ``zeta^[L](b)``; it does not depend on the
roof. :meth:`SAdicSystem.orbit` turns it into a :class:`FlowOrbit`, the
sequence of level-``l`` letters met by the flow together with their exact
start times, for a given roof vector and offset inside the first letter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import intmat
from .intmat import IntMatrix
from .sequences import SubstitutionSequence
from .symbolic import Substitution, population_vector

TWO_PI = 2.0 * math.pi
PHI = (1.0 + math.sqrt(5.0)) / 2.0


class OrbitTooShort(ValueError):
    """The generated orbit does not reach the requested flow time."""


# -- roof vectors ---------------------------------------------------------


@dataclass(frozen=True)
class RoofVector:
    """Positive roof heights ``s_a``; ``name`` lets callers recover exact values."""

    values: tuple[float, ...]
    normalized: bool = False
    name: str = ""

    def __post_init__(self):
        vals = tuple(float(x) for x in self.values)
        if len(vals) < 2:
            raise ValueError("roof vector needs at least two entries")
        if any(not x > 0 or not math.isfinite(x) for x in vals):
            raise ValueError(f"roof entries must be positive and finite, got {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def s(self) -> np.ndarray:
        return np.array(self.values)

    @property
    def m(self) -> int:
        return len(self.values)

    def scaled(self, c: float, normalized: bool = False) -> "RoofVector":
        return RoofVector(tuple(c * x for x in self.values), normalized, self.name)

    @classmethod
    def golden(cls) -> "RoofVector":
        return cls((PHI, 1.0), name="golden")


def parse_roof(spec: str, m: int | None = None, rng=None) -> RoofVector:
    """``golden``, ``unit``, ``random`` or a comma list like ``1.2,0.7``."""
    spec = spec.strip()
    if spec == "golden":
        return RoofVector.golden()
    if spec == "unit":
        if m is None:
            raise ValueError("roof 'unit' needs the alphabet size")
        return RoofVector((1.0,) * m, name="unit")
    if spec == "random":
        if m is None or rng is None:
            raise ValueError("roof 'random' needs the alphabet size and a seeded rng")
        return RoofVector(tuple(rng.uniform(0.2, 1.0, size=m)), name="random")
    try:
        vals = tuple(float(x) for x in spec.split(","))
    except ValueError:
        raise ValueError(f"cannot parse roof {spec!r}") from None
    return RoofVector(vals)


# -- numpy expansion helpers ----------------------------------------------


class _Flat:
    """Images of one substitution packed for vectorized expansion."""

    __slots__ = ("flat", "starts", "lens")

    def __init__(self, z: Substitution):
        self.lens = np.zeros(z.m + 1, dtype=np.int64)
        self.lens[1:] = z.lengths
        self.starts = np.zeros(z.m + 1, dtype=np.int64)
        self.starts[1:] = np.cumsum(self.lens[1:]) - self.lens[1:]
        self.flat = np.array([x for w in z.images for x in w], dtype=np.int64)


_FLAT_CACHE: dict[Substitution, _Flat] = {}


def _flat(z: Substitution) -> _Flat:
    f = _FLAT_CACHE.get(z)
    if f is None:
        f = _FLAT_CACHE[z] = _Flat(z)
    return f


def expand(word: np.ndarray, z: Substitution) -> np.ndarray:
    """z applied to an int array of letters, vectorized."""
    f = _flat(z)
    lens = f.lens[word]
    total = int(lens.sum())
    ends = np.cumsum(lens)
    within = np.arange(total, dtype=np.int64) - np.repeat(ends - lens, lens)
    return f.flat[np.repeat(f.starts[word], lens) + within]


def counts_prefix(letters: np.ndarray, m: int) -> np.ndarray:
    """Row ``i`` is the population vector of ``letters[:i]``; shape (K+1, m)."""
    out = np.zeros((len(letters) + 1, m), dtype=np.int64)
    onehot = letters[:, None] == np.arange(1, m + 1)[None, :]
    np.cumsum(onehot, axis=0, out=out[1:])
    return out


# -- the system -----------------------------------------------------------


@dataclass
class InvariantMeasure:
    """Vectors mu_k = (mu(zeta^[k][b]))_b for k = 0..n."""

    levels: list[np.ndarray]
    residuals: list[float]
    depth: int

    @property
    def mu0(self) -> np.ndarray:
        return self.levels[0]

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0


@dataclass
class KRTower:
    level: int
    heights: tuple[int, ...]
    flow_heights: np.ndarray | None = None

    def floors(self) -> list[tuple[int, int]]:
        """All (letter, floor) pairs of the partition."""
        return [(a + 1, i) for a, h in enumerate(self.heights) for i in range(h)]


@dataclass(frozen=True)
class SymbolicPoint:
    """Position ``p`` inside the level-0 expansion of ``zeta^[L](b)``.

    ``u`` in [0, 1) is the relative height inside the roof over the symbol.
    """

    L: int
    b: int
    p: int
    u: float = 0.0


class SAdicSystem:
    """The S-adic shift of a substitution sequence (indices n >= 1)."""

    def __init__(self, seq: SubstitutionSequence):
        self.seq = seq
        self.m = seq.m
        self._S: list[IntMatrix] = [intmat.identity(self.m)]
        self._blocks: dict[tuple[int, int], IntMatrix] = {}
        self._measure: InvariantMeasure | None = None

    # exact matrices
    def S(self, n: int) -> IntMatrix:
        """S^[n] = S_1 ... S_n exactly."""
        if n < 0:
            raise ValueError("level must be >= 0")
        while len(self._S) <= n:
            k = len(self._S)
            self._S.append(intmat.matmul(self._S[-1], self.seq[k].matrix))
        return self._S[n]

    def block(self, lo: int, hi: int) -> IntMatrix:
        """S_{lo+1} ... S_{hi} exactly (identity when lo == hi)."""
        if hi < lo:
            raise ValueError("empty block with hi < lo")
        key = (lo, hi)
        if key not in self._blocks:
            out = intmat.identity(self.m)
            for k in range(lo + 1, hi + 1):
                out = intmat.matmul(out, self.seq[k].matrix)
            self._blocks[key] = out
        return self._blocks[key]

    def heights(self, n: int) -> tuple[int, ...]:
        return tuple(sum(col) for col in zip(*self.S(n)))

    def roof_at(self, s, n: int) -> np.ndarray:
        """s^(n) = (S^[n])^t s."""
        s = s.s if isinstance(s, RoofVector) else np.asarray(s, dtype=float)
        return np.array([sum(float(x) * y for x, y in zip(col, s)) for col in zip(*self.S(n))])

    def cocycle(self, n: int) -> IntMatrix:
        """A(n) = (S^[n])^t."""
        return intmat.transpose(self.S(n))

    # invariant measure
    def invariant_measure(self, n: int = 0, depth: int | None = None, *, tol: float = 1e-15,
                          max_depth: int = 4096) -> InvariantMeasure:
        """mu_0..mu_n with mu_k = S_{k+1} mu_{k+1} and sum_b h_k(b) mu_k(b) = 1.

        mu_n is the limit direction of S_{n+1} ... S_{n+D} applied to the
        all-ones vector. With ``depth=None`` the depth D doubles until the
        direction moves by less than ``tol``; the window product must be
        strictly positive. Lower levels are pushed down exactly in integers.
        """
        if n < 0:
            raise ValueError("level must be >= 0")
        ones = (1,) * self.m

        def direction(D):
            try:
                M = self.block(n, n + D)
            except IndexError:
                raise ValueError(f"no positive window: sequence ends before level {n + D}") from None
            return M, intmat.matvec(M, ones)

        def normalized(v):
            tot = sum(v)
            return np.array([x / tot for x in v])

        D = depth if depth is not None else 16
        M, v = direction(D)
        if depth is None:
            while True:
                D2 = 2 * D
                if D2 > max_depth:
                    break
                M2, v2 = direction(D2)
                change = float(np.abs(normalized(v2) - normalized(v)).max())
                M, v, D = M2, v2, D2
                if change < tol and intmat.is_positive(M):
                    break
        if not intmat.is_positive(M):
            raise ValueError(f"no positive window found within depth {D} after level {n}")
        vecs = [v]
        for k in range(n, 0, -1):
            vecs.append(intmat.matvec(self.seq[k].matrix, vecs[-1]))
        vecs.reverse()  # vecs[k] is the integer direction at level k
        total = sum(vecs[0])
        levels = []
        for k, vk in enumerate(vecs):
            # mu_k = vk / sum(mu_0-vector) keeps sum_b h_k(b) mu_k(b) = 1 exactly
            levels.append(np.array([x / total for x in vk]))
        residuals = [float(np.abs(levels[k] - np.array(intmat.matvec(self.seq[k + 1].matrix, levels[k + 1]))).max())
                     for k in range(n)]
        out = InvariantMeasure(levels, residuals, D)
        if n == 0:
            self._measure = out
        return out

    @property
    def mu0(self) -> np.ndarray:
        if self._measure is None:
            self.invariant_measure(0)
        return self._measure.mu0

    def kr_tower(self, n: int, s=None) -> KRTower:
        if n < 1:
            raise ValueError("tower level must be >= 1")
        fh = None if s is None else self.roof_at(s, n)
        return KRTower(n, self.heights(n), fh)

    def normalize_roof(self, s) -> RoofVector:
        """Scale s so that sum_a mu([a]) s_a = 1."""
        if not isinstance(s, RoofVector):
            s = RoofVector(tuple(s))
        total = float(self.mu0 @ s.s)
        return s.scaled(1.0 / total, normalized=True)

    # symbolic windows
    def word(self, L: int, b: int, level: int = 0) -> np.ndarray:
        """The full word zeta_{level+1} o ... o zeta_L (b) as level-``level`` letters."""
        w = np.array([b], dtype=np.int64)
        for j in range(L, level, -1):
            w = expand(w, self.seq[j])
        return w

    def window(self, L: int, b: int, start: int, length: int, level: int = 0) -> tuple[np.ndarray, int]:
        """Level-``level`` letters of zeta^[L](b) covering level-0 positions [start, start+length).

        Returns the letters and the offset, in level-0 symbols, of ``start``
        inside the first returned letter.
        """
        hL = self.heights(L)[b - 1]
        if start < 0 or length < 1 or start + length > hL:
            raise OrbitTooShort(f"window [{start}, {start + length}) outside tower of height {hL}")
        w = np.array([b], dtype=np.int64)
        off = start
        for j in range(L, level, -1):
            w = expand(w, self.seq[j])
            h = np.zeros(self.m + 1, dtype=np.int64)
            h[1:] = self.heights(j - 1)
            ends = np.cumsum(h[w])
            i0 = int(np.searchsorted(ends, off, side="right"))
            i1 = int(np.searchsorted(ends, off + length - 1, side="right"))
            if i0 > 0:
                off -= int(ends[i0 - 1])
            w = w[i0:i1 + 1]
        if level == 0:
            return w[off:off + length], 0
        return w, off

    def level_for(self, length: int, b: int | None = None) -> tuple[int, int]:
        """Smallest L (and its tallest letter) with a tower of height >= length."""
        L = 1
        while True:
            h = self.heights(L)
            if b is None:
                bb = int(np.argmax(h)) + 1
            else:
                bb = b
            if h[bb - 1] >= length:
                return L, bb
            L += 1
            if L > 100000:
                raise ValueError("heights do not grow; is some window product positive?")

    def legal_word(self, length: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """A legal word of the given length (from a random place in a tall tower)."""
        L, b = self.level_for(2 * length)
        hb = self.heights(L)[b - 1]
        start = 0 if rng is None else int(rng.integers(0, hb - length + 1))
        return self.window(L, b, start, length)[0]

    def sample_points(self, count: int, n_symbols: int, rng: np.random.Generator, *,
                      level: int | None = None) -> list[SymbolicPoint]:
        """Starting points stratified over the floors of a mid-level tower partition.

        Stratum ``j`` covers the ``j``-th slice of measure ``1/count`` of the
        partition {T^i zeta^[n][a]} ordered by (a, i); inside it a floor and a
        relative roof height ``u`` are drawn uniformly. The point itself is a
        random occurrence of the level-``n`` letter ``a`` inside a tall legal
        word with at least ``n_symbols`` symbols after it. Points are
        distributed by the shift measure mu; the flow average reweights by the
        roof height (see :func:`flow_weights`).
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        if level is None:
            level = 1
            while sum(self.heights(level)) < count:
                level += 1
        mu = self.invariant_measure(level).levels[level]
        h = np.array(self.heights(level), dtype=np.int64)
        mass = h * mu
        cum = np.concatenate([[0.0], np.cumsum(mass)])
        cum /= cum[-1]
        targets = (np.arange(count) + rng.random(count)) / count
        need = n_symbols + int(h.max())
        L, b = self.level_for(max(8 * need, 64), None)
        while True:
            W = self.word(L, b, level)
            ends = np.cumsum(h[W - 1])
            starts = ends - h[W - 1]
            hb = int(ends[-1])
            ok = {a: np.nonzero((W == a) & (starts + h[a - 1] + n_symbols <= hb))[0] for a in range(1, self.m + 1)}
            if all(len(v) for v in ok.values()):
                break
            L += 1
            b = int(np.argmax(self.heights(L))) + 1
        pts = []
        for x in targets:
            a = int(np.searchsorted(cum, x, side="right"))
            a = min(max(a, 1), self.m)
            frac = (x - cum[a - 1]) / (cum[a] - cum[a - 1]) * h[a - 1]
            floor = min(int(frac), int(h[a - 1]) - 1)
            u = float(frac - floor)
            occ = ok[a][int(rng.integers(0, len(ok[a])))]
            pts.append(SymbolicPoint(L, b, int(starts[occ]) + floor, min(max(u, 0.0), np.nextafter(1.0, 0))))
        return pts

    # flow orbits
    def orbit(self, pt: SymbolicPoint, s, n_symbols: int, level: int = 0) -> "FlowOrbit":
        """The flow orbit through ``pt`` as level-``level`` letters with start times."""
        s = s if isinstance(s, RoofVector) else RoofVector(tuple(s))
        sym = self.symbolic_orbit(pt, n_symbols, level)
        return sym.with_roof(self, s)

    def symbolic_orbit(self, pt: SymbolicPoint, n_symbols: int, level: int = 0) -> "SymbolicOrbit":
        letters, k = self.window(pt.L, pt.b, pt.p, n_symbols, level)
        x0 = int(self.window(pt.L, pt.b, pt.p, 1, 0)[0][0])
        lead = np.zeros(self.m, dtype=np.int64)
        if k:
            lead = np.array(population_vector(self.window(pt.L, pt.b, pt.p - k, k, 0)[0].tolist(), self.m))
        return SymbolicOrbit(level, letters, lead, x0, pt.u)


@dataclass
class SymbolicOrbit:
    """Roof-independent part of an orbit.

    ``letters`` are level-``level`` letters; the point sits ``lead`` (a
    population vector of level-0 symbols) into the first of them, on the
    roof over symbol ``x0`` at relative height ``u``.
    """

    level: int
    letters: np.ndarray
    lead: np.ndarray
    x0: int
    u: float
    _prefix: np.ndarray | None = field(default=None, repr=False)

    @property
    def prefix(self) -> np.ndarray:
        if self._prefix is None:
            self._prefix = counts_prefix(self.letters, len(self.lead))
        return self._prefix

    def with_roof(self, sys: SAdicSystem, s: RoofVector) -> "FlowOrbit":
        s0 = s.s
        sl = sys.roof_at(s0, self.level) if self.level else s0
        t0 = float(self.lead @ s0) + self.u * s0[self.x0 - 1]
        # exact integer prefix counts keep every start time accurate to rounding
        starts = self.prefix @ sl - t0
        return FlowOrbit(self.level, self.letters, starts, sl)


@dataclass
class FlowOrbit:
    """Letters met by the flow and their start times; the flow starts at time 0.

    ``starts`` has one more entry than ``letters``: its last entry is the end
    of the last letter. ``starts[0] <= 0 < starts[1]``.
    """

    level: int
    letters: np.ndarray
    starts: np.ndarray
    roof: np.ndarray  # s^(level)

    @property
    def length(self) -> float:
        return float(self.starts[-1])

    def locate(self, tau):
        """Letter index and offset inside it at flow times tau >= 0."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0) or np.any(tau >= self.starts[-1]):
            raise OrbitTooShort(f"time outside the generated orbit [0, {self.length:.6g})")
        idx = np.searchsorted(self.starts, tau, side="right") - 1
        return idx, tau - self.starts[idx]

    def sample(self, f: "CylFunction", dt: float, n: int) -> np.ndarray:
        """f(h_{k dt} y) for k = 0..n-1."""
        idx, off = self.locate(np.arange(n) * dt)
        return f.evaluate(self.letters[idx], off, self.roof)


# -- cylindrical functions ------------------------------------------------


@dataclass
class CylFunction:
    """Piecewise-constant cylindrical function of level ``level``.

    For letter ``a`` the profile psi_a on [0, s^(level)_a] takes value
    ``values[a-1][k]`` on the ``k``-th piece; ``breaks[a-1]`` holds the piece
    boundaries as fractions of s^(level)_a, starting at 0 and ending at 1.
    """

    level: int
    breaks: list[np.ndarray]
    values: list[np.ndarray]

    def __post_init__(self):
        if len(self.breaks) != len(self.values):
            raise ValueError("one profile per letter is required")
        for b, v in zip(self.breaks, self.values):
            b = np.asarray(b, dtype=float)
            if b[0] != 0 or b[-1] != 1 or np.any(np.diff(b) <= 0) or len(v) != len(b) - 1:
                raise ValueError("breaks must increase from 0 to 1 with one value per piece")
        self.breaks = [np.asarray(b, dtype=float) for b in self.breaks]
        self.values = [np.asarray(v, dtype=complex) for v in self.values]
        P = max(len(v) for v in self.values)
        m = len(self.values)
        # padded tables for vectorized antiderivatives
        self._B = np.ones((m + 1, P + 1))
        self._V = np.zeros((m + 1, P), dtype=complex)
        for a in range(m):
            k = len(self.values[a])
            self._B[a + 1, :k + 1] = self.breaks[a]
            self._V[a + 1, :k] = self.values[a]

    @property
    def m(self) -> int:
        return len(self.values)

    @classmethod
    def constant(cls, values: Sequence[complex], level: int = 0) -> "CylFunction":
        """f(x, t) = values[x_0 - 1] (a function of the level-``level`` letter)."""
        return cls(level, [np.array([0.0, 1.0]) for _ in values], [np.array([v]) for v in values])

    @classmethod
    def one(cls, m: int) -> "CylFunction":
        return cls.constant([1.0] * m)

    @property
    def sup_norm(self) -> float:
        return max(float(np.abs(v).max()) for v in self.values)

    def is_real(self) -> bool:
        return all(np.all(v.imag == 0) for v in self.values)

    def mean(self, sys: SAdicSystem, s) -> complex:
        """Integral against the normalized flow measure."""
        s0 = s.s if isinstance(s, RoofVector) else np.asarray(s, dtype=float)
        meas = sys.invariant_measure(self.level)
        mu_l = meas.levels[self.level]
        sl = sys.roof_at(s0, self.level)
        tot = sum(mu_l[a] * sl[a] * np.sum(np.diff(self.breaks[a]) * self.values[a]) for a in range(self.m))
        return complex(tot / float(meas.mu0 @ s0))

    def evaluate(self, letters: np.ndarray, offsets: np.ndarray, roof: np.ndarray) -> np.ndarray:
        """Values at level-``level`` letters and time offsets inside them."""
        frac = offsets / roof[letters - 1]
        B = self._B[letters]
        k = np.sum(B[:, 1:-1] <= frac[:, None], axis=1) if B.shape[1] > 2 else np.zeros(len(letters), dtype=int)
        return self._V[letters, k]

    def antiderivative(self, letters: np.ndarray, omega: float, u: np.ndarray, roof: np.ndarray) -> np.ndarray:
        """int_0^u e^{-2 pi i omega t} psi_a(t) dt, vectorized over (letters, u)."""
        sl = roof[letters - 1][:, None]
        B = self._B[letters] * sl
        lo, hi = B[:, :-1], B[:, 1:]
        x = np.clip(np.asarray(u, dtype=float)[:, None], lo, hi)
        return np.sum(self._V[letters] * (_phase_integral(omega, x) - _phase_integral(omega, lo)), axis=1)

    def lift(self, sys: SAdicSystem, s, level: int) -> "CylFunction":
        """The same function written as a cylindrical function of a higher level."""
        if level < self.level:
            raise ValueError("can only lift to a higher level")
        if level == self.level:
            return self
        s0 = s.s if isinstance(s, RoofVector) else np.asarray(s, dtype=float)
        low = sys.roof_at(s0, self.level)
        breaks, values = [], []
        for b in range(1, self.m + 1):
            w = sys.word(level, b, self.level)
            pos, bk, vals = 0.0, [0.0], []
            for c in w:
                c = int(c)
                for k in range(len(self.values[c - 1])):
                    end = pos + self.breaks[c - 1][k + 1] * low[c - 1]
                    bk.append(end)
                    vals.append(self.values[c - 1][k])
                pos += low[c - 1]
            bk = np.array(bk) / pos
            bk[-1] = 1.0
            breaks.append(bk)
            values.append(np.array(vals))
        return CylFunction(level, breaks, values)


@dataclass
class AntiderivativeFunction:
    """Cylindrical function given by a user antiderivative.

    ``F(letters, omega, u, roof)`` must return int_0^u e^{-2 pi i omega t}
    psi_a(t) dt for every entry; ``f(letters, offsets, roof)`` evaluates psi.
    """

    level: int
    F: Callable
    f: Callable
    sup_norm: float

    def antiderivative(self, letters, omega, u, roof):
        return self.F(letters, omega, u, roof)

    def evaluate(self, letters, offsets, roof):
        return self.f(letters, offsets, roof)


def _phase_integral(omega: float, x):
    """int_0^x e^{-2 pi i omega t} dt = x e^{-i pi omega x} sinc(omega x), stable as omega -> 0."""
    x = np.asarray(x, dtype=float)
    return x * np.exp(-1j * np.pi * omega * x) * np.sinc(omega * x)


def mean_zero_indicator(sys: SAdicSystem, s, letter: int = 1) -> CylFunction:
    """1_[letter] minus its flow mean: a mean-zero level-0 function."""
    s0 = s.s if isinstance(s, RoofVector) else np.asarray(s, dtype=float)
    mu = sys.mu0
    c = mu[letter - 1] * s0[letter - 1] / float(mu @ s0)
    vals = [(1.0 if a == letter else 0.0) - c for a in range(1, sys.m + 1)]
    return CylFunction.constant(vals)


# -- twisted Birkhoff integrals -------------------------------------------


def twisted_integrals(orbit: FlowOrbit, f, omega: float, R_values, *, start: float = 0.0) -> np.ndarray:
    """S_R(f, omega) along the orbit from time ``start`` for every R in R_values.

    The phase is measured from ``start``; every letter contributes its exact
    closed-form segment integral.
    """
    R = np.asarray(R_values, dtype=float)
    if np.any(R < 0):
        raise ValueError("R must be >= 0")
    if f.level != orbit.level:
        raise ValueError(f"function of level {f.level} on an orbit of level {orbit.level}")
    end = start + (R.max() if len(R) else 0.0)
    if start < 0 or end > orbit.starts[-1]:
        raise OrbitTooShort(f"need flow time {end:.6g}, orbit has {orbit.length:.6g}")
    tau = orbit.starts[:-1] - start
    ends = orbit.starts[1:] - start
    i0 = int(np.searchsorted(ends, 0.0, side="right"))
    i1 = int(np.searchsorted(tau, end, side="left"))
    tau, letters = tau[i0:i1], orbit.letters[i0:i1]
    roof = orbit.roof
    lo = np.maximum(0.0, -tau)
    full = roof[letters - 1]
    F_lo = f.antiderivative(letters, omega, lo, roof)
    F_hi = f.antiderivative(letters, omega, full, roof)
    rot = np.exp(-1j * TWO_PI * omega * tau)
    contrib = rot * (F_hi - F_lo)
    cum = np.concatenate([[0.0], np.cumsum(contrib)])
    seg_end = tau + full
    j = np.searchsorted(seg_end, R, side="right")  # segments finished by time R
    out = cum[j].astype(complex)
    partial = j < len(tau)
    if np.any(partial):
        jj = j[partial]
        u = np.minimum(R[partial] - tau[jj], full[jj])
        u = np.maximum(u, lo[jj])
        out[partial] += rot[jj] * (f.antiderivative(letters[jj], omega, u, roof) - F_lo[jj])
    return out


def twisted_birkhoff(sys: SAdicSystem, s, pt: SymbolicPoint, f, omega: float, R: float, *,
                     n_symbols: int | None = None) -> complex:
    """S_R^{(y)}(f, omega) for one point and one R."""
    s = s if isinstance(s, RoofVector) else RoofVector(tuple(s))
    if n_symbols is None:
        n_symbols = symbols_needed(sys, s, R, f.level)
    orb = sys.orbit(pt, s, n_symbols, f.level)
    return complex(twisted_integrals(orb, f, omega, [R])[0])


def symbols_needed(sys: SAdicSystem, s, R: float, level: int = 0) -> int:
    """Level-0 symbols guaranteed to cover flow time R plus one level-``level`` letter."""
    s0 = s.s if isinstance(s, RoofVector) else np.asarray(s, dtype=float)
    return int(math.ceil(R / s0.min())) + max(sys.heights(level)) + 2


def flow_weights(sys: SAdicSystem, points: Sequence[SymbolicPoint], s) -> np.ndarray:
    """Weights turning mu-distributed points into flow-measure averages."""
    s0 = s.s if isinstance(s, RoofVector) else np.asarray(s, dtype=float)
    x0 = np.array([int(sys.window(p.L, p.b, p.p, 1)[0][0]) for p in points])
    w = s0[x0 - 1]
    return w / w.sum()


# -- spectral estimates ---------------------------------------------------


@dataclass
class PowerFit:
    alpha: float
    log_c: float
    R0: float
    residual_rms: float
    n_used: int

    @property
    def gamma(self) -> float:
        return 2.0 * (1.0 - self.alpha)


def fit_power_law(R, amp, *, upper_half: bool = True) -> PowerFit:
    """Least-squares slope of log amp against log R.

    With ``upper_half`` only the largest half of the distinct R values
    (at least three) enter the fit; R0 is the smallest R used.
    """
    R = np.asarray(R, dtype=float)
    amp = np.asarray(amp, dtype=float)
    order = np.argsort(R)
    R, amp = R[order], amp[order]
    if len(np.unique(R)) < 3:
        raise ValueError("degenerate fit: need at least 3 distinct R values")
    if np.any(R <= 0) or np.any(amp <= 0) or not np.all(np.isfinite(amp)):
        raise ValueError("degenerate fit: R and |S_R| must be positive and finite")
    if upper_half:
        uniq = np.unique(R)
        keep = max(3, int(math.ceil(len(uniq) / 2)))
        cut = uniq[-keep]
        sel = R >= cut
        R, amp = R[sel], amp[sel]
    x, y = np.log(R), np.log(amp)
    A = np.vstack([x, np.ones_like(x)]).T
    (alpha, logc), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (alpha * x + logc)
    return PowerFit(float(alpha), float(logc), float(R.min()), float(np.sqrt(np.mean(resid ** 2))), len(R))


def local_mass_bound(C1: float, alpha: float, r) -> np.ndarray:
    """pi^2 2^{-2 alpha} C1^2 r^{2(1-alpha)}."""
    return math.pi ** 2 * 2.0 ** (-2 * alpha) * C1 ** 2 * np.asarray(r, dtype=float) ** (2 * (1 - alpha))


@dataclass
class SpectralEstimate:
    omega: np.ndarray
    R: np.ndarray
    S: np.ndarray          # (omega, R, point) complex
    weights: np.ndarray    # flow-measure weights of the points
    l2: np.ndarray         # (omega, R): weighted RMS of |S_R|
    mean: np.ndarray       # (omega, R): weighted mean of S_R
    fits: list[PowerFit]
    C1: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        return np.array([f.alpha for f in self.fits])

    @property
    def gamma(self) -> np.ndarray:
        return 2.0 * (1.0 - self.alpha)

    @property
    def R0(self) -> np.ndarray:
        return np.array([f.R0 for f in self.fits])

    def mass_constant(self) -> np.ndarray:
        return np.array([local_mass_bound(c, a, 1.0) for c, a in zip(self.C1, self.alpha)])

    def rows(self):
        """(omega, R, re, im, abs, alpha_fit) per grid cell."""
        for i, w in enumerate(self.omega):
            for j, R in enumerate(self.R):
                z = self.mean[i, j]
                yield (float(w), float(R), float(z.real), float(z.imag), float(self.l2[i, j]), float(self.alpha[i]))


def spectral_estimate(sys: SAdicSystem, s, f, omega_grid, R_grid, *, n_points: int = 64,
                      seed: int = 0, points: Sequence[SymbolicPoint] | None = None,
                      orbits: Sequence[SymbolicOrbit] | None = None,
                      upper_half: bool = True) -> SpectralEstimate:
    """L2 growth of S_R over stratified starting points and the power-law fit.

    For each omega, alpha is the least-squares slope of log ||S_R||_2 against
    log R; C1 is the smallest constant with ||S_R||_2 <= C1 R^alpha on the
    fitted range R >= R0, so the L2 growth hypothesis of the local-mass bound holds
    on the grid by construction.
    """
    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    R_grid = np.atleast_1d(np.asarray(R_grid, dtype=float))
    if len(omega_grid) == 0 or len(R_grid) == 0:
        raise ValueError("grids must be nonempty")
    if len(np.unique(R_grid)) < 3:
        raise ValueError("degenerate fit: need at least 3 distinct R values")
    s = s if isinstance(s, RoofVector) else RoofVector(tuple(s))
    level = f.level
    if orbits is None:
        if points is None:
            rng = np.random.default_rng(seed)
            points = sys.sample_points(n_points, symbols_needed(sys, s, R_grid.max(), level), rng)
        n_sym = symbols_needed(sys, s, R_grid.max(), level)
        orbits = [sys.symbolic_orbit(p, n_sym, level) for p in points]
    x0 = np.array([o.x0 for o in orbits])
    w = s.s[x0 - 1]
    w = w / w.sum()
    flows = [o.with_roof(sys, s) for o in orbits]
    S = np.empty((len(omega_grid), len(R_grid), len(flows)), dtype=complex)
    for k, orb in enumerate(flows):
        for i, om in enumerate(omega_grid):
            S[i, :, k] = twisted_integrals(orb, f, float(om), R_grid)
    l2 = np.sqrt(np.einsum("ijk,k->ij", np.abs(S) ** 2, w))
    mean = np.einsum("ijk,k->ij", S, w)
    fits, C1 = [], []
    for i in range(len(omega_grid)):
        fit = fit_power_law(R_grid, l2[i], upper_half=upper_half)
        fits.append(fit)
        sel = R_grid >= fit.R0
        C1.append(float(np.max(l2[i, sel] / R_grid[sel] ** fit.alpha)))
    return SpectralEstimate(omega_grid, R_grid, S, w, l2, mean, fits, np.array(C1))


def correlation(sys: SAdicSystem, s, f, *, T: float, T_avg: float, dt: float, n_points: int = 8,
                seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Time-averaged <f o h_tau, f> for tau = 0, dt, ..., T.

    Averaged over ``T_avg`` along each of ``n_points`` stratified orbits.
    """
    s = s if isinstance(s, RoofVector) else RoofVector(tuple(s))
    n_lag = int(round(T / dt))
    n_avg = int(round(T_avg / dt))
    n_tot = n_lag + n_avg
    rng = np.random.default_rng(seed)
    n_sym = symbols_needed(sys, s, n_tot * dt, f.level)
    points = sys.sample_points(n_points, n_sym, rng)
    w = flow_weights(sys, points, s)
    size = 1 << int(math.ceil(math.log2(n_tot + n_avg)))
    acc = np.zeros(n_lag + 1, dtype=complex)
    for wk, p in zip(w, points):
        g = sys.orbit(p, s, n_sym, f.level).sample(f, dt, n_tot)
        head = np.zeros(size, dtype=complex)
        head[:n_avg] = g[:n_avg]
        full = np.zeros(size, dtype=complex)
        full[:n_tot] = g
        corr = np.fft.ifft(np.fft.fft(full) * np.conj(np.fft.fft(head)))[: n_lag + 1] / n_avg
        acc += wk * corr
    return np.arange(n_lag + 1) * dt, acc


def spectral_mass_from_correlation(tau: np.ndarray, c: np.ndarray, omega: float, r) -> np.ndarray:
    """Fejer-smoothed sigma_f([omega - r, omega + r]) from correlation samples.

    Uses sigma(I) = int K(tau) c(tau) dtau with K the Fourier kernel of the
    interval and c(-tau) = conj c(tau), tapered by (1 - |tau|/T).
    """
    tau = np.asarray(tau, dtype=float)
    dt = tau[1] - tau[0]
    T = tau[-1] + dt
    taper = 1.0 - tau / T
    out = []
    for rr in np.atleast_1d(r):
        kern = np.empty_like(tau)
        kern[0] = 2 * rr
        kern[1:] = np.sin(TWO_PI * rr * tau[1:]) / (math.pi * tau[1:])
        # the tau > 0 and tau < 0 halves combine into twice the real part
        body = kern * taper * np.real(np.exp(-1j * TWO_PI * omega * tau) * c)
        out.append(dt * (body[0] + 2 * body[1:].sum()))
    return np.array(out)


@dataclass
class LocalMassCheck:
    alpha: float
    C1: float
    R0: float
    radii: np.ndarray
    sigma_hat: np.ndarray
    bound: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.sigma_hat / self.bound

    def holds(self, factor: float = 2.0) -> bool:
        return bool(np.all(self.sigma_hat <= factor * self.bound))


def check_local_mass(sys: SAdicSystem, s, f, omega: float, R_grid, radii=None, *, n_points: int = 32,
                     T: float | None = None, T_avg: float | None = None, dt: float | None = None,
                     seed: int = 0) -> LocalMassCheck:
    """Compare the correlation-route local mass with the bound implied by the L2 fit."""
    s = s if isinstance(s, RoofVector) else RoofVector(tuple(s))
    est = spectral_estimate(sys, s, f, [omega], R_grid, n_points=n_points, seed=seed)
    alpha, C1, R0 = float(est.alpha[0]), float(est.C1[0]), float(est.R0[0])
    r_max = 1.0 / (2 * R0)
    if radii is None:
        radii = r_max * np.geomspace(1.0, 1.0 / 8, 8)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii > r_max * (1 + 1e-12)):
        raise ValueError("radii must satisfy r <= 1/(2 R0)")
    s_min = float(s.s.min())
    dt = dt if dt is not None else s_min / 8
    T = T if T is not None else 10.0 / radii.min()
    T_avg = T_avg if T_avg is not None else 2 * T
    tau, c = correlation(sys, s, f, T=T, T_avg=T_avg, dt=dt, n_points=max(4, n_points // 4), seed=seed + 1)
    sig = spectral_mass_from_correlation(tau, c, omega, radii)
    return LocalMassCheck(alpha, C1, R0, radii, sig, local_mass_bound(C1, alpha, radii))


# -- Riesz-product bound --------------------------------------------------


def torus_norm(x) -> np.ndarray:
    """Distance to the nearest integer, entrywise."""
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.rint(x))


@dataclass
class RieszBound:
    n_range: tuple[int, int]
    gr_factors: np.ndarray
    torus_factors: np.ndarray
    gr_product: float
    torus_product: float
    bound: float
    torus_bound: float


def riesz_bound(sys: SAdicSystem, s, omega: float, ell: int, R: float, *, theta1: float,
                grws: Sequence[Sequence[int]] | None = None, c1: float = 0.5,
                c1_tilde: float | None = None, eta: float = 0.0, f_sup: float = 1.0) -> RieszBound:
    """Product factors over ell+1 <= n < log R / (4 theta1) and the resulting bound.

    GR form: 1 - c1 max_v ||omega <l(v), A(n) s>||^2 over good return words v.
    Torus form: 1 - c1_tilde ||A(n)(omega s)||^2 in R^m/Z^m. The bound is
    f_sup (R^{1/2} + R^{1+eta} prod), up to the unspecified constant.
    """
    if not grws:
        raise ValueError("missing good return words")
    if not 0 < c1 <= 1:
        raise ValueError("c1 must lie in (0, 1]")
    c1_tilde = c1 if c1_tilde is None else c1_tilde
    if theta1 <= 0:
        raise ValueError("theta1 must be positive")
    s0 = s.s if isinstance(s, RoofVector) else np.asarray(s, dtype=float)
    n_hi = int(math.ceil(math.log(R) / (4 * theta1)))
    ns = list(range(ell + 1, n_hi))
    pops = tuple(population_vector(tuple(v), sys.m) for v in grws)
    gr, tor = [], []
    for n in ns:
        # work with the exact integer matrix; reduce each row mod 1 after the product
        A = sys.cocycle(n)
        x = _int_matvec_mod1(A, omega * s0)
        lengths = _int_matvec_mod1(intmat.matmul(pops, A), omega * s0)
        gr.append(1 - c1 * float(np.max(torus_norm(lengths) ** 2)))
        tor.append(1 - c1_tilde * float(np.max(torus_norm(x)) ** 2))
    gr, tor = np.array(gr), np.array(tor)
    gp = float(np.prod(gr)) if len(gr) else 1.0
    tp = float(np.prod(tor)) if len(tor) else 1.0
    bound = f_sup * (R ** 0.5 + R ** (1 + eta) * gp)
    tbound = f_sup * (R ** 0.5 + R ** (1 + eta) * tp)
    return RieszBound((ell + 1, n_hi), gr, tor, gp, tp, bound, tbound)


def _int_matvec_mod1(A: IntMatrix, v: np.ndarray) -> np.ndarray:
    """(A v) mod 1 for an exact integer matrix and a float vector.

    Each product a * v_j is formed exactly from the binary value of v_j, so
    huge entries do not swamp the fractional part. The answer is still only
    as good as the float input v.
    """
    out = np.zeros(len(A))
    for i, row in enumerate(A):
        acc = 0.0
        for a, x in zip(row, v):
            acc = math.fmod(acc + _mul_mod1(a, float(x)), 1.0)
        out[i] = acc
    return out


def _mul_mod1(a: int, x: float) -> float:
    """(a * x) mod 1 for a Python int and a float, using the exact binary value of x."""
    fx = Fraction(x)
    prod = a * fx
    return float(prod - math.floor(prod))


# -- weakly Lipschitz -----------------------------------------------------


@dataclass
class LipschitzReport:
    C_tilde: float
    sup: float
    norm: float
    approx_error: float
    approx_bound: float

    @property
    def bound_holds(self) -> bool:
        return self.approx_error <= self.approx_bound * (1 + 1e-12) + 1e-15


def weakly_lipschitz_norm(samples: Sequence[np.ndarray], mu_level: Sequence[float]) -> LipschitzReport:
    """Best weak-Lipschitz constant on tower samples of one level.

    ``samples[a-1]`` has shape (points, times): values f(x, t) for several
    points x in the level-l cylinder of letter a on a common grid of t. The
    constant is max over letters and t of the largest |f(x,t) - f(x',t)|
    divided by mu(zeta^[l][a]). The induced cylindrical approximation takes
    the first point of each cylinder.
    """
    mu_level = np.asarray(mu_level, dtype=float)
    if len(samples) != len(mu_level):
        raise ValueError("one sample block per letter is required")
    C, sup, err = 0.0, 0.0, 0.0
    for a, block in enumerate(samples):
        block = np.asarray(block)
        if block.ndim != 2:
            raise ValueError("sample blocks must be 2-d (points, times)")
        sup = max(sup, float(np.abs(block).max()))
        diff = np.abs(block[:, None, :] - block[None, :, :]).max()
        C = max(C, float(diff) / mu_level[a])
        err = max(err, float(np.abs(block - block[0]).max()))
    norm = sup + C
    return LipschitzReport(C, sup, norm, err, norm * float(mu_level.max()))


def sample_cylinder_points(sys: SAdicSystem, level: int, letter: int, count: int, length: int,
                           rng: np.random.Generator) -> list[np.ndarray]:
    """Legal futures x_0 x_1 ... of points at the base of the level-``level`` tower over ``letter``."""
    h = np.array(sys.heights(level), dtype=np.int64)
    L, b = sys.level_for(8 * (length + int(h.max())), None)
    while True:
        W = sys.word(L, b, level)
        ends = np.cumsum(h[W - 1])
        starts = ends - h[W - 1]
        ok = np.nonzero((W == letter) & (starts + length <= ends[-1]))[0]
        if len(ok):
            break
        L += 1
        b = int(np.argmax(sys.heights(L))) + 1
    picks = rng.choice(ok, size=count, replace=len(ok) < count)
    return [sys.window(L, b, int(starts[i]), length)[0] for i in picks]
