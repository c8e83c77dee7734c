"""Torus distances of cocycle images and the Erdos-Kahane lattice tracking.

For a frequency omega and roof s the vectors ``x_n = A(n, a)(omega s)`` are
split as ``x_n = K_n + eps_n`` with ``K_n`` the nearest lattice point
(round half to even) and ``||eps_n||_inf`` the distance to Z^m.

Lattice tracking runs in mpmath with the working precision chosen from the
size of the exact integer products, and is verified by repeating the
computation at a higher precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from . import intmat
from .cocycle import cocycle_products, step_matrix, w_series
from .flow import RoofVector
from .intmat import IntMatrix
from .sequences import SubstitutionSequence
from .symbolic import Substitution, population_vector


class PrecisionExhausted(RuntimeError):
    """Two working precisions disagree; ``n_star`` is the first bad index."""

    def __init__(self, n_star: int, trace: "EKTrace | None" = None):
        super().__init__(f"precision exhausted at n = {n_star}")
        self.n_star = n_star
        self.trace = trace


class BudgetExceeded(RuntimeError):
    pass


# -- torus distance -------------------------------------------------------


def torus_distance(v) -> tuple[np.ndarray, np.ndarray, float]:
    """Nearest lattice point K (ties to even), offset eps = v - K and ||eps||_inf."""
    v = np.asarray(v, dtype=float)
    K = np.rint(v)
    eps = v - K
    return K.astype(np.int64), eps, float(np.abs(eps).max()) if eps.size else 0.0


def _nint_even(x: mpmath.mpf) -> int:
    fl = int(mpmath.floor(x))
    frac = x - fl
    if frac > 0.5:
        return fl + 1
    if frac < 0.5:
        return fl
    return fl if fl % 2 == 0 else fl + 1


def torus_norm_mp(v: Sequence) -> tuple[list[int], list, object]:
    K = [_nint_even(x) for x in v]
    eps = [x - k for x, k in zip(v, K)]
    return K, eps, max(abs(e) for e in eps)


# -- exact roof values ----------------------------------------------------


def roof_mp(s: RoofVector) -> list:
    """Roof entries at the current mpmath precision; golden roofs are exact."""
    if s.name == "golden" and not s.normalized:
        return [+mpmath.phi, mpmath.mpf(1)]
    return [mpmath.mpf(x) for x in s.values]


# -- EK tracking ----------------------------------------------------------


@dataclass
class EKTrace:
    """Per-n lattice data for n = 0..N."""

    omega: float
    K: list[tuple[int, ...]]
    eps: np.ndarray          # (N+1, m) float copies of eps_n
    eps_inf: np.ndarray      # (N+1,)
    W: np.ndarray            # W_{n+1} for n = 0..N-1
    rho: np.ndarray          # rho_n for n = 0..N-1
    M: list[int]             # M_n exactly
    bits: int
    uniqueness_checked: int = 0
    uniqueness_violations: list[int] = field(default_factory=list)
    branch_violations: list[int] = field(default_factory=list)
    precision_error: float = 0.0

    @property
    def N(self) -> int:
        return len(self.K) - 1

    def flags(self, varrho: float) -> np.ndarray:
        return self.eps_inf >= varrho

    def eps_ratios(self) -> np.ndarray:
        """eps_{n+1}[j] / eps_n[j] for the component j of largest |eps_n|."""
        j = np.argmax(np.abs(self.eps[:-1]), axis=1)
        idx = np.arange(len(j))
        return self.eps[idx + 1, j] / self.eps[idx, j]

    def exceptional_set(self) -> list[int]:
        """n with max(||eps_n||, ||eps_{n+1}||) >= rho_n."""
        e = self.eps_inf
        return [n for n in range(self.N) if max(e[n], e[n + 1]) >= self.rho[n]]

    def rows(self, varrho: float = 0.05):
        for n in range(self.N + 1):
            W = self.W[n] if n < self.N else float("nan")
            rho = self.rho[n] if n < self.N else float("nan")
            M = self.M[n] if n < self.N else ""
            yield (n, *self.K[n], float(self.eps_inf[n]), W, rho, M, int(self.eps_inf[n] >= varrho))


def required_bits(mats: Sequence[IntMatrix], rho_min: float, s_max: float = 1.0, omega: float = 1.0) -> int:
    """Bits so that rounding stays below 1e-3 * rho_min at every step."""
    top = max(intmat.norm_inf(a) for a in mats)
    mag = max(1.0, abs(omega) * s_max)
    return int(math.ceil(math.log2(max(top, 2)) + math.log2(mag + 1) + math.log2(1e3 / rho_min) + 60))


def _track(mats: list[IntMatrix], x0: list, bits: int):
    with mpmath.workprec(bits):
        out = []
        for A in mats:
            x = [mpmath.fsum(int(c) * xi for c, xi in zip(row, x0)) if any(row) else mpmath.mpf(0) for row in A]
            out.append(torus_norm_mp(x))
        return out


def ek_track(seq: SubstitutionSequence, s: RoofVector, omega: float, N: int, *,
             precision_bits: int | None = None, check: bool = True) -> EKTrace:
    """Lattice decomposition of A(n)(omega s) for n = 0..N with the online checks.

    Precision: the products A(n) are exact integers; omega s is carried in
    mpmath at ``precision_bits`` (default from :func:`required_bits`) and the
    run is repeated with 64 more bits. If the two runs disagree on K_n or on
    eps_n beyond 1e-3 * min rho, :class:`PrecisionExhausted` is raised.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if omega <= 0:
        raise ValueError("omega must be positive")
    mats = cocycle_products(seq, N)
    steps = [step_matrix(seq[n]) for n in range(1, N + 1)]
    norms = [intmat.norm_inf(a) for a in steps]
    W = np.array([math.log(x) for x in norms])
    rho = 0.5 / (1.0 + np.array(norms, dtype=float))
    m = seq.m
    M = [(2 + x) ** m for x in norms]
    bits = precision_bits or required_bits(mats, float(rho.min()), max(s.values), omega)

    def run(b):
        with mpmath.workprec(b):
            x0 = [mpmath.mpf(omega) * v for v in roof_mp(s)]
            return _track(mats, x0, b)

    res = run(bits)
    err = 0.0
    if check:
        ref = run(bits + 64)
        tol = 1e-3 * float(rho.min())
        for n, ((K1, e1, _), (K2, e2, _)) in enumerate(zip(res, ref)):
            d = max(float(abs(a - b)) for a, b in zip(e1, e2))
            err = max(err, d)
            if K1 != K2 or d > tol:
                raise PrecisionExhausted(n)
    K = [tuple(r[0]) for r in res]
    eps = np.array([[float(e) for e in r[1]] for r in res])
    eps_inf = np.abs(eps).max(axis=1)
    tr = EKTrace(omega, K, eps, eps_inf, W, rho, M, bits, precision_error=err)
    for n in range(N):
        A = steps[n]
        AK = intmat.matvec(A, K[n])
        diff = max(abs(a - b) for a, b in zip(K[n + 1], AK))
        if diff > (1 + norms[n]) / 2:
            tr.branch_violations.append(n)
        if max(eps_inf[n], eps_inf[n + 1]) < rho[n]:
            tr.uniqueness_checked += 1
            if tuple(AK) != K[n + 1]:
                tr.uniqueness_violations.append(n)
    return tr


# -- Veech criterion constants --------------------------------------------


@dataclass(frozen=True)
class CriterionParams:
    varrho: float
    delta: float
    c1_tilde: float
    theta1: float
    L1: float | None
    K: float | None
    gamma: float
    B: float | None = None


def criterion_constants(delta: float, L1: float | None, c1_tilde: float, theta1: float, *,
                        varrho: float | None = None, B: float | None = None) -> CriterionParams:
    """K = 2 L1 log(1/delta), varrho = (1/2)/(1 + e^K) and
    gamma = min(delta/16, -delta log(1 - c1_tilde varrho^2) / (8 theta1)).

    An explicit ``varrho`` overrides the value derived from L1.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 < c1_tilde < 1:
        raise ValueError("c1_tilde must lie in (0, 1)")
    if not theta1 > 0:
        raise ValueError("theta1 must be positive")
    if B is not None and not B > 1:
        raise ValueError("B must be > 1")
    K = None
    if varrho is None:
        if L1 is None or not L1 > 0:
            raise ValueError("L1 must be positive when varrho is derived")
        K = 2.0 * L1 * math.log(1.0 / delta)
        varrho = 0.5 / (1.0 + math.exp(K))
    if not 0 < varrho < 0.5:
        raise ValueError("varrho must lie in (0, 1/2)")
    gamma = min(delta / 16.0, -delta * math.log1p(-c1_tilde * varrho ** 2) / (8.0 * theta1))
    return CriterionParams(varrho, delta, c1_tilde, theta1, L1, K, gamma, B)


# -- good-time density ----------------------------------------------------


@dataclass
class DensityReport:
    omega: np.ndarray
    counts: np.ndarray          # (omega,) good times n in 1..N
    running: np.ndarray         # (omega, N) cumulative counts
    N: int
    varrho: float

    @property
    def density(self) -> np.ndarray:
        return self.counts / self.N

    @property
    def lower_density(self) -> np.ndarray:
        """min over N' in [N/2, N] of count(N') / N'."""
        lo = max(1, self.N // 2)
        ns = np.arange(lo, self.N + 1)
        return (self.running[:, lo - 1:] / ns).min(axis=1)

    @property
    def min_density(self) -> float:
        return float(self.lower_density.min())

    def satisfies(self, delta: float) -> bool:
        return bool(np.all(self.counts >= delta * self.N))


def good_time_density(seq: SubstitutionSequence, s: RoofVector, omega_grid, varrho: float, N: int, *,
                      B: float | None = None, precision_bits: int | None = None) -> DensityReport:
    """Counts of n in 1..N with ||A(n)(omega s)||_{R^m/Z^m} >= varrho, per omega."""
    omega_grid = np.atleast_1d(np.asarray(omega_grid, dtype=float))
    if len(omega_grid) == 0:
        raise ValueError("omega grid must be nonempty")
    if B is not None and (omega_grid.min() < 1 / B or omega_grid.max() > B):
        raise ValueError("omega grid must lie inside [1/B, B]")
    mats = cocycle_products(seq, N)
    steps = [intmat.norm_inf(step_matrix(seq[n])) for n in range(1, N + 1)]
    rho_min = 0.5 / (1 + max(steps))
    bits = precision_bits or required_bits(mats, min(rho_min, varrho), max(s.values), float(omega_grid.max()))
    running = np.zeros((len(omega_grid), N), dtype=np.int64)
    with mpmath.workprec(bits):
        base = roof_mp(s)
        for i, om in enumerate(omega_grid):
            x0 = [mpmath.mpf(float(om)) * v for v in base]
            res = _track(mats[1:], x0, bits)
            good = np.array([float(r[2]) >= varrho for r in res])
            running[i] = np.cumsum(good)
    return DensityReport(omega_grid, running[:, -1].copy(), running, N, varrho)


# -- branching and uniqueness checks -------------------------------------


def branching_check(A_next: IntMatrix, K_n: Sequence[int], rng: np.random.Generator, samples: int = 2000) -> int:
    """Distinct nearest lattice points of A_next x over x in the cell of K_n."""
    A = np.array(A_next, dtype=float)
    x = np.asarray(K_n, dtype=float) + rng.uniform(-0.5, 0.5, size=(samples, len(K_n)))
    K1 = np.rint(x @ A.T).astype(np.int64)
    return len({tuple(r) for r in K1})


@dataclass
class BranchingReport:
    trials: int
    branch_max_ratio: float
    branch_violations: int
    uniqueness_checked: int
    uniqueness_violations: int


def branching_suite(seq: SubstitutionSequence, trials: int, rng: np.random.Generator, *, n_max: int = 20,
                  omega_range=(0.5, 2.0), cell_samples: int = 64) -> BranchingReport:
    """Random (omega, s, n): branching bound (i) and uniqueness implication (ii).

    (i) is checked two ways: the realized |K_{n+1} - A K_n|_inf is at most
    (1 + ||A||)/2, and the number of distinct K_{n+1} reached from the cell
    of K_n never exceeds M_n. (ii) is checked whenever its hypothesis holds.
    """
    mats = cocycle_products(seq, n_max + 1)
    steps = [step_matrix(seq[n]) for n in range(1, n_max + 2)]
    m = seq.m
    viol_b = viol_u = checked = 0
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(0, n_max + 1))
        s = rng.uniform(0.1, 1.0, size=m)
        om = rng.uniform(*omega_range)
        x0 = om * s
        An = np.array(mats[n], dtype=float)
        A1 = steps[n]
        xn = An @ x0
        xn1 = np.array(A1, dtype=float) @ xn
        Kn, en, dn = torus_distance(xn)
        Kn1, en1, dn1 = torus_distance(xn1)
        norm = intmat.norm_inf(A1)
        Mn = (2 + norm) ** m
        AK = np.array(intmat.matvec(A1, Kn.tolist()))
        if np.abs(Kn1 - AK).max() > (1 + norm) / 2:
            viol_b += 1
        cnt = branching_check(A1, Kn.tolist(), rng, cell_samples)
        worst = max(worst, cnt / Mn)
        if cnt > Mn:
            viol_b += 1
        rho = 0.5 / (1 + norm)
        if max(dn, dn1) < rho:
            checked += 1
            if np.any(Kn1 != AK):
                viol_u += 1
    return BranchingReport(trials, worst, viol_b, checked, viol_u)


# -- covering counts ------------------------------------------------------


def admissible_K0(mu: Sequence[float], B: float) -> list[tuple[int, ...]]:
    """Lattice points whose rounding cell meets {x > 0 : 1/B <= <mu, x> <= B}."""
    mu = [float(x) for x in mu]
    bounds = [int(math.floor(B / m_ + 0.5)) + 1 for m_ in mu]
    out = []
    for K in itertools.product(*(range(b + 1) for b in bounds)):
        lo = sum(m_ * max(k - 0.5, 0.0) for m_, k in zip(mu, K))
        hi = sum(m_ * (k + 0.5) for m_, k in zip(mu, K))
        if lo <= B and hi >= 1.0 / B:
            out.append(tuple(K))
    return out


@dataclass
class CoveringCount:
    N: int
    delta: float
    n_K0: int
    psi_sets: int
    total: int                 # sum over Psi of pruned counts
    total_unpruned: int        # sum over Psi of #K0 * prod (2 floor(U)+1)^m
    bound_M: int               # sum over Psi of #K0 * prod M_n
    distinct: int | None
    per_psi: dict
    equality_ok: bool
    bound_ok: bool


def _ball(center: Sequence[int], radius: int):
    rng_ = [range(c - radius, c + radius + 1) for c in center]
    return itertools.product(*rng_)


def ek_covering_count(seq: SubstitutionSequence, N: int, delta: float, B: float, *,
                      branch_budget: int = 2_000_000, mu: Sequence[float] | None = None,
                      keep_sequences: bool = True) -> CoveringCount:
    """Count lattice sequences K_0..K_N that branch only on a small exceptional set.

    Psi runs over subsets of {0..N-1} with |Psi| < delta N. Off Psi the
    step is K_{n+1} = A(a_{n+1}) K_n; on Psi, K_{n+1} ranges over the lattice
    points within (1 + ||A(a_{n+1})||)/2 of A(a_{n+1}) K_n that are
    nonnegative and below ||A(n+1)|| * max_i(B / mu_i) + 1/2. K_0 ranges over
    :func:`admissible_K0`.

    The unpruned count equals #K0 * prod (2 floor(U_n) + 1)^m exactly and is
    compared with #K0 * prod M_n.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    if mu is None:
        from .flow import SAdicSystem

        mu = SAdicSystem(seq).mu0
    m = seq.m
    K0 = admissible_K0(mu, B)
    X0 = B * max(1.0 / x for x in mu)
    steps = [step_matrix(seq[n]) for n in range(1, N + 1)]
    norms = [intmat.norm_inf(a) for a in steps]
    prod_norm = [intmat.norm_inf(a) for a in cocycle_products(seq, N)]
    M = [(2 + x) ** m for x in norms]
    radius = [(1 + x) // 2 for x in norms]  # floor of (1 + ||A||)/2
    cap = [math.floor(prod_norm[n] * X0 + 0.5) for n in range(N + 1)]
    max_size = math.ceil(delta * N) - 1 if delta * N == math.ceil(delta * N) else math.floor(delta * N)
    max_size = max(max_size, 0) if delta > 0 else -1
    per_psi = {}
    total = total_unpruned = bound_M = 0
    work = 0
    seqs: set | None = set() if keep_sequences else None
    sizes = range(0, max_size + 1) if delta > 0 else range(0, 1)
    for size in sizes:
        for psi in itertools.combinations(range(N), size):
            psi_set = set(psi)
            if keep_sequences:
                states = [(k, (k,)) for k in K0]
            else:
                states = dict.fromkeys(K0, 1)
            for n in range(N):
                A = steps[n]
                nxt = [] if keep_sequences else {}
                items = states if keep_sequences else states.items()
                for K, h in items:
                    AK = intmat.matvec(A, K)
                    if n in psi_set:
                        cands = [c for c in _ball(AK, radius[n]) if min(c) >= 0 and max(c) <= cap[n + 1]]
                    else:
                        cands = [tuple(AK)]
                    for c in cands:
                        if keep_sequences:
                            nxt.append((c, h + (c,)))
                        else:
                            nxt[c] = nxt.get(c, 0) + h
                work += len(nxt)
                if work > branch_budget:
                    raise BudgetExceeded(f"more than {branch_budget} states")
                states = nxt
            cnt = len(states) if keep_sequences else sum(states.values())
            unpruned = len(K0)
            bm = len(K0)
            for n in psi:
                unpruned *= (2 * radius[n] + 1) ** m
                bm *= M[n]
            per_psi[psi] = cnt
            total += cnt
            total_unpruned += unpruned
            bound_M += bm
            if keep_sequences:
                seqs.update(h for _, h in states)
    # the unpruned count is a product formula; check it by direct enumeration on one Psi
    equality_ok = _check_unpruned(steps, K0, radius, m, N, max_size if delta > 0 else 0)
    return CoveringCount(N, delta, len(K0), len(per_psi), total, total_unpruned, bound_M,
                         len(seqs) if keep_sequences else None, per_psi, equality_ok,
                         total <= total_unpruned <= bound_M)


def _check_unpruned(steps, K0, radius, m, N, size) -> bool:
    """Enumerate without pruning for the first Psi of the largest size."""
    psi = set(range(size))
    states = dict.fromkeys(K0, 1)
    for n in range(N):
        A = steps[n]
        nxt: dict = {}
        for K, h in states.items():
            AK = intmat.matvec(A, K)
            for c in (_ball(AK, radius[n]) if n in psi else [tuple(AK)]):
                nxt[c] = nxt.get(c, 0) + h
        states = nxt
    count = sum(states.values())
    expected = len(K0)
    for n in psi:
        expected *= (2 * radius[n] + 1) ** m
    return count == expected


def ek_log_bound(N: int, delta: float, m: int, L1: float) -> float:
    """log of sum_{i < delta N} C(N, i) 3^{m delta N} exp(m L1 log(1/delta) delta N)."""
    top = math.ceil(delta * N)
    binom = sum(math.comb(N, i) for i in range(0, top))
    return math.log(max(binom, 1)) + m * delta * N * math.log(3) + m * L1 * math.log(1 / delta) * delta * N


@dataclass
class RateFit:
    Ns: list[int]
    counts: list[int]
    bounds_log: list[float]
    count_rate: float
    bound_rate: float
    L1: float
    L2: float
    n_K0: int
    box_rate: float | None = None

    @property
    def pointwise_ok(self) -> bool:
        """count_N <= #K0 * bound_N at every N."""
        return all(math.log(c) <= math.log(self.n_K0) + b + 1e-9 for c, b in zip(self.counts, self.bounds_log))

    @property
    def ok(self) -> bool:
        return self.count_rate <= self.bound_rate + 1e-12 and self.pointwise_ok


def covering_rate(seq: SubstitutionSequence, Ns: Sequence[int], delta: float, B: float, *,
                  L1: float | None = None, branch_budget: int = 2_000_000,
                  theta_kappa: float | None = None, eps: float = 0.0, beta: float | None = None) -> RateFit:
    """Least-squares exponential rates of the counts and of the bound, against N.

    L2 is the bound rate divided by delta log(1/delta), so the bound reads
    exp(L2 log(1/delta) delta N) at the fitted scale. Counts jump when
    delta N crosses an integer, so grids like 11, 16, 21 (for delta = 0.1)
    compare like with like.

    With ``theta_kappa`` and ``beta`` the box-dimension budget
    (theta_kappa - eps) beta per step is reported as ``box_rate``; it is
    informational and does not enter :attr:`RateFit.ok`.
    """
    Ns = list(Ns)
    if len(Ns) < 2:
        raise ValueError("need at least two values of N")
    if L1 is None:
        L1 = w_series(seq, max(Ns), deltas=(delta,)).L1
    runs = [ek_covering_count(seq, n, delta, B, branch_budget=branch_budget, keep_sequences=False) for n in Ns]
    counts = [r.total for r in runs]
    logs = [ek_log_bound(n, delta, seq.m, L1) for n in Ns]
    x = np.array(Ns, dtype=float)
    c_rate = float(np.polyfit(x, np.log(counts), 1)[0])
    b_rate = float(np.polyfit(x, logs, 1)[0])
    L2 = b_rate / (delta * math.log(1 / delta))
    box = None if theta_kappa is None or beta is None else (theta_kappa - eps) * beta
    return RateFit(Ns, counts, logs, c_rate, b_rate, L1, L2, runs[0].n_K0, box)


def sequence_is_counted(trace: EKTrace, seq: SubstitutionSequence, delta: float, B: float, mu=None) -> bool | None:
    """Whether a realized K-sequence appears in the enumeration for its own Psi.

    Returns None when the realized Psi is too large to be counted.
    """
    N = trace.N
    psi = trace.exceptional_set()
    if len(psi) >= delta * N:
        return None
    if mu is None:
        from .flow import SAdicSystem

        mu = SAdicSystem(seq).mu0
    K0 = set(admissible_K0(mu, B))
    if trace.K[0] not in K0:
        return False
    X0 = B * max(1.0 / x for x in mu)
    prod_norm = [intmat.norm_inf(a) for a in cocycle_products(seq, N)]
    for n in range(N):
        A = step_matrix(seq[n + 1])
        AK = tuple(intmat.matvec(A, trace.K[n]))
        nxt = trace.K[n + 1]
        if n in psi:
            r = (1 + intmat.norm_inf(A)) // 2
            if max(abs(a - b) for a, b in zip(AK, nxt)) > r or min(nxt) < 0:
                return False
            if max(nxt) > math.floor(prod_norm[n + 1] * X0 + 0.5):
                return False
        elif AK != nxt:
            return False
    return True


# -- lattice constant -----------------------------------------------------


@dataclass
class LatticeConstant:
    C: float
    right: int
    left: int
    coefficients: list[list[int]]
    samples: int
    violations: int


def lattice_constant(zeta: Substitution | None, grws: Sequence[Sequence[int]], *, m: int | None = None,
                     samples: int = 10_000, rng: np.random.Generator | None = None) -> LatticeConstant:
    """Explicit constant of the two-sided lattice inequality for return words.

    right = max_j ||l(v_j)||_1; left = max_i sum_j |a_ij| where
    sum_j a_ij l(v_j) = e_i comes from the Hermite normal form transform.
    C = max(right, left). The inequality
    C^-1 ||x|| <= max_j ||<l(v_j), x>|| <= C ||x|| is then tested on random x.
    """
    if m is None:
        if zeta is None:
            raise ValueError("alphabet size needed")
        m = zeta.m
    pops = [population_vector(tuple(v), m) for v in grws]
    if not pops:
        raise ValueError("no return words given")
    H, U = intmat.hermite_rows(pops)
    if any(tuple(H[i]) != tuple(int(i == j) for j in range(m)) for i in range(m)) if len(H) >= m else True:
        raise ValueError("population vectors do not generate Z^m")
    coeffs = [list(U[i]) for i in range(m)]
    for i in range(m):
        e = [sum(coeffs[i][j] * pops[j][c] for j in range(len(pops))) for c in range(m)]
        assert e == [int(i == c) for c in range(m)]
    right = max(sum(p) for p in pops)
    left = max(sum(abs(a) for a in row) for row in coeffs)
    C = float(max(right, left))
    rng = rng or np.random.default_rng(0)
    viol = lattice_violations(np.array(pops, dtype=float), C, rng, samples)
    return LatticeConstant(C, right, left, coeffs, samples, viol)


def lattice_violations(pops: np.ndarray, C: float, rng: np.random.Generator, samples: int) -> int:
    """Violations of the two-sided inequality on random points, half of them near Z^m."""
    m = pops.shape[1]
    far = rng.uniform(-5, 5, size=(samples - samples // 2, m))
    near = rng.integers(-5, 6, size=(samples // 2, m)) + rng.uniform(-1, 1, size=(samples // 2, m)) * \
        10.0 ** rng.uniform(-8, -0.3, size=(samples // 2, 1))
    x = np.vstack([far, near])
    _, eps, _ = torus_distance(x.ravel())
    tx = np.abs(eps.reshape(x.shape)).max(axis=1)
    proj = x @ pops.T
    g = np.abs(proj - np.rint(proj)).max(axis=1)
    tol = 1e-9
    bad = (g < tx / C - tol) | (g > C * tx + tol)
    return int(bad.sum())


# -- unstable-space approximation -----------------------------------------


def unstable_errors(trace: EKTrace, x0: Sequence, P_at, mats: Sequence[IntMatrix], bits: int = 256) -> np.ndarray:
    """||P_a(omega s) - A(n)^-1 P_{sigma^n a} K_n||_inf for n = 0..N at ``bits`` precision.

    ``P_at(n)`` returns the projection at sigma^n a as an mpmath matrix or a
    nested list of numbers.
    """
    out = []
    with mpmath.workprec(bits):
        P0 = mpmath.matrix(P_at(0))
        x = mpmath.matrix([mpmath.mpf(v) for v in x0])
        target = P0 * x
        for n, K in enumerate(trace.K):
            A = mpmath.matrix([[int(c) for c in row] for row in mats[n]])
            Pn = mpmath.matrix(P_at(n))
            v = mpmath.lu_solve(A, Pn * mpmath.matrix([int(k) for k in K]))
            out.append(float(max(abs(a - b) for a, b in zip(target, v))))
    return np.array(out)


def decay_rate(errors: Sequence[float], start: int = 1) -> float:
    """Exponential decay rate of an error series: minus the least-squares slope of log error."""
    e = np.asarray(errors, dtype=float)
    n = np.arange(len(e))
    keep = (n >= start) & (e > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive errors")
    return float(-np.polyfit(n[keep], np.log(e[keep]), 1)[0])
