"""The renormalization cocycle A(n, a) and its Lyapunov data.

``A(a) = S^t`` of the first substitution of ``a``, and for ``n > 0``

    A(n, a) = A(sigma^{n-1} a) ... A(a) = (S_1 S_2 ... S_n)^t.

All norms are the l-infinity operator norm (max absolute row sum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import intmat
from .intmat import IntMatrix
from .sequences import SubstitutionSequence
from .symbolic import Substitution


def step_matrix(z: Substitution) -> IntMatrix:
    """A for one substitution: the transpose of its incidence matrix."""
    return intmat.transpose(z.matrix)


def log_norm(a: IntMatrix) -> float:
    """log of the l-infinity operator norm, safe for huge integers."""
    n = intmat.norm_inf(a)
    return math.log(n) if n > 0 else float("-inf")


@dataclass
class CocycleProduct:
    n: int
    matrix: IntMatrix

    @property
    def log_norm(self) -> float:
        return log_norm(self.matrix)


class CocycleAccumulator:
    """Incremental exact product: ``push`` multiplies the next factor on the left."""

    def __init__(self, m: int):
        self.n = 0
        self.matrix = intmat.identity(m)

    def push(self, z: Substitution) -> CocycleProduct:
        self.matrix = intmat.matmul(step_matrix(z), self.matrix)
        self.n += 1
        return CocycleProduct(self.n, self.matrix)


def cocycle_product(seq: SubstitutionSequence, n: int) -> CocycleProduct:
    """Exact A(n, a); negative ``n`` uses exact inverses of the past factors."""
    m = seq.m
    if n == 0:
        return CocycleProduct(0, intmat.identity(m))
    if n > 0:
        acc = CocycleAccumulator(m)
        for k in range(1, n + 1):
            acc.push(seq[k])
        return CocycleProduct(n, acc.matrix)
    # A(n, a) = A(sigma^n a)^-1 ... A(sigma^-1 a)^-1, A(sigma^j a) = S^t of zeta_{j+1}
    out = intmat.identity(m)
    for j in range(-1, n - 1, -1):
        a = step_matrix(seq[j + 1])
        try:
            inv = intmat.inverse(a)
        except ValueError as exc:
            raise ValueError(f"non-invertible factor at index {j + 1}: {exc}") from None
        out = intmat.matmul(inv, out)
    return CocycleProduct(n, out)


def cocycle_products(seq: SubstitutionSequence, n_max: int) -> list[IntMatrix]:
    """[A(0), A(1), ..., A(n_max)] exactly."""
    acc = CocycleAccumulator(seq.m)
    out = [acc.matrix]
    for k in range(1, n_max + 1):
        out.append(acc.push(seq[k]).matrix)
    return out


# -- W statistics ---------------------------------------------------------


@dataclass
class WStat:
    """W_n = log ||A(a_n)|| for n = 1..N+1 plus the tail-sum summaries."""

    W: np.ndarray
    deltas: np.ndarray
    max_sums: np.ndarray
    ratios: np.ndarray
    L1: float
    exceed_counts: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.W) - 1


def max_subset_sum(values: np.ndarray, k: int) -> float:
    """Largest sum over subsets of size <= k of nonnegative values."""
    if k <= 0:
        return 0.0
    return float(np.sort(values)[::-1][:k].sum())


def w_series(seq: SubstitutionSequence, N: int, deltas=(0.02, 0.05, 0.1, 0.2),
             C_grid=(1.0, 2.0, 4.0)) -> WStat:
    """W_1..W_{N+1}, the subset-sum ratios and an empirical L_1.

    For each delta the largest sum of W_{n+1} over n in a subset of
    {1..N} with at most floor(delta N) elements is divided by
    log(1/delta) delta N; L_1 is the largest such ratio over the grid. The
    exceed counts record card{n <= N: W_{n+1} > C L_1 log(1/delta)} next to
    the bound delta N / C.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    cache: dict[Substitution, float] = {}
    W = np.empty(N + 1)
    for n in range(1, N + 2):
        z = seq[n]
        if z not in cache:
            cache[z] = log_norm(step_matrix(z))
        W[n - 1] = cache[z]
    tail = W[1:]
    deltas = np.asarray(deltas, dtype=float)
    sums = np.array([max_subset_sum(tail, int(math.floor(d * N))) for d in deltas])
    ratios = sums / (np.log(1 / deltas) * deltas * N)
    L1 = float(ratios.max())
    counts = {}
    for d in deltas:
        for C in C_grid:
            thr = C * L1 * math.log(1 / d)
            counts[(float(d), float(C))] = (int((tail > thr).sum()), d * N / C)
    return WStat(W, deltas, sums, ratios, L1, counts)


# -- Lyapunov spectrum ----------------------------------------------------


@dataclass
class LyapunovEstimate:
    exponents: np.ndarray
    errors: np.ndarray
    per_trial: np.ndarray
    N: int
    kappa: int
    top_simple: bool
    sequence_label: str = ""

    @property
    def theta1(self) -> float:
        return float(self.exponents[0])

    @property
    def theta_kappa(self) -> float:
        return float(self.exponents[self.kappa - 1]) if self.kappa else float("nan")


def _float_step_matrices(seq: SubstitutionSequence, lo: int, hi: int) -> np.ndarray:
    """Stack of A(a_n) as floats for n = lo..hi."""
    table: dict[Substitution, int] = {}
    mats: list[np.ndarray] = []
    ids = np.empty(hi - lo + 1, dtype=np.int64)
    for i, n in enumerate(range(lo, hi + 1)):
        z = seq[n]
        if z not in table:
            table[z] = len(mats)
            mats.append(np.array(step_matrix(z), dtype=float))
        ids[i] = table[z]
    return np.stack(mats)[ids]


def _block_products(mats: np.ndarray, block: int) -> np.ndarray:
    """Products A_{k+b-1} ... A_k over consecutive blocks (the last may be short)."""
    n, m, _ = mats.shape
    full = n // block
    out = []
    if full:
        body = mats[: full * block].reshape(full, block, m, m)
        prod = body[:, 0]
        for j in range(1, block):
            prod = body[:, j] @ prod
        out.append(prod)
    rest = mats[full * block:]
    if len(rest):
        p = rest[0]
        for a in rest[1:]:
            p = a @ p
        out.append(p[None])
    return np.concatenate(out)


def lyapunov_trial(seq: SubstitutionSequence, N: int, rng: np.random.Generator,
                   block: int = 5) -> np.ndarray:
    """Exponents per step from one run of re-orthonormalized products."""
    m = seq.m
    mats = _float_step_matrices(seq, 1, N)
    if np.any(np.all(mats == 0, axis=1)):
        raise ValueError("degenerate factor with a zero column")
    blocks = _block_products(mats, block)
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    logs = np.zeros(m)
    for b in blocks:
        q, r = np.linalg.qr(b @ q)
        d = np.abs(np.diag(r))
        if np.any(d == 0):
            raise ValueError("degenerate frame during orthonormalization")
        logs += np.log(d)
    return logs / N


def lyapunov_spectrum(seq: SubstitutionSequence, N: int, trials: int = 4, *,
                      block: int = 5, seed: int = 0) -> LyapunovEstimate:
    """All m exponents (per step) from ``trials`` runs over disjoint windows.

    Trial ``t`` uses ``seq.shift(t * N)`` and its own random initial frame.
    Error bars are the across-trial standard deviation, floored at 1/N (the
    finite-time bias scale). kappa counts exponents above three error bars.
    """
    rng = np.random.default_rng(seed)
    runs = np.array([lyapunov_trial(seq.shift(t * N), N, rng, block) for t in range(trials)])
    est = runs.mean(axis=0)
    spread = runs.std(axis=0, ddof=1) if trials > 1 else np.zeros(seq.m)
    err = np.maximum(spread, 1.0 / N)
    kappa = int(np.sum(est > 3 * err))
    top_simple = seq.m == 1 or bool(est[0] - est[1] > 3 * (err[0] + err[1]))
    return LyapunovEstimate(est, err, runs, N, kappa, top_simple, seq.label)


# -- Oseledets unstable projection ----------------------------------------


@dataclass
class Projection:
    P: np.ndarray
    unstable: np.ndarray      # orthonormal basis of the approximate E^u, columns
    annihilator: np.ndarray   # orthonormal basis of the complement's orthogonal
    idempotence_residual: float
    min_cosine: float


def _push_frame(mats, frame):
    for a in mats:
        frame, _ = np.linalg.qr(a @ frame)
    return frame


def unstable_projection(seq: SubstitutionSequence, n_back: int, k: int, *,
                        n_fwd: int | None = None, seed: int = 0,
                        angle_tol: float = 1e-8) -> Projection:
    """Approximate projection onto E^u_a along the slower Oseledets directions.

    E^u_a is the image of a generic k-frame under A(n_back, sigma^{-n_back} a).
    The slower directions at ``a`` are the vectors growing slowest under
    A(n_fwd, a); their orthogonal complement is the top-k right singular
    space, obtained by pulling a generic frame back with the transposes.
    """
    if not seq.two_sided:
        raise ValueError("unstable projection needs a two-sided sequence")
    n_fwd = n_back if n_fwd is None else n_fwd
    m = seq.m
    rng = np.random.default_rng(seed)
    past = _float_step_matrices(seq, -n_back + 1, 0)  # A(sigma^j a) for j = -n_back..-1
    u = _push_frame(past, np.linalg.qr(rng.standard_normal((m, k)))[0])
    fut = _float_step_matrices(seq, 1, n_fwd)          # A(sigma^j a) for j = 0..n_fwd-1
    y = _push_frame(np.transpose(fut[::-1], (0, 2, 1)), np.linalg.qr(rng.standard_normal((m, k)))[0])
    g = y.T @ u
    cosines = np.linalg.svd(g, compute_uv=False)
    if cosines.min() < angle_tol:
        raise ValueError(f"ill-conditioned frame: min cosine {cosines.min():.2e}")
    P = u @ np.linalg.solve(g, y.T)
    resid = float(np.abs(P @ P - P).max())
    return Projection(P, u, y, resid, float(cosines.min()))


def moment_estimate(seqs, n: int, eps: float) -> tuple[float, float]:
    """Sample mean and standard error of ||A(n, a)||^eps over the given sequences."""
    if not seqs:
        raise ValueError("need at least one sequence")
    vals = np.array([math.exp(eps * log_norm(cocycle_product(s, n).matrix)) for s in seqs])
    err = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
    return float(vals.mean()), err
