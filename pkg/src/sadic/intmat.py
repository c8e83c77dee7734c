"""Exact integer matrices as tuples of tuples of Python ints.

Everything here is overflow-free: products of a few hundred substitution
matrices have entries far beyond 64 bits.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

IntMatrix = tuple[tuple[int, ...], ...]


def as_matrix(rows: Iterable[Iterable[int]]) -> IntMatrix:
    mat = tuple(tuple(int(x) for x in row) for row in rows)
    if mat and any(len(r) != len(mat[0]) for r in mat):
        raise ValueError("ragged matrix")
    return mat


def identity(m: int) -> IntMatrix:
    return tuple(tuple(int(i == j) for j in range(m)) for i in range(m))


def shape(a: IntMatrix) -> tuple[int, int]:
    return len(a), (len(a[0]) if a else 0)


def transpose(a: IntMatrix) -> IntMatrix:
    return tuple(zip(*a)) if a else ()


def matmul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    if shape(a)[1] != shape(b)[0]:
        raise ValueError(f"shape mismatch {shape(a)} @ {shape(b)}")
    bt = transpose(b)
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in bt) for row in a)


def matvec(a: IntMatrix, v: Sequence):
    """Matrix times vector; works for any numeric type supporting int * x."""
    return [sum(x * y for x, y in zip(row, v)) for row in a]


def matpow(a: IntMatrix, k: int) -> IntMatrix:
    if k < 0:
        raise ValueError("negative power; use inverse() first")
    result = identity(len(a))
    base = a
    while k:
        if k & 1:
            result = matmul(result, base)
        base = matmul(base, base)
        k >>= 1
    return result


def norm_inf(a: IntMatrix) -> int:
    """The l-infinity operator norm: max absolute row sum."""
    return max(sum(abs(x) for x in row) for row in a)


def is_positive(a: IntMatrix) -> bool:
    return all(x > 0 for row in a for x in row)


def det(a: IntMatrix) -> int:
    """Determinant by Bareiss fraction-free elimination (exact)."""
    n, k = shape(a)
    if n != k:
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return 1
    m = [list(row) for row in a]
    sign = 1
    prev = 1
    for i in range(n - 1):
        if m[i][i] == 0:
            for r in range(i + 1, n):
                if m[r][i] != 0:
                    m[i], m[r] = m[r], m[i]
                    sign = -sign
                    break
            else:
                return 0
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                m[r][c] = (m[r][c] * m[i][i] - m[r][i] * m[i][c]) // prev
        prev = m[i][i]
    return sign * m[n - 1][n - 1]


def inverse(a: IntMatrix) -> IntMatrix:
    """Exact inverse of a unimodular integer matrix.

    Raises ValueError when the inverse is not integral (|det| != 1).
    """
    n, k = shape(a)
    if n != k:
        raise ValueError("inverse of a non-square matrix")
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    out = []
    for row in aug:
        vals = row[n:]
        if any(v.denominator != 1 for v in vals):
            raise ValueError("matrix is not unimodular; inverse is not integral")
        out.append(tuple(int(v) for v in vals))
    return tuple(out)


def hermite_rows(vectors: Sequence[Sequence[int]]) -> tuple[list[list[int]], list[list[int]]]:
    """Row-style Hermite normal form with the unimodular transform.

    Returns ``(H, U)`` with ``H == U @ V`` where ``V`` has the input vectors as
    rows. ``H`` is upper triangular with positive pivots and reduced entries
    above each pivot; zero rows come last.
    """
    v = [list(map(int, r)) for r in vectors]
    k = len(v)
    m = len(v[0]) if k else 0
    h = [row[:] for row in v]
    u = [[int(i == j) for j in range(k)] for i in range(k)]
    row = 0
    for col in range(m):
        if row >= k:
            break
        # gcd-reduce column entries below `row` into position `row`
        while True:
            nz = [r for r in range(row, k) if h[r][col] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda r: abs(h[r][col]))
            h[row], h[piv] = h[piv], h[row]
            u[row], u[piv] = u[piv], u[row]
            done = True
            for r in range(row + 1, k):
                if h[r][col]:
                    q = h[r][col] // h[row][col]
                    h[r] = [x - q * y for x, y in zip(h[r], h[row])]
                    u[r] = [x - q * y for x, y in zip(u[r], u[row])]
                    if h[r][col]:
                        done = False
            if done:
                break
        if h[row][col] == 0:
            continue
        if h[row][col] < 0:
            h[row] = [-x for x in h[row]]
            u[row] = [-x for x in u[row]]
        for r in range(row):
            q = h[r][col] // h[row][col]
            if q:
                h[r] = [x - q * y for x, y in zip(h[r], h[row])]
                u[r] = [x - q * y for x, y in zip(u[r], u[row])]
        row += 1
    return h, u


def elementary_divisors(vectors: Sequence[Sequence[int]]) -> list[int]:
    """Nonzero elementary divisors of the lattice spanned by ``vectors``.

    Computed from the Hermite form by the determinantal-divisor recursion:
    d_k = gcd of k x k minors of the (square) pivot block.
    """
    h, _ = hermite_rows(vectors)
    pivots = [r for r in h if any(r)]
    r = len(pivots)
    if r == 0:
        return []
    # Smith form of the r x m echelon block via repeated gcd elimination.
    a = [row[:] for row in pivots]
    m = len(a[0])
    divisors = []
    for t in range(r):
        while True:
            entries = [(abs(a[i][j]), i, j) for i in range(t, r) for j in range(t, m) if a[i][j]]
            if not entries:
                return divisors
            _, pi, pj = min(entries)
            a[t], a[pi] = a[pi], a[t]
            for row in a:
                row[t], row[pj] = row[pj], row[t]
            p = a[t][t]
            clean = True
            for i in range(t + 1, r):
                q = a[i][t] // p
                a[i] = [x - q * y for x, y in zip(a[i], a[t])]
                clean &= a[i][t] == 0
            for j in range(t + 1, m):
                q = a[t][j] // p
                for i in range(t, r):
                    a[i][j] -= q * a[i][t]
                clean &= a[t][j] == 0
            if not clean:
                continue
            bad = next(((i, j) for i in range(t + 1, r) for j in range(t + 1, m)
                        if a[i][j] % p), None)
            if bad is None:
                break
            a[t] = [x + y for x, y in zip(a[t], a[bad[0]])]
        divisors.append(abs(a[t][t]))
    return divisors
