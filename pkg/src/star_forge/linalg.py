"""Small exact matrix helpers over Fraction (lists of rows)."""

from __future__ import annotations

from fractions import Fraction

import sympy

from .errors import FrameError


def as_matrix(rows):
    return [[Fraction(x) for x in row] for row in rows]


def identity(size):
    return [[Fraction(int(i == j)) for j in range(size)] for i in range(size)]


def zeros(rows, cols=None):
    return [[Fraction(0)] * (rows if cols is None else cols) for _ in range(rows)]


def transpose(a):
    return [list(col) for col in zip(*a)]


def matmul(a, b):
    bt = transpose(b)
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def matadd(a, b, scale=1):
    return [[x + scale * y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def matscale(a, c):
    return [[c * x for x in row] for row in a]


def det(m):
    a = as_matrix(m)
    size = len(a)
    out = Fraction(1)
    for col in range(size):
        piv = next((r for r in range(col, size) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            out = -out
        out *= a[col][col]
        for r in range(col + 1, size):
            f = a[r][col] / a[col][col]
            if f:
                for t in range(col, size):
                    a[r][t] -= f * a[col][t]
    return out


def inverse(m, what="matrix"):
    size = len(m)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(size)]
         for i, row in enumerate(m)]
    for col in range(size):
        piv = next((r for r in range(col, size) if a[r][col] != 0), None)
        if piv is None:
            raise FrameError(f"{what} is singular")
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(size):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[size:] for row in a]


def is_symplectic(A, lam):
    """A lam A^T == lam, the condition for Z -> A Z to keep [Z^i, Z^j] = nu lam^{ij}."""
    return matmul(matmul(A, lam), transpose(A)) == as_matrix(lam)


def solve_affine(columns, rhs):
    """Least-structure exact solve of sum_j x_j columns[j] = rhs.

    ``columns`` and ``rhs`` are dicts (sparse vectors).  Returns the list x with free
    variables set to zero, or None when the system is inconsistent.
    """
    keys = sorted(set().union(rhs, *columns), key=repr)
    if not columns:
        return [] if all(rhs.get(k, 0) == 0 for k in keys) else None
    index = {k: i for i, k in enumerate(keys)}
    mat = sympy.zeros(len(keys), len(columns))
    vec = sympy.zeros(len(keys), 1)
    for j, col in enumerate(columns):
        for k, v in col.items():
            mat[index[k], j] = sympy.Rational(v.numerator, v.denominator)
    for k, v in rhs.items():
        v = Fraction(v)
        vec[index[k], 0] = sympy.Rational(v.numerator, v.denominator)
    aug = mat.row_join(vec)
    reduced, pivots = aug.rref()
    if len(columns) in pivots:
        return None
    x = [Fraction(0)] * len(columns)
    for row, p in enumerate(pivots):
        val = reduced[row, len(columns)]
        x[p] = Fraction(int(val.p), int(val.q))
    return x


def to_float(a):
    import numpy as np
    return np.array([[float(x) for x in row] for row in a])
