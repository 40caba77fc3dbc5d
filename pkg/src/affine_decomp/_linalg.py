"""Batched determinants for the small matrices that appear in minors and Jacobians."""

from fractions import Fraction

import numpy as np


def det(m):
    """Determinant over the last two axes of ``m``.

    Sizes up to 4 use closed-form cofactor expansion, larger sizes fall back
    to pivoted LU via :func:`numpy.linalg.det`. A 0x0 matrix has determinant 1.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[-1]
    if m.shape[-2] != n:
        raise ValueError("determinant of a non-square matrix")
    if n == 0:
        return np.ones(m.shape[:-2])
    if n == 1:
        return m[..., 0, 0]
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if n == 3:
        return _det3(m)
    if n == 4:
        total = 0.0
        for c in range(4):
            cols = [i for i in range(4) if i != c]
            sign = -1.0 if c % 2 else 1.0
            total = total + sign * m[..., 0, c] * _det3(m[..., 1:, cols])
        return total
    return np.linalg.det(m)


def _det3(m):
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


def leading_minors(m, upto):
    """Determinants of the leading j x j blocks of ``m`` for j = 0..upto.

    Returns an array with a trailing axis of length ``upto + 1``.
    """
    m = np.asarray(m, dtype=float)
    out = [det(m[..., :j, :j]) for j in range(upto + 1)]
    return np.stack(np.broadcast_arrays(*out), axis=-1)


def fraction_det(rows):
    """Exact determinant of a square matrix of rationals (Gaussian elimination)."""
    a = [[Fraction(x) for x in row] for row in rows]
    n = len(a)
    if any(len(row) != n for row in a):
        raise ValueError("determinant of a non-square matrix")
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            result = -result
        p = a[col][col]
        result *= p
        for r in range(col + 1, n):
            factor = a[r][col] / p
            if factor:
                row_r, row_c = a[r], a[col]
                for c in range(col + 1, n):
                    row_r[c] -= factor * row_c[c]
    return result
