"""Determinant minors of the torsion matrix, torsion, affine arclength weights.

``minor(curve, sigma, j, t)`` is ``L_{sigma,j}(t)``: the determinant of the
j x j matrix whose rows are coordinates ``sigma[0..j-1]`` and whose columns are
derivative orders ``1..j``. Logarithms are base 2.
"""

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from ._linalg import det, leading_minors


def _check_perm(sigma, d):
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(d)):
        raise ValueError(f"{sigma} is not a permutation of 0..{d - 1}")
    return sigma


def minor(curve, sigma, j, t):
    """``L_{sigma,j}(t)`` for ``1 <= j <= d``."""
    sigma = _check_perm(sigma, curve.d)
    if not 1 <= j <= curve.d:
        raise ValueError(f"minor order j={j} outside 1..{curve.d}")
    m = curve.derivative_matrix(t, rows=sigma[:j], orders=range(1, j + 1))
    return det(m)


def generalized_minor(curve, rows, t):
    """Determinant with rows ``gamma_{rows[r]}`` and columns orders ``1..l``.

    An empty ``rows`` gives the constant 1.
    """
    rows = tuple(int(r) for r in rows)
    if len(set(rows)) != len(rows):
        raise ValueError("duplicate rows in generalized minor")
    if any(not 0 <= r < curve.d for r in rows):
        raise ValueError(f"row index outside 0..{curve.d - 1}")
    if not rows:
        return np.ones(np.shape(t))
    m = curve.derivative_matrix(t, rows=rows, orders=range(1, len(rows) + 1))
    return det(m)


def minor_derivative(curve, rows, t):
    """Time derivative of ``generalized_minor(curve, rows, t)``.

    Only the last column survives differentiation, so this is the determinant
    with orders ``1..l-1, l+1``. Needs order ``l + 1`` derivatives.
    """
    rows = tuple(rows)
    l = len(rows)
    if l == 0:
        return np.zeros(np.shape(t))
    orders = list(range(1, l)) + [l + 1]
    return det(curve.derivative_matrix(t, rows=rows, orders=orders))


def all_minors(curve, sigma, t):
    """``L_{sigma,0..d}(t)`` stacked on a trailing axis (``L_0 = 1``)."""
    sigma = _check_perm(sigma, curve.d)
    m = curve.derivative_matrix(t, rows=sigma)
    return leading_minors(m, curve.d)


def torsion(curve, t):
    """``tau(t) = |det[gamma'(t), ..., gamma^{(d)}(t)]|``."""
    return np.abs(det(curve.derivative_matrix(t)))


@dataclass(frozen=True)
class WeightParams:
    """Exponent ``2/(d(d+1)) + epsilon`` of the damped affine arclength weight."""

    d: int
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.d < 1:
            raise ValueError("dimension must be positive")

    @property
    def exponent(self):
        return 2.0 / (self.d * (self.d + 1)) + self.epsilon


def weight(curve, params, t):
    """``w_eps(t) = tau(t)^(2/(d(d+1)) + eps)``; zero where the torsion vanishes."""
    tau = torsion(curve, t)
    return np.where(tau > 0, np.abs(tau) ** params.exponent, 0.0)


def dyadic_exponent(value):
    """The integer ``k`` with ``2^{-k-1} <= |value| < 2^{-k}``."""
    value = abs(float(value))
    if value == 0 or not math.isfinite(value):
        raise ValueError("dyadic exponent of zero or non-finite value")
    _, e = math.frexp(value)   # value = m 2^e with 1/2 <= m < 1
    return -e


def exponent_bounds(j, d, cnorm_d, k_d):
    """``(A_j, upper)`` from the greedy-permutation lemma.

    ``A_j = -log(j! c^j)`` and ``upper = k_d + A_j + log(d! c^d)``. Under the
    half-open convention the integer ``k_j`` satisfies
    ``A_j - 1 <= k_j < upper + 1``.
    """
    A = -math.log2(math.factorial(j) * cnorm_d**j)
    upper = k_d + A + math.log2(math.factorial(d) * cnorm_d**d)
    return A, upper


@dataclass(frozen=True)
class PermutationChoice:
    sigma: tuple
    k: tuple           # (k_1, ..., k_d)
    minors: tuple      # (L_{sigma,1}, ..., L_{sigma,d}) at the query point
    chain_ok: bool     # |L_{sigma,j}| >= j!/(d! c^{d-j}) tau for every j
    range_ok: bool     # k_j inside the (half-open corrected) lemma range


def select_permutation(curve, t, cnorm_d=None):
    """Greedy cofactor choice of ``sigma`` and the dyadic exponents at ``t``.

    Starting from all ``d`` rows, each step removes the row whose cofactor
    (the j x j determinant of the remaining rows, orders ``1..j``) is largest
    in absolute value; the removed row becomes ``sigma[j]``.

    Raises
    ------
    ValueError
        If the torsion vanishes at ``t``.
    """
    d = curve.d
    c = curve.cnorm_d if cnorm_d is None else float(cnorm_d)
    m = curve.derivative_matrix(float(t))
    tau = abs(float(det(m)))
    if tau == 0.0:
        raise ValueError("degenerate point: torsion vanishes")
    remaining = list(range(d))
    tail = []
    for j in range(d - 1, 0, -1):
        best_i, best = None, -1.0
        for i in remaining:
            rows = [r for r in remaining if r != i]
            val = abs(float(det(m[np.ix_(rows, range(j))])))
            if val >= best:     # ties keep the lower rows in front
                best_i, best = i, val
        remaining.remove(best_i)
        tail.append(best_i)
    sigma = tuple(remaining + tail[::-1])
    mats = m[list(sigma)]
    L = tuple(float(det(mats[:j, :j])) for j in range(1, d + 1))
    k = tuple(dyadic_exponent(x) for x in L)
    chain_ok = all(
        abs(L[j - 1]) >= math.factorial(j) / (math.factorial(d) * c ** (d - j)) * tau
        * (1 - 1e-12)
        for j in range(1, d + 1))
    range_ok = True
    for j in range(1, d + 1):
        A, upper = exponent_bounds(j, d, c, k[-1])
        if not (A - 1 <= k[j - 1] < upper + 1):
            range_ok = False
    return PermutationChoice(sigma, k, L, chain_ok, range_ok)


def all_permutations(d):
    """Permutations of ``0..d-1`` in lexicographic order (the sigma index order)."""
    return list(permutations(range(d)))
