"""Jacobians of the sum map, iterated integrals and the checks built on them.

For a cell with permutation ``sigma`` the truncation ``zeta`` keeps the
coordinates ``sigma[:n]``. The Jacobian of ``(t_1, ..., t_n) -> sum zeta(t_i)``
is ``det[zeta'(t_1) ... zeta'(t_n)]`` and equals the iterated integral
``I_n`` built from the minors ``L_j = L_{sigma,j}``::

    I_1(t) = L_{n-2} L_n / L_{n-1}^2
    I_m(t_1..t_m) = prod_j P_m(t_j) * int_{t_1}^{t_2} ... int_{t_{m-1}}^{t_m} I_{m-1}
    P_m = L_{n-m-1} L_{n-m+1} / L_{n-m}^2,    L_0 = L_{-1} = 1.

Iterated integrals use tensor Gauss-Legendre rules on the box
``[t_1, t_2] x ... x [t_{m-1}, t_m]`` at every nesting level; the node count
doubles until two successive values agree.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from ._linalg import det, fraction_det, leading_minors
from .minors import generalized_minor

MAX_NESTED_N = 4


class QuadratureError(RuntimeError):
    """Nested quadrature did not reach the tolerance within its node budget."""

    def __init__(self, message, estimate=None, error=None, nodes=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.nodes = nodes


class CertificateError(ValueError):
    """A cell's minor bounds fail where a check relies on them."""


@dataclass(frozen=True)
class TupleSample:
    """Strictly increasing points inside one cell."""

    points: tuple

    def __post_init__(self):
        pts = tuple(float(x) for x in self.points)
        if not pts:
            raise ValueError("empty tuple")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("tuple points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return len(self.points)


@dataclass(frozen=True)
class IdentityResidual:
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    quadrature_estimate: float = 0.0
    points: tuple = ()

    @classmethod
    def compare(cls, lhs, rhs, quadrature_estimate=0.0, points=()):
        lhs, rhs = float(lhs), float(rhs)
        abs_err = abs(lhs - rhs)
        rel = abs_err / max(abs(lhs), abs(rhs), 1e-300)
        return cls(lhs, rhs, abs_err, rel, float(quadrature_estimate), tuple(points))

    def passed(self, tol):
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return self.rel_err <= max(tol, 4 * self.quadrature_estimate / scale)

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "abs_err": self.abs_err,
                "rel_err": self.rel_err,
                "quadrature_estimate": self.quadrature_estimate,
                "points": list(self.points)}


def _tuples(points):
    p = np.asarray(points, dtype=float)
    return p[None, :] if p.ndim == 1 else p


def vandermonde(points):
    """``prod_{i<j} (t_j - t_i)`` over the last axis."""
    p = np.asarray(points, dtype=float)
    n = p.shape[-1]
    out = np.ones(p.shape[:-1])
    for i in range(n):
        for j in range(i + 1, n):
            out = out * (p[..., j] - p[..., i])
    return out if p.ndim > 1 else float(out)


def jacobian(curve, points, sigma=None):
    """``det[zeta'(t_1) ... zeta'(t_n)]`` with ``zeta`` the coordinates ``sigma[:n]``.

    ``points`` has shape ``(n,)`` or ``(batch, n)``.
    """
    p = np.asarray(points, dtype=float)
    n = p.shape[-1]
    if n > curve.d:
        raise ValueError("tuple longer than the dimension")
    sigma = tuple(range(curve.d)) if sigma is None else tuple(sigma)
    d1 = curve.derivative(1, p)[..., list(sigma[:n])]     # (..., n_points, n_rows)
    out = det(np.swapaxes(d1, -1, -2))
    return out if p.ndim > 1 else float(out)


# ----------------------------------------------------------------------------
# nested Gauss-Legendre

def _box_nodes(points, Q):
    """Tensor Gauss-Legendre nodes and weights on ``prod [t_i, t_{i+1}]``.

    Returns ``(S, W)`` with shapes ``(batch, Q^{m-1}, m-1)`` and
    ``(batch, Q^{m-1})``; orientation is kept (weights carry ``t_{i+1} - t_i``).
    """
    x, w = np.polynomial.legendre.leggauss(Q)
    m = points.shape[-1]
    dim = m - 1
    lo, hi = points[:, :-1], points[:, 1:]
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    X = np.stack([g.reshape(-1) for g in grids], axis=-1)         # (Q^dim, dim)
    Wt = np.prod(np.stack([g.reshape(-1) for g in wgrids], axis=-1), axis=-1)
    S = mid[:, None, :] + half[:, None, :] * X[None]
    W = Wt[None, :] * np.prod(half, axis=-1)[:, None]
    return S, W


def nested_box_integral(func, points, Q):
    """``int_{t_1}^{t_2} ... int_{t_{m-1}}^{t_m} func(s) ds`` with ``Q`` nodes per axis.

    ``func`` maps an array ``(..., m-1)`` of tuples to values ``(...)``.
    """
    pts = _tuples(points)
    if pts.shape[-1] == 1:
        return np.asarray(func(np.empty(pts.shape[:-1] + (0,))), dtype=float)
    S, W = _box_nodes(pts, Q)
    vals = func(S)
    return np.sum(vals * W, axis=-1)


@dataclass
class _MinorTable:
    """Evaluates ``L_{sigma,0..n}`` and checks denominators against the cell."""

    curve: object
    sigma: tuple
    n: int
    k: tuple = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        L = leading_minors(self.curve.derivative_matrix(t, rows=self.sigma[:self.n],
                                                        orders=range(1, self.n + 1)),
                           self.n)
        if self.k is not None and self.n > 1:
            floor = 2.0 ** (-np.asarray(self.k[: self.n - 1], dtype=float) - 3)
            if np.any(np.abs(L[..., 1:self.n]) < floor):
                raise CertificateError("cell certificate violated")
        return L

    def L(self, table, j):
        if j <= 0:
            return np.ones(table.shape[:-1])
        return table[..., j]


def _iterated(mt, m, pts, Q):
    """``I_m`` on a batch of tuples ``pts`` (shape ``(batch, m)``)."""
    n = mt.n
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, m)
    tab = mt(flat)                                   # (batch, m, n+1)
    if m == 1:
        num = mt.L(tab, n - 2) * mt.L(tab, n)
        out = num / mt.L(tab, n - 1) ** 2
        return out[:, 0].reshape(shape)
    pre = mt.L(tab, n - m - 1) * mt.L(tab, n - m + 1) / mt.L(tab, n - m) ** 2
    pre = np.prod(pre, axis=-1)
    S, W = _box_nodes(flat, Q)
    inner = _iterated(mt, m - 1, S, Q)
    return (pre * np.sum(inner * W, axis=-1)).reshape(shape)


@dataclass(frozen=True)
class IntegralResult:
    value: np.ndarray
    error: np.ndarray
    nodes: int


def iterated_integral(curve, m, points, n=None, sigma=None, k=None, tol=1e-10,
                      q_start=4, q_max=64):
    """``I_m(t_1, ..., t_m)`` for the truncation to ``sigma[:n]``.

    Parameters
    ----------
    m : int
        Nesting level, ``1 <= m <= n``.
    points : array_like
        One tuple ``(m,)`` or a batch ``(batch, m)``.
    n : int, optional
        Truncation length, defaults to ``curve.d``; at most 4.
    k : sequence of int, optional
        Cell exponents. When given, every denominator minor ``L_j`` met at a
        quadrature node must satisfy ``|L_j| >= 2^{-k_j-3}``.
    tol : float
        Relative tolerance on ``|I(2Q) - I(Q)|``; exact zeros are accepted.

    Returns
    -------
    IntegralResult
        Values and error estimates, scalar for a single tuple.

    Raises
    ------
    CertificateError
        If a denominator minor drops below the cell bound.
    QuadratureError
        If ``q_max`` nodes per axis do not reach ``tol``.
    """
    n = curve.d if n is None else int(n)
    if not 1 <= n <= MAX_NESTED_N:
        raise ValueError(f"truncation length n={n} outside 1..{MAX_NESTED_N}")
    if not 1 <= m <= n:
        raise ValueError(f"nesting level m={m} outside 1..{n}")
    sigma = tuple(range(curve.d)) if sigma is None else tuple(sigma)
    mt = _MinorTable(curve, sigma, n, None if k is None else tuple(k))
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    pts = _tuples(p)
    if pts.shape[-1] != m:
        raise ValueError("tuple length must equal m")
    if m == 1:
        v = _iterated(mt, 1, pts, 1)
        return IntegralResult(v[0] if single else v, 0.0 if single else np.zeros_like(v), 1)
    Q = q_start
    prev = _iterated(mt, m, pts, Q)
    while True:
        Q2 = 2 * Q
        cur = _iterated(mt, m, pts, Q2)
        err = np.abs(cur - prev)
        if np.all((err <= tol * np.abs(cur)) | (err == 0)):
            break
        if Q2 >= q_max:
            raise QuadratureError("quadrature tolerance unreachable within budget",
                                  estimate=cur, error=err, nodes=Q2)
        Q, prev = Q2, cur
    if single:
        return IntegralResult(float(cur[0]), float(err[0]), Q2)
    return IntegralResult(cur, err, Q2)


def _rng(seed, index=0):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_tuples(interval, n, samples, seed=0, index=0):
    """Uniform sorted ``n``-tuples in ``interval``; reproducible per (seed, index)."""
    lo, hi = interval
    t = _rng(seed, index).uniform(lo, hi, size=(samples, n))
    return np.sort(t, axis=-1)


def check_jacobian_identity(curve, cell, samples=100, tol=1e-6, n=None, seed=0,
                            quad_tol=None):
    """Compare ``I_n`` with the Jacobian on random tuples in the cell.

    Returns
    -------
    list of IdentityResidual
        One per tuple; use ``passed(tol)`` on each.
    """
    n = curve.d if n is None else int(n)
    quad_tol = tol * 1e-3 if quad_tol is None else quad_tol
    pts = sample_tuples(cell.interval, n, samples, seed)
    res = iterated_integral(curve, n, pts, n=n, sigma=cell.sigma, k=cell.k,
                            tol=quad_tol)
    J = jacobian(curve, pts, cell.sigma)
    val, err = np.atleast_1d(res.value), np.atleast_1d(res.error)
    return [IdentityResidual.compare(val[i], J[i], err[i], pts[i])
            for i in range(samples)]


# ----------------------------------------------------------------------------
# quotient recursion

def fij(curve, i, j, t, sigma=None):
    """``f_{i,j} = L_{zeta_1..zeta_{j-1} zeta_i} / L_{zeta_1..zeta_j}`` (1-based i, j).

    Agrees with the recursive ``f_{i,j}`` up to an additive constant; ``j = 0``
    returns ``zeta_i`` itself.
    """
    sigma = tuple(range(curve.d)) if sigma is None else tuple(sigma)
    if not 0 <= j < i <= curve.d:
        raise ValueError("need 0 <= j < i <= d")
    if j == 0:
        return curve(t)[..., sigma[i - 1]]
    num = generalized_minor(curve, sigma[: j - 1] + (sigma[i - 1],), t)
    den = generalized_minor(curve, sigma[:j], t)
    if np.any(den == 0):
        raise ValueError("denominator minor vanishes")
    return num / den


def fij_derivative(curve, i, j, t, sigma=None):
    """``f'_{i,j} = L_{zeta_1..zeta_{j-1}} L_{zeta_1..zeta_j zeta_i} / L_{zeta_1..zeta_j}^2``.

    Indices are 1-based with ``0 <= j < i <= d``.
    """
    sigma = tuple(range(curve.d)) if sigma is None else tuple(sigma)
    if not 0 <= j < i <= curve.d:
        raise ValueError("need 0 <= j < i <= d")
    den = generalized_minor(curve, sigma[:j], t)
    if np.any(den == 0):
        raise ValueError("denominator minor vanishes")
    a = generalized_minor(curve, sigma[: j - 1] if j else (), t)
    b = generalized_minor(curve, sigma[:j] + (sigma[i - 1],), t)
    return a * b / den**2


def sylvester_sides(matrix):
    """Both sides of the bordered-minor identity for a square matrix ``A``.

    With ``j + 1`` the size of ``A`` and ``[r; c]`` the determinant after
    deleting rows ``r`` and columns ``c`` (1-based)::

        [j, j+1; j, j+1] det A = [j+1; j+1] [j; j] - [j+1; j] [j; j+1]
    """
    A = [list(row) for row in matrix]
    size = len(A)
    if size < 2 or any(len(r) != size for r in A):
        raise ValueError("need a square matrix of size at least 2")
    j = size - 1

    def minor_del(rows, cols):
        r_keep = [r for r in range(size) if r + 1 not in rows]
        c_keep = [c for c in range(size) if c + 1 not in cols]
        return fraction_det([[A[r][c] for c in c_keep] for r in r_keep])
    lhs = minor_del((j, j + 1), (j, j + 1)) * fraction_det(A)
    rhs = minor_del((j + 1,), (j + 1,)) * minor_del((j,), (j,)) \
        - minor_del((j + 1,), (j,)) * minor_del((j,), (j + 1,))
    return lhs, rhs


def check_sylvester(matrix):
    """Exact check of the bordered-minor identity in rational arithmetic."""
    lhs, rhs = sylvester_sides(matrix)
    return lhs == rhs


# ----------------------------------------------------------------------------
# calculus lemma behind the recursion

def dw_lemma_sides(g, dg, points, tol=1e-10, q_start=4, q_max=256):
    """Both sides of the quotient determinant lemma.

    For functions ``g_1..g_l`` with ``g_1`` nonvanishing and ``f_i = g_i/g_1``::

        det[g_i(t_r)] = prod_r g_1(t_r) * int_{t_1}^{t_2}..int_{t_{l-1}}^{t_l}
                         det[f_i'(s_r)]_{i=2..l, r=1..l-1} ds

    Parameters
    ----------
    g, dg : callable
        Map an array ``t`` to values of shape ``t.shape + (l,)`` for the
        functions and their derivatives.
    points : array_like
        ``(t_1, ..., t_l)``.

    Returns
    -------
    (float, float, float)
        ``lhs``, ``rhs`` and the quadrature error estimate.
    """
    t = np.asarray(points, dtype=float)
    l = t.shape[-1]
    G = g(t)
    if G.shape[-1] != l:
        raise ValueError("number of functions must equal the tuple length")
    if np.any(G[..., 0] == 0):
        raise ValueError("g_1 vanishes")
    lhs = float(det(np.swapaxes(G, -1, -2)))
    pre = float(np.prod(G[..., 0]))
    if l == 1:
        return lhs, pre, 0.0

    def integrand(S):
        gv, dv = g(S), dg(S)
        g1, d1 = gv[..., :1], dv[..., :1]
        if np.any(g1 == 0):
            raise ValueError("g_1 vanishes")
        fp = (dv[..., 1:] * g1 - gv[..., 1:] * d1) / g1**2      # (..., l-1, l-1)
        return det(np.swapaxes(fp, -1, -2))

    Q = q_start
    prev = nested_box_integral(integrand, t, Q)[0]
    while True:
        Q *= 2
        cur = nested_box_integral(integrand, t, Q)[0]
        err = abs(cur - prev)
        if err <= tol * abs(cur) or err == 0:
            break
        if Q >= q_max:
            raise QuadratureError("quadrature tolerance unreachable within budget",
                                  estimate=cur, error=err, nodes=Q)
        prev = cur
    return lhs, pre * float(cur), pre * err


def check_dw_lemma(curve, rows, points, tol=1e-6):
    """The lemma with ``g_i = gamma'_{rows[i]}`` on a tuple.

    Raises
    ------
    ValueError
        If ``g_1`` vanishes on a sampled grid of the spanned interval.
    """
    rows = list(rows)
    t = np.asarray(points, dtype=float)
    span = np.linspace(t.min(), t.max(), 257)
    if np.any(curve.derivative(1, span)[..., rows[0]] == 0):
        raise ValueError("g_1 vanishes")

    def g(s):
        return curve.derivative(1, s)[..., rows]

    def dg(s):
        return curve.derivative(2, s)[..., rows]
    lhs, rhs, est = dw_lemma_sides(g, dg, t, tol=tol * 1e-3)
    return IdentityResidual.compare(lhs, rhs, est, t)


# ----------------------------------------------------------------------------
# geometric inequality and injectivity

@dataclass(frozen=True)
class GeometricResult:
    inf_ratio: float
    sup_ratio: float
    passed: bool
    sign: int
    n_used: int
    c_geom: float

    def to_dict(self):
        return {"inf_ratio": self.inf_ratio, "sup_ratio": self.sup_ratio,
                "pass": self.passed, "sign": self.sign, "n_used": self.n_used,
                "c_geom": self.c_geom}


def check_geometric_inequality(curve, cell, samples=10_000, seed=0, c_geom=None,
                               gap=1e-6):
    """Range of ``|J| / (2^{-k_d} |v|)`` over random tuples in the cell.

    Tuples with a gap below ``gap * |cell|`` are excluded. Passes when the
    range lies in ``[c_geom, 1/c_geom]``, default ``c_geom = 2^{-3d}``.
    ``sign`` is the empirical sign of ``J / v`` (0 if it changes).

    Raises
    ------
    ValueError
        If every sampled tuple is near-coincident.
    """
    d = curve.d
    c_geom = 2.0 ** (-3 * d) if c_geom is None else float(c_geom)
    length = cell.interval[1] - cell.interval[0]
    pts = sample_tuples(cell.interval, d, samples, seed)
    keep = np.min(np.diff(pts, axis=-1), axis=-1) >= gap * length
    if length <= 0 or not keep.any():
        raise ValueError("cell below tuple resolution")
    pts = pts[keep]
    J = jacobian(curve, pts, cell.sigma)
    v = vandermonde(pts)
    q = J / v
    ratio = np.abs(q) * 2.0 ** cell.k[-1]
    signs = np.unique(np.sign(q))
    sign = int(signs[0]) if len(signs) == 1 else 0
    lo, hi = float(ratio.min()), float(ratio.max())
    return GeometricResult(lo, hi, bool(lo >= c_geom and hi <= 1 / c_geom), sign,
                           int(keep.sum()), c_geom)


@dataclass(frozen=True)
class InjectivityCertificate:
    """Empirical certificate: sampled sign constancy plus grid collision search."""

    signed_ok: bool
    sign: int
    n_sign_samples: int
    collisions: object          # int, or None when the brute force is skipped
    grid_density: int
    n_grid_tuples: int
    delta: float
    label: str = "empirical certificate"

    @property
    def ok(self):
        return self.signed_ok and (self.collisions in (0, None))

    def to_dict(self):
        return {"signed_ok": self.signed_ok, "sign": self.sign,
                "n_sign_samples": self.n_sign_samples, "collisions": self.collisions,
                "grid_density": self.grid_density, "n_grid_tuples": self.n_grid_tuples,
                "delta": self.delta, "label": self.label}


def sum_map(curve, points):
    """``Phi(t_1, ..., t_n) = gamma(t_1) + ... + gamma(t_n)`` over the last axis."""
    return np.sum(curve(np.asarray(points, dtype=float)), axis=-2)


def certify_injectivity(curve, cell, grid_density=20, samples=10_000, seed=0,
                        delta=1e-9, geometric=None):
    """Sign constancy of ``J`` on the ordered simplex and a collision search.

    Parameters
    ----------
    geometric : GeometricResult, optional
        A prior geometric-inequality result for the cell; computed if absent.

    Raises
    ------
    ValueError
        If the cell fails the geometric inequality (certificate refused) or the
        Jacobian changes sign.
    """
    d = curve.d
    geometric = check_geometric_inequality(curve, cell, seed=seed) \
        if geometric is None else geometric
    if not geometric.passed:
        raise ValueError("certificate refused: geometric inequality failed")
    pts = sample_tuples(cell.interval, d, samples, seed, index=1)
    J = jacobian(curve, pts, cell.sigma)
    nonzero = J[J != 0]
    if nonzero.size and not (np.all(nonzero > 0) or np.all(nonzero < 0)):
        raise ValueError("Jacobian sign change: cell certificate invalid")
    sign = int(np.sign(nonzero[0])) if nonzero.size else 0
    collisions, n_grid = None, 0
    if d <= 3:
        grid = np.linspace(*cell.interval, grid_density)
        tuples = np.array(list(combinations(grid, d)))
        n_grid = len(tuples)
        images = sum_map(curve, tuples)
        collisions = len(cKDTree(images).query_pairs(r=delta)) if n_grid else 0
    return InjectivityCertificate(True, sign, int(samples), collisions,
                                  int(grid_density), n_grid, float(delta))
