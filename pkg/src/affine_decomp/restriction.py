"""Exponent bookkeeping and numerical probes of weighted restriction estimates.

Notation: ``D = d^2 + d``, ``S = sum_{j=1}^d 1/(N - j)``, ``p' = p/(p - 1)``.
The restriction functional of ``f`` along ``gamma`` is::

    R_q(f) = (int_I |f_hat(gamma(t))|^q w_eps(t) dt)^{1/q}

with ``f_hat(xi) = int f(x) exp(-i x.xi) dx``. Probes compare ``R_q(f)`` with
``||f||_p`` over closed-form Gaussian families; they estimate ratios for those
families only, never operator norms.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate

from .minors import WeightParams, weight

SLOPE_THRESHOLD = 0.05


def _D(d):
    return d * d + d


def deficit_sum(d, N):
    """``S = sum_{j=1}^d 1/(N - j)``; exact when ``N`` is a Fraction or int."""
    if not N > d:
        raise ValueError(f"smoothness N={N} must exceed d={d}")
    if isinstance(N, (int, Fraction)):
        return sum(Fraction(1) / (N - j) for j in range(1, d + 1))
    return sum(1.0 / (N - j) for j in range(1, d + 1))


def conjugate(p):
    """Hoelder conjugate ``p/(p-1)``; ``inf`` for ``p = 1``."""
    if p == 1:
        return math.inf
    return p / (p - 1)


@dataclass(frozen=True)
class ExponentPair:
    """``(p, q)`` with ``p`` strictly inside the Drury range."""

    p: float
    q: float
    d: int

    def __post_init__(self):
        check_drury(self.p, self.d)
        if not self.q >= 1:
            raise ValueError("q must be at least 1")

    @property
    def p_conj(self):
        return conjugate(self.p)

    @property
    def q_conj(self):
        return conjugate(self.q)

    @property
    def scaling_q(self):
        """``q`` on the scaling line ``2 p' / D``."""
        return 2 * self.p_conj / _D(self.d)


def check_drury(p, d):
    D = _D(d)
    if not 1 <= p < (D + 2) / D:
        raise ValueError("p outside Drury range")


@dataclass(frozen=True)
class RegionSpec:
    """Dimension, smoothness and damping that fix the admissible ``(p, q)`` set."""

    d: int
    N: float
    epsilon: float = 0.0

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if not self.N > self.d:
            raise ValueError("N must exceed d")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @property
    def S(self):
        return deficit_sum(self.d, self.N)

    @property
    def full_branch(self):
        """True when ``epsilon > S`` (scaling line included)."""
        return self.epsilon > self.S

    @property
    def q_coefficient(self):
        """``K`` with ``q_cap = K p'``."""
        D = _D(self.d)
        S = self.S
        exact = isinstance(S, Fraction) and isinstance(self.epsilon, (int, Fraction))
        two_over_D = Fraction(2, D) if exact else 2 / D
        if self.full_branch:
            return two_over_D
        return (two_over_D + self.epsilon) / (1 + D * S / 2)

    def q_cap(self, p_conj):
        return self.q_coefficient * p_conj


def admissible_q(region, p):
    """Upper limit for ``q`` at exponent ``p`` and whether it is attained.

    Returns ``(2 p'/D, True)`` when ``epsilon > S`` and
    ``((2/D + epsilon)/(1 + D S / 2) p', False)`` otherwise.

    Raises
    ------
    ValueError
        If ``p`` lies outside ``[1, (D + 2)/D)``.
    """
    check_drury(p, region.d)
    return float(region.q_coefficient) * conjugate(p), region.full_branch


def min_epsilon_for_full_range(d, N):
    """Smallest ``epsilon`` giving estimates for every ``p`` in the Drury range.

    ``max(0, (S - 4/D^2) D/(D + 2))``; exact for rational ``N``.
    """
    D = _D(d)
    S = deficit_sum(d, N)
    if isinstance(S, Fraction):
        return max(Fraction(0), (S - Fraction(4, D * D)) * Fraction(D, D + 2))
    return max(0.0, (S - 4 / D**2) * D / (D + 2))


@dataclass(frozen=True)
class RegionPolygon:
    """Admissible region in ``(1/q', 1/p')`` coordinates.

    ``vertices`` run counterclockwise starting at ``(1, 0)``; edge ``i`` joins
    vertex ``i`` to vertex ``i + 1`` (cyclically) and ``strict[i]`` marks an
    excluded edge.
    """

    vertices: tuple
    strict: tuple
    coefficient: float
    inclusive_q: bool

    def to_dict(self):
        return {"vertices": [list(v) for v in self.vertices],
                "strict_edges": list(self.strict),
                "q_coefficient": self.coefficient, "q_line_inclusive": self.inclusive_q}


def emit_region_polygon(region):
    """Vertices of ``{0 <= x <= 1, 0 <= y < 2/(D+2), y <= K (1 - x)}``.

    Here ``x = 1/q'``, ``y = 1/p'`` and ``q <= K p'`` reads ``y <= K (1 - x)``.
    """
    D = _D(region.d)
    K = float(region.q_coefficient)
    inclusive = region.full_branch
    y_max = 2.0 / (D + 2)
    if K <= y_max:
        verts = ((1.0, 0.0), (0.0, K), (0.0, 0.0))
        strict = (not inclusive, K == y_max, False)
    else:
        verts = ((1.0, 0.0), (1.0 - y_max / K, y_max), (0.0, y_max), (0.0, 0.0))
        strict = (not inclusive, True, False, False)
    return RegionPolygon(verts, strict, K, inclusive)


# ----------------------------------------------------------------------------
# extension operator

class QuadratureBudgetError(RuntimeError):
    def __init__(self, message, required_nodes):
        super().__init__(f"{message} (requires about {required_nodes} nodes)")
        self.required_nodes = required_nodes


_GL16 = np.polynomial.legendre.leggauss(16)


def _panel_rule(a, b, panels):
    x, w = _GL16
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    t = (mid[:, None] + half[:, None] * x[None]).reshape(-1)
    wt = (half[:, None] * w[None]).reshape(-1)
    return t, wt


def extension_operator(curve, g, x, tol=1e-10, max_nodes=2**22):
    """``E g(x) = int_I exp(i gamma(t).x) g(t) dt`` by composite Gauss-Legendre.

    The starting node count is ``8 (1 + |x| |I| sup|gamma'| / (2 pi))``; panels
    double until successive values differ by at most ``tol``.

    Returns
    -------
    (complex, float)
        Value and error estimate.

    Raises
    ------
    QuadratureBudgetError
        If more than ``max_nodes`` nodes would be needed.
    """
    x = np.asarray(x, dtype=float)
    a, b = curve.domain
    if b == a:
        return 0j, 0.0
    speed = float(np.max(np.abs(curve.derivative(1, np.linspace(a, b, 1025)))))
    target = 8.0 * (1.0 + np.linalg.norm(x) * (b - a) * speed * math.sqrt(curve.d)
                    / (2 * math.pi))
    panels = max(1, math.ceil(target / 16))
    if 32 * panels > max_nodes:
        raise QuadratureBudgetError("oscillation budget exceeded", 32 * panels)

    def rule(P):
        t, w = _panel_rule(a, b, P)
        phase = curve(t) @ x
        return np.sum(w * np.exp(1j * phase) * np.asarray(g(t)))
    prev = rule(panels)
    while True:
        panels *= 2
        cur = rule(panels)
        err = abs(cur - prev)
        if err <= tol:
            return complex(cur), float(err)
        if 32 * panels > max_nodes:
            raise QuadratureBudgetError("oscillation budget exceeded", 32 * panels)
        prev = cur


# ----------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class GaussianBump:
    """``f_hat(xi) = A exp(-sum_j ((xi - c).e_j)^2 / (2 w_j^2))``.

    ``frame`` holds the orthonormal directions ``e_j`` as rows. The inverse
    transform is a Gaussian too, so ``||f||_p`` is in closed form.
    """

    center: tuple
    widths: tuple
    frame: tuple
    amplitude: float = 1.0

    @classmethod
    def isotropic(cls, center, width, amplitude=1.0):
        c = tuple(float(v) for v in center)
        d = len(c)
        return cls(c, (float(width),) * d, tuple(map(tuple, np.eye(d))), amplitude)

    @classmethod
    def knapp(cls, curve, t0, delta, amplitude=1.0, scale=1.0):
        """Gaussian adapted to the ``delta``-arc of the curve around ``t0``.

        The frame comes from a QR factorisation of ``[gamma'(t0) .. gamma^(d)(t0)]``
        and the width along the ``j``-th direction is ``scale * delta^j``.
        """
        d = curve.d
        M = curve.derivative_matrix(float(t0))
        Qm, _ = np.linalg.qr(M)
        center = tuple(float(v) for v in curve(float(t0)))
        widths = tuple(scale * delta**j for j in range(1, d + 1))
        return cls(center, widths, tuple(map(tuple, Qm.T)), amplitude)

    @property
    def d(self):
        return len(self.center)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        y = (xi - np.asarray(self.center)) @ np.asarray(self.frame).T
        return self.amplitude * np.exp(-0.5 * np.sum((y / np.asarray(self.widths))**2,
                                                     axis=-1))

    def scaled(self, factor):
        return GaussianBump(self.center, self.widths, self.frame, self.amplitude * factor)

    def lp_norm(self, p):
        """``||f||_p = |A| (2 pi)^{-d/2} prod w_j prod (2 pi/(p w_j^2))^{1/(2p)}``."""
        w = np.asarray(self.widths, dtype=float)
        base = abs(self.amplitude) * (2 * math.pi) ** (-self.d / 2) * np.prod(w)
        if math.isinf(p):
            return float(base)
        return float(base * np.prod((2 * math.pi / (p * w**2)) ** (1 / (2 * p))))


def weighted_restriction_norm(curve, f_hat, q, params=None, tol=1e-10,
                              normalize=False, points=None):
    """``(int_I |f_hat(gamma(t))|^q w_eps(t) dt)^{1/q}`` by adaptive quadrature.

    With ``normalize`` the measure ``w_eps dt`` is divided by its total mass;
    a zero total mass then gives 0.
    """
    if not q >= 1:
        raise ValueError("q must be at least 1")
    params = WeightParams(curve.d) if params is None else params
    a, b = curve.domain

    def integrand(t):
        return float(abs(f_hat(curve(t))) ** q * weight(curve, params, t))
    opts = dict(epsabs=0.0, epsrel=tol, limit=400, points=points)
    total, _ = integrate.quad(integrand, a, b, **opts)
    if normalize:
        mass, _ = integrate.quad(lambda t: float(weight(curve, params, t)), a, b, **opts)
        if mass == 0:
            return 0.0
        total /= mass
    return max(total, 0.0) ** (1.0 / q)


def restriction_ratio(curve, bump, p, q, params=None, tol=1e-10, points=None):
    """``R_q(f) / ||f||_p`` for a Gaussian family member."""
    return weighted_restriction_norm(curve, bump, q, params, tol,
                                     points=points) / bump.lp_norm(p)


@dataclass
class KnappScan:
    deltas: list
    ratios: list
    slope: float
    classification: str
    p: float
    q: float
    flags: list = field(default_factory=list)

    def rows(self, d, N, epsilon):
        return [{"d": d, "N": N, "epsilon": epsilon, "p": self.p, "q": self.q,
                 "delta": dl, "ratio": r, "slope": self.slope,
                 "classification": self.classification}
                for dl, r in zip(self.deltas, self.ratios)]

    def to_dict(self):
        return {"deltas": list(self.deltas), "ratios": list(self.ratios),
                "slope": self.slope, "classification": self.classification,
                "p": self.p, "q": self.q, "flags": list(self.flags)}


def knapp_scan(curve, p, q, deltas, t0=None, epsilon=0.0, tol=1e-10,
               threshold=SLOPE_THRESHOLD):
    """Ratios ``R_q(f_delta) / ||f_delta||_p`` for Knapp bumps at each ``delta``.

    The slope is the least-squares fit of ``log ratio`` against
    ``log(1/delta)``; above ``threshold`` the scan is classed ``growing``.
    A single scale gives slope ``nan`` and class ``bounded``.
    """
    a, b = curve.domain
    t0 = 0.5 * (a + b) if t0 is None else float(t0)
    params = WeightParams(curve.d, epsilon)
    deltas = [float(x) for x in deltas]
    ratios, flags = [], []
    for dl in deltas:
        bump = GaussianBump.knapp(curve, t0, dl)
        try:
            ratios.append(restriction_ratio(curve, bump, p, q, params, tol, points=[t0]))
        except (ArithmeticError, ValueError, integrate.IntegrationWarning) as exc:
            flags.append(f"quadrature failure at delta={dl:g}: {exc}")
            ratios.append(math.nan)
    good = [(dl, r) for dl, r in zip(deltas, ratios) if math.isfinite(r) and r > 0]
    if len(good) >= 2:
        X = np.log2([1 / dl for dl, _ in good])
        Y = np.log2([r for _, r in good])
        slope = float(np.polyfit(X, Y, 1)[0])
    else:
        slope = math.nan
    cls = "growing" if slope > threshold else "bounded"
    return KnappScan(deltas, ratios, slope, cls, float(p), float(q), flags)
