"""Curves with evaluable derivatives, offspring curves, Taylor splits and rescaling.

A curve is a map from a closed interval ``[a, b]`` into R^d together with the
regularity data the decomposition needs: a smoothness index ``N > d`` and a
declared bound ``cnorm`` on its C^N norm. Bounds are applied coordinatewise:
``|gamma_r^{(i)}(t)| <= cnorm`` for every coordinate ``r``.

Coordinates are indexed from 0 throughout the package.
"""

import json
import math
from dataclasses import dataclass
from numbers import Real

import numpy as np
from numpy.polynomial import Polynomial

KINDS = ("polynomial", "moment", "simple", "generic")

# slack for quadrature nodes and shifted evaluation points that land a few ulps
# outside the closed domain
_DOMAIN_SLACK = 1e-12


class Curve:
    """Base class for curves ``gamma: [a, b] -> R^d``.

    Subclasses implement ``_eval(order, t)`` for a 1-d float array ``t`` and
    return an array of shape ``(len(t), d)``.

    Parameters
    ----------
    d : int
        Ambient dimension, 2 <= d <= 6 (d = 1 is accepted for truncations).
    domain : tuple of float
        The closed interval ``(a, b)`` with ``a <= b``.
    N : float
        Smoothness index, must exceed ``d``.
    cnorm : float
        Declared bound for the C^N norm.
    cnorm_d : float, optional
        Declared bound for the C^d norm; defaults to ``cnorm``.
    """

    kind = "generic"
    max_order = math.inf

    def __init__(self, d, domain, N, cnorm, cnorm_d=None, assumptions=()):
        d = int(d)
        if not 1 <= d <= 6:
            raise ValueError(f"dimension {d} unsupported (1 <= d <= 6)")
        a, b = (float(x) for x in domain)
        if not b >= a:
            raise ValueError(f"invalid domain [{a}, {b}]")
        N = float(N)
        if not N > d:
            raise ValueError(f"smoothness N={N} must exceed d={d}")
        cnorm = float(cnorm)
        if not (cnorm > 0 and math.isfinite(cnorm)):
            raise ValueError("cnorm must be a finite positive real")
        cnorm_d = cnorm if cnorm_d is None else float(cnorm_d)
        self._d = d
        self._domain = (a, b)
        self._N = N
        self._cnorm = cnorm
        self._cnorm_d = cnorm_d
        self._assumptions = tuple(assumptions)

    d = property(lambda self: self._d)
    domain = property(lambda self: self._domain)
    N = property(lambda self: self._N)
    cnorm = property(lambda self: self._cnorm)
    cnorm_d = property(lambda self: self._cnorm_d)
    assumptions = property(lambda self: self._assumptions)

    @property
    def length(self):
        a, b = self._domain
        return b - a

    def __repr__(self):
        a, b = self._domain
        return (f"{type(self).__name__}(kind={self.kind!r}, d={self.d}, "
                f"domain=[{a:g}, {b:g}], N={self.N:g}, cnorm={self.cnorm:g})")

    def check_domain(self, t):
        a, b = self._domain
        slack = _DOMAIN_SLACK * max(1.0, b - a)
        t = np.asarray(t, dtype=float)
        if t.size and (np.nanmin(t) < a - slack or np.nanmax(t) > b + slack
                       or np.isnan(t).any()):
            raise ValueError("t outside curve domain")
        return t

    def derivative(self, order, t):
        """``gamma^{(order)}(t)``; shape ``np.shape(t) + (d,)``."""
        order = int(order)
        if order < 0 or order > self.max_order:
            raise ValueError("derivative order unsupported")
        t = self.check_domain(t)
        flat = np.clip(t.reshape(-1), *self._domain)
        return self._eval(order, flat).reshape(t.shape + (self.d,))

    def __call__(self, t):
        return self.derivative(0, t)

    def derivative_matrix(self, t, rows=None, orders=None):
        """Matrix with entry ``[r, c] = gamma_{rows[r]}^{(orders[c])}(t)``.

        Defaults are all coordinates and orders ``1..d``, i.e. the torsion
        matrix. Shape ``np.shape(t) + (len(rows), len(orders))``.
        """
        rows = list(range(self.d)) if rows is None else list(rows)
        orders = list(range(1, self.d + 1)) if orders is None else list(orders)
        cols = [self.derivative(c, t)[..., rows] for c in orders]
        if not cols:
            shape = np.shape(t) + (len(rows), 0)
            return np.zeros(shape)
        return np.stack(cols, axis=-1)

    def _eval(self, order, t):
        raise NotImplementedError


class PolynomialCurve(Curve):
    """Polynomial curve stored in the monomial basis about ``center``.

    ``coeffs[r, i]`` multiplies ``(t - center)**i`` in coordinate ``r``. The
    centre defaults to the midpoint of the domain, which keeps the basis well
    conditioned on short intervals.
    """

    kind = "polynomial"

    def __init__(self, coeffs, domain, N=None, cnorm=None, center=None,
                 kind="polynomial", cnorm_d=None, assumptions=()):
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if coeffs.shape[1] == 0:
            coeffs = np.zeros((coeffs.shape[0], 1))
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("polynomial coefficients must be finite")
        d = coeffs.shape[0]
        a, b = (float(x) for x in domain)
        mid = 0.5 * (a + b)
        if center is not None and float(center) != mid:
            coeffs = _recenter(coeffs, float(center), mid)
        self._center = mid
        self._coeffs = coeffs
        self._coeffs.setflags(write=False)
        self.kind = kind
        if N is None:
            N = d + 1
        if cnorm is None:
            cnorm = _auto_cnorm(self._coeffs, mid, (a, b), float(N))
            if cnorm_d is None:
                cnorm_d = _auto_cnorm(self._coeffs, mid, (a, b), float(d))
        super().__init__(d, (a, b), N, cnorm, cnorm_d, assumptions)
        self._dcoef = {0: self._coeffs}

    @property
    def coeffs(self):
        return self._coeffs

    @property
    def center(self):
        return self._center

    @property
    def degree(self):
        nz = np.nonzero(np.any(self._coeffs != 0, axis=0))[0]
        return int(nz[-1]) if nz.size else 0

    def coeffs_about(self, center):
        """Coefficients re-expanded in powers of ``(t - center)``."""
        return _recenter(self._coeffs, self._center, float(center))

    def _derivative_coeffs(self, order):
        if order not in self._dcoef:
            c = self._coeffs
            n = c.shape[1]
            if order >= n:
                out = np.zeros((self.d, 1))
            else:
                # falling factorial i!/(i-order)! for the surviving powers
                i = np.arange(order, n)
                fall = np.array([math.perm(int(k), order) for k in i], dtype=float)
                out = c[:, order:] * fall
            self._dcoef[order] = out
        return self._dcoef[order]

    def _eval(self, order, t):
        c = self._derivative_coeffs(order)
        x = (t - self._center)[:, None]
        out = np.broadcast_to(c[:, -1], (len(t), self.d)).copy()
        for i in range(c.shape[1] - 2, -1, -1):
            out = out * x + c[:, i]
        return out


class FunctionCurve(Curve):
    """Curve given by a table of derivative functions.

    ``table[r][i]`` is a vectorised callable returning ``gamma_r^{(i)}``.
    Every coordinate must supply at least orders ``0..d``.
    """

    def __init__(self, table, domain, N, cnorm, kind="generic", cnorm_d=None,
                 assumptions=()):
        table = tuple(tuple(row) for row in table)
        d = len(table)
        orders = min(len(row) for row in table) if table else 0
        if orders < d + 1:
            raise ValueError(f"each coordinate needs derivative functions of "
                             f"orders 0..{d}")
        super().__init__(d, domain, N, cnorm, cnorm_d, assumptions)
        self.kind = kind
        self._table = table
        self.max_order = orders - 1

    def _eval(self, order, t):
        cols = [np.broadcast_to(np.asarray(row[order](t), dtype=float), t.shape)
                for row in self._table]
        return np.stack(cols, axis=-1)


class ShiftAveragedCurve(Curve):
    """``gamma_h(t) = mean_j gamma(t + h_j)`` on ``[a - h_1, b - h_m]``."""

    def __init__(self, base, shift):
        a, b = base.domain
        lo, hi = a - shift.h[0], b - shift.h[-1]
        notes = base.assumptions + (
            "offspring C^N norm taken equal to the parent's (averaging is "
            "norm-nonincreasing)",)
        super().__init__(base.d, (lo, hi), base.N, base.cnorm, base.cnorm_d,
                         notes)
        self.max_order = base.max_order
        self._base = base
        self._shift = shift

    @property
    def base(self):
        return self._base

    @property
    def shift(self):
        return self._shift

    def _eval(self, order, t):
        a, b = self._base.domain
        total = 0.0
        for h in self._shift.h:
            total = total + self._base._eval(order, np.clip(t + h, a, b))
        return total / self._shift.m


@dataclass(frozen=True)
class OffspringShift:
    """Nondecreasing shifts ``0 <= h_1 <= ... <= h_m``."""

    h: tuple

    def __post_init__(self):
        h = tuple(float(x) for x in self.h)
        if not h:
            raise ValueError("offspring shift needs at least one entry")
        if h[0] < 0 or any(y < x for x, y in zip(h, h[1:])):
            raise ValueError(f"shifts must satisfy 0 <= h_1 <= ... <= h_m, got {h}")
        object.__setattr__(self, "h", h)

    @property
    def m(self):
        return len(self.h)

    @property
    def span(self):
        return self.h[-1] - self.h[0]

    def domain(self, interval):
        a, b = interval
        return (a - self.h[0], b - self.h[-1])


def moment_curve(d, domain=(0.0, 1.0), N=None, cnorm=None):
    """The moment curve ``(t, t^2, ..., t^d)``."""
    coeffs = np.zeros((d, d + 1))
    for r in range(d):
        coeffs[r, r + 1] = 1.0
    return PolynomialCurve(coeffs, domain, N=N, cnorm=cnorm, center=0.0,
                           kind="moment")


def polynomial_curve(coeffs, domain, N=None, cnorm=None):
    """Polynomial curve from ascending coefficients in powers of ``t``.

    Coefficient rows may have different lengths.
    """
    rows = [list(map(float, row)) for row in coeffs]
    width = max((len(r) for r in rows), default=1) or 1
    arr = np.zeros((len(rows), width))
    for r, row in enumerate(rows):
        arr[r, :len(row)] = row
    return PolynomialCurve(arr, domain, N=N, cnorm=cnorm, center=0.0)


def simple_curve(phi, domain, N, cnorm, cnorm_d=None):
    """``(t, t^2, ..., t^{d-1}, phi(t))`` with ``phi`` given by derivatives.

    ``phi`` is a sequence ``[phi, phi', phi'', ...]`` of vectorised callables;
    its length fixes both ``d`` (``len(phi) - 1`` at least) and the highest
    available derivative order.
    """
    phi = tuple(phi)
    d = len(phi) - 1
    if d < 2:
        raise ValueError("phi must supply derivatives of order 0..d with d >= 2")
    table = [[_monomial_derivative(r + 1, i) for i in range(len(phi))]
             for r in range(d - 1)]
    table.append(list(phi))
    return FunctionCurve(table, domain, N, cnorm, kind="simple", cnorm_d=cnorm_d)


def _monomial_derivative(power, order):
    coef = float(math.perm(power, order)) if order <= power else 0.0
    exp = power - order

    def f(t):
        t = np.asarray(t, dtype=float)
        if coef == 0.0:
            return np.zeros_like(t)
        return coef * t**exp
    return f


def eval_derivative(curve, order, t):
    """``gamma^{(order)}(t)`` for ``0 <= order <= d``.

    Raises
    ------
    ValueError
        "t outside curve domain" or "derivative order unsupported".
    """
    if not 0 <= int(order) <= curve.d:
        raise ValueError("derivative order unsupported")
    return curve.derivative(order, t)


def offspring(curve, shift):
    """The offspring curve ``(1/m) sum_j gamma(t + h_j)`` on ``I_h``.

    Polynomial inputs give polynomial outputs.
    """
    if not isinstance(shift, OffspringShift):
        shift = OffspringShift(tuple(shift))
    lo, hi = shift.domain(curve.domain)
    if hi < lo:
        raise ValueError("degenerate offspring domain")
    if isinstance(curve, PolynomialCurve):
        mid = 0.5 * (lo + hi)
        acc = np.zeros_like(curve.coeffs)
        for h in shift.h:
            # gamma(t + h) about mid equals gamma about (mid + h)
            acc = acc + curve.coeffs_about(mid + h)
        notes = curve.assumptions + (
            "offspring C^N norm taken equal to the parent's (averaging is "
            "norm-nonincreasing)",)
        return PolynomialCurve(acc / shift.m, (lo, hi), N=curve.N,
                               cnorm=curve.cnorm, cnorm_d=curve.cnorm_d,
                               center=mid, assumptions=notes)
    return ShiftAveragedCurve(curve, shift)


def truncate(curve, rows):
    """The curve ``(gamma_{rows[0]}, ..., gamma_{rows[l-1]})``.

    Keeps ``N`` and the norms; only meaningful as input to routines that take
    the first ``l`` coordinates.
    """
    rows = list(rows)
    if isinstance(curve, PolynomialCurve):
        return PolynomialCurve(curve.coeffs[rows], curve.domain, N=curve.N,
                               cnorm=curve.cnorm, cnorm_d=curve.cnorm_d,
                               center=curve.center, kind="polynomial")

    def column(r, i):
        return lambda t: curve.derivative(i, t)[..., r]
    top = curve.max_order if math.isfinite(curve.max_order) else curve.d + 1
    table = [[column(r, i) for i in range(int(top) + 1)] for r in rows]
    return FunctionCurve(table, curve.domain, curve.N, curve.cnorm,
                         cnorm_d=curve.cnorm_d)


@dataclass(frozen=True)
class TaylorSplit:
    """``zeta = P + R`` with ``P`` the degree ``floor(N)`` Taylor polynomial at ``base``."""

    curve: Curve
    base: float
    polynomial: PolynomialCurve

    def remainder(self, i, t):
        """``zeta^{(i)}(t) - P^{(i)}(t)``."""
        return self.curve.derivative(i, t) - self.polynomial.derivative(i, t)

    def remainder_bound(self, i, t):
        """``|t - a|^{N - i} * cnorm``, the bound on each coordinate of ``R^{(i)}``."""
        t = np.asarray(t, dtype=float)
        return np.abs(t - self.base) ** (self.curve.N - i) * self.curve.cnorm

    def bound_violations(self, t, orders=None):
        """Largest ratio ``|R^{(i)}| / bound`` per order over the points ``t``.

        Values above 1 are violations of the declared ``cnorm``. Points where
        the bound is zero are skipped (the remainder vanishes there).
        """
        orders = range(self.curve.d + 1) if orders is None else orders
        out = {}
        for i in orders:
            r = np.abs(self.remainder(i, t)).max(axis=-1)
            bnd = self.remainder_bound(i, t)
            mask = bnd > 0
            out[i] = float(np.max(r[mask] / bnd[mask])) if mask.any() else 0.0
        return out


def taylor_split(curve, base):
    """Taylor polynomial of degree ``floor(N)`` about ``base`` plus remainder."""
    a, b = curve.domain
    base = float(base)
    curve.check_domain(base)
    deg = int(math.floor(curve.N))
    if deg > curve.max_order:
        raise ValueError("derivative order unsupported")
    coeffs = np.stack([curve.derivative(i, base) / math.factorial(i)
                       for i in range(deg + 1)], axis=-1)
    poly = PolynomialCurve(coeffs, (a, b), N=curve.N, cnorm=curve.cnorm,
                           cnorm_d=curve.cnorm_d, center=base)
    return TaylorSplit(curve, base, poly)


def rescale_to_unit(P, k, j, interval=None):
    """``Q(t) = 2^{k/j} (2/(b-a))^{(j+1)/2} P((b-a)(t+1)/2 + a)`` on ``[-1, 1]``.

    Only the first ``j`` coordinates of ``P`` are kept. Then
    ``|L_j^Q(t)| = 2^k |L_j^P(u(t))|`` with ``u`` the affine map onto ``[a, b]``.
    """
    j = int(j)
    if not 1 <= j <= P.d:
        raise ValueError(f"order j={j} outside 1..{P.d}")
    a, b = P.domain if interval is None else (float(x) for x in interval)
    if not b > a:
        raise ValueError("degenerate interval for rescaling")
    if not isinstance(P, PolynomialCurve):
        raise TypeError("rescale_to_unit needs a polynomial curve")
    half = 0.5 * (b - a)
    c = P.coeffs_about(0.5 * (a + b))[:j]
    scale = 2.0 ** (k / j) * (1.0 / half) ** ((j + 1) / 2)
    coeffs = scale * c * half ** np.arange(c.shape[1])
    N = max(P.N, j + 1)
    return PolynomialCurve(coeffs, (-1.0, 1.0), N=N, center=0.0)


def _recenter(coeffs, old, new):
    shift = Polynomial([new - old, 1.0])
    out = []
    for row in coeffs:
        p = Polynomial(row)(shift).coef
        out.append(p)
    width = max(coeffs.shape[1], max(len(p) for p in out))
    arr = np.zeros((coeffs.shape[0], width))
    for r, p in enumerate(out):
        arr[r, :len(p)] = p
    return arr[:, :coeffs.shape[1]]


def _auto_cnorm(coeffs, center, domain, N, grid=2001):
    """Sampled C^N norm of a polynomial curve, coordinatewise, with 1% slack.

    The Holder part is bounded by ``sup|D^{n+1}| |I|^{1-theta}`` for
    fractional order, by the oscillation of ``D^n`` for integer order.
    """
    a, b = domain
    t = np.linspace(a, b, grid)
    curve = PolynomialCurve(coeffs, domain, N=max(N, coeffs.shape[0] + 0.5),
                            cnorm=1.0, center=center)
    n = int(math.floor(N))
    theta = N - n
    sups = [float(np.abs(curve.derivative(i, t)).max()) for i in range(n + 1)]
    top = curve.derivative(n, t)
    if theta > 0:
        holder = float(np.abs(curve.derivative(n + 1, t)).max()) * max(b - a, 0.0) ** (1 - theta)
    else:
        holder = float((top.max(axis=0) - top.min(axis=0)).max())
    value = 1.01 * max(sups + [holder])
    return value if value > 0 else 1.0


def curve_from_dict(spec):
    """Build a curve from its JSON description.

    Supported kinds are ``polynomial`` (``coeffs`` ascending in ``t``) and
    ``moment``. ``N`` and ``cnorm`` are optional for both.
    """
    if not isinstance(spec, dict):
        raise ValueError("curve spec must be a JSON object")
    kind = spec.get("kind")
    if kind not in ("polynomial", "moment"):
        raise ValueError(f"unsupported curve kind {kind!r} in JSON spec")
    try:
        d = int(spec["d"])
        domain = tuple(float(x) for x in spec["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed curve spec: {exc}") from None
    if len(domain) != 2:
        raise ValueError("domain must have two endpoints")
    N = spec.get("N")
    cnorm = spec.get("cnorm")
    for name, val in (("N", N), ("cnorm", cnorm)):
        if val is not None and not isinstance(val, Real):
            raise ValueError(f"{name} must be a number")
    if kind == "moment":
        return moment_curve(d, domain, N=N, cnorm=cnorm)
    coeffs = spec.get("coeffs")
    if not isinstance(coeffs, list) or len(coeffs) != d:
        raise ValueError(f"polynomial spec needs {d} coefficient lists")
    return polynomial_curve(coeffs, domain, N=N, cnorm=cnorm)


def load_curve(path):
    """Read a JSON curve spec from ``path``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return curve_from_dict(json.loads(text))


def curve_to_dict(curve):
    """JSON-ready description; polynomial coefficients are given about 0."""
    out = {"kind": curve.kind, "d": curve.d, "domain": list(curve.domain),
           "N": curve.N, "cnorm": curve.cnorm, "cnorm_d": curve.cnorm_d}
    if isinstance(curve, PolynomialCurve):
        out["coeffs"] = curve.coeffs_about(0.0).tolist()
    if curve.assumptions:
        out["assumptions"] = list(curve.assumptions)
    return out
