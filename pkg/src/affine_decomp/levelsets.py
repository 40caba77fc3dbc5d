"""Covers of dyadic level sets ``{2^{-k-1} <= |f| < 2^{-k}}`` by intervals.

On every returned interval ``2^{-k-2} <= |f| <= 2^{-k+1}`` holds, and the
intervals contain the whole level set. The cover is built by bisecting the
domain: a piece is dropped once its certified value range misses the band and
kept once that range fits inside ``[2^{-k-2}, 2^{-k+1}]``. A certified range
of width at most ``2^{-k-2}`` around an in-band sample always fits, so pieces
never need to be shorter than that oscillation scale.
"""

import math

import numpy as np


class OscillationBudgetError(RuntimeError):
    """Subdivision hit its depth cap while a piece was still too oscillatory."""

    def __init__(self, message, piece=None, oscillation=None, depth=None, k=None):
        super().__init__(message)
        self.piece = piece
        self.oscillation = oscillation
        self.depth = depth
        self.k = k


def count_bound(holder_norm, alpha, k):
    """``B_alpha 2^{alpha k}`` with ``B_alpha = ||f||^alpha 4^{1/alpha + alpha + 4}``."""
    B = holder_norm**alpha * 4.0 ** (1.0 / alpha + alpha + 4.0)
    return B * 2.0 ** (alpha * k)


def levelset_cover(f, k, domain, holder_norm, alpha, df=None, n_init=64,
                   n_samples=9, max_depth=40, safety=2.0):
    """Disjoint closed intervals covering the dyadic level set of ``|f|``.

    Parameters
    ----------
    f : callable
        Vectorised scalar function on ``domain``.
    k : int
        Dyadic scale; the target set is ``2^{-k-1} <= |f| < 2^{-k}``.
    domain : tuple of float
        ``(a, b)``.
    holder_norm : float
        Bound on ``||f||_{C^{1/alpha}}``; gives the oscillation bound
        ``holder_norm * len^{min(1, 1/alpha)}`` on a piece.
    alpha : float
        Inverse regularity.
    df : callable, optional
        Derivative of ``f``. When given, ``safety * max|df|`` over the piece
        samples times the piece length is used where it beats the Holder bound.

    Returns
    -------
    list of (float, float)
        Sorted, pairwise disjoint intervals.

    Raises
    ------
    OscillationBudgetError
        When a piece meeting the band is still too oscillatory at ``max_depth``.
    """
    if not holder_norm > 0:
        raise ValueError("holder_norm must be positive")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    a, b = (float(x) for x in domain)
    if not b > a:
        return []
    lo_band, hi_band = 2.0 ** (-k - 1), 2.0 ** (-k)
    lo_keep, hi_keep = 2.0 ** (-k - 2), 2.0 ** (-k + 1)
    beta = min(1.0, 1.0 / alpha)
    resolution = 1e-13 * (b - a)
    edges = np.linspace(a, b, n_init + 1)
    stack = [(float(lo), float(hi), 0) for lo, hi in zip(edges[:-1], edges[1:])][::-1]
    kept = []
    while stack:
        lo, hi, depth = stack.pop()
        x = np.linspace(lo, hi, n_samples)
        v = np.abs(np.asarray(f(x), dtype=float))
        length = hi - lo
        osc = holder_norm * length**beta
        if df is not None:
            lip = safety * float(np.max(np.abs(df(x))))
            osc = min(osc, lip * length)
        vmin, vmax = float(v.min()), float(v.max())
        if vmax + osc < lo_band or vmin - osc >= hi_band:
            continue
        if vmin - osc >= lo_keep and vmax + osc <= hi_keep:
            kept.append((lo, hi))
        elif depth >= max_depth or length <= resolution:
            raise OscillationBudgetError(
                "oscillation budget exhausted", piece=(lo, hi),
                oscillation=osc, depth=depth, k=k)
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
    return _merge(kept)


def _merge(pieces):
    pieces.sort()
    out = []
    for lo, hi in pieces:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def in_band(values, k):
    """Mask of ``2^{-k-1} <= |values| < 2^{-k}``."""
    v = np.abs(values)
    return (v >= 2.0 ** (-k - 1)) & (v < 2.0 ** (-k))


def covered(points, intervals):
    """Mask of points lying in the union of closed ``intervals``."""
    points = np.asarray(points, dtype=float)
    mask = np.zeros(points.shape, dtype=bool)
    for lo, hi in intervals:
        mask |= (points >= lo) & (points <= hi)
    return mask


def scale_floor(sup_value):
    """Smallest scale with a possibly nonempty level set: ``ceil(-log sup) - 1``."""
    if not sup_value > 0:
        return math.inf
    return math.ceil(-math.log2(sup_value)) - 1
