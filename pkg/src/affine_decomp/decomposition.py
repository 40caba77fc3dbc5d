"""Dyadic decompositions of the parameter interval by torsion and minor sizes.

Three stages run per scale ``k_d``:

* ``initial_decomposition`` nests level-set covers of ``L_{sigma,d}``, then
  ``L_{sigma,d-1}``, ..., ``L_{sigma,1}`` for every permutation ``sigma``;
* ``shrink_cells`` cuts cells down to the length cap that makes the Taylor
  remainder of the minors negligible;
* ``secondary_decomposition`` bisects until every minor of every offspring
  curve on a finite shift grid stays comparable to ``2^{-k_j}``.

The universal quantifier over offspring shifts is replaced by a finite grid,
so "verified" always means verified on that grid at sampled points.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement

import numpy as np

from ._linalg import leading_minors
from .curves import OffspringShift
from .levelsets import covered, in_band, levelset_cover, scale_floor
from .minors import all_permutations, exponent_bounds, minor, minor_derivative, torsion

STAGES = ("initial", "shrunk", "secondary")
DEFAULT_SHRINK_A = 2.0**-6
MIN_CELL_LENGTH = 1e-10
COVERAGE_GRID = 10_001


@dataclass(frozen=True)
class DyadicCell:
    """An interval on which ``|L_{sigma,j}|`` is comparable to ``2^{-k_j}``.

    ``k`` lists ``(k_1, ..., k_d)``.
    """

    interval: tuple
    sigma: tuple
    k: tuple
    stage: str = "initial"
    verified: bool = True

    @property
    def length(self):
        return self.interval[1] - self.interval[0]

    @property
    def k_d(self):
        return self.k[-1]

    def to_dict(self):
        return {"interval": list(self.interval), "sigma": list(self.sigma),
                "k": list(self.k), "stage": self.stage, "verified": self.verified}


@dataclass
class DecompositionReport:
    """Cells at one scale ``k_d`` plus the counting and covering bookkeeping."""

    k_d: int
    stage: str
    cells: list
    count_bound: float
    total_length: float
    length_bound: float
    uncovered_measure: float
    dropped_measure: float = 0.0
    c_gamma: float = 0.0
    initial_count: int = 0
    shrunk_count_bound: float = math.inf
    max_secondary_split: int = 1
    zero_set_note: str = ("points with vanishing torsion are excluded by "
                          "construction; they lie in no dyadic band")
    norms_used: dict = field(default_factory=lambda: {
        "A_j, k_j range": "cnorm_d", "B_j count constants, shrink cap": "cnorm",
        "offspring": "parent cnorm (shift averaging does not increase sup norms)"})
    flags: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.cells)

    @property
    def within_bounds(self):
        bound = self.count_bound if self.stage == "initial" else \
            self.shrunk_count_bound * self.max_secondary_split
        return (self.count <= bound and self.total_length <= self.length_bound
                * (1 + 1e-12))

    @property
    def ok(self):
        return self.within_bounds and not self.flags and self.uncovered_measure == 0

    def to_dict(self):
        return {
            "k_d": self.k_d, "stage": self.stage, "N_k": self.count,
            "initial_count": self.initial_count,
            "count_bound": self.count_bound,
            "shrunk_count_bound": self.shrunk_count_bound,
            "max_secondary_split": self.max_secondary_split,
            "total_length": self.total_length, "length_bound": self.length_bound,
            "uncovered_measure": self.uncovered_measure,
            "dropped_measure": self.dropped_measure, "c_gamma": self.c_gamma,
            "zero_set_note": self.zero_set_note, "norms_used": dict(self.norms_used),
            "flags": list(self.flags), "within_bounds": self.within_bounds,
            "cells": [c.to_dict() for c in self.cells],
        }


def c_gamma(curve, grid=COVERAGE_GRID):
    """Start scale ``ceil(-log sup_grid tau) - 1``."""
    t = np.linspace(*curve.domain, grid)
    return scale_floor(float(torsion(curve, t).max()))


def k_range(curve, j, k_d):
    """Inclusive range of ``k_j`` allowed at scale ``k_d``.

    The lemma's ``A_j <= k_j <= k_d + A_j + log(d! c^d)`` shifted by one at
    each end for the half-open dyadic convention.
    """
    A, upper = exponent_bounds(j, curve.d, curve.cnorm_d, k_d)
    return math.ceil(A) - 1, math.ceil(upper)


def minor_holder_norm(curve, j):
    """Holder constant of ``L_{sigma,j}`` with exponent ``min(1, N - j)``.

    Each of the ``j!`` products has ``j`` entries bounded by ``cnorm``, each
    Holder with constant ``cnorm max(1, |I|)``.
    """
    beta = min(1.0, curve.N - j)
    stretch = max(1.0, curve.length) ** (1.0 - beta)
    return j * math.factorial(j) * curve.cnorm**j * stretch


def count_bound(curve, k_d):
    """Self-computed initial-stage bound on the number of cells at scale ``k_d``.

    ``d! B_d 2^{k_d/(N-d)} prod_{j<d} sum_{k_j} B_j 2^{k_j/(N-j)}`` with
    ``B_j = ||gamma||_{C^N}^{1/(N-j)} 4^{1/(N-j) + N - j + 4}``; of the form
    ``C 2^{k_d sum_j 1/(N-j)}``.
    """
    d, N, c = curve.d, curve.N, curve.cnorm

    def B(j):
        return c ** (1.0 / (N - j)) * 4.0 ** (1.0 / (N - j) + N - j + 4)
    total = math.factorial(d) * B(d) * 2.0 ** (k_d / (N - d))
    for j in range(1, d):
        lo, hi = k_range(curve, j, k_d)
        total *= sum(B(j) * 2.0 ** (kj / (N - j)) for kj in range(lo, hi + 1))
    return total


def length_offset(curve):
    """``C_gamma`` in the length bound: ``log(d! c_d^d) + 3``."""
    return math.log2(math.factorial(curve.d) * curve.cnorm_d**curve.d) + 3.0


def length_bound(curve, k_d):
    """``d! |I| (k_d + C_gamma)^d``, at least ``d! |I|``."""
    base = max(1.0, k_d + length_offset(curve))
    return math.factorial(curve.d) * curve.length * base**curve.d


def shrink_cap(curve, k, A=DEFAULT_SHRINK_A):
    """``min_j A^{1/(N-j)} cnorm^{-j/(N-j)} 2^{-k_j/(N-j)}``."""
    N, c = curve.N, curve.cnorm
    caps = [A ** (1.0 / (N - j)) * c ** (-j / (N - j)) * 2.0 ** (-kj / (N - j))
            for j, kj in enumerate(k, start=1)]
    return min(caps)


def _levelset_funcs(curve, sigma, j):
    rows = sigma[:j]

    def f(x):
        return minor(curve, sigma, j, x)
    df = None
    if curve.max_order >= j + 1:
        def df(x):
            return minor_derivative(curve, rows, x)
    return f, df


def _empty_report(curve, k_d, cg, stage="initial"):
    return DecompositionReport(
        k_d=k_d, stage=stage, cells=[], count_bound=count_bound(curve, k_d),
        total_length=0.0, length_bound=length_bound(curve, k_d),
        uncovered_measure=0.0, c_gamma=cg)


def _coverage_gap(curve, k_d, cells, grid=COVERAGE_GRID):
    t = np.linspace(*curve.domain, grid)
    target = in_band(torsion(curve, t), k_d)
    intervals = sorted({c.interval for c in cells})
    missed = target & ~covered(t, intervals)
    return float(missed.sum()) * curve.length / (grid - 1), t[missed]


def _sort_key(perm_index):
    return lambda c: (c.interval[0], perm_index[c.sigma], c.k, c.interval[1])


def initial_decomposition(curve, k_d, n_init=64, cg=None):
    """Nested level-set covers for every permutation at scale ``k_d``.

    Scales below the start scale give an empty report.
    """
    d = curve.d
    cg = c_gamma(curve) if cg is None else cg
    if k_d < cg:
        return _empty_report(curve, k_d, cg)
    perms = all_permutations(d)
    perm_index = {p: i for i, p in enumerate(perms)}
    beta_alpha = {j: 1.0 / (curve.N - j) for j in range(1, d + 1)}
    f_top, df_top = _levelset_funcs(curve, perms[0], d)
    top = levelset_cover(f_top, k_d, curve.domain, minor_holder_norm(curve, d),
                         beta_alpha[d], df=df_top, n_init=n_init)
    cells, dropped = [], 0.0
    for sigma in perms:
        parents = [(iv, (k_d,)) for iv in top]
        for j in range(d - 1, 0, -1):
            f, df = _levelset_funcs(curve, sigma, j)
            holder = minor_holder_norm(curve, j)
            lo, hi = k_range(curve, j, k_d)
            children = []
            for iv, ks in parents:
                for kj in range(lo, hi + 1):
                    for sub in levelset_cover(f, kj, iv, holder, beta_alpha[j],
                                              df=df, n_init=n_init):
                        children.append((sub, (kj,) + ks))
            parents = children
        for iv, ks in parents:
            if iv[1] - iv[0] < MIN_CELL_LENGTH:
                dropped += iv[1] - iv[0]
                continue
            cells.append(DyadicCell(iv, sigma, ks, "initial"))
    cells.sort(key=_sort_key(perm_index))
    gap, _ = _coverage_gap(curve, k_d, cells)
    report = DecompositionReport(
        k_d=k_d, stage="initial", cells=cells, count_bound=count_bound(curve, k_d),
        total_length=float(sum(c.length for c in cells)),
        length_bound=length_bound(curve, k_d), uncovered_measure=gap,
        dropped_measure=dropped, c_gamma=cg, initial_count=len(cells))
    if gap > 0:
        report.flags.append(f"uncovered level-set measure {gap:.3g}")
    if report.count > report.count_bound:
        report.flags.append("cell count exceeds count_bound")
    if report.total_length > report.length_bound * (1 + 1e-12):
        report.flags.append("total length exceeds length_bound")
    return report


def split_interval(interval, cap):
    """Equal pieces of length at most ``cap``; unchanged when already short."""
    lo, hi = interval
    n = max(1, math.ceil((hi - lo) / cap))
    if n == 1:
        return [(lo, hi)]
    edges = np.linspace(lo, hi, n + 1)
    edges[0], edges[-1] = lo, hi
    return [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]


def shrink_cells(report, curve, A=DEFAULT_SHRINK_A):
    """Split every cell into equal pieces no longer than its shrink cap.

    Raises
    ------
    ValueError
        If a cap falls below 1e-12.
    """
    if not A > 0:
        raise ValueError("shrink constant A must be positive")
    cells = []
    for cell in report.cells:
        cap = shrink_cap(curve, cell.k, A)
        if cap < 1e-12:
            raise ValueError("shrink cap below resolution")
        for iv in split_interval(cell.interval, cap):
            cells.append(replace(cell, interval=iv, stage="shrunk"))
    out = replace(report, stage="shrunk", cells=cells, flags=list(report.flags))
    out.shrunk_count_bound = shrunk_count_bound(curve, report.k_d, A,
                                                report.count_bound,
                                                report.length_bound)
    return out


def shrunk_count_bound(curve, k_d, A, initial_bound, total_length_bound):
    """``initial_bound + length_bound / min cap`` over the allowed ``k_j``.

    A cell of length ``l`` becomes ``ceil(l / cap) <= 1 + l / cap`` pieces.
    """
    ks = [k_range(curve, j, k_d)[1] for j in range(1, curve.d)] + [k_d]
    return initial_bound + total_length_bound / shrink_cap(curve, ks, A)


@dataclass(frozen=True)
class HGridPolicy:
    """Finite stand-in for all offspring shifts of an interval.

    Shifts take values on ``grid_points`` equally spaced nodes of
    ``[0, length]``, with ``h_1 = 0`` (a common translation of all shifts only
    translates the offspring domain), ``m = 1..m_max``.
    """

    m_max: int = 3
    grid_points: int = 5

    def shifts(self, length):
        nodes = np.linspace(0.0, length, self.grid_points)
        out = []
        for m in range(1, self.m_max + 1):
            for tail in combinations_with_replacement(nodes.tolist(), m - 1):
                out.append(OffspringShift((0.0,) + tuple(tail)))
        return out


def offspring_minors(curve, sigma, shift, t):
    """``L_{sigma,0..d}`` of the offspring curve ``gamma_h`` at points ``t``."""
    t = np.asarray(t, dtype=float)
    acc = 0.0
    for h in shift.h:
        acc = acc + curve.derivative_matrix(t + h, rows=sigma)
    return leading_minors(acc / shift.m, curve.d)


def verify_comparability(curve, interval, sigma, k, shifts, lower=1 / 8,
                         upper=8.0, n_samples=64):
    """Check ``lower 2^{-k_j} <= |L_j^{gamma_h}| <= upper 2^{-k_j}`` on samples.

    Returns ``(ok, worst)`` where ``worst`` is the largest violation factor
    (1.0 when everything passes).
    """
    scale = 2.0 ** (-np.asarray(k, dtype=float))
    worst = 1.0
    for shift in shifts:
        lo, hi = shift.domain(interval)
        if hi < lo:
            continue
        t = np.linspace(lo, hi, n_samples + 2)
        L = np.abs(offspring_minors(curve, sigma, shift, t)[..., 1:]) / scale
        with np.errstate(divide="ignore"):
            low = np.where(L > 0, lower / L, np.inf).max()
        high = L.max() / upper
        worst = max(worst, float(low), float(high))
    return worst <= 1.0, worst


def secondary_decomposition(cell, curve, hgrid=None, lower=1 / 8, upper=8.0,
                            max_depth=12, n_samples=64):
    """Bisect ``cell`` until offspring minors are comparable on every piece.

    Parameters
    ----------
    hgrid : HGridPolicy or sequence of OffspringShift
        A policy is re-applied to every piece's own length; an explicit list
        is used as given (shifts longer than a piece are vacuous there).

    Returns
    -------
    list of DyadicCell
        A partition of ``cell.interval`` at stage ``secondary``. Pieces still
        failing at ``max_depth`` are returned with ``verified=False``.
    """
    hgrid = HGridPolicy() if hgrid is None else hgrid

    def shifts_for(iv):
        if isinstance(hgrid, HGridPolicy):
            return hgrid.shifts(iv[1] - iv[0])
        return [h if isinstance(h, OffspringShift) else OffspringShift(tuple(h))
                for h in hgrid]

    out = []
    stack = [(cell.interval, 0)]
    while stack:
        iv, depth = stack.pop()
        ok, _ = verify_comparability(curve, iv, cell.sigma, cell.k, shifts_for(iv),
                                     lower, upper, n_samples)
        if ok or depth >= max_depth:
            out.append(replace(cell, interval=iv, stage="secondary", verified=ok))
            continue
        mid = 0.5 * (iv[0] + iv[1])
        stack.append(((mid, iv[1]), depth + 1))
        stack.append(((iv[0], mid), depth + 1))
    out.sort(key=lambda c: c.interval[0])
    return out


def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("AFFINE_DECOMP_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def decompose_scale(curve, k_d, A=DEFAULT_SHRINK_A, hgrid=None, cg=None):
    """All three stages at one scale; returns the secondary-stage report."""
    initial = initial_decomposition(curve, k_d, cg=cg)
    shrunk = shrink_cells(initial, curve, A)
    perm_index = {p: i for i, p in enumerate(all_permutations(curve.d))}
    cells, split_max, failed = [], 1, 0
    for c in shrunk.cells:
        pieces = secondary_decomposition(c, curve, hgrid)
        split_max = max(split_max, len(pieces))
        failed += sum(not p.verified for p in pieces)
        cells.extend(pieces)
    cells.sort(key=_sort_key(perm_index))
    report = replace(shrunk, stage="secondary", cells=cells,
                     flags=list(shrunk.flags), max_secondary_split=split_max)
    if failed:
        report.flags.append(f"secondary verification failed on {failed} cells")
    return report


def full_decomposition(curve, k_range_, A=DEFAULT_SHRINK_A, hgrid=None,
                       threads=None):
    """Per-scale secondary reports for every ``k_d`` in ``k_range_``.

    ``k_range_`` is an inclusive ``(k_min, k_max)`` pair or an iterable of
    scales. Scales run in a thread pool (size from ``threads``, else the
    ``AFFINE_DECOMP_THREADS`` environment variable); output order is by scale.
    """
    if isinstance(k_range_, tuple) and len(k_range_) == 2:
        scales = list(range(int(k_range_[0]), int(k_range_[1]) + 1))
    else:
        scales = [int(k) for k in k_range_]
    cg = c_gamma(curve)
    hgrid = HGridPolicy() if hgrid is None else hgrid
    n = _threads(threads)
    if n == 1 or len(scales) == 1:
        return [decompose_scale(curve, k, A, hgrid, cg) for k in scales]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda k: decompose_scale(curve, k, A, hgrid, cg),
                             scales))


def summarize(reports):
    """Global summary rows, one per scale."""
    rows = []
    for r in reports:
        rows.append({"k_d": r.k_d, "N_k": r.count, "initial_count": r.initial_count,
                     "count_bound": r.count_bound,
                     "shrunk_count_bound": r.shrunk_count_bound,
                     "total_length": r.total_length, "length_bound": r.length_bound,
                     "uncovered_measure": r.uncovered_measure,
                     "within_bounds": r.within_bounds, "flags": len(r.flags)})
    return rows


def verify_cell(curve, cell, n_samples=64, lower=0.25, upper=2.0):
    """Check ``lower 2^{-k_j} <= |L_{sigma,j}| <= upper 2^{-k_j}`` on a grid.

    The defaults are the initial-stage band ``[2^{-k-2}, 2^{-k+1}]``.
    """
    ok, _ = verify_comparability(curve, cell.interval, cell.sigma, cell.k,
                                 [OffspringShift((0.0,))], lower, upper, n_samples)
    return ok
