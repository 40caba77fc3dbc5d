import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_decomp import (DyadicCell, HGridPolicy, OffspringShift, full_decomposition,
                           initial_decomposition, moment_curve, polynomial_curve,
                           secondary_decomposition, shrink_cells, torsion)
from affine_decomp.decomposition import (c_gamma, count_bound, decompose_scale,
                                         length_bound, shrink_cap, split_interval,
                                         verify_cell, verify_comparability)
from affine_decomp.levelsets import covered, in_band

GRID = 10_001


def assert_covers_band(curve, report):
    t = np.linspace(*curve.domain, GRID)
    target = in_band(torsion(curve, t), report.k_d)
    assert covered(t, [c.interval for c in report.cells])[target].all()


def test_moment_curve_identity_cell_is_whole_domain(moment2):
    report = initial_decomposition(moment2, -2)
    ident = [c for c in report.cells if c.sigma == (0, 1)]
    assert len(ident) == 1
    assert ident[0].interval == (0.0, 1.0)
    assert ident[0].k == (-1, -2)
    assert all(verify_cell(moment2, c) for c in report.cells)
    assert report.uncovered_measure == 0


def test_cubic_scale_three(cubic):
    report = initial_decomposition(cubic, 3)
    assert_covers_band(cubic, report)
    union = [c.interval for c in report.cells]
    assert covered(np.linspace(1 / 96, 1 / 48 - 1e-12, 200), union).all()
    assert report.count <= report.count_bound
    assert report.total_length <= report.length_bound
    assert all(verify_cell(cubic, c) for c in report.cells)


def test_below_start_scale_is_empty(cubic):
    cg = c_gamma(cubic)
    assert cg == -3          # sup tau = 6 lies in [4, 8)
    report = initial_decomposition(cubic, cg - 1)
    assert report.count == 0 and report.cells == []
    assert initial_decomposition(cubic, cg).count > 0


def test_quartic_two_identity_cells_per_scale(quartic):
    for k in range(0, 6):
        report = initial_decomposition(quartic, k)
        ident = [c for c in report.cells if c.sigma == (0, 1)]
        assert len(ident) == 2
        assert ident[0].interval[1] < 0 < ident[1].interval[0]
        assert_covers_band(quartic, report)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=3, max_size=4), st.integers(0, 4))
def test_initial_invariants_random_curves(phi, dk):
    curve = polynomial_curve([[0, 1], [0, 0] + phi], (0, 1), N=4)
    tau = torsion(curve, np.linspace(0, 1, GRID))
    if tau.max() == 0:
        return
    k = c_gamma(curve) + dk
    report = initial_decomposition(curve, k)
    assert_covers_band(curve, report)
    assert report.uncovered_measure == 0
    assert report.count <= report.count_bound
    assert report.total_length <= report.length_bound
    for c in report.cells:
        assert verify_cell(curve, c)


def test_count_and_length_bound_forms(cubic):
    # count bound grows like 2^{k (1/3 + 1/2)} up to the polynomial k_j sums
    r = count_bound(cubic, 8) / count_bound(cubic, 7)
    assert 2 ** (5 / 6) <= r <= 2 ** (5 / 6) * 2
    assert length_bound(cubic, 0) == pytest.approx(
        2 * (math.log2(2 * 36) + 3) ** 2)


def test_split_interval():
    assert split_interval((0.0, 1.0), 0.3) == [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75),
                                              (0.75, 1.0)]
    assert split_interval((0.2, 0.3), 0.5) == [(0.2, 0.3)]


def test_shrink_no_op_and_pieces(moment2):
    report = initial_decomposition(moment2, -2)
    out = shrink_cells(report, moment2, A=1e6)
    assert [c.interval for c in out.cells] == [c.interval for c in report.cells]
    assert all(c.stage == "shrunk" for c in out.cells)
    out = shrink_cells(report, moment2)
    for c in out.cells:
        assert c.length <= shrink_cap(moment2, c.k) * (1 + 1e-12)
    assert out.count <= out.shrunk_count_bound


def test_shrink_cap_formula_and_monotone():
    curve = moment_curve(2, N=4, cnorm=2)
    cap = shrink_cap(curve, (0, -1), A=0.1)
    want = min(0.1 ** (1 / 3) * 2 ** (-1 / 3) * 2 ** 0,
               0.1 ** (1 / 2) * 2 ** (-1) * 2 ** (1 / 2))
    assert cap == pytest.approx(want)
    caps = [shrink_cap(curve, (k1, k2), A=0.1) for k1, k2 in zip(range(-2, 8), range(-1, 9))]
    assert all(a > b for a, b in zip(caps, caps[1:]))


def test_shrink_errors(moment2):
    report = initial_decomposition(moment2, -2)
    with pytest.raises(ValueError):
        shrink_cells(report, moment2, A=0)
    tiny = report.__class__(**{**report.__dict__, "cells": [
        DyadicCell((0.0, 1.0), (0, 1), (-1, 200))]})
    with pytest.raises(ValueError, match="shrink cap below resolution"):
        shrink_cells(tiny, moment2)


def test_secondary_moment_unchanged(moment2):
    cell = DyadicCell((0.0, 1.0), (0, 1), (-1, -2), "shrunk")
    out = secondary_decomposition(cell, moment2, HGridPolicy(3, 5))
    assert len(out) == 1 and out[0].interval == (0.0, 1.0)
    assert out[0].verified and out[0].stage == "secondary"


def test_secondary_cubic_half_shift(cubic):
    report = initial_decomposition(cubic, 3)
    cell = next(c for c in report.cells if c.sigma == (0, 1))
    h = [OffspringShift((0.0, cell.length / 2))]
    out = secondary_decomposition(cell, cubic, h)
    assert all(c.verified for c in out)
    assert len(out) <= 4         # at most two rounds of bisection
    assert out[0].interval[0] == cell.interval[0]
    assert out[-1].interval[1] == cell.interval[1]
    for a, b in zip(out, out[1:]):
        assert a.interval[1] == b.interval[0]


def test_zero_shift_is_reverification(cubic):
    report = initial_decomposition(cubic, 2)
    for cell in report.cells:
        out = secondary_decomposition(cell, cubic, [OffspringShift((0.0,))])
        assert len(out) == 1 and out[0].verified


def test_secondary_flags_instead_of_raising(cubic):
    cell = DyadicCell((0.0, 1.0), (0, 1), (-1, 8))     # wrong k_2 on purpose
    out = secondary_decomposition(cell, cubic, HGridPolicy(1, 2), max_depth=2)
    assert len(out) == 4
    assert not all(c.verified for c in out)


def test_offspring_comparability_oracle(cubic):
    # (t, t^3) offspring with shifts h: L_2 = 6 * mean(t + h_j)
    ok, worst = verify_comparability(cubic, (0.25, 0.5), (0, 1), (-1, -1),
                                     [OffspringShift((0.0, 0.25))], 1 / 8, 8)
    assert ok and worst == 1.0
    ok, worst = verify_comparability(cubic, (0.25, 0.5), (0, 1), (-1, 10),
                                     [OffspringShift((0.0,))], 1 / 8, 8)
    assert not ok and worst > 1


def test_full_decomposition_moment_single_scale(moment2):
    reports = full_decomposition(moment2, (-5, 3))
    nonempty = [r.k_d for r in reports if r.count]
    assert nonempty == [-2]


def test_full_decomposition_cubic_verified_and_bounded(cubic):
    reports = full_decomposition(cubic, (0, 6), threads=1)
    for r in reports:
        assert r.stage == "secondary"
        assert not r.flags
        assert all(c.verified for c in r.cells)
        assert r.within_bounds
        assert_covers_band(cubic, r)


def test_thread_count_does_not_change_result(cubic, monkeypatch):
    one = full_decomposition(cubic, (0, 4), threads=1)
    monkeypatch.setenv("AFFINE_DECOMP_THREADS", "3")
    many = full_decomposition(cubic, (0, 4))
    assert [r.to_dict() for r in one] == [r.to_dict() for r in many]


def test_enlarging_range_keeps_cells(cubic):
    small = {r.k_d: r.to_dict() for r in full_decomposition(cubic, (1, 3), threads=1)}
    large = {r.k_d: r.to_dict() for r in full_decomposition(cubic, (0, 5), threads=1)}
    for k, rep in small.items():
        assert large[k]["cells"] == rep["cells"]


def test_report_serialisation(cubic):
    r = decompose_scale(cubic, 2)
    d = r.to_dict()
    assert d["N_k"] == len(d["cells"])
    assert set(d["cells"][0]) == {"interval", "sigma", "k", "stage", "verified"}
    assert "zero_set_note" in d
