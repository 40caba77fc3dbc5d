import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from affine_decomp.levelsets import (OscillationBudgetError, count_bound, covered,
                                     in_band, levelset_cover, scale_floor)

GRID = np.linspace(0, 1, 10_001)


def check_cover(f, k, intervals, domain=(0, 1), grid=GRID):
    """Covering, disjointness and two-sided bounds on sampled points."""
    target = in_band(f(grid), k)
    assert covered(grid, intervals)[target].all()
    for (a, b), (c, _) in zip(intervals, intervals[1:]):
        assert b < c
    for a, b in intervals:
        assert domain[0] <= a <= b <= domain[1]
        v = np.abs(f(np.linspace(a, b, 65)))
        assert v.min() >= 2.0 ** (-k - 2) and v.max() <= 2.0 ** (-k + 1)


def test_linear_example():
    def f(t):
        return 6 * t
    cover = levelset_cover(f, 3, (0, 1), holder_norm=6, alpha=1, df=lambda t: 6 + 0 * t)
    assert len(cover) == 1
    a, b = cover[0]
    assert a <= 1 / 96 and b >= 1 / 48
    check_cover(f, 3, cover)


def test_constant_example():
    cover = levelset_cover(lambda t: 2 + 0 * t, -1, (0, 1), holder_norm=1, alpha=1)
    assert cover == [(0.0, 1.0)]


def test_empty_level_set():
    assert levelset_cover(lambda t: 6 * t, -4, (0, 1), holder_norm=6, alpha=1) == []
    assert levelset_cover(lambda t: 6 * t, 2, (0.5, 0.5), holder_norm=6, alpha=1) == []


def test_preconditions():
    with pytest.raises(ValueError):
        levelset_cover(lambda t: t, 0, (0, 1), holder_norm=0, alpha=1)
    with pytest.raises(ValueError):
        levelset_cover(lambda t: t, 0, (0, 1), holder_norm=1, alpha=0)


def test_oscillation_budget_error():
    # an understated Holder norm with no derivative information cannot be refined
    # below resolution within two levels
    with pytest.raises(OscillationBudgetError) as info:
        levelset_cover(lambda t: np.sin(40 * t), 0, (0, 1), holder_norm=40, alpha=1,
                       max_depth=1, n_init=2)
    assert info.value.depth == 1 and info.value.k == 0


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=5), st.integers(0, 6))
def test_random_polynomials(coefs, dk):
    p = np.polynomial.Polynomial(coefs)
    dp = p.deriv()
    sup = float(np.abs(p(GRID)).max())
    lip = float(np.abs(dp(GRID)).max())
    if sup == 0:
        return
    k = scale_floor(sup) + dk
    norm = max(sup, lip, 1e-12)
    cover = levelset_cover(p, k, (0, 1), holder_norm=norm, alpha=1, df=dp)
    check_cover(p, k, cover)
    assert len(cover) <= count_bound(norm, 1, k)


@given(st.floats(0.2, 0.8), st.integers(0, 5))
def test_holder_only_square_root(shift, dk):
    # |t - s|^{1/2} is Holder-1/2 with constant 1: alpha = 2
    def f(t):
        return np.sqrt(np.abs(t - shift))
    k = scale_floor(float(f(GRID).max())) + dk
    cover = levelset_cover(f, k, (0, 1), holder_norm=1.0, alpha=2.0)
    check_cover(f, k, cover)
    assert len(cover) <= count_bound(1.0, 2.0, k)


def test_count_bound_formula():
    assert count_bound(1.0, 1.0, 0) == pytest.approx(4.0**6)
    assert count_bound(4.0, 0.5, 2) == pytest.approx(2 * 4.0 ** 6.5 * 2)


def test_scale_floor():
    assert scale_floor(2.0) == -2
    assert scale_floor(3.0) == -2
    assert scale_floor(4.0) == -3
    assert scale_floor(0.0) == float("inf")
