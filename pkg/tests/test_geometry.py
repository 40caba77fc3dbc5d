from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from affine_decomp import (DyadicCell, TupleSample, certify_injectivity, check_dw_lemma,
                           check_geometric_inequality, check_jacobian_identity,
                           check_sylvester, fij, fij_derivative, initial_decomposition,
                           iterated_integral, jacobian, moment_curve, polynomial_curve,
                           vandermonde)
from affine_decomp.geometry import (CertificateError, QuadratureError, dw_lemma_sides,
                                    nested_box_integral, sample_tuples, sum_map,
                                    sylvester_sides)

t_sym = sp.Symbol("t")
MOMENT2_CELL = DyadicCell((0.0, 1.0), (0, 1), (-1, -2))
MOMENT3_CELL = DyadicCell((0.0, 1.0), (0, 1, 2), (-1, -2, -4))


def test_vandermonde_examples():
    assert vandermonde((0, 1, 2)) == 2
    assert vandermonde((1, 2, 3, 4)) == 12
    assert vandermonde((0.3, 0.3, 1)) == 0
    assert np.allclose(vandermonde(np.array([[0, 1, 2], [1, 2, 3]])), [2, 2])


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=4, unique=True), st.data())
def test_vandermonde_matches_sympy_and_is_antisymmetric(pts, data):
    want = sp.Matrix([[p**i for p in pts] for i in range(len(pts))]).det()
    assert vandermonde(pts) == pytest.approx(float(want), rel=1e-9, abs=1e-12)
    i = data.draw(st.integers(0, len(pts) - 2))
    swapped = list(pts)
    swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
    assert vandermonde(swapped) == pytest.approx(-vandermonde(pts), abs=1e-15)


@given(st.lists(st.floats(0, 1), min_size=3, max_size=3, unique=True), st.data())
def test_jacobian_antisymmetric_and_ratio_invariant(pts, data):
    c = polynomial_curve([[0, 1, 1], [0, 0, 1, 1], [0, 0, 0, 1, 2]], (0, 1), N=4)
    i = data.draw(st.integers(0, 1))
    swapped = list(pts)
    swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
    J, Js = jacobian(c, pts), jacobian(c, swapped)
    assert Js == pytest.approx(-J, abs=1e-12)
    v, vs = vandermonde(pts), vandermonde(swapped)
    if abs(v) > 1e-6:
        assert Js / vs == pytest.approx(J / v, rel=1e-9)


def test_jacobian_matches_sympy():
    exprs = [t_sym + t_sym**2, t_sym**3 - t_sym]
    s1, s2 = 0.2, 0.7
    M = sp.Matrix([[sp.diff(e, t_sym).subs(t_sym, s) for s in (s1, s2)] for e in exprs])
    c = polynomial_curve([[0, 1, 1], [0, -1, 0, 1]], (0, 1), N=3)
    assert jacobian(c, (s1, s2)) == pytest.approx(float(M.det()))


@given(st.lists(st.floats(0, 1), min_size=2, max_size=3, unique=True))
def test_moment_jacobian_over_vandermonde_is_constant(pts):
    pts = sorted(pts)
    d = len(pts)
    c = moment_curve(d)
    v = vandermonde(pts)
    if abs(v) < 1e-6:
        return
    assert jacobian(c, pts) / v == pytest.approx({2: 2.0, 3: 6.0}[d], rel=1e-7)


def test_jacobian_coincident_points():
    assert jacobian(moment_curve(2), (0.4, 0.4)) == 0


def test_tuple_sample_validation():
    assert TupleSample((0.1, 0.2)).n == 2
    with pytest.raises(ValueError):
        TupleSample((0.2, 0.1))


def test_iterated_integral_moment_examples(moment2):
    assert iterated_integral(moment2, 1, (0.3,)).value == pytest.approx(2.0)
    res = iterated_integral(moment2, 2, (0.2, 0.7))
    assert res.value == pytest.approx(2 * 0.5 * 1.0)     # L_1(t1) L_1(t2) * int 2
    assert res.value == pytest.approx(jacobian(moment2, (0.2, 0.7)))
    assert iterated_integral(moment2, 2, (0.4, 0.4)).value == 0


def test_first_iterated_integral_is_top_quotient_derivative(cubic):
    # I_1 = L_{n-2} L_n / L_{n-1}^2 = f'_{n, n-1}
    t = np.linspace(0.1, 0.9, 9)
    for sigma in [(0, 1), (1, 0)]:
        a = iterated_integral(cubic, 1, t[:, None], sigma=sigma).value
        b = fij_derivative(cubic, 2, 1, t, sigma=sigma)
        assert np.allclose(a, b, rtol=1e-12)


def test_certificate_violation(cubic):
    cell = DyadicCell((0.0, 0.5), (1, 0), (0, 0))     # L_1 = 3t^2 small near 0
    with pytest.raises(CertificateError, match="cell certificate violated"):
        iterated_integral(cubic, 2, (0.01, 0.4), sigma=cell.sigma, k=cell.k)


def test_quadrature_budget_error():
    c = polynomial_curve([[0, 1], [0, 0] + [0] * 30 + [1]], (0, 1), N=3, cnorm=1e4)
    with pytest.raises(QuadratureError) as info:
        iterated_integral(c, 2, (0.05, 0.99), tol=1e-15, q_max=8)
    assert info.value.nodes == 8


@pytest.mark.parametrize("curve_name, cell", [("moment2", MOMENT2_CELL),
                                              ("moment3", MOMENT3_CELL)])
def test_jacobian_identity_moment(curve_name, cell, request):
    curve = request.getfixturevalue(curve_name)
    res = check_jacobian_identity(curve, cell, samples=100, tol=1e-6)
    assert len(res) == 100
    assert all(r.passed(1e-6) for r in res)
    if curve.d == 2:
        assert max(r.rel_err for r in res) < 1e-12


def test_jacobian_identity_cubic_cells(cubic):
    for cell in initial_decomposition(cubic, 2).cells:
        res = check_jacobian_identity(cubic, cell, samples=30, tol=1e-5)
        assert all(r.passed(1e-5) for r in res)


def test_identity_residual_shrinks_with_tolerance():
    # a non-polynomial integrand: (t, t^3) with the swap permutation
    curve = polynomial_curve([[0, 1], [0, 0, 0, 1]], (0, 1), N=4, cnorm=6)
    cell = DyadicCell((0.3, 0.9), (1, 0), (2, -1))
    loose = check_jacobian_identity(curve, cell, 10, quad_tol=1e-3)
    tight = check_jacobian_identity(curve, cell, 10, quad_tol=1e-8)
    assert max(r.rel_err for r in tight) * 4 <= max(max(r.rel_err for r in loose), 4e-15)


@pytest.mark.parametrize("d, i, j, t0", [(2, 2, 1, 0.4), (3, 3, 2, 1.0), (3, 3, 1, 0.5),
                                         (3, 2, 1, 0.7)])
def test_fij_derivative_matches_finite_difference(d, i, j, t0):
    c = moment_curve(d, domain=(0, 2))
    h = 1e-5
    fd = (fij(c, i, j, t0 + h) - fij(c, i, j, t0 - h)) / (2 * h)
    assert fij_derivative(c, i, j, t0) == pytest.approx(fd, rel=1e-6)


def test_fij_examples():
    c = moment_curve(2)
    assert fij_derivative(c, 2, 1, 0.4) == pytest.approx(2.0)
    assert fij_derivative(moment_curve(3), 3, 2, 1.0) == pytest.approx(3.0)
    assert fij(c, 2, 0, 0.5) == pytest.approx(0.25)
    with pytest.raises(ValueError, match="denominator minor vanishes"):
        fij_derivative(polynomial_curve([[0, 0, 1], [0, 1]], (-1, 1), N=3), 2, 1, 0.0)
    with pytest.raises(ValueError):
        fij_derivative(c, 1, 1, 0.5)


def test_sylvester_examples():
    assert check_sylvester([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    singular = [[0, 0, 1], [0, 0, 2], [3, 4, 5]]     # top-left 1x1 block is 0
    lhs, rhs = sylvester_sides(singular)
    assert lhs == rhs
    with pytest.raises(ValueError):
        sylvester_sides([[1]])


rational = st.fractions(min_value=-10, max_value=10, max_denominator=12)


@given(st.integers(2, 5).flatmap(
    lambda n: st.lists(st.lists(rational, min_size=n, max_size=n), min_size=n, max_size=n)))
def test_sylvester_exact_property(matrix):
    lhs, rhs = sylvester_sides(matrix)
    assert isinstance(lhs, Fraction)
    assert lhs == rhs
    # independent oracle: sympy rational determinant of the full matrix
    n = len(matrix)
    M = sp.Matrix(matrix)
    inner = M[: n - 2, : n - 2].det() if n > 2 else 1
    assert lhs == sp.Rational(inner) * M.det()


def test_dw_lemma_linear_and_quadratic():
    def g(t):
        return np.stack([np.ones_like(t), t], axis=-1)

    def dg(t):
        return np.stack([np.zeros_like(t), np.ones_like(t)], axis=-1)
    lhs, rhs, _ = dw_lemma_sides(g, dg, (0.2, 0.9))
    assert lhs == pytest.approx(0.7) and rhs == pytest.approx(0.7)

    def g3(t):
        return np.stack([np.ones_like(t), t, t**2], axis=-1)

    def dg3(t):
        return np.stack([np.zeros_like(t), np.ones_like(t), 2 * t], axis=-1)
    pts = (0.1, 0.5, 0.8)
    lhs, rhs, _ = dw_lemma_sides(g3, dg3, pts)
    assert lhs == pytest.approx(vandermonde(pts)) and rhs == pytest.approx(lhs)


def test_dw_lemma_on_offspring_moment_curve():
    from affine_decomp import offspring
    c = offspring(moment_curve(3), (0.0, 0.1, 0.2))
    res = check_dw_lemma(c, (0, 1, 2), (0.05, 0.3, 0.7))
    assert res.rel_err <= 1e-6


def test_dw_lemma_vanishing_g1():
    c = polynomial_curve([[0, 0, 1], [0, 1]], (-1, 1), N=3)
    with pytest.raises(ValueError, match="g_1 vanishes"):
        check_dw_lemma(c, (0, 1), (-0.5, 0.5))


@pytest.mark.parametrize("m", [1, 2, 3])
@given(lam=st.floats(0.1, 3.0))
def test_box_integral_of_vandermonde_is_homogeneous(m, lam):
    pts = np.array([0.1, 0.35, 0.6, 0.9][: m + 1])
    base = nested_box_integral(vandermonde, pts, 8)[0] if m else None
    scaled = nested_box_integral(vandermonde, lam * pts, 8)[0]
    assert scaled == pytest.approx(lam ** (m * (m + 1) / 2) * base, rel=1e-10)


def test_geometric_inequality_moment(moment2, moment3):
    r2 = check_geometric_inequality(moment2, MOMENT2_CELL, samples=2000)
    assert r2.inf_ratio == pytest.approx(0.5) and r2.sup_ratio == pytest.approx(0.5)
    assert r2.passed and r2.sign == 1
    r3 = check_geometric_inequality(moment3, MOMENT3_CELL, samples=2000)
    assert r3.inf_ratio == pytest.approx(6 / 16, rel=1e-6)
    assert r3.sup_ratio == pytest.approx(6 / 16, rel=1e-6)


def test_geometric_inequality_cubic_level_set_cell(cubic):
    cell = next(c for c in initial_decomposition(cubic, 3).cells if c.sigma == (0, 1))
    res = check_geometric_inequality(cubic, cell, samples=10_000)
    assert res.passed
    assert 2 ** -6 <= res.inf_ratio <= res.sup_ratio <= 2**6


def test_geometric_inequality_short_cell(moment2):
    cell = DyadicCell((0.5, 0.5), (0, 1), (-1, -2))
    with pytest.raises(ValueError, match="below tuple resolution"):
        check_geometric_inequality(moment2, cell, samples=10)


def test_injectivity_moment(moment2, moment3):
    c2 = certify_injectivity(moment2, MOMENT2_CELL, grid_density=50)
    assert c2.collisions == 0 and c2.n_grid_tuples == 50 * 49 // 2 and c2.ok
    c3 = certify_injectivity(moment3, MOMENT3_CELL, grid_density=20)
    assert c3.collisions == 0 and c3.n_grid_tuples == 1140


def test_injectivity_refused_without_geometric_pass(moment2):
    cell = DyadicCell((0.0, 1.0), (0, 1), (-1, 10))      # wrong k_2: ratio far off
    with pytest.raises(ValueError, match="certificate refused"):
        certify_injectivity(moment2, cell)


def test_injectivity_detects_sign_change():
    # (t, t^3) on [-1, 1]: J = 3(t2^2 - t1^2) changes sign
    c = polynomial_curve([[0, 1], [0, 0, 0, 1]], (-1, 1), N=4, cnorm=6)
    cell = DyadicCell((-1.0, 1.0), (0, 1), (-1, -2))
    from affine_decomp.geometry import GeometricResult
    fake = GeometricResult(1.0, 1.0, True, 1, 1, 2**-6)
    with pytest.raises(ValueError, match="sign change"):
        certify_injectivity(c, cell, geometric=fake)


def test_sum_map_collision_on_symmetric_curve():
    # (t, t^2) on [-1, 1] is injective for ordered pairs; the brute force agrees
    c = moment_curve(2, domain=(-1, 1))
    pts = np.array([[-0.5, 0.5], [-0.25, 0.25]])
    assert not np.allclose(sum_map(c, pts)[0], sum_map(c, pts)[1])


def test_sampling_reproducible():
    a = sample_tuples((0, 1), 3, 10, seed=5, index=2)
    b = sample_tuples((0, 1), 3, 10, seed=5, index=2)
    assert np.array_equal(a, b)
    assert np.all(np.diff(a, axis=-1) >= 0)
