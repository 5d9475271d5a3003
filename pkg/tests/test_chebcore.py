"""Chebyshev series: transforms, evaluation, adaptive construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import cheb_series, direct_vals_to_coeffs

from spectra_pde import (
    Cheb1,
    Cheb2,
    DomainError,
    EmptyInputError,
    Interval,
    UnresolvedError,
    chebpts,
    clenshaw_eval,
    coeffs_to_vals,
    coeffs_to_vals2,
    eval2,
    interp1_adaptive,
    interp2_adaptive,
    vals_to_coeffs,
    vals_to_coeffs2,
)
from spectra_pde.chebcore import tail_resolved, tail_window, trim_coeffs

DENSE = np.linspace(-1, 1, 1000)


class TestTransforms:
    def test_x_squared(self):
        f = vals_to_coeffs(chebpts(3) ** 2)
        np.testing.assert_allclose(f.coeffs, [0.5, 0, 0.5], atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 5, 17, 63, 64, 65, 200])
    def test_matches_direct_inverse(self, n):
        rng = np.random.default_rng(n)
        v = rng.standard_normal(n)
        np.testing.assert_allclose(vals_to_coeffs(v).coeffs, direct_vals_to_coeffs(v), atol=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 512), seed=st.integers(0, 2**32 - 1), cplx=st.booleans())
    def test_round_trip(self, n, seed, cplx):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(n) + (1j * rng.standard_normal(n) if cplx else 0)
        back = vals_to_coeffs(coeffs_to_vals(Cheb1(c))).coeffs
        assert np.max(np.abs(back - c)) <= 1e-13 * np.max(np.abs(c))

    def test_values_are_at_chebpts(self):
        rng = np.random.default_rng(0)
        c = rng.standard_normal(12)
        np.testing.assert_allclose(coeffs_to_vals(Cheb1(c)), cheb_series(c, chebpts(12)), atol=1e-13)

    def test_padding_and_truncation(self):
        f = Cheb1([1.0, 2.0, 3.0])
        assert coeffs_to_vals(f, 9).size == 9
        with pytest.raises(ValueError):
            coeffs_to_vals(f, 2)
        assert coeffs_to_vals(f, 2, truncate=True).size == 2

    def test_2d_round_trip(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((7, 11))
        np.testing.assert_allclose(vals_to_coeffs2(coeffs_to_vals2(X)), X, atol=1e-13)

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            vals_to_coeffs([])
        with pytest.raises(EmptyInputError):
            Cheb1([])

    def test_chebpts_symmetric_and_mapped(self):
        p = chebpts(9)
        np.testing.assert_array_equal(p, -p[::-1])
        q = chebpts(5, Interval(0, 2))
        np.testing.assert_allclose(q, [2, 1 + np.sqrt(0.5), 1, 1 - np.sqrt(0.5), 0], atol=1e-15)


class TestClenshaw:
    @pytest.mark.parametrize("k", [0, 1, 2, 7, 50, 100])
    def test_unit_vector_is_cosine(self, k):
        x = np.linspace(-1, 1, 101)
        e = np.zeros(k + 1)
        e[k] = 1
        np.testing.assert_allclose(clenshaw_eval(Cheb1(e), x), np.cos(k * np.arccos(x)), atol=1e-13)

    def test_interval_map(self):
        f = Cheb1([0.0, 1.0], Interval(2, 4))  # T_1 of (x-3)
        assert clenshaw_eval(f, 3.5) == pytest.approx(0.5)

    def test_scalar_returns_scalar(self):
        assert isinstance(clenshaw_eval(Cheb1([1.0, 1.0]), 0.2), float)

    def test_out_of_domain(self):
        with pytest.raises(DomainError):
            clenshaw_eval(Cheb1([1.0]), 1.5)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 60))
    def test_against_numpy(self, seed, n):
        c = np.random.default_rng(seed).standard_normal(n)
        np.testing.assert_allclose(clenshaw_eval(Cheb1(c), DENSE), cheb_series(c, DENSE), atol=1e-12)


class TestTail:
    @pytest.mark.parametrize("n,w", [(1, 1), (2, 2), (3, 3), (64, 3), (97, 4), (1025, 33)])
    def test_window(self, n, w):
        assert tail_window(n) == w

    def test_resolved(self):
        assert tail_resolved([1, 0.5, 0, 0, 0])
        assert not tail_resolved([1, 0.5, 1e-3, 0, 0])

    def test_trim_keeps_one(self):
        assert trim_coeffs(np.zeros(5)).size == 1
        np.testing.assert_array_equal(trim_coeffs([1.0, 2.0, 1e-20, 0.0]), [1.0, 2.0])


class TestInterp1:
    def test_sin(self):
        f = interp1_adaptive(np.sin)
        assert f.degree <= 20
        assert np.max(np.abs(f.coeffs[0::2])) < 1e-15  # odd function
        assert np.max(np.abs(f(DENSE) - np.sin(DENSE))) <= 1e-14

    def test_runge(self):
        g = lambda x: 1 / (1 + 25 * x**2)
        f = interp1_adaptive(g)
        assert np.max(np.abs(f(DENSE) - g(DENSE))) <= 1e-13

    def test_affine_invariance(self):
        iv = Interval(2.0, 5.0)
        g = lambda x: np.exp(np.sin(x))
        f = interp1_adaptive(g, iv)
        h = interp1_adaptive(lambda t: g(iv.from_unit(t)))
        np.testing.assert_allclose(f.coeffs, h.coeffs, atol=1e-13)

    def test_complex(self):
        f = interp1_adaptive(lambda x: np.exp(1j * x))
        assert np.max(np.abs(f(DENSE) - np.exp(1j * DENSE))) < 1e-14

    def test_cap(self):
        with pytest.raises(UnresolvedError):
            interp1_adaptive(np.abs, max_degree=64)


class TestBivariate:
    def test_xy(self):
        S = interp2_adaptive(lambda x, y: x * y)
        assert S.shape == (2, 2)
        np.testing.assert_allclose(S.X, [[0, 0], [0, 1]], atol=1e-15)

    def test_one(self):
        S = interp2_adaptive(lambda x, y: 1.0)
        np.testing.assert_allclose(S.X, [[1.0]])

    def test_cos10xy(self):
        f = lambda x, y: np.cos(10 * x * y)
        S = interp2_adaptive(f)
        g = np.linspace(-1, 1, 101)
        assert np.max(np.abs(S.grid(g, g) - f(g[None, :], g[:, None]))) <= 1e-12
        assert eval2(S, 0.3, 0.7) == pytest.approx(np.cos(2.1), abs=1e-12)

    def test_eval2_xy(self):
        S = Cheb2(np.array([[0, 0], [0, 1.0]]))
        assert eval2(S, 0.5, -0.25) == pytest.approx(-0.125)
        assert eval2(Cheb2(np.array([[1.0]])), 0.9, -0.3) == 1

    def test_eval2_index_convention(self):
        # X[i, j] multiplies T_i(y) T_j(x)
        X = np.zeros((3, 2))
        X[2, 1] = 1
        x, y = 0.3, -0.6
        assert eval2(Cheb2(X), x, y) == pytest.approx(x * (2 * y * y - 1))

    def test_eval2_domain(self):
        S = Cheb2(np.ones((1, 1)), Interval(0, 1), Interval(0, 1))
        with pytest.raises(DomainError):
            eval2(S, 0.5, 1.5)

    def test_grid_matches_eval2(self):
        rng = np.random.default_rng(3)
        S = Cheb2(rng.standard_normal((5, 6)), Interval(0, 2), Interval(-3, 1))
        xs, ys = np.linspace(0, 2, 7), np.linspace(-3, 1, 4)
        G = S.grid(xs, ys)
        P = eval2(S, xs[None, :], ys[:, None])
        np.testing.assert_allclose(G, P, atol=1e-13)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_bilinear(self, seed, a, b):
        rng = np.random.default_rng(seed)
        X, Y = rng.standard_normal((2, 6, 4))
        x, y = rng.uniform(-1, 1, 2)
        lhs = eval2(Cheb2(a * X + b * Y), x, y)
        rhs = a * eval2(Cheb2(X), x, y) + b * eval2(Cheb2(Y), x, y)
        assert abs(lhs - rhs) <= 1e-13 * (1 + abs(a) + abs(b)) * (np.abs(X).sum() + np.abs(Y).sum())
