import math
from fractions import Fraction

import numpy as np
import pytest

from invariant_pde.grid import Field, GridSpec, square_grid
from invariant_pde.stencil import (
    Stencil,
    apply_stencil,
    central_stencil,
    correlate_array,
    derivative_array,
)


def moment_residual(stencil: Stencil, h: float) -> float:
    """Independent oracle: check sum_j w_j (o_j h)^m / m! against the targets."""
    worst = 0.0
    n_conditions = stencil.deriv_order + stencil.accuracy_order
    for m in range(n_conditions):
        total = sum(
            w * (o * h) ** m / math.factorial(m)
            for o, w in zip(stencil.offsets, stencil.weights)
        )
        target = 1.0 if m == stencil.deriv_order else 0.0
        worst = max(worst, abs(total - target))
    return worst


class TestCentralStencil:
    def test_identity(self):
        s = central_stencil(0, 2, 0.3)
        assert s.offsets == (0,) and s.weights == (1.0,)

    def test_first_derivative_acc2(self):
        h = 0.25
        s = central_stencil(1, 2, h)
        assert s.offsets == (-1, 0, 1)
        assert s.weights == pytest.approx([-1 / (2 * h), 0.0, 1 / (2 * h)])

    def test_second_derivative_acc2(self):
        h = 0.5
        s = central_stencil(2, 2, h)
        assert s.weights == pytest.approx([1 / h**2, -2 / h**2, 1 / h**2])

    @pytest.mark.parametrize("deriv", [1, 2, 3, 4])
    @pytest.mark.parametrize("acc", [2, 4])
    def test_moment_conditions(self, deriv, acc):
        h = 0.37
        s = central_stencil(deriv, acc, h)
        assert moment_residual(s, h) <= 1e-12

    @pytest.mark.parametrize("deriv", [1, 2, 3, 4])
    def test_symmetry(self, deriv):
        s = central_stencil(deriv, 4, 1.0)
        w = np.array(s.weights)
        if deriv % 2 == 0:
            assert np.allclose(w, w[::-1], atol=0, rtol=0)
        else:
            assert np.allclose(w, -w[::-1], atol=0, rtol=0)

    def test_unsupported_orders(self):
        with pytest.raises(ValueError):
            central_stencil(5, 2, 1.0)
        with pytest.raises(ValueError):
            central_stencil(2, 6, 1.0)


class TestApplyStencil:
    def test_constant_field_derivative_vanishes(self):
        g = square_grid(16)
        f = Field(g, (np.full(g.shape, 3.7),))
        for deriv in (1, 2, 3):
            out = apply_stencil(f, central_stencil(deriv, 4, g.dx, axis="x"))
            assert np.max(np.abs(out.components[0])) < 1e-10

    def test_sin_derivative(self):
        g = square_grid(64)
        x, _ = g.coords()
        f = Field(g, (np.sin(x),))
        out = apply_stencil(f, central_stencil(1, 2, g.dx, axis="x"))
        err = np.max(np.abs(out.components[0] - np.cos(x)))
        assert err <= 1.0 * g.dx**2

    def test_linearity(self):
        g = GridSpec(16, 16, 0.2, 0.3)
        rng = np.random.default_rng(0)
        f = rng.standard_normal(g.shape)
        h = rng.standard_normal(g.shape)
        s = central_stencil(2, 4, g.dx, axis="y")
        a, b = 1.7, -0.4
        lhs = correlate_array(a * f + b * h, s.offsets, s.weights, 1)
        rhs = a * correlate_array(f, s.offsets, s.weights, 1) + b * correlate_array(
            h, s.offsets, s.weights, 1
        )
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


class TestConvergence:
    @pytest.mark.parametrize("deriv,acc", [(1, 2), (2, 2), (1, 4), (2, 4), (3, 2)])
    def test_order_on_sin(self, deriv, acc):
        errs = []
        for n in (16, 32, 64):
            g = square_grid(n)
            x, _ = g.coords()
            u = np.sin(x)
            exact = [np.cos(x), -np.sin(x), -np.cos(x)][deriv - 1]
            s = central_stencil(deriv, acc, g.dx, axis="x")
            out = correlate_array(u, s.offsets, s.weights, 0)
            errs.append(np.max(np.abs(out - exact)))
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        for order in orders:
            assert abs(order - acc) <= 0.5

    def test_halving_dx_quarter_error(self):
        errs = []
        for n in (32, 64):
            g = square_grid(n)
            x, _ = g.coords()
            s = central_stencil(1, 2, g.dx, axis="x")
            out = correlate_array(np.sin(x), s.offsets, s.weights, 0)
            errs.append(np.max(np.abs(out - np.cos(x))))
        ratio = errs[0] / errs[1]
        assert 3.5 <= ratio <= 4.5


class TestMixedPartials:
    def test_commute(self):
        g = GridSpec(24, 24, 0.31, 0.17)
        rng = np.random.default_rng(5)
        u = rng.standard_normal(g.shape)
        xy = derivative_array(derivative_array(u, 1, 0, g.dx, g.dy), 0, 1, g.dx, g.dy)
        yx = derivative_array(derivative_array(u, 0, 1, g.dx, g.dy), 1, 0, g.dx, g.dy)
        assert np.max(np.abs(xy - yx)) <= 1e-12 * max(1.0, np.max(np.abs(xy)))

    def test_mixed_equals_composition(self):
        g = square_grid(32)
        rng = np.random.default_rng(6)
        u = rng.standard_normal(g.shape)
        direct = derivative_array(u, 1, 1, g.dx, g.dy)
        composed = derivative_array(derivative_array(u, 1, 0, g.dx, g.dy), 0, 1, g.dx, g.dy)
        assert np.array_equal(direct, composed)
