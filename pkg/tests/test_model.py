import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbsch.grid import build_grid
from fbsch.model import (InitialExpression, ModelParams, TamedDrift, benchmark_params, drift_vector, f_scalar,
                         initial_grid, lipschitz_constant, one_sided_constant, tame)
from fbsch.noise import HurstPair

W = HurstPair(0.5, 0.5)
finite = st.floats(-50, 50, allow_nan=False)


def cubic(a0, a1, a2, a3):
    return ModelParams(a0, a1, a2, a3, 0.0, W)


def test_f_examples():
    p = benchmark_params()
    assert f_scalar(p, 0.0) == pytest.approx(1 / 3)
    assert f_scalar(p, 1.0) == pytest.approx(2 / 3)
    assert f_scalar(cubic(1, 0, 0, 0), -2.0) == -8.0


def test_drift_vector(rng):
    p = benchmark_params()
    np.testing.assert_allclose(drift_vector(p, np.zeros(5)), np.full(5, 1 / 3))
    u = rng.standard_normal(7)
    np.testing.assert_array_equal(drift_vector(p, u), [f_scalar(p, x) for x in u])
    off = benchmark_params(drift_enabled=False)
    np.testing.assert_array_equal(drift_vector(off, u), np.zeros(7))


def test_params_validation():
    with pytest.raises(ValueError):
        cubic(0.0, 1, 1, 1)
    with pytest.raises(ValueError):
        ModelParams(1, 0, 0, 0, -1.0, W)
    with pytest.raises(ValueError):
        ModelParams(1, 0, 0, 0, 1.0, W, horizon=0.0)
    with pytest.raises(ValueError):
        ModelParams(1, 0, 0, 0, 1.0, W, initial="__import__('os')")
    # a0 is free when the drift is off
    ModelParams(0.0, 0, 0, 0, 1.0, W, drift_enabled=False)


def test_tame_examples():
    grid = build_grid(4)
    p = cubic(1, 0, 0, 0)
    u = np.cbrt(np.full(4, 3 / np.sqrt(np.pi)))  # ||u^3|| = 3
    f = drift_vector(p, u)
    assert np.sqrt(grid.h * f @ f) == pytest.approx(3.0)
    np.testing.assert_allclose(tame(TamedDrift(p, 1.0), grid, u), f / 4, rtol=1e-14)
    np.testing.assert_array_equal(tame(TamedDrift(p, 0.0), grid, u), f)
    with pytest.raises(ValueError):
        TamedDrift(p, -0.1)


def test_tame_batched(rng):
    grid = build_grid(6)
    t = TamedDrift(benchmark_params(), 0.1)
    u = rng.standard_normal((3, 6))
    out = tame(t, grid, u)
    for k in range(3):
        np.testing.assert_allclose(out[k], tame(t, grid, u[k]), rtol=1e-15)


@given(st.integers(2, 30), st.floats(1e-4, 10), st.integers(0, 2**32 - 1))
def test_tame_bound(n, tau, seed):
    grid = build_grid(n)
    p = benchmark_params()
    u = 10 * np.random.default_rng(seed).standard_normal(n)
    f = drift_vector(p, u)
    tf = tame(TamedDrift(p, tau), grid, u)
    norm = np.sqrt(grid.h * tf @ tf)
    assert norm <= min(np.sqrt(grid.h * f @ f), 1 / tau) * (1 + 1e-12)


def test_initial_examples():
    p = benchmark_params()
    fn = p.initial_function
    assert float(fn(np.pi / 2)) == pytest.approx(1 / 3, abs=1e-15)
    assert float(fn(0.0)) == pytest.approx((1 + np.sqrt(3)) / 3)
    grid = build_grid(8)
    np.testing.assert_allclose(initial_grid(p, grid), 1 / 3 + np.sqrt(3) * np.cos(grid.points) / 3)
    const = benchmark_params(initial="2.5")
    np.testing.assert_array_equal(initial_grid(const, grid), np.full(8, 2.5))


@pytest.mark.parametrize("source,x,value", [
    ("-x**2 + 2*x", 3.0, -3.0),
    ("exp(0)*pi", 1.0, np.pi),
    ("sin(x)/sqrt(4)", np.pi / 2, 0.5),
    ("+e - e", 0.0, 0.0),
])
def test_initial_expression(source, x, value):
    assert float(InitialExpression(source)(x)) == pytest.approx(value)


@pytest.mark.parametrize("bad", ["y + 1", "x.real", "open('f')", "[1, 2]", "lambda: 1", "x if x else 1", ""])
def test_initial_expression_rejects(bad):
    with pytest.raises(ValueError):
        InitialExpression(bad)


coeffs = st.tuples(st.floats(0.01, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))


@given(coeffs, finite, finite)
def test_lipschitz_constant(c, x, y):
    p = cubic(*c)
    lhs = abs(f_scalar(p, x) - f_scalar(p, y))
    rhs = lipschitz_constant(p) * (1 + x * x + y * y) * abs(x - y)
    assert lhs <= rhs * (1 + 1e-12) + 1e-9


@given(coeffs, finite, finite)
def test_one_sided_constant(c, x, y):
    p = cubic(*c)
    lhs = (y - x) * (f_scalar(p, x) - f_scalar(p, y))
    assert lhs <= one_sided_constant(p) * (x - y) ** 2 + 1e-9 * (1 + abs(x) + abs(y)) ** 4


def test_one_sided_constant_is_tight():
    p = cubic(1.0, 3.0, 1.0, 0.0)
    # -f'(x) = -3x^2 - 6x - 1 peaks at x = -1 with value 2
    assert one_sided_constant(p) == pytest.approx(2.0)
