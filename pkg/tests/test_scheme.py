import numpy as np
import pytest

from fbsch.grid import to_spectral
from fbsch.model import ModelParams, benchmark_params
from fbsch.noise import HurstPair, generate_sheet, scaled_increments, trajectory_rng
from fbsch.scheme import (DivergenceError, StepSizeWarning, TrajectoryState, evolve, run_trajectory, scheme_config,
                          step, stochastic_convolution)

from oracles import closed_linear_solution, mild_form_residual


def linear_params(sigma=1 / 3, hurst=HurstPair(0.75, 0.5), initial="0"):
    return ModelParams(0.0, 0.0, 0.0, 0.0, sigma, hurst, initial, 1.0, drift_enabled=False)


def test_single_mode_step():
    cfg = scheme_config(linear_params(sigma=0.0), 10, 8)
    e1 = cfg.basis.eigenvectors[:, 1]
    out = step(cfg, TrajectoryState(0, e1), np.zeros(8))
    assert out.step_index == 1
    np.testing.assert_allclose(out.u, np.exp(-cfg.basis.eigenvalues[1] ** 2 * cfg.tau) * e1, atol=1e-15)


def test_constant_state_is_stationary():
    p = benchmark_params(sigma=0.0, initial="0.7")
    cfg = scheme_config(p, 16, 8)
    snaps = evolve(cfg, np.full(8, 0.7), np.zeros((16, 8)), range(17))
    for u in snaps.values():
        np.testing.assert_allclose(u, 0.7, atol=1e-14)


def test_mean_mode_conservation(rng):
    cfg = scheme_config(benchmark_params(), 8, 16)
    u = rng.standard_normal(16)
    noise = rng.standard_normal(16)
    new = step(cfg, TrajectoryState(0, u), noise)
    c_old, c_new, c_noise = (to_spectral(cfg.basis, v)[0] for v in (u, new.u, noise))
    assert c_new == pytest.approx(c_old + c_noise, abs=1e-13)


def test_record_and_single_step():
    p = benchmark_params(h1=0.75, h2=0.5)
    sheet = generate_sheet(p.hurst, 1, 8, 1.0, trajectory_rng(0, 0))
    with pytest.warns(StepSizeWarning):
        cfg = scheme_config(p, 1, 8)
    u0 = p.initial_function(cfg.grid.points)
    out = run_trajectory(cfg, sheet, {0})
    np.testing.assert_array_equal(out[0], u0)
    one = step(cfg, TrajectoryState(0, u0), scaled_increments(sheet, p.sigma)[0])
    np.testing.assert_array_equal(out[1], one.u)


def test_bit_identical_runs():
    p = benchmark_params()
    cfg = scheme_config(p, 32, 16)
    sheet = generate_sheet(p.hurst, 32, 16, 1.0, trajectory_rng(9, 2))
    a = run_trajectory(cfg, sheet, range(33))
    b = run_trajectory(cfg, sheet, range(33))
    for i in range(33):
        np.testing.assert_array_equal(a[i], b[i])


def test_batched_evolve_matches_single(rng):
    p = benchmark_params()
    cfg = scheme_config(p, 16, 8)
    forcing = rng.standard_normal((3, 16, 8)) * 0.1
    u0 = p.initial_function(cfg.grid.points)
    batch = evolve(cfg, u0, forcing, [16])[16]
    for k in range(3):
        np.testing.assert_allclose(batch[k], evolve(cfg, u0, forcing[k], [16])[16], rtol=1e-13, atol=1e-14)


def test_evolve_validation():
    cfg = scheme_config(benchmark_params(), 4, 8)
    with pytest.raises(ValueError):
        evolve(cfg, np.zeros(8), np.zeros((4, 7)), [])
    with pytest.raises(ValueError):
        evolve(cfg, np.zeros(8), np.zeros((4, 8)), [5])
    sheet = generate_sheet(HurstPair(0.5, 0.5), 4, 4, 1.0, trajectory_rng(0, 0))
    with pytest.raises(ValueError):
        run_trajectory(cfg, sheet)
    with pytest.raises(ValueError):
        scheme_config(benchmark_params(), 0, 8)


def test_divergence_reports_trajectory():
    cfg = scheme_config(benchmark_params(), 4, 8)
    forcing = np.zeros((3, 4, 8))
    forcing[1, 2, 5] = np.nan
    with pytest.raises(DivergenceError) as info:
        evolve(cfg, np.zeros(8), forcing, [])
    assert info.value.step_index == 3 and info.value.trajectory == 1
    with pytest.raises(DivergenceError):
        step(cfg, TrajectoryState(0, np.full(8, np.inf)), np.zeros(8))


def test_step_size_warning():
    with pytest.warns(StepSizeWarning):
        scheme_config(benchmark_params(horizon=10.0), 1, 2)


def test_stochastic_convolution_examples():
    hurst = HurstPair(0.75, 0.5)
    cfg = scheme_config(benchmark_params(h1=0.75, h2=0.5), 16, 8)
    sheet = generate_sheet(hurst, 16, 8, 1.0, trajectory_rng(1, 0))
    zero = stochastic_convolution(cfg, sheet, 0.0, range(17))
    assert all(np.all(u == 0) for u in zero.values())
    conv = stochastic_convolution(cfg, sheet, 0.4, [16])
    lin = run_trajectory(scheme_config(linear_params(sigma=0.4, hurst=hurst), 16, 8), sheet, [16])
    np.testing.assert_array_equal(conv[16], lin[16])


def test_stochastic_convolution_mode_variance():
    m, n, sigma = 16, 8, 0.5
    hurst = HurstPair(0.5, 0.5)
    cfg = scheme_config(linear_params(sigma=sigma, hurst=hurst), m, n)
    samples = 20000
    g = np.random.default_rng(4).standard_normal((samples, m, n))
    d = np.sqrt(cfg.tau * cfg.grid.h) * g
    final = evolve(cfg, np.zeros(n), sigma * n / np.pi * d, [m])[m]
    coeffs = to_spectral(cfg.basis, final)
    # brute force: each step's white increment decays through the remaining steps
    lam = cfg.basis.eigenvalues
    expected = np.zeros(n)
    for i in range(1, m + 1):
        expected += sigma**2 * cfg.tau / cfg.grid.h * np.exp(-2 * lam**2 * cfg.tau * (m - i + 1))
    se = expected * np.sqrt(2.0 / samples)
    # the top modes are damped below transform round-off (~1e-32)
    live = expected > 1e-20
    assert live.sum() >= 5
    assert np.all(np.abs(coeffs.var(axis=0) - expected)[live] < 5 * se[live])


@pytest.mark.parametrize("n", [2, 4, 8])
@pytest.mark.parametrize("m", [2, 4, 8])
def test_mild_form_equivalence(n, m):
    p = benchmark_params(h1=0.75, h2=0.75)
    cfg = scheme_config(p, m, n)
    sheet = generate_sheet(p.hurst, m, n, 1.0, trajectory_rng(3, 100 * n + m))
    path = run_trajectory(cfg, sheet, range(m + 1))
    assert mild_form_residual(cfg, sheet, path) <= 1e-10


@pytest.mark.parametrize("realization", range(10))
def test_linear_spectral_oracle(realization):
    p = linear_params(sigma=1 / 3, hurst=HurstPair(0.75, 0.5), initial="1/3 + sqrt(3)*cos(x)/3")
    m, n = 64, 16
    sheet = generate_sheet(p.hurst, m, n, 1.0, trajectory_rng(77, realization))
    got = run_trajectory(scheme_config(p, m, n), sheet, [m])[m]
    np.testing.assert_allclose(got, closed_linear_solution(p, m, n, sheet), atol=1e-10, rtol=0)
