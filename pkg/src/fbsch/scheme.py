"""Tamed exponential Euler stepping of the finite-difference system.

One step reads

    U_{i+1} = exp(-A_N^2 tau) [U_i + tau A_N F~(U_i) + xi_{i+1}]

where ``F~`` is the tamed drift and ``xi_{i+1}`` the scaled noise increment.
Both operators act diagonally on the cosine eigenbasis, so the linear part
carries no time-stepping error.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid, SpectralBasis, build_grid, from_spectral, spectral_basis, to_spectral
from .model import ModelParams, TamedDrift, initial_grid, tame
from .noise import SheetIncrements, scaled_increments


class DivergenceError(FloatingPointError):
    def __init__(self, step_index: int, trajectory: int | None = None):
        where = f" in trajectory {trajectory}" if trajectory is not None else ""
        super().__init__(f"non-finite state at step {step_index}{where}")
        self.step_index = step_index
        self.trajectory = trajectory


class StepSizeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    m_steps: int
    grid: Grid
    basis: SpectralBasis = field(repr=False)
    tamed: TamedDrift
    decay: np.ndarray = field(repr=False)
    drift_gain: np.ndarray = field(repr=False)

    @property
    def params(self) -> ModelParams:
        return self.tamed.params

    @property
    def tau(self) -> float:
        return self.tamed.tau

    @property
    def horizon(self) -> float:
        return self.params.horizon

    def times(self) -> np.ndarray:
        return np.arange(self.m_steps + 1) * self.tau

    def with_params(self, params: ModelParams) -> "SchemeConfig":
        return replace(self, tamed=TamedDrift(params, self.tau))


def scheme_config(params: ModelParams, m_steps: int, n_points: int, taming: bool = True) -> SchemeConfig:
    if m_steps < 1:
        raise ValueError(f"need at least one time step, got {m_steps}")
    grid = build_grid(n_points)
    basis = spectral_basis(grid)
    tau = params.horizon / m_steps
    if tau**9 / grid.h > 1:
        warnings.warn(
            f"tau^9 / h = {tau**9 / grid.h:.3g} > 1; the convergence estimate assumes otherwise",
            StepSizeWarning, stacklevel=2,
        )
    lam = basis.eigenvalues
    decay = np.exp(-(lam**2) * tau)
    # spectral multiplier of tau * exp(-A_N^2 tau) A_N
    drift_gain = -lam * tau * decay
    return SchemeConfig(m_steps, grid, basis, TamedDrift(params, tau if taming else 0.0), decay, drift_gain)


@dataclass
class TrajectoryState:
    step_index: int
    u: np.ndarray


def _advance(cfg: SchemeConfig, u: np.ndarray, noise: np.ndarray) -> np.ndarray:
    coeffs = to_spectral(cfg.basis, u + noise) * cfg.decay
    if cfg.params.drift_enabled:
        coeffs += cfg.drift_gain * to_spectral(cfg.basis, tame(cfg.tamed, cfg.grid, u))
    return from_spectral(cfg.basis, coeffs)


def step(cfg: SchemeConfig, state: TrajectoryState, noise) -> TrajectoryState:
    u = np.asarray(state.u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DivergenceError(state.step_index)
    new = _advance(cfg, u, np.asarray(noise, dtype=float))
    if not np.all(np.isfinite(new)):
        raise DivergenceError(state.step_index + 1)
    return TrajectoryState(state.step_index + 1, new)


def evolve(cfg: SchemeConfig, u0, forcing, record) -> dict[int, np.ndarray]:
    """Iterate the scheme from ``u0`` with per-step forcing ``forcing[..., i, :]``.

    ``forcing`` has shape ``(..., M, N)``; leading axes are independent
    trajectories advanced together. Returns copies of the state at each step
    index in ``record`` (``M`` is always included).
    """
    forcing = np.asarray(forcing, dtype=float)
    if forcing.shape[-2:] != (cfg.m_steps, cfg.grid.n_points):
        raise ValueError(
            f"forcing shape {forcing.shape[-2:]} does not match (M, N) = ({cfg.m_steps}, {cfg.grid.n_points})"
        )
    wanted = set(int(i) for i in record) | {cfg.m_steps}
    if min(wanted) < 0 or max(wanted) > cfg.m_steps:
        raise ValueError(f"record indices must lie in [0, {cfg.m_steps}]")
    u = np.broadcast_to(np.asarray(u0, dtype=float), forcing.shape[:-2] + (cfg.grid.n_points,)).copy()
    out = {}
    if 0 in wanted:
        out[0] = u.copy()
    for i in range(cfg.m_steps):
        u = _advance(cfg, u, forcing[..., i, :])
        if not np.all(np.isfinite(u)):
            bad = None
            if u.ndim > 1:
                bad = int(np.flatnonzero(~np.all(np.isfinite(u.reshape(-1, u.shape[-1])), axis=1))[0])
            raise DivergenceError(i + 1, bad)
        if i + 1 in wanted:
            out[i + 1] = u.copy()
    return out


def _check_sheet(cfg: SchemeConfig, sheet: SheetIncrements):
    if (sheet.m_steps, sheet.n_cells) != (cfg.m_steps, cfg.grid.n_points):
        raise ValueError(
            f"sheet is ({sheet.m_steps}, {sheet.n_cells}) but scheme is ({cfg.m_steps}, {cfg.grid.n_points})"
        )


def run_trajectory(cfg: SchemeConfig, sheet: SheetIncrements, record=()) -> dict[int, np.ndarray]:
    _check_sheet(cfg, sheet)
    u0 = initial_grid(cfg.params, cfg.grid)
    return evolve(cfg, u0, scaled_increments(sheet, cfg.params.sigma), record)


def stochastic_convolution(cfg: SchemeConfig, sheet: SheetIncrements, sigma: float, record=()) -> dict[int, np.ndarray]:
    """Noise-only part of the discrete mild solution: drift off, zero initial data."""
    _check_sheet(cfg, sheet)
    linear = cfg.with_params(replace(cfg.params, drift_enabled=False, sigma=sigma))
    return evolve(linear, np.zeros(cfg.grid.n_points), scaled_increments(sheet, sigma), record)
