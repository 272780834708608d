"""Discrete norms on grid functions.

All norms carry the cell width ``h`` except the maximum norm. Seminorms
``|u|_{k,N} = ||(-A_N)^{k/2} u||`` are evaluated spectrally, which also
covers odd ``k`` where no stencil exists.
"""
from __future__ import annotations

import numpy as np

from .grid import Grid, SpectralBasis, apply_laplacian, to_spectral


def lp_norm(grid: Grid, u, p: float = 2.0) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.n_points,):
        raise ValueError(f"expected {grid.n_points} values, got shape {u.shape}")
    if p == np.inf:
        return float(np.max(np.abs(u)))
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return float((grid.h * np.sum(np.abs(u) ** p)) ** (1.0 / p))


def l2_norms(grid: Grid, u) -> np.ndarray:
    """Batched discrete L2 norm along the last axis."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(grid.h * np.sum(u * u, axis=-1))


def inner_product(grid: Grid, u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (grid.n_points,) or v.shape != (grid.n_points,):
        raise ValueError(f"shapes {u.shape} and {v.shape} do not match grid size {grid.n_points}")
    return float(grid.h * np.dot(u, v))


def fractional_seminorm(basis: SpectralBasis, u, order: float) -> float:
    """``||(-A_N)^{order/2} u||_{l2}`` for any real ``order >= 0``."""
    if order < 0:
        raise ValueError(f"order must be nonnegative, got {order}")
    coeffs = to_spectral(basis, u)
    if order == 0:
        weights = np.ones_like(coeffs)
    else:
        weights = np.zeros_like(coeffs)
        weights[1:] = basis.eigenvalues[1:] ** order
    return float(np.sqrt(basis.grid.h * np.sum(weights * coeffs**2)))


def seminorm(basis: SpectralBasis, u, k: int) -> float:
    if k not in (1, 2, 3):
        raise ValueError(f"seminorm order must be 1, 2 or 3, got {k}")
    return fractional_seminorm(basis, u, k)


def sobolev_norm(basis: SpectralBasis, u, k: int) -> float:
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    total = lp_norm(basis.grid, u, 2) ** 2
    for i in range(1, k + 1):
        total += fractional_seminorm(basis, u, i) ** 2
    return float(np.sqrt(total))


def difference_energy(grid: Grid, u) -> float:
    """``(1/h) sum |u_{j+1} - u_j|^2``, equal to ``|u|_{1,N}^2``."""
    u = np.asarray(u, dtype=float)
    return float(np.sum(np.diff(u) ** 2) / grid.h)


# Explicit-constant embedding inequalities. Each returns (lhs, rhs); callers
# check lhs <= rhs up to rounding.


def pointwise_embedding(basis: SpectralBasis, u) -> tuple[float, float]:
    """``pi max_i u_i^2`` against ``||u||^2 + 2 pi ||u|| |u|_1``."""
    grid = basis.grid
    l2 = lp_norm(grid, u, 2)
    semi = fractional_seminorm(basis, u, 1)
    lhs = np.pi * float(np.max(np.asarray(u, dtype=float) ** 2))
    return lhs, l2**2 + 2.0 * np.pi * l2 * semi


def sup_embedding(basis: SpectralBasis, u) -> tuple[float, float]:
    """``||u||_inf^2`` against ``||u||^2 / pi + 2 ||u|| |u|_1``."""
    grid = basis.grid
    l2 = lp_norm(grid, u, 2)
    semi = fractional_seminorm(basis, u, 1)
    return lp_norm(grid, u, np.inf) ** 2, l2**2 / np.pi + 2.0 * l2 * semi


def holder_monotonicity(grid: Grid, u, p: float, q: float) -> tuple[float, float]:
    """``||u||_p`` against ``pi^{1/p - 1/q} ||u||_q`` for ``p <= q``."""
    if p > q:
        raise ValueError("need p <= q")
    inv_q = 0.0 if q == np.inf else 1.0 / q
    return lp_norm(grid, u, p), np.pi ** (1.0 / p - inv_q) * lp_norm(grid, u, q)


def product_ratio(basis: SpectralBasis, u, v, k: int) -> float:
    """``|uv|_{k,N} / (||u||_{k,N} ||v||_{k,N})``."""
    w = np.asarray(u, dtype=float) * np.asarray(v, dtype=float)
    return seminorm(basis, w, k) / (sobolev_norm(basis, u, k) * sobolev_norm(basis, v, k))


def l6_ratio(basis: SpectralBasis, u) -> float:
    """``||u||_6 / (||A_N u||^{1/6} ||u||^{5/6} + ||u||)``."""
    grid = basis.grid
    l2 = lp_norm(grid, u, 2)
    lap = lp_norm(grid, apply_laplacian(grid, u), 2)
    return lp_norm(grid, u, 6) / (lap ** (1 / 6) * l2 ** (5 / 6) + l2)
