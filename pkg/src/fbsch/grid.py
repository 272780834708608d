"""Staggered 1-D grid on (0, pi), Neumann difference operators and their eigensystem.

The discrete Laplacian ``A_N`` is only ever applied through its stencil
(:func:`apply_laplacian`) or through the closed-form cosine eigenbasis
(:class:`SpectralBasis`). Functions accept a single grid function of shape
``(N,)`` or a batch of shape ``(..., N)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Cell-centred points ``x_i = (i - 1/2) h`` with ``h = pi / N``."""

    n_points: int
    h: float
    points: np.ndarray = field(repr=False)


def build_grid(n_points: int) -> Grid:
    n_points = int(n_points)
    if n_points < 2:
        raise ValueError(f"grid needs at least 2 points, got {n_points}")
    h = np.pi / n_points
    points = (np.arange(1, n_points + 1) - 0.5) * h
    points.setflags(write=False)
    return Grid(n_points=n_points, h=h, points=points)


def _check_length(grid: Grid, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (grid.n_points,):
        raise ValueError(
            f"grid function has trailing length {u.shape[-1:] or 'scalar'}, "
            f"expected {grid.n_points}"
        )
    return u


def apply_laplacian(grid: Grid, u) -> np.ndarray:
    """Neumann second difference, i.e. ``A_N u``."""
    u = _check_length(grid, u)
    out = np.empty_like(u)
    out[..., 1:-1] = u[..., :-2] - 2.0 * u[..., 1:-1] + u[..., 2:]
    out[..., 0] = u[..., 1] - u[..., 0]
    out[..., -1] = u[..., -2] - u[..., -1]
    return out / grid.h**2


def apply_bilaplacian(grid: Grid, u) -> np.ndarray:
    return apply_laplacian(grid, apply_laplacian(grid, u))


def laplacian_matrix(grid: Grid) -> np.ndarray:
    """Dense ``A_N``. Only meant for tests and small-N oracles."""
    return apply_laplacian(grid, np.eye(grid.n_points))


def eigenvalue(n_points: int, index: int) -> float:
    """``lambda_{N,j} = 4 N^2 sin^2(j pi / 2N) / pi^2``, the j-th eigenvalue of ``-A_N``."""
    if not 0 <= index < n_points:
        raise IndexError(f"eigen index {index} outside [0, {n_points - 1}]")
    if index == 0:
        return 0.0
    return 4.0 * n_points**2 * np.sin(index * np.pi / (2 * n_points)) ** 2 / np.pi**2


def eigenvalues(n_points: int) -> np.ndarray:
    j = np.arange(n_points)
    lam = 4.0 * n_points**2 * np.sin(j * np.pi / (2 * n_points)) ** 2 / np.pi**2
    lam[0] = 0.0
    return lam


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of ``-A_N``; column ``j`` of ``eigenvectors`` is ``e_j``.

    ``e_j(k) = sqrt(pi/N) phi_j(x_k)`` with ``phi_0 = 1/sqrt(pi)`` and
    ``phi_j = sqrt(2/pi) cos(j x)``.
    """

    grid: Grid
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def n_points(self) -> int:
        return self.grid.n_points


def spectral_basis(grid: Grid) -> SpectralBasis:
    n = grid.n_points
    # j * x_k = j (2k - 1) pi / (2N); reduce the integer part mod 4N so the
    # cosine argument stays in [0, 2 pi) and carries no amplified rounding
    phase = np.outer(2 * np.arange(1, n + 1) - 1, np.arange(n)) % (4 * n)
    vecs = np.sqrt(2.0 / n) * np.cos(phase * (np.pi / (2 * n)))
    vecs[:, 0] = np.sqrt(1.0 / n)
    lam = eigenvalues(n)
    vecs.setflags(write=False)
    lam.setflags(write=False)
    return SpectralBasis(grid=grid, eigenvalues=lam, eigenvectors=vecs)


# Batched transforms go through a stacked matmul of single rows. BLAS then
# runs the same kernel on every row, so a trajectory's result does not depend
# on how many others share its batch or where it sits in it.


def rowwise_matmul(u: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """``u @ mat`` computed independently for each row of a batch."""
    if u.ndim == 1:
        return u @ mat
    return (u[..., None, :] @ mat)[..., 0, :]


def to_spectral(basis: SpectralBasis, u) -> np.ndarray:
    """Euclidean coefficients ``<u, e_j>``."""
    u = _check_length(basis.grid, u)
    return rowwise_matmul(u, basis.eigenvectors)


def from_spectral(basis: SpectralBasis, coeffs) -> np.ndarray:
    coeffs = _check_length(basis.grid, coeffs)
    return rowwise_matmul(coeffs, basis.eigenvectors.T)


def power_weights(basis: SpectralBasis, gamma: float) -> np.ndarray:
    """Spectral multipliers of ``(-A_N)^gamma`` with ``0^0 = 1`` on the zero mode."""
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if gamma == 0:
        return np.ones(basis.n_points)
    w = np.zeros(basis.n_points)
    w[1:] = basis.eigenvalues[1:] ** gamma
    return w


def semigroup_weights(basis: SpectralBasis, t: float, gamma: float = 0.0) -> np.ndarray:
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return power_weights(basis, gamma) * np.exp(-(basis.eigenvalues**2) * t)


def semigroup_apply(basis: SpectralBasis, t: float, gamma: float, u) -> np.ndarray:
    """Apply ``(-A_N)^gamma exp(-A_N^2 t)`` exactly through the eigenbasis."""
    coeffs = to_spectral(basis, u)
    return from_spectral(basis, coeffs * semigroup_weights(basis, t, gamma))


def fractional_power_apply(basis: SpectralBasis, gamma: float, u) -> np.ndarray:
    return semigroup_apply(basis, 0.0, gamma, u)
