"""Fractional Brownian sheet increments on the time-space cell grid.

The stored primitive is the rectangle increment

    d[i, k] = B(t_i, y_k) - B(t_i, y_{k-1}) - B(t_{i-1}, y_k) + B(t_{i-1}, y_{k-1})

with ``t_i = i tau`` and ``y_k = k h``. Its covariance is separable,
``Cov(d[i, k], d[j, l]) = R1[i, j] R2[k, l]``, where ``R1`` and ``R2`` are
fractional Gaussian noise covariances in time and space. Sheets are sampled
exactly as ``L1 G L2^T`` from the two Cholesky factors.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack

log = logging.getLogger(__name__)


class CholeskyError(np.linalg.LinAlgError):
    def __init__(self, pivot: int, size: int):
        super().__init__(f"covariance of size {size} is not positive definite (failed at pivot {pivot})")
        self.pivot = pivot
        self.size = size


@dataclass(frozen=True)
class HurstPair:
    h1: float
    h2: float

    def __post_init__(self):
        for name, value in (("h1", self.h1), ("h2", self.h2)):
            if not 0.5 <= float(value) < 1.0:
                raise ValueError(f"Hurst parameter {name}={value} outside [0.5, 1)")
        object.__setattr__(self, "h1", float(self.h1))
        object.__setattr__(self, "h2", float(self.h2))


def _increment_covariance(hurst: float, step: float, i: int, j: int) -> float:
    if i < 1 or j < 1:
        raise ValueError(f"increment indices start at 1, got ({i}, {j})")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    two_h = 2.0 * hurst

    def pw(a, b):
        return abs((a - b) * step) ** two_h

    return 0.5 * (pw(i, j - 1) + pw(i - 1, j) - pw(i, j) - pw(i - 1, j - 1))


def increment_covariance_time(h1: float, tau: float, i: int, j: int) -> float:
    """Covariance of the i-th and j-th temporal fBm increments of width ``tau``."""
    return _increment_covariance(h1, tau, i, j)


def increment_covariance_space(h2: float, h: float, k: int, l: int) -> float:
    return _increment_covariance(h2, h, k, l)


def increment_covariance_matrix(hurst: float, step: float, n: int) -> np.ndarray:
    """Toeplitz covariance of ``n`` consecutive fBm increments of width ``step``."""
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).astype(float)
    two_h = 2.0 * hurst
    return 0.5 * step**two_h * (
        (lag + 1.0) ** two_h + np.abs(lag - 1.0) ** two_h - 2.0 * lag**two_h
    )


def cholesky_lower(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; retries once with a tiny diagonal jitter."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    factor, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info == 0:
        return factor
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    jitter = 1e-12 * np.trace(cov) / n
    log.warning("Cholesky failed at pivot %d of %d; retrying with jitter %.3e", info, n, jitter)
    factor, info2 = lapack.dpotrf(cov + jitter * np.eye(n), lower=1, clean=1)
    if info2 != 0:
        raise CholeskyError(int(info), n)
    return factor


@dataclass(frozen=True)
class CholeskyFactorPair:
    l_time: np.ndarray = field(repr=False)
    l_space: np.ndarray = field(repr=False)
    # white directions are a scaled identity; applying them is a multiplication
    time_scale: float | None = None
    space_scale: float | None = None

    def apply(self, g: np.ndarray) -> np.ndarray:
        """Map standard normals of shape ``(..., M, N)`` to sheet increments."""
        out = g * self.time_scale if self.time_scale is not None else np.matmul(self.l_time, g)
        if self.space_scale is not None:
            return out * self.space_scale
        return np.matmul(out, self.l_space.T)


def _factor(hurst: float, step: float, n: int) -> tuple[np.ndarray, float | None]:
    if hurst == 0.5:
        scale = float(np.sqrt(step))
        return scale * np.eye(n), scale
    return cholesky_lower(increment_covariance_matrix(hurst, step, n)), None


@lru_cache(maxsize=32)
def factor_pair(hurst: HurstPair, m_steps: int, n_cells: int, horizon: float) -> CholeskyFactorPair:
    tau = horizon / m_steps
    h = np.pi / n_cells
    l_time, ts = _factor(hurst.h1, tau, m_steps)
    l_space, ss = _factor(hurst.h2, h, n_cells)
    l_time.setflags(write=False)
    l_space.setflags(write=False)
    return CholeskyFactorPair(l_time, l_space, ts, ss)


@dataclass(frozen=True)
class SheetIncrements:
    m_steps: int
    n_cells: int
    horizon: float
    hurst: HurstPair
    d: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def tau(self) -> float:
        return self.horizon / self.m_steps

    @property
    def h(self) -> float:
        return np.pi / self.n_cells


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trajectory ``index``; does not depend on call order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def generate_sheet(hurst: HurstPair, m_steps: int, n_cells: int, horizon: float,
                   rng: np.random.Generator, seed: int = 0) -> SheetIncrements:
    if m_steps < 1 or n_cells < 1:
        raise ValueError(f"need M, N >= 1, got M={m_steps}, N={n_cells}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    factors = factor_pair(hurst, int(m_steps), int(n_cells), float(horizon))
    g = rng.standard_normal((m_steps, n_cells))
    return SheetIncrements(int(m_steps), int(n_cells), float(horizon), hurst, factors.apply(g), seed)


def sample_increments(hurst: HurstPair, m_steps: int, n_cells: int, horizon: float,
                      rng: np.random.Generator, samples: int) -> np.ndarray:
    """Many independent increment matrices at once, shape ``(samples, M, N)``."""
    factors = factor_pair(hurst, int(m_steps), int(n_cells), float(horizon))
    return factors.apply(rng.standard_normal((samples, m_steps, n_cells)))


def coarsen(sheet: SheetIncrements, r_time: int, r_space: int) -> SheetIncrements:
    """Block-sum increments onto a grid ``r_time`` times coarser in time and ``r_space`` in space."""
    if r_time < 1 or r_space < 1:
        raise ValueError("coarsening ratios must be >= 1")
    if sheet.m_steps % r_time or sheet.n_cells % r_space:
        raise ValueError(
            f"ratios ({r_time}, {r_space}) do not divide sheet shape ({sheet.m_steps}, {sheet.n_cells})"
        )
    m, n = sheet.m_steps // r_time, sheet.n_cells // r_space
    d = sheet.d.reshape(m, r_time, n, r_space).sum(axis=(1, 3))
    return SheetIncrements(m, n, sheet.horizon, sheet.hurst, d, sheet.seed)


def noise_scale(n_cells: int, sigma: float) -> float:
    """Factor turning a rectangle increment into the per-point forcing, ``sigma N / pi``."""
    return sigma * n_cells / np.pi


def scaled_step_increment(sheet: SheetIncrements, step_index: int, sigma: float) -> np.ndarray:
    """Noise forcing of step ``step_index`` (1-based)."""
    if not 1 <= step_index <= sheet.m_steps:
        raise IndexError(f"step {step_index} outside [1, {sheet.m_steps}]")
    return noise_scale(sheet.n_cells, sigma) * sheet.d[step_index - 1]


def scaled_increments(sheet: SheetIncrements, sigma: float) -> np.ndarray:
    """All step forcings as an ``(M, N)`` array."""
    return noise_scale(sheet.n_cells, sigma) * sheet.d


# -- statistics -------------------------------------------------------------


def separable_covariance(hurst: HurstPair, m_steps: int, n_cells: int, horizon: float) -> np.ndarray:
    """Covariance of the row-major flattened increment matrix, ``R1 kron R2``."""
    r1 = increment_covariance_matrix(hurst.h1, horizon / m_steps, m_steps)
    r2 = increment_covariance_matrix(hurst.h2, np.pi / n_cells, n_cells)
    return np.kron(r1, r2)


def reconstruction_error(hurst: HurstPair, m_steps: int, n_cells: int, horizon: float) -> tuple[float, float]:
    """Relative Frobenius error of ``L L^T`` against the analytic covariance (time, space)."""
    factors = factor_pair(hurst, m_steps, n_cells, float(horizon))
    out = []
    for lower, hurst_exp, step, n in (
        (factors.l_time, hurst.h1, horizon / m_steps, m_steps),
        (factors.l_space, hurst.h2, np.pi / n_cells, n_cells),
    ):
        cov = increment_covariance_matrix(hurst_exp, step, n)
        out.append(float(np.linalg.norm(lower @ lower.T - cov) / np.linalg.norm(cov)))
    return out[0], out[1]


@dataclass
class CovarianceReport:
    analytic: np.ndarray
    empirical: np.ndarray
    standard_error: np.ndarray
    samples: int

    @property
    def z_scores(self) -> np.ndarray:
        return (self.empirical - self.analytic) / self.standard_error

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))


def empirical_covariance(hurst: HurstPair, m_steps: int, n_cells: int, horizon: float,
                         samples: int, rng: np.random.Generator, batch: int = 20000) -> CovarianceReport:
    """Sample covariance of flattened sheets with per-entry standard errors.

    The mean is known to be zero, so the estimator is the average of products
    and its standard error is the sample standard deviation of those products
    over ``sqrt(samples)``.
    """
    dim = m_steps * n_cells
    s1 = np.zeros((dim, dim))
    s2 = np.zeros((dim, dim))
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        x = sample_increments(hurst, m_steps, n_cells, horizon, rng, b).reshape(b, dim)
        prod = x[:, :, None] * x[:, None, :]
        s1 += prod.sum(axis=0)
        s2 += (prod * prod).sum(axis=0)
        done += b
    mean = s1 / samples
    var = s2 / samples - mean**2
    se = np.sqrt(var * samples / (samples - 1) / samples)
    return CovarianceReport(separable_covariance(hurst, m_steps, n_cells, horizon), mean, se, samples)


def cross_row_z_scores(report: CovarianceReport, m_steps: int, n_cells: int) -> np.ndarray:
    """Standardized deviations of covariances between different time rows."""
    rows = np.repeat(np.arange(m_steps), n_cells)
    mask = rows[:, None] != rows[None, :]
    return report.z_scores[mask]


# -- binary replay format ---------------------------------------------------

_HEADER = struct.Struct("<QQdddQ")


def write_sheet(path, sheet: SheetIncrements) -> None:
    """Little-endian header (M, N, T, H1, H2, seed) followed by row-major doubles."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(sheet.m_steps, sheet.n_cells, sheet.horizon,
                              sheet.hurst.h1, sheet.hurst.h2, int(sheet.seed) & 0xFFFFFFFFFFFFFFFF))
        fh.write(np.ascontiguousarray(sheet.d, dtype="<f8").tobytes())


def read_sheet(path) -> SheetIncrements:
    with open(path, "rb") as fh:
        raw = fh.read()
    m, n, horizon, h1, h2, seed = _HEADER.unpack_from(raw)
    payload = raw[_HEADER.size:]
    if len(payload) != 8 * m * n:
        raise ValueError(f"payload has {len(payload)} bytes, expected {8 * m * n}")
    d = np.frombuffer(payload, dtype="<f8").reshape(m, n).astype(float)
    return SheetIncrements(m, n, horizon, HurstPair(h1, h2), d, seed)
