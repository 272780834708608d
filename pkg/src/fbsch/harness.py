"""Monte-Carlo strong-convergence studies with coupled noise.

Every trajectory draws one reference sheet on the ``(m_ref, n_ref)`` cell
grid. Coarse runs consume block sums of that same sheet, so coarse and
reference solutions see one noise realisation and their difference is a
pathwise discretisation error.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .grid import build_grid, fractional_power_apply, rowwise_matmul, spectral_basis
from .model import ModelParams, initial_grid
from .noise import HurstPair, factor_pair, noise_scale, trajectory_rng
from .scheme import DivergenceError, evolve, scheme_config

log = logging.getLogger(__name__)

MODES = ("temporal", "spatial", "joint")


class StudyError(RuntimeError):
    """Raised when too many trajectories diverge."""

    def __init__(self, message: str, diverged: list[int]):
        super().__init__(message)
        self.diverged = diverged


@dataclass(frozen=True)
class StudyConfig:
    params: ModelParams
    n_ref: int
    m_ref: int
    levels: tuple[tuple[int, int], ...]
    trajectories: int
    seed: int
    mode: str = "temporal"
    chunk: int = 20
    max_divergence: float = 0.01

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trajectories < 2:
            raise ValueError("a study needs at least 2 trajectories")
        if not self.levels:
            raise ValueError("a study needs at least one coarse level")
        levels = tuple((int(m), int(n)) for m, n in self.levels)
        for m, n in levels:
            if m < 1 or n < 2 or self.m_ref % m or self.n_ref % n:
                raise ValueError(f"level (M={m}, N={n}) does not divide reference ({self.m_ref}, {self.n_ref})")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def temporal(cls, params, n_ref, m_ref, steps, **kw):
        return cls(params, n_ref, m_ref, tuple((m, n_ref) for m in steps), mode="temporal", **kw)

    @classmethod
    def spatial(cls, params, n_ref, m_ref, points, **kw):
        return cls(params, n_ref, m_ref, tuple((m_ref, n) for n in points), mode="spatial", **kw)

    @property
    def expected_rate(self) -> float:
        # time: H1 - 1/8; space: 1
        if self.mode == "temporal":
            return self.params.hurst.h1 - 0.125
        if self.mode == "spatial":
            return 1.0
        return min(self.params.hurst.h1 - 0.125, 1.0)


# -- interpolation and the error metric --------------------------------------


def polygonal_interpolation_matrix(n_fine: int, n_coarse: int) -> np.ndarray:
    """Matrix evaluating the piecewise-linear interpolant of fine values at coarse points.

    Constant extension on ``[0, x_1]`` and ``[x_N, pi]``; linear in between.
    """
    fine = build_grid(n_fine).points
    coarse = build_grid(n_coarse).points
    eye = np.eye(n_fine)
    return np.stack([np.interp(coarse, fine, eye[j]) for j in range(n_fine)], axis=1)


def error_metric(reference, coarse) -> float:
    """``max_i sqrt(mean_k max_j |coarse - reference|^2)``.

    Both arrays have shape ``(K, times, N)`` with the reference already
    evaluated at the coarse grid points.
    """
    reference = np.asarray(reference, dtype=float)
    coarse = np.asarray(coarse, dtype=float)
    if reference.shape != coarse.shape:
        raise ValueError(f"shape mismatch {reference.shape} vs {coarse.shape}")
    return error_from_sq(np.max((coarse - reference) ** 2, axis=-1))


def error_from_sq(sq: np.ndarray) -> float:
    """Reduce per-trajectory, per-time squared sup errors ``(K, times)`` to E.

    ``math.fsum`` makes the trajectory sum independent of ordering.
    """
    sq = np.asarray(sq, dtype=float)
    k = sq.shape[0]
    return max(math.sqrt(math.fsum(sq[:, i]) / k) for i in range(sq.shape[1]))


def fit_orders(errors, sizes=None) -> tuple[list[float | None], float | None]:
    """Pairwise orders between consecutive levels and a least-squares slope.

    ``sizes`` are the step sizes of the levels (defaults to successive
    halving). An order is ``None`` when either error is zero.
    """
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two levels to fit orders")
    if sizes is None:
        sizes = [2.0**-i for i in range(len(errors))]
    orders = []
    for j in range(1, len(errors)):
        if errors[j - 1] > 0 and errors[j] > 0:
            orders.append(math.log(errors[j - 1] / errors[j]) / math.log(sizes[j - 1] / sizes[j]))
        else:
            orders.append(None)
    pos = [(s, e) for s, e in zip(sizes, errors) if e > 0]
    slope = None
    if len(pos) >= 2:
        x = np.log([s for s, _ in pos])
        y = np.log([e for _, e in pos])
        slope = float(np.polyfit(x, y, 1)[0])
    return orders, slope


# -- rate tables ---------------------------------------------------------------


@dataclass
class RateRow:
    m_steps: int
    n_points: int
    error: float
    order: float | None = None
    runtime_s: float | None = None


@dataclass
class RateTable:
    rows: list[RateRow]
    expected_rate: float
    hurst: HurstPair
    mode: str
    trajectories: int
    seed: int
    diverged: list[int] = field(default_factory=list)
    reference_runtime_s: float | None = None

    @property
    def errors(self) -> list[float]:
        return [r.error for r in self.rows]

    def step_sizes(self) -> list[float]:
        if self.mode == "spatial":
            return [np.pi / r.n_points for r in self.rows]
        return [1.0 / r.m_steps for r in self.rows]

    @property
    def lsq_order(self) -> float | None:
        return fit_orders(self.errors, self.step_sizes())[1]

    def to_csv(self, timings: bool = False) -> str:
        """CSV text; ``runtime_s`` stays empty unless ``timings`` so reruns are byte-identical."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["H1", "H2", "mode", "K", "seed"])
        w.writerow([repr(self.hurst.h1), repr(self.hurst.h2), self.mode, self.trajectories, self.seed])
        w.writerow(["M", "N", "error", "order", "expected_rate", "runtime_s"])
        for r in self.rows:
            w.writerow([
                r.m_steps, r.n_points, repr(float(r.error)),
                "" if r.order is None else repr(float(r.order)),
                repr(float(self.expected_rate)),
                repr(float(r.runtime_s)) if timings and r.runtime_s is not None else "",
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RateTable":
        lines = list(csv.reader(io.StringIO(text)))
        h1, h2, mode, k, seed = lines[1]
        rows, expected = [], None
        for rec in lines[3:]:
            if not rec:
                continue
            m, n, err, order, exp, rt = rec
            expected = float(exp)
            rows.append(RateRow(int(m), int(n), float(err), float(order) if order else None,
                                float(rt) if rt else None))
        return cls(rows, expected, HurstPair(float(h1), float(h2)), mode, int(k), int(seed))

    def format(self) -> str:
        lines = [f"(H1, H2) = ({self.hurst.h1}, {self.hurst.h2})  mode={self.mode}  K={self.trajectories}  seed={self.seed}",
                 f"{'M':>6} {'N':>6} {'E(M,N)':>12} {'order':>9}"]
        for r in self.rows:
            order = "" if r.order is None else f"{r.order:.5f}"
            lines.append(f"{r.m_steps:>6} {r.n_points:>6} {r.error:>12.5f} {order:>9}")
        lsq = self.lsq_order
        lines.append(f"least-squares order {lsq:.5f}" if lsq is not None else "least-squares order undefined")
        lines.append(f"expected rate {self.expected_rate:.5g}")
        return "\n".join(lines)


def gnuplot_script(table: RateTable, csv_name: str) -> str:
    """Log-log error plot of a rate table CSV with a reference slope."""
    xcol = 2 if table.mode == "spatial" else 1
    xlabel = "N" if table.mode == "spatial" else "M"
    first = table.rows[0]
    x0 = first.n_points if table.mode == "spatial" else first.m_steps
    return "\n".join([
        "set logscale xy",
        f"set xlabel '{xlabel}'",
        "set ylabel 'E(M,N)'",
        "set datafile separator ','",
        "set key top right",
        f"ref(x) = {first.error!r} * ({x0} / x)**{table.expected_rate!r}",
        f"plot '{csv_name}' every ::3 using {xcol}:3 with linespoints title 'error', \\",
        f"     ref(x) with lines dashtype 2 title 'slope {table.expected_rate:g}'",
        "",
    ])


# -- the study itself ----------------------------------------------------------


def _sample_sheets(study: StudyConfig, indices) -> np.ndarray:
    p = study.params
    factors = factor_pair(p.hurst, study.m_ref, study.n_ref, float(p.horizon))
    g = np.stack([trajectory_rng(study.seed, k).standard_normal((study.m_ref, study.n_ref)) for k in indices])
    return factors.apply(g)


def _coarsen_batch(d: np.ndarray, m: int, n: int) -> np.ndarray:
    k, mf, nf = d.shape
    return d.reshape(k, m, mf // m, n, nf // n).sum(axis=(2, 4))


def _paths_for(study: StudyConfig, d: np.ndarray):
    """Reference and coarse paths for a batch of fine sheets ``d``.

    Returns ``(sq_errors, timings)`` where ``sq_errors[level]`` has shape
    ``(batch, M_level + 1)``.
    """
    p = study.params
    ref_cfg = scheme_config(p, study.m_ref, study.n_ref)
    record = set()
    for m, _ in study.levels:
        r = study.m_ref // m
        record.update(i * r for i in range(m + 1))
    t0 = time.perf_counter()
    ref = evolve(ref_cfg, initial_grid(p, ref_cfg.grid), noise_scale(study.n_ref, p.sigma) * d, record)
    timings = {"reference": time.perf_counter() - t0}
    sq = []
    for m, n in study.levels:
        t0 = time.perf_counter()
        cfg = scheme_config(p, m, n)
        coarse_d = _coarsen_batch(d, m, n)
        coarse = evolve(cfg, initial_grid(p, cfg.grid), noise_scale(n, p.sigma) * coarse_d, range(m + 1))
        r = study.m_ref // m
        interp = None if n == study.n_ref else polygonal_interpolation_matrix(study.n_ref, n)
        errs = np.empty((d.shape[0], m + 1))
        for i in range(m + 1):
            fine = ref[i * r]
            if interp is not None:
                fine = rowwise_matmul(fine, interp.T)
            errs[:, i] = np.max((coarse[i] - fine) ** 2, axis=-1)
        sq.append(errs)
        timings[(m, n)] = time.perf_counter() - t0
    return sq, timings


def _run_chunk(study: StudyConfig, indices: list[int]):
    """Per-trajectory squared errors for a chunk, isolating divergent trajectories."""
    d = _sample_sheets(study, indices)
    try:
        sq, timings = _paths_for(study, d)
        return indices, sq, timings, []
    except DivergenceError:
        pass
    kept, parts, diverged = [], [], []
    timings: dict = {}
    for j, k in enumerate(indices):
        try:
            sq_k, t_k = _paths_for(study, d[j:j + 1])
        except DivergenceError as exc:
            log.warning("trajectory %d diverged at step %d", k, exc.step_index)
            diverged.append(k)
            continue
        kept.append(k)
        parts.append(sq_k)
        for key, val in t_k.items():
            timings[key] = timings.get(key, 0.0) + val
    sq = [np.concatenate([p[lvl] for p in parts]) if parts else np.empty((0, m + 1))
          for lvl, (m, _) in enumerate(study.levels)]
    return kept, sq, timings, diverged


def coupled_pair_run(study: StudyConfig, level: tuple[int, int], trajectory: int):
    """Reference path (at coarse points) and coarse path of one trajectory, both ``(M + 1, N)``."""
    m, n = level
    if study.m_ref % m or study.n_ref % n:
        raise ValueError(f"level {level} does not divide the reference grid")
    p = study.params
    d = _sample_sheets(study, [trajectory])
    r = study.m_ref // m
    try:
        ref_cfg = scheme_config(p, study.m_ref, study.n_ref)
        ref = evolve(ref_cfg, initial_grid(p, ref_cfg.grid), noise_scale(study.n_ref, p.sigma) * d,
                     [i * r for i in range(m + 1)])
        cfg = scheme_config(p, m, n)
        coarse = evolve(cfg, initial_grid(p, cfg.grid), noise_scale(n, p.sigma) * _coarsen_batch(d, m, n),
                        range(m + 1))
    except DivergenceError as exc:
        raise DivergenceError(exc.step_index, trajectory) from None
    interp = np.eye(n) if n == study.n_ref else polygonal_interpolation_matrix(study.n_ref, n)
    ref_path = np.stack([ref[i * r][0] @ interp.T for i in range(m + 1)])
    coarse_path = np.stack([coarse[i][0] for i in range(m + 1)])
    return ref_path, coarse_path


def _chunks(n: int, size: int):
    return [list(range(s, min(s + size, n))) for s in range(0, n, size)]


def run_study(study: StudyConfig, workers: int = 1, progress=None) -> RateTable:
    chunks = _chunks(study.trajectories, study.chunk)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, [study] * len(chunks), chunks))
    else:
        results = []
        for c in chunks:
            results.append(_run_chunk(study, c))
            if progress:
                progress(len(results), len(chunks))

    kept, diverged = [], []
    per_level = [[] for _ in study.levels]
    timing: dict = {}
    for idx, sq, t, div in results:
        kept.extend(idx)
        diverged.extend(div)
        for lvl, arr in enumerate(sq):
            per_level[lvl].append(arr)
        for key, val in t.items():
            timing[key] = timing.get(key, 0.0) + val
    if len(diverged) > study.max_divergence * study.trajectories:
        raise StudyError(f"{len(diverged)} of {study.trajectories} trajectories diverged", sorted(diverged))

    order = np.argsort(kept, kind="stable")
    errors = [error_from_sq(np.concatenate(parts)[order]) for parts in per_level]
    table = RateTable(
        rows=[RateRow(m, n, e, runtime_s=timing.get((m, n))) for (m, n), e in zip(study.levels, errors)],
        expected_rate=study.expected_rate, hurst=study.params.hurst, mode=study.mode,
        trajectories=study.trajectories, seed=study.seed, diverged=sorted(diverged),
        reference_runtime_s=timing.get("reference"),
    )
    orders, _ = fit_orders(table.errors, table.step_sizes())
    for row, o in zip(table.rows[1:], orders):
        row.order = o
    return table


# -- temporal regularity of the stochastic convolution --------------------------


@dataclass
class HolderEstimate:
    exponent: float
    theoretical: float
    lags: np.ndarray
    mean_square: np.ndarray

    @property
    def difference(self) -> float:
        return self.exponent - self.theoretical


def holder_theory(hurst: HurstPair, beta: float = 0.0) -> float:
    return (4 * hurst.h1 + hurst.h2 - 1 - beta) / 4


def estimate_holder_exponent(hurst: HurstPair, trajectories: int = 500, m_steps: int = 1024,
                             n_points: int = 32, horizon: float = 1.0, sigma: float = 1.0,
                             seed: int = 0, beta: float = 0.0, max_lag: int = 64,
                             chunk: int = 50) -> HolderEstimate:
    """Half the log-log slope of ``E ||O_t - O_s||^2`` against ``t - s``.

    ``O`` is the discrete stochastic convolution. For each dyadic lag the
    mean square is averaged over all pairs ``(s, t = s + lag)`` in the second
    half of ``[0, T]`` and over trajectories. ``beta > 0`` measures the
    increment in ``||(-A_N)^{beta/2} . ||`` instead of the plain l2 norm.
    """
    lags = []
    lag = 1
    while lag <= max_lag and lag <= m_steps // 2:
        lags.append(lag)
        lag *= 2
    if len(lags) < 3:
        raise ValueError(f"only {len(lags)} usable lags; need at least 3")
    lags = np.array(lags)
    params = ModelParams(0.0, 0.0, 0.0, 0.0, sigma, hurst, "0", horizon, drift_enabled=False)
    cfg = scheme_config(params, m_steps, n_points)
    basis = spectral_basis(cfg.grid)
    factors = factor_pair(hurst, m_steps, n_points, float(horizon))
    start = m_steps // 2
    sums = np.zeros(len(lags))
    counts = np.zeros(len(lags))
    for idx in _chunks(trajectories, chunk):
        g = np.stack([trajectory_rng(seed, k).standard_normal((m_steps, n_points)) for k in idx])
        forcing = noise_scale(n_points, sigma) * factors.apply(g)
        snaps = evolve(cfg, np.zeros(n_points), forcing, range(start, m_steps + 1))
        path = np.stack([snaps[i] for i in range(start, m_steps + 1)], axis=1)
        if beta > 0:
            path = fractional_power_apply(basis, beta / 2, path)
        for j, lag in enumerate(lags):
            diff = path[:, lag:] - path[:, :-lag]
            sums[j] += cfg.grid.h * np.sum(diff * diff)
            counts[j] += diff.shape[0] * diff.shape[1]
    msq = sums / counts
    slope = np.polyfit(np.log(lags * horizon / m_steps), np.log(msq), 1)[0]
    return HolderEstimate(float(slope / 2), holder_theory(hurst, beta), lags, msq)
