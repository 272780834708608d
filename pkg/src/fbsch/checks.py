"""Invariant suites for the difference operators, norms and noise generator.

Each check returns a :class:`CheckResult` so the CLI can print a report and
tests can assert on the same numbers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import norms
from .grid import apply_laplacian, build_grid, semigroup_apply, spectral_basis, to_spectral
from .noise import HurstPair, cross_row_z_scores, empirical_covariance, reconstruction_error

# relative slack for inequalities that are exact in real arithmetic
ROUNDING_SLACK = 1e-12


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{status}] {self.name}: {self.value:.3e} (tol {self.tolerance:.1e}){extra}"


def _result(name, value, tol, detail=""):
    return CheckResult(name, float(value), float(tol), bool(value <= tol), detail)


def probe_vectors(n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Random, smooth, spiky and constant grid functions."""
    x = build_grid(n).points
    spike = np.zeros(n)
    spike[n // 3] = 1.0
    return [
        rng.standard_normal(n),
        rng.uniform(-3, 3, n),
        np.cos(x) + 0.5 * np.cos(3 * x) ** 2,
        np.exp(np.sin(2 * x)),
        spike,
        np.full(n, 1.7),
    ]


def operator_suite(sizes=(8, 16, 32, 64, 128, 256, 512), seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for n in sizes:
        grid = build_grid(n)
        basis = spectral_basis(grid)
        e = basis.eigenvectors
        lam = basis.eigenvalues

        resid = apply_laplacian(grid, e.T) + lam[:, None] * e.T
        results.append(_result(f"N={n} eigen identity max|A e_j + lam_j e_j|", np.max(np.abs(resid)), 1e-10))

        ortho = np.max(np.abs(e.T @ e - np.eye(n)))
        results.append(_result(f"N={n} orthonormality max|E^T E - I|", ortho, 1e-12))

        u, v = rng.standard_normal(n), rng.standard_normal(n)
        au, av = apply_laplacian(grid, u), apply_laplacian(grid, v)
        scale = np.linalg.norm(au) * np.linalg.norm(v)
        results.append(_result(f"N={n} symmetry |<Au,v> - <u,Av>| / (|Au||v|)",
                               abs(au @ v - u @ av) / scale, 1e-12))

        bridge = abs(norms.lp_norm(grid, u, 2) ** 2 - grid.h * (u @ u)) / (grid.h * (u @ u))
        results.append(_result(f"N={n} l2 norm bridge", bridge, 1e-14))

        t1, t2 = 1e-4 * rng.uniform(0.5, 2.0), 1e-4 * rng.uniform(0.5, 2.0)
        law = semigroup_apply(basis, t1, 0.0, semigroup_apply(basis, t2, 0.0, u)) - semigroup_apply(basis, t1 + t2, 0.0, u)
        results.append(_result(f"N={n} semigroup law", np.max(np.abs(law)) / np.max(np.abs(u)), 1e-12))

        worst_smooth = -np.inf
        w = u - to_spectral(basis, u)[0] * e[:, 0]
        for gamma in (0.5, 1.0, 1.5):
            for t in (1e-5, 1e-3, 1e-1):
                lhs = norms.lp_norm(grid, semigroup_apply(basis, t, gamma, w), 2)
                bound = (gamma / (2 * np.e * t)) ** (gamma / 2) * norms.lp_norm(grid, w, 2)
                worst_smooth = max(worst_smooth, lhs / bound - 1.0)
        results.append(_result(f"N={n} smoothing bound excess", max(worst_smooth, 0.0), ROUNDING_SLACK))

        worst_pt = worst_sup = -np.inf
        for vec in probe_vectors(n, rng):
            lhs, rhs = norms.pointwise_embedding(basis, vec)
            worst_pt = max(worst_pt, lhs / rhs - 1.0)
            lhs, rhs = norms.sup_embedding(basis, vec)
            worst_sup = max(worst_sup, lhs / rhs - 1.0)
        results.append(_result(f"N={n} pointwise embedding excess", max(worst_pt, 0.0), ROUNDING_SLACK,
                                f"tightest ratio-1 = {worst_pt:.3e}"))
        results.append(_result(f"N={n} sup-norm embedding excess", max(worst_sup, 0.0), ROUNDING_SLACK,
                                f"tightest ratio-1 = {worst_sup:.3e}"))
    return results


def noise_suite(samples: int = 100_000, seed: int = 0, threshold: float = 5.0) -> list[CheckResult]:
    results = []
    for hurst, m, n in ((HurstPair(0.95, 0.75), 512, 512), (HurstPair(0.75, 0.5), 1024, 64),
                        (HurstPair(0.5, 0.75), 1024, 64), (HurstPair(0.95, 0.95), 256, 256)):
        et, es = reconstruction_error(hurst, m, n, 1.0)
        results.append(_result(f"Cholesky reconstruction H={hurst.h1, hurst.h2} M={m}", et, 1e-8))
        results.append(_result(f"Cholesky reconstruction H={hurst.h1, hurst.h2} N={n}", es, 1e-8))
    for k, hurst in enumerate((HurstPair(0.5, 0.75), HurstPair(0.75, 0.5), HurstPair(0.95, 0.75))):
        rep = empirical_covariance(hurst, 4, 4, 1.0, samples, np.random.default_rng([seed, k]))
        results.append(_result(f"empirical covariance H={hurst.h1, hurst.h2} max |z|", rep.max_abs_z, threshold))
        if hurst.h1 == 0.5:
            z = cross_row_z_scores(rep, 4, 4)
            results.append(_result("independent time rows (h1=0.5) max |z|", np.max(np.abs(z)), threshold))
    return results
