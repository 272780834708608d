"""Command-line front end: ``fbsch simulate | convergence | noise-check | operator-check | holder``."""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import logging
import os
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .checks import operator_suite
from .config import SEED_ENV, RunConfig, load_config
from .harness import StudyError, estimate_holder_exponent, gnuplot_script, run_study
from .noise import CholeskyError, generate_sheet, trajectory_rng
from .scheme import DivergenceError, run_trajectory, scheme_config

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_CHECK_FAILED = 4
EXIT_NUMERICAL = 5

EPILOG = f"""\
exit codes:
  {EXIT_OK}  success
  {EXIT_INTERNAL}  unexpected internal error
  {EXIT_USAGE}  bad command line or invalid configuration
  {EXIT_DIVERGENCE}  convergence study: more than 1% of trajectories diverged
  {EXIT_CHECK_FAILED}  noise-check / operator-check / holder: a check exceeded its tolerance
  {EXIT_NUMERICAL}  numerical failure (single-run divergence, non-PD covariance)

environment:
  {SEED_ENV}  default seed when the config file does not set study.seed
"""

log = logging.getLogger("fbsch")


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_meta(path: Path, items: dict) -> None:
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={v}\n")


def _overrides(args) -> dict:
    return {
        "model.h1": getattr(args, "h1", None),
        "model.h2": getattr(args, "h2", None),
        "model.sigma": getattr(args, "sigma", None),
        "study.seed": getattr(args, "seed", None),
        "study.trajectories": getattr(args, "trajectories", None),
        "study.mode": getattr(args, "mode", None),
        "discretization.m_ref": getattr(args, "m_ref", None),
        "discretization.n_ref": getattr(args, "n_ref", None),
        "discretization.levels": getattr(args, "levels", None),
        "output.directory": getattr(args, "out", None),
    }


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg: RunConfig, args) -> int:
    params = cfg.model.params()
    m = args.m_steps or cfg.discretization.m_ref
    n = args.n_points or cfg.discretization.n_ref
    scfg = scheme_config(params, m, n)
    times = [float(t) for t in args.snapshots.split(",")] if args.snapshots else [params.horizon]
    steps = []
    for t in times:
        if not 0 <= t <= params.horizon * (1 + 1e-12):
            raise ValueError(f"snapshot time {t} outside [0, {params.horizon}]")
        steps.append(int(round(t / scfg.tau)))
    sheet = generate_sheet(params.hurst, m, n, params.horizon,
                           trajectory_rng(cfg.study.seed, args.trajectory), seed=cfg.study.seed)
    snaps = run_trajectory(scfg, sheet, steps)
    out = _outdir(cfg)
    written = []
    for i in sorted(set(steps)):
        path = out / f"snapshot_step{i:06d}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "u"])
            for x, u in zip(scfg.grid.points, snaps[i]):
                w.writerow([_fmt(x), _fmt(u)])
        written.append(path.name)
    _write_meta(out / "simulate.meta", {
        "created": _dt.datetime.now().isoformat(timespec="seconds"),
        "version": __version__,
        "M": m, "N": n, "T": params.horizon, "H1": params.hurst.h1, "H2": params.hurst.h2,
        "sigma": params.sigma, "seed": cfg.study.seed, "trajectory": args.trajectory,
        "snapshot_steps": ",".join(str(i) for i in sorted(set(steps))),
        "snapshot_times": ",".join(_fmt(i * scfg.tau) for i in sorted(set(steps))),
        "files": ",".join(written),
    })
    print(f"wrote {len(written)} snapshot(s) to {out}")
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, args) -> int:
    study = cfg.study_config()
    workers = args.workers or os.cpu_count() or 1

    def progress(done, total):
        log.info("chunk %d/%d", done, total)

    try:
        table = run_study(study, workers=workers, progress=progress)
    except StudyError as exc:
        print(f"study failed: {exc} (trajectories {exc.diverged[:20]})", file=sys.stderr)
        return EXIT_DIVERGENCE
    out = _outdir(cfg)
    stem = f"rates_{study.mode}"
    formats = cfg.output.formats
    if "csv" in formats:
        (out / f"{stem}.csv").write_text(table.to_csv(timings=args.timings))
    if "gnuplot" in formats:
        (out / f"{stem}.gp").write_text(gnuplot_script(table, f"{stem}.csv"))
    if "text" in formats:
        (out / f"{stem}.txt").write_text(table.format() + "\n")
    _write_meta(out / f"{stem}.meta", {
        "created": _dt.datetime.now().isoformat(timespec="seconds"),
        "version": __version__,
        "m_ref": study.m_ref, "n_ref": study.n_ref, "workers": workers,
        "lsq_order": table.lsq_order, "diverged": len(table.diverged),
        "reference_runtime_s": table.reference_runtime_s,
        "level_runtime_s": ",".join(f"{r.m_steps}x{r.n_points}:{r.runtime_s:.3f}" for r in table.rows),
    })
    print(table.format())
    return EXIT_OK


def cmd_noise_check(cfg: RunConfig, args) -> int:
    from .noise import HurstPair, cross_row_z_scores, empirical_covariance

    hurst = HurstPair(cfg.model.h1, cfg.model.h2)
    rep = empirical_covariance(hurst, args.m_steps, args.n_cells, cfg.model.T, args.samples,
                               trajectory_rng(cfg.study.seed, 0))
    z = np.abs(rep.z_scores)
    print(f"H = ({hurst.h1}, {hurst.h2}), M = {args.m_steps}, N = {args.n_cells}, samples = {args.samples}")
    print(f"max |analytic covariance| = {np.max(np.abs(rep.analytic)):.6e}")
    print(f"max standardized deviation = {z.max():.4f} (threshold {args.threshold})")
    print(f"mean standardized deviation = {z.mean():.4f}")
    ok = z.max() < args.threshold
    if hurst.h1 == 0.5:
        cross = np.max(np.abs(cross_row_z_scores(rep, args.m_steps, args.n_cells)))
        print(f"cross-row max standardized deviation = {cross:.4f}")
        ok = ok and cross < args.threshold
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_operator_check(cfg: RunConfig, args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    results = operator_suite(sizes, seed=cfg.study.seed)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_holder(cfg: RunConfig, args) -> int:
    from .noise import HurstPair

    hurst = HurstPair(cfg.model.h1, cfg.model.h2)
    est = estimate_holder_exponent(hurst, trajectories=args.trajectories, m_steps=args.m_steps,
                                   n_points=args.n_points, horizon=cfg.model.T, seed=cfg.study.seed,
                                   beta=args.beta)
    for lag, msq in zip(est.lags, est.mean_square):
        print(f"lag {lag:>5d} steps  E||O_t - O_s||^2 = {msq:.6e}")
    print(f"estimated exponent   {est.exponent:.5f}")
    print(f"theoretical exponent {est.theoretical:.5f}")
    print(f"difference           {est.difference:+.5f} (tolerance {args.tolerance})")
    return EXIT_OK if abs(est.difference) <= args.tolerance else EXIT_CHECK_FAILED


def _levels(text: str):
    if ":" in text:
        return [[int(a) for a in pair.split(":")] for pair in text.split(",")]
    return [int(a) for a in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbsch", description=__doc__, epilog=EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="YAML run configuration")
        p.add_argument("--h1", type=float)
        p.add_argument("--h2", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        return p

    p = common(sub.add_parser("simulate", help="run one trajectory and write snapshots",
                              epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter))
    p.add_argument("--sigma", type=float)
    p.add_argument("--snapshots", help="comma-separated times, e.g. 0,0.5,1 (default: T)")
    p.add_argument("--m-steps", type=int)
    p.add_argument("--n-points", type=int)
    p.add_argument("--trajectory", type=int, default=0, help="noise substream index")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("convergence", help="Monte-Carlo strong convergence study",
                              epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter))
    p.add_argument("--sigma", type=float)
    p.add_argument("--mode", choices=["temporal", "spatial", "joint"])
    p.add_argument("--trajectories", type=int)
    p.add_argument("--m-ref", type=int)
    p.add_argument("--n-ref", type=int)
    p.add_argument("--levels", type=_levels, help="e.g. 8,16,32 or (joint) 8:8,16:16")
    p.add_argument("--workers", type=int, help="parallel worker processes (default: all cores)")
    p.add_argument("--timings", action="store_true", help="fill the runtime_s column (breaks byte-identity)")
    p.set_defaults(func=cmd_convergence)

    p = common(sub.add_parser("noise-check", help="empirical vs analytic sheet covariance",
                              epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter))
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--m-steps", type=int, default=4)
    p.add_argument("--n-cells", type=int, default=4)
    p.add_argument("--threshold", type=float, default=5.0)
    p.set_defaults(func=cmd_noise_check)

    p = common(sub.add_parser("operator-check", help="difference operator and norm invariants",
                              epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter))
    p.add_argument("--sizes", default="8,16,32,64,128,256,512")
    p.set_defaults(func=cmd_operator_check)

    p = common(sub.add_parser("holder", help="temporal Hölder exponent of the stochastic convolution",
                              epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter))
    p.add_argument("--trajectories", type=int, default=500)
    p.add_argument("--m-steps", type=int, default=1024)
    p.add_argument("--n-points", type=int, default=32)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--tolerance", type=float, default=0.08)
    p.set_defaults(func=cmd_holder)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = _overrides(args)
    if args.command != "convergence":
        # trajectories/mode flags of other commands are not config keys
        overrides.pop("study.trajectories")
    try:
        cfg = load_config(args.config, overrides)
        return args.func(cfg, args)
    # CholeskyError is a LinAlgError and hence a ValueError, so it goes first
    except (DivergenceError, CholeskyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
