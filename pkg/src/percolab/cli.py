"""Command line entry point: ``percolab {simulate,enumerate,estimate,clt,assoc,all}``.

Exit codes: 0 ok, 2 configuration error, 3 infeasible enumeration, 4 regime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .assoc import (AssociatedSequenceSpec, RandomIndexSpec, anscombe_check,
                    maximal_inequality_check, random_index_clt)
from .clt import KINDS, build_batch, compare_scalings, level_summary, plot_data
from .estimators import (PercolationEstimator, estimate_alpha, estimate_rho, fit_exponential_tail,
                         survival_gap_tail, tau_tail)
from .exceptions import InfeasibleEnumerationError, InsufficientDataError, RegimeError
from .formats import header_block, write_csv, write_json
from .lattice import WetRow, enumerate_exact, size_law, survival
from .processes import run_trials, run_until_survivors, write_trials_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_REGIME = 4

log = logging.getLogger("percolab")


class ConfigError(ValueError):
    pass


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="percolab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"percolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, p=0.8):
        sp.add_argument("--p", type=float, default=p, help="bond retention probability")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads (env PERC_WORKERS overrides)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("simulate", help="run coupled trials, write per-level paths")
    common(sp)
    sp.add_argument("--n", type=int, default=400, help="horizon N")
    sp.add_argument("--trials", type=int, default=10000)

    sp = sub.add_parser("enumerate", help="exact value by exhaustive bond enumeration")
    sp.add_argument("--p", type=str, default="0.5", help="probability; a/b gives exact fractions")
    sp.add_argument("--n", type=int, default=1, help="horizon")
    sp.add_argument("--event", choices=("survival", "size"), default="survival")
    sp.add_argument("--initial", type=_int_list, default=[0], help="initial wet sites")
    sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("estimate", help="fit rho, alpha, sigma^2 and tail decay")
    common(sp)
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--nu-samples", type=int, default=2000)
    sp.add_argument("--nu-level", type=int, default=None)
    sp.add_argument("--nu-half", type=int, default=200)
    sp.add_argument("--truncation", type=int, default=50)
    sp.add_argument("--rho-trials", type=int, default=0,
                    help="trials of a separate short run that estimates rho (0 disables)")

    sp = sub.add_parser("clt", help="standardized cluster sizes against the normal target")
    common(sp)
    sp.add_argument("--levels", type=_int_list, default=[200, 400, 800])
    sp.add_argument("--survivors", type=int, default=10000, help="surviving trials M")
    sp.add_argument("--est-seed", type=int, default=None, help="seed of the plug-in run (default seed + 1)")
    sp.add_argument("--est-trials", type=int, default=10000)
    sp.add_argument("--nu-samples", type=int, default=4000)
    sp.add_argument("--truncation", type=int, default=50)
    sp.add_argument("--rho-trials", type=int, default=200000,
                    help="trials of the separate short run that estimates rho (0 disables)")
    sp.add_argument("--plot-points", type=int, default=200)

    sp = sub.add_parser("assoc", help="maximal inequality, Anscombe check, random-index CLT")
    common(sp)
    sp.add_argument("--t", type=_int_list, default=[1000, 10000])
    sp.add_argument("--paths", type=int, default=10000)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.add_argument("--eps", type=_float_list, default=[0.1, 0.25, 0.5])
    sp.add_argument("--generator", choices=("iid", "moving_average", "percolation"),
                    default="moving_average")
    sp.add_argument("--noise", choices=("bounded", "heavy", "none"), default="bounded")
    sp.add_argument("--plot-points", type=int, default=200)

    sp = sub.add_parser("all", help="every experiment at desk-scale defaults")
    common(sp)
    sp.add_argument("--n", type=int, default=400)
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--levels", type=_int_list, default=[200, 400, 800])
    sp.add_argument("--survivors", type=int, default=10000)
    return parser


def _validate(args):
    if hasattr(args, "p") and not isinstance(args.p, str) and not 0.0 <= args.p <= 1.0:
        raise ConfigError(f"--p must lie in [0, 1], got {args.p}")
    for name in ("n", "trials", "survivors", "paths", "est_trials", "nu_samples"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise ConfigError(f"--{name.replace('_', '-')} must be >= 1, got {v}")
    if getattr(args, "seed", 0) < 0:
        raise ConfigError("--seed must be non-negative")
    levels = getattr(args, "levels", None)
    if levels is not None and (not levels or min(levels) < 1):
        raise ConfigError("--levels must be positive integers")
    env = os.environ.get("PERC_WORKERS")
    if env:
        try:
            args.workers = int(env)
        except ValueError:
            raise ConfigError(f"PERC_WORKERS must be an integer, got {env!r}")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        raise ConfigError("worker count must be >= 1")
    out = getattr(args, "out", None)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}")
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")


def _config(args):
    # worker count and output location never change results, so they stay out of the echo
    skip = {"workers", "out", "verbose"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _tail_fits(batch):
    fits = {}
    for name, tail in (("survival_gap", survival_gap_tail), ("tau", tau_tail)):
        try:
            fits[name] = fit_exponential_tail(*tail(batch))
        except InsufficientDataError as exc:
            log.warning("no %s tail fit: %s", name, exc)
    return fits


def cmd_simulate(args):
    cfg = _config(args)
    batch = run_trials(args.p, args.n, args.trials, args.seed, workers=args.workers)
    with open(args.out / "trials.csv", "w", newline="") as fh:
        write_trials_csv(batch, fh, header=header_block(cfg))
    rho = estimate_rho(batch)
    summary = {"rho_hat": rho.rho, "rho_se": rho.se, "rho_n_path": rho.rho_n,
               "n_trials": len(batch), "n_survivors": int(batch.survived.sum())}
    if batch.survived.any():
        alpha = estimate_alpha(batch)
        summary.update(alpha_hat=alpha.alpha, alpha_se=alpha.se, alpha_edge=alpha.alpha_edge,
                       alpha_edge_se=alpha.se_edge)
    alive = batch.alive(slice(None))
    summary["coupling_violations"] = int(((batch.coupled == 0) & batch.survived[:, None]).sum())
    surv = batch.survived
    summary["edge_violations"] = int((((batch.omax != batch.rminus) | (batch.omin != batch.lplus))
                                      & alive & surv[:, None]).sum())
    for name, fit in _tail_fits(batch).items():
        summary[f"decay.{name}.C"] = fit.C
        summary[f"decay.{name}.gamma"] = fit.gamma
        summary[f"decay.{name}.r2"] = fit.r2
    write_json(args.out / "summary.json", cfg, summary)
    print(f"rho_hat={rho.rho:.6f} survivors={summary['n_survivors']} -> {args.out}")
    return EXIT_OK


def _parse_p(text):
    try:
        p = Fraction(text) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"--p must be a number or fraction, got {text!r}")
    if not 0 <= p <= 1:
        raise ConfigError(f"--p must lie in [0, 1], got {text}")
    return p


def cmd_enumerate(args):
    p = _parse_p(args.p)
    if args.n < 0:
        raise ConfigError("--n must be >= 0")
    try:
        initial = WetRow(0, frozenset(args.initial))
    except ValueError as exc:
        raise ConfigError(str(exc))
    if args.event == "survival":
        print(_fmt(enumerate_exact(initial, p, args.n, survival)))
    else:
        for k, prob in size_law(initial, p, args.n).items():
            print(f"{k} {_fmt(prob)}")
    return EXIT_OK


def _fmt(v):
    if isinstance(v, Fraction):
        return str(v)
    return format(float(v), ".15g")


def cmd_estimate(args):
    cfg = _config(args)
    est = PercolationEstimator(p=args.p, horizon=args.n, n_trials=args.trials, seed=args.seed,
                               nu_samples=args.nu_samples, nu_level=args.nu_level,
                               nu_half=args.nu_half, truncation=args.truncation,
                               rho_trials=args.rho_trials or None, workers=args.workers).fit()
    es = est.estimate_set_
    write_json(args.out / "estimates.json", cfg, es.to_dict())
    print(f"rho_hat={es.rho_hat:.6f} alpha_hat={es.alpha_hat:.6f} sigma2_hat={es.sigma2_hat:.6f}")
    return EXIT_OK


def cmd_clt(args):
    cfg = _config(args)
    est_seed = args.seed + 1 if args.est_seed is None else args.est_seed
    horizon = max(args.levels)
    est = PercolationEstimator(p=args.p, horizon=horizon, n_trials=args.est_trials, seed=est_seed,
                               nu_samples=args.nu_samples, truncation=args.truncation,
                               rho_trials=args.rho_trials or None, workers=args.workers).fit()
    es = est.estimate_set_
    s2 = es.sigma2_hat
    if not s2 > 0:
        raise RegimeError(f"sigma^2 estimate {s2} is not positive; the normal target is degenerate")
    snap_half = min(horizon, int(np.ceil(es.alpha_hat * horizon)) + 2)
    batch = run_until_survivors(args.p, horizon, args.survivors, args.seed,
                                snap_levels=args.levels, snap_half=snap_half, workers=args.workers)
    rows, plot_rows = [], []
    for n in args.levels:
        for kind in KINDS:
            sample = build_batch(kind, batch, es, n)
            rows.append(level_summary(sample, s2))
            for x, f, phi in plot_data(sample, s2, points=args.plot_points):
                plot_rows.append((kind, n, x, f, phi))
    write_csv(args.out / "clt_levels.csv", cfg,
              ("level", "kind", "count", "mean", "variance", "ks_distance"), rows)
    write_csv(args.out / "clt_plot.csv", cfg, ("kind", "level", "x", "ecdf", "phi"), plot_rows)
    if len(args.levels) >= 3:
        comp = compare_scalings(batch, es, args.levels, s2)
        write_csv(args.out / "clt_scalings.csv", cfg,
                  ("level", "count", "var_A", "var_A_prime", "variance_ratio", "ks_A",
                   "ks_A_prime", "ks_between"),
                  [(c.level, c.count, c.var_A, c.var_A_prime, c.variance_ratio, c.ks_A,
                    c.ks_A_prime, c.ks_between) for c in comp])
    write_json(args.out / "clt_estimates.json", cfg, es.to_dict())
    for r in rows:
        print("level={} kind={} count={} mean={:.4f} var={:.4f} ks={:.4f}".format(*r))
    return EXIT_OK


def cmd_assoc(args):
    cfg = _config(args)
    spec = AssociatedSequenceSpec(kind=args.generator, p=args.p, seed=args.seed)
    index = RandomIndexSpec(theta=args.theta, noise=args.noise)
    if spec.exact:
        s2 = spec.sigma2
    else:
        # plug-in sigma^2 from fixed-index sums on an independent seed
        from .assoc import fixed_index_variance
        s2, _ = fixed_index_variance(spec, max(args.t), n_paths=min(args.paths, 2000),
                                     seed=args.seed + 1)
    rows, plot_rows, mx = [], [], []
    for t in args.t:
        for sample in random_index_clt(spec, index, t, args.paths, args.seed):
            rows.append(level_summary(sample, s2))
            for x, f, phi in plot_data(sample, s2, points=args.plot_points):
                plot_rows.append((sample.kind, t, x, f, phi))
        for eps in args.eps:
            try:
                r = maximal_inequality_check(spec, t, eps, n_paths=min(args.paths, 2000),
                                             seed=args.seed)
            except ValueError:
                continue
            mx.append((t, eps, r.m, r.lhs, r.lhs_se, r.rhs, int(r.holds)))
    ans = anscombe_check(spec, index, args.t, args.eps, n_paths=min(args.paths, 2000), seed=args.seed)
    write_csv(args.out / "assoc_levels.csv", cfg,
              ("level", "kind", "count", "mean", "variance", "ks_distance"), rows)
    write_csv(args.out / "assoc_plot.csv", cfg, ("kind", "level", "x", "ecdf", "phi"), plot_rows)
    write_csv(args.out / "assoc_maximal.csv", cfg,
              ("t", "eps", "m", "lhs", "lhs_se", "rhs", "holds"), mx)
    write_csv(args.out / "assoc_anscombe.csv", cfg, ("t", "eps", "exceedance"),
              [(a.t, e, v) for a in ans for e, v in a.exceedance.items()])
    for r in rows:
        print("t={} kind={} count={} mean={:.4f} var={:.4f} ks={:.4f}".format(*r))
    return EXIT_OK


def cmd_all(args):
    base = args.out
    for name, fn, extra in (
        ("simulate", cmd_simulate, {}),
        ("estimate", cmd_estimate, dict(nu_samples=2000, nu_level=None, nu_half=200, truncation=50,
                                        rho_trials=0)),
        ("clt", cmd_clt, dict(est_seed=None, est_trials=args.trials, nu_samples=4000,
                              truncation=50, rho_trials=200000, plot_points=200)),
        ("assoc", cmd_assoc, dict(t=[1000, 10000], paths=10000, theta=1.0, eps=[0.1, 0.25, 0.5],
                                  generator="moving_average", noise="bounded", plot_points=200)),
    ):
        sub = argparse.Namespace(**{**vars(args), **extra, "command": name, "out": base / name})
        sub.out.mkdir(parents=True, exist_ok=True)
        fn(sub)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "enumerate": cmd_enumerate, "estimate": cmd_estimate,
            "clt": cmd_clt, "assoc": cmd_assoc, "all": cmd_all}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _validate(args)
        return COMMANDS[args.command](args)
    except InfeasibleEnumerationError as exc:
        print(f"percolab: infeasible enumeration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RegimeError as exc:
        print(f"percolab: regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"percolab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
