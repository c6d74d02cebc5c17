"""Command-line entry point.

Subcommands: enumerate, mc, rate, lemma-bn, renewal, sweep, selftest.
Exit codes: 0 success, 2 configuration error, 3 resource-budget error,
4 internal invariant violation.  POLYMERLAB_THREADS overrides --threads.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import exact, models, ratefn, sweeps
from .exact import BudgetError
from .models import ConfigError
from .montecarlo import estimate_clt, run_replicas, PermParams
from .reporting import write_csv, write_json
from .steps import distribution_from_config, make_distribution

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_INTERNAL = 4


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", default="simple",
                   choices=["simple", "uniform_range", "geometric_tail", "custom"])
    p.add_argument("--L", type=int, default=None, help="family parameter")
    p.add_argument("--pmf", type=str, default=None,
                   help="JSON pmf mapping for the custom family")
    p.add_argument("--model", default=None,
                   choices=["domb_joyce", "saw", "attraction", "strip"])
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--strip-L", type=int, default=None)
    p.add_argument("--format", default="json", choices=["json", "csv"])


def _dist_from_args(args):
    pmf = json.loads(args.pmf) if args.pmf else None
    return make_distribution(args.family, args.L, pmf)


def _model_from_args(args):
    kind = args.model
    if kind is None:
        if args.strip_L is not None:
            kind = "strip"
        elif args.gamma > 0.0:
            kind = "attraction"
        else:
            kind = "domb_joyce"
    if kind == "strip":
        return models.strip(args.strip_L)
    if kind == "attraction":
        return models.attraction(args.beta, args.gamma)
    if kind == "saw":
        return models.saw()
    return models.domb_joyce(args.beta)


def _emit_json(args, payload, config, seed) -> None:
    if args.out:
        write_json(args.out, payload, config, seed)
        print(f"wrote {args.out}")
    else:
        from .reporting import run_stamp
        doc = {"meta": run_stamp(config, seed)}
        doc.update(payload)
        json.dump(doc, sys.stdout, indent=2, default=str)
        print()


def _emit_tabular(args, payload, header, rows, config, seed) -> None:
    """JSON by default; --format csv switches to a delimited table."""
    if getattr(args, "format", "json") == "csv":
        if args.out:
            write_csv(args.out, header, rows, config, seed)
            print(f"wrote {args.out}")
        else:
            from .reporting import render_csv
            sys.stdout.write(render_csv(header, rows, config, seed))
    else:
        _emit_json(args, payload, config, seed)


def _threads(args) -> int:
    env = os.environ.get("POLYMERLAB_THREADS")
    if env is not None:
        return max(1, int(env))
    if args.threads is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _config_echo(args, extra=None) -> dict:
    d = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    if extra:
        d.update(extra)
    return d


def _cmd_enumerate(args) -> int:
    dist = _dist_from_args(args)
    model = _model_from_args(args)
    res = exact.enumerate_measure(dist, args.n, model, budget=args.budget,
                                  workers=_threads(args))
    payload = {"Z": res.Z,
               "logZ": math.log(res.Z) if res.Z > 0 else None,
               "endpoint_pmf": {str(k): v for k, v in
                                sorted(res.endpoint_pmf.items())},
               "params": {"model": model.to_dict(), "n": args.n,
                          "family": args.family, "L": args.L},
               "leaves": res.leaves}
    rows = [(x, v, res.raw_measure[x])
            for x, v in sorted(res.endpoint_pmf.items())]
    _emit_tabular(args, payload, ("endpoint", "pmf", "raw_measure"), rows,
                  _config_echo(args), None)
    return EXIT_OK


def _cmd_mc(args) -> int:
    dist = _dist_from_args(args)
    model = _model_from_args(args)
    budget = args.tours if args.sampler == "perm" else args.samples
    pp = PermParams(args.c_low, args.c_high, not args.no_control,
                    args.scale_per_step, args.drift, args.max_pending)
    ens = run_replicas(dist, args.n, model, sampler=args.sampler,
                       replicas=args.replicas, budget=budget,
                       master_seed=args.seed, perm_params=pp,
                       workers=_threads(args))
    est = estimate_clt(ens)
    payload = {
        "theta_hat": est.theta_hat, "theta_se": est.theta_se,
        "r_hat": est.r_hat, "r_se": est.r_se,
        "sigma_star_hat": est.sigma_star_hat,
        "sigma_star_se": est.sigma_star_se,
        "ess": est.ess, "low_ess": est.low_ess,
        "replicas": [{"replica": e.replica_id, "stream_seed": e.seed,
                      "log_z_hat": e.log_z_hat, "ess": e.ess,
                      "samples": int(len(e.weights)), "chains": e.chains,
                      "died": e.died} for e in ens],
    }
    rows = [(d["replica"], d["stream_seed"], d["log_z_hat"], d["ess"],
             d["samples"], d["chains"], d["died"])
            for d in payload["replicas"]]
    _emit_tabular(args, payload,
                  ("replica", "stream_seed", "log_z_hat", "ess", "samples",
                   "chains", "died"), rows, _config_echo(args), args.seed)
    return EXIT_OK


def _grid(spec: str):
    lo, hi, num = spec.split(":")
    return np.linspace(float(lo), float(hi), int(num))


def _cmd_rate(args) -> int:
    dist = _dist_from_args(args)
    if args.scaled:
        curve = ratefn.scaled_rate_curve(dist, args.n, args.beta,
                                         _grid(args.b_grid),
                                         budget=args.budget,
                                         workers=_threads(args))
    else:
        model = _model_from_args(args)
        measure = exact.enumerate_measure(dist, args.n, model,
                                          budget=args.budget,
                                          workers=_threads(args))
        curve = ratefn.RateCurve()
        for theta in _grid(args.b_grid):
            side = "ge" if theta >= args.split_at else "le"
            v = ratefn.finite_rate(dist, args.n, model, theta, side,
                                   measure=measure)
            curve.points.append(ratefn.RatePoint(float(theta), v, side,
                                                 args.n, args.beta,
                                                 args.gamma, args.strip_L))
    out = args.out or "rate.csv"
    write_csv(out, ratefn.RateCurve.CSV_HEADER, curve.rows(),
              _config_echo(args), None)
    print(f"wrote {out}")
    if not args.no_figures:
        from .figures import plot_rate_curve
        png = str(Path(out).with_suffix(".png"))
        plot_rate_curve(curve, png)
        print(f"wrote {png}")
    return EXIT_OK


def _cmd_lemma_bn(args) -> int:
    dist = _dist_from_args(args)
    res = ratefn.compute_bn(dist, args.n)
    rows = [(m, res.bn_profile[m], res.bn_profile[m] / m,
             2 * (m + 1) + res.bn_profile[m]) for m in range(1, args.n + 1)]
    out = args.out or "bn.csv"
    write_csv(out, ("n", "B_n", "B_n_over_n", "E_G_n"), rows,
              _config_echo(args), None)
    print(f"wrote {out}")
    if not args.no_figures:
        from .figures import plot_bn_profile
        png = str(Path(out).with_suffix(".png"))
        plot_bn_profile(res, png)
        print(f"wrote {png}")
    return EXIT_OK


def _cmd_renewal(args) -> int:
    from .renewal import (PieceModel, compute_sequences,
                          contraction_iteration, verify_pi_bound,
                          verify_renewal)
    dist = _dist_from_args(args)
    window = None
    if args.window_speed is not None:
        window = (args.window_speed, args.window_halfwidth)
    pm = PieceModel(dist, args.T, args.mode, beta=args.beta, mu=args.mu,
                    window=window, delta=args.delta,
                    force_u_zero=args.force_u_zero)
    seq = compute_sequences(pm, args.N, budget=args.budget)
    max_resid, residuals = verify_renewal(seq)
    rows, violations = verify_pi_bound(seq)
    payload = {"c": seq.c, "pi": seq.pi, "eps": seq.eps,
               "residuals": residuals, "max_residual": max_resid,
               "pi_bound_rows": rows, "pi_bound_violations": violations}
    con = contraction_iteration(seq, args.eta)
    payload["contraction"] = {
        "hypothesis_ok": con.hypothesis_ok, "eta": con.eta, "z": con.z,
        "A": con.A, "decay_rate": con.decay_rate,
        "tail_bound": con.tail_bound, "z_inverse_ok": con.z_inverse_ok}
    _emit_json(args, payload, _config_echo(args), None)
    return EXIT_OK


_SWEEP_KEYS = ("replicas", "tours", "c_low", "c_high", "max_pending")


def _cmd_sweep(args) -> int:
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
    experiment = args.experiment or cfg.get("experiment")
    if experiment not in ("beta", "sigma", "coupled", "attraction", "strip",
                          "flory"):
        raise ConfigError(f"unknown sweep experiment {experiment!r}")
    mc = sweeps.McBudget(**{k: cfg[k] for k in _SWEEP_KEYS if k in cfg},
                         workers=_threads(args))
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    family = cfg.get("family", "simple")
    fam_L = cfg.get("family_L")
    n_coeff = cfg.get("n_coeff", 200.0)
    anchor = cfg.get("anchor", True)

    def _dist():
        if "distribution" in cfg:
            return distribution_from_config(cfg["distribution"])
        return make_distribution(family, fam_L)

    if experiment == "beta":
        dist = _dist()
        rep = sweeps.sweep_beta(dist, cfg.get("betas",
                                              [0.4, 0.2, 0.1, 0.05, 0.025]),
                                mc=mc, master_seed=seed, n_coeff=n_coeff,
                                anchor=anchor)
    elif experiment == "sigma":
        rep = sweeps.sweep_sigma(cfg.get("L_values", [2, 4, 8, 16]),
                                 family=cfg.get("family", "uniform_range"),
                                 mc=mc, master_seed=seed, n_coeff=n_coeff,
                                 anchor=anchor)
    elif experiment == "strip":
        rep = sweeps.sweep_strip(cfg.get("L_values", [1, 2, 4, 8]),
                                 horizontal=cfg.get("family", "simple"),
                                 mc=mc, master_seed=seed, n_coeff=n_coeff,
                                 anchor=anchor)
    elif experiment == "attraction":
        dist = _dist()
        rep = sweeps.sweep_attraction(
            dist, cfg.get("beta_minus_gamma", [0.4, 0.2, 0.1, 0.05]),
            gamma_exponent=cfg.get("gamma_exponent", 7.0 / 6.0),
            mc=mc, master_seed=seed, n_coeff=n_coeff,
            allow_invalid=args.allow_invalid_schedule, anchor=anchor)
    else:  # coupled / flory
        dist = _dist()
        kind = cfg.get("kind", "strip" if experiment == "flory" else "beta")
        exponent = cfg.get("exponent", 0.75)
        rep = sweeps.sweep_coupled(
            dist, kind=kind, exponent=exponent,
            coefficient=cfg.get("coefficient", 1.0),
            n_values=cfg.get("n_values", [128, 256, 512, 1024, 2048]),
            mc=mc, master_seed=seed,
            allow_invalid=args.allow_invalid_schedule, anchor=anchor)
    out = args.out or f"sweep_{experiment}.csv"
    echo = _config_echo(args, {"config_file": cfg, "experiment": experiment})
    write_csv(out, sweeps.SweepReport.CSV_HEADER, rep.csv_rows(), echo, seed)
    print(f"wrote {out}")
    side = {"fit_theta": vars(rep.fit_theta) if rep.fit_theta else None,
            "fit_r": vars(rep.fit_r) if rep.fit_r else None,
            "reference": rep.reference, "anchor": rep.anchor,
            "rows": [vars(r) for r in rep.rows]}
    jpath = str(Path(out).with_suffix(".json"))
    write_json(jpath, side, echo, seed)
    print(f"wrote {jpath}")
    if not args.no_figures:
        from .figures import plot_sweep
        png = str(Path(out).with_suffix(".png"))
        plot_sweep(rep, png)
        print(f"wrote {png}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return run_selftest()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polymerlab",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None,
                    help="worker count (POLYMERLAB_THREADS overrides)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="exact weighted enumeration")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--budget", type=int, default=exact.DEFAULT_BUDGET)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("mc", help="Monte Carlo sampling")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sampler", default="perm",
                   choices=["perm", "importance"])
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--tours", type=int, default=400)
    p.add_argument("--replicas", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c-low", type=float, default=0.2)
    p.add_argument("--c-high", type=float, default=5.0)
    p.add_argument("--max-pending", type=int, default=64)
    p.add_argument("--scale-per-step", type=float, default=0.0)
    p.add_argument("--drift", type=float, default=0.0)
    p.add_argument("--no-control", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("rate", help="finite-n rate curves")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--b-grid", default="0.2:2.0:19",
                   help="lo:hi:num grid of b (scaled) or theta (raw)")
    p.add_argument("--scaled", action="store_true",
                   help="weak-coupling scaled curve over b")
    p.add_argument("--split-at", type=float, default=0.0,
                   help="raw curves: side switches from le to ge here")
    p.add_argument("--budget", type=int, default=exact.DEFAULT_BUDGET)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("lemma-bn", help="local-CLT difference sum B_n")
    _add_model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_lemma_bn)

    p = sub.add_parser("renewal", help="piece-decomposition sequences")
    _add_model_flags(p)
    p.add_argument("--T", type=int, required=True, help="piece length")
    p.add_argument("--N", type=int, required=True, help="number of pieces")
    p.add_argument("--mode", default="saw", choices=["saw", "domb_joyce"])
    p.add_argument("--window-speed", type=float, default=None)
    p.add_argument("--window-halfwidth", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--eta", type=float, default=0.35)
    p.add_argument("--force-u-zero", action="store_true")
    p.add_argument("--budget", type=int, default=exact.DEFAULT_BUDGET)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_renewal)

    p = sub.add_parser("sweep", help="scaling-law parameter sweeps")
    p.add_argument("experiment", nargs="?", default=None,
                   choices=["beta", "sigma", "coupled", "attraction",
                            "strip", "flory"])
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--allow-invalid-schedule", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("selftest", help="run the exact-identity suites")
    p.set_defaults(func=_cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except BudgetError as e:
        print(f"resource budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AssertionError as e:
        print(f"internal invariant violation: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
