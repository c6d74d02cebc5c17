"""Figure rendering for the report paths: every sweep / curve CSV gets a
companion PNG next to it."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .ratefn import BnResult, RateCurve
from .sweeps import SweepReport

_X_KEYS = {"beta": "beta", "attraction": "beta", "sigma": "sigma",
           "strip": "L", "coupled": "n", "flory": "n"}


def _sweep_x(report: SweepReport):
    key = _X_KEYS.get(report.experiment, "n")
    xs = []
    for r in report.rows:
        if key == "n":
            xs.append(r.n)
        elif report.experiment == "attraction":
            xs.append(r.params["beta"] - r.params["gamma"])
        else:
            xs.append(r.params[key])
    label = {"beta": "beta", "attraction": "beta - gamma", "sigma": "sigma",
             "strip": "L", "coupled": "n", "flory": "n"}[report.experiment]
    return np.asarray(xs, dtype=float), label


def plot_sweep(report: SweepReport, path) -> None:
    xs, xlabel = _sweep_x(report)
    th = np.array([r.theta_hat for r in report.rows])
    th_se = np.array([r.theta_se for r in report.rows])
    sth = np.array([r.scaled_theta for r in report.rows])
    sth_se = np.array([r.scaled_theta_se for r in report.rows])
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))

    ax = axes[0]
    ax.errorbar(xs, th, yerr=3 * th_se, fmt="o", ms=4, capsize=2,
                label="drift estimate")
    if report.fit_theta is not None:
        f = report.fit_theta
        grid = np.geomspace(xs.min(), xs.max(), 64)
        x0 = xs[np.argmin(xs)]
        y0 = th[np.argmin(xs)]
        ax.plot(grid, y0 * (grid / x0) ** f.slope, "--",
                label=f"fit slope {f.slope:.3f}")
        ref = report.reference.get("theta_exponent")
        if ref is not None:
            ax.plot(grid, y0 * (grid / x0) ** ref, ":",
                    label=f"reference slope {ref:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("endpoint drift")
    ax.legend(fontsize=8)

    ax = axes[1]
    ax.errorbar(xs, sth, yerr=3 * sth_se, fmt="o", ms=4, capsize=2,
                label="scaled drift")
    amp = report.reference.get("theta_amplitude")
    if amp is not None:
        ax.axhline(amp, ls=":", color="C1", label=f"reference {amp:.2f}")
    ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("scaled drift amplitude")
    ax.legend(fontsize=8)

    fig.suptitle(f"{report.experiment} sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_rate_curve(curve: RateCurve, path) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for side, marker in (("ge", "o"), ("le", "s")):
        pts = [(p.b_or_theta, p.value) for p in curve.points
               if p.side == side and math.isfinite(p.value)]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker,
                    ms=4, label=f"{side} branch")
    scaled = curve.points and curve.points[0].scaled
    ax.set_xlabel("b" if scaled else "theta")
    ax.set_ylabel("scaled rate" if scaled else "rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_bn_profile(result: BnResult, path) -> None:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ms = np.arange(1, result.n + 1)
    ax.plot(ms, np.abs(result.bn_profile[1:]) / ms, lw=1)
    ax.set_xlabel("n")
    ax.set_ylabel("|B_n| / n")
    ax.set_xscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
