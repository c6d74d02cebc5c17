"""Parameter-sweep experiments: scaling of drift and free energy against
the universal reference constants.

Each sweep runs PERM at a ladder of couplings, using the reference
prediction for the coupling at hand both as the weight rescaling and as the
proposal drift (neither choice affects expectations).  Every sweep carries
one enumeration-anchored point at oracle scale whose sampler estimate is
cross-checked exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact, models
from .models import ConfigError, ModelSpec
from .montecarlo import (CltEstimate, PermParams, estimate_clt, run_replicas,
                         stream_seed)
from .ratefn import EDWARDS, compute_bn, edwards_reference
from .steps import StepDistribution, make_distribution

MIN_FIT_ESS = 5.0


class ScheduleError(ConfigError):
    """A coupling schedule violating the scaling-regime hypotheses."""


@dataclass(frozen=True)
class McBudget:
    replicas: int = 8
    tours: int = 400
    c_low: float = 0.2
    c_high: float = 5.0
    max_pending: int = 64
    workers: int = 1


@dataclass
class SweepRow:
    params: dict
    n: int
    theta_hat: float
    theta_se: float
    r_hat: float
    r_se: float
    sigma_star_hat: float
    sigma_star_se: float
    scaled_theta: float
    scaled_theta_se: float
    scaled_r: float
    scaled_r_se: float
    ess: float
    tours: int
    low_ess: bool


@dataclass(frozen=True)
class FitResult:
    slope: float
    slope_se: float
    amplitude: float
    amplitude_se: float
    points_used: int


@dataclass
class SweepReport:
    experiment: str
    rows: list[SweepRow] = field(default_factory=list)
    fit_theta: FitResult | None = None
    fit_r: FitResult | None = None
    reference: dict = field(default_factory=dict)
    anchor: dict | None = None
    config: dict = field(default_factory=dict)

    CSV_HEADER = ("experiment", "beta", "gamma", "L", "sigma", "n",
                  "theta_hat", "theta_se", "r_hat", "r_se",
                  "sigma_star_hat", "sigma_star_se",
                  "scaled_theta", "scaled_theta_se",
                  "scaled_r", "scaled_r_se", "ess", "tours", "low_ess")

    def csv_rows(self) -> list[tuple]:
        out = []
        for r in self.rows:
            p = r.params
            out.append((self.experiment, p.get("beta", ""), p.get("gamma", ""),
                        p.get("L", ""), p.get("sigma", ""), r.n,
                        r.theta_hat, r.theta_se, r.r_hat, r.r_se,
                        r.sigma_star_hat, r.sigma_star_se,
                        r.scaled_theta, r.scaled_theta_se,
                        r.scaled_r, r.scaled_r_se, r.ess, r.tours,
                        int(r.low_ess)))
        return out


def fit_scaling(x, y, y_se, ref_slope: float | None = None) -> FitResult:
    """Weighted least squares on (log x, log y), weights 1/stderr^2.

    The amplitude is read off at the smallest swept coupling (the point
    closest to the limit), dividing out x**slope with the reference slope
    when one is given, the fitted slope otherwise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    y_se = np.asarray(y_se, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 points to fit a power law")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive values")
    if len(np.unique(x)) < 2:
        raise ValueError("swept parameter is rank deficient")
    lx, ly = np.log(x), np.log(y)
    se_log = np.where(y_se > 0, y_se / y, np.max(y_se / y, initial=1e-6))
    se_log = np.maximum(se_log, 1e-9)
    wts = 1.0 / se_log**2
    X = np.column_stack([np.ones_like(lx), lx])
    cov = np.linalg.inv(X.T @ (wts[:, None] * X))
    coef = cov @ (X.T @ (wts * ly))
    slope = float(coef[1])
    slope_se = float(math.sqrt(max(cov[1, 1], 0.0)))
    i0 = int(np.argmin(x))
    use = ref_slope if ref_slope is not None else slope
    amp = float(y[i0] / x[i0] ** use)
    amp_se = float(y_se[i0] / x[i0] ** use)
    return FitResult(slope, slope_se, amp, amp_se, len(x))


def _perm_point(dist: StepDistribution, n: int, model: ModelSpec,
                mc: McBudget, seed: int, theta_pred: float,
                r_pred: float) -> CltEstimate:
    drift = min(theta_pred, 0.95 * dist.max_step)
    ens = run_replicas(dist, n, model, sampler="perm", replicas=mc.replicas,
                       budget=mc.tours, master_seed=seed, workers=mc.workers,
                       perm_params=PermParams(mc.c_low, mc.c_high, True,
                                              r_pred, drift, mc.max_pending))
    return estimate_clt(ens)


def _anchor_check(dist: StepDistribution, n: int, model: ModelSpec,
                  mc: McBudget, seed: int) -> dict:
    """Cross-check the sampler against exact enumeration at oracle scale.

    Anchors get at least 8 replicas so the jackknife errors have enough
    degrees of freedom to make the 3-sigma gate meaningful.
    """
    mc = McBudget(max(mc.replicas, 8), max(mc.tours, 200), mc.c_low,
                  mc.c_high, mc.max_pending, mc.workers)
    ex = exact.enumerate_measure(dist, n, model, workers=mc.workers)
    th_exact = sum(abs(x) * p for x, p in ex.endpoint_pmf.items()) / n
    est = _perm_point(dist, n, model, mc, seed, th_exact, -math.log(ex.Z) / n)
    z_theta = abs(est.theta_hat - th_exact) / max(est.theta_se, 1e-300)
    r_exact = -math.log(ex.Z) / n
    z_r = abs(est.r_hat - r_exact) / max(est.r_se, 1e-300)
    return {"n": n, "model": model.to_dict(), "theta_exact": th_exact,
            "theta_hat": est.theta_hat, "theta_se": est.theta_se,
            "z_theta": z_theta, "r_exact": r_exact, "r_hat": est.r_hat,
            "r_se": est.r_se, "z_r": z_r,
            "within_3se": bool(z_theta <= 3.0 and z_r <= 3.0)}


def default_n_beta(beta: float, coeff: float = 200.0) -> int:
    """Keep beta^{1/3} n well above sqrt(n): the drift dominates the CLT
    spread along this rule (beta n^{3/2} is constant, far from diffusive)."""
    return math.ceil(coeff * beta ** (-2.0 / 3.0))


def default_n_sigma(sigma: float, coeff: float = 200.0) -> int:
    return math.ceil(coeff * sigma ** (2.0 / 3.0))


def default_n_strip(L: int, coeff: float = 200.0) -> int:
    return math.ceil(coeff * (4 * L + 2) ** (2.0 / 3.0))


def _finish(report: SweepReport, xs, rows, ref_theta_slope, ref_r_slope=None):
    report.rows = rows
    ok = [i for i, r in enumerate(rows) if r.ess >= MIN_FIT_ESS]
    if len(ok) >= 3:
        xs_ok = [xs[i] for i in ok]
        report.fit_theta = fit_scaling(xs_ok, [rows[i].theta_hat for i in ok],
                                       [rows[i].theta_se for i in ok],
                                       ref_theta_slope)
        if ref_r_slope is not None:
            report.fit_r = fit_scaling(xs_ok, [rows[i].r_hat for i in ok],
                                       [rows[i].r_se for i in ok], ref_r_slope)
    return report


def sweep_beta(dist: StepDistribution, betas, *, mc: McBudget = McBudget(),
               master_seed: int = 0, n_coeff: float = 200.0,
               anchor: bool = True) -> SweepReport:
    """Vanishing self-repellence: theta ~ b* sigma^{2/3} beta^{1/3} and
    r ~ a* sigma^{-2/3} beta^{2/3}."""
    betas = sorted(float(b) for b in betas)
    if any(not 0.0 < b <= 1.0 for b in betas):
        raise ConfigError("beta values must lie in (0, 1]")
    s23 = dist.sigma ** (2.0 / 3.0)
    report = SweepReport("beta", reference={
        "theta_exponent": 1.0 / 3.0, "theta_amplitude": EDWARDS.b_star,
        "r_exponent": 2.0 / 3.0, "r_amplitude": EDWARDS.a_star})
    rows = []
    for i, beta in enumerate(betas):
        n = default_n_beta(beta, n_coeff)
        tp, rp = edwards_reference(dist.sigma, beta)
        est = _perm_point(dist, n, models.domb_joyce(beta), mc,
                          stream_seed(master_seed, i), tp, rp)
        b13 = beta ** (1.0 / 3.0)
        rows.append(SweepRow({"beta": beta, "sigma": dist.sigma}, n,
                             est.theta_hat, est.theta_se, est.r_hat, est.r_se,
                             est.sigma_star_hat, est.sigma_star_se,
                             est.theta_hat / (b13 * s23),
                             est.theta_se / (b13 * s23),
                             est.r_hat / (b13 * b13 / s23),
                             est.r_se / (b13 * b13 / s23),
                             est.ess, mc.tours, est.low_ess))
    _finish(report, betas, rows, 1.0 / 3.0, 2.0 / 3.0)
    if anchor:
        report.anchor = _anchor_check(dist, 12, models.domb_joyce(1.0), mc,
                                      stream_seed(master_seed, 999983))
    return report


def sweep_sigma(L_values, *, family: str = "uniform_range",
                mc: McBudget = McBudget(), master_seed: int = 0,
                n_coeff: float = 200.0, anchor: bool = True) -> SweepReport:
    """Self-avoiding walk with diverging step variance: theta ~ b* sigma^{2/3}.

    L = 1 (the trivial fully-stretched case) is rejected.
    """
    L_values = sorted(int(L) for L in L_values)
    if any(L < 2 for L in L_values):
        raise ConfigError("sigma sweep needs L >= 2 (L = 1 is trivial)")
    report = SweepReport("sigma", reference={
        "theta_exponent": 2.0 / 3.0, "theta_amplitude": EDWARDS.b_star})
    rows = []
    sigmas = []
    for i, L in enumerate(L_values):
        dist = make_distribution(family, L)
        sigma = dist.sigma
        s23 = sigma ** (2.0 / 3.0)
        n = default_n_sigma(sigma, n_coeff)
        tp, rp = edwards_reference(sigma, math.inf)
        est = _perm_point(dist, n, models.saw(), mc,
                          stream_seed(master_seed, i), tp, rp)
        sigmas.append(sigma)
        rows.append(SweepRow({"L": L, "sigma": sigma}, n,
                             est.theta_hat, est.theta_se, est.r_hat, est.r_se,
                             est.sigma_star_hat, est.sigma_star_se,
                             est.theta_hat / s23, est.theta_se / s23,
                             est.r_hat * s23, est.r_se * s23,
                             est.ess, mc.tours, est.low_ess))
    _finish(report, sigmas, rows, 2.0 / 3.0)
    if anchor:
        dist = make_distribution(family, L_values[0])
        report.anchor = _anchor_check(dist, 10, models.saw(), mc,
                                      stream_seed(master_seed, 999983))
    return report


def sweep_strip(L_values, *, horizontal: str = "simple",
                mc: McBudget = McBudget(), master_seed: int = 0,
                n_coeff: float = 200.0, anchor: bool = True) -> SweepReport:
    """Self-avoiding walk on a widening strip: theta ~ b* sigma^{2/3} (4L)^{-1/3}."""
    L_values = sorted(int(L) for L in L_values)
    if any(L < 1 for L in L_values):
        raise ConfigError("strip sweep needs L >= 1")
    dist = make_distribution(horizontal)
    s23 = dist.sigma ** (2.0 / 3.0)
    report = SweepReport("strip", reference={
        "theta_exponent": -1.0 / 3.0,
        "theta_amplitude": EDWARDS.b_star * s23})
    rows = []
    for i, L in enumerate(L_values):
        n = default_n_strip(L, n_coeff)
        tp, rp = edwards_reference(dist.sigma, 1.0 / (4 * L + 2))
        est = _perm_point(dist, n, models.strip(L), mc,
                          stream_seed(master_seed, i), tp, rp)
        f = (4.0 * L) ** (1.0 / 3.0)
        rows.append(SweepRow({"L": L, "sigma": dist.sigma}, n,
                             est.theta_hat, est.theta_se, est.r_hat, est.r_se,
                             est.sigma_star_hat, est.sigma_star_se,
                             est.theta_hat * f / s23, est.theta_se * f / s23,
                             est.r_hat * (4 * L + 2) ** (2.0 / 3.0) * s23,
                             est.r_se * (4 * L + 2) ** (2.0 / 3.0) * s23,
                             est.ess, mc.tours, est.low_ess))
    _finish(report, L_values, rows, -1.0 / 3.0)
    if anchor:
        report.anchor = _anchor_check(dist, 5, models.strip(L_values[0]), mc,
                                      stream_seed(master_seed, 999983))
    return report


def validate_coupled_schedule(kind: str, exponent: float,
                              allow_invalid: bool = False) -> None:
    """The coupled limits need beta_n -> 0 with beta_n n^{3/2} -> inf
    (so 0 < a < 3/2 for beta_n = c n^{-a}), respectively L_n -> inf with
    L_n n^{-3/2} -> 0 (so 0 < nu < 3/2 for L_n = n^nu)."""
    if allow_invalid:
        return
    if kind not in ("beta", "strip"):
        raise ScheduleError(f"unknown coupled schedule {kind!r}")
    if not 0.0 < exponent < 1.5:
        raise ScheduleError(
            f"schedule exponent {exponent} leaves the valid range (0, 3/2); "
            "pass the negative-control flag to run it anyway")


def sweep_coupled(dist: StepDistribution, *, kind: str = "beta",
                  exponent: float = 0.75, coefficient: float = 1.0,
                  n_values=(128, 256, 512, 1024, 2048),
                  mc: McBudget = McBudget(), master_seed: int = 0,
                  allow_invalid: bool = False,
                  anchor: bool = True) -> SweepReport:
    """Coupled limit: the coupling decays with n (beta_n = c n^{-a}) or the
    strip widens with n (L_n = ceil(c n^a)); the scaled drift column should
    trend to b* as n grows.  a = 3/4 with the strip kind is the choice that
    puts both coordinates on the n^{3/4} scale."""
    validate_coupled_schedule(kind, exponent, allow_invalid)
    s23 = dist.sigma ** (2.0 / 3.0)
    tag = "flory" if (kind == "strip" and abs(exponent - 0.75) < 1e-12) else "coupled"
    report = SweepReport(tag, reference={"theta_amplitude": EDWARDS.b_star},
                         config={"kind": kind, "exponent": exponent,
                                 "coefficient": coefficient})
    rows = []
    for i, n in enumerate(sorted(int(v) for v in n_values)):
        if kind == "beta":
            beta_n = coefficient * n ** (-exponent)
            model = models.domb_joyce(beta_n)
            tp, rp = edwards_reference(dist.sigma, beta_n)
            scale = beta_n ** (1.0 / 3.0) * s23
            params = {"beta": beta_n, "sigma": dist.sigma}
        else:
            L_n = max(1, math.ceil(coefficient * n ** exponent))
            model = models.strip(L_n)
            tp, rp = edwards_reference(dist.sigma, 1.0 / (4 * L_n + 2))
            scale = (4.0 * L_n) ** (-1.0 / 3.0) * s23
            params = {"L": L_n, "sigma": dist.sigma}
        est = _perm_point(dist, n, model, mc, stream_seed(master_seed, i),
                          tp, rp)
        rows.append(SweepRow(params, n, est.theta_hat, est.theta_se,
                             est.r_hat, est.r_se,
                             est.sigma_star_hat, est.sigma_star_se,
                             est.theta_hat / scale, est.theta_se / scale,
                             math.nan, math.nan,
                             est.ess, mc.tours, est.low_ess))
    report.rows = rows
    if anchor and kind == "beta":
        n0 = 12
        beta0 = coefficient * n0 ** (-exponent)
        report.anchor = _anchor_check(dist, n0, models.domb_joyce(beta0), mc,
                                      stream_seed(master_seed, 999983))
    return report


def sweep_attraction(dist: StepDistribution, beta_minus_gamma, *,
                     gamma_exponent: float = 7.0 / 6.0,
                     mc: McBudget = McBudget(), master_seed: int = 0,
                     n_coeff: float = 200.0, allow_invalid: bool = False,
                     anchor: bool = True) -> SweepReport:
    """Repulsion with subordinate attraction: theta ~ b* sigma^{2/3}
    (beta-gamma)^{1/3} as long as gamma (beta-gamma)^{-2/3} -> 0.

    The default schedule sets gamma = (beta-gamma)^{7/6}, which drives the
    restriction quantity to zero like (beta-gamma)^{1/2}.
    """
    bt = sorted(float(b) for b in beta_minus_gamma)
    if any(b <= 0 for b in bt):
        raise ConfigError("beta - gamma must be positive")
    gammas = [b ** gamma_exponent for b in bt]
    restr = [g * b ** (-2.0 / 3.0) for g, b in zip(gammas, bt)]
    if not allow_invalid:
        # the restriction quantity must decrease toward 0 with the coupling
        if any(restr[i] >= restr[i + 1] * (1 + 1e-12) for i in range(len(bt) - 1)) \
                or min(restr) > 1.0:
            raise ScheduleError(
                "schedule does not drive gamma (beta-gamma)^{-2/3} to zero; "
                "pass the negative-control flag to run it anyway")
    s23 = dist.sigma ** (2.0 / 3.0)
    report = SweepReport("attraction", reference={
        "theta_exponent": 1.0 / 3.0, "theta_amplitude": EDWARDS.b_star})
    rows = []
    for i, (b_t, gamma) in enumerate(zip(bt, gammas)):
        beta = b_t + gamma
        n = default_n_beta(b_t, n_coeff)
        tp, rp = edwards_reference(dist.sigma, b_t)
        est = _perm_point(dist, n, models.attraction(beta, gamma), mc,
                          stream_seed(master_seed, i), tp, rp)
        b13 = b_t ** (1.0 / 3.0)
        eg = compute_bn(dist, n)
        rows.append(SweepRow({"beta": beta, "gamma": gamma, "sigma": dist.sigma,
                              "gamma_correction_scale":
                                  0.5 * gamma * eg.expected_G / n}, n,
                             est.theta_hat, est.theta_se, est.r_hat, est.r_se,
                             est.sigma_star_hat, est.sigma_star_se,
                             est.theta_hat / (b13 * s23),
                             est.theta_se / (b13 * s23),
                             est.r_hat / (b13 * b13 / s23),
                             est.r_se / (b13 * b13 / s23),
                             est.ess, mc.tours, est.low_ess))
    _finish(report, bt, rows, 1.0 / 3.0, 2.0 / 3.0)
    if anchor:
        b0 = bt[-1]
        report.anchor = _anchor_check(
            dist, 12, models.attraction(b0 + b0 ** gamma_exponent,
                                        b0 ** gamma_exponent),
            mc, stream_seed(master_seed, 999983))
    return report
