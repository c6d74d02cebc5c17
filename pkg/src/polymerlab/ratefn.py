"""Finite-n large-deviation layer: approximative rate functions, tilted
cumulant functions, numeric Legendre transforms, reference-constant
transforms, and the local-CLT difference sum B_n.

The continuum reference constants live in ``EDWARDS``; they are fixed
literals, never fitted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .models import ModelSpec
from .steps import StepDistribution, convolution_table

INF = math.inf


@dataclass(frozen=True)
class ReferenceConstants:
    """Universal continuum constants used as scaling targets."""

    a_star: float = 2.19        # free-energy amplitude
    b_star: float = 1.11        # drift amplitude
    c_star: float = 0.63        # CLT spread (reported only, no target)
    b_dstar: float = 0.85       # end of the linear piece of the rate curve
    rho_a_dstar: float = 0.78   # kink location of the one-sided cumulant fn


EDWARDS = ReferenceConstants()


@dataclass(frozen=True)
class RatePoint:
    b_or_theta: float
    value: float
    side: str               # 'ge' or 'le'
    n: int
    beta: float
    gamma: float = 0.0
    L: int | None = None
    scaled: bool = False


@dataclass
class RateCurve:
    points: list[RatePoint] = field(default_factory=list)

    CSV_HEADER = ("b_or_theta", "value", "side", "n", "beta", "gamma", "L",
                  "scaled")

    def rows(self) -> list[tuple]:
        return [(p.b_or_theta, p.value, p.side, p.n, p.beta, p.gamma,
                 p.L if p.L is not None else "", int(p.scaled))
                for p in self.points]


def _ensemble_constrained(ensemble, con: exact.Constraint) -> float:
    import numpy as _np
    keep = _np.fromiter((con.admits(int(x), ensemble.n)
                         for x in ensemble.endpoints), dtype=bool,
                        count=len(ensemble.endpoints))
    total = float(ensemble.weights[keep].sum()) / ensemble.tours
    return total * math.exp(-ensemble.scale_per_step * ensemble.n)


def finite_rate(dist: StepDistribution, n: int, model: ModelSpec,
                theta: float, side: str, *,
                measure: exact.EnumerationResult | None = None,
                ensemble=None, budget: int = exact.DEFAULT_BUDGET,
                workers: int = 1) -> float:
    """-(1/n) log of the constrained partition value at drift theta.

    side 'ge' constrains {S_n >= theta n}, side 'le' constrains
    {0 <= S_n <= theta n}.  Returns +inf (flagged, not raised) when the
    constrained value is 0, so curves over grids stay total.  Backed by
    exact enumeration, or by a sampled ensemble when one is supplied.
    """
    if side not in ("ge", "le"):
        raise ValueError("side must be 'ge' or 'le'")
    con = exact.ge(theta) if side == "ge" else exact.between(theta)
    if ensemble is not None:
        if ensemble.n != n:
            raise ValueError("ensemble length does not match n")
        val = _ensemble_constrained(ensemble, con)
    else:
        val = exact.constrained_partition(dist, n, model, con,
                                          measure=measure, budget=budget,
                                          workers=workers)
    return -math.log(val) / n if val > 0.0 else INF


def mc_window_rate(ensemble, theta: float) -> float:
    """Sampled rate value at the window |S_n - theta n| <= n^{3/4}.

    The n^{3/4} half-width vanishes on the drift scale but swallows the
    CLT spread, which is what a drift-window estimate at large n needs.
    """
    n = ensemble.n
    con = exact.window(theta * n, n ** 0.75)
    val = _ensemble_constrained(ensemble, con)
    return -math.log(val) / n if val > 0.0 else INF


def finite_lambda(dist: StepDistribution, n: int, beta: float, mu: float,
                  sign: str | None = "ge0", *,
                  measure: exact.EnumerationResult | None = None,
                  budget: int = exact.DEFAULT_BUDGET, workers: int = 1) -> float:
    """(1/n) log of the tilted partition E(e^{-beta H'_n} e^{mu S_n} 1{sign})."""
    val = exact.tilted_partition(dist, n, beta, mu, sign, measure=measure,
                                 budget=budget, workers=workers)
    return math.log(val) / n if val > 0.0 else -INF


def lambda_grid(dist: StepDistribution, n: int, beta: float, mus, sign="ge0", *,
                budget: int = exact.DEFAULT_BUDGET,
                workers: int = 1) -> np.ndarray:
    """finite_lambda on a mu grid from a single enumeration."""
    measure = exact.tilted_endpoint_measure(dist, n, beta, budget=budget,
                                            workers=workers)
    return np.array([finite_lambda(dist, n, beta, m, sign, measure=measure)
                     for m in mus])


@dataclass(frozen=True)
class LegendreResult:
    b_grid: np.ndarray
    values: np.ndarray
    maximizer_mu: np.ndarray
    at_grid_edge: np.ndarray   # True where the maximizer hit a grid endpoint


def legendre(mus, lambda_values, b_grid) -> LegendreResult:
    """Grid Legendre transform I(b) = max_mu (mu b - Lambda(mu)).

    Grid maximization, not differentiation of fits: it stays robust where
    the transform has a kink.  Points whose maximizer sits on a grid
    endpoint are flagged (the mu window was too small there).
    """
    mus = np.asarray(mus, dtype=float)
    lam = np.asarray(lambda_values, dtype=float)
    if mus.ndim != 1 or len(mus) < 3 or np.any(np.diff(mus) <= 0):
        raise ValueError("mu grid must be sorted with at least 3 points")
    b_grid = np.asarray(b_grid, dtype=float)
    obj = np.outer(b_grid, mus) - lam[None, :]
    idx = np.argmax(obj, axis=1)
    vals = obj[np.arange(len(b_grid)), idx]
    edge = (idx == 0) | (idx == len(mus) - 1)
    return LegendreResult(b_grid, vals, mus[idx], edge)


def scaled_rate_curve(dist: StepDistribution, n: int, beta: float, b_grid, *,
                      budget: int = exact.DEFAULT_BUDGET,
                      workers: int = 1) -> RateCurve:
    """The rate curve in weak-coupling variables: beta^{-2/3} I at drift
    theta = b beta^{1/3}, side chosen by b against b* sigma^{2/3}.

    The curve minimum's location and height are the scaling observables,
    comparable to ``edwards_reference`` across beta.
    """
    from .models import domb_joyce
    model = domb_joyce(beta)
    measure = exact.enumerate_measure(dist, n, model, budget=budget,
                                      workers=workers)
    split = EDWARDS.b_star * dist.sigma ** (2.0 / 3.0)
    curve = RateCurve()
    for b in b_grid:
        theta = b * beta ** (1.0 / 3.0)
        side = "ge" if b >= split else "le"
        v = finite_rate(dist, n, model, theta, side, measure=measure)
        curve.points.append(RatePoint(float(b), beta ** (-2.0 / 3.0) * v, side,
                                      n, beta, scaled=True))
    return curve


def edwards_reference(sigma: float, beta: float) -> tuple[float, float]:
    """Predicted (theta*, r*) from the universal constants: pure arithmetic.

    theta* = b* sigma^{2/3} beta^{1/3} and r* = a* sigma^{-2/3} beta^{2/3};
    for beta = inf the beta factors are dropped (the self-avoiding limit).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s23 = sigma ** (2.0 / 3.0)
    if math.isinf(beta):
        return EDWARDS.b_star * s23, EDWARDS.a_star / s23
    if beta <= 0:
        raise ValueError("beta must be in (0, inf]")
    return (EDWARDS.b_star * s23 * beta ** (1.0 / 3.0),
            EDWARDS.a_star / s23 * beta ** (2.0 / 3.0))


@dataclass(frozen=True)
class BnResult:
    n: int
    bn: float                 # B_n, with the ordered-pair factor 2 included
    expected_G: float         # E(G_n) = 2(n+1) + B_n
    summands: np.ndarray      # the n weighted local-CLT differences, k = 1..n
    bn_profile: np.ndarray    # B_m for m = 0..n


def compute_bn(dist: StepDistribution, n: int) -> BnResult:
    """B_n = 2 sum_{k=1}^n (n-k+1) [2 P(S_k=0) - P(S_k=1) - P(S_k=-1)].

    Computed from exact step-law convolutions.  The diagonal bookkeeping is
    fixed so that E(G_n) = 2(n+1) + B_n holds exactly (validated against
    enumeration), and the whole profile B_m, m <= n, comes out of the same
    convolution table.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    table = convolution_table(dist, n)
    smax = dist.max_step
    d = np.zeros(n + 1)
    for k in range(1, n + 1):
        pk = table[k]
        c = k * smax
        d[k] = 2.0 * pk[c] - pk[c + 1] - pk[c - 1]
    ks = np.arange(n + 1)
    c1 = np.cumsum(d)
    c2 = np.cumsum(d * ks)
    profile = 2.0 * ((ks + 1) * c1 - c2)
    summands = 2.0 * (n - ks[1:] + 1) * d[1:]
    bn = float(profile[n])
    return BnResult(n, bn, 2.0 * (n + 1) + bn, summands, profile)
