"""Samplers: free-walk importance sampling and PERM chain growth.

Reproducibility contract (bit-exact): replica k of a run with master seed s
uses the k-th stream seed

    stream(s, k) = mix64((s + (k+1) * 0x9E3779B97F4A7C15) mod 2^64)

where mix64 is the SplitMix64 finalizer (xor-shift 30 / mul 0xBF58476D1CE4E5B9
/ xor-shift 27 / mul 0x94D049BB133111EB / xor-shift 31).  The importance
sampler feeds the stream seed to numpy's PCG64; the PERM sampler feeds it to
``random.Random`` and draws only ``random()``.  Replicas are independent
units of work; results are aggregated in replica order, so ensembles are
identical for any worker count.
"""
from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .models import ATTRACTION, DOMB_JOYCE, SAW, STRIP, ModelSpec
from .steps import StepDistribution

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_seed(master_seed: int, index: int) -> int:
    """Counter-based stream split: the (index+1)-th SplitMix64 output."""
    return mix64((master_seed + (index + 1) * _GOLDEN) & _MASK64)


class InsufficientReplicasError(ValueError):
    """Standard errors need at least two replicas."""


def _tilt_for_drift(sup, pmfv, drift: float) -> float:
    """kappa such that the e^{kappa s}-tilted step law has mean ``drift``."""
    smax = max(sup)
    if not 0.0 <= drift < smax:
        raise ValueError(f"target drift must lie in [0, {smax})")
    if drift == 0.0:
        return 0.0

    def mean(k):
        ws = [p * math.exp(k * s) for s, p in zip(sup, pmfv)]
        return sum(w * s for w, s in zip(ws, sup)) / sum(ws)

    lo, hi = 0.0, 1.0
    while mean(hi) < drift:
        hi *= 2.0
        if hi > 700.0 / smax:
            raise ValueError("drift too close to the maximal step")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mean(mid) < drift:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class WeightedEnsemble:
    """Endpoint samples with importance weights from one replica.

    ``weights`` are stored rescaled by e^{+scale_per_step * n} so they stay
    in a healthy float range at large n; the deterministic scale cancels in
    all self-normalized statistics and is removed in ``log_z_hat``.
    """

    endpoints: np.ndarray          # int endpoints S_n
    weights: np.ndarray            # rescaled non-negative importance weights
    tours: int                     # independent units started (tours / paths)
    n: int
    model: ModelSpec
    seed: int                      # stream seed actually used
    replica_id: int
    sampler: str                   # 'importance' or 'perm'
    chains: int = 0                # chains grown (perm diagnostics)
    died: int = 0                  # chains that hit weight zero or were pruned
    scale_per_step: float = 0.0    # log rescaling applied per growth step

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def log_z_hat(self) -> float:
        t = self.total_weight
        if t <= 0.0:
            return -math.inf
        return math.log(t / self.tours) - self.scale_per_step * self.n

    @property
    def z_hat(self) -> float:
        return math.exp(self.log_z_hat)

    @property
    def ess(self) -> float:
        sw = self.weights.sum()
        s2 = float(self.weights @ self.weights)
        return float(sw * sw / s2) if s2 > 0.0 else 0.0

    @property
    def low_ess(self) -> bool:
        return self.ess < 0.01 * max(len(self.weights), 1)


@dataclass(frozen=True)
class CltEstimate:
    """Self-normalized endpoint statistics with jackknife standard errors."""

    theta_hat: float               # E_Q(|S_n|) / n
    theta_se: float
    r_hat: float                   # -(1/n) log Z_hat
    r_se: float
    sigma_star_hat: float          # weighted std of (|S_n| - theta n)/sqrt(n)
    sigma_star_se: float
    n: int
    replicas: int
    ess: float                     # pooled effective sample size
    low_ess: bool


# --------------------------------------------------------------------------
# importance sampling from the free walk

def sample_importance(dist: StepDistribution, n: int, model: ModelSpec,
                      samples: int, seed: int,
                      replica_id: int = 0) -> WeightedEnsemble:
    """Draw free-walk paths and weight each by its model weight.

    The mean weight is an unbiased estimate of the partition value.  Only
    usable where the free walk overlaps the target (finite beta, moderate
    n); the self-avoiding model is rejected since nearly all weights would
    vanish.
    """
    if model.kind_code == SAW:
        raise ValueError("importance sampling from the free walk cannot "
                         "target the self-avoiding model; use PERM")
    rng = np.random.Generator(np.random.PCG64(seed))
    smax = dist.max_step
    width = 2 * n * smax + 3
    off = n * smax + 1
    endpoints = np.empty(samples, dtype=np.int64)
    weights = np.empty(samples, dtype=np.float64)
    chunk = max(1, min(samples, (1 << 22) // width))
    if model.kind_code == STRIP:
        q = 2 * model.strip_L + 1
        ftab = np.ones(n + 2)
        for c in range(1, n + 2):
            ftab[c] = ftab[c - 1] * max(1.0 - (c - 1) / q, 0.0)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        steps = rng.choice(dist.support, size=(b, n), p=dist.pmf)
        pos = np.concatenate([np.zeros((b, 1), dtype=np.int64),
                              np.cumsum(steps, axis=1)], axis=1)
        lt = np.zeros((b, width), dtype=np.int32)
        rows = np.repeat(np.arange(b), n + 1)
        np.add.at(lt, (rows, (pos + off).ravel()), 1)
        H = (lt.astype(np.int64) ** 2).sum(axis=1) - (n + 1)
        k = model.kind_code
        if k == DOMB_JOYCE:
            w = np.exp(-model.beta * H)
        elif k == ATTRACTION:
            G = (np.diff(lt, axis=1, prepend=0) ** 2).sum(axis=1).astype(np.int64)
            w = np.exp(-(model.beta - model.gamma) * H - 0.5 * model.gamma * G)
        else:  # STRIP
            w = ftab[np.minimum(lt, n + 1)].prod(axis=1)
        endpoints[done:done + b] = pos[:, -1]
        weights[done:done + b] = w
        done += b
    return WeightedEnsemble(endpoints, weights, samples, n, model, seed,
                            replica_id, "importance", chains=samples)


# --------------------------------------------------------------------------
# PERM: pruned-enriched Rosenbluth growth

@dataclass(frozen=True)
class PermParams:
    """Population-control thresholds, relative to the running per-tour
    average weight at each depth.

    ``scale_per_step`` multiplies every step factor by e^{scale}; it is a
    deterministic rescaling (typically the predicted free energy per step)
    that keeps weights representable at large n without touching any
    estimate.  Control ratios are scale-invariant.

    ``drift`` activates a persistence proposal: steps are additionally
    biased by e^{kappa s} away from the origin, with kappa chosen so the
    biased step mean equals ``drift``, and the bias is divided back out of
    the weight.  This matches the proposal to the ballistic polymer one
    chain at a time (each chain commits to the side it is on) and only
    affects variance, never expectations.
    """

    c_low: float = 0.2
    c_high: float = 5.0
    control: bool = True
    scale_per_step: float = 0.0
    drift: float = 0.0
    max_pending: int = 64   # enrichment backlog cap per tour (cascade guard)


def sample_perm(dist: StepDistribution, n: int, model: ModelSpec, tours: int,
                seed: int, params: PermParams = PermParams(),
                replica_id: int = 0) -> WeightedEnsemble:
    """Grow chains step by step with Rosenbluth weighting and population
    control; the tour-averaged weight at depth n estimates Z_n unbiasedly.

    Steps are proposed proportionally to pmf(s) * local model factor and the
    chain weight absorbs the proposal normalizer, so at beta = 0 every
    weight is exactly 1.  A chain whose weight falls below c_low times the
    running average weight at its depth is killed with probability 1/2
    (else its weight doubles); above c_high times the average it splits
    into two half-weight copies.  The very first chain to reach a depth
    grows uncontrolled (no average exists yet); decisions depend only on
    already-recorded weights, so the depth-n estimate stays unbiased.
    """
    sup, pmfv = dist.as_lists()
    m = len(sup)
    smax = dist.max_step
    off = n * smax + 1
    lt = [0] * (2 * off + 1)
    lt[off] = 1
    kind = model.kind_code
    beta, gamma = model.beta, model.gamma
    # per-visit factor tables where the factor depends only on l(x); the
    # attraction model also needs the neighboring local times.
    if kind == DOMB_JOYCE:
        base = math.exp(-2.0 * beta)
        ftab = [base ** l for l in range(n + 1)]
    elif kind == SAW:
        ftab = [1.0] + [0.0] * n
    elif kind == STRIP:
        q = 2 * model.strip_L + 1
        ftab = [max(1.0 - l / q, 0.0) for l in range(n + 1)]
    else:
        bg = beta - gamma
        hg = 0.5 * gamma
        dj = [math.exp(-2.0 * bg * l) for l in range(n + 1)]
    # the gradient term of a single point is 2, so the per-step increments
    # telescope from e^{-gamma}; start attraction tours there
    w0 = math.exp(-gamma) if kind == ATTRACTION else 1.0
    rng_random = random.Random(seed).random
    sum_w = [0.0] * (n + 1)
    tours_seen = [0] * (n + 1)   # tours that have contributed at each depth
    endpoints: list[int] = []
    weights: list[float] = []
    c_low, c_high = params.c_low, params.c_high
    control = params.control
    max_pending = params.max_pending
    scale = math.exp(params.scale_per_step)
    kappa = _tilt_for_drift(sup, pmfv, params.drift)
    g_mid = [1.0] * m
    g_up = [math.exp(kappa * s) for s in sup]
    g_dn = [math.exp(-kappa * s) for s in sup]
    chains = 0
    died = 0
    facs = [0.0] * m

    last_tour = [-1] * (n + 1)
    for tour in range(tours):
        trail: list[int] = []
        posd = [off] * (n + 1)
        pending = [(0, w0)]
        while pending:
            depth, w = pending.pop()
            while len(trail) > depth:
                lt[trail.pop()] -= 1
            chains += 1
            x = posd[depth]
            while depth < n:
                g = g_up if x > off else (g_dn if x < off else g_mid)
                tot = 0.0
                if kind == ATTRACTION:
                    for j in range(m):
                        i2 = x + sup[j]
                        l_old = lt[i2]
                        dg = 2 + 2 * (2 * l_old - lt[i2 - 1] - lt[i2 + 1])
                        f = pmfv[j] * dj[l_old] * math.exp(-hg * dg) * g[j]
                        facs[j] = f
                        tot += f
                else:
                    for j in range(m):
                        f = pmfv[j] * ftab[lt[x + sup[j]]] * g[j]
                        facs[j] = f
                        tot += f
                if tot <= 0.0:
                    died += 1
                    break
                r = rng_random() * tot
                j = 0
                acc = facs[0]
                while acc < r and j < m - 1:
                    j += 1
                    acc += facs[j]
                w *= tot * scale / g[j]
                depth += 1
                x += sup[j]
                lt[x] += 1
                trail.append(x)
                posd[depth] = x
                prior_w = sum_w[depth]
                prior_t = tours_seen[depth]
                sum_w[depth] = prior_w + w
                if last_tour[depth] != tour:
                    last_tour[depth] = tour
                    tours_seen[depth] = prior_t + 1
                if depth == n:
                    endpoints.append(x - off)
                    weights.append(w)
                    break
                if control and prior_t and prior_w > 0.0:
                    ratio = w * prior_t / prior_w
                    if ratio > c_high:
                        if len(pending) < max_pending:
                            w *= 0.5
                            pending.append((depth, w))
                    elif ratio < c_low:
                        if rng_random() < 0.5:
                            died += 1
                            break
                        w *= 2.0
        while trail:
            lt[trail.pop()] -= 1
    return WeightedEnsemble(np.array(endpoints, dtype=np.int64),
                            np.array(weights), tours, n, model, seed,
                            replica_id, "perm", chains, died,
                            params.scale_per_step)


# --------------------------------------------------------------------------
# replica driving and pooled estimates

def _replica_task(args):
    (sampler, dist, n, model, budget, master_seed, replica_id, params) = args
    s = stream_seed(master_seed, replica_id)
    if sampler == "perm":
        return sample_perm(dist, n, model, budget, s, params, replica_id)
    return sample_importance(dist, n, model, budget, s, replica_id)


def run_replicas(dist: StepDistribution, n: int, model: ModelSpec, *,
                 sampler: str = "perm", replicas: int = 4, budget: int = 200,
                 master_seed: int = 0, perm_params: PermParams = PermParams(),
                 workers: int = 1) -> list[WeightedEnsemble]:
    """Run independent replicas (tours for PERM, paths for importance
    sampling) and return them ordered by replica index."""
    if sampler not in ("perm", "importance"):
        raise ValueError(f"unknown sampler {sampler!r}")
    tasks = [(sampler, dist, n, model, budget, master_seed, r, perm_params)
             for r in range(replicas)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_replica_task, tasks))
    return [_replica_task(t) for t in tasks]


def _jackknife(stat_fn, parts):
    """Leave-one-out standard error of stat_fn(list of replica summaries)."""
    R = len(parts)
    full = stat_fn(parts)
    loo = np.array([stat_fn(parts[:i] + parts[i + 1:]) for i in range(R)])
    var = (R - 1) / R * np.sum((loo - loo.mean()) ** 2)
    return full, math.sqrt(var)


def estimate_clt(ensembles: list[WeightedEnsemble]) -> CltEstimate:
    """Pooled self-normalized estimators with jackknife-over-replicas errors."""
    if len(ensembles) < 2:
        raise InsufficientReplicasError("need at least 2 replicas for "
                                        "standard errors")
    n = ensembles[0].n
    scale = ensembles[0].scale_per_step
    if any(e.n != n or e.scale_per_step != scale for e in ensembles):
        raise ValueError("replicas must share n and weight scaling")
    parts = []
    for e in ensembles:
        a = np.abs(e.endpoints)
        parts.append((float(e.weights.sum()), float(e.weights @ a),
                      float(e.weights @ (a * a)), e.tours))

    def theta(ps):
        sw = sum(p[0] for p in ps)
        return sum(p[1] for p in ps) / sw / n

    def rhat(ps):
        z_scaled = sum(p[0] for p in ps) / sum(p[3] for p in ps)
        return -(math.log(z_scaled) - scale * n) / n

    def sstar(ps):
        sw = sum(p[0] for p in ps)
        m1 = sum(p[1] for p in ps) / sw
        m2 = sum(p[2] for p in ps) / sw
        return math.sqrt(max(m2 - m1 * m1, 0.0) / n)

    th, th_se = _jackknife(theta, parts)
    r, r_se = _jackknife(rhat, parts)
    ss, ss_se = _jackknife(sstar, parts)
    all_w = np.concatenate([e.weights for e in ensembles])
    sw = all_w.sum()
    ess = float(sw * sw / (all_w @ all_w)) if all_w.size else 0.0
    return CltEstimate(th, th_se, r, r_se, ss, ss_se, n, len(ensembles),
                       ess, ess < 0.01 * max(all_w.size, 1))
