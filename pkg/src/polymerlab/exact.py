"""Exact weighted enumeration over all n-step paths.

Depth-first traversal with incremental local-time and energy updates; the
integer energy layer is exact and weights are exponentiated only at the
leaves.  Outer sums use Kahan compensation.  The traversal is always
partitioned on the first step and the per-branch partial sums are combined
in support order, so results are bitwise identical for any worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .models import (ATTRACTION, DOMB_JOYCE, SAW, STRIP, ModelSpec)
from .steps import StepDistribution

DEFAULT_BUDGET = 10**8
_DJ_PRIME = 4  # internal weight e^{-beta H'} used by the tilted partition


class BudgetError(RuntimeError):
    """Enumeration would exceed the configured leaf budget."""


@dataclass(frozen=True)
class EnumerationResult:
    Z: float
    raw_measure: dict[int, float]    # endpoint -> E(weight 1{S_n = x})
    endpoint_pmf: dict[int, float]   # raw_measure / Z when Z > 0
    n: int
    model: ModelSpec | None
    leaves: int


def _check_budget(m: int, n: int, budget: int) -> None:
    if n * math.log(m) > math.log(budget):
        raise BudgetError(f"|support|^n = {m}^{n} exceeds the budget of "
                          f"{budget} leaf visits")


def _dfs_branch(sup, pmfv, n, j0, kind, beta, gamma, strip_q):
    """Enumerate all paths whose first step is sup[j0]; returns partial sums.

    Returns (zsum, zcomp, sums, comps, leaves) where sums/comps are Kahan
    accumulator arrays over endpoint offsets.
    """
    m = len(sup)
    smax = max(abs(s) for s in sup)
    off = n * smax + 1
    width = 2 * off + 1
    lt = [0] * width
    lt[off] = 1
    sums = [0.0] * width
    comps = [0.0] * width
    zsum = 0.0
    zcomp = 0.0
    leaves = 0
    exp = math.exp

    choice = [0] * (n + 1)
    posd = [off] * (n + 1)
    probd = [1.0] * (n + 1)
    Hd = [0] * (n + 1)
    Gd = [2] * (n + 1)
    stripd = [1.0] * (n + 1)

    choice[0] = j0
    depth = 0
    while True:
        j = choice[depth]
        if j >= (j0 + 1 if depth == 0 else m):
            if depth == 0:
                break
            lt[posd[depth]] -= 1
            depth -= 1
            continue
        choice[depth] = j + 1
        x2 = posd[depth] + sup[j]
        l_old = lt[x2]
        if kind == SAW:
            if l_old:
                continue
        elif kind == STRIP and l_old == strip_q:
            continue
        d1 = depth + 1
        p2 = probd[depth] * pmfv[j]
        H2 = Hd[depth] + 2 * l_old
        lt[x2] = l_old + 1
        if d1 == n:
            leaves += 1
            if kind == DOMB_JOYCE:
                w = exp(-beta * H2) * p2
            elif kind == SAW:
                w = p2
            elif kind == STRIP:
                w = stripd[depth] * (1.0 - l_old / strip_q) * p2
            elif kind == ATTRACTION:
                G2 = Gd[depth] + 2 + 2 * (2 * l_old - lt[x2 - 1] - lt[x2 + 1])
                w = exp(-(beta - gamma) * H2 - 0.5 * gamma * G2) * p2
            else:  # _DJ_PRIME
                w = exp(-beta * (H2 - 2 * (lt[off] - 1))) * p2
            y = w - zcomp
            t = zsum + y
            zcomp = (t - zsum) - y
            zsum = t
            y = w - comps[x2]
            t = sums[x2] + y
            comps[x2] = (t - sums[x2]) - y
            sums[x2] = t
            lt[x2] = l_old
            continue
        posd[d1] = x2
        probd[d1] = p2
        Hd[d1] = H2
        if kind == ATTRACTION:
            Gd[d1] = Gd[depth] + 2 + 2 * (2 * l_old - lt[x2 - 1] - lt[x2 + 1])
        elif kind == STRIP:
            stripd[d1] = stripd[depth] * (1.0 - l_old / strip_q)
        depth = d1
        choice[depth] = 0
    return zsum, zcomp, sums, comps, leaves, off


def _branch_task(args):
    return _dfs_branch(*args)


def _enumerate_raw(dist: StepDistribution, n: int, kind: int, beta: float,
                   gamma: float, strip_q: float, budget: int,
                   workers: int) -> tuple[float, dict[int, float], int]:
    sup, pmfv = dist.as_lists()
    m = len(sup)
    _check_budget(m, n, budget)
    if n == 0:
        return 1.0, {0: 1.0}, 1
    tasks = [(sup, pmfv, n, j0, kind, beta, gamma, strip_q) for j0 in range(m)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, m)) as pool:
            parts = list(pool.map(_branch_task, tasks))
    else:
        parts = [_dfs_branch(*t) for t in tasks]
    # combine in fixed support order: Kahan for Z, ordered adds per endpoint
    Z = 0.0
    zc = 0.0
    leaves = 0
    width = len(parts[0][2])
    total = [0.0] * width
    off = parts[0][5]
    for zsum, _, sums, _, nl, _ in parts:
        y = zsum - zc
        t = Z + y
        zc = (t - Z) - y
        Z = t
        leaves += nl
        for i, v in enumerate(sums):
            if v:
                total[i] += v
    raw = {i - off: v for i, v in enumerate(total) if v != 0.0}
    return Z, raw, leaves


def enumerate_measure(dist: StepDistribution, n: int, model: ModelSpec, *,
                      budget: int = DEFAULT_BUDGET,
                      workers: int = 1) -> EnumerationResult:
    """Exact partition value and endpoint measures of a model at length n."""
    Z, raw, leaves = _enumerate_raw(dist, n, model.kind_code, model.beta,
                                    model.gamma,
                                    float(2 * model.strip_L + 1) if model.strip_L else 0.0,
                                    budget, workers)
    pmf = {x: v / Z for x, v in raw.items()} if Z > 0.0 else {}
    return EnumerationResult(Z, raw, pmf, n, model, leaves)


def tilted_endpoint_measure(dist: StepDistribution, n: int, beta: float, *,
                            budget: int = DEFAULT_BUDGET,
                            workers: int = 1) -> EnumerationResult:
    """Endpoint measure weighted by e^{-beta H'_n} (origin visits discounted).

    One enumeration serves every tilt mu and sign restriction, since the
    tilt only multiplies the endpoint marginal by e^{mu x}.
    """
    Z, raw, leaves = _enumerate_raw(dist, n, _DJ_PRIME, beta, 0.0, 0.0,
                                    budget, workers)
    pmf = {x: v / Z for x, v in raw.items()} if Z > 0.0 else {}
    return EnumerationResult(Z, raw, pmf, n, None, leaves)


def tilted_partition(dist: StepDistribution, n: int, beta: float, mu: float,
                     sign_restriction: str | None = None, *,
                     budget: int = DEFAULT_BUDGET, workers: int = 1,
                     measure: EnumerationResult | None = None) -> float:
    """E(e^{-beta H'_n} e^{mu S_n} [1{S_n >= 0} or 1{S_n <= 0}]), exactly.

    Pass a precomputed ``tilted_endpoint_measure`` result to evaluate many
    (mu, sign) pairs from one enumeration.
    """
    if sign_restriction not in (None, "ge0", "le0"):
        raise ValueError("sign_restriction must be None, 'ge0' or 'le0'")
    if measure is None:
        measure = tilted_endpoint_measure(dist, n, beta, budget=budget,
                                          workers=workers)
    total = 0.0
    for x, v in sorted(measure.raw_measure.items()):
        if sign_restriction == "ge0" and x < 0:
            continue
        if sign_restriction == "le0" and x > 0:
            continue
        total += v * math.exp(mu * x)
    return total


@dataclass(frozen=True)
class Constraint:
    """Endpoint constraint: 'ge' (S_n >= a*n), 'between' (0 <= S_n <= a*n),
    or 'window' (|S_n - a| <= half_width, in lattice units)."""

    kind: str
    a: float
    half_width: float = 0.0

    def admits(self, x: int, n: int) -> bool:
        if self.kind == "ge":
            return x >= self.a * n - 1e-9
        if self.kind == "between":
            return -1e-9 <= x <= self.a * n + 1e-9
        return abs(x - self.a) <= self.half_width + 1e-9


def ge(theta: float) -> Constraint:
    return Constraint("ge", theta)


def between(theta: float) -> Constraint:
    return Constraint("between", theta)


def window(center: float, half_width: float) -> Constraint:
    return Constraint("window", center, half_width)


def approx_window(theta: float, n: int) -> Constraint:
    """The closed lattice window [floor(theta n), ceil(theta n)] encoding
    'S_n is approximately theta n' in a parity-robust way."""
    lo = math.floor(theta * n)
    hi = math.ceil(theta * n)
    return Constraint("window", 0.5 * (lo + hi), 0.5 * (hi - lo))


def constrained_partition(dist: StepDistribution, n: int, model: ModelSpec,
                          constraint: Constraint, *,
                          budget: int = DEFAULT_BUDGET, workers: int = 1,
                          measure: EnumerationResult | None = None) -> float:
    """E(model weight * 1{constraint on S_n}), exactly."""
    if constraint.kind not in ("ge", "between", "window"):
        raise ValueError(f"unknown constraint {constraint.kind!r}")
    if measure is None:
        measure = enumerate_measure(dist, n, model, budget=budget,
                                    workers=workers)
    return sum(v for x, v in sorted(measure.raw_measure.items())
               if constraint.admits(x, n))


def split_bound_check(dist: StepDistribution, n: int, T: int, beta: float,
                      mu: float, *, budget: int = DEFAULT_BUDGET,
                      workers: int = 1) -> tuple[float, float]:
    """Both sides of the piece-decoupling bound Z_n(mu) <= Z_T(mu)^{n/T}.

    Dropping the interaction between length-T blocks can only increase the
    weight, so lhs <= rhs exactly; callers assert it.
    """
    if T < 1 or n % T != 0:
        raise ValueError("T must divide n")
    lhs = tilted_partition(dist, n, beta, mu, budget=budget, workers=workers)
    zt = tilted_partition(dist, T, beta, mu, budget=budget, workers=workers)
    return lhs, zt ** (n // T)
