"""Exact-identity check suites.

These are the hard gates of the toolkit: algebraic identities that must
hold to rounding, each verified against an independent oracle (double sums,
brute-force enumeration, replayed incremental state).  The CLI `selftest`
subcommand runs all of them; the acceptance tests reuse them one by one.
"""
from __future__ import annotations

import itertools
import math
import random
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import exact, models
from .montecarlo import stream_seed
from .paths import energy, local_times, replay, strip_weight
from .ratefn import compute_bn
from .renewal import PieceModel, compute_sequences, verify_pi_bound, verify_renewal
from .steps import StepDistribution, make_distribution, step_law_convolution

_FAMILIES = (("simple", None), ("uniform_range", 2), ("geometric_tail", 3))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_paths(dist: StepDistribution, count: int, max_n: int, seed: int):
    rng = random.Random(seed)
    sup, pmfv = dist.as_lists()
    cum = np.cumsum(pmfv).tolist()
    for _ in range(count):
        n = rng.randint(1, max_n)
        pos = [0]
        for _ in range(n):
            u = rng.random()
            j = 0
            while cum[j] < u and j < len(sup) - 1:
                j += 1
            pos.append(pos[-1] + sup[j])
        yield pos


def _pair_count_oracle(path) -> tuple[int, int, int]:
    """O(n^2) double sums straight from the definitions: ordered coincident
    pairs over all times, the same excluding time 0, and neighbor pairs."""
    a = np.asarray(path)
    eq = a[:, None] == a[None, :]
    H = int(eq.sum()) - len(a)
    Hp = int(eq[1:, 1:].sum()) - (len(a) - 1)
    NP = int((np.abs(a[:, None] - a[None, :]) == 1).sum())
    return H, Hp, NP


def _g_oracle(path) -> int:
    counts = Counter(path)
    lo, hi = min(counts), max(counts)
    return sum((counts.get(x, 0) - counts.get(x + 1, 0)) ** 2
               for x in range(lo - 1, hi + 1))


def check_energy_identities(paths_per_family: int = 1000,
                            max_n: int = 200) -> CheckResult:
    """H, H', G and the attraction identity on random paths, all families."""
    t0 = time.time()
    grid = [(0.3, 0.0), (0.5, 0.2), (1.0, 0.7), (2.0, 1.9)]
    worst = 0.0
    count = 0
    for fi, (family, L) in enumerate(_FAMILIES):
        dist = make_distribution(family, L)
        for path in _random_paths(dist, paths_per_family, max_n,
                                  seed=987 + fi):
            n = len(path) - 1
            e = energy(path)
            H, Hp, NP = _pair_count_oracle(path)
            counts = local_times(path)
            if e.H != H or e.Hprime != Hp or e.neighbor_pairs != NP:
                return CheckResult("energy-identities", False,
                                   f"pair-count mismatch on {path[:8]}...",
                                   time.time() - t0)
            if e.H != sum(c * c for c in counts.values()) - (n + 1):
                return CheckResult("energy-identities", False,
                                   "H != sum l^2 - (n+1)", time.time() - t0)
            if e.Hprime != e.H - 2 * (counts[0] - 1):
                return CheckResult("energy-identities", False,
                                   "H' != H - 2(l(0)-1)", time.time() - t0)
            if e.G != _g_oracle(path):
                return CheckResult("energy-identities", False,
                                   "G mismatch", time.time() - t0)
            st = replay(path)
            if st.energy_state() != e:
                return CheckResult("energy-identities", False,
                                   "incremental replay != batch",
                                   time.time() - t0)
            for beta, gamma in grid:
                canonical = (beta - gamma) * e.H + 0.5 * gamma * e.G
                literal = beta * e.H - 0.5 * gamma * e.neighbor_pairs
                worst = max(worst, abs(literal - (canonical - gamma * (n + 1))))
            count += 1
    ok = worst <= 1e-10
    return CheckResult("energy-identities", ok,
                       f"{count} paths, attraction-identity residual {worst:.2e}",
                       time.time() - t0)


def check_enumeration_oracle() -> CheckResult:
    """Two-step partition formula, free-walk endpoint law, and the
    self-avoiding count, all against closed forms."""
    t0 = time.time()
    simple = make_distribution("simple")
    u2 = make_distribution("uniform_range", 2)
    worst = 0.0
    for beta in np.linspace(0.0, 2.0, 11):
        z = exact.enumerate_measure(simple, 2, models.domb_joyce(beta)).Z
        worst = max(worst, abs(z - 0.5 * (1.0 + math.exp(-2.0 * beta))))
    if worst > 1e-12:
        return CheckResult("enumeration-oracle", False,
                           f"Z_2 formula residual {worst:.2e}", time.time() - t0)
    for dist in (simple, u2):
        for n in range(1, 11):
            res = exact.enumerate_measure(dist, n, models.domb_joyce(0.0))
            conv = step_law_convolution(dist, n)
            d = max(abs(res.endpoint_pmf.get(x, 0.0) - p)
                    for x, p in conv.items())
            worst = max(worst, d, abs(res.Z - 1.0))
    if worst > 1e-12:
        return CheckResult("enumeration-oracle", False,
                           f"free-walk pmf residual {worst:.2e}",
                           time.time() - t0)
    for n in range(1, 21):
        z = exact.enumerate_measure(simple, n, models.saw()).Z
        worst = max(worst, abs(z - 2.0 ** (1 - n)))
    ok = worst <= 1e-12
    return CheckResult("enumeration-oracle", ok, f"max residual {worst:.2e}",
                       time.time() - t0)


def _strip_brute_force(path, L: int) -> float:
    """Enumerate all (2L+1)^(n+1) height assignments and count those whose
    heights are distinct at every revisited site."""
    q = 2 * L + 1
    ok = 0
    sites = list(path)
    for hs in itertools.product(range(q), repeat=len(sites)):
        seen = set()
        good = True
        for s, h in zip(sites, hs):
            if (s, h) in seen:
                good = False
                break
            seen.add((s, h))
        if good:
            ok += 1
    return ok / q ** len(sites)


def check_strip_exactness(sandwich_paths: int = 1000) -> CheckResult:
    """Conditional strip weight vs brute-force height enumeration, plus the
    log(1-x) <= -x sandwich against e^{-H/(4L+2)}."""
    t0 = time.time()
    simple = make_distribution("simple")
    worst = 0.0
    for n in range(1, 6):
        for steps in itertools.product((-1, 1), repeat=n):
            path = [0]
            for s in steps:
                path.append(path[-1] + s)
            counts = local_times(path)
            for L in (1, 2):
                w = strip_weight(counts, L)
                bf = _strip_brute_force(path, L)
                worst = max(worst, abs(w - bf))
    if worst > 1e-12:
        return CheckResult("strip-exactness", False,
                           f"brute-force residual {worst:.2e}", time.time() - t0)
    u2 = make_distribution("uniform_range", 2)
    bad = 0
    for fi, dist in enumerate((simple, u2)):
        for path in _random_paths(dist, sandwich_paths // 2, 200, seed=55 + fi):
            counts = local_times(path)
            H = sum(c * c for c in counts.values()) - len(path)
            for L in (1, 2, 4):
                if strip_weight(counts, L) > math.exp(-H / (4 * L + 2)) * (1 + 1e-12):
                    bad += 1
    ok = bad == 0
    return CheckResult("strip-exactness", ok,
                       f"brute residual {worst:.2e}, sandwich violations {bad}",
                       time.time() - t0)


def check_split_bound() -> CheckResult:
    """Piece-decoupling inequality on the full (beta, mu, n, T) grid."""
    t0 = time.time()
    dists = [make_distribution("simple"), make_distribution("uniform_range", 2)]
    worst = -math.inf
    checks = 0
    for dist in dists:
        for beta in (0.1, 0.3, 1.0):
            for mu in (-0.5, 0.0, 0.5):
                for n, T in ((4, 2), (6, 2), (6, 3), (8, 4)):
                    lhs, rhs = exact.split_bound_check(dist, n, T, beta, mu)
                    worst = max(worst, lhs - rhs * (1 + 1e-10))
                    checks += 1
    ok = worst <= 0.0
    return CheckResult("split-bound", ok,
                       f"{checks} grid points, max excess {worst:.2e}",
                       time.time() - t0)


def check_renewal_identity(budget: int = exact.DEFAULT_BUDGET) -> CheckResult:
    """Renewal relation residuals and the Cauchy-Schwarz bound on the full
    enumerable grid, plus the worked two-step self-avoiding values."""
    t0 = time.time()
    simple = make_distribution("simple")
    u2 = make_distribution("uniform_range", 2)
    seq = compute_sequences(PieceModel(simple, 2, "saw"), 3)
    worked = [(seq.c[1], 0.5), (seq.c[2], 0.125), (seq.c[3], 0.03125),
              (seq.pi[2], 0.125), (seq.pi[3], 0.03125),
              (seq.eps, 1.0 / math.sqrt(2.0))]
    werr = max(abs(a - b) for a, b in worked)
    if werr > 1e-14:
        return CheckResult("renewal-identity", False,
                           f"worked values residual {werr:.2e}",
                           time.time() - t0)
    worst = 0.0
    violations = []
    grid_points = 0
    for dist in (simple, u2):
        m = len(dist.support)
        for T in (2, 3):
            for mode, beta in (("saw", 0.0), ("domb_joyce", 0.05),
                               ("domb_joyce", 0.3)):
                for mu in (0.0, 0.2):
                    N = 5
                    while N * T * math.log(m) > math.log(budget):
                        N -= 1
                    if N < 2:
                        continue
                    pm = PieceModel(dist, T, mode, beta=beta, mu=mu)
                    seq = compute_sequences(pm, N, budget=budget)
                    worst = max(worst, verify_renewal(seq)[0])
                    violations += verify_pi_bound(seq)[1]
                    grid_points += 1
    ok = worst <= 1e-12 and not violations
    return CheckResult("renewal-identity", ok,
                       f"{grid_points} grid points, max residual {worst:.2e}, "
                       f"pi-bound violations {len(violations)}",
                       time.time() - t0)


def _expected_g_brute(dist: StepDistribution, n: int) -> float:
    """E(G_n) by vectorized enumeration of all |support|^n paths."""
    sup = dist.support
    m = len(sup)
    total = m**n
    if total > 2_000_000:
        raise exact.BudgetError("brute-force E(G) grid too large")
    idx = np.arange(total)
    digits = np.empty((total, n), dtype=np.int64)
    for k in range(n):
        digits[:, k] = idx % m
        idx = idx // m
    steps = sup[digits]
    pos = np.concatenate([np.zeros((total, 1), dtype=np.int64),
                          np.cumsum(steps, axis=1)], axis=1)
    smax = dist.max_step
    off = n * smax + 1
    lt = np.zeros((total, 2 * off + 2), dtype=np.int16)
    rows = np.repeat(np.arange(total), n + 1)
    np.add.at(lt, (rows, (pos + off).ravel()), 1)
    g = (np.diff(lt.astype(np.int32), axis=1) ** 2).sum(axis=1)
    probs = np.prod(dist.pmf[digits], axis=1)
    return float(probs @ g)


def check_bn_lemma(nmax: int = 2000) -> CheckResult:
    """B_n bookkeeping against brute-force E(G_n), and |B_n|/n boundedness
    up to n = 2000 relative to its value at n = 100."""
    t0 = time.time()
    simple = make_distribution("simple")
    u2 = make_distribution("uniform_range", 2)
    worst = 0.0
    for dist in (simple, u2):
        for n in range(1, 11):
            eg = compute_bn(dist, n).expected_G
            brute = _expected_g_brute(dist, n)
            worst = max(worst, abs(eg - brute))
    if worst > 1e-10:
        return CheckResult("bn-lemma", False,
                           f"E(G_n) residual {worst:.2e}", time.time() - t0)
    margin = math.inf
    for dist in (simple, u2):
        prof = compute_bn(dist, nmax).bn_profile
        ns = np.arange(1, nmax + 1)
        ratio = np.abs(prof[1:]) / ns
        bound = 1.1 * ratio[99]
        tail = ratio[99:]
        margin = min(margin, float(bound - tail.max()))
        if tail.max() > bound:
            return CheckResult("bn-lemma", False,
                               f"|B_n|/n exceeds 1.1x its n=100 value",
                               time.time() - t0)
    return CheckResult("bn-lemma", True,
                       f"E(G) residual {worst:.2e}, boundedness margin "
                       f"{margin:.3f} (n in [100, {nmax}])",
                       time.time() - t0)


ALL_CHECKS = (check_energy_identities, check_enumeration_oracle,
              check_strip_exactness, check_split_bound,
              check_renewal_identity, check_bn_lemma)


def run_selftest(verbose: bool = True) -> int:
    """Run the exact-identity suites; returns a process exit code."""
    failures = 0
    for fn in ALL_CHECKS:
        res = fn()
        failures += 0 if res.passed else 1
        if verbose:
            status = "PASS" if res.passed else "FAIL"
            print(f"[{status}] {res.name}: {res.detail} ({res.seconds:.1f}s)")
    return 0 if failures == 0 else 4
