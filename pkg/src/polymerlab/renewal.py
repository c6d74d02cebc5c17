"""Piece decomposition and renewal identities for chopped-up walks.

A walk of length N*T is cut into N pieces of T steps.  Each piece carries a
weight X_i depending on that piece alone (its own interaction, an optional
endpoint window, tilt, and confinement), and neighboring pieces are coupled
through U_i in [0, 1]: the indicator that they overlap beyond the shared
point (self-avoiding mode), or 1 - e^{-beta * cross-interaction}
(soft-repulsion mode).  With

    c_N  = E( prod_{i<N} (1 - U_i) * prod_{i<=N} X_i )
    pi_m = E( prod_{i<m} U_i       * prod_{i<=m} X_i )

the telescoping expansion of prod (1 - U_i) gives the exact renewal
relation c_N = c_1 c_{N-1} + sum_{m>=2} (-1)^{m-1} pi_m c_{N-m}, and
Cauchy-Schwarz gives pi_m <= eps^{m-1} c_1^m with eps = sqrt(pi_2)/c_1.

Because pieces are i.i.d. and U_i couples only neighbors, the expectations
over all |support|^{NT} paths reorganize exactly into products of per-piece
transfer matrices over the m^T piece shapes; that is how they are computed
here (the naive path-by-path sum is kept as a test oracle).
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .exact import BudgetError, DEFAULT_BUDGET
from .steps import StepDistribution

_SHAPE_CAP = 2048  # keeps the U pair table below ~2048^2 entries


@dataclass(frozen=True)
class PieceModel:
    dist: StepDistribution
    piece_len: int
    mode: str = "saw"                      # 'saw' or 'domb_joyce'
    beta: float = 0.0
    mu: float = 0.0                        # endpoint tilt e^{mu S_T} per piece
    window: tuple[float, float] | None = None   # (speed b', half_width), lattice units
    delta: float | None = None             # confinement half-margin; None = disabled
    force_u_zero: bool = False             # test hook: decouple the pieces

    def __post_init__(self):
        if self.piece_len < 1:
            raise ValueError("piece_len must be >= 1")
        if self.mode not in ("saw", "domb_joyce"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "domb_joyce" and not self.beta >= 0.0:
            raise ValueError("domb_joyce mode needs beta >= 0")


@dataclass
class RenewalSequences:
    c: list[float]                 # c[0] = 1, c[1..N]
    pi: list[float]                # pi[1] = c[1]; pi[0] unused (0.0)
    eps: float = field(init=False)

    def __post_init__(self):
        if self.c[0] != 1.0 or len(self.c) != len(self.pi):
            raise ValueError("need c[0] = 1 and matching lengths")
        if len(self.c) > 2 and self.c[1] > 0.0:
            self.eps = math.sqrt(self.pi[2]) / self.c[1]
        else:
            self.eps = math.nan

    @property
    def N(self) -> int:
        return len(self.c) - 1


def _piece_shapes(pm: PieceModel):
    """Tabulate every T-step piece: probability, X weight, and the data the
    neighbor coupling needs (site sets / shifted local times)."""
    sup, pmfv = pm.dist.as_lists()
    m = len(sup)
    T = pm.piece_len
    if m**T > _SHAPE_CAP:
        raise BudgetError(f"|support|^T = {m}^{T} piece shapes exceed the "
                          f"pair-table cap {_SHAPE_CAP}")
    probs, xw, ends, sites_list, lt_list = [], [], [], [], []
    for seq in itertools.product(range(m), repeat=T):
        pos = [0]
        p = 1.0
        for j in seq:
            pos.append(pos[-1] + sup[j])
            p *= pmfv[j]
        end = pos[-1]
        ltp = Counter(pos[1:])                     # start point excluded
        x = 1.0
        if pm.mode == "saw":
            if len(set(pos)) != T + 1:
                x = 0.0
        else:
            counts = Counter(pos)
            h = sum(v * v for v in counts.values()) - (T + 1)
            hprime = h - 2 * (counts[0] - 1)
            x = math.exp(-pm.beta * hprime)
        if x and pm.mu:
            x *= math.exp(pm.mu * end)
        if x and pm.window is not None:
            speed, hw = pm.window
            if abs(end - speed * T) > hw + 1e-9:
                x = 0.0
        if x and pm.delta is not None:
            if min(pos) < -pm.delta - 1e-9 or max(pos) > end + pm.delta + 1e-9:
                x = 0.0
        probs.append(p)
        xw.append(x)
        ends.append(end)
        sites_list.append(frozenset(pos))
        lt_list.append(ltp)
    return np.array(probs), np.array(xw), ends, sites_list, lt_list


def _coupling_matrix(pm: PieceModel, ends, sites_list, lt_list) -> np.ndarray:
    """U(s, s') for piece s followed by piece s' (shifted to s's endpoint)."""
    M = len(ends)
    U = np.zeros((M, M))
    if pm.force_u_zero:
        return U
    for i in range(M):
        e = ends[i]
        if pm.mode == "saw":
            si = sites_list[i]
            for j in range(M):
                inter = sum(1 for y in sites_list[j] if (e + y) in si)
                U[i, j] = 1.0 if inter > 1 else 0.0   # endpoint is always shared
        else:
            li = lt_list[i]
            for j in range(M):
                cross = 2 * sum(cnt * li.get(e + y, 0)
                                for y, cnt in lt_list[j].items())
                if cross:
                    U[i, j] = -math.expm1(-pm.beta * cross)
    return U


def compute_sequences(pm: PieceModel, N: int, *,
                      budget: int = DEFAULT_BUDGET) -> RenewalSequences:
    """Exact c_1..c_N and pi_1..pi_N for N pieces of length T."""
    if N < 1:
        raise ValueError("N must be >= 1")
    m = len(pm.dist.support)
    if N * pm.piece_len * math.log(m) > math.log(budget):
        raise BudgetError(f"|support|^(N T) = {m}^{N * pm.piece_len} exceeds "
                          f"the budget of {budget} paths")
    probs, xw, ends, sites_list, lt_list = _piece_shapes(pm)
    a = probs * xw
    U = _coupling_matrix(pm, ends, sites_list, lt_list)
    Kc = (1.0 - U) * a[None, :]
    Kp = U * a[None, :]
    c = [1.0, float(a.sum())]
    pi = [0.0, c[1]]
    f = a.copy()
    g = a.copy()
    for _ in range(2, N + 1):
        f = f @ Kc
        g = g @ Kp
        c.append(float(f.sum()))
        pi.append(float(g.sum()))
    return RenewalSequences(c[:N + 1], pi[:N + 1])


def verify_renewal(seq: RenewalSequences) -> tuple[float, list[float]]:
    """Residuals of c_N = sum_{m=1}^N (-1)^{m-1} pi_m c_{N-m} for each N.

    The identity is an exact algebraic consequence of the expansion, so the
    residuals are expected to vanish to rounding.
    """
    residuals = []
    for N in range(1, seq.N + 1):
        rhs = sum((-1) ** (m - 1) * seq.pi[m] * seq.c[N - m]
                  for m in range(1, N + 1))
        residuals.append(seq.c[N] - rhs)
    return max((abs(r) for r in residuals), default=0.0), residuals


def verify_pi_bound(seq: RenewalSequences):
    """Check pi_m <= eps^{m-1} c_1^m for 2 <= m <= N; returns rows and violations."""
    rows = []
    violations = []
    for m_ in range(2, seq.N + 1):
        bound = seq.eps ** (m_ - 1) * seq.c[1] ** m_
        rows.append((m_, seq.pi[m_], bound))
        if seq.pi[m_] > bound * (1.0 + 1e-12) + 1e-300:
            violations.append(m_)
    return rows, violations


@dataclass(frozen=True)
class ContractionResult:
    hypothesis_ok: bool            # eps < eta held, so the iteration ran
    eps: float
    eta: float
    z: float | None = None
    tail_bound: float = 0.0        # truncation bound on the fixed-point series
    A: list[float] | None = None   # A_N = c_N (z/c_1)^N
    decay_rate: float | None = None  # fitted q in |A_N - A_{N-1}| ~ K q^N
    z_inverse_ok: bool | None = None  # 1/z >= 1 - 3 eta


def contraction_iteration(seq: RenewalSequences, eta: float) -> ContractionResult:
    """Solve 1 - z = sum_{m>=2} (-1)^{m-1} pi_m (z/c_1)^m and report the
    geometric decay of A_N = c_N (z/c_1)^N.

    Requires eps < eta; when the hypothesis fails the result is flagged and
    no root is attempted (that is a property of the model, not an error).
    """
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must be in (0, 1)")
    if not (seq.eps < eta):
        return ContractionResult(False, seq.eps, eta)
    c1 = seq.c[1]

    def h(z):
        rhs = sum((-1) ** (m - 1) * seq.pi[m] * (z / c1) ** m
                  for m in range(2, seq.N + 1))
        return 1.0 - z - rhs

    lo, hi = 0.0, 1.0
    while h(hi) > 0.0:
        hi *= 1.25
        if hi > 8.0:
            raise RuntimeError("no sign change found for the fixed-point root")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    # tail of the series beyond the truncation at m = N, via the pi bound
    ez = seq.eps * z
    tail = z * ez ** seq.N / (1.0 - ez) if ez < 1.0 else math.inf
    A = [seq.c[N_] * (z / c1) ** N_ for N_ in range(seq.N + 1)]
    diffs = [abs(A[k] - A[k - 1]) for k in range(1, len(A))]
    rate = None
    pos = [(k + 1, d) for k, d in enumerate(diffs) if d > 0.0]
    if len(pos) >= 2:
        ks = np.array([k for k, _ in pos], dtype=float)
        ls = np.log([d for _, d in pos])
        slope = np.polyfit(ks, ls, 1)[0]
        rate = float(math.exp(slope))
    return ContractionResult(True, seq.eps, eta, z, tail, A, rate,
                             1.0 / z >= 1.0 - 3.0 * eta - 1e-12)
