"""Local times and interaction energies of integer lattice paths.

Energy bookkeeping convention: the intersection count H sums over ordered
time pairs i != j, i.e. twice the number of unordered self-intersections
(a path revisiting one site once has H = 2).  All counts here are exact
integers; couplings multiply them only at the point of use.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass


@dataclass(frozen=True)
class EnergyState:
    """Integer interaction counts of one path."""

    H: int                # ordered coincident time pairs, = sum l^2 - (n+1)
    Hprime: int           # same with time 0 removed, = H - 2(l(0)-1)
    G: int                # sum over x of (l(x) - l(x+1))^2
    neighbor_pairs: int   # ordered pairs at distance 1, = 2 sum l(x) l(x+1)


def _check_path(path) -> None:
    if len(path) == 0 or path[0] != 0:
        raise ValueError("path must start at the origin")


def local_times(path) -> Counter:
    """Visit counts l_n(x) = #{0 <= i <= n : S_i = x}."""
    _check_path(path)
    return Counter(path)


def energy(path) -> EnergyState:
    """Batch evaluation of all interaction counts from the local times."""
    counts = local_times(path)
    n_plus_1 = len(path)
    H = sum(c * c for c in counts.values()) - n_plus_1
    Hprime = H - 2 * (counts[0] - 1)
    lo, hi = min(counts), max(counts)
    G = 0
    NP = 0
    for x in range(lo - 1, hi + 1):
        a = counts.get(x, 0)
        b = counts.get(x + 1, 0)
        G += (a - b) ** 2
        NP += a * b
    return EnergyState(H, Hprime, G, 2 * NP)


def is_saw(path) -> bool:
    """True iff all positions are distinct (equivalently H = 0)."""
    _check_path(path)
    return len(set(path)) == len(path)


def energy_attraction(path, beta: float, gamma: float) -> float:
    """Repulsion-plus-attraction energy in the canonical form.

    Returns (beta - gamma) * H + (gamma / 2) * G, the combined energy with
    the constant terms n+1 and beta(n+1) absorbed into the normalization.
    The literal pair-count form equals this minus gamma*(n+1).
    """
    if not (beta > gamma >= 0.0):
        raise ValueError(f"need beta > gamma >= 0 (collapsed phase at gamma >= beta), "
                         f"got beta={beta}, gamma={gamma}")
    e = energy(path)
    return (beta - gamma) * e.H + 0.5 * gamma * e.G


def strip_weight(counts, L: int) -> float:
    """Probability that i.i.d. uniform heights on {-L,..,L} are distinct at
    every revisited site: prod_x prod_{k=0}^{l(x)-1} (1 - k/(2L+1)).

    Returns 0 as soon as some site is visited more than 2L+1 times.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    q = 2 * L + 1
    w = 1.0
    for c in counts.values():
        if c > q:
            return 0.0
        for k in range(1, c):
            w *= 1.0 - k / q
    return w


class WalkState:
    """A path grown one step at a time with O(1) energy updates and undo.

    Used by the samplers and the exact enumerator; `extend` appends a step
    and updates the local-time field and all counts, `undo` reverses the
    last step exactly.  In strip mode the running vertical-survival weight
    is tracked as a product (0.0 once any site is visited 2L+1 times).
    """

    __slots__ = ("pos", "nsteps", "counts", "H", "G", "neighbor_pairs",
                 "strip_L", "strip_w", "_trail")

    def __init__(self, strip_L: int | None = None):
        self.pos = 0
        self.nsteps = 0
        self.counts = {0: 1}
        self.H = 0
        self.G = 2
        self.neighbor_pairs = 0
        self.strip_L = strip_L
        self.strip_w = 1.0
        self._trail = []

    def extend(self, step: int) -> None:
        counts = self.counts
        x = self.pos + step
        l_old = counts.get(x, 0)
        l_left = counts.get(x - 1, 0)
        l_right = counts.get(x + 1, 0)
        dH = 2 * l_old
        dG = 2 + 2 * (2 * l_old - l_left - l_right)
        dNP = 2 * (l_left + l_right)
        self._trail.append((self.pos, x, dH, dG, dNP, self.strip_w))
        counts[x] = l_old + 1
        self.pos = x
        self.nsteps += 1
        self.H += dH
        self.G += dG
        self.neighbor_pairs += dNP
        if self.strip_L is not None:
            self.strip_w *= 1.0 - l_old / (2 * self.strip_L + 1)

    def undo(self) -> None:
        prev_pos, x, dH, dG, dNP, strip_w = self._trail.pop()
        c = self.counts[x] - 1
        if c:
            self.counts[x] = c
        else:
            del self.counts[x]
        self.pos = prev_pos
        self.nsteps -= 1
        self.H -= dH
        self.G -= dG
        self.neighbor_pairs -= dNP
        self.strip_w = strip_w

    @property
    def Hprime(self) -> int:
        return self.H - 2 * (self.counts[0] - 1)

    @property
    def log_strip_w(self) -> float:
        return math.log(self.strip_w) if self.strip_w > 0.0 else -math.inf

    def energy_state(self) -> EnergyState:
        return EnergyState(self.H, self.Hprime, self.G, self.neighbor_pairs)


def replay(path, strip_L: int | None = None) -> WalkState:
    """Build the incremental state of a whole path by repeated extension."""
    _check_path(path)
    st = WalkState(strip_L)
    for a, b in zip(path, path[1:]):
        st.extend(b - a)
    return st
