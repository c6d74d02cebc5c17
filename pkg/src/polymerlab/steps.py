"""Integer step distributions: families, moments, transforms, condition checks.

All walks in this package are driven by a zero-mean step distribution with
finite support on the integers.  The built-in families are

* ``simple``          -- +-1 with probability 1/2 each,
* ``uniform_range``   -- uniform on {-L, ..., -1, 1, ..., L},
* ``geometric_tail``  -- mass (1/2L) * ((L-1)/L)**(|x|-1) on x != 0,
                         truncated where the tail mass drops below 1e-15,
* ``custom``          -- any user-supplied finite pmf with mean zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PMF_TOL = 1e-12
GEOMETRIC_TAIL_CUTOFF = 1e-15
CONVOLUTION_SUPPORT_CAP = 1 << 24


@dataclass(frozen=True)
class StepDistribution:
    """A finite, zero-mean pmf on the integers with cached moments."""

    support: np.ndarray
    pmf: np.ndarray
    family_tag: str
    L: int | None = None
    mean: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        pmf = np.asarray(self.pmf, dtype=np.float64)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "pmf", pmf)
        if support.ndim != 1 or pmf.shape != support.shape:
            raise ValueError("support and pmf must be 1-d arrays of equal length")
        if len(np.unique(support)) != len(support):
            raise ValueError("support points must be distinct")
        if np.any(pmf < 0):
            raise ValueError("pmf entries must be non-negative")
        total = float(np.sum(pmf))
        if abs(total - 1.0) > PMF_TOL:
            raise ValueError(f"pmf sums to {total!r}, not 1")
        mean = float(np.dot(support, pmf))
        if abs(mean) > PMF_TOL:
            raise ValueError(f"step mean must be 0, got {mean!r}")
        variance = float(np.dot(support.astype(float) ** 2, pmf))
        if variance <= 0.0:
            raise ValueError("step variance must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", variance)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    @property
    def max_step(self) -> int:
        return int(np.max(np.abs(self.support)))

    def as_lists(self) -> tuple[list[int], list[float]]:
        """Support/pmf as plain lists, for tight pure-Python loops."""
        return [int(x) for x in self.support], [float(p) for p in self.pmf]


@dataclass(frozen=True)
class ConditionReport:
    """Numeric values of the technical step-family conditions at one L.

    The constants that would turn these into pass/fail thresholds are not
    pinned down, so the values are reported raw and plotted as trends in L.
    """

    family_tag: str
    L: int
    sigma: float
    truncated_second_moment: float
    max_pmf_scaled: float
    min_scaled_pmf: float
    exp_moment: float

    def __post_init__(self):
        for name in ("truncated_second_moment", "max_pmf_scaled",
                     "min_scaled_pmf", "exp_moment"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")


def make_distribution(family_tag: str, L: int | None = None,
                      pmf: dict | None = None) -> StepDistribution:
    """Build a validated step distribution from a family tag.

    ``uniform_range(L)`` puts mass 1/(2L) on each of {-L,..,-1,1,..,L};
    ``geometric_tail(L)`` has mass (1/2L)((L-1)/L)**(|x|-1) on x != 0,
    truncated at tail mass < 1e-15 and renormalized; ``simple`` is
    ``uniform_range(1)``.  ``custom`` takes an explicit ``pmf`` mapping.
    """
    if family_tag == "simple":
        return StepDistribution(np.array([-1, 1]), np.array([0.5, 0.5]), "simple", 1)
    if family_tag == "uniform_range":
        if L is None or L < 1:
            raise ValueError("uniform_range needs L >= 1")
        sup = np.array([x for x in range(-L, L + 1) if x != 0])
        return StepDistribution(sup, np.full(2 * L, 1.0 / (2 * L)), "uniform_range", L)
    if family_tag == "geometric_tail":
        if L is None or L < 2:
            raise ValueError("geometric_tail needs L >= 2 (L = 1 is degenerate)")
        q = (L - 1) / L
        # tail mass beyond |x| > K is q**K; truncate below the cutoff
        K = math.ceil(math.log(GEOMETRIC_TAIL_CUTOFF) / math.log(q))
        sup = np.array([x for x in range(-K, K + 1) if x != 0])
        raw = (1.0 / (2 * L)) * q ** (np.abs(sup) - 1)
        return StepDistribution(sup, raw / raw.sum(), "geometric_tail", L)
    if family_tag == "custom":
        if not pmf:
            raise ValueError("custom distribution needs a pmf mapping")
        items = sorted((int(k), float(v)) for k, v in pmf.items())
        sup = np.array([k for k, _ in items])
        probs = np.array([v for _, v in items])
        total = probs.sum()
        if not (probs > 0).all() or not math.isfinite(total) or abs(total - 1.0) > 1e-9:
            raise ValueError(f"custom pmf is not normalizable (mass {total!r})")
        return StepDistribution(sup, probs / total, "custom", L)
    raise ValueError(f"unknown family {family_tag!r}")


def distribution_from_config(cfg: dict) -> StepDistribution:
    """Build a distribution from its config-file form, e.g.
    {"family": "uniform_range", "L": 4} or
    {"family": "custom", "pmf": {"-1": 0.5, "1": 0.5}}."""
    return make_distribution(cfg["family"], cfg.get("L"), cfg.get("pmf"))


def char_fn(dist: StepDistribution, t):
    """Characteristic function sum_x pmf(x) e^{itx} at real t (scalar or array)."""
    t = np.asarray(t, dtype=np.float64)
    phi = np.sum(dist.pmf * np.exp(1j * np.outer(t.ravel(), dist.support)), axis=1)
    return complex(phi[0]) if t.ndim == 0 else phi.reshape(t.shape)


def step_law_convolution(dist: StepDistribution, k: int) -> dict[int, float]:
    """Exact pmf of the k-step sum S_k by repeated discrete convolution."""
    if k < 0:
        raise ValueError("k must be >= 0")
    smax = dist.max_step
    if 2 * k * smax + 1 > CONVOLUTION_SUPPORT_CAP:
        raise ValueError(f"support size for k={k} exceeds the memory cap")
    if k == 0:
        return {0: 1.0}
    base = np.zeros(2 * smax + 1)
    base[dist.support + smax] = dist.pmf
    cur = base.copy()
    for _ in range(k - 1):
        cur = np.convolve(cur, base)
    off = k * smax
    return {int(x - off): float(p) for x, p in enumerate(cur) if p > 0.0}


def convolution_table(dist: StepDistribution, nmax: int) -> list[np.ndarray]:
    """Dense pmf arrays of S_k for k = 0..nmax; entry k is centered at index k*smax."""
    smax = dist.max_step
    if 2 * nmax * smax + 1 > CONVOLUTION_SUPPORT_CAP:
        raise ValueError(f"support size for nmax={nmax} exceeds the memory cap")
    base = np.zeros(2 * smax + 1)
    base[dist.support + smax] = dist.pmf
    out = [np.array([1.0])]
    for _ in range(nmax):
        out.append(np.convolve(out[-1], base))
    return out


def check_conditions(family_tag: str, L_values, c1: float, N: float,
                     eps: float) -> list[ConditionReport]:
    """Evaluate the four step-family condition values for each L.

    Reported per L: the truncated second moment E((S/sigma)^2 1{|S/sigma|>N}),
    the scaled sup of the pmf sigma^{2/3} max_x P(S=x), the minimum of
    sigma P(S=x) over integer 0 < |x| <= c1*sigma, and the exponential
    moment E(e^{eps|S|/sigma}).
    """
    if c1 <= 0 or N <= 0 or eps <= 0:
        raise ValueError("c1, N and eps must be positive")
    reports = []
    for L in L_values:
        d = make_distribution(family_tag, L)
        sigma = d.sigma
        scaled = d.support / sigma
        trunc = float(np.sum(d.pmf * scaled**2 * (np.abs(scaled) > N)))
        max_scaled = sigma ** (2.0 / 3.0) * float(d.pmf.max())
        mass = dict(zip(d.support.tolist(), d.pmf.tolist()))
        span = int(math.floor(c1 * sigma))
        lo = min((sigma * mass.get(x, 0.0) for x in range(-span, span + 1) if x != 0),
                 default=0.0) if span >= 1 else 0.0
        expmom = float(np.sum(d.pmf * np.exp(eps * np.abs(scaled))))
        reports.append(ConditionReport(family_tag, L, sigma, trunc, max_scaled,
                                       lo, expmom))
    return reports
