"""Polymer model specifications shared by the enumerator and the samplers.

A model assigns each n-step path a non-negative weight that factorizes over
growth steps given the incremental state:

* ``domb_joyce(beta)``  -- weight e^{-beta H_n}; beta = 0 is the free walk,
* ``saw``               -- indicator of no self-intersection (beta = infinity),
* ``attraction(beta, gamma)`` -- weight e^{-[(beta-gamma) H_n + (gamma/2) G_n]},
  valid only for gamma < beta (the non-collapsed phase),
* ``strip(L)``          -- the exact vertical-survival product
  prod_x prod_{k<l(x)} (1 - k/(2L+1)) of the width-(2L+1) strip walk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .paths import WalkState


class ConfigError(ValueError):
    """Invalid model / run configuration."""


class CollapsedPhaseError(ConfigError):
    """Attraction parameters with gamma >= beta (collapsed phase)."""


DOMB_JOYCE, SAW, ATTRACTION, STRIP = range(4)
_KIND_NAMES = {"domb_joyce": DOMB_JOYCE, "saw": SAW,
               "attraction": ATTRACTION, "strip": STRIP}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    beta: float = 0.0
    gamma: float = 0.0
    strip_L: int | None = None

    def __post_init__(self):
        if self.kind not in _KIND_NAMES:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.kind == "domb_joyce" and not self.beta >= 0.0:
            raise ConfigError("domb_joyce needs beta >= 0")
        if self.kind == "attraction":
            if not self.gamma >= 0.0:
                raise ConfigError("attraction needs gamma >= 0")
            if not self.beta > self.gamma:
                raise CollapsedPhaseError(
                    f"gamma={self.gamma} >= beta={self.beta} is the collapsed "
                    "phase and out of scope")
        if self.kind == "strip" and (self.strip_L is None or self.strip_L < 1):
            raise ConfigError("strip needs L >= 1")

    @property
    def kind_code(self) -> int:
        return _KIND_NAMES[self.kind]

    def label(self) -> str:
        if self.kind == "domb_joyce":
            return f"domb_joyce(beta={self.beta:g})"
        if self.kind == "attraction":
            return f"attraction(beta={self.beta:g},gamma={self.gamma:g})"
        if self.kind == "strip":
            return f"strip(L={self.strip_L})"
        return "saw"

    def path_weight(self, state: WalkState) -> float:
        """Model weight of the path held by an incremental state."""
        k = self.kind_code
        if k == DOMB_JOYCE:
            return math.exp(-self.beta * state.H)
        if k == SAW:
            return 1.0 if state.H == 0 else 0.0
        if k == ATTRACTION:
            return math.exp(-((self.beta - self.gamma) * state.H
                              + 0.5 * self.gamma * state.G))
        return state.strip_w

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("domb_joyce", "attraction"):
            d["beta"] = self.beta
        if self.kind == "attraction":
            d["gamma"] = self.gamma
        if self.kind == "strip":
            d["L"] = self.strip_L
        return d


def domb_joyce(beta: float) -> ModelSpec:
    return ModelSpec("domb_joyce", beta=float(beta))


def saw() -> ModelSpec:
    return ModelSpec("saw")


def attraction(beta: float, gamma: float) -> ModelSpec:
    return ModelSpec("attraction", beta=float(beta), gamma=float(gamma))


def strip(L: int) -> ModelSpec:
    return ModelSpec("strip", strip_L=int(L))


def model_from_dict(d: dict) -> ModelSpec:
    kind = d.get("kind", "domb_joyce")
    if kind == "strip":
        return strip(d["L"])
    if kind == "attraction":
        return attraction(d.get("beta", 0.0), d.get("gamma", 0.0))
    if kind == "saw":
        return saw()
    return domb_joyce(d.get("beta", 0.0))
