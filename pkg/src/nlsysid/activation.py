"""Piecewise-linear, 1-Lipschitz activations with a lower bound on the slope.

Every activation here has unit slope on the positive half-line and a constant
slope ``s`` in [0, 1] on the negative half-line, so ``min_slope == s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

LINEAR = "linear"
RELU = "relu"
LEAKY_RELU = "leaky_relu"
BLENDED = "blended"

_KINDS = (LINEAR, RELU, LEAKY_RELU, BLENDED)


@dataclass(frozen=True)
class Activation:
    kind: str
    beta: float = 0.0
    base: Optional["Activation"] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == LEAKY_RELU and not 0.0 <= self.beta <= 1.0:
            raise ValueError("leaky ReLU slope must lie in [0, 1]")
        if self.kind == BLENDED:
            if self.base is None:
                raise ValueError("blended activation needs a base")
            if not 0.0 < self.beta <= 1.0:
                raise ValueError("blend weight must lie in (0, 1]")

    @property
    def negative_slope(self) -> float:
        """Slope of the activation on x < 0."""
        if self.kind == LINEAR:
            return 1.0
        if self.kind == RELU:
            return 0.0
        if self.kind == LEAKY_RELU:
            return float(self.beta)
        return (1.0 - self.beta) * self.base.negative_slope + self.beta

    @property
    def min_slope(self) -> float:
        return self.negative_slope

    @property
    def is_odd(self) -> bool:
        # unit slope on both half-lines is the only odd member of this family
        return self.negative_slope == 1.0

    def __call__(self, x):
        return evaluate(self, x)

    def to_dict(self) -> dict[str, Any]:
        if self.kind in (LINEAR, RELU):
            return {"kind": self.kind}
        if self.kind == LEAKY_RELU:
            return {"kind": self.kind, "beta": self.beta}
        return {"kind": self.kind, "beta": self.beta, "base": self.base.to_dict()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Activation":
        kind = d["kind"]
        if kind == LINEAR:
            return linear()
        if kind == RELU:
            return relu()
        if kind == LEAKY_RELU:
            return leaky_relu(float(d["beta"]))
        if kind == BLENDED:
            return blend(cls.from_dict(d["base"]), float(d["beta"]))
        raise ValueError(f"unknown activation kind {kind!r}")

    def label(self) -> str:
        if self.kind == LEAKY_RELU:
            return f"leaky_relu_{self.beta:g}"
        if self.kind == BLENDED:
            return f"blend_{self.base.label()}_{self.beta:g}"
        return self.kind


def linear() -> Activation:
    return Activation(LINEAR, 1.0)


def relu() -> Activation:
    return Activation(RELU, 0.0)


def leaky_relu(beta: float) -> Activation:
    return Activation(LEAKY_RELU, float(beta))


def blend(base: Activation, beta: float) -> Activation:
    """Mix ``base`` with the identity: x -> (1 - beta) * base(x) + beta * x.

    ``base`` must be increasing and 1-Lipschitz with base(0) = 0, which every
    activation in this module is. The result has min slope >= beta.
    """
    return Activation(BLENDED, float(beta), base)


def evaluate(act: Activation, x):
    x = np.asarray(x, dtype=np.float64)
    if act.kind == LINEAR:
        out = x.copy()
    elif act.kind == RELU:
        out = np.maximum(x, 0.0)
    elif act.kind == LEAKY_RELU:
        out = np.maximum(act.beta * x, x)
    else:
        out = (1.0 - act.beta) * evaluate(act.base, x) + act.beta * x
    return out if out.ndim else float(out)


def derivative(act: Activation, x):
    """phi'(x). At the kink x = 0 the right derivative (1) is returned."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0.0, 1.0, act.negative_slope)
    return out if out.ndim else float(out)


def parse(desc) -> Activation:
    """Accept an Activation, a descriptor dict, or a short string like 'leaky_relu:0.5'."""
    if isinstance(desc, Activation):
        return desc
    if isinstance(desc, dict):
        return Activation.from_dict(desc)
    name, _, arg = str(desc).partition(":")
    if name == LEAKY_RELU:
        return leaky_relu(float(arg))
    return Activation.from_dict({"kind": name})
