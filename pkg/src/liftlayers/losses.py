"""Per-sample regression losses shared by the network engine and output lifting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOSS_KINDS = ("squared", "absolute", "truncated_linear")


@dataclass(frozen=True)
class LossSpec:
    """A loss ``L_y(u)`` of prediction ``u`` given target ``y``."""

    kind: str = "truncated_linear"
    truncation: float | None = 0.3

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.kind == "truncated_linear" and not (self.truncation and self.truncation > 0):
            raise ValueError("truncated_linear loss needs a positive truncation")

    def __call__(self, u, y):
        """Loss of predicting ``u`` for target ``y`` (broadcasts)."""
        r = np.asarray(u, dtype=float) - np.asarray(y, dtype=float)
        if self.kind == "squared":
            return r * r
        if self.kind == "absolute":
            return np.abs(r)
        return np.minimum(np.abs(r), self.truncation)

    def subgradient(self, u, y):
        """d loss / d u; zero on the flat part of the truncated loss and at ``u == y``."""
        r = np.asarray(u, dtype=float) - np.asarray(y, dtype=float)
        if self.kind == "squared":
            return 2.0 * r
        g = np.sign(r)
        if self.kind == "truncated_linear":
            g = np.where(np.abs(r) < self.truncation, g, 0.0)
        return g


def batch_loss(spec: LossSpec, pred: np.ndarray, target: np.ndarray):
    """Mean over samples of the summed per-output loss, and its gradient w.r.t. ``pred``."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float).reshape(pred.shape)
    n = pred.shape[0]
    value = float(np.sum(spec(pred, target)) / n)
    return value, spec.subgradient(pred, target) / n
