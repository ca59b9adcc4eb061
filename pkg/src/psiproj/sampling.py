"""Random phase-space samples and numeric zero-testing of matrix functions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as ex
from .calculus import MatrixFn


def sample_points(box: Sequence[tuple], n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``n`` points with x uniform in ``box`` and xi uniform on the unit sphere."""
    rng = np.random.default_rng(seed)
    box = np.asarray(box, dtype=float)
    d = box.shape[0]
    xs = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((n, d))
    xis = rng.standard_normal((n, d))
    xis /= np.linalg.norm(xis, axis=1, keepdims=True)
    return xs, xis


@dataclass
class Residual:
    value: float
    samples: int
    skipped: int


class Sampler:
    """A fixed batch of phase-space points plus parameter bindings."""

    def __init__(self, box, n: int, seed: int, params=None):
        self.box = tuple(tuple(b) for b in box)
        self.n = n
        self.seed = seed
        self.params = dict(params or {})
        self.xs, self.xis = sample_points(self.box, n, seed)

    def evaluator(self) -> ex.Evaluator:
        return ex.Evaluator(self.xs, self.xis, self.params, strict=False)

    def values(self, mats: Sequence[MatrixFn], ev: ex.Evaluator | None = None) -> tuple[list[np.ndarray], np.ndarray]:
        """Arrays of shape (n, m, m) for each matrix, plus the invalid-point mask."""
        ev = ev or self.evaluator()
        out = [a.evaluate(ev) for a in mats]
        return out, ev.invalid.copy()

    def scalar_values(self, es: Sequence[ex.Expr]) -> tuple[list[np.ndarray], np.ndarray]:
        ev = self.evaluator()
        out = ev.values(list(es))
        return out, ev.invalid.copy()

    def residual(self, a: MatrixFn, b: MatrixFn | None = None) -> Residual:
        """max |a - b| over valid sample points (b defaults to zero)."""
        mats = [a] if b is None else [a, b]
        vals, bad = self.values(mats)
        diff = vals[0] if b is None else vals[0] - vals[1]
        return array_residual(diff, bad)


def array_residual(diff: np.ndarray, bad: np.ndarray | None = None) -> Residual:
    n = diff.shape[0]
    bad = np.zeros(n, dtype=bool) if bad is None else bad | ~np.isfinite(diff.reshape(n, -1)).all(axis=1)
    good = ~bad
    if not good.any():
        return Residual(float("inf"), 0, n)
    val = float(np.abs(diff[good]).max()) if diff[good].size else 0.0
    return Residual(val, int(good.sum()), int(bad.sum()))
