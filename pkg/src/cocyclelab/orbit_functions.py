"""Orbit-window functions and weighted sup norms.

An OrbitFunction is a function Omega -> R^d restricted to a contiguous
orbit window {sigma^k anchor : lo <= k <= hi}; the weighted norms are the
windowed surrogates of the essential sup norms, and every report carries
the window so the finite-horizon caveat stays visible.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class WeightModel:
    """Positive weight rule omega -> C(omega)."""

    rule: Callable
    tempered: bool = True
    descriptor: str = ""

    def __call__(self, point):
        c = float(self.rule(point))
        if not c > 0.0:
            raise ValueError(f"weight must be positive, got {c}")
        return c

    @staticmethod
    def unit():
        return WeightModel(rule=lambda p: 1.0, tempered=True, descriptor="unit")

    @staticmethod
    def constant(value):
        v = float(value)
        return WeightModel(rule=lambda p: v, tempered=True, descriptor=f"const({v})")


@dataclass(eq=False)
class OrbitFunction:
    """Values f(sigma^k anchor) for k in [lo, hi], plus optional weights.

    Immutable by convention once constructed.  ``tail_bound`` is attached
    by solvers that truncate a series.
    """

    base: object
    anchor: object
    lo: int
    hi: int
    values: np.ndarray  # (hi-lo+1, d)
    weights: Optional[np.ndarray] = None
    tail_bound: Optional[float] = None

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if vals.shape[0] != self.hi - self.lo + 1:
            raise ValueError("values length does not match window")
        if not np.all(np.isfinite(vals)):
            raise ValueError("orbit function values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def indices(self):
        return range(self.lo, self.hi + 1)

    def point(self, k):
        return self.base.step(self.anchor, k)

    def value(self, k, default=None):
        if self.lo <= k <= self.hi:
            return self.values[k - self.lo]
        if default is not None:
            return default
        raise KeyError(f"index {k} outside window [{self.lo}, {self.hi}]")

    def restrict(self, lo, hi):
        if lo < self.lo or hi > self.hi or lo > hi:
            raise ValueError("restriction window not contained in function window")
        return OrbitFunction(
            base=self.base, anchor=self.anchor, lo=lo, hi=hi,
            values=self.values[lo - self.lo : hi - self.lo + 1].copy(),
        )

    def combine(self, other, a=1.0, b=1.0):
        """a*self + b*other on the shared window."""
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            raise ValueError("windows do not overlap")
        vals = a * self.values[lo - self.lo : hi - self.lo + 1] + b * other.values[
            lo - other.lo : hi - other.lo + 1
        ]
        return OrbitFunction(base=self.base, anchor=self.anchor, lo=lo, hi=hi, values=vals)

    @staticmethod
    def from_rule(base, anchor, lo, hi, fn):
        vals = np.array([np.asarray(fn(base.step(anchor, k)), dtype=float)
                         for k in range(lo, hi + 1)])
        return OrbitFunction(base=base, anchor=anchor, lo=lo, hi=hi, values=vals)

    @staticmethod
    def constant(base, anchor, lo, hi, vector):
        v = np.asarray(vector, dtype=float)
        vals = np.tile(v, (hi - lo + 1, 1))
        return OrbitFunction(base=base, anchor=anchor, lo=lo, hi=hi, values=vals)

    @staticmethod
    def zeros(base, anchor, lo, hi, dim):
        return OrbitFunction(base=base, anchor=anchor, lo=lo, hi=hi,
                             values=np.zeros((hi - lo + 1, dim)))


def weight_samples(f, C):
    """C evaluated along the window of f (array aligned with f.values)."""
    if C is None:
        return np.ones(f.hi - f.lo + 1)
    return np.array([C(f.point(k)) for k in f.indices])


def weighted_norm(f, C=None):
    """max over the window of C(sigma^k w) ||f(sigma^k w)||.

    C may be None (unweighted), a WeightModel, or a precomputed array of
    weights aligned with the window.  Windowed surrogate for the essential
    sup; the window size travels with the OrbitFunction.
    """
    norms = np.linalg.norm(f.values, axis=1)
    if C is None:
        return float(np.max(norms))
    if isinstance(C, np.ndarray):
        return float(np.max(C * norms))
    return float(np.max(weight_samples(f, C) * norms))
