"""Linear cocycles: generators, orbit products, the Mather operator
action on orbit windows, and the builtin example library.

The state space is R^d with the Euclidean norm; operator norms are
spectral norms.  Long products are evaluated chunk-wise through the
kernel backend with log-scale bookkeeping so they never overflow.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .base import BernoulliShift, FinitePeriodic, Rotation
from .errors import SingularGenerator, UnknownName, WindowUnderflow
from .orbit_functions import OrbitFunction

_OVERFLOW_LOG = 300.0 * np.log(10.0)  # |entry| beyond 1e300 -> overflow flag


# ---------------------------------------------------------------------------
# generator plans: vectorized evaluation of A along orbit windows


class ConstantPlan:
    def __init__(self, matrix):
        self.matrix = np.ascontiguousarray(matrix, dtype=float)

    def orbit(self, base, point, n0, n1):
        m = n1 - n0
        return np.ascontiguousarray(np.broadcast_to(self.matrix, (m,) + self.matrix.shape))


class SymbolTablePlan:
    """One matrix per Bernoulli symbol (also used for inline config tables)."""

    def __init__(self, table):
        self.table = np.ascontiguousarray(table, dtype=float)

    def orbit(self, base, point, n0, n1):
        syms = base.symbols(point, n0, n1)
        return np.ascontiguousarray(self.table[syms])


class StateTablePlan:
    """One matrix per state of a FinitePeriodic base."""

    def __init__(self, table):
        self.table = np.ascontiguousarray(table, dtype=float)

    def orbit(self, base, point, n0, n1):
        idx = (point.index + np.arange(n0, n1, dtype=np.int64)) % base.period
        return np.ascontiguousarray(self.table[idx])


class AngleMapPlan:
    """Matrices from the rotation angle via a vectorized map."""

    def __init__(self, fn):
        self.fn = fn  # angles (m,) -> (m, d, d)

    def orbit(self, base, point, n0, n1):
        return np.ascontiguousarray(self.fn(base.angles(point, n0, n1)))


@dataclass(frozen=True)
class Cocycle:
    """Generator rule A(omega) with metadata.

    ``plan`` is an optional vectorized orbit evaluator matching the
    generator; the pointwise rule stays authoritative.
    """

    dim: int
    generator: Callable
    invertible: bool = True
    descriptor: str = ""
    plan: Optional[object] = None

    def matrix(self, point):
        A = np.asarray(self.generator(point), dtype=float)
        if A.shape != (self.dim, self.dim):
            raise ValueError(f"generator returned shape {A.shape}, expected {(self.dim,)*2}")
        return A


def generator_orbit(c, base, point, n0, n1):
    """A(sigma^k point) for k in n0..n1-1 as a C-contiguous (m,d,d) array."""
    if n1 <= n0:
        return np.empty((0, c.dim, c.dim))
    if c.plan is not None:
        return c.plan.orbit(base, point, n0, n1)
    out = np.empty((n1 - n0, c.dim, c.dim))
    pt = base.step(point, n0) if n0 != 0 else point
    for i in range(n1 - n0):
        out[i] = c.matrix(pt)
        pt = base.step(pt, 1)
    return out


def generator_at(c, base, point):
    """Single generator matrix A(point), working for plan-only cocycles."""
    if c.generator is not None:
        return c.matrix(point)
    return c.plan.orbit(base, point, 0, 1)[0]


# ---------------------------------------------------------------------------
# products


@dataclass(frozen=True)
class MatrixProduct:
    """Scaled cocycle product: true matrix = value * exp(log_scale)."""

    value: np.ndarray
    start: object
    length: int
    log_scale: float = 0.0
    condition: float = np.inf
    overflow: bool = False

    def dense(self):
        """Plain matrix (may overflow to inf when the flag is set)."""
        return self.value * np.exp(self.log_scale)

    def log_norm(self):
        """log of the spectral norm of the true product."""
        return float(np.log(np.linalg.norm(self.value, 2)) + self.log_scale)


def _finish_product(M, logscale, start, length):
    sv = np.linalg.svd(M, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    with np.errstate(over="ignore"):
        overflow = bool(logscale + np.log(max(np.max(np.abs(M)), 1e-300)) > _OVERFLOW_LOG)
    return MatrixProduct(value=M, start=start, length=length,
                         log_scale=logscale, condition=cond, overflow=overflow)


def evolve_matrix(c, base, point, n, chunk=8192):
    """Forward product as a bare (matrix, log_scale) pair.

    Same arithmetic as evolve without the condition/overflow bookkeeping;
    the hot path for induced generators.
    """
    M = np.eye(c.dim)
    logscale = 0.0
    for k0 in range(0, n, chunk):
        mats = generator_orbit(c, base, point, k0, min(k0 + chunk, n))
        logscale += kernels.product_chain(mats, M)
    return M, logscale


def evolve(c, base, point, n, chunk=8192):
    """Forward product  A(sigma^{n-1} w) ... A(w); identity for n = 0."""
    if n < 0:
        raise ValueError("n must be >= 0; use evolve_back for inverses")
    M, logscale = evolve_matrix(c, base, point, n, chunk)
    return _finish_product(M, logscale, point, n)


def evolve_back(c, base, point, n, chunk=8192):
    """Inverse product  (A(sigma^{-n} w, n))^{-1} for invertible generators.

    Computed factor by factor, never by inverting the assembled product.
    """
    if not c.invertible:
        raise SingularGenerator("evolve_back requires an invertible generator")
    if n < 0:
        raise ValueError("n must be >= 0")
    M = np.eye(c.dim)
    logscale = 0.0
    for k0 in range(0, n, chunk):
        mats = generator_orbit(c, base, point, -min(k0 + chunk, n), -k0)[::-1]
        try:
            logscale += kernels.back_solve_chain(np.ascontiguousarray(mats), M)
        except ZeroDivisionError as e:
            raise SingularGenerator(str(e)) from None
    return _finish_product(M, logscale, point, -n)


def mather_apply(c, base, f):
    """One application of the composition-with-generator operator.

    (Af)(sigma^k w) = A(sigma^{k-1} w) f(sigma^{k-1} w); the output window
    loses its leftmost point.
    """
    if f.hi <= f.lo:
        raise WindowUnderflow("mather_apply needs a window of at least two points")
    mats = generator_orbit(c, base, f.anchor, f.lo, f.hi)
    vals = np.einsum("kij,kj->ki", mats, f.values[:-1])
    return OrbitFunction(base=base, anchor=f.anchor, lo=f.lo + 1, hi=f.hi, values=vals)


# ---------------------------------------------------------------------------
# builtin examples


def _rotation_block(alpha):
    t = 2.0 * np.pi * alpha
    return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])


DEFAULT_SL2 = (
    np.array([[2.0, 1.0], [1.0, 1.0]]),
    np.array([[1.0, 1.0], [1.0, 2.0]]),
)


def builtin(name, **params):
    """Named example cocycles.

    diagonal(entries): constant diagonal.
    shear(): constant [[1,1],[0,1]] with a single zero exponent.
    random_sl2(matrices): symbol-indexed SL(2,R) matrices over a Bernoulli base.
    nonuniform_rotation(rate, eps): diag(e^{rate + eps cos 2 pi theta},
        e^{-rate + eps cos 2 pi theta}) over a rotation base; hyperbolic
        with genuinely non-constant fiber norms.
    block_mixed(factor, alpha): hyperbolic diag(factor, 1/factor) block
        plus an isometric rotation block with exponent zero.
    """
    if name == "diagonal":
        entries = np.asarray(params.get("entries", (2.0, 0.5)), dtype=float)
        A = np.diag(entries)
        return Cocycle(
            dim=len(entries),
            generator=lambda p, A=A: A,
            invertible=bool(np.all(np.abs(entries) > 1e-12)),
            descriptor=f"diagonal{tuple(entries)}",
            plan=ConstantPlan(A),
        )
    if name == "shear":
        A = np.array([[1.0, 1.0], [0.0, 1.0]])
        return Cocycle(dim=2, generator=lambda p, A=A: A, invertible=True,
                       descriptor="shear", plan=ConstantPlan(A))
    if name == "random_sl2":
        table = np.asarray(params.get("matrices", DEFAULT_SL2), dtype=float)
        return Cocycle(
            dim=table.shape[1],
            generator=None,  # bound below; needs the base for the symbol
            invertible=True,
            descriptor=f"random_sl2({table.shape[0]} matrices)",
            plan=SymbolTablePlan(table),
        )
    if name == "nonuniform_rotation":
        rate = float(params.get("rate", 0.5))
        eps = float(params.get("eps", 0.3))

        def angle_map(angles, rate=rate, eps=eps):
            m = len(angles)
            out = np.zeros((m, 2, 2))
            bump = eps * np.cos(2.0 * np.pi * angles)
            out[:, 0, 0] = np.exp(rate + bump)
            out[:, 1, 1] = np.exp(-rate + bump)
            return out

        return Cocycle(
            dim=2,
            generator=lambda p: angle_map(np.asarray([p.angle]))[0],
            invertible=True,
            descriptor=f"nonuniform_rotation(rate={rate}, eps={eps})",
            plan=AngleMapPlan(angle_map),
        )
    if name == "block_mixed":
        factor = float(params.get("factor", 2.0))
        alpha = float(params.get("alpha", 1.0 / np.pi))
        A = np.zeros((4, 4))
        A[0, 0] = factor
        A[1, 1] = 1.0 / factor
        A[2:, 2:] = _rotation_block(alpha)
        return Cocycle(dim=4, generator=lambda p, A=A: A, invertible=True,
                       descriptor=f"block_mixed(factor={factor}, alpha={alpha})",
                       plan=ConstantPlan(A))
    raise UnknownName(f"unknown builtin cocycle {name!r}")


def symbol_cocycle(table, invertible=True, descriptor="symbol_table"):
    """Cocycle from an explicit per-symbol matrix list (Bernoulli bases)."""
    table = np.asarray(table, dtype=float)
    return Cocycle(dim=table.shape[1], generator=None, invertible=invertible,
                   descriptor=descriptor, plan=SymbolTablePlan(table))


def state_cocycle(table, invertible=True, descriptor="state_table"):
    """Cocycle from per-state matrices over a FinitePeriodic base."""
    table = np.asarray(table, dtype=float)
    return Cocycle(dim=table.shape[1], generator=None, invertible=invertible,
                   descriptor=descriptor, plan=StateTablePlan(table))
