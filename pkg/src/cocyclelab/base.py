"""Ergodic base systems: invertible orbit iteration, Birkhoff sums,
return times, and Rokhlin-tower base sets.

Three concrete bases are provided.  Rotation and BernoulliShift are
aperiodic; FinitePeriodic is flagged non-aperiodic and is meant as an
exact linear-algebra oracle only.  All point types are immutable and
hashable, and orbit iteration is an exact group action: stepping by a+b
equals stepping by a then b, bit for bit.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EmptyTower, HorizonExhausted, NotAperiodic

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0  # badly approximable rotation constant

_M64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_C1 = np.uint64(0x9E3779B97F4A7C15)
_C2 = np.uint64(0xBF58476D1CE4E5B9)
_C3 = np.uint64(0x94D049BB133111EB)
_TWO64 = float(2.0**64)


def _mix64(z):
    """splitmix64 finalizer on uint64 scalars/arrays (wrap-around)."""
    with np.errstate(over="ignore"):
        z = (z + _C1) & _M64
        z = ((z ^ (z >> np.uint64(30))) * _C2) & _M64
        z = ((z ^ (z >> np.uint64(27))) * _C3) & _M64
        return z ^ (z >> np.uint64(31))


def _hash_uniform(seed, indices):
    """Deterministic uniforms in [0,1) keyed by (seed, signed index)."""
    idx = np.asarray(indices, dtype=np.int64).astype(np.uint64)
    key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    return np.asarray(_mix64(idx ^ key), dtype=np.uint64).astype(np.float64) / _TWO64


# ---------------------------------------------------------------------------
# points


@dataclass(frozen=True)
class RotationPoint:
    """Point on the circle, stored as anchor + integer shift.

    The realized angle is (anchor + shift*gamma) mod 1, recomputed from the
    anchor so that orbit stepping is an exact group action.
    """

    anchor: float
    shift: int
    angle: float


@dataclass(frozen=True)
class BernoulliPoint:
    """Two-sided symbol sequence, materialized lazily from (seed, index)."""

    seed: int
    offset: int


@dataclass(frozen=True)
class PeriodicPoint:
    index: int


# ---------------------------------------------------------------------------
# base systems


class BaseSystem:
    """Common protocol: step, orbit sampling, and point construction."""

    aperiodic: bool = True
    descriptor: str = ""

    def step(self, point, k=1):
        raise NotImplementedError

    def sample(self, rng, count):
        raise NotImplementedError


class Rotation(BaseSystem):
    """Irrational circle rotation theta -> theta + gamma (mod 1)."""

    def __init__(self, gamma=GOLDEN):
        self.gamma = float(gamma)
        self.aperiodic = True
        self.descriptor = f"rotation(gamma={self.gamma!r})"

    def point(self, angle):
        a = float(angle) % 1.0
        return RotationPoint(anchor=a, shift=0, angle=a)

    def step(self, point, k=1):
        shift = point.shift + int(k)
        return RotationPoint(
            anchor=point.anchor,
            shift=shift,
            angle=(point.anchor + shift * self.gamma) % 1.0,
        )

    def angles(self, point, n0, n1):
        """Orbit angles at steps n0..n1-1, bit-identical to repeated step()."""
        idx = point.shift + np.arange(n0, n1, dtype=np.int64)
        return (point.anchor + idx * self.gamma) % 1.0

    def sample(self, rng, count):
        return [self.point(a) for a in rng.random(count)]


class BernoulliShift(BaseSystem):
    """Two-sided Bernoulli shift over a finite alphabet.

    Symbols are materialized lazily: the symbol at absolute index i is a
    deterministic hash of (seed, i) pushed through the probability vector,
    so stepping is exact in both directions and runs are reproducible.
    """

    def __init__(self, probs=(0.5, 0.5)):
        p = np.asarray(probs, dtype=float)
        if np.any(p <= 0.0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probability vector must be positive and sum to 1")
        self.probs = p
        self._cum = np.cumsum(p)
        self.aperiodic = True
        self.descriptor = f"bernoulli(probs={tuple(p)})"

    @property
    def alphabet_size(self):
        return len(self.probs)

    def point(self, seed, offset=0):
        return BernoulliPoint(seed=int(seed), offset=int(offset))

    def step(self, point, k=1):
        return BernoulliPoint(seed=point.seed, offset=point.offset + int(k))

    def symbols(self, point, n0, n1):
        """Symbols of the orbit window sigma^k point for k in n0..n1-1."""
        idx = point.offset + np.arange(n0, n1, dtype=np.int64)
        u = _hash_uniform(point.seed, idx)
        return np.searchsorted(self._cum, u, side="right").astype(np.int64)

    def symbol(self, point, k=0):
        return int(self.symbols(point, k, k + 1)[0])

    def sample(self, rng, count):
        seeds = rng.integers(0, 2**63 - 1, size=count, dtype=np.int64)
        return [self.point(s) for s in seeds]


class FinitePeriodic(BaseSystem):
    """Deterministic cycle on p states; exact oracle base, not aperiodic."""

    def __init__(self, period):
        if period < 1:
            raise ValueError("period must be >= 1")
        self.period = int(period)
        self.aperiodic = False
        self.descriptor = f"periodic(p={self.period})"

    def point(self, index=0):
        return PeriodicPoint(index=int(index) % self.period)

    def step(self, point, k=1):
        return PeriodicPoint(index=(point.index + int(k)) % self.period)

    def states(self):
        return [PeriodicPoint(index=i) for i in range(self.period)]

    def sample(self, rng, count):
        idx = rng.integers(0, self.period, size=count)
        return [PeriodicPoint(index=int(i)) for i in idx]


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class Observable:
    """Real-valued observable with an optionally declared mean.

    ``angle_fn``/``symbol_values`` enable vectorized orbit evaluation on
    rotation/Bernoulli bases; ``fn`` is the pointwise fallback.
    """

    fn: Callable
    mean: Optional[float] = None
    descriptor: str = ""
    angle_fn: Optional[Callable] = None
    symbol_values: Optional[tuple] = None

    @staticmethod
    def from_angle(angle_fn, mean=None, descriptor=""):
        return Observable(
            fn=lambda p: float(angle_fn(np.asarray([p.angle]))[0]),
            mean=mean,
            descriptor=descriptor,
            angle_fn=angle_fn,
        )

    @staticmethod
    def from_symbols(values, base, mean=None, descriptor=""):
        vals = tuple(float(v) for v in values)
        return Observable(
            fn=lambda p: vals[base.symbol(p, 0)],
            mean=mean,
            descriptor=descriptor,
            symbol_values=vals,
        )

    @staticmethod
    def constant(value):
        return Observable(fn=lambda p: float(value), mean=float(value),
                          descriptor=f"const({value})")


def observable_values(base, phi, point, n0, n1):
    """phi(sigma^k point) for k in n0..n1-1, vectorized where possible."""
    if isinstance(base, Rotation) and phi.angle_fn is not None:
        return np.asarray(phi.angle_fn(base.angles(point, n0, n1)), dtype=float)
    if isinstance(base, BernoulliShift) and phi.symbol_values is not None:
        table = np.asarray(phi.symbol_values)
        return table[base.symbols(point, n0, n1)]
    return np.array([phi.fn(base.step(point, k)) for k in range(n0, n1)])


def birkhoff_sum(base, phi, point, n):
    """S_n phi = sum_{k=0}^{n-1} phi(sigma^k point); S_0 = 0."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0.0
    return float(np.sum(observable_values(base, phi, point, 0, n)))


def birkhoff_partial_sums(base, phi, point, n):
    """Array of S_1..S_n (cumulative sums along the forward orbit)."""
    if n <= 0:
        return np.empty(0)
    return np.cumsum(observable_values(base, phi, point, 0, n))


# ---------------------------------------------------------------------------
# indicator sets


class IndicatorSet:
    """Predicate over base points, with vectorized orbit masks when cheap.

    Sets carry no sigma-algebra machinery; empirical measures come from
    sampling.
    """

    descriptor = ""

    def contains(self, base, point):
        raise NotImplementedError

    def mask(self, base, point, n0, n1):
        """Membership of sigma^k point for k in n0..n1-1."""
        return np.array(
            [self.contains(base, base.step(point, k)) for k in range(n0, n1)],
            dtype=bool,
        )

    def empirical_measure(self, base, rng, samples):
        pts = base.sample(rng, samples)
        return sum(self.contains(base, p) for p in pts) / samples


class FullSet(IndicatorSet):
    descriptor = "full"

    def contains(self, base, point):
        return True

    def mask(self, base, point, n0, n1):
        return np.ones(n1 - n0, dtype=bool)


class AngleInterval(IndicatorSet):
    """Half-open arc [lo, hi) on the circle; wraps when lo > hi."""

    def __init__(self, lo, hi):
        self.lo = float(lo) % 1.0
        self.hi = float(hi) % 1.0 if hi != 1.0 else 1.0
        self.descriptor = f"arc[{self.lo},{self.hi})"

    def width(self):
        return (self.hi - self.lo) % 1.0 if self.lo > self.hi else self.hi - self.lo

    def contains(self, base, point):
        a = point.angle
        if self.lo <= self.hi:
            return self.lo <= a < self.hi
        return a >= self.lo or a < self.hi

    def mask(self, base, point, n0, n1):
        a = base.angles(point, n0, n1)
        if self.lo <= self.hi:
            return (a >= self.lo) & (a < self.hi)
        return (a >= self.lo) | (a < self.hi)


class SymbolCylinder(IndicatorSet):
    """Cylinder fixing symbols at given window offsets."""

    def __init__(self, constraints):
        self.constraints = dict(constraints)
        self.descriptor = f"cylinder({self.constraints})"

    def contains(self, base, point):
        return all(base.symbol(point, o) == s for o, s in self.constraints.items())

    def mask(self, base, point, n0, n1):
        out = np.ones(n1 - n0, dtype=bool)
        for o, s in self.constraints.items():
            out &= base.symbols(point, n0 + o, n1 + o) == s
        return out


class PredicateSet(IndicatorSet):
    def __init__(self, predicate, descriptor="predicate"):
        self._pred = predicate
        self.descriptor = descriptor

    def contains(self, base, point):
        return bool(self._pred(point))


class Intersection(IndicatorSet):
    def __init__(self, *sets):
        self.sets = sets
        self.descriptor = " & ".join(s.descriptor for s in sets)

    def contains(self, base, point):
        return all(s.contains(base, point) for s in self.sets)

    def mask(self, base, point, n0, n1):
        out = np.ones(n1 - n0, dtype=bool)
        for s in self.sets:
            out &= s.mask(base, point, n0, n1)
        return out


# ---------------------------------------------------------------------------
# return times and Rokhlin towers


def return_times(base, F, point, count, horizon):
    """Successive visit times 0 = tau_0 < tau_1 < ... < tau_count to F.

    The start point must lie in F.  Raises HorizonExhausted when fewer
    than ``count`` returns occur within ``horizon`` steps.
    """
    if not F.contains(base, point):
        raise ValueError("start point must lie in F")
    times = [0]
    k = 1
    chunk = max(16, 2 * count)  # grows while returns stay sparse
    while k <= horizon and len(times) <= count:
        hi = min(k + chunk, horizon + 1)
        m = F.mask(base, point, k, hi)
        for j in np.flatnonzero(m):
            times.append(k + int(j))
            if len(times) > count:
                break
        k = hi
        chunk = min(chunk * 2, 8192)
    if len(times) <= count:
        raise HorizonExhausted(
            f"only {len(times) - 1} returns to {F.descriptor} within {horizon} steps"
        )
    return times[: count + 1]


def first_return_exceeds(base, F, point, n):
    """True when the first return time of point to F is > n (exact scan)."""
    if n <= 0:
        return True
    return not bool(np.any(F.mask(base, point, 1, n + 1)))


class RokhlinBase(IndicatorSet):
    """Tower base B = {w in F' : first return to F' > N+1}.

    Membership is exactly decidable with an (N+1)-step forward scan, and
    tower disjointness is structural: a return of a B-point to B within
    N+1 steps would contradict the defining condition.
    """

    def __init__(self, refined, N, sample_hits, empirical_measure):
        self.refined = refined
        self.N = int(N)
        self.sample_hits = list(sample_hits)
        self.measure = float(empirical_measure)
        self.descriptor = f"rokhlin(N={N}, F'={refined.descriptor})"

    def contains(self, base, point):
        return self.refined.contains(base, point) and first_return_exceeds(
            base, self.refined, point, self.N + 1
        )


def _refine_indicator(base, F, point_in_F, target_measure):
    """Intersect F with a small cylinder/arc around a point of F."""
    if isinstance(base, Rotation):
        width = min(target_measure, 1.0)
        lo = point_in_F.angle
        return Intersection(F, AngleInterval(lo, (lo + width) % 1.0))
    if isinstance(base, BernoulliShift):
        pmax = float(np.max(base.probs))
        L = 1
        while pmax**L > target_measure:
            L += 1
        constraints = {o: base.symbol(point_in_F, o) for o in range(L)}
        return Intersection(F, SymbolCylinder(constraints))
    raise NotAperiodic(f"no refinement rule for base {base.descriptor}")


def rokhlin_base(base, F, N, samples, rng, refine_tries=6):
    """Construct a tower base B in F with sigma^n B, 0<=n<=N+1, disjoint.

    F is refined to F' of empirical measure <= 1/(2(N+2)) so that, by
    Kac's formula, long first returns have positive measure; B collects
    the F'-points whose first return exceeds N+1.  Raises EmptyTower when
    no sampled point lands in B after all refinement retries.
    """
    if not base.aperiodic:
        raise NotAperiodic("rokhlin_base requires an aperiodic base")
    pts = base.sample(rng, samples)
    in_F = [p for p in pts if F.contains(base, p)]
    if not in_F:
        raise EmptyTower(f"no sampled point lies in {F.descriptor}")
    target = 1.0 / (2.0 * (N + 2))
    for attempt in range(refine_tries):
        anchor = in_F[attempt % len(in_F)]
        refined = _refine_indicator(base, F, anchor, target)
        hits = [
            p
            for p in pts
            if refined.contains(base, p)
            and first_return_exceeds(base, refined, p, N + 1)
        ]
        if hits:
            return RokhlinBase(refined, N, hits, len(hits) / samples)
        target /= 2.0
    raise EmptyTower(
        f"no sampled point in the tower base for N={N} after {refine_tries} refinements"
    )
