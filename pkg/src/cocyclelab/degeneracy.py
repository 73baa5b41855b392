"""Zero-exponent counterexample machinery.

Builds, end to end, the witness that a cocycle with a zero Lyapunov
exponent cannot satisfy a uniform admissibility bound: recurrent-vector
search on the zero block, paired input/output sequences with bounded
input and large output, first-return induction, interpolation back to
parent time, and compactly supported functions planted on a Rokhlin
tower.
"""

from dataclasses import dataclass

import numpy as np

from .base import (
    BaseSystem,
    FullSet,
    PredicateSet,
    birkhoff_partial_sums,
    return_times,
    rokhlin_base,
)
from .cocycle import Cocycle, evolve_matrix, generator_at, generator_orbit
from .dichotomy import Classification, classify
from .errors import HorizonExhausted, NoCandidate, NotDegenerate, RatioNotAchieved
from .kernels import frame_minmax_chain
from .met import lyapunov_exponents, oseledets_splitting


def birkhoff_extrema(base, phi, point, horizon):
    """(min, max) of the Birkhoff sums S_n over 1 <= n <= horizon.

    For a genuinely zero-mean observable both extrema straddle zero for
    almost every start, eventually; this reports the finite-horizon
    surrogate and never raises.
    """
    if phi.mean != 0.0:
        raise ValueError("birkhoff_extrema expects a declared mean of 0")
    sums = birkhoff_partial_sums(base, phi, point, horizon)
    return float(np.min(sums)), float(np.max(sums))


# ---------------------------------------------------------------------------
# induced (first return) systems


class InducedBase(BaseSystem):
    """First-return map of an aperiodic base to a positive-measure set."""

    def __init__(self, parent, F, horizon=100000):
        self.parent = parent
        self.F = F
        self.horizon = int(horizon)
        self.aperiodic = parent.aperiodic
        self.descriptor = f"induced({parent.descriptor} -> {F.descriptor})"

    def return_time(self, point, direction=1):
        """First k >= 1 with sigma^{direction*k} point in F."""
        k = 1
        chunk = 4  # grows geometrically: typical returns are short
        while k <= self.horizon:
            hi = min(k + chunk, self.horizon + 1)
            if direction > 0:
                m = self.F.mask(self.parent, point, k, hi)
            else:
                m = self.F.mask(self.parent, point, -(hi - 1), -(k - 1))[::-1]
            nz = np.flatnonzero(m)
            if nz.size:
                return k + int(nz[0])
            k = hi
            chunk = min(chunk * 2, 4096)
        raise HorizonExhausted(
            f"no return to {self.F.descriptor} within {self.horizon} steps"
        )

    def step(self, point, k=1):
        k = int(k)
        direction = 1 if k >= 0 else -1
        pt = point
        for _ in range(abs(k)):
            tau = self.return_time(pt, direction)
            pt = self.parent.step(pt, direction * tau)
        return pt

    def sample(self, rng, count, tries=64):
        out = []
        for _ in range(tries):
            for p in self.parent.sample(rng, count):
                if self.F.contains(self.parent, p):
                    out.append(p)
                    if len(out) == count:
                        return out
        raise HorizonExhausted(f"could not sample {count} points from {self.F.descriptor}")


@dataclass(frozen=True)
class InducedCocycle:
    """Return-map cocycle: generator A(w) = parent product over tau_F(w)."""

    parent: Cocycle
    parent_base: BaseSystem
    F: object
    base: InducedBase
    cocycle: Cocycle
    p_F: float
    kac_log_mean: float

    def return_time(self, point):
        return self.base.return_time(point)


def induce(c, base, F, samples, rng, horizon=100000):
    """Induced cocycle over the first-return map to F.

    Reports the empirical measure of F and the sample mean of
    log+ ||A_induced|| (the Kac integrability diagnostic: it is bounded by
    the parent mean divided by P(F)).
    """
    if not base.aperiodic:
        raise ValueError("induce expects an aperiodic base")
    ind_base = InducedBase(base, F, horizon=horizon)

    def gen(point, _c=c, _b=base, _ib=ind_base):
        tau = _ib.return_time(point)
        M, logscale = evolve_matrix(_c, _b, point, tau)
        return M * np.exp(logscale)

    ind_cocycle = Cocycle(
        dim=c.dim, generator=gen, invertible=c.invertible,
        descriptor=f"induced({c.descriptor})",
    )
    pts = base.sample(rng, samples)
    hits = [p for p in pts if F.contains(base, p)]
    p_F = len(hits) / samples
    if not hits:
        raise HorizonExhausted(f"no sampled point lies in {F.descriptor}")
    probe = hits[: min(len(hits), 32)]
    logs = [max(0.0, np.log(np.linalg.norm(gen(p), 2))) for p in probe]
    return InducedCocycle(
        parent=c, parent_base=base, F=F, base=ind_base, cocycle=ind_cocycle,
        p_F=p_F, kac_log_mean=float(np.mean(logs)),
    )


# ---------------------------------------------------------------------------
# recurrent directions and paired sequences


def recurrent_vector_search(c, base, point, zero_basis, horizon, grid=720,
                            rng=None, chunk=2048, defect_cap=0.5):
    """Unit vector in the zero block whose orbit norms straddle 1.

    Scans a projective grid of directions (uniform half-circle for
    2-dimensional blocks, ``grid`` random directions above that) and
    scores each by how far min_n ||A(w,n)v|| and max_n ||A(w,n)v|| sit
    from 1 on the wrong side.  Returns (v, defect); NoCandidate when even
    the best defect exceeds ``defect_cap``.
    """
    E0 = np.atleast_2d(np.asarray(zero_basis, dtype=float))
    if E0.ndim != 2 or E0.shape[1] == 0:
        raise ValueError("zero block basis must have at least one column")
    d, m = E0.shape
    if m == 1:
        coords = np.ones((1, 1))
    elif m == 2:
        theta = np.arange(grid) * np.pi / grid
        coords = np.vstack([np.cos(theta), np.sin(theta)])
    else:
        if rng is None:
            raise ValueError("grid search above dimension 2 needs an rng")
        coords = rng.standard_normal((m, grid))
        coords /= np.linalg.norm(coords, axis=0, keepdims=True)
    dirs = E0 @ coords
    dirs /= np.linalg.norm(dirs, axis=0, keepdims=True)
    G = dirs.shape[1]

    W = np.ascontiguousarray(dirs.copy())
    logs = np.zeros(G)
    minlog = np.full(G, np.inf)
    maxlog = np.full(G, -np.inf)
    for k0 in range(0, horizon, chunk):
        mats = generator_orbit(c, base, point, k0, min(k0 + chunk, horizon))
        frame_minmax_chain(mats, W, logs, minlog, maxlog)

    with np.errstate(over="ignore"):
        defects = np.maximum(0.0, np.expm1(minlog)) + np.maximum(0.0, -np.expm1(maxlog))
    j = int(np.argmin(defects))
    if defects[j] > defect_cap:
        raise NoCandidate(
            f"best grid defect {defects[j]:.3g} > {defect_cap}; "
            "increase the horizon or the grid"
        )
    return dirs[:, j].copy(), float(defects[j])


@dataclass(frozen=True)
class ManeSequencePair:
    """Paired sequences: bounded input y drives output x up to the target.

    y(n) stays on the normalized orbit of v with schedule beta in [-1,1];
    x accumulates the partial sums alpha of the reciprocal orbit norms, so
    ||x(n)|| = |alpha(n)| ||A(w,n) v||.  The ascent runs until ||x|| >= C
    (cut time n_star); the descent drains alpha back to zero at time n_end
    with a final fractional beta.
    """

    cocycle: Cocycle
    base: BaseSystem
    anchor: object
    v: np.ndarray
    target: float
    n_star: int
    n_end: int
    beta: np.ndarray    # (n_end+1,)
    alpha: np.ndarray   # (n_end+1,)
    qnorm: np.ndarray   # (n_end+1,) orbit norms ||A(w,n) v||
    xs: np.ndarray      # (n_end+1, d)
    ys: np.ndarray      # (n_end+1, d)

    def x(self, n):
        return self.xs[n] if n <= self.n_end else np.zeros(self.xs.shape[1])

    def y(self, n):
        return self.ys[n] if n <= self.n_end else np.zeros(self.ys.shape[1])

    def recurrence_residual(self):
        """max_n ||x(n+1) - A(sigma^n w) x(n) - y(n+1)||, n < n_end."""
        worst = 0.0
        mats = generator_orbit(self.cocycle, self.base, self.anchor, 0, self.n_end)
        for n in range(self.n_end):
            r = self.xs[n + 1] - mats[n] @ self.xs[n] - self.ys[n + 1]
            worst = max(worst, float(np.linalg.norm(r)))
        return worst

    def sup_x(self):
        return float(np.max(np.linalg.norm(self.xs, axis=1)))

    def sup_y(self):
        return float(np.max(np.linalg.norm(self.ys, axis=1)))


def mane_sequences(c, base, point, v, target, horizon=100000):
    """Construct the paired sequences for a recurrent unit vector.

    Ascent schedule +1 until the output norm reaches ``target`` (cut time
    n_star), descent schedule -1 until the alpha partial sum would cross
    zero, and a final fractional correction that lands alpha exactly on
    zero with |beta| <= 1.  HorizonExhausted when the orbit norms do not
    cooperate within ``horizon`` (defect too large or target too
    ambitious).
    """
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if not nrm > 0.0:
        raise ValueError("v must be a unit vector")
    v = v / nrm
    if target < 0.0:
        raise ValueError("target must be >= 0")

    us = [v.copy()]        # normalized orbit directions
    qs = [1.0]             # orbit norms ||A(w,n) v||
    beta = [1.0]
    alpha = [1.0]          # alpha(0) = beta(0)/q(0)
    n_star = None
    if alpha[0] * qs[0] >= target:
        n_star = 0

    pt = point
    logq = 0.0
    n = 0
    # ascent: beta = +1 until ||x(n)|| = alpha(n) q(n) >= target
    while n_star is None:
        n += 1
        if n > horizon:
            raise HorizonExhausted(
                f"output norm never reached {target} within {horizon} steps"
            )
        A = generator_at(c, base, pt)
        w = A @ us[-1]
        growth = np.linalg.norm(w)
        if growth == 0.0:
            raise HorizonExhausted("orbit of v hit the kernel of a generator")
        us.append(w / growth)
        logq += np.log(growth)
        q = float(np.exp(logq))
        qs.append(q)
        beta.append(1.0)
        alpha.append(alpha[-1] + 1.0 / q)
        pt = base.step(pt, 1)
        if alpha[-1] * q >= target:
            n_star = n

    # descent: beta = -1 while alpha stays positive, fractional last step
    n_end = None
    while n_end is None:
        n += 1
        if n > horizon:
            raise HorizonExhausted(
                f"alpha failed to drain within {horizon} steps"
            )
        A = generator_at(c, base, pt)
        w = A @ us[-1]
        growth = np.linalg.norm(w)
        if growth == 0.0:
            raise HorizonExhausted("orbit of v hit the kernel of a generator")
        us.append(w / growth)
        logq += np.log(growth)
        q = float(np.exp(logq))
        qs.append(q)
        pt = base.step(pt, 1)
        if alpha[-1] - 1.0 / q > 0.0:
            beta.append(-1.0)
            alpha.append(alpha[-1] - 1.0 / q)
        else:
            b = -alpha[-1] * q  # |b| <= 1 by the crossing condition
            beta.append(float(b))
            alpha.append(alpha[-1] + b / q)
            n_end = n

    beta = np.asarray(beta)
    alpha = np.asarray(alpha)
    qs = np.asarray(qs)
    us = np.asarray(us)
    ys = beta[:, None] * us
    xs = (alpha * qs)[:, None] * us
    return ManeSequencePair(
        cocycle=c, base=base, anchor=point, v=v, target=float(target),
        n_star=int(n_star), n_end=int(n_end), beta=beta, alpha=alpha,
        qnorm=qs, xs=xs, ys=ys,
    )


# ---------------------------------------------------------------------------
# interpolation back to parent time


@dataclass(frozen=True)
class InterpolatedPair:
    """Mañé pair pushed from return-map time to parent time.

    x evolves freely between visits to F; y fires only at visit times.
    Support ends at the parent time of the induced cut.
    """

    anchor: object
    times: tuple          # tau_0 = 0 < ... < tau_{n_end}
    xs: np.ndarray        # (support_end + 1, d)
    ys: np.ndarray
    support_end: int
    pair: ManeSequencePair

    def recurrence_residual(self, c, base):
        worst = 0.0
        mats = generator_orbit(c, base, self.anchor, 0, self.support_end)
        for n in range(self.support_end):
            r = self.xs[n + 1] - mats[n] @ self.xs[n] - self.ys[n + 1]
            worst = max(worst, float(np.linalg.norm(r)))
        return worst

    def sup_x(self):
        return float(np.max(np.linalg.norm(self.xs, axis=1)))

    def sup_y(self):
        return float(np.max(np.linalg.norm(self.ys, axis=1)))


def interpolate_sequences(ind, pair, point):
    """Extend an induced-time pair to parent time along the return orbit.

    x(tau_m) carries the induced x(m) and evolves freely by the parent
    generator in between; y is the induced y at visit times and zero
    elsewhere, so the parent recurrence holds with zero right side between
    visits and reduces to the induced recurrence at returns.
    """
    base = ind.parent_base
    c = ind.parent
    n_end = pair.n_end
    horizon = ind.base.horizon * (n_end + 1)
    times = return_times(base, ind.F, point, count=n_end, horizon=horizon)
    support_end = times[-1]
    d = c.dim
    xs = np.zeros((support_end + 1, d))
    ys = np.zeros((support_end + 1, d))
    mats = generator_orbit(c, base, point, 0, support_end) if support_end else None
    for m in range(n_end):
        t0, t1 = times[m], times[m + 1]
        xs[t0] = pair.xs[m]
        ys[t0] = pair.ys[m]
        for t in range(t0 + 1, t1):
            xs[t] = mats[t - 1] @ xs[t - 1]
    xs[support_end] = pair.xs[n_end]
    ys[support_end] = pair.ys[n_end]
    return InterpolatedPair(anchor=point, times=tuple(times), xs=xs, ys=ys,
                            support_end=support_end, pair=pair)


# ---------------------------------------------------------------------------
# the end-to-end witness


@dataclass(frozen=True)
class WitnessBudgets:
    """Explicit finite budgets for every asymptotic quantity in the pipeline."""

    spectrum_n: int = 4000
    induced_spectrum_n: int = 1500
    zero_tol: float = 0.02
    reorth: int = 10
    samples: int = 400
    rokhlin_samples: int = 3000
    horizon: int = 50000
    search_horizon: int = 2000
    grid: int = 720
    candidates: int = 4
    tower_columns: int = 4
    percentile: float = 25.0
    split_window: int = 40
    refine_tries: int = 6


@dataclass(frozen=True)
class ViolationWitness:
    """Compactly supported admissible pair violating a target bound.

    f and g live on the tower columns over the sampled base points; all
    invariants (per-column recurrence, support on F, the achieved ratio)
    are recomputed from the stored arrays by ``residual_max`` and friends.
    """

    tower_points: tuple
    N: int
    columns: tuple        # per tower point: dict with "x", "y" arrays (N+2, d)
    f_sup: float
    g_weighted_sup: float
    ratio: float
    bound_target: float
    weight_cap: float     # the constant M with C <= M on F
    p_F: float
    residual: float
    defects: tuple
    budgets: WitnessBudgets
    orientation: str = "L_LC"

    def to_json(self):
        return {
            "N": self.N,
            "tower_columns": len(self.columns),
            "f_sup": self.f_sup,
            "g_weighted_sup": self.g_weighted_sup,
            "ratio": self.ratio,
            "bound_target": self.bound_target,
            "weight_cap": self.weight_cap,
            "p_F": self.p_F,
            "residual": self.residual,
            "defects": list(self.defects),
            "orientation": self.orientation,
            "budgets": {k: getattr(self.budgets, k) for k in vars(self.budgets)},
        }


def _column_residual(c, base, point, xs, ys):
    """Admissibility residual along one tower column (levels 0..N+1)."""
    worst = float(np.linalg.norm(xs[0] - ys[0]))  # base level: f = x(0) = y(0) = g
    mats = generator_orbit(c, base, point, 0, xs.shape[0] - 1)
    for n in range(1, xs.shape[0]):
        r = xs[n] - mats[n - 1] @ xs[n - 1] - ys[n]
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def _off_tower_clear(base, B, point, N):
    """sigma^{-1} point must lie outside every tower level 0..N+1."""
    q = base.step(point, -1)
    for k in range(N + 2):
        if B.contains(base, base.step(q, -k)):
            return False
    return True


def violation_witness(c, base, C, L, budgets=None, rng=None, orientation="L_LC"):
    """Assemble a bounded-input / large-output admissible pair.

    Pipeline: classify (must have a zero exponent), pick F as the
    empirical sublevel set of the weight, induce on F, build the Mañé
    pair with target (L+1)M over the induced cocycle, interpolate back,
    plant the pair on a Rokhlin tower over F, and check the ratio
    ||f||_sup / ||g||_{sup,C} > L with residual at round-off level.

    orientation 'LC_L' flips the roles: F is the superlevel set of C, the
    target becomes (L+1)/M, and f is measured in the weighted norm.
    """
    budgets = budgets or WitnessBudgets()
    if rng is None:
        rng = np.random.default_rng(0)

    probe = base.sample(rng, 1)[0]
    spectrum = lyapunov_exponents(
        c, base, probe, budgets.spectrum_n, reorth=budgets.reorth,
    )
    if classify(spectrum, budgets.zero_tol) is Classification.HYPERBOLIC:
        raise NotDegenerate("violation_witness requires a zero Lyapunov exponent")

    pts = base.sample(rng, budgets.samples)
    cvals = np.array([C(p) for p in pts])
    if orientation == "L_LC":
        M = float(np.quantile(cvals, 0.5))
        target = (L + 1.0) * M
        in_F = lambda p: C(p) <= M
    elif orientation == "LC_L":
        M = float(np.quantile(cvals, 0.5))
        target = (L + 1.0) / M
        in_F = lambda p: C(p) >= M
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    if np.all(cvals == cvals[0]):
        F = FullSet()
    else:
        F = PredicateSet(in_F, descriptor=f"C sublevel (M={M:.4g})")

    ind = induce(c, base, F, samples=budgets.samples, rng=rng,
                 horizon=budgets.horizon)
    anchors = ind.base.sample(rng, budgets.candidates)
    spec_ind = lyapunov_exponents(
        ind.cocycle, ind.base, anchors[0], budgets.induced_spectrum_n,
        reorth=budgets.reorth,
    )
    single_block = len(spec_ind.multiplicities) == 1

    def zero_basis_at(b):
        if single_block:
            return np.eye(c.dim)
        split = oseledets_splitting(
            ind.cocycle, ind.base, b, budgets.split_window, spec_ind,
            check_equivariance=False,
        )
        E0 = split.basis_for(lambda e: abs(e) <= budgets.zero_tol)
        if E0.shape[1] == 0:
            raise NotDegenerate("no zero block found in the induced splitting")
        return E0

    def build_at(b):
        E0 = zero_basis_at(b)
        v, defect = recurrent_vector_search(
            ind.cocycle, ind.base, b, E0, budgets.search_horizon,
            grid=budgets.grid, rng=rng,
        )
        pair = mane_sequences(ind.cocycle, ind.base, b, v, target,
                              horizon=budgets.search_horizon)
        interp = interpolate_sequences(ind, pair, b)
        return interp, defect

    built = {}
    failures = []

    def get_build(b):
        if b not in built:
            built[b] = build_at(b)
        return built[b]

    for b in anchors:
        try:
            get_build(b)
        except (HorizonExhausted, NoCandidate) as e:
            failures.append(str(e))
    if not built:
        raise RatioNotAchieved(
            "no Mane pair could be built at any candidate: " + "; ".join(failures)
        )

    # smallest N covering the requested share of the observed supports; the
    # tower is retried with a higher quantile if no sampled base point fits
    supports_seen = [v[0].support_end for v in built.values()]
    N = int(np.quantile(supports_seen, budgets.percentile / 100.0,
                        method="inverted_cdf"))
    tower = []
    defects = []
    for _attempt in range(4):
        B = rokhlin_base(base, F, N, budgets.rokhlin_samples, rng,
                         refine_tries=budgets.refine_tries)
        tower = []
        defects = []
        tried = 0
        for b in B.sample_hits:
            if len(tower) >= budgets.tower_columns or tried >= max(
                8, 3 * budgets.tower_columns
            ):
                break
            try:
                interp, defect = get_build(b)
            except (HorizonExhausted, NoCandidate):
                continue
            tried += 1
            supports_seen.append(interp.support_end)
            if interp.support_end <= N and _off_tower_clear(base, B, b, N):
                tower.append((b, interp))
                defects.append(defect)
        if tower:
            break
        N = max(int(np.quantile(supports_seen, 0.9)), N + 1)
    if not tower:
        raise RatioNotAchieved(
            f"no tower-base sample had Mane support <= N={N}; "
            f"raise the budgets (supports seen: {sorted(supports_seen)})"
        )

    d = c.dim
    columns = []
    f_sup = 0.0
    g_weighted = 0.0
    res = 0.0
    for b, interp in tower:
        xs = np.zeros((N + 2, d))
        ys = np.zeros((N + 2, d))
        xs[: interp.support_end + 1] = interp.xs
        ys[: interp.support_end + 1] = interp.ys
        res = max(res, _column_residual(c, base, b, xs, ys))
        f_sup = max(f_sup, float(np.max(np.linalg.norm(xs, axis=1))))
        w = np.array([C(base.step(b, n)) for n in range(N + 2)])
        ynorm = np.linalg.norm(ys, axis=1)
        if orientation == "L_LC":
            g_weighted = max(g_weighted, float(np.max(w * ynorm)))
        else:
            g_weighted = max(g_weighted, float(np.max(ynorm)))
        columns.append({"x": xs, "y": ys, "point": b})

    if orientation == "LC_L":
        f_vals = []
        for b, interp in tower:
            w = np.array([C(base.step(b, n)) for n in range(N + 2)])
            xn = np.linalg.norm(columns[len(f_vals)]["x"], axis=1)
            f_vals.append(float(np.max(w * xn)))
        f_sup = max(f_vals)

    ratio = f_sup / g_weighted if g_weighted > 0.0 else np.inf
    if not ratio > L:
        raise RatioNotAchieved(
            f"achieved ratio {ratio:.4g} <= target {L}; raise the budgets"
        )
    return ViolationWitness(
        tower_points=tuple(b for b, _ in tower), N=int(N),
        columns=tuple(columns), f_sup=f_sup, g_weighted_sup=g_weighted,
        ratio=float(ratio), bound_target=float(L), weight_cap=M, p_F=ind.p_F,
        residual=res, defects=tuple(defects), budgets=budgets,
        orientation=orientation,
    )
