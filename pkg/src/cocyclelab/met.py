"""Numerical multiplicative ergodic theorem.

Lyapunov spectra by QR deflation with periodic re-orthonormalization,
per-vector exponents with log-scaled accumulation, and Oseledets
splittings from the intersection of forward slow and backward fast
singular filtrations.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .base import FinitePeriodic
from .cocycle import evolve, generator_at, generator_orbit
from .errors import Degenerate, IllConditioned

NEG_INF_FLOOR = -20.0  # nats/step below which an exponent is reported as -inf


@dataclass(frozen=True)
class LyapunovSpectrum:
    """Merged Lyapunov exponents with multiplicities and batch-mean stderr."""

    exponents: tuple
    multiplicities: tuple
    stderr: tuple
    n: int
    dim: int
    gap_tol: float
    raw: tuple = ()
    trace: Optional[np.ndarray] = None  # (events, 1+d): step, running estimates

    @property
    def min_abs_exponent(self):
        return min(abs(x) for x in self.exponents)

    @property
    def effectively_neg_inf(self):
        """Flags for exponents below the desk-scale resolution floor."""
        return tuple(x < NEG_INF_FLOOR for x in self.exponents)

    def rows(self):
        """CSV rows (exponent, multiplicity, stderr, n)."""
        return [
            (float(e), int(m), float(s), int(self.n))
            for e, m, s in zip(self.exponents, self.multiplicities, self.stderr)
        ]


def _merge(raw_sorted, batch_rates, gap_tol):
    """Cluster consecutive exponents closer than gap_tol."""
    clusters = [[0]]
    for j in range(1, len(raw_sorted)):
        if raw_sorted[j - 1] - raw_sorted[j] < gap_tol:
            clusters[-1].append(j)
        else:
            clusters.append([j])
    exps, mults, errs = [], [], []
    B = batch_rates.shape[0]
    for cl in clusters:
        exps.append(float(np.mean(raw_sorted[cl])))
        mults.append(len(cl))
        rates = batch_rates[:, cl].mean(axis=1)
        errs.append(float(np.std(rates, ddof=1) / np.sqrt(B)) if B > 1 else np.inf)
    return tuple(exps), tuple(mults), tuple(errs)


def lyapunov_exponents(c, base, point, n, reorth=10, gap_tol=0.02,
                       chunk=8192, batches=10, keep_trace=False):
    """Benettin-style QR deflation estimate of the Lyapunov spectrum.

    Pushes an orthonormal frame through the cocycle, re-orthonormalizing
    every ``reorth`` steps and accumulating the log R diagonal.  Exponents
    within ``gap_tol`` are merged into one block; stderr comes from
    ``batches`` batch means over the log-diagonal stream.
    """
    if n < 100:
        raise ValueError("spectrum estimation needs n >= 100")
    if gap_tol <= 0:
        raise ValueError("gap_tol must be positive")
    d = c.dim
    Q = np.eye(d)
    phase = 0
    blocks = []
    for k0 in range(0, n, chunk):
        mats = generator_orbit(c, base, point, k0, min(k0 + chunk, n))
        phase, events = kernels.qr_chain(mats, Q, reorth, phase)
        if events.shape[0]:
            blocks.append(events)
    steps = [reorth] * sum(b.shape[0] for b in blocks)
    if phase > 0:
        blocks.append(np.asarray(kernels.mgs_qr(Q))[None, :])
        steps.append(phase)
    events = np.concatenate(blocks, axis=0)
    steps = np.asarray(steps, dtype=float)
    if not np.all(np.isfinite(events)):
        raise Degenerate("evolved frame lost numerical rank; reduce reorth")

    raw = events.sum(axis=0) / n
    order = np.argsort(-raw)
    raw_sorted = raw[order]
    events = events[:, order]

    B = int(min(batches, events.shape[0]))
    groups = np.array_split(np.arange(events.shape[0]), B)
    batch_rates = np.array(
        [events[g].sum(axis=0) / steps[g].sum() for g in groups]
    )
    exps, mults, errs = _merge(raw_sorted, batch_rates, gap_tol)

    trace = None
    if keep_trace:
        cum_logs = np.cumsum(events, axis=0)
        cum_steps = np.cumsum(steps)
        keep = np.unique(np.linspace(0, len(cum_steps) - 1, 512).astype(int))
        trace = np.column_stack([cum_steps[keep], cum_logs[keep] / cum_steps[keep, None]])

    return LyapunovSpectrum(
        exponents=exps, multiplicities=mults, stderr=errs, n=n, dim=d,
        gap_tol=gap_tol, raw=tuple(float(x) for x in raw_sorted), trace=trace,
    )


def vector_exponent(c, base, point, v, n, chunk=8192):
    """(1/n) log ||A(w, n) v|| with per-step renormalization."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if not nrm > 0.0:
        raise ValueError("v must be nonzero")
    if n < 1:
        raise ValueError("n must be >= 1")
    w = np.ascontiguousarray(v / nrm)
    total = 0.0
    for k0 in range(0, n, chunk):
        mats = generator_orbit(c, base, point, k0, min(k0 + chunk, n))
        total += kernels.vector_chain(mats, w)
        if not np.isfinite(total):
            return -np.inf
    return total / n


# ---------------------------------------------------------------------------
# Oseledets splittings


@dataclass(frozen=True)
class OseledetsSplitting:
    """Per-exponent bases at one point, blocks ordered by exponent."""

    point: object
    window: int
    exponents: tuple
    bases: tuple  # orthonormal (d, m_i) arrays
    equivariance_defect: float

    @property
    def dim(self):
        return self.bases[0].shape[0]

    def basis_for(self, predicate):
        """Concatenated orthonormal basis of the blocks whose exponent
        satisfies the predicate; (d, 0) when empty."""
        cols = [b for e, b in zip(self.exponents, self.bases) if predicate(e)]
        if not cols:
            return np.zeros((self.dim, 0))
        M = np.concatenate(cols, axis=1)
        q, _ = np.linalg.qr(M)
        return q

    @property
    def fast_basis(self):
        return self.basis_for(lambda e: e > 0.0)

    def full_matrix(self):
        return np.concatenate(self.bases, axis=1)


def subspace_distance(B1, B2):
    """sin of the largest principal angle between equal-dim column spans."""
    if B1.shape[1] != B2.shape[1]:
        return 1.0
    if B1.shape[1] == 0:
        return 0.0
    s = np.linalg.svd(B1.T @ B2, compute_uv=False)
    smin = min(1.0, float(s[-1]))
    return float(np.sqrt(max(0.0, 1.0 - smin * smin)))


def _filtration_bases(c, base, point, window):
    """Forward slow and backward fast orthonormal bases at ``point``."""
    fwd = evolve(c, base, point, window)
    _, _, Vt = np.linalg.svd(fwd.value)
    bwd = evolve(c, base, base.step(point, -window), window)
    U, _, _ = np.linalg.svd(bwd.value)
    return U, Vt.T


def _intersection_blocks(U, V, cum_dims, mults, cos_tol):
    bases = []
    prev = 0
    for i, m in enumerate(mults):
        hi = int(cum_dims[i])
        P = U[:, :hi]                  # fast space arriving from the past
        Q = V[:, prev:]                # slow complement of the faster flags
        A, s, _ = np.linalg.svd(P.T @ Q)
        if s[m - 1] < cos_tol:
            raise IllConditioned(
                f"principal cosine {s[m-1]:.3g} below {cos_tol} for block {i}; "
                "increase the window"
            )
        bases.append(P @ A[:, :m])
        prev = hi
    M = np.concatenate(bases, axis=1)
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    if smin < 1e-6:
        raise IllConditioned(f"splitting nearly degenerate (sigma_min={smin:.3g})")
    return bases


def _splitting_bases(c, base, point, window, spectrum, cos_tol):
    mults = spectrum.multiplicities
    cum = np.cumsum(mults)
    U, V = _filtration_bases(c, base, point, window)
    return _intersection_blocks(U, V, cum, mults, cos_tol)


def oseledets_splitting(c, base, point, window, spectrum, cos_tol=0.9,
                        check_equivariance=True):
    """Oseledets spaces as forward-slow / backward-fast intersections.

    Requires an invertible generator (two-sided filtrations).  The
    equivariance defect compares A(w) E_i(w) against E_i(sigma w) computed
    independently, reporting the worst principal-angle sin.
    """
    if not c.invertible:
        raise IllConditioned(
            "two-sided splitting needs an invertible generator; "
            "use forward_filtration instead"
        )
    if len(spectrum.multiplicities) > 1:
        gaps = -np.diff(np.asarray(spectrum.exponents))
        if float(np.min(gaps)) * window < np.log(1e6):
            raise IllConditioned(
                "window too small: exp(gap * window) < 1e6; increase the window"
            )
    bases = _splitting_bases(c, base, point, window, spectrum, cos_tol)
    defect = 0.0
    if check_equivariance:
        nxt = base.step(point, 1)
        bases_next = _splitting_bases(c, base, nxt, window, spectrum, cos_tol)
        A = generator_at(c, base, point)
        for b, bn in zip(bases, bases_next):
            img = A @ b
            q, _ = np.linalg.qr(img)
            defect = max(defect, subspace_distance(q, bn))
    return OseledetsSplitting(
        point=point, window=window, exponents=tuple(spectrum.exponents),
        bases=tuple(bases), equivariance_defect=defect,
    )


def forward_filtration(c, base, point, window, spectrum):
    """One-sided slow flags V_i (for non-invertible generators).

    V_i is spanned by the right singular vectors of the window product
    past the i-th cumulative multiplicity; A(w) V_i(w) nests into
    V_i(sigma w) up to the window resolution.
    """
    fwd = evolve(c, base, point, window)
    _, _, Vt = np.linalg.svd(fwd.value)
    V = Vt.T
    cum = np.cumsum(spectrum.multiplicities)
    return [V[:, int(m):] for m in cum]


def splitting_rule(c, base, window, spectrum, cos_tol=0.9, check_equivariance=False):
    """Cached point -> OseledetsSplitting map (used by certificates)."""
    cache = {}

    def rule(point):
        if point not in cache:
            cache[point] = oseledets_splitting(
                c, base, point, window, spectrum,
                cos_tol=cos_tol, check_equivariance=check_equivariance,
            )
        return cache[point]

    rule.cache = cache
    return rule


def periodic_spectrum(c, base, gap_tol=1e-9):
    """Exact exponents log|mu|/p from the monodromy eigenvalues.

    FinitePeriodic bases only; this is the linear-algebra oracle the
    aperiodic estimates are checked against.
    """
    if not isinstance(base, FinitePeriodic):
        raise ValueError("periodic_spectrum needs a FinitePeriodic base")
    p = base.period
    mono = evolve(c, base, base.point(0), p)
    mu = np.linalg.eigvals(mono.value)
    with np.errstate(divide="ignore"):
        exps = np.sort((np.log(np.abs(mu)) + mono.log_scale) / p)[::-1]
    clusters = [[0]]
    for j in range(1, len(exps)):
        if exps[j - 1] - exps[j] < gap_tol:
            clusters[-1].append(j)
        else:
            clusters.append([j])
    merged = tuple(float(np.mean(exps[cl])) for cl in clusters)
    mults = tuple(len(cl) for cl in clusters)
    return LyapunovSpectrum(
        exponents=merged, multiplicities=mults,
        stderr=tuple(0.0 for _ in merged), n=p, dim=c.dim,
        gap_tol=gap_tol, raw=tuple(float(x) for x in exps),
    )
