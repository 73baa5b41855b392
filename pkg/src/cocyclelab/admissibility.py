"""Weighted admissibility: the Green-series solver, residual checks,
exact periodic oracles, and empirical/analytic bound probes.

The solver produces, for an input g on an orbit window, the output f
solving  f(w) - A(sigma^{-1} w) f(sigma^{-1} w) = g(w): stable
contributions are accumulated forward along the orbit, unstable
contributions backward through the equivariant unstable frame.  Each
output point receives at least N_tail series terms; the reported tail
bound is the geometric estimate for the N_tail truncation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .base import FinitePeriodic
from .cocycle import Cocycle, generator_orbit, state_cocycle
from .dichotomy import DichotomyCertificate, _positive_qr
from .errors import (
    NoDecay,
    NotHyperbolic,
    SingularSystem,
    TailTooLarge,
    UnstableNotInvertible,
    WindowUnderflow,
)
from .orbit_functions import OrbitFunction, WeightModel, weight_samples, weighted_norm

__all__ = [
    "OrbitFunction", "WeightModel", "weighted_norm", "green_solve", "residual",
    "oracle_solve_periodic", "bound_probe", "uniqueness_probe",
    "weight_from_K", "reciprocal_envelope_weight", "random_periodic_hyperbolic",
    "BoundProbeReport", "UniquenessReport",
]


def weight_from_K(cert):
    """The weight C = K of the (sup, K-weighted) admissible pair."""
    return WeightModel(rule=cert.K_of, tempered=True, descriptor="K")


def reciprocal_envelope_weight(cert, eps=None, reach=24):
    """C = 1 / K_eps with eps = rate/3 by default (windowed envelope)."""
    eps = cert.rate / 3.0 if eps is None else float(eps)
    offs = np.arange(-reach, reach + 1)
    decay = np.exp(-eps * np.abs(offs))

    def rule(point):
        vals = [cert.K_of(cert.base.step(point, int(j))) for j in offs]
        return 1.0 / float(np.max(np.asarray(vals) * decay))

    return WeightModel(rule=rule, tempered=True,
                       descriptor=f"1/K_eps(eps={eps:.4g}, reach={reach})")


def green_solve(c, cert, g, N_tail=60, tail_tol=None):
    """Solve the admissibility equation through the dichotomy.

    Output window is the input window shrunk by N_tail on both sides.
    The returned OrbitFunction carries ``tail_bound``, the geometric
    truncation estimate built from the certificate's envelope rate
    eps = rate/3; TailTooLarge is raised when ``tail_tol`` is exceeded.
    """
    base = cert.base
    lo, hi = g.lo + N_tail, g.hi - N_tail
    if lo > hi:
        raise WindowUnderflow("input window shorter than 2*N_tail + 1")
    d = c.dim
    m = g.hi - g.lo  # number of transitions inside the window
    mats = generator_orbit(c, base, g.anchor, g.lo, g.hi) if m > 0 else None
    points = [g.point(k) for k in g.indices]
    proj_s = [cert.projector(p) for p in points]

    # stable sweep, left to right; re-projecting through Pi^s each step is
    # an identity (commutation) and keeps unstable round-off from growing
    ks = cert.stable_dim
    S = np.zeros((m + 1, d))
    if ks > 0:
        S[0] = proj_s[0] @ g.values[0]
        for i in range(1, m + 1):
            S[i] = proj_s[i] @ (mats[i - 1] @ S[i - 1] + g.values[i])

    # unstable sweep, right to left, in the transported frame
    ku = d - ks
    Fu = np.zeros((m + 1, d))
    if ku > 0:
        frames = [None] * (m + 1)
        coeffs = [None] * m
        U = cert.unstable_basis(points[0])
        frames[0] = U
        for i in range(m):
            U, C = _positive_qr(mats[i] @ U)
            dmin = np.min(np.abs(np.diag(C)))
            if dmin <= 1e-12 * max(np.max(np.abs(C)), 1.0):
                raise UnstableNotInvertible(
                    f"unstable transition singular at window index {g.lo + i}"
                )
            frames[i + 1] = U
            coeffs[i] = C
        t = np.zeros(ku)
        Fu[m] = frames[m] @ t
        eye = np.eye(d)
        for i in range(m - 1, -1, -1):
            pu_g = (eye - proj_s[i + 1]) @ g.values[i + 1]
            t = scipy.linalg.solve_triangular(
                coeffs[i], frames[i + 1].T @ pu_g + t
            )
            Fu[i] = frames[i] @ t

    vals = S - Fu
    out = vals[lo - g.lo : hi - g.lo + 1]

    eps = cert.rate / 3.0
    decay = cert.rate - eps
    g_sup = float(np.max(np.linalg.norm(g.values, axis=1)))
    probe_ks = sorted({lo, (lo + hi) // 2, hi})
    K_win = max(cert.K_of(g.point(k)) for k in probe_ks)
    if cert.K_samples:
        K_win = max(K_win, max(cert.K_samples.values()))
    bound = 2.0 * K_win * g_sup * np.exp(-decay * (N_tail + 1)) / (1.0 - np.exp(-decay))
    if tail_tol is not None and bound > tail_tol:
        raise TailTooLarge(f"tail bound {bound:.3g} exceeds tolerance {tail_tol:.3g}")
    return OrbitFunction(base=base, anchor=g.anchor, lo=lo, hi=hi,
                         values=out, tail_bound=float(bound))


def residual(c, base, f, g):
    """max over the shared window (left edge excluded) of
    || f(k) - A(sigma^{k-1}) f(k-1) - g(k) ||."""
    lo = max(f.lo + 1, g.lo)
    hi = min(f.hi, g.hi)
    if hi < lo:
        raise ValueError("windows must overlap on at least two points")
    mats = generator_orbit(c, base, f.anchor, lo - 1, hi)
    fv = f.values[lo - 1 - f.lo : hi - f.lo + 1]
    gv = g.values[lo - g.lo : hi - g.lo + 1]
    res = fv[1:] - np.einsum("kij,kj->ki", mats, fv[:-1]) - gv
    return float(np.max(np.linalg.norm(res, axis=1)))


def oracle_solve_periodic(c, base, g_states):
    """Exact dense solve of the admissibility equation on a periodic base.

    Solves f(w_k) - A(w_{k-1}) f(w_{k-1}) = g(w_k) for the p states as one
    (pd x pd) linear system; unique exactly when no Floquet multiplier of
    the monodromy sits on the unit circle.
    """
    if not isinstance(base, FinitePeriodic):
        raise ValueError("oracle_solve_periodic needs a FinitePeriodic base")
    p, d = base.period, c.dim
    g_states = np.asarray(g_states, dtype=float).reshape(p, d)
    mats = generator_orbit(c, base, base.point(0), 0, p)
    M = np.zeros((p * d, p * d))
    for k in range(p):
        M[k * d : (k + 1) * d, k * d : (k + 1) * d] += np.eye(d)
        km1 = (k - 1) % p
        M[k * d : (k + 1) * d, km1 * d : (km1 + 1) * d] -= mats[km1]
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SingularSystem(
            "periodic solve singular: unit-modulus Floquet multiplier"
        )
    f = np.linalg.solve(M, g_states.reshape(-1))
    return f.reshape(p, d)


def random_periodic_hyperbolic(rng, p_max=8, d_max=4, min_rate=0.35, max_rate=1.0):
    """Random hyperbolic instance over a FinitePeriodic base.

    Per-state matrices are orthogonal conjugations of diagonals whose
    per-coordinate mean log magnitudes stay outside [-min_rate, min_rate],
    so the exact exponents are known and bounded away from zero.

    Returns (cocycle, base, exact exponents sorted descending).
    """
    p = int(rng.integers(1, p_max + 1))
    d = int(rng.integers(1, d_max + 1))
    signs = np.where(rng.random(d) < 0.5, -1.0, 1.0)
    logmags = rng.uniform(min_rate, max_rate, size=(p, d)) * signs
    qs = []
    for _ in range(p):
        Q, _ = _positive_qr(rng.standard_normal((d, d)))
        qs.append(Q)
    table = np.empty((p, d, d))
    for k in range(p):
        table[k] = qs[(k + 1) % p] @ np.diag(np.exp(logmags[k])) @ qs[k].T
    exact = np.sort(logmags.mean(axis=0))[::-1]
    return (
        state_cocycle(table, descriptor=f"random_periodic(p={p}, d={d})"),
        FinitePeriodic(p),
        exact,
    )


@dataclass(frozen=True)
class BoundProbeReport:
    """Empirical input->output bound against the analytic constant."""

    pair: str
    empirical: float
    analytic: float
    trials: int
    window: int
    n_tail: int

    @property
    def passed(self):
        return self.empirical <= self.analytic * (1.0 + 1e-9)


def bound_probe(c, cert, anchor, trials, window, N_tail=60, rng=None,
                pair="L_LC", envelope_reach=24):
    """Empirical operator bound of the admissibility solve.

    pair 'L_LC': inputs normalized in the K-weighted sup norm, outputs
    measured in the plain sup norm; the analytic constant is
    (1+e^{-rate})/(1-e^{-rate}).  pair 'LC_L': unweighted inputs, outputs
    in the 1/K_{rate/3}-weighted norm with the matching constant at decay
    2*rate/3.  Axis-aligned constant inputs are probed first (they are the
    extremal candidates for diagonal models), then ``trials`` random unit
    direction fields.
    """
    base = cert.base
    d = c.dim
    rate = cert.rate
    if pair == "L_LC":
        C_in = weight_from_K(cert)
        C_out = None
        analytic = (1.0 + np.exp(-rate)) / (1.0 - np.exp(-rate))
    elif pair == "LC_L":
        C_in = None
        C_out = reciprocal_envelope_weight(cert, reach=envelope_reach)
        q = np.exp(-2.0 * rate / 3.0)
        analytic = (1.0 + q) / (1.0 - q)
    else:
        raise ValueError(f"unknown pair {pair!r}")

    glo, ghi = -(window + N_tail), window + N_tail
    npts = ghi - glo + 1
    pts = [base.step(anchor, k) for k in range(glo, ghi + 1)]
    inv_w = (
        np.ones(npts)
        if C_in is None
        else 1.0 / np.array([C_in(p) for p in pts])
    )

    def make_g(directions):
        return OrbitFunction(base=base, anchor=anchor, lo=glo, hi=ghi,
                             values=directions * inv_w[:, None])

    candidates = []
    for i in range(d):
        for s in (+1.0, -1.0):
            e = np.zeros(d)
            e[i] = s
            candidates.append(np.tile(e, (npts, 1)))
    if rng is not None:
        for _ in range(trials):
            dirs = rng.standard_normal((npts, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            candidates.append(dirs)

    best = 0.0
    in_weights = None if C_in is None else np.array([C_in(p) for p in pts])
    for dirs in candidates:
        g = make_g(dirs)
        f = green_solve(c, cert, g, N_tail=N_tail)
        gn = weighted_norm(g, in_weights)
        if gn <= 0.0:
            continue
        best = max(best, weighted_norm(f, C_out) / gn)
    return BoundProbeReport(pair=pair, empirical=float(best),
                            analytic=float(analytic),
                            trials=len(candidates), window=window, n_tail=N_tail)


@dataclass(frozen=True)
class UniquenessReport:
    stable_curve: np.ndarray      # ||A(sigma^{-n} w, n) Pi^s(sigma^{-n} w)||
    unstable_curve: np.ndarray    # ||A(sigma^{n} w, -n) Pi^u(sigma^{n} w)||
    tol: float
    stable_hit: Optional[int]
    unstable_hit: Optional[int]

    @property
    def passed(self):
        return self.stable_hit is not None and self.unstable_hit is not None


def uniqueness_probe(c, cert, point, window, tol=1e-6):
    """Windowed refutation of bounded homogeneous solutions.

    Propagates the stable component from sigma^{-n} w and the unstable
    component from sigma^{n} w; both operator norms must decay below
    ``tol`` within the window, otherwise NoDecay identifies the side.
    A probe, not a proof: it rules out bounded nonzero solutions only up
    to the window and tolerance it reports.
    """
    if cert is None:
        raise NotHyperbolic("uniqueness probe requires a dichotomy certificate")
    base = cert.base
    d = c.dim

    stable = np.empty(window + 1)
    stable[0] = np.linalg.norm(cert.projector(point), 2)
    back = generator_orbit(c, base, point, -window, 0)[::-1]  # A at sigma^{-1}, ...
    M = np.eye(d)
    scale = 0.0
    for n in range(1, window + 1):
        # right-multiply by A Pi^s at sigma^{-n}: interleaving the projector
        # is the commutation identity and suppresses unstable round-off
        M = (M @ back[n - 1]) @ cert.projector(base.step(point, -n))
        a = np.max(np.abs(M))
        if a > 1e120:
            M /= a
            scale += np.log(a)
        nrm = np.linalg.norm(M, 2)
        stable[n] = nrm * np.exp(scale) if np.isfinite(nrm) else np.inf

    ku = d - cert.stable_dim
    unstable = np.zeros(window + 1)
    unstable[0] = np.linalg.norm(cert.projector_u(point), 2)
    if ku > 0:
        fwd = generator_orbit(c, base, point, 0, window)
        U = cert.unstable_basis(point)
        P = np.eye(ku)
        scale = 0.0
        for n in range(1, window + 1):
            U, C = _positive_qr(fwd[n - 1] @ U)
            P = C @ P
            a = np.max(np.abs(P))
            if a > 1e120:
                P /= a
                scale += np.log(a)
            B = U.T @ cert.projector_u(base.step(point, n))
            Z = np.linalg.solve(P, B)
            unstable[n] = np.linalg.norm(Z, 2) * np.exp(-scale)

    s_hit = next((int(n) for n in range(window + 1) if stable[n] <= tol), None)
    u_hit = (
        0
        if ku == 0
        else next((int(n) for n in range(window + 1) if unstable[n] <= tol), None)
    )
    report = UniquenessReport(stable_curve=stable, unstable_curve=unstable,
                              tol=tol, stable_hit=s_hit, unstable_hit=u_hit)
    if not report.passed:
        side = "stable" if s_hit is None else "unstable"
        raise NoDecay(f"{side} component did not decay below {tol} within "
                      f"window {window}", direction=side)
    return report
