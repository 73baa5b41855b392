"""Perturbation budgets and the contraction fixed-point solver.

Given a certificate for the unperturbed cocycle, any perturbed generator
within the tempered budget c(w) = d / K(sigma w) admits a solution of the
perturbed admissibility equation; the solver iterates the integral
operator built from the unperturbed dichotomy and reports the measured
contraction rate alongside the theoretical factor q.
"""

from dataclasses import dataclass

import numpy as np

from .admissibility import green_solve, residual as _residual
from .base import _mix64
from .cocycle import Cocycle, generator_at
from .dichotomy import classify
from .errors import BudgetViolated, NoConvergence
from .met import lyapunov_exponents
from .orbit_functions import OrbitFunction

__all__ = [
    "PerturbationBudget", "budget", "contraction_solve", "perturbed_check",
    "inbudget_perturbation", "ContractionResult", "PerturbedReport",
]


@dataclass(frozen=True)
class PerturbationBudget:
    """Admissible perturbation size d with budget rule c(w) = d/K(sigma w)."""

    d: float
    q: float                      # contraction factor d (1+e^-rate)/(1-e^-rate)
    rate: float
    cert: object
    constant: float = None        # c when K is constant on the samples

    def c(self, point):
        if self.constant is not None:
            return self.constant
        return self.d / self.cert.K_of(self.cert.base.step(point, 1))


def budget(cert, safety=0.5):
    """Largest-by-safety budget with contraction factor q = safety < 1.

    d = safety (1 - e^{-rate}) / (1 + e^{-rate}), so that the contraction
    estimate d (1+e^{-rate})/(1-e^{-rate}) equals safety exactly.
    """
    if not 0.0 < safety < 1.0:
        raise ValueError("safety must be in (0, 1)")
    e = np.exp(-cert.rate)
    d = safety * (1.0 - e) / (1.0 + e)
    Ks = list(cert.K_samples.values())
    constant = None
    if Ks and max(Ks) - min(Ks) <= 1e-12 * max(Ks):
        constant = d / Ks[0]
    return PerturbationBudget(d=float(d), q=float(safety), rate=cert.rate,
                              cert=cert, constant=constant)


def _point_key(point):
    fields = []
    for v in vars(point).values():
        if isinstance(v, float):
            fields.append(np.float64(v).view(np.uint64))
        else:
            fields.append(np.uint64(int(v) & 0xFFFFFFFFFFFFFFFF))
    key = np.uint64(0x9E3779B97F4A7C15)
    for f in fields:
        key = _mix64(key ^ f)
    return int(key)


def inbudget_perturbation(c, base, bud, seed, fraction=1.0 - 1e-6):
    """Perturbed cocycle B = A + Delta with ||Delta(w)|| = fraction * c(w).

    Delta(w) is a deterministic pseudo-random direction keyed by the point
    and the seed, scaled to the exact spectral norm: the hardest in-budget
    perturbation in every fiber.
    """
    d = c.dim

    def delta(point):
        key = (_point_key(point) ^ (seed * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF
        g = np.random.default_rng(key)
        G = g.standard_normal((d, d))
        nrm = np.linalg.norm(G, 2)
        return G * (fraction * bud.c(point) / nrm)

    def gen(point):
        return generator_at(c, base, point) + delta(point)

    return Cocycle(dim=d, generator=gen, invertible=c.invertible,
                   descriptor=f"perturbed({c.descriptor}, seed={seed})")


@dataclass(frozen=True)
class ContractionResult:
    solution: OrbitFunction
    iterations: int
    ratios: tuple            # successive ||f_{k+1}-f_k|| ratios
    final_change: float
    residual: float          # vs the perturbed cocycle, interior window
    q: float

    @property
    def max_ratio(self):
        return max(self.ratios) if self.ratios else 0.0


def _apply_T(cA, cert, delta_mats, g, f_vals, N_tail):
    """One application of the perturbed-solve operator.

    Equivalent to the dichotomy solve applied to
    h(w) = (B - A)(sigma^{-1} w) f(sigma^{-1} w) + g(w), evaluated with f
    extended by zero outside its stored window.
    """
    h_vals = g.values.copy()
    # f is stored on [lo+N_tail, hi-N_tail]; h(k) = Delta(sigma^{k-1}) f(k-1) + g(k)
    flo = g.lo + N_tail
    fhi = g.hi - N_tail
    for i, k in enumerate(range(g.lo, g.hi + 1)):
        j = k - 1
        if flo <= j <= fhi:
            h_vals[i] += delta_mats[i - 1] @ f_vals[j - flo]
    h = OrbitFunction(base=g.base, anchor=g.anchor, lo=g.lo, hi=g.hi, values=h_vals)
    out = green_solve(cA, cert, h, N_tail=N_tail)
    return out.values


def contraction_solve(cA, cB, cert, bud, g, tol=1e-10, max_iters=200,
                      N_tail=60, interior_margin=40):
    """Fixed point of the perturbed admissibility equation.

    Checks the budget on every window point, iterates from f = 0 until the
    sup change drops below ``tol``, and reports the measured contraction
    ratios (expected <= q plus a small numerical allowance) and the
    residual f(w) - B(sigma^{-1} w) f(sigma^{-1} w) - g(w) on the interior
    of the window.
    """
    base = cert.base
    pts = [g.point(k) for k in g.indices]
    delta_mats = np.array(
        [
            generator_at(cB, base, p) - generator_at(cA, base, p)
            for p in pts
        ]
    )
    for p, D in zip(pts, delta_mats):
        cap = bud.c(p)
        nrm = np.linalg.norm(D, 2)
        if nrm > cap * (1.0 + 1e-9):
            raise BudgetViolated(
                f"||B-A|| = {nrm:.3g} exceeds budget c = {cap:.3g} at {p}"
            )

    flo, fhi = g.lo + N_tail, g.hi - N_tail
    f_vals = np.zeros((fhi - flo + 1, cA.dim))
    ratios = []
    prev_change = None
    final_change = np.inf
    for it in range(1, max_iters + 1):
        new_vals = _apply_T(cA, cert, delta_mats, g, f_vals, N_tail)
        change = float(np.max(np.linalg.norm(new_vals - f_vals, axis=1)))
        f_vals = new_vals
        if prev_change is not None and prev_change > 0.0:
            ratios.append(change / prev_change)
        prev_change = change
        final_change = change
        if change <= tol:
            break
    else:
        raise NoConvergence(
            f"no fixed point after {max_iters} iterations (last change "
            f"{final_change:.3g}); certificate and budget may be inconsistent"
        )

    f = OrbitFunction(base=base, anchor=g.anchor, lo=flo, hi=fhi, values=f_vals)
    # residual against B on the interior (zero-extension edge effects decay
    # like e^{-rate * margin})
    ilo, ihi = flo + interior_margin, fhi - interior_margin
    resid = np.nan
    if ilo + 1 <= ihi:
        f_int = f.restrict(ilo - 1, ihi)
        g_int = OrbitFunction(
            base=base, anchor=g.anchor, lo=ilo, hi=ihi,
            values=g.values[ilo - g.lo : ihi - g.lo + 1],
        )
        resid = _residual(cB, base, f_int, g_int)
    return ContractionResult(solution=f, iterations=it, ratios=tuple(ratios),
                             final_change=final_change, residual=float(resid),
                             q=bud.q)


@dataclass(frozen=True)
class PerturbedReport:
    exponents: tuple
    classification: str
    margin: float


def perturbed_check(cB, base, point, n=4000, zero_tol=0.02, reorth=10):
    """Spectrum of the perturbed cocycle plus the hyperbolicity margin.

    Coverage is statistical (finitely many trials and one orbit per call);
    the caller's report should say how many trials were run.
    """
    spectrum = lyapunov_exponents(cB, base, point, n, reorth=reorth)
    cls = classify(spectrum, zero_tol)
    return PerturbedReport(
        exponents=tuple(spectrum.exponents),
        classification=cls.value,
        margin=float(spectrum.min_abs_exponent),
    )
