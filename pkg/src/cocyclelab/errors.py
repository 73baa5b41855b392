"""Exception types shared across the package.

Every numerical failure mode that callers are expected to handle gets a
named class; plain ValueError is reserved for violated call contracts.
"""


class CocycleLabError(Exception):
    """Base class for all package-specific errors."""


class HorizonExhausted(CocycleLabError):
    """A finite-horizon orbit search ended before the event occurred."""


class EmptyTower(CocycleLabError):
    """No sampled point landed in the Rokhlin tower base."""


class NotAperiodic(CocycleLabError):
    """Operation requires an aperiodic base system."""


class SingularGenerator(CocycleLabError):
    """A generator factor is numerically singular."""


class WindowUnderflow(CocycleLabError):
    """Orbit-function window too small for the requested operation."""


class WindowTooSmall(CocycleLabError):
    """Not enough stored samples for the requested window."""


class UnknownName(CocycleLabError):
    """Unknown builtin example name."""


class Degenerate(CocycleLabError):
    """Evolved frame lost numerical rank (re-orthonormalize more often)."""


class IllConditioned(CocycleLabError):
    """Filtration intersection is ill conditioned (window too small)."""


class Inconclusive(CocycleLabError):
    """Spectrum does not resolve hyperbolicity at the given tolerance."""


class NotHyperbolic(CocycleLabError):
    """Operation requires a hyperbolic cocycle / a dichotomy certificate."""


class NotDegenerate(CocycleLabError):
    """Operation requires a zero Lyapunov exponent."""


class UnstableNotInvertible(CocycleLabError):
    """Generator restricted to the unstable bundle is numerically singular."""


class Violation(CocycleLabError):
    """A certified inequality failed on a fresh sample.

    Carries ``witness = (point, n, side)`` identifying the failure.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class TailTooLarge(CocycleLabError):
    """Series truncation error exceeds the requested tolerance."""


class SingularSystem(CocycleLabError):
    """Periodic solve matrix is singular (unit-modulus Floquet multiplier)."""


class NoDecay(CocycleLabError):
    """Uniqueness probe found a direction without the certified decay."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class NoCandidate(CocycleLabError):
    """Recurrent-vector grid search found no low-defect direction."""


class RatioNotAchieved(CocycleLabError):
    """Witness pipeline finished but the norm ratio fell short of target."""


class BudgetViolated(CocycleLabError):
    """Perturbation exceeds the admissible budget on a sampled point."""


class NoConvergence(CocycleLabError):
    """Fixed-point iteration did not converge within max_iters."""


class MissingArtifact(CocycleLabError):
    """Report emission requested for artifacts that do not exist."""


class ConfigError(CocycleLabError):
    """Run configuration failed to parse or validate."""
