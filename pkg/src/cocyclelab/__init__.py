"""cocyclelab: a desk-scale numerical laboratory for linear cocycles.

Lyapunov spectra, Oseledets splittings, tempered exponential dichotomy
certificates, weighted admissibility solves with exact periodic oracles,
zero-exponent violation witnesses, and robustness under perturbation.
"""

from . import errors
from .base import (
    AngleInterval,
    BernoulliShift,
    FinitePeriodic,
    FullSet,
    IndicatorSet,
    Observable,
    PredicateSet,
    Rotation,
    SymbolCylinder,
    birkhoff_sum,
    return_times,
    rokhlin_base,
)
from .cocycle import (
    Cocycle,
    MatrixProduct,
    builtin,
    evolve,
    evolve_back,
    mather_apply,
    state_cocycle,
    symbol_cocycle,
)
from .met import (
    LyapunovSpectrum,
    OseledetsSplitting,
    forward_filtration,
    lyapunov_exponents,
    oseledets_splitting,
    periodic_spectrum,
    splitting_rule,
    vector_exponent,
)
from .dichotomy import (
    Classification,
    DichotomyCertificate,
    TemperedEnvelope,
    build_certificate,
    classify,
    periodic_certificate,
    tempered_envelope,
    temperedness_diagnostic,
    verify_certificate,
)
from .orbit_functions import OrbitFunction, WeightModel, weighted_norm
from .admissibility import (
    bound_probe,
    green_solve,
    oracle_solve_periodic,
    random_periodic_hyperbolic,
    residual,
    uniqueness_probe,
    weight_from_K,
)
from .degeneracy import (
    InducedCocycle,
    ManeSequencePair,
    ViolationWitness,
    WitnessBudgets,
    birkhoff_extrema,
    induce,
    interpolate_sequences,
    mane_sequences,
    recurrent_vector_search,
    violation_witness,
)
from .robustness import (
    PerturbationBudget,
    budget,
    contraction_solve,
    inbudget_perturbation,
    perturbed_check,
)
from .kernels import backend_name

__version__ = "0.1.0"
