import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import dichotomy as dich
from cocyclelab import met


@pytest.fixture
def rotation():
    return cl.Rotation()


@pytest.fixture
def bernoulli():
    return cl.BernoulliShift((0.5, 0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def diag_cocycle():
    return cl.builtin("diagonal", entries=(2.0, 0.5))


@pytest.fixture
def shear_cocycle():
    return cl.builtin("shear")


def make_certificate(c, base, anchor, rng, n=2000, window=40, safety=0.25,
                     n_max=200, samples=5):
    """Spectrum -> splitting rule -> certificate, the standard route."""
    spec = met.lyapunov_exponents(c, base, anchor, n)
    rule = met.splitting_rule(c, base, window, spec)
    pts = base.sample(rng, samples)
    return dich.build_certificate(c, base, rule, spec, pts,
                                  n_max=n_max, safety=safety)


@pytest.fixture
def diag_certificate(rotation, diag_cocycle, rng):
    # exact rate ln 2 (safety 0): the constant-diagonal QR logs are exact
    return make_certificate(diag_cocycle, rotation, rotation.point(0.3), rng,
                            safety=0.0)
