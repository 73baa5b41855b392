import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import met
from cocyclelab.errors import IllConditioned

LN2 = np.log(2.0)

# frozen from a single 1e6-step QR run (stderr ~ 4e-5); see decisions ledger
RANDOM_SL2_TOP = 0.91552


def test_diagonal_spectrum_exact(rotation, diag_cocycle):
    spec = cl.lyapunov_exponents(diag_cocycle, rotation, rotation.point(0.3), 10**4)
    assert spec.exponents[0] == pytest.approx(LN2, abs=1e-6)
    assert spec.exponents[1] == pytest.approx(-LN2, abs=1e-6)
    assert spec.multiplicities == (1, 1)
    assert sum(spec.multiplicities) == spec.dim


def test_shear_spectrum_merges_to_zero(rotation, shear_cocycle):
    spec = cl.lyapunov_exponents(shear_cocycle, rotation, rotation.point(0.3), 10**4)
    assert len(spec.exponents) == 1
    assert spec.multiplicities == (2,)
    assert abs(spec.exponents[0]) <= 5e-3


def test_random_sl2_top_exponent(bernoulli):
    c = cl.builtin("random_sl2")
    spec = cl.lyapunov_exponents(c, bernoulli, bernoulli.point(7), 10**5)
    assert spec.exponents[0] == pytest.approx(RANDOM_SL2_TOP, abs=5e-3)
    # det 1: sum rule
    assert abs(sum(m * e for e, m in zip(spec.exponents, spec.multiplicities))) <= 1e-4


def test_sum_rule_against_determinant(rotation):
    # n kept small enough that both singular values stay representable in
    # one rescaled matrix (dynamic range e^{n (l1 - l2)})
    c = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
    pt = rotation.point(0.2)
    n = 500
    spec = cl.lyapunov_exponents(c, rotation, pt, n)
    mp = cl.evolve(c, rotation, pt, n)
    sign, logdet = np.linalg.slogdet(mp.value)
    det_rate = (logdet + c.dim * mp.log_scale) / n
    total = sum(m * e for e, m in zip(spec.exponents, spec.multiplicities))
    assert total == pytest.approx(det_rate, abs=1e-4)


def test_merge_idempotence(rotation, shear_cocycle):
    spec1 = cl.lyapunov_exponents(shear_cocycle, rotation, rotation.point(0.1), 5000)
    spec2 = cl.lyapunov_exponents(shear_cocycle, rotation, rotation.point(0.1), 10000)
    gap1 = spec1.raw[0] - spec1.raw[-1]
    if gap1 < spec1.gap_tol / 2:
        assert len(spec2.exponents) <= len(spec1.exponents)


def test_spectrum_requires_minimum_steps(rotation, diag_cocycle):
    with pytest.raises(ValueError):
        cl.lyapunov_exponents(diag_cocycle, rotation, rotation.point(0.0), 50)


def test_effectively_neg_inf_flag(rotation):
    c = cl.builtin("diagonal", entries=(1.0, np.exp(-25.0)))
    spec = cl.lyapunov_exponents(c, rotation, rotation.point(0.0), 200)
    assert spec.effectively_neg_inf == (False, True)


# -- vector exponents ---------------------------------------------------------


def test_vector_exponent_diagonal_exact(rotation, diag_cocycle):
    v = cl.vector_exponent(diag_cocycle, rotation, rotation.point(0.5), [1.0, 0.0], 500)
    assert v == pytest.approx(LN2, abs=1e-9)


def test_vector_exponent_shear_fixed_vector(rotation, shear_cocycle):
    v = cl.vector_exponent(shear_cocycle, rotation, rotation.point(0.5), [1.0, 0.0], 200)
    assert v == 0.0


def test_vector_exponent_shear_linear_growth(rotation, shear_cocycle):
    n = 10**4
    v = cl.vector_exponent(shear_cocycle, rotation, rotation.point(0.5), [0.0, 1.0], n)
    closed_form = np.log(np.hypot(n, 1.0)) / n
    assert v == pytest.approx(closed_form, rel=1e-6)
    assert v == pytest.approx(9.2e-4, rel=1e-2)


# -- Oseledets splittings -----------------------------------------------------


def test_splitting_diagonal_coordinates(rotation, diag_cocycle):
    spec = cl.lyapunov_exponents(diag_cocycle, rotation, rotation.point(0.3), 2000)
    split = cl.oseledets_splitting(diag_cocycle, rotation, rotation.point(0.3), 40, spec)
    assert np.allclose(np.abs(split.bases[0]), [[1.0], [0.0]], atol=1e-10)
    assert np.allclose(np.abs(split.bases[1]), [[0.0], [1.0]], atol=1e-10)
    assert split.equivariance_defect <= 1e-10


def test_splitting_nonuniform_rotation_axes(rotation):
    c = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
    spec = cl.lyapunov_exponents(c, rotation, rotation.point(0.7), 4000)
    split = cl.oseledets_splitting(c, rotation, rotation.point(0.7), 40, spec)
    assert np.allclose(np.abs(split.bases[0]), [[1.0], [0.0]], atol=1e-8)
    assert split.equivariance_defect <= 1e-8


def test_splitting_random_sl2_self_consistency(bernoulli):
    c = cl.builtin("random_sl2")
    pt = bernoulli.point(11)
    spec = cl.lyapunov_exponents(c, bernoulli, pt, 10**5)
    split = cl.oseledets_splitting(c, bernoulli, pt, 60, spec)
    assert split.equivariance_defect <= 1e-6
    # slow vector decays near the bottom exponent.  Only short horizons are
    # meaningful here: float round-off in the fast component grows at +l1
    # and overtakes the signal around n ~ 20.
    v2 = split.bases[1][:, 0]
    rate = cl.vector_exponent(c, bernoulli, pt, v2, 15)
    assert rate <= -0.5
    assert np.linalg.matrix_rank(split.full_matrix()) == 2


def test_exponent_attainment_with_stderr(bernoulli, rotation):
    # fast block of random_sl2: attainment at the splitting window
    c = cl.builtin("random_sl2")
    pt = bernoulli.point(23)
    window = 500
    spec_long = cl.lyapunov_exponents(c, bernoulli, pt, 10**5)
    spec_win = cl.lyapunov_exponents(c, bernoulli, pt, window)
    split = cl.oseledets_splitting(c, bernoulli, pt, window, spec_long)
    attained = cl.vector_exponent(c, bernoulli, pt, split.bases[0][:, 0], window)
    assert abs(attained - spec_long.exponents[0]) <= 3 * max(spec_win.stderr[0], 1e-3)
    # diagonal model: the splitting vectors are exact, both blocks attain
    cn = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
    p2 = rotation.point(0.4)
    spec = cl.lyapunov_exponents(cn, rotation, p2, 200)
    split2 = cl.oseledets_splitting(cn, rotation, p2, 200, spec)
    for lam, err, basis in zip(spec.exponents, spec.stderr, split2.bases):
        attained = cl.vector_exponent(cn, rotation, p2, basis[:, 0], 200)
        assert abs(attained - lam) <= 3 * max(err, 1e-7)


def test_splitting_requires_invertible(rotation):
    c = cl.Cocycle(dim=2, generator=lambda p: np.diag([1.0, 0.0]), invertible=False)
    spec = met.LyapunovSpectrum(exponents=(0.0, -25.0), multiplicities=(1, 1),
                                stderr=(0.0, 0.0), n=100, dim=2, gap_tol=0.02)
    with pytest.raises(IllConditioned):
        cl.oseledets_splitting(c, rotation, rotation.point(0.0), 30, spec)


def test_forward_filtration_nesting(rotation):
    c = cl.builtin("diagonal", entries=(2.0, 0.5))
    spec = cl.lyapunov_exponents(c, rotation, rotation.point(0.1), 500)
    flags = cl.forward_filtration(c, rotation, rotation.point(0.1), 40, spec)
    assert flags[0].shape == (2, 1)
    assert flags[1].shape == (2, 0)
    assert np.allclose(np.abs(flags[0]), [[0.0], [1.0]], atol=1e-10)


def test_window_precondition(rotation):
    c = cl.builtin("diagonal", entries=(np.exp(0.05), np.exp(-0.05)))
    spec = cl.lyapunov_exponents(c, rotation, rotation.point(0.0), 500)
    with pytest.raises(IllConditioned):
        cl.oseledets_splitting(c, rotation, rotation.point(0.0), 20, spec)


# -- periodic oracle ----------------------------------------------------------


def test_periodic_spectrum_exact():
    base = cl.FinitePeriodic(2)
    table = [np.diag([3.0, 1.0 / 3.0]), np.diag([0.5, 2.0])]
    c = cl.state_cocycle(table)
    spec = cl.periodic_spectrum(c, base)
    assert spec.exponents[0] == pytest.approx(np.log(1.5) / 2, abs=1e-14)
    assert spec.exponents[1] == pytest.approx(np.log(2.0 / 3.0) / 2, abs=1e-14)
