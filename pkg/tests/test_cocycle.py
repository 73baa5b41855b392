import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import cocyclelab as cl
from cocyclelab.cocycle import generator_at, generator_orbit
from cocyclelab.errors import SingularGenerator, UnknownName, WindowUnderflow


def test_evolve_shear_square(rotation, shear_cocycle):
    mp = cl.evolve(shear_cocycle, rotation, rotation.point(0.1), 2)
    assert np.array_equal(mp.value, [[1.0, 2.0], [0.0, 1.0]])
    assert mp.log_scale == 0.0 and not mp.overflow


def test_evolve_diagonal_powers(rotation, diag_cocycle):
    mp = cl.evolve(diag_cocycle, rotation, rotation.point(0.1), 3)
    assert np.allclose(mp.value, np.diag([8.0, 0.125]))


def test_evolve_zero_steps_identity(bernoulli, shear_cocycle):
    mp = cl.evolve(shear_cocycle, bernoulli, bernoulli.point(1), 0)
    assert np.array_equal(mp.value, np.eye(2))
    assert mp.length == 0


def test_evolve_overflow_flag(rotation):
    big = cl.builtin("diagonal", entries=(np.exp(3.0), 1.0))
    mp = cl.evolve(big, rotation, rotation.point(0.0), 300)
    assert mp.overflow  # top entry e^900 beyond 1e300
    assert np.all(np.isfinite(mp.value))
    assert mp.log_norm() == pytest.approx(900.0, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(min_value=1, max_value=40), split=st.floats(0.0, 1.0))
def test_cocycle_law_random_splits(n, split):
    base = cl.Rotation()
    c = cl.builtin("nonuniform_rotation", rate=0.4, eps=0.25)
    pt = base.point(0.23)
    a = int(round(split * n))
    full = cl.evolve(c, base, pt, n).value
    left = cl.evolve(c, base, base.step(pt, a), n - a).value
    right = cl.evolve(c, base, pt, a).value
    assert np.linalg.norm(full - left @ right) <= 1e-10 * max(np.linalg.norm(full), 1.0)


def test_evolve_back_examples(rotation, diag_cocycle, shear_cocycle):
    assert np.allclose(
        cl.evolve_back(diag_cocycle, rotation, rotation.point(0.2), 1).value,
        np.diag([0.5, 2.0]),
    )
    assert np.array_equal(
        cl.evolve_back(shear_cocycle, rotation, rotation.point(0.2), 0).value,
        np.eye(2),
    )
    assert np.array_equal(
        cl.evolve_back(shear_cocycle, rotation, rotation.point(0.2), 3).value,
        [[1.0, -3.0], [0.0, 1.0]],
    )


def test_back_forward_consistency(rotation, rng):
    c = cl.builtin("nonuniform_rotation")
    pt = rotation.point(0.4)
    for n in (1, 7, 30):
        fwd = cl.evolve(c, rotation, rotation.step(pt, -n), n).value
        bwd = cl.evolve_back(c, rotation, pt, n).value
        assert np.linalg.norm(fwd @ bwd - np.eye(2)) <= 1e-8


def test_evolve_back_requires_invertible(rotation):
    c = cl.Cocycle(dim=2, generator=lambda p: np.diag([1.0, 0.0]), invertible=False)
    with pytest.raises(SingularGenerator):
        cl.evolve_back(c, rotation, rotation.point(0.0), 1)


def test_evolve_back_singular_factor(rotation):
    c = cl.Cocycle(dim=2, generator=lambda p: np.diag([1.0, 0.0]), invertible=True)
    with pytest.raises(SingularGenerator):
        cl.evolve_back(c, rotation, rotation.point(0.0), 2)


# -- Mather operator --------------------------------------------------------


def test_mather_zero_function(rotation, shear_cocycle):
    f = cl.OrbitFunction.zeros(rotation, rotation.point(0.1), -3, 3, 2)
    out = cl.mather_apply(shear_cocycle, rotation, f)
    assert out.lo == -2 and out.hi == 3
    assert np.all(out.values == 0.0)


def test_mather_identity_cocycle_is_shift(rotation, rng):
    ident = cl.builtin("diagonal", entries=(1.0, 1.0))
    f = cl.OrbitFunction.from_rule(
        rotation, rotation.point(0.2), -4, 4,
        lambda p: np.array([p.angle, 1.0 - p.angle]),
    )
    out = cl.mather_apply(ident, rotation, f)
    for k in range(-3, 5):
        assert np.allclose(out.value(k), f.value(k - 1))


def test_mather_scalar_half(rotation):
    half = cl.builtin("diagonal", entries=(0.5,))
    f = cl.OrbitFunction.constant(rotation, rotation.point(0.0), -2, 2, [1.0])
    out = cl.mather_apply(half, rotation, f)
    assert np.all(out.values == 0.5)


def test_mather_window_underflow(rotation, shear_cocycle):
    f = cl.OrbitFunction.zeros(rotation, rotation.point(0.0), 0, 0, 2)
    with pytest.raises(WindowUnderflow):
        cl.mather_apply(shear_cocycle, rotation, f)


def test_mather_linearity(rotation, shear_cocycle, rng):
    pt = rotation.point(0.6)
    f = cl.OrbitFunction.from_rule(rotation, pt, -5, 5,
                                   lambda p: rng.standard_normal(2))
    g = cl.OrbitFunction.from_rule(rotation, pt, -5, 5,
                                   lambda p: rng.standard_normal(2))
    lhs = cl.mather_apply(shear_cocycle, rotation, f.combine(g, 2.0, -3.0))
    rhs = cl.mather_apply(shear_cocycle, rotation, f).combine(
        cl.mather_apply(shear_cocycle, rotation, g), 2.0, -3.0)
    assert np.allclose(lhs.values, rhs.values, atol=1e-14)


# -- builtins ---------------------------------------------------------------


def test_builtin_unknown_name():
    with pytest.raises(UnknownName):
        cl.builtin("not_a_cocycle")


def test_builtin_block_mixed_shape():
    c = cl.builtin("block_mixed", factor=2.0)
    A = generator_at(c, cl.Rotation(), cl.Rotation().point(0.0))
    assert A.shape == (4, 4)
    R = A[2:, 2:]
    assert np.allclose(R.T @ R, np.eye(2), atol=1e-15)  # isometric zero block
    assert A[0, 0] == 2.0 and A[1, 1] == 0.5


def test_symbol_plan_matches_pointwise(bernoulli):
    c = cl.builtin("random_sl2")
    pt = bernoulli.point(42)
    mats = generator_orbit(c, bernoulli, pt, 0, 6)
    for k in range(6):
        expected = cl.cocycle.DEFAULT_SL2[bernoulli.symbol(pt, k)]
        assert np.array_equal(mats[k], expected)


def test_angle_plan_matches_pointwise(rotation):
    c = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
    pt = rotation.point(0.3)
    mats = generator_orbit(c, rotation, pt, -3, 3)
    for i, k in enumerate(range(-3, 3)):
        assert np.allclose(mats[i], generator_at(c, rotation, rotation.step(pt, k)),
                           atol=0)


def test_condition_estimate(rotation, diag_cocycle):
    mp = cl.evolve(diag_cocycle, rotation, rotation.point(0.0), 4)
    assert mp.condition == pytest.approx(16.0 / (1 / 16.0), rel=1e-12)
