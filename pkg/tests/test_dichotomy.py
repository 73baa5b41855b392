import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import dichotomy as dich
from cocyclelab import met
from cocyclelab.dichotomy import Classification, DichotomyCertificate
from cocyclelab.errors import Inconclusive, NotHyperbolic, Violation, WindowTooSmall
from conftest import make_certificate

LN2 = np.log(2.0)


def _spec(exponents, mults, stderr=1e-6):
    return met.LyapunovSpectrum(
        exponents=tuple(exponents), multiplicities=tuple(mults),
        stderr=tuple(stderr for _ in exponents), n=10**4,
        dim=sum(mults), gap_tol=0.02,
    )


# -- classify -----------------------------------------------------------------


def test_classify_hyperbolic_diag():
    assert dich.classify(_spec([LN2, -LN2], [1, 1]), 0.02) is Classification.HYPERBOLIC


def test_classify_shear_zero():
    assert dich.classify(_spec([0.0], [2]), 0.02) is Classification.HAS_ZERO_EXPONENT


def test_classify_half_rates():
    assert dich.classify(_spec([0.5, -0.5], [1, 1]), 0.02) is Classification.HYPERBOLIC


def test_classify_inconclusive_band():
    with pytest.raises(Inconclusive):
        dich.classify(_spec([0.015, -0.7], [1, 1]), 0.02)


def test_classify_unconverged_stderr():
    with pytest.raises(Inconclusive):
        dich.classify(_spec([0.5, -0.5], [1, 1], stderr=0.02), 0.02)


def test_classify_two_step_consistency(rotation):
    # replacing A by its 2-step cocycle doubles exponents, same class
    c = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
    pt = rotation.point(0.3)
    spec1 = cl.lyapunov_exponents(c, rotation, pt, 4000)

    base2 = cl.Rotation(gamma=(2.0 * rotation.gamma) % 1.0)
    gam = rotation.gamma

    def gen2(p):
        a1 = cl.cocycle.generator_at(c, rotation, rotation.point(p.angle))
        a2 = cl.cocycle.generator_at(c, rotation, rotation.point((p.angle + gam) % 1.0))
        return a2 @ a1

    c2 = cl.Cocycle(dim=2, generator=gen2, descriptor="two-step")
    spec2 = cl.lyapunov_exponents(c2, base2, base2.point(0.3), 4000)
    assert dich.classify(spec1, 0.02) is dich.classify(spec2, 0.04)
    assert spec2.exponents[0] == pytest.approx(2 * spec1.exponents[0], abs=0.02)


# -- certificates -------------------------------------------------------------


def test_certificate_diagonal_default_safety(rotation, diag_cocycle, rng):
    cert = make_certificate(diag_cocycle, rotation, rotation.point(0.3), rng)
    assert cert.rate == pytest.approx(0.75 * LN2, abs=1e-9)
    assert cert.stable_dim == 1
    Ps = cert.projector(rotation.point(0.11))
    assert np.allclose(Ps, np.diag([0.0, 1.0]), atol=1e-10)
    for K in cert.K_samples.values():
        assert K == pytest.approx(1.0, abs=1e-9)
        assert K >= 1.0 - 1e-12


def test_certificate_projection_algebra(rotation, rng):
    c = cl.builtin("random_sl2")
    base = cl.BernoulliShift((0.5, 0.5))
    cert = make_certificate(c, base, base.point(5), rng, n=20000)
    for p in base.sample(rng, 6):
        Ps = cert.projector(p)
        Pu = cert.projector_u(p)
        assert np.array_equal(Ps + Pu, np.eye(2))
        assert np.linalg.norm(Ps @ Ps - Ps) <= 1e-8
        assert np.linalg.norm(Ps @ Pu) <= 1e-8
        A = cl.cocycle.generator_at(c, base, p)
        Ps_next = cert.projector(base.step(p, 1))
        assert np.linalg.norm(Ps_next @ A - A @ Ps) <= 1e-6


def test_certificate_nonhyperbolic_refused(rotation, shear_cocycle, rng):
    spec = cl.lyapunov_exponents(shear_cocycle, rotation, rotation.point(0.1), 4000)
    rule = met.splitting_rule(shear_cocycle, rotation, 40, spec)
    with pytest.raises(NotHyperbolic):
        dich.build_certificate(shear_cocycle, rotation, rule, spec,
                               rotation.sample(rng, 3))


def test_verify_diagonal_tight(rotation, diag_certificate, diag_cocycle, rng):
    fresh = rotation.sample(rng, 4)
    rep = dich.verify_certificate(diag_certificate, diag_cocycle, rotation,
                                  fresh, slack=1.0 + 1e-9)
    assert rep.passed
    assert rep.worst_ratio == pytest.approx(1.0, abs=1e-9)


def test_verify_nonuniform_fresh_samples(rotation, rng):
    c = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
    cert = make_certificate(c, rotation, rotation.point(0.2), rng, n=4000)
    fresh = rotation.sample(rng, 5)
    rep = dich.verify_certificate(cert, c, rotation, fresh, slack=1.01)
    assert rep.passed
    # K genuinely varies along the fiber here
    Ks = list(cert.K_samples.values())
    assert max(Ks) > min(Ks) + 1e-3


def test_verify_soundness_all_hyperbolic_builtins(rotation, bernoulli, rng):
    cases = [
        (cl.builtin("diagonal", entries=(2.0, 0.5)), rotation, rotation.point(0.4)),
        (cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3), rotation,
         rotation.point(0.8)),
        (cl.builtin("random_sl2"), bernoulli, bernoulli.point(3)),
    ]
    for c, base, anchor in cases:
        cert = make_certificate(c, base, anchor, rng, n=20000)
        rep = dich.verify_certificate(cert, c, base, base.sample(rng, 4), slack=1.05)
        assert rep.passed, c.descriptor


def test_planted_doubled_rate_violation(rotation, diag_cocycle, rng):
    def proj_fn(point):
        return (np.diag([0.0, 1.0]), np.array([[1.0], [0.0]]),
                np.array([[0.0], [1.0]]))

    class PlantedK(DichotomyCertificate):
        def K_of(self, point, n_max=None):
            return 1.0

    planted = PlantedK(cocycle=diag_cocycle, base=rotation, rate=2 * LN2,
                       stable_dim=1, proj_fn=proj_fn, n_max=50, safety=0.0)
    with pytest.raises(Violation) as exc:
        dich.verify_certificate(planted, diag_cocycle, rotation,
                                [rotation.point(0.3)], slack=1.05)
    point, n, side = exc.value.witness
    assert n <= 2  # fails at small n


# -- temperedness -------------------------------------------------------------


def test_temperedness_constant():
    K = {n: 5.0 for n in (0, 10, -10, 100, -100, 1000, -1000)}
    rep = dich.temperedness_diagnostic(K, [10, 100, 1000], tol=0.05)
    assert rep.passed
    assert all(f == 0.0 and b == 0.0 for _, f, b in rep.slopes)


def test_temperedness_planted_growth():
    K = {n: float(np.exp(0.1 * abs(n)))
         for n in (0, 10, -10, 100, -100, 1000, -1000)}
    rep = dich.temperedness_diagnostic(K, [10, 100, 1000], tol=0.05)
    assert not rep.passed
    assert rep.slopes[-1][1] == pytest.approx(0.1, abs=1e-12)


def test_temperedness_nonuniform_certificate(rotation, rng):
    c = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
    cert = make_certificate(c, rotation, rotation.point(0.3), rng, n=4000, n_max=60)
    anchor = rotation.point(0.3)
    horizons = [10, 100, 1000, 10**4]
    K = {0: cert.K_of(anchor, n_max=60)}
    for h in horizons:
        K[h] = cert.K_of(rotation.step(anchor, h), n_max=60)
        K[-h] = cert.K_of(rotation.step(anchor, -h), n_max=60)
    rep = dich.temperedness_diagnostic(K, horizons, tol=0.05)
    assert rep.passed


# -- envelopes ----------------------------------------------------------------


def test_envelope_constant():
    W = 20
    env = dich.tempered_envelope(np.full(4 * W + 1, 5.0), eps=0.1, W=W)
    assert np.allclose(env.values, 5.0, rtol=1e-14)


def test_envelope_spike_decay():
    W = 50
    K = np.ones(4 * W + 1)
    K[2 * W] = 100.0  # spike at the center
    eps = 0.1
    env = dich.tempered_envelope(K, eps=eps, W=W)
    for k in range(-W, W + 1):
        expect = max(1.0, 100.0 * np.exp(-eps * abs(k)))
        assert env.value(k) == pytest.approx(expect, rel=1e-10)


def test_envelope_laws_exact(rng):
    W = 60
    K = np.exp(rng.standard_normal(4 * W + 1).cumsum() * 0.05)
    env = dich.tempered_envelope(K, eps=0.2, W=W)
    assert env.check_domination(K[W : 3 * W + 1])
    assert env.max_growth_violation() <= 1e-9


def test_envelope_window_too_small():
    with pytest.raises(WindowTooSmall):
        dich.tempered_envelope(np.ones(10), eps=0.1, W=10)


def test_certificate_report_fields(rotation, diag_certificate):
    rep = diag_certificate.report()
    assert rep["stable_dim"] == 1
    assert "K_quantiles" in rep and rep["K_quantiles"]["min"] >= 1.0 - 1e-12
    assert "measurability" in rep["note"]
