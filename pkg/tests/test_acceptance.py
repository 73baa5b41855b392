"""Acceptance criteria, one test per criterion.

Each test prints a PASS line with its measured runtime (visible under
pytest -s); tolerances and budgets are pinned here, not configurable.
"""

import hashlib
import os
import time

import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import admissibility as adm
from cocyclelab import degeneracy as deg
from cocyclelab import dichotomy as dich
from cocyclelab import met
from cocyclelab import robustness as rob
from cocyclelab.base import birkhoff_partial_sums
from cocyclelab.config import parse_config
from cocyclelab.experiments import run
from conftest import make_certificate

LN2 = np.log(2.0)


class _Timer:
    def __init__(self, number, label, limit):
        self.number, self.label, self.limit = number, label, limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        status = "PASS" if exc_type is None else "FAIL"
        print(f"ACCEPTANCE {self.number:2d} [{status}] {self.label} "
              f"({elapsed:.2f}s / limit {self.limit:.0f}s)")
        if exc_type is None:
            assert elapsed < self.limit, f"runtime {elapsed:.2f}s over budget"


def test_criterion_1_spectrum_exactness():
    with _Timer(1, "spectrum exactness at n=1e4", 5.0):
        base = cl.Rotation()
        spec = cl.lyapunov_exponents(cl.builtin("diagonal", entries=(2.0, 0.5)),
                                     base, base.point(0.3), 10**4)
        assert spec.exponents[0] == pytest.approx(LN2, abs=1e-6)
        assert spec.exponents[1] == pytest.approx(-LN2, abs=1e-6)
        shear = cl.lyapunov_exponents(cl.builtin("shear"), base,
                                      base.point(0.3), 10**4)
        assert len(shear.exponents) == 1 and shear.multiplicities == (2,)
        assert abs(shear.exponents[0]) <= 5e-3


def test_criterion_2_oracle_equivalence():
    with _Timer(2, "green solve vs dense periodic oracle, 100 instances", 30.0):
        rng = np.random.default_rng(1002)
        worst = 0.0
        for _ in range(100):
            c, base, _ = adm.random_periodic_hyperbolic(rng, p_max=8, d_max=4)
            cert = dich.periodic_certificate(c, base, safety=0.0)
            p = base.period
            g_states = rng.standard_normal((p, c.dim))
            g_states /= np.linalg.norm(g_states, axis=1, keepdims=True)
            lo, hi = -(80 + p), 80 + p
            vals = np.array([g_states[k % p] for k in range(lo, hi + 1)])
            g = cl.OrbitFunction(base=base, anchor=base.point(0), lo=lo, hi=hi,
                                 values=vals)
            f = adm.green_solve(c, cert, g, N_tail=80)
            oracle = adm.oracle_solve_periodic(c, base, g_states)
            dev = max(float(np.max(np.abs(f.values[j] - oracle[k % p])))
                      for j, k in enumerate(f.indices))
            worst = max(worst, dev)
        assert worst <= 1e-8


def test_criterion_3_analytic_bound():
    with _Timer(3, "scalar bound probe: empirical 2 <= analytic 3", 1.0):
        base = cl.Rotation()
        rng = np.random.default_rng(1003)
        c = cl.builtin("diagonal", entries=(0.5,))
        cert = make_certificate(c, base, base.point(0.3), rng, safety=0.0, n=1000)
        assert cert.rate == pytest.approx(LN2, abs=1e-12)
        rep = adm.bound_probe(c, cert, base.point(0.3), trials=3, window=25,
                              N_tail=60, rng=rng)
        assert rep.analytic == pytest.approx(3.0, abs=1e-9)
        assert rep.empirical == pytest.approx(2.0, abs=1e-9)
        assert rep.empirical <= rep.analytic


def test_criterion_4_mane_construction():
    with _Timer(4, "Mane pairs: shear exact, block_mixed within 1e-10", 1.0):
        base = cl.Rotation()
        shear = cl.builtin("shear")
        pair = deg.mane_sequences(shear, base, base.point(0.2), [1.0, 0.0], 3.0)
        assert pair.n_star == 2 and pair.n_end == 5
        assert abs(pair.alpha[pair.n_end]) <= 1e-12
        assert np.array_equal(pair.xs[0], pair.ys[0])          # (i)
        assert pair.recurrence_residual() <= 1e-12             # (ii)
        assert pair.beta[pair.n_end] == pytest.approx(-1.0)    # schedule end
        assert pair.sup_x() >= 3.0 and pair.sup_y() <= 1.0     # (iv)

        block = cl.builtin("block_mixed")
        E0 = np.zeros((4, 2))
        E0[2, 0] = E0[3, 1] = 1.0
        v, _ = deg.recurrent_vector_search(block, base, base.point(0.1), E0, 300,
                                           grid=64)
        pair2 = deg.mane_sequences(block, base, base.point(0.1), v, 10.0)
        assert np.array_equal(pair2.xs[0], pair2.ys[0])
        assert pair2.recurrence_residual() <= 1e-10
        assert pair2.sup_x() >= 10.0 - 1e-10
        assert pair2.sup_y() <= 1.0 + 1e-12
        assert abs(pair2.alpha[pair2.n_end]) <= 1e-12


def test_criterion_5_induced_exponent_scaling():
    with _Timer(5, "induced top exponent within 2% of 0.6", 10.0):
        base = cl.Rotation()
        rng = np.random.default_rng(1005)
        c = cl.builtin("diagonal", entries=(np.exp(0.3), np.exp(-0.3)))
        ind = deg.induce(c, base, cl.AngleInterval(0.0, 0.5), 400, rng)
        anchor = ind.base.sample(rng, 1)[0]
        spec = cl.lyapunov_exponents(ind.cocycle, ind.base, anchor, 20000)
        assert abs(spec.exponents[0] - 0.6) <= 0.02 * 0.6


def test_criterion_6_witness_end_to_end():
    with _Timer(6, "violation witness: ratio >= 11, residual <= 1e-10", 60.0):
        base = cl.BernoulliShift((0.5, 0.5))
        shear = cl.builtin("shear")
        w = deg.violation_witness(shear, base, cl.WeightModel.constant(1.0),
                                  10.0, rng=np.random.default_rng(1006))
        assert w.residual <= 1e-10
        assert w.ratio >= 11.0 - 1e-9


def test_criterion_7_envelope_laws():
    with _Timer(7, "tempered envelope laws on nonuniform_rotation", 5.0):
        base = cl.Rotation()
        rng = np.random.default_rng(1007)
        c = cl.builtin("nonuniform_rotation", rate=0.5, eps=0.3)
        cert = make_certificate(c, base, base.point(0.3), rng, n=2000, n_max=60)
        W = 250
        anchor = base.point(0.3)
        K = np.array([cert.K_of(base.step(anchor, k), n_max=60)
                      for k in range(-2 * W, 2 * W + 1)])
        env = dich.tempered_envelope(K, eps=cert.rate / 3.0, W=W)
        assert env.check_domination(K[W : 3 * W + 1])       # K <= K_eps, exact
        assert env.max_growth_violation() <= 1e-9           # growth law
        assert np.max(K[W : 3 * W + 1]) > np.min(K[W : 3 * W + 1])  # non-constant


def test_criterion_8_robustness():
    with _Timer(8, "20 in-budget perturbations: contraction and margins", 60.0):
        base = cl.Rotation()
        rng = np.random.default_rng(1008)
        c = cl.builtin("diagonal", entries=(2.0, 0.5))
        cert = make_certificate(c, base, base.point(0.3), rng, safety=0.0, n=2000)
        assert cert.rate == pytest.approx(LN2, abs=1e-12)
        bud = rob.budget(cert, safety=0.5)
        assert bud.d == pytest.approx(1.0 / 6.0, abs=1e-12)
        assert bud.q == 0.5
        anchor = base.point(0.3)
        for t in range(20):
            cB = rob.inbudget_perturbation(c, base, bud, seed=t + 1)
            dirs = rng.standard_normal((261, 2))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            g = cl.OrbitFunction(base=base, anchor=anchor, lo=-130, hi=130,
                                 values=dirs)
            res = rob.contraction_solve(c, cB, cert, bud, g, tol=1e-10,
                                        N_tail=60, interior_margin=35)
            assert res.max_ratio <= 0.55
            assert res.residual <= 1e-8
            rep = rob.perturbed_check(cB, base, base.point(0.031 * (t + 1)), n=4000)
            assert rep.classification == "hyperbolic"
            assert rep.margin >= 0.2


def test_criterion_9_birkhoff_recurrence():
    with _Timer(9, "Birkhoff sums straddle zero on >= 95% of starts", 10.0):
        base = cl.Rotation()
        rng = np.random.default_rng(1009)
        phi = cl.Observable.from_angle(lambda a: np.cos(2 * np.pi * a), mean=0.0)
        ok = 0
        for p in base.sample(rng, 100):
            sums = birkhoff_partial_sums(base, phi, p, 10**5)
            if sums.min() <= 0.0 <= sums.max():
                ok += 1
        assert ok >= 95


_DETERMINISM_CONFIGS = {
    "spectrum": """
[run]
experiment = spectrum
seed = 41
[base]
kind = rotation
[cocycle]
name = diagonal
entries = 2.0 0.5
[params]
n = 2000
""",
    "splitting": """
[run]
experiment = splitting
seed = 42
[base]
kind = rotation
[cocycle]
name = nonuniform_rotation
[params]
n = 2000
""",
    "dichotomy": """
[run]
experiment = dichotomy
seed = 43
[base]
kind = rotation
[cocycle]
name = nonuniform_rotation
[params]
n = 2000
samples = 4
n_max = 60
envelope_w = 40
horizons = 10 100
""",
    "solve": """
[run]
experiment = solve
seed = 44
[base]
kind = rotation
[cocycle]
name = diagonal
entries = 2.0 0.5
[params]
n = 1000
samples = 4
out_window = 20
""",
    "oracle-compare": """
[run]
experiment = oracle-compare
seed = 45
[params]
instances = 6
""",
    "mane": """
[run]
experiment = mane
seed = 46
[base]
kind = rotation
[cocycle]
name = shear
[params]
spectrum_n = 1500
""",
    "induce": """
[run]
experiment = induce
seed = 47
[base]
kind = rotation
[cocycle]
name = diagonal
entries = 1.3498588075760032 0.7408182206817179
[params]
samples = 200
induced_n = 4000
n = 2000
""",
    "witness": """
[run]
experiment = witness
seed = 48
[base]
kind = bernoulli
probs = 0.5 0.5
[cocycle]
name = shear
[params]
spectrum_n = 1500
induced_spectrum_n = 800
samples = 200
rokhlin_samples = 1500
search_horizon = 1000
candidates = 2
tower_columns = 2
""",
    "robustness": """
[run]
experiment = robustness
seed = 49
[base]
kind = rotation
[cocycle]
name = diagonal
entries = 2.0 0.5
[params]
n = 1000
samples = 3
safety = 0.0
trials = 2
out_window = 40
check_n = 1000
""",
}


def _csv_hashes(d):
    out = {}
    for name in sorted(os.listdir(d)):
        if name.endswith(".csv"):
            with open(os.path.join(d, name), "rb") as fh:
                out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


def test_criterion_10_determinism(tmp_path):
    with _Timer(10, "all experiments rerun byte-identically", 120.0):
        for name, ini in _DETERMINISM_CONFIGS.items():
            cfg = parse_config(ini)
            d1 = tmp_path / f"{name}-1"
            d2 = tmp_path / f"{name}-2"
            run(cfg, outdir=str(d1))
            run(cfg, outdir=str(d2))
            h1, h2 = _csv_hashes(d1), _csv_hashes(d2)
            assert h1, f"{name} produced no CSV artifacts"
            assert h1 == h2, f"{name} rerun differed"
