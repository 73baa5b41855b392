"""Backend parity: the compiled kernels must agree with the pure-Python
fallback on identical inputs (the algorithms are the same; only float
summation order may differ, so agreement is to ~1e-12, not bitwise)."""

import numpy as np
import pytest

from cocyclelab import _kernels_py as kpy
from cocyclelab import kernels

try:
    from cocyclelab import _kernels as kc
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")


def _chain(rng, m=500, d=3):
    mats = rng.standard_normal((m, d, d)) * 0.4 + np.eye(d) * 1.1
    return np.ascontiguousarray(mats)


def test_mgs_orthonormalizes():
    rng = np.random.default_rng(0)
    Q = rng.standard_normal((4, 4))
    logs = kernels.mgs_qr(Q)
    assert np.allclose(Q.T @ Q, np.eye(4), atol=1e-12)
    assert np.all(np.isfinite(logs))


@needs_compiled
def test_qr_chain_parity():
    rng = np.random.default_rng(1)
    mats = _chain(rng)
    Q1, Q2 = np.eye(3), np.eye(3)
    p1, ev1 = kc.qr_chain(mats, Q1, 10, 0)
    p2, ev2 = kpy.qr_chain(mats, Q2, 10, 0)
    assert p1 == p2
    assert ev1.shape == ev2.shape
    assert np.allclose(ev1, ev2, atol=1e-10)
    assert np.allclose(Q1, Q2, atol=1e-10)


@needs_compiled
def test_product_chain_parity():
    rng = np.random.default_rng(2)
    mats = _chain(rng, m=200)
    M1, M2 = np.eye(3), np.eye(3)
    s1 = kc.product_chain(mats, M1)
    s2 = kpy.product_chain(mats, M2)
    assert np.isclose(s1, s2, atol=1e-9)
    assert np.allclose(M1, M2, rtol=1e-9)


@needs_compiled
def test_vector_chain_parity():
    rng = np.random.default_rng(3)
    mats = _chain(rng, m=300)
    w1 = np.array([1.0, 0.0, 0.0])
    w2 = w1.copy()
    l1 = kc.vector_chain(mats, w1)
    l2 = kpy.vector_chain(mats, w2)
    assert np.isclose(l1, l2, atol=1e-10)
    assert np.allclose(w1, w2, atol=1e-12)


@needs_compiled
def test_frame_minmax_parity():
    rng = np.random.default_rng(4)
    mats = _chain(rng, m=200, d=2)
    W = rng.standard_normal((2, 16))
    W /= np.linalg.norm(W, axis=0, keepdims=True)
    args1 = (np.ascontiguousarray(W.copy()), np.zeros(16), np.full(16, np.inf),
             np.full(16, -np.inf))
    args2 = tuple(a.copy() for a in args1)
    kc.frame_minmax_chain(mats, *args1)
    kpy.frame_minmax_chain(mats, *args2)
    for a, b in zip(args1, args2):
        assert np.allclose(a, b, atol=1e-9)


@needs_compiled
def test_read_only_chain_accepted():
    # constant plans hand the kernels broadcast (read-only) views for m=1
    mats = np.broadcast_to(np.eye(2), (1, 2, 2))
    M = np.eye(2)
    kc.product_chain(mats, M)
    assert np.allclose(M, np.eye(2))


def test_selected_backend_reports():
    assert kernels.backend_name() in ("compiled", "python")
