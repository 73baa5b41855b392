"""Pure-Python kernels for the orbit hot loops.

Same contracts as the compiled extension ``cocyclelab._kernels``; selected
automatically when the extension is unavailable (or forced via the
``COCYCLELAB_KERNELS=python`` environment variable).  All functions mutate
their state arguments in place and are deterministic.
"""

import numpy as np

COMPILED = False


def mgs_qr(Q):
    """Orthonormalize the columns of Q in place by modified Gram-Schmidt.

    Returns the log of the R diagonal (non-negative by construction); a
    zero diagonal entry yields -inf, signalling rank loss to the caller.
    """
    d = Q.shape[1]
    logs = np.empty(d)
    for j in range(d):
        v = Q[:, j]
        for i in range(j):
            v -= np.dot(Q[:, i], v) * Q[:, i]
        r = np.sqrt(np.dot(v, v))
        logs[j] = np.log(r) if r > 0.0 else -np.inf
        if r > 0.0:
            v /= r
    return logs


def qr_chain(mats, Q, reorth, phase):
    """Push the frame Q through the generator chain with periodic MGS QR.

    mats: (m, d, d) chain applied left-to-right (Q <- A @ Q each step).
    Every ``reorth`` accumulated steps the frame is re-orthonormalized and
    the log R diagonal recorded.  Returns (new_phase, events) where events
    is an (n_events, d) array of log-diagonals.
    """
    m, d = mats.shape[0], Q.shape[0]
    events = []
    for s in range(m):
        np.copyto(Q, mats[s] @ Q)
        phase += 1
        if phase == reorth:
            events.append(mgs_qr(Q))
            phase = 0
    out = np.array(events) if events else np.empty((0, d))
    return phase, out


def product_chain(mats, M, threshold=1e120):
    """M <- mats[m-1] @ ... @ mats[0] @ M with scaling control.

    Whenever the largest entry magnitude exceeds ``threshold`` (or drops
    below its reciprocal) M is rescaled; the accumulated log scale is
    returned so the true product is M * exp(logscale).
    """
    logscale = 0.0
    inv = 1.0 / threshold
    for s in range(mats.shape[0]):
        np.copyto(M, mats[s] @ M)
        a = np.max(np.abs(M))
        if a > threshold or (0.0 < a < inv):
            M /= a
            logscale += np.log(a)
    return logscale


def back_solve_chain(mats, M, rcond=1e-12):
    """M <- mats[m-1]^{-1} @ ... @ mats[0]^{-1} @ M, factor by factor.

    Returns the accumulated log scale (as product_chain).  Raises
    ZeroDivisionError on a numerically singular factor; the caller maps
    this to the package error type.
    """
    logscale = 0.0
    for s in range(mats.shape[0]):
        A = mats[s]
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= rcond * max(sv[0], 1.0):
            raise ZeroDivisionError("singular factor in backward chain")
        np.copyto(M, np.linalg.solve(A, M))
        a = np.max(np.abs(M))
        if a > 1e120 or (0.0 < a < 1e-120):
            M /= a
            logscale += np.log(a)
    return logscale


def vector_chain(mats, w):
    """w <- A w along the chain with per-step renormalization.

    Returns the accumulated log norm; -inf if the vector hits exact zero
    (possible for non-invertible generators).
    """
    logsum = 0.0
    for s in range(mats.shape[0]):
        np.copyto(w, mats[s] @ w)
        nrm = np.sqrt(np.dot(w, w))
        if nrm == 0.0:
            return -np.inf
        logsum += np.log(nrm)
        w /= nrm
    return logsum


def frame_minmax_chain(mats, W, logs, minlog, maxlog):
    """Propagate a frame of candidate columns, tracking per-column growth.

    W: (d, G) columns; logs/minlog/maxlog: (G,) running log norms and
    their extrema over steps 1..m (updated in place).  Columns are
    renormalized every step.
    """
    for s in range(mats.shape[0]):
        np.copyto(W, mats[s] @ W)
        nrm = np.sqrt(np.einsum("ij,ij->j", W, W))
        nz = nrm > 0.0
        with np.errstate(divide="ignore"):
            logs += np.where(nz, np.log(nrm, where=nz, out=np.zeros_like(nrm)), -np.inf)
        np.minimum(minlog, logs, out=minlog)
        np.maximum(maxlog, logs, out=maxlog)
        W[:, nz] /= nrm[nz]
