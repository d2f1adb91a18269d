"""Hot numeric kernels.

Every kernel exists twice: a vectorised numpy version (``*_np``) and a
``numba.njit`` loop version (``*_nb``).  The public name points at the numba
variant unless ``CPUSHPULL_NUMBA=0`` is set in the environment or numba cannot
be imported.  Both variants take their random draws as explicit arrays, so the
choice of backend never changes which random numbers are consumed.
"""

import os

import numpy as np
from scipy.special import expit

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("CPUSHPULL_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

if HAVE_NUMBA:
    njit = numba.njit(cache=True, nogil=True)
else:  # pragma: no cover

    def njit(fn):
        return fn


BACKEND = "numba" if USE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# compression
# --------------------------------------------------------------------------


def quantize_rows_np(X, V, b):
    """Dithered b-bit 2-quantization of every row of ``X``.

    ``V`` holds one uniform(0,1) draw per entry.  Rows with zero norm map to
    zero.
    """
    nrm = np.sqrt(np.einsum("ij,ij->i", X, X))
    safe = np.where(nrm > 0.0, nrm, 1.0)[:, None]
    levels = np.floor(np.abs(X) * float(2 ** (b - 1)) / safe + V)
    out = (nrm[:, None] * np.sign(X) * 2.0 ** (1 - b)) * levels
    out[nrm == 0.0] = 0.0
    return out


@njit
def quantize_rows_nb(X, V, b):
    n, p = X.shape
    out = np.zeros((n, p))
    up = float(2 ** (b - 1))
    down = 2.0 ** (1 - b)
    for i in range(n):
        s = 0.0
        for j in range(p):
            s += X[i, j] * X[i, j]
        nrm = np.sqrt(s)
        if nrm == 0.0:
            continue
        for j in range(p):
            x = X[i, j]
            lev = np.floor(abs(x) * up / nrm + V[i, j])
            if x > 0.0:
                out[i, j] = (nrm * down) * lev
            elif x < 0.0:
                out[i, j] = (-nrm * down) * lev
    return out


def randk_rows_np(X, V, k):
    """Keep the ``k`` entries of each row with the smallest draw in ``V``, scaled by p/k."""
    n, p = X.shape
    idx = np.argpartition(V, k - 1, axis=1)[:, :k]
    rows = np.arange(n)[:, None]
    out = np.zeros_like(X)
    out[rows, idx] = X[rows, idx] * (p / k)
    return out


@njit
def randk_rows_nb(X, V, k):
    n, p = X.shape
    out = np.zeros((n, p))
    scale = p / k
    for i in range(n):
        order = np.argsort(V[i])
        for t in range(k):
            j = order[t]
            out[i, j] = X[i, j] * scale
    return out


# --------------------------------------------------------------------------
# logistic regression with l2 regularisation
# --------------------------------------------------------------------------


def logistic_grads_np(Xr, agents, Z, lam, offsets, mu):
    """Local gradients for the listed agents.

    ``Xr[a]`` is the query point of agent ``agents[a]``; agent ``i`` owns the
    samples ``offsets[i]:offsets[i+1]`` of ``Z``/``lam``.
    """
    starts = offsets[agents]
    counts = offsets[agents + 1] - starts
    if len(agents) == len(offsets) - 1 and np.array_equal(agents, np.arange(len(agents))):
        idx = np.arange(offsets[-1])
    else:
        idx = np.concatenate([np.arange(s, s + c) for s, c in zip(starts, counts)])
    rows = np.repeat(np.arange(len(agents)), counts)
    Zs = Z[idx]
    ls = lam[idx]
    t = ls * np.einsum("ij,ij->i", Zs, Xr[rows])
    w = -ls * expit(-t)
    seg = np.concatenate(([0], np.cumsum(counts)[:-1]))
    G = np.add.reduceat(w[:, None] * Zs, seg, axis=0)
    return G / counts[:, None] + mu * Xr


@njit
def _sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + np.exp(-t))
    e = np.exp(t)
    return e / (1.0 + e)


@njit
def logistic_grads_nb(Xr, agents, Z, lam, offsets, mu):
    na = agents.shape[0]
    p = Z.shape[1]
    G = np.zeros((na, p))
    for a in range(na):
        i = agents[a]
        lo = offsets[i]
        hi = offsets[i + 1]
        for s in range(lo, hi):
            t = 0.0
            for j in range(p):
                t += Z[s, j] * Xr[a, j]
            w = -lam[s] * _sigmoid(-lam[s] * t)
            for j in range(p):
                G[a, j] += w * Z[s, j]
        inv = 1.0 / (hi - lo)
        for j in range(p):
            G[a, j] = G[a, j] * inv + mu * Xr[a, j]
    return G


def logistic_value_np(x, Z, lam, weights, mu):
    """Weighted sum of log(1 + exp(-lam z.x)) plus mu/2 |x|^2."""
    t = lam * (Z @ x)
    return float(weights @ np.logaddexp(0.0, -t) + 0.5 * mu * (x @ x))


@njit
def logistic_value_nb(x, Z, lam, weights, mu):
    m, p = Z.shape
    acc = 0.0
    for s in range(m):
        t = 0.0
        for j in range(p):
            t += Z[s, j] * x[j]
        u = -lam[s] * t
        if u > 0.0:
            acc += weights[s] * (u + np.log1p(np.exp(-u)))
        else:
            acc += weights[s] * np.log1p(np.exp(u))
    return acc + 0.5 * mu * np.dot(x, x)


def logistic_full_grad_np(x, Z, lam, weights, mu):
    t = lam * (Z @ x)
    return (weights * -lam * expit(-t)) @ Z + mu * x


@njit
def logistic_full_grad_nb(x, Z, lam, weights, mu):
    m, p = Z.shape
    g = mu * x
    for s in range(m):
        t = 0.0
        for j in range(p):
            t += Z[s, j] * x[j]
        w = -weights[s] * lam[s] * _sigmoid(-lam[s] * t)
        for j in range(p):
            g[j] += w * Z[s, j]
    return g


# --------------------------------------------------------------------------
# power iteration
# --------------------------------------------------------------------------


def power_iterate_np(M, v0, tol, max_iter):
    """Iterate ``v <- M v`` renormalised to sum ``len(v)``.

    Returns ``(v, iterations, converged)``; convergence means the max-norm
    change between successive iterates fell to ``tol``.
    """
    n = v0.shape[0]
    v = v0.copy()
    for it in range(1, max_iter + 1):
        w = M @ v
        w *= n / w.sum()
        if np.max(np.abs(w - v)) <= tol:
            return w, it, True
        v = w
    return v, max_iter, False


@njit
def power_iterate_nb(M, v0, tol, max_iter):
    n = v0.shape[0]
    v = v0.copy()
    w = np.empty(n)
    for it in range(1, max_iter + 1):
        s = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * v[j]
            w[i] = acc
            s += acc
        diff = 0.0
        for i in range(n):
            w[i] *= n / s
            d = abs(w[i] - v[i])
            if d > diff:
                diff = d
        if diff <= tol:
            return w.copy(), it, True
        v[:] = w
    return v, max_iter, False


# --------------------------------------------------------------------------
# backend selection
# --------------------------------------------------------------------------

_PAIRS = {
    "quantize_rows": (quantize_rows_np, quantize_rows_nb),
    "randk_rows": (randk_rows_np, randk_rows_nb),
    "logistic_grads": (logistic_grads_np, logistic_grads_nb),
    "logistic_value": (logistic_value_np, logistic_value_nb),
    "logistic_full_grad": (logistic_full_grad_np, logistic_full_grad_nb),
    "power_iterate": (power_iterate_np, power_iterate_nb),
}


def variants(name):
    """Return ``(numpy_fn, numba_fn)`` for a kernel name."""
    return _PAIRS[name]


quantize_rows = quantize_rows_nb if USE_NUMBA else quantize_rows_np
randk_rows = randk_rows_nb if USE_NUMBA else randk_rows_np
logistic_grads = logistic_grads_nb if USE_NUMBA else logistic_grads_np
logistic_value = logistic_value_nb if USE_NUMBA else logistic_value_np
logistic_full_grad = logistic_full_grad_nb if USE_NUMBA else logistic_full_grad_np
power_iterate = power_iterate_nb if USE_NUMBA else power_iterate_np


def warmup():
    """Trigger JIT compilation of every numba kernel on tiny inputs."""
    if not USE_NUMBA:
        return
    X = np.ones((2, 3))
    V = np.full((2, 3), 0.5)
    quantize_rows_nb(X, V, 2)
    randk_rows_nb(X, V, 1)
    agents = np.arange(2)
    offs = np.array([0, 1, 2])
    lam = np.ones(2)
    logistic_grads_nb(X, agents, X, lam, offs, 0.1)
    logistic_value_nb(X[0], X, lam, lam, 0.1)
    logistic_full_grad_nb(X[0], X, lam, lam, 0.1)
    power_iterate_nb(np.eye(2), np.ones(2), 1e-13, 10)
