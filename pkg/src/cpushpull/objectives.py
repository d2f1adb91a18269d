"""Per-agent local objectives ``f_i`` and a centralised reference solver.

The global objective is ``f(x) = (1/n) sum_i f_i(x)``.  Two families are
provided:

* :class:`QuadraticModel` with ``f_i(x) = 1/2 x^T A_i x - b_i^T x``.
* :class:`LogisticModel`, l2-regularised logistic loss averaged over each
  agent's shard.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import NumericalError, ParameterError

SOLVER_TOL = 1e-13
SOLVER_MAX_ITER = 10**7


@dataclass(frozen=True)
class QuadraticModel:
    A: np.ndarray  # (n, p, p), symmetric positive definite blocks
    b: np.ndarray  # (n, p)
    kind: str = field(default="quadratic", init=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
            raise ParameterError(f"incompatible shapes A{A.shape}, b{b.shape}")
        if not np.allclose(A, np.transpose(A, (0, 2, 1))):
            raise ParameterError("A_i must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.A.shape[1]

    def local_gradient(self, i, x):
        return self.A[i] @ x - self.b[i]

    def gradients(self, X):
        return np.einsum("ijk,ik->ij", self.A, X) - self.b

    def gradients_at(self, agents, Xr):
        return np.einsum("ijk,ik->ij", self.A[agents], Xr) - self.b[agents]

    def local_value(self, i, x):
        return 0.5 * x @ self.A[i] @ x - self.b[i] @ x

    @cached_property
    def _mean_A(self):
        return self.A.mean(axis=0)

    @cached_property
    def _mean_b(self):
        return self.b.mean(axis=0)

    def value(self, x):
        return float(0.5 * x @ self._mean_A @ x - self._mean_b @ x)

    def global_gradient(self, x):
        return self._mean_A @ x - self._mean_b

    def constants(self):
        eig = np.linalg.eigvalsh(self.A)
        return float(eig[:, 0].min()), float(eig[:, -1].max())


@dataclass(frozen=True)
class LogisticModel:
    """Agent ``i`` owns samples ``offsets[i]:offsets[i+1]`` of ``Z`` and ``labels``."""

    Z: np.ndarray
    labels: np.ndarray
    offsets: np.ndarray
    mu: float
    kind: str = field(default="logistic_l2", init=False)

    def __post_init__(self):
        Z = np.ascontiguousarray(self.Z, dtype=float)
        lab = np.ascontiguousarray(self.labels, dtype=float)
        off = np.ascontiguousarray(self.offsets, dtype=np.int64)
        if off[0] != 0 or off[-1] != Z.shape[0] or lab.shape != (Z.shape[0],):
            raise ParameterError("offsets must run from 0 to the sample count")
        if np.any(np.diff(off) < 1):
            raise ParameterError("every agent needs a non-empty shard")
        if not self.mu > 0:
            raise ParameterError(f"regularisation mu must be positive, got {self.mu}")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def from_shards(cls, shards, mu):
        if not shards:
            raise ParameterError("no shards")
        sizes = [s.m for s in shards]
        offsets = np.concatenate(([0], np.cumsum(sizes)))
        Z = np.vstack([s.features for s in shards])
        lab = np.concatenate([s.labels for s in shards])
        return cls(Z, lab, offsets, mu)

    @property
    def n(self):
        return len(self.offsets) - 1

    @property
    def p(self):
        return self.Z.shape[1]

    @cached_property
    def shard_sizes(self):
        return np.diff(self.offsets)

    @cached_property
    def _weights(self):
        # f = (1/n) sum_i (1/|S_i|) sum_{s in S_i} loss_s + mu/2 |x|^2
        return np.repeat(1.0 / (self.n * self.shard_sizes), self.shard_sizes)

    @cached_property
    def _all_agents(self):
        return np.arange(self.n)

    def local_gradient(self, i, x):
        x = np.asarray(x, dtype=float)
        return kernels.logistic_grads(x[None, :], np.array([i]), self.Z, self.labels, self.offsets, self.mu)[0]

    def gradients(self, X):
        return kernels.logistic_grads(
            np.ascontiguousarray(X), self._all_agents, self.Z, self.labels, self.offsets, self.mu
        )

    def gradients_at(self, agents, Xr):
        return kernels.logistic_grads(
            np.ascontiguousarray(Xr), np.asarray(agents, dtype=np.int64), self.Z, self.labels, self.offsets, self.mu
        )

    def local_value(self, i, x):
        lo, hi = self.offsets[i], self.offsets[i + 1]
        t = self.labels[lo:hi] * (self.Z[lo:hi] @ x)
        return float(np.mean(np.logaddexp(0.0, -t)) + 0.5 * self.mu * x @ x)

    def value(self, x):
        return kernels.logistic_value(np.ascontiguousarray(x, dtype=float), self.Z, self.labels, self._weights, self.mu)

    def global_gradient(self, x):
        return kernels.logistic_full_grad(
            np.ascontiguousarray(x, dtype=float), self.Z, self.labels, self._weights, self.mu
        )

    def constants(self):
        sq = np.einsum("ij,ij->i", self.Z, self.Z)
        per_agent = np.add.reduceat(sq, self.offsets[:-1]) / self.shard_sizes
        return self.mu, float(per_agent.max() / 4.0 + self.mu)


def random_quadratic(n, p, seed, mu=1.0, L=10.0):
    """Random SPD quadratics with every eigenvalue in ``[mu, L]`` and both ends attained."""
    if not 0 < mu <= L:
        raise ParameterError("need 0 < mu <= L")
    rng = np.random.default_rng(seed)
    A = np.empty((n, p, p))
    for i in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        eig = rng.uniform(mu, L, size=p)
        eig[0], eig[-1] = mu, L
        A[i] = (Q * eig) @ Q.T
        A[i] = 0.5 * (A[i] + A[i].T)
    b = rng.standard_normal((n, p))
    return QuadraticModel(A, b)


def local_gradient(m, i, x):
    if not 0 <= i < m.n:
        raise ParameterError(f"agent {i} out of range")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ParameterError("non-finite query point")
    return m.local_gradient(i, x)


def constants_mu_L(m):
    """Strong-convexity and smoothness constants shared by all ``f_i``."""
    return m.constants()


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    grad_norm: float
    f_star: float


def solve_centralized(m):
    """Minimise the global objective.

    Quadratics are solved directly.  Otherwise gradient descent with step
    ``2/(mu+L)`` runs from the origin until ``|grad f| <= 1e-13 max(1, L|x|)``.
    """
    mu, L = m.constants()
    if m.kind == "quadratic":
        x = np.linalg.solve(m._mean_A, m._mean_b)
        g = m.global_gradient(x)
        return ReferenceSolution(x, float(np.linalg.norm(g)), m.value(x))

    step = 2.0 / (mu + L)
    x = np.zeros(m.p)
    for _ in range(SOLVER_MAX_ITER):
        g = m.global_gradient(x)
        gn = float(np.linalg.norm(g))
        if gn <= SOLVER_TOL * max(1.0, L * float(np.linalg.norm(x))):
            return ReferenceSolution(x, gn, m.value(x))
        x = x - step * g
    raise NumericalError(f"reference solver stalled at |grad| = {gn:.3e}", iteration=SOLVER_MAX_ITER)
