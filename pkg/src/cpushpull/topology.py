"""Directed communication graphs and their push/pull mixing matrices.

Edge ``(i, j)`` means agent ``i`` receives from agent ``j``.  Every graph built
here carries a self-loop on every node.
"""

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import AssumptionError, NumericalError, ParameterError

STOCH_TOL = 1e-12
PERRON_TOL = 1e-13
PERRON_MAX_ITER = 10**6

_TOPOLOGY_STREAM = 0x70B0


@dataclass(frozen=True)
class DirectedGraph:
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"need at least one node, got n={self.n}")
        edges = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ParameterError(f"edge ({i}, {j}) outside [0, {self.n})")
            edges.add((i, j))
        edges.update((i, i) for i in range(self.n))
        object.__setattr__(self, "edges", frozenset(edges))

    def in_neighbors(self, i):
        return sorted(j for (a, j) in self.edges if a == i)

    def out_neighbors(self, j):
        return sorted(i for (i, b) in self.edges if b == j)

    def adjacency(self):
        """Boolean matrix ``A[i, j]`` true iff ``i`` receives from ``j``."""
        A = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            A[i, j] = True
        return A

    def to_edgelist(self):
        return "".join(f"{i} {j}\n" for i, j in sorted(self.edges))

    @classmethod
    def from_edgelist(cls, text):
        pairs = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParameterError(f"line {lineno}: expected 'i j', got {line!r}")
            pairs.append((int(parts[0]), int(parts[1])))
        if not pairs:
            raise ParameterError("empty edge list")
        n = 1 + max(max(p) for p in pairs)
        return cls(n, frozenset(pairs))


def _topology_rng(seed):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_TOPOLOGY_STREAM,)))


def build_ring_plus_random(n, d, seed):
    """Bidirectional cycle with self-loops plus ``d`` random extra directed links.

    The extra links are drawn uniformly without replacement from the ordered
    pairs not already present.
    """
    if n < 3:
        raise ParameterError(f"ring construction needs n >= 3, got {n}")
    cycle = set()
    for i in range(n):
        cycle.add((i, (i + 1) % n))
        cycle.add(((i + 1) % n, i))
    free = [(i, j) for i in range(n) for j in range(n) if i != j and (i, j) not in cycle]
    if not 0 <= d <= len(free):
        raise ParameterError(f"d={d} out of range [0, {len(free)}] for n={n}")
    picks = _topology_rng(seed).choice(len(free), size=d, replace=False)
    extra = {free[t] for t in picks}
    return DirectedGraph(n, frozenset(cycle | extra))


def _reach_all(adj_lists, n):
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj_lists[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return all(seen)


def is_strongly_connected(g):
    """True iff information can flow from every node to every other node."""
    fwd = [[] for _ in range(g.n)]
    bwd = [[] for _ in range(g.n)]
    for i, j in g.edges:
        fwd[j].append(i)  # j -> i
        bwd[i].append(j)
    return _reach_all(fwd, g.n) and _reach_all(bwd, g.n)


def row_stochastic(g):
    """Uniform pull weights: ``R[i, j] = 1/|in-neighbours of i|``."""
    A = g.adjacency().astype(float)
    return A / A.sum(axis=1, keepdims=True)


def column_stochastic(g):
    """Uniform push weights: ``C[i, j] = 1/|out-neighbours of j|``."""
    A = g.adjacency().astype(float)
    return A / A.sum(axis=0, keepdims=True)


def perron_vectors(R, C):
    """Left Perron vector of row-stochastic ``R`` and right Perron vector of
    column-stochastic ``C``, each normalised to sum ``n``.

    Uses power iteration, which converges for primitive matrices (strongly
    connected support with self-loops).

    Raises
    ------
    NumericalError
        If either iteration does not settle within ``PERRON_MAX_ITER`` steps.
    """
    R = np.asarray(R, dtype=float)
    C = np.asarray(C, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n) or C.shape != (n, n):
        raise ParameterError("R and C must be square and of equal size")
    start = np.ones(n)
    r, it_r, ok_r = kernels.power_iterate(np.ascontiguousarray(R.T), start, PERRON_TOL, PERRON_MAX_ITER)
    c, it_c, ok_c = kernels.power_iterate(np.ascontiguousarray(C), start, PERRON_TOL, PERRON_MAX_ITER)
    if not (ok_r and ok_c):
        raise NumericalError(
            f"power iteration did not converge (R: {it_r} its, C: {it_c} its); matrix not primitive?"
        )
    # clean up signed zeros / tiny negatives from roundoff
    r = np.maximum(r, 0.0)
    c = np.maximum(c, 0.0)
    return r * (n / r.sum()), c * (n / c.sum())


@dataclass(frozen=True)
class MixingMatrices:
    R: np.ndarray
    C: np.ndarray
    r: np.ndarray
    c: np.ndarray
    gR: DirectedGraph = None
    gC: DirectedGraph = None

    @property
    def n(self):
        return self.R.shape[0]

    @cached_property
    def out_R(self):
        """``out_R[i]``: agents ``j`` with ``R[j, i] > 0`` (self included)."""
        return [np.flatnonzero(self.R[:, i] > 0) for i in range(self.n)]

    @cached_property
    def out_C(self):
        return [np.flatnonzero(self.C[:, i] > 0) for i in range(self.n)]

    @cached_property
    def in_degree_R(self):
        return np.count_nonzero(self.R > 0, axis=1)

    @cached_property
    def awake_sets(self):
        """Agents woken when ``i`` broadcasts: ``{i} | out_R[i] | out_C[i]``."""
        return [np.union1d(np.union1d([i], self.out_R[i]), self.out_C[i]) for i in range(self.n)]

    @cached_property
    def messages_per_round(self):
        """Transmitted messages in one synchronous round (self-loops are free)."""
        off = ~np.eye(self.n, dtype=bool)
        return int(np.count_nonzero((self.R > 0) & off) + np.count_nonzero((self.C > 0) & off))


def build_mixing_matrices(gR, gC):
    if gR.n != gC.n:
        raise ParameterError(f"graph sizes differ: {gR.n} vs {gC.n}")
    for name, g in (("G_R", gR), ("G_C", gC)):
        if not is_strongly_connected(g):
            raise AssumptionError(f"{name} is not strongly connected")
    R = row_stochastic(gR)
    C = column_stochastic(gC)
    r, c = perron_vectors(R, C)
    return MixingMatrices(R, C, r, c, gR, gC)


def assumption2_violations(m):
    """List the violated mixing-matrix conditions (empty when all hold)."""
    problems = []
    n = m.n
    if np.any(m.R < 0) or np.any(m.C < 0):
        problems.append("negative weight")
    if np.max(np.abs(m.R.sum(axis=1) - 1.0)) > STOCH_TOL:
        problems.append("R is not row stochastic")
    if np.max(np.abs(m.C.sum(axis=0) - 1.0)) > STOCH_TOL:
        problems.append("C is not column stochastic")
    for name, M, g in (("R", m.R, m.gR), ("C", m.C, m.gC)):
        if g is not None:
            A = g.adjacency()
            if np.any((M > 0) & ~A):
                problems.append(f"support of {name} leaves its edge set")
    if abs(m.r.sum() - n) > 1e-9 * n or abs(m.c.sum() - n) > 1e-9 * n:
        problems.append("Perron vectors not normalised to n")
    if not m.r @ m.c > 0:
        problems.append("r^T c = 0: no common root")
    return problems


def check_assumption2(m):
    return not assumption2_violations(m)
