"""Push-Pull, Compressed Push-Pull (CPP) and broadcast CPP (B-CPP) iterations.

All step functions are pure: they take a state and return a new one.  Random
draws come from the generators passed in (compression) or stored on the
B-CPP state (activation), so a run is replayed exactly from its seeds.

Row ``i`` of every ``(n, p)`` array belongs to agent ``i``.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .compression import FLOAT_BITS, CompressorSpec, bit_cost, c2_of, compress_rows
from .errors import NumericalError, ParameterError
from .metrics import record

ALGORITHMS = ("pushpull", "cpp", "bcpp")


@dataclass(frozen=True)
class AlgoParams:
    alpha: np.ndarray
    beta: float = 1.0
    gamma: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if alpha.ndim != 1 or np.any(alpha < 0) or not np.any(alpha > 0):
            raise ParameterError("step sizes must be non-negative with at least one positive")
        for name in ("beta", "gamma", "eta"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def defaults(cls, n, L, c2, gamma=1.0, alpha_prime=None, beta_prime=1.0, eta=None):
        """Practical parameter rule: ``alpha = alpha' gamma^3`` (``alpha' = 1/L``
        unless given), ``beta = beta' gamma^2`` and ``eta = min(1/(2 C2), 1)``."""
        if alpha_prime is None:
            alpha_prime = 1.0 / L
        if eta is None:
            eta = 1.0 if c2 == 0 else min(1.0 / (2.0 * c2), 1.0)
        return cls(
            alpha=np.full(n, alpha_prime * gamma**3),
            beta=beta_prime * gamma**2,
            gamma=gamma,
            eta=eta,
        )


@dataclass(frozen=True)
class AlgoState:
    X: np.ndarray
    Y: np.ndarray
    U: np.ndarray
    UR: np.ndarray
    grads: np.ndarray
    iter: int = 0
    bits: int = 0


CppState = AlgoState


@dataclass(frozen=True)
class BcppState(AlgoState):
    activation_rng: np.random.Generator = None


def init_state(obj, X0, activation_rng=None):
    """Initial iterate bundle: ``Y = grad F(X0)``, zero momenta.

    Passing ``activation_rng`` yields a :class:`BcppState`.
    """
    X0 = np.array(X0, dtype=float)
    if X0.shape != (obj.n, obj.p):
        raise ParameterError(f"X0 has shape {X0.shape}, model needs {(obj.n, obj.p)}")
    if not np.all(np.isfinite(X0)):
        raise ParameterError("X0 must be finite")
    grads = obj.gradients(X0)
    zeros = np.zeros_like(X0)
    fields = dict(X=X0, Y=grads.copy(), U=zeros, UR=zeros.copy(), grads=grads)
    if activation_rng is not None:
        return BcppState(**fields, activation_rng=activation_rng)
    return AlgoState(**fields)


def pushpull_step(s, m, obj, params):
    X = m.R @ s.X - params.alpha[:, None] * s.Y
    grads = obj.gradients(X)
    Y = m.C @ s.Y + grads - s.grads
    bits = s.bits + m.messages_per_round * FLOAT_BITS * s.X.shape[1]
    return dataclasses.replace(s, X=X, Y=Y, grads=grads, iter=s.iter + 1, bits=bits)


def cpp_step(s, m, obj, params, spec, rng):
    """One synchronous CPP round.

    Every agent compresses ``x_i - u_i`` (pull side) and ``y_i`` (push side);
    ``U_R`` follows ``R U`` through the compressed differences alone.
    """
    beta, gamma, eta = params.beta, params.gamma, params.eta
    P = compress_rows(spec, s.X - s.U, rng)
    Q = compress_rows(spec, s.Y, rng)
    Xhat = s.U + P
    XhatR = s.UR + m.R @ P

    X = (1.0 - beta) * s.X + beta * XhatR - params.alpha[:, None] * s.Y
    grads = obj.gradients(X)
    Y = s.Y + gamma * (m.C @ Q - Q) + grads - s.grads
    U = (1.0 - eta) * s.U + eta * Xhat
    UR = (1.0 - eta) * s.UR + eta * XhatR

    bits = s.bits + m.messages_per_round * bit_cost(spec, s.X.shape[1])
    return dataclasses.replace(s, X=X, Y=Y, U=U, UR=UR, grads=grads, iter=s.iter + 1, bits=bits)


def bcpp_step(s, m, obj, params, spec, rng):
    """One B-CPP activation.

    A uniformly drawn agent ``i`` broadcasts ``C(x_i - u_i)`` to its pull
    out-neighbours and ``C(y_i)`` to its push out-neighbours.  The averaging
    uses ``u_R`` from before this activation, so averaged over ``i`` the
    update reduces to ``((1-beta) I + beta R) X``.
    """
    n = m.n
    beta, gamma, eta = params.beta, params.gamma, params.eta
    i = int(s.activation_rng.integers(n))
    pk = compress_rows(spec, (s.X[i] - s.U[i])[None, :], rng)[0]
    qk = compress_rows(spec, s.Y[i][None, :], rng)[0]

    X, Y, U, UR = s.X.copy(), s.Y.copy(), s.U.copy(), s.UR.copy()

    out_r = m.out_R[i]
    r_col = m.R[out_r, i]
    w = beta * n / m.in_degree_R[out_r]
    X[out_r] = (1.0 - w)[:, None] * X[out_r] + w[:, None] * s.UR[out_r] + (beta * n * r_col)[:, None] * pk
    UR[out_r] += (eta * n * r_col)[:, None] * pk
    U[i] += eta * n * pk

    awake = m.awake_sets[i]
    X[awake] -= params.alpha[awake, None] * s.Y[awake]
    g_new = obj.gradients_at(awake, X[awake])
    Y[awake] += g_new - s.grads[awake]
    grads = s.grads.copy()
    grads[awake] = g_new

    out_c = m.out_C[i]
    Y[i] -= gamma * n * qk
    Y[out_c] += (gamma * n * m.C[out_c, i])[:, None] * qk

    sent = (len(out_r) - 1) + (len(out_c) - 1)  # self-delivery is free
    bits = s.bits + sent * bit_cost(spec, s.X.shape[1])
    return dataclasses.replace(s, X=X, Y=Y, U=U, UR=UR, grads=grads, iter=s.iter + 1, bits=bits)


def make_stepper(algo, m, obj, params, spec=None, rng=None):
    """Bind a step function to its problem data; returns ``state -> state``."""
    if algo == "pushpull":
        return lambda s: pushpull_step(s, m, obj, params)
    if spec is None:
        spec = CompressorSpec("identity")
    spec.check_dim(obj.p)
    if rng is None and spec.kind != "identity":
        raise ParameterError(f"{algo} with {spec} needs a compression rng")
    if algo == "cpp":
        return lambda s: cpp_step(s, m, obj, params, spec, rng)
    if algo == "bcpp":
        return lambda s: bcpp_step(s, m, obj, params, spec, rng)
    raise ParameterError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


def iterate(algo, iters, state, m, obj, params, spec=None, rng=None):
    """Yield the initial state and then each of ``iters`` successors."""
    if algo == "bcpp" and getattr(state, "activation_rng", None) is None:
        raise ParameterError("bcpp needs a state built with an activation rng")
    step = make_stepper(algo, m, obj, params, spec, rng)
    yield state
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(iters):
            if not (np.all(np.isfinite(state.X)) and np.all(np.isfinite(state.Y))):
                raise NumericalError(f"{algo} diverged at iteration {state.iter}", iteration=state.iter)
            state = step(state)
            yield state


def run(algo, iters, state, m, obj, params, ref, spec=None, rng=None, stop_at=None):
    """Run ``iters`` steps and return one :class:`IterationRecord` per state.

    With ``stop_at`` set the run ends early once the loss gap reaches it.
    Raises :class:`NumericalError` carrying the iteration index as soon as the
    loss stops being finite.
    """
    records = []
    for s in iterate(algo, iters, state, m, obj, params, spec, rng):
        with np.errstate(over="ignore", invalid="ignore"):
            rec = record(s, obj, ref, m)
        if not np.isfinite(rec.loss_gap):
            raise NumericalError(f"{algo} diverged at iteration {rec.iter}", iteration=rec.iter)
        records.append(rec)
        if stop_at is not None and rec.loss_gap <= stop_at:
            break
    return records


def default_params(n, obj, spec, **overrides):
    """Default parameters for ``obj`` under ``spec`` (see :meth:`AlgoParams.defaults`)."""
    _, L = obj.constants()
    return AlgoParams.defaults(n, L, c2_of(spec, obj.p), **overrides)
