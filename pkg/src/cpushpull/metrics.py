"""Per-iteration progress measures."""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    loss_gap: float
    consensus_err: float
    tracking_residual: float
    bits: int


def weighted_average(X, r):
    """``(1/n) r^T X`` -- the Perron-weighted network average of the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    r = np.asarray(r, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if r.shape != (X.shape[0],):
        raise ParameterError(f"weights of length {r.shape} for {X.shape[0]} rows")
    return r @ X / X.shape[0]


def consensus_error(X, r):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return float(np.linalg.norm(X - weighted_average(X, r)))


def tracking_residual(Y, grads):
    """``|1^T Y - 1^T grad F(X)|``."""
    return float(np.linalg.norm(Y.sum(axis=0) - grads.sum(axis=0)))


def record(state, obj, ref, m):
    xbar = weighted_average(state.X, m.r)
    return IterationRecord(
        iter=int(state.iter),
        loss_gap=float(obj.value(xbar) - ref.f_star),
        consensus_err=consensus_error(state.X, m.r),
        tracking_residual=tracking_residual(state.Y, state.grads),
        bits=int(state.bits),
    )
