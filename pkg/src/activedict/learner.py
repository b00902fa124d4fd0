"""Alternating encode / select / update epochs with an SGD dictionary step."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .encoders import EncoderSpec, encode_batch
from .errors import InitializationError, ParameterError
from .metrics import EpochRecord, dict_distance, hist_intersection_distance, true_snr_of_selection
from .selection import SelectionPolicy
from .synthgen import ExampleBatch, as_rng, normalize_columns


@dataclass(frozen=True)
class Schedule:
    """Learning rate ``eta0 / (1 + decay * (t - 1)) + floor``."""

    eta0: float = 2.0
    decay: float = 0.02
    floor: float = 0.01

    def __call__(self, t: int) -> float:
        return learning_rate(t, self.eta0, self.decay, self.floor)


@dataclass(frozen=True)
class LearnerState:
    A_hat: np.ndarray
    epoch: int = 0
    schedule: Schedule = Schedule()
    gamma: float = 0.2
    inner_iters: int = 10

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ParameterError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.inner_iters < 0:
            raise ParameterError("inner_iters must be >= 0")


def learning_rate(t: int, eta0: float, decay: float, floor: float) -> float:
    if t < 1:
        raise ParameterError(f"epoch index starts at 1, got {t}")
    if eta0 <= 0 or floor <= 0 or decay < 0:
        raise ParameterError("need eta0 > 0, floor > 0 and decay >= 0")
    return eta0 / (1.0 + decay * (t - 1)) + floor


def equalize(S: np.ndarray, gamma: float) -> np.ndarray:
    """Pull each element's total activity toward the across-element mean.

    Row ``j`` is scaled by ``(mean_total / total_j) ** gamma``; rows that
    never fire keep factor 1.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ParameterError(f"gamma must be in [0, 1], got {gamma}")
    S = np.asarray(S, dtype=float)
    if gamma == 0.0 or S.size == 0:
        return S.copy()
    totals = S.sum(axis=1)
    mean_total = totals.mean()
    factors = np.ones_like(totals)
    live = totals > 0
    factors[live] = (mean_total / totals[live]) ** gamma
    return S * factors[:, None]


def reconstruction_gradient(A_hat: np.ndarray, X_n: np.ndarray, S_n: np.ndarray) -> np.ndarray:
    """Gradient of ``1/(2n) ||X_n - A S_n||_F^2`` with respect to ``A``."""
    n = X_n.shape[1]
    if n < 1:
        raise ParameterError("need at least one example")
    if S_n.shape != (A_hat.shape[1], n) or X_n.shape[0] != A_hat.shape[0]:
        raise ParameterError("dimension mismatch between dictionary, signals and codes")
    return ((A_hat @ S_n - X_n) @ S_n.T) / n


def sgd_update(A_hat: np.ndarray, X_n: np.ndarray, S_n: np.ndarray, eta: float) -> np.ndarray:
    """One gradient step on the reconstruction loss, then column renormalization."""
    step = A_hat - eta * reconstruction_gradient(A_hat, X_n, S_n)
    return normalize_columns(step, fallback=A_hat)


def init_dictionary(batch: ExampleBatch | np.ndarray, K: int, seed=None) -> np.ndarray:
    """K distinct, randomly chosen, unit-normalized training examples."""
    X = batch.X if isinstance(batch, ExampleBatch) else np.asarray(batch, dtype=float)
    N = X.shape[1]
    usable = np.flatnonzero(np.linalg.norm(X, axis=0) > 1e-12)
    if usable.size < K:
        raise InitializationError(f"need {K} nonzero examples, batch has {usable.size}")
    rng = as_rng(seed)
    # a random order of the whole pool, skipping zero columns (the re-draw rule)
    order = rng.permutation(N)
    keep = order[np.isin(order, usable)][:K]
    return normalize_columns(X[:, keep])


def run_epoch(state: LearnerState, batch: ExampleBatch, encoder: EncoderSpec,
              policy: SelectionPolicy, n: int, rng: np.random.Generator | None = None,
              A_star: np.ndarray | None = None, hist_bins: int = 32):
    """One outer iteration: encode the pool, select n examples, update ``inner_iters`` times.

    Returns ``(new_state, EpochRecord)``. The input state is never mutated,
    so an exception leaves the caller's state as it was.
    """
    started = time.perf_counter()
    t = state.epoch + 1
    eta = state.schedule(t)
    A = state.A_hat
    X = batch.X

    S_N = encode_batch(X, A, encoder) if not policy.is_uniform else None
    chosen = policy.select(S_N, X, A, n, rng=rng)
    # the selection is a set; a fixed order keeps the update order-independent
    idx = np.sort(chosen)
    X_n = X[:, idx]

    for _ in range(state.inner_iters):
        S_n = encode_batch(X_n, A, encoder)
        S_n = equalize(S_n, state.gamma)
        A = sgd_update(A, X_n, S_n, eta)

    A_ref = batch.A_star if A_star is None else A_star
    record = EpochRecord(
        epoch=t,
        D_star=dict_distance(A, A_ref),
        true_snr_db=true_snr_of_selection(batch, idx),
        hist_dist=hist_intersection_distance(X_n, X, hist_bins),
        eta=eta,
        wall_time_s=time.perf_counter() - started,
    )
    return replace(state, A_hat=A, epoch=t), record
