"""Dictionary recovery, coherence and selected-set diagnostics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ParameterError
from .synthgen import ExampleBatch

SNR_CAP_DB = 300.0


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    D_star: float
    true_snr_db: float
    hist_dist: float
    eta: float
    wall_time_s: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def matching_costs(A_hat: np.ndarray, A_star: np.ndarray) -> np.ndarray:
    """C[j, l] = ||a_hat_j - a*_l||^2 for every pair of columns."""
    sq_hat = (A_hat ** 2).sum(axis=0)
    sq_star = (A_star ** 2).sum(axis=0)
    C = sq_hat[:, None] + sq_star[None, :] - 2.0 * (A_hat.T @ A_star)
    return np.maximum(C, 0.0)


def dict_distance(A_hat: np.ndarray, A_star: np.ndarray, return_perm: bool = False):
    """Mean square distance after the best column permutation.

    Only permutations are searched, no sign flips. The assignment is exact
    (Jonker-Volgenant via scipy).
    """
    A_hat = np.asarray(A_hat, dtype=float)
    A_star = np.asarray(A_star, dtype=float)
    if A_hat.shape != A_star.shape or A_hat.ndim != 2:
        raise ParameterError(f"shape mismatch: {A_hat.shape} vs {A_star.shape}")
    P, K = A_star.shape
    C = matching_costs(A_hat, A_star)
    rows, cols = linear_sum_assignment(C)
    # recompute matched cost directly; the expanded form loses precision near 0
    perm = np.empty(K, dtype=np.intp)
    perm[cols] = rows
    d = float(((A_hat[:, perm] - A_star) ** 2).sum() / (K * P))
    return (d, perm) if return_perm else d


def _offdiag_abs(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    K = A.shape[1]
    if K < 2:
        raise ParameterError("coherence needs at least two columns")
    G = np.abs(A.T @ A)
    iu = np.triu_indices(K, k=1)
    return G[iu]


def mutual_coherence(A: np.ndarray) -> float:
    return float(_offdiag_abs(A).max())


def average_coherence(A: np.ndarray) -> float:
    return float(_offdiag_abs(A).mean())


def true_snr_of_selection(batch: ExampleBatch, indices) -> float:
    """SNR in dB of the chosen examples, from the retained clean signal and noise."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size == 0:
        raise ParameterError("selection is empty")
    if idx.min() < 0 or idx.max() >= batch.N:
        raise ParameterError("selection index out of range")
    signal = float(((batch.A_star @ batch.S_true[:, idx]) ** 2).sum())
    noise = float((batch.E[:, idx] ** 2).sum())
    if noise <= 0.0:
        return SNR_CAP_DB
    if signal <= 0.0:
        return -SNR_CAP_DB
    return float(np.clip(10.0 * np.log10(signal / noise), -SNR_CAP_DB, SNR_CAP_DB))


def _bin_counts(V: np.ndarray, lo: np.ndarray, hi: np.ndarray, bins: int) -> np.ndarray:
    P = V.shape[0]
    width = hi - lo
    safe = np.where(width > 0, width, 1.0)
    b = np.floor((V - lo[:, None]) / safe[:, None] * bins).astype(np.int64)
    np.clip(b, 0, bins - 1, out=b)
    flat = b + (np.arange(P) * bins)[:, None]
    return np.bincount(flat.ravel(), minlength=P * bins).reshape(P, bins).astype(float)


def hist_intersection_distance(X_n: np.ndarray, X_N: np.ndarray, bins: int = 32) -> float:
    """One minus the mean per-dimension histogram intersection.

    Bin ranges come from the pool ``X_N``; values of ``X_n`` outside that
    range land in the edge bins.
    """
    X_n = np.asarray(X_n, dtype=float)
    X_N = np.asarray(X_N, dtype=float)
    if X_n.size == 0 or X_N.size == 0:
        raise ParameterError("histogram distance needs non-empty inputs")
    if bins < 2:
        raise ParameterError(f"bins must be >= 2, got {bins}")
    if X_n.shape[0] != X_N.shape[0]:
        raise ParameterError("signal dimensions differ")
    lo = X_N.min(axis=1)
    hi = X_N.max(axis=1)
    h_n = _bin_counts(X_n, lo, hi, bins)
    h_N = _bin_counts(X_N, lo, hi, bins)
    h_n /= X_n.shape[1]
    h_N /= X_N.shape[1]
    inter = np.minimum(h_n, h_N).sum(axis=1)
    return float(np.clip(1.0 - inter.mean(), 0.0, 1.0))
