"""Goodness measures and selector functions for active example selection.

A goodness measure maps codes ``S`` (K x N) and signals ``X`` (P x N) to a
K x N matrix ``G`` scoring each example for each dictionary element. A
selector turns ``G`` into ``n`` distinct example indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import ParameterError

SNR_CAP = 1e12


# -- goodness measures --------------------------------------------------------

def _residual(S, X, A):
    return A @ S - X


def goodness_err(S: np.ndarray, X: np.ndarray, A: np.ndarray) -> np.ndarray:
    """L1 reconstruction error, identical in every row."""
    err = np.abs(_residual(S, X, A)).sum(axis=0)
    return np.broadcast_to(err, S.shape).copy()


def goodness_grad(S: np.ndarray, X: np.ndarray, A: np.ndarray) -> np.ndarray:
    err = np.abs(_residual(S, X, A)).sum(axis=0)
    return err[None, :] * S


def goodness_snr(S: np.ndarray, X: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Estimated SNR ``||x||^2 / ||A s - x||^2`` times the activation.

    The ratio is capped at ``SNR_CAP`` so zero-residual columns stay finite
    while still ranking first.
    """
    res2 = (_residual(S, X, A) ** 2).sum(axis=0)
    sig2 = (X ** 2).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(res2 > 0, sig2 / res2, SNR_CAP)
    ratio = np.minimum(ratio, SNR_CAP)
    return ratio[None, :] * S


def goodness_sun(S: np.ndarray, X: np.ndarray | None = None, A: np.ndarray | None = None) -> np.ndarray:
    # self-information of an Exp activation is linear in the activation
    return np.array(S, dtype=float, copy=True)


# -- saliency map -------------------------------------------------------------

SALIENCY_ANGLES = (0.0, 45.0, 90.0, 135.0)
SALIENCY_KERNEL = 5
SALIENCY_WAVELENGTH = 4.0
SALIENCY_SIGMA = 2.0


def orientation_kernel(theta_deg: float, size: int = SALIENCY_KERNEL,
                       wavelength: float = SALIENCY_WAVELENGTH,
                       sigma: float = SALIENCY_SIGMA) -> np.ndarray:
    """Zero-mean even Gabor kernel; theta = 0 responds to vertical edges."""
    half = size // 2
    y, x = np.mgrid[-half:half + 1, -half:half + 1].astype(float)
    t = np.deg2rad(theta_deg)
    along = x * np.cos(t) + y * np.sin(t)
    g = np.exp(-(x ** 2 + y ** 2) / (2 * sigma ** 2)) * np.cos(2 * np.pi * along / wavelength)
    return g - g.mean()


@lru_cache(maxsize=8)
def _orientation_operators(side: int) -> np.ndarray:
    """Zero-padded convolutions as (4, P, P) matrices acting on flat patches."""
    P = side * side
    ops = np.empty((len(SALIENCY_ANGLES), P, P))
    eye = np.eye(P).reshape(P, side, side)
    for a, theta in enumerate(SALIENCY_ANGLES):
        kern = orientation_kernel(theta)
        resp = ndimage.convolve(eye, kern[None], mode="constant", cval=0.0)
        ops[a] = resp.reshape(P, P).T
    ops.setflags(write=False)
    return ops


def _patch_side(P: int) -> int:
    side = math.isqrt(P)
    if side * side != P:
        raise ParameterError(f"saliency needs square patches, got P={P}")
    return side


def _max_normalize(maps: np.ndarray) -> np.ndarray:
    # maps: (..., P, N); each (map, example) scaled so its max is 1
    peak = maps.max(axis=-2, keepdims=True)
    safe = np.where(peak > 0, peak, 1.0)
    return np.where(peak > 0, maps / safe, 0.0)


def peak_weights(maps: np.ndarray, side: int) -> np.ndarray:
    """Itti-style promotion factor ``(1 - m)^2`` for max-normalized maps.

    ``maps`` has shape (C, P, N) with every nonzero map peaking at exactly 1.
    ``m`` is the mean of the 3x3 local maxima below the global peak, so a map
    with one dominant peak keeps weight 1 while a map with many comparable
    peaks is suppressed. Returns a (C, N) array.
    """
    C, P, N = maps.shape
    grid = maps.reshape(C, side, side, N)
    local = ndimage.maximum_filter(grid, size=(1, 3, 3, 1), mode="constant", cval=0.0)
    peaks = (grid == local) & (grid > 0.0) & (grid < 1.0)
    count = peaks.sum(axis=(1, 2))
    total = np.where(peaks, grid, 0.0).sum(axis=(1, 2))
    mean_peak = np.where(count > 0, total / np.maximum(count, 1), 0.0)
    return (1.0 - mean_peak) ** 2


def saliency_maps(X: np.ndarray) -> np.ndarray:
    """Single-scale saliency maps, P x N, for flattened square patches."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    side = _patch_side(X.shape[0])
    centered = X - X.mean(axis=0, keepdims=True)
    intensity = np.abs(centered)
    orient = np.abs(np.einsum("apq,qn->apn", _orientation_operators(side), centered))
    maps = _max_normalize(np.concatenate([intensity[None], orient], axis=0))
    return (maps * peak_weights(maps, side)[:, None, :]).mean(axis=0)


def saliency_map_score(x: np.ndarray) -> float:
    """Pixel sum of the saliency map of one flattened square patch."""
    return float(saliency_maps(np.asarray(x, dtype=float)[:, None]).sum())


def goodness_salmap(X: np.ndarray, K: int) -> np.ndarray:
    score = saliency_maps(X).sum(axis=0)
    return np.broadcast_to(score, (K, score.shape[0])).copy()


# -- selectors ----------------------------------------------------------------

def _check_n(n: int, N: int) -> int:
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n}")
    return min(n, N)


def select_by_sum(G: np.ndarray, n: int) -> np.ndarray:
    """Indices of the n largest column sums, lower index first on ties."""
    G = np.asarray(G, dtype=float)
    n = _check_n(n, G.shape[1])
    totals = G.sum(axis=0)
    return np.argsort(-totals, kind="stable")[:n]


def select_by_element(G: np.ndarray, n: int) -> np.ndarray:
    """Round-robin over elements, each taking its best unselected example.

    Rows are visited in ascending order within every round. Ties inside a
    row go to the lower example index.
    """
    G = np.asarray(G, dtype=float)
    K, N = G.shape
    n = _check_n(n, N)
    ranked = np.argsort(-G, axis=1, kind="stable")
    cursor = np.zeros(K, dtype=np.intp)
    taken = np.zeros(N, dtype=bool)
    out = np.empty(n, dtype=np.intp)
    count = 0
    while count < n:
        for j in range(K):
            row = ranked[j]
            c = cursor[j]
            while c < N and taken[row[c]]:
                c += 1
            cursor[j] = c
            if c == N:
                continue
            i = row[c]
            taken[i] = True
            cursor[j] = c + 1
            out[count] = i
            count += 1
            if count == n:
                break
    return out


def select_uniform(N: int, n: int, rng: np.random.Generator) -> np.ndarray:
    n = _check_n(n, N)
    return rng.choice(N, size=n, replace=False)


# -- policies -----------------------------------------------------------------

MEASURES: dict[str, Callable] = {
    "err": goodness_err,
    "grad": goodness_grad,
    "snr": goodness_snr,
    "sun": goodness_sun,
}

SELECTORS = {"bysum": select_by_sum, "byelement": select_by_element}


@dataclass(frozen=True)
class SelectionPolicy:
    """A goodness measure paired with a selector, or the uniform control."""

    name: str
    measure: str | None
    selector: str | None

    @property
    def is_uniform(self) -> bool:
        return self.measure is None

    def goodness(self, S: np.ndarray, X: np.ndarray, A: np.ndarray) -> np.ndarray:
        if self.measure == "salmap":
            return goodness_salmap(X, A.shape[1])
        return MEASURES[self.measure](S, X, A)

    def select(self, S: np.ndarray, X: np.ndarray, A: np.ndarray, n: int,
               rng: np.random.Generator | None = None) -> np.ndarray:
        if self.is_uniform:
            if rng is None:
                raise ParameterError("uniform selection needs an rng")
            return select_uniform(X.shape[1], n, rng)
        return SELECTORS[self.selector](self.goodness(S, X, A), n)


POLICIES = {
    "err": SelectionPolicy("err", "err", "bysum"),
    "grad-bysum": SelectionPolicy("grad-bysum", "grad", "bysum"),
    "grad-byelement": SelectionPolicy("grad-byelement", "grad", "byelement"),
    "snr-bysum": SelectionPolicy("snr-bysum", "snr", "bysum"),
    "snr-byelement": SelectionPolicy("snr-byelement", "snr", "byelement"),
    "sun-bysum": SelectionPolicy("sun-bysum", "sun", "bysum"),
    "sun-byelement": SelectionPolicy("sun-byelement", "sun", "byelement"),
    "salmap": SelectionPolicy("salmap", "salmap", "bysum"),
    "uniform": SelectionPolicy("uniform", None, None),
}


def get_policy(name: str) -> SelectionPolicy:
    try:
        return POLICIES[name.strip().lower()]
    except KeyError:
        raise ParameterError(f"unknown selection policy {name!r}; expected one of {sorted(POLICIES)}") from None
