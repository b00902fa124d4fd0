"""Nonnegative sparse encoders for a fixed dictionary estimate.

Three approximations of the L0-constrained encoding problem:

* ``l1``      -- nonnegative L1-regularized least squares (LARS-style homotopy)
* ``l0``      -- greedy nonnegative orthogonal matching pursuit
* ``ksparse`` -- keep the k largest correlations, clamp negatives to zero

The L1 objective is ``1/(2 sigma^2) ||x - A s||^2 + penalty * ||s||_1``, so in
the orthonormal case the effective soft threshold is ``penalty * sigma^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EncoderError, ParameterError

KINDS = ("l1", "l0", "ksparse")
ALIASES = {"lars": "l1", "lasso": "l1", "omp": "l0", "k-sparse": "ksparse", "thresholding": "ksparse"}


def canonical_kind(name: str) -> str:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in KINDS:
        raise ParameterError(f"unknown encoder {name!r}; expected one of {KINDS} or {sorted(ALIASES)}")
    return key


@dataclass(frozen=True)
class EncoderSpec:
    """Encoder choice and its parameters.

    ``penalty`` is the L1 weight (conventionally ``lam * P / k``) and
    ``noise_var`` the sigma^2 that scales the quadratic term; ``k`` is the
    target sparsity for ``l0``/``ksparse``.
    """

    kind: str = "l1"
    penalty: float | None = None
    k: int | None = None
    noise_var: float = 1.0
    tol: float = 1e-6
    max_iter: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        if self.kind == "l1":
            if self.penalty is None or not self.penalty > 0:
                raise ParameterError(f"l1 encoder needs penalty > 0, got {self.penalty}")
            if self.noise_var < 0:
                raise ParameterError("noise_var must be >= 0")
        elif self.k is None or self.k < 1:
            raise ParameterError(f"{self.kind} encoder needs k >= 1, got {self.k}")

    @property
    def threshold(self) -> float:
        """Soft threshold on raw correlations, penalty * sigma^2."""
        return float(self.penalty * self.noise_var)


def default_penalty(lam: float, P: int, k: int) -> float:
    return lam * P / k


def _check_k(k: int, K: int):
    if not 1 <= k <= K:
        raise ParameterError(f"need 1 <= k <= K, got k={k}, K={K}")


# -- L1 -----------------------------------------------------------------------

def kkt_residuals(A: np.ndarray, X: np.ndarray, S: np.ndarray, penalty: float,
                  noise_var: float) -> np.ndarray:
    """Per-column KKT violation of the nonnegative L1 problem.

    With ``g = A.T (x - A s) / sigma^2``: active entries need ``g_j = penalty``
    and inactive ones ``g_j <= penalty``. Returns the max violation per column.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    S = np.atleast_2d(np.asarray(S, dtype=float).T).T
    scale = noise_var if noise_var > 0 else 1.0
    g = A.T @ (X - A @ S) / scale
    on = S > 0
    viol = np.where(on, np.abs(g - penalty), np.maximum(g - penalty, 0.0))
    return viol.max(axis=0) if viol.size else np.zeros(S.shape[1])


def _l1_batch(X, A, penalty, noise_var, tol, max_iter):
    K = A.shape[1]
    if max_iter is None:
        max_iter = 10 * K
    G = A.T @ A
    C = A.T @ X
    S, steps = _kernels.nn_lasso_batch(G, np.ascontiguousarray(C), penalty * noise_var, max_iter)
    S[S < 0] = 0.0
    viol = kkt_residuals(A, X, S, penalty, noise_var)
    bad = np.flatnonzero((steps < 0) | (viol > tol))
    if bad.size:
        i = int(bad[0])
        raise EncoderError(
            f"l1 encoder did not reach KKT tolerance {tol:g} on column {i} "
            f"(violation {viol[i]:.3g})", best=S, column=i)
    return S


def encode_l1(x: np.ndarray, A: np.ndarray, penalty: float, tol: float = 1e-6,
              noise_var: float = 1.0, max_iter: int | None = None) -> np.ndarray:
    """Nonnegative L1-regularized least squares for a single signal."""
    if not penalty > 0:
        raise ParameterError(f"penalty must be > 0, got {penalty}")
    x = np.asarray(x, dtype=float)
    return _l1_batch(x[:, None], np.asarray(A, dtype=float), penalty, noise_var, tol, max_iter)[:, 0]


# -- L0 (OMP) -----------------------------------------------------------------

def _l0_batch(X, A, k):
    _check_k(k, A.shape[1])
    G = A.T @ A
    C = np.ascontiguousarray(A.T @ X)
    eps = 1e-12 * (1.0 + np.abs(C).max(axis=0)) if C.size else np.zeros(C.shape[1])
    S = _kernels.nn_omp_batch(G, C, int(k), eps)
    return S


def encode_l0(x: np.ndarray, A: np.ndarray, k: int) -> np.ndarray:
    """Greedy nonnegative orthogonal matching pursuit for a single signal.

    Each step adds the unused atom with the largest positive correlation
    with the residual and refits all chosen atoms by nonnegative least
    squares. Stops early when no atom correlates positively.
    """
    x = np.asarray(x, dtype=float)
    return _l0_batch(x[:, None], np.asarray(A, dtype=float), k)[:, 0]


# -- k-Sparse -----------------------------------------------------------------

def _ksparse_batch(X, A, k):
    K = A.shape[1]
    _check_k(k, K)
    C = A.T @ X
    S = np.zeros_like(C)
    if C.shape[1] == 0:
        return S
    # stable sort on -C ranks by value with lower index first on ties
    top = np.argsort(-C, axis=0, kind="stable")[:k]
    vals = np.take_along_axis(C, top, axis=0)
    np.put_along_axis(S, top, np.maximum(vals, 0.0), axis=0)
    return S


def encode_ksparse(x: np.ndarray, A: np.ndarray, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return _ksparse_batch(x[:, None], np.asarray(A, dtype=float), k)[:, 0]


# -- batch --------------------------------------------------------------------

def encode_batch(X: np.ndarray, A: np.ndarray, spec: EncoderSpec) -> np.ndarray:
    """Encode every column of ``X``; returns the K x N code matrix."""
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    if X.ndim != 2 or X.shape[0] != A.shape[0]:
        raise ParameterError(f"signal shape {X.shape} does not match dictionary {A.shape}")
    K = A.shape[1]
    if X.shape[1] == 0:
        return np.zeros((K, 0))
    if spec.kind == "l1":
        return _l1_batch(X, A, spec.penalty, spec.noise_var, spec.tol, spec.max_iter)
    if spec.kind == "l0":
        return _l0_batch(X, A, spec.k)
    return _ksparse_batch(X, A, spec.k)
