"""Ground-truth dictionaries and synthetic training batches.

Signals follow ``x = A* s + e`` where each code ``s`` has exactly ``k``
positive entries drawn from Exp(lam) on a uniformly random support, and
``e`` is iid Gaussian noise with standard deviation ``sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import ParameterError

NORM_TOL = 1e-9


def as_rng(seed) -> np.random.Generator:
    """Accept an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def normalize_columns(A: np.ndarray, fallback: np.ndarray | None = None,
                      eps: float = 1e-12) -> np.ndarray:
    """Scale every column of ``A`` to unit Euclidean norm.

    Columns whose norm is below ``eps`` are replaced by the matching column
    of ``fallback`` (or left untouched when no fallback is given).
    """
    A = np.array(A, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    dead = norms < eps
    A[:, ~dead] /= norms[~dead]
    if dead.any() and fallback is not None:
        A[:, dead] = fallback[:, dead]
    return A


def check_dictionary(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
        raise ParameterError(f"dictionary must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError("dictionary has non-finite entries")
    norms = np.linalg.norm(A, axis=0)
    if np.max(np.abs(norms - 1.0)) > NORM_TOL:
        raise ParameterError("dictionary columns are not unit norm")
    return A


# -- Gabor dictionary ---------------------------------------------------------

def gabor_patch(side: int, theta: float, phase: float, wavelength: float,
                sigma: float, center: tuple[float, float]) -> np.ndarray:
    """Return an un-normalized ``side x side`` Gabor patch (row = y, col = x)."""
    y, x = np.mgrid[0:side, 0:side].astype(float)
    dx = x - center[0]
    dy = y - center[1]
    along = dx * np.cos(theta) + dy * np.sin(theta)
    envelope = np.exp(-(dx ** 2 + dy ** 2) / (2.0 * sigma ** 2))
    return envelope * np.cos(2.0 * np.pi * along / wavelength + phase)


def make_gabor_dictionary(patch_side: int, K: int, seed=None) -> np.ndarray:
    """Random Gabor atoms, one flattened patch per column.

    Orientation ~ U[0, pi), phase ~ U[0, 2 pi), wavelength ~ U[2, 6] px,
    envelope width ~ U[1, 2.5] px and the center is uniform over the patch.
    """
    if patch_side < 4:
        raise ParameterError(f"patch_side must be >= 4, got {patch_side}")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    rng = as_rng(seed)
    P = patch_side * patch_side
    A = np.empty((P, K))
    j = 0
    while j < K:
        theta = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wavelength = rng.uniform(2.0, 6.0)
        sigma = rng.uniform(1.0, 2.5)
        center = tuple(rng.uniform(0.0, patch_side - 1.0, size=2))
        atom = gabor_patch(patch_side, theta, phase, wavelength, sigma, center).ravel()
        norm = np.linalg.norm(atom)
        if norm < 1e-8:
            continue
        A[:, j] = atom / norm
        j += 1
    return A


# -- glyph dictionary ---------------------------------------------------------

@lru_cache(maxsize=None)
def load_glyphs() -> tuple[str, np.ndarray]:
    """Return (characters, bitmaps) from the bundled 8x8 font asset.

    ``bitmaps`` has shape (n_glyphs, 8, 8) with entries in {0, 1}.
    """
    text = resources.files("activedict").joinpath("data/glyphs8x8.txt").read_text()
    chars, bitmaps = [], []
    rows: list[str] = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        if line.startswith("= "):
            chars.append(line[2:])
            rows = []
            bitmaps.append(rows)
        else:
            rows.append(line)
    arr = np.array([[[c == "#" for c in r] for r in b] for b in bitmaps], dtype=float)
    if arr.shape[1:] != (8, 8):
        raise RuntimeError(f"malformed glyph asset, got bitmaps of shape {arr.shape}")
    arr.setflags(write=False)
    return "".join(chars), arr


def glyph_atom(glyph: int, rotation: int = 0, sign: int = 1) -> np.ndarray:
    """A mean-centered, unit-norm glyph rotated by ``rotation`` quarter turns."""
    _, bitmaps = load_glyphs()
    patch = np.rot90(bitmaps[glyph], k=rotation)
    atom = patch.ravel() - patch.mean()
    return sign * atom / np.linalg.norm(atom)


def glyph_pool_size() -> int:
    return len(load_glyphs()[0]) * 8


def make_glyph_dictionary(K: int, seed=None) -> np.ndarray:
    """Alphanumeric atoms with alternating signs and rotations.

    The seed fixes the glyph order. Element ``i`` draws glyph ``order[i % G]``
    on pass ``c = i // G`` through the pool, rotated by ``(i + c) % 4`` quarter
    turns, with the sign alternating by index and flipping again every four
    passes. Repeats of a glyph therefore differ in rotation while ``K <= 4 G``;
    only past that point do sign-flipped twins appear.
    """
    chars, _ = load_glyphs()
    G = len(chars)
    if K < 1 or K > G * 8:
        raise ParameterError(f"K must be in [1, {G * 8}] for the glyph pool, got {K}")
    order = as_rng(seed).permutation(G)
    A = np.empty((64, K))
    for i in range(K):
        c = i // G
        sign = -1 if (i + c // 4) % 2 else 1
        A[:, i] = glyph_atom(order[i % G], rotation=(i + c) % 4, sign=sign)
    return A


# -- sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class ExampleBatch:
    """Signals plus the ground truth that produced them.

    ``X = A_star @ S_true + E`` holds by construction; ``A_star`` is a
    reference to the generating dictionary, kept for true-SNR evaluation.
    """

    X: np.ndarray
    S_true: np.ndarray
    E: np.ndarray
    A_star: np.ndarray
    lam: float = 1.0
    sigma: float = 0.0
    k: int = 0
    seed: object = None

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def clean(self) -> np.ndarray:
        return self.A_star @ self.S_true


def sample_codes(K: int, k: int, lam: float, N: int, seed=None) -> np.ndarray:
    """K x N nonnegative codes with exactly k Exp(lam) entries per column."""
    if not 1 <= k <= K:
        raise ParameterError(f"need 1 <= k <= K, got k={k}, K={K}")
    if lam <= 0:
        raise ParameterError(f"rate lam must be positive, got {lam}")
    if N < 0:
        raise ParameterError(f"N must be >= 0, got {N}")
    rng = as_rng(seed)
    # first k of a random permutation per column == uniform size-k subset
    support = np.argsort(rng.random((K, N)), axis=0, kind="stable")[:k]
    mags = rng.exponential(1.0 / lam, size=(k, N))
    # Exp draws can be exactly 0 with probability ~2^-53; keep support size exact
    mags = np.where(mags > 0, mags, np.finfo(float).tiny)
    S = np.zeros((K, N))
    np.put_along_axis(S, support, mags, axis=0)
    return S


def synthesize(A_star: np.ndarray, S: np.ndarray, sigma: float, seed=None,
               lam: float = 1.0, k: int | None = None) -> ExampleBatch:
    A_star = np.asarray(A_star, dtype=float)
    S = np.asarray(S, dtype=float)
    if A_star.ndim != 2 or S.ndim != 2 or A_star.shape[1] != S.shape[0]:
        raise ParameterError(f"dimension mismatch: A* {A_star.shape}, S {S.shape}")
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    rng = as_rng(seed)
    E = rng.normal(0.0, 1.0, size=(A_star.shape[0], S.shape[1])) * sigma
    X = A_star @ S + E
    if k is None:
        k = int(np.count_nonzero(S[:, 0])) if S.shape[1] else 0
    return ExampleBatch(X=X, S_true=S, E=E, A_star=A_star, lam=lam, sigma=sigma, k=k, seed=seed)


def sigma_for_snr(lam: float, k: int, P: int, target_db: float) -> float:
    """Noise std giving the requested expected signal-to-noise ratio.

    Expected signal energy of ``A* s`` with unit-norm atoms is about
    ``k * 2 / lam**2`` (second moment of Exp(lam) is ``2 / lam**2``); the
    noise energy is ``P * sigma**2``.
    """
    if lam <= 0 or k <= 0 or P <= 0:
        raise ParameterError("lam, k and P must be positive")
    if np.isnan(target_db) or target_db == -np.inf:
        raise ParameterError(f"target SNR must be finite or +inf, got {target_db}")
    if target_db == np.inf:
        return 0.0
    return float(np.sqrt(2.0 * k / (lam ** 2 * P * 10.0 ** (target_db / 10.0))))
