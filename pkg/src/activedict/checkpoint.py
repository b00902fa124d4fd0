"""Dictionary checkpoints and tiled PGM renderings.

Checkpoint layout: magic ``DSL1``, then P and K as little-endian uint32,
then P*K little-endian float64 values in column-major order.
"""

from __future__ import annotations

import math
import re
import struct
from pathlib import Path

import numpy as np

MAGIC = b"DSL1"
_HEADER = struct.Struct("<4sII")
_PGM_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def dumps_dictionary(A: np.ndarray) -> bytes:
    A = np.asarray(A, dtype="<f8")
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D dictionary, got shape {A.shape}")
    P, K = A.shape
    return _HEADER.pack(MAGIC, P, K) + A.tobytes(order="F")


def loads_dictionary(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise ValueError("checkpoint truncated before header end")
    magic, P, K = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    expected = _HEADER.size + 8 * P * K
    if len(blob) != expected:
        raise ValueError(f"checkpoint size {len(blob)} != expected {expected}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    return data.reshape((P, K), order="F").astype(float)


def save_dictionary(path, A: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(dumps_dictionary(A))
    return path


def load_dictionary(path) -> np.ndarray:
    return loads_dictionary(Path(path).read_bytes())


def tile_dictionary(A: np.ndarray, patch_shape: tuple[int, int] | None = None,
                    gap: int = 1) -> np.ndarray:
    """Arrange columns of ``A`` as patches on a near-square grid.

    Each patch is min-max scaled to [0, 255] on its own; constant patches
    render mid-gray. Gaps between tiles are black.
    """
    A = np.asarray(A, dtype=float)
    P, K = A.shape
    if patch_shape is None:
        side = math.isqrt(P)
        if side * side != P:
            raise ValueError(f"P={P} is not a perfect square; pass patch_shape")
        patch_shape = (side, side)
    h, w = patch_shape
    cols = math.ceil(math.sqrt(K))
    rows = math.ceil(K / cols)
    img = np.zeros((rows * (h + gap) + gap, cols * (w + gap) + gap), dtype=np.uint8)
    for j in range(K):
        a = A[:, j]
        lo, hi = a.min(), a.max()
        if hi > lo:
            tile = (a - lo) / (hi - lo) * 255.0
        else:
            tile = np.full(P, 127.5)
        r, c = divmod(j, cols)
        y0 = gap + r * (h + gap)
        x0 = gap + c * (w + gap)
        img[y0:y0 + h, x0:x0 + w] = np.rint(tile).reshape(h, w).astype(np.uint8)
    return img


def write_pgm(path, image: np.ndarray) -> Path:
    """Write an 8-bit binary (P5) PGM."""
    image = np.asarray(image, dtype=np.uint8)
    height, width = image.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(image.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    m = _PGM_HEADER.match(blob)
    if m is None or int(m.group(3)) != 255:
        raise ValueError("only 8-bit P5 PGM files are supported")
    width, height = int(m.group(1)), int(m.group(2))
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=m.end(), count=width * height)
    return pixels.reshape(height, width)


def render_dictionary(A: np.ndarray, path, patch_shape=None) -> Path:
    return write_pgm(path, tile_dictionary(A, patch_shape))
