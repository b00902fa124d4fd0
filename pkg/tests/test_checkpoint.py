import struct

import numpy as np
import pytest

from activedict.checkpoint import (
    dumps_dictionary,
    load_dictionary,
    loads_dictionary,
    read_pgm,
    render_dictionary,
    save_dictionary,
    tile_dictionary,
)


def test_byte_layout():
    A = np.array([[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]])
    blob = dumps_dictionary(A)
    assert blob[:4] == b"DSL1"
    assert struct.unpack("<II", blob[4:12]) == (2, 3)
    # column-major: 1, 2, 3, 4, 5, 6
    assert struct.unpack("<6d", blob[12:]) == (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    assert len(blob) == 12 + 8 * 6


def test_roundtrip(tmp_path):
    A = np.random.default_rng(0).normal(size=(64, 24))
    path = save_dictionary(tmp_path / "a.dsl", A)
    np.testing.assert_array_equal(load_dictionary(path), A)


@pytest.mark.parametrize("blob", [b"XXXX" + struct.pack("<II", 1, 1) + b"\0" * 8,
                                  b"DSL1" + struct.pack("<II", 2, 2) + b"\0" * 8,
                                  b"DSL"])
def test_rejects_malformed(blob):
    with pytest.raises(ValueError):
        loads_dictionary(blob)


def test_tile_layout_and_scaling():
    A = np.zeros((4, 5))
    A[:, 0] = [0, 1, 2, 3]
    A[:, 1] = [-1, -1, -1, -1]
    img = tile_dictionary(A)
    # 5 tiles of 2x2 on a 3x2 grid with 1-px gaps
    assert img.shape == (2 * 3 + 1, 3 * 3 + 1)
    np.testing.assert_array_equal(img[1:3, 1:3], [[0, 85], [170, 255]])
    assert np.all(img[1:3, 4:6] == 128)


def test_pgm_roundtrip(tmp_path):
    # pixel values that look like whitespace must survive parsing
    A = np.linspace(-1, 1, 64 * 6).reshape(64, 6)
    path = render_dictionary(A, tmp_path / "d.pgm")
    assert path.read_bytes().startswith(b"P5\n")
    np.testing.assert_array_equal(read_pgm(path), tile_dictionary(A))
