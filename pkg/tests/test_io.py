import json

import numpy as np
import pytest

from cmfact.channel import sample_channel
from cmfact.io import MatrixFileError, load_channel, load_matrix, save_channel, save_matrix

from conftest import crandn


def test_matrix_round_trip(tmp_path, rng):
    M = crandn(rng, 5, 3)
    stem = save_matrix(tmp_path / "m", M, role="test")
    back, header = load_matrix(stem.with_suffix(".bin"), with_header=True)
    np.testing.assert_array_equal(back, M)
    assert header["shape"] == [5, 3] and header["role"] == "test"


def test_binary_layout(tmp_path):
    M = np.array([[1 + 2j, 3 + 4j], [5 + 6j, 7 + 8j]])
    save_matrix(tmp_path / "m", M)
    raw = np.frombuffer((tmp_path / "m.bin").read_bytes(), dtype="<f8")
    np.testing.assert_array_equal(raw, [1, 2, 5, 6, 3, 4, 7, 8])


def test_truncated_and_bad_header(tmp_path, rng):
    save_matrix(tmp_path / "m", crandn(rng, 2, 2))
    (tmp_path / "m.bin").write_bytes(b"\0" * 8)
    with pytest.raises(MatrixFileError):
        load_matrix(tmp_path / "m")
    (tmp_path / "m.json").write_text("{not json")
    with pytest.raises(MatrixFileError):
        load_matrix(tmp_path / "m")
    with pytest.raises(OSError):
        load_matrix(tmp_path / "missing")


def test_channel_round_trip(tmp_path):
    ch = sample_channel(4, 8, 3, 11)
    save_channel(tmp_path / "ch", ch)
    back = load_channel(tmp_path / "ch.json")
    assert back.H.tobytes() == ch.H.tobytes()
    assert back.seed == 11 and back.L == 3
    header = json.loads((tmp_path / "ch.json").read_text())
    assert header["N_r"] == 4 and header["N_t"] == 8


def test_channel_tamper_detected(tmp_path):
    ch = sample_channel(2, 3, 1, 0)
    save_channel(tmp_path / "ch", ch)
    h = json.loads((tmp_path / "ch.json").read_text())
    h["theta_t"][0] += 0.1
    (tmp_path / "ch.json").write_text(json.dumps(h))
    with pytest.raises(MatrixFileError):
        load_channel(tmp_path / "ch")
