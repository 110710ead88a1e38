"""Matrix and channel files: raw complex data plus a JSON header.

A matrix ``name`` is stored as two files:

* ``name.bin``: the entries in column-major order, each as a little-endian
  float64 pair ``(real, imag)``;
* ``name.json``: ``{"format": "cmfact-matrix", "version": 1, "shape": [r, c],
  "dtype": "complex128", "order": "F", ...}`` plus free-form metadata.

Channel files hold ``H`` in the ``.bin`` and carry ``N_r``, ``N_t``, ``L``,
``seed``, the angles and ``alpha`` in the header; the steering matrices are
rebuilt from the angles on load.
"""

import json
from pathlib import Path

import numpy as np

from .channel import channel_from_paths

FORMAT = "cmfact-matrix"
CHANNEL_FORMAT = "cmfact-channel"
VERSION = 1
_DTYPE = np.dtype("<f8")


class MatrixFileError(OSError):
    """A matrix file is missing, truncated or has an unexpected header."""


def _stem(path):
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".bin", ".json") else p


def _write_bin(path, M):
    M = np.asarray(M, dtype=complex)
    flat = M.reshape(-1, order="F")
    pairs = np.empty(2 * flat.size, dtype=_DTYPE)
    pairs[0::2] = flat.real
    pairs[1::2] = flat.imag
    path.write_bytes(pairs.tobytes())


def _read_bin(path, shape):
    try:
        raw = np.frombuffer(path.read_bytes(), dtype=_DTYPE)
    except OSError as exc:
        raise MatrixFileError(f"cannot read {path}: {exc}") from exc
    n = int(np.prod(shape))
    if raw.size != 2 * n:
        raise MatrixFileError(f"{path}: expected {2 * n} float64 values, found {raw.size}")
    return (raw[0::2] + 1j * raw[1::2]).reshape(shape, order="F")


def _read_header(path, fmt):
    try:
        header = json.loads(path.read_text())
    except OSError as exc:
        raise MatrixFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MatrixFileError(f"{path}: invalid JSON header ({exc})") from exc
    if header.get("format") != fmt:
        raise MatrixFileError(f"{path}: expected format {fmt!r}, got {header.get('format')!r}")
    return header


def save_matrix(path, M, **meta):
    """Write ``M`` (2-D) to ``path.bin`` and ``path.json``; returns the stem."""
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = {"format": FORMAT, "version": VERSION, "shape": list(M.shape),
              "dtype": "complex128", "order": "F", **meta}
    _write_bin(stem.with_suffix(".bin"), M)
    stem.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return stem


def load_matrix(path, with_header=False):
    stem = _stem(path)
    header = _read_header(stem.with_suffix(".json"), FORMAT)
    M = _read_bin(stem.with_suffix(".bin"), tuple(header["shape"]))
    return (M, header) if with_header else M


def save_channel(path, channel):
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": CHANNEL_FORMAT, "version": VERSION,
        "shape": [channel.N_r, channel.N_t], "dtype": "complex128", "order": "F",
        "N_r": channel.N_r, "N_t": channel.N_t, "L": channel.L,
        "seed": None if channel.seed is None else int(channel.seed),
        "theta_r": [float(v) for v in channel.theta_r],
        "theta_t": [float(v) for v in channel.theta_t],
        "alpha_re": [float(v) for v in channel.alpha.real],
        "alpha_im": [float(v) for v in channel.alpha.imag],
    }
    _write_bin(stem.with_suffix(".bin"), channel.H)
    stem.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return stem


def load_channel(path):
    """Rebuild a :class:`~cmfact.channel.ChannelRealization` and check ``H`` against the file."""
    stem = _stem(path)
    h = _read_header(stem.with_suffix(".json"), CHANNEL_FORMAT)
    alpha = np.array(h["alpha_re"]) + 1j * np.array(h["alpha_im"])
    ch = channel_from_paths(np.array(h["theta_r"]), np.array(h["theta_t"]), alpha,
                            h["N_r"], h["N_t"], seed=h.get("seed"))
    H = _read_bin(stem.with_suffix(".bin"), (h["N_r"], h["N_t"]))
    if not np.allclose(H, ch.H, rtol=1e-12, atol=1e-14):
        raise MatrixFileError(f"{stem}: stored H does not match its path parameters")
    return ch
