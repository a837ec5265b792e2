"""Binary and text file formats.

FMAP   ``b"FMAP"``, u32 LE width, u32 LE height, width*height f32 LE row-major.
HMAT   ``b"HMAT"``, u32 LE M, u32 LE N, M*N int8 entries in {-1, +1}.
MSET   ``b"MSET"``, u32 LE columns, u32 LE M, u32 LE N, u8 mode (0=col, 1=row),
       f64 LE noise variance, u64 LE seed, then the columns as f64 LE
       (column-major: all M values of column 0 first).
PGM/PPM  binary P5/P6 with maxval 255.
Mesh   ASCII ``v x y z`` per pixel, row-major, then ``f a b c d`` quads
       with 1-based vertex indices.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


def _read(path) -> bytes:
    return Path(path).read_bytes()


def _magic(data: bytes, magic: bytes, path) -> None:
    if data[:4] != magic:
        raise FormatError(f"{path}: expected {magic.decode()} magic, got {data[:4]!r}")


def encode_fmap(values: np.ndarray) -> bytes:
    values = np.asarray(values)
    if values.ndim != 2:
        raise FormatError("FMAP holds 2-D maps only")
    h, w = values.shape
    return b"FMAP" + struct.pack("<II", w, h) + values.astype("<f4").tobytes()


def decode_fmap(data: bytes, path="<bytes>") -> np.ndarray:
    _magic(data, b"FMAP", path)
    if len(data) < 12:
        raise FormatError(f"{path}: truncated FMAP header")
    w, h = struct.unpack_from("<II", data, 4)
    payload = data[12:]
    if len(payload) != 4 * w * h:
        raise FormatError(f"{path}: FMAP payload is {len(payload)} bytes, expected {4 * w * h}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float64)


def write_fmap(path, values: np.ndarray) -> None:
    Path(path).write_bytes(encode_fmap(values))


def read_fmap(path) -> np.ndarray:
    return decode_fmap(_read(path), path)


def to_u8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero and clip to 0..255."""
    values = np.asarray(values, dtype=float)
    rounded = np.sign(values) * np.floor(np.abs(values) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def _pnm_header(data: bytes, path):
    # magic, width, height, maxval separated by whitespace; '#' comments
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise FormatError(f"{path}: truncated PNM header")
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte before the raster
    return tokens, pos + 1


def decode_pnm(data: bytes, path="<bytes>") -> np.ndarray:
    tokens, offset = _pnm_header(data, path)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported PNM magic {magic!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad PNM header") from exc
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    raster = data[offset:]
    if len(raster) != w * h * channels:
        raise FormatError(f"{path}: raster is {len(raster)} bytes, expected {w * h * channels}")
    img = np.frombuffer(raster, dtype=np.uint8)
    return img.reshape(h, w) if channels == 1 else img.reshape(h, w, 3)


def encode_pnm(image: np.ndarray) -> bytes:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise FormatError("PNM rasters must be uint8; normalize and round first")
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise FormatError(f"cannot store array of shape {image.shape} as PNM")
    h, w = image.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + image.tobytes()


def write_pnm(path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode_pnm(image))


def read_pnm(path) -> np.ndarray:
    return decode_pnm(_read(path), path)


def encode_hmat(matrix: np.ndarray) -> bytes:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or not np.all((matrix == 1) | (matrix == -1)):
        raise FormatError("HMAT holds 2-D +-1 matrices only")
    m, n = matrix.shape
    return b"HMAT" + struct.pack("<II", m, n) + matrix.astype(np.int8).tobytes()


def decode_hmat(data: bytes, path="<bytes>") -> np.ndarray:
    _magic(data, b"HMAT", path)
    if len(data) < 12:
        raise FormatError(f"{path}: truncated HMAT header")
    m, n = struct.unpack_from("<II", data, 4)
    payload = data[12:]
    if len(payload) != m * n:
        raise FormatError(f"{path}: HMAT payload is {len(payload)} bytes, expected {m * n}")
    matrix = np.frombuffer(payload, dtype=np.int8).reshape(m, n).copy()
    if not np.all((matrix == 1) | (matrix == -1)):
        raise FormatError(f"{path}: HMAT entries must be +-1")
    return matrix


def write_hmat(path, matrix: np.ndarray) -> None:
    Path(path).write_bytes(encode_hmat(matrix))


def read_hmat(path) -> np.ndarray:
    return decode_hmat(_read(path), path)


_MSET_HEAD = struct.Struct("<4sIIIBdQ")
_MODE_CODES = {"col": 0, "row": 1}


def encode_mset(columns: np.ndarray, n: int, mode: str, variance: float, seed: int) -> bytes:
    """``columns`` is M x count, one measurement vector per column."""
    columns = np.asarray(columns, dtype=np.float64)
    m, count = columns.shape
    head = _MSET_HEAD.pack(b"MSET", count, m, n, _MODE_CODES[mode], variance, seed)
    return head + columns.T.astype("<f8").tobytes()


def decode_mset(data: bytes, path="<bytes>") -> dict:
    _magic(data, b"MSET", path)
    if len(data) < _MSET_HEAD.size:
        raise FormatError(f"{path}: truncated MSET header")
    _, count, m, n, mode, variance, seed = _MSET_HEAD.unpack_from(data)
    if mode not in (0, 1):
        raise FormatError(f"{path}: bad MSET mode byte {mode}")
    payload = data[_MSET_HEAD.size :]
    if len(payload) != 8 * m * count:
        raise FormatError(f"{path}: MSET payload is {len(payload)} bytes, expected {8 * m * count}")
    cols = np.frombuffer(payload, dtype="<f8").reshape(count, m).T.astype(np.float64)
    return {
        "columns": cols,
        "N": n,
        "mode": ("col", "row")[mode],
        "variance": variance,
        "seed": seed,
    }


def encode_mesh(height_map: np.ndarray) -> bytes:
    z = np.asarray(height_map, dtype=float)
    h, w = z.shape
    lines = [f"v {x} {y} {z[y, x]:.9g}" for y in range(h) for x in range(w)]
    for y in range(h - 1):
        for x in range(w - 1):
            a = y * w + x + 1
            lines.append(f"f {a} {a + 1} {a + w + 1} {a + w}")
    return ("\n".join(lines) + "\n").encode()


def write_mesh(path, height_map: np.ndarray) -> None:
    Path(path).write_bytes(encode_mesh(height_map))


def export(artifact, path, fmt: str) -> None:
    """Write ``artifact`` to ``path`` in format ``fmt``.

    Maps go to ``fmap``, ``pgm``, ``ppm`` or ``mesh``; a +-1 matrix to
    ``hmat``; a measurement set (anything with ``columns``, ``N``, ``mode``,
    ``variance`` and ``seed``) to ``mset``.  8-bit formats take values
    already on the [0, 255] scale and round them.
    """
    if fmt == "mset":
        if not hasattr(artifact, "columns"):
            raise FormatError("mset export needs a measurement set")
        data = encode_mset(artifact.columns, artifact.N, artifact.mode, artifact.variance, artifact.seed)
        Path(path).write_bytes(data)
        return
    values = np.asarray(artifact)
    if fmt == "fmap":
        write_fmap(path, values)
    elif fmt == "hmat":
        write_hmat(path, values)
    elif fmt == "mesh":
        write_mesh(path, values)
    elif fmt in ("pgm", "ppm"):
        if (values.ndim == 3) != (fmt == "ppm"):
            raise FormatError(f"{fmt} export needs a {'3-channel' if fmt == 'ppm' else 'single-channel'} map")
        write_pnm(path, values if values.dtype == np.uint8 else to_u8(values))
    else:
        raise FormatError(f"unsupported export format {fmt!r}")
