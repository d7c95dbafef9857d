"""Greyscale PGM (P2 ascii / P5 binary) reading and writing."""

import os

import numpy as np

from .errors import PgmError

_WS = b" \t\n\r\v\f"


def _header_tokens(data, count):
    """First ``count`` header tokens and the offset just past the last one."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i] in _WS:
            i += 1
        if i >= n:
            raise PgmError("truncated header")
        if data[i] == ord("#"):
            while i < n and data[i] not in b"\r\n":
                i += 1
            continue
        start = i
        while i < n and data[i] not in _WS and data[i] != ord("#"):
            i += 1
        tokens.append(data[start:i])
    return tokens, i


def _int_token(tok, what):
    try:
        value = int(tok)
    except ValueError:
        raise PgmError(f"bad {what}: {tok!r}") from None
    return value


def parse_pgm(data):
    """Decode PGM bytes into an integer array and its maxval."""
    data = bytes(data)
    tokens, pos = _header_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"unsupported magic number {magic!r}")
    width = _int_token(tokens[1], "width")
    height = _int_token(tokens[2], "height")
    maxval = _int_token(tokens[3], "maxval")
    if width < 1 or height < 1:
        raise PgmError("width and height must be positive")
    if not 0 < maxval <= 65535:
        raise PgmError(f"maxval {maxval} outside 1..65535")
    count = width * height
    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WS:
            raise PgmError("missing whitespace after maxval")
        raw = data[pos + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(raw) < need:
            raise PgmError(f"truncated payload: {len(raw)} of {need} bytes")
        pixels = np.frombuffer(raw[:need], dtype=dtype).astype(np.int64)
    else:
        body = b"\n".join(line.split(b"#", 1)[0] for line in data[pos:].splitlines())
        fields = body.split()
        if len(fields) < count:
            raise PgmError(f"truncated payload: {len(fields)} of {count} samples")
        pixels = np.array([_int_token(f, "sample") for f in fields[:count]], dtype=np.int64)
    if np.any(pixels > maxval):
        raise PgmError("sample exceeds maxval")
    return pixels.reshape(height, width), maxval


def load_pgm(path):
    """Read a PGM file as a float matrix with entries in [0, 1]."""
    with open(path, "rb") as fh:
        pixels, maxval = parse_pgm(fh.read())
    return pixels / float(maxval)


def encode_pgm(x):
    """Canonical 8-bit P5 bytes for a matrix; values are clamped to [0, 1] and rounded."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise PgmError("image must be a non-empty matrix")
    if not np.all(np.isfinite(x)):
        raise PgmError("image has non-finite values")
    q = np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = q.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def save_pgm(x, path):
    data = encode_pgm(x)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def bundled_images():
    """Names of the glyphs shipped with the package."""
    folder = os.path.join(os.path.dirname(__file__), "data")
    return sorted(f for f in os.listdir(folder) if f.endswith(".pgm"))


def resolve_image(name_or_path):
    if os.path.exists(name_or_path):
        return name_or_path
    bundled = os.path.join(os.path.dirname(__file__), "data", name_or_path)
    if os.path.exists(bundled):
        return bundled
    raise FileNotFoundError(f"no image at {name_or_path!r} and no bundled glyph of that name")
