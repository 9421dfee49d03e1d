"""Binary 8-bit PGM (P5) export and import."""

import numpy as np

__all__ = ["to_gray", "write_pgm", "read_pgm"]


def to_gray(x):
    """Linearly map ``[min, max]`` of `x` onto ``0..255``.

    A constant matrix maps to mid-gray 128.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={x.ndim}")
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.full(x.shape, 128, dtype=np.uint8)
    scaled = np.rint((x - lo) * (255.0 / (hi - lo)))
    return np.clip(scaled, 0, 255).astype(np.uint8)


def write_pgm(x, path):
    """Write matrix `x` as a P5 image; row ``i`` of `x` is image row ``i``."""
    gray = to_gray(x)
    rows, cols = gray.shape
    header = f"P5\n{cols} {rows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(gray.tobytes())


def _tokens(data):
    """Yield (token, end_offset) for the four header fields, skipping comments."""
    pos = 0
    found = 0
    while found < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        found += 1
        yield data[start:pos], pos


def read_pgm(path):
    """Read a binary 8-bit PGM file into a uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = list(_tokens(data))
    magic, width, height, maxval = (tok for tok, _ in fields)
    if magic != b"P5":
        raise ValueError(f"not a binary PGM file: magic {magic!r}")
    if int(maxval) != 255:
        raise ValueError("only 8-bit PGM files are supported")
    offset = fields[-1][1] + 1  # single whitespace after maxval
    w, h = int(width), int(height)
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset)
    return pixels.reshape(h, w).copy()
