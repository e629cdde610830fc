"""Binary PPM (P6) and PGM (P5) readers and writers, maxval 255.

Header tokens may be separated by any whitespace; '#' starts a comment
that runs to end of line. The raster follows a single whitespace byte
after the maxval token.
"""

import numpy as np

from .errors import DataFormatError

_WHITESPACE = b" \t\r\n\x0b\x0c"


def _read_header(data: bytes, expected_magic: bytes):
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise DataFormatError("truncated header")
        ch = data[pos : pos + 1]
        if ch in _WHITESPACE:
            pos += 1
            continue
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise DataFormatError("unterminated comment in header")
            pos = nl + 1
            continue
        end = pos
        while end < len(data) and data[end : end + 1] not in _WHITESPACE:
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != expected_magic:
        raise DataFormatError(
            f"bad magic {tokens[0]!r}, expected {expected_magic!r}"
        )
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise DataFormatError(f"non-numeric header field: {exc}") from exc
    if width < 1 or height < 1:
        raise DataFormatError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise DataFormatError(f"unsupported maxval {maxval} (only 255)")
    # exactly one whitespace byte separates the header from the raster
    return width, height, pos + 1


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 image into a float64 (h, w, 3) array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, offset = _read_header(data, b"P6")
    raster = data[offset : offset + height * width * 3]
    if len(raster) != height * width * 3:
        raise DataFormatError(f"truncated raster in {path}")
    pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(height, width, 3)


def write_ppm(path, image: np.ndarray) -> None:
    """Write a float (h, w, 3) array in [0, 1] as binary P6."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataFormatError(f"expected (h, w, 3) image, got {image.shape}")
    raster = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (width, height))
        fh.write(raster.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 map into an int64 (h, w) array of gray levels."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, offset = _read_header(data, b"P5")
    raster = data[offset : offset + height * width]
    if len(raster) != height * width:
        raise DataFormatError(f"truncated raster in {path}")
    values = np.frombuffer(raster, dtype=np.uint8).astype(np.int64)
    return values.reshape(height, width)


def write_pgm(path, values: np.ndarray) -> None:
    """Write an integer (h, w) array with entries in [0, 255] as binary P5."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise DataFormatError(f"expected (h, w) map, got {values.shape}")
    if values.min() < 0 or values.max() > 255:
        raise DataFormatError("gray levels must lie in [0, 255]")
    height, width = values.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(values.astype(np.uint8).tobytes())
