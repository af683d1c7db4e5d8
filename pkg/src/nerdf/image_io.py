"""Image file IO: binary PPM (P6) for bit-exact goldens, PNG for viewing.

Pixels are quantized to 8 bits with round-half-away behaviour of
`np.rint(x * 255)`.  Reading returns values on the k/255 lattice, so a
write/read/write cycle is byte-stable for both formats and a PNG
round-trip is exact to within one quantization step.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import FormatError
from .metrics import Image


def quantize(img: Image) -> np.ndarray:
    return np.rint(img.rgb * 255.0).astype(np.uint8)


def _dequantize(arr: np.ndarray, width: int, height: int) -> Image:
    return Image(width, height, arr.astype(np.float64) / 255.0)


def write_ppm(path, img: Image) -> None:
    arr = quantize(img)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_ppm(path) -> Image:
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        if not data.startswith(b"P6"):
            raise FormatError("not a P6 PPM file")
        fields = []
        pos = 2
        while len(fields) < 3:
            while pos < len(data) and data[pos : pos + 1].isspace():
                pos += 1
            if data[pos : pos + 1] == b"#":  # comment line
                pos = data.index(b"\n", pos) + 1
                continue
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            fields.append(int(data[start:pos]))
        pos += 1  # single whitespace after maxval
        width, height, maxval = fields
        if maxval != 255:
            raise FormatError(f"unsupported PPM maxval {maxval}")
        payload = data[pos : pos + 3 * width * height]
        if len(payload) != 3 * width * height:
            raise FormatError("truncated PPM payload")
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
        return _dequantize(arr, width, height)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed PPM file: {exc}") from exc


def png_bytes(img: Image) -> bytes:
    from PIL import Image as PILImage

    buf = io.BytesIO()
    PILImage.fromarray(quantize(img), mode="RGB").save(buf, format="PNG", compress_level=6)
    return buf.getvalue()


def write_png(path, img: Image) -> None:
    with open(path, "wb") as fh:
        fh.write(png_bytes(img))


def read_png(path) -> Image:
    from PIL import Image as PILImage, UnidentifiedImageError

    try:
        with PILImage.open(path) as p:
            arr = np.asarray(p.convert("RGB"))
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise FormatError(f"malformed PNG file: {exc}") from exc
    return _dequantize(arr, arr.shape[1], arr.shape[0])


def write_image(path, img: Image) -> None:
    path = str(path)
    if path.endswith(".ppm"):
        write_ppm(path, img)
    elif path.endswith(".png"):
        write_png(path, img)
    else:
        raise FormatError(f"unsupported image extension: {path}")


def read_image(path) -> Image:
    path = str(path)
    if path.endswith(".ppm"):
        return read_ppm(path)
    if path.endswith(".png"):
        return read_png(path)
    raise FormatError(f"unsupported image extension: {path}")
