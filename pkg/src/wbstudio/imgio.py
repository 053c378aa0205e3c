"""8-bit image file I/O (PNG and PPM) and float conversions.

Images in memory are float32 arrays of shape (H, W, 3) with values in
[0, 1]; files are 8-bit with round-half-up quantization.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Quantize [0,1] floats to uint8 with round half up."""
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32) / 255.0)


def save_image(img: np.ndarray, path: str) -> None:
    """Write a (H, W, 3) float image as PNG or PPM, chosen by extension."""
    Image.fromarray(to_uint8(img), mode="RGB").save(path)


def load_image(path: str) -> np.ndarray:
    """Read an image file into a (H, W, 3) float32 array in [0, 1]."""
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def encode_png(img: np.ndarray) -> bytes:
    import io
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    import io
    with Image.open(io.BytesIO(data)) as im:
        return from_uint8(np.asarray(im.convert("RGB")))
