"""8-bit image reading/writing (PNG and PGM/PPM) mapped to [0, 1] floats."""

import numpy as np
from PIL import Image, UnidentifiedImageError

from .kernels import DTYPE


class ImageFormatError(Exception):
    pass


def read_image(path):
    """Load as float32 [C, H, W] in [0, 1]; C is 1 (gray) or 3 (RGB)."""
    try:
        with Image.open(path) as im:
            if im.mode in ("1", "L", "I", "I;16", "F"):
                im = im.convert("L")
                arr = np.asarray(im, dtype=DTYPE)[None]
            else:
                im = im.convert("RGB")
                arr = np.asarray(im, dtype=DTYPE).transpose(2, 0, 1)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"cannot read image {path}: {exc}") from exc
    return arr / DTYPE(255.0)


def write_image(path, arr):
    """Write a [1, H, W] or [3, H, W] array in [0, 1] as an 8-bit image.

    Format follows the extension (.png, .pgm for gray, .ppm for color)."""
    arr = np.asarray(arr, dtype=np.float64)
    q = np.clip(np.floor(arr * 255.0 + 0.5), 0, 255).astype(np.uint8)
    if q.ndim == 3 and q.shape[0] == 1:
        im = Image.fromarray(q[0], mode="L")
    elif q.ndim == 3 and q.shape[0] == 3:
        im = Image.fromarray(q.transpose(1, 2, 0), mode="RGB")
    else:
        raise ImageFormatError(f"cannot write array of shape {arr.shape}")
    im.save(path)
