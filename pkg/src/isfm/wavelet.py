"""Single-level orthonormal Haar analysis / synthesis on [C, H, W] maps.

Each 2x2 block [a b; c d] maps to
    LL = (a+b+c+d)/2   LH = (a+b-c-d)/2
    HL = (a-b+c-d)/2   HH = (a-b-c+d)/2
which is orthonormal, so band energy equals source energy and the inverse
is exact. Odd extents are handled by the caller replicating the last
row/column to even size before analysis (pad_to_even) and cropping after
synthesis; source_shape records what to crop back to.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import DTYPE, ShapeError, _as_f32


@dataclass
class WaveletBands:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    source_shape: tuple

    def bands(self):
        return self.ll, self.lh, self.hl, self.hh


def pad_to_even(x):
    """Replicate the last row/column as needed so both extents are even."""
    x = _as_f32(x)
    ph = x.shape[1] % 2
    pw = x.shape[2] % 2
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, ph), (0, pw)), mode="edge")
    return x


def dwt2(x):
    """Analysis: [C, H, W] with even H, W -> four [C, H/2, W/2] bands."""
    x = _as_f32(x)
    if x.ndim != 3:
        raise ShapeError(f"dwt2 expects [C,H,W], got {x.shape}")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"dwt2 requires even extents, got {h}x{w} (pad_to_even first)")
    a = x[:, 0::2, 0::2]
    b = x[:, 0::2, 1::2]
    cc = x[:, 1::2, 0::2]
    d = x[:, 1::2, 1::2]
    half = DTYPE(0.5)
    return WaveletBands(
        ll=(a + b + cc + d) * half,
        lh=(a + b - cc - d) * half,
        hl=(a - b + cc - d) * half,
        hh=(a - b - cc + d) * half,
        source_shape=(h, w),
    )


def idwt2(bands):
    """Synthesis: exact inverse of dwt2, cropped to bands.source_shape."""
    ll, lh, hl, hh = bands.bands()
    if not (ll.shape == lh.shape == hl.shape == hh.shape):
        raise ShapeError(
            f"idwt2 band shapes differ: {ll.shape}, {lh.shape}, {hl.shape}, {hh.shape}")
    c, hh2, ww2 = ll.shape
    out = np.empty((c, hh2 * 2, ww2 * 2), dtype=DTYPE)
    half = DTYPE(0.5)
    out[:, 0::2, 0::2] = (ll + lh + hl + hh) * half
    out[:, 0::2, 1::2] = (ll + lh - hl - hh) * half
    out[:, 1::2, 0::2] = (ll - lh + hl - hh) * half
    out[:, 1::2, 1::2] = (ll - lh - hl + hh) * half
    h, w = bands.source_shape
    return out[:, :h, :w]
