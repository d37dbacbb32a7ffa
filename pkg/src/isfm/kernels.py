"""Dense CPU tensor kernels.

Feature maps are plain float32 numpy arrays laid out channel-first:
[C, H, W] (optionally [B, C, H, W] at call sites that loop). Everything
here is a pure function; learned convolutions use zero padding, the
fixed filters (Sobel, Gaussian) use replicate padding, and same-size
average pooling divides by the in-bounds window count so borders are
not darkened.
"""

import numpy as np

DTYPE = np.float32

SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                    [-2.0, 0.0, 2.0],
                    [-1.0, 0.0, 1.0]], dtype=DTYPE)
SOBEL_Y = np.array([[-1.0, -2.0, -1.0],
                    [0.0, 0.0, 0.0],
                    [1.0, 2.0, 1.0]], dtype=DTYPE)


class ShapeError(ValueError):
    """Raised when tensor extents do not match an operation's contract."""


class ConfigError(ValueError):
    """Raised for invalid operation parameters (even pool window, ...)."""


def _as_f32(x):
    x = np.asarray(x)
    return x if x.dtype == DTYPE else x.astype(DTYPE)


def conv2d(x, weights, bias=None, stride=1, padding=0):
    """2D cross-correlation plus bias.

    x: [C_in, H, W]; weights: [C_out, C_in, k, k]; bias: [C_out] or None.
    Output spatial size is (H + 2*padding - k) // stride + 1. Zero padding.
    """
    x = _as_f32(x)
    weights = _as_f32(weights)
    if x.ndim != 3:
        raise ShapeError(f"conv2d expects [C,H,W] input, got shape {x.shape}")
    if weights.ndim != 4:
        raise ShapeError(f"conv2d expects [C_out,C_in,k,k] weights, got {weights.shape}")
    c_out, c_in, kh, kw = weights.shape
    if kh != kw:
        raise ConfigError(f"conv2d kernel must be square, got {kh}x{kw}")
    if x.shape[0] != c_in:
        raise ShapeError(f"conv2d channel mismatch: input has {x.shape[0]}, weights expect {c_in}")
    if stride < 1:
        raise ConfigError(f"conv2d stride must be >= 1, got {stride}")
    h, w = x.shape[1:]
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d output would be empty: input {h}x{w}, kernel {kh}, pad {padding}")
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding))) if padding else x
    out = np.zeros((c_out, h_out, w_out), dtype=DTYPE)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, i:i + stride * (h_out - 1) + 1:stride,
                       j:j + stride * (w_out - 1) + 1:stride]
            out += np.tensordot(weights[:, :, i, j], patch, axes=(1, 0))
    if bias is not None:
        out += _as_f32(bias)[:, None, None]
    return out


def depthwise_conv2d(x, weights, bias=None, padding=None):
    """Per-channel convolution, same-size output.

    weights: [C, 1, k, k]; channel c of the output depends only on channel c
    of the input. padding defaults to (k-1)//2.
    """
    x = _as_f32(x)
    weights = _as_f32(weights)
    if x.ndim != 3 or weights.ndim != 4 or weights.shape[1] != 1:
        raise ShapeError(f"depthwise_conv2d expects [C,H,W] and [C,1,k,k], got {x.shape}, {weights.shape}")
    c, h, w = x.shape
    if weights.shape[0] != c:
        raise ShapeError(f"depthwise channel mismatch: input {c}, weights {weights.shape[0]}")
    k = weights.shape[2]
    if k != weights.shape[3]:
        raise ConfigError(f"depthwise kernel must be square, got {weights.shape[2:]}" )
    pad = (k - 1) // 2 if padding is None else padding
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    h_out = h + 2 * pad - k + 1
    w_out = w + 2 * pad - k + 1
    out = np.zeros((c, h_out, w_out), dtype=DTYPE)
    for i in range(k):
        for j in range(k):
            out += weights[:, 0, i, j][:, None, None] * xp[:, i:i + h_out, j:j + w_out]
    if bias is not None:
        out += _as_f32(bias)[:, None, None]
    return out


def pool2d(x, kind, k, stride=1):
    """Same-size pooling with an odd window.

    kind: "avg" or "max". Average pooling divides each window by the number
    of in-bounds elements, so constant images are fixed points including at
    the borders (the high-frequency block subtracts the pooled map from the
    original, which needs identical shapes and no border bias).
    """
    x = _as_f32(x)
    if x.ndim != 3:
        raise ShapeError(f"pool2d expects [C,H,W], got {x.shape}")
    if k % 2 == 0 or k < 1:
        raise ConfigError(f"pool2d window must be odd and positive, got {k}")
    if stride != 1:
        raise ConfigError("pool2d supports stride 1 only (same-size contract)")
    if kind not in ("avg", "max"):
        raise ConfigError(f"pool2d kind must be 'avg' or 'max', got {kind!r}")
    c, h, w = x.shape
    pad = (k - 1) // 2
    if kind == "avg":
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
        acc = np.zeros((c, h, w), dtype=DTYPE)
        cnt = np.zeros((h, w), dtype=DTYPE)
        ones = np.pad(np.ones((h, w), dtype=DTYPE), pad)
        for i in range(k):
            for j in range(k):
                acc += xp[:, i:i + h, j:j + w]
                cnt += ones[i:i + h, j:j + w]
        return acc / cnt
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)), constant_values=-np.inf)
    out = np.full((c, h, w), -np.inf, dtype=DTYPE)
    for i in range(k):
        for j in range(k):
            np.maximum(out, xp[:, i:i + h, j:j + w], out=out)
    return out


def channel_pool(x, kind):
    """Reduce the channel axis to 1: per-pixel mean or max over channels."""
    x = _as_f32(x)
    if x.ndim != 3:
        raise ShapeError(f"channel_pool expects [C,H,W], got {x.shape}")
    if kind == "avg":
        return x.mean(axis=0, keepdims=True)
    if kind == "max":
        return x.max(axis=0, keepdims=True)
    raise ConfigError(f"channel_pool kind must be 'avg' or 'max', got {kind!r}")


def linear(x, weights, bias=None):
    """Affine map y = x @ W.T + b.

    For 1D/2D inputs the trailing axis is the feature axis ([D_in] or
    [L, D_in]). For a [C, H, W] feature map the channel axis is the feature
    axis and the map is applied per spatial position (a 1x1 convolution).
    """
    x = _as_f32(x)
    weights = _as_f32(weights)
    if weights.ndim != 2:
        raise ShapeError(f"linear expects 2D weights, got {weights.shape}")
    d_out, d_in = weights.shape
    if x.ndim == 3:
        if x.shape[0] != d_in:
            raise ShapeError(f"linear channel mismatch: map has {x.shape[0]}, weights expect {d_in}")
        out = np.tensordot(weights, x, axes=(1, 0))
    else:
        if x.shape[-1] != d_in:
            raise ShapeError(f"linear feature mismatch: input trailing {x.shape[-1]}, weights expect {d_in}")
        out = x @ weights.T
    if bias is not None:
        bias = _as_f32(bias)
        out = out + (bias[:, None, None] if x.ndim == 3 else bias)
    return out


def layer_norm(x, gain=None, shift=None, eps=1e-5):
    """Normalize a [C, H, W] map over its channel axis per position.

    Mean 0 / variance 1 over C before the per-channel affine (gain, shift).
    """
    x = _as_f32(x)
    if x.ndim != 3:
        raise ShapeError(f"layer_norm expects [C,H,W], got {x.shape}")
    mu = x.mean(axis=0)
    var = x.var(axis=0)
    out = (x - mu[None]) / np.sqrt(var + DTYPE(eps))[None]
    if gain is not None:
        out = out * _as_f32(gain)[:, None, None]
    if shift is not None:
        out = out + _as_f32(shift)[:, None, None]
    return out.astype(DTYPE, copy=False)


def sigmoid(x):
    """Numerically stable logistic function; never overflows."""
    x = _as_f32(x)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(DTYPE, copy=False)


def silu(x):
    x = _as_f32(x)
    return x * sigmoid(x)


def softplus(x):
    """log(1 + exp(x)) without overflow; strictly positive."""
    x = _as_f32(x)
    return (np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))).astype(DTYPE, copy=False)


def global_avg_pool(x):
    """[C, H, W] -> [C]: average over all spatial positions."""
    x = _as_f32(x)
    if x.ndim != 3:
        raise ShapeError(f"global_avg_pool expects [C,H,W], got {x.shape}")
    return x.mean(axis=(1, 2))


def corr2_valid(img, kern):
    """Valid-mode 2D cross-correlation of a 2D image with a small kernel."""
    kh, kw = kern.shape
    h_out = img.shape[0] - kh + 1
    w_out = img.shape[1] - kw + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"corr2_valid: image {img.shape} smaller than kernel {kern.shape}")
    out = np.zeros((h_out, w_out), dtype=img.dtype)
    for i in range(kh):
        for j in range(kw):
            out += kern[i, j] * img[i:i + h_out, j:j + w_out]
    return out


def corr2_replicate(img, kern):
    """Same-size 2D cross-correlation with replicate (edge) padding."""
    kh, kw = kern.shape
    rh, rw = (kh - 1) // 2, (kw - 1) // 2
    return corr2_valid(np.pad(img, ((rh, rh), (rw, rw)), mode="edge"), kern)


def corr2_replicate_adjoint(grad, kern):
    """Adjoint of corr2_replicate: <corr(x), g> == <x, adjoint(g)>.

    Full correlation with the flipped kernel, then the replicate-padding
    fold (pad rows/cols accumulate into the nearest edge pixel). Needed by
    the analytic gradients of the Sobel and SSIM losses.
    """
    kh, kw = kern.shape
    rh, rw = (kh - 1) // 2, (kw - 1) // 2
    gp = corr2_valid(np.pad(grad, ((kh - 1, kh - 1), (kw - 1, kw - 1))), kern[::-1, ::-1])
    if rh:
        gp[rh] += gp[:rh].sum(axis=0)
        gp[-rh - 1] += gp[-rh:].sum(axis=0)
        gp = gp[rh:-rh]
    if rw:
        gp[:, rw] += gp[:, :rw].sum(axis=1)
        gp[:, -rw - 1] += gp[:, -rw:].sum(axis=1)
        gp = gp[:, rw:-rw]
    return gp


def sobel_xy(img):
    """Sobel responses (G_x, G_y) of a 2D image, replicate borders.

    Computed separably (smooth along one axis, difference along the other)
    so constant images give exact zeros: the smoothing taps are all
    positive and the difference cancels two equal values.
    """
    smooth = np.array([1.0, 2.0, 1.0], dtype=img.dtype)
    diff = np.array([-1.0, 0.0, 1.0], dtype=img.dtype)
    gx = corr2_replicate(corr2_replicate(img, smooth[:, None]), diff[None, :])
    gy = corr2_replicate(corr2_replicate(img, smooth[None, :]), diff[:, None])
    return gx, gy


def sobel_xy_adjoint(gx_bar, gy_bar, kern_dtype=None):
    """Adjoint of sobel_xy: reversed composition of the stage adjoints."""
    dtype = kern_dtype or gx_bar.dtype
    smooth = np.array([1.0, 2.0, 1.0], dtype=dtype)
    diff = np.array([-1.0, 0.0, 1.0], dtype=dtype)
    x_part = corr2_replicate_adjoint(
        corr2_replicate_adjoint(gx_bar, diff[None, :]), smooth[:, None])
    y_part = corr2_replicate_adjoint(
        corr2_replicate_adjoint(gy_bar, diff[:, None]), smooth[None, :])
    return x_part + y_part


def sobel_grad(x):
    """|G_x * x| + |G_y * x| with the 3x3 Sobel kernels, replicate borders.

    Accepts [1, H, W] or [H, W]; returns the same shape. Constant images map
    to exactly zero.
    """
    x = _as_f32(x)
    squeeze = False
    if x.ndim == 3:
        if x.shape[0] != 1:
            raise ShapeError(f"sobel_grad expects a single channel, got {x.shape}")
        x = x[0]
        squeeze = True
    gx, gy = sobel_xy(x)
    out = np.abs(gx) + np.abs(gy)
    return out[None] if squeeze else out


def gaussian_kernel2d(sigma, radius):
    """Normalized (sums to 1) square Gaussian tap matrix of side 2*radius+1."""
    if sigma <= 0:
        raise ConfigError(f"gaussian sigma must be > 0, got {sigma}")
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return (k / k.sum()).astype(DTYPE)


def gaussian_filter(x, sigma, radius):
    """Gaussian blur with replicate borders; constant images are fixed points."""
    x = _as_f32(x)
    squeeze = False
    if x.ndim == 3:
        if x.shape[0] != 1:
            raise ShapeError(f"gaussian_filter expects a single channel, got {x.shape}")
        x = x[0]
        squeeze = True
    out = corr2_replicate(x, gaussian_kernel2d(sigma, radius))
    return out[None] if squeeze else out
