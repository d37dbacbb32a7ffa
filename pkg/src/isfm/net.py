"""The fusion network: modality extractors, frequency fusion, gated
spatial-frequency interaction, and reconstruction.

Weights are a flat name -> float32 array mapping (see weights.py for the
archive container). param_specs() below is the single authority for which
tensors exist, their shapes, and their init scheme; the forward functions
read the same names, so the manifest and the network cannot drift apart.

Feature maps are [C, H, W] float32. Fusion operates on the luma channel;
chroma from the visible image is carried through untouched and re-attached
at the end.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels, wavelet
from .kernels import DTYPE, ShapeError, _as_f32
from .ssm import SsmParams, VssmParams, ssm_2d, vssm_block


@dataclass
class IsfmConfig:
    """Architecture hyper-parameters. Defaults: 128 channels, 2 state-space
    blocks per modality branch, 4 scan directions, expansion factor 2."""
    channels: int = 128
    num_vssm: int = 2
    k_directions: int = 4
    expansion: int = 2
    n_state: int = 16
    enable_mff: bool = True
    enable_fgg: bool = True
    enable_fgm: bool = True

    def __post_init__(self):
        if self.channels % 2:
            raise kernels.ConfigError(f"channels must be even, got {self.channels}")
        if self.expansion < 1:
            raise kernels.ConfigError(f"expansion must be >= 1, got {self.expansion}")
        if self.k_directions != 4:
            raise kernels.ConfigError("exactly 4 scan directions are supported")
        if self.num_vssm < 1:
            raise kernels.ConfigError(f"num_vssm must be >= 1, got {self.num_vssm}")


@dataclass
class ModalityPair:
    """One input pair: infrared luma, visible luma, visible chroma."""
    ir: np.ndarray
    vi_y: np.ndarray
    vi_cb: np.ndarray = None
    vi_cr: np.ndarray = None


@dataclass
class FrequencyContext:
    """Fused wavelet bands plus their spatial reprojection."""
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    spatial: np.ndarray


# ---------------------------------------------------------------------------
# parameter manifest
# ---------------------------------------------------------------------------

def _ssm_specs(prefix, d_inner, n_state):
    yield (f"{prefix}.a_log", (d_inner, n_state), "a_log", 0)
    yield (f"{prefix}.dt.w", (d_inner, d_inner), "kaiming", d_inner)
    yield (f"{prefix}.dt.b", (d_inner,), "dt_bias", 0)
    yield (f"{prefix}.b.w", (n_state, d_inner), "kaiming", d_inner)
    yield (f"{prefix}.b.b", (n_state,), "zeros", 0)
    yield (f"{prefix}.c.w", (n_state, d_inner), "kaiming", d_inner)
    yield (f"{prefix}.c.b", (n_state,), "zeros", 0)
    yield (f"{prefix}.d", (d_inner,), "ones", 0)


def _vssm_specs(prefix, c, eta, n_state):
    d = eta * c
    yield (f"{prefix}.ln.g", (c,), "ones", 0)
    yield (f"{prefix}.ln.b", (c,), "zeros", 0)
    yield (f"{prefix}.inx.w", (d, c), "kaiming", c)
    yield (f"{prefix}.inx.b", (d,), "zeros", 0)
    yield (f"{prefix}.inz.w", (d, c), "kaiming", c)
    yield (f"{prefix}.inz.b", (d,), "zeros", 0)
    yield (f"{prefix}.dw.w", (d, 1, 3, 3), "kaiming", 9)
    yield (f"{prefix}.dw.b", (d,), "zeros", 0)
    for k in range(4):
        yield from _ssm_specs(f"{prefix}.dir{k}", d, n_state)
    yield (f"{prefix}.outln.g", (d,), "ones", 0)
    yield (f"{prefix}.outln.b", (d,), "zeros", 0)
    yield (f"{prefix}.out.w", (c, d), "kaiming", d)
    yield (f"{prefix}.out.b", (c,), "zeros", 0)


def _conv_specs(prefix, c_out, c_in, k):
    yield (f"{prefix}.w", (c_out, c_in, k, k), "kaiming", c_in * k * k)
    yield (f"{prefix}.b", (c_out,), "zeros", 0)


def param_specs(cfg):
    """Yield (name, shape, init_kind, fan_in) for every learnable tensor.

    The ablation toggles do not change the manifest: disabled paths keep
    their weights so that toggling a flag isolates the computation change.
    """
    c = cfg.channels
    d = cfg.expansion * c
    n = cfg.n_state
    for m in ("ir", "vi"):
        yield from _conv_specs(f"mse.{m}.conv1", c, 1, 3)
        yield from _conv_specs(f"mse.{m}.conv2", c, c, 3)
        for i in range(cfg.num_vssm):
            yield from _vssm_specs(f"mse.{m}.vssm{i}", c, cfg.expansion, n)
    # frequency fusion (band tensors all have C channels at half resolution)
    yield from _conv_specs("mff.lffb.fuse", c, c, 1)
    yield from _conv_specs("mff.lffb.attn", 1, 2, 3)
    for k in (3, 5):
        yield (f"mff.lffb.dw{k}.w", (c, 1, k, k), "kaiming", k * k)
        yield (f"mff.lffb.dw{k}.b", (c,), "zeros", 0)
        yield from _conv_specs(f"mff.lffb.pw{k}", c, c, 1)
    yield from _conv_specs("mff.lffb.out", c, c, 1)
    for name in ("fuse", "s1", "s2", "out"):
        yield from _conv_specs(f"mff.hffb.{name}", c, c, 1)
    yield from _conv_specs("mff.proj", c, c, 3)
    # gated spatial fusion
    for m in ("ir", "vi"):
        yield (f"fgm.{m}.ln.g", (c,), "ones", 0)
        yield (f"fgm.{m}.ln.b", (c,), "zeros", 0)
        yield (f"fgm.{m}.inproj.w", (2 * d, c), "kaiming", c)
        yield (f"fgm.{m}.inproj.b", (2 * d,), "zeros", 0)
        yield (f"fgm.{m}.dw.w", (d, 1, 3, 3), "kaiming", 9)
        yield (f"fgm.{m}.dw.b", (d,), "zeros", 0)
        for k in range(4):
            yield from _ssm_specs(f"fgm.{m}.dir{k}", d, n)
        yield (f"fgm.{m}.hln.g", (d,), "ones", 0)
        yield (f"fgm.{m}.hln.b", (d,), "zeros", 0)
    yield ("fgm.out.w", (c, d), "kaiming", d)
    yield ("fgm.out.b", (c,), "zeros", 0)
    yield ("fgm.s1", (1,), "ones", 0)
    yield ("fgm.s2", (1,), "ones", 0)
    # frequency-driven gate
    yield ("fgg.glob.w", (2 * d, 2 * d), "kaiming", 2 * d)
    yield ("fgg.glob.b", (2 * d,), "zeros", 0)
    yield ("fgg.globln.g", (2 * d,), "ones", 0)
    yield ("fgg.globln.b", (2 * d,), "zeros", 0)
    yield ("fgg.fc.w", (2 * d, 2 * c), "kaiming", 2 * c)
    yield ("fgg.fc.b", (2 * d,), "zeros", 0)
    for m in ("ir", "vi"):
        yield (f"fgg.gate_{m}.w", (d, d), "kaiming", d)
        yield (f"fgg.gate_{m}.b", (d,), "zeros", 0)
        yield (f"fgg.gateln_{m}.g", (d,), "ones", 0)
        yield (f"fgg.gateln_{m}.b", (d,), "zeros", 0)
    # reconstruction head
    yield from _conv_specs("head.conv1", c, 2 * c, 3)
    yield from _conv_specs("head.conv2", 1, c, 3)


class _W:
    """Name lookup over a flat weight mapping with a helpful error."""

    def __init__(self, weights):
        self._d = weights.entries if hasattr(weights, "entries") else weights

    def __getitem__(self, name):
        try:
            return self._d[name]
        except KeyError:
            raise ShapeError(f"incomplete weights: missing tensor '{name}'") from None


def _ssm_params(w, prefix):
    return SsmParams(
        a_log=w[f"{prefix}.a_log"], delta_w=w[f"{prefix}.dt.w"], delta_b=w[f"{prefix}.dt.b"],
        b_w=w[f"{prefix}.b.w"], b_b=w[f"{prefix}.b.b"],
        c_w=w[f"{prefix}.c.w"], c_b=w[f"{prefix}.c.b"], d_skip=w[f"{prefix}.d"])


def _vssm_params(w, prefix):
    return VssmParams(
        ln_g=w[f"{prefix}.ln.g"], ln_b=w[f"{prefix}.ln.b"],
        in_x_w=w[f"{prefix}.inx.w"], in_x_b=w[f"{prefix}.inx.b"],
        in_z_w=w[f"{prefix}.inz.w"], in_z_b=w[f"{prefix}.inz.b"],
        dw_w=w[f"{prefix}.dw.w"], dw_b=w[f"{prefix}.dw.b"],
        scans=tuple(_ssm_params(w, f"{prefix}.dir{k}") for k in range(4)),
        out_ln_g=w[f"{prefix}.outln.g"], out_ln_b=w[f"{prefix}.outln.b"],
        out_w=w[f"{prefix}.out.w"], out_b=w[f"{prefix}.out.b"])


# ---------------------------------------------------------------------------
# color space
# ---------------------------------------------------------------------------

def rgb_to_ycbcr(rgb):
    """BT.601 full-range conversion; inputs outside [0,1] are clamped with a
    warning. Returns (y, cb, cr), each [1, H, W] in [0,1]."""
    rgb = _as_f32(rgb)
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise ShapeError(f"rgb_to_ycbcr expects [3,H,W], got {rgb.shape}")
    if rgb.min() < 0.0 or rgb.max() > 1.0:
        warnings.warn("rgb_to_ycbcr: input outside [0,1]; clamping")
        rgb = np.clip(rgb, 0.0, 1.0)
    r, g, b = rgb[0], rgb[1], rgb[2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 0.5 + (b - y) * 0.564
    cr = 0.5 + (r - y) * 0.713
    clip = lambda m: np.clip(m, 0.0, 1.0).astype(DTYPE)[None]
    return clip(y), clip(cb), clip(cr)


def ycbcr_to_rgb(y, cb, cr):
    """Inverse of rgb_to_ycbcr, clamped to [0,1]. Returns [3, H, W]."""
    y, cb, cr = (_as_f32(m).reshape(m.shape[-2:]) for m in (y, cb, cr))
    if not (y.shape == cb.shape == cr.shape):
        raise ShapeError(f"ycbcr_to_rgb shape mismatch: {y.shape}, {cb.shape}, {cr.shape}")
    r = y + (cr - 0.5) / 0.713
    b = y + (cb - 0.5) / 0.564
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.clip(np.stack([r, g, b]), 0.0, 1.0).astype(DTYPE)


def fuse_color(fused_y, cb, cr):
    """Recolor a fused luma channel with the visible image's chroma."""
    return ycbcr_to_rgb(fused_y, cb, cr)


# ---------------------------------------------------------------------------
# forward blocks
# ---------------------------------------------------------------------------

def mse_forward(img, branch, weights, cfg):
    """Modality extractor: two 3x3 conv+SiLU (1 -> C -> C), then the chain of
    state-space blocks. Branches hold independent weights."""
    if branch not in ("ir", "vi"):
        raise ShapeError(f"branch must be 'ir' or 'vi', got {branch!r}")
    w = _W(weights)
    x = _as_f32(img)
    if x.ndim != 3 or x.shape[0] != 1:
        raise ShapeError(f"mse_forward expects [1,H,W], got {x.shape}")
    x = kernels.silu(kernels.conv2d(x, w[f"mse.{branch}.conv1.w"],
                                    w[f"mse.{branch}.conv1.b"], padding=1))
    x = kernels.silu(kernels.conv2d(x, w[f"mse.{branch}.conv2.w"],
                                    w[f"mse.{branch}.conv2.b"], padding=1))
    for i in range(cfg.num_vssm):
        x = vssm_block(x, _vssm_params(w, f"mse.{branch}.vssm{i}"))
    return x


def lffb(ll_ir, ll_vi, weights):
    """Low-frequency fusion: shared 1x1 embedding of the band sum, a
    channel-pooled spatial attention, and two depthwise multi-scale streams."""
    w = _W(weights)
    if ll_ir.shape != ll_vi.shape:
        raise ShapeError(f"lffb shape mismatch: {ll_ir.shape} vs {ll_vi.shape}")
    x_lf = kernels.silu(kernels.conv2d(ll_ir + ll_vi, w["mff.lffb.fuse.w"], w["mff.lffb.fuse.b"]))
    pooled = np.concatenate([kernels.channel_pool(x_lf, "max"),
                             kernels.channel_pool(x_lf, "avg")], axis=0)
    sig_s = kernels.sigmoid(kernels.conv2d(pooled, w["mff.lffb.attn.w"],
                                           w["mff.lffb.attn.b"], padding=1))
    u1 = kernels.silu(kernels.conv2d(
        kernels.depthwise_conv2d(x_lf, w["mff.lffb.dw3.w"], w["mff.lffb.dw3.b"]),
        w["mff.lffb.pw3.w"], w["mff.lffb.pw3.b"]))
    u2 = kernels.silu(kernels.conv2d(
        kernels.depthwise_conv2d(x_lf, w["mff.lffb.dw5.w"], w["mff.lffb.dw5.b"]),
        w["mff.lffb.pw5.w"], w["mff.lffb.pw5.b"]))
    u = (u1 + u2) * sig_s + x_lf
    return kernels.silu(kernels.conv2d(u, w["mff.lffb.out.w"], w["mff.lffb.out.b"]))


def hffb(hf_ir, hf_vi, weights):
    """High-frequency fusion: edge details are sharpened by subtracting
    average-pooled (blurred) maps from the band sum's 1x1 embedding."""
    w = _W(weights)
    if hf_ir.shape != hf_vi.shape:
        raise ShapeError(f"hffb shape mismatch: {hf_ir.shape} vs {hf_vi.shape}")
    x_hf = kernels.silu(kernels.conv2d(hf_ir + hf_vi, w["mff.hffb.fuse.w"], w["mff.hffb.fuse.b"]))
    x1 = kernels.pool2d(x_hf, "avg", 3)
    x2 = kernels.pool2d(x_hf, "avg", 5)
    s1 = kernels.silu(kernels.conv2d(x_hf - x1, w["mff.hffb.s1.w"], w["mff.hffb.s1.b"]))
    s2 = kernels.silu(kernels.conv2d(x_hf - x2, w["mff.hffb.s2.w"], w["mff.hffb.s2.b"]))
    return kernels.silu(kernels.conv2d(s1 + s2 + x_hf, w["mff.hffb.out.w"], w["mff.hffb.out.b"]))


def mff(f_ir, f_vi, weights):
    """Frequency fusion of two [C, H, W] feature maps.

    Both maps are wavelet-decomposed; the LL pair goes through the
    low-frequency block and each detail pair through one shared
    high-frequency block. Returns the fused bands plus their spatial
    reprojection at the input resolution.
    """
    w = _W(weights)
    if f_ir.shape != f_vi.shape:
        raise ShapeError(f"mff shape mismatch: {f_ir.shape} vs {f_vi.shape}")
    h, wd = f_ir.shape[1:]
    b_ir = wavelet.dwt2(wavelet.pad_to_even(f_ir))
    b_vi = wavelet.dwt2(wavelet.pad_to_even(f_vi))
    ll = lffb(b_ir.ll, b_vi.ll, weights)
    lh = hffb(b_ir.lh, b_vi.lh, weights)
    hl = hffb(b_ir.hl, b_vi.hl, weights)
    hh = hffb(b_ir.hh, b_vi.hh, weights)
    rec = wavelet.idwt2(wavelet.WaveletBands(ll, lh, hl, hh, b_ir.source_shape))
    spatial = kernels.conv2d(rec, w["mff.proj.w"], w["mff.proj.b"], padding=1)[:, :h, :wd]
    return FrequencyContext(ll=ll, lh=lh, hl=hl, hh=hh, spatial=spatial)


def zero_context(c, h, w):
    """Ablation stand-in for a disabled frequency path: all-zero bands and a
    zero spatial reprojection."""
    hb, wb = (h + 1) // 2, (w + 1) // 2
    z = lambda *shape: np.zeros(shape, dtype=DTYPE)
    return FrequencyContext(z(c, hb, wb), z(c, hb, wb), z(c, hb, wb), z(c, hb, wb), z(c, h, w))


def fgg(z_ir, z_vi, ctx, weights):
    """Frequency-driven gate.

    A per-position embedding of the concatenated streams is modulated by a
    single global statistics vector pooled from the fused frequency bands,
    then split into the two per-modality gates.
    """
    w = _W(weights)
    if z_ir.shape != z_vi.shape:
        raise ShapeError(f"fgg stream shape mismatch: {z_ir.shape} vs {z_vi.shape}")
    if not (ctx.ll.shape == ctx.lh.shape == ctx.hl.shape == ctx.hh.shape):
        raise ShapeError("fgg context bands have inconsistent shapes")
    d = z_ir.shape[0]
    z_cat = np.concatenate([z_ir, z_vi], axis=0)
    z_global = kernels.layer_norm(kernels.linear(z_cat, w["fgg.glob.w"], w["fgg.glob.b"]),
                                  w["fgg.globln.g"], w["fgg.globln.b"])
    f_f = np.concatenate([ctx.ll, ctx.lh + ctx.hl + ctx.hh], axis=0)
    z_f = kernels.global_avg_pool(kernels.linear(f_f, w["fgg.fc.w"], w["fgg.fc.b"]))
    z_g = z_f[:, None, None] * z_global + z_global
    g_ir = kernels.silu(kernels.layer_norm(
        kernels.linear(z_g[:d], w["fgg.gate_ir.w"], w["fgg.gate_ir.b"]),
        w["fgg.gateln_ir.g"], w["fgg.gateln_ir.b"]))
    g_vi = kernels.silu(kernels.layer_norm(
        kernels.linear(z_g[d:], w["fgg.gate_vi.w"], w["fgg.gate_vi.b"]),
        w["fgg.gateln_vi.g"], w["fgg.gateln_vi.b"]))
    return g_ir, g_vi


def fgm(f_ir, f_vi, ctx, weights, gated=True):
    """Gated state-space fusion of the two modality feature maps.

    Each stream is projected and split into a scan path and a gate path; the
    scan outputs are mixed under the frequency-driven gates (all-ones when
    gating is disabled) and added back onto the inputs under learned scales.
    """
    w = _W(weights)
    if f_ir.shape != f_vi.shape:
        raise ShapeError(f"fgm shape mismatch: {f_ir.shape} vs {f_vi.shape}")
    streams = {}
    for m, f in (("ir", f_ir), ("vi", f_vi)):
        xn = kernels.layer_norm(f, w[f"fgm.{m}.ln.g"], w[f"fgm.{m}.ln.b"])
        xz = kernels.linear(xn, w[f"fgm.{m}.inproj.w"], w[f"fgm.{m}.inproj.b"])
        d = xz.shape[0] // 2
        x_m, z_m = xz[:d], xz[d:]
        x_m = kernels.silu(kernels.depthwise_conv2d(x_m, w[f"fgm.{m}.dw.w"], w[f"fgm.{m}.dw.b"]))
        h_m = kernels.layer_norm(
            ssm_2d(x_m, tuple(_ssm_params(w, f"fgm.{m}.dir{k}") for k in range(4))),
            w[f"fgm.{m}.hln.g"], w[f"fgm.{m}.hln.b"])
        streams[m] = (h_m, z_m)
    h_ir, z_ir = streams["ir"]
    h_vi, z_vi = streams["vi"]
    if gated:
        g_ir, g_vi = fgg(z_ir, z_vi, ctx, weights)
    else:
        g_ir = g_vi = np.ones_like(h_ir)
    f_h = h_ir * g_ir + h_vi * g_vi
    s1 = _as_f32(w["fgm.s1"]).reshape(())
    s2 = _as_f32(w["fgm.s2"]).reshape(())
    return kernels.linear(f_h, w["fgm.out.w"], w["fgm.out.b"]) + s1 * f_ir + s2 * f_vi


def isfm_forward(pair, weights, cfg):
    """Fuse one modality pair into a [1, H, W] luma image in [0, 1]."""
    ir = _as_f32(pair.ir)
    vi = _as_f32(pair.vi_y)
    if ir.shape != vi.shape:
        raise ShapeError(f"modality shape mismatch: ir {ir.shape} vs vi {vi.shape}")
    if ir.ndim != 3 or ir.shape[0] != 1:
        raise ShapeError(f"expected [1,H,W] inputs, got {ir.shape}")
    for name, m in (("ir", ir), ("vi_y", vi)):
        if m.min() < 0.0 or m.max() > 1.0:
            raise ValueError(f"{name} values must lie in [0,1]")
    w = _W(weights)
    h, wd = ir.shape[1:]
    f_ir = mse_forward(ir, "ir", weights, cfg)
    f_vi = mse_forward(vi, "vi", weights, cfg)
    ctx = mff(f_ir, f_vi, weights) if cfg.enable_mff else zero_context(cfg.channels, h, wd)
    if cfg.enable_fgm:
        f_spa = fgm(f_ir, f_vi, ctx, weights, gated=cfg.enable_fgg)
    else:
        f_spa = f_ir + f_vi
    cat = np.concatenate([f_spa, ctx.spatial], axis=0)
    mid = kernels.silu(kernels.conv2d(cat, w["head.conv1.w"], w["head.conv1.b"], padding=1))
    return kernels.sigmoid(kernels.conv2d(mid, w["head.conv2.w"], w["head.conv2.b"], padding=1))
