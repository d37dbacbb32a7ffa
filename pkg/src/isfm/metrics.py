"""Fusion-quality metric suite plus the average-rank table arithmetic.

Inputs are single-channel images in [0, 1] ([H, W] or [1, H, W]). EN, SF,
AG, MI and Qabf are computed on the 8-bit quantization (round(x*255)) at
the 0-255 scale, so "zero iff the quantized image is constant" holds
exactly; VIF and SCD use the continuous 0-255 signal.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d
from scipy.stats import rankdata

from .kernels import ShapeError, sobel_xy

METRIC_NAMES = ("en", "sf", "ag", "vif", "mi", "qabf", "scd")

# edge-preservation sigmoid constants (Xydeas-Petrovic formulation)
QABF_GAMMA_G = 0.9994
QABF_KAPPA_G = -15.0
QABF_SIGMA_G = 0.5
QABF_GAMMA_A = 0.9879
QABF_KAPPA_A = -22.0
QABF_SIGMA_A = 0.8

VIF_SIGMA_NSQ = 2.0
_EPS = 1e-10


@dataclass
class MetricReport:
    name: str
    en: float
    sf: float
    ag: float
    vif: float
    mi: float
    qabf: float
    scd: float

    def values(self):
        return [getattr(self, m) for m in METRIC_NAMES]


@dataclass
class RankTable:
    methods: list
    metrics: list
    values: np.ndarray    # [n_methods, n_metrics]
    ranks: np.ndarray     # tie-averaged, 1 = best
    avg_rank: np.ndarray  # [n_methods]
    excluded: list


def _gray(img):
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3:
        if a.shape[0] != 1:
            raise ShapeError(f"metrics expect single-channel images, got {a.shape}")
        a = a[0]
    if a.ndim != 2:
        raise ShapeError(f"metrics expect [H,W] or [1,H,W], got {a.shape}")
    return a


def quantize8(img):
    """[0,1] image -> float array of integer levels 0..255."""
    return np.clip(np.floor(_gray(img) * 255.0 + 0.5), 0.0, 255.0)


def entropy(img):
    """Shannon entropy (bits) of the 256-level histogram."""
    q = quantize8(img).astype(np.int64)
    p = np.bincount(q.ravel(), minlength=256) / q.size
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def spatial_frequency(img):
    """sqrt(RF^2 + CF^2) from horizontal/vertical first differences."""
    q = quantize8(img)
    rf2 = np.mean((q[:, 1:] - q[:, :-1]) ** 2)
    cf2 = np.mean((q[1:, :] - q[:-1, :]) ** 2)
    return float(np.sqrt(rf2 + cf2))


def avg_gradient(img):
    """Mean of sqrt((dx^2 + dy^2)/2) over forward differences."""
    q = quantize8(img)
    dx = q[:-1, 1:] - q[:-1, :-1]
    dy = q[1:, :-1] - q[:-1, :-1]
    return float(np.mean(np.sqrt((dx ** 2 + dy ** 2) / 2.0)))


def _mi_pair(x, y):
    joint = np.zeros((256, 256), dtype=np.float64)
    np.add.at(joint, (x.ravel(), y.ravel()), 1.0)
    pxy = joint / x.size
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    nz = pxy > 0
    return float((pxy[nz] * np.log2(pxy[nz] / (px[:, None] * py[None, :])[nz])).sum())


def mutual_information(a, b, f):
    """I(a;f) + I(b;f) from 256-bin joint histograms, in bits."""
    qa = quantize8(a).astype(np.int64)
    qb = quantize8(b).astype(np.int64)
    qf = quantize8(f).astype(np.int64)
    return _mi_pair(qa, qf) + _mi_pair(qb, qf)


def _edge_strength_angle(q):
    # replicate borders (not zero padding): a constant image must carry no
    # edge weight anywhere, borders included
    sx, sy = sobel_xy(q)
    g = np.sqrt(sx ** 2 + sy ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(sx == 0.0, np.pi / 2.0, np.arctan(sy / sx))
    return g, alpha


def _edge_preservation(g_src, a_src, g_f, a_f):
    g_max = np.maximum(g_src, g_f)
    g_min = np.minimum(g_src, g_f)
    gq = np.where(g_max > 0.0, g_min / np.where(g_max > 0.0, g_max, 1.0), 0.0)
    aq = 1.0 - np.abs(a_src - a_f) / (np.pi / 2.0)
    q_g = QABF_GAMMA_G / (1.0 + np.exp(QABF_KAPPA_G * (gq - QABF_SIGMA_G)))
    q_a = QABF_GAMMA_A / (1.0 + np.exp(QABF_KAPPA_A * (aq - QABF_SIGMA_A)))
    return q_g * q_a


def qabf(a, b, f):
    """Edge-based fusion quality in [0, 1], weighted by source edge strength."""
    qa = quantize8(a)
    qb = quantize8(b)
    qf = quantize8(f)
    g_a, al_a = _edge_strength_angle(qa)
    g_b, al_b = _edge_strength_angle(qb)
    g_f, al_f = _edge_strength_angle(qf)
    q_af = _edge_preservation(g_a, al_a, g_f, al_f)
    q_bf = _edge_preservation(g_b, al_b, g_f, al_f)
    denom = (g_a + g_b).sum()
    if denom <= 0.0:
        return 0.0
    return float((q_af * g_a + q_bf * g_b).sum() / denom)


def _vif_single(ref, dist):
    """Pixel-domain multi-scale visual information fidelity of dist vs ref.

    Four scales; the window shrinks and the signal is decimated by 2 between
    scales. Degenerate (zero-variance or too-small) scales contribute
    nothing; an entirely degenerate reference scores 0.
    """
    num = 0.0
    den = 0.0
    for scale in range(1, 5):
        n = 2 ** (4 - scale + 1) + 1
        sd = n / 5.0
        ax = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
        win = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sd * sd))
        win /= win.sum()
        if scale > 1:
            if min(ref.shape) < n:
                break
            ref = convolve2d(ref, np.rot90(win, 2), mode="valid")[::2, ::2]
            dist = convolve2d(dist, np.rot90(win, 2), mode="valid")[::2, ::2]
        if min(ref.shape) < n:
            break
        mu1 = convolve2d(ref, np.rot90(win, 2), mode="valid")
        mu2 = convolve2d(dist, np.rot90(win, 2), mode="valid")
        sigma1_sq = convolve2d(ref * ref, np.rot90(win, 2), mode="valid") - mu1 * mu1
        sigma2_sq = convolve2d(dist * dist, np.rot90(win, 2), mode="valid") - mu2 * mu2
        sigma12 = convolve2d(ref * dist, np.rot90(win, 2), mode="valid") - mu1 * mu2
        sigma1_sq[sigma1_sq < 0.0] = 0.0
        sigma2_sq[sigma2_sq < 0.0] = 0.0
        g = sigma12 / (sigma1_sq + _EPS)
        sv_sq = sigma2_sq - g * sigma12
        g[sigma1_sq < _EPS] = 0.0
        sv_sq[sigma1_sq < _EPS] = sigma2_sq[sigma1_sq < _EPS]
        sigma1_sq[sigma1_sq < _EPS] = 0.0
        g[sigma2_sq < _EPS] = 0.0
        sv_sq[sigma2_sq < _EPS] = 0.0
        sv_sq[g < 0.0] = sigma2_sq[g < 0.0]
        g[g < 0.0] = 0.0
        sv_sq[sv_sq <= _EPS] = _EPS
        num += np.log10(1.0 + g * g * sigma1_sq / (sv_sq + VIF_SIGMA_NSQ)).sum()
        den += np.log10(1.0 + sigma1_sq / VIF_SIGMA_NSQ).sum()
    if den <= 0.0:
        return 0.0
    return num / den


def vif_fusion(a, b, f):
    """Mean of VIF(a -> f) and VIF(b -> f) on the 0-255 scale."""
    fa = _gray(f) * 255.0
    return float((_vif_single(_gray(a) * 255.0, fa)
                  + _vif_single(_gray(b) * 255.0, fa)) / 2.0)


def _corr(x, y):
    xd = x - x.mean()
    yd = y - y.mean()
    denom = np.sqrt((xd ** 2).sum() * (yd ** 2).sum())
    if denom <= 0.0:
        return 0.0
    return float((xd * yd).sum() / denom)


def scd(a, b, f):
    """Sum of the correlations of differences:
    corr(f - b, a) + corr(f - a, b). Zero-variance terms contribute 0."""
    ga, gb, gf = _gray(a), _gray(b), _gray(f)
    if not ga.shape == gb.shape == gf.shape:
        raise ShapeError(f"scd shape mismatch: {ga.shape}, {gb.shape}, {gf.shape}")
    return _corr(gf - gb, ga) + _corr(gf - ga, gb)


def evaluate_pair(a, b, f, name=""):
    """All seven metrics for one (source a, source b, fused) triple."""
    ga, gb, gf = _gray(a), _gray(b), _gray(f)
    if not ga.shape == gb.shape == gf.shape:
        raise ShapeError(f"evaluate_pair shape mismatch: {ga.shape}, {gb.shape}, {gf.shape}")
    return MetricReport(
        name=name,
        en=entropy(gf),
        sf=spatial_frequency(gf),
        ag=avg_gradient(gf),
        vif=vif_fusion(ga, gb, gf),
        mi=mutual_information(ga, gb, gf),
        qabf=qabf(ga, gb, gf),
        scd=scd(ga, gb, gf),
    )


def avg_rank(methods, values, metrics=None, higher_is_better=True):
    """Rank every method per metric (1 = best, ties averaged) and average.

    values: [n_methods, n_metrics]. higher_is_better may be a scalar or a
    per-metric sequence. Methods with any missing (NaN) value are excluded
    with a warning.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != len(methods):
        raise ShapeError(f"values must be [n_methods, n_metrics], got {values.shape}")
    if values.shape[0] < 2:
        raise ValueError("avg_rank needs at least 2 methods")
    n_metrics = values.shape[1]
    metrics = list(metrics) if metrics is not None else [f"m{i}" for i in range(n_metrics)]
    if np.isscalar(higher_is_better):
        higher = [bool(higher_is_better)] * n_metrics
    else:
        higher = list(higher_is_better)
    keep = ~np.isnan(values).any(axis=1)
    excluded = [m for m, k in zip(methods, keep) if not k]
    if excluded:
        warnings.warn(f"avg_rank: excluding methods with missing values: {excluded}")
    kept_methods = [m for m, k in zip(methods, keep) if k]
    vals = values[keep]
    ranks = np.empty_like(vals)
    for j in range(n_metrics):
        col = -vals[:, j] if higher[j] else vals[:, j]
        ranks[:, j] = rankdata(col, method="average")
    return RankTable(methods=kept_methods, metrics=metrics, values=vals,
                     ranks=ranks, avg_rank=ranks.mean(axis=1), excluded=excluded)
