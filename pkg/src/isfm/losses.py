"""Training-loss terms with analytic gradients w.r.t. the fused image.

All four terms are computed in float64 (the finite-difference verifier
targets 1e-3 relative agreement, which float32 arithmetic cannot support),
and every term returns (value, grad) with grad shaped like the fused input.
L1 subgradients use sign(0) = 0.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import (ShapeError, corr2_replicate, corr2_replicate_adjoint,
                      gaussian_kernel2d, sobel_xy, sobel_xy_adjoint)

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5


@dataclass
class LossWeights:
    """Trade-off factors: total = cont + alpha*int + lam*grad + gamma*ssim."""
    alpha: float = 5.0
    lam: float = 5.0
    gamma: float = 0.5


@dataclass
class LossBreakdown:
    cont: float
    intensity: float
    gradient: float
    ssim: float
    total: float
    d_total: np.ndarray

    def to_dict(self):
        return {"cont": self.cont, "int": self.intensity, "grad": self.gradient,
                "ssim": self.ssim, "total": self.total}


def _prep(*imgs):
    out = []
    shape = None
    for img in imgs:
        a = np.asarray(img, dtype=np.float64)
        if a.ndim == 3:
            if a.shape[0] != 1:
                raise ShapeError(f"losses expect single-channel images, got {a.shape}")
            a = a[0]
        if a.ndim != 2:
            raise ShapeError(f"losses expect [1,H,W] or [H,W], got {a.shape}")
        if shape is None:
            shape = a.shape
        elif a.shape != shape:
            raise ShapeError(f"image shape mismatch: {a.shape} vs {shape}")
        out.append(a)
    return out


def _like_input(grad, ref):
    return grad[None] if np.asarray(ref).ndim == 3 else grad


def loss_cont(f, ir, vi):
    """Mean L1 distance of the fused image to both sources."""
    ff, a, b = _prep(f, ir, vi)
    n = ff.size
    value = (np.abs(ff - a).sum() + np.abs(ff - b).sum()) / n
    grad = (np.sign(ff - a) + np.sign(ff - b)) / n
    return float(value), _like_input(grad, f)


def loss_int(f, ir, vi):
    """Mean L1 distance to the elementwise maximum of the sources."""
    ff, a, b = _prep(f, ir, vi)
    n = ff.size
    m = np.maximum(a, b)
    value = np.abs(ff - m).sum() / n
    grad = np.sign(ff - m) / n
    return float(value), _like_input(grad, f)


def loss_grad(f, ir, vi):
    """Mean L1 distance between the fused Sobel magnitude and the
    elementwise maximum of the source Sobel magnitudes."""
    ff, a, b = _prep(f, ir, vi)
    n = ff.size
    gfx, gfy = sobel_xy(ff)
    vf = np.abs(gfx) + np.abs(gfy)
    gax, gay = sobel_xy(a)
    gbx, gby = sobel_xy(b)
    m = np.maximum(np.abs(gax) + np.abs(gay), np.abs(gbx) + np.abs(gby))
    value = np.abs(vf - m).sum() / n
    r = np.sign(vf - m) / n
    grad = sobel_xy_adjoint(r * np.sign(gfx), r * np.sign(gfy))
    return float(value), _like_input(grad, f)


def _ssim_and_grad(x, y):
    """Mean SSIM of x against reference y and d(mean SSIM)/dx.

    Gaussian window, replicate borders, unit dynamic range. The gradient
    follows the quotient rule through the windowed moments; window
    correlations are self-adjoint up to the replicate-padding fold.
    """
    win = gaussian_kernel2d(SSIM_SIGMA, SSIM_RADIUS).astype(np.float64)
    blur = lambda m: corr2_replicate(m, win)
    blur_t = lambda m: corr2_replicate_adjoint(m, win)
    mu_x = blur(x)
    mu_y = blur(y)
    s_xx = blur(x * x) - mu_x ** 2
    s_yy = blur(y * y) - mu_y ** 2
    s_xy = blur(x * y) - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + SSIM_C1
    a2 = 2.0 * s_xy + SSIM_C2
    b1 = mu_x ** 2 + mu_y ** 2 + SSIM_C1
    b2 = s_xx + s_yy + SSIM_C2
    s = (a1 * a2) / (b1 * b2)
    n = x.size
    # partials of mean(s) w.r.t. the windowed moments, per pixel
    g_mu = (2.0 * mu_y * a2 / (b1 * b2) - 2.0 * mu_x * s / b1) / n
    g_sxx = -(s / b2) / n
    g_sxy = (2.0 * a1 / (b1 * b2)) / n
    grad = (blur_t(g_mu - 2.0 * mu_x * g_sxx - mu_y * g_sxy)
            + 2.0 * x * blur_t(g_sxx) + y * blur_t(g_sxy))
    return float(s.mean()), grad


def ssim_index(x, y):
    """Mean structural similarity of two [0,1] images; always in [-1, 1]."""
    a, b = _prep(x, y)
    return _ssim_and_grad(a, b)[0]


def loss_ssim(f, ir, vi):
    """(1 - SSIM(f, ir))/2 + (1 - SSIM(f, vi))/2.

    Each half lies in [0, 1]; the sum can exceed 1 for pathological
    (anti-correlated) triples, though not for plausible fusion outputs.
    """
    ff, a, b = _prep(f, ir, vi)
    s1, g1 = _ssim_and_grad(ff, a)
    s2, g2 = _ssim_and_grad(ff, b)
    value = (1.0 - s1) / 2.0 + (1.0 - s2) / 2.0
    grad = -(g1 + g2) / 2.0
    return float(value), _like_input(grad, f)


def loss_total(f, ir, vi, weights=None):
    """Weighted sum of the four terms, with the accumulated gradient."""
    w = weights or LossWeights()
    c, gc = loss_cont(f, ir, vi)
    i, gi = loss_int(f, ir, vi)
    g, gg = loss_grad(f, ir, vi)
    s, gs = loss_ssim(f, ir, vi)
    total = c + w.alpha * i + w.lam * g + w.gamma * s
    d_total = gc + w.alpha * gi + w.lam * gg + w.gamma * gs
    return LossBreakdown(cont=c, intensity=i, gradient=g, ssim=s,
                         total=float(total), d_total=d_total)


def fd_check(loss_fn, f, ir, vi, epsilon=1e-4, samples=64, seed=0):
    """Central-difference check of a loss gradient at sampled pixels.

    loss_fn(f, ir, vi) must return (value, grad). Returns the maximum
    relative error over the samples, with a 1e-8 absolute floor in the
    denominator.
    """
    if not 1e-5 <= epsilon <= 1e-2:
        raise ValueError(f"epsilon must be in [1e-5, 1e-2], got {epsilon}")
    f = np.asarray(f, dtype=np.float64)
    _, grad = loss_fn(f, ir, vi)
    grad = np.asarray(grad).reshape(f.shape)
    rng = np.random.default_rng(seed)
    flat_idx = rng.choice(f.size, size=min(samples, f.size), replace=False)
    max_rel = 0.0
    for idx in flat_idx:
        pos = np.unravel_index(idx, f.shape)
        fp = f.copy()
        fp[pos] += epsilon
        lp, _ = loss_fn(fp, ir, vi)
        fp[pos] -= 2.0 * epsilon
        lm, _ = loss_fn(fp, ir, vi)
        fd = (lp - lm) / (2.0 * epsilon)
        rel = abs(fd - grad[pos]) / max(abs(fd), abs(grad[pos]), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel
