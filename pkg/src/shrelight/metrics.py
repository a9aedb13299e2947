"""Evaluation metrics: MSE, scale-invariant MSE, local MSE, DSSIM.

smse applies the single least-squares scale w* = <pred, gt> / <pred, pred>
before the MSE, so it is invariant to a global positive rescale of the
prediction. lmse averages the per-window SMSE over sliding windows (side 20,
stride 10 by default), counting windows with at least half their pixels
masked-in and normalizing by the number of qualifying windows. dssim is
(1 - SSIM)/2 on Rec. 709 grayscale with an 11x11 Gaussian window (sigma 1.5)
and the standard stabilizers, window statistics without sample-covariance
correction.
"""

from __future__ import annotations

import numpy as np

from .envmap import LUM_WEIGHTS


def _masked(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != values.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {values.shape}")
    if not np.any(mask):
        raise ValueError("mask is empty")
    return values[mask]


def mse(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over masked-in pixels and channels."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    diff = _masked(pred - gt, mask)
    return float(np.mean(diff**2))


def optimal_scale(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Least-squares scale w* = <pred, gt> / <pred, pred> on the mask; 0 if pred is zero."""
    p = _masked(pred, mask)
    g = _masked(np.asarray(gt, dtype=np.float64), mask)
    den = float(np.sum(p * p))
    if den == 0.0:
        return 0.0
    return float(np.sum(p * g) / den)


def smse(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Scale-invariant MSE: mse(w* pred, gt) at the least-squares w*."""
    w = optimal_scale(pred, gt, mask)
    return mse(w * np.asarray(pred, dtype=np.float64), gt, mask)


def lmse(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray,
         window: int = 20, stride: int = 10) -> float:
    """Local scale-invariant MSE: mean per-window SMSE over qualifying windows.

    A window qualifies when at least half of its pixels are masked-in. Raises
    if the image is smaller than one window or no window qualifies.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if h < window or w < window:
        raise ValueError(f"image {h}x{w} is smaller than one {window}x{window} window")
    half = 0.5 * window * window
    total = 0.0
    count = 0
    for i in range(0, h - window + 1, stride):
        for j in range(0, w - window + 1, stride):
            m = mask[i:i + window, j:j + window]
            if np.count_nonzero(m) >= half:
                total += smse(pred[i:i + window, j:j + window],
                              gt[i:i + window, j:j + window], m)
                count += 1
    if count == 0:
        raise ValueError("no window has at least half its pixels masked-in")
    return total / count


def _gaussian_kernel(sigma: float = 1.5, truncate: float = 3.5) -> np.ndarray:
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    return np.outer(k, k)


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Valid-mode weighted local means; windows never touch the border, which is
    # exactly the interior a crop-by-radius SSIM evaluates.
    win = np.lib.stride_tricks.sliding_window_view(img, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(x: np.ndarray, y: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM of two grayscale images, Gaussian-weighted 11x11 windows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError("ssim expects two grayscale images of equal shape")
    kernel = _gaussian_kernel()
    if x.shape[0] < kernel.shape[0] or x.shape[1] < kernel.shape[1]:
        raise ValueError(f"image smaller than the {kernel.shape[0]}x{kernel.shape[1]} window")
    ux = _windowed_mean(x, kernel)
    uy = _windowed_mean(y, kernel)
    uxx = _windowed_mean(x * x, kernel)
    uyy = _windowed_mean(y * y, kernel)
    uxy = _windowed_mean(x * y, kernel)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    s = ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return float(np.mean(s))


def to_grayscale(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[-1] == 3:
        return img @ LUM_WEIGHTS
    if img.ndim == 2:
        return img
    raise ValueError(f"expected (H, W) or (H, W, 3), got {img.shape}")


def dssim(pred: np.ndarray, gt: np.ndarray, data_range: float = 1.0) -> float:
    """Structural dissimilarity (1 - SSIM)/2 on grayscale. 0 iff identical."""
    return (1.0 - ssim(to_grayscale(pred), to_grayscale(gt), data_range=data_range)) / 2.0
