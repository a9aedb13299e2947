"""Rank-one reflectance structure: the low-rank loss, its competitors, descent.

A batch of reflectance rows (one image per row, same pixels in every row) is
rank one exactly when all images share one albedo up to per-image scale. The
primary loss is the squared distance to the best rank-one approximation,

    f(R) = |Rbar - R|_F^2 = Sum_{i>=2} sigma_i^2,   Rbar = sigma_1 u_1 v_1^T,

whose gradient treats Rbar as a constant, grad f = -2 (Rbar - R). Fixed-step
descent R <- R + 2 eta (Rbar - R) then contracts every tail singular value by
(1 - 2 eta) per step while leaving the singular frames and sigma_1 fixed, so

    R_n = U diag(sigma_1, (1-2 eta)^n sigma_2, ...) V^T,
    f(R_n) = (1 - 2 eta)^(2n) f(R_0),

convergent for 0 < eta < 1/2. The sigma_2 and sigma_2/sigma_1 competitor losses
are provided for ablation; both are undefined at a repeated leading singular
value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateSpectrumError(ValueError):
    """Raised when sigma_1 == sigma_2 makes a singular-value gradient undefined."""


@dataclass
class RankOneFactors:
    """Factorization R ~ b c^T with |b| = 1; sigma holds the full spectrum."""

    b: np.ndarray
    c: np.ndarray
    sigma: np.ndarray


def build_reflectance_matrix(images: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Stack masked pixels of N aligned images as rows, channel-interleaved.

    images: (N, H, W, C), mask: (H, W) bool shared by every image.
    Returns (N, K*C) with K masked pixels in scanline order.
    """
    images = np.asarray(images, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if images.ndim != 4:
        raise ValueError(f"images must be (N, H, W, C), got {images.shape}")
    n = images.shape[0]
    if n < 2:
        raise ValueError("need at least two images to build a reflectance matrix")
    if mask.shape != images.shape[1:3]:
        raise ValueError("mask does not match the image grid")
    if not np.any(mask):
        raise ValueError("mask is empty")
    rows = images[:, mask, :].reshape(n, -1)
    if rows.shape[1] < n:
        raise ValueError(f"too few masked entries ({rows.shape[1]}) for {n} rows")
    return rows


def rg_chromaticity(image: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """(R, G) / (R + G + B) per pixel; pixels darker than eps fall back to (1/3, 1/3).

    Scale-invariant: rg(w * I) == rg(I) for any w > 0.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.shape[-1] != 3:
        raise ValueError(f"expected a trailing RGB axis, got shape {image.shape}")
    total = np.sum(image, axis=-1, keepdims=True)
    safe = np.where(total < eps, 1.0, total)
    out = image[..., :2] / safe
    out = np.where(total < eps, 1.0 / 3.0, out)
    return out


def rank_one_approx(r: np.ndarray):
    """Best rank-one approximation and its factors.

    Returns (rbar, RankOneFactors). Sign convention: (u1, v1) are flipped
    jointly so the largest-magnitude entry of u1 is positive, which makes the
    returned factors deterministic (rbar itself is flip-invariant).
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {r.shape}")
    u, s, vt = np.linalg.svd(r, full_matrices=False)
    u1, v1 = u[:, 0], vt[0]
    if u1[np.argmax(np.abs(u1))] < 0.0:
        u1, v1 = -u1, -v1
    rbar = s[0] * np.outer(u1, v1)
    return rbar, RankOneFactors(b=u1, c=s[0] * v1, sigma=s)


def lowrank_loss(r: np.ndarray):
    """Distance to rank one: loss = Sum_{i>=2} sigma_i^2, grad = -2 (Rbar - R).

    The gradient treats Rbar as detached; by the envelope property of the best
    rank-one approximation this equals the true gradient of the loss.
    """
    rbar, factors = rank_one_approx(r)
    loss = float(np.sum(factors.sigma[1:] ** 2))
    grad = -2.0 * (rbar - r)
    return loss, grad


def descent_step(r: np.ndarray, eta: float) -> np.ndarray:
    """One fixed-step descent update R + 2 eta (Rbar - R)."""
    rbar, _ = rank_one_approx(r)
    return r + 2.0 * eta * (rbar - r)


def iterate_to_convergence(r0: np.ndarray, eta: float, n_steps: int):
    """Run n_steps of descent_step. Returns (R_n, losses over steps 0..n)."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    r = np.asarray(r0, dtype=np.float64).copy()
    losses = np.empty(n_steps + 1)
    for k in range(n_steps):
        rbar, factors = rank_one_approx(r)
        losses[k] = float(np.sum(factors.sigma[1:] ** 2))
        r = r + 2.0 * eta * (rbar - r)
    losses[n_steps] = lowrank_loss(r)[0]
    return r, losses


def decay_law(sigma0: np.ndarray, eta: float, n: int) -> np.ndarray:
    """Predicted spectrum after n steps: (sigma_1, (1-2 eta)^n sigma_2, ...)."""
    sigma0 = np.asarray(sigma0, dtype=np.float64)
    out = sigma0 * (1.0 - 2.0 * eta) ** n
    out[0] = sigma0[0]
    return out


def predicted_matrix(r0: np.ndarray, eta: float, n: int) -> np.ndarray:
    """Closed-form iterate U diag(sigma_1, (1-2 eta)^n sigma_2, ...) V^T."""
    r0 = np.asarray(r0, dtype=np.float64)
    u, s, vt = np.linalg.svd(r0, full_matrices=False)
    return (u * decay_law(s, eta, n)) @ vt


def _checked_spectrum(r: np.ndarray, rel_tol: float = 1e-9):
    u, s, vt = np.linalg.svd(np.asarray(r, dtype=np.float64), full_matrices=False)
    if s.size < 2:
        raise ValueError("matrix needs at least two singular values")
    if s[0] - s[1] <= rel_tol * max(s[0], 1e-300):
        raise DegenerateSpectrumError(
            f"sigma_1 = sigma_2 = {s[0]:.6e}: singular-value gradient undefined")
    return u, s, vt


def sigma2_loss(r: np.ndarray):
    """Competitor loss sigma_2 with gradient u_2 v_2^T (outer products are
    sign-flip invariant, so no convention is needed)."""
    u, s, vt = _checked_spectrum(r)
    return float(s[1]), np.outer(u[:, 1], vt[1])


def sigma2_ratio_loss(r: np.ndarray):
    """Competitor loss sigma_2/sigma_1 with its quotient-rule gradient."""
    u, s, vt = _checked_spectrum(r)
    g1 = np.outer(u[:, 0], vt[0])
    g2 = np.outer(u[:, 1], vt[1])
    return float(s[1] / s[0]), (s[0] * g2 - s[1] * g1) / s[0] ** 2
