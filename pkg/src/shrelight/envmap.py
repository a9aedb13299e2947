"""Equirectangular panoramas: projection to the 12-number lighting, gamma.

Panoramas are float RGB arrays of shape (H, 2H): rows sweep the polar angle
theta in (0, pi) top-down (+z at the top), columns sweep azimuth phi in
(0, 2 pi). Projection integrates with the midpoint rule at pixel centers,
weighting by sin(theta):

    C_j = Sum_pixels L(pixel) Y_j(dir(pixel)) sin(theta) dtheta dphi.

The 12-number packing projects the Rec. 709 luminance for the 9 intensity
coefficients and divides the per-channel DC by the luminance DC for the color
(falling back to (1, 1, 1) when the luminance DC vanishes).
"""

from __future__ import annotations

import numpy as np

from .scene import ShLighting
from .shbasis import eval_sh_basis

LUM_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])

GAMMA = 2.2


def validate_panorama(pano: np.ndarray) -> np.ndarray:
    pano = np.asarray(pano, dtype=np.float64)
    if pano.ndim != 3 or pano.shape[-1] != 3:
        raise ValueError(f"panorama must be (H, W, 3), got {pano.shape}")
    h, w = pano.shape[:2]
    if w != 2 * h:
        raise ValueError(f"equirectangular panorama needs width = 2 * height, got {w} x {h}")
    if not np.all(np.isfinite(pano)):
        raise ValueError("panorama contains non-finite values")
    return pano


def panorama_grid(height: int):
    """Pixel-center directions (H, 2H, 3) and the midpoint quadrature weights
    sin(theta) dtheta dphi (H, 2H)."""
    width = 2 * height
    dtheta = np.pi / height
    dphi = 2.0 * np.pi / width
    theta = (np.arange(height) + 0.5) * dtheta
    phi = (np.arange(width) + 0.5) * dphi
    st, ct = np.sin(theta), np.cos(theta)
    dirs = np.empty((height, width, 3))
    dirs[..., 0] = st[:, None] * np.cos(phi)
    dirs[..., 1] = st[:, None] * np.sin(phi)
    dirs[..., 2] = ct[:, None] * np.ones_like(phi)
    weights = (st * dtheta * dphi)[:, None] * np.ones(width)
    return dirs, weights


def project_to_sh(pano: np.ndarray) -> ShLighting:
    """Project a linear-radiance panorama onto the 12-number lighting."""
    pano = validate_panorama(pano)
    dirs, w = panorama_grid(pano.shape[0])
    basis = eval_sh_basis(dirs, check=False)  # (H, W, 9)
    lum = pano @ LUM_WEIGHTS
    coeffs = np.einsum("hw,hwj->j", lum * w, basis)
    dc_per_channel = np.einsum("hwc,hw->c", pano, w * basis[..., 0])
    dc_lum = coeffs[0]
    if abs(dc_lum) < 1e-12:
        color = np.ones(3)
    else:
        color = dc_per_channel / dc_lum
    color = np.maximum(color, 0.0)
    return ShLighting(coeffs=coeffs, color=color)


def synthesize_panorama(light: ShLighting, height: int) -> np.ndarray:
    """Render an order-2 environment to an equirectangular panorama,
    radiance max(Sum C_j Y_j, 0) times the light color."""
    dirs, _ = panorama_grid(height)
    radiance = np.maximum(eval_sh_basis(dirs, check=False) @ light.coeffs, 0.0)
    return radiance[..., None] * light.color


def gamma_encode(linear: np.ndarray) -> np.ndarray:
    """Linear [0, 1] to display: clamp then v^(1/2.2)."""
    return np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0) ** (1.0 / GAMMA)


def gamma_decode(display: np.ndarray) -> np.ndarray:
    """Display [0, 1] to linear: v^2.2 (input clamped to the valid range)."""
    return np.clip(np.asarray(display, dtype=np.float64), 0.0, 1.0) ** GAMMA
