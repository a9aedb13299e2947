"""Procedural scenes for demos and tests: normal maps, textures, lightings."""

from __future__ import annotations

import numpy as np

from .scene import NormalMap, ShLighting
from .shbasis import C0, N_BASES, eval_sh_basis


def _pixel_grid(size: int):
    # Pixel centers on [-1, 1]: +x right, +y up, row 0 at the top.
    u = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    x = np.tile(u, (size, 1))
    y = np.tile(-u[:, None], (1, size))
    return x, y


def ellipsoid_normal_map(size: int = 64, a: float = 1.0, b: float = 1.0,
                         c: float = 1.0, radius: float = 0.95,
                         rim: float = 0.98) -> NormalMap:
    """Orthographic normals of the +z half of an axis-aligned ellipsoid.

    (a, b, c) are the semi-axes before scaling to the given screen radius;
    rim clips grazing pixels where the silhouette makes normals ill-behaved.
    """
    x, y = _pixel_grid(size)
    u = x / (radius * a)
    v = y / (radius * b)
    r2 = u * u + v * v
    mask = r2 <= rim * rim
    z = np.sqrt(np.maximum(1.0 - np.where(mask, r2, 0.0), 0.0))
    n = np.stack([u / a, v / b, z / c], axis=-1)
    nrm = np.linalg.norm(n, axis=-1, keepdims=True)
    n = np.where(mask[..., None], n / np.where(nrm < 1e-12, 1.0, nrm), 0.0)
    return NormalMap(normals=n, mask=mask)


def sphere_normal_map(size: int = 64, radius: float = 0.95,
                      rim: float = 0.98) -> NormalMap:
    """Orthographic unit-sphere normal map with a silhouette mask."""
    return ellipsoid_normal_map(size=size, a=1.0, b=1.0, c=1.0,
                                radius=radius, rim=rim)


def smooth_texture(shape, seed: int, lo: float = 0.2, hi: float = 0.9,
                   smoothness: float = 6.0) -> np.ndarray:
    """Seeded smooth random texture in [lo, hi] via an FFT low-pass of white noise."""
    rng = np.random.default_rng(seed)
    h, w = shape[0], shape[1]
    channels = 1 if len(shape) == 2 else shape[2]
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    lowpass = np.exp(-0.5 * smoothness**2 * (fx**2 + fy**2) * (h * w) ** 0.5)
    out = np.empty((h, w, channels))
    for ch in range(channels):
        noise = rng.standard_normal((h, w))
        smooth = np.real(np.fft.ifft2(np.fft.fft2(noise) * lowpass))
        lo_s, hi_s = smooth.min(), smooth.max()
        span = hi_s - lo_s if hi_s > lo_s else 1.0
        out[..., ch] = lo + (smooth - lo_s) / span * (hi - lo)
    return out if len(shape) == 3 else out[..., 0]


def fibonacci_directions(n: int) -> np.ndarray:
    """n roughly equal-area unit directions on the golden spiral."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


_POSITIVITY_DIRS = fibonacci_directions(4096)


def random_positive_lighting(rng: np.random.Generator, dc_range=(1.0, 2.0),
                             band_scale: float = 0.35, color=None,
                             floor_frac: float = 0.05) -> ShLighting:
    """A random order-2 lighting whose radiance stays positive everywhere.

    Band-1/2 coefficients are drawn relative to the DC term and shrunk until
    the minimum over a dense direction grid clears floor_frac of the DC level.
    """
    dc = rng.uniform(*dc_range)
    coeffs = np.zeros(N_BASES)
    coeffs[0] = dc
    coeffs[1:] = rng.normal(0.0, band_scale * dc, N_BASES - 1)
    floor = floor_frac * dc * C0
    basis = eval_sh_basis(_POSITIVITY_DIRS, check=False)
    for _ in range(64):
        if float(np.min(basis @ coeffs)) > floor:
            break
        coeffs[1:] *= 0.8
    col = np.ones(3) if color is None else np.asarray(color, dtype=np.float64)
    return ShLighting(coeffs=coeffs, color=col)


def directional_lighting(direction, dc: float = 1.0, strength: float = 1.0,
                         color=None) -> ShLighting:
    """DC plus a band-1 lobe toward the given direction (not clamped positive)."""
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    coeffs = np.zeros(N_BASES)
    coeffs[0] = dc
    # Band-1 coefficients of a lobe peaked at d: proportional to Y_1m(d).
    coeffs[1] = strength * d[1]
    coeffs[2] = strength * d[2]
    coeffs[3] = strength * d[0]
    col = np.ones(3) if color is None else np.asarray(color, dtype=np.float64)
    return ShLighting(coeffs=coeffs, color=col)
