"""Reference renderers and numeric checks the fast layers are validated against.

mc_render evaluates the point-light Blinn-Phong model by brute force:

    I(p) = albedo(p) Sum_w l_w max(L_w . n(p), 0) dw
         + s_p Sum_w l_w max(h_w . n(p), 0)^alpha dw,   h_w = (L_w + v)/|L_w + v|

with the view fixed at v = (0, 0, 1). Both dots are clamped at zero for
back-facing directions; the textbook form omits the clamps as shorthand, the
clamped reading is the physically meaningful one and is what the fast layers
approximate. No spherical-harmonic code is involved anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Material, NormalMap, PointLightSet, ShLighting
from .shbasis import eval_sh_basis

VIEW = np.array([0.0, 0.0, 1.0])

_CHUNK = 2048  # light samples per accumulation block; bounds peak memory


@dataclass
class McImage:
    """Separate diffuse and specular sums of a Monte-Carlo render."""

    diffuse: np.ndarray
    specular: np.ndarray

    @property
    def composite(self) -> np.ndarray:
        return self.diffuse + self.specular


def sample_env_to_lights(light: ShLighting, n_samples: int, seed: int) -> PointLightSet:
    """Draw a stratified direction set from an order-2 environment.

    Jittered equal-area stratification: the sphere is cut into ~sqrt(n)
    latitude bands whose heights are proportional to the number of azimuth
    sectors they hold, making every cell's solid angle exactly 4*pi/n; one
    direction is drawn uniformly inside each cell (area-preserving in z).
    Radiance is max(Sum C_j Y_j, 0) times the light color.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    n_bands = max(int(np.sqrt(n_samples)), 1)
    base, extra = divmod(n_samples, n_bands)
    sectors = np.full(n_bands, base)
    sectors[:extra] += 1  # per-band azimuth sector counts, summing to n_samples
    z_edges = -1.0 + 2.0 * np.concatenate([[0], np.cumsum(sectors)]) / n_samples

    z = np.empty(n_samples)
    phi = np.empty(n_samples)
    pos = 0
    for i, m in enumerate(sectors):
        jit_z = rng.uniform(0.0, 1.0, m)
        jit_p = rng.uniform(0.0, 1.0, m)
        z[pos:pos + m] = z_edges[i] + (z_edges[i + 1] - z_edges[i]) * jit_z
        phi[pos:pos + m] = 2.0 * np.pi * (np.arange(m) + jit_p) / m
        pos += m
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    radiance = np.maximum(eval_sh_basis(dirs, check=False) @ light.coeffs, 0.0)
    intensities = radiance[:, None] * light.color
    return PointLightSet(directions=dirs, intensities=intensities,
                         solid_angle=4.0 * np.pi / n_samples)


def mc_render(normals: NormalMap, material: Material, lights: PointLightSet) -> McImage:
    """Brute-force render over an explicit direction set. Deterministic sum."""
    normals.validate()
    if material.albedo.shape[:2] != normals.mask.shape:
        raise ValueError("albedo does not match the normal map")
    mask = normals.mask
    n = normals.normals[mask]  # (K, 3)
    k = n.shape[0]
    alpha = material.shininess
    sp = material.spec_reflectance

    diff = np.zeros((k, 3))
    spec = np.zeros((k, 3))
    for start in range(0, len(lights), _CHUNK):
        d = lights.directions[start:start + _CHUNK]  # (M, 3)
        li = lights.intensities[start:start + _CHUNK]  # (M, 3)
        cos_d = np.maximum(n @ d.T, 0.0)  # (K, M)
        diff += cos_d @ li
        if sp > 0.0:
            h = d + VIEW
            hn = np.linalg.norm(h, axis=-1, keepdims=True)
            # L = -v makes the half vector undefined; that sample contributes nothing.
            ok = hn[:, 0] > 1e-12
            h = np.where(ok[:, None], h / np.where(ok[:, None], hn, 1.0), 0.0)
            cos_h = np.maximum(n @ h.T, 0.0)
            spec += (cos_h**alpha) @ li

    out_d = np.zeros(material.albedo.shape)
    out_s = np.zeros(material.albedo.shape)
    out_d[mask] = diff * lights.solid_angle
    out_d *= material.albedo
    out_s[mask] = sp * spec * lights.solid_angle
    return McImage(diffuse=out_d, specular=out_s)


def finite_diff_gradient(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = float(f(xp)), float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite function value at coordinate {i}")
        g[i] = (fp - fm) / (2.0 * h)
    return g
