"""Differentiable image formation: order-2 shading, half-angle specular, composite.

The image model is I = albedo (.) S + H with, per pixel p and channel ch,

    S(p)[ch] = max(color[ch] * Sum_j AHAT_j * coeffs_j * Y_j(n(p)), 0)
    H(p)[ch] = max(color[ch] * s_p * Sum_j coeffs_j * max(AHAT_j * Yhat_j(n(p)), eps)^alpha, 0)

where Y is the order-2 basis, Yhat its half-angle modification (the view is fixed
at (0, 0, 1), so the half-angle dependence collapses into the basis), eps = 1e-8
guards the fractional power, and masked-out pixels are zero.

Gradients are hand-derived closed forms, no autodiff tape: every max gate passes
gradient through iff its argument is strictly positive (above eps for the power
guard), matching central finite differences away from those boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Material, NormalMap, ShLighting
from .shbasis import (
    AHAT_PER_BASIS,
    eval_half_angle_basis,
    eval_half_angle_basis_grad,
    eval_sh_basis,
    eval_sh_basis_grad,
)

# Floor under the half-angle power base; keeps t^alpha and its alpha-derivative finite.
EPS_SPEC = 1e-8


@dataclass
class RenderGradients:
    """Closed-form parameter gradients of a scalar loss through render_composite."""

    coeffs: np.ndarray
    color: np.ndarray
    albedo: np.ndarray
    spec_reflectance: float
    shininess: float
    normals: np.ndarray


def _shading_raw(normals: np.ndarray, mask: np.ndarray, coeffs: np.ndarray,
                 color: np.ndarray, clamp: bool = True) -> np.ndarray:
    """Unchecked shading kernel on raw arrays. (H,W,3), zero outside mask."""
    y = eval_sh_basis(normals, check=False)
    td = y @ (AHAT_PER_BASIS * coeffs)
    s = td[..., None] * color
    if clamp:
        s = np.maximum(s, 0.0)
    s = np.where(mask[..., None], s, 0.0)
    return s


def _specular_raw(normals: np.ndarray, mask: np.ndarray, coeffs: np.ndarray,
                  color: np.ndarray, sp: float, alpha: float,
                  clamp: bool = True) -> np.ndarray:
    """Unchecked specular kernel on raw arrays. (H,W,3), zero outside mask."""
    yh = eval_half_angle_basis(normals, check=False)
    u = np.maximum(AHAT_PER_BASIS * yh, EPS_SPEC)
    ts = (u**alpha) @ coeffs
    h = sp * ts[..., None] * color
    if clamp:
        h = np.maximum(h, 0.0)
    h = np.where(mask[..., None], h, 0.0)
    return h


def _composite_raw(normals: np.ndarray, mask: np.ndarray, albedo: np.ndarray,
                   sp: float, alpha: float, coeffs: np.ndarray,
                   color: np.ndarray) -> np.ndarray:
    """Unchecked composite kernel; the target of the numeric gradient checks."""
    s = _shading_raw(normals, mask, coeffs, color)
    h = _specular_raw(normals, mask, coeffs, color, sp, alpha)
    return albedo * s + h


def render_shading(normals: NormalMap, light: ShLighting, clamp: bool = True) -> np.ndarray:
    """Diffuse shading S: irradiance of the order-2 light, per channel via color.

    Linear in the 9 coefficients when clamp is disabled. Masked-out pixels zero.
    """
    normals.validate()
    return _shading_raw(normals.normals, normals.mask, light.coeffs, light.color, clamp=clamp)


def render_diffuse(normals: NormalMap, material: Material, light: ShLighting,
                   clamp: bool = True) -> np.ndarray:
    """Diffuse layer: albedo (.) shading."""
    s = render_shading(normals, light, clamp=clamp)
    if material.albedo.shape != s.shape:
        raise ValueError(f"albedo shape {material.albedo.shape} does not match normals {s.shape}")
    return material.albedo * s


def render_specular(normals: NormalMap, material: Material, light: ShLighting) -> np.ndarray:
    """Specular layer from the half-angle basis at fixed view (0, 0, 1).

    Requires shininess >= 1 (enforced by Material), scaled by spec_reflectance
    and the illumination color, clamped at zero.
    """
    normals.validate()
    if material.shininess < 1.0:
        raise ValueError(f"shininess must be >= 1, got {material.shininess}")
    return _specular_raw(normals.normals, normals.mask, light.coeffs, light.color,
                         material.spec_reflectance, material.shininess)


def render_composite(normals: NormalMap, material: Material, light: ShLighting) -> np.ndarray:
    """Full image: diffuse plus specular."""
    return render_diffuse(normals, material, light) + render_specular(normals, material, light)


def render_gradients(normals: NormalMap, material: Material, light: ShLighting,
                     upstream: np.ndarray) -> RenderGradients:
    """Backpropagate dL/dI through render_composite to every parameter class.

    upstream: (H, W, 3) per-pixel gradient of a scalar loss in the composite
    image. Returns gradients for the 9 coefficients, the 3 color entries, the
    per-pixel albedo, spec_reflectance, shininess, and the per-pixel normals
    (through the basis polynomials, components treated as free coordinates).
    Clamp gates and masked-out pixels propagate exact zeros.
    """
    normals.validate()
    narr, mask = normals.normals, normals.mask
    coeffs, color = light.coeffs, light.color
    sp, alpha = material.spec_reflectance, material.shininess
    albedo = material.albedo
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != albedo.shape:
        raise ValueError(f"upstream shape {upstream.shape} does not match image {albedo.shape}")

    g = np.where(mask[..., None], upstream, 0.0)

    # Recompute forward intermediates.
    y = eval_sh_basis(narr, check=False)
    td = y @ (AHAT_PER_BASIS * coeffs)
    s_pre = td[..., None] * color
    s = np.where(mask[..., None], np.maximum(s_pre, 0.0), 0.0)

    yh = eval_half_angle_basis(narr, check=False)
    u = np.maximum(AHAT_PER_BASIS * yh, EPS_SPEC)
    p = u**alpha
    ts = p @ coeffs
    h_pre = sp * ts[..., None] * color

    d_albedo = g * s

    # Diffuse branch: dL/dS gated by the shading clamp.
    ds = g * albedo * (s_pre > 0.0)
    d_color = np.einsum("hwc,hw->c", ds, td)
    dtd = ds @ color
    d_coeffs = (np.einsum("hw,hwj->j", dtd, y)) * AHAT_PER_BASIS
    # dTd/dn = Sum_j ahat_j coeffs_j grad Y_j.
    ygrad = eval_sh_basis_grad(narr)
    dn = dtd[..., None] * np.einsum("hwjc,j->hwc", ygrad, AHAT_PER_BASIS * coeffs)

    # Specular branch: dL/dH gated by the specular clamp.
    dh = g * (h_pre > 0.0)
    d_sp = float(np.einsum("hwc,hw,c->", dh, ts, color))
    d_color += sp * np.einsum("hwc,hw->c", dh, ts)
    dts = sp * (dh @ color)
    d_coeffs += np.einsum("hw,hwj->j", dts, p)
    # d(u^alpha)/dalpha = u^alpha ln u, finite thanks to the eps floor.
    d_alpha = float(np.einsum("hw,hw->", dts, (p * np.log(u)) @ coeffs))
    # d(u^alpha)/dn = alpha u^(alpha-1) ahat_j grad Yhat_j, gated by the eps floor.
    yhgrad = eval_half_angle_basis_grad(narr)
    gate = (AHAT_PER_BASIS * yh) > EPS_SPEC
    w = dts[..., None] * coeffs * alpha * u ** (alpha - 1.0) * gate
    dn += np.einsum("hwj,hwjc->hwc", w * AHAT_PER_BASIS, yhgrad)

    dn = np.where(mask[..., None], dn, 0.0)

    return RenderGradients(coeffs=d_coeffs, color=d_color, albedo=d_albedo,
                           spec_reflectance=d_sp, shininess=d_alpha, normals=dn)
