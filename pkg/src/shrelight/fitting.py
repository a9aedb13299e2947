"""Desk-scale inverse rendering: specular detection/separation, diffuse fitting
with the rank-one reflectance loss, specular parameter recovery, relighting.

fit_diffuse minimizes, over the N per-image lightings (12 numbers each),

    Sum_i | Abar_i (.) S(C_i, n) - I_i |^2  +  lam * lowrank_loss(rows I_i / S(C_i, n))

where the ratio rows form the reflectance matrix (pixels whose shading falls
under a 1e-4 floor are excluded) and Abar_i is row i of the current rank-one
approximation, gradient detached like the loss's own Rbar. The returned albedo
is the leading singular row reshaped (never a per-image mean or median); the
per-image rank-one scales are folded into the returned lights so relighting
with a fitted light reproduces its input image within the fit residual.

All loops are plain gradient descent with backtracking line search (halve on
increase, grow on success), deterministic, iteration-capped; accepted-loss
trajectories are non-increasing by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lowrank import rank_one_approx, rg_chromaticity
from .render import _specular_raw, render_shading
from .scene import AlignedBatch, Material, NormalMap, ShLighting
from .shbasis import AHAT_PER_BASIS, N_BASES, eval_half_angle_basis, eval_sh_basis

RATIO_FLOOR = 1e-4  # shading below this is excluded from reflectance ratios
CHROMA_EPS = 1e-6

_MAX_HALVINGS = 60


@dataclass
class FitOptions:
    lam: float = 1.0
    max_iters: int = 2000
    tol: float = 1e-10
    step0: float = 1.0
    seed: int = 0


@dataclass
class FitState:
    """Everything needed to relight: per-image lights, shared albedo, normals,
    and optional specular material parameters."""

    lights: list
    albedo: np.ndarray
    normals: NormalMap
    spec_reflectance: "float | None" = None
    shininess: "float | None" = None
    history: list = field(default_factory=list, repr=False)

    def save(self, path) -> None:
        obj = {
            "lights": [{"coeffs": l.coeffs.tolist(), "color": l.color.tolist()}
                       for l in self.lights],
            "albedo": _pack_array(self.albedo),
            "normals": _pack_array(self.normals.normals),
            "mask": _pack_array(self.normals.mask.astype(np.uint8)),
            "spec_reflectance": self.spec_reflectance,
            "shininess": self.shininess,
        }
        with open(path, "w") as f:
            json.dump(obj, f)

    @classmethod
    def load(cls, path) -> "FitState":
        with open(path) as f:
            obj = json.load(f)
        normals = NormalMap(normals=_unpack_array(obj["normals"]),
                            mask=_unpack_array(obj["mask"]).astype(bool))
        lights = [ShLighting(coeffs=np.array(l["coeffs"]), color=np.array(l["color"]))
                  for l in obj["lights"]]
        return cls(lights=lights, albedo=_unpack_array(obj["albedo"]), normals=normals,
                   spec_reflectance=obj.get("spec_reflectance"),
                   shininess=obj.get("shininess"))


def _pack_array(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.asarray(a, dtype=np.float64).ravel().tolist()}


def _unpack_array(obj: dict) -> np.ndarray:
    return np.array(obj["data"], dtype=np.float64).reshape(obj["shape"])


def detect_specular(display_image: np.ndarray, mask: np.ndarray,
                    threshold: float = 0.05, saturation: float = 0.95) -> bool:
    """True iff the fraction of masked-in pixels saturated in every channel
    (display range, post gamma) strictly exceeds the threshold."""
    display_image = np.asarray(display_image, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not np.any(mask):
        raise ValueError("mask is empty")
    saturated = np.all(display_image >= saturation, axis=-1)
    frac = float(np.count_nonzero(saturated & mask)) / float(np.count_nonzero(mask))
    return frac > threshold


@dataclass
class SeparationOptions:
    max_iters: int = 500
    tol: float = 1e-9
    step0: float = 1.0
    saturation_linear: float = 0.95**2.2  # display 0.95 in linear radiance
    rounds: int = 3


@dataclass
class SeparationResult:
    diffuse: np.ndarray
    highlight: np.ndarray
    converged: bool
    iterations: int
    history: list = field(repr=False, default_factory=list)


def separate_specular(batch: AlignedBatch, options: "SeparationOptions | None" = None) -> SeparationResult:
    """Split each image into diffuse plus a white highlight layer.

    The highlight is a per-pixel scalar along the (white) illumination color,
    bounded by 0 <= H <= I. Initialization combines the dichromatic
    min-channel bootstrap H0 = max(I - 3 * min_channel, 0) with a saturation
    excess term (saturated pixels minus the darkest min-channel the pixel
    shows anywhere in the batch), because white highlights are invisible to
    chromaticity alone. Refinement descends the rank-one loss of the
    rg-chromaticity rows of I - H, which is zero exactly when removing the
    highlights leaves every image the same Lambertian chromaticity.

    That loss is flat along per-pixel shading leaks (g and g + t * shading
    produce equally consistent chromaticity), so after the first descent the
    leak is removed by pinning each pixel's smallest highlight-to-diffuse
    ratio across the batch to zero, and a second descent re-converges.
    """
    options = options or SeparationOptions()
    mask = batch.mask
    if not np.any(mask):
        raise ValueError("mask is empty")
    im = batch.images[:, mask, :]  # (N, K, 3)
    n_img, k = im.shape[:2]
    gmax = np.min(im, axis=-1)  # (N, K); keeps I - g * 1 >= 0

    h0 = np.maximum(im - 3.0 * gmax[..., None], 0.0)
    g = np.mean(h0, axis=-1)
    saturated = np.all(im >= options.saturation_linear, axis=-1)
    g = g + saturated * np.maximum(gmax - np.min(gmax, axis=0), 0.0)
    g = np.clip(g, 0.0, gmax)

    def objective(gv, need_grad):
        d = im - gv[..., None]
        chrom = rg_chromaticity(d, eps=CHROMA_EPS)  # (N, K, 2)
        rows = chrom.reshape(n_img, 2 * k)
        rbar, factors = rank_one_approx(rows)
        loss = float(np.sum(factors.sigma[1:] ** 2))
        if not need_grad:
            return loss, None
        grad_rows = -2.0 * (rbar - rows)
        gr = grad_rows.reshape(n_img, k, 2)
        total = np.sum(d, axis=-1)
        live = total >= CHROMA_EPS  # fallback pixels hold constant chromaticity
        t2 = np.where(live, total, 1.0) ** 2
        dr_dg = np.where(live, (3.0 * d[..., 0] - total) / t2, 0.0)
        dg_dg = np.where(live, (3.0 * d[..., 1] - total) / t2, 0.0)
        return loss, gr[..., 0] * dr_dg + gr[..., 1] * dg_dg

    loss_floor = 1e-15 * max(objective(g, False)[0], 1e-30)

    def descend(gv, max_iters):
        loss, grad = objective(gv, True)
        losses = [loss]
        step = options.step0 / max(1.0, float(np.linalg.norm(grad)))
        done = loss <= loss_floor
        small = 0
        it = 0
        while not done and it < max_iters:
            it += 1
            accepted = False
            for _ in range(_MAX_HALVINGS):
                cand = np.clip(gv - step * grad, 0.0, gmax)
                cand_loss, cand_grad = objective(cand, True)
                if cand_loss <= loss:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                done = True
                break
            improvement = loss - cand_loss
            gv, loss, grad = cand, cand_loss, cand_grad
            losses.append(loss)
            step *= 1.3
            if loss <= loss_floor:
                done = True
            elif improvement <= options.tol * max(loss, 1e-30):
                small += 1
                if small >= 3:
                    done = True
            else:
                small = 0
        return gv, losses, done, it

    def remove_leak(gv):
        diffuse_level = np.maximum(np.mean(im, axis=-1) - gv, 1e-6)
        ratio = np.min(gv / diffuse_level, axis=0)
        return np.clip(gv - ratio * diffuse_level, 0.0, gmax)

    iters_total = 0
    for _ in range(max(options.rounds - 1, 0)):
        g, _, _, used = descend(g, options.max_iters)
        g = remove_leak(g)
        iters_total += used
    g, history, converged, it2 = descend(g, options.max_iters)

    highlight = np.zeros_like(batch.images)
    highlight[:, mask, :] = g[..., None] * np.ones(3)
    return SeparationResult(diffuse=batch.images - highlight, highlight=highlight,
                            converged=converged, iterations=iters_total + it2,
                            history=history)


def fit_diffuse(batch: AlignedBatch, options: "FitOptions | None" = None) -> FitState:
    """Recover per-image order-2 lightings and one shared albedo from N >= 2
    aligned diffuse images with known normals."""
    options = options or FitOptions()
    if len(batch) < 2:
        raise ValueError("fit_diffuse needs at least two images")
    if batch.normals is None:
        raise ValueError("fit_diffuse needs normals")
    batch.normals.validate()
    if np.any(batch.images < 0.0):
        raise ValueError("batch radiance must be nonnegative")

    mask = batch.mask & batch.normals.mask
    if not np.any(mask):
        raise ValueError("empty intersection of batch mask and normal mask")
    ym = eval_sh_basis(batch.normals.normals[mask], check=False)  # (K, 9)
    im = batch.images[:, mask, :]  # (N, K, 3)
    n_img, k = im.shape[:2]
    lam = options.lam

    def forward(theta):
        coeffs = theta[:, :N_BASES]
        color = theta[:, N_BASES:]
        td = ym @ (AHAT_PER_BASIS[:, None] * coeffs.T)  # (K, N)
        s_pre = td.T[..., None] * color[:, None, :]  # (N, K, 3)
        s = np.maximum(s_pre, 0.0)
        valid = np.all(s >= RATIO_FLOOR, axis=(0, 2))  # (K,)
        return td, s_pre, s, valid

    def objective(theta, need_grad):
        td, s_pre, s, valid = forward(theta)
        kv = int(np.count_nonzero(valid))
        if 3 * kv < n_img:
            return np.inf, None
        sv = s[:, valid, :]
        iv = im[:, valid, :]
        rows = (iv / sv).reshape(n_img, 3 * kv)
        rbar, factors = rank_one_approx(rows)
        loss_lr = float(np.sum(factors.sigma[1:] ** 2))
        abar = rbar.reshape(n_img, kv, 3)
        res = abar * sv - iv
        total = float(np.sum(res**2)) + lam * loss_lr
        if not need_grad:
            return total, None
        grad_rows = -2.0 * (rbar - rows)  # detached rank-one target
        ds_v = 2.0 * res * abar + lam * grad_rows.reshape(n_img, kv, 3) * (-iv / sv**2)
        ds = np.zeros_like(s)
        ds[:, valid, :] = ds_v
        ds *= s_pre > 0.0
        color = theta[:, N_BASES:]
        d_color = np.einsum("nkc,kn->nc", ds, td)
        dtd = np.einsum("nkc,nc->nk", ds, color)
        d_coeffs = np.einsum("nk,kj->nj", dtd, ym) * AHAT_PER_BASIS
        return total, np.concatenate([d_coeffs, d_color], axis=1)

    # DC-only init matched to each image's mean level, white color.
    theta = np.zeros((n_img, 12))
    dc_shading = float(AHAT_PER_BASIS[0] * ym[0, 0])  # pi * c0, constant over pixels
    theta[:, 0] = np.mean(im, axis=(1, 2)) / dc_shading
    theta[:, N_BASES:] = 1.0

    loss, grad = objective(theta, True)
    history = [loss]
    step = options.step0 / max(1.0, float(np.linalg.norm(grad)))
    small = 0
    for _ in range(options.max_iters):
        accepted = False
        for _ in range(_MAX_HALVINGS):
            cand = theta - step * grad
            cand[:, N_BASES:] = np.maximum(cand[:, N_BASES:], 0.0)
            cand_loss, cand_grad = objective(cand, True)
            if cand_loss <= loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = loss - cand_loss
        theta, loss, grad = cand, cand_loss, cand_grad
        history.append(loss)
        step *= 1.3
        if improvement <= options.tol * max(loss, 1e-30):
            small += 1
            if small >= 5:
                break
        else:
            small = 0

    # Factor the final reflectance matrix; the leading singular row is the albedo.
    _, s_pre, s, valid = forward(theta)
    sv = s[:, valid, :]
    rows = (im[:, valid, :] / sv).reshape(n_img, -1)
    _, factors = rank_one_approx(rows)
    b, c = factors.b, factors.c
    b_mean = float(np.mean(b))
    if abs(b_mean) < 1e-12:
        b_mean = 1.0
    albedo = np.zeros(batch.images.shape[1:])
    full_valid = np.zeros_like(mask)
    full_valid[mask] = valid
    albedo[full_valid] = (b_mean * c).reshape(-1, 3)

    lights = [ShLighting(coeffs=theta[i, :N_BASES] * (b[i] / b_mean),
                         color=np.maximum(theta[i, N_BASES:], 0.0))
              for i in range(n_img)]
    return FitState(lights=lights, albedo=albedo, normals=batch.normals,
                    history=history)


def fit_single_image(image: np.ndarray, normals: NormalMap, light: ShLighting) -> FitState:
    """Recover albedo from one image whose lighting is already known.

    With the light given there is no scale ambiguity: albedo is the shading
    ratio I / S wherever shading clears the ratio floor (zero elsewhere)."""
    normals.validate()
    image = np.asarray(image, dtype=np.float64)
    if image.shape[:2] != normals.mask.shape:
        raise ValueError("image does not match the normal map")
    shading = render_shading(normals, light)
    albedo = np.zeros_like(image)
    ok = normals.mask & np.all(shading >= RATIO_FLOOR, axis=-1)
    albedo[ok] = image[ok] / shading[ok]
    return FitState(lights=[light], albedo=albedo, normals=normals)


def fit_specular_params(highlight: np.ndarray, normals: NormalMap, light: ShLighting,
                        max_iters: int = 200) -> tuple:
    """Recover (spec_reflectance, shininess) for a highlight layer under a known
    light by descent on log-parameterized shininess, alpha = 1 + exp(a); the
    model is linear in spec_reflectance, which is solved in closed form at each
    step. An all-zero highlight returns (0.0, 1.0)."""
    normals.validate()
    h = np.asarray(highlight, dtype=np.float64)[normals.mask]  # (K, 3)
    if not np.any(h > 0.0):
        return 0.0, 1.0

    yh = eval_half_angle_basis(normals.normals[normals.mask], check=False)
    u = np.maximum(AHAT_PER_BASIS * yh, 1e-8)
    logu = np.log(u)
    coeffs, color = light.coeffs, light.color

    def base_and_dalpha(alpha):
        p = u**alpha
        ts = p @ coeffs
        pre = ts[:, None] * color
        gate = pre > 0.0
        b = np.maximum(pre, 0.0)
        db = ((p * logu) @ coeffs)[:, None] * color * gate
        return b, db

    def residual_at(alpha, need_grad=False):
        # An overshooting alpha candidate overflows u**alpha; the resulting
        # non-finite residual compares False against the incumbent and the
        # backtracking line search rejects it, so the overflow is harmless.
        with np.errstate(over="ignore", invalid="ignore"):
            b, db = base_and_dalpha(alpha)
            bb = float(np.sum(b * b))
            sp = max(0.0, float(np.sum(b * h)) / bb) if bb > 0.0 else 0.0
            r = sp * b - h
            res = float(np.sum(r * r))
            if not need_grad:
                return res, sp, None
            # Envelope: d res / d alpha at the optimal sp ignores d sp / d alpha.
            return res, sp, 2.0 * sp * float(np.sum(r * db))

    # Deterministic coarse scan initializes a, then backtracking descent.
    a_grid = np.linspace(np.log(0.05), np.log(300.0), 64)
    scans = [residual_at(1.0 + np.exp(a))[0] for a in a_grid]
    a = float(a_grid[int(np.argmin(scans))])

    res, sp, dres = residual_at(1.0 + np.exp(a), need_grad=True)
    step = 1.0 / max(1.0, abs(dres))
    for _ in range(max_iters):
        accepted = False
        grad_a = dres * np.exp(a)
        for _ in range(_MAX_HALVINGS):
            cand = a - step * grad_a
            cand_res, _, _ = residual_at(1.0 + np.exp(cand))
            if cand_res <= res:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = res - cand_res
        a = cand
        res, sp, dres = residual_at(1.0 + np.exp(a), need_grad=True)
        step *= 1.3
        if improvement <= 1e-14 * max(res, 1e-30):
            break
    return float(sp), float(1.0 + np.exp(a))


def relight(state: FitState, new_light: ShLighting,
            spec_reflectance: "float | None" = None,
            shininess: "float | None" = None) -> np.ndarray:
    """Render the fitted object under a new light, optional material override."""
    sp = spec_reflectance if spec_reflectance is not None else (state.spec_reflectance or 0.0)
    alpha = shininess if shininess is not None else (state.shininess or 1.0)
    shading = render_shading(state.normals, new_light)
    out = state.albedo * shading
    if sp > 0.0:
        out = out + _specular_raw(state.normals.normals, state.normals.mask,
                                  new_light.coeffs, new_light.color, sp, alpha)
    return out
