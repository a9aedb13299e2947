"""File I/O: Radiance RGBE panoramas, 8-bit PNGs, normal-map and mask codecs.

PNG radiance images are display-encoded (gamma 2.2) 8-bit RGB; decode on read,
encode on write, all math in between stays linear. Normal maps bypass gamma:
they store n = 2 * (rgb / 255) - 1 and are renormalized on read (masked pixels
only; background encodes as the zero vector, rgb (128, 128, 128)).
"""

from __future__ import annotations

import os

import cv2
import numpy as np

from .scene import NormalMap


def _require(path) -> None:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")


def read_hdr(path) -> np.ndarray:
    """Read a Radiance RGBE .hdr file to linear float RGB."""
    _require(path)
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None or img.ndim != 3:
        raise ValueError(f"could not decode HDR image: {path}")
    return np.asarray(img[:, :, ::-1], dtype=np.float64)


def write_hdr(path, img: np.ndarray) -> None:
    """Write linear float RGB to Radiance RGBE."""
    img = np.asarray(img, dtype=np.float32)
    if img.ndim != 3 or img.shape[-1] != 3:
        raise ValueError(f"HDR image must be (H, W, 3), got {img.shape}")
    if not cv2.imwrite(str(path), img[:, :, ::-1]):
        raise IOError(f"failed to write HDR image: {path}")


def read_png(path) -> np.ndarray:
    """Read an 8-bit PNG to display-space floats in [0, 1]. RGB (H, W, 3)."""
    _require(path)
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise ValueError(f"could not decode PNG image: {path}")
    return np.asarray(img[:, :, ::-1], dtype=np.float64) / 255.0


def write_png(path, display: np.ndarray) -> None:
    """Write display-space floats in [0, 1] to 8-bit RGB PNG."""
    display = np.asarray(display, dtype=np.float64)
    if display.ndim == 2:
        display = np.repeat(display[:, :, None], 3, axis=2)
    if not np.all(np.isfinite(display)):
        raise ValueError("refusing to write non-finite image data")
    data = np.round(np.clip(display, 0.0, 1.0) * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(path), data[:, :, ::-1]):
        raise IOError(f"failed to write PNG image: {path}")


def encode_normals(normal_map: NormalMap) -> np.ndarray:
    """Normals to uint8 RGB via rgb = round((n + 1)/2 * 255); background -> n = 0."""
    n = np.where(normal_map.mask[..., None], normal_map.normals, 0.0)
    return np.round((n + 1.0) * 0.5 * 255.0).astype(np.uint8)


def decode_normals(rgb: np.ndarray) -> NormalMap:
    """uint8 RGB back to a NormalMap. Pixels decoding near the zero vector are
    masked out; the rest are renormalized (and z clamped at 0) so the map
    satisfies the unit/hemisphere invariants despite 8-bit quantization."""
    n = np.asarray(rgb, dtype=np.float64) * (2.0 / 255.0) - 1.0
    nrm = np.linalg.norm(n, axis=-1)
    mask = nrm > 0.5
    n = np.where(mask[..., None], n, 0.0)
    n[..., 2] = np.maximum(n[..., 2], 0.0)
    safe = np.where(mask, np.linalg.norm(n, axis=-1), 1.0)
    n = n / np.where(safe < 1e-12, 1.0, safe)[..., None]
    n = np.where(mask[..., None], n, 0.0)
    return NormalMap(normals=n, mask=mask)


def write_normals_png(path, normal_map: NormalMap) -> None:
    data = encode_normals(normal_map)
    if not cv2.imwrite(str(path), data[:, :, ::-1]):
        raise IOError(f"failed to write normals PNG: {path}")


def read_normals_png(path) -> NormalMap:
    _require(path)
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise ValueError(f"could not decode normals PNG: {path}")
    return decode_normals(img[:, :, ::-1])


def write_mask_png(path, mask: np.ndarray) -> None:
    data = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    if not cv2.imwrite(str(path), data):
        raise IOError(f"failed to write mask PNG: {path}")


def read_mask_png(path) -> np.ndarray:
    _require(path)
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise ValueError(f"could not decode mask PNG: {path}")
    return img >= 128
