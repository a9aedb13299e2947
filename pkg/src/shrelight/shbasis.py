"""Real spherical-harmonic bases of order 2 and their half-angle modification.

Basis ordering everywhere in this package is
    (0,0), (1,-1), (1,0), (1,1), (2,-2), (2,-1), (2,0), (2,1), (2,2)
with Cartesian polynomials in a unit direction n = (x, y, z):

    Y_00 = c0            Y_1-1 = c1*y          Y_10 = c1*z        Y_11 = c1*x
    Y_2-2 = c2*x*y       Y_2-1 = c2*y*z        Y_20 = c3*(3z^2-1)
    Y_21 = c2*x*z        Y_22 = c5*(x^2-y^2)

The half-angle basis substitutes the doubled polar angle, Yhat(theta, phi) =
Y(2*theta, phi), which stays polynomial in (x, y, z):

    Yhat_00 = c0
    Yhat_1-1 = 2*c1*y*z              Yhat_10 = c1*(2z^2-1)      Yhat_11 = 2*c1*x*z
    Yhat_2-2 = 4*c2*x*y*z^2          Yhat_2-1 = c2*(4yz^3-2yz)
    Yhat_20 = c3*(3*(4z^4-4z^2+1)-1) Yhat_21 = c2*(4xz^3-2xz)
    Yhat_22 = c5*(4x^2z^2-4y^2z^2)

AHAT holds the clamped-cosine convolution constants per band; convolving a
distant environment with the clamped cosine scales band l by AHAT[l], so
irradiance is Sum_l AHAT[l] * C_lm * Y_lm(n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C0 = 0.282095
C1 = 0.488603
C2 = 1.092548
C3 = 0.315392
C5 = 0.546274

# Per-band clamped-cosine convolution constants (pi, 2pi/3, pi/4).
AHAT = (np.pi, 2.0 * np.pi / 3.0, np.pi / 4.0)

N_BASES = 9

# Band index l of each of the 9 bases, and AHAT expanded to basis length.
BAND_OF_BASIS = np.array([0, 1, 1, 1, 2, 2, 2, 2, 2])
AHAT_PER_BASIS = np.array([AHAT[l] for l in BAND_OF_BASIS])


@dataclass(frozen=True)
class BasisConstants:
    """The printed basis constants, stored exactly as given."""

    c0: float = C0
    c1: float = C1
    c2: float = C2
    c3: float = C3
    c5: float = C5
    ahat: tuple = AHAT


CONSTANTS = BasisConstants()


def _check_unit(dirs: np.ndarray, atol: float) -> np.ndarray:
    dirs = np.asarray(dirs, dtype=np.float64)
    if dirs.shape[-1] != 3:
        raise ValueError(f"directions must have a trailing axis of 3, got shape {dirs.shape}")
    nrm2 = np.sum(dirs * dirs, axis=-1)
    err = np.abs(nrm2 - 1.0)
    if err.size and float(np.max(err)) > atol:
        raise ValueError(f"non-unit direction: max |n.n - 1| = {float(np.max(err)):.3e} > {atol:.1e}")
    return dirs


def eval_sh_basis(dirs: np.ndarray, check: bool = True, atol: float = 1e-4) -> np.ndarray:
    """Evaluate the 9 order-2 basis polynomials at unit directions.

    dirs: (..., 3) array of unit vectors. Returns (..., 9).
    """
    if check:
        dirs = _check_unit(dirs, atol)
    else:
        dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    out = np.empty(dirs.shape[:-1] + (N_BASES,), dtype=np.float64)
    out[..., 0] = C0
    out[..., 1] = C1 * y
    out[..., 2] = C1 * z
    out[..., 3] = C1 * x
    out[..., 4] = C2 * x * y
    out[..., 5] = C2 * y * z
    out[..., 6] = C3 * (3.0 * z * z - 1.0)
    out[..., 7] = C2 * x * z
    out[..., 8] = C5 * (x * x - y * y)
    return out


def eval_half_angle_basis(dirs: np.ndarray, check: bool = True, atol: float = 1e-4) -> np.ndarray:
    """Evaluate the 9 half-angle-modified basis polynomials at unit directions.

    dirs: (..., 3) array of unit vectors. Returns (..., 9).
    """
    if check:
        dirs = _check_unit(dirs, atol)
    else:
        dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    z2 = z * z
    out = np.empty(dirs.shape[:-1] + (N_BASES,), dtype=np.float64)
    out[..., 0] = C0
    out[..., 1] = 2.0 * C1 * y * z
    out[..., 2] = C1 * (2.0 * z2 - 1.0)
    out[..., 3] = 2.0 * C1 * x * z
    out[..., 4] = 4.0 * C2 * x * y * z2
    out[..., 5] = C2 * (4.0 * y * z2 * z - 2.0 * y * z)
    out[..., 6] = C3 * (3.0 * (4.0 * z2 * z2 - 4.0 * z2 + 1.0) - 1.0)
    out[..., 7] = C2 * (4.0 * x * z2 * z - 2.0 * x * z)
    out[..., 8] = C5 * (4.0 * x * x * z2 - 4.0 * y * y * z2)
    return out


def eval_sh_basis_grad(dirs: np.ndarray) -> np.ndarray:
    """d(basis_j)/d(x,y,z) of eval_sh_basis, as raw polynomial derivatives.

    dirs: (..., 3). Returns (..., 9, 3). No unit check: gradients are defined
    through the polynomials with (x, y, z) treated as free coordinates.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    g = np.zeros(dirs.shape[:-1] + (N_BASES, 3), dtype=np.float64)
    g[..., 1, 1] = C1
    g[..., 2, 2] = C1
    g[..., 3, 0] = C1
    g[..., 4, 0] = C2 * y
    g[..., 4, 1] = C2 * x
    g[..., 5, 1] = C2 * z
    g[..., 5, 2] = C2 * y
    g[..., 6, 2] = 6.0 * C3 * z
    g[..., 7, 0] = C2 * z
    g[..., 7, 2] = C2 * x
    g[..., 8, 0] = 2.0 * C5 * x
    g[..., 8, 1] = -2.0 * C5 * y
    return g


def eval_half_angle_basis_grad(dirs: np.ndarray) -> np.ndarray:
    """d(basis_j)/d(x,y,z) of eval_half_angle_basis. dirs (..., 3) -> (..., 9, 3)."""
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    z2 = z * z
    z3 = z2 * z
    g = np.zeros(dirs.shape[:-1] + (N_BASES, 3), dtype=np.float64)
    g[..., 1, 1] = 2.0 * C1 * z
    g[..., 1, 2] = 2.0 * C1 * y
    g[..., 2, 2] = 4.0 * C1 * z
    g[..., 3, 0] = 2.0 * C1 * z
    g[..., 3, 2] = 2.0 * C1 * x
    g[..., 4, 0] = 4.0 * C2 * y * z2
    g[..., 4, 1] = 4.0 * C2 * x * z2
    g[..., 4, 2] = 8.0 * C2 * x * y * z
    g[..., 5, 1] = C2 * (4.0 * z3 - 2.0 * z)
    g[..., 5, 2] = C2 * (12.0 * y * z2 - 2.0 * y)
    g[..., 6, 2] = C3 * (48.0 * z3 - 24.0 * z)
    g[..., 7, 0] = C2 * (4.0 * z3 - 2.0 * z)
    g[..., 7, 2] = C2 * (12.0 * x * z2 - 2.0 * x)
    g[..., 8, 0] = 8.0 * C5 * x * z2
    g[..., 8, 1] = -8.0 * C5 * y * z2
    g[..., 8, 2] = C5 * (8.0 * x * x * z - 8.0 * y * y * z)
    return g


def double_polar_direction(dirs: np.ndarray) -> np.ndarray:
    """Map a unit direction at polar angle theta to the one at 2*theta, same azimuth.

    Trigonometry-free: (x, y, z) -> (2zx, 2zy, 2z^2 - 1), exactly unit for unit input.
    """
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    return np.stack([2.0 * z * x, 2.0 * z * y, 2.0 * z * z - 1.0], axis=-1)


def double_polar_identity_check(dirs: np.ndarray, atol: float = 1e-6) -> bool:
    """True iff Yhat(n) == Y(doubled-polar n) within atol for every given direction.

    Directions must be unit with z >= 0 (polar angle <= pi/2).
    """
    dirs = _check_unit(dirs, 1e-6)
    hat = eval_half_angle_basis(dirs, check=False)
    doubled = eval_sh_basis(double_polar_direction(dirs), check=False)
    return bool(np.max(np.abs(hat - doubled)) <= atol)
