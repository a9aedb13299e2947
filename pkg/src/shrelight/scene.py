"""Scene-side domain types: lighting vectors, normal maps, materials, light sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .shbasis import N_BASES


@dataclass
class ShLighting:
    """A distant light as 12 numbers: 9 order-2 intensity coefficients + RGB color.

    coeffs hold the 9 per-basis intensity coefficients (any sign); color holds the
    nonnegative illumination color, applied per channel on top of the coefficients.
    """

    coeffs: np.ndarray
    color: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64).reshape(N_BASES)
        self.color = np.asarray(self.color, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(self.coeffs)) or not np.all(np.isfinite(self.color)):
            raise ValueError("lighting contains non-finite values")
        if np.any(self.color < 0.0):
            raise ValueError(f"illumination color must be nonnegative, got {self.color}")

    def as_vector(self) -> np.ndarray:
        """The 12-number packing: 9 coefficients then 3 color entries."""
        return np.concatenate([self.coeffs, self.color])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "ShLighting":
        vec = np.asarray(vec, dtype=np.float64).reshape(12)
        return cls(coeffs=vec[:N_BASES], color=vec[N_BASES:])

    def scaled(self, w: float) -> "ShLighting":
        """Same light with every coefficient scaled by w (color untouched)."""
        return ShLighting(coeffs=self.coeffs * w, color=self.color.copy())

    def to_json(self) -> str:
        return json.dumps({"coeffs": self.coeffs.tolist(), "color": self.color.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ShLighting":
        obj = json.loads(text)
        if "coeffs" not in obj or "color" not in obj:
            raise ValueError("lighting JSON must carry 'coeffs' and 'color' fields")
        return cls(coeffs=np.array(obj["coeffs"]), color=np.array(obj["color"]))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ShLighting":
        with open(path) as f:
            return cls.from_json(f.read())


@dataclass
class NormalMap:
    """Per-pixel unit normals (H, W, 3) with a boolean validity mask (H, W).

    Masked-in normals must be unit within 1e-4 with z >= 0 (camera-facing
    hemisphere, view along +z). Masked-out pixels carry no constraint.
    """

    normals: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.normals.ndim != 3 or self.normals.shape[-1] != 3:
            raise ValueError(f"normals must be (H, W, 3), got {self.normals.shape}")
        if self.mask.shape != self.normals.shape[:2]:
            raise ValueError(f"mask shape {self.mask.shape} does not match normals {self.normals.shape[:2]}")

    @property
    def height(self) -> int:
        return self.normals.shape[0]

    @property
    def width(self) -> int:
        return self.normals.shape[1]

    def validate(self, atol: float = 1e-4) -> None:
        """Raise unless every masked-in normal is unit within atol with z >= 0."""
        if not np.any(self.mask):
            raise ValueError("normal map mask is empty")
        n = self.normals[self.mask]
        if not np.all(np.isfinite(n)):
            raise ValueError("normal map contains non-finite values")
        err = np.abs(np.sqrt(np.sum(n * n, axis=-1)) - 1.0)
        if float(np.max(err)) > atol:
            raise ValueError(f"masked normals not unit: max ||n| - 1| = {float(np.max(err)):.3e}")
        if float(np.min(n[:, 2])) < -atol:
            raise ValueError("masked normals must face the camera (z >= 0)")


@dataclass
class Material:
    """Per-pixel albedo plus scalar specular reflectance and shininess."""

    albedo: np.ndarray
    spec_reflectance: float = 0.0
    shininess: float = 1.0

    def __post_init__(self):
        self.albedo = np.asarray(self.albedo, dtype=np.float64)
        if self.albedo.ndim != 3 or self.albedo.shape[-1] != 3:
            raise ValueError(f"albedo must be (H, W, 3), got {self.albedo.shape}")
        if np.any(self.albedo < 0.0):
            raise ValueError("albedo must be nonnegative")
        if self.spec_reflectance < 0.0:
            raise ValueError("spec_reflectance must be nonnegative")
        if self.shininess < 1.0:
            raise ValueError(f"shininess must be >= 1, got {self.shininess}")


@dataclass
class AlignedBatch:
    """N registered views of one static object: shared mask and (optionally)
    shared normals, one linear-radiance image per lighting condition."""

    images: np.ndarray
    mask: np.ndarray
    normals: "NormalMap | None" = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.images.ndim != 4 or self.images.shape[-1] != 3:
            raise ValueError(f"images must be (N, H, W, 3), got {self.images.shape}")
        if self.mask.shape != self.images.shape[1:3]:
            raise ValueError("mask does not match the image grid")
        if self.normals is not None and self.normals.mask.shape != self.mask.shape:
            raise ValueError("normals do not match the image grid")
        if not np.all(np.isfinite(self.images)):
            raise ValueError("batch contains non-finite radiance")

    def __len__(self) -> int:
        return self.images.shape[0]


@dataclass
class PointLightSet:
    """Directional samples of an environment: unit directions, RGB intensities,
    and one shared solid-angle quadrature weight per sample."""

    directions: np.ndarray
    intensities: np.ndarray
    solid_angle: float = 1.0

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=np.float64).reshape(-1, 3)
        self.intensities = np.asarray(self.intensities, dtype=np.float64).reshape(-1, 3)
        if self.directions.shape[0] == 0:
            raise ValueError("light set is empty")
        if self.intensities.shape[0] != self.directions.shape[0]:
            raise ValueError("directions and intensities disagree in length")
        nrm2 = np.sum(self.directions**2, axis=-1)
        if float(np.max(np.abs(nrm2 - 1.0))) > 1e-6:
            raise ValueError("light directions must be unit vectors")
        if self.solid_angle < 0.0:
            raise ValueError("solid_angle must be nonnegative")

    def __len__(self) -> int:
        return self.directions.shape[0]
