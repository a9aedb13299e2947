"""HDR panorama projection to SH coefficients, panorama synthesis round trips,
quadrature convergence, and the gamma 2.2 display convention."""

import numpy as np
import pytest

from shrelight import (
    ShLighting,
    gamma_decode,
    gamma_encode,
    panorama_grid,
    project_to_sh,
    synthesize_panorama,
    validate_panorama,
)
from shrelight.shbasis import CONSTANTS
from shrelight.synthetic import fibonacci_directions, random_positive_lighting

FOUR_PI_C0 = 4.0 * np.pi * CONSTANTS.c0


def positive_test_light() -> ShLighting:
    coeffs = np.array([2.0, 0.3, -0.25, 0.2, 0.15, -0.1, 0.12, 0.1, -0.08])
    light = ShLighting(coeffs=coeffs, color=np.ones(3))
    return light


def min_radiance(light: ShLighting) -> float:
    from shrelight.shbasis import eval_sh_basis

    dirs = fibonacci_directions(4096)
    return float(np.min(eval_sh_basis(dirs) @ light.coeffs))


def test_validate_panorama_contract():
    ok = validate_panorama(np.ones((8, 16, 3)))
    assert ok.shape == (8, 16, 3)
    with pytest.raises(ValueError):
        validate_panorama(np.ones((8, 15, 3)))
    with pytest.raises(ValueError):
        validate_panorama(np.ones((8, 16)))
    bad = np.ones((8, 16, 3))
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        validate_panorama(bad)


def test_quadrature_weights_integrate_sphere():
    dirs, weight = panorama_grid(128)
    err128 = abs(float(np.sum(weight)) - 4.0 * np.pi)
    assert err128 < 1e-3
    assert np.allclose(np.linalg.norm(dirs, axis=-1), 1.0, atol=1e-12)
    # the midpoint rule is second order: doubling the grid quarters the error
    _, weight256 = panorama_grid(256)
    err256 = abs(float(np.sum(weight256)) - 4.0 * np.pi)
    assert err256 < 0.3 * err128


def test_constant_panorama_projects_to_dc():
    pano = np.ones((256, 512, 3))
    light = project_to_sh(pano)
    assert light.coeffs[0] == pytest.approx(FOUR_PI_C0, abs=1e-3)
    assert np.max(np.abs(light.coeffs[1:])) < 1e-3
    assert np.allclose(light.color, 1.0, atol=1e-9)


def test_black_panorama_projects_to_zero():
    light = project_to_sh(np.zeros((64, 128, 3)))
    assert np.all(light.coeffs == 0.0)
    assert np.allclose(light.color, 1.0, atol=0.0)


def test_synthesis_projection_round_trip():
    light = positive_test_light()
    assert min_radiance(light) > 0.0  # nothing clamps during synthesis
    pano = synthesize_panorama(light, height=256)
    recovered = project_to_sh(pano)
    assert np.allclose(recovered.coeffs, light.coeffs, atol=1e-3)
    assert np.allclose(recovered.color, 1.0, atol=1e-6)


def test_colored_light_round_trip_preserves_radiance_product():
    base = positive_test_light()
    color = np.array([1.5, 1.0, 0.5])
    light = ShLighting(coeffs=base.coeffs, color=color)
    recovered = project_to_sh(synthesize_panorama(light, height=256))
    product = np.outer(light.coeffs, light.color)
    rec_product = np.outer(recovered.coeffs, recovered.color)
    assert np.allclose(rec_product, product, atol=1e-3)


def test_projection_scales_with_radiance():
    rng = np.random.default_rng(0)
    light = random_positive_lighting(rng, color=np.array([0.8, 1.0, 1.3]))
    pano = synthesize_panorama(light, height=64)
    one = project_to_sh(pano)
    two = project_to_sh(2.0 * pano)
    assert np.allclose(two.coeffs, 2.0 * one.coeffs, atol=1e-9)
    assert np.allclose(two.color, one.color, atol=1e-9)


def test_doubling_resolution_shrinks_leakage():
    def off_dc_leak(height: int) -> float:
        light = project_to_sh(np.ones((height, 2 * height, 3)))
        return float(np.max(np.abs(light.coeffs[1:])))

    leak64, leak128 = off_dc_leak(64), off_dc_leak(128)
    assert leak128 <= 0.5 * leak64


def test_gamma_fixed_points_and_value():
    assert gamma_encode(np.array(0.0)) == 0.0
    assert gamma_encode(np.array(1.0)) == 1.0
    assert gamma_decode(np.array(0.0)) == 0.0
    assert gamma_decode(np.array(1.0)) == 1.0
    assert float(gamma_encode(np.array(0.5))) == pytest.approx(0.72974, abs=1e-5)


def test_gamma_round_trip_and_clamping():
    rng = np.random.default_rng(1)
    vals = rng.uniform(0.0, 1.0, (32, 32, 3))
    assert np.allclose(gamma_decode(gamma_encode(vals)), vals, atol=1e-6)
    assert float(gamma_encode(np.array(2.0))) == 1.0
    assert float(gamma_encode(np.array(-0.25))) == 0.0
