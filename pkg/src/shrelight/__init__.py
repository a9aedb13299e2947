"""Differentiable spherical-harmonic relighting with a rank-one reflectance
prior: forward rendering (order-2 SH diffuse + half-angle specular), analytic
gradients, HDR panorama projection, desk-scale inverse fitting, and the
convergence experiments for the low-rank loss."""

from .envmap import (
    GAMMA,
    LUM_WEIGHTS,
    gamma_decode,
    gamma_encode,
    panorama_grid,
    project_to_sh,
    synthesize_panorama,
    validate_panorama,
)
from .experiments import (
    ablation_problem,
    compare_losses,
    convergence_table,
    run_ablation,
)
from .fitting import (
    FitOptions,
    FitState,
    SeparationOptions,
    SeparationResult,
    detect_specular,
    fit_diffuse,
    fit_single_image,
    fit_specular_params,
    relight,
    separate_specular,
)
from .lowrank import (
    DegenerateSpectrumError,
    RankOneFactors,
    build_reflectance_matrix,
    decay_law,
    descent_step,
    iterate_to_convergence,
    lowrank_loss,
    predicted_matrix,
    rank_one_approx,
    rg_chromaticity,
    sigma2_loss,
    sigma2_ratio_loss,
)
from .metrics import dssim, lmse, mse, optimal_scale, smse, ssim, to_grayscale
from .reference import finite_diff_gradient, mc_render, sample_env_to_lights
from .render import (
    RenderGradients,
    render_composite,
    render_diffuse,
    render_gradients,
    render_shading,
    render_specular,
)
from .scene import AlignedBatch, Material, NormalMap, PointLightSet, ShLighting
from .shbasis import (
    AHAT,
    AHAT_PER_BASIS,
    N_BASES,
    double_polar_direction,
    eval_half_angle_basis,
    eval_half_angle_basis_grad,
    eval_sh_basis,
    eval_sh_basis_grad,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
