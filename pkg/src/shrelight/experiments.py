"""Convergence and loss-robustness experiments on the rank-one descent problem.

convergence_table tracks gradient descent on the low-rank loss against the
closed-form prediction (tail singular values shrink by (1 - 2*eta) per step,
loss by its square). compare_losses reruns a fixed two-singular-value fitting
problem under three losses and a grid of learning rates, classifying each run
as converged or degenerate.

Verdict rules (uniform across losses and rates):
  * degenerate  - some single step raised the loss by more than 1% of the
    initial loss, or the final iterate's norm collapsed below 1% of the
    target's. Any fixed-step method oscillates at amplitude ~lr once it
    reaches its floor, so strict zero-tolerance monotonicity would flag every
    run; the 1% tolerance keeps the flag meaning "training visibly degraded".
  * converged   - not degenerate and the final loss is at most 1% of initial.
  * stalled     - neither.

The low-rank loss contracts the tail spectrum exactly, so the step count it
needs for a 99% drop scales as 1.3/lr; beyond an explicit-step limit the run
is fast-forwarded with the exact closed-form iterate (the same law validated
step-against-formula by convergence_table). Competing losses move the second
singular value by ~lr per step and are always stepped explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lowrank import (
    DegenerateSpectrumError,
    decay_law,
    descent_step,
    lowrank_loss,
    predicted_matrix,
    sigma2_loss,
    sigma2_ratio_loss,
)

LOSS_NAMES = ("lowrank", "sigma2", "sigma2_ratio")
DEFAULT_RATES = (1e-2, 1e-4, 1e-6, 1e-8)
ABLATION_SIGMA2 = 2e-5
ABLATION_SHAPE = (4, 32)
_EXPLICIT_STEP_LIMIT = 50_000
_INCREASE_TOL = 0.01  # fraction of initial loss a step may add before flagging
_COLLAPSE_TOL = 0.01


def convergence_table(r0: np.ndarray, eta: float, n_steps: int) -> list:
    """Rows of step, measured loss/spectrum, and decay-law predictions.

    Valid for any eta; the guarantee (monotone contraction) holds only for
    0 < eta < 0.5, where (1 - 2*eta) lies in (0, 1).
    """
    r = np.array(r0, dtype=np.float64)
    sig0 = np.linalg.svd(r, compute_uv=False)
    loss0 = float(np.sum(sig0[1:] ** 2))
    rows = []
    for step in range(n_steps + 1):
        sig = np.linalg.svd(r, compute_uv=False)
        factor = (1.0 - 2.0 * eta) ** step
        rows.append({
            "step": step,
            "loss": float(np.sum(sig[1:] ** 2)),
            "loss_predicted": loss0 * factor**2,
            "sigma1": float(sig[0]),
            "sigma2": float(sig[1]) if sig.size > 1 else 0.0,
            "sigma2_predicted": float(sig0[1] * factor) if sig.size > 1 else 0.0,
        })
        if step < n_steps:
            r = descent_step(r, eta)
    return rows


def eta_in_guarantee(eta: float) -> bool:
    return 0.0 < eta < 0.5


def ablation_problem(seed: int = 0):
    """Fixed rank-two target: sigma = (1, 2e-5) on random orthonormal frames.

    The tiny second singular value puts the fixed-step oscillation floor of
    the competing losses (amplitude ~lr) on both sides of the 1%-of-initial
    convergence threshold across the standard rate grid.
    """
    rng = np.random.default_rng(seed)
    n, d = ABLATION_SHAPE
    qu, _ = np.linalg.qr(rng.standard_normal((n, n)))
    qv, _ = np.linalg.qr(rng.standard_normal((d, 2)))
    return np.outer(qu[:, 0], qv[:, 0]) + ABLATION_SIGMA2 * np.outer(qu[:, 1], qv[:, 1])


@dataclass
class AblationRun:
    loss_name: str
    lr: float
    steps: int
    loss_initial: float
    loss_final: float
    max_increase: float
    collapse_ratio: float
    degenerate: bool
    converged: bool
    fast_forwarded: bool
    spectrum_error: bool = False

    @property
    def verdict(self) -> str:
        if self.degenerate:
            return "degenerate"
        return "converged" if self.converged else "stalled"


def _loss_fn(name: str):
    if name == "lowrank":
        return lowrank_loss
    if name == "sigma2":
        return sigma2_loss
    if name == "sigma2_ratio":
        return sigma2_ratio_loss
    raise ValueError(f"unknown loss {name!r}")


def run_ablation(loss_name: str, r0: np.ndarray, lr: float) -> AblationRun:
    fn = _loss_fn(loss_name)
    target_norm = float(np.linalg.norm(r0))
    if loss_name == "lowrank":
        budget = math.ceil(1.3 / lr)
        if budget > _EXPLICIT_STEP_LIMIT:
            # Exact fast-forward: descent multiplies every tail singular value
            # by (1 - 2*lr) per step, so loss decays monotonically to the
            # closed-form endpoint.
            sig0 = np.linalg.svd(r0, compute_uv=False)
            loss0 = float(np.sum(sig0[1:] ** 2))
            sig_n = decay_law(sig0, lr, budget)
            loss_n = float(np.sum(sig_n[1:] ** 2))
            final_norm = float(np.linalg.norm(predicted_matrix(r0, lr, budget)))
            return AblationRun(
                loss_name=loss_name, lr=lr, steps=budget,
                loss_initial=loss0, loss_final=loss_n, max_increase=0.0,
                collapse_ratio=final_norm / target_norm,
                degenerate=final_norm < _COLLAPSE_TOL * target_norm,
                converged=loss_n <= _INCREASE_TOL * loss0,
                fast_forwarded=True)
    else:
        budget = math.ceil(2.5 * ABLATION_SIGMA2 / lr) + 50

    r = np.array(r0, dtype=np.float64)
    losses = []
    spectrum_error = False
    steps_done = 0
    for _ in range(budget):
        try:
            value, grad = fn(r)
        except DegenerateSpectrumError:
            spectrum_error = True
            break
        losses.append(value)
        r = r - lr * grad
        steps_done += 1
    if not spectrum_error:
        try:
            value, _ = fn(r)
            losses.append(value)
        except DegenerateSpectrumError:
            spectrum_error = True

    loss0 = losses[0]
    loss_final = losses[-1]
    diffs = np.diff(losses)
    max_increase = float(np.max(diffs)) if diffs.size else 0.0
    final_norm = float(np.linalg.norm(r))
    collapsed = final_norm < _COLLAPSE_TOL * target_norm
    degenerate = spectrum_error or collapsed or max_increase > _INCREASE_TOL * loss0
    return AblationRun(
        loss_name=loss_name, lr=lr, steps=steps_done,
        loss_initial=loss0, loss_final=loss_final, max_increase=max_increase,
        collapse_ratio=final_norm / target_norm,
        degenerate=degenerate,
        converged=(not degenerate) and loss_final <= _INCREASE_TOL * loss0,
        fast_forwarded=False, spectrum_error=spectrum_error)


def compare_losses(rates=DEFAULT_RATES, seed: int = 0) -> list:
    """The full loss-by-rate grid on the fixed ablation problem."""
    r0 = ablation_problem(seed)
    return [run_ablation(name, r0, lr) for name in LOSS_NAMES for lr in rates]
