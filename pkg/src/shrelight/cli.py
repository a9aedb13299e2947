"""Command-line frontend.

Subcommands: shproject | render | relight | fit | convergence | compare-losses.

PNG images are gamma-2.2 display-encoded; every command decodes to linear
radiance on read and encodes on write. Normal maps and masks bypass gamma.
CSV outputs carry a header row. All commands are deterministic given --seed.
Exit code is 0 iff the outputs were written and finite; otherwise a one-line
diagnostic goes to standard error and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .envmap import gamma_decode, gamma_encode, project_to_sh
from .experiments import (
    DEFAULT_RATES,
    compare_losses,
    convergence_table,
    eta_in_guarantee,
)
from .fitting import (
    FitOptions,
    FitState,
    SeparationOptions,
    detect_specular,
    fit_diffuse,
    fit_specular_params,
    relight,
    separate_specular,
)
from .imgio import read_hdr, read_mask_png, read_normals_png, read_png, write_png
from .render import render_composite
from .scene import AlignedBatch, Material, NormalMap, ShLighting


def cmd_shproject(args) -> None:
    pano = read_hdr(args.panorama)
    light = project_to_sh(pano)
    light.save(args.output)


def cmd_render(args) -> None:
    normals = read_normals_png(args.normals)
    albedo = gamma_decode(read_png(args.albedo))
    light = ShLighting.load(args.light)
    material = Material(albedo=albedo, spec_reflectance=args.sp, shininess=args.alpha)
    image = render_composite(normals, material, light)
    write_png(args.output, gamma_encode(image))


def cmd_relight(args) -> None:
    state = FitState.load(args.state)
    light = ShLighting.load(args.light)
    image = relight(state, light, spec_reflectance=args.sp, shininess=args.alpha)
    write_png(args.output, gamma_encode(image))


def cmd_fit(args) -> None:
    exclude = {Path(args.mask).resolve(), Path(args.normals).resolve()}
    paths = [p for p in sorted(Path(args.images_dir).glob("*.png"))
             if p.resolve() not in exclude]
    if len(paths) < 2:
        raise ValueError("need at least 2 aligned images")
    display = np.stack([read_png(p) for p in paths])
    normals = read_normals_png(args.normals)
    mask = read_mask_png(args.mask) & normals.mask
    normals = NormalMap(normals=normals.normals, mask=mask)

    votes = sum(detect_specular(d, mask, args.threshold, args.saturation)
                for d in display)
    has_specular = 2 * votes > len(paths)

    linear = gamma_decode(display)
    batch = AlignedBatch(images=linear, mask=mask, normals=normals)
    highlights = None
    if has_specular:
        sep = separate_specular(batch, SeparationOptions(max_iters=args.sep_iters))
        highlights = sep.highlight
        batch = AlignedBatch(images=np.maximum(sep.diffuse, 0.0), mask=mask,
                             normals=normals)

    state = fit_diffuse(batch, FitOptions(lam=args.lam, max_iters=args.iters,
                                          seed=args.seed))

    if has_specular:
        # Per-image specular fits, pooled by highlight energy.
        fits = []
        for i, light in enumerate(state.lights):
            energy = float(np.sum(highlights[i][mask] ** 2))
            if energy > 0.0:
                sp, alpha = fit_specular_params(highlights[i], normals, light)
                fits.append((energy, sp, alpha))
        if fits:
            total = sum(f[0] for f in fits)
            state.spec_reflectance = sum(w * sp for w, sp, _ in fits) / total
            state.shininess = sum(w * a for w, _, a in fits) / total
    state.save(args.output)


def _parse_shape(text: str):
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"shape must look like 4x32, got {text!r}")
    n, d = int(parts[0]), int(parts[1])
    if n < 2 or d < n:
        raise ValueError("shape needs at least 2 rows and no fewer columns than rows")
    return n, d


def cmd_convergence(args) -> None:
    n, d = _parse_shape(args.shape)
    if not eta_in_guarantee(args.eta):
        print(f"warning: eta={args.eta} outside (0, 0.5); contraction is not "
              "guaranteed and the tabulated predictions use the signed factor",
              file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    r0 = rng.standard_normal((n, d))
    rows = convergence_table(r0, args.eta, args.steps)
    fields = ["step", "loss", "loss_predicted", "sigma1", "sigma2", "sigma2_predicted"]
    _write_csv(args.output, fields, [[row[f] for f in fields] for row in rows])


def cmd_compare_losses(args) -> None:
    rates = tuple(float(tok) for tok in args.lr.split(","))
    if not rates:
        raise ValueError("empty learning-rate grid")
    runs = compare_losses(rates, seed=args.seed)
    fields = ["loss", "lr", "steps", "loss_initial", "loss_final", "max_increase",
              "collapse_ratio", "fast_forwarded", "verdict"]
    _write_csv(args.output, fields,
               [[r.loss_name, r.lr, r.steps, r.loss_initial, r.loss_final,
                 r.max_increase, r.collapse_ratio, int(r.fast_forwarded),
                 r.verdict] for r in runs])


def _write_csv(path, header, rows) -> None:
    for row in rows:
        for cell in row:
            if isinstance(cell, float) and not np.isfinite(cell):
                raise ValueError(f"non-finite value in output row {row}")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="shrelight",
        description="Spherical-harmonic relighting: projection, rendering, "
                    "inverse fitting, and rank-one convergence experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("shproject",
                        help="project an equirectangular .hdr panorama to order-2 "
                             "SH lighting JSON")
    sp.add_argument("panorama", help="input .hdr (RGBE) panorama, width = 2*height")
    sp.add_argument("output", help="output lighting .json")
    sp.set_defaults(func=cmd_shproject)

    rp = sub.add_parser("render", help="render normals+albedo under a lighting JSON")
    rp.add_argument("normals", help="normal-map .png (RGB-packed, gray background)")
    rp.add_argument("albedo", help="albedo .png (gamma-encoded)")
    rp.add_argument("light", help="lighting .json")
    rp.add_argument("output", help="output .png (gamma-encoded)")
    rp.add_argument("--sp", type=float, default=0.0, help="specular reflectance")
    rp.add_argument("--alpha", type=float, default=16.0, help="shininess exponent")
    rp.set_defaults(func=cmd_render)

    lp = sub.add_parser("relight", help="render a fitted state under a new lighting")
    lp.add_argument("state", help="fit-state .json from the fit subcommand")
    lp.add_argument("light", help="new lighting .json")
    lp.add_argument("output", help="output .png (gamma-encoded)")
    lp.add_argument("--sp", type=float, default=None,
                    help="override fitted specular reflectance")
    lp.add_argument("--alpha", type=float, default=None, help="override fitted shininess")
    lp.set_defaults(func=cmd_relight)

    fp = sub.add_parser("fit", help="fit lights, albedo, and specular parameters "
                                    "to a directory of aligned .png images")
    fp.add_argument("images_dir", help="directory of aligned gamma-encoded .png images")
    fp.add_argument("mask", help="foreground mask .png")
    fp.add_argument("normals", help="normal-map .png")
    fp.add_argument("output", help="output fit-state .json")
    fp.add_argument("--lam", type=float, default=1.0, help="low-rank loss weight")
    fp.add_argument("--iters", type=int, default=2000, help="diffuse fit iteration cap")
    fp.add_argument("--sep-iters", type=int, default=500,
                    help="specular separation iteration cap")
    fp.add_argument("--seed", type=int, default=0, help="random seed")
    fp.add_argument("--threshold", type=float, default=0.05,
                    help="saturated-pixel fraction that triggers specular handling")
    fp.add_argument("--saturation", type=float, default=0.95,
                    help="display level treated as saturated")
    fp.set_defaults(func=cmd_fit)

    cp = sub.add_parser("convergence",
                        help="tabulate rank-one descent against the decay law")
    cp.add_argument("output", help="output .csv")
    cp.add_argument("--eta", type=float, default=0.25, help="step size")
    cp.add_argument("--steps", type=int, default=50, help="number of descent steps")
    cp.add_argument("--shape", default="4x32", help="matrix shape, e.g. 4x32")
    cp.add_argument("--seed", type=int, default=0, help="random seed")
    cp.set_defaults(func=cmd_convergence)

    cl = sub.add_parser("compare-losses",
                        help="rerun the loss-robustness grid and classify each run")
    cl.add_argument("output", help="output .csv")
    cl.add_argument("--lr", default=",".join(f"{r:.0e}" for r in DEFAULT_RATES),
                    help="comma-separated learning rates")
    cl.add_argument("--seed", type=int, default=0, help="random seed")
    cl.set_defaults(func=cmd_compare_losses)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
