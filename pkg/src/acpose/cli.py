"""Command-line interface.

Exit codes: 0 on success, 1 on a domain or input-file error, 2 on usage
errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .errors import PoseError
from .geometry import lift
from .io import (
    load_correspondences,
    load_depth_map,
    load_intrinsics,
    records_from_scene,
    save_correspondences,
    save_intrinsics,
)
from .ransac import RansacConfig, ransac_1ac_d, required_iterations
from .solvers import SolverVariant, solve
from .synthetic import NoiseConfig, SceneConfig, add_noise, contaminate, generate_correspondences

logger = logging.getLogger("acpose")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _solver_list(text):
    try:
        return [SolverVariant(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown solver in {text!r}")


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _dump(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _load_inputs(args):
    records = load_correspondences(args.corr)
    cam1 = load_intrinsics(args.intrinsics)
    cam2 = load_intrinsics(args.intrinsics2) if args.intrinsics2 else cam1
    d1 = load_depth_map(args.depth1) if args.depth1 else None
    d2 = load_depth_map(args.depth2) if args.depth2 else None
    matches = [r.to_match(d1, d2) for r in records]
    return matches, (cam1, cam2)


def cmd_solve(args):
    matches, (cam1, cam2) = _load_inputs(args)
    if not 0 <= args.index < len(matches):
        raise PoseError(f"index {args.index} out of range for {len(matches)} correspondences")
    m = matches[args.index]
    pose = solve(lift(m.corr, m.depth1, m.depth2, cam1, cam2), args.solver)
    _emit(_dump({"solver": args.solver.value, "index": args.index, "pose": pose.to_dict()}), args.out)


def cmd_lift(args):
    matches, (cam1, cam2) = _load_inputs(args)
    out = []
    for i, m in enumerate(matches):
        lc = lift(m.corr, m.depth1, m.depth2, cam1, cam2)
        out.append({"index": i, "a": lc.a.tolist(), "b": lc.b.tolist(), "A": lc.A.tolist(), "B": lc.B.tolist()})
    _emit(_dump(out), args.out)


def cmd_ransac(args):
    matches, cams = _load_inputs(args)
    config = RansacConfig(
        confidence=args.confidence, threshold_fraction=args.threshold_fraction,
        max_iterations=args.max_iterations, min_inliers_for_lo=args.min_inliers_lo,
        seed=args.seed, solver=args.solver,
    )
    start = time.perf_counter()
    result = ransac_1ac_d(matches, cams, config)
    elapsed = time.perf_counter() - start
    doc = result.to_dict()
    doc["config"] = {"confidence": config.confidence, "threshold_fraction": config.threshold_fraction,
                     "max_iterations": config.max_iterations, "min_inliers_for_lo": config.min_inliers_for_lo,
                     "seed": config.seed, "solver": config.solver.value}
    if args.timing:
        doc["seconds"] = elapsed
    _emit(_dump(doc), args.out)


def cmd_theory_iters(args):
    header = ["sample_size"] + [f"{r:g}" for r in args.inlier_ratios]
    rows = [[str(m)] + [str(required_iterations(args.confidence, r, m)) for r in args.inlier_ratios]
            for m in args.sample_sizes]
    if args.out:
        Path(args.out).write_text("\n".join(",".join(r) for r in [header] + rows) + "\n", encoding="utf-8")
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = [f"# confidence {args.confidence:g}; columns are inlier ratios"]
    for r in [header] + rows:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    sys.stdout.write("\n".join(lines) + "\n")


def cmd_bench(args):
    if args.study == "stability":
        table = bench.run_stability_study(args.n, args.solvers, out=args.out, seed=args.seed,
                                          threads=args.threads)
        report = {"failures": table["failures"],
                  "fraction_rotation_below_1e-6": {
                      s: v["rotation_deg"].get("fraction_below_1e-6") for s, v in table["summary"].items()}}
    elif args.study == "noise":
        axes = {"sigma_px": args.sigma_px, "sigma_M": args.sigma_M, "sigma_lambda": args.sigma_lambda}
        fixed = {"sigma_px": args.fixed_px, "sigma_M": args.fixed_M, "sigma_lambda": args.fixed_lambda}
        table = bench.run_noise_grid(axes, args.n, args.solvers, out=args.out, seed=args.seed,
                                     threads=args.threads, fixed=fixed)
        report = table["heatmap"]
    else:
        noise = NoiseConfig(args.noise_px, args.noise_M, args.noise_lambda, args.noise_lambda)
        table = bench.run_applicability_study(args.n, args.per_pair, args.outlier_ratio, noise, out=args.out,
                                              seed=args.seed, threads=args.threads, solver=args.solvers[0])
        report = {"fraction_min_inliers": table["fraction_min_inliers"],
                  "fraction_accurate": table["fraction_accurate"]}
    sys.stdout.write(_dump(report))


def cmd_synth(args):
    rng = np.random.default_rng(args.seed)
    cfg = SceneConfig()
    scene = generate_correspondences(cfg, rng, args.n)
    scene = add_noise(scene, NoiseConfig(args.noise_px, args.noise_M, args.noise_lambda, args.noise_lambda), rng)
    scene = contaminate(scene, args.outlier_ratio, rng)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_correspondences(records_from_scene(scene), out / "correspondences.jsonl")
    save_intrinsics(scene.camera1, out / "intrinsics.json")
    truth = {"R": scene.R.tolist(), "t": scene.t.tolist(), "scale": scene.scale,
             "inliers": scene.inliers.tolist()}
    (out / "ground_truth.json").write_text(_dump(truth), encoding="utf-8")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="RNG seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for studies")
    common.add_argument("--out", default=None, help="output file (or directory for bench/synth)")
    common.add_argument("-v", "--verbose", action="store_true")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--corr", required=True, help="correspondences, JSON lines")
    inputs.add_argument("--intrinsics", required=True, help="intrinsics JSON (K, width, height)")
    inputs.add_argument("--intrinsics2", help="intrinsics of view 2 if different")
    inputs.add_argument("--depth1", help="depth map of view 1 (PFM or raw f32)")
    inputs.add_argument("--depth2", help="depth map of view 2 (PFM or raw f32)")
    inputs.add_argument("--solver", type=SolverVariant, default=SolverVariant.PROPOSED,
                        choices=list(SolverVariant))

    parser = argparse.ArgumentParser(prog="acpose", description="Relative pose from one affine correspondence and depth.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, inputs], help="pose from a single correspondence")
    p.add_argument("--index", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("lift", parents=[common, inputs], help="dump the lifted a, b, A, B terms")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("ransac", parents=[common, inputs], help="robust pose from a set of correspondences")
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--threshold-fraction", type=float, default=0.0005)
    p.add_argument("--max-iterations", type=int, default=1000)
    p.add_argument("--min-inliers-lo", type=int, default=6)
    p.add_argument("--timing", action="store_true", help="include wall-clock seconds (breaks byte-identity)")
    p.set_defaults(func=cmd_ransac)

    p = sub.add_parser("theory", parents=[common], help="theoretical RANSAC quantities")
    tsub = p.add_subparsers(dest="what", required=True)
    t = tsub.add_parser("iters", parents=[common], help="iteration counts for given confidence")
    t.add_argument("--confidence", type=float, default=0.99)
    t.add_argument("--inlier-ratios", type=_floats, default=[0.5, 0.25, 0.1])
    t.add_argument("--sample-sizes", type=_ints, default=[1, 2, 5])
    t.set_defaults(func=cmd_theory_iters)

    p = sub.add_parser("bench", parents=[common], help="synthetic studies")
    p.add_argument("study", choices=["stability", "noise", "applicability"])
    p.add_argument("--n", type=int, default=None,
                   help="instances (stability), instances per cell (noise) or pairs (applicability)")
    p.add_argument("--solvers", type=_solver_list, default=list(SolverVariant))
    p.add_argument("--sigma-px", type=_floats, default=bench.DEFAULT_AXES["sigma_px"])
    p.add_argument("--sigma-M", type=_floats, default=bench.DEFAULT_AXES["sigma_M"])
    p.add_argument("--sigma-lambda", type=_floats, default=bench.DEFAULT_AXES["sigma_lambda"])
    p.add_argument("--fixed-px", type=float, default=bench.DEFAULT_FIXED["sigma_px"])
    p.add_argument("--fixed-M", type=float, default=bench.DEFAULT_FIXED["sigma_M"])
    p.add_argument("--fixed-lambda", type=float, default=bench.DEFAULT_FIXED["sigma_lambda"])
    p.add_argument("--per-pair", type=int, default=200)
    p.add_argument("--outlier-ratio", type=float, default=0.0)
    p.add_argument("--noise-px", type=float, default=0.0)
    p.add_argument("--noise-M", type=float, default=0.0)
    p.add_argument("--noise-lambda", type=float, default=0.0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset for the other commands")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--outlier-ratio", type=float, default=0.0)
    p.add_argument("--noise-px", type=float, default=0.0)
    p.add_argument("--noise-M", type=float, default=0.0)
    p.add_argument("--noise-lambda", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)
    return parser


_BENCH_DEFAULT_N = {"stability": 30000, "noise": 1000, "applicability": 20}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bench" and args.n is None:
        args.n = _BENCH_DEFAULT_N[args.study]
    try:
        args.func(args)
    except (PoseError, OSError, ValueError) as exc:
        print(f"acpose: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
