"""Synthetic studies: solver stability, noise sensitivity grids and the
per-correspondence applicability analysis.

Every study instance draws its randomness from ``instance_rng(seed, index)``,
so results do not depend on the number of worker processes. Outputs are a
CSV (one row per instance or cell) and a JSON manifest echoing the
configuration next to the aggregated results.
"""
from __future__ import annotations

import csv
import functools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import PoseError
from .essential import decompose_essential, eight_point
from .geometry import essential_from_pose, rotation_error_deg, sampson_errors, translation_error_deg
from .ransac import MatchSet, RansacConfig, _classify, ransac_1ac_d, threshold_px
from .solvers import SolverVariant, solve
from .synthetic import NoiseConfig, SceneConfig, add_noise, contaminate, generate_correspondences, instance_rng

logger = logging.getLogger(__name__)

ERROR_FLOOR = 1e-20
LOG_BINS = np.arange(-20.0, 2.5, 0.5)
QUANTILES = (0.5, 0.9, 0.99, 0.999, 1.0)
BASELINE = "eight_point"

DEFAULT_AXES = {
    "sigma_px": [0.0, 0.5, 1.0, 2.5],
    "sigma_M": [0.0, 0.01, 0.05, 0.1],
    "sigma_lambda": [0.0, 0.01, 0.05, 0.1],
}
# Level of the two noise sources held fixed while the third is swept.
DEFAULT_FIXED = {"sigma_px": 0.0, "sigma_M": 0.0, "sigma_lambda": 0.0}


def _map(fn, items, threads):
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (8 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _solvers(solvers):
    return [SolverVariant(s) for s in solvers]


def pose_errors(pose, scene):
    """Rotation and translation errors (degrees) and relative scale error."""
    rot = rotation_error_deg(pose.R, scene.R)
    trans = translation_error_deg(pose.t, scene.t)
    scale = abs(pose.scale - scene.scale) / scene.scale
    return rot, trans, scale


def normalized_sampson(pose, scene, bearings=None):
    """Mean Sampson distance of the scene's points, in normalized image units."""
    E = essential_from_pose(pose)
    if bearings is None:
        bearings = scene.camera1.bearing(scene.x1), scene.camera2.bearing(scene.x2)
    q1, q2 = bearings
    return float(np.mean(sampson_errors(E, q1[:, :2], q2[:, :2])))


def _evaluate(scene, variants):
    """Errors of each solver on the first correspondence of ``scene``; None on failure."""
    try:
        lc = scene.lifted(0)
    except PoseError:
        return [None] * len(variants)
    bearings = scene.camera1.bearing(scene.x1), scene.camera2.bearing(scene.x2)
    out = []
    for v in variants:
        try:
            pose = solve(lc, v)
            rot, trans, scale = pose_errors(pose, scene)
            samp = normalized_sampson(pose, scene, bearings)
        except (PoseError, np.linalg.LinAlgError, FloatingPointError):
            out.append(None)
            continue
        vals = (samp, rot, trans, scale)
        out.append(vals if all(np.isfinite(vals)) else None)
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _log10(x):
    return float(np.log10(max(x, ERROR_FLOOR)))


def _summary(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"count": 0}
    logs = np.log10(np.maximum(v, ERROR_FLOOR))
    hist, _ = np.histogram(np.clip(logs, LOG_BINS[0], LOG_BINS[-1] - 1e-9), bins=LOG_BINS)
    return {
        "count": int(v.size),
        "mean": float(v.mean()),
        "median": float(np.median(v)),
        "quantiles": {str(q): float(np.quantile(v, q)) for q in QUANTILES},
        "fraction_below_1e-6": float(np.mean(v < 1e-6)),
        "log10_histogram": hist.tolist(),
    }


# ---------------------------------------------------------------- stability


def _stability_instance(index, seed, cfg, n_check, variants):
    scene = generate_correspondences(cfg, instance_rng(seed, index), 1 + n_check)
    return _evaluate(scene, variants)


def run_stability_study(n_instances, solvers=tuple(SolverVariant), out=None, seed=0,
                        threads=1, scene_config=None, n_check=10, samples=None):
    """Noise-free solver stability.

    Each instance is one correspondence plus ``n_check`` extra points of the
    same camera pair, on which the mean Sampson distance is measured.
    ``samples`` replaces the generated scenes (used for failure injection).
    """
    if n_instances < 1:
        raise ValueError("n_instances must be at least 1")
    cfg = scene_config or SceneConfig()
    variants = _solvers(solvers)
    if samples is not None:
        results = [_evaluate(s, variants) for s in samples]
    else:
        fn = functools.partial(_stability_instance, seed=seed, cfg=cfg, n_check=n_check, variants=variants)
        results = _map(fn, range(n_instances), threads)

    rows = []
    per_solver = {v.value: {"sampson": [], "rotation_deg": [], "translation_deg": [], "scale_rel": []}
                  for v in variants}
    failures = {v.value: 0 for v in variants}
    for i, res in enumerate(results):
        for v, vals in zip(variants, res):
            if vals is None:
                failures[v.value] += 1
                rows.append((i, v.value, 1, None, None, None, None, None, None, None))
                continue
            samp, rot, trans, scale = vals
            acc = per_solver[v.value]
            acc["sampson"].append(samp)
            acc["rotation_deg"].append(rot)
            acc["translation_deg"].append(trans)
            acc["scale_rel"].append(scale)
            rows.append((i, v.value, 0, samp, rot, trans, scale, _log10(samp), _log10(rot), _log10(trans)))

    table = {
        "study": "stability",
        "config": {"n_instances": len(results), "seed": seed, "n_check": n_check,
                   "solvers": [v.value for v in variants], "scene": asdict(cfg),
                   "error_floor": ERROR_FLOOR, "log10_bin_edges": LOG_BINS.tolist()},
        "failures": failures,
        "summary": {s: {k: _summary(vals) for k, vals in acc.items()} for s, acc in per_solver.items()},
        "rows": rows,
    }
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "stability.csv",
                   ["instance", "solver", "failed", "sampson", "rotation_deg", "translation_deg",
                    "scale_rel", "log10_sampson", "log10_rotation", "log10_translation"], rows)
        _write_json(out / "stability.json", {k: v for k, v in table.items() if k != "rows"})
    return table


# ---------------------------------------------------------------- noise grid


def baseline_pose(scene):
    """Eight-point estimate from all image points of ``scene``; frames and depths unused."""
    q1 = scene.camera1.bearing(scene.x1)
    q2 = scene.camera2.bearing(scene.x2)
    E = eight_point(q1, q2)
    return decompose_essential(E, q1, q2)


def _noise_instance(index, seed, cfg, noise, n_points, variants, baseline):
    rng = instance_rng(seed, index)
    scene = generate_correspondences(cfg, rng, n_points)
    noisy = add_noise(scene, noise, rng)
    out = [None if vals is None else vals[1:3] for vals in _evaluate(noisy, variants)]
    if baseline:
        try:
            pose = baseline_pose(noisy)
            out.append((rotation_error_deg(pose.R, scene.R), translation_error_deg(pose.t, scene.t)))
        except PoseError:
            out.append(None)
    return out


def _noise_for(axis, value, fixed):
    levels = dict(fixed)
    levels[axis] = value
    return NoiseConfig(sigma_px=levels["sigma_px"], sigma_M=levels["sigma_M"],
                       sigma_lambda=levels["sigma_lambda"], sigma_grad_lambda=levels["sigma_lambda"])


def run_noise_grid(axes=None, n_per_cell=1000, solvers=tuple(SolverVariant), out=None, seed=0,
                   threads=1, fixed=None, scene_config=None, baseline=True, n_points=20):
    """Sweep each noise source while holding the other two at ``fixed``.

    ``sigma_lambda`` drives both the depth and the depth-gradient noise. The
    eight-point baseline fits all ``n_points`` noisy image points of an
    instance; the 1AC+D solvers use only the first correspondence. Instance
    ``i`` sees the same scene and the same standard-normal draws in every
    cell, so cells differ only in the noise scale.
    """
    axes = {k: list(v) for k, v in (axes or DEFAULT_AXES).items()}
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ValueError("noise axes must be non-empty")
    fixed = {**DEFAULT_FIXED, **(fixed or {})}
    cfg = scene_config or SceneConfig()
    variants = _solvers(solvers)
    names = [v.value for v in variants] + ([BASELINE] if baseline else [])

    cells = []
    for axis, values in axes.items():
        for value in values:
            noise = _noise_for(axis, value, fixed)
            fn = functools.partial(_noise_instance, seed=seed, cfg=cfg, noise=noise, n_points=n_points,
                                   variants=variants, baseline=baseline)
            results = _map(fn, range(n_per_cell), threads)
            stats = {}
            for j, name in enumerate(names):
                good = [r[j] for r in results if r[j] is not None]
                rot = np.array([g[0] for g in good])
                trans = np.array([g[1] for g in good])
                stats[name] = {
                    "failures": len(results) - len(good),
                    "rotation_mean": float(rot.mean()) if len(rot) else None,
                    "rotation_median": float(np.median(rot)) if len(rot) else None,
                    "translation_mean": float(trans.mean()) if len(trans) else None,
                    "translation_median": float(np.median(trans)) if len(trans) else None,
                }
            cells.append({"axis": axis, "value": float(value), "noise": asdict(noise), "stats": stats})

    table = {
        "study": "noise_grid",
        "config": {"axes": axes, "fixed": fixed, "n_per_cell": n_per_cell, "seed": seed,
                   "solvers": names, "n_points": n_points, "scene": asdict(cfg),
                   "note": "sigma_lambda also sets sigma_grad_lambda; axis ticks are "
                           "implementation defaults, not published values"},
        "cells": cells,
        "heatmap": _heatmaps(cells, axes, names),
    }
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for c in cells:
            for name in names:
                s = c["stats"][name]
                rows.append((c["axis"], c["value"], c["noise"]["sigma_px"], c["noise"]["sigma_M"],
                             c["noise"]["sigma_lambda"], name, s["failures"], s["rotation_mean"],
                             s["rotation_median"], s["translation_mean"], s["translation_median"]))
        _write_csv(out / "noise_grid.csv",
                   ["axis", "value", "sigma_px", "sigma_M", "sigma_lambda", "solver", "failures",
                    "rotation_mean", "rotation_median", "translation_mean", "translation_median"], rows)
        _write_json(out / "noise_grid.json", table)
    return table


def _heatmaps(cells, axes, names):
    # One median-rotation series per (axis, solver), ready to plot as heat-map rows.
    out = {}
    for axis, values in axes.items():
        sel = [c for c in cells if c["axis"] == axis]
        out[axis] = {"values": [float(v) for v in values],
                     "rotation_median": {n: [c["stats"][n]["rotation_median"] for c in sel] for n in names},
                     "translation_median": {n: [c["stats"][n]["translation_median"] for c in sel]
                                            for n in names}}
    return out


def median_series(table, axis, solver, key="rotation_median"):
    return [c["stats"][solver][key] for c in table["cells"] if c["axis"] == axis]


def count_inversions(series):
    return sum(1 for a, b in zip(series, series[1:]) if b < a)


# ---------------------------------------------------------------- applicability


def _applicability_pair(index, seed, cfg, n_corr, outlier_ratio, noise, variant, min_inliers, ransac):
    rng = instance_rng(seed, index)
    scene = generate_correspondences(cfg, rng, n_corr)
    scene = contaminate(add_noise(scene, noise, rng), outlier_ratio, rng)
    data = MatchSet.from_scene(scene)
    cams = scene.cameras
    thr = threshold_px(cams, RansacConfig().threshold_fraction)
    counts, rot_errs, trans_errs = [], [], []
    for i in range(n_corr):
        try:
            pose = solve(data.lifted(i), variant)
            mask, _ = _classify(pose, data, cams, thr)
            rot, trans, _ = pose_errors(pose, scene)
        except PoseError:
            counts.append(0)
            rot_errs.append(180.0)
            trans_errs.append(180.0)
            continue
        counts.append(int(mask.sum()))
        rot_errs.append(rot)
        trans_errs.append(trans)
    robust = None
    if ransac:
        try:
            res = ransac_1ac_d(data, cams, RansacConfig(seed=int(index), solver=variant))
            robust = pose_errors(res.pose, scene)[:2] + (res.iterations_run,)
        except PoseError:
            robust = None
    return counts, rot_errs, trans_errs, robust, scene.inliers.tolist()


def run_applicability_study(n_pairs, correspondences_per_pair, outlier_ratio=0.0, noise=None, out=None,
                            seed=0, threads=1, solver=SolverVariant.PROPOSED, min_inliers=6,
                            scene_config=None, ransac=True):
    """Fit one hypothesis per correspondence and measure its support.

    Reports the share of correspondences whose hypothesis gathers at least
    ``min_inliers`` inliers, the error CDFs of all hypotheses and, per pair,
    the outcome of full 1-point RANSAC.
    """
    if n_pairs < 1 or correspondences_per_pair < 1 or not 0 <= outlier_ratio <= 1:
        raise ValueError("invalid applicability parameters")
    noise = noise or NoiseConfig()
    cfg = scene_config or SceneConfig()
    variant = SolverVariant(solver)
    fn = functools.partial(_applicability_pair, seed=seed, cfg=cfg, n_corr=correspondences_per_pair,
                           outlier_ratio=outlier_ratio, noise=noise, variant=variant,
                           min_inliers=min_inliers, ransac=ransac)
    results = _map(fn, range(n_pairs), threads)

    rows = []
    counts, rots, transs = [], [], []
    robust_rows = []
    for p, (c, r, t, robust, inl) in enumerate(results):
        for i in range(len(c)):
            rows.append((p, i, int(inl[i]), c[i], r[i], t[i]))
        counts += c
        rots += r
        transs += t
        robust_rows.append(robust)
    counts = np.array(counts)
    rots = np.array(rots)
    transs = np.array(transs)
    grid = [0.001, 0.01, 0.1, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 45.0, 90.0, 180.0]
    ok_robust = [r for r in robust_rows if r is not None]
    table = {
        "study": "applicability",
        "config": {"n_pairs": n_pairs, "correspondences_per_pair": correspondences_per_pair,
                   "outlier_ratio": outlier_ratio, "noise": asdict(noise), "seed": seed,
                   "solver": variant.value, "min_inliers": min_inliers, "scene": asdict(cfg)},
        "fraction_min_inliers": float(np.mean(counts >= min_inliers)),
        "fraction_accurate": float(np.mean((rots < 20.0) & (transs < 15.0))),
        "cdf_grid_deg": grid,
        "rotation_cdf": [float(np.mean(rots <= g)) for g in grid],
        "translation_cdf": [float(np.mean(transs <= g)) for g in grid],
        "ransac": {
            "failures": len(robust_rows) - len(ok_robust),
            "rotation_deg": [r[0] for r in ok_robust],
            "translation_deg": [r[1] for r in ok_robust],
            "iterations": [r[2] for r in ok_robust],
        },
        "rows": rows,
    }
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "applicability.csv",
                   ["pair", "correspondence", "true_inlier", "inlier_count", "rotation_deg", "translation_deg"],
                   rows)
        _write_json(out / "applicability.json", {k: v for k, v in table.items() if k != "rows"})
    return table
