"""1-point RANSAC around the single-correspondence solvers.

Hypotheses come from single correspondences. Consensus is measured with the
pixel-domain Sampson distance of the implied essential matrix. Whenever the
best model improves and has enough support, a local optimization step refits
an essential matrix to the consensus set with the normalized eight-point
algorithm.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTranslation, NoModelFound, PoseError
from .essential import decompose_essential, eight_point
from .geometry import (
    LiftedCorrespondence,
    PoseWithScale,
    essential_from_pose,
    fundamental_from_essential,
    lift_arrays,
    sampson_errors,
)
from .solvers import SolverVariant, solve

logger = logging.getLogger(__name__)

ITERATION_CAP = 10**9
LO_MAX_ROUNDS = 5
EIGHT_POINT_MIN = 8


@dataclass(frozen=True)
class RansacConfig:
    confidence: float = 0.99
    threshold_fraction: float = 0.0005
    max_iterations: int = 1000
    min_inliers_for_lo: int = 6
    seed: int = 0
    solver: SolverVariant = SolverVariant.PROPOSED

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        if not self.threshold_fraction > 0:
            raise ValueError("threshold_fraction must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        object.__setattr__(self, "solver", SolverVariant(self.solver))


@dataclass(frozen=True, eq=False)
class RobustResult:
    pose: PoseWithScale
    inlier_mask: np.ndarray
    iterations_run: int
    lo_steps: int
    score: float

    @property
    def num_inliers(self):
        return int(np.count_nonzero(self.inlier_mask))

    def to_dict(self):
        return {
            "pose": self.pose.to_dict(),
            "num_inliers": self.num_inliers,
            "inlier_mask": [bool(v) for v in self.inlier_mask],
            "iterations_run": self.iterations_run,
            "lo_steps": self.lo_steps,
            "score": self.score,
        }


@dataclass(frozen=True, eq=False)
class MatchSet:
    """Correspondences prepared for robust estimation: pixels, bearings and lifted terms."""

    x1: np.ndarray
    x2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __len__(self):
        return len(self.x1)

    @classmethod
    def from_arrays(cls, x1, M1, lam1, grad1, x2, M2, lam2, grad2, cam1, cam2):
        x1 = np.asarray(x1, dtype=float).reshape(-1, 2)
        x2 = np.asarray(x2, dtype=float).reshape(-1, 2)
        a, b, A, B = lift_arrays(x1, M1, lam1, grad1, x2, M2, lam2, grad2, cam1, cam2)
        return cls(x1, x2, cam1.bearing(x1), cam2.bearing(x2), a, b, A, B)

    @classmethod
    def from_matches(cls, matches, cam1, cam2):
        if len(matches) == 0:
            return cls.from_arrays(np.zeros((0, 2)), np.zeros((0, 2, 2)), np.zeros(0), np.zeros((0, 2)),
                                   np.zeros((0, 2)), np.zeros((0, 2, 2)), np.zeros(0), np.zeros((0, 2)),
                                   cam1, cam2)
        return cls.from_arrays(
            [m.corr.laf1.x for m in matches], [m.corr.laf1.M for m in matches],
            [m.depth1.lam for m in matches], [m.depth1.grad_lambda for m in matches],
            [m.corr.laf2.x for m in matches], [m.corr.laf2.M for m in matches],
            [m.depth2.lam for m in matches], [m.depth2.grad_lambda for m in matches],
            cam1, cam2,
        )

    @classmethod
    def from_scene(cls, scene):
        return cls.from_arrays(scene.x1, scene.M1, scene.lam1, scene.grad1,
                               scene.x2, scene.M2, scene.lam2, scene.grad2,
                               scene.camera1, scene.camera2)

    def lifted(self, i):
        return LiftedCorrespondence(self.a[i], self.b[i], self.A[i], self.B[i])


def _as_matchset(data, cameras):
    if isinstance(data, MatchSet):
        return data
    if hasattr(data, "lift_all"):
        return MatchSet.from_scene(data)
    return MatchSet.from_matches(list(data), *cameras)


def required_iterations(confidence, inlier_ratio, sample_size, cap=ITERATION_CAP):
    """RANSAC iterations needed to draw one all-inlier sample with ``confidence``.

    ``log(1 - confidence) / log(1 - inlier_ratio**sample_size)`` rounded to the
    nearest integer, clipped to ``[1, cap]``.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be at least 1")
    if not inlier_ratio > 0:
        return cap
    p = min(float(inlier_ratio), 1.0) ** sample_size
    if p >= 1.0:
        return 1
    denom = math.log1p(-p)
    if denom == 0.0:
        return cap
    k = math.floor(math.log(1.0 - confidence) / denom + 0.5)
    return int(min(cap, max(1, k)))


def threshold_px(cameras, fraction):
    cam1, cam2 = cameras
    return fraction * 0.5 * (cam1.diagonal + cam2.diagonal)


def _residuals(pose, data, cameras):
    F = fundamental_from_essential(essential_from_pose(pose), *cameras)
    return sampson_errors(F, data.x1, data.x2)


def _classify(pose, data, cameras, thr):
    err = _residuals(pose, data, cameras)
    mask = err < thr
    return mask, float(np.minimum(err, thr).sum())


def classify_inliers(pose, data, cameras, threshold_px):
    """Boolean mask of matches whose pixel Sampson distance is below ``threshold_px``.

    A pose without translation has no epipolar geometry; every match is then
    reported as an outlier and a warning is logged.
    """
    data = _as_matchset(data, cameras)
    try:
        err = _residuals(pose, data, cameras)
    except DegenerateTranslation:
        logger.warning("zero translation: no match can be classified as inlier")
        return np.zeros(len(data), dtype=bool)
    return err < threshold_px


def _better(count, score, best):
    if best is None:
        return True
    if count != best.num_inliers:
        return count > best.num_inliers
    return score < best.score


def local_optimize(current, data, cameras, config):
    """Refit to the consensus set with the eight-point algorithm until support stops growing."""
    data = _as_matchset(data, cameras)
    thr = threshold_px(cameras, config.threshold_fraction)
    best = current
    steps = 0
    min_size = max(EIGHT_POINT_MIN, config.min_inliers_for_lo)
    for _ in range(LO_MAX_ROUNDS):
        mask = best.inlier_mask
        if np.count_nonzero(mask) < min_size:
            break
        try:
            E = eight_point(data.q1[mask], data.q2[mask])
            pose = decompose_essential(E, data.q1[mask], data.q2[mask])
        except PoseError:
            break
        steps += 1
        pose = _rescale(pose, data, mask)
        if pose is None:
            break
        new_mask, score = _classify(pose, data, cameras, thr)
        if np.count_nonzero(new_mask) <= best.num_inliers:
            break
        best = RobustResult(pose, new_mask, current.iterations_run, current.lo_steps, score)
    return RobustResult(best.pose, best.inlier_mask, current.iterations_run,
                        current.lo_steps + steps, best.score)


def _rescale(pose, data, mask):
    # Eight-point gives no depth scale: take the inlier median of the per-match
    # least-squares scales, then size the unit translation to match the depths.
    R = pose.R
    A, B = data.A[mask], data.B[mask]
    num = np.einsum("nij,nij->n", A, R @ B)
    den = np.einsum("nij,nij->n", B, B)
    scale = float(np.median(num / den))
    if not scale > 0:
        return None
    t_dir = pose.t
    proj = float(np.median((data.a[mask] - scale * data.b[mask] @ R.T) @ t_dir))
    t = t_dir * proj if proj > 0 else t_dir
    return PoseWithScale(R, t, scale)


def ransac_1ac_d(data, cameras, config=None):
    """Robust relative pose from affine correspondences with depth.

    ``data`` is a sequence of :class:`DepthAffineMatch`, a :class:`MatchSet`
    or a synthetic scene; ``cameras`` is the ``(camera1, camera2)`` pair.
    """
    config = config or RansacConfig()
    data = _as_matchset(data, cameras)
    n = len(data)
    if n == 0:
        raise NoModelFound("no correspondences")
    thr = threshold_px(cameras, config.threshold_fraction)
    rng = np.random.default_rng(config.seed)

    best = None
    prev = -1
    it = 0
    lo_steps = 0
    while it < config.max_iterations:
        if best is not None and it >= required_iterations(
            config.confidence, best.num_inliers / n, 1, cap=config.max_iterations
        ):
            break
        i = int(rng.integers(n))
        while n > 1 and i == prev:
            i = int(rng.integers(n))
        prev = i
        it += 1
        try:
            pose = solve(data.lifted(i), config.solver)
        except PoseError:
            continue
        if not (pose.scale > 0) or not np.all(np.isfinite(pose.t)):
            continue
        try:
            mask, score = _classify(pose, data, cameras, thr)
        except DegenerateTranslation:
            continue
        count = int(np.count_nonzero(mask))
        if not _better(count, score, best):
            continue
        best = RobustResult(pose, mask, it, lo_steps, score)
        if count >= config.min_inliers_for_lo:
            best = local_optimize(best, data, cameras, config)
            lo_steps = best.lo_steps

    if best is None or best.num_inliers < 2:
        raise NoModelFound("no hypothesis reached two inliers")
    return RobustResult(best.pose, best.inlier_mask, it, lo_steps, best.score)
