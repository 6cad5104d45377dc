"""Synthetic two-view scenes with affine frames and depths, plus noise injection.

Two cameras sit at a random distance from the origin, each looking at a
random point of a small cube. Surface points ``X ~ N(0, I)`` with random unit
normals are projected into both views; the local affine frame of each view is
the image of the surface tangent frame ``nulls(n)``, and the depth is the
projective z-depth with its derivative along the same tangent frame.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GenerationFailure, InvalidNormal
from .geometry import (
    AffineCorrespondence,
    DepthAffineMatch,
    DepthObservation,
    LocalAffineFrame,
    PinholeCamera,
    cross3,
    lift_arrays,
    LiftedCorrespondence,
    relative_pose,
)

UP = np.array([0.0, 1.0, 0.0])


@functools.lru_cache(maxsize=16)
def _camera(focal, principal_point, image_size):
    w, h = image_size
    return PinholeCamera.from_focal(focal, principal_point, w, h)


@dataclass(frozen=True)
class SceneConfig:
    focal: float = 600.0
    principal_point: tuple = (300.0, 300.0)
    image_size: tuple = (600, 600)
    distance_range: tuple = (1.0, 2.0)
    lookat_half_width: float = 0.5
    # When set, view-2 depths are multiplied by s ~ U(range), so the true scale is 1/s.
    depth_scale_range: tuple | None = None
    max_attempts: int = 100

    def __post_init__(self):
        lo, hi = self.distance_range
        if not (0 < lo <= hi):
            raise ValueError("distance range must be positive and ordered")

    def camera(self):
        return _camera(self.focal, tuple(self.principal_point), tuple(self.image_size))


@dataclass(frozen=True)
class NoiseConfig:
    sigma_px: float = 0.0
    sigma_M: float = 0.0
    sigma_lambda: float = 0.0
    sigma_grad_lambda: float = 0.0

    def __post_init__(self):
        if min(self.sigma_px, self.sigma_M, self.sigma_lambda, self.sigma_grad_lambda) < 0:
            raise ValueError("noise levels must be non-negative")


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """``n`` correspondences observed by one camera pair, with ground truth.

    Array fields carry a leading correspondence axis. For ``n == 1`` the
    ``laf1``/``depth1``/... properties give the single sample directly.
    """

    camera1: PinholeCamera
    camera2: PinholeCamera
    R1: np.ndarray
    t1: np.ndarray
    R2: np.ndarray
    t2: np.ndarray
    R: np.ndarray
    t: np.ndarray
    scale: float
    X: np.ndarray
    normals: np.ndarray
    tangents: np.ndarray
    x1: np.ndarray
    M1: np.ndarray
    lam1: np.ndarray
    grad1: np.ndarray
    x2: np.ndarray
    M2: np.ndarray
    lam2: np.ndarray
    grad2: np.ndarray
    inliers: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.x1)

    def subset(self, idx):
        per_point = ("X", "normals", "tangents", "x1", "M1", "lam1", "grad1",
                     "x2", "M2", "lam2", "grad2", "inliers")
        return replace(self, **{k: getattr(self, k)[idx] for k in per_point})

    def match(self, i=0):
        corr = AffineCorrespondence(
            LocalAffineFrame(self.x1[i], self.M1[i]), LocalAffineFrame(self.x2[i], self.M2[i])
        )
        return DepthAffineMatch(
            corr, DepthObservation(self.lam1[i], self.grad1[i]), DepthObservation(self.lam2[i], self.grad2[i])
        )

    def matches(self):
        return [self.match(i) for i in range(len(self))]

    def lift_all(self):
        return lift_arrays(self.x1, self.M1, self.lam1, self.grad1,
                           self.x2, self.M2, self.lam2, self.grad2,
                           self.camera1, self.camera2)

    def lifted(self, i=0):
        a, b, A, B = lift_arrays(self.x1[i], self.M1[i], self.lam1[i], self.grad1[i],
                                 self.x2[i], self.M2[i], self.lam2[i], self.grad2[i],
                                 self.camera1, self.camera2)
        return LiftedCorrespondence(a, b, A, B)

    @property
    def cameras(self):
        return self.camera1, self.camera2

    @property
    def laf1(self):
        return self.match(0).corr.laf1

    @property
    def laf2(self):
        return self.match(0).corr.laf2

    @property
    def depth1(self):
        return self.match(0).depth1

    @property
    def depth2(self):
        return self.match(0).depth2

    @property
    def normal(self):
        return self.normals[0]

    @property
    def point(self):
        return self.X[0]


SceneSample = SyntheticScene


def nullspace_of_normal(n):
    """Orthonormal 3x2 basis of the plane orthogonal to the unit vector ``n``."""
    n = np.asarray(n, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise InvalidNormal("normal must be a unit 3-vector")
    return _nulls(n[None])[0]


def _nulls(n):
    e = np.zeros_like(n)
    e[np.arange(len(n)), np.argmin(np.abs(n), axis=1)] = 1.0
    u = cross3(n.T, e.T).T
    u /= np.sqrt(np.einsum("ij,ij->i", u, u))[:, None]
    v = cross3(n.T, u.T).T
    return np.stack([u, v], axis=2)


def look_at(center, target, up=UP):
    """Rotation (rows = camera axes in world) for a camera at ``center`` facing ``target``."""
    z = target - center
    z = z / np.sqrt(z @ z)
    x = cross3(up, z)
    x /= np.sqrt(x @ x)
    return np.stack([x, cross3(z, x), z])


def _random_camera(cfg, rng):
    while True:
        d = rng.standard_normal(3)
        d /= np.sqrt(d @ d)
        center = d * rng.uniform(*cfg.distance_range)
        target = rng.uniform(-cfg.lookat_half_width, cfg.lookat_half_width, 3)
        z = target - center
        nz = np.sqrt(z @ z)
        if nz > 1e-9 and abs(abs(z @ UP) / nz - 1.0) > 1e-6:
            break
    R = look_at(center, target)
    return R, -R @ center


def _view(cam, R, t, X, tangents):
    Xc = X @ R.T + t
    K = cam.K
    p = Xc @ K.T
    x = p[:, :2] / p[:, 2:3]
    # Jacobian of pixel projection w.r.t. camera-frame point.
    Jpi = (K[None, :2, :] - x[:, :, None] * K[None, 2:3, :]) / p[:, 2, None, None]
    T = R @ tangents  # (n, 3, 2)
    M = Jpi @ T
    lam = Xc[:, 2]
    grad = T[:, 2, :]
    return Xc, x, M, lam, grad


def _in_view(cam, Xc, x):
    return (Xc[:, 2] > 1e-6) & (x[:, 0] >= 0) & (x[:, 0] < cam.width) & (x[:, 1] >= 0) & (x[:, 1] < cam.height)


def generate_correspondences(cfg, rng, n, camera_poses=None):
    """Scene with ``n`` noise-free correspondences under one random camera pair.

    ``camera_poses`` optionally fixes ``((R1, t1), (R2, t2))``. Random camera
    pairs that fail to see ``n`` common points within ``cfg.max_attempts``
    point draws are redrawn, up to ``cfg.max_attempts`` times.
    """
    cam = cfg.camera()
    s = 1.0 if cfg.depth_scale_range is None else float(rng.uniform(*cfg.depth_scale_range))
    for _ in range(1 if camera_poses is not None else cfg.max_attempts):
        if camera_poses is None:
            R1, t1 = _random_camera(cfg, rng)
            R2, t2 = _random_camera(cfg, rng)
        else:
            (R1, t1), (R2, t2) = (
                (np.asarray(R, dtype=float), np.asarray(t, dtype=float)) for R, t in camera_poses
            )
        X = _visible_points(cam, R1, t1, R2, t2, n, cfg.max_attempts, rng)
        if X is not None:
            break
    else:
        raise GenerationFailure(f"no in-frustum point after {cfg.max_attempts} attempts")

    N = rng.standard_normal((n, 3))
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    tangents = _nulls(N)

    _, x1, M1, lam1, grad1 = _view(cam, R1, t1, X, tangents)
    _, x2, M2, lam2, grad2 = _view(cam, R2, t2, X, tangents)
    R, t = relative_pose(R1, t1, R2, t2)
    return SyntheticScene(
        camera1=cam, camera2=cam, R1=R1, t1=t1, R2=R2, t2=t2, R=R, t=t, scale=1.0 / s,
        X=X, normals=N, tangents=tangents,
        x1=x1, M1=M1, lam1=lam1, grad1=grad1,
        x2=x2, M2=M2, lam2=lam2 * s, grad2=grad2 * s,
        inliers=np.ones(n, dtype=bool),
    )


def _visible_points(cam, R1, t1, R2, t2, n, attempts, rng):
    # Candidates are drawn in batches; at most ``attempts`` per requested point.
    found = []
    have = 0
    drawn = 0
    while have < n and drawn < attempts * n:
        k = min(max(8 * (n - have), 32), attempts * n - drawn)
        X = rng.standard_normal((k, 3))
        drawn += k
        Xc1, x1 = _project(cam, R1, t1, X)
        Xc2, x2 = _project(cam, R2, t2, X)
        X = X[_in_view(cam, Xc1, x1) & _in_view(cam, Xc2, x2)][: n - have]
        found.append(X)
        have += len(X)
    return np.concatenate(found) if have == n else None


def _project(cam, R, t, X):
    Xc = X @ R.T + t
    p = Xc @ cam.K.T
    return Xc, p[:, :2] / p[:, 2:3]


def generate_scene(cfg, rng, camera_poses=None):
    return generate_correspondences(cfg, rng, 1, camera_poses)


def add_noise(scene, noise, rng):
    """Gaussian perturbation of image points, frames, depths and depth gradients.

    A fixed number of standard normals is drawn per correspondence regardless
    of the noise levels, so two calls with equal RNG state and different
    ``noise`` differ only in the scale of each perturbation.
    """
    n = len(scene)
    z = rng.standard_normal((n, 18))
    lam1 = np.maximum(scene.lam1 + noise.sigma_lambda * z[:, 12], 1e-6)
    lam2 = np.maximum(scene.lam2 + noise.sigma_lambda * z[:, 13], 1e-6)
    return replace(
        scene,
        x1=scene.x1 + noise.sigma_px * z[:, 0:2],
        x2=scene.x2 + noise.sigma_px * z[:, 2:4],
        M1=scene.M1 + noise.sigma_M * z[:, 4:8].reshape(n, 2, 2),
        M2=scene.M2 + noise.sigma_M * z[:, 8:12].reshape(n, 2, 2),
        lam1=lam1,
        lam2=lam2,
        grad1=scene.grad1 + noise.sigma_grad_lambda * z[:, 14:16],
        grad2=scene.grad2 + noise.sigma_grad_lambda * z[:, 16:18],
    )


def contaminate(scene, outlier_ratio, rng):
    """Replace a random ``outlier_ratio`` share of correspondences by gross outliers.

    Outliers get a uniform random view-2 pixel, a randomly rotated view-2
    frame borrowed from another correspondence and a rescaled view-2 depth.
    """
    n = len(scene)
    k = int(round(outlier_ratio * n))
    idx = np.sort(rng.permutation(n)[:k])
    cam = scene.camera2
    x2 = scene.x2.copy()
    M2 = scene.M2.copy()
    lam2 = scene.lam2.copy()
    grad2 = scene.grad2.copy()
    donors = rng.integers(0, n, size=k)
    angles = rng.uniform(0, 2 * np.pi, size=k)
    c, s = np.cos(angles), np.sin(angles)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], 1)
    x2[idx] = rng.uniform([0, 0], [cam.width, cam.height], size=(k, 2))
    M2[idx] = rot @ scene.M2[donors]
    lam2[idx] = scene.lam2[donors] * rng.uniform(0.5, 2.0, size=k)
    grad2[idx] = scene.grad2[donors]
    inliers = scene.inliers.copy()
    inliers[idx] = False
    return replace(scene, x2=x2, M2=M2, lam2=lam2, grad2=grad2, inliers=inliers)


def instance_rng(seed, index):
    """Independent generator for instance ``index`` of a seeded study."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def finite_difference_errors(scene, delta_px=1e-3):
    """Relative central-difference errors of ``M1``, ``M2``, ``grad1`` and ``grad2``.

    The local plane ``X + T u`` is re-projected for small frame steps ``u``
    whose image in view 1 moves by about ``delta_px`` pixels. Returns an
    ``(n, 4)`` array. Gradient errors are relative to ``max(|grad|, 1e-3 lam)``
    so that nearly fronto-parallel patches do not divide by zero.
    """
    n = len(scene)
    out = np.empty((n, 4))
    cam1, cam2 = scene.camera1, scene.camera2
    s = scene.lam2[0] / (scene.X[0] @ scene.R2[2] + scene.t2[2]) if n else 1.0
    for i in range(n):
        T = scene.tangents[i]
        h = delta_px / max(np.abs(scene.M1[i]).max(), 1e-12)
        cols = {k: [] for k in ("x1", "x2", "l1", "l2")}
        for k in range(2):
            step = T[:, k] * h
            P = np.stack([scene.X[i] + step, scene.X[i] - step])
            Xc1, x1 = _project(cam1, scene.R1, scene.t1, P)
            Xc2, x2 = _project(cam2, scene.R2, scene.t2, P)
            cols["x1"].append((x1[0] - x1[1]) / (2 * h))
            cols["x2"].append((x2[0] - x2[1]) / (2 * h))
            cols["l1"].append((Xc1[0, 2] - Xc1[1, 2]) / (2 * h))
            cols["l2"].append(s * (Xc2[0, 2] - Xc2[1, 2]) / (2 * h))
        M1 = np.column_stack(cols["x1"])
        M2 = np.column_stack(cols["x2"])
        g1 = np.array(cols["l1"])
        g2 = np.array(cols["l2"])
        out[i, 0] = np.linalg.norm(M1 - scene.M1[i]) / np.linalg.norm(scene.M1[i])
        out[i, 1] = np.linalg.norm(M2 - scene.M2[i]) / np.linalg.norm(scene.M2[i])
        out[i, 2] = np.linalg.norm(g1 - scene.grad1[i]) / max(np.linalg.norm(scene.grad1[i]), 1e-3 * scene.lam1[i])
        out[i, 3] = np.linalg.norm(g2 - scene.grad2[i]) / max(np.linalg.norm(scene.grad2[i]), 1e-3 * scene.lam2[i])
    return out
