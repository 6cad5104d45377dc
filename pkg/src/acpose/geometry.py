"""Camera models, affine frames, depth observations and the lifted constraint
quadruple, plus pose error metrics and epipolar helpers.

Pose convention: view 1 is the reference frame. A relative pose ``(R, t)``
maps view-2 camera coordinates into view-1 camera coordinates,
``X1 = R @ X2 + t``. For absolute poses ``Xi = Ri @ X + ti`` this gives
``R = R1 @ R2.T`` and ``t = t1 - R @ t2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateTranslation, InvalidDepth

logger = logging.getLogger(__name__)


def _frozen(a, shape=None):
    a = np.array(a, dtype=float)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a


def cross3(u, v):
    return np.array([u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]])


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def is_rotation(R, tol=1e-10):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.abs(R.T @ R - np.eye(3)).max() <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


# ---------------------------------------------------------------- cameras


class CameraModel:
    """Central camera: maps pixels to bearing vectors.

    Subclasses implement ``bearing`` and ``bearing_jacobian``; both broadcast
    over leading dimensions of ``x`` (shape ``(..., 2)``).
    """

    width: float
    height: float

    def bearing(self, x):
        raise NotImplementedError

    def bearing_jacobian(self, x):
        raise NotImplementedError

    @property
    def diagonal(self):
        return float(np.hypot(self.width, self.height))


class PinholeCamera(CameraModel):
    """Pinhole camera with intrinsics ``K``.

    Bearings are ``K^-1 [x; 1]`` with the third component equal to one, so
    the depth paired with a bearing is the projective z-depth.
    """

    def __init__(self, K, width, height):
        K = np.array(K, dtype=float).reshape(3, 3)
        if np.any(np.abs(np.tril(K, -1)) > 0) or np.any(np.diag(K) <= 0):
            raise ValueError("K must be upper-triangular with positive diagonal")
        if width <= 0 or height <= 0:
            raise ValueError("image size must be positive")
        K = K / K[2, 2]
        self.K = _frozen(K)
        self.K_inv = _frozen(np.linalg.inv(K))
        self.width = float(width)
        self.height = float(height)

    @classmethod
    def from_focal(cls, focal, principal_point, width, height):
        cx, cy = principal_point
        K = [[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]]
        return cls(K, width, height)

    def bearing(self, x):
        x = np.asarray(x, dtype=float)
        xh = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
        return xh @ self.K_inv.T

    def bearing_jacobian(self, x):
        x = np.asarray(x, dtype=float)
        J = self.K_inv[:, :2]
        return np.broadcast_to(J, x.shape[:-1] + (3, 2)).copy()

    def project(self, X):
        """Pixel coordinates of camera-frame points ``X`` (shape ``(..., 3)``)."""
        X = np.asarray(X, dtype=float)
        p = X @ self.K.T
        return p[..., :2] / p[..., 2:3]

    def __repr__(self):
        return f"PinholeCamera(K={self.K.tolist()}, width={self.width:g}, height={self.height:g})"


# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class LocalAffineFrame:
    x: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x, (2,)))
        object.__setattr__(self, "M", _frozen(self.M, (2, 2)))

    def is_degenerate(self, tol=1e-12):
        return abs(np.linalg.det(self.M)) <= tol


@dataclass(frozen=True)
class AffineCorrespondence:
    laf1: LocalAffineFrame
    laf2: LocalAffineFrame


@dataclass(frozen=True)
class DepthObservation:
    """Relative depth at a feature and its gradient along the frame axes.

    ``grad_lambda`` is the derivative of the depth with respect to the
    local affine frame coordinates, i.e. ``d(lambda)/dx @ M`` for a pixel
    gradient ``d(lambda)/dx``.
    """

    lam: float
    grad_lambda: np.ndarray

    def __post_init__(self):
        lam = float(self.lam)
        if not np.isfinite(lam) or lam <= 0:
            raise InvalidDepth(f"depth must be positive, got {lam}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "grad_lambda", _frozen(self.grad_lambda, (2,)))
        if not np.all(np.isfinite(self.grad_lambda)):
            raise InvalidDepth("depth gradient must be finite")


@dataclass(frozen=True)
class LiftedCorrespondence:
    a: np.ndarray
    b: np.ndarray
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        for name, shape in (("a", (3,)), ("b", (3,)), ("A", (3, 2)), ("B", (3, 2))):
            object.__setattr__(self, name, _frozen(getattr(self, name), shape))


@dataclass(frozen=True)
class PoseWithScale:
    """Relative pose ``X1 = R X2 + t`` and depth scale ``a = scale * R b + t``."""

    R: np.ndarray
    t: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(self.R, (3, 3)))
        object.__setattr__(self, "t", _frozen(self.t, (3,)))
        object.__setattr__(self, "scale", float(self.scale))

    def to_dict(self):
        return {"R": self.R.tolist(), "t": self.t.tolist(), "scale": self.scale}


class DepthAffineMatch(NamedTuple):
    """One affine correspondence with a depth observation in each view."""

    corr: AffineCorrespondence
    depth1: DepthObservation
    depth2: DepthObservation


def relative_pose(R1, t1, R2, t2):
    R = R1 @ R2.T
    return R, t1 - R @ t2


# ---------------------------------------------------------------- operations


def bearing(camera, x):
    return camera.bearing(np.asarray(x, dtype=float))


def bearing_jacobian(camera, x):
    return camera.bearing_jacobian(np.asarray(x, dtype=float))


def lift_arrays(x1, M1, lam1, grad1, x2, M2, lam2, grad2, cam1, cam2):
    """Vectorized lifting. Returns ``a, b`` of shape (n, 3) and ``A, B`` of shape (n, 3, 2)."""
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    if np.any(~(lam1 > 0)) or np.any(~(lam2 > 0)):
        raise InvalidDepth("depth must be positive")
    a, A = _lift_view(cam1, x1, M1, lam1, grad1)
    b, B = _lift_view(cam2, x2, M2, lam2, grad2)
    return a, b, A, B


def _lift_view(cam, x, M, lam, grad):
    q = cam.bearing(x)
    J = cam.bearing_jacobian(x)
    grad = np.asarray(grad, dtype=float)
    M = np.asarray(M, dtype=float)
    p = lam[..., None] * q
    P = q[..., :, None] * grad[..., None, :] + lam[..., None, None] * (J @ M)
    return p, P


def lift(corr, d1, d2, cam1, cam2):
    a, b, A, B = lift_arrays(
        corr.laf1.x, corr.laf1.M, d1.lam, d1.grad_lambda,
        corr.laf2.x, corr.laf2.M, d2.lam, d2.grad_lambda,
        cam1, cam2,
    )
    return LiftedCorrespondence(a, b, A, B)


def rotation_error_deg(R_est, R_gt):
    """Geodesic angle between two rotations, in degrees.

    Evaluated as ``atan2(sin, cos)`` of the relative rotation, which equals
    ``acos((tr(R_est R_gt^T) - 1) / 2)`` but keeps full precision near 0 and
    180 degrees.
    """
    D = np.asarray(R_est) @ np.asarray(R_gt).T
    c = np.clip(0.5 * (np.trace(D) - 1.0), -1.0, 1.0)
    w = np.array([D[2, 1] - D[1, 2], D[0, 2] - D[2, 0], D[1, 0] - D[0, 1]])
    s = 0.5 * np.sqrt(w @ w)
    return float(np.degrees(np.arctan2(s, c)))


def translation_error_deg(t_est, t_gt):
    t_est = np.asarray(t_est, dtype=float)
    t_gt = np.asarray(t_gt, dtype=float)
    if not (np.any(t_est) and np.any(t_gt)):
        raise DegenerateTranslation("zero-length translation")
    c = cross3(t_est, t_gt)
    return float(np.degrees(np.arctan2(np.sqrt(c @ c), t_est @ t_gt)))


def essential_from_pose(pose):
    """Essential matrix ``E`` with ``q2^T E q1 = 0`` for bearings of view 1 and 2.

    Under the ``X1 = R X2 + t`` convention this is ``(skew(t) R)^T``, scaled
    to Frobenius norm sqrt(2).
    """
    t = np.asarray(pose.t, dtype=float)
    if np.linalg.norm(t) == 0:
        raise DegenerateTranslation("zero translation has no essential matrix")
    E = (skew(t) @ pose.R).T
    return E * (np.sqrt(2.0) / np.linalg.norm(E))


def fundamental_from_essential(E, cam1, cam2):
    return cam2.K_inv.T @ E @ cam1.K_inv


def sampson_errors(F, x1, x2):
    """Vectorized Sampson distance; ``x1``, ``x2`` have shape (n, 2)."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    h1 = np.column_stack([x1, np.ones(len(x1))])
    h2 = np.column_stack([x2, np.ones(len(x2))])
    Fx1 = h1 @ F.T
    Ftx2 = h2 @ F
    num = np.einsum("ij,ij->i", h2, Fx1) ** 2
    den = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    out = np.full(len(x1), np.inf)
    ok = den > 0
    out[ok] = np.sqrt(num[ok] / den[ok])
    return out


def sampson_error_px(F, x1, x2):
    return float(sampson_errors(F, x1, x2)[0])
