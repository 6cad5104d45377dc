"""Essential matrix fitting from many bearing pairs and its decomposition."""
from __future__ import annotations

import numpy as np

from .errors import (
    CheiralityFailure,
    DegenerateConfiguration,
    DegenerateRays,
    InsufficientData,
)
from .geometry import PoseWithScale

_W = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


def _as_pairs(q1, q2):
    q1 = np.atleast_2d(np.asarray(q1, dtype=float))
    q2 = np.atleast_2d(np.asarray(q2, dtype=float))
    if q1.shape != q2.shape or q1.shape[1] != 3:
        raise ValueError("bearing arrays must both have shape (n, 3)")
    return q1, q2


def hartley_normalization(p):
    """Similarity ``T`` moving 2D points to zero mean and mean radius sqrt(2)."""
    c = p.mean(axis=0)
    d = np.linalg.norm(p - c, axis=1).mean()
    s = np.sqrt(2.0) / d if d > 0 else 1.0
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def fit_linear(p1, p2):
    """Normalized linear estimate of ``F`` with ``p2h^T F p1h = 0``, no rank constraint.

    ``p1`` and ``p2`` are (n, 2) inhomogeneous image points in any units.
    """
    n = len(p1)
    if n < 8:
        raise InsufficientData(f"need at least 8 matches, got {n}")
    T1 = hartley_normalization(p1)
    T2 = hartley_normalization(p2)
    h1 = np.column_stack([p1, np.ones(n)]) @ T1.T
    h2 = np.column_stack([p2, np.ones(n)]) @ T2.T
    design = np.einsum("ni,nj->nij", h2, h1).reshape(n, 9)
    _, s, Vt = np.linalg.svd(design, full_matrices=True)
    if s[7] <= 1e-10 * s[0]:
        raise DegenerateConfiguration("epipolar design matrix has rank < 8")
    F = Vt[-1].reshape(3, 3)
    return T2.T @ F @ T1


def project_to_essential(F):
    U, s, Vt = np.linalg.svd(F)
    sigma = 0.5 * (s[0] + s[1])
    E = U @ np.diag([sigma, sigma, 0.0]) @ Vt
    return E * (np.sqrt(2.0) / np.linalg.norm(E))


def eight_point(q1, q2):
    """Essential matrix (``q2^T E q1 = 0``) from n >= 8 bearing pairs."""
    q1, q2 = _as_pairs(q1, q2)
    if len(q1) < 8:
        raise InsufficientData(f"need at least 8 matches, got {len(q1)}")
    p1 = q1[:, :2] / q1[:, 2:3]
    p2 = q2[:, :2] / q2[:, 2:3]
    return project_to_essential(fit_linear(p1, p2))


def _depths(R, t, q1, q2):
    # Solve lam1 q1 = lam2 R q2 + t in the least-squares sense (closest points).
    r2 = q2 @ R.T
    aa = np.einsum("ij,ij->i", q1, q1)
    bb = np.einsum("ij,ij->i", r2, r2)
    ab = np.einsum("ij,ij->i", q1, r2)
    at = q1 @ t
    bt = r2 @ t
    det = aa * bb - ab * ab
    cross = np.linalg.norm(np.cross(q1, r2), axis=1)
    ok = cross > 1e-12 * np.sqrt(aa * bb)
    safe = np.where(ok, det, 1.0)
    lam1 = (bb * at - ab * bt) / safe
    lam2 = (ab * at - aa * bt) / safe
    return lam1, lam2, ok, r2


def triangulate_linear(pose, q1, q2):
    """Midpoint triangulation in the view-1 frame.

    Returns ``(X, depth1, depth2)`` where ``X ~ depth1 * q1 ~ depth2 * R q2 + t``.
    """
    q1 = np.asarray(q1, dtype=float).reshape(1, 3)
    q2 = np.asarray(q2, dtype=float).reshape(1, 3)
    lam1, lam2, ok, r2 = _depths(pose.R, pose.t, q1, q2)
    if not ok[0]:
        raise DegenerateRays("rays are parallel")
    X = 0.5 * (lam1[0] * q1[0] + lam2[0] * r2[0] + pose.t)
    return X, float(lam1[0]), float(lam2[0])


def pose_candidates(E):
    """The four relative poses (``X1 = R X2 + t``, unit ``t``) consistent with ``E``."""
    U, _, Vt = np.linalg.svd(E)
    if np.linalg.det(U) < 0:
        U = -U
    if np.linalg.det(Vt) < 0:
        Vt = -Vt
    out = []
    for Rp in (U @ _W @ Vt, U @ _W.T @ Vt):
        for tp in (U[:, 2], -U[:, 2]):
            # E describes X2 = Rp X1 + tp; invert to the view-1 reference.
            out.append((Rp.T, -Rp.T @ tp))
    return out


def decompose_essential(E, q1, q2):
    """Pick the decomposition of ``E`` that puts most matches in front of both cameras."""
    q1, q2 = _as_pairs(q1, q2)
    best = None
    best_count = -1
    for R, t in pose_candidates(E):
        lam1, lam2, ok, _ = _depths(R, t, q1, q2)
        count = int(np.count_nonzero(ok & (lam1 > 0) & (lam2 > 0)))
        if count > best_count:
            best, best_count = (R, t), count
    if 2 * best_count <= len(q1):
        raise CheiralityFailure(f"only {best_count} of {len(q1)} matches in front of both views")
    R, t = best
    return PoseWithScale(R, t / np.linalg.norm(t), 1.0)
