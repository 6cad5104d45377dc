"""Single-correspondence relative pose solvers (affine frame + relative depth).

Both solvers fit ``A ~ scale * R @ B`` for the rotation and depth scale and
then read the translation off ``a = scale * R @ b + t``.
"""
from __future__ import annotations

import enum

import numpy as np

from .errors import DegenerateFrame, NumericalFailure
from .geometry import PoseWithScale, cross3

DEGENERATE_EPS = 1e-12


class SolverVariant(str, enum.Enum):
    UMEYAMA = "umeyama"
    PROPOSED = "proposed"


def orthonorm(Y):
    """Rotation built from the two columns of a 3x2 matrix.

    The first column is the unit normal of the column span, the third is the
    direction of the second column.
    """
    Y = np.asarray(Y, dtype=float)
    c = Y[:, 1]
    n = cross3(Y[:, 0], c)
    n_norm = np.sqrt(n @ n)
    c_norm = np.sqrt(c @ c)
    if not (n_norm >= DEGENERATE_EPS and c_norm >= DEGENERATE_EPS):
        raise DegenerateFrame("frame columns are parallel or vanishing")
    rx = n / n_norm
    rz = c / c_norm
    return np.column_stack([rx, cross3(rz, rx), rz])


def recover_scale(R, A, B):
    """Least-squares depth scale for a known rotation: argmin_s ||A - s R B||_F."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    den = np.sum(B * B)
    if not den > 1e-20:
        raise DegenerateFrame("B vanishes")
    return float(np.sum(A * (R @ B)) / den)


def recover_translation(a, b, R, scale):
    return np.asarray(a, dtype=float) - scale * (R @ np.asarray(b, dtype=float))


def solve_proposed(lc):
    R_A = orthonorm(lc.A)
    R_B = orthonorm(lc.B)
    R = R_A @ R_B.T
    scale = recover_scale(R, lc.A, lc.B)
    return PoseWithScale(R, recover_translation(lc.a, lc.b, R, scale), scale)


def solve_umeyama(lc):
    A = np.asarray(lc.A)
    B = np.asarray(lc.B)
    den = np.sum(B * B)
    if not den > 1e-20:
        raise DegenerateFrame("B vanishes")
    cov = A @ B.T
    if not np.all(np.isfinite(cov)):
        raise NumericalFailure("non-finite covariance")
    try:
        U, S, Vt = np.linalg.svd(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    d = np.ones(3)
    d[2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    R = (U * d) @ Vt
    scale = float(S @ d / den)
    return PoseWithScale(R, recover_translation(lc.a, lc.b, R, scale), scale)


_SOLVERS = {
    SolverVariant.UMEYAMA: solve_umeyama,
    SolverVariant.PROPOSED: solve_proposed,
}


def solve(lc, variant=SolverVariant.PROPOSED):
    return _SOLVERS[SolverVariant(variant)](lc)


def frame_residual(pose, lc):
    """||A - scale R B||_F, the objective both solvers minimize."""
    return float(np.linalg.norm(lc.A - pose.scale * pose.R @ lc.B))
