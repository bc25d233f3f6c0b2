"""Two-view geometry: fundamental matrices, epipolar lines, homographies.

All functions are pure and operate on plain numpy arrays in pixel
coordinates (x = column, y = row). Points are 2-vectors, lines are
(a, b, c) with ax + by + c = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Degenerate geometric configuration."""


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("focal lengths must be positive")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class RelativePose:
    """Maps camera-A coordinates to camera-B: X_B = R @ X_A + t."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        t = np.asarray(self.t, dtype=float).reshape(3)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        if R.shape != (3, 3):
            raise GeometryError("R must be 3x3")
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise GeometryError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise GeometryError("det(R) != 1")
        if np.linalg.norm(t) == 0.0:
            raise GeometryError("translation must be nonzero")


@dataclass(frozen=True)
class FundamentalMatrix:
    F: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        object.__setattr__(self, "F", F)
        if F.shape != (3, 3):
            raise GeometryError("F must be 3x3")
        s = np.linalg.svd(F, compute_uv=False)
        if s[2] >= 1e-9 * s[0]:
            raise GeometryError("F must have rank 2")


@dataclass(frozen=True)
class Homography:
    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        if H.shape != (3, 3):
            raise GeometryError("H must be 3x3")
        if abs(np.linalg.det(H)) < 1e-12:
            raise GeometryError("H must be invertible")
        if abs(H[2, 2]) > 1e-12:
            H = H / H[2, 2]
        object.__setattr__(self, "H", H)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.H))


@dataclass(frozen=True)
class TwoViewGeometry:
    """Calibration and relative pose of an image pair, with its F matrix."""

    kA: CameraIntrinsics
    kB: CameraIntrinsics
    pose: RelativePose
    F: FundamentalMatrix

    @classmethod
    def from_pose(
        cls, kA: CameraIntrinsics, kB: CameraIntrinsics, pose: RelativePose
    ) -> "TwoViewGeometry":
        return cls(kA, kB, pose, fundamental_from_pose(kA, kB, pose))

    def flipped(self) -> "TwoViewGeometry":
        """The same geometry seen from B to A."""
        R = self.pose.R.T
        t = -R @ self.pose.t
        return TwoViewGeometry.from_pose(self.kB, self.kA, RelativePose(R, t))


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def fundamental_from_pose(
    kA: CameraIntrinsics, kB: CameraIntrinsics, pose: RelativePose
) -> FundamentalMatrix:
    """F such that pB~^T F pA~ = 0 for projections of any common 3D point.

    Returned F is scaled to unit Frobenius norm with a deterministic sign.
    """
    if np.linalg.norm(pose.t) == 0.0:
        raise GeometryError("no epipolar geometry for pure rotation")
    E = skew(pose.t) @ pose.R
    F = np.linalg.inv(kB.matrix()).T @ E @ np.linalg.inv(kA.matrix())
    F = F / np.linalg.norm(F)
    # fix sign by the largest-magnitude entry
    flat = F.ravel()
    lead = flat[np.argmax(np.abs(flat))]
    if lead < 0:
        F = -F
    return FundamentalMatrix(F)


def epipolar_line(f: FundamentalMatrix, p) -> np.ndarray:
    """Line l = F (x, y, 1)^T with (a, b) rescaled to unit norm."""
    x, y = float(p[0]), float(p[1])
    l = f.F @ np.array([x, y, 1.0])
    n = np.hypot(l[0], l[1])
    if n < 1e-15:
        raise GeometryError("degenerate epipolar line")
    return l / n


def point_line_distance(p, l) -> float:
    """Perpendicular distance from point p to line (a, b, c)."""
    a, b, c = float(l[0]), float(l[1]), float(l[2])
    n = np.hypot(a, b)
    if n < 1e-15:
        raise GeometryError("degenerate line")
    return abs(a * p[0] + b * p[1] + c) / n


def annotate_match(pA, pB, f: FundamentalMatrix, eps: float) -> bool:
    """True iff both symmetric point-to-epipolar-line distances are <= eps.

    Degenerate epipolar lines in either direction label the match incorrect
    rather than raising, so reward assignment stays total during training.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    try:
        lB = epipolar_line(f, pA)
        dB = point_line_distance(pB, lB)
        lA = epipolar_line(FundamentalMatrix(f.F.T), pB)
        dA = point_line_distance(pA, lA)
    except GeometryError:
        return False
    return dB <= eps and dA <= eps


def annotate_matches(pA: np.ndarray, pB: np.ndarray, f: FundamentalMatrix, eps: float) -> np.ndarray:
    """Vectorized annotate_match over N point pairs (N x 2 arrays).

    Identical labels to the scalar routine; degenerate lines go incorrect.
    """
    pA = np.asarray(pA, dtype=float).reshape(-1, 2)
    pB = np.asarray(pB, dtype=float).reshape(-1, 2)
    hA = np.concatenate([pA, np.ones((len(pA), 1))], axis=1)
    hB = np.concatenate([pB, np.ones((len(pB), 1))], axis=1)
    lB = hA @ f.F.T          # lines in image B, one per pair
    lA = hB @ f.F            # lines in image A (transpose transfer)
    nB = np.hypot(lB[:, 0], lB[:, 1])
    nA = np.hypot(lA[:, 0], lA[:, 1])
    ok = (nB >= 1e-15) & (nA >= 1e-15)
    nB = np.where(ok, nB, 1.0)
    nA = np.where(ok, nA, 1.0)
    dB = np.abs(np.sum(lB * hB, axis=1)) / nB
    dA = np.abs(np.sum(lA * hA, axis=1)) / nA
    return ok & (dB <= eps) & (dA <= eps)


def apply_homography(h: Homography, p) -> np.ndarray:
    """Map a single pixel point through h (projective, dehomogenized)."""
    x, y = float(p[0]), float(p[1])
    v = h.H @ np.array([x, y, 1.0])
    if abs(v[2]) <= 1e-12:
        raise GeometryError("point at infinity")
    return v[:2] / v[2]


def apply_homography_batch(h: Homography, pts: np.ndarray) -> np.ndarray:
    """Map N x 2 points through h. Points at infinity map to NaN."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    hp = np.concatenate([pts, np.ones((len(pts), 1))], axis=1) @ h.H.T
    w = hp[:, 2:3]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.abs(w) > 1e-12, hp[:, :2] / w, np.nan)
    return out


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity T putting the centroid at the origin, mean radius sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.linalg.norm(pts - c, axis=1).mean()
    s = np.sqrt(2.0) / max(d, 1e-12)
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Normalized DLT from >= 4 correspondences; None when degenerate."""
    Ts, Td = _hartley_normalization(src), _hartley_normalization(dst)
    s = np.concatenate([src, np.ones((len(src), 1))], axis=1) @ Ts.T
    d = np.concatenate([dst, np.ones((len(dst), 1))], axis=1) @ Td.T
    n = len(src)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:3] = s
    A[0::2, 6:9] = -d[:, 0:1] * s
    A[1::2, 3:6] = s
    A[1::2, 6:9] = -d[:, 1:2] * s
    _, sv, vt = np.linalg.svd(A)
    if sv[-2] < 1e-12:  # solution space not 1-dimensional: degenerate sample
        return None
    H = np.linalg.inv(Td) @ vt[-1].reshape(3, 3) @ Ts
    if abs(np.linalg.det(H)) < 1e-12:
        return None
    return H


def estimate_homography_robust(
    src_pts,
    dst_pts,
    inlier_eps: float = 3.0,
    iterations: int = 2000,
    seed: int = 0,
):
    """RANSAC homography from point matches.

    Hypotheses come from random 4-point normalized-DLT fits; the winner is
    refit on all of its inliers, and the returned mask is recomputed with
    the refit H. Deterministic given the seed.

    Returns (Homography, inlier_mask). Raises GeometryError when fewer than
    4 matches are given or no hypothesis reaches 4 inliers.
    """
    src = np.asarray(src_pts, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst_pts, dtype=float).reshape(-1, 2)
    n = len(src)
    if n < 4 or len(dst) != n:
        raise GeometryError("estimation failed: need >= 4 matches")
    rng = np.random.default_rng(seed)

    def transfer_errors(H):
        hp = np.concatenate([src, np.ones((n, 1))], axis=1) @ H.T
        w = hp[:, 2]
        err = np.full(n, np.inf)
        valid = np.abs(w) > 1e-12
        err[valid] = np.linalg.norm(hp[valid, :2] / w[valid, None] - dst[valid], axis=1)
        return err

    best_inliers = None
    best_score = (-1, np.inf)  # (n_inliers, mean error) lexicographic
    for _ in range(iterations):
        idx = rng.choice(n, size=4, replace=False)
        H = _dlt_homography(src[idx], dst[idx])
        if H is None:
            continue
        err = transfer_errors(H)
        inl = err <= inlier_eps
        k = int(inl.sum())
        if k < 4:
            continue
        score = (k, float(err[inl].mean()))
        if score[0] > best_score[0] or (score[0] == best_score[0] and score[1] < best_score[1]):
            best_score = score
            best_inliers = inl
    if best_inliers is None:
        raise GeometryError("estimation failed: no hypothesis with >= 4 inliers")

    H = _dlt_homography(src[best_inliers], dst[best_inliers])
    if H is None:
        raise GeometryError("estimation failed: degenerate inlier refit")
    mask = transfer_errors(H) <= inlier_eps
    return Homography(H), mask
