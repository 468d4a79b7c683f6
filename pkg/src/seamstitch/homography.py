"""Location-dependent homographies over joint point and line constraints.

A homography maps target pixels onto reference pixels and is stored as a
unit-norm 9-vector (row-major 3x3). Every point pair contributes the two
classic DLT rows; every line pair contributes one row per target endpoint
stating that the mapped endpoint lies on the infinite line through the
reference segment (cross-product incidence form). Both images are Hartley
conditioned before solving and the result is de-conditioned afterwards.

A *moving* DLT solve re-weights the same stacked system with a Gaussian of
the distance between a query anchor and each feature (floored at ``gamma``),
which yields the location-dependent homography used by the grouping graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .correspondences import DualFeatureSet
from .errors import AtInfinity, RankDeficient

# Minimum |w| of a projected homogeneous point before the feature is
# considered to map onto the line at infinity.
W_EPSILON = 1e-9

# Determinant floor below which a solved 3x3 matrix is treated as singular.
DET_EPSILON = 1e-12

# Weight floor of the moving DLT: far-away features keep this much influence
# so the local solve degrades gracefully toward the global one.
DEFAULT_GAMMA = 0.025


@dataclass(frozen=True)
class Homography:
    """Unit-norm, nonsingular 3x3 homography (row-major 9-vector ``h``)."""

    h: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.h.reshape(3, 3)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Homography":
        h = np.asarray(m, dtype=float).reshape(9).copy()
        norm = np.linalg.norm(h)
        if not np.isfinite(norm) or norm == 0.0:
            raise RankDeficient("homography entries not finite or all zero")
        h /= norm
        # Canonical sign: largest-magnitude entry positive, so equal
        # homographies compare equal bit-for-bit.
        k = int(np.argmax(np.abs(h)))
        if h[k] < 0:
            h = -h
        if abs(np.linalg.det(h.reshape(3, 3))) <= DET_EPSILON:
            raise RankDeficient("homography is singular after normalization")
        return cls(h=h)

    def inverse(self) -> "Homography":
        return Homography.from_matrix(np.linalg.inv(self.matrix))


def identity_homography() -> Homography:
    return Homography.from_matrix(np.eye(3))


def conditioning_transform(pts: np.ndarray) -> np.ndarray:
    """Hartley conditioning: centroid to origin, mean distance to sqrt(2)."""
    pts = np.asarray(pts, dtype=float)
    centroid = pts.mean(axis=0)
    dist = np.linalg.norm(pts - centroid, axis=1).mean()
    scale = np.sqrt(2.0) / dist if dist > 0 else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def _apply_affine(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts * t[[0, 1], [0, 1]] + t[[0, 1], [2, 2]]


@dataclass(frozen=True)
class DesignSystem:
    """Stacked DLT constraint rows in conditioned coordinates.

    ``a_rows`` holds 2 rows per point pair, ``b_rows`` 2 rows per line pair.
    ``t_target`` / ``t_ref`` are the conditioning transforms needed to map a
    conditioned solution back to pixel coordinates.
    """

    a_rows: np.ndarray
    b_rows: np.ndarray
    t_target: np.ndarray
    t_ref: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.a_rows, self.b_rows], axis=0)


def _point_rows(p: np.ndarray, p_ref: np.ndarray) -> list[list[float]]:
    x, y = p
    xr, yr = p_ref
    return [
        [0.0, 0.0, 0.0, -x, -y, -1.0, yr * x, yr * y, yr],
        [x, y, 1.0, 0.0, 0.0, 0.0, -xr * x, -xr * y, -xr],
    ]


def _line_rows(endpoints: np.ndarray, endpoints_ref: np.ndarray) -> list[list[float]]:
    # Infinite line through the reference segment, scaled so that l . (x,y,1)
    # is a Euclidean point-line distance.
    a = np.array([endpoints_ref[0, 0], endpoints_ref[0, 1], 1.0])
    b = np.array([endpoints_ref[1, 0], endpoints_ref[1, 1], 1.0])
    line = np.cross(a, b)
    line = line / np.hypot(line[0], line[1])
    rows = []
    for k in range(2):
        x, y = endpoints[k]
        rows.append(
            [
                line[0] * x, line[0] * y, line[0],
                line[1] * x, line[1] * y, line[1],
                line[2] * x, line[2] * y, line[2],
            ]
        )
    return rows


def build_design_system(
    fset: DualFeatureSet, feature_indices: Sequence[int] | None = None
) -> DesignSystem:
    """Assemble the conditioned constraint matrix for a feature subset.

    ``feature_indices`` selects features by their joint index (points first,
    then lines); ``None`` uses all of them. Conditioning transforms are
    computed from the selected features' target/reference locations (points
    plus segment endpoints).
    """
    n = fset.n_points
    if feature_indices is None:
        point_ids = list(range(n))
        line_ids = list(range(fset.n_lines))
    else:
        sel = sorted(int(i) for i in feature_indices)
        point_ids = [i for i in sel if i < n]
        line_ids = [i - n for i in sel if i >= n]

    locs_t = [fset.pts_target[i] for i in point_ids]
    locs_r = [fset.pts_ref[i] for i in point_ids]
    for j in line_ids:
        locs_t.extend(fset.lines_target[j])
        locs_r.extend(fset.lines_ref[j])
    if not locs_t:
        raise RankDeficient("no features selected")

    t_target = conditioning_transform(np.array(locs_t))
    t_ref = conditioning_transform(np.array(locs_r))

    a_rows = []
    for i in point_ids:
        p = _apply_affine(t_target, fset.pts_target[i])
        p_ref = _apply_affine(t_ref, fset.pts_ref[i])
        a_rows.extend(_point_rows(p, p_ref))
    b_rows = []
    for j in line_ids:
        ep = _apply_affine(t_target, fset.lines_target[j])
        ep_ref = _apply_affine(t_ref, fset.lines_ref[j])
        b_rows.extend(_line_rows(ep, ep_ref))

    a = np.array(a_rows, dtype=float) if a_rows else np.zeros((0, 9))
    b = np.array(b_rows, dtype=float) if b_rows else np.zeros((0, 9))
    return DesignSystem(a_rows=a, b_rows=b, t_target=t_target, t_ref=t_ref)


def gaussian_weights(
    anchor: np.ndarray,
    fset: DualFeatureSet,
    sigma: float,
    gamma: float = DEFAULT_GAMMA,
) -> np.ndarray:
    """Per-row moving-DLT weights for a solve anchored at ``anchor``.

    The weight of feature f is ``max(exp(-|anchor - loc(f)|^2 / sigma^2),
    gamma)`` where loc(f) is the reference-side point, or the reference
    midpoint for lines (matching the graph's anchor convention). Each
    feature's weight repeats on both of its constraint rows; rows are ordered
    points first, then lines.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not (0 <= gamma < 1):
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    anchor = np.asarray(anchor, dtype=float).reshape(2)
    d2 = np.sum((fset.ref_anchors - anchor) ** 2, axis=1)
    w = np.maximum(np.exp(-d2 / sigma**2), gamma)
    return np.repeat(w, 2)


def solve_mdlt(system: DesignSystem, weights: np.ndarray) -> Homography:
    """Minimize ``|diag(weights) [A; B] h|`` over unit-norm ``h``.

    Returns the de-conditioned homography. Raises :class:`RankDeficient`
    when fewer than 8 rows carry positive weight, when the weighted matrix
    has rank below 8, or when the de-conditioned matrix is singular; callers
    should then fall back to the global homography over all features.
    """
    m = system.stacked
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (m.shape[0],):
        raise ValueError(f"expected {m.shape[0]} weights, got {weights.shape}")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if int(np.count_nonzero(weights > 0)) < 8:
        raise RankDeficient("fewer than 8 rows with positive weight")

    weighted = m * weights[:, None]
    # full_matrices so vt spans all of R^9 even for exactly-8-row systems
    _, s, vt = np.linalg.svd(weighted, full_matrices=True)
    if s.shape[0] < 8 or s[7] <= 1e-10 * s[0]:
        raise RankDeficient("weighted system has rank below 8")
    h_cond = vt[-1].reshape(3, 3)
    h_pixel = np.linalg.inv(system.t_ref) @ h_cond @ system.t_target
    return Homography.from_matrix(h_pixel)


def global_homography(
    fset: DualFeatureSet, feature_indices: Sequence[int] | None = None
) -> Homography:
    """Plain (uniformly weighted) DLT over a feature subset."""
    system = build_design_system(fset, feature_indices)
    return solve_mdlt(system, np.ones(system.stacked.shape[0]))


def local_homography(
    fset: DualFeatureSet,
    anchor: np.ndarray,
    sigma: float,
    gamma: float = DEFAULT_GAMMA,
    system: DesignSystem | None = None,
) -> Homography:
    """Moving-DLT homography anchored at a reference-image location."""
    if system is None:
        system = build_design_system(fset)
    return solve_mdlt(system, gaussian_weights(anchor, fset, sigma, gamma))


def apply_homography(h: Homography, pts: np.ndarray) -> np.ndarray:
    """Project one point ``(2,)`` or many ``(K, 2)`` through ``h``.

    Raises :class:`AtInfinity` when any projected w-component falls within
    ``W_EPSILON`` of zero; the grouping stage treats that residual as +inf.
    """
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    p = np.atleast_2d(pts)
    hom = np.concatenate([p, np.ones((p.shape[0], 1))], axis=1) @ h.matrix.T
    w = hom[:, 2]
    if np.any(np.abs(w) <= W_EPSILON):
        raise AtInfinity("feature maps too close to the line at infinity")
    out = hom[:, :2] / w[:, None]
    return out[0] if single else out


def apply_to_segment(h: Homography, endpoints: np.ndarray) -> np.ndarray:
    """Map a segment by transforming its two endpoints."""
    return apply_homography(h, np.asarray(endpoints, dtype=float).reshape(2, 2))
