"""Synthetic scenes with exactly known ground truth.

Scenes place features on one or two planar regions of a target image, map
them through per-plane homographies into the reference frame (noiselessly,
so every residual oracle has an exact answer), and optionally render a
matching image pair by piecewise-projective resampling of a smooth texture.
The two-plane scene is the canonical parallax case: one global model cannot
align both planes, but each plane admits an exact local alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .correspondences import DualFeatureSet, LinePair, PointPair, build_feature_set
from .homography import Homography, apply_homography


@dataclass
class SyntheticScene:
    fset: DualFeatureSet
    homographies: tuple[Homography, ...]
    plane_labels: np.ndarray  # (feature_count,) plane index per feature
    split_x: float | None  # target-frame x separating the planes (None: single)
    target: np.ndarray | None = None
    reference: np.ndarray | None = None


def smooth_texture(rng: np.random.Generator, dims: tuple[int, int], channels: int = 3) -> np.ndarray:
    """Band-limited random texture with structure at two scales."""
    w, h = dims
    coarse = gaussian_filter(rng.random((h, w, channels)), sigma=(12, 12, 0))
    fine = gaussian_filter(rng.random((h, w, channels)), sigma=(2, 2, 0))
    img = 0.65 * coarse + 0.35 * fine
    lo, hi = img.min(), img.max()
    img = (img - lo) / (hi - lo) * 205.0 + 25.0
    out = np.rint(img).astype(np.uint8)
    return out[..., 0] if channels == 1 else out


def jittered_translation(
    rng: np.random.Generator,
    translation: tuple[float, float],
    affine_jitter: float = 0.02,
    perspective_jitter: float = 2e-5,
) -> Homography:
    """Homography close to a translation, with mild affine/perspective parts."""
    a, b, c, d = rng.uniform(-affine_jitter, affine_jitter, 4)
    e, f = rng.uniform(-perspective_jitter, perspective_jitter, 2)
    m = np.array(
        [
            [1.0 + a, b, translation[0]],
            [c, 1.0 + d, translation[1]],
            [e, f, 1.0],
        ]
    )
    return Homography.from_matrix(m)


def _sample_plane_features(
    rng: np.random.Generator,
    h_plane: Homography,
    region: tuple[float, float, float, float],
    n_points: int,
    n_lines: int,
    target_dims: tuple[int, int],
    ref_dims: tuple[int, int],
    taken_ref: list[np.ndarray],
) -> tuple[list[PointPair], list[LinePair]]:
    """Rejection-sample in-bounds, well-separated features on one plane."""
    x0, x1, y0, y1 = region
    rw, rh = ref_dims

    def in_ref(p: np.ndarray) -> bool:
        return bool(1.0 <= p[0] < rw - 1.0 and 1.0 <= p[1] < rh - 1.0)

    points: list[PointPair] = []
    guard = 0
    while len(points) < n_points:
        guard += 1
        if guard > 50000:
            raise RuntimeError("feature sampling failed; region/homography too tight")
        p = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        p_ref = apply_homography(h_plane, p)
        if not in_ref(p_ref):
            continue
        if any(np.linalg.norm(p_ref - q) < 2.0 for q in taken_ref):
            continue
        taken_ref.append(p_ref)
        points.append(PointPair(p=p, p_ref=p_ref))

    lines: list[LinePair] = []
    guard = 0
    while len(lines) < n_lines:
        guard += 1
        if guard > 50000:
            raise RuntimeError("segment sampling failed; region/homography too tight")
        a = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        ang = rng.uniform(0, 2 * np.pi)
        length = rng.uniform(30.0, 90.0)
        b = a + length * np.array([np.cos(ang), np.sin(ang)])
        if not (x0 <= b[0] <= x1 and y0 <= b[1] <= y1):
            continue
        a_ref = apply_homography(h_plane, a)
        b_ref = apply_homography(h_plane, b)
        if not (in_ref(a_ref) and in_ref(b_ref)):
            continue
        lines.append(LinePair(endpoints=np.stack([a, b]), endpoints_ref=np.stack([a_ref, b_ref])))
    return points, lines


def single_plane_scene(
    seed: int,
    dims: tuple[int, int] = (640, 480),
    n_points: int = 40,
    n_lines: int = 4,
    with_images: bool = False,
) -> SyntheticScene:
    """All features share one homography; every local model is exact."""
    rng = np.random.default_rng(seed)
    w, h = dims
    h1 = jittered_translation(rng, (rng.uniform(-45, -25), rng.uniform(-10, 10)))
    points, lines = _sample_plane_features(
        rng, h1, (60.0, w - 25.0, 25.0, h - 25.0), n_points, n_lines, dims, dims, []
    )
    fset = build_feature_set(points, lines, dims, dims)
    scene = SyntheticScene(
        fset=fset,
        homographies=(h1,),
        plane_labels=np.zeros(fset.feature_count, dtype=int),
        split_x=None,
    )
    if with_images:
        _render_pair(scene, rng)
    return scene


def two_plane_scene(
    seed: int,
    dims: tuple[int, int] = (640, 480),
    points_per_plane: int = 60,
    lines_per_plane: int = 4,
    min_median_residual: float = 20.0,
    with_images: bool = False,
) -> SyntheticScene:
    """Two planes split left/right in the target frame, parallax between them.

    The two homographies are guaranteed to disagree by at least
    ``min_median_residual`` pixels (median cross-residual over the features),
    so grouping has an unambiguous two-cluster structure.
    """
    rng = np.random.default_rng(seed)
    w, h = dims
    split = w / 2.0
    gap = 55.0
    region1 = (40.0, split - gap, 25.0, h - 25.0)
    region2 = (split + gap, w - 25.0, 25.0, h - 25.0)

    for _ in range(50):
        base = np.array([rng.uniform(-45, -25), rng.uniform(-8, 8)])
        h1 = jittered_translation(rng, tuple(base))
        ang = rng.uniform(0, 2 * np.pi)
        mag = rng.uniform(28.0, 40.0)
        extra = mag * np.array([np.cos(ang), np.sin(ang)])
        h2 = jittered_translation(rng, tuple(base + extra))

        taken: list[np.ndarray] = []
        try:
            pts1, lns1 = _sample_plane_features(
                rng, h1, region1, points_per_plane, lines_per_plane, dims, dims, taken
            )
            pts2, lns2 = _sample_plane_features(
                rng, h2, region2, points_per_plane, lines_per_plane, dims, dims, taken
            )
        except RuntimeError:
            continue

        fset = build_feature_set(pts1 + pts2, lns1 + lns2, dims, dims)
        locs = np.concatenate(
            [
                np.array([pp.p for pp in pts1 + pts2]),
                np.array([lp.endpoints.mean(axis=0) for lp in lns1 + lns2]),
            ]
        )
        cross = np.linalg.norm(
            apply_homography(h1, locs) - apply_homography(h2, locs), axis=1
        )
        if np.median(cross) < min_median_residual:
            continue

        labels = np.zeros(fset.feature_count, dtype=int)
        labels[len(pts1) : len(pts1) + len(pts2)] = 1
        n_pts = len(pts1) + len(pts2)
        labels[n_pts + len(lns1) :] = 1
        scene = SyntheticScene(
            fset=fset,
            homographies=(h1, h2),
            plane_labels=labels,
            split_x=split,
        )
        if with_images:
            _render_pair(scene, rng)
        return scene
    raise RuntimeError("could not build a two-plane scene with the requested parallax")


def _render_pair(scene: SyntheticScene, rng: np.random.Generator) -> None:
    """Render target texture and its piecewise-projective reference view."""
    w, h = scene.fset.target_dims
    target = smooth_texture(rng, (w, h))
    rw, rh = scene.fset.ref_dims
    gx, gy = np.meshgrid(np.arange(rw, dtype=float), np.arange(rh, dtype=float))
    pix = np.stack([gx.ravel(), gy.ravel()], axis=1)

    src = apply_homography(scene.homographies[0].inverse(), pix)
    if len(scene.homographies) > 1 and scene.split_x is not None:
        src2 = apply_homography(scene.homographies[1].inverse(), pix)
        use2 = src[:, 0] >= scene.split_x
        src[use2] = src2[use2]

    sx = np.clip(src[:, 0], 0, w - 1)
    sy = np.clip(src[:, 1], 0, h - 1)
    x0 = np.minimum(sx.astype(int), w - 2)
    y0 = np.minimum(sy.astype(int), h - 2)
    fx = (sx - x0)[:, None]
    fy = (sy - y0)[:, None]
    img = target.astype(np.float64)
    vals = (
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x0 + 1] * fx * (1 - fy)
        + img[y0 + 1, x0] * (1 - fx) * fy
        + img[y0 + 1, x0 + 1] * fx * fy
    )
    scene.target = target
    scene.reference = np.rint(vals.reshape(rh, rw, -1)).astype(np.uint8).squeeze()


def identity_scene(seed: int, dims: tuple[int, int] = (320, 240)) -> SyntheticScene:
    """An image matched against itself with exact identity correspondences."""
    rng = np.random.default_rng(seed)
    w, h = dims
    img = smooth_texture(rng, dims)
    xs = np.linspace(30, w - 30, 6)
    ys = np.linspace(25, h - 25, 5)
    points = [
        PointPair(p=np.array([x, y]), p_ref=np.array([x, y])) for y in ys for x in xs
    ]
    seg1 = np.array([[40.0, 40.0], [w - 40.0, h - 60.0]])
    seg2 = np.array([[w - 50.0, 35.0], [55.0, h - 40.0]])
    lines = [
        LinePair(endpoints=seg1, endpoints_ref=seg1.copy()),
        LinePair(endpoints=seg2, endpoints_ref=seg2.copy()),
    ]
    fset = build_feature_set(points, lines, dims, dims)
    identity = Homography.from_matrix(np.eye(3))
    return SyntheticScene(
        fset=fset,
        homographies=(identity,),
        plane_labels=np.zeros(fset.feature_count, dtype=int),
        split_x=None,
        target=img,
        reference=img.copy(),
    )
