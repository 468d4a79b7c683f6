"""Seam estimation over the warped overlap and final compositing.

The overlap is labeled target/reference by an exact min-cut on the
4-connected pixel grid. Edge costs follow color discrimination as humans
perceive it: per-pixel CIELAB distance between the two images squashed by a
sigmoid centered at one just-noticeable difference, optionally scaled by a
saliency map, then averaged over each pixel pair. Overlap pixels touching
the target-only region are anchored to the target label and vice versa, so
the cut must separate the two image bodies.

Seam quality is the mean zero-mean normalized cross correlation of local
patches along the seam, folded to [0, 1] where 0 is invisible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt
from skimage.color import rgb2lab

from .errors import EmptyOverlap, NoAnchor
from .mincut import min_cut

# Sigmoid midpoint of the color-difference metric: one just-noticeable
# difference in CIELAB units.
DEFAULT_MU_C = 2.3
DEFAULT_S_C = 1.0

DEFAULT_PATCH = 15

# Terminal-edge capacity; far above any achievable finite cut.
_INF_CAPACITY = np.int64(2) ** 62


def bt601_luma(image: np.ndarray) -> np.ndarray:
    """ITU-R BT.601 luma of an RGB raster; grayscale passes through."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114


def _to_lab(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    return rgb2lab(np.clip(img, 0.0, 255.0) / 255.0)


def _count_neighbors8(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask.astype(np.int32), 1)
    h, w = mask.shape
    total = np.zeros((h, w), dtype=np.int32)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            total += padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return total


@dataclass
class OverlapRegion:
    """Pixels covered by both images, with anchor labels on its boundary.

    ``origin`` is the global coordinate of canvas pixel (0, 0). Anchors come
    from the 8-neighborhood: an overlap pixel touching more target-only than
    reference-only pixels must keep the target label (ties go to reference).
    """

    overlap: np.ndarray
    target_anchor: np.ndarray
    ref_anchor: np.ndarray
    origin: tuple[int, int] = (0, 0)

    @property
    def pixel_count(self) -> int:
        return int(self.overlap.sum())

    @classmethod
    def from_masks(
        cls,
        target_mask: np.ndarray,
        ref_mask: np.ndarray,
        origin: tuple[int, int] = (0, 0),
    ) -> "OverlapRegion":
        overlap = target_mask & ref_mask
        target_only = target_mask & ~ref_mask
        ref_only = ref_mask & ~target_mask
        t_cnt = _count_neighbors8(target_only)
        r_cnt = _count_neighbors8(ref_only)
        boundary = overlap & ((t_cnt > 0) | (r_cnt > 0))
        target_anchor = boundary & (t_cnt > r_cnt)
        ref_anchor = boundary & (r_cnt >= t_cnt) & (r_cnt > 0)
        return cls(
            overlap=overlap,
            target_anchor=target_anchor,
            ref_anchor=ref_anchor,
            origin=origin,
        )


@dataclass
class CostMap:
    """Per-pixel perception terms and the 4-neighbor edge costs they induce.

    ``right[y, x]`` is the cost of the edge to pixel (y, x+1), ``down`` the
    edge to (y+1, x); entries are valid only where both endpoints overlap.
    """

    pixel_term: np.ndarray
    right: np.ndarray
    down: np.ndarray
    valid_right: np.ndarray
    valid_down: np.ndarray


def perception_cost(
    warped_target: np.ndarray,
    reference: np.ndarray,
    region: OverlapRegion,
    saliency: np.ndarray | None = None,
    mu_c: float = DEFAULT_MU_C,
    s_c: float = DEFAULT_S_C,
) -> CostMap:
    """Perception-based edge costs over the overlap.

    Color difference is the CIELAB Euclidean distance, squashed by
    ``1 / (1 + exp(-(delta - mu_c) / s_c))`` and weighted by the saliency
    map (default 1 everywhere); an edge costs the mean of its two pixel
    terms. Raises :class:`EmptyOverlap` when the region has no pixels.
    """
    if region.pixel_count == 0:
        raise EmptyOverlap("warped target and reference share no pixels")
    lab_t = _to_lab(warped_target)
    lab_r = _to_lab(reference)
    delta = np.linalg.norm(lab_t - lab_r, axis=-1)
    sig = 1.0 / (1.0 + np.exp(-(delta - mu_c) / s_c))
    term = sig if saliency is None else sig * np.asarray(saliency, dtype=np.float64)
    term = np.where(region.overlap, term, 0.0)

    ov = region.overlap
    right = np.zeros_like(term)
    down = np.zeros_like(term)
    valid_right = np.zeros_like(ov)
    valid_down = np.zeros_like(ov)
    valid_right[:, :-1] = ov[:, :-1] & ov[:, 1:]
    valid_down[:-1, :] = ov[:-1, :] & ov[1:, :]
    right[:, :-1] = np.where(valid_right[:, :-1], (term[:, :-1] + term[:, 1:]) / 2.0, 0.0)
    down[:-1, :] = np.where(valid_down[:-1, :], (term[:-1, :] + term[1:, :]) / 2.0, 0.0)
    return CostMap(
        pixel_term=term, right=right, down=down, valid_right=valid_right, valid_down=valid_down
    )


@dataclass
class SeamResult:
    """Binary overlap labeling (0 = target, 1 = reference) and its seam.

    ``seam_pixels`` are the (x, y) canvas coordinates of overlap pixels with
    at least one 4-neighbor of the opposite label, in row-major order.
    ``total_cost`` sums the cut edges' costs. ``zncc_score`` is attached by
    :func:`zncc_quality`.
    """

    labels: np.ndarray
    overlap: np.ndarray
    seam_pixels: np.ndarray
    total_cost: float
    origin: tuple[int, int] = (0, 0)
    zncc_score: float | None = None


def _capacity_scale(costs: np.ndarray) -> float:
    """Power-of-two scale mapping float costs to integer capacities.

    A power of two keeps dyadic-rational costs exact (the mantissa is
    untouched), and the cap keeps every finite cut far below the terminal
    capacity. Relative quantization error stays under 2^-40.
    """
    total = float(costs.sum())
    if total <= 0.0:
        return 1.0
    exp = min(40, int(math.floor(61 - math.log2(total))))
    return float(2.0 ** max(exp, 0))


def _seam_pixels_of(labels: np.ndarray, overlap: np.ndarray) -> np.ndarray:
    opposite = np.zeros_like(overlap)
    both_h = overlap[:, :-1] & overlap[:, 1:]
    diff_h = both_h & (labels[:, :-1] != labels[:, 1:])
    opposite[:, :-1] |= diff_h
    opposite[:, 1:] |= diff_h
    both_v = overlap[:-1, :] & overlap[1:, :]
    diff_v = both_v & (labels[:-1, :] != labels[1:, :])
    opposite[:-1, :] |= diff_v
    opposite[1:, :] |= diff_v
    yx = np.argwhere(opposite & overlap)
    return yx[:, ::-1].copy()  # (x, y), row-major order preserved


def find_seam(cost: CostMap, region: OverlapRegion) -> SeamResult:
    """Exact minimum-cost target/reference labeling of the overlap.

    Solves a max-flow/min-cut on the 4-connected overlap grid with anchor
    pixels tied to their side by effectively infinite capacities. Float
    costs are quantized by a power-of-two scale (relative error below
    2^-40), which keeps the solve exact for dyadic-rational costs; the
    returned ``total_cost`` re-sums the original float costs over the cut.
    """
    overlap = region.overlap
    count = region.pixel_count
    if count == 0:
        raise EmptyOverlap("cannot cut an empty overlap")
    has_t = bool(region.target_anchor.any())
    has_r = bool(region.ref_anchor.any())
    if not has_t and not has_r:
        # Coincident coverage: no transition exists, so there is nothing to
        # cut - everything takes the reference label and the seam is empty.
        return SeamResult(
            labels=np.ones(overlap.shape, dtype=np.uint8),
            overlap=overlap,
            seam_pixels=np.zeros((0, 2), dtype=int),
            total_cost=0.0,
            origin=region.origin,
        )
    if not has_t or not has_r:
        raise NoAnchor(
            "overlap boundary misses one side "
            f"(target anchors: {int(region.target_anchor.sum())}, "
            f"reference anchors: {int(region.ref_anchor.sum())}); "
            "one image likely contains the other"
        )

    ids = np.full(overlap.shape, -1, dtype=np.int64)
    ids[overlap] = np.arange(count)

    edges_u = []
    edges_v = []
    edges_c = []
    for valid, arr, dy, dx in (
        (cost.valid_right, cost.right, 0, 1),
        (cost.valid_down, cost.down, 1, 0),
    ):
        ys, xs = np.nonzero(valid)
        edges_u.append(ids[ys, xs])
        edges_v.append(ids[ys + dy, xs + dx])
        edges_c.append(arr[ys, xs])
    pair_u = np.concatenate(edges_u) if edges_u else np.zeros(0, dtype=np.int64)
    pair_v = np.concatenate(edges_v) if edges_v else np.zeros(0, dtype=np.int64)
    pair_c = np.concatenate(edges_c) if edges_c else np.zeros(0)

    scale = _capacity_scale(pair_c)
    pair_cap = np.rint(pair_c * scale).astype(np.int64)

    terminal = np.zeros(count, dtype=np.int64)
    terminal[ids[region.target_anchor]] = _INF_CAPACITY
    terminal[ids[region.ref_anchor]] = -_INF_CAPACITY
    _, source_side = min_cut(count, pair_u, pair_v, pair_cap, terminal)

    labels = np.ones(overlap.shape, dtype=np.uint8)
    labels[overlap] = np.where(source_side, 0, 1).astype(np.uint8)

    cut_h = cost.valid_right & (labels != np.roll(labels, -1, axis=1))
    cut_v = cost.valid_down & (labels != np.roll(labels, -1, axis=0))
    total = float(cost.right[cut_h].sum() + cost.down[cut_v].sum())

    return SeamResult(
        labels=labels,
        overlap=overlap,
        seam_pixels=_seam_pixels_of(labels, overlap),
        total_cost=total,
        origin=region.origin,
    )


def zncc_quality(
    seam: SeamResult,
    warped_target: np.ndarray,
    reference: np.ndarray,
    patch: int = DEFAULT_PATCH,
) -> float:
    """Mean folded ZNCC dissimilarity of patches along the seam, in [0, 1].

    Each seam pixel contributes ``(1 - zncc) / 2`` of its two luma patches
    (clipped at canvas borders). Identical patches score 0 exactly;
    zero-variance patches count as perfectly correlated only when both are
    constant and equal within one intensity level. Lower is better.
    """
    if patch % 2 != 1 or patch < 1:
        raise ValueError(f"patch side must be odd and positive, got {patch}")
    if len(seam.seam_pixels) == 0:
        return 0.0
    lum_t = bt601_luma(warped_target)
    lum_r = bt601_luma(reference)
    h, w = lum_t.shape
    r = patch // 2
    scores = np.empty(len(seam.seam_pixels))
    for k, (x, y) in enumerate(seam.seam_pixels):
        y0, y1 = max(0, y - r), min(h, y + r + 1)
        x0, x1 = max(0, x - r), min(w, x + r + 1)
        a = lum_t[y0:y1, x0:x1]
        b = lum_r[y0:y1, x0:x1]
        if np.array_equal(a, b):
            z = 1.0
        else:
            va = a - a.mean()
            vb = b - b.mean()
            sa = float((va * va).sum())
            sb = float((vb * vb).sum())
            if sa < 1e-9 or sb < 1e-9:
                both_const = sa < 1e-9 and sb < 1e-9
                z = 1.0 if both_const and abs(float(a.mean() - b.mean())) <= 1.0 else 0.0
            else:
                z = float(np.clip((va * vb).sum() / math.sqrt(sa * sb), -1.0, 1.0))
        scores[k] = (1.0 - z) / 2.0
    return float(scores.mean())


def composite(
    warped_target: np.ndarray,
    reference: np.ndarray,
    seam: SeamResult,
    target_mask: np.ndarray,
    ref_mask: np.ndarray,
    feather_radius: int = 0,
) -> np.ndarray:
    """Assemble the final canvas from the seam labeling.

    Target-only pixels take the target, reference-only pixels the reference,
    overlap pixels follow the labels. ``feather_radius`` > 0 linearly blends
    the two images within that many pixels of the seam.
    """
    out = np.zeros_like(np.asarray(warped_target, dtype=np.float64))
    overlap = seam.overlap
    tgt_side = (target_mask & ~ref_mask) | (overlap & (seam.labels == 0))
    ref_side = (ref_mask & ~target_mask) | (overlap & (seam.labels == 1))
    out[tgt_side] = np.asarray(warped_target, dtype=np.float64)[tgt_side]
    out[ref_side] = np.asarray(reference, dtype=np.float64)[ref_side]

    if feather_radius > 0 and len(seam.seam_pixels) > 0:
        seam_mask = np.zeros(overlap.shape, dtype=bool)
        seam_mask[seam.seam_pixels[:, 1], seam.seam_pixels[:, 0]] = True
        dist = distance_transform_edt(~seam_mask)
        sign = np.where(seam.labels == 0, 1.0, -1.0)
        alpha = np.clip(0.5 + sign * dist / (2.0 * feather_radius), 0.0, 1.0)
        blend_zone = overlap & (dist < feather_radius)
        a = alpha[blend_zone]
        if out.ndim == 3:
            a = a[:, None]
        out[blend_zone] = (
            a * np.asarray(warped_target, dtype=np.float64)[blend_zone]
            + (1.0 - a) * np.asarray(reference, dtype=np.float64)[blend_zone]
        )
    return out


def dump_seam(
    seam: SeamResult,
    path: str | Path,
    target_mask: np.ndarray | None = None,
    ref_mask: np.ndarray | None = None,
) -> None:
    """Write the label mask as PNG (0 target, 255 reference, 127 uncovered)
    and the seam pixel list as JSON next to it."""
    from PIL import Image

    path = Path(path)
    png_path = path if path.suffix.lower() == ".png" else path.with_suffix(".png")
    mask_img = np.full(seam.overlap.shape, 127, dtype=np.uint8)
    if target_mask is not None and ref_mask is not None:
        mask_img[target_mask & ~ref_mask] = 0
        mask_img[ref_mask & ~target_mask] = 255
    mask_img[seam.overlap & (seam.labels == 0)] = 0
    mask_img[seam.overlap & (seam.labels == 1)] = 255
    Image.fromarray(mask_img).save(png_path)

    doc = {
        "origin": list(seam.origin),
        "total_cost": seam.total_cost,
        "zncc_score": seam.zncc_score,
        "seam_pixels": [[int(x), int(y)] for x, y in seam.seam_pixels],
    }
    with open(png_path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
