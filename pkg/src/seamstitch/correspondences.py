"""Dual-feature correspondence model and its JSON file format.

Point matches and line-segment matches between a target image (the one that
gets warped) and a reference image live in one container so the rest of the
engine can treat them uniformly: feature index ``i < n_points`` is a point,
anything above is a line (index ``i - n_points`` into the line list).

Coordinates are pixels with the origin at the top-left corner, x rightward
and y downward. A coordinate is in bounds when ``0 <= x < width`` and
``0 <= y < height``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

# Two point features closer than this in the reference image are duplicates:
# below feature-localization accuracy they only destabilize the Delaunay
# triangulation of the grouping graph.
DUPLICATE_TOLERANCE_PX = 0.5

# Segments shorter than this on either side carry no usable direction.
MIN_SEGMENT_LENGTH_PX = 2.0


@dataclass(frozen=True)
class PointPair:
    """One point correspondence: ``p`` in the target image, ``p_ref`` in the reference."""

    p: np.ndarray
    p_ref: np.ndarray


@dataclass(frozen=True)
class LinePair:
    """One segment correspondence, stored as (2, 2) endpoint arrays per image."""

    endpoints: np.ndarray
    endpoints_ref: np.ndarray


@dataclass(frozen=True)
class DualFeatureSet:
    """Validated joint set of point and line correspondences.

    Construct through :func:`build_feature_set` or :func:`load_correspondences`
    so the invariants (bounds, non-degeneracy, no duplicate points, enough
    constraints for one homography) are enforced.
    """

    points: tuple[PointPair, ...]
    lines: tuple[LinePair, ...]
    target_dims: tuple[int, int]
    ref_dims: tuple[int, int]

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def feature_count(self) -> int:
        return len(self.points) + len(self.lines)

    def is_line(self, feature_index: int) -> bool:
        return feature_index >= len(self.points)

    @cached_property
    def pts_target(self) -> np.ndarray:
        """(N, 2) target-side point locations."""
        if not self.points:
            return np.zeros((0, 2))
        return np.array([pp.p for pp in self.points], dtype=float)

    @cached_property
    def pts_ref(self) -> np.ndarray:
        """(N, 2) reference-side point locations."""
        if not self.points:
            return np.zeros((0, 2))
        return np.array([pp.p_ref for pp in self.points], dtype=float)

    @cached_property
    def lines_target(self) -> np.ndarray:
        """(M, 2, 2) target-side segments."""
        if not self.lines:
            return np.zeros((0, 2, 2))
        return np.array([lp.endpoints for lp in self.lines], dtype=float)

    @cached_property
    def lines_ref(self) -> np.ndarray:
        """(M, 2, 2) reference-side segments."""
        if not self.lines:
            return np.zeros((0, 2, 2))
        return np.array([lp.endpoints_ref for lp in self.lines], dtype=float)

    @cached_property
    def ref_anchors(self) -> np.ndarray:
        """(N + M, 2) reference-side anchor per feature.

        Points anchor at themselves, lines at their reference midpoint; the
        grouping graph triangulates exactly these locations.
        """
        mids = self.lines_ref.mean(axis=1) if self.lines else np.zeros((0, 2))
        return np.concatenate([self.pts_ref, mids], axis=0)


def sample_segment(endpoints: np.ndarray) -> np.ndarray:
    """Return the (3, 2) sample set of a segment: both endpoints and the midpoint."""
    a = np.asarray(endpoints[0], dtype=float)
    b = np.asarray(endpoints[1], dtype=float)
    return np.stack([a, (a + b) / 2.0, b])


def sample_line(line: LinePair) -> np.ndarray:
    """Sample the reference-side segment of ``line`` at its endpoints and midpoint."""
    return sample_segment(line.endpoints_ref)


def _check_bounds(xy: np.ndarray, dims: tuple[int, int], what: str, record: int) -> None:
    x, y = float(xy[0]), float(xy[1])
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValidationError(f"{what} has non-finite coordinate ({x}, {y})", record)
    w, h = dims
    if not (0.0 <= x < w and 0.0 <= y < h):
        raise ValidationError(
            f"{what} ({x}, {y}) outside {w}x{h} image bounds", record
        )


def build_feature_set(
    points: list[PointPair] | tuple[PointPair, ...],
    lines: list[LinePair] | tuple[LinePair, ...],
    target_dims: tuple[int, int],
    ref_dims: tuple[int, int],
) -> DualFeatureSet:
    """Validate all invariants and assemble a :class:`DualFeatureSet`.

    Raises :class:`ValidationError` (with the offending record index) on
    out-of-bounds coordinates, degenerate segments, duplicate points, or a
    constraint count below the 4 needed for one homography (lines count 3x).
    """
    tw, th = int(target_dims[0]), int(target_dims[1])
    rw, rh = int(ref_dims[0]), int(ref_dims[1])
    if tw <= 0 or th <= 0 or rw <= 0 or rh <= 0:
        raise ValidationError(f"non-positive image dims {target_dims} / {ref_dims}")

    pts = []
    for i, pp in enumerate(points):
        p = np.asarray(pp.p, dtype=float).reshape(2)
        p_ref = np.asarray(pp.p_ref, dtype=float).reshape(2)
        _check_bounds(p, (tw, th), "point p", i)
        _check_bounds(p_ref, (rw, rh), "point p_ref", i)
        pts.append(PointPair(p=p, p_ref=p_ref))

    for i, pp in enumerate(pts):
        for j in range(i):
            if np.linalg.norm(pp.p_ref - pts[j].p_ref) < DUPLICATE_TOLERANCE_PX:
                raise ValidationError(
                    f"point duplicates record {j} in the reference image "
                    f"(closer than {DUPLICATE_TOLERANCE_PX} px)",
                    i,
                )

    lns = []
    for i, lp in enumerate(lines):
        ep = np.asarray(lp.endpoints, dtype=float).reshape(2, 2)
        ep_ref = np.asarray(lp.endpoints_ref, dtype=float).reshape(2, 2)
        for k in range(2):
            _check_bounds(ep[k], (tw, th), f"line endpoint {'ab'[k]}", i)
            _check_bounds(ep_ref[k], (rw, rh), f"line endpoint {'ab'[k]}_ref", i)
        if np.linalg.norm(ep[1] - ep[0]) < MIN_SEGMENT_LENGTH_PX:
            raise ValidationError("degenerate target segment (< 2 px)", i)
        if np.linalg.norm(ep_ref[1] - ep_ref[0]) < MIN_SEGMENT_LENGTH_PX:
            raise ValidationError("degenerate reference segment (< 2 px)", i)
        lns.append(LinePair(endpoints=ep, endpoints_ref=ep_ref))

    if len(pts) + 3 * len(lns) < 4:
        raise ValidationError(
            f"{len(pts)} points + {len(lns)} lines cannot constrain a homography "
            "(need N + 3M >= 4)"
        )

    return DualFeatureSet(
        points=tuple(pts), lines=tuple(lns), target_dims=(tw, th), ref_dims=(rw, rh)
    )


def _reject_constant(token: str) -> None:
    raise ParseError(f"non-finite number {token!r} in correspondence file")


def load_correspondences(path: str | Path) -> DualFeatureSet:
    """Load and validate a correspondence JSON file.

    Raises :class:`ParseError` for malformed files and
    :class:`ValidationError` for records violating the invariants.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh, parse_constant=_reject_constant)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc

    try:
        target_dims = tuple(doc["target_dims"])
        ref_dims = tuple(doc["ref_dims"])
        points = [
            PointPair(p=np.array(rec["p"], dtype=float), p_ref=np.array(rec["p_ref"], dtype=float))
            for rec in doc.get("points", [])
        ]
        lines = [
            LinePair(
                endpoints=np.array([rec["a"], rec["b"]], dtype=float),
                endpoints_ref=np.array([rec["a_ref"], rec["b_ref"]], dtype=float),
            )
            for rec in doc.get("lines", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path} does not match the correspondence schema: {exc}") from exc

    if len(target_dims) != 2 or len(ref_dims) != 2:
        raise ParseError(f"{path}: dims must be [width, height]")

    return build_feature_set(points, lines, target_dims, ref_dims)


def save_correspondences(fset: DualFeatureSet, path: str | Path) -> None:
    """Write ``fset`` in the correspondence JSON schema (lossless round-trip)."""
    doc = {
        "target_dims": list(fset.target_dims),
        "ref_dims": list(fset.ref_dims),
        "points": [
            {"p": [float(pp.p[0]), float(pp.p[1])], "p_ref": [float(pp.p_ref[0]), float(pp.p_ref[1])]}
            for pp in fset.points
        ],
        "lines": [
            {
                "a": [float(lp.endpoints[0, 0]), float(lp.endpoints[0, 1])],
                "b": [float(lp.endpoints[1, 0]), float(lp.endpoints[1, 1])],
                "a_ref": [float(lp.endpoints_ref[0, 0]), float(lp.endpoints_ref[0, 1])],
                "b_ref": [float(lp.endpoints_ref[1, 0]), float(lp.endpoints_ref[1, 1])],
            }
            for lp in fset.lines
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
