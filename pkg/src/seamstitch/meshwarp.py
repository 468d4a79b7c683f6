"""Per-hypothesis local alignment by sparse quadratic mesh deformation.

A regular grid over the target image is deformed so that (a) member point
features land on their reference matches, (b) member line samples land on
their reference lines, (c) every cell stays close to a similarity transform
of its rest shape (distortion term), with an extra saliency-weighted copy of
the same term protecting visually important cells, and (d) a tiny Tikhonov
pull toward the initialization keeps the system positive definite.

All terms are linear least squares in the flattened vertex vector
``[x0, y0, x1, y1, ...]``, so the total energy is ``E(v) = v' Q v - 2 b' v +
c`` and the minimizer is one sparse solve. Feature positions are expressed
through bilinear coordinates in the *initial* grid, which makes the system
linear and lets the same coefficients track any deformation.

The mesh spans ``[0, width] x [0, height]``; vertices are indexed row-major.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .correspondences import DualFeatureSet, sample_segment
from .errors import FoldedCellWarning, OutOfMesh, SingularSystem
from .homography import Homography, apply_homography

DEFAULT_TARGET_CELLS = 1600
INSIDE_EPS = 1e-9


@dataclass
class MeshGrid:
    """Regular grid over the target image with its deformed counterpart.

    ``v`` holds the initial vertex positions, ``v_hat`` the current deformed
    ones, and ``v_pre`` the initialization (global pre-warp) that the
    Tikhonov term anchors to. All three are (n, 2) arrays.
    """

    cols: int
    rows: int
    width: float
    height: float
    v: np.ndarray
    v_hat: np.ndarray
    v_pre: np.ndarray

    @property
    def n_vertices(self) -> int:
        return (self.cols + 1) * (self.rows + 1)

    @property
    def cell_w(self) -> float:
        return self.width / self.cols

    @property
    def cell_h(self) -> float:
        return self.height / self.rows

    @property
    def cell_size(self) -> float:
        return 0.5 * (self.cell_w + self.cell_h)

    def vertex_index(self, row: int, col: int) -> int:
        return row * (self.cols + 1) + col


def init_mesh(
    dims: tuple[int, int],
    target_cells: int = DEFAULT_TARGET_CELLS,
    pre_warp: Homography | None = None,
) -> MeshGrid:
    """Build a near-square grid of about ``target_cells`` cells.

    ``pre_warp`` initializes the deformed vertices by a homography (the
    hypothesis's global fit); without it the mesh starts at rest.
    """
    w, h = float(dims[0]), float(dims[1])
    if w <= 0 or h <= 0 or target_cells < 1:
        raise ValueError(f"bad mesh request: dims={dims}, cells={target_cells}")
    rows = max(1, round(math.sqrt(target_cells * h / w)))
    cols = max(1, round(target_cells / rows))
    xs = np.linspace(0.0, w, cols + 1)
    ys = np.linspace(0.0, h, rows + 1)
    gx, gy = np.meshgrid(xs, ys)
    v = np.stack([gx.ravel(), gy.ravel()], axis=1)
    v_hat = apply_homography(pre_warp, v) if pre_warp is not None else v.copy()
    return MeshGrid(
        cols=cols, rows=rows, width=w, height=h, v=v, v_hat=v_hat.copy(), v_pre=v_hat.copy()
    )


def bilinear_coeffs(mesh: MeshGrid, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Enclosing-cell vertex indices and bilinear weights of a target point.

    Weights are computed in the initial grid, are nonnegative, and sum to 1;
    boundary points belong to the lower-index cell. Raises
    :class:`OutOfMesh` outside ``[0, width] x [0, height]``.
    """
    qx, qy = float(q[0]), float(q[1])
    if not (0.0 <= qx <= mesh.width and 0.0 <= qy <= mesh.height):
        raise OutOfMesh(f"({qx}, {qy}) outside mesh [0, {mesh.width}] x [0, {mesh.height}]")
    cw, ch = mesh.cell_w, mesh.cell_h
    cx = min(max(math.ceil(qx / cw) - 1, 0), mesh.cols - 1)
    cy = min(max(math.ceil(qy / ch) - 1, 0), mesh.rows - 1)
    u = min(max(qx / cw - cx, 0.0), 1.0)
    v = min(max(qy / ch - cy, 0.0), 1.0)
    i00 = mesh.vertex_index(cy, cx)
    idx = np.array([i00, i00 + 1, i00 + mesh.cols + 1, i00 + mesh.cols + 2])
    coeff = np.array([(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v])
    return idx, coeff


def mesh_phi(mesh: MeshGrid, pts: np.ndarray) -> np.ndarray:
    """Map target points through the current deformation (bilinear in v_hat)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.empty_like(pts)
    for k, q in enumerate(pts):
        idx, coeff = bilinear_coeffs(mesh, q)
        out[k] = coeff @ mesh.v_hat[idx]
    return out


@dataclass(frozen=True)
class EnergyParams:
    """Term weights of the deformation energy (all configuration knobs)."""

    lambda_point: float = 1.0
    lambda_line: float = 5.0
    lambda_saliency: float = 0.5
    distortion_scale: float = 1.0
    tikhonov: float = 1e-8


@dataclass(frozen=True)
class FeatureWeights:
    """Adaptive per-feature alignment weights (all 1 before a seam exists)."""

    w_point: np.ndarray
    w_line: np.ndarray

    @classmethod
    def ones(cls, fset: DualFeatureSet) -> "FeatureWeights":
        return cls(w_point=np.ones(fset.n_points), w_line=np.ones(fset.n_lines))


@dataclass
class EnergySystem:
    """Quadratic energy ``E(v) = v' Q v - 2 b' v + c`` over the 2n vertex vector."""

    q_matrix: sparse.csr_matrix
    b: np.ndarray
    constant: float

    def energy(self, v: np.ndarray) -> float:
        vv = np.asarray(v, dtype=float).ravel()
        return float(vv @ (self.q_matrix @ vv) - 2.0 * self.b @ vv + self.constant)

    def gradient(self, v: np.ndarray) -> np.ndarray:
        vv = np.asarray(v, dtype=float).ravel()
        return 2.0 * (self.q_matrix @ vv - self.b)

    def __add__(self, other: "EnergySystem") -> "EnergySystem":
        return EnergySystem(
            q_matrix=(self.q_matrix + other.q_matrix).tocsr(),
            b=self.b + other.b,
            constant=self.constant + other.constant,
        )


class _Rows:
    """Accumulates weighted least-squares rows ``w * (s . v - t)^2``."""

    def __init__(self, n_dof: int):
        self.n_dof = n_dof
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.rhs: list[float] = []
        self.weights: list[float] = []
        self._r = 0

    def add(self, cols: Iterable[int], vals: Iterable[float], rhs: float, weight: float) -> None:
        cols = list(cols)
        self.rows.extend([self._r] * len(cols))
        self.cols.extend(cols)
        self.vals.extend(vals)
        self.rhs.append(rhs)
        self.weights.append(weight)
        self._r += 1

    def system(self) -> EnergySystem:
        if self._r == 0:
            n = self.n_dof
            return EnergySystem(sparse.csr_matrix((n, n)), np.zeros(n), 0.0)
        s = sparse.coo_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self._r, self.n_dof)
        ).tocsr()
        w = np.array(self.weights)
        t = np.array(self.rhs)
        sw = s.multiply(np.sqrt(w)[:, None]).tocsr()
        q = (sw.T @ sw).tocsr()
        q = ((q + q.T) * 0.5).tocsr()
        b = s.T @ (w * t)
        c = float(w @ (t * t))
        return EnergySystem(q_matrix=q, b=b, constant=c)


def _ref_line_form(endpoints_ref: np.ndarray) -> np.ndarray:
    """Homogeneous line through a reference segment, unit-normal scaled."""
    a = np.array([endpoints_ref[0, 0], endpoints_ref[0, 1], 1.0])
    b = np.array([endpoints_ref[1, 0], endpoints_ref[1, 1], 1.0])
    line = np.cross(a, b)
    return line / np.hypot(line[0], line[1])


def _cell_triangles(mesh: MeshGrid) -> list[tuple[int, int, int, int]]:
    """Two triangles per cell as (cell_flat_index, p, q, r).

    Each off-diagonal corner p is reconstructed from the diagonal pair
    (q, r) = (top-left, bottom-right) in the similarity term.
    """
    tris = []
    for r in range(mesh.rows):
        for c in range(mesh.cols):
            i00 = mesh.vertex_index(r, c)
            i10 = i00 + 1
            i01 = i00 + mesh.cols + 1
            i11 = i01 + 1
            cell = r * mesh.cols + c
            tris.append((cell, i10, i00, i11))
            tris.append((cell, i01, i00, i11))
    return tris


def _similarity_rows(acc: _Rows, mesh: MeshGrid, p: int, q: int, r: int, weight: float) -> None:
    """Penalize deviation of p from its similarity reconstruction off (q, r)."""
    e0 = mesh.v[r] - mesh.v[q]
    d0 = mesh.v[p] - mesh.v[q]
    ll = float(e0 @ e0)
    u = float(d0 @ e0) / ll
    v = float(d0 @ np.array([e0[1], -e0[0]])) / ll
    px, py, qx, qy, rx, ry = 2 * p, 2 * p + 1, 2 * q, 2 * q + 1, 2 * r, 2 * r + 1
    acc.add([px, qx, rx, qy, ry], [1.0, -1.0 + u, -u, v, -v], 0.0, weight)
    acc.add([py, qy, ry, qx, rx], [1.0, -1.0 + u, -u, -v, v], 0.0, weight)


def assemble_energy(
    mesh: MeshGrid,
    fset: DualFeatureSet,
    members: Iterable[int],
    weights: FeatureWeights,
    params: EnergyParams = EnergyParams(),
    cell_saliency: np.ndarray | None = None,
) -> tuple[EnergySystem, dict[str, EnergySystem]]:
    """Assemble the full quadratic system and its per-term parts.

    Only features listed in ``members`` (joint indices, points first)
    contribute alignment rows. ``cell_saliency`` is a (rows, cols) map
    weighting the saliency-smoothness term per cell; ``None`` means uniform.
    Returns ``(total, parts)`` where ``parts`` maps term names to their own
    :class:`EnergySystem` (the total is their exact sum).
    """
    n_dof = 2 * mesh.n_vertices
    member_list = sorted(int(i) for i in members)
    point_ids = [i for i in member_list if i < fset.n_points]
    line_ids = [i - fset.n_points for i in member_list if i >= fset.n_points]

    acc_p = _Rows(n_dof)
    for i in point_ids:
        idx, coef = bilinear_coeffs(mesh, fset.pts_target[i])
        w = params.lambda_point * float(weights.w_point[i])
        acc_p.add(2 * idx, coef, float(fset.pts_ref[i][0]), w)
        acc_p.add(2 * idx + 1, coef, float(fset.pts_ref[i][1]), w)

    acc_l = _Rows(n_dof)
    for j in line_ids:
        line = _ref_line_form(fset.lines_ref[j])
        w = params.lambda_line * float(weights.w_line[j])
        for s in sample_segment(fset.lines_target[j]):
            idx, coef = bilinear_coeffs(mesh, s)
            cols = list(2 * idx) + list(2 * idx + 1)
            vals = list(line[0] * coef) + list(line[1] * coef)
            acc_l.add(cols, vals, -float(line[2]), w)

    tris = _cell_triangles(mesh)
    acc_d = _Rows(n_dof)
    for _, p, q, r in tris:
        _similarity_rows(acc_d, mesh, p, q, r, params.distortion_scale)

    acc_s = _Rows(n_dof)
    if params.lambda_saliency > 0:
        sal = (
            np.ones((mesh.rows, mesh.cols))
            if cell_saliency is None
            else np.asarray(cell_saliency, dtype=float)
        )
        for cell, p, q, r in tris:
            w = params.lambda_saliency * float(sal.flat[cell])
            _similarity_rows(acc_s, mesh, p, q, r, w)

    acc_t = _Rows(n_dof)
    anchor = mesh.v_pre.ravel()
    for d in range(n_dof):
        acc_t.add([d], [1.0], float(anchor[d]), params.tikhonov)

    parts = {
        "point": acc_p.system(),
        "line": acc_l.system(),
        "distortion": acc_d.system(),
        "saliency": acc_s.system(),
        "tikhonov": acc_t.system(),
    }
    total = parts["point"] + parts["line"] + parts["distortion"] + parts["saliency"] + parts["tikhonov"]
    return total, parts


def solve_system(system: EnergySystem, mesh: MeshGrid) -> MeshGrid:
    """Return the mesh deformed to the exact minimizer of ``system``.

    One LU solve plus iterative refinement; raises :class:`SingularSystem`
    if the factorization fails or the gradient residual stays above
    ``1e-6 * max(1, |b|)``.
    """
    q = system.q_matrix.tocsc()
    b = system.b
    try:
        lu = splu(q)
        x = lu.solve(b)
        for _ in range(2):
            x = x + lu.solve(b - q @ x)
    except RuntimeError as exc:
        raise SingularSystem(f"energy system could not be solved: {exc}") from exc
    grad_norm = float(np.linalg.norm(2.0 * (q @ x - b)))
    if not np.isfinite(grad_norm) or grad_norm > 1e-6 * max(1.0, float(np.linalg.norm(b))):
        raise SingularSystem(f"solver residual too large (|grad| = {grad_norm:.3e})")
    return replace(mesh, v_hat=x.reshape(-1, 2))


def assemble_and_solve(
    mesh: MeshGrid,
    members: Iterable[int],
    fset: DualFeatureSet,
    weights: FeatureWeights,
    params: EnergyParams = EnergyParams(),
    cell_saliency: np.ndarray | None = None,
) -> tuple[MeshGrid, dict[str, float]]:
    """Minimize the deformation energy for one hypothesis.

    Returns the deformed mesh and the per-term energy values at the solution
    (for diagnostics and the mesh dump).
    """
    total, parts = assemble_energy(mesh, fset, members, weights, params, cell_saliency)
    solved = solve_system(total, mesh)
    flat = solved.v_hat.ravel()
    term_values = {name: part.energy(flat) for name, part in parts.items()}
    term_values["total"] = total.energy(flat)
    return solved, term_values


# ---------------------------------------------------------------------------
# Seam-adaptive feature weighting
# ---------------------------------------------------------------------------

ADAPTIVE_KAPPA = 5.0  # clamp on the relative-residual factor
ADAPTIVE_SIGMA_CELLS = 2.0  # seam-distance scale, in cell sizes


def alignment_residuals(mesh: MeshGrid, fset: DualFeatureSet) -> np.ndarray:
    """Current per-feature alignment error in pixels (length N + M).

    Points: distance between the warped point and its reference match.
    Lines: mean absolute distance of the three warped samples to the
    reference line.
    """
    res = np.zeros(fset.feature_count)
    if fset.n_points:
        warped = mesh_phi(mesh, fset.pts_target)
        res[: fset.n_points] = np.linalg.norm(warped - fset.pts_ref, axis=1)
    for j in range(fset.n_lines):
        line = _ref_line_form(fset.lines_ref[j])
        samples = mesh_phi(mesh, sample_segment(fset.lines_target[j]))
        dists = np.abs(samples @ line[:2] + line[2])
        res[fset.n_points + j] = float(dists.mean())
    return res


def adaptive_weights(
    fset: DualFeatureSet,
    mesh: MeshGrid,
    seam=None,
    members: Iterable[int] | None = None,
    kappa: float = ADAPTIVE_KAPPA,
) -> FeatureWeights:
    """Seam-guided feature weights for the next alignment round.

    Without a seam (first iteration) every weight is 1. With one, a feature
    is weighted by how close its warped position sits to the seam
    (``exp(-D^2 / (2 cell_size)^2)``) times its alignment residual relative
    to the mean residual, clamped at ``kappa`` - so optimization
    concentrates on badly aligned features that actually affect the seam.
    """
    if seam is None or len(seam.seam_pixels) == 0:
        return FeatureWeights.ones(fset)

    residuals = alignment_residuals(mesh, fset)
    sel = list(range(fset.feature_count)) if members is None else sorted(members)
    mean_res = float(residuals[sel].mean()) if sel else 0.0
    if mean_res <= 1e-12:
        ratio = np.ones(fset.feature_count)
    else:
        ratio = np.minimum(residuals / mean_res, kappa)

    loci = np.zeros((fset.feature_count, 2))
    if fset.n_points:
        loci[: fset.n_points] = mesh_phi(mesh, fset.pts_target)
    for j in range(fset.n_lines):
        mid = fset.lines_target[j].mean(axis=0)
        loci[fset.n_points + j] = mesh_phi(mesh, mid)[0]

    origin = np.asarray(seam.origin, dtype=float)
    seam_xy = np.asarray(seam.seam_pixels, dtype=float) + origin
    dist, _ = cKDTree(seam_xy).query(loci)
    sigma_d = ADAPTIVE_SIGMA_CELLS * mesh.cell_size
    w = np.exp(-(dist**2) / sigma_d**2) * ratio
    return FeatureWeights(w_point=w[: fset.n_points], w_line=w[fset.n_points :])


# ---------------------------------------------------------------------------
# Rendering the deformed mesh
# ---------------------------------------------------------------------------


@dataclass
class WarpResult:
    """Warped raster on the shared canvas.

    ``origin`` is the global (reference-frame) coordinate of canvas pixel
    (0, 0); the reference image itself starts at global (0, 0).
    """

    image: np.ndarray
    mask: np.ndarray
    origin: tuple[int, int]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape


def _as_float_image(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image)
    return img.astype(np.float64) if img.dtype != np.float64 else img


def _bilinear_sample(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(sx).astype(int), max(w - 2, 0))
    y0 = np.minimum(np.floor(sy).astype(int), max(h - 2, 0))
    fx = sx - x0
    fy = sy - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    return (
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x1] * fx * (1 - fy)
        + img[y1, x0] * (1 - fx) * fy
        + img[y1, x1] * fx * fy
    )


def canvas_layout(
    mesh: MeshGrid, ref_dims: tuple[int, int] | None
) -> tuple[tuple[int, int], tuple[int, int]]:
    """Origin and (height, width) of the canvas holding reference + warp.

    Bounds snap to the nearest integer within 1e-6 so that float noise in a
    numerically-identity deformation cannot grow the canvas by a row/column.
    Pixels sitting exactly on the upper hull boundary are dropped (they have
    zero source width).
    """

    def snap(v: float) -> float:
        r = round(v)
        return float(r) if abs(v - r) <= 1e-6 else float(v)

    vx, vy = mesh.v_hat[:, 0], mesh.v_hat[:, 1]
    lo_x = math.ceil(snap(float(vx.min())))
    lo_y = math.ceil(snap(float(vy.min())))
    hi_x = math.ceil(snap(float(vx.max()))) - 1
    hi_y = math.ceil(snap(float(vy.max()))) - 1
    if ref_dims is None:
        ox, oy, x_hi, y_hi = lo_x, lo_y, hi_x, hi_y
    else:
        ox = min(0, lo_x)
        oy = min(0, lo_y)
        x_hi = max(ref_dims[0] - 1, hi_x)
        y_hi = max(ref_dims[1] - 1, hi_y)
    return (ox, oy), (y_hi - oy + 1, x_hi - ox + 1)


def warp_image(
    image: np.ndarray,
    mesh: MeshGrid,
    ref_dims: tuple[int, int] | None = None,
) -> WarpResult:
    """Render the target through the deformed mesh by inverse mapping.

    Every deformed cell is split into two triangles; canvas pixels inside a
    triangle map back to the initial grid by barycentric interpolation and
    sample the target bilinearly. Inverted (folded) cells still render via
    their triangle halves but raise a :class:`FoldedCellWarning`.
    """
    img = _as_float_image(image)
    (ox, oy), (ch, cw) = canvas_layout(mesh, ref_dims)
    out_shape = (ch, cw) if img.ndim == 2 else (ch, cw, img.shape[2])
    canvas = np.zeros(out_shape, dtype=np.float64)
    mask = np.zeros((ch, cw), dtype=bool)

    folded = 0
    for _, p, q, r in _cell_triangles(mesh):
        p0, q0, r0 = mesh.v[p], mesh.v[q], mesh.v[r]
        p1, q1, r1 = mesh.v_hat[p], mesh.v_hat[q], mesh.v_hat[r]
        d1 = q1 - p1
        d2 = r1 - p1
        det = d1[0] * d2[1] - d2[0] * d1[1]
        det0 = (q0 - p0)[0] * (r0 - p0)[1] - (r0 - p0)[0] * (q0 - p0)[1]
        if det == 0.0:
            folded += 1
            continue
        if det * det0 < 0:
            folded += 1

        gx0 = max(ox, math.ceil(min(p1[0], q1[0], r1[0]) - INSIDE_EPS))
        gx1 = min(ox + cw - 1, math.floor(max(p1[0], q1[0], r1[0]) + INSIDE_EPS))
        gy0 = max(oy, math.ceil(min(p1[1], q1[1], r1[1]) - INSIDE_EPS))
        gy1 = min(oy + ch - 1, math.floor(max(p1[1], q1[1], r1[1]) + INSIDE_EPS))
        if gx1 < gx0 or gy1 < gy0:
            continue
        gx, gy = np.meshgrid(np.arange(gx0, gx1 + 1), np.arange(gy0, gy1 + 1))
        rel_x = gx - p1[0]
        rel_y = gy - p1[1]
        beta = (rel_x * d2[1] - rel_y * d2[0]) / det
        gamma = (-rel_x * d1[1] + rel_y * d1[0]) / det
        inside = (beta >= -INSIDE_EPS) & (gamma >= -INSIDE_EPS) & (beta + gamma <= 1 + INSIDE_EPS)
        if not inside.any():
            continue
        bb = beta[inside]
        gg = gamma[inside]
        src_x = p0[0] + bb * (q0[0] - p0[0]) + gg * (r0[0] - p0[0])
        src_y = p0[1] + bb * (q0[1] - p0[1]) + gg * (r0[1] - p0[1])
        vals = _bilinear_sample(img, src_x, src_y)
        iy = gy[inside] - oy
        ix = gx[inside] - ox
        canvas[iy, ix] = vals
        mask[iy, ix] = True

    if folded:
        warnings.warn(
            f"{folded} folded triangle(s) rendered by triangulated halves",
            FoldedCellWarning,
            stacklevel=2,
        )
    return WarpResult(image=canvas, mask=mask, origin=(ox, oy))


def embed_reference(
    ref_image: np.ndarray, origin: tuple[int, int], shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Place the reference image (global origin 0,0) on the shared canvas."""
    img = _as_float_image(ref_image)
    ch, cw = shape
    out_shape = (ch, cw) if img.ndim == 2 else (ch, cw, img.shape[2])
    canvas = np.zeros(out_shape, dtype=np.float64)
    mask = np.zeros((ch, cw), dtype=bool)
    h, w = img.shape[:2]
    ox, oy = origin
    x0, y0 = -ox, -oy
    sx0, sy0 = max(0, -x0), max(0, -y0)
    dx0, dy0 = max(0, x0), max(0, y0)
    wid = min(w - sx0, cw - dx0)
    hgt = min(h - sy0, ch - dy0)
    if wid > 0 and hgt > 0:
        canvas[dy0 : dy0 + hgt, dx0 : dx0 + wid] = img[sy0 : sy0 + hgt, sx0 : sx0 + wid]
        mask[dy0 : dy0 + hgt, dx0 : dx0 + wid] = True
    return canvas, mask


def dump_mesh(path, mesh: MeshGrid, iterations: list[dict]) -> None:
    """Write grid dims, initial vertices, and per-iteration diagnostics as JSON."""
    import json

    doc = {
        "cols": mesh.cols,
        "rows": mesh.rows,
        "width": mesh.width,
        "height": mesh.height,
        "v": mesh.v.tolist(),
        "iterations": iterations,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
