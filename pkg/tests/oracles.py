"""Independent reference implementations used to check the engine.

Everything here is written from first principles, separate from the package
code paths it validates: a plain DLT solver, direct cross-residual
evaluation, Bellman-Ford distances, exhaustive min-cut enumeration, central
finite differences, and a direct homography warp.
"""

from __future__ import annotations

import numpy as np


def _normalize_rms(pts: np.ndarray) -> np.ndarray:
    """Similarity transform: centroid to origin, RMS distance to sqrt(2)."""
    c = pts.mean(axis=0)
    rms = np.sqrt(((pts - c) ** 2).sum(axis=1).mean())
    s = np.sqrt(2.0) / rms if rms > 0 else 1.0
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])


def _hom(pts: np.ndarray) -> np.ndarray:
    return np.concatenate([pts, np.ones((len(pts), 1))], axis=1)


def dlt_oracle(
    pts_t: np.ndarray,
    pts_r: np.ndarray,
    lines_t: np.ndarray | None = None,
    lines_r: np.ndarray | None = None,
) -> np.ndarray:
    """Unweighted DLT over points and (optionally) segment constraints.

    Returns the unit-norm 9-vector (row-major) with the largest-magnitude
    entry positive. Line pairs contribute one incidence row per target
    endpoint against the infinite line through the reference segment.
    """
    locs_t = [pts_t] if lines_t is None else [pts_t, lines_t.reshape(-1, 2)]
    locs_r = [pts_r] if lines_r is None else [pts_r, lines_r.reshape(-1, 2)]
    t1 = _normalize_rms(np.concatenate(locs_t))
    t2 = _normalize_rms(np.concatenate(locs_r))

    p = (_hom(pts_t) @ t1.T)[:, :2]
    q = (_hom(pts_r) @ t2.T)[:, :2]
    rows = []
    for (x, y), (u, v) in zip(p, q):
        rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
        rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])

    if lines_t is not None and len(lines_t):
        for seg_t, seg_r in zip(lines_t, lines_r):
            a = _hom(seg_r[:1]) @ t2.T
            b = _hom(seg_r[1:]) @ t2.T
            ln = np.cross(a[0], b[0])
            ln = ln / np.hypot(ln[0], ln[1])
            for ep in seg_t:
                x, y = (_hom(ep[None, :]) @ t1.T)[0, :2]
                rows.append(
                    [ln[0] * x, ln[0] * y, ln[0], ln[1] * x, ln[1] * y, ln[1], ln[2] * x, ln[2] * y, ln[2]]
                )

    m = np.asarray(rows, dtype=float)
    _, _, vt = np.linalg.svd(m)
    h_mat = np.linalg.inv(t2) @ vt[-1].reshape(3, 3) @ t1
    h = h_mat.reshape(9)
    h = h / np.linalg.norm(h)
    k = int(np.argmax(np.abs(h)))
    return -h if h[k] < 0 else h


def project(h_mat: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Plain homogeneous projection of (K, 2) points through a 3x3 matrix."""
    hp = _hom(np.atleast_2d(pts)) @ h_mat.T
    return hp[:, :2] / hp[:, 2:3]


def _pt_seg_dist(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    tt = float((p - a) @ ab)
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(max(tt / denom, 0.0), 1.0)
    return float(np.hypot(*(p - (a + t * ab))))


def crde_oracle(fset, i: int, j: int, h_i: np.ndarray, h_j: np.ndarray) -> float:
    """Direct evaluation of the cross residual between features i and j.

    ``h_i``/``h_j`` are 3x3 matrices. Line operands are compared by the mean
    point-to-segment distance of their endpoint/midpoint samples.
    """

    def term(feat: int, h_mat: np.ndarray) -> float:
        if fset.is_line(feat):
            k = feat - fset.n_points
            mapped = project(h_mat, fset.lines_target[k])
            ref = fset.lines_ref[k]
            samples = [mapped[0], (mapped[0] + mapped[1]) / 2, mapped[1]]
            return float(np.mean([_pt_seg_dist(s, ref[0], ref[1]) for s in samples]))
        mapped = project(h_mat, fset.pts_target[feat])[0]
        return float(np.hypot(*(mapped - fset.pts_ref[feat])))

    return term(j, h_i) + term(i, h_j)


def bellman_ford(n: int, edges: list[tuple[int, int, float]], source: int) -> np.ndarray:
    """Single-source distances on an undirected graph by |V|-1 relaxations."""
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    for _ in range(n - 1):
        changed = False
        for u, v, w in edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
            if dist[v] + w < dist[u]:
                dist[u] = dist[v] + w
                changed = True
        if not changed:
            break
    return dist


def mincut_bruteforce(
    overlap: np.ndarray,
    t_anchor: np.ndarray,
    r_anchor: np.ndarray,
    right: np.ndarray,
    down: np.ndarray,
    valid_right: np.ndarray,
    valid_down: np.ndarray,
) -> float:
    """Minimum anchored-cut cost by enumeration over all free-pixel labelings."""
    h, w = overlap.shape
    kind = np.full((h, w), -9, dtype=np.int64)  # -1 target, -2 reference, k>=0 free bit
    free = 0
    for y in range(h):
        for x in range(w):
            if not overlap[y, x]:
                continue
            if t_anchor[y, x]:
                kind[y, x] = -1
            elif r_anchor[y, x]:
                kind[y, x] = -2
            else:
                kind[y, x] = free
                free += 1
    assert free <= 20, f"too many free pixels for enumeration: {free}"

    n_assign = 1 << free
    idx = np.arange(n_assign, dtype=np.int64)
    total = np.zeros(n_assign)

    def label_of(y: int, x: int) -> np.ndarray | int:
        k = kind[y, x]
        if k == -1:
            return 0
        if k == -2:
            return 1
        return (idx >> k) & 1

    for y in range(h):
        for x in range(w):
            for valid, cmap, dy, dx in ((valid_right, right, 0, 1), (valid_down, down, 1, 0)):
                if not valid[y, x]:
                    continue
                la = label_of(y, x)
                lb = label_of(y + dy, x + dx)
                total = total + cmap[y, x] * (la != lb)
    return float(total.min())


def fd_gradient(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function."""
    x = np.asarray(x, dtype=float).ravel()
    g = np.zeros_like(x)
    for k in range(len(x)):
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        g[k] = (f(xp) - f(xm)) / (2 * step)
    return g


def homography_warp_oracle(
    image: np.ndarray, h_mat: np.ndarray, origin: tuple[int, int], shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-map warp of ``image`` through an exact homography."""
    img = np.asarray(image, dtype=float)
    ih, iw = img.shape[:2]
    ch, cw = shape
    gx, gy = np.meshgrid(
        np.arange(origin[0], origin[0] + cw), np.arange(origin[1], origin[1] + ch)
    )
    pix = np.stack([gx.ravel(), gy.ravel()], axis=1).astype(float)
    src = project(np.linalg.inv(h_mat), pix)
    sx, sy = src[:, 0], src[:, 1]
    mask = (sx >= 0) & (sx <= iw - 1) & (sy >= 0) & (sy <= ih - 1)
    sxc = np.clip(sx, 0, iw - 1)
    syc = np.clip(sy, 0, ih - 1)
    x0 = np.minimum(sxc.astype(int), iw - 2)
    y0 = np.minimum(syc.astype(int), ih - 2)
    fx = sxc - x0
    fy = syc - y0
    if img.ndim == 3:
        fx = fx[:, None]
        fy = fy[:, None]
    vals = (
        img[y0, x0] * (1 - fx) * (1 - fy)
        + img[y0, x0 + 1] * fx * (1 - fy)
        + img[y0 + 1, x0] * (1 - fx) * fy
        + img[y0 + 1, x0 + 1] * fx * fy
    )
    out_shape = (ch, cw) if img.ndim == 2 else (ch, cw, img.shape[2])
    return vals.reshape(out_shape), mask.reshape(ch, cw)
