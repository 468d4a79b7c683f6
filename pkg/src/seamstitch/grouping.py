"""Hypothesis generation on a weighted Delaunay graph.

Every feature is one vertex anchored at its reference-side location (lines
anchor at their midpoint sample); a source and a sink vertex sit at the
midpoints of two opposite image borders, picked by the stitching direction.
The weight of a feature-feature edge is the cross residual: each feature is
mapped by the *other* one's local homography and the two misfit distances
(pixels) are summed, so the weight measures how badly the pair disagrees
about the local warp. Edges incident to source or sink cost nothing.

Grouping repeatedly extracts the cheapest source-to-sink path (Dijkstra over
sigmoid-squashed weights, so one terrible edge outweighs a long chain of good
ones), grows the path's features into a full hypothesis through sub-threshold
edges, then saturates the used path so the next round must find a different
route. Vertex index equals feature index; source and sink come last.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay
from scipy.spatial._qhull import QhullError

from .correspondences import DualFeatureSet
from .errors import AtInfinity, DegenerateGeometry, Disconnected, RankDeficient
from .homography import (
    DEFAULT_GAMMA,
    Homography,
    apply_homography,
    apply_to_segment,
    build_design_system,
    gaussian_weights,
    global_homography,
    solve_mdlt,
)

# Pixel threshold separating "same local warp" from "different local warp";
# also the sigmoid midpoint, so the path metric and the growth test agree.
DEFAULT_TAU = 10.0

# Generation stops once fewer than this many features remain ungrouped.
DEFAULT_MIN_REMAINING = 30

# Sigmoid softness as a fraction of tau: edges far below tau cost ~0 on a
# path, edges above tau cost ~1, which is what keeps Dijkstra from taking a
# short path through one bad edge.
SOFTNESS_FRACTION = 0.25

# Moving-DLT scale as a fraction of the reference image diagonal. This keeps
# the local solves genuinely local (a few feature spacings at typical
# densities) independent of image resolution.
SIGMA_DIAGONAL_FRACTION = 0.08


def default_sigma_px(ref_dims: tuple[int, int]) -> float:
    return SIGMA_DIAGONAL_FRACTION * math.hypot(ref_dims[0], ref_dims[1])


@dataclass(frozen=True)
class GraphVertex:
    kind: str  # "point" | "line" | "source" | "sink"
    feature_index: int | None
    anchor: np.ndarray

    @property
    def is_feature(self) -> bool:
        return self.feature_index is not None


@dataclass
class GraphEdge:
    u: int
    v: int
    raw_weight: float
    path_weight: float


@dataclass
class CorrespondenceGraph:
    vertices: list[GraphVertex]
    edges: list[GraphEdge]
    adjacency: list[list[tuple[int, int]]]  # per vertex: (neighbor, edge index)
    source: int
    sink: int
    homographies: list[Homography | None]

    @classmethod
    def assemble(
        cls,
        vertices: list[GraphVertex],
        edges: list[GraphEdge],
        source: int,
        sink: int,
        homographies: list[Homography | None] | None = None,
    ) -> "CorrespondenceGraph":
        adjacency: list[list[tuple[int, int]]] = [[] for _ in vertices]
        for eidx, e in enumerate(edges):
            adjacency[e.u].append((e.v, eidx))
            adjacency[e.v].append((e.u, eidx))
        for nbrs in adjacency:
            nbrs.sort()
        return cls(
            vertices=vertices,
            edges=edges,
            adjacency=adjacency,
            source=source,
            sink=sink,
            homographies=homographies or [None] * len(vertices),
        )

    def path_edge_ids(self, path: list[int]) -> list[int]:
        ids = []
        for u, v in zip(path[:-1], path[1:]):
            eidx = next(e for n, e in self.adjacency[u] if n == v)
            ids.append(eidx)
        return ids


@dataclass(frozen=True)
class Hypothesis:
    member_features: frozenset[int]
    seed_path: tuple[int, ...]
    generation_round: int

    @property
    def size(self) -> int:
        return len(self.member_features)


def point_segment_distance(p: np.ndarray, seg: np.ndarray) -> float:
    """Euclidean distance from point ``p`` to the segment ``seg`` (2x2)."""
    a, b = np.asarray(seg, dtype=float)
    d = b - a
    denom = float(d @ d)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ d / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * d)))


def segment_distance(seg_from: np.ndarray, seg_to: np.ndarray) -> float:
    """Distance from one segment to another: mean over the endpoint and
    midpoint samples of ``seg_from`` of their point-to-segment distances."""
    a, b = np.asarray(seg_from, dtype=float)
    samples = (a, (a + b) / 2.0, b)
    return float(np.mean([point_segment_distance(s, seg_to) for s in samples]))


def _cross_term(fset: DualFeatureSet, j: int, h_i: Homography) -> float:
    """Residual of feature j mapped by the *other* feature's homography."""
    if fset.is_line(j):
        k = j - fset.n_points
        mapped = apply_to_segment(h_i, fset.lines_target[k])
        return segment_distance(mapped, fset.lines_ref[k])
    mapped = apply_homography(h_i, fset.pts_target[j])
    return float(np.linalg.norm(mapped - fset.pts_ref[j]))


def crde_weight(
    fset: DualFeatureSet,
    i: int | None,
    j: int | None,
    h_i: Homography | None,
    h_j: Homography | None,
) -> float:
    """Cross residual distance error between two features, in pixels.

    ``None`` stands for the source or sink vertex, whose edges cost 0. A
    feature mapping onto the line at infinity makes the edge infinitely bad.
    """
    if i is None or j is None:
        return 0.0
    try:
        return _cross_term(fset, j, h_i) + _cross_term(fset, i, h_j)
    except AtInfinity:
        return math.inf


def sigmoid_transform(w: float, tau: float = DEFAULT_TAU, softness: float | None = None) -> float:
    """Squash a raw pixel weight into (0, 1) with midpoint at ``tau``."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    s = softness if softness is not None else SOFTNESS_FRACTION * tau
    if s <= 0:
        raise ValueError(f"softness must be positive, got {s}")
    if math.isinf(w):
        return 1.0
    return 1.0 / (1.0 + math.exp(-(w - tau) / s))


def _border_terminals(ref_dims: tuple[int, int], direction: str) -> tuple[np.ndarray, np.ndarray]:
    w, h = ref_dims
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    if direction == "horizontal":
        return np.array([cx, 0.0]), np.array([cx, float(h - 1)])
    if direction == "vertical":
        return np.array([0.0, cy]), np.array([float(w - 1), cy])
    raise ValueError(f"direction must be 'horizontal' or 'vertical', got {direction!r}")


def build_graph(
    fset: DualFeatureSet,
    direction: str = "horizontal",
    tau: float = DEFAULT_TAU,
    sigma: float | None = None,
    gamma: float = DEFAULT_GAMMA,
) -> CorrespondenceGraph:
    """Triangulate the feature anchors plus source/sink and weight the edges.

    Every feature vertex receives a moving-DLT homography solved at its
    anchor (falling back to the global homography on a rank-deficient local
    system); edge weights are the cross residuals under those homographies.
    Raises :class:`DegenerateGeometry` when the anchors cannot be
    triangulated (collinear or coincident).
    """
    anchors = fset.ref_anchors
    src_pt, snk_pt = _border_terminals(fset.ref_dims, direction)
    all_pts = np.concatenate([anchors, src_pt[None, :], snk_pt[None, :]], axis=0)
    n_feat = fset.feature_count
    source, sink = n_feat, n_feat + 1

    try:
        tri = Delaunay(all_pts)
    except QhullError as exc:
        raise DegenerateGeometry(f"anchors cannot be triangulated: {exc}") from exc

    pair_set = set()
    for simplex in tri.simplices:
        for k in range(3):
            u, v = int(simplex[k]), int(simplex[(k + 1) % 3])
            pair_set.add((min(u, v), max(u, v)))
    # A direct source-sink edge would let a "hypothesis" contain no features.
    pair_set.discard((source, sink))
    pairs = sorted(pair_set)

    touched = set()
    for u, v in pairs:
        touched.add(u)
        touched.add(v)
    if len(touched) < n_feat + 2:
        raise DegenerateGeometry(
            "triangulation left isolated vertices (coincident anchors?)"
        )

    vertices = [
        GraphVertex(
            kind="line" if fset.is_line(i) else "point",
            feature_index=i,
            anchor=anchors[i],
        )
        for i in range(n_feat)
    ]
    vertices.append(GraphVertex(kind="source", feature_index=None, anchor=src_pt))
    vertices.append(GraphVertex(kind="sink", feature_index=None, anchor=snk_pt))

    sigma_px = sigma if sigma is not None else default_sigma_px(fset.ref_dims)
    system = build_design_system(fset)
    fallback: Homography | None = None
    homographies: list[Homography | None] = []
    for i in range(n_feat):
        try:
            h = solve_mdlt(system, gaussian_weights(anchors[i], fset, sigma_px, gamma))
        except RankDeficient:
            if fallback is None:
                fallback = global_homography(fset)
            h = fallback
        homographies.append(h)
    homographies.extend([None, None])

    edges = []
    for u, v in pairs:
        fi = vertices[u].feature_index
        fj = vertices[v].feature_index
        raw = crde_weight(fset, fi, fj, homographies[u], homographies[v])
        edges.append(
            GraphEdge(u=u, v=v, raw_weight=raw, path_weight=sigmoid_transform(raw, tau))
        )

    return CorrespondenceGraph.assemble(vertices, edges, source, sink, homographies)


def shortest_path(
    graph: CorrespondenceGraph, path_weights: np.ndarray | None = None
) -> list[int]:
    """Cheapest source-to-sink path by Dijkstra over the transformed weights.

    Ties break deterministically: fewer edges first, then the smallest
    lexicographic vertex-index sequence. ``path_weights`` optionally
    overrides the edges' stored transformed weights (used by hypothesis
    generation to saturate spent paths without mutating the graph).
    """
    if path_weights is None:
        path_weights = np.array([e.path_weight for e in graph.edges])
    settled = set()
    heap: list[tuple[float, int, tuple[int, ...]]] = [(0.0, 0, (graph.source,))]
    while heap:
        cost, nedges, path = heapq.heappop(heap)
        v = path[-1]
        if v in settled:
            continue
        settled.add(v)
        if v == graph.sink:
            return list(path)
        for nbr, eidx in graph.adjacency[v]:
            if nbr not in settled:
                heapq.heappush(
                    heap, (cost + float(path_weights[eidx]), nedges + 1, path + (nbr,))
                )
    raise Disconnected("no path from source to sink")


def grow_hypothesis(
    graph: CorrespondenceGraph,
    seed_path: list[int],
    tau: float = DEFAULT_TAU,
    generation_round: int = 1,
) -> Hypothesis:
    """Expand the seed path's features through sub-threshold edges.

    Breadth-first rounds: every feature connected to a current member by a
    feature-feature edge with raw weight < tau joins; insertion within a
    round is ordered by (raw weight, vertex index) for determinism. Stops
    when a full scan adds nothing.
    """
    members = {v for v in seed_path if graph.vertices[v].is_feature}
    frontier = sorted(members)
    while frontier:
        candidates: dict[int, float] = {}
        for v in frontier:
            for nbr, eidx in graph.adjacency[v]:
                if nbr in members or not graph.vertices[nbr].is_feature:
                    continue
                raw = graph.edges[eidx].raw_weight
                if raw < tau:
                    best = candidates.get(nbr)
                    if best is None or raw < best:
                        candidates[nbr] = raw
        frontier = [v for v, _ in sorted(candidates.items(), key=lambda kv: (kv[1], kv[0]))]
        members.update(frontier)
    feature_ids = frozenset(
        graph.vertices[v].feature_index for v in members  # type: ignore[arg-type]
    )
    return Hypothesis(
        member_features=feature_ids,
        seed_path=tuple(seed_path),
        generation_round=generation_round,
    )


def generate_hypotheses(
    graph: CorrespondenceGraph,
    tau: float = DEFAULT_TAU,
    min_remaining: int = DEFAULT_MIN_REMAINING,
) -> list[Hypothesis]:
    """Extract representative hypotheses by iterated shortest paths.

    After each round the seed path's transformed weights saturate to 1.0
    (the sigmoid supremum, standing in for "practically unusable"), so later
    rounds must route elsewhere. Generation stops when fewer than
    ``min_remaining`` features remain ungrouped, when the next path would
    cross an over-threshold feature-feature edge, when it would reuse a
    saturated edge, or when the graph disconnects. The first round always
    yields a hypothesis; exact duplicate member sets are dropped.
    """
    weights_work = np.array([e.path_weight for e in graph.edges])
    saturated = np.zeros(len(graph.edges), dtype=bool)
    n_features = sum(1 for v in graph.vertices if v.is_feature)
    hypotheses: list[Hypothesis] = []
    covered: set[int] = set()
    seen_members: set[frozenset[int]] = set()

    for round_no in range(1, len(graph.vertices) + 1):
        try:
            path = shortest_path(graph, weights_work)
        except Disconnected:
            if not hypotheses:
                raise
            break
        edge_ids = graph.path_edge_ids(path)
        if hypotheses:
            if any(saturated[e] for e in edge_ids):
                break
            ff_raw = [
                graph.edges[e].raw_weight
                for e in edge_ids
                if graph.vertices[graph.edges[e].u].is_feature
                and graph.vertices[graph.edges[e].v].is_feature
            ]
            if ff_raw and max(ff_raw) > tau:
                break
        hyp = grow_hypothesis(graph, path, tau, round_no)
        if hyp.member_features not in seen_members:
            seen_members.add(hyp.member_features)
            hypotheses.append(hyp)
            covered |= hyp.member_features
        weights_work[edge_ids] = 1.0
        saturated[edge_ids] = True
        if n_features - len(covered) < min_remaining:
            break
    return hypotheses


def dump_graph(
    graph: CorrespondenceGraph,
    hypotheses: list[Hypothesis],
    path: str | Path,
) -> None:
    """Write the graph, weights, and per-round hypotheses as diagnostic JSON."""
    doc = {
        "vertices": [
            {
                "index": i,
                "kind": v.kind,
                "feature_index": v.feature_index,
                "anchor": [float(v.anchor[0]), float(v.anchor[1])],
            }
            for i, v in enumerate(graph.vertices)
        ],
        "edges": [
            {
                "u": e.u,
                "v": e.v,
                "raw_weight": e.raw_weight if math.isfinite(e.raw_weight) else "inf",
                "path_weight": e.path_weight,
            }
            for e in graph.edges
        ],
        "source": graph.source,
        "sink": graph.sink,
        "hypotheses": [
            {
                "round": h.generation_round,
                "seed_path": list(h.seed_path),
                "members": sorted(h.member_features),
            }
            for h in hypotheses
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
