"""Graph construction, cross residuals, Dijkstra, and hypothesis generation."""

import math

import numpy as np
import pytest

from oracles import bellman_ford, crde_oracle
from seamstitch.correspondences import PointPair, build_feature_set
from seamstitch.errors import DegenerateGeometry, Disconnected
from seamstitch.grouping import (
    CorrespondenceGraph,
    GraphEdge,
    GraphVertex,
    build_graph,
    crde_weight,
    generate_hypotheses,
    grow_hypothesis,
    shortest_path,
    sigmoid_transform,
)


def _toy_graph(n_features, edge_list, source_edges=(), sink_edges=()):
    """Fabricate a graph: features 0..n-1, source n, sink n+1."""
    vertices = [
        GraphVertex(kind="point", feature_index=i, anchor=np.array([float(i), 0.0]))
        for i in range(n_features)
    ]
    vertices.append(GraphVertex(kind="source", feature_index=None, anchor=np.zeros(2)))
    vertices.append(GraphVertex(kind="sink", feature_index=None, anchor=np.ones(2)))
    source, sink = n_features, n_features + 1
    edges = [
        GraphEdge(u=u, v=v, raw_weight=w, path_weight=pw) for u, v, w, pw in edge_list
    ]
    for f in source_edges:
        edges.append(GraphEdge(u=source, v=f, raw_weight=0.0, path_weight=0.018))
    for f in sink_edges:
        edges.append(GraphEdge(u=f, v=sink, raw_weight=0.0, path_weight=0.018))
    return CorrespondenceGraph.assemble(vertices, edges, source, sink)


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid_transform(10.0, tau=10.0) == 0.5

    def test_closed_form_at_zero(self):
        val = sigmoid_transform(0.0, tau=10.0, softness=2.5)
        np.testing.assert_allclose(val, 1.0 / (1.0 + math.exp(4.0)), rtol=1e-12)
        np.testing.assert_allclose(val, 0.0180, atol=5e-5)

    def test_monotone(self):
        ws = np.linspace(0, 50, 200)
        vals = [sigmoid_transform(w, tau=10.0) for w in ws]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_infinite_weight(self):
        assert sigmoid_transform(math.inf, tau=10.0) == 1.0

    def test_bounds(self):
        for w in (0.0, 5.0, 10.0, 1e6):
            assert 0.0 < sigmoid_transform(w, tau=10.0) <= 1.0


class TestCrde:
    def test_source_sink_edges_are_zero(self, two_plane):
        g = build_graph(two_plane.fset)
        for e in g.edges:
            if not (g.vertices[e.u].is_feature and g.vertices[e.v].is_feature):
                assert e.raw_weight == 0.0

    def test_single_plane_residuals_vanish(self, single_plane):
        g = build_graph(single_plane.fset)
        for e in g.edges:
            if g.vertices[e.u].is_feature and g.vertices[e.v].is_feature:
                assert e.raw_weight < 1e-6

    def test_symmetry_exact(self, two_plane):
        fset = two_plane.fset
        g = build_graph(fset)
        rng = np.random.default_rng(2)
        feats = rng.choice(fset.feature_count, size=(40, 2))
        for i, j in feats:
            if i == j:
                continue
            hi, hj = g.homographies[i], g.homographies[j]
            assert crde_weight(fset, int(i), int(j), hi, hj) == crde_weight(
                fset, int(j), int(i), hj, hi
            )

    def test_matches_bruteforce_oracle(self, two_plane):
        fset = two_plane.fset
        g = build_graph(fset)
        checked = 0
        for e in g.edges:
            u, v = g.vertices[e.u], g.vertices[e.v]
            if not (u.is_feature and v.is_feature):
                continue
            want = crde_oracle(
                fset,
                u.feature_index,
                v.feature_index,
                g.homographies[e.u].matrix,
                g.homographies[e.v].matrix,
            )
            assert abs(e.raw_weight - want) < 1e-9
            checked += 1
        assert checked > 100

    def test_two_plane_dichotomy(self, two_plane):
        labels = two_plane.plane_labels
        g = build_graph(two_plane.fset, tau=10.0)
        for e in g.edges:
            u, v = g.vertices[e.u], g.vertices[e.v]
            if not (u.is_feature and v.is_feature):
                continue
            if labels[u.feature_index] == labels[v.feature_index]:
                assert e.raw_weight < 10.0
            else:
                assert e.raw_weight > 10.0


class TestBuildGraph:
    def test_smallest_triangulation(self):
        fset = build_feature_set(
            [
                PointPair(p=np.array([100.0, 100.0]), p_ref=np.array([100.0, 100.0])),
                PointPair(p=np.array([300.0, 120.0]), p_ref=np.array([300.0, 120.0])),
                PointPair(p=np.array([200.0, 300.0]), p_ref=np.array([200.0, 300.0])),
                PointPair(p=np.array([220.0, 150.0]), p_ref=np.array([220.0, 150.0])),
            ],
            [],
            (400, 400),
            (400, 400),
        )
        g = build_graph(fset)
        n_v = len(g.vertices)
        assert n_v == 6  # 4 features + source + sink
        assert len(g.edges) <= 3 * n_v - 6
        for e in g.edges:
            assert not (
                {e.u, e.v} == {g.source, g.sink}
            ), "direct source-sink edges must be dropped"

    def test_collinear_anchors_degenerate(self):
        # all anchors on the vertical centerline, where source/sink also sit
        w, h = 401, 401
        cx = (w - 1) / 2.0
        pts = [
            PointPair(p=np.array([cx, float(y)]), p_ref=np.array([cx, float(y)]))
            for y in (50, 120, 190, 260)
        ]
        fset = build_feature_set(pts, [], (w, h), (w, h))
        with pytest.raises(DegenerateGeometry):
            build_graph(fset, direction="horizontal")

    def test_terminal_placement(self, two_plane):
        fset = two_plane.fset
        w, h = fset.ref_dims
        g_h = build_graph(fset, direction="horizontal")
        np.testing.assert_allclose(g_h.vertices[g_h.source].anchor, [(w - 1) / 2, 0])
        np.testing.assert_allclose(g_h.vertices[g_h.sink].anchor, [(w - 1) / 2, h - 1])
        g_v = build_graph(fset, direction="vertical")
        np.testing.assert_allclose(g_v.vertices[g_v.source].anchor, [0, (h - 1) / 2])
        np.testing.assert_allclose(g_v.vertices[g_v.sink].anchor, [w - 1, (h - 1) / 2])

    def test_every_feature_is_one_vertex(self, two_plane):
        fset = two_plane.fset
        g = build_graph(fset)
        feat_ids = sorted(
            v.feature_index for v in g.vertices if v.is_feature
        )
        assert feat_ids == list(range(fset.feature_count))


class TestShortestPath:
    def test_trivial_chain(self):
        g = _toy_graph(1, [], source_edges=[0], sink_edges=[0])
        assert shortest_path(g) == [1, 0, 2]

    def test_fewer_edges_tie_break(self):
        # two parallel routes with equal total cost: 3 edges vs 4 edges
        # source=4, sink=5; route A: 4-0-5 via feature 0 (2 edges... build 3 vs 4)
        edges = [
            (0, 1, 1.0, 0.25),  # route A: s-0-1-t  (3 edges: s-0, 0-1, 1-t)
            (0, 2, 1.0, 0.125),  # route B: s-0-2-3-t (4 edges)
            (2, 3, 1.0, 0.125),
        ]
        g = _toy_graph(4, edges, source_edges=[0], sink_edges=[1, 3])
        # make terminal edges equal cost so totals tie: A = c+0.25+c, B = c+0.125+0.125+c
        path = shortest_path(g)
        assert path == [4, 0, 1, 5]

    def test_lexicographic_tie_break(self):
        # two identical-cost, identical-length routes through features 0 or 1
        edges = []
        g = _toy_graph(2, edges, source_edges=[0, 1], sink_edges=[0, 1])
        assert shortest_path(g) == [2, 0, 3]

    def test_disconnected(self):
        g = _toy_graph(2, [], source_edges=[0], sink_edges=[1])
        with pytest.raises(Disconnected):
            shortest_path(g)

    def test_against_bellman_ford_random(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            n = int(rng.integers(4, 30))
            n_feat = n - 2
            # random connected graph: spanning chain + extra edges
            edge_list = []
            for v in range(1, n_feat):
                u = int(rng.integers(0, v))
                edge_list.append((u, v, 1.0, float(rng.uniform(0.01, 0.99))))
            for _ in range(n_feat):
                u, v = rng.integers(0, n_feat, 2)
                if u != v:
                    edge_list.append((int(u), int(v), 1.0, float(rng.uniform(0.01, 0.99))))
            src_feats = sorted(set(rng.integers(0, n_feat, 2).tolist()))
            snk_feats = sorted(set(rng.integers(0, n_feat, 2).tolist()))
            g = _toy_graph(n_feat, edge_list, source_edges=src_feats, sink_edges=snk_feats)
            path = shortest_path(g)
            cost = 0.0
            for eid in g.path_edge_ids(path):
                cost += g.edges[eid].path_weight
            bf_edges = [(e.u, e.v, e.path_weight) for e in g.edges]
            dist = bellman_ford(n_feat + 2, bf_edges, g.source)
            assert abs(cost - dist[g.sink]) < 1e-12


class TestGrowHypothesis:
    def test_no_growth(self):
        g = _toy_graph(2, [(0, 1, 50.0, 0.99)], source_edges=[0], sink_edges=[0])
        hyp = grow_hypothesis(g, [2, 0, 3], tau=10.0)
        assert hyp.member_features == frozenset({0})

    def test_transitive_chain(self):
        edges = [(0, 1, 5.0, 0.1), (1, 2, 5.0, 0.1)]
        g = _toy_graph(3, edges, source_edges=[0], sink_edges=[0])
        hyp = grow_hypothesis(g, [3, 0, 4], tau=10.0)
        assert hyp.member_features == frozenset({0, 1, 2})

    def test_does_not_grow_through_terminals(self):
        # feature 1 is connected to the source but not (cheaply) to feature 0
        edges = [(0, 1, 99.0, 0.999)]
        g = _toy_graph(2, edges, source_edges=[0, 1], sink_edges=[0])
        hyp = grow_hypothesis(g, [2, 0, 3], tau=10.0)
        assert hyp.member_features == frozenset({0})

    def test_two_plane_growth_matches_plane(self, two_plane):
        g = build_graph(two_plane.fset)
        path = shortest_path(g)
        hyp = grow_hypothesis(g, path, tau=10.0)
        labels = two_plane.plane_labels
        planes = {labels[i] for i in hyp.member_features}
        assert len(planes) == 1
        plane = planes.pop()
        expected = {i for i in range(len(labels)) if labels[i] == plane}
        assert hyp.member_features == frozenset(expected)


class TestGenerateHypotheses:
    def test_single_plane_one_hypothesis(self, single_plane):
        g = build_graph(single_plane.fset)
        hyps = generate_hypotheses(g, tau=10.0, min_remaining=30)
        assert len(hyps) == 1
        assert hyps[0].member_features == frozenset(range(single_plane.fset.feature_count))

    def test_two_plane_two_hypotheses(self, two_plane):
        g = build_graph(two_plane.fset)
        hyps = generate_hypotheses(g, tau=10.0, min_remaining=30)
        assert len(hyps) == 2
        labels = two_plane.plane_labels
        got = {frozenset(h.member_features) for h in hyps}
        want = {
            frozenset(i for i in range(len(labels)) if labels[i] == p) for p in (0, 1)
        }
        assert got == want

    def test_deterministic(self, two_plane):
        g = build_graph(two_plane.fset)
        a = generate_hypotheses(g)
        b = generate_hypotheses(g)
        assert [h.member_features for h in a] == [h.member_features for h in b]
        assert [h.seed_path for h in a] == [h.seed_path for h in b]

    def test_seed_paths_edge_disjoint(self, two_plane):
        g = build_graph(two_plane.fset)
        hyps = generate_hypotheses(g)
        seen = set()
        for h in hyps:
            for eid in g.path_edge_ids(list(h.seed_path)):
                assert eid not in seen
                seen.add(eid)

    def test_membership_soundness(self, two_plane):
        g = build_graph(two_plane.fset)
        for h in generate_hypotheses(g):
            seed_members = {
                g.vertices[v].feature_index for v in h.seed_path if g.vertices[v].is_feature
            }
            reached = set(seed_members)
            frontier = list(seed_members)
            while frontier:
                nxt = []
                for v in frontier:
                    for nbr, eid in g.adjacency[v]:
                        if (
                            g.vertices[nbr].is_feature
                            and nbr not in reached
                            and g.edges[eid].raw_weight < 10.0
                        ):
                            reached.add(nbr)
                            nxt.append(nbr)
                frontier = nxt
            assert h.member_features == frozenset(reached)

    def test_always_returns_one_when_connected(self):
        # every edge is terrible, but the graph is connected
        edges = [(0, 1, 500.0, 0.9999)]
        g = _toy_graph(2, edges, source_edges=[0], sink_edges=[1])
        hyps = generate_hypotheses(g, tau=10.0, min_remaining=30)
        assert len(hyps) == 1

    def test_fatal_when_disconnected_before_first(self):
        g = _toy_graph(2, [], source_edges=[0], sink_edges=[1])
        with pytest.raises(Disconnected):
            generate_hypotheses(g)

    def test_min_remaining_stops_generation(self, two_plane):
        g = build_graph(two_plane.fset)
        # with a huge min_remaining, one hypothesis suffices
        hyps = generate_hypotheses(g, min_remaining=10_000)
        assert len(hyps) == 1

    def test_monotone_progress_and_round_cap(self, two_plane):
        g = build_graph(two_plane.fset)
        hyps = generate_hypotheses(g)
        assert all(
            a.generation_round < b.generation_round for a, b in zip(hyps, hyps[1:])
        )
        assert hyps[-1].generation_round <= len(g.vertices)
