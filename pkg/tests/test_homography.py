"""Moving DLT estimation and homography application."""

import numpy as np
import pytest

from oracles import dlt_oracle, project
from seamstitch.correspondences import PointPair, build_feature_set
from seamstitch.errors import AtInfinity, RankDeficient
from seamstitch.homography import (
    Homography,
    apply_homography,
    apply_to_segment,
    build_design_system,
    gaussian_weights,
    global_homography,
    local_homography,
    solve_mdlt,
)
from seamstitch.synthetic import single_plane_scene


def _point_set(pairs, dims=(640, 480)):
    pts = [PointPair(p=np.array(p, float), p_ref=np.array(q, float)) for p, q in pairs]
    return build_feature_set(pts, [], dims, dims)


@pytest.fixture
def square_set():
    return _point_set(
        [((100, 100), (100, 100)), ((400, 100), (400, 100)),
         ((400, 400), (400, 400)), ((100, 400), (100, 400))]
    )


class TestSolveMdlt:
    def test_identity_case(self, square_set):
        system = build_design_system(square_set)
        h = solve_mdlt(system, np.ones(8))
        ident = np.eye(3).reshape(9) / np.sqrt(3)
        assert min(np.abs(h.h - ident).max(), np.abs(h.h + ident).max()) < 1e-9
        residual = np.linalg.norm(system.stacked @ h_normalized(h, system))
        assert residual < 1e-9

    def test_pure_translation_maps_held_out_point(self):
        fset = _point_set(
            [((100, 100), (110, 100)), ((400, 120), (410, 120)),
             ((380, 400), (390, 400)), ((120, 380), (130, 380))]
        )
        h = solve_mdlt(build_design_system(fset), np.ones(8))
        held_out = np.array([250.0, 250.0])
        mapped = apply_homography(h, held_out)
        np.testing.assert_allclose(mapped, held_out + [10, 0], atol=1e-6)

    def test_uniform_weights_match_plain_dlt(self):
        scene = single_plane_scene(seed=3, n_points=20, n_lines=3)
        fset = scene.fset
        system = build_design_system(fset)
        h = solve_mdlt(system, np.ones(system.stacked.shape[0]))
        h_ref = dlt_oracle(fset.pts_target, fset.pts_ref, fset.lines_target, fset.lines_ref)
        assert min(np.abs(h.h - h_ref).max(), np.abs(h.h + h_ref).max()) < 1e-9

    def test_optimality_spot_check(self):
        rng = np.random.default_rng(8)
        scene = single_plane_scene(seed=9, n_points=15, n_lines=2)
        system = build_design_system(scene.fset)
        weights = rng.uniform(0.2, 1.0, system.stacked.shape[0])
        h = solve_mdlt(system, weights)
        m = system.stacked * weights[:, None]
        # compare in conditioned coordinates, where the solve happened
        h_cond = system.t_ref @ h.matrix @ np.linalg.inv(system.t_target)
        h_cond = h_cond.reshape(9) / np.linalg.norm(h_cond)
        best = np.linalg.norm(m @ h_cond)
        for _ in range(100):
            v = rng.normal(size=9)
            v /= np.linalg.norm(v)
            assert best <= np.linalg.norm(m @ v) + 1e-9

    def test_rank_deficient_too_few_rows(self, square_set):
        system = build_design_system(square_set)
        weights = np.ones(8)
        weights[:2] = 0.0
        with pytest.raises(RankDeficient):
            solve_mdlt(system, weights)

    def test_rank_deficient_degenerate_geometry(self):
        # all points on one line: homography not determined
        fset = _point_set(
            [((100, 100), (110, 100)), ((200, 100), (210, 100)),
             ((300, 100), (310, 100)), ((400, 100), (410, 100)),
             ((500, 100), (510, 100))]
        )
        with pytest.raises(RankDeficient):
            solve_mdlt(build_design_system(fset), np.ones(10))

    def test_negative_weights_rejected(self, square_set):
        system = build_design_system(square_set)
        w = np.ones(8)
        w[3] = -0.5
        with pytest.raises(ValueError):
            solve_mdlt(system, w)


def h_normalized(h: Homography, system) -> np.ndarray:
    h_cond = system.t_ref @ h.matrix @ np.linalg.inv(system.t_target)
    return h_cond.reshape(9) / np.linalg.norm(h_cond)


class TestDesignSystem:
    def test_row_counts(self, two_plane):
        fset = two_plane.fset
        system = build_design_system(fset)
        assert system.a_rows.shape == (2 * fset.n_points, 9)
        assert system.b_rows.shape == (2 * fset.n_lines, 9)

    def test_noiseless_rank_at_most_8(self):
        scene = single_plane_scene(seed=12, n_points=25, n_lines=3)
        system = build_design_system(scene.fset)
        s = np.linalg.svd(system.stacked, compute_uv=False)
        assert s[-1] < 1e-8 * s[0]

    def test_subset_selection(self, two_plane):
        fset = two_plane.fset
        sub = list(range(10)) + [fset.n_points, fset.n_points + 1]
        system = build_design_system(fset, sub)
        assert system.a_rows.shape == (20, 9)
        assert system.b_rows.shape == (4, 9)


class TestGaussianWeights:
    def test_zero_distance_weight_one(self, two_plane):
        fset = two_plane.fset
        w = gaussian_weights(fset.pts_ref[3], fset, sigma=50.0, gamma=0.0)
        assert w[6] == 1.0 and w[7] == 1.0  # rows 2*3, 2*3+1

    def test_floor_clamp(self, two_plane):
        fset = two_plane.fset
        far = np.array([1e6, 1e6])
        w = gaussian_weights(far, fset, sigma=50.0, gamma=0.025)
        np.testing.assert_allclose(w, 0.025)

    def test_closed_form_at_sigma(self):
        fset = _point_set(
            [((50, 100), (50, 100)), ((100, 300), (100, 300)),
             ((300, 300), (300, 300)), ((300, 100), (300, 100))]
        )
        sigma = 40.0
        anchor = fset.pts_ref[0] + np.array([sigma, 0.0])
        w = gaussian_weights(anchor, fset, sigma=sigma, gamma=0.0)
        np.testing.assert_allclose(w[0], np.exp(-1.0), rtol=1e-12)

    def test_permutation_invariance(self, two_plane):
        fset = two_plane.fset
        anchor = np.array([200.0, 150.0])
        w = gaussian_weights(anchor, fset, sigma=60.0)
        perm = np.random.default_rng(0).permutation(fset.n_points)
        shuffled = build_feature_set(
            [fset.points[i] for i in perm], list(fset.lines), fset.target_dims, fset.ref_dims
        )
        w2 = gaussian_weights(anchor, shuffled, sigma=60.0)
        for new_i, old_i in enumerate(perm):
            assert w2[2 * new_i] == w[2 * old_i]

    def test_rows_repeat_per_feature(self, two_plane):
        fset = two_plane.fset
        w = gaussian_weights(np.array([100.0, 100.0]), fset, sigma=30.0)
        assert len(w) == 2 * fset.feature_count
        np.testing.assert_array_equal(w[0::2], w[1::2])


class TestApplyHomography:
    def test_identity_point(self):
        h = Homography.from_matrix(np.eye(3))
        np.testing.assert_allclose(apply_homography(h, np.array([3.0, 4.0])), [3, 4])

    def test_translation_segment(self):
        m = np.eye(3)
        m[0, 2] = 10.0
        h = Homography.from_matrix(m)
        seg = apply_to_segment(h, np.array([[0.0, 0.0], [1.0, 1.0]]))
        np.testing.assert_allclose(seg, [[10, 0], [11, 1]], atol=1e-12)

    def test_scaling_projection(self):
        h = Homography.from_matrix(np.diag([2.0, 2.0, 1.0]))
        np.testing.assert_allclose(apply_homography(h, np.array([1.0, 1.0])), [2, 2], atol=1e-12)

    def test_at_infinity(self):
        m = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 1.0]])
        h = Homography.from_matrix(m)
        with pytest.raises(AtInfinity):
            apply_homography(h, np.array([5.0, 1.0]))  # w = 1 - 1 = 0

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(4)
        m = np.array([[1.1, 0.05, 20.0], [-0.03, 0.95, -8.0], [1e-4, -5e-5, 1.0]])
        h = Homography.from_matrix(m)
        pts = rng.uniform(0, 500, (50, 2))
        back = apply_homography(h.inverse(), apply_homography(h, pts))
        np.testing.assert_allclose(back, pts, atol=1e-6)

    def test_unit_norm_and_nonsingular(self):
        h = Homography.from_matrix(np.diag([3.0, 5.0, 1.0]))
        assert abs(np.linalg.norm(h.h) - 1.0) < 1e-12
        assert abs(np.linalg.det(h.matrix)) > 1e-12

    def test_singular_matrix_rejected(self):
        with pytest.raises(RankDeficient):
            Homography.from_matrix(np.diag([1.0, 1.0, 0.0]))


class TestConvenienceSolvers:
    def test_global_matches_uniform(self, two_plane):
        fset = two_plane.fset
        system = build_design_system(fset)
        g = global_homography(fset)
        u = solve_mdlt(system, np.ones(system.stacked.shape[0]))
        np.testing.assert_array_equal(g.h, u.h)

    def test_local_at_anchor_on_single_plane_is_exact(self, single_plane):
        fset = single_plane.fset
        truth = single_plane.homographies[0]
        h = local_homography(fset, fset.ref_anchors[0], sigma=60.0)
        pts = fset.pts_target
        np.testing.assert_allclose(
            apply_homography(h, pts), apply_homography(truth, pts), atol=1e-6
        )
