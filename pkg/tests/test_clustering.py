import numpy as np
import pytest

from oracles import lloyd_replay

from snowball_sim.clustering import (CH_SENTINEL, ClusteringResult, ch_score, gap_statistic,
                                     kmeans, kmeans_fit, minmax_normalize)
from snowball_sim.errors import ParameterError
from snowball_sim.rng import RngStream


def test_kmeans_separated_pairs_converge_immediately():
    points = np.array([[0.0, 0.0], [0.2, 0.0], [10.0, 0.0], [10.2, 0.0]])
    init = np.array([[0.1, 0.0], [10.1, 0.0]])
    res = kmeans(points, init)
    assert res.assignments.tolist() == [0, 0, 1, 1]
    assert res.n_iter == 1
    assert res.inertia == pytest.approx(0.04)


def test_kmeans_k_equals_n_zero_inertia():
    points = np.array([[0.0], [1.0], [5.0]])
    res = kmeans(points, points.copy())
    assert res.inertia == 0.0
    assert sorted(res.assignments.tolist()) == [0, 1, 2]


def test_kmeans_rejects_k_above_n():
    with pytest.raises(ParameterError):
        kmeans(np.zeros((2, 1)), np.zeros((3, 1)))


def test_kmeans_matches_lloyd_replay_oracle():
    gen = np.random.default_rng(123)
    for trial in range(30):
        n = int(gen.integers(4, 9))
        points = gen.standard_normal((n, 2)) * gen.uniform(0.5, 3.0)
        starts = gen.choice(n, size=2, replace=False)
        init = points[starts] + gen.standard_normal((2, 2)) * 0.1
        res = kmeans(points, init)
        labels, inertias = lloyd_replay(points, init)
        assert res.assignments.tolist() == labels, f"trial {trial}"
        # Lloyd descent: within-cluster SSQ never increases between iterations
        assert all(b <= a + 1e-9 for a, b in zip(inertias, inertias[1:]))


def test_kmeans_reseeds_empty_cluster():
    points = np.array([[0.0], [1.0], [2.0]])
    # both centroids nearest to the same points; cluster of the far one empties
    init = np.array([[0.5], [100.0]])
    res = kmeans(points, init)
    assert len(set(res.assignments.tolist())) == 2


def test_ch_score_hand_computed_value():
    points = np.array([[0.0], [1.0], [9.0], [10.0]])
    res = ClusteringResult(np.array([0, 0, 1, 1]), np.array([[0.5], [9.5]]), 1.0, 1)
    assert ch_score(points, res) == pytest.approx(162.0, abs=1e-9)


def test_ch_score_prefers_natural_split():
    points = np.array([[0.0], [1.0], [9.0], [10.0]])
    bad = ClusteringResult(np.array([0, 1, 0, 1]), np.array([[4.5], [5.5]]), 1.0, 1)
    assert ch_score(points, bad) < 162.0


def test_ch_score_degenerate_sentinel():
    points = np.array([[0.0], [10.0]])
    res = ClusteringResult(np.array([0, 1]), points.copy(), 0.0, 1)
    assert ch_score(points, res) == CH_SENTINEL
    one_cluster = ClusteringResult(np.array([0, 0]), points.copy(), 1.0, 1)
    assert ch_score(points, one_cluster) == CH_SENTINEL


def test_minmax_basic():
    assert np.allclose(minmax_normalize([2.0, 4.0, 6.0]), [0.0, 0.5, 1.0])


def test_minmax_degenerate_all_equal():
    assert np.array_equal(minmax_normalize([5.0, 5.0, 5.0]), [1.0, 1.0, 1.0])
    assert np.array_equal(minmax_normalize([3.0]), [1.0])


def test_minmax_clamps_sentinels():
    out = minmax_normalize([1.0, 3.0, np.inf])
    assert np.allclose(out, [0.0, 1.0, 1.0])
    assert np.array_equal(minmax_normalize([np.inf, np.inf]), [1.0, 1.0])


def blobs(rng, centers, n_per, std):
    gen = rng.generator()
    pts = [gen.standard_normal((n_per, len(centers[0]))) * std + np.asarray(c) for c in centers]
    return np.vstack(pts)


def test_gap_statistic_recovers_three_blobs():
    for seed in (0, 1, 2):
        pts = blobs(RngStream(seed).derive("blobs"), [(0, 0), (10, 0), (0, 10)], 20, 0.5)
        assert gap_statistic(pts, RngStream(seed).derive("gap")) == 3


def test_gap_statistic_identical_points_returns_k_min():
    pts = np.ones((12, 3))
    assert gap_statistic(pts, RngStream(0)) == 2


def test_gap_statistic_clamps_to_point_count():
    pts = np.random.default_rng(4).standard_normal((5, 2))
    k = gap_statistic(pts, RngStream(1), k_min=2, k_max=15)
    assert 2 <= k <= 5


def test_kmeans_fit_finds_good_blob_clustering():
    pts = blobs(RngStream(9).derive("blobs"), [(0, 0), (8, 8)], 15, 0.4)
    res = kmeans_fit(pts, 2, RngStream(9).derive("fit"))
    first = set(res.assignments[:15].tolist())
    second = set(res.assignments[15:].tolist())
    assert len(first) == 1 and len(second) == 1 and first != second
