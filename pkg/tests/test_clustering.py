import numpy as np
import pytest
from oracles import best_two_partition_cost

from fedca.clustering import CandidateCenters, assign_labels, kmeans
from fedca.errors import ValidationError
from fedca.synthetic import random_unit_vectors


def _normalize(v):
    arr = np.asarray(v, dtype=np.float64)
    return (arr / np.linalg.norm(arr, axis=-1, keepdims=True)).astype(np.float32)


def test_k_equals_n_gives_zero_inertia():
    pts = random_unit_vectors(6, 5, np.random.default_rng(1))
    result = kmeans(pts, k=6, seed=0)
    assert result.inertia == pytest.approx(0.0, abs=1e-12)
    assert sorted(result.cluster_sizes.tolist()) == [1] * 6
    # centers are exactly the points, in some order
    got = {tuple(c) for c in result.centers.tolist()}
    want = {tuple(p) for p in pts.tolist()}
    assert got == want


def test_k_one_returns_renormalized_mean():
    pts = random_unit_vectors(10, 4, np.random.default_rng(2))
    result = kmeans(pts, k=1, seed=5)
    expected = _normalize(pts.astype(np.float64).mean(axis=0))
    np.testing.assert_allclose(result.centers[0], expected, atol=1e-6)
    assert result.cluster_sizes.tolist() == [10]


def test_two_blobs_match_exhaustive_partition():
    rng = np.random.default_rng(3)
    a = _normalize(np.array([1.0, 0, 0, 0]) + 0.05 * rng.standard_normal((3, 4)))
    b = _normalize(np.array([0, 0, 1.0, 0]) + 0.05 * rng.standard_normal((3, 4)))
    pts = np.concatenate([a, b])
    result = kmeans(pts, k=2, seed=7)
    labels = assign_labels(pts, result)
    # the two blobs end up in separate clusters
    assert len(set(labels[:3].tolist())) == 1
    assert len(set(labels[3:].tolist())) == 1
    assert labels[0] != labels[3]
    # and the achieved cost equals the exhaustive 2-coloring optimum
    assert result.inertia == pytest.approx(best_two_partition_cost(pts), abs=1e-9)
    for c in result.centers:
        assert np.linalg.norm(c.astype(np.float64)) == pytest.approx(1.0, abs=1e-6)


def test_errors():
    pts = random_unit_vectors(3, 4, np.random.default_rng(0))
    with pytest.raises(ValidationError, match="shrink k"):
        kmeans(pts, k=4, seed=0)
    with pytest.raises(ValidationError, match="empty"):
        kmeans(np.empty((0, 4)), k=1, seed=0)
    with pytest.raises(ValidationError):
        kmeans(pts, k=0, seed=0)


def test_determinism_bit_for_bit():
    pts = random_unit_vectors(40, 8, np.random.default_rng(4))
    a = kmeans(pts, k=5, seed=123)
    b = kmeans(pts, k=5, seed=123)
    assert np.array_equal(a.centers, b.centers)
    assert np.array_equal(a.cluster_sizes, b.cluster_sizes)
    assert a.inertia == b.inertia
    c = kmeans(pts, k=5, seed=124)
    assert not np.array_equal(a.centers, c.centers)


def test_inertia_non_increasing_across_iterations():
    pts = random_unit_vectors(60, 6, np.random.default_rng(5))
    inertias = [kmeans(pts, k=4, seed=9, max_iters=t).inertia for t in range(1, 12)]
    for earlier, later in zip(inertias, inertias[1:]):
        assert later <= earlier + 1e-9


def test_centers_are_unit_norm():
    pts = random_unit_vectors(30, 7, np.random.default_rng(6))
    result = kmeans(pts, k=4, seed=11)
    norms = np.linalg.norm(result.centers.astype(np.float64), axis=1)
    assert np.all(np.abs(norms - 1.0) < 1e-6)
    assert int(result.cluster_sizes.sum()) == 30


def test_duplicate_points_saturated_k_does_not_crash():
    base = random_unit_vectors(3, 4, np.random.default_rng(7))
    pts = np.concatenate([base, base])  # duplicates
    result = kmeans(pts, k=6, seed=1)
    assert result.k == 6
    assert int(result.cluster_sizes.sum()) == 6


def test_assign_labels_exact_match_and_tie_break():
    centers = CandidateCenters(
        client_id=0,
        centers=np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0]], dtype=np.float32),
    )
    e3 = np.array([0, 0, 1, 0], dtype=np.float32)
    assert assign_labels(e3[None, :], centers).tolist() == [2]
    # equidistant between centers 0 and 1: documented tie-break to 0
    mid = _normalize(np.array([1.0, 1.0, 0.0, 0.0]))
    assert assign_labels(mid[None, :], centers).tolist() == [0]


def test_assign_labels_matches_linear_scan_oracle():
    rng = np.random.default_rng(8)
    pts = random_unit_vectors(50, 5, rng)
    centers = random_unit_vectors(7, 5, rng)
    got = assign_labels(pts, centers)
    for i, p in enumerate(pts.astype(np.float64)):
        sims = [float(np.dot(p, c)) for c in centers.astype(np.float64)]
        best = max(range(7), key=lambda j: (sims[j], -j))
        assert got[i] == best
