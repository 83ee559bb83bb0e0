import numpy as np
import pytest
from oracles import full_sort_retrieval

from fedca.augment import (
    data_select,
    direct_retrieval_augment,
    feddca_augment,
    random_sampling_augment,
    retrieve_topk,
)
from fedca.clustering import CandidateCenters
from fedca.errors import ValidationError
from fedca.geometry import SimilarityMode
from fedca.selection import greedy_select
from fedca.store import EmbeddingStore
from fedca.synthetic import random_selection_problem, random_store, random_unit_vectors


def _store_from(vectors, ids=None, domain="d"):
    vecs = np.asarray(vectors, dtype=np.float32)
    ids = list(range(len(vecs))) if ids is None else ids
    return EmbeddingStore(vecs.shape[1], ids, [domain] * len(vecs), vecs)


def test_exact_match_is_rank_one():
    pool = random_store(20, 6, seed=1)
    query = pool.vectors[7]
    result = retrieve_topk(pool, query, 3)
    assert result.hits[0][0] == int(pool.ids[7])
    assert result.hits[0][1] == pytest.approx(1.0, abs=1e-6)


def test_k_larger_than_pool_returns_all_sorted():
    pool = random_store(5, 4, seed=2)
    result = retrieve_topk(pool, pool.vectors[0], 50)
    assert len(result.hits) == 5
    assert result.shortfall == 45
    sims = result.sims()
    assert sims == sorted(sims, reverse=True)


def test_threshold_excludes_before_topk():
    # pool engineered to similarities {0.9, 0.6, 0.3} against the query e1
    def at_angle(c):
        v = np.array([c, np.sqrt(1 - c * c), 0.0, 0.0])
        return v
    pool = _store_from([at_angle(0.9), at_angle(0.6), at_angle(0.3)], ids=[10, 11, 12])
    query = np.array([1, 0, 0, 0], dtype=np.float32)
    result = retrieve_topk(pool, query, 2, threshold=0.7)
    assert result.ids() == [11, 12]
    assert all(s <= 0.7 for s in result.sims())
    # unfiltered oracle agrees once the filtered record is dropped
    oracle = full_sort_retrieval(pool.ids, pool.vectors, query, 2, threshold=0.7)
    assert result.ids() == [i for _, i in oracle]


def test_retrieval_matches_full_sort_oracle():
    rng = np.random.default_rng(5)
    pool = random_store(80, 8, seed=3)
    for _ in range(50):
        query = random_unit_vectors(1, 8, rng)[0]
        k = int(rng.integers(1, 20))
        result = retrieve_topk(pool, query, k)
        oracle = full_sort_retrieval(pool.ids, pool.vectors, query, k)
        assert result.ids() == [i for _, i in oracle]
        np.testing.assert_allclose(result.sims(), [s for s, _ in oracle], atol=1e-12)


def test_threshold_monotonicity():
    pool = random_store(60, 6, seed=4)
    query = random_unit_vectors(1, 6, np.random.default_rng(9))[0]
    prev_top = None
    for alpha in (0.9, 0.5, 0.1, -0.5):
        result = retrieve_topk(pool, query, 10, threshold=alpha)
        if result.hits:
            assert result.hits[0][1] <= alpha + 1e-12
            if prev_top is not None:
                assert result.hits[0][1] <= prev_top + 1e-12
            prev_top = result.hits[0][1]


def test_feddca_augment_counts_and_purity():
    problem = random_selection_problem(4, 2, 8, seed=6, mode=SimilarityMode.AFFINE_SHIFTED)
    selection = greedy_select(problem)
    pool = random_store(100, 8, seed=7)
    results = feddca_augment(pool, selection, per_client=15, threshold=None)
    assert len(results) == 4
    assert all(len(r.hits) == 15 for r in results)
    # keyed by slot's client of origin, in slot order
    assert [r.client_id for r in results] == [s.client for s in selection.slots]
    # pure function of its inputs
    again = feddca_augment(pool, selection, per_client=15, threshold=None)
    assert [r.hits for r in again] == [r.hits for r in results]


def test_feddca_augment_saturation():
    problem = random_selection_problem(2, 1, 4, seed=8)
    selection = greedy_select(problem)
    pool = random_store(5, 4, seed=9)
    results = feddca_augment(pool, selection, per_client=5, threshold=None)
    for r in results:
        assert sorted(r.ids()) == [int(i) for i in pool.ids]


def test_direct_retrieval_xi_one_equals_topk():
    pool = random_store(50, 6, seed=10)
    center = random_unit_vectors(1, 6, np.random.default_rng(11))
    cand = CandidateCenters(client_id=0, centers=center)
    direct = direct_retrieval_augment(pool, [cand], per_client=7)
    top = retrieve_topk(pool, center[0], 7)
    assert direct[0].ids() == top.ids()


def test_direct_retrieval_remainder_quotas():
    # xi=2, per_client=3: quotas (2, 1); orthogonal centers split the pool
    pool = _store_from(
        [[1, 0, 0, 0], [0.99, np.sqrt(1 - 0.99**2), 0, 0], [0, 1, 0, 0], [0, 0.99, np.sqrt(1 - 0.99**2), 0]],
        ids=[0, 1, 2, 3],
    )
    centers = CandidateCenters(
        client_id=0,
        centers=np.array([[1, 0, 0, 0], [0, 1, 0, 0]], dtype=np.float32),
    )
    result = direct_retrieval_augment(pool, [centers], per_client=3)[0]
    # first query takes its top-2 {0, 1}, second its top-1 {2}
    assert sorted(result.ids()) == [0, 1, 2]


def test_direct_retrieval_backfills_duplicates():
    rng = np.random.default_rng(12)
    pool = random_store(40, 6, seed=13)
    base = random_unit_vectors(1, 6, rng)[0].astype(np.float64)
    nudged = base + 0.01 * rng.standard_normal(6)
    nudged /= np.linalg.norm(nudged)
    centers = CandidateCenters(
        client_id=0, centers=np.stack([base, nudged]).astype(np.float32)
    )
    result = direct_retrieval_augment(pool, [centers], per_client=20)[0]
    ids = result.ids()
    assert len(ids) == 20
    assert len(set(ids)) == 20  # overlapping neighborhoods still yield unique ids
    # union oracle: the result must contain the top-10 of each query's ranking
    for c in centers.centers:
        top = set(i for _, i in full_sort_retrieval(pool.ids, pool.vectors, c, 10))
        assert top <= set(ids)


def test_direct_retrieval_pool_exhaustion():
    pool = random_store(6, 4, seed=14)
    centers = CandidateCenters(client_id=0, centers=random_unit_vectors(2, 4, np.random.default_rng(15)))
    result = direct_retrieval_augment(pool, [centers], per_client=10)[0]
    assert sorted(result.ids()) == [int(i) for i in pool.ids]
    assert result.shortfall == 4


def test_random_sampling_deterministic_and_independent():
    pool = random_store(30, 5, seed=16)
    a = random_sampling_augment(pool, n_clients=3, per_client=10, seed=99)
    b = random_sampling_augment(pool, n_clients=3, per_client=10, seed=99)
    assert [r.hits for r in a] == [r.hits for r in b]
    assert a[0].ids() != a[1].ids()  # independent draws across clients
    c = random_sampling_augment(pool, n_clients=3, per_client=10, seed=100)
    assert [r.hits for r in c] != [r.hits for r in a]


def test_random_sampling_saturation_and_error():
    pool = random_store(8, 4, seed=17)
    full = random_sampling_augment(pool, n_clients=2, per_client=8, seed=1)
    for r in full:
        assert sorted(r.ids()) == [int(i) for i in pool.ids]
    with pytest.raises(ValidationError):
        random_sampling_augment(pool, n_clients=1, per_client=9, seed=1)


def test_random_sampling_inclusion_frequency():
    # empirical inclusion rate over many seeds ~ per_client / |pool| (3-sigma)
    pool = random_store(10, 4, seed=18)
    per_client, trials = 3, 4000
    target = int(pool.ids[4])
    hits = 0
    for seed in range(trials):
        result = random_sampling_augment(pool, n_clients=1, per_client=per_client, seed=seed)
        hits += target in result[0].ids()
    p = per_client / len(pool)
    sigma = np.sqrt(p * (1 - p) / trials)
    assert abs(hits / trials - p) < 3 * sigma


def test_data_select_at_reference_scale():
    # 200 records selected per client from 1000-record local pools
    problem = random_selection_problem(3, 2, 8, seed=40)
    selection = greedy_select(problem)
    pools = [random_store(1000, 8, seed=41 + k, id_start=10_000 * k) for k in range(3)]
    results = data_select(pools, selection, per_client=200)
    assert all(len(r.hits) == 200 for r in results)
    assert all(r.threshold is None for r in results)


def test_data_select_ranks_each_local_pool():
    problem = random_selection_problem(3, 2, 6, seed=19)
    selection = greedy_select(problem)
    pools = [random_store(25, 6, seed=20 + k, id_start=100 * k) for k in range(3)]
    results = data_select(pools, selection, per_client=5)
    for k, r in enumerate(results):
        oracle = full_sort_retrieval(
            pools[k].ids, pools[k].vectors, selection.slots[k].vector, 5
        )
        assert r.ids() == [i for _, i in oracle]
        assert r.client_id == k
    # saturation: pool smaller than per_client
    small = [random_store(3, 6, seed=30 + k) for k in range(3)]
    saturated = data_select(small, selection, per_client=10)
    assert all(len(r.hits) == 3 for r in saturated)
