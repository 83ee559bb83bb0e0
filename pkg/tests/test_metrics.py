import numpy as np
import pytest
from oracles import double_loop_coverage

from fedca.errors import ValidationError
from fedca.metrics import comm_cost, cross_client_coverage, icacs, ruai
from fedca.store import EmbeddingStore
from fedca.synthetic import random_store, random_unit_vectors

E1 = np.array([1, 0, 0, 0], dtype=np.float32)
E2 = np.array([0, 1, 0, 0], dtype=np.float32)
E3 = np.array([0, 0, 1, 0], dtype=np.float32)
E4 = np.array([0, 0, 0, 1], dtype=np.float32)


def test_ruai_hand_checks():
    assert ruai([[1, 2], [3, 4]]) == 1.0
    assert ruai([[7]] * 10) == pytest.approx(0.1)
    assert ruai([[1, 2], [2, 3]]) == 0.75
    with pytest.raises(ValidationError):
        ruai([[], []])


def test_ruai_duplicate_and_fresh_id_effects():
    base = ruai([[1, 2], [3, 4]])
    assert ruai([[1, 2], [3, 4], [1]]) < base  # duplicate strictly decreases
    assert ruai([[1, 2], [3, 4, 5]]) >= base  # fresh id weakly increases


def test_icacs_identical_clients_is_one():
    vectors = np.stack([E1] * 5)
    assert icacs([vectors, vectors], k=1, seed=3) == pytest.approx(1.0, abs=1e-6)


def test_icacs_orthogonal_clients_is_zero():
    a = np.stack([E1] * 4)
    b = np.stack([E2] * 4)
    assert icacs([a, b], k=1, seed=3) == pytest.approx(0.0, abs=1e-7)


def test_icacs_hand_computed_cross_average():
    # each client's set is two tight singleton clusters, so k=2 recovers the
    # vectors themselves as centers; ICACS = mean of the 4 cross pairs
    mid = ((E1 + E2) / np.sqrt(2)).astype(np.float32)
    client_a = np.stack([E1, E2])
    client_b = np.stack([E3, mid])
    sims = []
    for u in (E1, E2):
        for v in (E3, mid):
            sims.append(float(np.dot(u.astype(np.float64), v.astype(np.float64))))
    expected = sum(sims) / 4.0
    assert icacs([client_a, client_b], k=2, seed=5) == pytest.approx(expected, abs=1e-6)


def test_icacs_invariant_to_client_order_and_permutation():
    rng = np.random.default_rng(6)
    a = random_unit_vectors(12, 5, rng)
    b = random_unit_vectors(12, 5, rng)
    base = icacs([a, b], k=3, seed=9)
    assert icacs([b, a], k=3, seed=9) == base
    assert icacs([a[::-1].copy(), b], k=3, seed=9) == base
    # but it is a function of the run seed
    assert icacs([a, b], k=3, seed=10) != base
    with pytest.raises(ValidationError):
        icacs([a], k=2, seed=0)


def test_icacs_shrinks_k_for_small_clients(caplog):
    a = random_unit_vectors(3, 4, np.random.default_rng(7))
    b = random_unit_vectors(12, 4, np.random.default_rng(8))
    with caplog.at_level("WARNING"):
        value = icacs([a, b], k=10, seed=1)
    assert "shrinking" in caplog.text
    assert -1.0 <= value <= 1.0


def test_comm_cost_arithmetic():
    assert comm_cost(10, 10, 1024, []) == (102_400, 0)
    class FakeResult:
        def __init__(self, n): self.hits = [(i, 0.0) for i in range(n)]
    assert comm_cost(10, 10, 1024, [FakeResult(1000)] * 10)[1] == 10_000
    assert comm_cost(2, 3, 4, [[('x', 0.0)] * 5, [('y', 0.0)] * 2]) == (24, 7)


def _universe_and_domain():
    dom_vecs = np.stack([E1, E2, E3])
    gen_vecs = np.stack([E4])
    universe = EmbeddingStore(
        4, [0, 1, 2, 3], ["med", "med", "med", "gen"],
        np.concatenate([dom_vecs, gen_vecs]),
    )
    domain = universe.subset_by_domain("med")
    return universe, domain


def test_cross_client_coverage_self_containment():
    universe, domain = _universe_and_domain()
    cov = cross_client_coverage(domain, [([0, 1], [2, 3])], universe)
    assert cov.value == pytest.approx(1.0, abs=1e-6)
    assert cov.reference_size == 3


def test_cross_client_coverage_against_double_loop():
    universe, domain = _universe_and_domain()
    # only one in-domain record in the client data; out-of-domain id 3 excluded
    cov = cross_client_coverage(domain, [([0], [3])], universe)
    expected = double_loop_coverage(domain.vectors, universe.vectors_for([0]))
    assert cov.value == pytest.approx(expected, abs=1e-12)


def test_cross_client_coverage_empty_intersection_errors():
    universe, domain = _universe_and_domain()
    with pytest.raises(ValidationError, match="empty intersection"):
        cross_client_coverage(domain, [([3], [3])], universe)


def test_cross_client_coverage_monotone_in_covering():
    universe = random_store(50, 6, seed=10, domain="med")
    domain = universe
    small = cross_client_coverage(domain, [([0, 1], [2])], universe)
    bigger = cross_client_coverage(domain, [([0, 1], [2, 5, 9])], universe)
    assert bigger.value >= small.value - 1e-12
