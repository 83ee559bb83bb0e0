"""Synthetic instance generators for self-checks, demos, and desk-scale runs."""

from __future__ import annotations

import numpy as np

from .clustering import CandidateCenters
from .geometry import SimilarityMode
from .selection import SelectionProblem
from .store import EmbeddingStore


def random_unit_vectors(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """(n, dim) float32 matrix of unit rows drawn from a Gaussian."""
    raw = rng.standard_normal((n, dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    while np.any(norms == 0):
        bad = norms[:, 0] == 0
        raw[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
    return (raw / norms).astype(np.float32)


def random_store(
    n: int,
    dim: int,
    seed: int,
    domain: str = "synth",
    id_start: int = 0,
) -> EmbeddingStore:
    rng = np.random.default_rng(seed)
    vectors = random_unit_vectors(n, dim, rng)
    ids = list(range(id_start, id_start + n))
    return EmbeddingStore(dim, ids, [domain] * n, vectors)


def random_selection_problem(
    n_clients: int,
    xi: int,
    dim: int,
    seed: int,
    mode: SimilarityMode = SimilarityMode.RAW_COSINE,
) -> SelectionProblem:
    """Random candidates per client, scored against the pooled candidates."""
    rng = np.random.default_rng(seed)
    candidates = [
        CandidateCenters(client_id=k, centers=random_unit_vectors(xi, dim, rng))
        for k in range(n_clients)
    ]
    return SelectionProblem(candidates_per_client=candidates, mode=mode)


def planted_cluster_pool(
    n_clusters: int,
    per_cluster: int,
    out_records: int,
    dim: int,
    seed: int,
    noise: float = 0.24,
    direction_correlation: float = 0.0,
    domain_label: str = "dom",
    out_label: str = "gen",
) -> tuple[EmbeddingStore, np.ndarray]:
    """A public pool with planted in-domain clusters plus out-of-domain scatter.

    In-domain records sit around ``n_clusters`` unit directions with
    per-coordinate Gaussian noise ``noise`` (renormalized); out-of-domain
    records are uniform random unit vectors. ``direction_correlation`` in
    [0, 1) sets the expected pairwise cosine between cluster directions: 0
    gives independent directions, larger values pull the clusters into one
    overlapping domain blob. Returns the pool and the (n_clusters, dim)
    direction matrix. Ids are contiguous from 0: in-domain first
    (cluster-major), then out-of-domain.
    """
    rng = np.random.default_rng(seed)
    if not 0.0 <= direction_correlation < 1.0:
        raise ValueError("direction_correlation must be in [0, 1)")
    base = random_unit_vectors(1, dim, rng)[0].astype(np.float64)
    spread = random_unit_vectors(n_clusters, dim, rng).astype(np.float64)
    directions = (
        np.sqrt(direction_correlation) * base
        + np.sqrt(1.0 - direction_correlation) * spread
    )
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    rows = []
    for c in range(n_clusters):
        raw = directions[c] + noise * rng.standard_normal((per_cluster, dim))
        rows.append(raw / np.linalg.norm(raw, axis=1, keepdims=True))
    in_domain = np.concatenate(rows).astype(np.float32)
    out = random_unit_vectors(out_records, dim, rng)
    vectors = np.concatenate([in_domain, out])
    n_total = len(vectors)
    domains = [domain_label] * len(in_domain) + [out_label] * out_records
    return (
        EmbeddingStore(dim, list(range(n_total)), domains, vectors),
        directions.astype(np.float32),
    )
