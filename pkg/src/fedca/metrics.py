"""Measured quantities over augmented runs: coverage, ICACS, RUAI, comm cost.

* cross-client domain coverage: the coverage of the in-domain portion of the
  pooled client data (local plus augmented) over a domain reference set;
* ICACS: mean pairwise cosine between different clients' augmented-set
  cluster centers (never intra-client pairs) -- lower means more distinct
  augmentation;
* RUAI: unique / total ids across the pooled augmented sets -- higher means
  less redundancy;
* communication accounting: floats uploaded as candidate centers, record
  references sent back as augmented sets.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from math import fsum

import numpy as np

from .clustering import kmeans
from .errors import ValidationError
from .geometry import CoverageValue, SimilarityMode, coverage
from .store import EmbeddingStore

logger = logging.getLogger(__name__)

ICACS_DEFAULT_CENTERS = 10


@dataclass
class MetricsReport:
    domain_coverage: CoverageValue
    icacs: float | None
    ruai: float
    comm_upload_floats: int
    comm_download_records: int
    convergence_passes: int

    def to_json_dict(self) -> dict:
        return {
            "domain_coverage": self.domain_coverage.value,
            "reference_size": self.domain_coverage.reference_size,
            "icacs": self.icacs,
            "ruai": self.ruai,
            "comm_upload_floats": self.comm_upload_floats,
            "comm_download_records": self.comm_download_records,
            "convergence_passes": self.convergence_passes,
        }


def cross_client_coverage(
    domain_ref: EmbeddingStore,
    client_sets: list[tuple[list[int], list[int]]],
    universe: EmbeddingStore,
    mode: SimilarityMode = SimilarityMode.RAW_COSINE,
) -> CoverageValue:
    """Coverage of the in-domain pooled client data over the reference store.

    ``client_sets`` pairs each client's local ids with its augmented ids;
    every id must resolve in ``universe``. The pooled ids are intersected
    with the reference store's domain labels before scoring; an empty
    intersection (all client data out-of-domain) is an error.
    """
    if len(domain_ref) == 0:
        raise ValidationError("domain reference store is empty")
    domain_labels = set(domain_ref.domain_index)
    pooled: set[int] = set()
    for local_ids, augmented_ids in client_sets:
        pooled.update(int(i) for i in local_ids)
        pooled.update(int(i) for i in augmented_ids)
    in_domain = [i for i in sorted(pooled) if universe.domain_of(i) in domain_labels]
    if not in_domain:
        raise ValidationError(
            "cross-client data has an empty intersection with the reference domain"
        )
    covering = universe.vectors_for(in_domain)
    return coverage(domain_ref.matrix64(), covering, mode)


def icacs(
    per_client_augmented: list[np.ndarray],
    k: int = ICACS_DEFAULT_CENTERS,
    seed: int = 0,
) -> float:
    """Inter-client augmented-centroid similarity.

    Clusters each client's augmented embeddings (k-means) and averages the
    cosine over every cross-client pair of centers. To make the metric
    invariant to client ordering and to permutations within a client, each
    client's vectors are canonicalized (lexicographic row sort) and its
    k-means seed is derived from the run seed plus the canonical content.
    A client with fewer vectors than ``k`` is clustered with k shrunk to its
    size (logged).
    """
    if len(per_client_augmented) < 2:
        raise ValidationError("ICACS requires at least 2 clients")
    centers = []
    for idx, vectors in enumerate(per_client_augmented):
        arr = np.asarray(vectors, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValidationError(f"client {idx} has no augmented vectors")
        k_eff = min(k, arr.shape[0])
        if k_eff < k:
            logger.warning(
                "client %d has %d vectors; shrinking ICACS k from %d to %d",
                idx, arr.shape[0], k, k_eff,
            )
        canon = arr[np.lexsort(arr.T[::-1])]
        digest = hashlib.sha256(canon.tobytes()).digest()
        content_key = int.from_bytes(digest[:8], "little")
        client_seed = int(np.random.SeedSequence([seed, content_key]).generate_state(1)[0])
        centers.append(
            kmeans(canon, k_eff, seed=client_seed, client_id=idx).centers.astype(np.float64)
        )
    sims: list[float] = []
    for a in range(len(centers)):
        for b in range(a + 1, len(centers)):
            sims.extend((centers[a] @ centers[b].T).ravel().tolist())
    return fsum(sims) / len(sims)


def ruai(client_sets: list[list[int]]) -> float:
    """Ratio of unique ids across the pooled per-client augmented id lists."""
    total = sum(len(ids) for ids in client_sets)
    if total == 0:
        raise ValidationError("RUAI is undefined for empty augmented sets")
    unique = set()
    for ids in client_sets:
        unique.update(int(i) for i in ids)
    return len(unique) / total


def comm_cost(n_clients: int, xi: int, dim: int, augsets: list) -> tuple[int, int]:
    """(floats uploaded as centers, record references downloaded).

    Upload is n_clients * xi * dim floats; download counts every hit in every
    augmented set. ``augsets`` entries may be RetrievalResults or plain hit
    lists.
    """
    upload = n_clients * xi * dim
    download = 0
    for entry in augsets:
        hits = entry.hits if hasattr(entry, "hits") else entry
        download += len(hits)
    return upload, download
