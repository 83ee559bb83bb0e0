"""Instruction augmentation: exact dense retrieval plus baseline samplers.

All retrieval is an exact linear scan over the pool (cosine on unit
vectors), with hits ordered by similarity descending and ties by id
ascending. A similarity threshold, when given, excludes pool records whose
similarity to the query exceeds it *before* the top-k cut, so filtered
records never consume budget; if fewer than k records survive, the shortfall
is reported rather than raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import CandidateCenters
from .errors import ValidationError
from .parallel import parallel_map
from .selection import CenterSelection
from .store import EmbeddingStore


@dataclass
class RetrievalResult:
    """Hits returned for one query center (or one sampled batch)."""

    client_id: int
    query_center: np.ndarray
    hits: list[tuple[int, float]]  # (record id, similarity), sim desc then id asc
    requested: int
    threshold: float | None

    @property
    def shortfall(self) -> int:
        return self.requested - len(self.hits)

    def ids(self) -> list[int]:
        return [h[0] for h in self.hits]

    def sims(self) -> list[float]:
        return [h[1] for h in self.hits]

    def to_json_dict(self) -> dict:
        return {
            "client": self.client_id,
            "ids": self.ids(),
            "sims": self.sims(),
            "shortfall": self.shortfall,
        }


def _sorted_hits(ids: np.ndarray, sims: np.ndarray) -> list[tuple[int, float]]:
    order = np.lexsort((ids, -sims))
    return [(int(ids[i]), float(sims[i])) for i in order]


def retrieve_topk(
    pool: EmbeddingStore,
    query,
    k: int,
    threshold: float | None = None,
    *,
    client_id: int = 0,
) -> RetrievalResult:
    """Exact top-k scan of the pool for one query vector.

    Records with similarity strictly greater than ``threshold`` are excluded
    before ranking. Returns all survivors when fewer than ``k`` remain.
    """
    if len(pool) == 0:
        raise ValidationError("pool is empty")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    q = np.ascontiguousarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != pool.dim:
        raise ValidationError(f"query must be a vector of dimension {pool.dim}")
    sims = pool.matrix64() @ q
    if threshold is not None:
        keep = sims <= threshold
        ids, sims = pool.ids[keep], sims[keep]
    else:
        ids = pool.ids
    hits = _sorted_hits(ids, sims)[:k]
    return RetrievalResult(
        client_id=client_id,
        query_center=np.asarray(query, dtype=np.float32),
        hits=hits,
        requested=k,
        threshold=threshold,
    )


def feddca_augment(
    pool: EmbeddingStore,
    selection: CenterSelection,
    per_client: int,
    threshold: float | None = 0.7,
) -> list[RetrievalResult]:
    """One threshold-filtered top-k retrieval per selected center.

    Results are keyed by each slot's client of origin; duplicate ids across
    clients are kept (redundancy is measured downstream, not removed).
    """
    if per_client < 1:
        raise ValidationError(f"per_client must be >= 1, got {per_client}")
    if not selection.slots:
        raise ValidationError("selection has no slots")

    def one(slot):
        return retrieve_topk(pool, slot.vector, per_client, threshold, client_id=slot.client)

    return parallel_map(one, selection.slots)


def direct_retrieval_augment(
    pool: EmbeddingStore,
    client_centers: list[CandidateCenters],
    per_client: int,
) -> list[RetrievalResult]:
    """Independent per-centroid retrieval, one aggregated result per client.

    Each client's budget is split over its centroids: floor(per_client / k)
    hits per centroid, with the first per_client mod k centroids taking one
    extra. The per-client union is deduplicated by id; a centroid that loses
    a duplicate backfills from its own next-ranked hits, so the result holds
    per_client unique ids whenever the pool permits.
    """
    if per_client < 1:
        raise ValidationError(f"per_client must be >= 1, got {per_client}")
    if len(pool) == 0:
        raise ValidationError("pool is empty")
    mat = pool.matrix64()
    results = []
    for cand in client_centers:
        if cand.dim != pool.dim:
            raise ValidationError(
                f"dimension mismatch: centers {cand.dim} vs pool {pool.dim}"
            )
        xi = cand.k
        base, extra = divmod(per_client, xi)
        quotas = [base + 1 if j < extra else base for j in range(xi)]
        seen: set[int] = set()
        picks: list[tuple[int, float]] = []
        for j in range(xi):
            if quotas[j] == 0:
                continue
            sims = mat @ np.ascontiguousarray(cand.centers[j], dtype=np.float64)
            taken = 0
            for pos in np.lexsort((pool.ids, -sims)):
                rid = int(pool.ids[pos])
                if rid in seen:
                    continue
                seen.add(rid)
                picks.append((rid, float(sims[pos])))
                taken += 1
                if taken == quotas[j]:
                    break
        picks.sort(key=lambda h: (-h[1], h[0]))
        mean = cand.centers.astype(np.float64).mean(axis=0)
        norm = float(np.linalg.norm(mean))
        center = (mean / norm if norm > 0 else mean).astype(np.float32)
        results.append(
            RetrievalResult(
                client_id=cand.client_id,
                query_center=center,
                hits=picks,
                requested=per_client,
                threshold=None,
            )
        )
    return results


def random_sampling_augment(
    pool: EmbeddingStore,
    n_clients: int,
    per_client: int,
    seed: int,
) -> list[RetrievalResult]:
    """Uniform without-replacement sample per client, independent across clients.

    The similarity field is the cosine to the (normalized) pool mean, kept
    for logging only.
    """
    if per_client < 1 or n_clients < 1:
        raise ValidationError("n_clients and per_client must be >= 1")
    if per_client > len(pool):
        raise ValidationError(
            f"per_client={per_client} exceeds pool size {len(pool)}"
        )
    mat = pool.matrix64()
    mean = mat.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    center = mean / norm if norm > 0 else mean
    results = []
    for client in range(n_clients):
        rng = np.random.default_rng([seed, client])
        pos = rng.choice(len(pool), size=per_client, replace=False)
        ids = pool.ids[pos]
        sims = mat[pos] @ center
        results.append(
            RetrievalResult(
                client_id=client,
                query_center=center.astype(np.float32),
                hits=_sorted_hits(ids, sims),
                requested=per_client,
                threshold=None,
            )
        )
    return results


def data_select(
    local_pools: list[EmbeddingStore],
    selection: CenterSelection,
    per_client: int,
) -> list[RetrievalResult]:
    """Rank each client's own pool against that client's selected center.

    Local pools are matched to selection slots by position. No threshold is
    applied (this selects existing data rather than augmenting it).
    """
    if len(local_pools) != len(selection.slots):
        raise ValidationError(
            f"{len(local_pools)} local pools for {len(selection.slots)} selection slots"
        )
    results = []
    for k, (store, slot) in enumerate(zip(local_pools, selection.slots)):
        if len(store) == 0:
            raise ValidationError(f"client {k} has an empty local pool")
        results.append(retrieve_topk(store, slot.vector, per_client, None, client_id=k))
    return results


def augments_to_json(results: list[RetrievalResult]) -> list[dict]:
    return [r.to_json_dict() for r in results]
