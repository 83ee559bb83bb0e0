"""Seeded k-means over unit-norm embeddings.

Lloyd iterations with D^2 (k-means++ style) initialization, driven entirely
by one integer seed: identical inputs and seed give bit-identical centers.
Distance is squared Euclidean, which on unit vectors orders the same way as
cosine. Centroid updates take the per-cluster mean and re-normalize it to
unit length; on the sphere that renormalized mean is the in-cluster SSE
minimizer, so inertia is non-increasing across iterations.

Degenerate-case rules:

* empty cluster: its center is re-seeded to the point currently farthest
  from its assigned center (ties to the lowest point index);
* zero-norm mean (antipodal cluster): the previous center is kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_MAX_ITERS = 100
_UNIT_TOLERANCE = 1e-3


@dataclass
class CandidateCenters:
    """Per-client k-means output: centroids plus bookkeeping.

    ``cluster_sizes`` and ``inertia`` are filled by :func:`kmeans`; centers
    loaded back from files carry ``None`` for both.
    """

    client_id: int
    centers: np.ndarray  # (k, dim) float32, unit rows
    cluster_sizes: np.ndarray | None = None
    inertia: float | None = None

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


def _points64(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValidationError("points must be a 2-d vector set")
    if pts.shape[0] == 0:
        raise ValidationError("cannot cluster an empty point set")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOLERANCE):
        raise ValidationError("points must be unit-norm")
    return pts


def _plus_plus_init(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = pts.shape[0]
    chosen = [int(rng.integers(n))]
    # squared Euclidean distance on unit vectors: 2 - 2 * cosine
    d2 = np.maximum(0.0, 2.0 - 2.0 * (pts @ pts[chosen[0]]))
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # all remaining mass is on duplicates of chosen points; take the
            # lowest unchosen index deterministically
            taken = set(chosen)
            nxt = next(i for i in range(n) if i not in taken)
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        np.minimum(d2, np.maximum(0.0, 2.0 - 2.0 * (pts @ pts[nxt])), out=d2)
    return pts[chosen].copy()


def _assign(pts: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # argmax of cosine == argmin of Euclidean for unit rows; argmax breaks
    # ties toward the lowest center index
    return np.argmax(pts @ centers.T, axis=1)


def _repair_empty(pts: np.ndarray, centers: np.ndarray, labels: np.ndarray) -> np.ndarray:
    k = centers.shape[0]
    counts = np.bincount(labels, minlength=k)
    if not np.any(counts == 0):
        return labels
    labels = labels.copy()
    d2 = np.maximum(0.0, 2.0 - 2.0 * np.einsum("ij,ij->i", pts, centers[labels]))
    for j in np.nonzero(counts == 0)[0]:
        far = int(np.argmax(d2))
        centers[j] = pts[far]
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] = 1
        d2[far] = 0.0
    return labels


def _update(pts: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    new = centers.copy()
    for j in range(centers.shape[0]):
        members = pts[labels == j]
        if members.shape[0] == 0:
            continue
        mean = members.mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm > 0.0:
            new[j] = mean / norm
    return new


def kmeans(
    points,
    k: int,
    seed: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    client_id: int = 0,
) -> CandidateCenters:
    """Cluster unit vectors into ``k`` groups, deterministically.

    Raises if ``k`` exceeds the point count (the caller must shrink ``k``)
    or the input is empty. Terminates at an assignment fixpoint or after
    ``max_iters`` update rounds.
    """
    pts = _points64(points)
    n = pts.shape[0]
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of points ({n}); shrink k")

    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(pts, k, rng)
    labels = _assign(pts, centers)
    labels = _repair_empty(pts, centers, labels)
    for _ in range(max_iters):
        centers = _update(pts, labels, centers)
        new_labels = _assign(pts, centers)
        new_labels = _repair_empty(pts, centers, new_labels)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    diff = pts - centers[labels]
    inertia = float(np.sum(diff * diff))
    sizes = np.bincount(labels, minlength=k)
    return CandidateCenters(
        client_id=client_id,
        centers=centers.astype(np.float32),
        cluster_sizes=sizes,
        inertia=inertia,
    )


def assign_labels(points, centers: CandidateCenters | np.ndarray) -> np.ndarray:
    """Label each point by its nearest center (cosine), ties to lowest index."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValidationError("points must be a 2-d vector set")
    cmat = centers.centers if isinstance(centers, CandidateCenters) else centers
    cmat = np.ascontiguousarray(cmat, dtype=np.float64)
    if pts.shape[1] != cmat.shape[1]:
        raise ValidationError(
            f"dimension mismatch: points {pts.shape[1]} vs centers {cmat.shape[1]}"
        )
    return np.argmax(pts @ cmat.T, axis=1)
