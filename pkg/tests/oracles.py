"""Independent oracle implementations used to cross-check the package.

These stay deliberately naive (double loops, full sorts, exhaustive
enumeration) and never import the code paths they verify.
"""

from __future__ import annotations

import itertools
from math import fsum

import numpy as np


def double_loop_coverage(reference, covering, affine: bool = False) -> float:
    """Definition-by-loops coverage: explicit loops over both sets."""
    ref = np.asarray(reference, dtype=np.float64)
    cov = np.asarray(covering, dtype=np.float64)
    per_point = []
    for r in ref:
        best = max(float(np.dot(r, c)) for c in cov)
        per_point.append((best + 1.0) / 2.0 if affine else best)
    return fsum(per_point) / len(per_point)


def double_loop_facility(reference, covering, affine: bool = False) -> float:
    ref = np.asarray(reference, dtype=np.float64)
    cov = np.asarray(covering, dtype=np.float64)
    per_point = []
    for r in ref:
        best = max(float(np.dot(r, c)) for c in cov)
        per_point.append((best + 1.0) / 2.0 if affine else best)
    return fsum(per_point)


def full_sort_retrieval(pool_ids, pool_vectors, query, k: int, threshold=None):
    """Rank every pool record by cosine (desc, ids asc), filter, cut at k."""
    q = np.asarray(query, dtype=np.float64)
    scored = [
        (float(np.dot(np.asarray(v, dtype=np.float64), q)), int(i))
        for i, v in zip(pool_ids, pool_vectors)
    ]
    if threshold is not None:
        scored = [(s, i) for s, i in scored if s <= threshold]
    scored.sort(key=lambda p: (-p[0], p[1]))
    return scored[:k]


def exhaustive_best_subset(vectors, reference, n: int, affine: bool = False):
    """(best coverage, lex-first argmax subset) over all n-subsets."""
    best_val = -np.inf
    best_combo = None
    for combo in itertools.combinations(range(len(vectors)), n):
        val = double_loop_coverage(reference, [vectors[i] for i in combo], affine)
        if val > best_val:
            best_val, best_combo = val, combo
    return best_val, best_combo


def best_two_partition_cost(points) -> float:
    """Exhaustive spherical 2-means cost: min over all 2-colorings of the
    summed in-cluster SSE against each cluster's renormalized mean."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    best = np.inf
    for mask in range(1, 2 ** (n - 1)):  # fix point 0 in cluster 0 (symmetry)
        groups = [[], []]
        for i in range(n):
            groups[(mask >> i) & 1].append(i)
        cost = 0.0
        for g in groups:
            if not g:
                continue
            members = pts[g]
            center = members.mean(axis=0)
            center = center / np.linalg.norm(center)
            cost += float(((members - center) ** 2).sum())
        best = min(best, cost)
    return best
