"""Agglomerative Ward clustering over a dissimilarity matrix, plus
silhouette-based model selection and the diversity score.

Ward's merge criterion needs centroids, which a raw dissimilarity matrix
does not have, so a classical multidimensional-scaling embedding of the
matrix precedes clustering; silhouette and the diversity index operate on
the original matrix. Ties in the merge choice break toward the lowest
cluster-pair index.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

_TIE_EPS = 1e-9


class InvalidKError(ValueError):
    pass


class SingleClusterError(ValueError):
    pass


def check_dissimilarity(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("dissimilarity matrix must be square")
    if not np.allclose(d, d.T, atol=1e-9):
        raise ValueError("dissimilarity matrix must be symmetric")
    if not np.allclose(np.diag(d), 0.0, atol=1e-9):
        raise ValueError("dissimilarity matrix must have zero diagonal")
    return d


def mds_embed(d: np.ndarray, max_dim: int = 10) -> np.ndarray:
    """Classical (Torgerson) MDS coordinates for a dissimilarity matrix.

    Keeps at most max_dim axes with positive eigenvalues; a matrix with no
    positive spectrum (all points coincident) embeds at the origin.
    """
    d = check_dissimilarity(d)
    n = d.shape[0]
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ (d * d) @ j
    b = 0.5 * (b + b.T)
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    keep = min(max_dim, max(n - 1, 1))
    evals, evecs = evals[:keep], evecs[:, :keep]
    floor = max(evals.max(initial=0.0), 1.0) * 1e-12
    positive = evals > floor
    if not np.any(positive):
        return np.zeros((n, 1))
    return evecs[:, positive] * np.sqrt(evals[positive])


def ward_increment(coords: np.ndarray, members_i: Sequence[int], members_j: Sequence[int]) -> float:
    """sqrt(2 n_i n_j / (n_i + n_j)) times the centroid gap."""
    mu_i = coords[list(members_i)].mean(axis=0)
    mu_j = coords[list(members_j)].mean(axis=0)
    n_i, n_j = len(members_i), len(members_j)
    return math.sqrt(2.0 * n_i * n_j / (n_i + n_j)) * float(np.linalg.norm(mu_i - mu_j))


def ward_cluster(d: np.ndarray, k: int, max_dim: int = 10, coords: Optional[np.ndarray] = None) -> np.ndarray:
    """Agglomerate down to k clusters, merging the minimum Ward increment.

    Returns integer labels 0..k-1, clusters numbered by their smallest
    member index.
    """
    d = check_dissimilarity(d)
    n = d.shape[0]
    if not 2 <= k <= n:
        raise InvalidKError(f"k must lie in [2, {n}], got {k}")
    if coords is None:
        coords = mds_embed(d, max_dim=max_dim)
    clusters: list[list[int]] = [[i] for i in range(n)]
    while len(clusters) > k:
        best_val = math.inf
        best_pair = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                val = ward_increment(coords, clusters[i], clusters[j])
                if val < best_val - _TIE_EPS:
                    best_val = val
                    best_pair = (i, j)
        i, j = best_pair
        clusters[i] = clusters[i] + clusters[j]
        del clusters[j]
    clusters.sort(key=min)
    labels = np.empty(n, dtype=np.int64)
    for label, members in enumerate(clusters):
        for idx in members:
            labels[idx] = label
    return labels


def silhouette(d: np.ndarray, labels: Sequence[int]) -> float:
    """Mean silhouette coefficient on the original dissimilarities.

    Singletons score 0, as does the a = b = 0 degenerate case.
    """
    d = check_dissimilarity(d)
    labels = np.asarray(labels)
    unique = sorted(set(int(l) for l in labels))
    if len(unique) < 2:
        raise SingleClusterError("silhouette needs at least two clusters")
    scores = []
    for idx in range(len(labels)):
        own = labels[idx]
        same = [i for i in range(len(labels)) if labels[i] == own and i != idx]
        if not same:
            scores.append(0.0)
            continue
        a = float(np.mean([d[idx, i] for i in same]))
        b = math.inf
        for other in unique:
            if other == own:
                continue
            members = [i for i in range(len(labels)) if labels[i] == other]
            b = min(b, float(np.mean([d[idx, i] for i in members])))
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    return float(np.mean(scores))


def select_k(d: np.ndarray, k_range: Sequence[int], max_dim: int = 10) -> tuple[int, dict]:
    """k maximizing the mean silhouette over ward_cluster; ties pick smaller k."""
    d = check_dissimilarity(d)
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("k_range is empty")
    n = d.shape[0]
    ks = [k for k in ks if 2 <= k <= n - 1] or ks
    coords = mds_embed(d, max_dim=max_dim)
    best_k, best_s = None, -math.inf
    by_k = {}
    for k in ks:
        labels = ward_cluster(d, k, coords=coords)
        s = silhouette(d, labels)
        by_k[k] = s
        if s > best_s + _TIE_EPS:
            best_k, best_s = k, s
    return best_k, by_k


def diversity_score(d: np.ndarray, labels: Sequence[int]) -> dict:
    """Between/within mean distances, the diversity index, and its 1-10 score.

    DIV = (B - W) / (B + W), defined as 0 when B + W = 0; the score is the
    affine map 5.5 + 4.5 * DIV.
    """
    d = check_dissimilarity(d)
    labels = np.asarray(labels)
    n = len(labels)
    inter, intra = [], []
    for i in range(n):
        for j in range(i + 1, n):
            (intra if labels[i] == labels[j] else inter).append(d[i, j])
    b = float(np.mean(inter)) if inter else 0.0
    w = float(np.mean(intra)) if intra else 0.0
    div = 0.0 if (b + w) == 0 else (b - w) / (b + w)
    return {"between": b, "within": w, "diversity_index": div, "score": 5.5 + 4.5 * div}
