"""Distribution and sequence metrics for corpus scoring.

Jensen-Shannon divergence uses natural logarithms (so its ceiling is
ln 2), the KS statistic compares empirical CDFs at every pooled sample
point, and DTW runs the classic cumulative-distance recurrence with a
binary local cost by default. Objective quality blends the two families
onto a 0-10 scale.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

LN2 = math.log(2.0)


class SupportMismatchError(ValueError):
    pass


class NotNormalizedError(ValueError):
    pass


def js_divergence(p: Sequence[float], q: Sequence[float]) -> float:
    """0.5*KL(P||M) + 0.5*KL(Q||M) with M the midpoint, natural log.

    Zero-probability terms contribute nothing; M >= P/2 rules out division
    blowups. Result lies in [0, ln 2].
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise SupportMismatchError(f"supports differ: {p.shape} vs {q.shape}")
    if np.any(p < -1e-12) or np.any(q < -1e-12):
        raise NotNormalizedError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-6 or abs(q.sum() - 1.0) > 1e-6:
        raise NotNormalizedError("distributions must sum to 1")
    m = 0.5 * (p + q)

    def kl(a: np.ndarray) -> float:
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))

    return max(0.0, 0.5 * kl(p) + 0.5 * kl(q))


def ks_statistic(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Supremum gap between the two empirical CDFs at pooled sample points."""
    if len(xs) == 0 or len(ys) == 0:
        raise ValueError("both samples must be nonempty")
    xs_sorted = np.sort(np.asarray(xs, dtype=np.float64))
    ys_sorted = np.sort(np.asarray(ys, dtype=np.float64))
    pooled = np.concatenate([xs_sorted, ys_sorted])
    f_x = np.searchsorted(xs_sorted, pooled, side="right") / len(xs_sorted)
    f_y = np.searchsorted(ys_sorted, pooled, side="right") / len(ys_sorted)
    return float(np.max(np.abs(f_x - f_y)))


def objective_quality(js_spatial: float, ks_temporal: float, scaled: bool = True) -> float:
    """0.5*(1 - JS/ln2) + 0.5*(1 - KS); x10 when reporting on the 0-10 axis."""
    if not 0.0 <= js_spatial <= LN2 + 1e-9:
        raise ValueError(f"JS must lie in [0, ln2], got {js_spatial}")
    if not 0.0 <= ks_temporal <= 1.0 + 1e-12:
        raise ValueError(f"KS must lie in [0, 1], got {ks_temporal}")
    raw = 0.5 * (1.0 - js_spatial / LN2) + 0.5 * (1.0 - ks_temporal)
    return 10.0 * raw if scaled else raw


def total_quality(q_subjective: float, q_objective: float, alpha: float = 0.5) -> float:
    """alpha-weighted mix of subjective and objective quality (0-10 scale)."""
    for name, value in (("q_subjective", q_subjective), ("q_objective", q_objective)):
        if not 0.0 <= value <= 10.0 + 1e-9:
            raise ValueError(f"{name} must lie in [0, 10], got {value}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * q_subjective + (1.0 - alpha) * q_objective


def binary_cost(a, b) -> float:
    return 0.0 if a == b else 1.0


def dtw_distance(a: Sequence, b: Sequence, cost: Optional[Callable] = None) -> float:
    """Dynamic time warping distance via the cumulative-distance recurrence.

    Each cell adds the local cost to the best of the insertion, deletion,
    and match predecessors. The default local cost is binary, treating all
    inter-category distances as equivalent; pass ``cost`` to plug in a
    graded table.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("sequences must be nonempty")
    cost = cost or binary_cost
    inf = math.inf
    previous = [inf] * (len(b) + 1)
    previous[0] = 0.0
    current = [inf] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current[0] = inf
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            c = cost(ai, b[j - 1])
            best = previous[j]
            if previous[j - 1] < best:
                best = previous[j - 1]
            if current[j - 1] < best:
                best = current[j - 1]
            current[j] = c + best
        previous, current = current, previous
    return previous[len(b)]


def pairwise_dtw(sequences: Sequence[Sequence], cost: Optional[Callable] = None) -> np.ndarray:
    """Symmetric zero-diagonal dissimilarity matrix over unordered pairs."""
    n = len(sequences)
    if n < 2:
        raise ValueError("need at least two sequences")
    d = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = dtw_distance(sequences[i], sequences[j], cost)
    return d


def scott_bandwidth(values: np.ndarray, weights: np.ndarray) -> float:
    """Scott's rule per dimension with effective sample size for weights."""
    total = weights.sum()
    n_eff = total * total / float(np.sum(weights * weights))
    mean = float(np.sum(weights * values) / total)
    var = float(np.sum(weights * (values - mean) ** 2) / total)
    std = math.sqrt(max(var, 0.0))
    return max(std * n_eff ** (-1.0 / 6.0), 1e-9)


def spatial_density(
    points: Sequence[tuple],
    bbox: tuple,
    grid: int = 100,
    weights: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Gaussian-kernel density on a grid over the bounding box, mass 1.

    bbox = (lon_min, lat_min, lon_max, lat_max). Bandwidth follows Scott's
    rule per dimension, floored at one cell so degenerate point sets stay
    finite; the grid is renormalized afterwards.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("no points to estimate a density from")
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be nonnegative with positive total")
    lon_min, lat_min, lon_max, lat_max = bbox
    xs = np.linspace(lon_min, lon_max, grid)
    ys = np.linspace(lat_min, lat_max, grid)
    cell_x = (lon_max - lon_min) / max(grid - 1, 1)
    cell_y = (lat_max - lat_min) / max(grid - 1, 1)
    hx = max(scott_bandwidth(pts[:, 0], w), cell_x if cell_x > 0 else 1e-9)
    hy = max(scott_bandwidth(pts[:, 1], w), cell_y if cell_y > 0 else 1e-9)
    gx = (xs[None, :] - pts[:, 0:1]) / hx  # (n, grid)
    gy = (ys[None, :] - pts[:, 1:2]) / hy
    kx = np.exp(-0.5 * gx * gx)
    ky = np.exp(-0.5 * gy * gy)
    density = (w[:, None, None] * ky[:, :, None] * kx[:, None, :]).sum(axis=0)
    total = density.sum()
    if total <= 0:
        raise ValueError("degenerate density (all mass outside the box?)")
    return density / total
