"""Independent brute-force oracles the production code is checked against.

Each oracle is written from the operation's definition with its own
bookkeeping, deliberately avoiding the production code paths.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


# -- scheduling -------------------------------------------------------------


def probe_positions(events, duration, start_bound, end_bound):
    """All feasible probe starts the slot walk can visit, enumerated directly.

    The walk advances by 30 on clear probes and jumps to the first blocking
    interval's end on conflicts; this recomputes that probe set with plain
    interval arithmetic over (start, end) tuples.
    """
    intervals = sorted(events)
    feasible = []
    current = start_bound
    while current + duration <= end_bound:
        end = current + duration
        blocker = None
        for s, e in intervals:
            if current < e and end > s:
                blocker = (s, e)
                break
        if blocker is None:
            feasible.append(current)
            current += 30
        else:
            current = blocker[1]
    return feasible


def best_slot_oracle(events, task, start_bound, end_bound, time_pref, now):
    """Exhaustively score every feasible probe and keep the earliest max."""
    duration = int(math.ceil(round(task["estimate"] * 1.2, 9)))
    best = None
    for start in probe_positions(events, duration, start_bound, end_bound):
        urgency = max(0.0, 1.0 - (task["deadline"] - start) / (task["deadline"] - now))
        score = task["priority"] + time_pref(start) + urgency
        if best is None or score > best[1] + 1e-12:
            best = (start, score)
    return None if best is None else {"start": best[0], "end": best[0] + duration, "score": best[1]}


def schedule_oracle(events, tasks, start_bound, end_bound, time_pref, now):
    """Re-run the whole greedy schedule with independent bookkeeping."""
    intervals = [(e["start"], e["start"] + e["duration"]) for e in events]
    order = sorted(range(len(tasks)), key=lambda i: -(tasks[i]["priority"] / (tasks[i]["deadline"] - now)))
    placements = []
    for idx in order:
        task = tasks[idx]
        slot = best_slot_oracle(intervals, task, start_bound, end_bound, time_pref, now)
        if slot is None:
            continue
        intervals.append((slot["start"], slot["end"]))
        intervals.sort()
        placements.append({"task_index": idx, **slot})
    busy = sum(e - s for s, e in intervals)
    return placements, busy / (end_bound - start_bound), len(tasks) - len(placements)


def conflicts_oracle(entries, cand_start, cand_end, horizon=2000):
    """Minute-by-minute occupancy comparison over a bounded horizon."""
    hits = []
    for s, e, kind in entries:
        minutes = set(range(s, e)) & set(range(cand_start, cand_end))
        if minutes:
            hits.append((s, e, kind))
    return hits


# -- metrics ----------------------------------------------------------------


def js_oracle(p, q):
    m = [(a + b) / 2.0 for a, b in zip(p, q)]
    total = 0.0
    for dist in (p, q):
        for a, mm in zip(dist, m):
            if a > 0:
                total += 0.5 * a * math.log(a / mm)
    return total


def ks_oracle(xs, ys):
    best = 0.0
    for point in list(xs) + list(ys):
        fx = sum(1 for v in xs if v <= point) / len(xs)
        fy = sum(1 for v in ys if v <= point) / len(ys)
        best = max(best, abs(fx - fy))
    return best


def dtw_oracle(a, b):
    """Memoized recursion straight from the recurrence."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0 and j == 0:
            return 0.0
        if i == 0 or j == 0:
            return math.inf
        cost = 0.0 if a[i - 1] == b[j - 1] else 1.0
        return cost + min(rec(i - 1, j), rec(i, j - 1), rec(i - 1, j - 1))

    return rec(len(a), len(b))


def silhouette_oracle(d, labels):
    n = len(labels)
    values = []
    for i in range(n):
        mine = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not mine:
            values.append(0.0)
            continue
        a = sum(d[i][j] for j in mine) / len(mine)
        b = math.inf
        for other in set(labels):
            if other == labels[i]:
                continue
            members = [j for j in range(n) if labels[j] == other]
            b = min(b, sum(d[i][j] for j in members) / len(members))
        values.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return sum(values) / n


def ward_oracle(coords, k):
    """Independent agglomeration: sets of frozensets, centroids from scratch."""
    clusters = [frozenset([i]) for i in range(len(coords))]

    def increment(ca, cb):
        mu_a = np.array([coords[i] for i in sorted(ca)]).mean(axis=0)
        mu_b = np.array([coords[i] for i in sorted(cb)]).mean(axis=0)
        return math.sqrt(2 * len(ca) * len(cb) / (len(ca) + len(cb))) * float(np.linalg.norm(mu_a - mu_b))

    while len(clusters) > k:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                val = increment(clusters[i], clusters[j])
                if best is None or val < best[0] - 1e-9:
                    best = (val, i, j)
        _, i, j = best
        merged = clusters[i] | clusters[j]
        clusters = [c for idx, c in enumerate(clusters) if idx not in (i, j)] + [merged]
        clusters.sort(key=min)
    labels = [0] * len(coords)
    for label, members in enumerate(sorted(clusters, key=min)):
        for idx in members:
            labels[idx] = label
    return labels


# -- memory -----------------------------------------------------------------


def topk_oracle(scores, k):
    """scores: list of (item_id, value). Full stable sort, then cut."""
    ranked = sorted(scores, key=lambda pair: (-pair[1], pair[0]))
    return [item_id for item_id, _ in ranked[:k]]


def consolidate_oracle(items, now, cfg):
    """items: list of dicts with store/access_count/last_access/t_min/emotion/strength.

    Returns (surviving ids, store map) after transfer -> decay -> forget.
    """
    short = [it for it in items if it["store"] == "short_term"]
    max_count = max([it["access_count"] for it in short], default=1)
    stores = {it["id"]: it["store"] for it in items}
    for it in short:
        freq = it["access_count"] / max(1, max_count)
        recency = math.exp(-cfg.decay_per_min * max(0.0, now - it["last_access"]))
        importance = (
            cfg.importance_frequency_weight * freq
            + cfg.importance_recency_weight * recency
            + cfg.importance_salience_weight * abs(it["emotion"])
        )
        if importance > cfg.transfer_threshold:
            stores[it["id"]] = "long_term"
    strengths = {}
    for it in items:
        s = it["strength"]
        if stores[it["id"]] == "long_term":
            s = s * math.exp(-cfg.decay_per_min * max(0.0, now - it["t_min"]))
        strengths[it["id"]] = s
    survivors = [
        it["id"]
        for it in items
        if not (stores[it["id"]] == "long_term" and strengths[it["id"]] < cfg.forget_threshold)
    ]
    return survivors, stores, strengths
