"""Three-tier personal memory with retrieval, integration, and forgetting.

Event items are (time, location, activity, conditions, emotion) tuples
carrying a deterministic feature vector (bucketed one-hot time / zone /
activity plus the scaled emotion scalar). Retrieval scores every item
exhaustively with a four-component relevance mix; integration is a
softmax attention over relevance. Consolidation moves important
short-term items to long-term storage, decays strengths, and forgets
items below threshold. The sleep pass merges near-duplicate events and
rebuilds the summary tier from per-category centroids.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from daychain.categories import ACTIVITY_CATEGORIES
from daychain.config import MemoryConfig
from daychain.protocol import Session, ToolError, ToolService
from daychain.spatial import haversine_m
from daychain.textvec import cosine, embed_text_cached

TIERS = ("event", "pattern", "summary")
STORES = ("short_term", "long_term")

TIME_BUCKETS = 24
ZONE_BUCKETS = 16
_ZONE_CELL_DEG = 0.002
FEATURE_DIM = TIME_BUCKETS + ZONE_BUCKETS + len(ACTIVITY_CATEGORIES) + 1


class InvalidEmotionError(ValueError):
    """Emotion must lie in [-1, 1]."""


class DimensionMismatchError(ValueError):
    pass


def time_bucket(t_min: float) -> int:
    return int(t_min // 60) % TIME_BUCKETS


def zone_bucket(lon: float, lat: float) -> int:
    ix = int(math.floor(lon / _ZONE_CELL_DEG))
    iy = int(math.floor(lat / _ZONE_CELL_DEG))
    return zlib.crc32(f"{ix}:{iy}".encode()) % ZONE_BUCKETS


def activity_slot(activity: str) -> int:
    label = activity.strip().lower()
    if label in ACTIVITY_CATEGORIES:
        return ACTIVITY_CATEGORIES.index(label)
    return zlib.crc32(label.encode()) % len(ACTIVITY_CATEGORIES)


def condition_class(conditions: dict) -> str:
    value = conditions.get("weather", conditions.get("condition", "none"))
    if isinstance(value, dict):
        value = value.get("condition", "none")
    return str(value)


def build_features(t_min: float, lon: float, lat: float, activity: str, emotion: float) -> np.ndarray:
    vec = np.zeros(FEATURE_DIM, dtype=np.float64)
    vec[time_bucket(t_min)] = 1.0
    vec[TIME_BUCKETS + zone_bucket(lon, lat)] = 1.0
    vec[TIME_BUCKETS + ZONE_BUCKETS + activity_slot(activity)] = 1.0
    vec[-1] = emotion
    return vec


@dataclass
class MemoryItem:
    id: str
    tier: str  # event | pattern | summary
    t_min: float
    lon: float
    lat: float
    activity: str
    conditions: dict = field(default_factory=dict)
    emotion: float = 0.0
    features: np.ndarray = None
    strength: float = 1.0
    access_count: int = 1
    last_access: float = 0.0
    store: str = "short_term"
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.features is None:
            self.features = build_features(self.t_min, self.lon, self.lat, self.activity, self.emotion)
        self.features = np.asarray(self.features, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tier": self.tier,
            "t_min": self.t_min,
            "lon": self.lon,
            "lat": self.lat,
            "activity": self.activity,
            "conditions": self.conditions,
            "emotion": self.emotion,
            "features": [float(x) for x in self.features],
            "strength": self.strength,
            "access_count": self.access_count,
            "last_access": self.last_access,
            "store": self.store,
            "stats": self.stats,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MemoryItem":
        return cls(
            id=doc["id"],
            tier=doc["tier"],
            t_min=float(doc["t_min"]),
            lon=float(doc["lon"]),
            lat=float(doc["lat"]),
            activity=doc["activity"],
            conditions=dict(doc.get("conditions", {})),
            emotion=float(doc.get("emotion", 0.0)),
            features=np.asarray(doc["features"], dtype=np.float64),
            strength=float(doc.get("strength", 1.0)),
            access_count=int(doc.get("access_count", 1)),
            last_access=float(doc.get("last_access", 0.0)),
            store=doc.get("store", "short_term"),
            stats=dict(doc.get("stats", {})),
        )


@dataclass
class MemoryContext:
    t_min: float
    lon: float
    lat: float
    activity: str
    features: np.ndarray = None

    def __post_init__(self):
        if self.features is None:
            self.features = build_features(self.t_min, self.lon, self.lat, self.activity, 0.0)
        self.features = np.asarray(self.features, dtype=np.float64)


def relevance(context: MemoryContext, item: MemoryItem, cfg: MemoryConfig, w: Optional[np.ndarray] = None) -> float:
    """Four-component relevance in [-1, 1].

    Weighted cosine over features, periodic-decayed temporal similarity,
    Gaussian spatial kernel, and activity-text cosine, mixed by the alpha
    weights (which sum to 1).
    """
    vc, vm = context.features, item.features
    if vc.shape != vm.shape:
        raise DimensionMismatchError(f"feature dims differ: {vc.shape} vs {vm.shape}")
    nc, nm = float(np.linalg.norm(vc)), float(np.linalg.norm(vm))
    if nc == 0.0 or nm == 0.0:
        rho_cos = 0.0
    else:
        weights = np.ones_like(vc) if w is None else np.asarray(w, dtype=np.float64)
        if weights.shape != vc.shape:
            raise DimensionMismatchError("cosine weight vector has wrong dimension")
        rho_cos = float(np.clip(np.sum(weights * vc * vm) / (nc * nm), -1.0, 1.0))
    dt = context.t_min - item.t_min
    rho_time = math.cos(2.0 * math.pi * dt / cfg.period_min) * math.exp(-cfg.lambda_time_per_min * abs(dt))
    dist = haversine_m(context.lon, context.lat, item.lon, item.lat)
    rho_space = math.exp(-(dist**2) / (2.0 * cfg.spatial_bandwidth_m**2))
    rho_semantic = cosine(embed_text_cached(context.activity), embed_text_cached(item.activity))
    return (
        cfg.alpha_cos * rho_cos
        + cfg.alpha_time * rho_time
        + cfg.alpha_space * rho_space
        + cfg.alpha_semantic * rho_semantic
    )


class MemoryStore:
    """Per-persona memory store: items across tiers plus the pattern table."""

    def __init__(self, persona_id: str = "anon", config: Optional[MemoryConfig] = None):
        self.persona_id = persona_id
        self.config = config or MemoryConfig()
        self.items: list[MemoryItem] = []
        self.pattern_counts: dict = {}  # (t_bucket, zone, c_class) -> {activity: count}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.items)

    def _new_id(self) -> str:
        self._next_id += 1
        return f"{self.persona_id}:m{self._next_id:05d}"

    def short_term(self) -> list[MemoryItem]:
        return [m for m in self.items if m.store == "short_term"]

    def long_term(self) -> list[MemoryItem]:
        return [m for m in self.items if m.store == "long_term"]

    def tier_items(self, tier: str) -> list[MemoryItem]:
        return [m for m in self.items if m.tier == tier]

    # -- recording ----------------------------------------------------------

    def record_event(
        self,
        t_min: float,
        lon: float,
        lat: float,
        activity: str,
        conditions: Optional[dict] = None,
        emotion: float = 0.0,
    ) -> MemoryItem:
        """Append an event to short-term memory and update the pattern table."""
        if not -1.0 <= emotion <= 1.0:
            raise InvalidEmotionError(f"emotion {emotion} outside [-1, 1]")
        conditions = conditions or {}
        item = MemoryItem(
            id=self._new_id(),
            tier="event",
            t_min=t_min,
            lon=lon,
            lat=lat,
            activity=activity,
            conditions=conditions,
            emotion=emotion,
            last_access=t_min,
        )
        self.items.append(item)
        bucket = (time_bucket(t_min), zone_bucket(lon, lat), condition_class(conditions))
        slot = self.pattern_counts.setdefault(bucket, {})
        slot[activity] = slot.get(activity, 0) + 1
        return item

    def pattern_slice(self, t_min: float, lon: float, lat: float, conditions: Optional[dict] = None) -> dict:
        """Normalized P(activity | time bucket, zone, condition class)."""
        bucket = (time_bucket(t_min), zone_bucket(lon, lat), condition_class(conditions or {}))
        slot = self.pattern_counts.get(bucket, {})
        total = sum(slot.values())
        if total == 0:
            return {}
        return {a: c / total for a, c in sorted(slot.items())}

    # -- retrieval and integration ------------------------------------------

    def retrieve(self, context: MemoryContext, k: int) -> list[tuple[MemoryItem, float]]:
        """Exact top-k by relevance over every tier; ties break on item id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        scored = [(item, relevance(context, item, self.config)) for item in self.items]
        scored.sort(key=lambda pair: (-pair[1], pair[0].id))
        for item, _ in scored[:k]:
            item.access_count += 1
            item.last_access = max(item.last_access, context.t_min)
        return scored[:k]

    # -- importance and consolidation ----------------------------------------

    def importance(self, item: MemoryItem, now: float, freq_norm: Optional[float] = None) -> float:
        cfg = self.config
        if freq_norm is None:
            counts = [m.access_count for m in self.short_term()] or [item.access_count]
            freq_norm = item.access_count / max(1, max(counts))
        recency = math.exp(-cfg.decay_per_min * max(0.0, now - item.last_access))
        salience = abs(item.emotion)
        return (
            cfg.importance_frequency_weight * freq_norm
            + cfg.importance_recency_weight * recency
            + cfg.importance_salience_weight * salience
        )

    def consolidate(self, now: float) -> dict:
        """Transfer important short-term items, decay long-term, forget weak.

        The three rules run in order; freshly transferred items decay in the
        same pass.
        """
        cfg = self.config
        short = self.short_term()
        max_count = max([m.access_count for m in short], default=1)
        transferred = 0
        for item in short:
            score = self.importance(item, now, freq_norm=item.access_count / max(1, max_count))
            if score > cfg.transfer_threshold:
                item.store = "long_term"
                transferred += 1
        decayed = 0
        for item in self.long_term():
            item.strength *= math.exp(-cfg.decay_per_min * max(0.0, now - item.t_min))
            decayed += 1
        before = len(self.items)
        self.items = [
            m for m in self.items if not (m.store == "long_term" and m.strength < cfg.forget_threshold)
        ]
        return {"transferred": transferred, "decayed": decayed, "forgotten": before - len(self.items)}

    def sleep_consolidation(self) -> dict:
        """Merge near-duplicate long-term events and rebuild the summary tier."""
        cfg = self.config
        events = [m for m in self.long_term() if m.tier == "event"]
        merged_away: set = set()
        groups: dict = {}
        for item in events:
            key = (
                time_bucket(item.t_min),
                zone_bucket(item.lon, item.lat),
                item.activity,
                condition_class(item.conditions),
            )
            groups.setdefault(key, []).append(item)
        merges = 0
        for members in groups.values():
            kept: list[MemoryItem] = []
            for item in members:
                target = None
                for other in kept:
                    if float(np.max(np.abs(item.features - other.features))) <= cfg.duplicate_feature_eps:
                        target = other
                        break
                if target is None:
                    kept.append(item)
                else:
                    target.strength += item.strength
                    target.access_count += item.access_count
                    target.last_access = max(target.last_access, item.last_access)
                    merged_away.add(item.id)
                    merges += 1
        self.items = [m for m in self.items if m.id not in merged_away]

        self.items = [m for m in self.items if m.tier != "summary"]
        events = [m for m in self.long_term() if m.tier == "event"]
        by_category: dict = {}
        for item in events:
            by_category.setdefault(item.activity, []).append(item)
        summaries = 0
        for activity in sorted(by_category):
            members = by_category[activity]
            centroid = np.mean([m.features for m in members], axis=0)
            self.items.append(
                MemoryItem(
                    id=self._new_id(),
                    tier="summary",
                    t_min=float(np.mean([m.t_min for m in members])),
                    lon=float(np.mean([m.lon for m in members])),
                    lat=float(np.mean([m.lat for m in members])),
                    activity=activity,
                    emotion=float(np.mean([m.emotion for m in members])),
                    features=centroid,
                    strength=float(sum(m.strength for m in members)),
                    store="long_term",
                    stats={
                        "count": len(members),
                        "mean_emotion": float(np.mean([m.emotion for m in members])),
                        "total_strength": float(sum(m.strength for m in members)),
                    },
                )
            )
            summaries += 1
        return {"merged": merges, "summaries": summaries}

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "persona_id": self.persona_id,
            "next_id": self._next_id,
            "items": [m.to_dict() for m in self.items],
            "pattern_counts": [
                {"t_bucket": k[0], "zone": k[1], "condition": k[2], "counts": v}
                for k, v in sorted(self.pattern_counts.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict, config: Optional[MemoryConfig] = None) -> "MemoryStore":
        store = cls(doc.get("persona_id", "anon"), config)
        store._next_id = int(doc.get("next_id", 0))
        store.items = [MemoryItem.from_dict(d) for d in doc.get("items", [])]
        for entry in doc.get("pattern_counts", []):
            key = (int(entry["t_bucket"]), int(entry["zone"]), entry["condition"])
            store.pattern_counts[key] = {a: int(c) for a, c in entry["counts"].items()}
        return store

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path: str, config: Optional[MemoryConfig] = None) -> "MemoryStore":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), config)


def integrate(
    retrieved: Sequence[tuple[MemoryItem, float]],
    temperature: float = 2.0,
    consistency_threshold: float = 0.3,
) -> dict:
    """Softmax-attention synthesis of retrieved memories.

    Returns attention weights (a probability vector), the synthesis vector
    (convex combination of item features), a consistency score, and the ids
    dropped on the resolution path. Consistency is one minus the normalized
    impurity of the attention-weighted activity-label distribution; when it
    falls below the threshold the lowest-attention conflicting item is
    dropped and integration reruns.
    """
    if not retrieved:
        raise ValueError("integrate requires at least one retrieved memory")
    working = list(retrieved)
    dropped: list[str] = []
    max_impurity = 1.0 - 1.0 / len(ACTIVITY_CATEGORIES)
    while True:
        rels = np.array([r for _, r in working], dtype=np.float64)
        logits = temperature * rels
        logits -= logits.max()
        weights = np.exp(logits)
        weights /= weights.sum()
        synthesis = np.zeros_like(working[0][0].features)
        for (item, _), w in zip(working, weights):
            synthesis = synthesis + w * item.features
        label_mass: dict = {}
        for (item, _), w in zip(working, weights):
            label_mass[item.activity] = label_mass.get(item.activity, 0.0) + float(w)
        impurity = 1.0 - sum(p * p for p in label_mass.values())
        consistency = 1.0 - impurity / max_impurity
        if consistency >= consistency_threshold or len(working) == 1:
            return {
                "attention": [float(w) for w in weights],
                "items": [item for item, _ in working],
                "synthesis": synthesis,
                "consistency": float(consistency),
                "dropped": dropped,
            }
        majority = max(sorted(label_mass), key=lambda a: label_mass[a])
        conflict_idx = [i for i, (item, _) in enumerate(working) if item.activity != majority]
        victim = min(conflict_idx, key=lambda i: (weights[i], working[i][0].id))
        dropped.append(working[victim][0].id)
        working.pop(victim)


class MemoryService(ToolService):
    """Protocol tool for per-persona memory stores."""

    name = "memory"

    def __init__(self, config: Optional[MemoryConfig] = None):
        self.config = config or MemoryConfig()
        self._stores: dict[str, MemoryStore] = {}

    def store_for(self, persona_id: str) -> MemoryStore:
        if persona_id not in self._stores:
            self._stores[persona_id] = MemoryStore(persona_id, self.config)
        return self._stores[persona_id]

    def attach(self, store: MemoryStore) -> None:
        self._stores[store.persona_id] = store

    def handle(self, payload: dict, session: Session) -> dict:
        persona_id = payload.get("persona_id") or session.context.get("persona_id") or session.session_id
        store = self.store_for(persona_id)
        op = payload.get("op")
        if op == "record":
            try:
                item = store.record_event(
                    t_min=float(payload["t_min"]),
                    lon=float(payload["lon"]),
                    lat=float(payload["lat"]),
                    activity=payload["activity"],
                    conditions=payload.get("conditions", {}),
                    emotion=float(payload.get("emotion", 0.0)),
                )
            except InvalidEmotionError as exc:
                raise ToolError("invalid-emotion", str(exc)) from exc
            return {"id": item.id, "short_term_size": len(store.short_term())}
        if op == "retrieve":
            context = MemoryContext(
                t_min=float(payload["t_min"]),
                lon=float(payload["lon"]),
                lat=float(payload["lat"]),
                activity=payload.get("activity", ""),
            )
            hits = store.retrieve(context, int(payload.get("k", 5))) if len(store) else []
            return {
                "results": [
                    {
                        "id": item.id,
                        "activity": item.activity,
                        "emotion": item.emotion,
                        "relevance": rel,
                        "poi_id": item.conditions.get("poi"),
                        "tier": item.tier,
                    }
                    for item, rel in hits
                ]
            }
        if op == "consolidate":
            return store.consolidate(float(payload["now_min"]))
        if op == "sleep":
            return store.sleep_consolidation()
        if op == "pattern":
            return {
                "distribution": store.pattern_slice(
                    float(payload["t_min"]), float(payload["lon"]), float(payload["lat"]), payload.get("conditions")
                )
            }
        if op == "stats":
            return {
                "total": len(store),
                "short_term": len(store.short_term()),
                "long_term": len(store.long_term()),
                "summaries": len(store.tier_items("summary")),
            }
        raise ToolError("unknown-op", f"memory tool has no op {op!r}")
