"""POI search with weighted semantic scoring and semantic-spatial matching.

The POI index is immutable after load; all queries are read-only. Semantic
scores come from the deterministic hashed n-gram embeddings in
``daychain.textvec`` so rankings are reproducible without a learned model.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from daychain.categories import canonical_category
from daychain.config import SpatialConfig
from daychain.protocol import Session, ToolError, ToolService
from daychain.textvec import cosine, embed_text

EARTH_RADIUS_M = 6_371_000.0


class InvalidCoordinateError(ValueError):
    """Longitude must lie in [-180, 180] and latitude in [-90, 90]."""


class EmptyDatasetError(ValueError):
    """Raised when searching an index with no POIs."""


def _check_coord(lon: float, lat: float) -> None:
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise InvalidCoordinateError(f"invalid lon/lat: ({lon}, {lat})")


def haversine_m(lon1: float, lat1: float, lon2: float, lat2: float) -> float:
    """Great-circle distance in meters on a spherical earth."""
    _check_coord(lon1, lat1)
    _check_coord(lon2, lat2)
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dphi = p2 - p1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class PoiRecord:
    id: str
    name: str
    category: str
    lon: float
    lat: float
    open_min: int = 0
    close_min: int = 1440
    rating: float = 3.0
    price: int = 1
    tags: tuple = ()

    def __post_init__(self):
        _check_coord(self.lon, self.lat)
        object.__setattr__(self, "category", canonical_category(self.category))

    @property
    def descriptor(self) -> str:
        return " ".join([self.name, self.category, *self.tags])

    def is_open(self, start: int, end: int) -> bool:
        return self.open_min <= start and end <= self.close_min

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "category": self.category,
            "lon": self.lon,
            "lat": self.lat,
            "open_min": self.open_min,
            "close_min": self.close_min,
            "rating": self.rating,
            "price": self.price,
            "tags": list(self.tags),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PoiRecord":
        return cls(
            id=str(doc["id"]),
            name=str(doc["name"]),
            category=str(doc["category"]),
            lon=float(doc["lon"]),
            lat=float(doc["lat"]),
            open_min=int(doc.get("open_min", 0)),
            close_min=int(doc.get("close_min", 1440)),
            rating=float(doc.get("rating", 3.0)),
            price=int(doc.get("price", 1)),
            tags=tuple(doc.get("tags", ())),
        )


@dataclass(frozen=True)
class ScoreWeights:
    alpha: float = 0.5  # semantic
    beta: float = 0.3  # preference
    gamma: float = 0.2  # distance decay
    semantic_threshold: float = 0.25

    def validate(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("score weights must be nonnegative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise ValueError("score weights must sum to 1")

    @classmethod
    def from_config(cls, cfg: SpatialConfig) -> "ScoreWeights":
        return cls(cfg.alpha_semantic, cfg.beta_preference, cfg.gamma_distance, cfg.semantic_threshold)


@dataclass
class ScoredPoi:
    poi: PoiRecord
    score: float
    semantic: float
    preference: float
    distance_m: float
    decay: float


class PoiIndex:
    """Uniform grid index over POIs; cells keyed by floored lon/lat bins."""

    def __init__(self, pois: Sequence[PoiRecord], cell_deg: float = 0.005):
        self.pois = list(pois)
        self.cell_deg = cell_deg
        self._grid: dict[tuple[int, int], list[PoiRecord]] = {}
        self._embeddings: dict[str, np.ndarray] = {}
        for poi in self.pois:
            self._grid.setdefault(self._cell(poi.lon, poi.lat), []).append(poi)
            self._embeddings[poi.id] = embed_text(poi.descriptor)
        self.by_id = {poi.id: poi for poi in self.pois}

    def __len__(self) -> int:
        return len(self.pois)

    def _cell(self, lon: float, lat: float) -> tuple[int, int]:
        return (int(math.floor(lon / self.cell_deg)), int(math.floor(lat / self.cell_deg)))

    def embedding(self, poi_id: str) -> np.ndarray:
        return self._embeddings[poi_id]

    def within_radius(self, lon: float, lat: float, radius_m: float) -> list[tuple[PoiRecord, float]]:
        """All (poi, distance) pairs with distance <= radius, id-sorted."""
        _check_coord(lon, lat)
        # Conservative degree padding for the candidate cell window.
        lat_pad = radius_m / 110_574.0 + self.cell_deg
        coslat = max(0.01, math.cos(math.radians(lat)))
        lon_pad = radius_m / (111_320.0 * coslat) + self.cell_deg
        lo_x, _ = self._cell(lon - lon_pad, lat)
        hi_x, _ = self._cell(lon + lon_pad, lat)
        _, lo_y = self._cell(lon, lat - lat_pad)
        _, hi_y = self._cell(lon, lat + lat_pad)
        hits = []
        for ix in range(lo_x, hi_x + 1):
            for iy in range(lo_y, hi_y + 1):
                for poi in self._grid.get((ix, iy), ()):
                    d = haversine_m(lon, lat, poi.lon, poi.lat)
                    if d <= radius_m:
                        hits.append((poi, d))
        hits.sort(key=lambda pd: pd[0].id)
        return hits


def distance_decay(distance_m: float, radius_m: float, fraction: float = 1.0 / 3.0) -> float:
    """exp(-d/d0) with d0 = radius * fraction; degenerate radius scores 1 at d=0."""
    d0 = radius_m * fraction
    if d0 <= 0:
        return 1.0 if distance_m == 0 else 0.0
    return math.exp(-distance_m / d0)


def poi_search(
    index: PoiIndex,
    origin: tuple[float, float],
    query_text: str,
    radius_m: float,
    weights: Optional[ScoreWeights] = None,
    preferences: Optional[dict] = None,
    top_k: int = 10,
    decay_fraction: float = 1.0 / 3.0,
) -> list[ScoredPoi]:
    """Rank POIs within the radius by the weighted semantic/preference/decay score."""
    if len(index) == 0:
        raise EmptyDatasetError("POI index is empty")
    if radius_m < 0:
        raise ValueError("radius must be nonnegative")
    weights = weights or ScoreWeights()
    weights.validate()
    preferences = preferences or {}
    query_vec = embed_text(query_text)
    scored = []
    for poi, dist in index.within_radius(origin[0], origin[1], radius_m):
        semantic = cosine(query_vec, index.embedding(poi.id))
        pref = float(np.clip(preferences.get(poi.category, 0.0), 0.0, 1.0))
        decay = distance_decay(dist, radius_m, decay_fraction)
        score = weights.alpha * semantic + weights.beta * pref + weights.gamma * decay
        scored.append(ScoredPoi(poi, score, semantic, pref, dist, decay))
    scored.sort(key=lambda s: (-s.score, s.poi.id))
    return scored[:top_k]


def semantic_match(
    index: PoiIndex,
    query_text: str,
    origin: tuple[float, float],
    radius_m: float,
    threshold: float = 0.25,
) -> list[tuple[PoiRecord, float]]:
    """Entities within the radius whose descriptor similarity clears the threshold."""
    query_vec = embed_text(query_text)
    matches = []
    for poi, _ in index.within_radius(origin[0], origin[1], radius_m):
        sim = cosine(query_vec, index.embedding(poi.id))
        if sim >= threshold:
            matches.append((poi, sim))
    matches.sort(key=lambda ps: (-ps[1], ps[0].id))
    return matches


def load_pois_csv(path: str) -> list[PoiRecord]:
    """Columns: id,name,category,lon,lat,open_min,close_min,rating,price,tags."""
    pois = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pois.append(
                PoiRecord(
                    id=row["id"],
                    name=row["name"],
                    category=row["category"],
                    lon=float(row["lon"]),
                    lat=float(row["lat"]),
                    open_min=int(row.get("open_min") or 0),
                    close_min=int(row.get("close_min") or 1440),
                    rating=float(row.get("rating") or 3.0),
                    price=int(row.get("price") or 1),
                    tags=tuple(t for t in (row.get("tags") or "").split("|") if t),
                )
            )
    return pois


def load_pois_geojson(path: str) -> list[PoiRecord]:
    """GeoJSON FeatureCollection of Point features with matching properties."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError("expected a GeoJSON FeatureCollection")
    pois = []
    for feature in doc.get("features", []):
        geom = feature.get("geometry", {})
        if geom.get("type") != "Point":
            continue
        lon, lat = geom["coordinates"][:2]
        props = feature.get("properties", {})
        pois.append(
            PoiRecord(
                id=str(props["id"]),
                name=str(props.get("name", props["id"])),
                category=str(props["category"]),
                lon=float(lon),
                lat=float(lat),
                open_min=int(props.get("open_min", 0)),
                close_min=int(props.get("close_min", 1440)),
                rating=float(props.get("rating", 3.0)),
                price=int(props.get("price", 1)),
                tags=tuple(props.get("tags", ())),
            )
        )
    return pois


class SpatialService(ToolService):
    """Protocol tool for POI search, routing, traffic, and semantic matching."""

    name = "spatial"

    def __init__(self, index: PoiIndex, network=None, config: Optional[SpatialConfig] = None):
        self.index = index
        self.network = network  # daychain.routing.RoadNetwork, optional
        self.config = config or SpatialConfig()

    def handle(self, payload: dict, session: Session) -> dict:
        op = payload.get("op")
        if op == "haversine":
            a, b = payload["a"], payload["b"]
            return {"meters": haversine_m(a[0], a[1], b[0], b[1])}
        if op == "poi_search":
            weights = ScoreWeights(
                alpha=float(payload.get("alpha", self.config.alpha_semantic)),
                beta=float(payload.get("beta", self.config.beta_preference)),
                gamma=float(payload.get("gamma", self.config.gamma_distance)),
            )
            try:
                hits = poi_search(
                    self.index,
                    tuple(payload["origin"]),
                    payload.get("query", ""),
                    float(payload["radius_m"]),
                    weights=weights,
                    preferences=payload.get("preferences", {}),
                    top_k=int(payload.get("top_k", self.config.top_k)),
                    decay_fraction=self.config.decay_radius_fraction,
                )
            except EmptyDatasetError as exc:
                raise ToolError("empty-dataset", str(exc)) from exc
            return {
                "results": [
                    {
                        "poi": s.poi.to_dict(),
                        "score": s.score,
                        "semantic": s.semantic,
                        "preference": s.preference,
                        "distance_m": s.distance_m,
                    }
                    for s in hits
                ]
            }
        if op == "semantic_match":
            matches = semantic_match(
                self.index,
                payload.get("query", ""),
                tuple(payload["origin"]),
                float(payload["radius_m"]),
                threshold=float(payload.get("threshold", self.config.semantic_threshold)),
            )
            return {"matches": [{"poi": p.to_dict(), "similarity": sim} for p, sim in matches]}
        if op == "route_plan":
            if self.network is None:
                raise ToolError("no-network", "no road network loaded")
            from daychain.routing import RouteConstraints, route_plan

            try:
                route = route_plan(
                    self.network,
                    tuple(payload["origin"]),
                    tuple(payload["destination"]),
                    payload.get("modes"),
                    RouteConstraints.from_dict(payload.get("constraints", {})),
                )
            except KeyError as exc:
                raise ToolError("unknown-mode", str(exc)) from exc
            except ValueError as exc:
                raise ToolError("unreachable-destination", str(exc)) from exc
            return {"route": route.to_dict()}
        if op == "traffic_predict":
            if self.network is None:
                raise ToolError("no-network", "no road network loaded")
            from daychain.routing import traffic_predict

            states = traffic_predict(
                self.network,
                start_min=int(payload.get("start_min", 0)),
                horizon_min=int(payload["horizon_min"]),
                step_min=int(payload.get("step_min", 15)),
                demand_profile=payload.get("demand_profile"),
                event_windows=payload.get("event_windows"),
                od_pair=tuple(payload["od_pair"]) if payload.get("od_pair") else None,
            )
            return states
        raise ToolError("unknown-op", f"spatial tool has no op {op!r}")
