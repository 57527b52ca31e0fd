"""Environmental condition queries: historical, realtime, and predictive.

"Realtime" is a deterministic seeded scenario (weather day-script,
sinusoidal crowd curve, event table) rather than live sensors, so runs
reproduce exactly; the query interface is unchanged if live feeds are
substituted. Predictive confidence decays as exp(-lambda * dt).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

from daychain.config import EnvironmentConfig
from daychain.protocol import Session, ToolError, ToolService
from daychain.spatial import haversine_m

MODES = ("historical", "realtime", "predictive")
SCALES = ("macro", "micro", "venue")


class UnknownModeError(ValueError):
    pass


class MissingDataError(LookupError):
    pass


@dataclass
class EnvState:
    weather: dict = field(default_factory=dict)  # condition, temperature
    density: float = 0.0  # persons per area unit in the queried zone
    events: list = field(default_factory=list)
    emergencies: list = field(default_factory=list)
    confidence: float = 1.0
    scale_weights: dict = field(default_factory=dict)
    zone: str = "default"

    def to_dict(self) -> dict:
        return {
            "weather": self.weather,
            "density": self.density,
            "events": self.events,
            "emergencies": self.emergencies,
            "confidence": self.confidence,
            "scale_weights": self.scale_weights,
            "zone": self.zone,
        }


DEFAULT_SCENARIO = {
    "weather": [
        {"start_min": 0, "end_min": 660, "condition": "clear", "temperature": 19.0},
        {"start_min": 660, "end_min": 1020, "condition": "cloudy", "temperature": 24.0},
        {"start_min": 1020, "end_min": 1740, "condition": "clear", "temperature": 17.0},
    ],
    "crowd": {"base": 0.35, "amplitude": 0.3, "peak_min": 810, "period_min": 1440},
    "events": [],
    "emergencies": [],
    "zones": [],
    "historical": [],
}


class Scenario:
    """Immutable scenario tables backing the environment service."""

    def __init__(self, doc: Optional[dict] = None):
        doc = {**DEFAULT_SCENARIO, **(doc or {})}
        self.weather_schedule = list(doc["weather"])
        self.crowd = dict(doc["crowd"])
        self.events = list(doc["events"])
        self.emergencies = list(doc["emergencies"])
        self.zones = list(doc["zones"])
        self.historical = list(doc["historical"])

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def zone_of(self, lon: float, lat: float) -> str:
        for zone in self.zones:
            d = haversine_m(lon, lat, zone["lon"], zone["lat"])
            if d <= zone.get("radius_m", 500.0):
                return zone["name"]
        return "default"

    def weather_at(self, t_min: float) -> dict:
        for window in self.weather_schedule:
            if window["start_min"] <= t_min < window["end_min"]:
                return {"condition": window["condition"], "temperature": window["temperature"]}
        last = self.weather_schedule[-1]
        return {"condition": last["condition"], "temperature": last["temperature"]}

    def crowd_at(self, t_min: float) -> float:
        base = self.crowd.get("base", 0.3)
        amp = self.crowd.get("amplitude", 0.3)
        peak = self.crowd.get("peak_min", 810)
        period = self.crowd.get("period_min", 1440)
        return max(0.0, base + amp * math.cos(2.0 * math.pi * (t_min - peak) / period))

    def active_events(self, t_min: float, zone: str) -> list:
        return [
            e
            for e in self.events
            if e["start_min"] <= t_min < e["end_min"] and e.get("zone", "default") in (zone, "all")
        ]

    def active_emergencies(self, t_min: float, zone: str) -> list:
        return [
            e
            for e in self.emergencies
            if e["start_min"] <= t_min < e["end_min"] and e.get("zone", "default") in (zone, "all")
        ]


def aggregate_multiscale(
    raw: dict,
    query_category: Optional[str] = None,
    config: Optional[EnvironmentConfig] = None,
) -> dict:
    """Weight each scale's conditions by relevance and normalize to sum 1."""
    config = config or EnvironmentConfig()
    present = {s: raw[s] for s in SCALES if s in raw and raw[s] is not None}
    if not present:
        raise ValueError("empty multiscale input")
    table = config.scale_relevance.get(query_category or "default") or config.scale_relevance["default"]
    weights = {s: float(table.get(s, 1.0)) for s in present}
    total = sum(weights.values())
    if total <= 0:
        weights = {s: 1.0 for s in present}
        total = float(len(present))
    return {s: w / total for s, w in weights.items()}


class EnvironmentService(ToolService):
    """Protocol tool for environmental perception."""

    name = "environment"

    def __init__(self, scenario: Optional[Scenario] = None, config: Optional[EnvironmentConfig] = None):
        self.scenario = scenario or Scenario()
        self.config = config or EnvironmentConfig()

    # -- core operations ---------------------------------------------------

    def realtime_state(self, t_min: float, lon: float, lat: float) -> EnvState:
        zone = self.scenario.zone_of(lon, lat)
        return EnvState(
            weather=self.scenario.weather_at(t_min),
            density=self.scenario.crowd_at(t_min),
            events=self.scenario.active_events(t_min, zone),
            emergencies=self.scenario.active_emergencies(t_min, zone),
            confidence=1.0,
            zone=zone,
        )

    def historical_state(self, t_min: float, lon: float, lat: float) -> EnvState:
        zone = self.scenario.zone_of(lon, lat)
        for record in self.scenario.historical:
            if record["t_min"] == t_min and record.get("zone", "default") == zone:
                return EnvState(
                    weather=dict(record.get("weather", {})),
                    density=float(record.get("density", 0.0)),
                    events=list(record.get("events", [])),
                    emergencies=list(record.get("emergencies", [])),
                    confidence=1.0,
                    zone=zone,
                )
        raise MissingDataError(f"no historical record at t={t_min} zone={zone}")

    def predict_environment(self, target_min: float, now_min: float, lon: float, lat: float) -> EnvState:
        """Forecast from the scenario tables with exp(-lambda*dt) confidence."""
        if target_min < now_min:
            raise ValueError(f"target time {target_min} is before current time {now_min}")
        dt_hours = (target_min - now_min) / 60.0
        state = self.realtime_state(target_min, lon, lat)
        state.confidence = math.exp(-self.config.confidence_decay_per_hour * dt_hours)
        return state

    def perceive(
        self,
        t_min: float,
        lon: float,
        lat: float,
        mode: str,
        now_min: Optional[float] = None,
        category: Optional[str] = None,
    ) -> EnvState:
        if mode == "historical":
            state = self.historical_state(t_min, lon, lat)
        elif mode == "realtime":
            state = self.realtime_state(t_min, lon, lat)
        elif mode == "predictive":
            state = self.predict_environment(t_min, now_min if now_min is not None else t_min, lon, lat)
        else:
            raise UnknownModeError(f"unknown perception mode: {mode!r}")
        raw = {
            "macro": {"weather": state.weather},
            "micro": {"density": state.density, "events": state.events},
            "venue": {"emergencies": state.emergencies, "zone": state.zone},
        }
        state.scale_weights = aggregate_multiscale(raw, category, self.config)
        return state

    # -- protocol adapter --------------------------------------------------

    def handle(self, payload: dict, session: Session) -> dict:
        op = payload.get("op", "perceive")
        if op == "perceive":
            now = payload.get("now_min", session.context.get("now_min"))
            try:
                state = self.perceive(
                    t_min=float(payload["t_min"]),
                    lon=float(payload["lon"]),
                    lat=float(payload["lat"]),
                    mode=payload.get("mode", "realtime"),
                    now_min=float(now) if now is not None else None,
                    category=payload.get("category"),
                )
            except UnknownModeError as exc:
                raise ToolError("unknown-mode", str(exc)) from exc
            except MissingDataError as exc:
                raise ToolError("missing-data", str(exc)) from exc
            except ValueError as exc:
                raise ToolError("past-target-time", str(exc)) from exc
            return state.to_dict()
        if op == "aggregate":
            try:
                weights = aggregate_multiscale(payload["raw"], payload.get("category"), self.config)
            except ValueError as exc:
                raise ToolError("empty-input", str(exc)) from exc
            return {"scale_weights": weights}
        raise ToolError("unknown-op", f"environment tool has no op {op!r}")
