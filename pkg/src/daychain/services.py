"""Bundled world state (POIs, network, scenario) and tool-service wiring."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from daychain.config import EngineConfig
from daychain.environment import EnvironmentService, Scenario
from daychain.memory import MemoryService
from daychain.protocol import ToolRegistry
from daychain.routing import Edge, RoadNetwork
from daychain.spatial import PoiIndex, PoiRecord, SpatialService
from daychain.temporal import TemporalService


@dataclass
class WorldServices:
    """Read-only world shared by agents; memory stores are per persona."""

    index: PoiIndex
    network: RoadNetwork
    scenario: Scenario
    config: EngineConfig = field(default_factory=EngineConfig)

    def registry(self, memory: Optional[MemoryService] = None) -> ToolRegistry:
        return ToolRegistry(
            [
                TemporalService(default_now=self.config.agent.day_start_min),
                SpatialService(self.index, self.network, self.config.spatial),
                EnvironmentService(self.scenario, self.config.environment),
                memory or MemoryService(self.config.memory),
            ]
        )

    def bbox(self, margin_frac: float = 0.05) -> tuple:
        lons = [p.lon for p in self.index.pois]
        lats = [p.lat for p in self.index.pois]
        lon_min, lon_max = min(lons), max(lons)
        lat_min, lat_max = min(lats), max(lats)
        pad_x = (lon_max - lon_min or 1e-3) * margin_frac
        pad_y = (lat_max - lat_min or 1e-3) * margin_frac
        return (lon_min - pad_x, lat_min - pad_y, lon_max + pad_x, lat_max + pad_y)

    def to_world_doc(self) -> dict:
        return {
            "pois": [p.to_dict() for p in self.index.pois],
            "network": {
                "nodes": {n: list(c) for n, c in self.network.nodes.items()},
                "edges": [
                    {
                        "u": e.u,
                        "v": e.v,
                        "length_m": e.length_m,
                        "modes": sorted(e.modes),
                        "base_load": e.base_load,
                    }
                    for e in self.network.edges
                ],
            },
            "scenario": {
                "weather": self.scenario.weather_schedule,
                "crowd": self.scenario.crowd,
                "events": self.scenario.events,
                "emergencies": self.scenario.emergencies,
                "zones": self.scenario.zones,
                "historical": self.scenario.historical,
            },
        }

    @classmethod
    def from_world_doc(cls, doc: dict, config: Optional[EngineConfig] = None) -> "WorldServices":
        config = config or EngineConfig()
        pois = [PoiRecord.from_dict(d) for d in doc["pois"]]
        net = doc["network"]
        edges = [
            Edge(
                u=e["u"],
                v=e["v"],
                length_m=float(e["length_m"]),
                modes=frozenset(e["modes"]),
                base_load=float(e.get("base_load", 0.5)),
            )
            for e in net["edges"]
        ]
        network = RoadNetwork({n: tuple(c) for n, c in net["nodes"].items()}, edges, config.routing)
        scenario = Scenario(doc.get("scenario"))
        return cls(
            index=PoiIndex(pois, cell_deg=config.spatial.grid_cell_deg),
            network=network,
            scenario=scenario,
            config=config,
        )

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_world_doc(), fh, sort_keys=True)

    @classmethod
    def load(cls, path: str, config: Optional[EngineConfig] = None) -> "WorldServices":
        with open(path, encoding="utf-8") as fh:
            return cls.from_world_doc(json.load(fh), config)
