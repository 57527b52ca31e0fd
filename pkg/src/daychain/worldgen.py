"""Deterministic synthetic worlds for tests, demos, and benchmarks.

Builds a square street grid (all modes on every edge, transit along the
central corridors), scatters POIs across the seven venue categories near
grid nodes, and wires a default environment scenario. Everything derives
from the seed, so two calls with equal arguments produce equal worlds.
"""

from __future__ import annotations

import random
from typing import Optional

from daychain.config import EngineConfig
from daychain.environment import Scenario
from daychain.routing import Edge, RoadNetwork
from daychain.services import WorldServices
from daychain.spatial import PoiIndex, PoiRecord, haversine_m

POI_CATEGORIES = (
    "residence",
    "employment",
    "dining",
    "shopping",
    "sports & leisure",
    "life services",
    "tourism",
)

# Minimum POIs per category so every persona template finds venues.
_CATEGORY_FLOOR = {
    "residence": 8,
    "employment": 6,
    "dining": 8,
    "shopping": 5,
    "sports & leisure": 4,
    "life services": 4,
    "tourism": 3,
}

_OPEN_WINDOWS = {
    "residence": (0, 1440),
    "employment": (360, 1290),
    "dining": (390, 1440),
    "shopping": (540, 1330),
    "sports & leisure": (360, 1400),
    "life services": (480, 1260),
    "tourism": (450, 1230),
}

_NAME_POOL = {
    "residence": ("Riverside Flats", "Maple Court", "Harbor View Homes", "Elm Residences", "Garden Towers"),
    "employment": ("Northgate Offices", "Union Works", "Beacon Plaza", "Arcadia Labs", "Civic Center"),
    "dining": ("Blue Door Bistro", "Noodle Lane", "Corner Cafe", "Ember Grill", "Lotus Kitchen"),
    "shopping": ("Central Market", "Grand Mall", "Daily Goods", "Style House", "Bookery"),
    "sports & leisure": ("City Gym", "Lakeside Park", "Star Cinema", "Court Club", "River Trail"),
    "life services": ("First Bank", "Wellness Clinic", "Post Point", "Quick Laundry", "City Library"),
    "tourism": ("Old Tower", "Art Museum", "Harbor Walk", "Heritage Hall", "Sky Deck"),
}

_TAG_POOL = {
    "residence": ("quiet", "family"),
    "employment": ("office", "business"),
    "dining": ("noodles", "coffee", "grill", "local"),
    "shopping": ("groceries", "fashion", "books"),
    "sports & leisure": ("fitness", "outdoor", "movies"),
    "life services": ("bank", "health", "errands"),
    "tourism": ("sights", "culture", "views"),
}


def make_world(
    seed: int = 0,
    n_pois: int = 50,
    grid_n: int = 6,
    center: tuple = (0.0, 0.0),
    spacing_deg: float = 0.002,
    config: Optional[EngineConfig] = None,
    drop_edges: int = 0,
) -> WorldServices:
    """Build a grid-street world with n_pois venues around the center."""
    config = config or EngineConfig()
    rng = random.Random(seed)
    lon0 = center[0] - spacing_deg * (grid_n - 1) / 2
    lat0 = center[1] - spacing_deg * (grid_n - 1) / 2

    nodes = {}
    for ix in range(grid_n):
        for iy in range(grid_n):
            nodes[f"n{ix}_{iy}"] = (lon0 + ix * spacing_deg, lat0 + iy * spacing_deg)

    mid = grid_n // 2
    edges = []
    for ix in range(grid_n):
        for iy in range(grid_n):
            u = f"n{ix}_{iy}"
            for jx, jy in ((ix + 1, iy), (ix, iy + 1)):
                if jx >= grid_n or jy >= grid_n:
                    continue
                v = f"n{jx}_{jy}"
                modes = {"walk", "cycle", "drive"}
                if (iy == mid and jy == mid) or (ix == mid and jx == mid):
                    modes.add("transit")
                length = haversine_m(*nodes[u], *nodes[v])
                central = 1.0 - (abs(ix - mid) + abs(iy - mid)) / (2.0 * grid_n)
                edges.append(Edge(u=u, v=v, length_m=length, modes=frozenset(modes), base_load=round(0.3 + 0.4 * central, 3)))
    if drop_edges:
        edges = edges[:-drop_edges]
    network = RoadNetwork(nodes, edges, config.routing)

    plan = []
    for category, floor in _CATEGORY_FLOOR.items():
        plan.extend([category] * floor)
    while len(plan) < n_pois:
        plan.append(rng.choice(POI_CATEGORIES))
    plan = plan[:n_pois]

    node_ids = sorted(nodes)
    pois = []
    for i, category in enumerate(plan):
        node = nodes[rng.choice(node_ids)]
        jitter = spacing_deg * 0.3
        lon = node[0] + rng.uniform(-jitter, jitter)
        lat = node[1] + rng.uniform(-jitter, jitter)
        open_min, close_min = _OPEN_WINDOWS[category]
        pois.append(
            PoiRecord(
                id=f"p{i:03d}",
                name=f"{rng.choice(_NAME_POOL[category])} {i}",
                category=category,
                lon=round(lon, 6),
                lat=round(lat, 6),
                open_min=open_min,
                close_min=close_min,
                rating=round(rng.uniform(2.5, 5.0), 1),
                price=rng.randint(1, 3),
                tags=(rng.choice(_TAG_POOL[category]),),
            )
        )

    scenario = Scenario(
        {
            "events": [
                {
                    "name": "evening market",
                    "zone": "default",
                    "start_min": 1020,
                    "end_min": 1260,
                    "multiplier": 1.4,
                }
            ]
        }
    )
    return WorldServices(
        index=PoiIndex(pois, cell_deg=config.spatial.grid_cell_deg),
        network=network,
        scenario=scenario,
        config=config,
    )
