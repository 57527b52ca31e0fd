"""Multimodal route planning and coarse traffic prediction.

The road network is an undirected edge list with per-edge mode sets.
Transfers between modes happen at nodes served by two or more modes,
modeled as zero-length inter-mode hops with a small time penalty. Route
costs blend time, distance, and money under caller weights; planning runs
one shortest-path candidate per mode plus a hybrid candidate over the
mode-layered graph and returns the cheapest.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from daychain.config import RoutingConfig, TrafficConfig
from daychain.spatial import haversine_m

MODES = ("walk", "transit", "drive", "cycle")


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    length_m: float
    modes: frozenset
    base_load: float = 0.5

    def key(self) -> tuple[str, str]:
        return (self.u, self.v) if self.u <= self.v else (self.v, self.u)


@dataclass
class RouteLeg:
    mode: str
    waypoints: list
    distance_m: float
    duration_min: float


@dataclass
class Route:
    legs: list
    distance_m: float
    duration_min: float
    money: float
    cost: float

    @property
    def modes(self) -> list:
        seen = []
        for leg in self.legs:
            if leg.mode not in seen:
                seen.append(leg.mode)
        return seen

    def dominant_mode(self) -> str:
        if not self.legs:
            return "walk"
        best = max(self.legs, key=lambda l: (l.duration_min, l.mode))
        return best.mode

    def to_dict(self) -> dict:
        return {
            "distance_m": self.distance_m,
            "duration_min": self.duration_min,
            "money": self.money,
            "cost": self.cost,
            "modes": self.modes,
            "legs": [
                {
                    "mode": l.mode,
                    "waypoints": [list(w) for w in l.waypoints],
                    "distance_m": l.distance_m,
                    "duration_min": l.duration_min,
                }
                for l in self.legs
            ],
        }


@dataclass
class RouteConstraints:
    weight_time: float = 1.0
    weight_distance: float = 0.0
    weight_money: float = 0.5
    mode_time_multiplier: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "RouteConstraints":
        return cls(
            weight_time=float(doc.get("weight_time", 1.0)),
            weight_distance=float(doc.get("weight_distance", 0.0)),
            weight_money=float(doc.get("weight_money", 0.5)),
            mode_time_multiplier=dict(doc.get("mode_time_multiplier", {})),
        )


class RoadNetwork:
    """Immutable multimodal graph with coordinates on every node."""

    def __init__(self, nodes: dict, edges: Sequence[Edge], config: Optional[RoutingConfig] = None):
        self.nodes = dict(nodes)  # id -> (lon, lat)
        self.edges = list(edges)
        self.config = config or RoutingConfig()
        self.adjacency: dict = {mode: {} for mode in MODES}
        self.node_modes: dict = {n: set() for n in self.nodes}
        for edge in self.edges:
            for mode in edge.modes:
                self.adjacency[mode].setdefault(edge.u, []).append((edge.v, edge))
                self.adjacency[mode].setdefault(edge.v, []).append((edge.u, edge))
            for n in (edge.u, edge.v):
                self.node_modes.setdefault(n, set()).update(edge.modes)
        self.transfer_nodes = {n for n, ms in self.node_modes.items() if len(ms) >= 2}
        for mode in self.adjacency:
            for n in self.adjacency[mode]:
                self.adjacency[mode][n].sort(key=lambda ve: (ve[0], ve[1].length_m))

    def nearest_node(self, lon: float, lat: float) -> tuple[str, float]:
        best, best_d = None, math.inf
        for node_id in sorted(self.nodes):
            nlon, nlat = self.nodes[node_id]
            d = haversine_m(lon, lat, nlon, nlat)
            if d < best_d:
                best, best_d = node_id, d
        if best is None:
            raise ValueError("network has no nodes")
        return best, best_d

    def mode_speed(self, mode: str) -> float:
        if mode not in self.config.mode_speed_m_per_min:
            raise KeyError(f"unknown mode: {mode!r}")
        return self.config.mode_speed_m_per_min[mode]


def load_network_csv(path: str, config: Optional[RoutingConfig] = None) -> RoadNetwork:
    """Edge list columns: u,v,length_m,modes,u_lon,u_lat,v_lon,v_lat[,base_load]."""
    nodes: dict = {}
    edges: list[Edge] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            u, v = row["u"], row["v"]
            nodes[u] = (float(row["u_lon"]), float(row["u_lat"]))
            nodes[v] = (float(row["v_lon"]), float(row["v_lat"]))
            edges.append(
                Edge(
                    u=u,
                    v=v,
                    length_m=float(row["length_m"]),
                    modes=frozenset(m for m in row["modes"].split("|") if m),
                    base_load=float(row.get("base_load") or 0.5),
                )
            )
    return RoadNetwork(nodes, edges, config)


def _dijkstra(
    start: str,
    adjacency: dict,
    edge_minutes: Callable[[Edge], float],
) -> tuple[dict, dict]:
    """Plain single-mode shortest path by travel time; deterministic tie-break."""
    dist = {start: 0.0}
    prev: dict = {}
    heap = [(0.0, start)]
    seen = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in seen:
            continue
        seen.add(node)
        for neighbor, edge in adjacency.get(node, ()):
            nd = d + edge_minutes(edge)
            if nd < dist.get(neighbor, math.inf) - 1e-12:
                dist[neighbor] = nd
                prev[neighbor] = (node, edge)
                heapq.heappush(heap, (nd, neighbor))
    return dist, prev


def _reconstruct(prev: dict, start: str, goal: str) -> list:
    path = [goal]
    while path[-1] != start:
        node, _ = prev[path[-1]]
        path.append(node)
    path.reverse()
    return path


def _leg_money(mode: str, distance_m: float, config: RoutingConfig) -> float:
    return config.mode_cost_per_km.get(mode, 0.0) * distance_m / 1000.0


def _finish_route(
    legs: list,
    config: RoutingConfig,
    constraints: RouteConstraints,
    transit_boardings: int,
    transfer_count: int,
) -> Route:
    distance = sum(l.distance_m for l in legs)
    duration = sum(l.duration_min for l in legs) + transfer_count * config.transfer_penalty_min
    money = sum(_leg_money(l.mode, l.distance_m, config) for l in legs)
    money += transit_boardings * config.transit_flat_fare
    cost = (
        constraints.weight_time * duration
        + constraints.weight_distance * distance / 1000.0
        + constraints.weight_money * money
    )
    return Route(legs=legs, distance_m=distance, duration_min=duration, money=money, cost=cost)


def _access_leg(point, node_point, network: RoadNetwork, constraints: RouteConstraints) -> Optional[RouteLeg]:
    d = haversine_m(point[0], point[1], node_point[0], node_point[1])
    if d == 0:
        return None
    mult = constraints.mode_time_multiplier.get("walk", 1.0)
    return RouteLeg(
        mode="walk",
        waypoints=[tuple(point), tuple(node_point)],
        distance_m=d,
        duration_min=mult * d / network.mode_speed("walk"),
    )


def _single_mode_route(
    network: RoadNetwork,
    mode: str,
    origin,
    destination,
    o_node: str,
    d_node: str,
    constraints: RouteConstraints,
) -> Optional[Route]:
    speed = network.mode_speed(mode)
    mult = constraints.mode_time_multiplier.get(mode, 1.0)
    dist, prev = _dijkstra(o_node, network.adjacency[mode], lambda e: mult * e.length_m / speed)
    if d_node not in dist:
        return None
    legs = []
    access = _access_leg(origin, network.nodes[o_node], network, constraints)
    if access:
        legs.append(access)
    if o_node != d_node:
        path = _reconstruct(prev, o_node, d_node)
        length = 0.0
        waypoints = [network.nodes[path[0]]]
        for a, b in zip(path, path[1:]):
            edge = next(e for n, e in network.adjacency[mode][a] if n == b)
            length += edge.length_m
            waypoints.append(network.nodes[b])
        legs.append(
            RouteLeg(mode=mode, waypoints=waypoints, distance_m=length, duration_min=mult * length / speed)
        )
    egress = _access_leg(destination, network.nodes[d_node], network, constraints)
    if egress:
        legs.append(RouteLeg("walk", list(reversed(egress.waypoints)), egress.distance_m, egress.duration_min))
    boardings = 1 if (mode == "transit" and o_node != d_node) else 0
    return _finish_route(legs, network.config, constraints, boardings, 0)


def _hybrid_route(
    network: RoadNetwork,
    modes: Sequence[str],
    origin,
    destination,
    o_node: str,
    d_node: str,
    constraints: RouteConstraints,
) -> Optional[Route]:
    """Cost-minimal route over the mode-layered graph with transfer hops."""
    cfg = network.config
    w_t, w_d, w_m = constraints.weight_time, constraints.weight_distance, constraints.weight_money

    def edge_cost(edge: Edge, mode: str) -> float:
        mult = constraints.mode_time_multiplier.get(mode, 1.0)
        minutes = mult * edge.length_m / network.mode_speed(mode)
        return w_t * minutes + w_d * edge.length_m / 1000.0 + w_m * _leg_money(mode, edge.length_m, cfg)

    start_states = []
    for mode in modes:
        c0 = w_m * cfg.transit_flat_fare if mode == "transit" else 0.0
        start_states.append(((o_node, mode), c0))
    dist: dict = {}
    prev: dict = {}
    heap = []
    for state, c0 in start_states:
        dist[state] = c0
        heapq.heappush(heap, (c0, state))
    seen = set()
    while heap:
        d, state = heapq.heappop(heap)
        if state in seen:
            continue
        seen.add(state)
        node, mode = state
        for neighbor, edge in network.adjacency[mode].get(node, ()):
            nstate = (neighbor, mode)
            nd = d + edge_cost(edge, mode)
            if nd < dist.get(nstate, math.inf) - 1e-12:
                dist[nstate] = nd
                prev[nstate] = (state, edge)
                heapq.heappush(heap, (nd, nstate))
        if node in network.transfer_nodes:
            for other in modes:
                if other == mode:
                    continue
                switch_cost = w_t * cfg.transfer_penalty_min
                if other == "transit":
                    switch_cost += w_m * cfg.transit_flat_fare
                nstate = (node, other)
                nd = d + switch_cost
                if nd < dist.get(nstate, math.inf) - 1e-12:
                    dist[nstate] = nd
                    prev[nstate] = ((node, mode), None)
                    heapq.heappush(heap, (nd, nstate))

    goal_states = [(d_node, m) for m in modes if (d_node, m) in dist]
    if not goal_states:
        return None
    goal = min(goal_states, key=lambda s: (dist[s], s))
    # Walk the predecessor chain back to a start state.
    chain = [goal]
    while chain[-1] in prev:
        chain.append(prev[chain[-1]][0])
    chain.reverse()

    legs: list[RouteLeg] = []
    transfer_count = 0
    transit_boardings = 1 if chain[0][1] == "transit" else 0
    current_leg_points: list = [network.nodes[chain[0][0]]]
    current_mode = chain[0][1]
    current_len = 0.0
    for prev_state, state in zip(chain, chain[1:]):
        _, edge = prev[state]
        if edge is None:  # mode switch
            if current_len > 0:
                mult = constraints.mode_time_multiplier.get(current_mode, 1.0)
                legs.append(
                    RouteLeg(
                        mode=current_mode,
                        waypoints=current_leg_points,
                        distance_m=current_len,
                        duration_min=mult * current_len / network.mode_speed(current_mode),
                    )
                )
            transfer_count += 1
            if state[1] == "transit":
                transit_boardings += 1
            current_mode = state[1]
            current_leg_points = [network.nodes[state[0]]]
            current_len = 0.0
        else:
            current_len += edge.length_m
            current_leg_points.append(network.nodes[state[0]])
    if current_len > 0:
        mult = constraints.mode_time_multiplier.get(current_mode, 1.0)
        legs.append(
            RouteLeg(
                mode=current_mode,
                waypoints=current_leg_points,
                distance_m=current_len,
                duration_min=mult * current_len / network.mode_speed(current_mode),
            )
        )
    if not legs:
        transit_boardings = 0

    full_legs = []
    access = _access_leg(origin, network.nodes[o_node], network, constraints)
    if access:
        full_legs.append(access)
    full_legs.extend(legs)
    egress = _access_leg(destination, network.nodes[d_node], network, constraints)
    if egress:
        full_legs.append(RouteLeg("walk", list(reversed(egress.waypoints)), egress.distance_m, egress.duration_min))
    return _finish_route(full_legs, cfg, constraints, transit_boardings, transfer_count)


def route_candidates(
    network: RoadNetwork,
    origin,
    destination,
    modes: Optional[Sequence[str]] = None,
    constraints: Optional[RouteConstraints] = None,
) -> list[Route]:
    """One candidate per mode plus the hybrid layered-graph candidate."""
    modes = list(modes) if modes else list(MODES)
    if not modes:
        raise ValueError("modes must be nonempty")
    for m in modes:
        if m not in network.config.mode_speed_m_per_min:
            raise KeyError(f"unknown mode: {m!r}")
    constraints = constraints or RouteConstraints()
    if tuple(origin) == tuple(destination):
        return [Route(legs=[], distance_m=0.0, duration_min=0.0, money=0.0, cost=0.0)]
    o_node, _ = network.nearest_node(origin[0], origin[1])
    d_node, _ = network.nearest_node(destination[0], destination[1])
    candidates = []
    for mode in modes:
        route = _single_mode_route(network, mode, origin, destination, o_node, d_node, constraints)
        if route is not None:
            candidates.append(route)
    if len(modes) > 1:
        hybrid = _hybrid_route(network, modes, origin, destination, o_node, d_node, constraints)
        if hybrid is not None:
            candidates.append(hybrid)
    return candidates


def route_plan(
    network: RoadNetwork,
    origin,
    destination,
    modes: Optional[Sequence[str]] = None,
    constraints: Optional[RouteConstraints] = None,
) -> Route:
    """Minimum weighted-cost route among per-mode and hybrid candidates."""
    candidates = route_candidates(network, origin, destination, modes, constraints)
    if not candidates:
        raise ValueError(f"destination unreachable from {origin} with modes {modes}")
    return min(candidates, key=lambda r: (r.cost, r.duration_min, len(r.legs)))


def _piecewise(windows, default: float = 0.0) -> Callable[[int], float]:
    def value(t: int) -> float:
        for lo, hi, v in windows or ():
            if lo <= t < hi:
                return float(v)
        return default

    return value


def traffic_predict(
    network: RoadNetwork,
    start_min: int,
    horizon_min: int,
    step_min: int,
    demand_profile=None,
    event_windows=None,
    od_pair=None,
    traffic_config: Optional[TrafficConfig] = None,
) -> dict:
    """Step a demand profile through a monotone congestion relation.

    Per step, demand = base profile x event multiplier; each drive segment
    takes density = base_load x demand and speed = free_flow x
    max(eps, 1 - density/jam). Speeds stay in (0, free_flow], densities >= 0.
    Returns the per-segment state series plus shortest paths on predicted
    speeds for the optional od pair.
    """
    if horizon_min <= 0 or step_min <= 0:
        raise ValueError("horizon and step must be positive")
    tcfg = traffic_config or TrafficConfig()
    if callable(demand_profile):
        demand_fn = demand_profile
    else:
        demand_fn = _piecewise(demand_profile, default=0.0)
    event_fn = _piecewise(event_windows, default=1.0) if event_windows else (lambda t: 1.0)
    free_flow = network.mode_speed("drive")

    times = list(range(start_min, start_min + horizon_min, step_min))
    segments: dict = {}
    paths = []
    drive_edges = [e for e in network.edges if "drive" in e.modes]
    for t in times:
        demand = max(0.0, demand_fn(t)) * max(0.0, event_fn(t))
        speed_by_key = {}
        for edge in drive_edges:
            density = max(0.0, edge.base_load * demand)
            speed = free_flow * max(tcfg.free_flow_floor, 1.0 - density / tcfg.jam_density)
            key = "-".join(edge.key())
            segments.setdefault(key, []).append({"t": t, "density": density, "speed_m_per_min": speed})
            speed_by_key[edge.key()] = speed
        if od_pair is not None:
            adjacency = network.adjacency["drive"]
            o_node, _ = network.nearest_node(od_pair[0][0], od_pair[0][1])
            d_node, _ = network.nearest_node(od_pair[1][0], od_pair[1][1])
            dist, prev = _dijkstra(o_node, adjacency, lambda e: e.length_m / speed_by_key[e.key()])
            if d_node in dist:
                paths.append({"t": t, "nodes": _reconstruct(prev, o_node, d_node), "duration_min": dist[d_node]})
            else:
                paths.append({"t": t, "nodes": [], "duration_min": None})
    return {"times": times, "segments": segments, "paths": paths}
