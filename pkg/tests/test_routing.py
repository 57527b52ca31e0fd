import math
import random

import pytest

from daychain.config import RoutingConfig, TrafficConfig
from daychain.routing import (
    Edge,
    RoadNetwork,
    RouteConstraints,
    load_network_csv,
    route_candidates,
    route_plan,
    traffic_predict,
)

DEG = 0.001  # ~111 m


def grid_network(n=5, seed=0, modes=("walk",), transit_row=None):
    rng = random.Random(seed)
    nodes = {}
    for i in range(n):
        for j in range(n):
            nodes[f"g{i}_{j}"] = (i * DEG, j * DEG)
    edges = []
    for i in range(n):
        for j in range(n):
            for ni, nj in ((i + 1, j), (i, j + 1)):
                if ni >= n or nj >= n:
                    continue
                length = 111.0 * rng.uniform(0.8, 1.6)
                mode_set = set(modes)
                if transit_row is not None and j == transit_row and nj == transit_row:
                    mode_set.add("transit")
                edges.append(Edge(f"g{i}_{j}", f"g{ni}_{nj}", length, frozenset(mode_set)))
    return RoadNetwork(nodes, edges, RoutingConfig())


def dijkstra_oracle(network, mode, source):
    """Array-based single-source shortest path (no heap), by travel time."""
    speed = network.config.mode_speed_m_per_min[mode]
    nodes = sorted(network.nodes)
    dist = {n: math.inf for n in nodes}
    dist[source] = 0.0
    visited = set()
    while len(visited) < len(nodes):
        u = min((n for n in nodes if n not in visited), key=lambda n: (dist[n], n))
        if dist[u] == math.inf:
            break
        visited.add(u)
        for v, edge in network.adjacency[mode].get(u, ()):
            alt = dist[u] + edge.length_m / speed
            if alt < dist[v]:
                dist[v] = alt
    return dist


def test_zero_length_route():
    net = grid_network()
    route = route_plan(net, (0.0, 0.0), (0.0, 0.0), ["walk"])
    assert route.duration_min == 0.0
    assert route.distance_m == 0.0
    assert route.legs == []


def test_single_mode_grid_matches_reference_shortest_path():
    net = grid_network(n=5, seed=11)
    origin = net.nodes["g0_0"]
    for target in ("g4_4", "g2_3", "g4_0"):
        destination = net.nodes[target]
        route = route_plan(net, origin, destination, ["walk"])
        oracle = dijkstra_oracle(net, "walk", "g0_0")
        assert route.duration_min == pytest.approx(oracle[target], abs=1e-9)


def test_unknown_mode():
    net = grid_network()
    with pytest.raises(KeyError):
        route_plan(net, (0.0, 0.0), (DEG, DEG), ["hovercraft"])


def test_unreachable_destination():
    nodes = {"a": (0.0, 0.0), "b": (DEG, 0.0), "c": (10 * DEG, 0.0), "d": (11 * DEG, 0.0)}
    edges = [Edge("a", "b", 100.0, frozenset(["walk"])), Edge("c", "d", 100.0, frozenset(["walk"]))]
    net = RoadNetwork(nodes, edges, RoutingConfig())
    with pytest.raises(ValueError):
        route_plan(net, (0.0, 0.0), (10 * DEG, 0.0), ["walk"])


def test_hybrid_no_worse_than_walk_only():
    net = grid_network(n=5, seed=2, modes=("walk",), transit_row=2)
    origin, destination = net.nodes["g0_2"], net.nodes["g4_2"]
    walk_only = route_plan(net, origin, destination, ["walk"])
    hybrid = route_plan(net, origin, destination, ["walk", "transit"])
    assert hybrid.cost <= walk_only.cost + 1e-9


def test_route_is_min_cost_over_candidates():
    net = grid_network(n=4, seed=5, modes=("walk", "cycle", "drive"), transit_row=1)
    origin, destination = net.nodes["g0_0"], net.nodes["g3_3"]
    modes = ["walk", "cycle", "drive", "transit"]
    candidates = route_candidates(net, origin, destination, modes)
    best = route_plan(net, origin, destination, modes)
    assert best.cost == pytest.approx(min(c.cost for c in candidates))


def test_access_legs_cover_offgrid_endpoints():
    net = grid_network()
    origin = (0.0 + 0.0002, 0.0)  # ~22 m from g0_0
    destination = net.nodes["g2_2"]
    route = route_plan(net, origin, destination, ["walk"])
    assert route.legs[0].mode == "walk"
    assert route.legs[0].distance_m == pytest.approx(22.2, abs=1.0)


def test_network_csv_roundtrip(tmp_path):
    path = tmp_path / "edges.csv"
    path.write_text(
        "u,v,length_m,modes,u_lon,u_lat,v_lon,v_lat,base_load\n"
        "a,b,150,walk|drive,0.0,0.0,0.001,0.0,0.4\n"
        "b,c,200,drive,0.001,0.0,0.001,0.001,0.6\n"
    )
    net = load_network_csv(str(path))
    assert set(net.nodes) == {"a", "b", "c"}
    assert net.node_modes["b"] == {"walk", "drive"}
    assert "b" in net.transfer_nodes


def congestion_network():
    # Direct short edge with heavy base load vs a long lightly loaded detour.
    nodes = {"o": (0.0, 0.0), "d": (0.004, 0.0), "x": (0.002, 0.002)}
    edges = [
        Edge("o", "d", 500.0, frozenset(["drive"]), base_load=0.9),
        Edge("o", "x", 400.0, frozenset(["drive"]), base_load=0.0),
        Edge("x", "d", 400.0, frozenset(["drive"]), base_load=0.0),
    ]
    return RoadNetwork(nodes, edges, RoutingConfig())


def test_traffic_zero_demand_free_flow():
    net = congestion_network()
    out = traffic_predict(net, start_min=0, horizon_min=60, step_min=15, demand_profile=[[0, 60, 0.0]])
    free = net.mode_speed("drive")
    for series in out["segments"].values():
        for state in series:
            assert state["speed_m_per_min"] == pytest.approx(free)
            assert state["density"] == 0.0


def test_traffic_event_multiplier_raises_density_pointwise():
    net = congestion_network()
    base = traffic_predict(net, 0, 120, 15, demand_profile=[[0, 120, 0.5]])
    event = traffic_predict(
        net, 0, 120, 15, demand_profile=[[0, 120, 0.5]], event_windows=[[30, 90, 2.0]]
    )
    for key in base["segments"]:
        for b, e in zip(base["segments"][key], event["segments"][key]):
            assert e["density"] >= b["density"] - 1e-12
            if 30 <= b["t"] < 90:
                assert e["density"] >= b["density"]


def test_traffic_bounds_hold():
    net = congestion_network()
    out = traffic_predict(net, 0, 120, 10, demand_profile=[[0, 120, 3.0]])
    free = net.mode_speed("drive")
    tcfg = TrafficConfig()
    for series in out["segments"].values():
        for state in series:
            assert 0.0 < state["speed_m_per_min"] <= free
            assert state["speed_m_per_min"] >= free * tcfg.free_flow_floor - 1e-12
            assert state["density"] >= 0.0


def test_congestion_flips_shortest_path():
    # Hand-computed: free-flow direct 500/420 = 1.19 min beats the 800 m
    # detour (1.90). Under demand 1.0 the direct edge densifies to 0.9 and
    # slows to 0.1 x free flow (11.9 min), so the detour wins.
    net = congestion_network()
    out = traffic_predict(
        net,
        0,
        60,
        30,
        demand_profile=[[0, 30, 0.0], [30, 60, 1.0]],
        od_pair=((0.0, 0.0), (0.004, 0.0)),
    )
    free_path = out["paths"][0]
    jam_path = out["paths"][1]
    assert free_path["nodes"] == ["o", "d"]
    assert jam_path["nodes"] == ["o", "x", "d"]
    assert free_path["duration_min"] == pytest.approx(500 / 420, abs=1e-9)
    assert jam_path["duration_min"] == pytest.approx(800 / 420, abs=1e-9)


def test_invalid_horizon():
    with pytest.raises(ValueError):
        traffic_predict(congestion_network(), 0, 0, 10)
