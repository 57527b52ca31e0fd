"""Command line entry points: generate, evaluate, ingest, serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from daychain.chains import read_chains
from daychain.config import EngineConfig, load_config
from daychain.environment import Scenario
from daychain.pipeline import BatchConfig, load_personas, report, run_batch, synthesize_personas
from daychain.reporting import evaluate_corpus
from daychain.routing import load_network_csv
from daychain.services import WorldServices
from daychain.spatial import PoiIndex, load_pois_csv, load_pois_geojson
from daychain.worldgen import make_world

log = logging.getLogger(__name__)


def _engine_config(args) -> EngineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return EngineConfig()


def _load_world(args, config: EngineConfig) -> WorldServices:
    if getattr(args, "world", None):
        return WorldServices.load(args.world, config)
    if getattr(args, "poi", None) and getattr(args, "network", None):
        pois = load_pois_geojson(args.poi) if args.poi.endswith(".json") else load_pois_csv(args.poi)
        network = load_network_csv(args.network, config.routing)
        scenario = Scenario.load(args.scenario) if getattr(args, "scenario", None) else Scenario()
        return WorldServices(
            index=PoiIndex(pois, cell_deg=config.spatial.grid_cell_deg),
            network=network,
            scenario=scenario,
            config=config,
        )
    log.info("no world supplied; synthesizing one (seed=%d, pois=%d)", args.world_seed, args.pois_n)
    return make_world(seed=args.world_seed, n_pois=args.pois_n, config=config)


def cmd_generate(args) -> int:
    config = _engine_config(args)
    services = _load_world(args, config)
    batch = BatchConfig(
        workers=args.workers,
        samples=args.samples,
        seed=args.seed,
        out_path=args.out,
        persona_file=args.personas,
        per_sample_timeout_s=config.pipeline.per_sample_timeout_s,
    )
    metrics = run_batch(batch, services)
    doc = report([metrics])
    print(doc["text"])
    if args.metrics_out:
        with open(args.metrics_out, "w", encoding="utf-8") as fh:
            json.dump(doc["json"], fh, indent=2, sort_keys=True)
    print(f"wrote {metrics.successes} chains to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _engine_config(args)
    generated = read_chains(args.generated)
    reference = read_chains(args.reference) if args.reference else generated
    services = None
    if args.world:
        services = WorldServices.load(args.world, config)
    result = evaluate_corpus(generated, reference, config.evaluation, services=services)
    result.save(args.out)
    print(result.summary_text())
    print(f"wrote report to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    config = _engine_config(args)
    pois = load_pois_geojson(args.poi) if args.poi.endswith(".json") else load_pois_csv(args.poi)
    network = load_network_csv(args.network, config.routing)
    scenario = Scenario.load(args.scenario) if args.scenario else Scenario()
    world = WorldServices(
        index=PoiIndex(pois, cell_deg=config.spatial.grid_cell_deg),
        network=network,
        scenario=scenario,
        config=config,
    )
    world.save(args.out)
    print(f"ingested {len(pois)} POIs and {len(network.edges)} edges into {args.out}")
    return 0


def cmd_serve(args) -> int:
    from daychain.service import serve

    config = _engine_config(args)
    services = _load_world(args, config)
    registry = services.registry()
    print(f"serving tools {registry.names()} on {args.listen}", file=sys.stderr)
    serve(registry, args.listen)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daychain", description="Daily activity-travel chain engine")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_world_args(p):
        p.add_argument("--config", help="engine config JSON")
        p.add_argument("--world", help="world bundle JSON (from ingest)")
        p.add_argument("--poi", help="POI CSV or GeoJSON")
        p.add_argument("--network", help="edge-list CSV")
        p.add_argument("--scenario", help="environment scenario JSON")
        p.add_argument("--world-seed", type=int, default=0, help="seed for the synthetic world fallback")
        p.add_argument("--pois-n", type=int, default=50, help="POI count for the synthetic world fallback")

    gen = sub.add_parser("generate", help="generate a chain corpus")
    add_world_args(gen)
    gen.add_argument("--workers", type=int, default=1)
    gen.add_argument("--samples", type=int, default=10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="chains.jsonl")
    gen.add_argument("--personas", help="persona JSON file (else synthesized)")
    gen.add_argument("--metrics-out", help="write run metrics JSON here")
    gen.set_defaults(func=cmd_generate)

    ev = sub.add_parser("evaluate", help="score a corpus against a reference")
    ev.add_argument("--generated", required=True)
    ev.add_argument("--reference", help="reference JSONL (defaults to the generated corpus)")
    ev.add_argument("--out", default="report.json")
    ev.add_argument("--config")
    ev.add_argument("--world", help="world bundle for validation checks")
    ev.set_defaults(func=cmd_evaluate)

    ing = sub.add_parser("ingest", help="bundle POIs + network + scenario into a world JSON")
    ing.add_argument("--poi", required=True)
    ing.add_argument("--network", required=True)
    ing.add_argument("--scenario")
    ing.add_argument("--config")
    ing.add_argument("--out", default="world.json")
    ing.set_defaults(func=cmd_ingest)

    srv = sub.add_parser("serve", help="serve tool services over stdio or TCP")
    add_world_args(srv)
    srv.add_argument("--listen", default="stdio", help='"stdio" or host:port')
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
