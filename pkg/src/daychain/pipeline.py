"""Parallel batch generation with per-sample seeding and run metrics.

Worker tasks are independent persona-days; every sample derives its RNG
from (global seed, sample index), so the corpus content is identical
regardless of worker count. The output sink is the only shared mutable
resource and a single collector writes complete JSONL lines. Workers are
threads: generation against a remote reasoner is latency-bound, and the
heuristic backend is fast enough that scheduling overhead dominates
processes at this scale.
"""

from __future__ import annotations

import json
import logging
import resource
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from daychain.agent import run_day
from daychain.chains import ActivityChain, chain_to_line
from daychain.persona import (
    AGE_BANDS,
    HOUSEHOLD_ROLES,
    INCOME_TIERS,
    MODE_TEMPLATES,
    OCCUPATIONS,
    PREFERENCE_TEMPLATES,
    WORKING_OCCUPATIONS,
    Persona,
)
from daychain.services import WorldServices

import random

log = logging.getLogger(__name__)


class AllSamplesFailedError(RuntimeError):
    pass


class InvalidProfileError(ValueError):
    pass


@dataclass
class BatchConfig:
    workers: int = 1
    samples: int = 10
    seed: int = 0
    out_path: str = "chains.jsonl"
    persona_file: Optional[str] = None
    per_sample_timeout_s: float = 120.0
    date: str = "day-000"

    def validate(self) -> None:
        if self.workers < 1:
            raise ValueError(f"worker count must be >= 1, got {self.workers}")
        if self.samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.samples}")


@dataclass
class RunMetrics:
    workers: int
    samples: int
    sample_times_s: list = field(default_factory=list)
    successes: int = 0
    failures: int = 0
    wall_time_s: float = 0.0
    peak_rss_kb: int = 0

    @property
    def mean_time_s(self) -> float:
        return statistics.fmean(self.sample_times_s) if self.sample_times_s else 0.0

    @property
    def stdev_time_s(self) -> float:
        return statistics.stdev(self.sample_times_s) if len(self.sample_times_s) > 1 else 0.0

    @property
    def throughput_per_min(self) -> float:
        return 60.0 * self.successes / self.wall_time_s if self.wall_time_s > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "workers": self.workers,
            "samples": self.samples,
            "successes": self.successes,
            "failures": self.failures,
            "mean_time_s": self.mean_time_s,
            "stdev_time_s": self.stdev_time_s,
            "wall_time_s": self.wall_time_s,
            "throughput_per_min": self.throughput_per_min,
            # Process peak memory; not comparable to GPU-resident model sizes.
            "peak_rss_kb": self.peak_rss_kb,
        }


DEFAULT_PROFILE = {
    "occupation": {
        "office_worker": 0.38,
        "service_worker": 0.17,
        "student": 0.12,
        "retiree": 0.15,
        "homemaker": 0.08,
        "visitor": 0.10,
    },
    "age_band": {"18-25": 0.2, "26-40": 0.35, "41-60": 0.28, "60+": 0.17},
    "income_tier": {"low": 0.3, "mid": 0.5, "high": 0.2},
    "household_role": {"single": 0.35, "partner": 0.3, "parent": 0.25, "dependent": 0.1},
}

_PROFILE_DOMAINS = {
    "occupation": OCCUPATIONS,
    "age_band": AGE_BANDS,
    "income_tier": INCOME_TIERS,
    "household_role": HOUSEHOLD_ROLES,
}


def _draw(rng: random.Random, marginal: dict) -> str:
    names = sorted(marginal)
    weights = [marginal[n] for n in names]
    return rng.choices(names, weights=weights, k=1)[0]


def synthesize_personas(
    services: WorldServices,
    n: int,
    seed: int = 0,
    profile: Optional[dict] = None,
) -> list:
    """Deterministic persona sampling from configured marginals."""
    if n < 1:
        raise ValueError("n must be >= 1")
    profile = {**DEFAULT_PROFILE, **(profile or {})}
    for key, marginal in profile.items():
        if key not in _PROFILE_DOMAINS:
            raise InvalidProfileError(f"unknown profile dimension {key!r}")
        unknown = set(marginal) - set(_PROFILE_DOMAINS[key])
        if unknown:
            raise InvalidProfileError(f"unknown {key} values: {sorted(unknown)}")
        if min(marginal.values()) < 0 or sum(marginal.values()) <= 0:
            raise InvalidProfileError(f"invalid marginal for {key}")
    rng = random.Random(seed)
    residences = [p for p in services.index.pois if p.category == "residence"]
    workplaces = [p for p in services.index.pois if p.category == "employment"]
    if not residences:
        raise InvalidProfileError("world has no residence POIs to anchor homes")
    personas = []
    for i in range(n):
        occupation = _draw(rng, profile["occupation"])
        age_band = _draw(rng, profile["age_band"])
        income = _draw(rng, profile["income_tier"])
        role = _draw(rng, profile["household_role"])
        home = rng.choice(sorted(residences, key=lambda p: p.id))
        work = None
        if occupation in WORKING_OCCUPATIONS and workplaces:
            work = rng.choice(sorted(workplaces, key=lambda p: p.id))
        prefs = {}
        template = PREFERENCE_TEMPLATES[occupation]
        for category in sorted(set(template) | {"dining", "shopping", "sports & leisure", "tourism", "life services"}):
            base = template.get(category, 0.1)
            prefs[category] = round(min(1.0, max(0.0, base + rng.uniform(-0.15, 0.15))), 3)
        modes = {}
        for mode, base in sorted(MODE_TEMPLATES[age_band].items()):
            modes[mode] = round(min(1.0, max(0.05, base + rng.uniform(-0.1, 0.1))), 3)
        personas.append(
            Persona(
                id=f"persona-{seed}-{i:04d}",
                age_band=age_band,
                occupation=occupation,
                household_role=role,
                income_tier=income,
                home_poi=home.id,
                home=(home.lon, home.lat),
                work_poi=work.id if work else None,
                work=(work.lon, work.lat) if work else None,
                preferences=prefs,
                mode_propensities=modes,
            )
        )
    return personas


def load_personas(path: str) -> list:
    with open(path, encoding="utf-8") as fh:
        return [Persona.from_dict(doc) for doc in json.load(fh)]


def save_personas(personas: list, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([p.to_dict() for p in personas], fh, sort_keys=True)


def sample_seed(global_seed: int, index: int) -> int:
    return (global_seed * 1_000_003 + index) & 0x7FFFFFFF


def _default_generate(services: WorldServices):
    def generate(persona: Persona, seed: int, date: str) -> ActivityChain:
        return run_day(persona, services, seed=seed, date=date).chain

    return generate


def run_batch(
    config: BatchConfig,
    services: WorldServices,
    generate_fn: Optional[Callable] = None,
    personas: Optional[list] = None,
) -> RunMetrics:
    """Generate config.samples persona-days and append them to JSONL output.

    generate_fn(persona, seed, date) -> ActivityChain is injectable so
    tests can use mock backends; the default runs the heuristic agent.
    """
    config.validate()
    generate = generate_fn or _default_generate(services)
    if personas is None:
        if config.persona_file:
            personas = load_personas(config.persona_file)
        else:
            personas = synthesize_personas(services, config.samples, seed=config.seed)
    if len(personas) < config.samples:
        raise ValueError(f"need {config.samples} personas, got {len(personas)}")

    def task(index: int):
        t0 = time.perf_counter()
        chain = generate(personas[index], sample_seed(config.seed, index), f"{config.date}-{index:05d}")
        return index, chain_to_line(chain), time.perf_counter() - t0

    metrics = RunMetrics(workers=config.workers, samples=config.samples)
    started = time.perf_counter()
    with open(config.out_path, "w", encoding="utf-8") as sink:
        if config.workers == 1:
            for i in range(config.samples):
                try:
                    _, line, dt = task(i)
                except Exception as exc:
                    metrics.failures += 1
                    log.warning("sample %d failed: %s", i, exc)
                    continue
                sink.write(line + "\n")
                metrics.successes += 1
                metrics.sample_times_s.append(dt)
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(task, i) for i in range(config.samples)]
                for i, future in enumerate(futures):
                    try:
                        _, line, dt = future.result(timeout=config.per_sample_timeout_s)
                    except Exception as exc:
                        metrics.failures += 1
                        log.warning("sample %d failed: %s", i, exc)
                        continue
                    sink.write(line + "\n")
                    metrics.successes += 1
                    metrics.sample_times_s.append(dt)
    metrics.wall_time_s = time.perf_counter() - started
    metrics.peak_rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    if metrics.successes == 0:
        raise AllSamplesFailedError(f"all {config.samples} samples failed")
    return metrics


def report(metrics_list: list, evaluation: Optional[dict] = None) -> dict:
    """Throughput table (workers x mean time) plus the evaluation document."""
    rows = sorted((m.to_dict() for m in metrics_list), key=lambda r: r["workers"])
    lines = ["workers  mean_time_s  throughput/min  success  fail"]
    for r in rows:
        lines.append(
            f"{r['workers']:>7}  {r['mean_time_s']:>11.3f}  {r['throughput_per_min']:>14.1f}"
            f"  {r['successes']:>7}  {r['failures']:>4}"
        )
    text = "\n".join(lines)
    doc = {"runs": rows}
    if evaluation:
        doc["evaluation"] = evaluation
        text += "\n\nevaluation summary:\n" + json.dumps(
            {k: evaluation[k] for k in sorted(evaluation) if not isinstance(evaluation[k], (list, dict))},
            indent=1,
            sort_keys=True,
        )
    return {"text": text, "json": doc}
