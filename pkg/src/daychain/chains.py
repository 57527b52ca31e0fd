"""Activity chain data model, the 96-slot encoding, and JSONL persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from daychain.categories import ACTIVITY_CATEGORIES, CATEGORY_SET

SLOTS_PER_DAY = 96
SLOT_MIN = 15
DAY_MIN = SLOTS_PER_DAY * SLOT_MIN


class EmptyChainError(ValueError):
    pass


@dataclass
class ActivityRecord:
    category: str
    start: int
    end: int
    lon: float
    lat: float
    poi_id: Optional[str] = None
    mode: Optional[str] = None  # mode of the preceding travel leg
    companions: tuple = ()

    @property
    def duration(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        return {
            "category": self.category,
            "start": self.start,
            "end": self.end,
            "lon": self.lon,
            "lat": self.lat,
            "poi_id": self.poi_id,
            "mode": self.mode,
            "companions": list(self.companions),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ActivityRecord":
        return cls(
            category=doc["category"],
            start=int(doc["start"]),
            end=int(doc["end"]),
            lon=float(doc["lon"]),
            lat=float(doc["lat"]),
            poi_id=doc.get("poi_id"),
            mode=doc.get("mode"),
            companions=tuple(doc.get("companions", ())),
        )


@dataclass
class ActivityChain:
    persona_id: str
    date: str
    home: tuple
    records: list = field(default_factory=list)
    decisions: list = field(default_factory=list)  # per-decision stage bundles
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "persona_id": self.persona_id,
            "date": self.date,
            "home": list(self.home),
            "records": [r.to_dict() for r in self.records],
            "decisions": self.decisions,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ActivityChain":
        return cls(
            persona_id=doc["persona_id"],
            date=doc.get("date", ""),
            home=tuple(doc.get("home", (0.0, 0.0))),
            records=[ActivityRecord.from_dict(r) for r in doc.get("records", [])],
            decisions=list(doc.get("decisions", [])),
            meta=dict(doc.get("meta", {})),
        )


def chain_to_line(chain: ActivityChain) -> str:
    """Canonical one-line JSON so corpora compare byte-for-byte."""
    return json.dumps(chain.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_chains(chains: Sequence[ActivityChain], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for chain in chains:
            fh.write(chain_to_line(chain) + "\n")


def read_chains(path: str) -> list[ActivityChain]:
    chains = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                chains.append(ActivityChain.from_dict(json.loads(line)))
    return chains


def discretize(chain: ActivityChain) -> list:
    """Label each 15-minute slot with the category covering most of it.

    Travel records label their slots like any other category. Slots no
    record covers inherit the previous slot's label (the first defaults to
    residence).
    """
    if not chain.records:
        raise EmptyChainError("cannot discretize an empty chain")
    coverage = [dict() for _ in range(SLOTS_PER_DAY)]
    for order, rec in enumerate(chain.records):
        if rec.category not in CATEGORY_SET:
            raise ValueError(f"record category {rec.category!r} not in the canonical set")
        lo = max(0, rec.start)
        hi = min(DAY_MIN, rec.end)
        if hi <= lo:
            continue
        first_slot = lo // SLOT_MIN
        last_slot = (hi - 1) // SLOT_MIN
        for s in range(first_slot, last_slot + 1):
            slot_lo, slot_hi = s * SLOT_MIN, (s + 1) * SLOT_MIN
            overlap = min(hi, slot_hi) - max(lo, slot_lo)
            if overlap > 0:
                prev = coverage[s].get(rec.category)
                if prev is None:
                    coverage[s][rec.category] = (overlap, order)
                else:
                    coverage[s][rec.category] = (prev[0] + overlap, prev[1])
    labels = []
    previous = "residence"
    for s in range(SLOTS_PER_DAY):
        if coverage[s]:
            best = max(coverage[s].items(), key=lambda kv: (kv[1][0], -kv[1][1]))
            previous = best[0]
        labels.append(previous)
    return labels


def category_index_sequence(labels: Sequence[str]) -> list:
    return [ACTIVITY_CATEGORIES.index(l) for l in labels]
