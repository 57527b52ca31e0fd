"""Feasibility checks over generated activity chains.

Violations are data, not errors: each carries a type, the record indices
involved, and a human-readable note. Travel feasibility is judged against
the same route planner the generator uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from daychain.categories import CATEGORY_SET
from daychain.chains import ActivityChain
from daychain.routing import RouteConstraints, route_plan
from daychain.services import WorldServices
from daychain.spatial import haversine_m

HOME_TOLERANCE_M = 5.0
TRAVEL_SLACK_MIN = 1e-6


@dataclass
class Violation:
    kind: str  # ordering | overlap | travel | hours | category | anchor
    records: tuple
    note: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "records": list(self.records), "note": self.note}


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> dict:
        out: dict = {}
        for v in self.violations:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {"ok": self.ok, "counts": self.counts(), "violations": [v.to_dict() for v in self.violations]}


def validate_chain(chain: ActivityChain, services: Optional[WorldServices] = None) -> ValidationReport:
    """Check ordering, overlap, travel feasibility, opening hours,
    category validity, and home anchoring."""
    violations: list[Violation] = []
    records = chain.records

    for i, rec in enumerate(records):
        if rec.category not in CATEGORY_SET:
            violations.append(Violation("category", (i,), f"unknown category {rec.category!r}"))
        if rec.end <= rec.start:
            violations.append(Violation("ordering", (i,), f"nonpositive duration [{rec.start}, {rec.end})"))

    for i in range(len(records) - 1):
        a, b = records[i], records[i + 1]
        if b.start < a.start:
            violations.append(Violation("ordering", (i, i + 1), "records not time-sorted"))
        if a.end > b.start:
            violations.append(Violation("overlap", (i, i + 1), f"[{a.start},{a.end}) overlaps [{b.start},{b.end})"))

    if services is not None:
        for i, rec in enumerate(records):
            if rec.category == "travel" or rec.poi_id is None:
                continue
            poi = services.index.by_id.get(rec.poi_id)
            if poi is None:
                violations.append(Violation("hours", (i,), f"unknown poi {rec.poi_id!r}"))
            elif not poi.is_open(rec.start, rec.end):
                violations.append(
                    Violation(
                        "hours",
                        (i,),
                        f"{poi.id} open [{poi.open_min},{poi.close_min}) but visited [{rec.start},{rec.end})",
                    )
                )
        activities = [(i, r) for i, r in enumerate(records) if r.category != "travel"]
        for (i, a), (j, b) in zip(activities, activities[1:]):
            if haversine_m(a.lon, a.lat, b.lon, b.lat) == 0.0:
                continue
            available = b.start - a.end
            try:
                # Feasibility is a time question: the gap must admit the
                # fastest route over any mode, so weigh time only.
                route = route_plan(
                    services.network,
                    (a.lon, a.lat),
                    (b.lon, b.lat),
                    None,
                    RouteConstraints(weight_time=1.0, weight_distance=0.0, weight_money=0.0),
                )
            except (ValueError, KeyError):
                violations.append(Violation("travel", (i, j), "no feasible route between activities"))
                continue
            if route.duration_min > available + TRAVEL_SLACK_MIN:
                violations.append(
                    Violation(
                        "travel",
                        (i, j),
                        f"route needs {route.duration_min:.1f} min but only {available} available",
                    )
                )

    if chain.meta.get("home_anchored", True) and records:
        for idx in (0, len(records) - 1):
            rec = records[idx]
            if rec.category != "residence" or haversine_m(
                rec.lon, rec.lat, chain.home[0], chain.home[1]
            ) > HOME_TOLERANCE_M:
                violations.append(Violation("anchor", (idx,), "chain does not begin/end at home residence"))

    return ValidationReport(violations)
