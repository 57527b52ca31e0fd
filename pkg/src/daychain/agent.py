"""Per-persona day generation: a five-stage decision loop inside a
six-phase workflow.

Each decision runs situational awareness, constraint identification,
option generation and screening, multi-factor evaluation, and decision
formation, in that order, once each. All tool interactions travel through
protocol envelopes logged in the stage records. Planning is coarse to
fine: the day's block structure is fixed first (via the temporal
scheduler), then each block is refined into a concrete venue and route.
With the heuristic backend and a fixed seed the whole run is
deterministic.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from daychain.chains import ActivityChain, ActivityRecord
from daychain.config import EngineConfig
from daychain.memory import MemoryService, MemoryStore
from daychain.persona import Persona
from daychain.protocol import McpEnvelope, Session, dispatch
from daychain.reasoners import HeuristicReasoner, ReasonerConfig, build_reasoner
from daychain.services import WorldServices
from daychain.validation import ValidationReport, validate_chain

MIN_ACTIVITY_MIN = 20
HOME_DEADLINE_MIN = 1340  # leave slack to be home before midnight
DAY_WRAP_MIN = 1440


class NoFeasibleOptionError(RuntimeError):
    pass


@dataclass
class StageRecord:
    stage: str
    inputs: dict
    tool_calls: list
    output: dict
    rationale: str

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "inputs": self.inputs,
            "tool_calls": self.tool_calls,
            "output": self.output,
            "rationale": self.rationale,
        }


@dataclass
class Block:
    name: str
    category: str
    start: int
    end: int
    anchor_poi: Optional[str] = None
    min_duration: int = MIN_ACTIVITY_MIN


@dataclass
class Decision:
    block: str
    choice: dict
    stages: list

    def to_dict(self) -> dict:
        return {"block": self.block, "choice": self.choice, "stages": [s.to_dict() for s in self.stages]}


@dataclass
class DayResult:
    chain: ActivityChain
    validation: ValidationReport
    notes: list = field(default_factory=list)
    repairs: int = 0
    unrepaired: bool = False


# Flexible block templates: (priority, deadline, estimate, preferred windows).
_BLOCK_TEMPLATES = {
    "lunch": (2.5, 870, 45, [[660, 840, 1.0]]),
    "dinner": (2.2, 1260, 55, [[1050, 1230, 1.0]]),
    "morning": (1.8, 720, 60, [[480, 690, 0.8]]),
    "afternoon": (1.6, 1050, 70, [[840, 1020, 0.8]]),
    "evening": (1.4, 1340, 70, [[1140, 1320, 0.8]]),
}

_FLEX_CATEGORIES = ("shopping", "sports & leisure", "tourism", "life services")


class DayAgent:
    """Owns one persona's session, timeline, and memory for one day."""

    def __init__(
        self,
        persona: Persona,
        services: WorldServices,
        reasoner=None,
        seed: int = 0,
        date: str = "day-000",
        memory_store: Optional[MemoryStore] = None,
    ):
        self.persona = persona
        self.services = services
        self.cfg = services.config.agent
        self.reasoner = reasoner or HeuristicReasoner(seed)
        self.rng = random.Random(seed)
        self.date = date
        self.session = Session(f"{persona.id}:{date}")
        self.session.context["persona_id"] = persona.id
        self.memory_service = MemoryService(services.config.memory)
        if memory_store is not None:
            self.memory_service.attach(memory_store)
        self.registry = services.registry(self.memory_service)
        self._query_n = 0
        self.now = self.cfg.day_start_min
        self.notes: list = []

    # -- protocol plumbing ---------------------------------------------------

    def _ask(self, tool: str, payload: dict) -> tuple[dict, str, bool]:
        """Dispatch one query; returns (payload, response id, ok)."""
        self._query_n += 1
        query = McpEnvelope(
            id=f"{self.session.session_id}:q{self._query_n:04d}",
            session_id=self.session.session_id,
            kind="query",
            tool=tool,
            payload=payload,
            timestamp=float(self.now * 60),
        )
        self.session.context["now_min"] = self.now
        response = dispatch(self.session, query, self.registry)
        return response.payload, response.id, bool(response.status and response.status.ok)

    # -- phase 2: coarse daily structure --------------------------------------

    def _wake_time(self) -> int:
        base = {"retiree": 390, "student": 390, "visitor": 420}.get(self.persona.occupation, 360)
        return base + 15 * self.rng.randrange(0, 5)

    def _work_windows(self) -> list:
        """Morning and afternoon work segments with a midday meal gap."""
        start = 540 + 15 * self.rng.randrange(-2, 3)
        gap_start = 720 + 15 * self.rng.randrange(0, 3)
        gap = 70 + 10 * self.rng.randrange(0, 2)
        end = gap_start + gap + 300 + 30 * self.rng.randrange(-1, 2)
        return [(start, gap_start), (gap_start + gap, min(end, 1200))]

    def _pick_flex_category(self) -> str:
        prefs = self.persona.preferences
        weights = [max(prefs.get(c, 0.1), 0.01) for c in _FLEX_CATEGORIES]
        return self.rng.choices(list(_FLEX_CATEGORIES), weights=weights, k=1)[0]

    def _plan_blocks(self) -> list:
        """Fix the high-level day structure before refining venues/routes."""
        wake = self._wake_time()
        blocks: list[Block] = []
        fixed_events = []
        if self.persona.works:
            for i, (ws, we) in enumerate(self._work_windows()):
                name = "work_am" if i == 0 else "work_pm"
                blocks.append(Block(name, "employment", ws, we, anchor_poi=self.persona.work_poi))
                fixed_events.append({"start": ws, "duration": we - ws, "kind": name})

        wanted = ["lunch", "dinner"]
        if not self.persona.works:
            wanted = ["morning", "lunch", "afternoon", "dinner"]
        if self.rng.random() < 0.8:
            wanted.append("evening")
        wanted.sort(key=lambda name: -_BLOCK_TEMPLATES[name][0])  # highest priority first

        placed_events = list(fixed_events)
        for name in wanted:
            priority, deadline, estimate, windows = _BLOCK_TEMPLATES[name]
            # Cap the search at the deadline: past it the urgency term keeps
            # growing, which would drag blocks into the late evening.
            payload = {
                "op": "schedule",
                "events": placed_events,
                "tasks": [{"priority": priority, "deadline": deadline, "estimate": estimate, "kind": name}],
                "constraints": {
                    "start_bound": wake,
                    "end_bound": min(HOME_DEADLINE_MIN, deadline),
                    "preferred_windows": windows,
                },
                "now": wake,
            }
            result, _, ok = self._ask("temporal", payload)
            if not ok or not result.get("schedule"):
                self.notes.append(f"block {name} unplaced by scheduler")
                continue
            slot = result["schedule"][0]
            category = "dining" if name in ("lunch", "dinner") else self._pick_flex_category()
            blocks.append(Block(name, category, int(slot["start"]), int(slot["end"])))
            placed_events.append({"start": int(slot["start"]), "duration": int(slot["end"] - slot["start"]), "kind": name})

        blocks.sort(key=lambda b: b.start)
        return [Block("sleep", "residence", self.cfg.day_start_min, wake)] + blocks

    # -- five-stage decision ---------------------------------------------------

    def decide(self, block: Block, current: int, loc: tuple, loc_name: str, remaining: list) -> Decision:
        """Run stages S1..S5 for one activity block; returns the decision."""
        persona_doc = self.persona.to_dict()
        stages: list[StageRecord] = []

        # S1 situational awareness
        env_payload, env_call, _ = self._ask(
            "environment",
            {"op": "perceive", "mode": "realtime", "t_min": current, "lon": loc[0], "lat": loc[1], "category": block.category},
        )
        now_payload, now_call, _ = self._ask("temporal", {"op": "now"})
        s1_inputs = {
            "persona": persona_doc,
            "now_min": now_payload.get("now_min", current),
            "location_name": loc_name,
            "environment": env_payload,
            "remaining_blocks": [b.name for b in remaining],
            "block": block.name,
        }
        s1_out = self.reasoner.propose("S1", s1_inputs)
        stages.append(
            StageRecord("S1", {"block": block.name, "now_min": current}, [env_call, now_call], s1_out, s1_out.get("summary", ""))
        )

        # S2 constraints and goals
        next_fixed = min(
            [b.start for b in remaining if b.anchor_poi] + [HOME_DEADLINE_MIN],
        )
        window_end = min(block.end + 45, next_fixed, HOME_DEADLINE_MIN)
        window = (max(block.start, current), window_end)
        budget = max(10, min(45, (window_end - window[0]) // 3))
        fastest = max(
            self.services.config.routing.mode_speed_m_per_min[m] for m in self.persona.allowed_modes()
        )
        radius = min(self.cfg.search_radius_m, budget * fastest)
        s2_inputs = {
            "persona": persona_doc,
            "window": list(window),
            "time_budget_min": budget,
            "radius_m": radius,
            "extra_constraints": [f"weather {env_payload.get('weather', {}).get('condition', 'unknown')}"],
        }
        s2_out = self.reasoner.propose("S2", s2_inputs)
        budget = int(s2_out.get("time_budget_min", budget) or budget)
        radius = float(s2_out.get("radius_m", radius) or radius)
        stages.append(StageRecord("S2", {"window": list(window)}, [], s2_out, "; ".join(s2_out.get("constraints", []))))

        # S3 option generation and screening
        tool_calls = []
        raw_candidates = []
        if block.anchor_poi is not None:
            poi = self.services.index.by_id[block.anchor_poi].to_dict()
            raw_candidates = [{"poi": poi}]
        else:
            search_payload, call_id, ok = self._ask(
                "spatial",
                {
                    "op": "poi_search",
                    "origin": list(loc),
                    "query": block.category,
                    "radius_m": radius,
                    "preferences": self.persona.preferences,
                    "top_k": self.cfg.candidate_pool,
                },
            )
            tool_calls.append(call_id)
            if ok:
                raw_candidates = [{"poi": r["poi"], "search_score": r["score"]} for r in search_payload.get("results", [])]
        screened = []
        planned_duration = max(block.end - block.start, block.min_duration)
        for cand in raw_candidates:
            poi = cand["poi"]
            if poi["category"] != block.category:
                continue
            route_payload, call_id, ok = self._ask(
                "spatial",
                {
                    "op": "route_plan",
                    "origin": list(loc),
                    "destination": [poi["lon"], poi["lat"]],
                    "modes": self.persona.allowed_modes(),
                    "constraints": {
                        "weight_time": self.services.config.routing.weight_time,
                        "weight_distance": self.services.config.routing.weight_distance,
                        "weight_money": self.services.config.routing.weight_money,
                    },
                },
            )
            tool_calls.append(call_id)
            if not ok:
                continue
            route = route_payload["route"]
            travel = int(math.ceil(route["duration_min"] - 1e-9))
            arrival = max(current + travel, block.start)
            latest_end = min(window_end, poi["close_min"])
            duration = min(planned_duration, latest_end - arrival)
            if travel > budget or arrival < poi["open_min"] or duration < block.min_duration:
                continue
            mode = "walk"
            if route["legs"]:
                mode = max(route["legs"], key=lambda l: (l["duration_min"], l["mode"]))["mode"]
            screened.append(
                {
                    "id": poi["id"],
                    "poi": poi,
                    "travel_min": travel,
                    "route_duration": route["duration_min"],
                    "mode": mode,
                    "arrival": arrival,
                    "duration": duration,
                    "distance_m": route["distance_m"],
                }
            )
        s3_out = self.reasoner.propose("S3", {"persona": persona_doc, "candidates": screened})
        kept_ids = [cid for cid in s3_out.get("options", []) if any(c["id"] == cid for c in screened)]
        candidates = [c for c in screened if c["id"] in kept_ids] or screened
        stages.append(
            StageRecord(
                "S3",
                {"raw": len(raw_candidates), "screened": len(screened)},
                tool_calls,
                {"options": [c["id"] for c in candidates], "backend": s3_out.get("backend")},
                f"{len(candidates)} feasible of {len(raw_candidates)} generated",
            )
        )
        if not candidates:
            stages.append(StageRecord("S4", {}, [], {"scores": {}}, "no options to evaluate"))
            stages.append(StageRecord("S5", {}, [], {"choice": None}, "no feasible option"))
            raise _NoOption(stages)

        # S4 multi-factor evaluation
        mem_payload, mem_call, _ = self._ask(
            "memory",
            {
                "op": "retrieve",
                "t_min": current,
                "lon": loc[0],
                "lat": loc[1],
                "activity": block.category,
                "k": 64,
            },
        )
        memories = mem_payload.get("results", [])
        factor_rows = []
        for cand in candidates:
            habit = self._habit_bias(cand, memories)
            factors = {
                "time_cost": max(0.0, 1.0 - cand["travel_min"] / max(budget, 1)),
                "distance": max(0.0, 1.0 - cand["distance_m"] / max(radius, 1.0)),
                "value": cand["poi"]["rating"] / 5.0,
                "preference": min(1.0, max(0.0, self.persona.preferences.get(cand["poi"]["category"], 0.0))),
                "habit": habit,
            }
            factor_rows.append({"id": cand["id"], "factors": factors})
        s4_inputs = {
            "persona": persona_doc,
            "candidates": factor_rows,
            "factor_weights": self.cfg.factor_weights,
        }
        s4_out = self.reasoner.propose("S4", s4_inputs)
        scores = {cid: float(v) for cid, v in s4_out.get("scores", {}).items() if any(c["id"] == cid for c in candidates)}
        if not scores:
            scores = {row["id"]: sum(row["factors"].values()) / len(row["factors"]) for row in factor_rows}
        stages.append(StageRecord("S4", {"factors": factor_rows}, [mem_call], {"scores": scores, "backend": s4_out.get("backend")}, "weighted multi-factor scores"))

        # S5 decision formation and consequence prediction
        chosen_default = max(sorted(scores), key=lambda cid: scores[cid])
        s5_out = self.reasoner.propose(
            "S5",
            {
                "persona": persona_doc,
                "scores": scores,
                "consequences": {},
            },
        )
        choice_id = s5_out.get("choice") if s5_out.get("choice") in scores else chosen_default
        chosen = next(c for c in candidates if c["id"] == choice_id)
        consequences = {
            "block_end_est": chosen["arrival"] + chosen["duration"],
            "remaining_blocks": [b.name for b in remaining],
            "home_by_est": min(HOME_DEADLINE_MIN + 60, chosen["arrival"] + chosen["duration"] + 30),
        }
        stages.append(
            StageRecord(
                "S5",
                {"scores": scores},
                [],
                {"choice": choice_id, "consequences": consequences, "backend": s5_out.get("backend")},
                f"selected {choice_id}",
            )
        )
        return Decision(block=block.name, choice=chosen, stages=stages)

    def _habit_bias(self, cand: dict, memories: list) -> float:
        """Noisy-OR of positive-emotion memories matching the candidate.

        Adding a positive-emotion memory for a venue can only raise (never
        lower) its bias, which keeps stage-4 scores monotone in supportive
        memories.
        """
        kappa = self.cfg.habit_strength
        keep = 1.0
        for row in memories:
            phi = max(0.0, float(row.get("emotion", 0.0)))
            if phi <= 0.0:
                continue
            if row.get("poi_id") == cand["poi"]["id"]:
                keep *= 1.0 - kappa * phi
            elif row.get("activity") == cand["poi"]["category"]:
                keep *= 1.0 - 0.5 * kappa * phi
        return 1.0 - keep

    # -- phases 3-5: execution with dynamic adjustment -------------------------

    def _run_blocks(self, blocks: list) -> tuple[list, list]:
        records: list[ActivityRecord] = []
        decisions: list[Decision] = []
        home = self.persona.home
        wake = blocks[0].end  # sleep block end
        records.append(
            ActivityRecord("residence", self.cfg.day_start_min, wake, home[0], home[1], poi_id=self.persona.home_poi)
        )
        current = wake
        loc = home
        loc_name = "home"
        self.now = current

        todo = blocks[1:]
        for i, block in enumerate(todo):
            remaining = todo[i + 1 :]
            try:
                decision = self.decide(block, current, loc, loc_name, remaining)
            except _NoOption as exc:
                decisions.append(Decision(block=block.name, choice={}, stages=exc.stages))
                self.notes.append(f"block {block.name} skipped: no feasible option; staying in place")
                continue
            decisions.append(decision)
            chosen = decision.choice
            travel = chosen["travel_min"]
            depart = max(current, block.start - travel)
            if records and depart > records[-1].end:
                # Linger at the current venue, but never past its closing.
                linger_cap = depart
                if records[-1].poi_id:
                    prev_poi = self.services.index.by_id.get(records[-1].poi_id)
                    if prev_poi is not None:
                        linger_cap = min(depart, prev_poi.close_min)
                records[-1].end = max(records[-1].end, linger_cap)
            arrival = depart + travel
            latest_end = min(
                chosen["poi"]["close_min"],
                HOME_DEADLINE_MIN,
            )
            duration = min(chosen["duration"], latest_end - arrival)
            if duration < block.min_duration:
                self.notes.append(f"block {block.name} dropped during refinement: window collapsed")
                continue
            if travel > 0:
                records.append(
                    ActivityRecord(
                        "travel",
                        depart,
                        arrival,
                        chosen["poi"]["lon"],
                        chosen["poi"]["lat"],
                        mode=chosen["mode"],
                    )
                )
            records.append(
                ActivityRecord(
                    chosen["poi"]["category"],
                    arrival,
                    arrival + duration,
                    chosen["poi"]["lon"],
                    chosen["poi"]["lat"],
                    poi_id=chosen["poi"]["id"],
                    mode=chosen["mode"],
                )
            )
            current = arrival + duration
            loc = (chosen["poi"]["lon"], chosen["poi"]["lat"])
            loc_name = chosen["poi"]["name"]
            self.now = current
            # Phase-5 state update: commit the experience to memory.
            emotion = max(-1.0, min(1.0, (chosen["poi"]["rating"] - 3.0) / 2.0))
            self._ask(
                "memory",
                {
                    "op": "record",
                    "t_min": arrival,
                    "lon": loc[0],
                    "lat": loc[1],
                    "activity": chosen["poi"]["category"],
                    "conditions": {"poi": chosen["poi"]["id"], "block": block.name},
                    "emotion": emotion,
                },
            )

        # Return home and close the day.
        if loc != home:
            route_payload, _, ok = self._ask(
                "spatial",
                {
                    "op": "route_plan",
                    "origin": list(loc),
                    "destination": list(home),
                    "modes": self.persona.allowed_modes(),
                },
            )
            travel = int(math.ceil(route_payload["route"]["duration_min"] - 1e-9)) if ok else 30
            mode = "walk"
            if ok and route_payload["route"]["legs"]:
                legs = route_payload["route"]["legs"]
                mode = max(legs, key=lambda l: (l["duration_min"], l["mode"]))["mode"]
            if travel > 0:
                records.append(ActivityRecord("travel", current, current + travel, home[0], home[1], mode=mode))
                current += travel
        records.append(
            ActivityRecord(
                "residence", current, self.cfg.day_end_min, home[0], home[1], poi_id=self.persona.home_poi
            )
        )
        return records, decisions

    # -- phase 6: wrap, validate, repair ---------------------------------------

    @staticmethod
    def _wrap_records(records: list) -> list:
        wrapped: list[ActivityRecord] = []
        for rec in records:
            if rec.end <= DAY_WRAP_MIN:
                wrapped.append(rec)
            elif rec.start >= DAY_WRAP_MIN:
                wrapped.append(
                    ActivityRecord(
                        rec.category,
                        rec.start - DAY_WRAP_MIN,
                        rec.end - DAY_WRAP_MIN,
                        rec.lon,
                        rec.lat,
                        rec.poi_id,
                        rec.mode,
                        rec.companions,
                    )
                )
            else:
                wrapped.append(
                    ActivityRecord(rec.category, rec.start, DAY_WRAP_MIN, rec.lon, rec.lat, rec.poi_id, rec.mode, rec.companions)
                )
                wrapped.append(
                    ActivityRecord(rec.category, 0, rec.end - DAY_WRAP_MIN, rec.lon, rec.lat, rec.poi_id, rec.mode, rec.companions)
                )
        wrapped.sort(key=lambda r: (r.start, r.end))
        merged: list[ActivityRecord] = []
        for rec in wrapped:
            if (
                merged
                and merged[-1].category == rec.category
                and merged[-1].poi_id == rec.poi_id
                and merged[-1].end == rec.start
                and (merged[-1].lon, merged[-1].lat) == (rec.lon, rec.lat)
            ):
                merged[-1].end = rec.end
            else:
                merged.append(rec)
        return merged

    def _repair(self, chain: ActivityChain, report: ValidationReport) -> ActivityChain:
        records = chain.records
        drop: set = set()
        for violation in report.violations:
            if violation.kind == "overlap":
                i, j = violation.records
                records[i].end = records[j].start
                if records[i].end <= records[i].start:
                    drop.add(i)
            elif violation.kind == "hours":
                (i,) = violation.records
                rec = records[i]
                poi = self.services.index.by_id.get(rec.poi_id or "")
                if poi is None:
                    drop.add(i)
                else:
                    rec.start = max(rec.start, poi.open_min)
                    rec.end = min(rec.end, poi.close_min)
                    if rec.end - rec.start < 1:
                        drop.add(i)
            elif violation.kind in ("travel", "category", "ordering"):
                idx = violation.records[-1]
                if 0 < idx < len(records) - 1:
                    drop.add(idx)
        if drop:
            chain.records = [r for i, r in enumerate(records) if i not in drop]
        return chain

    def run_day(self) -> DayResult:
        # Phase 1: persona configuration and contextual initialization.
        self.session.context["now_min"] = self.now
        self._ask(
            "environment",
            {
                "op": "perceive",
                "mode": "realtime",
                "t_min": self.now,
                "lon": self.persona.home[0],
                "lat": self.persona.home[1],
            },
        )
        # Phase 2: daily structure planning (coarse).
        blocks = self._plan_blocks()
        # Phases 3-5: detail specification, route optimization, state updates.
        records, decisions = self._run_blocks(blocks)
        chain = ActivityChain(
            persona_id=self.persona.id,
            date=self.date,
            home=self.persona.home,
            records=self._wrap_records(records),
            decisions=[d.to_dict() for d in decisions],
            meta={"occupation": self.persona.occupation, "notes": list(self.notes)},
        )
        # Phase 6: trajectory validation and refinement.
        report = validate_chain(chain, self.services)
        repairs = 0
        while not report.ok and repairs < self.cfg.max_repairs:
            chain = self._repair(chain, report)
            report = validate_chain(chain, self.services)
            repairs += 1
        return DayResult(
            chain=chain,
            validation=report,
            notes=list(self.notes),
            repairs=repairs,
            unrepaired=not report.ok,
        )


class _NoOption(Exception):
    def __init__(self, stages: list):
        super().__init__("no feasible option")
        self.stages = stages


def run_day(
    persona: Persona,
    services: WorldServices,
    seed: int = 0,
    date: str = "day-000",
    reasoner_config: Optional[ReasonerConfig] = None,
    transport=None,
    memory_store: Optional[MemoryStore] = None,
) -> DayResult:
    """Generate one persona-day activity chain."""
    reasoner = build_reasoner(reasoner_config, transport=transport) if reasoner_config else HeuristicReasoner(seed)
    agent = DayAgent(persona, services, reasoner=reasoner, seed=seed, date=date, memory_store=memory_store)
    return agent.run_day()


def decide(
    stage_inputs: dict,
    persona: Persona,
    services: WorldServices,
    reasoner=None,
    seed: int = 0,
) -> Decision:
    """Run one five-stage decision outside a full day (testing surface).

    stage_inputs carries now_min, location (lon, lat), the block spec
    (name/category/start/end/anchor_poi), and optionally remaining blocks.
    """
    agent = DayAgent(persona, services, reasoner=reasoner, seed=seed)
    block = Block(
        name=stage_inputs.get("name", "adhoc"),
        category=stage_inputs["category"],
        start=int(stage_inputs["start"]),
        end=int(stage_inputs["end"]),
        anchor_poi=stage_inputs.get("anchor_poi"),
    )
    agent.now = int(stage_inputs["now_min"])
    try:
        return agent.decide(
            block,
            current=int(stage_inputs["now_min"]),
            loc=tuple(stage_inputs["location"]),
            loc_name=stage_inputs.get("location_name", "start"),
            remaining=[
                Block(b["name"], b["category"], b["start"], b["end"], b.get("anchor_poi"))
                for b in stage_inputs.get("remaining", [])
            ],
        )
    except _NoOption as exc:
        err = NoFeasibleOptionError("no candidate survived screening; fall back to stay-in-place")
        err.stages = exc.stages
        raise err from exc
