"""Timeline maintenance, conflict detection, and priority-driven scheduling.

Time is integer minutes since day start; intervals are half-open
[start, start + duration). The slot search walks candidate starts forward,
stepping by the configured grid on clear probes and jumping to the
blocker's end on conflict, keeping the first maximum-score slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from daychain.protocol import Session, ToolError, ToolService

TIME_STEP_MIN = 30
BUFFER_FACTOR = 1.2


class InvalidConstraintsError(ValueError):
    """start_bound must be strictly less than end_bound."""


@dataclass(frozen=True)
class TimelineEntry:
    start: int
    duration: int
    kind: str = ""

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class Task:
    priority: float
    deadline: int
    estimate: int
    kind: str = ""


@dataclass
class ScheduleConstraints:
    start_bound: int
    end_bound: int
    time_pref: Callable[[int], float] = lambda start: 0.0
    time_step: int = TIME_STEP_MIN
    buffer_factor: float = BUFFER_FACTOR

    def validate(self) -> None:
        if self.start_bound >= self.end_bound:
            raise InvalidConstraintsError(
                f"start_bound {self.start_bound} must be < end_bound {self.end_bound}"
            )
        if self.time_step <= 0:
            raise InvalidConstraintsError("time_step must be positive")


@dataclass
class Placement:
    start: int
    end: int
    task: Task
    score: float


@dataclass
class ScheduleResult:
    schedule: list[Placement]
    timeline: list[TimelineEntry]
    utilization: float
    unscheduled_count: int


def buffered_duration(estimate: int, buffer_factor: float = BUFFER_FACTOR) -> int:
    """Estimate times the buffer factor, rounded up to whole minutes."""
    # round() guards against float artifacts like 50*1.2 = 60.000000000000014
    return int(math.ceil(round(estimate * buffer_factor, 9)))


def find_conflicts(timeline: Sequence[TimelineEntry], candidate: TimelineEntry) -> list[TimelineEntry]:
    """Entries overlapping the candidate under strict half-open arithmetic."""
    if candidate.duration <= 0:
        raise ValueError("candidate duration must be positive")
    return [e for e in timeline if candidate.start < e.end and candidate.end > e.start]


def urgency(deadline: int, start: int, now: int) -> float:
    return max(0.0, 1.0 - (deadline - start) / (deadline - now))


def schedule_tasks(
    events: Sequence[TimelineEntry],
    tasks: Sequence[Task],
    constraints: ScheduleConstraints,
    now: Optional[int] = None,
) -> ScheduleResult:
    """Place tasks one by one, highest priority-times-urgency first.

    Each task occupies the first feasible probed slot maximizing
    priority + time_pref(start) + urgency(start); its scheduled duration is
    the buffered estimate. Unplaceable tasks are counted, not errors.
    """
    constraints.validate()
    if now is None:
        now = constraints.start_bound
    for task in tasks:
        if task.deadline <= now:
            raise ValueError(f"task deadline {task.deadline} must be after now={now}")
        if task.estimate <= 0:
            raise ValueError("task estimate must be positive")

    timeline = sorted(events, key=lambda e: (e.start, e.end))
    order = sorted(
        range(len(tasks)),
        key=lambda i: -(tasks[i].priority / (tasks[i].deadline - now)),
    )  # stable: equal keys keep submission order

    schedule: list[Placement] = []
    for idx in order:
        task = tasks[idx]
        duration = buffered_duration(task.estimate, constraints.buffer_factor)
        best: Optional[Placement] = None
        current = constraints.start_bound
        while current + duration <= constraints.end_bound:
            slot_end = current + duration
            blocker = None
            for existing in timeline:
                if current < existing.end and slot_end > existing.start:
                    blocker = existing
                    break
            if blocker is not None:
                current = blocker.end
                continue
            score = task.priority + constraints.time_pref(current) + urgency(task.deadline, current, now)
            if best is None or score > best.score:
                best = Placement(start=current, end=slot_end, task=task, score=score)
            current += constraints.time_step
        if best is not None:
            timeline.append(TimelineEntry(start=best.start, duration=duration, kind=task.kind))
            timeline.sort(key=lambda e: (e.start, e.end))
            schedule.append(best)

    return ScheduleResult(
        schedule=schedule,
        timeline=timeline,
        utilization=utilization(timeline, constraints),
        unscheduled_count=len(tasks) - len(schedule),
    )


def utilization(timeline: Sequence[TimelineEntry], constraints: ScheduleConstraints) -> float:
    """Fraction of the horizon occupied by timeline entries."""
    constraints.validate()
    total = sum(e.duration for e in timeline)
    return total / (constraints.end_bound - constraints.start_bound)


def _entry_from_doc(doc: dict) -> TimelineEntry:
    return TimelineEntry(start=int(doc["start"]), duration=int(doc["duration"]), kind=str(doc.get("kind", "")))


def _windows_pref(windows: Sequence[Sequence[float]]) -> Callable[[int], float]:
    def pref(start: int) -> float:
        best = 0.0
        for lo, hi, value in windows:
            if lo <= start < hi:
                best = max(best, float(value))
        return best

    return pref


class TemporalService(ToolService):
    """Protocol tool exposing the timeline operations.

    The simulated clock lives in the session context under ``now_min`` so
    the service itself stays stateless and safe across sessions.
    """

    name = "temporal"

    def __init__(self, default_now: int = 300):
        self.default_now = default_now

    def handle(self, payload: dict, session: Session) -> dict:
        op = payload.get("op")
        if op == "now":
            now = int(session.context.get("now_min", self.default_now))
            return {"now_min": now, "clock": "minutes-since-day-start"}
        if op == "find_conflicts":
            timeline = [_entry_from_doc(d) for d in payload.get("timeline", [])]
            cand = _entry_from_doc(payload["candidate"])
            hits = find_conflicts(timeline, cand)
            return {"conflicts": [{"start": e.start, "duration": e.duration, "kind": e.kind} for e in hits]}
        if op == "schedule":
            cdoc = payload.get("constraints", {})
            constraints = ScheduleConstraints(
                start_bound=int(cdoc["start_bound"]),
                end_bound=int(cdoc["end_bound"]),
                time_pref=_windows_pref(cdoc.get("preferred_windows", [])),
                time_step=int(cdoc.get("time_step", TIME_STEP_MIN)),
                buffer_factor=float(cdoc.get("buffer_factor", BUFFER_FACTOR)),
            )
            events = [_entry_from_doc(d) for d in payload.get("events", [])]
            tasks = [
                Task(
                    priority=float(t["priority"]),
                    deadline=int(t["deadline"]),
                    estimate=int(t["estimate"]),
                    kind=str(t.get("kind", "")),
                )
                for t in payload.get("tasks", [])
            ]
            try:
                result = schedule_tasks(events, tasks, constraints, now=payload.get("now"))
            except (InvalidConstraintsError, ValueError) as exc:
                raise ToolError("invalid-constraints", str(exc)) from exc
            return {
                "schedule": [
                    {"start": p.start, "end": p.end, "kind": p.task.kind, "score": p.score}
                    for p in result.schedule
                ],
                "timeline": [
                    {"start": e.start, "duration": e.duration, "kind": e.kind} for e in result.timeline
                ],
                "utilization": result.utilization,
                "unscheduled_count": result.unscheduled_count,
            }
        if op == "utilization":
            cdoc = payload.get("constraints", {})
            constraints = ScheduleConstraints(
                start_bound=int(cdoc["start_bound"]), end_bound=int(cdoc["end_bound"])
            )
            timeline = [_entry_from_doc(d) for d in payload.get("timeline", [])]
            try:
                return {"utilization": utilization(timeline, constraints)}
            except InvalidConstraintsError as exc:
                raise ToolError("invalid-constraints", str(exc)) from exc
        raise ToolError("unknown-op", f"temporal tool has no op {op!r}")
