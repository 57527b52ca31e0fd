import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daychain.protocol import Session, ToolError
from daychain.temporal import (
    InvalidConstraintsError,
    ScheduleConstraints,
    Task,
    TemporalService,
    TimelineEntry,
    buffered_duration,
    find_conflicts,
    schedule_tasks,
    utilization,
)
from oracles import best_slot_oracle, schedule_oracle


def entries(*spans):
    return [TimelineEntry(start=s, duration=d, kind=k) for s, d, k in spans]


def test_find_conflicts_empty_timeline():
    assert find_conflicts([], TimelineEntry(10, 20)) == []


def test_find_conflicts_half_open_touch_is_clear():
    timeline = entries((60, 60, "a"))
    assert find_conflicts(timeline, TimelineEntry(120, 30)) == []
    assert find_conflicts(timeline, TimelineEntry(30, 30)) == []


def test_find_conflicts_containment():
    timeline = entries((60, 60, "a"))
    hits = find_conflicts(timeline, TimelineEntry(90, 10))
    assert len(hits) == 1 and hits[0].start == 60


def test_find_conflicts_brute_force_all_minute_pairs():
    # Compare interval arithmetic to set-of-minutes overlap on a 0-240 line.
    timeline = entries((30, 45, "a"), (100, 20, "b"), (180, 60, "c"))
    occupied = [set(range(e.start, e.end)) for e in timeline]
    for start in range(0, 230, 7):
        for dur in (1, 5, 30):
            cand = TimelineEntry(start, dur)
            expected = [timeline[i] for i, mins in enumerate(occupied) if mins & set(range(start, start + dur))]
            assert find_conflicts(timeline, cand) == expected


def test_buffered_duration_examples():
    assert buffered_duration(50) == 60
    assert buffered_duration(45) == 54
    assert buffered_duration(47) == 57  # ceil over fractional buffer


def test_single_task_empty_timeline():
    constraints = ScheduleConstraints(0, 480, time_pref=lambda s: 0.0)
    result = schedule_tasks([], [Task(priority=1.0, deadline=400, estimate=50)], constraints)
    assert len(result.schedule) == 1
    placement = result.schedule[0]
    assert placement.end - placement.start == 60
    # urgency grows with start, so the last feasible probe wins when prefs are flat
    oracle = best_slot_oracle([], {"priority": 1.0, "deadline": 400, "estimate": 50}, 0, 480, lambda s: 0.0, 0)
    assert (placement.start, placement.end) == (oracle["start"], oracle["end"])
    assert placement.score == pytest.approx(oracle["score"])


def test_fully_booked_horizon():
    constraints = ScheduleConstraints(0, 480)
    events = entries((0, 480, "busy"))
    result = schedule_tasks(events, [Task(1.0, 400, 30), Task(2.0, 450, 40)], constraints)
    assert result.schedule == []
    assert result.unscheduled_count == 2
    assert result.utilization == 1.0


def test_invalid_constraints():
    with pytest.raises(InvalidConstraintsError):
        schedule_tasks([], [], ScheduleConstraints(480, 480))


def test_three_tasks_two_events_matches_oracle():
    def pref(start):
        return 0.5 if 120 <= start < 300 else 0.0

    events = entries((60, 45, "e1"), (300, 50, "e2"))
    tasks = [Task(2.0, 470, 40, "t0"), Task(1.0, 460, 25, "t1"), Task(2.0, 400, 30, "t2")]
    constraints = ScheduleConstraints(0, 480, time_pref=pref)
    result = schedule_tasks(events, tasks, constraints)

    oracle_tasks = [{"priority": t.priority, "deadline": t.deadline, "estimate": t.estimate} for t in tasks]
    oracle_events = [{"start": e.start, "duration": e.duration} for e in events]
    placements, util, unscheduled = schedule_oracle(oracle_events, oracle_tasks, 0, 480, pref, 0)
    assert len(result.schedule) == len(placements)
    for mine, ref in zip(result.schedule, placements):
        assert (mine.start, mine.end) == (ref["start"], ref["end"])
        assert mine.score == pytest.approx(ref["score"])
    assert result.utilization == pytest.approx(util)
    assert result.unscheduled_count == unscheduled


def _random_instance(rng):
    horizon = rng.choice([240, 360, 480])
    events = []
    cursor = 0
    for _ in range(rng.randrange(0, 4)):
        start = cursor + rng.randrange(0, 80)
        duration = rng.randrange(10, 90)
        if start + duration > horizon:
            break
        events.append(TimelineEntry(start, duration, "e"))
        cursor = start + duration
    now = 0
    tasks = [
        Task(
            priority=round(rng.uniform(0.1, 3.0), 3),
            deadline=rng.randrange(60, horizon + 120),
            estimate=rng.randrange(10, 80),
            kind=f"t{i}",
        )
        for i in range(rng.randrange(1, 5))
    ]
    windows = []
    for _ in range(rng.randrange(0, 3)):
        lo = rng.randrange(0, horizon - 30)
        windows.append((lo, lo + rng.randrange(30, 120), round(rng.uniform(0.1, 1.0), 2)))

    def pref(start):
        return max((v for lo, hi, v in windows if lo <= start < hi), default=0.0)

    return events, tasks, ScheduleConstraints(now, horizon, time_pref=pref), pref


def test_scheduler_matches_oracle_on_200_random_instances():
    rng = random.Random(42)
    checked = 0
    for _ in range(200):
        events, tasks, constraints, pref = _random_instance(rng)
        result = schedule_tasks(events, tasks, constraints)
        placements, util, unscheduled = schedule_oracle(
            [{"start": e.start, "duration": e.duration} for e in events],
            [{"priority": t.priority, "deadline": t.deadline, "estimate": t.estimate} for t in tasks],
            constraints.start_bound,
            constraints.end_bound,
            pref,
            constraints.start_bound,
        )
        assert len(result.schedule) == len(placements)
        for mine, ref in zip(result.schedule, placements):
            assert (mine.start, mine.end) == (ref["start"], ref["end"])
            assert mine.score == pytest.approx(ref["score"], abs=1e-9)
        assert result.unscheduled_count == unscheduled
        assert result.utilization == pytest.approx(util)
        checked += 1
    assert checked == 200


def test_post_schedule_timeline_never_overlaps():
    rng = random.Random(7)
    for _ in range(50):
        events, tasks, constraints, _ = _random_instance(rng)
        result = schedule_tasks(events, tasks, constraints)
        timeline = sorted(result.timeline, key=lambda e: e.start)
        for a, b in zip(timeline, timeline[1:]):
            assert a.end <= b.start
        assert result.unscheduled_count + len(result.schedule) == len(tasks)


def test_single_task_chosen_slot_beats_every_grid_slot():
    # With grid-aligned events every probe lies on the absolute 30-minute
    # grid, so the chosen slot must dominate all feasible grid starts.
    events = entries((60, 60, "a"), (240, 30, "b"))
    task = Task(priority=1.5, deadline=450, estimate=40)
    pref = lambda s: 0.7 if 120 <= s < 210 else 0.0
    constraints = ScheduleConstraints(0, 480, time_pref=pref)
    result = schedule_tasks(events, [task], constraints)
    chosen = result.schedule[0]
    duration = buffered_duration(task.estimate)
    for start in range(0, 480 - duration + 1, 30):
        if find_conflicts(events, TimelineEntry(start, duration)):
            continue
        urgency = max(0.0, 1.0 - (task.deadline - start) / task.deadline)
        score = task.priority + pref(start) + urgency
        assert chosen.score >= score - 1e-12


def test_scheduling_deterministic():
    rng = random.Random(3)
    events, tasks, constraints, _ = _random_instance(rng)
    r1 = schedule_tasks(events, tasks, constraints)
    r2 = schedule_tasks(events, tasks, constraints)
    assert [(p.start, p.end) for p in r1.schedule] == [(p.start, p.end) for p in r2.schedule]


def test_utilization_examples():
    constraints = ScheduleConstraints(0, 480)
    assert utilization([], constraints) == 0.0
    assert utilization(entries((0, 480, "x")), constraints) == 1.0
    assert utilization(entries((10, 60, "a"), (100, 30, "b")), constraints) == pytest.approx(0.1875)


@given(st.integers(0, 400), st.integers(1, 200))
@settings(max_examples=80, deadline=None)
def test_utilization_matches_sum(start, dur):
    constraints = ScheduleConstraints(0, 600)
    assert utilization(entries((start, dur, "x")), constraints) == pytest.approx(dur / 600)


def test_temporal_service_ops():
    svc = TemporalService(default_now=300)
    session = Session("s")
    assert svc.handle({"op": "now"}, session)["now_min"] == 300
    session.context["now_min"] = 512
    assert svc.handle({"op": "now"}, session)["now_min"] == 512

    out = svc.handle(
        {
            "op": "find_conflicts",
            "timeline": [{"start": 60, "duration": 60, "kind": "a"}],
            "candidate": {"start": 90, "duration": 10},
        },
        session,
    )
    assert len(out["conflicts"]) == 1

    out = svc.handle(
        {
            "op": "schedule",
            "events": [],
            "tasks": [{"priority": 1, "deadline": 400, "estimate": 50, "kind": "t"}],
            "constraints": {"start_bound": 0, "end_bound": 480, "preferred_windows": [[90, 150, 1.0]]},
        },
        session,
    )
    assert out["unscheduled_count"] == 0
    assert len(out["schedule"]) == 1

    with pytest.raises(ToolError):
        svc.handle({"op": "utilization", "timeline": [], "constraints": {"start_bound": 5, "end_bound": 5}}, session)
    with pytest.raises(ToolError):
        svc.handle({"op": "wat"}, session)
