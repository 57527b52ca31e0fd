import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daychain.config import EnvironmentConfig
from daychain.environment import (
    EnvironmentService,
    MissingDataError,
    Scenario,
    UnknownModeError,
    aggregate_multiscale,
)
from daychain.protocol import Session, ToolError


def seeded_service():
    scenario = Scenario(
        {
            "zones": [{"name": "center", "lon": 0.0, "lat": 0.0, "radius_m": 500}],
            "historical": [
                {
                    "t_min": 480,
                    "zone": "center",
                    "weather": {"condition": "rain", "temperature": 16.0},
                    "density": 0.42,
                    "events": [{"name": "parade"}],
                }
            ],
        }
    )
    return EnvironmentService(scenario)


def test_historical_lookup_verbatim():
    svc = seeded_service()
    state = svc.perceive(480, 0.0, 0.0, "historical")
    assert state.weather == {"condition": "rain", "temperature": 16.0}
    assert state.density == 0.42
    assert state.events == [{"name": "parade"}]
    assert state.confidence == 1.0


def test_historical_miss():
    svc = seeded_service()
    with pytest.raises(MissingDataError):
        svc.perceive(481, 0.0, 0.0, "historical")


def test_historical_pure_repeated_queries():
    svc = seeded_service()
    a = svc.perceive(480, 0.0, 0.0, "historical").to_dict()
    b = svc.perceive(480, 0.0, 0.0, "historical").to_dict()
    assert a == b


def test_realtime_deterministic_and_scripted():
    svc = seeded_service()
    a = svc.perceive(600, 0.0, 0.0, "realtime")
    b = svc.perceive(600, 0.0, 0.0, "realtime")
    assert a.to_dict() == b.to_dict()
    assert a.weather["condition"] == svc.scenario.weather_at(600)["condition"]
    assert a.confidence == 1.0


def test_predictive_at_zero_equals_realtime_with_full_confidence():
    svc = seeded_service()
    rt = svc.perceive(700, 0.0, 0.0, "realtime")
    pred = svc.perceive(700, 0.0, 0.0, "predictive", now_min=700)
    assert pred.confidence == pytest.approx(1.0)
    assert pred.weather == rt.weather
    assert pred.density == pytest.approx(rt.density)


def test_confidence_decay_values():
    svc = seeded_service()
    # one decay time constant: e^-1
    one_over_lambda_h = 1.0 / svc.config.confidence_decay_per_hour
    state = svc.predict_environment(600 + one_over_lambda_h * 60, 600, 0.0, 0.0)
    assert state.confidence == pytest.approx(math.exp(-1), abs=1e-12)
    # lambda=0.1/h over 5h -> 0.6065
    state = svc.predict_environment(600 + 300, 600, 0.0, 0.0)
    assert state.confidence == pytest.approx(0.6065, abs=5e-5)


def test_past_target_time_rejected():
    svc = seeded_service()
    with pytest.raises(ValueError):
        svc.predict_environment(500, 600, 0.0, 0.0)


def test_confidence_strictly_decreasing():
    svc = seeded_service()
    confidences = [svc.predict_environment(600 + dt, 600, 0.0, 0.0).confidence for dt in (0, 30, 60, 240, 720)]
    assert all(a > b for a, b in zip(confidences, confidences[1:]))


def test_unknown_mode():
    with pytest.raises(UnknownModeError):
        seeded_service().perceive(600, 0.0, 0.0, "psychic")


def test_aggregate_single_scale():
    weights = aggregate_multiscale({"macro": {"weather": {}}})
    assert weights == {"macro": 1.0}


def test_aggregate_equal_three_scales():
    weights = aggregate_multiscale({"macro": {}, "micro": {}, "venue": {}})
    for w in weights.values():
        assert w == pytest.approx(1 / 3)


def test_aggregate_weighted_normalization():
    cfg = EnvironmentConfig(scale_relevance={"default": {"macro": 2.0, "micro": 1.0, "venue": 1.0}})
    weights = aggregate_multiscale({"macro": {}, "micro": {}, "venue": {}}, config=cfg)
    assert weights["macro"] == pytest.approx(0.5)
    assert weights["micro"] == pytest.approx(0.25)
    assert weights["venue"] == pytest.approx(0.25)


def test_aggregate_empty_input():
    with pytest.raises(ValueError):
        aggregate_multiscale({})


@given(st.sampled_from([None, "dining", "tourism", "shopping", "sports & leisure", "employment"]))
@settings(max_examples=30, deadline=None)
def test_scale_weights_always_sum_to_one(category):
    svc = seeded_service()
    state = svc.perceive(660, 0.0, 0.0, "realtime", category=category)
    assert sum(state.scale_weights.values()) == pytest.approx(1.0, abs=1e-9)


def test_service_protocol_adapter():
    svc = seeded_service()
    session = Session("s")
    out = svc.handle({"op": "perceive", "mode": "realtime", "t_min": 600, "lon": 0.0, "lat": 0.0}, session)
    assert out["confidence"] == 1.0
    with pytest.raises(ToolError) as err:
        svc.handle({"op": "perceive", "mode": "psychic", "t_min": 600, "lon": 0, "lat": 0}, session)
    assert err.value.code == "unknown-mode"
    with pytest.raises(ToolError) as err:
        svc.handle({"op": "perceive", "mode": "historical", "t_min": 5, "lon": 0, "lat": 0}, session)
    assert err.value.code == "missing-data"
