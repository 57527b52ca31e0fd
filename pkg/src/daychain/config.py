"""Dataclass configuration tree holding every tunable weight and threshold.

One JSON document configures the whole engine; every field here is
overridable from file via ``EngineConfig.from_dict`` / ``load_config``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field


@dataclass
class ProtocolConfig:
    max_payload_bytes: int = 1 << 20  # overridable via DAYCHAIN_MAX_PAYLOAD_BYTES


@dataclass
class TemporalConfig:
    time_step_min: int = 30
    buffer_factor: float = 1.2
    horizon_min: int = 1740  # 05:00 next day on the wrapped clock


@dataclass
class SpatialConfig:
    # POI search score mix: semantic / preference / distance-decay.
    alpha_semantic: float = 0.5
    beta_preference: float = 0.3
    gamma_distance: float = 0.2
    semantic_threshold: float = 0.25
    decay_radius_fraction: float = 1.0 / 3.0  # d0 = radius * fraction
    grid_cell_deg: float = 0.005
    top_k: int = 10


@dataclass
class RoutingConfig:
    # m/min speeds and per-km money cost by mode; transit adds a flat fare.
    mode_speed_m_per_min: dict = field(
        default_factory=lambda: {"walk": 80.0, "cycle": 250.0, "drive": 420.0, "transit": 500.0}
    )
    mode_cost_per_km: dict = field(
        default_factory=lambda: {"walk": 0.0, "cycle": 0.0, "drive": 1.0, "transit": 0.3}
    )
    transit_flat_fare: float = 3.0
    transfer_penalty_min: float = 2.0
    weight_time: float = 1.0
    weight_distance: float = 0.0
    weight_money: float = 0.5


@dataclass
class TrafficConfig:
    free_flow_floor: float = 0.05  # epsilon in the congestion relation
    jam_density: float = 1.0


@dataclass
class EnvironmentConfig:
    confidence_decay_per_hour: float = 0.1
    # Scale relevance per activity category; unknown/untyped queries fall
    # back to uniform weights.
    scale_relevance: dict = field(
        default_factory=lambda: {
            "default": {"macro": 1.0, "micro": 1.0, "venue": 1.0},
            "tourism": {"macro": 1.5, "micro": 1.0, "venue": 0.5},
            "sports & leisure": {"macro": 1.5, "micro": 1.0, "venue": 0.5},
            "shopping": {"macro": 0.5, "micro": 1.5, "venue": 1.0},
            "dining": {"macro": 0.5, "micro": 1.0, "venue": 1.5},
        }
    )


@dataclass
class MemoryConfig:
    # Relevance component mix (cosine, temporal, spatial, semantic).
    alpha_cos: float = 0.25
    alpha_time: float = 0.25
    alpha_space: float = 0.25
    alpha_semantic: float = 0.25
    period_min: float = 1440.0
    # Temporal relevance halves every 6h: lambda_t = ln(2)/360 per minute.
    lambda_time_per_min: float = 0.0019254170710041687
    spatial_bandwidth_m: float = 500.0
    transfer_threshold: float = 0.5
    forget_threshold: float = 0.05
    decay_per_min: float = 0.001
    importance_frequency_weight: float = 0.4
    importance_recency_weight: float = 0.4
    importance_salience_weight: float = 0.2
    consistency_threshold: float = 0.3
    attention_temperature: float = 2.0
    time_bucket_min: int = 60
    duplicate_feature_eps: float = 1e-6


@dataclass
class AgentConfig:
    reasoning_temperature: float = 0.7
    output_temperature: float = 0.1
    max_repairs: int = 3
    day_start_min: int = 300  # 05:00
    day_end_min: int = 1740  # 05:00 next day
    # Stage-4 factor weights (time cost, distance, value, preference, habit).
    factor_weights: dict = field(
        default_factory=lambda: {
            "time_cost": 1.0,
            "distance": 1.0,
            "value": 1.0,
            "preference": 1.0,
            "habit": 1.0,
        }
    )
    habit_strength: float = 0.5  # per-memory factor in the habit bias
    candidate_pool: int = 8
    search_radius_m: float = 2500.0
    llm_max_retries: int = 2
    llm_token_budget: int = 200_000


@dataclass
class EvaluationConfig:
    kde_grid: int = 100
    kde_margin_frac: float = 0.05
    time_segments: int = 6
    subjective_weight: float = 0.5  # alpha mixing subjective and objective
    k_min: int = 2
    k_max: int = 15
    mds_max_dim: int = 10


@dataclass
class PipelineConfig:
    workers: int = 1
    samples: int = 10
    seed: int = 0
    per_sample_timeout_s: float = 120.0


@dataclass
class EngineConfig:
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    routing: RoutingConfig = field(default_factory=RoutingConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        cfg = cls()
        for section_name, values in data.items():
            if not hasattr(cfg, section_name):
                raise KeyError(f"unknown config section: {section_name}")
            section = getattr(cfg, section_name)
            for key, value in values.items():
                if not hasattr(section, key):
                    raise KeyError(f"unknown config key: {section_name}.{key}")
                setattr(section, key, value)
        return cfg


def load_config(path: str) -> EngineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return EngineConfig.from_dict(json.load(fh))


def save_config(cfg: EngineConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
