"""Persona profiles that seed a generation run."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

AGE_BANDS = ("18-25", "26-40", "41-60", "60+")
OCCUPATIONS = ("office_worker", "service_worker", "student", "retiree", "homemaker", "visitor")
INCOME_TIERS = ("low", "mid", "high")
HOUSEHOLD_ROLES = ("single", "partner", "parent", "dependent")

WORKING_OCCUPATIONS = {"office_worker", "service_worker", "student"}

# Baseline preference weights per occupation; per-persona jitter is applied
# on top during synthesis. Categories absent here default to 0.1.
PREFERENCE_TEMPLATES = {
    "office_worker": {"dining": 0.8, "shopping": 0.5, "sports & leisure": 0.5, "life services": 0.3, "tourism": 0.2},
    "service_worker": {"dining": 0.7, "shopping": 0.5, "sports & leisure": 0.4, "life services": 0.4, "tourism": 0.2},
    "student": {"dining": 0.7, "sports & leisure": 0.7, "shopping": 0.4, "tourism": 0.4, "life services": 0.2},
    "retiree": {"life services": 0.6, "sports & leisure": 0.6, "shopping": 0.5, "dining": 0.5, "tourism": 0.4},
    "homemaker": {"shopping": 0.8, "life services": 0.6, "dining": 0.5, "sports & leisure": 0.4, "tourism": 0.3},
    "visitor": {"tourism": 0.9, "dining": 0.7, "shopping": 0.6, "sports & leisure": 0.3, "life services": 0.1},
}

MODE_TEMPLATES = {
    "18-25": {"walk": 0.8, "cycle": 0.7, "transit": 0.8, "drive": 0.2},
    "26-40": {"walk": 0.6, "cycle": 0.4, "transit": 0.7, "drive": 0.6},
    "41-60": {"walk": 0.5, "cycle": 0.2, "transit": 0.6, "drive": 0.8},
    "60+": {"walk": 0.8, "cycle": 0.2, "transit": 0.7, "drive": 0.3},
}


@dataclass
class Persona:
    id: str
    age_band: str
    occupation: str
    household_role: str
    income_tier: str
    home_poi: str
    home: tuple  # (lon, lat)
    work_poi: Optional[str] = None
    work: Optional[tuple] = None
    preferences: dict = field(default_factory=dict)
    mode_propensities: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(w < 0 for w in self.preferences.values()):
            raise ValueError("preference weights must be nonnegative")

    @property
    def works(self) -> bool:
        return self.occupation in WORKING_OCCUPATIONS and self.work_poi is not None

    def allowed_modes(self) -> list:
        modes = [m for m, p in sorted(self.mode_propensities.items()) if p > 0]
        if "walk" not in modes:
            modes.append("walk")
        return sorted(modes)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "age_band": self.age_band,
            "occupation": self.occupation,
            "household_role": self.household_role,
            "income_tier": self.income_tier,
            "home_poi": self.home_poi,
            "home": list(self.home),
            "work_poi": self.work_poi,
            "work": list(self.work) if self.work else None,
            "preferences": self.preferences,
            "mode_propensities": self.mode_propensities,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Persona":
        return cls(
            id=doc["id"],
            age_band=doc["age_band"],
            occupation=doc["occupation"],
            household_role=doc.get("household_role", "single"),
            income_tier=doc.get("income_tier", "mid"),
            home_poi=doc["home_poi"],
            home=tuple(doc["home"]),
            work_poi=doc.get("work_poi"),
            work=tuple(doc["work"]) if doc.get("work") else None,
            preferences=dict(doc.get("preferences", {})),
            mode_propensities=dict(doc.get("mode_propensities", {})),
        )
