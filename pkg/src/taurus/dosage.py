"""Dentition-based age estimation, weight groups, and mg/kg dose planning.

The drug registry is configuration, not clinical guidance: the bundled
sample registry exists so the pipeline runs end to end and is marked NOT
FOR CLINICAL USE. Doses are computed as rate (mg/kg) times the weight
group's representative mass; pounds never leave this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib.resources import files
from pathlib import Path
from typing import Sequence

from .errors import (
    ContraindicationError,
    ManualWeighingRequired,
    NoRuleError,
    ValidationError,
)
from .taxonomy import CANONICAL_LABELS, TaskId

__all__ = [
    "AgeBand",
    "DentitionObservation",
    "age_from_dentition",
    "WeightGroupId",
    "WeightGroup",
    "WEIGHT_GROUPS",
    "weight_group_for_label",
    "weight_kg",
    "LBS_TO_KG",
    "DrugRule",
    "DosePlan",
    "load_registry",
    "parse_registry",
    "recommend_dose",
    "sample_registry_path",
]

# Exact pound -> kilogram definition; the only place it may appear.
LBS_TO_KG = 0.45359237


class AgeBand(str, Enum):
    """Dentition age bands, youngest to oldest."""

    UNDER_2 = "under_2"
    Y2 = "y2"
    Y3 = "y3"
    Y4 = "y4"
    Y5 = "y5"
    OVER_6 = "over_6"
    ABOUT_12 = "about_12"

    def __str__(self) -> str:
        return self.value

    @property
    def display(self) -> str:
        return _AGE_DISPLAY[self]

    @property
    def rank(self) -> int:
        return _AGE_ORDER.index(self)


_AGE_ORDER = list(AgeBand)

_AGE_DISPLAY = {
    AgeBand.UNDER_2: "Less than 2 years old",
    AgeBand.Y2: "2 years old",
    AgeBand.Y3: "3 years old",
    AgeBand.Y4: "4 years old",
    AgeBand.Y5: "5 years old",
    AgeBand.OVER_6: "Older than 6 years",
    AgeBand.ABOUT_12: "About 12 years",
}

VALID_INCISOR_COUNTS = (0, 2, 4, 6, 8, 10)

_INCISOR_BANDS = {
    0: AgeBand.UNDER_2,  # no permanent incisors yet: younger than the 2-incisor row
    2: AgeBand.UNDER_2,
    4: AgeBand.Y2,
    6: AgeBand.Y3,
    8: AgeBand.Y4,
    10: AgeBand.Y5,
}


@dataclass(frozen=True)
class DentitionObservation:
    """What the farmer sees in the animal's mouth."""

    permanent_incisors: int
    all_present: bool = False
    extreme_wear_or_missing: bool = False

    def __post_init__(self) -> None:
        if self.permanent_incisors not in VALID_INCISOR_COUNTS:
            raise ValidationError(
                f"permanent_incisors must be one of {VALID_INCISOR_COUNTS}, "
                f"got {self.permanent_incisors}"
            )


def age_from_dentition(obs: DentitionObservation) -> AgeBand:
    """Map a dentition observation to its age band.

    Precedence: extreme wear / missing teeth, then a full mouth, then the
    permanent incisor count.
    """
    if obs.extreme_wear_or_missing:
        return AgeBand.ABOUT_12
    if obs.all_present:
        return AgeBand.OVER_6
    return _INCISOR_BANDS[obs.permanent_incisors]


class WeightGroupId(str, Enum):
    LB_93_177 = "LB_93_177"
    LB_183_278 = "LB_183_278"
    LB_259_548 = "LB_259_548"
    LB_ABOVE_498 = "LB_ABOVE_498"
    UNKNOWN = "Unknown"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class WeightGroup:
    """A classifier weight bracket; representative mass is the midpoint."""

    id: WeightGroupId
    bracket_lbs: tuple[float, float] | None
    representative_lbs: float | None

    def __post_init__(self) -> None:
        if self.id is WeightGroupId.UNKNOWN:
            if self.bracket_lbs is not None or self.representative_lbs is not None:
                raise ValidationError("Unknown weight group carries no bracket")
        else:
            if self.bracket_lbs is None or self.representative_lbs is None:
                raise ValidationError("bracketed weight groups need bounds")
            low, high = self.bracket_lbs
            if abs(self.representative_lbs - (low + high) / 2.0) > 1e-9:
                raise ValidationError("representative_lbs must be the bracket midpoint")


def _group(gid: WeightGroupId, low: float | None, high: float | None) -> WeightGroup:
    if low is None:
        return WeightGroup(id=gid, bracket_lbs=None, representative_lbs=None)
    return WeightGroup(id=gid, bracket_lbs=(low, high), representative_lbs=(low + high) / 2.0)


# The top group's classifier label is open-ended ("above 498") but the
# source bracket runs 498-738 lbs, which fixes its representative mass.
WEIGHT_GROUPS: dict[WeightGroupId, WeightGroup] = {
    WeightGroupId.LB_93_177: _group(WeightGroupId.LB_93_177, 93.0, 177.0),
    WeightGroupId.LB_183_278: _group(WeightGroupId.LB_183_278, 183.0, 278.0),
    WeightGroupId.LB_259_548: _group(WeightGroupId.LB_259_548, 259.0, 548.0),
    WeightGroupId.LB_ABOVE_498: _group(WeightGroupId.LB_ABOVE_498, 498.0, 738.0),
    WeightGroupId.UNKNOWN: _group(WeightGroupId.UNKNOWN, None, None),
}

# Classifier label -> weight group, keyed by the weight model's class names.
_LABEL_TO_GROUP = {
    "93lbs-177lbs_Body": WeightGroupId.LB_93_177,
    "183lbs-278lbs_Body": WeightGroupId.LB_183_278,
    "259lbs-548lbs_Body": WeightGroupId.LB_259_548,
    "Above 498lbs_Body": WeightGroupId.LB_ABOVE_498,
    "Unknown": WeightGroupId.UNKNOWN,
}


def weight_group_for_label(label: str) -> WeightGroup:
    """Resolve a weight-group classifier label or id to its WeightGroup."""
    if label in _LABEL_TO_GROUP:
        return WEIGHT_GROUPS[_LABEL_TO_GROUP[label]]
    try:
        return WEIGHT_GROUPS[WeightGroupId(label)]
    except ValueError:
        raise ValidationError(f"unknown weight group {label!r}") from None


def weight_kg(group: WeightGroup) -> float:
    """Representative mass in kilograms; Unknown must be weighed by hand."""
    if group.id is WeightGroupId.UNKNOWN or group.representative_lbs is None:
        raise ManualWeighingRequired(
            "weight group is Unknown: weigh the animal manually before dosing"
        )
    return group.representative_lbs * LBS_TO_KG


@dataclass(frozen=True)
class DrugRule:
    """One registry entry: what to give for a disease and at what rate."""

    disease: str
    drug: str
    dose_mg_per_kg: float
    route: str
    times_per_day: int
    duration_days: int
    min_age_band: AgeBand | None = None
    notes: str = ""

    def __post_init__(self) -> None:
        if self.dose_mg_per_kg <= 0:
            raise ValidationError(
                f"dose_mg_per_kg must be positive, got {self.dose_mg_per_kg} "
                f"({self.drug} / {self.disease})"
            )
        if self.times_per_day < 1 or self.duration_days < 1:
            raise ValidationError(
                f"schedule must be at least once per day for one day "
                f"({self.drug} / {self.disease})"
            )


@dataclass(frozen=True)
class DosePlan:
    """A computed administration plan; masses are kilograms/milligrams only."""

    drug: str
    disease: str
    weight_kg_used: float
    dose_mg: float
    times_per_day: int
    duration_days: int
    route: str
    warnings: tuple[str, ...] = field(default_factory=tuple)
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def schedule(self) -> tuple[int, int]:
        return (self.times_per_day, self.duration_days)

    def to_json_obj(self) -> dict:
        return {
            "drug": self.drug,
            "disease": self.disease,
            "weight_kg_used": self.weight_kg_used,
            "dose_mg": self.dose_mg,
            "times_per_day": self.times_per_day,
            "duration_days": self.duration_days,
            "route": self.route,
            "warnings": list(self.warnings),
            "notes": list(self.notes),
        }


def _known_diseases() -> set[str]:
    return set(CANONICAL_LABELS[TaskId.DISEASE_IMAGE]) | set(
        CANONICAL_LABELS[TaskId.BEHAVIOR_VIDEO]
    )


def parse_registry(obj: object, known_diseases: set[str] | None = None) -> list[DrugRule]:
    """Validate a decoded registry document (a JSON array of rule objects)."""
    if not isinstance(obj, list):
        raise ValidationError("drug registry must be a JSON array of rule objects")
    known = _known_diseases() if known_diseases is None else known_diseases
    rules: list[DrugRule] = []
    for i, item in enumerate(obj):
        if not isinstance(item, dict):
            raise ValidationError(f"registry entry {i} is not an object")
        try:
            band = item.get("min_age_band")
            rule = DrugRule(
                disease=item["disease"],
                drug=item["drug"],
                dose_mg_per_kg=float(item["dose_mg_per_kg"]),
                route=item.get("route", "oral"),
                times_per_day=int(item.get("times_per_day", 1)),
                duration_days=int(item.get("duration_days", 1)),
                min_age_band=AgeBand(band) if band else None,
                notes=item.get("notes", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"registry entry {i} is malformed: {exc}") from exc
        if rule.disease not in known:
            raise ValidationError(
                f"registry entry {i} names unknown disease {rule.disease!r}"
            )
        rules.append(rule)
    return rules


def load_registry(path: str | Path, known_diseases: set[str] | None = None) -> list[DrugRule]:
    """Load and validate a registry JSON file."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"drug registry {path} is not valid JSON: {exc}") from exc
    return parse_registry(obj, known_diseases)


def sample_registry_path() -> Path:
    """Path of the bundled sample registry (NOT FOR CLINICAL USE)."""
    return Path(str(files("taurus.data").joinpath("drug_registry.sample.json")))


def recommend_dose(
    disease: str,
    age_band: AgeBand,
    weight_group: WeightGroup,
    registry: Sequence[DrugRule],
) -> DosePlan:
    """Pick the first age-appropriate rule for the disease and compute the dose.

    Rules whose minimum age band exceeds the animal's are skipped with a
    warning; remaining alternates are listed in the plan notes.
    """
    matching = [rule for rule in registry if rule.disease == disease]
    if not matching:
        raise NoRuleError(f"no registry rule covers disease {disease!r}")

    kg = weight_kg(weight_group)  # raises ManualWeighingRequired for Unknown

    warnings: list[str] = []
    eligible: list[DrugRule] = []
    for rule in matching:
        if rule.min_age_band is not None and rule.min_age_band.rank > age_band.rank:
            warnings.append(
                f"skipped {rule.drug}: requires age {rule.min_age_band.display} or older"
            )
        else:
            eligible.append(rule)
    if not eligible:
        raise ContraindicationError(
            f"every rule for {disease!r} is blocked by the animal's age band "
            f"({age_band.display}); consult a veterinarian"
        )

    chosen = eligible[0]
    notes: list[str] = []
    if chosen.notes:
        notes.append(chosen.notes)
    for alt in eligible[1:]:
        notes.append(f"alternate: {alt.drug} at {alt.dose_mg_per_kg} mg/kg ({alt.route})")

    return DosePlan(
        drug=chosen.drug,
        disease=disease,
        weight_kg_used=kg,
        dose_mg=chosen.dose_mg_per_kg * kg,
        times_per_day=chosen.times_per_day,
        duration_days=chosen.duration_days,
        route=chosen.route,
        warnings=tuple(warnings),
        notes=tuple(notes),
    )
