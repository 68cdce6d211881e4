"""Fixed-point emission arithmetic and process-model data types.

Emissions are integers in milligrams of CO2-equivalent. Integer (rather
than float) arithmetic keeps totals bit-identical regardless of how a
process is proved, and makes hashing of public outputs deterministic.
Overflow is always a hard error: a silent wrap would let an emitter
under-report without detection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

I64_MAX = (1 << 63) - 1
U64_MAX = (1 << 64) - 1


class EmissionOverflowError(OverflowError):
    """An emission sum or product left the signed 64-bit range."""


@dataclass(frozen=True)
class EmissionQuantity:
    """Non-negative emission quantity in mg CO2e, bounded to signed 64 bits."""

    mg: int

    def __post_init__(self) -> None:
        if not isinstance(self.mg, int) or isinstance(self.mg, bool):
            raise TypeError("EmissionQuantity.mg must be an int")
        if not 0 <= self.mg <= I64_MAX:
            raise ValueError(f"EmissionQuantity out of range: {self.mg}")


ZERO_EMISSIONS = EmissionQuantity(0)


@dataclass(frozen=True)
class EmissionFactor:
    """Emission factor in mg CO2e per resource unit (unsigned 64-bit)."""

    mg_per_unit: int

    def __post_init__(self) -> None:
        if not isinstance(self.mg_per_unit, int) or isinstance(self.mg_per_unit, bool):
            raise TypeError("EmissionFactor.mg_per_unit must be an int")
        if not 0 <= self.mg_per_unit <= U64_MAX:
            raise ValueError(f"EmissionFactor out of range: {self.mg_per_unit}")


@dataclass(frozen=True)
class ResourceAmount:
    """Consumed resource amount as a dimensionless unsigned 64-bit count."""

    units: int

    def __post_init__(self) -> None:
        if not isinstance(self.units, int) or isinstance(self.units, bool):
            raise TypeError("ResourceAmount.units must be an int")
        if not 0 <= self.units <= U64_MAX:
            raise ValueError(f"ResourceAmount out of range: {self.units}")


def compute_emissions(factor: EmissionFactor, amount: ResourceAmount) -> EmissionQuantity:
    """Overflow-checked factor x amount product."""
    product = factor.mg_per_unit * amount.units
    if product > I64_MAX:
        raise EmissionOverflowError(
            f"emission product {product} exceeds signed 64-bit range"
        )
    return EmissionQuantity(product)


def aggregate(previous_total: EmissionQuantity, current: EmissionQuantity) -> EmissionQuantity:
    """Overflow-checked sum of two emission quantities."""
    total = previous_total.mg + current.mg
    if total > I64_MAX:
        raise EmissionOverflowError(f"emission sum {total} exceeds signed 64-bit range")
    return EmissionQuantity(total)


class Scope(str, Enum):
    """GHG Protocol scope attribution for an activity."""

    SCOPE1 = "scope1"
    SCOPE2 = "scope2"
    SCOPE3 = "scope3"


class ActivityKind(str, Enum):
    PROVE_FOOTPRINT = "prove_footprint"
    VERIFY_EXTERNAL = "verify_external"
    COMPOSE = "compose"


class Strategy(str, Enum):
    SINGLE_STEP = "single_step"
    COMPOSED = "composed"
    CHAINED = "chained"


@dataclass(frozen=True)
class FootprintItem:
    """One (factor, amount) pair inside a single-step proving activity."""

    item_id: str
    factor: EmissionFactor
    amount: ResourceAmount


@dataclass(frozen=True)
class ActivitySpec:
    """One activity of a sequential verifiable process.

    ``factor``/``amount`` carry the emission inputs of a proving activity in
    chained and composed processes; ``items`` carries the whole list of
    pairs for the one proving activity of a single-step process.
    """

    id: str
    name: str
    kind: ActivityKind
    guest_ref: str
    scope: Scope = Scope.SCOPE1
    factor: Optional[EmissionFactor] = None
    amount: Optional[ResourceAmount] = None
    items: Optional[tuple[FootprintItem, ...]] = None


@dataclass(frozen=True)
class ProcessModel:
    """A strictly sequential verifiable process definition."""

    id: str
    strategy: Strategy
    activities: tuple[ActivitySpec, ...]

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "strategy": self.strategy.value,
            "activities": [_activity_to_json(a) for a in self.activities],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ProcessModel":
        return cls(
            id=data["id"],
            strategy=Strategy(data["strategy"]),
            activities=tuple(_activity_from_json(a) for a in data["activities"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProcessModel":
        return cls.from_json_dict(json.loads(text))


def _activity_to_json(activity: ActivitySpec) -> dict:
    entry = {
        "id": activity.id,
        "name": activity.name,
        "kind": activity.kind.value,
        "factor_mg_per_unit": activity.factor.mg_per_unit if activity.factor else None,
        "amount_units": activity.amount.units if activity.amount else None,
        "guest_ref": activity.guest_ref,
        "scope": activity.scope.value,
    }
    if activity.items is not None:
        entry["items"] = [
            {
                "id": item.item_id,
                "factor_mg_per_unit": item.factor.mg_per_unit,
                "amount_units": item.amount.units,
            }
            for item in activity.items
        ]
    return entry


def _activity_from_json(data: Mapping) -> ActivitySpec:
    factor = data.get("factor_mg_per_unit")
    amount = data.get("amount_units")
    items = data.get("items")
    return ActivitySpec(
        id=data["id"],
        name=data["name"],
        kind=ActivityKind(data["kind"]),
        guest_ref=data["guest_ref"],
        scope=Scope(data.get("scope", "scope1")),
        factor=EmissionFactor(factor) if factor is not None else None,
        amount=ResourceAmount(amount) if amount is not None else None,
        items=tuple(
            FootprintItem(
                item_id=item["id"],
                factor=EmissionFactor(item["factor_mg_per_unit"]),
                amount=ResourceAmount(item["amount_units"]),
            )
            for item in items
        )
        if items is not None
        else None,
    )


@dataclass(frozen=True)
class Pcf:
    """Product carbon footprint with per-activity and per-scope breakdown.

    The total always equals both breakdown sums exactly; construction fails
    otherwise, so a Pcf can never report an inconsistent decomposition.
    """

    total: EmissionQuantity
    per_activity: tuple[tuple[str, EmissionQuantity], ...]
    scope_breakdown: Mapping[Scope, EmissionQuantity]

    def __post_init__(self) -> None:
        activity_sum = sum(q.mg for _, q in self.per_activity)
        scope_sum = sum(q.mg for q in self.scope_breakdown.values())
        if activity_sum != self.total.mg or scope_sum != self.total.mg:
            raise ValueError(
                "inconsistent Pcf: total=%d per_activity=%d scopes=%d"
                % (self.total.mg, activity_sum, scope_sum)
            )


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of process-model validation; empty means well-formed."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_process_model(model: ProcessModel) -> ValidationReport:
    """Checks every structural invariant; violations are reported, not raised."""
    violations: list[str] = []

    if not model.activities:
        violations.append("activities non-empty")
        return ValidationReport(tuple(violations))

    seen: set[str] = set()
    for activity in model.activities:
        if activity.id in seen:
            violations.append(f"duplicate activity id '{activity.id}'")
        seen.add(activity.id)

    for activity in model.activities:
        has_pair = activity.factor is not None and activity.amount is not None
        has_partial = (activity.factor is None) != (activity.amount is None)
        has_items = activity.items is not None
        if has_partial:
            violations.append(
                f"activity '{activity.id}': factor and amount must be set together"
            )
        if activity.kind is ActivityKind.PROVE_FOOTPRINT:
            if not has_pair and not has_items:
                violations.append(
                    f"activity '{activity.id}': proving activity needs factor/amount or items"
                )
            if has_pair and has_items:
                violations.append(
                    f"activity '{activity.id}': factor/amount and items are exclusive"
                )
            if has_items and not activity.items:
                violations.append(f"activity '{activity.id}': items must be non-empty")
        else:
            if has_pair or has_partial or has_items:
                violations.append(
                    f"activity '{activity.id}': emission inputs only allowed on proving activities"
                )

    kinds = [a.kind for a in model.activities]

    if model.strategy is Strategy.SINGLE_STEP:
        if len(model.activities) != 1 or kinds[0] is not ActivityKind.PROVE_FOOTPRINT:
            violations.append("single-step model must have exactly one proving activity")
        elif model.activities[0].items is None:
            violations.append("single-step proving activity must carry items")
    elif model.strategy is Strategy.COMPOSED:
        compose_count = kinds.count(ActivityKind.COMPOSE)
        if compose_count != 1:
            violations.append("composed model must have exactly one Compose activity")
        elif kinds[-1] is not ActivityKind.COMPOSE:
            violations.append("Compose must be trailing")
        if len(model.activities) < 2:
            violations.append("composed model needs at least one proving activity")
        for activity in model.activities[:-1]:
            if activity.kind is not ActivityKind.PROVE_FOOTPRINT:
                violations.append(
                    f"activity '{activity.id}': composed models chain only proving activities"
                )
        for activity in model.activities:
            if activity.items is not None:
                violations.append(
                    f"activity '{activity.id}': items are single-step only"
                )
    elif model.strategy is Strategy.CHAINED:
        if ActivityKind.COMPOSE in kinds:
            violations.append("chained model must not contain Compose activities")
        for index, activity in enumerate(model.activities):
            if activity.kind is ActivityKind.VERIFY_EXTERNAL and index != 0:
                violations.append(
                    f"activity '{activity.id}': external verification only as first activity"
                )
            if activity.items is not None:
                violations.append(f"activity '{activity.id}': items are single-step only")
        if kinds.count(ActivityKind.VERIFY_EXTERNAL) > 1:
            violations.append("at most one external verification activity")

    return ValidationReport(tuple(violations))
