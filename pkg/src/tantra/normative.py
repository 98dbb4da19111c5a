"""Goals, Theory-of-Change interventions and change-marker tracking.

The loop is: goals bound to Why-aspect metrics are set, interventions are
designed against them, change markers (also bound to Why metrics) are observed
over time, and goals are evaluated against the latest observation.

Goals, interventions, markers and observations are stored as plain graph
nodes (labels ``Goal``, ``Intervention``, ``ChangeMarker``,
``MarkerObservation``) so they persist with the rest of the model.
"""

from __future__ import annotations

import csv
import io
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any

from .errors import (
    InvalidAttribute,
    InvalidDimension,
    InvalidTarget,
    NonMonotonicDate,
    NotWhyAspect,
    SchemaMismatch,
    TantraError,
    UnknownElement,
    UnknownGoal,
    UnknownIntervention,
    UnknownMarker,
)
from .graph import id_order
from .metamodel import Aspect, ElementRef, Model

GOAL = "Goal"
INTERVENTION = "Intervention"
MARKER = "ChangeMarker"
OBSERVATION = "MarkerObservation"

TOC_FIELDS = (
    "summary_statement",
    "problem_statement",
    "overall_goal",
    "change_process",
    "change_markers",
    "meta_theory",
    "inputs",
    "actors",
    "domains_of_change",
    "internal_risks",
    "assumptions",
    "external_risks",
    "obstacles",
    "knock_on_effects",
)
TEXT_FIELDS = tuple(f for f in TOC_FIELDS if f != "change_markers")


class Dimension(str, Enum):
    CUSTOMER = "Customer"
    FINANCIAL = "Financial"
    PROCESS = "Process"
    STRATEGIC = "Strategic"
    ETHICAL = "Ethical"

    @classmethod
    def parse(cls, value: Dimension | str) -> Dimension:
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            for member in cls:
                if value.strip().casefold() == member.value.casefold():
                    return member
        raise InvalidDimension(
            f"invalid dimension {value!r}; valid: {', '.join(m.value for m in cls)}"
        )


class Direction(str, Enum):
    INCREASE = "increase"
    DECREASE = "decrease"

    @classmethod
    def parse(cls, value: Direction | str) -> Direction:
        if isinstance(value, cls):
            return value
        folded = str(value).strip().casefold()
        for member in cls:
            if folded in (member.value, f"{member.value}-good", member.value + "s"):
                return member
        raise InvalidAttribute(f"direction must be 'increase' or 'decrease', got {value!r}")


class GoalState(str, Enum):
    MET = "Met"
    NOT_MET = "NotMet"
    NO_DATA = "NoData"


_COMPARATORS = {">=": ">=", "≥": ">=", "ge": ">=", "<=": "<=", "≤": "<=", "le": "<=",
                "=": "=", "==": "=", "eq": "="}


def _to_decimal(value: Any, what: str) -> Decimal:
    try:
        if isinstance(value, bool):
            raise InvalidOperation
        result = Decimal(repr(value)) if isinstance(value, float) else Decimal(value)
    except (InvalidOperation, TypeError, ValueError):
        raise InvalidTarget(f"{what} {value!r} is not a number") from None
    if not result.is_finite():
        raise InvalidTarget(f"{what} {value!r} is not finite")
    return result


@dataclass(frozen=True)
class Target:
    comparator: str
    value: Decimal
    unit: str = ""
    tolerance: Decimal = Decimal(0)

    @classmethod
    def parse(cls, text: str, unit: str = "", tolerance: Any = 0) -> Target:
        """Parse ``">= 0.10"``, ``"<=5"`` or ``"= 1.0 +- 0.05"``."""
        match = re.fullmatch(r"\s*(>=|<=|==|=|≥|≤)\s*([-+0-9.eE]+)\s*(?:(?:\+-|±)\s*([0-9.eE]+))?\s*",
                             text)
        if not match:
            raise InvalidTarget(f"cannot parse target {text!r}; expected e.g. '>= 0.10'")
        tol = match.group(3) if match.group(3) is not None else tolerance
        return cls.of(match.group(1), match.group(2), unit, tol)

    @classmethod
    def of(cls, comparator: str, value: Any, unit: str = "", tolerance: Any = 0) -> Target:
        comp = _COMPARATORS.get(str(comparator).strip())
        if comp is None:
            raise InvalidTarget(f"comparator must be one of >=, <=, =; got {comparator!r}")
        tol = _to_decimal(tolerance, "tolerance")
        if tol < 0:
            raise InvalidTarget("tolerance must be non-negative")
        return cls(comp, _to_decimal(value, "target"), unit, tol)

    def is_met(self, observed: Decimal) -> bool:
        if self.comparator == ">=":
            return observed >= self.value
        if self.comparator == "<=":
            return observed <= self.value
        return abs(observed - self.value) <= self.tolerance

    def __str__(self) -> str:
        text = f"{self.comparator} {self.value}"
        if self.comparator == "=" and self.tolerance:
            text += f" +- {self.tolerance}"
        return f"{text} {self.unit}".rstrip()


@dataclass(frozen=True)
class Goal:
    id: str
    dimension: Dimension
    statement: str
    metric_id: str
    target: Target
    review_period_days: int
    key: str = ""


@dataclass(frozen=True)
class ChangeMarker:
    id: str
    name: str
    metric_id: str
    direction: Direction
    intervention_id: str = ""


@dataclass(frozen=True)
class MarkerObservation:
    marker_id: str
    date: date
    value: Decimal


@dataclass(frozen=True)
class Deficiency:
    code: str
    field: str
    detail: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "field": self.field, "detail": self.detail}


@dataclass(frozen=True)
class InterventionToC:
    id: str
    title: str
    fields: dict[str, str]
    change_markers: list[ChangeMarker]
    linked_goals: list[str]
    deficiencies: list[Deficiency] = field(default_factory=list)

    @property
    def completeness(self) -> tuple[int, int]:
        missing = {d.field for d in self.deficiencies if d.code == "MissingField"}
        return len(TOC_FIELDS) - len(missing), len(TOC_FIELDS)


@dataclass(frozen=True)
class GoalStatus:
    goal_id: str
    state: GoalState
    value: Decimal | None = None
    observed_on: date | None = None


# -- goals ---------------------------------------------------------------------


def _why_element(model: Model, ref: ElementRef) -> str:
    element = model.element(ref)
    if element.aspect is not Aspect.WHY:
        raise NotWhyAspect(
            f"{element.id} ({element.display_name!r}) is a {element.aspect.value} element; "
            "metrics must be Why elements"
        )
    return element.id


def define_goal(
    model: Model,
    dimension: Dimension | str,
    statement: str,
    metric_binding: ElementRef,
    target: Target | str,
    review_period: int,
    *,
    key: str | None = None,
) -> Goal:
    dimension = Dimension.parse(dimension)
    if not statement or not statement.strip():
        raise InvalidAttribute("goal statement must be non-empty")
    metric_id = _why_element(model, metric_binding)
    if isinstance(target, str):
        target = Target.parse(target)
    if isinstance(review_period, bool) or not isinstance(review_period, int) or review_period < 1:
        raise InvalidAttribute(f"review period must be a positive number of days, got {review_period!r}")
    if key is not None and model.store.query(GOAL, [("key", key)]):
        raise InvalidAttribute(f"goal key already in use: {key}")
    attrs: dict[str, Any] = {
        "dimension": dimension.value,
        "statement": statement,
        "metric_id": metric_id,
        "comparator": target.comparator,
        "target": target.value,
        "unit": target.unit,
        "tolerance": target.tolerance,
        "review_period_days": review_period,
    }
    if key is not None:
        attrs["key"] = key
    node_id = model.store.add_node({GOAL}, attrs)
    model.store.add_edge(node_id, metric_id, "measured_by")
    return get_goal(model, node_id)


def _goal_node(model: Model, ref: str) -> str | None:
    if model.store.has_node(ref) and GOAL in model.store.get_node(ref).labels:
        return ref
    found = model.store.query(GOAL, [("key", ref)])
    return found[0].id if found else None


def get_goal(model: Model, ref: str | Goal) -> Goal:
    if isinstance(ref, Goal):
        ref = ref.id
    node_id = _goal_node(model, ref)
    if node_id is None:
        raise UnknownGoal(ref)
    a = model.store.get_node(node_id).attrs
    target = Target(str(a["comparator"]), a["target"], str(a.get("unit", "")),
                    a.get("tolerance", Decimal(0)))
    return Goal(node_id, Dimension(a["dimension"]), str(a["statement"]), str(a["metric_id"]),
                target, int(a["review_period_days"]), str(a.get("key", "")))


def goals(model: Model) -> list[Goal]:
    return [get_goal(model, n) for n in model.store.node_ids(GOAL)]


# -- change markers and observations ---------------------------------------------


def define_marker(
    model: Model,
    name: str,
    metric: ElementRef,
    direction: Direction | str = Direction.INCREASE,
    *,
    key: str | None = None,
) -> ChangeMarker:
    """A free-standing change marker; the metric must be a Why element."""
    metric_id = _why_element(model, metric)
    return _store_marker(model, name, metric_id, Direction.parse(direction), key=key)


def _store_marker(
    model: Model, name: str, metric_ref: str, direction: Direction,
    intervention_id: str = "", key: str | None = None,
) -> ChangeMarker:
    attrs: dict[str, Any] = {"name": name, "metric_id": metric_ref, "direction": direction.value}
    if intervention_id:
        attrs["intervention_id"] = intervention_id
    if key:
        attrs["key"] = key
    node_id = model.store.add_node({MARKER}, attrs)
    if model.store.has_node(metric_ref):
        model.store.add_edge(node_id, metric_ref, "measures")
    return get_marker(model, node_id)


def _marker_node(model: Model, ref: str) -> str | None:
    if model.store.has_node(ref) and MARKER in model.store.get_node(ref).labels:
        return ref
    found = model.store.query(MARKER, [("key", ref)])
    return found[0].id if found else None


def get_marker(model: Model, ref: str | ChangeMarker) -> ChangeMarker:
    if isinstance(ref, ChangeMarker):
        ref = ref.id
    node_id = _marker_node(model, ref)
    if node_id is None:
        raise UnknownMarker(ref)
    a = model.store.get_node(node_id).attrs
    return ChangeMarker(node_id, str(a["name"]), str(a.get("metric_id", "")),
                        Direction(a["direction"]), str(a.get("intervention_id", "")))


def markers(model: Model) -> list[ChangeMarker]:
    return [get_marker(model, n) for n in model.store.node_ids(MARKER)]


def _as_date(value: date | str) -> date:
    if isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value).strip())
    except ValueError:
        raise InvalidAttribute(f"not an ISO date (YYYY-MM-DD): {value!r}") from None


def record_marker(
    model: Model, marker: str | ChangeMarker, when: date | str, value: Any
) -> MarkerObservation:
    marker = get_marker(model, marker)
    when = _as_date(when)
    amount = _to_decimal(value, "observation value")
    last = model.store.get_node(marker.id).attrs.get("last_observed")
    if isinstance(last, date) and when <= last:
        raise NonMonotonicDate(
            f"marker {marker.id}: {when.isoformat()} is not after the last observation "
            f"{last.isoformat()}"
        )
    node_id = model.store.add_node(
        {OBSERVATION}, {"marker_id": marker.id, "date": when, "value": amount}
    )
    model.store.add_edge(marker.id, node_id, "observed")
    model.store.set_attrs(marker.id, {"last_observed": when})
    return MarkerObservation(marker.id, when, amount)


def series(model: Model, marker: str | ChangeMarker) -> list[MarkerObservation]:
    marker = get_marker(model, marker)
    found = []
    for node_id in model.store.neighbors(marker.id, "observed"):
        a = model.store.get_node(node_id).attrs
        found.append(MarkerObservation(marker.id, a["date"], a["value"]))
    found.sort(key=lambda o: o.date)
    return found


def marker_trend(model: Model, marker: str | ChangeMarker) -> str:
    """``increasing``, ``decreasing``, ``constant``, ``mixed`` or ``insufficient-data``."""
    values = [o.value for o in series(model, marker)]
    if len(values) < 2:
        return "insufficient-data"
    steps = list(zip(values, values[1:]))
    if all(b > a for a, b in steps):
        return "increasing"
    if all(b < a for a, b in steps):
        return "decreasing"
    if all(b == a for a, b in steps):
        return "constant"
    return "mixed"


def marker_progress(model: Model, marker: str | ChangeMarker) -> str:
    """Trend read against the marker's good direction."""
    marker = get_marker(model, marker)
    trend = marker_trend(model, marker)
    good = "increasing" if marker.direction is Direction.INCREASE else "decreasing"
    bad = "decreasing" if good == "increasing" else "increasing"
    return {good: "improving", bad: "worsening"}.get(trend, trend)


MARKER_COLUMNS = ("marker_id", "date", "value")


def ingest_markers(model: Model, source: str | Path) -> int:
    """Append ``marker_id,date,value`` rows; the whole file is checked first."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for column in MARKER_COLUMNS:
        if column not in header:
            raise SchemaMismatch(f"markers CSV is missing column {column!r}", column=column)
    rows = []
    last: dict[str, date] = {}
    for line, row in enumerate(reader, start=2):
        try:
            marker = get_marker(model, row["marker_id"].strip())
            when = _as_date(row["date"])
            value = _to_decimal(row["value"].strip(), "value")
        except TantraError as exc:
            raise SchemaMismatch(f"line {line}: {exc.code}: {exc}", line=line) from None
        if marker.id not in last:
            previous = model.store.get_node(marker.id).attrs.get("last_observed")
            if isinstance(previous, date):
                last[marker.id] = previous
        if marker.id in last and when <= last[marker.id]:
            raise NonMonotonicDate(
                f"line {line}: marker {marker.id} date {when.isoformat()} is not after "
                f"{last[marker.id].isoformat()}"
            )
        last[marker.id] = when
        rows.append((marker.id, when, value))
    for marker_id, when, value in rows:
        record_marker(model, marker_id, when, value)
    return len(rows)


def evaluate_goal(model: Model, goal: str | Goal, as_of: date | str | None = None) -> GoalStatus:
    """Compare the latest observation (on or before ``as_of``) with the target.

    Observations come from every change marker bound to the goal's metric; on
    a shared date the marker with the highest id wins.
    """
    goal = get_goal(model, goal)
    cutoff = _as_date(as_of) if as_of is not None else None
    latest: tuple[date, tuple[int, str], Decimal] | None = None
    for marker in markers(model):
        if marker.metric_id != goal.metric_id:
            continue
        for obs in series(model, marker):
            if cutoff is not None and obs.date > cutoff:
                continue
            candidate = (obs.date, id_order(marker.id), obs.value)
            if latest is None or candidate[:2] > latest[:2]:
                latest = candidate
    if latest is None:
        return GoalStatus(goal.id, GoalState.NO_DATA)
    state = GoalState.MET if goal.target.is_met(latest[2]) else GoalState.NOT_MET
    return GoalStatus(goal.id, state, latest[2], latest[0])


# -- interventions -----------------------------------------------------------------


def _text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value.strip()
    if isinstance(value, Iterable):
        return "; ".join(str(v).strip() for v in value if str(v).strip())
    return str(value).strip()


def register_intervention(model: Model, record: Mapping[str, Any]) -> InterventionToC:
    """Store a Theory-of-Change record. Completeness is reported, never enforced.

    ``record`` uses the 14 canonical field names plus optional ``title``,
    ``key`` and ``linked_goals`` (goal ids or keys). Each change marker is a
    mapping ``{name, metric, direction}`` with an optional ``key``, or a bare
    name with no binding.
    """
    allowed = set(TOC_FIELDS) | {"title", "key", "linked_goals", "id"}
    unknown = sorted(set(record) - allowed)
    if unknown:
        raise InvalidAttribute(f"unknown intervention fields: {', '.join(unknown)}")
    attrs: dict[str, Any] = {"title": _text(record.get("title")) or "Untitled intervention"}
    if record.get("key"):
        attrs["key"] = str(record["key"])
    for name in TEXT_FIELDS:
        text = _text(record.get(name))
        if text:
            attrs[name] = text
    goal_ids = []
    for ref in record.get("linked_goals") or []:
        node_id = _goal_node(model, str(ref))
        goal_ids.append(node_id if node_id is not None else str(ref))
    if goal_ids:
        attrs["linked_goals"] = ",".join(goal_ids)
    node_id = model.store.add_node({INTERVENTION}, attrs)
    for ref in goal_ids:
        if _goal_node(model, ref) is not None:
            model.store.add_edge(node_id, ref, "targets")

    for order, spec in enumerate(record.get("change_markers") or []):
        if isinstance(spec, str):
            spec = {"name": spec}
        name = _text(spec.get("name")) or f"marker {order + 1}"
        metric_ref = str(spec.get("metric") or "")
        try:
            metric_ref = model.element(metric_ref).id if metric_ref else ""
        except UnknownElement:
            pass
        marker = _store_marker(model, name, metric_ref,
                               Direction.parse(spec.get("direction", "increase")),
                               intervention_id=node_id, key=spec.get("key"))
        model.store.add_edge(node_id, marker.id, "has_marker", {"order": order})
    return get_intervention(model, node_id)


def _intervention_node(model: Model, ref: str) -> str | None:
    if model.store.has_node(ref) and INTERVENTION in model.store.get_node(ref).labels:
        return ref
    found = model.store.query(INTERVENTION, [("key", ref)])
    return found[0].id if found else None


def get_intervention(model: Model, ref: str) -> InterventionToC:
    node_id = _intervention_node(model, ref)
    if node_id is None:
        raise UnknownIntervention(ref)
    a = model.store.get_node(node_id).attrs
    edges = sorted(model.store.edges(src=node_id, kind="has_marker"),
                   key=lambda e: (e.attrs.get("order", 0), id_order(e.id)))
    marker_list = [get_marker(model, e.dst) for e in edges]
    linked = [g for g in str(a.get("linked_goals", "")).split(",") if g]
    fields = {name: str(a[name]) for name in TEXT_FIELDS if name in a}
    record = InterventionToC(node_id, str(a.get("title", "")), fields, marker_list, linked)
    return InterventionToC(record.id, record.title, record.fields, record.change_markers,
                           record.linked_goals, _deficiencies(model, record))


def interventions(model: Model) -> list[InterventionToC]:
    return [get_intervention(model, n) for n in model.store.node_ids(INTERVENTION)]


def _deficiencies(model: Model, record: InterventionToC) -> list[Deficiency]:
    found = []
    for name in TOC_FIELDS:
        present = bool(record.change_markers) if name == "change_markers" else bool(
            record.fields.get(name))
        if not present:
            found.append(Deficiency("MissingField", name, f"{name} is empty"))
    for marker in record.change_markers:
        problem = None
        if not marker.metric_id:
            problem = "is not bound to any metric"
        elif not model.is_element(marker.metric_id):
            problem = f"binds to unknown element {marker.metric_id}"
        else:
            element = model.element(marker.metric_id)
            if element.aspect is not Aspect.WHY:
                problem = f"binds to {element.aspect.value} element {element.id}, not a Why metric"
        if problem:
            found.append(Deficiency("MarkerNotMetric", "change_markers",
                                    f"marker {marker.name!r} {problem}"))
    for goal_id in record.linked_goals:
        if _goal_node(model, goal_id) is None:
            found.append(Deficiency("DanglingGoal", "linked_goals",
                                    f"linked goal {goal_id} does not exist"))
    return found


def validate_intervention(model: Model, intervention_id: str) -> list[Deficiency]:
    return get_intervention(model, intervention_id).deficiencies


def export_intervention(model: Model, intervention_id: str) -> dict[str, Any]:
    """JSON-ready record using the canonical field names."""
    record = get_intervention(model, intervention_id)
    out: dict[str, Any] = {"id": record.id, "title": record.title}
    for name in TOC_FIELDS:
        if name == "change_markers":
            out[name] = [
                {"name": m.name, "metric": _metric_ref(model, m.metric_id),
                 "direction": m.direction.value}
                for m in record.change_markers
            ]
        else:
            out[name] = record.fields.get(name, "")
    out["linked_goals"] = [_goal_ref(model, g) for g in record.linked_goals]
    return out


def _metric_ref(model: Model, metric_id: str) -> str:
    if metric_id and model.is_element(metric_id):
        return model.element(metric_id).key or metric_id
    return metric_id


def _goal_ref(model: Model, goal_id: str) -> str:
    node_id = _goal_node(model, goal_id)
    if node_id is None:
        return goal_id
    return str(model.store.get_node(node_id).attrs.get("key") or node_id)
