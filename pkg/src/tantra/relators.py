"""Relators, the material relationships they found, and separation scoring.

A relator is an Instantiated element of the Relators aspect that mediates two
or more other elements ("mediates" edges). A material relationship is an
Instantiated Relationships element joining two of those mediated elements
("relates" edges) with exactly one "founded_by" edge back to its relator.

Separation profiles score a relationship, or an (actor, market) pair, on the
five market-separation kinds. Scores and weights are exact decimals.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any, Union

from .errors import (
    AllWeightsZero,
    EndpointNotMediated,
    InvalidSeparationKind,
    NegativeWeight,
    NotARelator,
    SchemaMismatch,
    ScoreOutOfRange,
    SelfRelationship,
    TantraError,
    TooFewMediated,
    UnknownElement,
    UnknownSubject,
)
from .graph import id_order
from .metamodel import Aspect, ElementRef, Model, Perspective, TantraElement, Violation, slugify

MEDIATES = "mediates"
RELATES = "relates"
FOUNDED_BY = "founded_by"
ABOUT = "about"
PROFILE_LABEL = "SeparationProfile"
PAIR_SEPARATOR = "::"


class SeparationKind(str, Enum):
    INFORMATIONAL = "Informational"
    SPATIAL = "Spatial"
    TEMPORAL = "Temporal"
    FINANCIAL = "Financial"
    CAPABILITY = "Capability"

    @classmethod
    def parse(cls, value: SeparationKind | str) -> SeparationKind:
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            folded = value.strip().casefold().removesuffix(" separation")
            for member in cls:
                if folded in (member.value.casefold(), member.name.casefold()):
                    return member
            # three-letter abbreviations: Inf, Spa, Tem, Fin, Cap
            matches = [m for m in cls if len(folded) >= 3 and m.value.casefold().startswith(folded)]
            if len(matches) == 1:
                return matches[0]
        raise InvalidSeparationKind(
            f"invalid separation kind {value!r}; valid kinds: {', '.join(m.value for m in cls)}"
        )

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Relator:
    element: TantraElement
    mediated: frozenset[str]
    kind: str

    @property
    def id(self) -> str:
        return self.element.id


@dataclass(frozen=True)
class MaterialRelationship:
    element: TantraElement
    endpoints: tuple[str, str]
    founded_by: str
    kind: str

    @property
    def id(self) -> str:
        return self.element.id


# -- relators ------------------------------------------------------------------


def create_relator(
    model: Model,
    kind: str,
    mediated: Iterable[ElementRef],
    *,
    name: str | None = None,
    unique_id: str | None = None,
    key: str | None = None,
) -> Relator:
    members: dict[str, TantraElement] = {}
    for ref in mediated:
        element = model.element(ref)
        members[element.id] = element
    if len(members) < 2:
        raise TooFewMediated(len(members))
    schema = model.ensure_chain(
        Aspect.RELATORS, kind, node_labels="Relators,Instantiated", edge_kinds="reifies,mediates"
    )
    if unique_id is None:
        unique_id = model.fresh_unique_id(Aspect.RELATORS, f"REL-{slugify(kind).upper()}")
    names = ", ".join(members[m].display_name for m in sorted(members, key=id_order))
    element = model.declare_element(
        Aspect.RELATORS,
        Perspective.INSTANTIATED,
        name or f"{kind} {unique_id}",
        {"unique_id": unique_id, "kind": kind, "description": f"{kind} mediating {names}"},
        key=key,
    )
    model.reify(schema, element)
    for member_id in sorted(members, key=id_order):
        model.store.add_edge(element.id, member_id, MEDIATES)
    return get_relator(model, element.id)


def get_relator(model: Model, ref: ElementRef | Relator) -> Relator:
    if isinstance(ref, Relator):
        ref = ref.id
    element = model.element(ref)
    if element.aspect is not Aspect.RELATORS or element.perspective is not Perspective.INSTANTIATED:
        raise NotARelator(f"{element.id} is not an Instantiated Relators element")
    mediated = frozenset(model.store.neighbors(element.id, MEDIATES))
    return Relator(element, mediated, str(element.attrs.get("kind", element.display_name)))


def relators(model: Model) -> list[Relator]:
    return [get_relator(model, e) for e in model.cell(Aspect.RELATORS, Perspective.INSTANTIATED)]


def found_relationship(
    model: Model,
    relator: ElementRef | Relator,
    a: ElementRef,
    b: ElementRef,
    kind: str,
    *,
    name: str | None = None,
    unique_id: str | None = None,
    key: str | None = None,
) -> MaterialRelationship:
    relator = get_relator(model, relator)
    a_el, b_el = model.element(a), model.element(b)
    if a_el.id == b_el.id:
        raise SelfRelationship(f"a relationship needs two distinct endpoints, got {a_el.id} twice")
    outside = [e.id for e in (a_el, b_el) if e.id not in relator.mediated]
    if outside:
        raise EndpointNotMediated(
            f"relator {relator.id} does not mediate {', '.join(outside)}"
        )
    schema = model.ensure_chain(
        Aspect.RELATIONSHIPS, kind,
        node_labels="Relationships,Instantiated", edge_kinds="reifies,relates,founded_by",
    )
    if unique_id is None:
        unique_id = model.fresh_unique_id(Aspect.RELATIONSHIPS, f"RSH-{slugify(kind).upper()}")
    element = model.declare_element(
        Aspect.RELATIONSHIPS,
        Perspective.INSTANTIATED,
        name or f"{kind}: {a_el.display_name} / {b_el.display_name}",
        {
            "unique_id": unique_id,
            "kind": kind,
            "description": f"{kind} between {a_el.display_name} and {b_el.display_name}",
        },
        key=key,
    )
    model.reify(schema, element)
    model.store.add_edge(element.id, a_el.id, RELATES, {"end": 0})
    model.store.add_edge(element.id, b_el.id, RELATES, {"end": 1})
    model.store.add_edge(element.id, relator.id, FOUNDED_BY)
    return get_relationship(model, element.id)


def get_relationship(model: Model, ref: ElementRef) -> MaterialRelationship:
    element = model.element(ref)
    if element.aspect is not Aspect.RELATIONSHIPS:
        raise UnknownElement(f"{element.id} is not a Relationships element")
    ends = sorted(model.store.edges(src=element.id, kind=RELATES),
                  key=lambda e: (e.attrs.get("end", 0), id_order(e.id)))
    founders = model.store.edges(src=element.id, kind=FOUNDED_BY)
    endpoints = (ends[0].dst, ends[1].dst) if len(ends) >= 2 else ("", "")
    return MaterialRelationship(
        element, endpoints, founders[0].dst if founders else "",
        str(element.attrs.get("kind", element.display_name)),
    )


def relationships(model: Model) -> list[MaterialRelationship]:
    return [get_relationship(model, e)
            for e in model.cell(Aspect.RELATIONSHIPS, Perspective.INSTANTIATED)]


def check_relationships(model: Model) -> list[Violation]:
    """Graph-wide cardinality scan over every material relationship."""
    found = []
    for element in model.cell(Aspect.RELATIONSHIPS, Perspective.INSTANTIATED):
        founders = model.store.edges(src=element.id, kind=FOUNDED_BY)
        ends = model.store.edges(src=element.id, kind=RELATES)
        if len(founders) != 1:
            found.append(Violation("FounderCardinality", element.id,
                                   f"{len(founders)} founded_by edges, expected 1"))
            continue
        if len(ends) != 2:
            found.append(Violation("EndpointCardinality", element.id,
                                   f"{len(ends)} relates edges, expected 2"))
            continue
        try:
            relator = get_relator(model, founders[0].dst)
        except TantraError:
            found.append(Violation("FounderNotRelator", element.id,
                                   f"founded_by target {founders[0].dst} is not a relator"))
            continue
        outside = sorted({e.dst for e in ends} - relator.mediated, key=id_order)
        if outside:
            found.append(Violation("EndpointNotMediated", element.id,
                                   f"endpoints {outside} not mediated by {relator.id}"))
    return found


# -- separations ---------------------------------------------------------------

Subject = Union[ElementRef, tuple[ElementRef, ElementRef]]


@dataclass(frozen=True)
class SeparationProfile:
    subject: str
    scores: dict[SeparationKind, Decimal] = field(default_factory=dict)
    weights: dict[SeparationKind, Decimal] = field(default_factory=dict)
    node_id: str | None = None

    def score(self, kind: SeparationKind | str) -> Decimal:
        return self.scores.get(SeparationKind.parse(kind), Decimal(0))

    def weight(self, kind: SeparationKind | str) -> Decimal:
        return self.weights.get(SeparationKind.parse(kind), Decimal(1))


def make_profile(
    subject: str,
    scores: Mapping[SeparationKind | str, Any],
    weights: Mapping[SeparationKind | str, Any] | None = None,
) -> SeparationProfile:
    """Build a free-standing (unstored) profile, validating every value."""
    parsed_scores = {SeparationKind.parse(k): _score(v) for k, v in scores.items()}
    parsed_weights = {SeparationKind.parse(k): _weight(v) for k, v in (weights or {}).items()}
    profile = SeparationProfile(subject, parsed_scores, parsed_weights)
    _check_weights(profile)
    return profile


def _decimal(value: Any) -> Decimal:
    if isinstance(value, bool):
        raise InvalidOperation
    if isinstance(value, float):
        value = repr(value)
    result = Decimal(value) if not isinstance(value, Decimal) else value
    if not result.is_finite():
        raise InvalidOperation
    return result


def _score(value: Any) -> Decimal:
    try:
        score = _decimal(value)
    except (InvalidOperation, TypeError, ValueError):
        raise ScoreOutOfRange(f"score {value!r} is not a number in [0, 1]") from None
    if not Decimal(0) <= score <= Decimal(1):
        raise ScoreOutOfRange(f"score {value} is outside [0, 1]")
    return score


def _weight(value: Any) -> Decimal:
    try:
        weight = _decimal(value)
    except (InvalidOperation, TypeError, ValueError):
        raise NegativeWeight(f"weight {value!r} is not a non-negative number") from None
    if weight < 0:
        raise NegativeWeight(f"weight {value} is negative")
    return weight


def _check_weights(profile: SeparationProfile) -> None:
    if all(profile.weight(k) == 0 for k in SeparationKind):
        raise AllWeightsZero()


def separation_index(profile: SeparationProfile) -> Decimal:
    """Weighted mean of the five scores; missing scores count as 0."""
    total_weight = sum((profile.weight(k) for k in SeparationKind), Decimal(0))
    if total_weight == 0:
        raise AllWeightsZero()
    weighted = sum((profile.weight(k) * profile.score(k) for k in SeparationKind), Decimal(0))
    return weighted / total_weight


def rank_by_separation(
    profiles: Iterable[SeparationProfile], kind: SeparationKind | str | None = None
) -> list[tuple[SeparationProfile, Decimal]]:
    """Descending by index (or by one kind's score); ties by subject id."""
    if kind is not None:
        kind = SeparationKind.parse(kind)
        scored = [(p, p.score(kind)) for p in profiles]
    else:
        scored = [(p, separation_index(p)) for p in profiles]
    scored.sort(key=lambda pair: id_order(pair[0].subject))
    scored.sort(key=lambda pair: pair[1], reverse=True)
    return scored


def resolve_subject(model: Model, subject: Subject) -> tuple[str, list[tuple[str, str]]]:
    """Canonical subject id plus the (role, node id) pairs it points at."""
    if isinstance(subject, str) and PAIR_SEPARATOR in subject:
        left, right = subject.split(PAIR_SEPARATOR, 1)
        subject = (left, right)
    if isinstance(subject, tuple):
        if len(subject) != 2:
            raise UnknownSubject(subject)
        try:
            actor, market = model.element(subject[0]), model.element(subject[1])
        except UnknownElement as exc:
            raise UnknownSubject(exc.ref) from None
        if actor.id == market.id:
            raise UnknownSubject(f"actor and market are the same element {actor.id}")
        return (f"{actor.id}{PAIR_SEPARATOR}{market.id}",
                [("actor", actor.id), ("market", market.id)])
    try:
        element = model.element(subject)
    except UnknownElement as exc:
        raise UnknownSubject(exc.ref) from None
    if element.aspect is not Aspect.RELATIONSHIPS:
        raise UnknownSubject(
            f"{element.id} is a {element.aspect.value} element; single subjects must be "
            "relationships, use an (actor, market) pair otherwise"
        )
    return element.id, [("subject", element.id)]


def _profile_node(model: Model, subject_id: str) -> str | None:
    found = model.store.query(PROFILE_LABEL, [("subject", subject_id)])
    return found[0].id if found else None


def _profile_from_node(model: Model, node_id: str) -> SeparationProfile:
    attrs = model.store.get_node(node_id).attrs
    scores, weights = {}, {}
    for kind in SeparationKind:
        slot = kind.value.lower()
        if f"score_{slot}" in attrs:
            scores[kind] = attrs[f"score_{slot}"]
        if f"weight_{slot}" in attrs:
            weights[kind] = attrs[f"weight_{slot}"]
    return SeparationProfile(str(attrs["subject"]), scores, weights, node_id)


def get_profile(model: Model, subject: Subject) -> SeparationProfile | None:
    subject_id, _ = resolve_subject(model, subject)
    node_id = _profile_node(model, subject_id)
    return _profile_from_node(model, node_id) if node_id else None


def profiles(model: Model) -> list[SeparationProfile]:
    found = [_profile_from_node(model, n) for n in model.store.node_ids(PROFILE_LABEL)]
    found.sort(key=lambda p: id_order(p.subject))
    return found


def set_separation(
    model: Model,
    subject: Subject,
    kind: SeparationKind | str,
    score: Any,
    weight: Any = None,
) -> SeparationProfile:
    kind = SeparationKind.parse(kind)
    value = _score(score)
    subject_id, targets = resolve_subject(model, subject)
    node_id = _profile_node(model, subject_id)
    slot = kind.value.lower()
    update: dict[str, Any] = {f"score_{slot}": value}
    if weight is not None:
        update[f"weight_{slot}"] = _weight(weight)
        current = _profile_from_node(model, node_id) if node_id else SeparationProfile(subject_id)
        weights = dict(current.weights)
        weights[kind] = update[f"weight_{slot}"]
        _check_weights(SeparationProfile(subject_id, {}, weights))
    if node_id is None:
        node_id = model.store.add_node({PROFILE_LABEL}, {"subject": subject_id, **update})
        for role, target in targets:
            model.store.add_edge(node_id, target, ABOUT, {"role": role})
    else:
        model.store.set_attrs(node_id, update)
    return _profile_from_node(model, node_id)


SEPARATION_COLUMNS = ("subject_id", "kind", "score")


def ingest_separations(model: Model, source: str | Path) -> int:
    """Apply a ``subject_id,kind,score[,weight]`` CSV; all rows or none."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for column in SEPARATION_COLUMNS:
        if column not in header:
            raise SchemaMismatch(f"separations CSV is missing column {column!r}", column=column)
    extra = [c for c in header if c not in (*SEPARATION_COLUMNS, "weight")]
    if extra:
        raise SchemaMismatch(f"unexpected column {extra[0]!r}", column=extra[0])
    rows = []
    for line, row in enumerate(reader, start=2):
        try:
            subject = row["subject_id"].strip()
            resolve_subject(model, subject)
            kind = SeparationKind.parse(row["kind"])
            score = _score(row["score"].strip())
            raw_weight = (row.get("weight") or "").strip()
            weight = _weight(raw_weight) if raw_weight else None
        except TantraError as exc:
            raise SchemaMismatch(f"line {line}: {exc.code}: {exc}", line=line) from None
        rows.append((subject, kind, score, weight))
    staged: dict[str, dict[SeparationKind, Decimal]] = {}
    for subject, kind, _, weight in rows:
        if weight is not None:
            staged.setdefault(resolve_subject(model, subject)[0], {})[kind] = weight
    for subject_id, new_weights in staged.items():
        existing = _profile_node(model, subject_id)
        weights = dict(_profile_from_node(model, existing).weights) if existing else {}
        weights.update(new_weights)
        _check_weights(SeparationProfile(subject_id, {}, weights))
    for subject, kind, score, weight in rows:
        set_separation(model, subject, kind, score, weight)
    return len(rows)
