"""The 9-aspect x 5-perspective element matrix and reification chains.

Every element is a graph node labelled with exactly one aspect and one
perspective. Reification links ("reifies" edges) refine an element one
perspective level at a time, Contextual -> Conceptual -> Logical -> Physical
-> Instantiated, always within one aspect. A child may be reified from several
parents, so the chains of an aspect form a DAG.
"""

from __future__ import annotations

import json
import re
from collections import deque
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Union

from .errors import (
    AspectMismatch,
    ConflictingFixture,
    DuplicateElementKey,
    DuplicateUniqueId,
    EmptyName,
    InvalidAspect,
    InvalidAttribute,
    InvalidPerspective,
    LevelReversal,
    LevelSkip,
    MissingUniqueId,
    UnknownElement,
)
from .graph import GraphStore, Scalar, id_order

REIFIES = "reifies"
RESERVED_ATTRS = frozenset({"display_name", "key"})


class Aspect(str, Enum):
    WHO = "Who"
    WHERE = "Where"
    WHAT = "What"
    WHEN = "When"
    HOW = "How"
    WHY = "Why"
    RELATIONSHIPS = "Relationships"
    RELATORS = "Relators"
    SEPARATIONS = "Separations"

    @classmethod
    def parse(cls, value: Aspect | str) -> Aspect:
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            folded = value.strip().casefold()
            for member in cls:
                if folded in (member.value.casefold(), member.name.casefold()):
                    return member
        raise InvalidAspect(value, [m.value for m in cls])

    def __str__(self) -> str:
        return self.value


_LEVELS = ("Contextual", "Conceptual", "Logical", "Physical", "Instantiated")


class Perspective(str, Enum):
    CONTEXTUAL = "Contextual"
    CONCEPTUAL = "Conceptual"
    LOGICAL = "Logical"
    PHYSICAL = "Physical"
    INSTANTIATED = "Instantiated"

    @property
    def level(self) -> int:
        return _LEVELS.index(self.value)

    @classmethod
    def parse(cls, value: Perspective | str) -> Perspective:
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            folded = value.strip().casefold()
            for member in cls:
                if folded in (member.value.casefold(), member.name.casefold()):
                    return member
        raise InvalidPerspective(value, list(_LEVELS))

    @classmethod
    def at(cls, level: int) -> Perspective:
        return cls(_LEVELS[level])

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Perspective):
            return NotImplemented
        return self.level < other.level

    def __le__(self, other: object) -> bool:
        if not isinstance(other, Perspective):
            return NotImplemented
        return self.level <= other.level

    def __gt__(self, other: object) -> bool:
        if not isinstance(other, Perspective):
            return NotImplemented
        return self.level > other.level

    def __ge__(self, other: object) -> bool:
        if not isinstance(other, Perspective):
            return NotImplemented
        return self.level >= other.level

    def __str__(self) -> str:
        return self.value


ASPECT_LABELS = frozenset(a.value for a in Aspect)
PERSPECTIVE_LABELS = frozenset(_LEVELS)

ROOT_NAMES = {
    Aspect.WHO: "People and Communities",
    Aspect.WHERE: "Places and Zones",
    Aspect.WHAT: "Assets and Attributes",
    Aspect.WHEN: "Events",
    Aspect.HOW: "Processes",
    Aspect.WHY: "Development Metrics",
    Aspect.RELATIONSHIPS: "Relationships",
    Aspect.RELATORS: "Relators",
    Aspect.SEPARATIONS: "Market Separations",
}


@dataclass(frozen=True)
class TantraElement:
    id: str
    aspect: Aspect
    perspective: Perspective
    display_name: str
    attrs: dict[str, Scalar] = field(default_factory=dict)

    @property
    def key(self) -> str:
        return str(self.attrs.get("key", ""))

    @property
    def unique_id(self) -> Scalar | None:
        return self.attrs.get("unique_id")


ElementRef = Union[TantraElement, str]


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    detail: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "subject": self.subject, "detail": self.detail}


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.casefold()).strip("-")
    return slug or "element"


class Model:
    """Tantra matrix view over a :class:`GraphStore`."""

    def __init__(self, store: GraphStore | None = None) -> None:
        self.store = store if store is not None else GraphStore()
        self._keys: dict[str, str] = {}
        self._uids: dict[tuple[Aspect, str], str] = {}
        for node in self.store.nodes():
            cell = self._cell_of(node.labels)
            if cell is None:
                continue
            key = node.attrs.get("key")
            if isinstance(key, str):
                self._keys.setdefault(key, node.id)
            uid = node.attrs.get("unique_id")
            if cell[1] is Perspective.INSTANTIATED and uid not in (None, ""):
                self._uids.setdefault((cell[0], str(uid)), node.id)

    @classmethod
    def load(cls, path: str | Path) -> Model:
        return cls(GraphStore.load(path))

    def save(self, path: str | Path) -> None:
        self.store.save(path)

    # -- elements ------------------------------------------------------------

    def declare_element(
        self,
        aspect: Aspect | str,
        perspective: Perspective | str,
        display_name: str,
        attrs: Mapping[str, Any] | None = None,
        key: str | None = None,
    ) -> TantraElement:
        aspect = Aspect.parse(aspect)
        perspective = Perspective.parse(perspective)
        if not isinstance(display_name, str) or not display_name.strip():
            raise EmptyName()
        attrs = dict(attrs or {})
        clash = RESERVED_ATTRS & attrs.keys()
        if clash:
            raise InvalidAttribute(f"reserved attribute names: {', '.join(sorted(clash))}")
        uid_slot = None
        if perspective is Perspective.INSTANTIATED:
            if attrs.get("unique_id") in (None, ""):
                raise MissingUniqueId(display_name)
            uid_slot = (aspect, str(attrs["unique_id"]))
            if self.unique_id_owner(aspect, attrs["unique_id"]) is not None:
                raise DuplicateUniqueId(
                    f"{aspect.value} unique_id {attrs['unique_id']!r} is already taken"
                )
        if key is None:
            key = self._fresh_key(aspect, perspective, display_name)
        elif key in self._keys and self.store.has_node(self._keys[key]):
            raise DuplicateElementKey(key)
        attrs["display_name"] = display_name
        attrs["key"] = key
        node_id = self.store.add_node({aspect.value, perspective.value}, attrs)
        self._keys[key] = node_id
        if uid_slot is not None:
            self._uids[uid_slot] = node_id
        return self.element(node_id)

    def unique_id_owner(self, aspect: Aspect | str, unique_id: Scalar) -> str | None:
        """Node id of the live Instantiated element holding ``unique_id``, if any."""
        node_id = self._uids.get((Aspect.parse(aspect), str(unique_id)))
        if node_id is None or not self.store.has_node(node_id):
            return None
        return node_id

    def fresh_unique_id(self, aspect: Aspect | str, prefix: str) -> str:
        aspect = Aspect.parse(aspect)
        n = len(self.cell(aspect, Perspective.INSTANTIATED)) + 1
        while self.unique_id_owner(aspect, f"{prefix}-{n:04d}") is not None:
            n += 1
        return f"{prefix}-{n:04d}"

    def _fresh_key(self, aspect: Aspect, perspective: Perspective, name: str) -> str:
        base = f"{aspect.value.lower()}.{perspective.value.lower()}.{slugify(name)}"
        candidate, n = base, 1
        while self.find(candidate) is not None:
            n += 1
            candidate = f"{base}-{n}"
        return candidate

    @staticmethod
    def _cell_of(labels: Iterable[str]) -> tuple[Aspect, Perspective] | None:
        labels = set(labels)
        aspects = labels & ASPECT_LABELS
        perspectives = labels & PERSPECTIVE_LABELS
        if len(aspects) != 1 or len(perspectives) != 1:
            return None
        return Aspect(next(iter(aspects))), Perspective(next(iter(perspectives)))

    def is_element(self, node_id: str) -> bool:
        return self.store.has_node(node_id) and (
            self._cell_of(self.store.get_node(node_id).labels) is not None
        )

    def find(self, key: str) -> TantraElement | None:
        """Element by key. Elements added to the store behind the model's back
        are only visible after re-wrapping the store in a new Model."""
        node_id = self._keys.get(key)
        if node_id is not None and self.store.has_node(node_id):
            element = self._build(node_id)
            if element is not None and element.key == key:
                return element
        return None

    def _build(self, node_id: str) -> TantraElement | None:
        node = self.store.get_node(node_id)
        cell = self._cell_of(node.labels)
        if cell is None:
            return None
        return TantraElement(node.id, cell[0], cell[1], str(node.attrs.get("display_name", "")),
                             node.attrs)

    def element(self, ref: ElementRef) -> TantraElement:
        """Resolve an element object, node id or element key."""
        if isinstance(ref, TantraElement):
            ref = ref.id
        if isinstance(ref, str):
            if self.store.has_node(ref):
                element = self._build(ref)
                if element is not None:
                    return element
            else:
                element = self.find(ref)
                if element is not None:
                    return element
        raise UnknownElement(ref)

    def elements(self, aspect: Aspect | str | None = None) -> list[TantraElement]:
        if aspect is None:
            pool = sorted({n for a in ASPECT_LABELS for n in self.store.node_ids(a)}, key=id_order)
        else:
            pool = self.store.node_ids(Aspect.parse(aspect).value)
        return [e for e in (self._build(n) for n in pool) if e is not None]

    def cell(self, aspect: Aspect | str, perspective: Perspective | str) -> list[TantraElement]:
        aspect = Aspect.parse(aspect)
        perspective = Perspective.parse(perspective)
        wanted = set(self.store.node_ids(perspective.value))
        pool = [n for n in self.store.node_ids(aspect.value) if n in wanted]
        return [e for e in (self._build(n) for n in pool) if e is not None]

    # -- reification ---------------------------------------------------------

    def reify(self, parent: ElementRef, child: ElementRef) -> str:
        parent = self.element(parent)
        child = self.element(child)
        if parent.aspect is not child.aspect:
            raise AspectMismatch(
                f"cannot reify {parent.aspect.value} element {parent.id} into "
                f"{child.aspect.value} element {child.id}"
            )
        step = child.perspective.level - parent.perspective.level
        if step <= 0:
            raise LevelReversal(
                f"{child.id} ({child.perspective.value}) is not below "
                f"{parent.id} ({parent.perspective.value})"
            )
        if step > 1:
            raise LevelSkip(
                f"{parent.perspective.value} -> {child.perspective.value} skips "
                f"{step - 1} level(s)"
            )
        existing = self.store.edges(src=parent.id, dst=child.id, kind=REIFIES)
        if existing:
            return existing[0].id
        return self.store.add_edge(parent.id, child.id, REIFIES)

    def parents(self, element: ElementRef) -> list[TantraElement]:
        node_id = self.element(element).id
        return [e for e in (self._build(n) for n in self.store.incoming(node_id, REIFIES))
                if e is not None]

    def children(self, element: ElementRef) -> list[TantraElement]:
        node_id = self.element(element).id
        return [e for e in (self._build(n) for n in self.store.neighbors(node_id, REIFIES))
                if e is not None]

    def chain(self, element: ElementRef) -> list[tuple[TantraElement, TantraElement]]:
        """All (parent, child) links above ``element``, nearest first."""
        links = []
        seen: set[str] = set()
        queue = deque([self.element(element)])
        while queue:
            current = queue.popleft()
            for parent in self.parents(current):
                links.append((parent, current))
                if parent.id not in seen:
                    seen.add(parent.id)
                    queue.append(parent)
        return links

    def ensure_chain(
        self,
        aspect: Aspect | str,
        name: str,
        *,
        node_labels: str | None = None,
        edge_kinds: str = REIFIES,
    ) -> TantraElement:
        """Return the Physical element under the Conceptual class ``name``.

        Missing levels are scaffolded (root, class, relation, network schema)
        so that instances hung below the result are never orphans.
        """
        aspect = Aspect.parse(aspect)
        roots = self.cell(aspect, Perspective.CONTEXTUAL)
        if roots:
            root = roots[0]
        else:
            root = self.declare_element(
                aspect, Perspective.CONTEXTUAL, ROOT_NAMES[aspect],
                {"description": f"All {ROOT_NAMES[aspect].lower()} known to the model"},
                key=self._fresh_key(aspect, Perspective.CONTEXTUAL, "root"),
            )
        folded = name.casefold()
        concept = next((e for e in self.cell(aspect, Perspective.CONCEPTUAL)
                        if e.display_name.casefold() == folded), None)
        if concept is None:
            concept = self.declare_element(aspect, Perspective.CONCEPTUAL, name,
                                           {"description": f"What makes one a {name}"})
            self.reify(root, concept)
        current = concept
        for perspective, suffix in ((Perspective.LOGICAL, "relation"),
                                    (Perspective.PHYSICAL, "network schema")):
            below = [c for c in self.children(current) if c.perspective is perspective]
            if below:
                current = below[0]
                continue
            attrs: dict[str, Any] = {"description": f"{suffix.capitalize()} for {name}"}
            if perspective is Perspective.PHYSICAL:
                attrs["node_labels"] = node_labels or f"{aspect.value},Instantiated"
                attrs["edge_kinds"] = edge_kinds
            child = self.declare_element(aspect, perspective, f"{name} {suffix}", attrs)
            self.reify(current, child)
            current = child
        return current

    # -- validation ----------------------------------------------------------

    def validate_model(self) -> list[Violation]:
        """Every structural violation in the model; empty iff well-formed."""
        violations: list[Violation] = []
        elements: dict[str, TantraElement] = {}
        ambiguous: set[str] = set()
        for label in sorted(ASPECT_LABELS | PERSPECTIVE_LABELS):
            for node_id in self.store.node_ids(label):
                if node_id in elements or node_id in ambiguous:
                    continue
                element = self._build(node_id)
                if element is None:
                    ambiguous.add(node_id)
                    labels = sorted(self.store.get_node(node_id).labels)
                    violations.append(Violation(
                        "AmbiguousCell", node_id,
                        f"labels {labels} do not name exactly one aspect and one perspective",
                    ))
                    continue
                elements[node_id] = element

        seen_uids: dict[tuple[Aspect, str], str] = {}
        for element in elements.values():
            if element.perspective is not Perspective.INSTANTIATED:
                continue
            uid = element.attrs.get("unique_id")
            if uid in (None, ""):
                violations.append(Violation("MissingUniqueId", element.id,
                                            f"{element.display_name!r} has no unique_id"))
                continue
            slot = (element.aspect, str(uid))
            if slot in seen_uids:
                violations.append(Violation(
                    "DuplicateUniqueId", element.id,
                    f"unique_id {uid!r} already used by {seen_uids[slot]}",
                ))
            else:
                seen_uids[slot] = element.id

        good_children: dict[str, list[str]] = {}
        for edge in self.store.edges(kind=REIFIES):
            parent = elements.get(edge.src)
            child = elements.get(edge.dst)
            if parent is None or child is None:
                violations.append(Violation("ReifiesNonElement", edge.id,
                                            f"{edge.src} -> {edge.dst} links a non-element"))
                continue
            if parent.aspect is not child.aspect:
                violations.append(Violation(
                    "MixedAspectChain", edge.id,
                    f"{parent.aspect.value} {parent.id} -> {child.aspect.value} {child.id}",
                ))
                continue
            step = child.perspective.level - parent.perspective.level
            if step != 1:
                code = "LevelSkip" if step > 1 else "LevelReversal"
                violations.append(Violation(
                    code, edge.id,
                    f"{parent.perspective.value} -> {child.perspective.value}",
                ))
                continue
            good_children.setdefault(parent.id, []).append(child.id)

        rooted = set()
        queue = deque(e.id for e in elements.values()
                      if e.perspective is Perspective.CONTEXTUAL)
        while queue:
            node_id = queue.popleft()
            if node_id in rooted:
                continue
            rooted.add(node_id)
            queue.extend(good_children.get(node_id, ()))
        for element in elements.values():
            if element.perspective is Perspective.INSTANTIATED and element.id not in rooted:
                violations.append(Violation(
                    "OrphanInstance", element.id,
                    f"{element.display_name!r} has no reification chain up to Contextual",
                ))

        violations.sort(key=lambda v: (id_order(v.subject), v.code))
        return violations


def load_fixture(model: Model, source: Mapping[str, Any] | str | Path) -> dict[str, TantraElement]:
    """Declare the elements and reification links described by a fixture.

    The fixture is ``{"elements": [{"key", "aspect", "perspective", "name",
    "attrs", "parents": [keys]}], "links": [[parent_key, child_key], ...]}``.
    Keys already present in the model raise :class:`ConflictingFixture`
    before anything is written.
    """
    doc = source if isinstance(source, Mapping) else json.loads(Path(source).read_text("utf-8"))
    specs = list(doc.get("elements", []))
    keys = [spec["key"] for spec in specs]
    dupes = sorted({k for k in keys if keys.count(k) > 1})
    if dupes:
        raise ConflictingFixture(f"fixture repeats keys: {', '.join(dupes)}")
    taken = sorted(k for k in keys if model.find(k) is not None)
    if taken:
        raise ConflictingFixture(f"fixture keys already in the model: {', '.join(taken)}")
    for spec in specs:
        Aspect.parse(spec["aspect"])
        Perspective.parse(spec["perspective"])

    declared: dict[str, TantraElement] = {}
    for spec in specs:
        declared[spec["key"]] = model.declare_element(
            spec["aspect"], spec["perspective"], spec["name"], spec.get("attrs"), key=spec["key"]
        )
    links = [(p, spec["key"]) for spec in specs for p in spec.get("parents", [])]
    links.extend(tuple(link) for link in doc.get("links", []))
    for parent_key, child_key in links:
        parent = declared.get(parent_key) or model.element(parent_key)
        child = declared.get(child_key) or model.element(child_key)
        model.reify(parent, child)
    return declared
