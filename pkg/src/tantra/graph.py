"""Typed property-graph store with canonical JSON persistence.

Nodes carry a set of labels and a flat map of scalar attributes; edges are
directed, typed by ``kind`` and may carry attributes too. Identifiers are
assigned by the store ("n00000001", "e00000001") from monotonic counters that
are persisted with the snapshot, so an id is never handed out twice.

The store follows a single-writer / multiple-reader contract: reads never
mutate internal state, writes need exclusive access. There is no locking.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from datetime import date, datetime
from decimal import Decimal
from pathlib import Path
from typing import Any, Union

from .errors import (
    DanglingEndpoint,
    EmptyKind,
    EmptyLabels,
    InvalidAttribute,
    ParseError,
    UnknownEdge,
    UnknownNode,
    VersionMismatch,
)

FORMAT_VERSION = 1

Scalar = Union[str, int, Decimal, bool, date]
AttrMap = Mapping[str, Scalar]
Predicate = Union[Callable[[Scalar], bool], Scalar]


@dataclass(frozen=True)
class NodeRecord:
    id: str
    labels: frozenset[str]
    attrs: dict[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class EdgeRecord:
    id: str
    src: str
    dst: str
    kind: str
    attrs: dict[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class GraphSnapshot:
    nodes: list[NodeRecord]
    edges: list[EdgeRecord]
    format_version: int = FORMAT_VERSION


def id_order(identifier: str) -> tuple[int, str]:
    """Sort key that keeps "n00000010" after "n00000009" past 8 digits too."""
    return (len(identifier), identifier)


def normalize_value(name: str, value: Any) -> Scalar:
    if isinstance(value, bool):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidAttribute(f"attribute {name!r}: non-finite number {value!r}")
        return Decimal(repr(value))
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise InvalidAttribute(f"attribute {name!r}: non-finite decimal {value!r}")
        return value
    if isinstance(value, datetime):
        raise InvalidAttribute(f"attribute {name!r}: datetimes are not supported, use a date")
    if isinstance(value, (str, date)):
        return value
    raise InvalidAttribute(
        f"attribute {name!r}: unsupported value type {type(value).__name__}"
        " (scalars only: str, int, decimal, bool, date)"
    )


def _normalize_attrs(attrs: AttrMap | None) -> dict[str, Scalar]:
    out: dict[str, Scalar] = {}
    for name, value in (attrs or {}).items():
        if not isinstance(name, str) or not name:
            raise InvalidAttribute(f"attribute names must be non-empty strings, got {name!r}")
        out[name] = normalize_value(name, value)
    return out


class GraphStore:
    def __init__(self) -> None:
        self._labels: dict[str, set[str]] = {}
        self._attrs: dict[str, dict[str, Scalar]] = {}
        self._edges: dict[str, EdgeRecord] = {}
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}
        self._by_label: dict[str, set[str]] = {}
        self._next_node = 1
        self._next_edge = 1

    # -- nodes ---------------------------------------------------------------

    def add_node(self, labels: Iterable[str], attrs: AttrMap | None = None) -> str:
        label_set = set(labels)
        if not label_set:
            raise EmptyLabels()
        for label in label_set:
            if not isinstance(label, str) or not label:
                raise InvalidAttribute(f"labels must be non-empty strings, got {label!r}")
        clean = _normalize_attrs(attrs)
        node_id = f"n{self._next_node:08d}"
        self._next_node += 1
        self._insert_node(node_id, label_set, clean)
        return node_id

    def _insert_node(self, node_id: str, labels: set[str], attrs: dict[str, Scalar]) -> None:
        self._labels[node_id] = labels
        self._attrs[node_id] = attrs
        self._out[node_id] = set()
        self._in[node_id] = set()
        for label in labels:
            self._by_label.setdefault(label, set()).add(node_id)

    def has_node(self, node_id: str) -> bool:
        return node_id in self._labels

    def get_node(self, node_id: str) -> NodeRecord:
        if node_id not in self._labels:
            raise UnknownNode(node_id)
        return NodeRecord(node_id, frozenset(self._labels[node_id]), dict(self._attrs[node_id]))

    def set_attrs(self, node_id: str, attrs: Mapping[str, Any]) -> None:
        """Merge ``attrs`` into a node; a value of ``None`` removes the attribute."""
        if node_id not in self._attrs:
            raise UnknownNode(node_id)
        removals = [name for name, value in attrs.items() if value is None]
        updates = _normalize_attrs({k: v for k, v in attrs.items() if v is not None})
        target = self._attrs[node_id]
        for name in removals:
            target.pop(name, None)
        target.update(updates)

    def delete_node(self, node_id: str) -> None:
        if node_id not in self._labels:
            raise UnknownNode(node_id)
        for edge_id in list(self._out[node_id] | self._in[node_id]):
            self.delete_edge(edge_id)
        for label in self._labels[node_id]:
            bucket = self._by_label[label]
            bucket.discard(node_id)
            if not bucket:
                del self._by_label[label]
        del self._labels[node_id], self._attrs[node_id], self._out[node_id], self._in[node_id]

    def node_ids(self, label: str | None = None) -> list[str]:
        pool = self._labels.keys() if label is None else self._by_label.get(label, ())
        return sorted(pool, key=id_order)

    def nodes(self, label: str | None = None) -> Iterator[NodeRecord]:
        for node_id in self.node_ids(label):
            yield self.get_node(node_id)

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    # -- edges ---------------------------------------------------------------

    def add_edge(self, src: str, dst: str, kind: str, attrs: AttrMap | None = None) -> str:
        for endpoint in (src, dst):
            if endpoint not in self._labels:
                raise DanglingEndpoint(endpoint)
        if not isinstance(kind, str) or not kind:
            raise EmptyKind()
        edge_id = f"e{self._next_edge:08d}"
        self._next_edge += 1
        self._insert_edge(EdgeRecord(edge_id, src, dst, kind, _normalize_attrs(attrs)))
        return edge_id

    def _insert_edge(self, edge: EdgeRecord) -> None:
        self._edges[edge.id] = edge
        self._out[edge.src].add(edge.id)
        self._in[edge.dst].add(edge.id)

    def get_edge(self, edge_id: str) -> EdgeRecord:
        try:
            edge = self._edges[edge_id]
        except KeyError:
            raise UnknownEdge(edge_id) from None
        return EdgeRecord(edge.id, edge.src, edge.dst, edge.kind, dict(edge.attrs))

    def delete_edge(self, edge_id: str) -> None:
        edge = self._edges.pop(edge_id, None)
        if edge is None:
            raise UnknownEdge(edge_id)
        self._out[edge.src].discard(edge_id)
        self._in[edge.dst].discard(edge_id)

    def edges(
        self, src: str | None = None, dst: str | None = None, kind: str | None = None
    ) -> list[EdgeRecord]:
        if src is not None:
            pool: Iterable[str] = self._out.get(src, ())
        elif dst is not None:
            pool = self._in.get(dst, ())
        else:
            pool = self._edges.keys()
        found = []
        for edge_id in pool:
            edge = self._edges[edge_id]
            if dst is not None and edge.dst != dst:
                continue
            if kind is not None and edge.kind != kind:
                continue
            found.append(self.get_edge(edge_id))
        found.sort(key=lambda e: id_order(e.id))
        return found

    def neighbors(self, node_id: str, kind: str | None = None) -> list[str]:
        """Targets of outgoing edges, deduplicated, in id order."""
        if node_id not in self._labels:
            raise UnknownNode(node_id)
        return sorted({e.dst for e in self.edges(src=node_id, kind=kind)}, key=id_order)

    def incoming(self, node_id: str, kind: str | None = None) -> list[str]:
        """Sources of incoming edges, deduplicated, in id order."""
        if node_id not in self._labels:
            raise UnknownNode(node_id)
        return sorted({e.src for e in self.edges(dst=node_id, kind=kind)}, key=id_order)

    # -- query ---------------------------------------------------------------

    def query(
        self,
        label_filter: str | None = None,
        attr_filter: Iterable[tuple[str, Predicate]] = (),
    ) -> list[NodeRecord]:
        """Nodes matching the label and every attribute predicate, in id order.

        A predicate is either a callable taking the attribute value or a plain
        value compared for equality. Nodes lacking a filtered attribute never
        match.
        """
        checks = list(attr_filter)
        result = []
        for node_id in self.node_ids(label_filter):
            attrs = self._attrs[node_id]
            if all(_matches(attrs, name, pred) for name, pred in checks):
                result.append(self.get_node(node_id))
        return result

    # -- persistence ---------------------------------------------------------

    def snapshot(self) -> GraphSnapshot:
        return GraphSnapshot(
            nodes=list(self.nodes()),
            edges=[self.get_edge(e) for e in sorted(self._edges, key=id_order)],
        )

    def dumps(self) -> str:
        lines = ["{", f'  "counters": {_canon({"edge": self._next_edge, "node": self._next_node})},']
        lines.append('  "edges": [')
        edges = self.snapshot().edges
        for i, edge in enumerate(edges):
            record = {"attrs": edge.attrs, "dst": edge.dst, "id": edge.id, "kind": edge.kind,
                      "src": edge.src}
            lines.append("    " + _canon(record) + ("," if i < len(edges) - 1 else ""))
        lines.append("  ],")
        lines.append(f'  "format_version": {FORMAT_VERSION},')
        lines.append('  "nodes": [')
        node_ids = self.node_ids()
        for i, node_id in enumerate(node_ids):
            record = {"attrs": self._attrs[node_id], "id": node_id,
                      "labels": sorted(self._labels[node_id])}
            lines.append("    " + _canon(record) + ("," if i < len(node_ids) - 1 else ""))
        lines.append("  ]")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> GraphSnapshot:
        Path(path).write_text(self.dumps(), encoding="utf-8")
        return self.snapshot()

    @classmethod
    def loads(cls, text: str) -> GraphStore:
        try:
            doc = json.loads(text, parse_float=Decimal, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from None
        except ValueError as exc:
            raise ParseError(str(exc)) from None
        if not isinstance(doc, dict):
            raise ParseError("snapshot must be a JSON object")
        version = doc.get("format_version")
        if version != FORMAT_VERSION or isinstance(version, bool):
            raise VersionMismatch(version, FORMAT_VERSION)
        store = cls()
        try:
            for raw in doc.get("nodes", []):
                node_id = _require_str(raw, "id")
                if node_id in store._labels:
                    raise ParseError(f"duplicate node id {node_id}")
                labels = raw["labels"]
                if not isinstance(labels, list) or not labels or not all(
                    isinstance(label, str) and label for label in labels
                ):
                    raise ParseError(f"node {node_id}: labels must be a non-empty list of names")
                store._insert_node(node_id, set(labels), _decode_attrs(raw.get("attrs", {})))
            for raw in doc.get("edges", []):
                edge_id = _require_str(raw, "id")
                if edge_id in store._edges:
                    raise ParseError(f"duplicate edge id {edge_id}")
                src, dst = _require_str(raw, "src"), _require_str(raw, "dst")
                for endpoint in (src, dst):
                    if endpoint not in store._labels:
                        raise DanglingEndpoint(endpoint)
                store._insert_edge(
                    EdgeRecord(edge_id, src, dst, _require_str(raw, "kind"),
                               _decode_attrs(raw.get("attrs", {})))
                )
            counters = doc.get("counters", {})
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"malformed snapshot: {exc!r}") from None
        store._next_node = max(_counter(counters, "node"), _max_serial(store._labels) + 1)
        store._next_edge = max(_counter(counters, "edge"), _max_serial(store._edges) + 1)
        return store

    @classmethod
    def load(cls, path: str | Path) -> GraphStore:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _matches(attrs: Mapping[str, Scalar], name: str, pred: Predicate) -> bool:
    if name not in attrs:
        return False
    value = attrs[name]
    if callable(pred):
        return bool(pred(value))
    return value == pred and isinstance(value, bool) == isinstance(pred, bool)


def format_decimal(value: Decimal) -> str:
    text = format(value, "f")
    return text if "." in text else text + ".0"


def _canon(value: Any) -> str:
    """Compact canonical JSON: sorted keys, fixed-point decimals, tagged dates."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Decimal):
        return format_decimal(value)
    if isinstance(value, date):
        return '{"$date":' + json.dumps(value.isoformat()) + "}"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, Mapping):
        items = sorted(value.items())
        return "{" + ",".join(json.dumps(k, ensure_ascii=False) + ":" + _canon(v)
                              for k, v in items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in value) + "]"
    if value is None:
        return "null"
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


def canonical_json(value: Any) -> str:
    return _canon(value)


def _decode_attrs(raw: Any) -> dict[str, Scalar]:
    if not isinstance(raw, dict):
        raise ParseError("attrs must be an object")
    out: dict[str, Scalar] = {}
    for name, value in raw.items():
        if isinstance(value, dict):
            if set(value) != {"$date"}:
                raise ParseError(f"attribute {name!r}: nested objects are not allowed")
            try:
                value = date.fromisoformat(value["$date"])
            except (TypeError, ValueError):
                raise ParseError(f"attribute {name!r}: bad date {value['$date']!r}") from None
        try:
            out[name] = normalize_value(name, value)
        except InvalidAttribute as exc:
            raise ParseError(str(exc)) from None
    return out


def _require_str(raw: Mapping[str, Any], key: str) -> str:
    value = raw[key]
    if not isinstance(value, str) or not value:
        raise ParseError(f"field {key!r} must be a non-empty string")
    return value


def _reject_constant(token: str) -> Any:
    raise ValueError(f"non-finite number {token} is not allowed")


def _counter(counters: Any, name: str) -> int:
    value = counters.get(name, 1) if isinstance(counters, dict) else 1
    return value if isinstance(value, int) and not isinstance(value, bool) else 1


def _max_serial(ids: Iterable[str]) -> int:
    best = 0
    for identifier in ids:
        digits = identifier[1:]
        if digits.isdigit():
            best = max(best, int(digits))
    return best
