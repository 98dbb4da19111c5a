"""Agriculture-sector fixtures, scheme allocation ingestion and analytics.

Allocations are stored as What/Instantiated elements (one per scheme and
fiscal year) under the "Government Schemes" class. Declared column totals
from the source table are kept apart in ``DeclaredTotal`` nodes so they never
mix with scheme rows; the consistency report compares the two.
"""

from __future__ import annotations

import csv
import io
import json
import re
from collections import deque
from collections.abc import Mapping
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Any

from . import normative
from .errors import (
    ConflictingFixture,
    DuplicateKey,
    NegativeAmount,
    SchemaMismatch,
    UnknownElement,
    UnknownScheme,
    UnknownYear,
)
from .graph import id_order
from .metamodel import (
    ROOT_NAMES,
    Aspect,
    Model,
    Perspective,
    TantraElement,
    load_fixture,
    slugify,
)
from .relators import FOUNDED_BY, RELATES, create_relator, found_relationship

SCHEME_CLASS = "Government Schemes"
DECLARED_TOTAL = "DeclaredTotal"
TOTAL_ID = "TOTAL"
ALLOCATION_COLUMNS = ("scheme_id", "name", "support_nature", "fiscal_year", "amount_inr_crore")
OPTIONAL_COLUMNS = ("categories",)
UNCATEGORIZED = "Uncategorized"
_YEAR = re.compile(r"\d{4}-\d{2}")


def data_path(name: str) -> Path:
    """Path of a file shipped in the package data directory."""
    return Path(str(resources.files("tantra") / "data" / name))


def _read_json(name: str) -> Any:
    return json.loads(data_path(name).read_text(encoding="utf-8"))


def format_inr(amount: Decimal) -> str:
    """Indian digit grouping: 130485 -> ``1,30,485``."""
    sign = "-" if amount < 0 else ""
    amount = abs(amount)
    if amount == amount.to_integral_value():
        amount = amount.quantize(Decimal(1))
    text = format(amount.normalize() if amount % 1 else amount, "f")
    whole, _, frac = text.partition(".")
    if len(whole) > 3:
        head, tail = whole[:-3], whole[-3:]
        groups = []
        while len(head) > 2:
            groups.insert(0, head[-2:])
            head = head[:-2]
        if head:
            groups.insert(0, head)
        whole = ",".join(groups + [tail])
    return sign + whole + (f".{frac}" if frac else "")


# -- fixture -----------------------------------------------------------------


@dataclass(frozen=True)
class PopulationReport:
    elements_by_aspect: dict[str, int]
    relators: int
    relationships: int
    goals: int
    interventions: int

    @property
    def total_elements(self) -> int:
        return sum(self.elements_by_aspect.values())


def _fixture_key(aspect: Aspect, perspective: Perspective, name: str) -> str:
    return f"{aspect.value.lower()}.{perspective.value.lower()}.{slugify(name)}"


def sector_fixture_document() -> dict[str, Any]:
    """The shipped sector taxonomy in :func:`load_fixture` form."""
    amap = _read_json("aspects_map.json")
    described = dict(amap["class_descriptions"])
    described.update({p["name"]: p["description"] for p in _read_json("participants.json")})
    separations = _read_json("separations.json")
    described.update({s["name"]: s["description"] for s in separations})
    reforms = _read_json("reforms.json")
    pools = {
        "@support_categories": {c["name"]: c["description"]
                                for c in _read_json("support_categories.json")},
        "@problems": {r["name"]: r["description"] for r in reforms["problems"]},
        "@issues": {r["name"]: r["description"] for r in reforms["issues"]},
        "@reforms": {r["name"]: r["description"] for r in reforms["reforms"]},
        "@separations": {},
    }

    elements: list[dict[str, Any]] = []
    for aspect in Aspect:
        root_key = _fixture_key(aspect, Perspective.CONTEXTUAL, "root")
        elements.append({
            "key": root_key, "aspect": aspect.value, "perspective": "Contextual",
            "name": ROOT_NAMES[aspect],
            "attrs": {"description": f"All {ROOT_NAMES[aspect].lower()} in the sector"},
        })
        classes = amap.get(aspect.value, {})
        if isinstance(classes, str):
            classes = {s["name"]: {} for s in separations} if classes == "@separations" else {}
        names = list(classes)
        if aspect is Aspect.WHO:
            names = [p["name"] for p in _read_json("participants.json")]
        for name in names:
            class_key = _fixture_key(aspect, Perspective.CONCEPTUAL, name)
            elements.append({
                "key": class_key, "aspect": aspect.value, "perspective": "Conceptual",
                "name": name, "attrs": {"description": described[name]}, "parents": [root_key],
            })
            members = classes.get(name, {})
            if isinstance(members, str):
                members = pools[members]
            for item, description in members.items():
                elements.append({
                    "key": _fixture_key(aspect, Perspective.LOGICAL, item),
                    "aspect": aspect.value, "perspective": "Logical", "name": item,
                    "attrs": {"description": description}, "parents": [class_key],
                })
    return {"elements": elements, "exemplars": amap["exemplars"]}


def _qualified(model: Model, ref: str) -> TantraElement:
    """Resolve ``"Aspect:Display Name"`` against fixture elements."""
    aspect_name, _, name = ref.partition(":")
    aspect = Aspect.parse(aspect_name)
    for perspective in (Perspective.CONCEPTUAL, Perspective.LOGICAL):
        found = model.find(_fixture_key(aspect, perspective, name))
        if found is not None:
            return found
    raise UnknownElement(ref)


def load_sector_fixture(model: Model) -> PopulationReport:
    """Populate the sector taxonomy, relator exemplars, goals and the
    price-deficiency intervention record."""
    doc = sector_fixture_document()
    goal_specs = _read_json("goals.json")
    toc = _read_json("price_deficiency_toc.json")
    taken = [g["key"] for g in goal_specs if model.store.query(normative.GOAL, [("key", g["key"])])]
    if model.store.query(normative.INTERVENTION, [("key", toc["key"])]):
        taken.append(toc["key"])
    uids = [ex["relator"]["unique_id"] for ex in doc["exemplars"]]
    taken += [u for u in uids if model.unique_id_owner(Aspect.RELATORS, u)]
    if taken:
        raise ConflictingFixture(f"fixture records already in the model: {', '.join(taken)}")
    load_fixture(model, doc)

    relator_count = relationship_count = 0
    for exemplar in doc["exemplars"]:
        spec = exemplar["relator"]
        relator = create_relator(
            model, spec["kind"], [_qualified(model, r) for r in spec["mediates"]],
            name=spec["name"], unique_id=spec["unique_id"],
        )
        relator_count += 1
        for rel in exemplar["relationships"]:
            a, b = (_qualified(model, r) for r in rel["between"])
            found_relationship(model, relator, a, b, rel["kind"], unique_id=rel["unique_id"])
            relationship_count += 1

    for spec in goal_specs:
        target = normative.Target.parse(spec["target"], unit=spec.get("unit", ""))
        normative.define_goal(model, spec["dimension"], spec["statement"], spec["metric"],
                              target, spec["review_period_days"], key=spec["key"])
    normative.register_intervention(model, toc)

    counts = {a.value: len(model.elements(a)) for a in Aspect}
    return PopulationReport(counts, relator_count, relationship_count, len(goal_specs), 1)


def price_deficiency_record() -> dict[str, Any]:
    """The shipped intervention record, as importable JSON."""
    return _read_json("price_deficiency_toc.json")


def support_categories() -> list[dict[str, str]]:
    return _read_json("support_categories.json")


def default_scheme_categories() -> dict[str, list[str]]:
    return _read_json("scheme_categories.json")


# -- allocations -----------------------------------------------------------------


@dataclass(frozen=True)
class Allocation:
    id: str
    scheme_id: str
    name: str
    support_nature: str
    fiscal_year: str
    amount: Decimal
    categories: tuple[str, ...]


@dataclass(frozen=True)
class YearTotals:
    fiscal_year: str
    computed: Decimal
    declared: Decimal | None

    @property
    def delta(self) -> Decimal | None:
        return None if self.declared is None else self.declared - self.computed


@dataclass(frozen=True)
class Anomaly:
    code: str
    subject: str
    detail: str


@dataclass(frozen=True)
class ConsistencyReport:
    years: list[YearTotals]
    anomalies: list[Anomaly]

    @property
    def has_anomalies(self) -> bool:
        return bool(self.anomalies)

    def year(self, fiscal_year: str) -> YearTotals:
        for totals in self.years:
            if totals.fiscal_year == fiscal_year:
                return totals
        raise UnknownYear(f"no allocations for fiscal year {fiscal_year}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "years": [
                {"fiscal_year": y.fiscal_year, "computed_total": y.computed,
                 "declared_total": y.declared, "delta": y.delta}
                for y in self.years
            ],
            "anomalies": [{"code": a.code, "subject": a.subject, "detail": a.detail}
                          for a in self.anomalies],
        }

    def to_text(self) -> str:
        lines = []
        for y in self.years:
            line = f"{y.fiscal_year}: computed {format_inr(y.computed)}"
            if y.declared is not None:
                line += f", declared {format_inr(y.declared)}, delta {format_inr(y.delta)}"
            lines.append(line)
        for a in self.anomalies:
            lines.append(f"{a.code} {a.subject}: {a.detail}")
        return "\n".join(lines)


@dataclass(frozen=True)
class IngestResult:
    count: int
    report: ConsistencyReport


@dataclass(frozen=True)
class _Row:
    line: int
    scheme_id: str
    name: str
    support_nature: str
    fiscal_year: str
    amount: Decimal
    categories: tuple[str, ...] = field(default=())


def _parse_amount(raw: str, line: int) -> Decimal:
    cleaned = raw.strip().replace(",", "")
    try:
        amount = Decimal(cleaned)
    except InvalidOperation:
        raise SchemaMismatch(f"line {line}: amount_inr_crore {raw!r} is not a number",
                             column="amount_inr_crore", line=line) from None
    if not amount.is_finite():
        raise SchemaMismatch(f"line {line}: amount_inr_crore must be finite",
                             column="amount_inr_crore", line=line)
    if amount < 0:
        raise NegativeAmount(f"line {line}: negative amount {raw.strip()}")
    return amount


def _parse_allocations(text: str, mapping: Mapping[str, list[str]]) -> list[_Row]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaMismatch("allocations CSV is empty", line=1) from None
    for column in ALLOCATION_COLUMNS:
        if column not in header:
            raise SchemaMismatch(f"allocations CSV is missing column {column!r}", column=column,
                                 line=1)
    for column in header:
        if column not in ALLOCATION_COLUMNS and column not in OPTIONAL_COLUMNS:
            raise SchemaMismatch(f"unexpected column {column!r}", column=column, line=1)
    index = {c: header.index(c) for c in header}
    rows = []
    for line, raw in enumerate(reader, start=2):
        if not any(cell.strip() for cell in raw):
            continue
        if len(raw) != len(header):
            raise SchemaMismatch(f"line {line}: expected {len(header)} fields, got {len(raw)}",
                                 line=line)
        cells = {c: raw[i].strip() for c, i in index.items()}
        for column in ("scheme_id", "name", "fiscal_year"):
            if not cells[column]:
                raise SchemaMismatch(f"line {line}: {column} is empty", column=column, line=line)
        if not _YEAR.fullmatch(cells["fiscal_year"]):
            raise SchemaMismatch(f"line {line}: fiscal_year {cells['fiscal_year']!r} is not "
                                 "of the form YYYY-YY", column="fiscal_year", line=line)
        if cells.get("categories"):
            categories = tuple(c.strip() for c in cells["categories"].split(";") if c.strip())
        else:
            categories = tuple(mapping.get(cells["scheme_id"], ()))
        rows.append(_Row(line, cells["scheme_id"], cells["name"], cells["support_nature"],
                         cells["fiscal_year"], _parse_amount(cells["amount_inr_crore"], line),
                         categories))
    return rows


def _declared_node(model: Model, fiscal_year: str) -> str | None:
    found = model.store.query(DECLARED_TOTAL, [("period", fiscal_year)])
    return found[0].id if found else None


def ingest_allocations(
    model: Model,
    source: str | Path,
    categories: Mapping[str, list[str]] | None = None,
) -> IngestResult:
    """Ingest a scheme allocation CSV. Rows with scheme_id ``TOTAL`` are
    declared column totals. Nothing is written unless every row is valid."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) else source
    mapping = default_scheme_categories() if categories is None else categories
    rows = _parse_allocations(text, mapping)

    seen: set[tuple[str, str]] = set()
    for row in rows:
        slot = (row.scheme_id, row.fiscal_year)
        if slot in seen:
            raise DuplicateKey(f"line {row.line}: {row.scheme_id} {row.fiscal_year} repeated")
        seen.add(slot)
        if row.scheme_id == TOTAL_ID:
            clash = _declared_node(model, row.fiscal_year) is not None
        else:
            clash = model.unique_id_owner(Aspect.WHAT, f"{row.scheme_id}@{row.fiscal_year}") is not None
        if clash:
            raise DuplicateKey(f"line {row.line}: {row.scheme_id} {row.fiscal_year} "
                               "is already in the store")

    count = 0
    schema = model.ensure_chain(Aspect.WHAT, SCHEME_CLASS,
                                node_labels="What,Instantiated", edge_kinds="reifies")
    for row in rows:
        if row.scheme_id == TOTAL_ID:
            model.store.add_node({DECLARED_TOTAL}, {"period": row.fiscal_year, "amount": row.amount})
            continue
        element = model.declare_element(
            Aspect.WHAT, Perspective.INSTANTIATED, row.name,
            {
                "unique_id": f"{row.scheme_id}@{row.fiscal_year}",
                "scheme_id": row.scheme_id,
                "support_nature": row.support_nature,
                "fiscal_year": row.fiscal_year,
                "amount": row.amount,
                "categories": ",".join(row.categories),
            },
        )
        model.reify(schema, element)
        count += 1
    return IngestResult(count, consistency_report(model))


def allocations(model: Model, fiscal_year: str | None = None) -> list[Allocation]:
    """Stored scheme rows in id order, optionally for one fiscal year."""
    filters = [] if fiscal_year is None else [("fiscal_year", fiscal_year)]
    found = []
    for node in model.store.query("What", filters):
        a = node.attrs
        if "scheme_id" not in a or "amount" not in a:
            continue
        cats = tuple(c for c in str(a.get("categories", "")).split(",") if c)
        found.append(Allocation(node.id, str(a["scheme_id"]), str(a["display_name"]),
                                str(a.get("support_nature", "")), str(a["fiscal_year"]),
                                a["amount"], cats))
    return found


def consistency_report(model: Model) -> ConsistencyReport:
    """Computed vs declared totals per fiscal year plus coverage gaps."""
    rows = allocations(model)
    computed: dict[str, Decimal] = {}
    by_scheme: dict[str, set[str]] = {}
    for row in rows:
        computed[row.fiscal_year] = computed.get(row.fiscal_year, Decimal(0)) + row.amount
        by_scheme.setdefault(row.scheme_id, set()).add(row.fiscal_year)
    declared = {
        str(n.attrs["period"]): n.attrs["amount"] for n in model.store.nodes(DECLARED_TOTAL)
    }
    years = sorted(set(computed) | set(declared))
    totals = [YearTotals(y, computed.get(y, Decimal(0)), declared.get(y)) for y in years]
    anomalies = []
    for t in totals:
        if t.delta:
            anomalies.append(Anomaly(
                "TotalMismatch", t.fiscal_year,
                f"declared {format_inr(t.declared)} vs computed {format_inr(t.computed)}, "
                f"delta {format_inr(t.delta)}",
            ))
    all_years = sorted(computed)
    for scheme_id in sorted(by_scheme):
        for year in all_years:
            if year not in by_scheme[scheme_id]:
                anomalies.append(Anomaly("MissingYear", scheme_id, f"no allocation for {year}"))
    return ConsistencyReport(totals, anomalies)


@dataclass(frozen=True)
class SummaryRow:
    label: str
    name: str
    amount: Decimal
    share: Decimal


def allocation_summary(model: Model, fiscal_year: str, group_by: str = "scheme") -> list[SummaryRow]:
    """Rows for one year, largest first, with each row's share of the
    computed total. Multi-category schemes count under their first category."""
    rows = allocations(model, fiscal_year)
    if not rows:
        raise UnknownYear(f"no allocations for fiscal year {fiscal_year}")
    total = sum((r.amount for r in rows), Decimal(0))
    if group_by == "scheme":
        grouped = [(r.scheme_id, r.name, r.amount) for r in rows]
    elif group_by == "category":
        names = {c["id"]: c["name"] for c in support_categories()}
        sums: dict[str, Decimal] = {}
        for r in rows:
            primary = r.categories[0] if r.categories else UNCATEGORIZED
            sums[primary] = sums.get(primary, Decimal(0)) + r.amount
        grouped = [(c, names.get(c, c), amount) for c, amount in sums.items()]
    else:
        raise ValueError(f"group_by must be 'scheme' or 'category', got {group_by!r}")
    grouped.sort(key=lambda g: g[1])
    grouped.sort(key=lambda g: g[2], reverse=True)
    return [SummaryRow(label, name, amount, amount / total if total else Decimal(0))
            for label, name, amount in grouped]


def scheme_amount(model: Model, scheme_id: str, fiscal_year: str) -> Decimal:
    owner = model.unique_id_owner(Aspect.WHAT, f"{scheme_id}@{fiscal_year}")
    if owner is None:
        raise UnknownScheme(f"no allocation for {scheme_id} in {fiscal_year}")
    return model.store.get_node(owner).attrs["amount"]


def year_over_year(model: Model, scheme_id: str, earlier: str, later: str) -> Decimal:
    return scheme_amount(model, scheme_id, later) / scheme_amount(model, scheme_id, earlier)


def scheme_reach_query(model: Model, scheme_id: str) -> list[TantraElement]:
    """Who elements reachable from a scheme through relator-founded
    relationships, in id order. An empty list means the scheme is unlinked."""
    starts = [a.id for a in allocations(model) if a.scheme_id == scheme_id]
    if not starts:
        try:
            element = model.element(scheme_id)
        except UnknownElement:
            raise UnknownScheme(f"no such scheme: {scheme_id}") from None
        starts = [element.id]
    visited = set(starts)
    queue = deque(starts)
    reached: set[str] = set()
    while queue:
        current = queue.popleft()
        for rel_id in model.store.incoming(current, RELATES):
            if not model.store.neighbors(rel_id, FOUNDED_BY):
                continue
            for other in model.store.neighbors(rel_id, RELATES):
                if other in visited:
                    continue
                visited.add(other)
                queue.append(other)
                if model.element(other).aspect is Aspect.WHO:
                    reached.add(other)
    return [model.element(n) for n in sorted(reached, key=id_order)]
