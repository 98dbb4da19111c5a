"""Attribute-completeness entropy over the model.

Each element gets a completeness fraction (filled required attributes over
required attributes). Fractions fall into 11 bins: exactly 0, then (0, 10%],
(10%, 20%], ... (90%, 100%]. The report is the Shannon entropy, in bits, of
the bin distribution: 0 when every element is equally complete, up to
log2(11) when they spread evenly across all bins.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Union

from .metamodel import Aspect, ElementRef, Model, Perspective, TantraElement

BIN_COUNT = 11
BIN_LABELS = ("0%",) + tuple(f"{10 * k - 9}-{10 * k}%" for k in range(1, 11))
MAX_ENTROPY = math.log2(BIN_COUNT)

Cell = tuple[Aspect, Perspective]
Policy = Union[Mapping[Any, Iterable[str]], Callable[[TantraElement], Iterable[str]], None]


def is_filled(value: Any) -> bool:
    if value is None:
        return False
    if isinstance(value, str):
        return bool(value.strip())
    return True


def completeness(model: Model, element: ElementRef, required_attrs: Iterable[str]) -> Fraction:
    """Share of ``required_attrs`` the element fills; 1 for an empty list."""
    element = model.element(element)
    required = list(dict.fromkeys(required_attrs))
    if not required:
        return Fraction(1)
    filled = sum(1 for name in required if is_filled(element.attrs.get(name)))
    return Fraction(filled, len(required))


def completeness_bin(fraction: Fraction) -> int:
    if fraction <= 0:
        return 0
    return min(BIN_COUNT - 1, math.ceil(fraction * 10))


def entropy_bits(counts: Iterable[int]) -> float:
    counts = [c for c in counts if c > 0]
    total = sum(counts)
    if total == 0:
        return 0.0
    return sum((c / total) * math.log2(total / c) for c in counts)


@dataclass(frozen=True)
class CompletenessDistribution:
    scope: str
    counts: tuple[int, ...]
    entropy: float

    @property
    def element_count(self) -> int:
        return sum(self.counts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scope": self.scope,
            "bins": [{"range": label, "count": count}
                     for label, count in zip(BIN_LABELS, self.counts)],
            "element_count": self.element_count,
            "entropy": round(self.entropy, 12),
        }

    def to_text(self) -> str:
        lines = [f"scope: {self.scope}", f"elements: {self.element_count}"]
        lines += [f"{label:>8} {count}" for label, count in zip(BIN_LABELS, self.counts) if count]
        lines.append(f"entropy: {self.entropy:.3f}")
        return "\n".join(lines)


def _cell_key(key: Any) -> Cell:
    if isinstance(key, str):
        aspect, _, perspective = key.partition("/")
        return Aspect.parse(aspect), Perspective.parse(perspective)
    aspect, perspective = key
    return Aspect.parse(aspect), Perspective.parse(perspective)


def seen_attrs_policy(elements: Iterable[TantraElement]) -> dict[Cell, list[str]]:
    """Required attributes per cell: every attribute seen on that cell."""
    seen: dict[Cell, dict[str, None]] = {}
    for e in elements:
        seen.setdefault((e.aspect, e.perspective), {}).update(dict.fromkeys(e.attrs))
    return {cell: sorted(names) for cell, names in seen.items()}


def entropy_report(
    model: Model, scope: Aspect | str | None = None, policy: Policy = None
) -> CompletenessDistribution:
    """Completeness distribution for one aspect, or the whole model.

    ``policy`` maps cells (``(aspect, perspective)`` or ``"Who/Logical"``)
    to required attribute lists, or is a callable returning the list for an
    element. Cells missing from a mapping, and the default, use every
    attribute seen on that cell's elements across the whole model.
    """
    aspect = None if scope is None else Aspect.parse(scope)
    everything = model.elements()
    default = seen_attrs_policy(everything)
    explicit: dict[Cell, list[str]] = {}
    if isinstance(policy, Mapping):
        explicit = {_cell_key(k): list(v) for k, v in policy.items()}
    counts = [0] * BIN_COUNT
    for element in everything:
        if aspect is not None and element.aspect is not aspect:
            continue
        cell = (element.aspect, element.perspective)
        if callable(policy):
            required = list(policy(element))
        else:
            required = explicit.get(cell, default.get(cell, []))
        counts[completeness_bin(completeness(model, element, required))] += 1
    return CompletenessDistribution(
        "model" if aspect is None else aspect.value, tuple(counts), entropy_bits(counts)
    )
