"""Ecosystem-property annotations and a seeded practice-adoption diffusion.

Diffusion model: every step, each actor that has not adopted yet adopts with
probability ``p = min(1, p0 + beta * f)``, where ``f`` is the fraction of its
neighbours that had adopted at the start of the step. Adoption is absorbing.

Randomness is SplitMix64 addressed by position: the draw for actor slot ``i``
(actors sorted by id) at step ``t`` is ``u(seed, t * n + i + 1)``. Only actors
still susceptible consume their draw, in ascending id order. Because the
address does not depend on earlier outcomes, two runs with the same seed see
the same uniform for the same (step, actor), which makes the model monotone
in ``p0`` and ``beta`` run by run.
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from .errors import (
    AsymmetricAdjacency,
    InvalidProbability,
    InvalidProperty,
    InvalidScenario,
    UnknownElement,
    UnknownSubject,
)
from .metamodel import ElementRef, Model

ANNOTATION = "Annotation"
ANNOTATES = "annotates"

_MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def splitmix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def uniform(seed: int, k: int) -> float:
    """The ``k``-th uniform in [0, 1) of the stream for ``seed``."""
    z = splitmix64((seed + k * GAMMA) & _MASK)
    return (z >> 11) * 2.0**-53


def _uniform_batch(seeds: np.ndarray, k: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = seeds + np.uint64((k * GAMMA) & _MASK)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


# -- annotations -------------------------------------------------------------------


class EcosystemProperty(str, Enum):
    COEVOLUTION_COMPETITIVE = "Coevolution-Competitive"
    COEVOLUTION_MUTUALISTIC = "Coevolution-Mutualistic"
    COEVOLUTION_EXPLOITATIVE = "Coevolution-Exploitative"
    SELF_ORGANIZATION = "SelfOrganization"
    EMERGENCE = "Emergence"
    ADAPTATION = "Adaptation"

    @classmethod
    def parse(cls, value: EcosystemProperty | str) -> EcosystemProperty:
        if isinstance(value, cls):
            return value
        folded = "".join(ch for ch in str(value).casefold() if ch.isalnum())
        for member in cls:
            if folded == "".join(ch for ch in member.value.casefold() if ch.isalnum()):
                return member
        raise InvalidProperty(
            f"invalid ecosystem property {value!r}; valid: {', '.join(m.value for m in cls)}"
        )


@dataclass(frozen=True)
class EcosystemAnnotation:
    id: str
    subject: str
    property: EcosystemProperty
    note: str


def annotate(
    model: Model, subject: ElementRef, prop: EcosystemProperty | str, note: str = ""
) -> EcosystemAnnotation:
    prop = EcosystemProperty.parse(prop)
    try:
        element = model.element(subject)
    except UnknownElement as exc:
        raise UnknownSubject(exc.ref) from None
    node_id = model.store.add_node(
        {ANNOTATION}, {"subject": element.id, "property": prop.value, "note": note}
    )
    model.store.add_edge(node_id, element.id, ANNOTATES)
    return EcosystemAnnotation(node_id, element.id, prop, note)


def annotations(
    model: Model, prop: EcosystemProperty | str | None = None
) -> list[EcosystemAnnotation]:
    filters = [] if prop is None else [("property", EcosystemProperty.parse(prop).value)]
    return [
        EcosystemAnnotation(n.id, str(n.attrs["subject"]),
                            EcosystemProperty(n.attrs["property"]), str(n.attrs.get("note", "")))
        for n in model.store.query(ANNOTATION, filters)
    ]


# -- diffusion -----------------------------------------------------------------------


@dataclass(frozen=True)
class DiffusionScenario:
    actors: tuple[str, ...]
    neighbours: dict[str, tuple[str, ...]]
    initial: frozenset[str]
    p0: float
    beta: float
    steps: int
    seed: int = 0

    @classmethod
    def build(
        cls,
        actors: Iterable[str],
        edges: Iterable[Iterable[str]] = (),
        initial: Iterable[str] = (),
        p0: float = 0.0,
        beta: float = 0.0,
        steps: int = 1,
        seed: int = 0,
        adjacency: Mapping[str, Iterable[str]] | None = None,
    ) -> DiffusionScenario:
        """Validate and normalise. Give either an undirected edge list or an
        adjacency map (which must be symmetric)."""
        actor_list = [str(a) for a in actors]
        if not actor_list:
            raise InvalidScenario("scenario needs at least one actor")
        if len(set(actor_list)) != len(actor_list):
            raise InvalidScenario("actor ids must be unique")
        known = set(actor_list)
        links: dict[str, set[str]] = {a: set() for a in actor_list}
        if adjacency is not None:
            for a, targets in adjacency.items():
                for b in targets:
                    _check_pair(known, str(a), str(b))
                    links[str(a)].add(str(b))
            for a, targets in links.items():
                for b in targets:
                    if a not in links[b]:
                        raise AsymmetricAdjacency(f"{a} lists {b} but {b} does not list {a}")
        for edge in edges:
            pair = [str(x) for x in edge]
            if len(pair) != 2:
                raise InvalidScenario(f"edge {pair} must have exactly two endpoints")
            a, b = pair
            _check_pair(known, a, b)
            links[a].add(b)
            links[b].add(a)
        start = frozenset(str(a) for a in initial)
        if not start <= known:
            raise InvalidScenario(f"initial adopters not in actors: {sorted(start - known)}")
        p0, beta = _number(p0, "p0"), _number(beta, "beta")
        if not 0.0 <= p0 <= 1.0:
            raise InvalidProbability(f"p0 must lie in [0, 1], got {p0}")
        if beta < 0.0:
            raise InvalidProbability(f"beta must be non-negative, got {beta}")
        if isinstance(steps, bool) or not isinstance(steps, int) or steps < 0:
            raise InvalidScenario(f"steps must be a non-negative integer, got {steps!r}")
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise InvalidScenario(f"seed must be an integer, got {seed!r}")
        order = tuple(sorted(actor_list))
        return cls(order, {a: tuple(sorted(links[a])) for a in order}, start, p0, beta,
                   steps, seed)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> DiffusionScenario:
        known = {"actors", "edges", "adjacency", "initial", "p0", "beta", "steps", "seed"}
        extra = sorted(set(doc) - known)
        if extra:
            raise InvalidScenario(f"unknown scenario fields: {', '.join(extra)}")
        if "actors" not in doc:
            raise InvalidScenario("scenario is missing 'actors'")
        return cls.build(doc["actors"], doc.get("edges", ()), doc.get("initial", ()),
                         doc.get("p0", 0.0), doc.get("beta", 0.0), doc.get("steps", 1),
                         doc.get("seed", 0), doc.get("adjacency"))

    @classmethod
    def load(cls, path: str | Path) -> DiffusionScenario:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidScenario(f"scenario is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidScenario("scenario must be a JSON object")
        return cls.from_dict(doc)

    def with_seed(self, seed: int) -> DiffusionScenario:
        return DiffusionScenario(self.actors, self.neighbours, self.initial, self.p0,
                                 self.beta, self.steps, seed)

    def edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a in self.actors for b in self.neighbours[a] if a < b]

    def to_dict(self) -> dict[str, Any]:
        return {"actors": list(self.actors), "edges": [list(e) for e in self.edges()],
                "initial": sorted(self.initial), "p0": self.p0, "beta": self.beta,
                "steps": self.steps, "seed": self.seed}


def _check_pair(known: set[str], a: str, b: str) -> None:
    for x in (a, b):
        if x not in known:
            raise InvalidScenario(f"edge endpoint {x!r} is not an actor")
    if a == b:
        raise InvalidScenario(f"self-edge on {a!r}")


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool):
        raise InvalidProbability(f"{name} must be a number")
    try:
        result = float(value)
    except (TypeError, ValueError):
        raise InvalidProbability(f"{name} must be a number, got {value!r}") from None
    if math.isnan(result):
        raise InvalidProbability(f"{name} must not be NaN")
    return result


@dataclass(frozen=True)
class DiffusionResult:
    adoption_series: list[float]
    adoption_step: dict[str, int | None]
    final_fraction: float

    def to_dict(self) -> dict[str, Any]:
        return {"adoption_series": self.adoption_series,
                "adoption_step": dict(sorted(self.adoption_step.items())),
                "final_fraction": self.final_fraction}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def adoption_probability(p0: float, beta: float, adopted_neighbours: int, degree: int) -> float:
    f = adopted_neighbours / degree if degree else 0.0
    return min(1.0, p0 + beta * f)


def run_diffusion(scenario: DiffusionScenario) -> DiffusionResult:
    n = len(scenario.actors)
    seed = scenario.seed & _MASK
    step_of: dict[str, int | None] = {a: (0 if a in scenario.initial else None)
                                      for a in scenario.actors}
    adopted = set(scenario.initial)
    series = [len(adopted) / n]
    for t in range(scenario.steps):
        newly = []
        for i, actor in enumerate(scenario.actors):
            if actor in adopted:
                continue
            neigh = scenario.neighbours[actor]
            count = sum(1 for b in neigh if b in adopted)
            p = adoption_probability(scenario.p0, scenario.beta, count, len(neigh))
            if uniform(seed, t * n + i + 1) < p:
                newly.append(actor)
        for actor in newly:
            adopted.add(actor)
            step_of[actor] = t + 1
        series.append(len(adopted) / n)
    return DiffusionResult(series, step_of, series[-1])


def _final_counts(scenario: DiffusionScenario, seeds: np.ndarray) -> np.ndarray:
    """Number of adopters after the last step, one entry per seed."""
    n = len(scenario.actors)
    index = {a: i for i, a in enumerate(scenario.actors)}
    adj = np.zeros((n, n))
    for a, neigh in scenario.neighbours.items():
        for b in neigh:
            adj[index[a], index[b]] = 1.0
    degree = adj.sum(axis=1)
    safe = np.where(degree > 0, degree, 1.0)
    seeds = np.asarray(seeds, dtype=np.uint64)
    state = np.zeros((len(seeds), n), dtype=bool)
    for a in scenario.initial:
        state[:, index[a]] = True
    for t in range(scenario.steps):
        counts = state.astype(np.float64) @ adj
        f = np.where(degree > 0, counts / safe, 0.0)
        p = np.minimum(1.0, scenario.p0 + scenario.beta * f)
        adopt = np.zeros_like(state)
        for i in range(n):
            u = _uniform_batch(seeds, t * n + i + 1)
            adopt[:, i] = (~state[:, i]) & (u < p[:, i])
        state |= adopt
    return state.sum(axis=1, dtype=np.int64)


def final_fractions(scenario: DiffusionScenario, seeds: np.ndarray) -> np.ndarray:
    """Final adopted fraction for each seed, vectorised over runs.

    Bit-identical to calling :func:`run_diffusion` once per seed.
    """
    return _final_counts(scenario, seeds) / len(scenario.actors)


@dataclass(frozen=True)
class AdoptionEstimate:
    mean: float
    stderr: float
    runs: int

    def to_dict(self) -> dict[str, Any]:
        return {"mean": self.mean, "stderr": self.stderr, "runs": self.runs}


def expected_adoption(
    scenario: DiffusionScenario, runs: int, batch: int = 65536
) -> AdoptionEstimate:
    """Mean final fraction over seeds ``seed .. seed + runs - 1``."""
    if isinstance(runs, bool) or not isinstance(runs, int) or runs < 1:
        raise InvalidScenario(f"runs must be a positive integer, got {runs!r}")
    # Integer sums keep the mean correctly rounded and a constant outcome's
    # variance exactly zero.
    n = len(scenario.actors)
    total = squares = 0
    for start in range(0, runs, batch):
        count = min(batch, runs - start)
        seeds = (np.arange(start, start + count, dtype=np.uint64)
                 + np.uint64(scenario.seed & _MASK))
        adopters = _final_counts(scenario, seeds)
        total += int(adopters.sum())
        squares += int((adopters * adopters).sum())
    mean = total / (n * runs)
    stderr = 0.0
    if runs > 1:
        spread = runs * squares - total * total
        stderr = math.sqrt(spread / (runs * (runs - 1) * runs)) / n
    return AdoptionEstimate(mean, stderr, runs)


@dataclass(frozen=True)
class EmergenceReport:
    takeoff: float
    saturation: float
    wavefront: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        takeoff = None if math.isinf(self.takeoff) else int(self.takeoff)
        return {"takeoff": takeoff, "saturation": self.saturation, "wavefront": self.wavefront}

    def to_text(self) -> str:
        takeoff = "never" if math.isinf(self.takeoff) else str(int(self.takeoff))
        wave = " ".join(f"{w:.4f}" for w in self.wavefront)
        return f"takeoff: {takeoff}\nsaturation: {self.saturation:.4f}\nwavefront: {wave}"


def emergence_report(result: DiffusionResult | list[float]) -> EmergenceReport:
    """Takeoff is the first step whose adopted fraction exceeds one half
    (``math.inf`` if none); the wavefront is the per-step increase."""
    series = result.adoption_series if isinstance(result, DiffusionResult) else list(result)
    takeoff = next((float(i) for i, v in enumerate(series) if v > 0.5), math.inf)
    saturation = series[-1] if series else 0.0
    wavefront = [b - a for a, b in zip(series, series[1:])]
    return EmergenceReport(takeoff, saturation, wavefront)
