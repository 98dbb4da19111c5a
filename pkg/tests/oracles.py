"""Independent reference computations used by the tests.

Nothing here imports the package under test: each oracle recomputes its
answer from first principles (integer sums, exact fractions, exhaustive
enumeration) so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

# Allocation table transcribed by hand, in crore: (scheme, 2018-19, 2019-20).
ALLOCATION_TABLE = [
    ("PM-KISAN", 20_000, 75_000),
    ("ISS", 14_987, 18_000),
    ("PMFBY", 12_976, 14_000),
    ("RKVY", 3_600, 3_745),
    ("PMKSY", 2_955, 3_500),
    ("MIS-PSS", 2_000, 3_000),
    ("MIDH", 2_100, 2_226),
    ("NFSM", 1_510, 2_000),
    ("PM-AASHA", 1_400, 1_500),
    ("ISAM", 500, 600),
]
DECLARED_TOTALS = {"2018-19": 67_800, "2019-20": 130_485}


def column_sum(year: str) -> int:
    col = 1 if year == "2018-19" else 2
    total = 0
    for row in ALLOCATION_TABLE:
        total += row[col]
    return total


def declared_delta(year: str) -> int:
    return DECLARED_TOTALS[year] - column_sum(year)


def separation_index(scores: dict[str, Fraction], weights: dict[str, Fraction]) -> Fraction:
    kinds = ("Informational", "Spatial", "Temporal", "Financial", "Capability")
    num = sum(Fraction(weights.get(k, 1)) * Fraction(scores.get(k, 0)) for k in kinds)
    den = sum(Fraction(weights.get(k, 1)) for k in kinds)
    return num / den


def entropy_from_counts(counts: list[int]) -> float:
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def decile_bin(filled: int, required: int) -> int:
    """Bin by brute force over the decile boundaries."""
    if required == 0:
        return 10
    if filled == 0:
        return 0
    for k in range(1, 11):
        if Fraction(filled, required) <= Fraction(k, 10):
            return k
    raise AssertionError("unreachable")


# -- diffusion outcome tree ------------------------------------------------------------


def adoption_outcomes(
    actors: list[str],
    edges: list[tuple[str, str]],
    initial: set[str],
    p0: Fraction,
    beta: Fraction,
    steps: int,
) -> dict[frozenset[str], Fraction]:
    """Exact distribution of the final adopter set, enumerating every
    combination of per-step Bernoulli outcomes."""
    neigh = {a: set() for a in actors}
    for a, b in edges:
        neigh[a].add(b)
        neigh[b].add(a)
    dist = {frozenset(initial): Fraction(1)}
    for _ in range(steps):
        nxt: dict[frozenset[str], Fraction] = {}
        for state, weight in dist.items():
            susceptible = [a for a in actors if a not in state]
            probs = []
            for a in susceptible:
                f = Fraction(sum(1 for b in neigh[a] if b in state), len(neigh[a])) \
                    if neigh[a] else Fraction(0)
                probs.append(min(Fraction(1), p0 + beta * f))
            for outcome in itertools.product((False, True), repeat=len(susceptible)):
                w = weight
                for adopt, p in zip(outcome, probs):
                    w *= p if adopt else 1 - p
                if w == 0:
                    continue
                new = state | {a for a, adopt in zip(susceptible, outcome) if adopt}
                nxt[frozenset(new)] = nxt.get(frozenset(new), Fraction(0)) + w
        dist = nxt
    return dist


def final_fraction_moments(actors, edges, initial, p0, beta, steps) -> tuple[Fraction, Fraction]:
    """Exact mean and variance of the final adopted fraction."""
    dist = adoption_outcomes(actors, edges, initial, Fraction(p0), Fraction(beta), steps)
    n = len(actors)
    mean = sum(w * Fraction(len(s), n) for s, w in dist.items())
    second = sum(w * Fraction(len(s), n) ** 2 for s, w in dist.items())
    return mean, second - mean * mean


def nonisomorphic_graphs(n: int) -> list[list[tuple[int, int]]]:
    """One representative edge list per isomorphism class on ``n`` nodes."""
    pairs = list(itertools.combinations(range(n), 2))
    seen: set[frozenset[tuple[int, int]]] = set()
    reps = []
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        canon = min(
            tuple(sorted(tuple(sorted((perm[a], perm[b]))) for a, b in edges))
            for perm in itertools.permutations(range(n))
        )
        key = frozenset(canon)
        if key in seen:
            continue
        seen.add(key)
        reps.append(edges)
    return reps
