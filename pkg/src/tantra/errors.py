"""Exception types shared across the engine.

Every error carries a ``code`` equal to its class name so the CLI and the
JSON reports can name the violated rule without string matching.
"""

from __future__ import annotations


class TantraError(Exception):
    """Base class for all engine errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# graph store


class EmptyLabels(TantraError):
    def __init__(self) -> None:
        super().__init__("a node needs at least one label")


class EmptyKind(TantraError):
    def __init__(self) -> None:
        super().__init__("edge kind must be a non-empty string")


class DanglingEndpoint(TantraError):
    def __init__(self, missing_id: str) -> None:
        self.missing_id = missing_id
        super().__init__(f"edge endpoint does not exist: {missing_id}")


class UnknownNode(TantraError):
    def __init__(self, node_id: str) -> None:
        self.node_id = node_id
        super().__init__(f"no such node: {node_id}")


class UnknownEdge(TantraError):
    def __init__(self, edge_id: str) -> None:
        self.edge_id = edge_id
        super().__init__(f"no such edge: {edge_id}")


class InvalidAttribute(TantraError):
    pass


class VersionMismatch(TantraError):
    def __init__(self, found: object, supported: int) -> None:
        self.found = found
        super().__init__(f"unsupported format_version {found!r} (supported: {supported})")


class ParseError(TantraError):
    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line else ""
        super().__init__(f"{message}{where}")


# metamodel


class InvalidAspect(TantraError):
    def __init__(self, value: object, valid: list[str]) -> None:
        self.value = value
        self.valid = valid
        super().__init__(f"invalid aspect {value!r}; valid aspects: {', '.join(valid)}")


class InvalidPerspective(TantraError):
    def __init__(self, value: object, valid: list[str]) -> None:
        self.value = value
        self.valid = valid
        super().__init__(
            f"invalid perspective {value!r}; valid perspectives: {', '.join(valid)}"
        )


class EmptyName(TantraError):
    def __init__(self) -> None:
        super().__init__("display_name must be non-empty")


class MissingUniqueId(TantraError):
    def __init__(self, display_name: str) -> None:
        super().__init__(f"Instantiated element {display_name!r} needs a unique_id attribute")


class AspectMismatch(TantraError):
    pass


class LevelSkip(TantraError):
    pass


class LevelReversal(TantraError):
    pass


class UnknownElement(TantraError):
    def __init__(self, ref: object) -> None:
        self.ref = ref
        super().__init__(f"no such element: {ref}")


class DuplicateElementKey(TantraError):
    def __init__(self, key: str) -> None:
        self.key = key
        super().__init__(f"element key already in use: {key}")


class DuplicateUniqueId(TantraError):
    pass


class ConflictingFixture(TantraError):
    pass


# relators and separations


class NotARelator(TantraError):
    pass


class TooFewMediated(TantraError):
    def __init__(self, count: int) -> None:
        super().__init__(f"a relator must mediate at least 2 distinct elements, got {count}")


class EndpointNotMediated(TantraError):
    pass


class SelfRelationship(TantraError):
    pass


class InvalidSeparationKind(TantraError):
    pass


class ScoreOutOfRange(TantraError):
    pass


class NegativeWeight(TantraError):
    pass


class AllWeightsZero(TantraError):
    def __init__(self) -> None:
        super().__init__("at least one separation weight must be positive")


class UnknownSubject(TantraError):
    def __init__(self, ref: object) -> None:
        self.ref = ref
        super().__init__(f"no such subject: {ref}")


# normative


class NotWhyAspect(TantraError):
    pass


class InvalidDimension(TantraError):
    pass


class InvalidTarget(TantraError):
    pass


class UnknownGoal(TantraError):
    def __init__(self, goal_id: str) -> None:
        super().__init__(f"no such goal: {goal_id}")


class UnknownIntervention(TantraError):
    def __init__(self, intervention_id: str) -> None:
        super().__init__(f"no such intervention: {intervention_id}")


class UnknownMarker(TantraError):
    def __init__(self, marker_id: str) -> None:
        super().__init__(f"no such change marker: {marker_id}")


class NonMonotonicDate(TantraError):
    pass


# sector data


class SchemaMismatch(TantraError):
    def __init__(self, message: str, column: str | None = None, line: int | None = None) -> None:
        self.column = column
        self.line = line
        super().__init__(message)


class DuplicateKey(TantraError):
    pass


class NegativeAmount(TantraError):
    pass


class UnknownYear(TantraError):
    pass


class UnknownScheme(TantraError):
    pass


# ecosystem simulation


class InvalidProperty(TantraError):
    pass


class InvalidProbability(TantraError):
    pass


class AsymmetricAdjacency(TantraError):
    pass


class InvalidScenario(TantraError):
    pass
