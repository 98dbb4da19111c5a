from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tantra.errors import (
    AspectMismatch,
    ConflictingFixture,
    DuplicateElementKey,
    DuplicateUniqueId,
    EmptyName,
    InvalidAspect,
    InvalidPerspective,
    LevelReversal,
    LevelSkip,
    MissingUniqueId,
    UnknownElement,
)
from tantra.metamodel import REIFIES, Aspect, Model, Perspective, load_fixture

NINE = ["Who", "Where", "What", "When", "How", "Why", "Relationships", "Relators",
        "Separations"]


def people_chain(m: Model):
    root = m.declare_element("Who", "Contextual", "All people")
    citizens = m.declare_element("Who", "Conceptual", "Citizens")
    m.reify(root, citizens)
    return root, citizens


class TestEnums:
    def test_nine_aspects_in_order(self):
        assert [a.value for a in Aspect] == NINE

    def test_perspectives_are_ordered(self):
        levels = list(Perspective)
        assert levels == sorted(levels)
        assert Perspective.CONTEXTUAL < Perspective.INSTANTIATED

    def test_parse_is_case_insensitive(self):
        assert Aspect.parse("who") is Aspect.WHO
        assert Perspective.parse("LOGICAL") is Perspective.LOGICAL

    def test_bad_aspect_lists_all_nine(self):
        with pytest.raises(InvalidAspect) as err:
            Aspect.parse("Whom")
        for name in NINE:
            assert name in str(err.value)

    def test_bad_perspective(self):
        with pytest.raises(InvalidPerspective):
            Perspective.parse("Abstract")


class TestDeclare:
    def test_element_sits_in_one_cell(self, model):
        e = model.declare_element("Who", "Conceptual", "Citizens")
        labels = model.store.get_node(e.id).labels
        assert labels == {"Who", "Conceptual"}
        assert model.cell("Who", "Conceptual") == [e]

    def test_empty_name(self, model):
        with pytest.raises(EmptyName):
            model.declare_element("Who", "Conceptual", "  ")

    def test_instantiated_needs_unique_id(self, model):
        with pytest.raises(MissingUniqueId):
            model.declare_element("Who", "Instantiated", "Ravi")

    def test_unique_id_unique_per_aspect(self, model):
        model.declare_element("Who", "Instantiated", "Ravi", {"unique_id": "F-1"})
        with pytest.raises(DuplicateUniqueId):
            model.declare_element("Who", "Instantiated", "Ravi K", {"unique_id": "F-1"})
        model.declare_element("Where", "Instantiated", "Plot", {"unique_id": "F-1"})

    def test_duplicate_key(self, model):
        model.declare_element("Who", "Conceptual", "A", key="k")
        with pytest.raises(DuplicateElementKey):
            model.declare_element("Who", "Conceptual", "B", key="k")

    def test_element_resolves_by_key_or_id(self, model):
        e = model.declare_element("Why", "Logical", "Debt Level")
        assert model.element(e.key) == e
        assert model.element(e.id) == e
        with pytest.raises(UnknownElement):
            model.element("nope")


class TestReify:
    def test_adjacent_levels_link(self, model):
        root, citizens = people_chain(model)
        assert model.children(root) == [citizens]
        assert model.parents(citizens) == [root]

    def test_reify_is_idempotent(self, model):
        root, citizens = people_chain(model)
        assert model.reify(root, citizens) == model.reify(root, citizens)
        assert len(model.store.edges(kind=REIFIES)) == 1

    def test_aspect_mismatch(self, model):
        root, _ = people_chain(model)
        plot = model.declare_element("Where", "Conceptual", "Plots")
        with pytest.raises(AspectMismatch):
            model.reify(root, plot)

    def test_level_skip(self, model):
        root, _ = people_chain(model)
        logical = model.declare_element("Who", "Logical", "Citizen relation")
        with pytest.raises(LevelSkip):
            model.reify(root, logical)

    def test_level_reversal(self, model):
        root, citizens = people_chain(model)
        with pytest.raises(LevelReversal):
            model.reify(citizens, root)
        with pytest.raises(LevelReversal):
            model.reify(citizens, model.declare_element("Who", "Conceptual", "Voters"))

    def test_chain_walks_up(self, model):
        root, citizens = people_chain(model)
        logical = model.declare_element("Who", "Logical", "Citizen relation")
        model.reify(citizens, logical)
        assert [(p.id, c.id) for p, c in model.chain(logical)] == \
            [(citizens.id, logical.id), (root.id, citizens.id)]


class TestValidate:
    def test_clean_model(self, model):
        people_chain(model)
        assert model.validate_model() == []

    def test_orphan_instance(self, model):
        e = model.declare_element("Who", "Instantiated", "Ravi", {"unique_id": "F-1"})
        codes = [(v.code, v.subject) for v in model.validate_model()]
        assert codes == [("OrphanInstance", e.id)]

    def test_ensure_chain_prevents_orphans(self, model):
        schema = model.ensure_chain("What", "Government Schemes")
        assert schema.perspective is Perspective.PHYSICAL
        row = model.declare_element("What", "Instantiated", "PM-KISAN", {"unique_id": "x"})
        model.reify(schema, row)
        assert model.validate_model() == []
        assert model.ensure_chain("What", "Government Schemes") == schema

    def test_bad_edges_written_behind_the_api(self, model):
        root, citizens = people_chain(model)
        plot = model.declare_element("Where", "Conceptual", "Plots")
        inst = model.declare_element("Who", "Instantiated", "Ravi", {"unique_id": "F-1"})
        mixed = model.store.add_edge(root.id, plot.id, REIFIES)
        skip = model.store.add_edge(root.id, inst.id, REIFIES)
        stray = model.store.add_node({"Note"})
        bad = model.store.add_edge(stray, root.id, REIFIES)
        found = {(v.code, v.subject) for v in model.validate_model()}
        assert ("MixedAspectChain", mixed) in found
        assert ("LevelSkip", skip) in found
        assert ("ReifiesNonElement", bad) in found
        assert ("OrphanInstance", inst.id) in found

    def test_ambiguous_cell(self, model):
        node = model.store.add_node({"Who", "Where", "Logical"})
        assert [v.code for v in model.validate_model()] == ["AmbiguousCell"]
        assert model.validate_model()[0].subject == node

    def test_validation_survives_reload(self, model, tmp_path):
        people_chain(model)
        model.save(tmp_path / "m.json")
        again = Model.load(tmp_path / "m.json")
        assert again.validate_model() == []
        assert again.find(model.cell("Who", "Conceptual")[0].key) is not None


class TestFixture:
    DOC = {
        "elements": [
            {"key": "r", "aspect": "Who", "perspective": "Contextual", "name": "People"},
            {"key": "c", "aspect": "Who", "perspective": "Conceptual", "name": "Farmers",
             "parents": ["r"]},
        ]
    }

    def test_load(self, model):
        made = load_fixture(model, self.DOC)
        assert set(made) == {"r", "c"}
        assert model.children("r") == [made["c"]]

    def test_conflict_writes_nothing(self, model):
        load_fixture(model, self.DOC)
        before = len(model.store)
        with pytest.raises(ConflictingFixture):
            load_fixture(model, self.DOC)
        assert len(model.store) == before

    def test_repeated_keys(self, model):
        doc = {"elements": self.DOC["elements"] + [self.DOC["elements"][0]]}
        with pytest.raises(ConflictingFixture):
            load_fixture(model, doc)
        assert len(model.store) == 0


def expected_reify_error(parent, child):
    """Oracle for the reification rules, independent of Model.reify."""
    if parent[0] != child[0]:
        return AspectMismatch
    step = child[1].level - parent[1].level
    if step <= 0:
        return LevelReversal
    if step > 1:
        return LevelSkip
    return None


ops = st.lists(
    st.one_of(
        st.tuples(st.just("declare"), st.sampled_from(list(Aspect)[:3]),
                  st.sampled_from(list(Perspective))),
        st.tuples(st.just("reify"), st.integers(0, 40), st.integers(0, 40)),
    ),
    min_size=1, max_size=40,
)


def run_sequence(sequence):
    m = Model()
    declared = []
    rejected = accepted = 0
    for op in sequence:
        if op[0] == "declare":
            attrs = {"unique_id": f"u{len(declared)}"} if op[2] is Perspective.INSTANTIATED else {}
            declared.append(m.declare_element(op[1], op[2], f"e{len(declared)}", attrs))
            continue
        if not declared:
            continue
        parent = declared[op[1] % len(declared)]
        child = declared[op[2] % len(declared)]
        expected = expected_reify_error((parent.aspect, parent.perspective),
                                        (child.aspect, child.perspective))
        if expected is None:
            m.reify(parent, child)
            accepted += 1
        else:
            with pytest.raises(expected):
                m.reify(parent, child)
            rejected += 1
    return m, accepted, rejected


def assert_monotone(m: Model) -> None:
    for edge in m.store.edges(kind=REIFIES):
        p, c = m.element(edge.src), m.element(edge.dst)
        assert p.aspect is c.aspect
        assert c.perspective.level - p.perspective.level == 1
    structural = {"MixedAspectChain", "LevelSkip", "LevelReversal", "AmbiguousCell",
                  "ReifiesNonElement"}
    assert not [v for v in m.validate_model() if v.code in structural]
    for node in m.store.nodes():
        assert m._cell_of(node.labels) is not None


@settings(max_examples=200, deadline=None)
@given(ops)
def test_random_sequences_stay_monotone(sequence):
    m, _, _ = run_sequence(sequence)
    assert_monotone(m)
