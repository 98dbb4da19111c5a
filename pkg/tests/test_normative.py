from __future__ import annotations

from datetime import date
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tantra import normative as nv
from tantra.errors import (
    InvalidDimension,
    InvalidTarget,
    NonMonotonicDate,
    NotWhyAspect,
    SchemaMismatch,
    UnknownElement,
    UnknownGoal,
    UnknownIntervention,
)
from tantra.metamodel import Model
from tantra.sector import price_deficiency_record


@pytest.fixture
def metric(model):
    return model.declare_element("Why", "Logical", "Price-Deficiency Uptake")


def complete_record(metric_key):
    return {
        "title": "Price-deficiency support",
        **{name: f"{name} text" for name in nv.TEXT_FIELDS},
        "change_markers": [{"name": "uptake", "metric": metric_key, "direction": "increase"}],
    }


class TestGoals:
    def test_define_goal(self, model):
        income = model.declare_element("Why", "Logical", "Per-capita Farm Income Ratio")
        goal = nv.define_goal(model, "Financial", "Double farmer income", income,
                              ">= 2.0", 365)
        assert goal.target == nv.Target(">=", Decimal("2.0"))
        assert nv.goals(model) == [goal]

    def test_any_dimension_of_five(self, model, metric):
        for dim in ("Customer", "Financial", "Process", "Strategic", "Ethical"):
            nv.define_goal(model, dim, "g", metric, ">= 0.5", 90)
        assert len(nv.goals(model)) == 5

    def test_bad_dimension(self, model, metric):
        with pytest.raises(InvalidDimension):
            nv.define_goal(model, "Social", "g", metric, ">= 0.5", 90)

    def test_binding_must_be_why(self, model):
        who = model.declare_element("Who", "Conceptual", "Farmers")
        with pytest.raises(NotWhyAspect):
            nv.define_goal(model, "Customer", "g", who, ">= 1", 30)

    def test_unknown_binding(self, model):
        with pytest.raises(UnknownElement):
            nv.define_goal(model, "Customer", "g", "nope", ">= 1", 30)

    @pytest.mark.parametrize("text", ["> 1", "about 2", ">= x"])
    def test_bad_target(self, text):
        with pytest.raises(InvalidTarget):
            nv.Target.parse(text)

    def test_equality_target_uses_tolerance(self):
        t = nv.Target.parse("= 1.0 +- 0.05")
        assert t.is_met(Decimal("1.04")) and not t.is_met(Decimal("1.06"))


class TestMarkers:
    def test_series_and_trend(self, model, metric):
        m = nv.define_marker(model, "uptake", metric)
        for day, value in [("2019-06-01", "0.05"), ("2019-07-01", "0.12"), ("2019-08-01", "0.20")]:
            nv.record_marker(model, m, day, value)
        assert [o.value for o in nv.series(model, m)] == \
            [Decimal("0.05"), Decimal("0.12"), Decimal("0.20")]
        assert nv.marker_trend(model, m) == "increasing"
        assert nv.marker_progress(model, m) == "improving"

    def test_non_monotonic_date(self, model, metric):
        m = nv.define_marker(model, "uptake", metric)
        nv.record_marker(model, m, date(2019, 6, 1), "0.05")
        with pytest.raises(NonMonotonicDate):
            nv.record_marker(model, m, date(2019, 5, 1), "0.07")
        with pytest.raises(NonMonotonicDate):
            nv.record_marker(model, m, date(2019, 6, 1), "0.07")
        assert len(nv.series(model, m)) == 1

    def test_decrease_direction(self, model, metric):
        m = nv.define_marker(model, "debt", metric, "decrease")
        nv.record_marker(model, m, "2020-01-01", 5)
        nv.record_marker(model, m, "2020-02-01", 3)
        assert nv.marker_progress(model, m) == "improving"

    def test_trend_needs_two_points(self, model, metric):
        m = nv.define_marker(model, "x", metric)
        assert nv.marker_trend(model, m) == "insufficient-data"

    def test_csv_ingest_checks_whole_file(self, model, metric):
        m = nv.define_marker(model, "uptake", metric, key="uptake")
        text = "marker_id,date,value\nuptake,2019-06-01,0.05\nuptake,2019-05-01,0.06\n"
        with pytest.raises(NonMonotonicDate):
            nv.ingest_markers(model, text)
        assert nv.series(model, m) == []
        bad = "marker_id,date,value\nuptake,June,0.05\n"
        with pytest.raises(SchemaMismatch):
            nv.ingest_markers(model, bad)
        assert nv.ingest_markers(model, "marker_id,date,value\nuptake,2019-06-01,0.05\n") == 1


class TestEvaluate:
    @pytest.fixture
    def goal(self, model, metric):
        return nv.define_goal(model, "Customer", "uptake", metric, ">= 0.10", 90)

    def test_no_data(self, model, goal):
        assert nv.evaluate_goal(model, goal).state is nv.GoalState.NO_DATA

    def test_met(self, model, metric, goal):
        m = nv.define_marker(model, "uptake", metric)
        nv.record_marker(model, m, "2019-06-01", "0.05")
        nv.record_marker(model, m, "2019-09-01", "0.12")
        status = nv.evaluate_goal(model, goal)
        assert (status.state, status.value) == (nv.GoalState.MET, Decimal("0.12"))

    def test_not_met_as_of(self, model, metric, goal):
        m = nv.define_marker(model, "uptake", metric)
        nv.record_marker(model, m, "2019-06-01", "0.05")
        nv.record_marker(model, m, "2019-09-01", "0.12")
        status = nv.evaluate_goal(model, goal, as_of="2019-07-01")
        assert (status.state, status.value) == (nv.GoalState.NOT_MET, Decimal("0.05"))

    def test_unknown_goal(self, model):
        with pytest.raises(UnknownGoal):
            nv.evaluate_goal(model, "n404")


class TestInterventions:
    def test_complete_record(self, model, metric):
        rec = nv.register_intervention(model, complete_record(metric.key))
        assert rec.completeness == (14, 14)
        assert nv.validate_intervention(model, rec.id) == []

    def test_missing_meta_theory(self, model, metric):
        data = complete_record(metric.key)
        del data["meta_theory"]
        rec = nv.register_intervention(model, data)
        assert rec.completeness == (13, 14)
        assert [(d.code, d.field) for d in rec.deficiencies] == [("MissingField", "meta_theory")]

    def test_empty_record(self, model):
        rec = nv.register_intervention(model, {})
        assert len(rec.deficiencies) == 14
        assert [d.field for d in rec.deficiencies] == list(nv.TOC_FIELDS)

    def test_marker_bound_to_who(self, model):
        who = model.declare_element("Who", "Conceptual", "Farmers")
        data = complete_record(who.key)
        rec = nv.register_intervention(model, data)
        assert [d.code for d in rec.deficiencies] == ["MarkerNotMetric"]

    def test_dangling_goal(self, model, metric):
        data = {**complete_record(metric.key), "linked_goals": ["goal.none"]}
        rec = nv.register_intervention(model, data)
        assert [(d.code, d.detail) for d in rec.deficiencies] == \
            [("DanglingGoal", "linked goal goal.none does not exist")]

    def test_unknown_intervention(self, model):
        with pytest.raises(UnknownIntervention):
            nv.validate_intervention(model, "n1")

    def test_export_import_round_trip(self, model, metric):
        rec = nv.register_intervention(model, complete_record(metric.key))
        exported = nv.export_intervention(model, rec.id)
        assert set(nv.TOC_FIELDS) <= set(exported)
        exported.pop("id")
        again = nv.register_intervention(model, exported)
        assert again.fields == rec.fields
        assert again.deficiencies == []


class TestShippedRecord:
    """The shipped price-deficiency record checked field by field."""

    def test_every_field_authored(self):
        record = price_deficiency_record()
        for name in nv.TEXT_FIELDS:
            assert isinstance(record[name], str) and record[name].strip(), name
        assert record["change_markers"] and all(m["metric"] for m in record["change_markers"])

    def test_valid_after_fixture_load(self, sector_model, tmp_path):
        rec = nv.interventions(sector_model)[0]
        assert rec.deficiencies == []
        sector_model.save(tmp_path / "s.json")
        again = Model.load(tmp_path / "s.json")
        assert nv.validate_intervention(again, rec.id) == []


observations = st.lists(
    st.tuples(st.dates(min_value=date(2000, 1, 1), max_value=date(2030, 1, 1)),
              st.decimals(min_value=0, max_value=1, places=3)),
    max_size=12,
)


@settings(max_examples=100, deadline=None)
@given(observations, st.dates(min_value=date(2000, 1, 1), max_value=date(2030, 1, 1)))
def test_series_append_only_and_replay_deterministic(obs, as_of):
    statuses = []
    for _ in range(2):
        m = Model()
        metric = m.declare_element("Why", "Logical", "m")
        goal = nv.define_goal(m, "Process", "g", metric, ">= 0.5", 30)
        marker = nv.define_marker(m, "mk", metric)
        for when, value in obs:
            try:
                nv.record_marker(m, marker, when, value)
            except NonMonotonicDate:
                pass
        dates = [o.date for o in nv.series(m, marker)]
        assert dates == sorted(set(dates))
        statuses.append(nv.evaluate_goal(m, goal, as_of))
    assert statuses[0] == statuses[1]
