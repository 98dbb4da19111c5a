"""Command-line interface.

Exit codes: 0 success, 1 findings (data anomalies, validation violations,
intervention deficiencies), 2 usage or I/O errors. Reports go to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from datetime import date
from decimal import Decimal
from pathlib import Path
from typing import Any

from . import ecosystem, entropy, normative, relators, sector
from .errors import TantraError
from .graph import canonical_json
from .metamodel import Model

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2

DEFAULT_STORE = "tantra.json"


class UsageError(Exception):
    """Bad invocation detected after argument parsing."""


# -- output helpers -------------------------------------------------------------------


def _plain(value: Any) -> Any:
    if isinstance(value, float):
        return Decimal(repr(value))
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def dump_json(value: Any) -> str:
    """Canonical report JSON: byte-identical for identical input."""
    return canonical_json(_plain(value))


def _emit(args: argparse.Namespace, text: str, payload: Any) -> None:
    print(dump_json(payload) if args.format == "json" else text)


def _load(args: argparse.Namespace, must_exist: bool) -> Model:
    path = Path(args.store)
    if not path.exists():
        if must_exist:
            raise FileNotFoundError(f"store not found: {path}")
        return Model()
    return Model.load(path)


def _save(args: argparse.Namespace, model: Model) -> None:
    model.save(args.store)


def _attrs(pairs: Sequence[str] | None) -> dict[str, str]:
    out = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep or not name:
            raise UsageError(f"--attr expects name=value, got {pair!r}")
        out[name] = value
    return out


# -- ingest ---------------------------------------------------------------------------


def cmd_ingest(args: argparse.Namespace) -> int:
    model = _load(args, must_exist=False)
    if args.schemes:
        result = sector.ingest_allocations(model, Path(args.schemes))
        _save(args, model)
        text = f"ingested {result.count} allocation rows\n{result.report.to_text()}"
        _emit(args, text, {"ingested": result.count, **result.report.to_dict()})
        return EXIT_FINDINGS if result.report.has_anomalies else EXIT_OK
    if args.separations:
        count = relators.ingest_separations(model, Path(args.separations))
        what = "separation scores"
    else:
        count = normative.ingest_markers(model, Path(args.markers))
        what = "marker observations"
    _save(args, model)
    _emit(args, f"ingested {count} {what}", {"ingested": count})
    return EXIT_OK


# -- report ---------------------------------------------------------------------------


def report_entropy(args: argparse.Namespace, model: Model) -> int:
    dist = entropy.entropy_report(model, args.aspect)
    _emit(args, dist.to_text(), dist.to_dict())
    return EXIT_OK


def report_separations(args: argparse.Namespace, model: Model) -> int:
    ranked = relators.rank_by_separation(relators.profiles(model), args.kind)
    rows = []
    lines = ["subject index"]
    for profile, value in ranked:
        rows.append({"subject": profile.subject, "index": value,
                     "scores": {k.value: profile.score(k) for k in relators.SeparationKind}})
        lines.append(f"{profile.subject} {value:.4f}")
    _emit(args, "\n".join(lines), {"kind": args.kind, "profiles": rows})
    return EXIT_OK


def report_allocations(args: argparse.Namespace, model: Model) -> int:
    year = args.year
    if year is None:
        years = sorted({a.fiscal_year for a in sector.allocations(model)})
        if not years:
            raise UsageError("the store holds no allocations")
        year = years[-1]
    rows = sector.allocation_summary(model, year, args.group_by)
    total = sum((r.amount for r in rows), Decimal(0))
    lines = [
        f"{r.label} {sector.format_inr(r.amount)} {r.share * 100:.2f}% {r.name}" for r in rows
    ]
    lines.append(f"total {sector.format_inr(total)}")
    payload = {
        "fiscal_year": year,
        "group_by": args.group_by,
        "computed_total": total,
        "rows": [{"label": r.label, "name": r.name, "amount": r.amount,
                  "share": r.share.quantize(Decimal("0.000001"))} for r in rows],
    }
    _emit(args, "\n".join(lines), payload)
    return EXIT_OK


def report_goals(args: argparse.Namespace, model: Model) -> int:
    lines, rows = [], []
    for goal in normative.goals(model):
        status = normative.evaluate_goal(model, goal, args.as_of)
        label = goal.key or goal.id
        value = "-" if status.value is None else str(status.value)
        lines.append(f"{label} {status.state.value} {value} target {goal.target}")
        rows.append({"goal": label, "id": goal.id, "dimension": goal.dimension.value,
                     "state": status.state.value, "value": status.value,
                     "observed_on": status.observed_on, "target": str(goal.target)})
    _emit(args, "\n".join(lines), {"as_of": args.as_of, "goals": rows})
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    model = _load(args, must_exist=True)
    handlers = {"entropy": report_entropy, "separations": report_separations,
                "allocations": report_allocations, "goals": report_goals}
    return handlers[args.report](args, model)


# -- sim ------------------------------------------------------------------------------


def cmd_sim(args: argparse.Namespace) -> int:
    scenario = ecosystem.DiffusionScenario.load(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if args.runs is None:
        result = ecosystem.run_diffusion(scenario)
        report = ecosystem.emergence_report(result)
        series = " ".join(f"{v:.4f}" for v in result.adoption_series)
        text = f"final_fraction: {result.final_fraction}\nseries: {series}\n{report.to_text()}"
        _emit(args, text, {**result.to_dict(), "emergence": report.to_dict()})
        return EXIT_OK
    estimate = ecosystem.expected_adoption(scenario, args.runs)
    text = f"mean: {estimate.mean:.6f}\nstderr: {estimate.stderr:.6f}\nruns: {estimate.runs}"
    _emit(args, text, estimate.to_dict())
    return EXIT_OK


# -- model ----------------------------------------------------------------------------


def _print_deficiencies(args: argparse.Namespace, record: normative.InterventionToC) -> int:
    have, total = record.completeness
    lines = [f"{record.id} completeness {have}/{total}"]
    lines += [f"{d.code} {d.field}: {d.detail}" for d in record.deficiencies]
    _emit(args, "\n".join(lines), {"id": record.id, "completeness": f"{have}/{total}",
                                   "deficiencies": [d.to_dict() for d in record.deficiencies]})
    return EXIT_FINDINGS if record.deficiencies else EXIT_OK


def cmd_model(args: argparse.Namespace) -> int:
    model = _load(args, must_exist=False)
    action = args.action

    if action == "validate":
        violations = model.validate_model() + relators.check_relationships(model)
        lines = [f"{v.code} {v.subject}: {v.detail}" for v in violations]
        _emit(args, "\n".join(lines) if lines else "no violations",
              {"violations": [v.to_dict() for v in violations]})
        return EXIT_FINDINGS if violations else EXIT_OK

    if action == "toc":
        if args.toc_action == "new":
            try:
                record = json.loads(Path(args.file).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise UsageError(f"{args.file} is not valid JSON: {exc}") from None
            if not isinstance(record, dict):
                raise UsageError("an intervention record must be a JSON object")
            stored = normative.register_intervention(model, record)
            _save(args, model)
            return _print_deficiencies(args, stored)
        if args.toc_action == "validate":
            return _print_deficiencies(args, normative.get_intervention(model, args.id))
        exported = normative.export_intervention(model, args.id)
        print(dump_json(exported) if args.format == "json" else json.dumps(exported, indent=2))
        return EXIT_OK

    if action == "fixture":
        report = sector.load_sector_fixture(model)
        _save(args, model)
        lines = [f"{a} {n}" for a, n in report.elements_by_aspect.items()]
        lines.append(f"relators {report.relators} relationships {report.relationships} "
                     f"goals {report.goals} interventions {report.interventions}")
        _emit(args, "\n".join(lines), {
            "elements": report.elements_by_aspect, "relators": report.relators,
            "relationships": report.relationships, "goals": report.goals,
            "interventions": report.interventions,
        })
        return EXIT_OK

    if action == "add-element":
        element = model.declare_element(args.aspect, args.perspective, args.name,
                                        _attrs(args.attr), key=args.key)
        created = element.id
    elif action == "reify":
        created = model.reify(args.parent, args.child)
    elif action == "relator":
        created = relators.create_relator(model, args.kind, args.mediates, name=args.name).id
    elif action == "relate":
        created = relators.found_relationship(model, args.relator, args.a, args.b, args.kind).id
    elif action == "goal":
        target = normative.Target.parse(args.target, unit=args.unit)
        created = normative.define_goal(model, args.dimension, args.statement, args.metric,
                                        target, args.review_days, key=args.key).id
    elif action == "annotate":
        created = ecosystem.annotate(model, args.subject, args.property, args.note).id
    else:  # pragma: no cover - argparse restricts the choices
        raise UsageError(f"unknown model action {action!r}")
    _save(args, model)
    _emit(args, created, {"id": created})
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--store", default=default if suppress else DEFAULT_STORE,
                        help=f"store file (default ./{DEFAULT_STORE})")
    parser.add_argument("--format", choices=("text", "json"),
                        default=default if suppress else "text")
    parser.add_argument("--seed", type=int, default=default, help="override the scenario seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tantra", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    flags = argparse.ArgumentParser(add_help=False)
    _global_flags(flags, suppress=True)
    verbs = parser.add_subparsers(dest="verb", required=True)

    ingest = verbs.add_parser("ingest", parents=[flags], help="ingest a CSV into the store")
    source = ingest.add_mutually_exclusive_group(required=True)
    source.add_argument("--schemes", metavar="CSV")
    source.add_argument("--separations", metavar="CSV")
    source.add_argument("--markers", metavar="CSV")

    report = verbs.add_parser("report", parents=[flags], help="print a report")
    kinds = report.add_subparsers(dest="report", required=True)
    ent = kinds.add_parser("entropy", parents=[flags])
    ent.add_argument("--aspect")
    sep = kinds.add_parser("separations", parents=[flags])
    sep.add_argument("--kind")
    alloc = kinds.add_parser("allocations", parents=[flags])
    alloc.add_argument("--year")
    alloc.add_argument("--group-by", choices=("scheme", "category"), default="scheme")
    goals = kinds.add_parser("goals", parents=[flags])
    goals.add_argument("--as-of")

    sim = verbs.add_parser("sim", parents=[flags], help="run a diffusion scenario")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--runs", type=int)

    model = verbs.add_parser("model", parents=[flags], help="edit or check the model")
    actions = model.add_subparsers(dest="action", required=True)
    add = actions.add_parser("add-element", parents=[flags])
    add.add_argument("--aspect", required=True)
    add.add_argument("--perspective", required=True)
    add.add_argument("--name", required=True)
    add.add_argument("--key")
    add.add_argument("--attr", action="append", metavar="NAME=VALUE")
    reify = actions.add_parser("reify", parents=[flags])
    reify.add_argument("--parent", required=True)
    reify.add_argument("--child", required=True)
    rel = actions.add_parser("relator", parents=[flags])
    rel.add_argument("--kind", required=True)
    rel.add_argument("--mediates", nargs="+", required=True)
    rel.add_argument("--name")
    relate = actions.add_parser("relate", parents=[flags])
    relate.add_argument("--relator", required=True)
    relate.add_argument("--a", required=True)
    relate.add_argument("--b", required=True)
    relate.add_argument("--kind", required=True)
    goal = actions.add_parser("goal", parents=[flags])
    goal.add_argument("--dimension", required=True)
    goal.add_argument("--statement", required=True)
    goal.add_argument("--metric", required=True)
    goal.add_argument("--target", required=True, help="e.g. '>= 0.10'")
    goal.add_argument("--unit", default="")
    goal.add_argument("--review-days", type=int, required=True)
    goal.add_argument("--key")
    toc = actions.add_parser("toc", parents=[flags])
    toc_actions = toc.add_subparsers(dest="toc_action", required=True)
    toc_new = toc_actions.add_parser("new", parents=[flags])
    toc_new.add_argument("--file", required=True)
    for name in ("validate", "export"):
        sub = toc_actions.add_parser(name, parents=[flags])
        sub.add_argument("--id", required=True)
    actions.add_parser("validate", parents=[flags])
    actions.add_parser("fixture", parents=[flags])
    note = actions.add_parser("annotate", parents=[flags])
    note.add_argument("--subject", required=True)
    note.add_argument("--property", required=True)
    note.add_argument("--note", default="")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    handlers = {"ingest": cmd_ingest, "report": cmd_report, "sim": cmd_sim, "model": cmd_model}
    try:
        return handlers[args.verb](args)
    except TantraError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
    except (OSError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
