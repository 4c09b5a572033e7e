"""``procline`` command line.

Exit status: 0 success, 1 findings or a module error, 2 usage or unreadable input.
Artifacts (scope, line, instance files) are always JSON; ``--format`` picks
how reports and summaries are printed on stdout.
"""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any

from procline import __version__
from procline.charmaps import AttributeDef, CharacterizationMap, load_attribute_defs, load_map
from procline.dot import export_dot
from procline.errors import PARSE_CODES, ProcLineError
from procline.fixtures import gen_fixture, write_fixture
from procline.instantiator import (
    InstantiatedModel,
    instance_to_dict,
    instantiate,
    parse_instance,
)
from procline.lineforge import (
    LINE_KEYS,
    ProcessLine,
    build_line,
    line_from_dict,
    line_stats,
    line_to_dict,
    parse_binding,
    validate_line,
)
from procline.metrics import diff_instances, metrics_report
from procline.procmodel import Finding, dump_json, model_from_dict, model_summary, parse_json, validate_model
from procline.ruledsl import ProjectContext, condition_attributes, parse_rules
from procline.scoping import (
    Demand,
    check_constraints,
    conflict_to_dict,
    coverage_to_dict,
    demand_profile,
    match_processes,
    parse_constraints,
    parse_mapping,
    profile_to_dict,
    scope_capabilities,
    scope_from_dict,
    scope_to_dict,
)


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _json(path: str) -> Any:
    return parse_json(_read(path))


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") or not text else text + "\n")


def _warn(findings: Sequence[Finding]) -> None:
    for f in findings:
        print(f"warning: {f}", file=sys.stderr)


def _defs(path: str | None) -> tuple[AttributeDef, ...]:
    return load_attribute_defs(_read(path)) if path else ()


# -- commands ----------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    doc = _json(args.model)
    if isinstance(doc, dict) and set(LINE_KEYS) & set(doc):
        findings = validate_line(line_from_dict(doc))
    else:
        findings = validate_model(model_from_dict(doc))
    if args.format == "json":
        _out(dump_json({"findings": [f.as_dict() for f in findings], "valid": not findings}))
    elif not findings:
        _out("ok")
    for f in findings:
        print(f, file=sys.stderr)
    return 1 if findings else 0


def cmd_scope(args: argparse.Namespace) -> int:
    defs = _defs(args.defs)
    maps = [load_map(_read(p), defs) for p in args.maps]
    for m in maps:
        _warn(m.warnings)
    mapping = parse_mapping(_json(args.mapping), defs or None)
    profile = demand_profile(maps, mapping)
    conflicts: tuple = ()
    if args.constraints:
        profile, conflicts = check_constraints(maps, profile, parse_constraints(_json(args.constraints), defs or None))
    _warn(profile.findings)
    scope = scope_capabilities(profile, args.threshold, args.min_score)
    doc = scope_to_dict(scope)
    doc["profile"] = profile_to_dict(profile)
    doc["conflicts"] = [conflict_to_dict(c) for c in conflicts]
    coverage = None
    if args.process_map:
        pmap: CharacterizationMap = load_map(_read(args.process_map), defs, "process")
        coverage = match_processes(scope, pmap)
        doc["coverage"] = coverage_to_dict(coverage)

    if args.output:
        _write(args.output, dump_json(doc))
    if args.format == "json":
        if not args.output:
            _out(dump_json(doc))
        else:
            _out(dump_json({cls: list(scope.of_class(cls)) for cls in ("CORE", "OPTIONAL", "OUT")}))
        return 0
    for d in scope.decisions:
        _out(f"{d.cls:<8} {d.capability} ({d.kind}, {len(d.provenance)}/{len(profile.entities)} entities, max score {d.max_score})")
    for c in conflicts:
        _out(f"conflict {c.entity}: {c.kept} ({c.winning_score}) over {c.dropped} ({c.losing_score})")
    if coverage is not None:
        _out(f"cover: {', '.join(coverage.minimal_cover) or '-'}; gaps: {', '.join(coverage.gaps) or '-'}")
    return 0


def cmd_build_line(args: argparse.Namespace) -> int:
    defs = _defs(args.defs)
    model = model_from_dict(_json(args.model))
    scope = scope_from_dict(_json(args.scope))
    ruleset = parse_rules(_read(args.rules), defs or None)
    binding = parse_binding(_json(args.binding))
    defaults = _json(args.defaults) if args.defaults else {}
    if not isinstance(defaults, dict):
        raise ProcLineError("E_SCHEMA", "parametric defaults must be a JSON object")
    used = {a for rule in ruleset for a in condition_attributes(rule.condition)}
    line = build_line(model, scope, ruleset, binding, defaults, [d for d in defs if d.name in used])
    _warn(line.warnings)
    text = dump_json(line_to_dict(line))
    stats = line_stats(line)
    summary = {"core": stats.core_count, "variation_points": dict(stats.variant_counts), "total": stats.total}
    if args.output:
        _write(args.output, text)
    if args.format == "json":
        _out(text if not args.output else dump_json(summary))
    else:
        vps = ", ".join(f"{k}={v}" for k, v in stats.variant_counts.items()) or "none"
        _out(f"line: {model_summary(line.model)}; core {stats.core_count}, variable {vps}, total {stats.total}")
    return 0


def _demands(path: str, entities: Sequence[str]) -> list[Demand]:
    doc = _json(path)
    try:
        table = doc["profile"]["demands"] if "profile" in doc else doc["demands"]
        out = []
        for entity in entities:
            if entity not in table:
                raise ProcLineError("E_UNBOUND", f"entity {entity!r} has no demand profile")
            for d in table[entity]:
                params = tuple((p["name"], p["value"]) for p in d.get("parameters", []))
                out.append(Demand(d["capability"], d["kind"], d["score"], params))
        return out
    except (KeyError, TypeError) as exc:
        raise ProcLineError("E_SCHEMA", f"{path}: malformed demand profile ({exc})") from None


def _instance_summary(name: str, inst: InstantiatedModel) -> dict[str, Any]:
    return {
        "context": name,
        "elements": len(inst.elements()),
        "included_vps": sorted(inst.included_vps),
        "excluded_vps": sorted(inst.excluded_vps),
        "parameters": dict(inst.parameters),
    }


def cmd_instantiate(args: argparse.Namespace) -> int:
    line: ProcessLine = line_from_dict(_json(args.line))
    demands = _demands(args.demands, args.entity) if args.demands else []
    if args.entity and not args.demands:
        raise UsageError("--entity needs --demands")
    contexts = [(Path(p).name.removesuffix(".json").removesuffix(".ctx"), ProjectContext.from_json(_json(p), line.attributes or None)) for p in args.contexts]
    if len(contexts) > 1 and args.output:
        raise UsageError("-o takes a single context; use --out-dir for several")

    with ThreadPoolExecutor(max_workers=min(8, len(contexts))) as pool:
        results = list(pool.map(lambda nc: instantiate(line, nc[1], demands), contexts))

    summaries = []
    for (name, _), inst in zip(contexts, results):
        _warn(inst.warnings)
        text = dump_json(instance_to_dict(inst))
        if args.output:
            _write(args.output, text)
        elif args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            _write(str(Path(args.out_dir) / f"{name}.instance.json"), text)
        elif args.format == "json" and len(contexts) == 1:
            _out(text)
            return 0
        summaries.append(_instance_summary(name, inst))

    if args.format == "json":
        _out(dump_json(summaries if len(summaries) > 1 or not (args.output or args.out_dir) else summaries[0]))
    else:
        for s in summaries:
            included = ", ".join(s["included_vps"]) or "none"
            _out(f"{s['context']}: {s['elements']} elements, included {included}")
    return 0


def cmd_diff(args: argparse.Namespace) -> int:
    d = diff_instances(parse_instance(_read(args.a)), parse_instance(_read(args.b)))
    if args.format == "json":
        _out(dump_json({"added": sorted(d.added), "removed": sorted(d.removed)}))
    else:
        for e in sorted(d.added):
            _out(f"+ {e}")
        for e in sorted(d.removed):
            _out(f"- {e}")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    line = line_from_dict(_json(args.line))
    instances = [parse_instance(_read(p)) for p in args.instances]
    names = [Path(p).name.removesuffix(".json") for p in args.instances]
    report = metrics_report(line, instances, names)
    if args.output:
        _write(args.output, dump_json(report))
    if args.format == "json":
        _out(dump_json(report))
    else:
        _out(f"commonality_ratio: {report['commonality_fraction']} ({report['commonality_ratio']:.4f})")
        for key in ("line_effort", "separate_effort", "savings", "effort_proxy"):
            _out(f"{key}: {report[key]}")
    return 0


def cmd_gen_fixture(args: argparse.Namespace) -> int:
    fixture = gen_fixture(args.activities, args.artifacts, args.pf_views, args.cf_views, args.seed)
    written = write_fixture(fixture, Path(args.out_dir))
    stats = line_stats(fixture.line)
    if args.format == "json":
        _out(dump_json({"files": [p.name for p in written], "summary": model_summary(fixture.line.model), "total": stats.total}))
    else:
        _out(f"{model_summary(fixture.line.model)} ({stats.total} elements) -> " + ", ".join(p.name for p in written))
    return 0


def cmd_dot(args: argparse.Namespace) -> int:
    doc = _json(args.model)
    subject = line_from_dict(doc) if isinstance(doc, dict) and set(LINE_KEYS) & set(doc) else model_from_dict(doc)
    text = export_dot(subject)
    if args.output:
        _write(args.output, text)
    elif args.format == "json":
        _out(dump_json({"dot": text}))
    else:
        sys.stdout.write(text)
    return 0


# -- parser ------------------------------------------------------------------


def _fraction_arg(text: str) -> str:
    try:
        Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="procline", description="Scope and instantiate software process lines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name: str, fn, help: str, default_format: str = "text") -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--format", choices=("text", "json"), default=default_format)
        p.set_defaults(func=fn)
        return p

    p = command("validate", cmd_validate, "check a model or line file")
    p.add_argument("model")

    p = command("scope", cmd_scope, "classify capabilities from characterization maps", "json")
    p.add_argument("maps", nargs="+")
    p.add_argument("--defs", required=True, help="attribute definitions (JSON)")
    p.add_argument("--mapping", required=True, help="capability mapping (JSON)")
    p.add_argument("--constraints")
    p.add_argument("--process-map")
    p.add_argument("--threshold", type=_fraction_arg, default="1")
    p.add_argument("--min-score", type=int, default=4)
    p.add_argument("-o", "--output")

    p = command("build-line", cmd_build_line, "bind optional capabilities to variation points", "json")
    p.add_argument("model")
    p.add_argument("scope")
    p.add_argument("rules")
    p.add_argument("binding")
    p.add_argument("--defs")
    p.add_argument("--defaults", help="parametric defaults (JSON object)")
    p.add_argument("-o", "--output")

    p = command("instantiate", cmd_instantiate, "resolve a line for one or more contexts", "json")
    p.add_argument("line")
    p.add_argument("contexts", nargs="+")
    p.add_argument("--demands", help="scope output or demand profile carrying parametric demands")
    p.add_argument("--entity", action="append", default=[], help="entity whose demands apply (repeatable)")
    p.add_argument("-o", "--output")
    p.add_argument("--out-dir")

    p = command("diff", cmd_diff, "element-set difference of two instances")
    p.add_argument("a")
    p.add_argument("b")

    p = command("metrics", cmd_metrics, "commonality and effort of a line's instances")
    p.add_argument("line")
    p.add_argument("instances", nargs="+")
    p.add_argument("-o", "--output")

    p = command("gen-fixture", cmd_gen_fixture, "write a seeded desk-scale line and two contexts")
    p.add_argument("--activities", type=int, default=76)
    p.add_argument("--artifacts", type=int, default=54)
    p.add_argument("--pf-views", type=int, default=18)
    p.add_argument("--cf-views", type=int, default=18)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")

    p = command("dot", cmd_dot, "Graphviz export, one digraph per view")
    p.add_argument("model")
    p.add_argument("-o", "--output")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ProcLineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.code in PARSE_CODES else 1


if __name__ == "__main__":
    sys.exit(main())
