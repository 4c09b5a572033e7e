"""Process line assembly.

A :class:`ProcessLine` is a process model whose OPTIONAL capabilities are bound
to variation points, plus the rules deciding each point at instantiation time.
Elements bound to no variation point form the core.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from procline import _graph
from procline.charmaps import AttributeDef, attribute_defs_to_json, parse_attribute_defs
from procline.errors import ProcLineError
from procline.procmodel import (
    ID_RE,
    Finding,
    ProcessModel,
    ValidationReport,
    VariationPoint,
    model_elements,
    model_from_dict,
    model_to_dict,
    parse_json,
    restrict_model,
    validate_model,
)
from procline.ruledsl import Exclude, Include, Resolve, RuleSet, parse_rules, print_rules
from procline.scoping import ScopeDecisionSet

LINE_KEYS = ("ruleset", "parametric_defaults", "attributes")


@dataclass(frozen=True)
class Binding:
    capability: str
    elements: frozenset[str]
    variation_point: str | None = None
    rules: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ProcessLine:
    model: ProcessModel
    ruleset: RuleSet = RuleSet()
    parametric_defaults: Mapping[str, Any] = field(default_factory=dict)
    attributes: tuple[AttributeDef, ...] = ()
    warnings: tuple[Finding, ...] = field(default=(), compare=False)

    @property
    def variation_points(self) -> tuple[VariationPoint, ...]:
        return self.model.variation_points

    def variation_point(self, vp_id: str) -> VariationPoint | None:
        for vp in self.model.variation_points:
            if vp.id == vp_id:
                return vp
        return None

    def universe(self) -> frozenset[str]:
        return model_elements(self.model)

    @property
    def core(self) -> frozenset[str]:
        bound: set[str] = set()
        for vp in self.model.variation_points:
            bound |= vp.elements
        return self.universe() - bound


@dataclass(frozen=True)
class LineStats:
    core_count: int
    variant_counts: Mapping[str, int]
    total: int


def _rules_for(vp_id: str, ruleset: RuleSet) -> tuple[str, ...]:
    # Opt1.1, Opt1.2 govern Opt1
    return tuple(r.id for r in ruleset if r.id == vp_id or r.id.rsplit(".", 1)[0] == vp_id)


def build_line(
    model: ProcessModel,
    scope: ScopeDecisionSet,
    ruleset: RuleSet,
    binding: Mapping[str, Binding | Sequence[str]],
    parametric_defaults: Mapping[str, Any] | None = None,
    attributes: Sequence[AttributeDef] = (),
) -> ProcessLine:
    raw = ProcessModel(model.activities, model.work_products, model.product_flow, model.control_flow, model.views)
    findings = validate_model(raw)
    if findings:
        raise ProcLineError("E_INVALID_MODEL", f"model has {len(findings)} findings, first: {findings[0].element}: {findings[0].message}", findings=findings)
    universe = model_elements(raw)

    bindings: list[Binding] = []
    for cap in sorted(binding):
        b = binding[cap]
        if not isinstance(b, Binding):
            b = Binding(cap, frozenset(b))
        if scope.get(cap) is None:
            raise ProcLineError("E_UNKNOWN_CAPABILITY", f"binding names capability {cap!r} absent from the scope")
        unknown = sorted(b.elements - universe)
        if unknown:
            raise ProcLineError("E_UNKNOWN_ELEMENT", f"{cap} binds unknown elements {unknown}")
        bindings.append(b)

    owner: dict[str, str] = {}
    for b in bindings:
        for elem in sorted(b.elements):
            if elem in owner:
                raise ProcLineError("E_OVERLAP", f"{elem} is bound to both {owner[elem]} and {b.capability}")
            owner[elem] = b.capability

    removed: set[str] = set()
    for b in bindings:
        if scope.classify(b.capability) == "OUT":
            removed |= b.elements
    trimmed = restrict_model(raw, universe - removed) if removed else raw
    remaining = model_elements(trimmed)

    warnings: list[Finding] = []
    vps: list[VariationPoint] = []
    by_cap = {b.capability: b for b in bindings}
    for decision in scope.decisions:
        if decision.cls != "OPTIONAL":
            continue
        b = by_cap.get(decision.capability)
        if b is None:
            if decision.kind == "structural":
                warnings.append(
                    Finding("W_UNREALIZED", decision.capability, "optional capability has no process elements bound")
                )
            continue
        lost = sorted(b.elements - remaining)
        if lost:
            raise ProcLineError("E_UNKNOWN_ELEMENT", f"{b.capability} binds {lost}, removed with an OUT capability")
        vp_id = b.variation_point or b.capability
        if not ID_RE.fullmatch(vp_id):
            raise ProcLineError("E_SCHEMA", f"invalid variation point id {vp_id!r}")
        rules = b.rules if b.rules is not None else _rules_for(vp_id, ruleset)
        if not rules:
            raise ProcLineError("E_NO_RULE", f"optional capability {b.capability} ({vp_id}) has no governing rule")
        missing = [r for r in rules if ruleset.get(r) is None]
        if missing:
            raise ProcLineError("E_NO_RULE", f"{vp_id} names undefined rules {missing}")
        vps.append(VariationPoint(vp_id, b.capability, b.elements, tuple(rules)))

    ids = [vp.id for vp in vps]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ProcLineError("E_DUP_VP", f"variation point ids bound more than once: {dup}")
    vps.sort(key=lambda vp: vp.id)

    governing = {r for vp in vps for r in vp.rules}
    pruned = RuleSet(tuple(r for r in ruleset if r.id in governing))
    line_model = ProcessModel(
        trimmed.activities, trimmed.work_products, trimmed.product_flow, trimmed.control_flow, trimmed.views, tuple(vps)
    )
    line = ProcessLine(line_model, pruned, dict(sorted((parametric_defaults or {}).items())), tuple(attributes), tuple(warnings))
    findings = validate_line(line)
    if findings:
        raise ProcLineError(findings[0].code, f"line invalid: {findings[0].element}: {findings[0].message}", findings=findings)
    return line


def resolve_graph(line: ProcessLine) -> dict[str, list[str]]:
    """Variation point -> variation points its rules resolve (unknown targets dropped)."""
    vp_ids = {vp.id for vp in line.variation_points}
    edges = []
    for vp in line.variation_points:
        for rid in vp.rules:
            rule = line.ruleset.get(rid)
            if rule is None:
                continue
            edges += [(vp.id, a.target) for a in rule.actions if isinstance(a, Resolve) and a.target in vp_ids]
    return _graph.adjacency(sorted(vp_ids), edges)


def validate_line(line: ProcessLine) -> ValidationReport:
    model = line.model
    findings = validate_model(model)
    universe = model_elements(model)
    vp_ids = {vp.id for vp in model.variation_points}

    owner: dict[str, str] = {}
    for vp in sorted(model.variation_points, key=lambda v: v.id):
        for elem in sorted(vp.elements):
            if elem in owner and owner[elem] != vp.id:
                findings.append(Finding("E_OVERLAP", elem, f"bound to both {owner[elem]} and {vp.id}"))
            owner.setdefault(elem, vp.id)
        if not vp.rules:
            findings.append(Finding("E_NO_RULE", vp.id, "variation point has no governing rule"))
        for rid in vp.rules:
            if line.ruleset.get(rid) is None:
                findings.append(Finding("E_NO_RULE", vp.id, f"governing rule {rid} is not defined"))
    core = universe - set(owner)

    for rule in line.ruleset:
        for action in rule.actions:
            if isinstance(action, Resolve) and action.target not in vp_ids:
                findings.append(Finding("E_DANGLING_RESOLVE", rule.id, f"resolve({action.target}) names no variation point"))
            if isinstance(action, (Include, Exclude)):
                for elem in action.elements:
                    if elem not in universe:
                        findings.append(Finding("E_UNKNOWN_ELEMENT", rule.id, f"{elem} is not a line element"))
                    elif elem in core:
                        findings.append(Finding("E_CORE_TARGET", rule.id, f"{elem} is a core element"))

    for comp in _graph.cyclic_components(resolve_graph(line)):
        findings.append(Finding("E_RESOLVE_CYCLE", comp[0], "resolve cycle among " + ", ".join(comp)))

    # a core edge touching a variable vertex would dangle once that vertex is erased
    for edge in sorted(model.product_flow, key=lambda e: e.key):
        if edge.key in core:
            for end in (edge.activity, edge.work_product):
                if end in owner:
                    findings.append(
                        Finding("E_CORE_DEP", end, f"core edge {edge.key} depends on {end} of {owner[end]}")
                    )
    for edge in sorted(model.control_flow, key=lambda e: e.key):
        if edge.key in core:
            for end in (edge.source, edge.target):
                if end in owner:
                    findings.append(
                        Finding("E_CORE_DEP", end, f"core edge {edge.key} depends on {end} of {owner[end]}")
                    )
    # a core work product kept alive only by variable edges would be orphaned
    flows: dict[str, list[str]] = {}
    for edge in model.product_flow:
        flows.setdefault(edge.work_product, []).append(edge.key)
    for wp in sorted(model.work_products, key=lambda w: w.id):
        keys = flows.get(wp.id, [])
        if wp.id in core and not wp.standalone and keys and all(k in owner for k in keys):
            vps = ", ".join(sorted({owner[k] for k in keys}))
            findings.append(Finding("E_CORE_DEP", wp.id, f"core work product has product flow only through {vps}"))
    return findings


def line_stats(line: ProcessLine) -> LineStats:
    counts = {vp.id: len(vp.elements) for vp in sorted(line.variation_points, key=lambda v: v.id)}
    return LineStats(len(line.core), counts, len(line.universe()))


# -- JSON --------------------------------------------------------------------


def parse_binding(doc: Any) -> dict[str, Binding]:
    """``{capability: [ids]}`` or ``{capability: {"variation_point": id,
    "elements": [ids], "rules": [rule ids]}}`` (variation_point and rules optional)."""
    if not isinstance(doc, dict):
        raise ProcLineError("E_SCHEMA", "binding must be a JSON object")
    out = {}
    for cap, raw in doc.items():
        if isinstance(raw, list):
            raw = {"elements": raw}
        if not isinstance(raw, dict) or "elements" not in raw or set(raw) - {"variation_point", "elements", "rules"}:
            raise ProcLineError("E_SCHEMA", f"binding.{cap}: expected elements, variation_point, rules")
        elems = raw["elements"]
        if not isinstance(elems, list) or not elems or not all(isinstance(e, str) for e in elems):
            raise ProcLineError("E_SCHEMA", f"binding.{cap}.elements must be a non-empty list of ids")
        rules = raw.get("rules")
        out[cap] = Binding(cap, frozenset(elems), raw.get("variation_point"), tuple(rules) if rules is not None else None)
    return out


def line_to_dict(line: ProcessLine) -> dict[str, Any]:
    doc = model_to_dict(line.model)
    doc["ruleset"] = print_rules(line.ruleset)
    doc["parametric_defaults"] = dict(sorted(line.parametric_defaults.items()))
    if line.attributes:
        doc["attributes"] = attribute_defs_to_json(line.attributes)
    return doc


def line_from_dict(doc: Any) -> ProcessLine:
    model = model_from_dict(doc, LINE_KEYS)
    attributes = parse_attribute_defs(doc["attributes"]) if "attributes" in doc else ()
    text = doc.get("ruleset", "")
    if not isinstance(text, str):
        raise ProcLineError("E_SCHEMA", "ruleset must be rule text")
    defaults = doc.get("parametric_defaults", {})
    if not isinstance(defaults, dict):
        raise ProcLineError("E_SCHEMA", "parametric_defaults must be an object")
    return ProcessLine(model, parse_rules(text, attributes or None), dict(sorted(defaults.items())), attributes)


def parse_line(text: str) -> ProcessLine:
    return line_from_dict(parse_json(text))
