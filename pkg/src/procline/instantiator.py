"""Resolve a process line into a plain process model for one project: no variation points left."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

from procline import _graph
from procline.errors import ProcLineError
from procline.lineforge import ProcessLine, resolve_graph, validate_line
from procline.procmodel import (
    Finding,
    ProcessModel,
    model_elements,
    model_from_dict,
    model_to_dict,
    parse_json,
    restrict_model,
    validate_model,
)
from procline.ruledsl import (
    Exclude,
    Include,
    ProjectContext,
    SetParam,
    eval_condition,
    governing_score,
)
from procline.scoping import Demand

INSTANCE_KEYS = ("included_vps", "excluded_vps", "parameters", "provenance")


@dataclass(frozen=True)
class InstantiatedModel:
    model: ProcessModel
    included_vps: frozenset[str] = frozenset()
    excluded_vps: frozenset[str] = frozenset()
    parameters: Mapping[str, Any] = field(default_factory=dict)
    provenance: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    warnings: tuple[Finding, ...] = field(default=(), compare=False)

    def elements(self) -> frozenset[str]:
        return model_elements(self.model)


def resolution_order(line: ProcessLine) -> list[str]:
    order = _graph.ordered_topological(resolve_graph(line))
    if order is None:
        raise ProcLineError("E_RESOLVE_CYCLE", "resolve actions form a cycle")
    return order


def _numeric(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def apply_parametrics(line: ProcessLine, demands: Iterable[Demand]) -> dict[str, Any]:
    """Overlay parametric demands on the line defaults. Numeric values only
    ratchet up; differing non-numeric values for one parameter are an error."""
    return _overlay(line.parametric_defaults, demands)


def _overlay(base: Mapping[str, Any], demands: Iterable[Demand]) -> dict[str, Any]:
    wanted: dict[str, list[Any]] = {}
    for d in demands:
        if d.kind != "parametric":
            continue
        for name, value in d.parameters:
            wanted.setdefault(name, []).append(value)
    params = dict(base)
    for name, values in sorted(wanted.items()):
        if all(_numeric(v) for v in values):
            top = max(values)
            prior = params.get(name)
            params[name] = max(top, prior) if _numeric(prior) else top
        elif len(set(map(repr, values))) == 1:
            params[name] = values[0]
        else:
            raise ProcLineError("E_PARAM_TYPE", f"parameter {name} demanded with non-numeric values {values}")
    return dict(sorted(params.items()))


def instantiate(
    line: ProcessLine, ctx: ProjectContext | Mapping[str, Any], demands: Sequence[Demand] = ()
) -> InstantiatedModel:
    if not isinstance(ctx, ProjectContext):
        ctx = ProjectContext(dict(ctx))
    problems = validate_line(line)
    if problems:
        raise ProcLineError(problems[0].code, f"line is not instantiable: {problems[0].element}: {problems[0].message}", findings=problems)

    vps = {vp.id: vp for vp in line.variation_points}
    owner = {elem: vp.id for vp in line.variation_points for elem in vp.elements}
    includes: dict[str, int] = {}
    excludes: dict[str, int] = {}
    params = dict(line.parametric_defaults)
    provenance: dict[str, tuple[str, ...]] = {}

    # Every point is evaluated once, in resolve order; resolve(X) only
    # guarantees X is evaluated after the point that resolved it.
    for vp_id in resolution_order(line):
        fired = []
        for rid in vps[vp_id].rules:
            rule = line.ruleset.get(rid)
            assert rule is not None
            if not eval_condition(rule.condition, ctx):
                continue
            fired.append(rid)
            score = governing_score(rule, ctx)
            for action in rule.actions:
                if isinstance(action, Include):
                    for elem in action.elements:
                        includes[elem] = max(includes.get(elem, -1), score)
                elif isinstance(action, Exclude):
                    for elem in action.elements:
                        excludes[elem] = max(excludes.get(elem, -1), score)
                elif isinstance(action, SetParam):
                    params[action.name] = action.value
        provenance[vp_id] = tuple(fired)

    included_by_rule = set()
    erased = set()
    for elem in sorted(set(includes) | set(excludes)):
        inc, exc = includes.get(elem), excludes.get(elem)
        if inc is not None and exc is not None and inc == exc:
            raise ProcLineError(
                "E_ACTION_CONFLICT", f"{elem} is both included and excluded at score {inc}", element=elem
            )
        if exc is None or (inc is not None and inc > exc):
            included_by_rule.add(owner[elem])
        else:
            erased.add(elem)

    keep = set(line.core)
    for vp_id in included_by_rule:
        keep |= vps[vp_id].elements - erased
    result = restrict_model(line.model, frozenset(keep))
    final = model_elements(result)

    findings = validate_model(result)
    if findings:
        raise ProcLineError(
            "E_POST_INVALID", f"instantiated model invalid: {findings[0].element}: {findings[0].message}", findings=findings
        )

    included = frozenset(v for v in vps if vps[v].elements & final)
    if demands:
        params = _overlay(params, demands)

    return InstantiatedModel(
        result,
        included,
        frozenset(vps) - included,
        dict(sorted(params.items())),
        dict(sorted(provenance.items())),
        tuple(_isolated(line.model, result)),
    )


def _isolated(before: ProcessModel, after: ProcessModel) -> list[Finding]:
    def touched(m: ProcessModel) -> set[str]:
        out = set()
        for e in m.product_flow:
            out |= {e.activity, e.work_product}
        for e in m.control_flow:
            out |= {e.source, e.target}
        return out

    lost = touched(before) - touched(after)
    vertices = after.activity_ids() | after.work_product_ids()
    return [Finding("W_ISOLATED", v, "vertex lost all its edges") for v in sorted(lost & vertices)]


def instantiate_many(
    line: ProcessLine, contexts: Sequence[ProjectContext], workers: int = 4
) -> list[InstantiatedModel]:
    """Instantiate several contexts against one shared, immutable line."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda c: instantiate(line, c), contexts))


def instance_to_dict(inst: InstantiatedModel) -> dict[str, Any]:
    doc = model_to_dict(inst.model)
    doc["included_vps"] = sorted(inst.included_vps)
    doc["excluded_vps"] = sorted(inst.excluded_vps)
    doc["parameters"] = dict(sorted(inst.parameters.items()))
    doc["provenance"] = {k: list(v) for k, v in sorted(inst.provenance.items())}
    return doc


def instance_from_dict(doc: Any) -> InstantiatedModel:
    model = model_from_dict(doc, INSTANCE_KEYS)
    try:
        return InstantiatedModel(
            model,
            frozenset(doc.get("included_vps", [])),
            frozenset(doc.get("excluded_vps", [])),
            dict(doc.get("parameters", {})),
            {k: tuple(v) for k, v in doc.get("provenance", {}).items()},
        )
    except (TypeError, AttributeError) as exc:
        raise ProcLineError("E_SCHEMA", f"malformed instance document: {exc}") from None


def parse_instance(text: str) -> InstantiatedModel:
    return instance_from_dict(parse_json(text))
