"""Turn characterized products and projects into a process scope.

Pipeline: :func:`demand_profile` evaluates the capability mapping per entity,
:func:`check_constraints` adds interdependency demands and settles conflicting
entity restrictions by priority, :func:`scope_capabilities` classifies every
capability CORE / OPTIONAL / OUT, and :func:`match_processes` checks the CORE
set against the process map.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Literal

from procline.charmaps import (
    AttributeDef,
    CharacterizationEntry,
    CharacterizationMap,
    Value,
    priority_score,
)
from procline.errors import ProcLineError
from procline.procmodel import ID_RE, Finding
from procline.ruledsl import (
    Condition,
    ProjectContext,
    condition_attributes,
    eval_condition,
    parse_condition,
    print_condition,
)

ScopeClass = Literal["CORE", "OPTIONAL", "OUT"]
CapabilityKind = Literal["structural", "parametric"]
EXACT_COVER_LIMIT = 20
DEFAULT_THRESHOLD = Fraction(1)
DEFAULT_MIN_SCORE = 4


@dataclass(frozen=True)
class MappingRow:
    condition: Condition
    capability: str
    kind: CapabilityKind = "structural"
    parameter: tuple[str, Any] | None = None

    def __post_init__(self) -> None:
        if (self.kind == "parametric") != (self.parameter is not None):
            raise ProcLineError("E_SCHEMA", f"{self.capability}: parametric rows need a parameter, structural rows none")


@dataclass(frozen=True)
class Demand:
    capability: str
    kind: CapabilityKind
    score: int
    parameters: tuple[tuple[str, Any], ...] = ()


@dataclass(frozen=True)
class DemandProfile:
    entities: tuple[str, ...]
    demands: Mapping[str, tuple[Demand, ...]]
    capabilities: Mapping[str, CapabilityKind]  # capability universe with kinds
    restrictions: Mapping[str, Mapping[tuple[str, str], frozenset[str]]] = field(default_factory=dict)
    findings: tuple[Finding, ...] = ()

    def demanders(self, capability: str) -> list[str]:
        return [e for e in self.entities if any(d.capability == capability for d in self.demands.get(e, ()))]

    def demand(self, entity: str, capability: str) -> Demand | None:
        for d in self.demands.get(entity, ()):
            if d.capability == capability:
                return d
        return None


@dataclass(frozen=True)
class ScopeDecision:
    capability: str
    cls: ScopeClass
    kind: CapabilityKind
    provenance: tuple[str, ...]
    max_score: int


@dataclass(frozen=True)
class ScopeDecisionSet:
    decisions: tuple[ScopeDecision, ...]
    threshold_fraction: Fraction = DEFAULT_THRESHOLD
    min_score: int = DEFAULT_MIN_SCORE

    def of_class(self, cls: ScopeClass) -> tuple[str, ...]:
        return tuple(d.capability for d in self.decisions if d.cls == cls)

    def classify(self, capability: str) -> ScopeClass | None:
        for d in self.decisions:
            if d.capability == capability:
                return d.cls
        return None

    def get(self, capability: str) -> ScopeDecision | None:
        for d in self.decisions:
            if d.capability == capability:
                return d
        return None


@dataclass(frozen=True)
class RequiresCapability:
    capability: str


@dataclass(frozen=True)
class RestrictsEntities:
    map_kind: str
    attribute: str
    allowed: frozenset[str]


@dataclass(frozen=True)
class Constraint:
    id: str
    condition: Condition
    requirement: RequiresCapability | RestrictsEntities


@dataclass(frozen=True)
class Conflict:
    constraints: tuple[str, str]
    entity: str
    kept: str
    dropped: str
    winning_score: int
    losing_score: int


@dataclass(frozen=True)
class CoverageReport:
    covering: Mapping[str, tuple[str, ...]]
    gaps: tuple[str, ...]
    minimal_cover: tuple[str, ...]
    approximate: bool = False


# -- entity tables -----------------------------------------------------------


def _entity_table(maps: Sequence[CharacterizationMap]):
    """entity -> {attribute: entry}, entity -> map kinds, attribute -> map kind."""
    entries: dict[str, dict[str, CharacterizationEntry]] = {}
    kinds: dict[str, set[str]] = {}
    attr_kind: dict[str, str] = {}
    for cmap in maps:
        for defn in cmap.attributes:
            attr_kind[defn.name] = cmap.map_kind
        for rec in cmap.entities:
            kinds.setdefault(rec.entity_id, set()).add(cmap.map_kind)
            entries.setdefault(rec.entity_id, {})
        for entry in cmap.entries:
            entries[entry.entity_id][entry.attribute] = entry
    return entries, kinds, attr_kind


def _applicable(cond: Condition, entity_kinds: set[str], attr_kind: Mapping[str, str]) -> bool:
    # A condition only speaks about entities characterized in every map its
    # attributes belong to; elsewhere it is silently inapplicable.
    needed = set()
    for attr in condition_attributes(cond):
        if attr not in attr_kind:
            return False
        needed.add(attr_kind[attr])
    return needed <= entity_kinds


def _trigger(
    cond: Condition, entity: str, entries: Mapping[str, CharacterizationEntry]
) -> tuple[bool, int, Finding | None]:
    """(holds, score of referenced entries, E_UNBOUND finding if unbound)."""
    ctx = {attr: e.value for attr, e in entries.items()}
    try:
        holds = eval_condition(cond, ctx)
    except ProcLineError as exc:
        if exc.code != "E_UNBOUND":
            raise
        return False, 0, Finding("E_UNBOUND", entity, f"{print_condition(cond)}: {exc.message}")
    score = max((priority_score(entries[a]) for a in condition_attributes(cond)), default=0)
    return holds, score, None


def context_from_maps(maps: Sequence[CharacterizationMap], entity_ids: Iterable[str]) -> ProjectContext:
    """Merge the entries of several entities (e.g. one project and one of its
    products) into an instantiation context; priorities become scores."""
    entries, _, _ = _entity_table(maps)
    values: dict[str, Value] = {}
    scores: dict[str, int] = {}
    for entity in entity_ids:
        if entity not in entries:
            raise ProcLineError("E_UNBOUND", f"entity {entity!r} not found in the maps")
        for attr, entry in entries[entity].items():
            score = priority_score(entry)
            if attr not in values or score > scores[attr]:
                values[attr] = entry.value
                scores[attr] = score
    return ProjectContext(values, scores)


# -- demands -----------------------------------------------------------------


def demand_profile(maps: Sequence[CharacterizationMap], mapping: Sequence[MappingRow]) -> DemandProfile:
    entries, kinds, attr_kind = _entity_table(maps)
    universe: dict[str, CapabilityKind] = {}
    for row in mapping:
        if universe.setdefault(row.capability, row.kind) != row.kind:
            raise ProcLineError("E_SCHEMA", f"capability {row.capability} is both structural and parametric")

    demands: dict[str, tuple[Demand, ...]] = {}
    findings: list[Finding] = []
    for entity in sorted(entries):
        found: dict[str, Demand] = {}
        for row in mapping:
            if not _applicable(row.condition, kinds[entity], attr_kind):
                continue
            holds, score, problem = _trigger(row.condition, entity, entries[entity])
            if problem is not None:
                findings.append(problem)
            if not holds:
                continue
            params = (row.parameter,) if row.parameter is not None else ()
            prev = found.get(row.capability)
            if prev is not None:
                score = max(score, prev.score)
                params = tuple(sorted(set(prev.parameters) | set(params), key=repr))
            found[row.capability] = Demand(row.capability, row.kind, score, params)
        demands[entity] = tuple(found[c] for c in sorted(found))
    return DemandProfile(tuple(sorted(entries)), demands, dict(sorted(universe.items())), {}, tuple(findings))


def _as_fraction(value: Fraction | float | int | str) -> Fraction:
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def scope_capabilities(
    profile: DemandProfile,
    threshold_fraction: Fraction | float | str = DEFAULT_THRESHOLD,
    min_score: int = DEFAULT_MIN_SCORE,
) -> ScopeDecisionSet:
    """CORE: demanded by at least ``threshold_fraction`` of all entities with a
    maximum score of at least ``min_score``; OPTIONAL: demanded but not CORE;
    OUT: demanded by nobody."""
    if not profile.entities:
        raise ProcLineError("E_EMPTY_PROFILE", "cannot scope a profile without entities")
    threshold = _as_fraction(threshold_fraction)
    if not 0 <= threshold <= 1:
        raise ProcLineError("E_SCHEMA", f"threshold_fraction {threshold} outside [0, 1]")
    n = len(profile.entities)
    decisions = []
    for cap, kind in sorted(profile.capabilities.items()):
        who = profile.demanders(cap)
        best = max((profile.demand(e, cap).score for e in who), default=0)  # type: ignore[union-attr]
        if not who:
            cls: ScopeClass = "OUT"
        elif Fraction(len(who), n) >= threshold and best >= min_score:
            cls = "CORE"
        else:
            cls = "OPTIONAL"
        decisions.append(ScopeDecision(cap, cls, kind, tuple(who), best))
    return ScopeDecisionSet(tuple(decisions), threshold, min_score)


# -- process matching --------------------------------------------------------


def match_processes(scope: ScopeDecisionSet, process_map: CharacterizationMap) -> CoverageReport:
    core = scope.of_class("CORE")
    offers: dict[str, frozenset[str]] = {}
    for entity in process_map.entity_ids():
        offers[entity] = frozenset(
            e.attribute for e in process_map.entries_for(entity) if e.value is True and e.attribute in core
        )
    covering = {cap: tuple(p for p in sorted(offers) if cap in offers[p]) for cap in core}
    gaps = tuple(cap for cap in core if not covering[cap])
    needed = frozenset(core) - frozenset(gaps)
    candidates = sorted(p for p in offers if offers[p])

    if not needed:
        return CoverageReport(covering, gaps, ())
    if len(candidates) <= EXACT_COVER_LIMIT:
        for size in range(1, len(candidates) + 1):
            for combo in itertools.combinations(candidates, size):
                if frozenset().union(*(offers[p] for p in combo)) >= needed:
                    return CoverageReport(covering, gaps, combo)
    # greedy set cover, ties to the lexicographically smallest process
    chosen: list[str] = []
    left = set(needed)
    while left:
        best = min(candidates, key=lambda p: -len(offers[p] & left))
        chosen.append(best)
        left -= offers[best]
    return CoverageReport(covering, gaps, tuple(sorted(chosen)), approximate=True)


# -- constraints -------------------------------------------------------------


def check_constraints(
    maps: Sequence[CharacterizationMap], profile: DemandProfile, constraints: Sequence[Constraint]
) -> tuple[DemandProfile, tuple[Conflict, ...]]:
    """Apply interdependency constraints to a profile.

    ``requires_capability`` constraints add structural demands; restrictions on
    the same entity attribute are intersected, and when two of them leave no
    common value the one triggered by higher-priority entries wins. Equal
    priorities are an error (E_TIE): there is nothing to rank them by.
    """
    entries, kinds, attr_kind = _entity_table(maps)
    demands = {e: {d.capability: d for d in ds} for e, ds in profile.demands.items()}
    universe = dict(profile.capabilities)
    restrictions = {e: dict(r) for e, r in profile.restrictions.items()}
    findings = list(profile.findings)
    conflicts: list[Conflict] = []

    for c in constraints:
        if isinstance(c.requirement, RequiresCapability):
            cap = c.requirement.capability
            if universe.setdefault(cap, "structural") != "structural":
                raise ProcLineError("E_SCHEMA", f"{c.id}: capability {cap} is parametric")

    for entity in sorted(entries):
        restricting: dict[tuple[str, str], list[tuple[int, str, frozenset[str]]]] = {}
        for c in constraints:
            if not _applicable(c.condition, kinds[entity], attr_kind):
                continue
            holds, score, problem = _trigger(c.condition, entity, entries[entity])
            if problem is not None:
                findings.append(replace(problem, message=f"constraint {c.id}: {problem.message}"))
            if not holds:
                continue
            req = c.requirement
            if isinstance(req, RequiresCapability):
                bucket = demands.setdefault(entity, {})
                prev = bucket.get(req.capability)
                if prev is None:
                    bucket[req.capability] = Demand(req.capability, "structural", score)
                elif score > prev.score:
                    bucket[req.capability] = replace(prev, score=score)
            else:
                restricting.setdefault((req.map_kind, req.attribute), []).append((score, c.id, req.allowed))

        for key, triggered in sorted(restricting.items()):
            triggered.sort(key=lambda t: (-t[0], t[1]))
            top_score, top_id, allowed = triggered[0]
            for score, cid, other in triggered[1:]:
                if allowed & other:
                    allowed = allowed & other
                    continue
                if score == top_score:
                    raise ProcLineError(
                        "E_TIE",
                        f"{entity}: constraints {top_id} and {cid} allow disjoint {key[1]} sets at equal score {score}",
                        entity=entity,
                        constraints=(top_id, cid),
                    )
                conflicts.append(Conflict((top_id, cid), entity, top_id, cid, top_score, score))
            restrictions.setdefault(entity, {})[key] = allowed

    new_profile = DemandProfile(
        profile.entities,
        {e: tuple(ds[c] for c in sorted(ds)) for e, ds in sorted(demands.items())},
        dict(sorted(universe.items())),
        restrictions,
        tuple(findings),
    )
    return new_profile, tuple(conflicts)


# -- JSON --------------------------------------------------------------------


def parse_mapping(doc: Any, defs: Sequence[AttributeDef] | None = None) -> tuple[MappingRow, ...]:
    if not isinstance(doc, list):
        raise ProcLineError("E_SCHEMA", "capability mapping must be a JSON array")
    rows = []
    for i, raw in enumerate(doc):
        if not isinstance(raw, dict) or not {"condition", "capability"} <= set(raw) or set(raw) - {
            "condition",
            "capability",
            "kind",
            "parameter",
        }:
            raise ProcLineError("E_SCHEMA", f"mapping[{i}]: expected keys condition, capability, kind, parameter")
        param = raw.get("parameter")
        if param is not None:
            if not isinstance(param, dict) or set(param) != {"name", "value"}:
                raise ProcLineError("E_SCHEMA", f"mapping[{i}].parameter must be {{name, value}}")
            param = (param["name"], param["value"])
        if not isinstance(raw["capability"], str) or not ID_RE.fullmatch(raw["capability"]):
            raise ProcLineError("E_SCHEMA", f"mapping[{i}].capability must be an identifier")
        kind = raw.get("kind", "structural")
        if kind not in ("structural", "parametric"):
            raise ProcLineError("E_SCHEMA", f"mapping[{i}].kind must be structural or parametric")
        rows.append(MappingRow(parse_condition(raw["condition"], defs), raw["capability"], kind, param))
    return tuple(rows)


def parse_constraints(doc: Any, defs: Sequence[AttributeDef] | None = None) -> tuple[Constraint, ...]:
    if not isinstance(doc, list):
        raise ProcLineError("E_SCHEMA", "constraints must be a JSON array")
    out = []
    for i, raw in enumerate(doc):
        keys = set(raw) if isinstance(raw, dict) else set()
        reqs = keys & {"requires_capability", "restricts_entities"}
        if not {"id", "condition"} <= keys or len(reqs) != 1 or keys - {"id", "condition"} - reqs:
            raise ProcLineError(
                "E_SCHEMA", f"constraints[{i}]: need id, condition and one of requires_capability / restricts_entities"
            )
        if "requires_capability" in raw:
            requirement: RequiresCapability | RestrictsEntities = RequiresCapability(raw["requires_capability"])
        else:
            r = raw["restricts_entities"]
            if not isinstance(r, dict) or set(r) != {"map_kind", "attribute", "allowed"}:
                raise ProcLineError("E_SCHEMA", f"constraints[{i}].restricts_entities needs map_kind, attribute, allowed")
            allowed = r["allowed"]
            if isinstance(allowed, str):
                allowed = allowed.split(";")
            requirement = RestrictsEntities(r["map_kind"], r["attribute"], frozenset(str(a).strip() for a in allowed))
            if defs is not None:
                by_name = {d.name: d for d in defs}
                defn = by_name.get(requirement.attribute)
                if defn is None:
                    raise ProcLineError("E_UNDECLARED", f"constraints[{i}]: unknown attribute {requirement.attribute!r}")
                if defn.scale != "id_set" or defn.applies_to != requirement.map_kind:
                    raise ProcLineError("E_SCHEMA", f"constraints[{i}]: {defn.name} is not an id_set of {requirement.map_kind} maps")
        out.append(Constraint(raw["id"], parse_condition(raw["condition"], defs), requirement))
    return tuple(out)


def profile_to_dict(profile: DemandProfile) -> dict[str, Any]:
    return {
        "entities": list(profile.entities),
        "demands": {
            e: [
                {
                    "capability": d.capability,
                    "kind": d.kind,
                    "score": d.score,
                    "parameters": [{"name": n, "value": v} for n, v in d.parameters],
                }
                for d in ds
            ]
            for e, ds in profile.demands.items()
        },
        "restrictions": {
            e: [{"map_kind": k[0], "attribute": k[1], "allowed": sorted(v)} for k, v in sorted(r.items())]
            for e, r in sorted(profile.restrictions.items())
        },
    }


def scope_to_dict(scope: ScopeDecisionSet) -> dict[str, Any]:
    return {
        "threshold_fraction": str(scope.threshold_fraction),
        "min_score": scope.min_score,
        "capabilities": [
            {
                "capability": d.capability,
                "class": d.cls,
                "kind": d.kind,
                "provenance": list(d.provenance),
                "max_score": d.max_score,
            }
            for d in scope.decisions
        ],
    }


def scope_from_dict(doc: Any) -> ScopeDecisionSet:
    try:
        decisions = tuple(
            ScopeDecision(c["capability"], c["class"], c.get("kind", "structural"), tuple(c["provenance"]), c["max_score"])
            for c in doc["capabilities"]
        )
        return ScopeDecisionSet(decisions, Fraction(doc.get("threshold_fraction", "1")), doc.get("min_score", DEFAULT_MIN_SCORE))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProcLineError("E_SCHEMA", f"malformed scope document: {exc}") from None


def conflict_to_dict(c: Conflict) -> dict[str, Any]:
    return {
        "constraints": list(c.constraints),
        "entity": c.entity,
        "kept": c.kept,
        "dropped": c.dropped,
        "winning_score": c.winning_score,
        "losing_score": c.losing_score,
    }


def coverage_to_dict(report: CoverageReport) -> dict[str, Any]:
    return {
        "covering": {k: list(v) for k, v in sorted(report.covering.items())},
        "gaps": list(report.gaps),
        "minimal_cover": list(report.minimal_cover),
        "approximate": report.approximate,
    }
