"""Packaged satellite fixture and the seeded desk-scale generator.

The satellite data describes two projects (Sat1, Sat2) and four subsystem
products. The model is a small onboard-software process whose optional parts
are the FMECA analysis (Opt1), the design rationale (Opt2) and the control
flow into the FMECA activity (Opt7).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from procline.charmaps import AttributeDef, CharacterizationMap, load_attribute_defs, load_map
from procline.errors import ProcLineError
from procline.lineforge import Binding, ProcessLine, build_line, line_to_dict, parse_binding, validate_line
from procline.procmodel import (
    Activity,
    ControlFlowEdge,
    ProcessModel,
    ProductFlowEdge,
    VariationPoint,
    View,
    WorkProduct,
    dump_json,
    parse_json,
    parse_model,
)
from procline.ruledsl import ProjectContext, RuleSet, condition_attributes, parse_rules
from procline.scoping import (
    Conflict,
    Constraint,
    MappingRow,
    ScopeDecisionSet,
    check_constraints,
    demand_profile,
    parse_constraints,
    parse_mapping,
    scope_capabilities,
)

SATELLITE_FILES = (
    "attrs.json",
    "binding.json",
    "constraints.json",
    "defaults.json",
    "mapping.json",
    "processes.csv",
    "products.csv",
    "projects.csv",
    "projects_tie.csv",
    "sat1.ctx.json",
    "sat2.ctx.json",
    "satline.rules",
    "satmodel.json",
)


def read_data(name: str) -> str:
    return resources.files("procline").joinpath("data", name).read_text(encoding="utf-8")


def copy_data(dest: Path) -> list[Path]:
    dest.mkdir(parents=True, exist_ok=True)
    out = []
    for name in SATELLITE_FILES:
        path = dest / name
        path.write_text(read_data(name), encoding="utf-8", newline="\n")
        out.append(path)
    return out


@dataclass(frozen=True)
class SatelliteInputs:
    defs: tuple[AttributeDef, ...]
    projects: CharacterizationMap
    products: CharacterizationMap
    processes: CharacterizationMap
    mapping: tuple[MappingRow, ...]
    constraints: tuple[Constraint, ...]
    model: ProcessModel
    ruleset: RuleSet
    binding: dict[str, Binding]
    defaults: dict[str, Any]
    contexts: dict[str, ProjectContext]

    @property
    def maps(self) -> tuple[CharacterizationMap, CharacterizationMap]:
        return (self.projects, self.products)


def satellite_inputs(projects_file: str = "projects.csv") -> SatelliteInputs:
    defs = load_attribute_defs(read_data("attrs.json"))
    return SatelliteInputs(
        defs,
        load_map(read_data(projects_file), defs),
        load_map(read_data("products.csv"), defs),
        load_map(read_data("processes.csv"), defs),
        parse_mapping(parse_json(read_data("mapping.json")), defs),
        parse_constraints(parse_json(read_data("constraints.json")), defs),
        parse_model(read_data("satmodel.json")),
        parse_rules(read_data("satline.rules"), defs),
        parse_binding(parse_json(read_data("binding.json"))),
        parse_json(read_data("defaults.json")),
        {
            name: ProjectContext.from_json(parse_json(read_data(f"{name}.ctx.json")), defs)
            for name in ("sat1", "sat2")
        },
    )


@dataclass(frozen=True)
class SatelliteLine:
    inputs: SatelliteInputs
    scope: ScopeDecisionSet
    conflicts: tuple[Conflict, ...]
    line: ProcessLine


def satellite_line() -> SatelliteLine:
    """Run scoping and line assembly over the packaged satellite data."""
    inp = satellite_inputs()
    profile, conflicts = check_constraints(inp.maps, demand_profile(inp.maps, inp.mapping), inp.constraints)
    scope = scope_capabilities(profile)
    used = {a for rule in inp.ruleset for a in condition_attributes(rule.condition)}
    line = build_line(
        inp.model, scope, inp.ruleset, inp.binding, inp.defaults, [d for d in inp.defs if d.name in used]
    )
    return SatelliteLine(inp, scope, conflicts, line)


# -- generator ---------------------------------------------------------------

GEN_ATTRIBUTES = (
    AttributeDef("collaboration_type", "nominal", "project", ("national", "international")),
    AttributeDef("mission_type", "nominal", "project", ("engineering", "science")),
)
GEN_RULES = (
    "Opt1.1: if collaboration_type == international then include(FMECA, A_HWSW_ANALYSIS)\n"
    "Opt2.1: if mission_type == engineering then include(RationaleForDesign)\n"
)
GEN_CONTEXTS = {
    "sat1": {"collaboration_type": {"value": "national", "score": 9}, "mission_type": {"value": "science", "score": 6}},
    "sat2": {"collaboration_type": {"value": "international", "score": 9}, "mission_type": {"value": "engineering", "score": 6}},
}


@dataclass(frozen=True)
class GeneratedFixture:
    line: ProcessLine
    contexts: dict[str, ProjectContext]


def gen_fixture(
    activities: int = 76, artifacts: int = 54, pf_views: int = 18, cf_views: int = 18, seed: int = 0
) -> GeneratedFixture:
    """Seeded layered-DAG process line with the requested counts.

    One activity is ``A_HWSW_ANALYSIS`` and two work products are ``FMECA`` and
    ``RationaleForDesign``; Opt1 and Opt2 own them along with every incident edge,
    so erasing either never strands a core edge.
    """
    if activities < 2 or artifacts < 2 or pf_views < 0 or cf_views < 0:
        raise ProcLineError("E_SCHEMA", "gen-fixture needs >= 2 activities, >= 2 artifacts, non-negative views")
    rng = random.Random(seed)

    core_acts = [f"A{i:03d}" for i in range(1, activities)]
    n_layers = min(len(core_acts), max(2, round(math.sqrt(len(core_acts)))))
    layer = {a: i * n_layers // len(core_acts) for i, a in enumerate(core_acts)}
    by_layer: list[list[str]] = [[] for _ in range(n_layers)]
    for a in core_acts:
        by_layer[layer[a]].append(a)

    cf: set[tuple[str, str]] = set()
    for k in range(1, n_layers):
        for a in by_layer[k]:
            for p in rng.sample(by_layer[k - 1], min(len(by_layer[k - 1]), rng.randint(1, 2))):
                cf.add((p, a))
    for _ in range(len(core_acts) // 4):
        i, j = sorted(rng.sample(range(n_layers), 2)) if n_layers > 1 else (0, 0)
        if i < j:
            cf.add((rng.choice(by_layer[i]), rng.choice(by_layer[j])))
    iterative: set[str] = set()
    forward = sorted(cf)
    for p, a in rng.sample(forward, min(len(forward), len(core_acts) // 15)):
        cf.add((a, p))  # rework loop
        iterative.add(p)

    hw = "A_HWSW_ANALYSIS"
    mid = n_layers // 2
    before = by_layer[mid - 1] if mid > 0 else by_layer[0]
    cf.add((rng.choice(before), hw))
    if mid < n_layers and mid > 0:
        cf.add((hw, rng.choice(by_layer[mid])))

    core_wps = [f"W{i:03d}" for i in range(1, artifacts - 1)]
    pf: set[tuple[str, str, str]] = set()
    for w in core_wps:
        producer = rng.choice(core_acts)
        pf.add((producer, w, "produces"))
        later = [a for a in core_acts if layer[a] > layer[producer]] or [a for a in core_acts if a != producer]
        for c in rng.sample(later, min(len(later), rng.randint(0, 2))):
            pf.add((c, w, "consumes"))
        if rng.random() < 0.1:
            pf.add((rng.choice(core_acts), w, "modifies"))
    pf.add((hw, "FMECA", "produces"))
    if core_wps:
        pf.add((hw, rng.choice(core_wps), "consumes"))
    pf.add((rng.choice(core_acts), "RationaleForDesign", "produces"))

    acts = tuple(Activity(a, f"Activity {a}", iterative=a in iterative) for a in [*core_acts, hw])
    wps = [*core_wps, "FMECA", "RationaleForDesign"]
    products = tuple(WorkProduct(w, f"Work product {w}") for w in wps)
    pf_edges = tuple(ProductFlowEdge(a, w, d) for a, w, d in sorted(pf))
    cf_edges = tuple(ControlFlowEdge(s, t) for s, t in sorted(cf))

    all_acts = [a.id for a in acts]
    views: list[View] = []
    order = rng.sample(all_acts, len(all_acts))
    for v in range(pf_views):
        group = set(order[v::pf_views])
        members = set(group)
        for e in pf_edges:
            if e.activity in group:
                members |= {e.key, e.work_product}
        views.append(View(f"PF{v + 1:02d}", "product_flow", frozenset(members)))
    order = rng.sample(all_acts, len(all_acts))
    for v in range(cf_views):
        group = set(order[v::cf_views])
        members = set(group)
        for e in cf_edges:
            if e.source in group:
                members |= {e.key, e.target}
        views.append(View(f"CF{v + 1:02d}", "control_flow", frozenset(members)))

    def owned(vertices: set[str]) -> frozenset[str]:
        edges = {e.key for e in pf_edges if {e.activity, e.work_product} & vertices}
        edges |= {e.key for e in cf_edges if {e.source, e.target} & vertices}
        return frozenset(vertices | edges)

    rules = parse_rules(GEN_RULES, GEN_ATTRIBUTES)
    vps = (
        VariationPoint("Opt1", "fmeca_analysis", owned({hw, "FMECA"}), ("Opt1.1",)),
        VariationPoint("Opt2", "design_rationale", owned({"RationaleForDesign"}), ("Opt2.1",)),
    )
    model = ProcessModel(acts, products, pf_edges, cf_edges, tuple(views), vps)
    line = ProcessLine(model, rules, {"ivv_level": 1, "reviews_per_phase": 1}, GEN_ATTRIBUTES)
    findings = validate_line(line)
    if findings:  # a generator bug, not a user error
        raise ProcLineError("E_INVALID_MODEL", f"generated line invalid: {findings[0].element}: {findings[0].message}", findings=findings)
    contexts = {k: ProjectContext.from_json(v, GEN_ATTRIBUTES) for k, v in GEN_CONTEXTS.items()}
    return GeneratedFixture(line, contexts)


def write_fixture(fixture: GeneratedFixture, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"line.json": line_to_dict(fixture.line)}
    files |= {f"{name}.ctx.json": ctx.to_json() for name, ctx in sorted(fixture.contexts.items())}
    written = []
    for name, doc in files.items():
        path = out_dir / name
        path.write_text(dump_json(doc), encoding="utf-8", newline="\n")
        written.append(path)
    return written
