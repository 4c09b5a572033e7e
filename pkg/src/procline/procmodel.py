"""Process model types, structural validation and JSON serialization.

A single :class:`ProcessModel` holds both the stable core and the variable
parts of a process line; the variable parts are the element sets named by its
``variation_points``.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any, Literal

from procline import _graph
from procline.errors import ProcLineError

ID_RE = re.compile(r"[A-Za-z0-9_.\-]+")

Direction = Literal["produces", "consumes", "modifies"]
DIRECTIONS: tuple[str, ...] = ("produces", "consumes", "modifies")
VIEW_KINDS: tuple[str, ...] = ("product_flow", "control_flow")

MODEL_KEYS = ("activities", "work_products", "product_flow", "control_flow", "views", "variation_points")


@dataclass(frozen=True)
class Activity:
    id: str
    name: str
    description: str = ""
    iterative: bool = False


@dataclass(frozen=True)
class WorkProduct:
    id: str
    name: str
    description: str = ""
    standalone: bool = False


@dataclass(frozen=True)
class ProductFlowEdge:
    activity: str
    work_product: str
    direction: Direction

    @property
    def key(self) -> str:
        return f"pf:{self.activity}>{self.work_product}:{self.direction}"


@dataclass(frozen=True)
class ControlFlowEdge:
    source: str
    target: str

    @property
    def key(self) -> str:
        return f"cf:{self.source}>{self.target}"


@dataclass(frozen=True)
class View:
    id: str
    kind: Literal["product_flow", "control_flow"]
    members: frozenset[str]


@dataclass(frozen=True)
class VariationPoint:
    """Named, rule-governed set of model elements (activities, work products,
    edge keys) that instantiation either keeps or erases as a unit."""

    id: str
    capability: str
    elements: frozenset[str]
    rules: tuple[str, ...] = ()


@dataclass(frozen=True)
class ProcessModel:
    activities: tuple[Activity, ...] = ()
    work_products: tuple[WorkProduct, ...] = ()
    product_flow: tuple[ProductFlowEdge, ...] = ()
    control_flow: tuple[ControlFlowEdge, ...] = ()
    views: tuple[View, ...] = ()
    variation_points: tuple[VariationPoint, ...] = ()

    def activity_ids(self) -> frozenset[str]:
        return frozenset(a.id for a in self.activities)

    def work_product_ids(self) -> frozenset[str]:
        return frozenset(w.id for w in self.work_products)


@dataclass(frozen=True)
class Finding:
    code: str
    element: str
    message: str

    def as_dict(self) -> dict[str, str]:
        return {"code": self.code, "element": self.element, "message": self.message}

    def __str__(self) -> str:
        return f"{self.code} {self.element}: {self.message}"


ValidationReport = list[Finding]


def model_elements(model: ProcessModel) -> frozenset[str]:
    """Element universe: activity and work product ids plus canonical edge keys.
    Views and variation points are not elements."""
    ids: set[str] = set()
    ids.update(a.id for a in model.activities)
    ids.update(w.id for w in model.work_products)
    ids.update(e.key for e in model.product_flow)
    ids.update(e.key for e in model.control_flow)
    return frozenset(ids)


def model_summary(model: ProcessModel) -> str:
    pf_views = sum(1 for v in model.views if v.kind == "product_flow")
    cf_views = sum(1 for v in model.views if v.kind == "control_flow")
    return f"{len(model.activities)}/{len(model.work_products)}/{pf_views}/{cf_views}"


def validate_model(model: ProcessModel) -> ValidationReport:
    findings: list[Finding] = []
    findings += _duplicate_findings(model)

    activities = model.activity_ids()
    products = model.work_product_ids()
    for edge in model.product_flow:
        if edge.activity not in activities:
            findings.append(Finding("DANGLING_REF", edge.activity, f"product-flow edge {edge.key} names unknown activity"))
        if edge.work_product not in products:
            findings.append(
                Finding("DANGLING_REF", edge.work_product, f"product-flow edge {edge.key} names unknown work product")
            )
    for edge in model.control_flow:
        for end in (edge.source, edge.target):
            if end not in activities:
                findings.append(Finding("DANGLING_REF", end, f"control-flow edge {edge.key} names unknown activity"))

    elements = model_elements(model)
    for vp in model.variation_points:
        for elem in sorted(vp.elements - elements):
            findings.append(Finding("DANGLING_REF", elem, f"variation point {vp.id} binds unknown element"))

    findings += _cycle_findings(model, activities)

    touched = {e.work_product for e in model.product_flow}
    for wp in model.work_products:
        if wp.id not in touched and not wp.standalone:
            findings.append(Finding("ORPHAN_PRODUCT", wp.id, "work product has no product-flow edge"))

    findings += _view_findings(model, activities, products)
    return findings


def _duplicate_findings(model: ProcessModel) -> list[Finding]:
    out = []
    vertex_ids = Counter([a.id for a in model.activities] + [w.id for w in model.work_products])
    for ident, n in sorted(vertex_ids.items()):
        if n > 1:
            out.append(Finding("DUP_ID", ident, f"id declared {n} times"))
    # edges are reported at their first endpoint, which appears verbatim in the input
    anchors = {e.key: e.activity for e in model.product_flow} | {e.key: e.source for e in model.control_flow}
    edge_keys = Counter([e.key for e in model.product_flow] + [e.key for e in model.control_flow])
    for key, n in sorted(edge_keys.items()):
        if n > 1:
            out.append(Finding("DUP_ID", anchors[key], f"edge {key} declared {n} times"))
    for label, ids in (("view", [v.id for v in model.views]), ("variation point", [v.id for v in model.variation_points])):
        for ident, n in sorted(Counter(ids).items()):
            if n > 1:
                out.append(Finding("DUP_ID", ident, f"{label} id declared {n} times"))
    return out


def _cycle_findings(model: ProcessModel, activities: frozenset[str]) -> list[Finding]:
    # A cycle is legal iff it passes through an iterative activity, so only
    # cycles inside the non-iterative subgraph are violations.
    iterative = {a.id for a in model.activities if a.iterative}
    flagged: dict[str, str] = {}
    for edge in model.control_flow:
        if edge.source == edge.target and edge.source in activities:
            flagged.setdefault(edge.source, "control-flow self-loop")
    plain = sorted(activities - iterative)
    graph = _graph.adjacency(
        plain, ((e.source, e.target) for e in model.control_flow if e.source != e.target)
    )
    for comp in _graph.cyclic_components(graph):
        flagged.setdefault(comp[0], "control-flow cycle without an iterative activity among " + ", ".join(comp))
    return [Finding("CYCLE", node, msg) for node, msg in sorted(flagged.items())]


def _view_findings(model: ProcessModel, activities: frozenset[str], products: frozenset[str]) -> list[Finding]:
    pf_keys = {e.key for e in model.product_flow}
    cf_keys = {e.key for e in model.control_flow}
    allowed = {
        "product_flow": activities | products | pf_keys,
        "control_flow": activities | cf_keys,
    }
    every = activities | products | pf_keys | cf_keys
    out = []
    for view in model.views:
        for member in sorted(view.members):
            if member not in every:
                out.append(Finding("BAD_VIEW", view.id, f"member {member} does not exist"))
            elif member not in allowed[view.kind]:
                out.append(Finding("BAD_VIEW", view.id, f"member {member} not allowed in a {view.kind} view"))
    return out


# -- serialization ----------------------------------------------------------


def _schema(msg: str) -> ProcLineError:
    return ProcLineError("E_SCHEMA", msg)


def _check_keys(obj: Any, where: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(obj, dict):
        raise _schema(f"{where} must be an object")
    required = tuple(required)
    known = set(required) | set(optional)
    unknown = sorted(set(obj) - known)
    if unknown:
        raise _schema(f"{where}: unknown keys {unknown}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise _schema(f"{where}: missing keys {missing}")
    return obj


def _str(obj: dict, key: str, where: str, default: str | None = None) -> str:
    value = obj.get(key, default)
    if not isinstance(value, str):
        raise _schema(f"{where}.{key} must be a string")
    return value


def _ident(obj: dict, key: str, where: str) -> str:
    value = _str(obj, key, where)
    if not ID_RE.fullmatch(value):
        raise _schema(f"{where}.{key}: invalid identifier {value!r}")
    return value


def _bool(obj: dict, key: str, where: str) -> bool:
    value = obj.get(key, False)
    if not isinstance(value, bool):
        raise _schema(f"{where}.{key} must be a boolean")
    return value


def _str_list(obj: dict, key: str, where: str) -> list[str]:
    value = obj.get(key, [])
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise _schema(f"{where}.{key} must be a list of strings")
    return value


def _list(doc: dict, key: str) -> list:
    value = doc.get(key, [])
    if not isinstance(value, list):
        raise _schema(f"{key} must be a list")
    return value


def model_from_dict(doc: Any, extra_keys: Iterable[str] = ()) -> ProcessModel:
    """Build a model from its JSON document. Only lexical problems raise
    (E_SCHEMA); structural problems are left for :func:`validate_model`."""
    doc = _check_keys(doc, "model", (), (*MODEL_KEYS, *extra_keys))

    activities = []
    for i, raw in enumerate(_list(doc, "activities")):
        where = f"activities[{i}]"
        _check_keys(raw, where, ("id",), ("name", "description", "iterative"))
        ident = _ident(raw, "id", where)
        activities.append(
            Activity(ident, _str(raw, "name", where, ident), _str(raw, "description", where, ""), _bool(raw, "iterative", where))
        )

    products = []
    for i, raw in enumerate(_list(doc, "work_products")):
        where = f"work_products[{i}]"
        _check_keys(raw, where, ("id",), ("name", "description", "standalone"))
        ident = _ident(raw, "id", where)
        products.append(
            WorkProduct(ident, _str(raw, "name", where, ident), _str(raw, "description", where, ""), _bool(raw, "standalone", where))
        )

    pf = []
    for i, raw in enumerate(_list(doc, "product_flow")):
        where = f"product_flow[{i}]"
        _check_keys(raw, where, ("activity", "work_product", "direction"))
        direction = _str(raw, "direction", where)
        if direction not in DIRECTIONS:
            raise _schema(f"{where}.direction must be one of {list(DIRECTIONS)}")
        pf.append(ProductFlowEdge(_ident(raw, "activity", where), _ident(raw, "work_product", where), direction))  # type: ignore[arg-type]

    cf = []
    for i, raw in enumerate(_list(doc, "control_flow")):
        where = f"control_flow[{i}]"
        _check_keys(raw, where, ("from", "to"))
        cf.append(ControlFlowEdge(_ident(raw, "from", where), _ident(raw, "to", where)))

    views = []
    for i, raw in enumerate(_list(doc, "views")):
        where = f"views[{i}]"
        _check_keys(raw, where, ("id", "kind", "members"))
        kind = _str(raw, "kind", where)
        if kind not in VIEW_KINDS:
            raise _schema(f"{where}.kind must be one of {list(VIEW_KINDS)}")
        views.append(View(_ident(raw, "id", where), kind, frozenset(_str_list(raw, "members", where))))  # type: ignore[arg-type]

    vps = []
    for i, raw in enumerate(_list(doc, "variation_points")):
        where = f"variation_points[{i}]"
        _check_keys(raw, where, ("id", "capability", "elements"), ("rules",))
        elements = _str_list(raw, "elements", where)
        if not elements:
            raise _schema(f"{where}.elements must not be empty")
        vps.append(
            VariationPoint(
                _ident(raw, "id", where),
                _str(raw, "capability", where),
                frozenset(elements),
                tuple(_str_list(raw, "rules", where)),
            )
        )

    return ProcessModel(tuple(activities), tuple(products), tuple(pf), tuple(cf), tuple(views), tuple(vps))


def model_to_dict(model: ProcessModel) -> dict[str, Any]:
    """Canonical document: every list sorted by identity, so equal element sets
    always print identically."""
    return {
        "activities": [
            {"id": a.id, "name": a.name, "description": a.description, "iterative": a.iterative}
            for a in sorted(model.activities, key=lambda a: a.id)
        ],
        "work_products": [
            {"id": w.id, "name": w.name, "description": w.description, "standalone": w.standalone}
            for w in sorted(model.work_products, key=lambda w: w.id)
        ],
        "product_flow": [
            {"activity": e.activity, "work_product": e.work_product, "direction": e.direction}
            for e in sorted(model.product_flow, key=lambda e: e.key)
        ],
        "control_flow": [{"from": e.source, "to": e.target} for e in sorted(model.control_flow, key=lambda e: e.key)],
        "views": [
            {"id": v.id, "kind": v.kind, "members": sorted(v.members)} for v in sorted(model.views, key=lambda v: v.id)
        ],
        "variation_points": [
            {"id": vp.id, "capability": vp.capability, "elements": sorted(vp.elements), "rules": list(vp.rules)}
            for vp in sorted(model.variation_points, key=lambda v: v.id)
        ],
    }


def parse_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProcLineError("E_JSON", f"invalid JSON at line {exc.lineno}, col {exc.colno}: {exc.msg}") from None


def dump_json(doc: Any) -> str:
    """Deterministic JSON text used for every file the package writes."""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def parse_model(text: str) -> ProcessModel:
    return model_from_dict(parse_json(text))


def print_model(model: ProcessModel) -> str:
    return dump_json(model_to_dict(model))


def restrict_model(model: ProcessModel, keep: frozenset[str]) -> ProcessModel:
    """Sub-model holding only elements in ``keep``. Edges lose their place when
    either endpoint is dropped; view memberships are filtered; variation points
    are discarded."""
    activities = tuple(a for a in model.activities if a.id in keep)
    products = tuple(w for w in model.work_products if w.id in keep)
    vertex = {a.id for a in activities} | {w.id for w in products}
    pf = tuple(
        e for e in model.product_flow if e.key in keep and e.activity in vertex and e.work_product in vertex
    )
    cf = tuple(e for e in model.control_flow if e.key in keep and e.source in vertex and e.target in vertex)
    survivors = vertex | {e.key for e in pf} | {e.key for e in cf}
    views = tuple(View(v.id, v.kind, v.members & survivors) for v in model.views)
    return ProcessModel(activities, products, pf, cf, views, ())
