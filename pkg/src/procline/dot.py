"""Graphviz DOT export, one digraph per view.

Variable elements are drawn dashed and tagged with their variation point id.
A model without views is exported as a single digraph named ``model``.
"""

from __future__ import annotations

from procline.lineforge import ProcessLine
from procline.procmodel import ProcessModel, View, model_elements


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _digraph(name: str, model: ProcessModel, members: frozenset[str], owner: dict[str, str]) -> list[str]:
    out = [f"digraph {_q(name)} {{"]
    names = {a.id: a.name for a in model.activities} | {w.id: w.name for w in model.work_products}
    shapes = {a.id: "box" for a in model.activities} | {w.id: "note" for w in model.work_products}

    def attrs(elem: str, label: str | None, extra: list[str]) -> str:
        parts = list(extra)
        if elem in owner:
            parts.append("style=dashed")
            label = f"{label} [{owner[elem]}]" if label else owner[elem]
        if label is not None:
            parts.insert(0, f"label={_q(label)}")
        return f" [{', '.join(parts)}]" if parts else ""

    for node in sorted(m for m in members if m in shapes):
        out.append(f"  {_q(node)}{attrs(node, names[node], [f'shape={shapes[node]}'])};")
    edges = []
    for e in model.product_flow:
        if e.key in members:
            src, dst = (e.work_product, e.activity) if e.direction == "consumes" else (e.activity, e.work_product)
            edges.append((e.key, src, dst, None if e.direction == "produces" else e.direction))
    for e in model.control_flow:
        if e.key in members:
            edges.append((e.key, e.source, e.target, None))
    for key, src, dst, label in sorted(edges, key=lambda t: t[0]):
        out.append(f"  {_q(src)} -> {_q(dst)}{attrs(key, label, [])};")
    out.append("}")
    return out


def export_dot(subject: ProcessModel | ProcessLine) -> str:
    model = subject.model if isinstance(subject, ProcessLine) else subject
    owner = {elem: vp.id for vp in model.variation_points for elem in vp.elements}
    views = sorted(model.views, key=lambda v: v.id) or [View("model", "product_flow", model_elements(model))]
    lines: list[str] = []
    for view in views:
        lines += _digraph(view.id, model, view.members, owner)
    return "\n".join(lines) + "\n"
