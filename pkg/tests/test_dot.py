from __future__ import annotations

from procline.dot import export_dot
from procline.fixtures import satellite_line
from procline.lineforge import ProcessLine
from procline.procmodel import Activity, ProcessModel, ProductFlowEdge, VariationPoint, View, WorkProduct


def small_line() -> ProcessLine:
    model = ProcessModel(
        (Activity("A", "Analyse"),),
        (WorkProduct("FMECA", "FMECA report"), WorkProduct("W", "Plan")),
        (ProductFlowEdge("A", "FMECA", "produces"), ProductFlowEdge("A", "W", "consumes")),
        (),
        (View("main", "product_flow", frozenset({"A", "FMECA", "W", "pf:A>FMECA:produces", "pf:A>W:consumes"})),),
        (VariationPoint("Opt1", "fmeca", frozenset({"FMECA", "pf:A>FMECA:produces"}), ("Opt1.1",)),),
    )
    return ProcessLine(model)


def test_variable_elements_are_dashed_and_tagged():
    text = export_dot(small_line())
    assert '"FMECA" [label="FMECA report [Opt1]", shape=note, style=dashed];' in text
    assert '"A" -> "FMECA" [label="Opt1", style=dashed];' in text
    # consumed products point into the activity
    assert '"W" -> "A" [label="consumes"];' in text
    assert '"A" [label="Analyse", shape=box];' in text


def test_empty_model():
    assert export_dot(ProcessModel()) == 'digraph "model" {\n}\n'


def test_one_digraph_per_view_and_deterministic():
    line = satellite_line().line
    text = export_dot(line)
    assert text.count("digraph ") == len(line.model.views)
    assert export_dot(satellite_line().line) == text


def test_quotes_are_escaped():
    text = export_dot(ProcessModel((Activity("A", 'say "hi"'),)))
    assert 'label="say \\"hi\\""' in text
