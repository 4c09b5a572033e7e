"""Payoff metrics for a process line.

Effort is proxied by element counts: maintaining the line means maintaining
each of its elements once, maintaining separate processes means maintaining
every element of every instance. Views are presentation and never counted.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from procline.errors import ProcLineError
from procline.instantiator import InstantiatedModel
from procline.lineforge import ProcessLine, line_stats

EFFORT_PROXY = "element_count"


@dataclass(frozen=True)
class InstanceDiff:
    added: frozenset[str]
    removed: frozenset[str]


@dataclass(frozen=True)
class EffortComparison:
    line_effort: int
    separate_effort: int

    @property
    def savings(self) -> int:
        return self.separate_effort - self.line_effort


def commonality_ratio(instances: Sequence[InstantiatedModel]) -> Fraction:
    if len(instances) < 2:
        raise ProcLineError("E_TOO_FEW", f"commonality needs at least 2 instances, got {len(instances)}")
    sets = [inst.elements() for inst in instances]
    union = frozenset().union(*sets)
    if not union:
        return Fraction(1)
    return Fraction(len(frozenset.intersection(*sets)), len(union))


def effort_comparison(line: ProcessLine, instances: Sequence[InstantiatedModel]) -> EffortComparison:
    universe = line.universe()
    for i, inst in enumerate(instances):
        foreign = sorted(inst.elements() - universe)
        if foreign:
            raise ProcLineError("E_FOREIGN_INSTANCE", f"instance {i} has elements outside the line: {foreign[:5]}")
    stats = line_stats(line)
    line_effort = stats.core_count + sum(stats.variant_counts.values())
    return EffortComparison(line_effort, sum(len(inst.elements()) for inst in instances))


def diff_instances(a: InstantiatedModel, b: InstantiatedModel) -> InstanceDiff:
    left, right = a.elements(), b.elements()
    return InstanceDiff(right - left, left - right)


def metrics_report(line: ProcessLine, instances: Sequence[InstantiatedModel], names: Sequence[str] | None = None) -> dict[str, Any]:
    names = list(names) if names is not None else [str(i) for i in range(len(instances))]
    effort = effort_comparison(line, instances)
    ratio = commonality_ratio(instances)
    diffs = []
    for i in range(len(instances)):
        for j in range(i + 1, len(instances)):
            d = diff_instances(instances[i], instances[j])
            diffs.append({"left": names[i], "right": names[j], "added": sorted(d.added), "removed": sorted(d.removed)})
    return {
        "commonality_ratio": float(ratio),
        "commonality_fraction": f"{ratio.numerator}/{ratio.denominator}",
        "line_effort": effort.line_effort,
        "separate_effort": effort.separate_effort,
        "savings": effort.savings,
        "effort_proxy": EFFORT_PROXY,
        "diffs": diffs,
    }
