from __future__ import annotations

import heapq
from collections.abc import Iterable, Mapping


def adjacency(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> dict[str, list[str]]:
    graph: dict[str, list[str]] = {n: [] for n in nodes}
    for src, dst in edges:
        if src in graph and dst in graph:
            graph[src].append(dst)
    for succ in graph.values():
        succ.sort()
    return graph


def cyclic_components(graph: Mapping[str, list[str]]) -> list[list[str]]:
    """Strongly connected components that contain a cycle, each sorted, in
    order of their smallest member. Self-loops count as cycles."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    found: list[list[str]] = []
    counter = 0

    for root in sorted(graph):
        if root in index:
            continue
        # iterative Tarjan; work items are (node, next successor position)
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, pos = work[-1]
            succ = graph[node]
            if pos < len(succ):
                work[-1] = (node, pos + 1)
                nxt = succ[pos]
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, 0))
                elif nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    comp.append(member)
                    if member == node:
                        break
                if len(comp) > 1 or node in graph[node]:
                    found.append(sorted(comp))
    found.sort(key=lambda c: c[0])
    return found


def ordered_topological(graph: Mapping[str, list[str]]) -> list[str] | None:
    """Topological order with untargeted nodes first (lexicographic), then the
    rest by Kahn's algorithm with a lexicographic tie-break. None on a cycle."""
    indegree = {n: 0 for n in graph}
    for succ in graph.values():
        for nxt in succ:
            indegree[nxt] += 1
    sources = sorted(n for n, d in indegree.items() if d == 0)
    order = list(sources)
    ready: list[str] = []
    for node in sources:
        for nxt in graph[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for nxt in graph[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(graph):
        return None
    return order
