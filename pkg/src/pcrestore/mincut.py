"""s-t maximum flow / minimum cut by shortest augmenting paths.

Augmentation follows BFS level graphs (Dinic), so every augmenting path is
a shortest path in the residual graph. Capacities are floats; residuals at
or below ``SATURATION_TOL`` count as saturated.
"""
from __future__ import annotations

from collections import deque
from typing import NamedTuple

SATURATION_TOL = 1e-12


class FlowNetwork:
    """Directed network with float capacities; arcs are stored with their reverse."""

    def __init__(self, n: int, source: int, sink: int):
        if n < 2:
            raise ValueError("a flow network needs at least two nodes")
        if source == sink:
            raise ValueError("source and sink must differ")
        for v in (source, sink):
            if not 0 <= v < n:
                raise ValueError(f"terminal {v} outside 0..{n - 1}")
        self.n = n
        self.source = source
        self.sink = sink
        self.head: list[int] = []
        self.cap: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n)]

    def add_arc(self, u: int, v: int, capacity: float) -> int:
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise ValueError(f"arc ({u}, {v}) has an endpoint outside the network")
        if not capacity >= 0 or capacity == float("inf"):
            raise ValueError(f"capacity must be finite and >= 0, got {capacity}")
        arc = len(self.head)
        self.head += (v, u)
        self.cap += (float(capacity), 0.0)
        self.adj[u].append(arc)
        self.adj[v].append(arc + 1)
        return arc

    def arcs(self):
        """Yield ``(u, v, capacity)`` in insertion order."""
        for a in range(0, len(self.head), 2):
            yield self.head[a + 1], self.head[a], self.cap[a]

    def cut_capacity(self, source_side) -> float:
        return sum(c for u, v, c in self.arcs() if u in source_side and v not in source_side)


class CutResult(NamedTuple):
    flow_value: float
    source_side: frozenset


def max_flow_min_cut(net: FlowNetwork) -> CutResult:
    n, s, t = net.n, net.source, net.sink
    head = net.head
    res = list(net.cap)
    adj = net.adj
    tol = SATURATION_TOL
    flow = 0.0

    while True:
        level = [-1] * n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            lu = level[u] + 1
            for a in adj[u]:
                v = head[a]
                if level[v] < 0 and res[a] > tol:
                    level[v] = lu
                    q.append(v)
        if level[t] < 0:
            break

        ptr = [0] * n
        # blocking flow by iterative DFS along the level graph
        while True:
            path: list[int] = []
            u = s
            while u != t:
                arcs = adj[u]
                i = ptr[u]
                lu = level[u] + 1
                while i < len(arcs):
                    a = arcs[i]
                    if res[a] > tol and level[head[a]] == lu:
                        break
                    i += 1
                ptr[u] = i
                if i == len(arcs):
                    # dead end: drop u from the level graph and retreat
                    level[u] = -1
                    if not path:
                        break
                    a = path.pop()
                    u = head[a ^ 1]
                    ptr[u] += 1
                    continue
                a = arcs[i]
                path.append(a)
                u = head[a]
            if u != t:
                break
            push = min(res[a] for a in path)
            for a in path:
                res[a] -= push
                res[a ^ 1] += push
            flow += push

    seen = [False] * n
    seen[s] = True
    q = deque([s])
    while q:
        u = q.popleft()
        for a in adj[u]:
            v = head[a]
            if not seen[v] and res[a] > tol:
                seen[v] = True
                q.append(v)
    side = frozenset(i for i in range(n) if seen[i])
    return CutResult(flow, side)
