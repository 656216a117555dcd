"""Exhaustive minimisation on tiny instances.

The energy here is re-derived with plain loops and shares no code with
:mod:`pcrestore.energy`; it is the independent reference the solver is
checked against.
"""
from __future__ import annotations

import bisect
import itertools
import math

from .core import Labeling, Neighborhood, Palette, Problem

MAX_LABELINGS = 10**7
MAX_MOVE_PIXELS = 20


class InstanceTooLarge(ValueError):
    pass


def _lookup(table, x):
    ts, vs = list(table.t), list(table.values)
    if len(ts) == 1:
        return vs[0]
    if x <= ts[0] or x >= ts[-1]:
        end = 0 if x <= ts[0] else -1
        if table.extrapolation.value == "clamp":
            return vs[end]
        if end == 0:
            slope = (vs[1] - vs[0]) / (ts[1] - ts[0])
        else:
            slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])
        return max(0.0, vs[end] + slope * (x - ts[end]))
    j = bisect.bisect_right(ts, x)
    t0, t1, v0, v1 = ts[j - 1], ts[j], vs[j - 1], vs[j]
    return v0 + (v1 - v0) * (x - t0) / (t1 - t0)


def _pairs(problem: Problem):
    geom = problem.geometry
    H, W, h = geom.height, geom.width, geom.spacing_h
    steps = [(0, 1, h), (1, 0, h)]
    if geom.neighborhood is Neighborhood.N8:
        # Crofton weights over four directions spaced pi/4 apart
        straight = h * (math.pi / 4) / 2
        diag = h * (math.pi / 4) / (2 * math.sqrt(2))
        steps = [(0, 1, straight), (1, 0, straight), (1, 1, diag), (1, -1, diag)]
    out = []
    for r in range(H):
        for c in range(W):
            for dr, dc, w in steps:
                r2, c2 = r + dr, c + dc
                if 0 <= r2 < H and 0 <= c2 < W:
                    out.append((r * W + c, r2 * W + c2, w))
    return out


def _unary_table(palette: Palette, problem: Problem):
    geom = problem.geometry
    H, W = geom.height, geom.width
    area = geom.spacing_h ** 2
    lam, mu, p = problem.params.lam, problem.params.mu, problem.params.p
    colors = [list(map(float, a)) for a in palette.colors]
    table = []
    for r in range(H):
        for c in range(W):
            row = []
            for a in colors:
                if problem.mask.damaged[r, c]:
                    e = problem.table.e
                    t = sum(a[m] * float(e[m]) for m in range(len(a)))
                    val = mu * area * abs(_lookup(problem.table, t) - float(problem.grey.value[r, c])) ** p
                else:
                    f = problem.image.data[r, c]
                    dist = math.sqrt(sum((a[m] - float(f[m])) ** 2 for m in range(len(a))))
                    val = lam * area * dist ** p
                row.append(val)
            table.append(row)
    return table


def _color_dist(palette: Palette):
    cols = [list(map(float, a)) for a in palette.colors]
    return [[math.sqrt(sum((x - y) ** 2 for x, y in zip(ai, aj))) for aj in cols] for ai in cols]


class _Evaluator:
    def __init__(self, palette: Palette, problem: Problem):
        self.unary = _unary_table(palette, problem)
        self.pairs = _pairs(problem)
        self.dist = _color_dist(palette)

    def __call__(self, labels) -> float:
        e = 0.0
        for p, lab in enumerate(labels):
            e += self.unary[p][lab]
        for p, q, w in self.pairs:
            if labels[p] != labels[q]:
                e += w * self.dist[labels[p]][labels[q]]
        return e


def oracle_energy(labeling: Labeling, palette: Palette, problem: Problem) -> float:
    return _Evaluator(palette, problem)([int(x) for x in labeling.label.reshape(-1)])


def brute_force_fixed_palette(palette: Palette, problem: Problem):
    """Global minimum over every labeling; ties go to the lexicographically first."""
    n = problem.geometry.size
    k = palette.k
    if k ** n > MAX_LABELINGS:
        raise InstanceTooLarge(f"{k}^{n} labelings exceed the enumeration limit {MAX_LABELINGS}")
    energy = _Evaluator(palette, problem)
    best, best_e = None, math.inf
    for labels in itertools.product(range(k), repeat=n):
        e = energy(labels)
        if e < best_e:
            best, best_e = labels, e
    geom = problem.geometry
    return Labeling([list(best[r * geom.width:(r + 1) * geom.width]) for r in range(geom.height)], geom), best_e


def brute_force_binary_move(labeling: Labeling, alpha: int, palette: Palette, problem: Problem):
    """Best labeling reachable by switching any subset of pixels to ``alpha``."""
    n = problem.geometry.size
    if n > MAX_MOVE_PIXELS:
        raise InstanceTooLarge(f"{n} pixels exceed the move enumeration limit {MAX_MOVE_PIXELS}")
    if not 0 <= alpha < palette.k:
        raise ValueError(f"alpha {alpha} out of range")
    energy = _Evaluator(palette, problem)
    start = [int(x) for x in labeling.label.reshape(-1)]
    best, best_e = start, energy(start)
    for switch in itertools.product((False, True), repeat=n):
        labels = [alpha if s else l for s, l in zip(switch, start)]
        e = energy(labels)
        if e < best_e:
            best, best_e = labels, e
    geom = problem.geometry
    return Labeling([best[r * geom.width:(r + 1) * geom.width] for r in range(geom.height)], geom), best_e
