"""Fixed-palette minimisation by alpha-expansion, with ICM as a fallback engine."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .core import Labeling, Palette, Problem
from .distortion import eval_L
from .energy import grid_edges, pixel_costs
from .mincut import FlowNetwork, max_flow_min_cut


class Engine(enum.Enum):
    EXPANSION = "expansion"
    ICM = "icm"


@dataclass(frozen=True)
class SolveOptions:
    max_sweeps: int = 20
    # "sequential", "random" (seeded), or an explicit label order
    move_order: Union[str, Sequence[int]] = "sequential"
    seed: int = 0
    engine: Engine = Engine.EXPANSION
    epsilon_improve: float = 1e-12

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.epsilon_improve < 0:
            raise ValueError("epsilon_improve must be >= 0")
        if isinstance(self.move_order, str) and self.move_order not in ("sequential", "random"):
            raise ValueError(f"unknown move order {self.move_order!r}")
        if not isinstance(self.engine, Engine):
            object.__setattr__(self, "engine", Engine(self.engine))


@dataclass
class SolveTrace:
    energies: list[float] = field(default_factory=list)
    sweeps: int = 0
    reason: str = ""

    def is_monotone(self, tol: float = 1e-9) -> bool:
        e = np.asarray(self.energies)
        return bool(np.all(np.diff(e) <= tol))


class _Model:
    """Flattened unary costs, edges and label distances for one palette."""

    def __init__(self, palette: Palette, problem: Problem):
        self.unary = pixel_costs(palette, problem)
        edges = grid_edges(problem.geometry)
        self.src, self.dst, self.w = edges.src, edges.dst, edges.weight
        self.dist = palette.distances()
        self.n = self.unary.shape[0]
        self.k = palette.k

    @cached_property
    def neighbors(self):
        nbr = [[] for _ in range(self.n)]
        for e, (a, b) in enumerate(zip(self.src.tolist(), self.dst.tolist())):
            nbr[a].append((b, e))
            nbr[b].append((a, e))
        return nbr

    def energy(self, lab: np.ndarray) -> float:
        un = self.unary[np.arange(self.n), lab].sum()
        return float(un + np.sum(self.w * self.dist[lab[self.src], lab[self.dst]]))

    def local_costs(self, lab: np.ndarray, p: int) -> np.ndarray:
        c = self.unary[p].copy()
        for q, e in self.neighbors[p]:
            c += self.w[e] * self.dist[:, lab[q]]
        return c


def initial_labeling(palette: Palette, problem: Problem) -> Labeling:
    """Nearest palette color outside the damage, nearest distorted grey inside."""
    f = problem.image.flat()
    d = problem.mask.damaged.reshape(-1)
    a = palette.colors
    lab = np.zeros(f.shape[0], dtype=np.int64)
    diff = f[~d][:, None, :] - a[None, :, :]
    lab[~d] = np.argmin((diff * diff).sum(axis=2), axis=1)
    if d.any():
        la = np.atleast_1d(eval_L(problem.table, a @ problem.table.e))
        g = problem.grey.value.reshape(-1)[d]
        lab[d] = np.argmin(np.abs(la[None, :] - g[:, None]), axis=1)
    return Labeling(lab.reshape(problem.geometry.shape), problem.geometry)


def _expansion(model: _Model, lab: np.ndarray, alpha: int) -> np.ndarray:
    """Optimal labels over the move space {keep, switch to alpha}, via one min cut.

    Node on the sink side means "switch". Each pairwise table
    (A=E00, B=E01, C=E10, D=E11=0) is split as
    A + (C-A) x_p + (D-C) x_q + (B+C-A-D)(1-x_p) x_q.
    """
    n = model.n
    rows = np.arange(n)
    u = model.unary[rows, alpha] - model.unary[rows, lab]
    lp, lq = lab[model.src], lab[model.dst]
    A = model.w * model.dist[lp, lq]
    B = model.w * model.dist[lp, alpha]
    C = model.w * model.dist[alpha, lq]
    u += np.bincount(model.src, weights=C - A, minlength=n)
    u -= np.bincount(model.dst, weights=C, minlength=n)
    pair = np.maximum(B + C - A, 0.0)

    s, t = n, n + 1
    net = FlowNetwork(n + 2, s, t)
    for v, c in enumerate(u.tolist()):
        if c > 0:
            net.add_arc(s, v, c)
        elif c < 0:
            net.add_arc(v, t, -c)
    for a, b, c in zip(model.src.tolist(), model.dst.tolist(), pair.tolist()):
        if c > 0:
            net.add_arc(a, b, c)
    side = max_flow_min_cut(net).source_side
    keep = np.zeros(n, dtype=bool)
    keep[list(side - {s})] = True
    return np.where(keep, lab, alpha)


def _accept(old_e: float, new_e: float) -> bool:
    return new_e < old_e - 1e-12 * max(1.0, abs(old_e))


def expansion_move(labeling: Labeling, alpha: int, palette: Palette, problem: Problem) -> Labeling:
    """Best labeling in which every pixel keeps its label or takes ``alpha``.

    The input is returned unchanged unless the move strictly lowers the energy.
    """
    if not 0 <= alpha < palette.k:
        raise ValueError(f"alpha {alpha} out of range")
    labeling.check_range(palette.k)
    model = _Model(palette, problem)
    lab = labeling.flat()
    new = _expansion(model, lab, alpha)
    if _accept(model.energy(lab), model.energy(new)):
        return Labeling(new.reshape(labeling.label.shape), labeling.geometry)
    return labeling


def icm_move(labeling: Labeling, pixel, palette: Palette, problem: Problem) -> Labeling:
    """Set one pixel to its locally optimal label (ties to the smallest index).

    ``pixel`` is ``(row, col)`` or a flat index.
    """
    labeling.check_range(palette.k)
    geom = labeling.geometry
    p = pixel[0] * geom.width + pixel[1] if isinstance(pixel, tuple) else int(pixel)
    if not 0 <= p < geom.size:
        raise ValueError(f"pixel {pixel} outside the grid")
    model = _Model(palette, problem)
    lab = np.array(labeling.flat())
    lab[p] = int(np.argmin(model.local_costs(lab, p)))
    return Labeling(lab.reshape(geom.shape), geom)


def _label_orders(opts: SolveOptions, k: int):
    if not isinstance(opts.move_order, str):
        order = [int(a) for a in opts.move_order]
        if sorted(order) != list(range(k)):
            raise ValueError("explicit move order must be a permutation of the labels")
        while True:
            yield order
    rng = np.random.default_rng(opts.seed)
    while True:
        yield list(range(k)) if opts.move_order == "sequential" else rng.permutation(k).tolist()


def solve_fixed_palette(palette: Palette, problem: Problem, opts: SolveOptions = SolveOptions(),
                        init: Labeling | None = None):
    """Minimise the energy over labelings with a fixed palette.

    Returns ``(labeling, trace)``; the trace holds the energy after every move.
    """
    model = _Model(palette, problem)
    labeling = init if init is not None else initial_labeling(palette, problem)
    labeling.check_range(palette.k)
    geom = problem.geometry
    lab = np.array(labeling.flat())
    energy = model.energy(lab)
    trace = SolveTrace(energies=[energy])
    if palette.k == 1:
        trace.reason = "single label"
        return Labeling(lab.reshape(geom.shape), geom), trace

    orders = _label_orders(opts, palette.k)
    rng = np.random.default_rng(opts.seed)
    trace.reason = "max_sweeps"
    for sweep in range(opts.max_sweeps):
        start = energy
        if opts.engine is Engine.EXPANSION:
            for alpha in next(orders):
                new = _expansion(model, lab, alpha)
                new_e = model.energy(new)
                if _accept(energy, new_e):
                    lab, energy = new, new_e
                trace.energies.append(energy)
        else:
            pixels = range(model.n) if opts.move_order == "sequential" else rng.permutation(model.n).tolist()
            for p in pixels:
                c = model.local_costs(lab, p)
                best = int(np.argmin(c))
                if best != lab[p]:
                    energy += c[best] - c[lab[p]]
                    lab[p] = best
                trace.energies.append(energy)
            # drop the accumulated rounding of the incremental updates
            energy = model.energy(lab)
        trace.sweeps = sweep + 1
        if start - energy < opts.epsilon_improve:
            trace.reason = "converged"
            break
    return Labeling(lab.reshape(geom.shape), geom), trace
