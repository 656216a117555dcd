"""Discrete energy: weighted interface length plus the two fidelity sums."""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .core import (ColorImage, DamageMask, GreyObservation, GridGeometry, Labeling,
                   ModelParams, Neighborhood, Palette, Problem)
from .distortion import DistortionTable, eval_L

# (drow, dcol) offsets, one per undirected direction
AXIS_OFFSETS = ((0, 1), (1, 0))
DIAGONAL_OFFSETS = ((1, 1), (1, -1))


@dataclass(frozen=True)
class EdgeWeights:
    axis: float
    diagonal: float = 0.0

    def __post_init__(self):
        if not self.axis > 0 or self.diagonal < 0:
            raise ValueError("edge weights must be positive")

    @classmethod
    def for_geometry(cls, geom: GridGeometry) -> "EdgeWeights":
        h = geom.spacing_h
        if geom.neighborhood is Neighborhood.N4:
            return cls(axis=h)
        # Cauchy-Crofton: w = h^2 * dphi / (2 |e|), four directions, dphi = pi/4
        dphi = math.pi / 4
        return cls(axis=h * h * dphi / (2 * h), diagonal=h * h * dphi / (2 * h * math.sqrt(2)))


@dataclass(frozen=True, eq=False)
class GridEdges:
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray


@lru_cache(maxsize=32)
def grid_edges(geom: GridGeometry) -> GridEdges:
    """All unordered neighbor pairs in flat (row-major) pixel indices."""
    H, W = geom.shape
    idx = np.arange(H * W).reshape(H, W)
    ew = EdgeWeights.for_geometry(geom)
    offsets = [(o, ew.axis) for o in AXIS_OFFSETS]
    if geom.neighborhood is Neighborhood.N8:
        offsets += [(o, ew.diagonal) for o in DIAGONAL_OFFSETS]
    src, dst, wt = [], [], []
    for (dr, dc), w in offsets:
        r0, r1 = 0, H - dr
        c0, c1 = max(0, -dc), W - max(0, dc)
        a = idx[r0:r1, c0:c1].reshape(-1)
        b = idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc].reshape(-1)
        src.append(a)
        dst.append(b)
        wt.append(np.full(a.size, w))
    out = GridEdges(np.concatenate(src), np.concatenate(dst), np.concatenate(wt))
    for arr in (out.src, out.dst, out.weight):
        arr.setflags(write=False)
    return out


def weighted_perimeter(labeling: Labeling, palette: Palette, geom: GridGeometry | None = None) -> float:
    geom = geom or labeling.geometry
    labeling.check_range(palette.k)
    edges = grid_edges(geom)
    lab = labeling.flat()
    dist = palette.distances()
    return float(np.sum(edges.weight * dist[lab[edges.src], lab[edges.dst]]))


def unweighted_interface_length(labeling: Labeling, geom: GridGeometry | None = None) -> float:
    geom = geom or labeling.geometry
    edges = grid_edges(geom)
    lab = labeling.flat()
    return float(np.sum(edges.weight[lab[edges.src] != lab[edges.dst]]))


def per_label_boundary_length(labeling: Labeling, i: int, geom: GridGeometry | None = None,
                              k: int | None = None) -> float:
    """Discrete perimeter of the region carrying label ``i``."""
    geom = geom or labeling.geometry
    if i < 0 or (k is not None and i >= k):
        raise ValueError(f"label {i} out of range")
    if k is not None:
        labeling.check_range(k)
    edges = grid_edges(geom)
    lab = labeling.flat()
    one_side = (lab[edges.src] == i) != (lab[edges.dst] == i)
    return float(np.sum(edges.weight[one_side]))


def pixel_costs(palette: Palette, problem: Problem) -> np.ndarray:
    """Per-pixel fidelity cost of every label, shape (n_pixels, k), weights folded in."""
    f = problem.image.flat()
    if palette.channels != f.shape[1]:
        raise ValueError("palette and image channel counts differ")
    d = problem.mask.damaged.reshape(-1)
    prm = problem.params
    area = problem.geometry.pixel_area
    a = palette.colors
    cost = np.empty((f.shape[0], palette.k))
    out = ~d
    diff = f[out][:, None, :] - a[None, :, :]
    cost[out] = prm.lam * area * np.sqrt((diff * diff).sum(axis=2)) ** prm.p
    if d.any():
        g = problem.grey.value.reshape(-1)[d]
        la = eval_L(problem.table, a @ problem.table.e)
        cost[d] = prm.mu * area * np.abs(np.atleast_1d(la)[None, :] - g[:, None]) ** prm.p
    return cost


def fidelity_terms(labeling: Labeling, palette: Palette, image: ColorImage, mask: DamageMask,
                   grey: GreyObservation | None, table: DistortionTable | None,
                   params: ModelParams) -> tuple[float, float]:
    """Return ``(outside, inside)`` fidelity sums with lambda, mu and h^2 folded in."""
    labeling.check_range(palette.k)
    d = mask.damaged.reshape(-1)
    if d.any():
        if grey is None or np.isnan(grey.value.reshape(-1)[d]).any():
            raise ValueError("grey observation missing on a damaged pixel")
        if table is None:
            raise ValueError("damaged pixels need a distortion table")
    area = image.geometry.pixel_area
    lab = labeling.flat()
    colors = palette.colors[lab]
    f = image.flat()
    diff = colors[~d] - f[~d]
    outside = params.lam * area * float(np.sum(np.sqrt((diff * diff).sum(axis=1)) ** params.p))
    inside = 0.0
    if d.any():
        la = eval_L(table, colors[d] @ table.e)
        g = grey.value.reshape(-1)[d]
        inside = params.mu * area * float(np.sum(np.abs(la - g) ** params.p))
    return outside, inside


@dataclass(frozen=True)
class EnergyBreakdown:
    perimeter_term: float
    fidelity_outside_D: float
    fidelity_inside_D: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


def total_energy(labeling: Labeling, palette: Palette, problem: Problem) -> EnergyBreakdown:
    per = weighted_perimeter(labeling, palette, problem.geometry)
    out, ins = fidelity_terms(labeling, palette, problem.image, problem.mask, problem.grey,
                              problem.table, problem.params)
    return EnergyBreakdown(per, out, ins, per + out + ins)


def energy_value(labeling: Labeling, palette: Palette, problem: Problem) -> float:
    return total_energy(labeling, palette, problem).total


class Triviality(enum.Enum):
    NONTRIVIAL = "Nontrivial"
    TRIVIAL = "Trivial"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class NontrivialityResult:
    verdict: Triviality
    growth_exponent: float  # nan when inconclusive
    tails_used: int


MIN_TAIL_SAMPLES = 8
TAIL_FRACTION = 0.25


def _tail_slope(t: np.ndarray, v: np.ndarray):
    n = int(round(TAIL_FRACTION * t.size))
    if n < MIN_TAIL_SAMPLES:
        return None
    order = np.argsort(np.abs(t))[-n:]
    tt, vv = np.abs(t[order]), v[order]
    if np.any(vv <= 0) or np.any(tt <= 0) or np.ptp(np.log(tt)) == 0:
        return None
    slope, _ = np.polyfit(np.log(tt), np.log(vv), 1)
    return float(slope)


def nontriviality_check(table: DistortionTable, tol: float = 0.05) -> NontrivialityResult:
    """Classify the growth of ``L`` at infinity from its sampled tails.

    Each side of ``t = 0`` is a tail; its exponent is the least-squares slope
    of log L against log |t| over the outer quarter of that side's samples.
    The larger exponent decides: at most ``1 + tol`` means the energy is
    finite for every datum.
    """
    t, v = table.t, table.values
    if t.size == 0:
        raise ValueError("empty table")
    slopes = [s for side in (t < 0, t > 0) if side.any()
              for s in [_tail_slope(t[side], v[side])] if s is not None]
    if not slopes:
        return NontrivialityResult(Triviality.INCONCLUSIVE, float("nan"), 0)
    gamma = max(slopes)
    verdict = Triviality.NONTRIVIAL if gamma <= 1 + tol else Triviality.TRIVIAL
    return NontrivialityResult(verdict, gamma, len(slopes))
