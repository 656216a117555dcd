"""Measurements of interface regularity on computed labelings.

No regularity constant is asserted here; the routines report jump sets,
density ratios in balls, third-phase elimination curves and the strict
triangle condition on the palette.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.spatial import cKDTree

from .core import GridGeometry, Labeling, Palette
from .energy import grid_edges


def extract_jump_edges(labeling: Labeling, geom: Optional[GridGeometry] = None) -> np.ndarray:
    """Indices into :func:`grid_edges` of the edges whose endpoint labels differ."""
    geom = geom or labeling.geometry
    edges = grid_edges(geom)
    lab = labeling.flat()
    return np.flatnonzero(lab[edges.src] != lab[edges.dst])


def jump_edge_pairs(labeling: Labeling, geom: Optional[GridGeometry] = None) -> set[tuple[int, int]]:
    geom = geom or labeling.geometry
    edges = grid_edges(geom)
    idx = extract_jump_edges(labeling, geom)
    return {(int(a), int(b)) for a, b in zip(edges.src[idx], edges.dst[idx])}


def _pixel_xy(flat: np.ndarray, geom: GridGeometry):
    r, c = np.divmod(flat, geom.width)
    return c * geom.spacing_h, r * geom.spacing_h


def ball_inside(geom: GridGeometry, center: tuple[int, int], rho: float) -> bool:
    """True when the closed ball around the pixel center stays within the pixel-center hull."""
    r, c = center
    h = geom.spacing_h
    x, y = c * h, r * h
    return x - rho >= 0 and y - rho >= 0 and x + rho <= (geom.width - 1) * h and y + rho <= (geom.height - 1) * h


def _jump_midpoints(labeling: Labeling, geom: GridGeometry):
    edges = grid_edges(geom)
    idx = extract_jump_edges(labeling, geom)
    xa, ya = _pixel_xy(edges.src[idx], geom)
    xb, yb = _pixel_xy(edges.dst[idx], geom)
    return np.column_stack([(xa + xb) / 2, (ya + yb) / 2]), edges.weight[idx]


def _ratios(mid: np.ndarray, weight: np.ndarray, centers, rho: float, geom: GridGeometry) -> list[float]:
    if mid.shape[0] == 0:
        return [0.0] * len(centers)
    tree = cKDTree(mid)
    pts = np.array([(c * geom.spacing_h, r * geom.spacing_h) for r, c in centers], dtype=float).reshape(-1, 2)
    hits = tree.query_ball_point(pts, rho + 1e-12 * rho)
    return [float(weight[h].sum() / rho) for h in hits]


def density_ratio(labeling: Labeling, center: tuple[int, int], rho: float,
                  geom: Optional[GridGeometry] = None) -> float:
    """Jump-edge weight with midpoint in the ball of radius ``rho``, divided by ``rho``.

    ``center`` is ``(row, col)``. Use :func:`ball_inside` to detect clipping.
    """
    geom = geom or labeling.geometry
    if rho < 2 * geom.spacing_h:
        raise ValueError("rho must be at least two pixel spacings")
    mid, weight = _jump_midpoints(labeling, geom)
    return _ratios(mid, weight, [center], rho, geom)[0]


def _disk(radius_px: float) -> np.ndarray:
    n = int(math.floor(radius_px))
    yy, xx = np.mgrid[-n:n + 1, -n:n + 1]
    return (xx * xx + yy * yy <= radius_px * radius_px + 1e-9).astype(float)


def _ball_counts(indicator: np.ndarray, radius_px: float) -> np.ndarray:
    return np.rint(fftconvolve(indicator.astype(float), _disk(radius_px), mode="same")).astype(np.int64)


@dataclass(frozen=True)
class EliminationViolation:
    center: tuple[int, int]
    radius: float
    retained: tuple[int, int]
    third_phase_volume: float


def elimination_scan(labeling: Labeling, eta: float, radii: Sequence[float],
                     geom: Optional[GridGeometry] = None) -> list[EliminationViolation]:
    """Balls where the third phases are small yet still reach the half-radius ball.

    For every interior ball B_r(x) and every pair of labels present, V is
    the union of the remaining labels; a violation is recorded when
    |V ∩ B_r| <= eta r^2 while V ∩ B_{r/2} is nonempty. Radii are lengths.
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    geom = geom or labeling.geometry
    lab = labeling.label
    present = [int(v) for v in np.unique(lab)]
    out: list[EliminationViolation] = []
    if len(present) < 3:
        return out
    area = geom.pixel_area
    H, W = geom.shape
    for r in radii:
        rp = r / geom.spacing_h
        n = int(math.floor(rp))
        if 2 * n + 1 > min(H, W):
            continue
        big = {v: _ball_counts(lab == v, rp) for v in present}
        half = {v: _ball_counts(lab == v, rp / 2) for v in present}
        interior = np.zeros((H, W), dtype=bool)
        interior[n:H - n, n:W - n] = True
        for i, j in itertools.combinations(present, 2):
            rest = [v for v in present if v not in (i, j)]
            vol = sum(big[v] for v in rest) * area
            near = sum(half[v] for v in rest)
            hit = interior & (vol <= eta * r * r) & (near > 0)
            for rr, cc in zip(*np.nonzero(hit)):
                out.append(EliminationViolation((int(rr), int(cc)), float(r), (i, j), float(vol[rr, cc])))
    return out


@dataclass(frozen=True)
class H3Result:
    satisfied: bool
    worst_triple: Optional[tuple[int, int, int]]
    slack: float


def check_h3(palette: Palette) -> H3Result:
    """Strict triangle inequality for every distinct triple; reports the tightest one.

    Slack of (i, j, l) is |a_i-a_l| + |a_l-a_j| - |a_i-a_j|, symmetric in i, j,
    so triples are scanned with i < j and ties go to the first in that order.
    """
    k = palette.k
    if k < 3:
        return H3Result(True, None, math.inf)
    d = palette.distances()
    worst, slack = None, math.inf
    for i, j in itertools.combinations(range(k), 2):
        for l in range(k):
            if l in (i, j):
                continue
            s = max(d[i, l] + d[l, j] - d[i, j], 0.0)
            if s < slack:
                worst, slack = (i, j, l), s
    return H3Result(bool(slack > 0), worst, float(slack))


HIST_EDGES = np.linspace(0.0, 4.0, 21)


@dataclass
class RegularityReport:
    jump_pixel_count: int
    density_ratio_histogram: dict = field(default_factory=dict)
    min_density_ratio: dict = field(default_factory=dict)
    elimination_violations: dict = field(default_factory=dict)
    h3_satisfied: bool = True
    h3_worst_triple: Optional[list] = None

    def to_dict(self) -> dict:
        return {
            "jump_pixel_count": self.jump_pixel_count,
            "density_ratio_histogram": self.density_ratio_histogram,
            "min_density_ratio": self.min_density_ratio,
            "elimination_violations": self.elimination_violations,
            "h3_satisfied": self.h3_satisfied,
            "h3_worst_triple": self.h3_worst_triple,
        }


def regularity_report(labeling: Labeling, palette: Optional[Palette] = None,
                      radii: Sequence[float] = (2.0, 4.0, 8.0),
                      etas: Sequence[float] = (0.01, 0.05, 0.1, 0.2),
                      geom: Optional[GridGeometry] = None) -> RegularityReport:
    """Collect every diagnostic into one report.

    Density ratios are taken at pixels incident to a jump edge whose ball
    is not clipped by the border. Labels in the report are 1-based.
    """
    geom = geom or labeling.geometry
    edges = grid_edges(geom)
    idx = extract_jump_edges(labeling, geom)
    jump_pixels = np.unique(np.concatenate([edges.src[idx], edges.dst[idx]]))
    report = RegularityReport(jump_pixel_count=int(jump_pixels.size))

    mid, weight = _jump_midpoints(labeling, geom)
    for rho in radii:
        key = f"{rho:g}"
        centers = [divmod(p, geom.width) for p in jump_pixels.tolist()]
        centers = [c for c in centers if ball_inside(geom, c, rho)]
        ratios = _ratios(mid, weight, centers, rho, geom)
        counts, _ = np.histogram(ratios, bins=HIST_EDGES)
        report.density_ratio_histogram[key] = {"bin_edges": HIST_EDGES.tolist(), "counts": counts.tolist(),
                                               "centers": len(ratios)}
        report.min_density_ratio[key] = min(ratios) if ratios else None

    for eta in etas:
        found = elimination_scan(labeling, eta, radii, geom)
        report.elimination_violations[f"{eta:g}"] = [
            {"center": list(v.center), "radius": v.radius,
             "retained": [v.retained[0] + 1, v.retained[1] + 1], "third_phase_volume": v.third_phase_volume}
            for v in found]

    if palette is not None:
        h3 = check_h3(palette)
        report.h3_satisfied = h3.satisfied
        if h3.worst_triple is not None:
            report.h3_worst_triple = [x + 1 for x in h3.worst_triple] + [h3.slack]
    return report
