"""Free-palette problem: alternate labeling and color updates, merge degenerate colors."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .core import ColorImage, DamageMask, Labeling, Palette, Problem
from .distortion import eval_L, unit
from .energy import energy_value
from .solver import SolveOptions, solve_fixed_palette

GRID_STEP = 1e-3
GOLDEN_TOL = 1e-8
SEARCH_MARGIN = 0.5
_INVPHI = (math.sqrt(5) - 1) / 2


def search_range(e: np.ndarray) -> tuple[float, float]:
    """Range of ``a . e`` over colors in [0,1]^M, widened by a margin on both sides."""
    return float(np.minimum(e, 0).sum()) - SEARCH_MARGIN, float(np.maximum(e, 0).sum()) + SEARCH_MARGIN


def _perp_basis(e: np.ndarray) -> np.ndarray:
    """Rows form an orthonormal basis of the complement of ``e``."""
    _, _, vt = np.linalg.svd(e[None, :])
    return vt[1:]


class _AlongE:
    """phi(t) = lam * sum((t - fe)^2 + r2)^(p/2) + mu * sum |L(t) - g|^p."""

    def __init__(self, fe, r2, g, table, lam, mu, p):
        self.fe, self.r2, self.g = fe, r2, g
        self.table, self.lam, self.mu, self.p = table, lam, mu, p

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape)
        for lo in range(0, t.size, 256):
            tt = t[lo:lo + 256, None]
            val = np.zeros(tt.shape[0])
            if self.fe.size:
                if self.p == 2:
                    val += self.lam * ((tt - self.fe) ** 2 + self.r2).sum(axis=1)
                else:
                    val += self.lam * (((tt - self.fe) ** 2 + self.r2) ** (self.p / 2)).sum(axis=1)
            if self.g.size:
                lt = eval_L(self.table, tt[:, 0])[:, None]
                val += self.mu * (np.abs(lt - self.g) ** self.p).sum(axis=1)
            out[lo:lo + 256] = val
        return out


def _golden(fn, a: float, b: float, tol: float = GOLDEN_TOL) -> float:
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return (a + b) / 2


def minimize_along_e(phi, lo: float, hi: float) -> float:
    """Global 1-D minimum: grid at GRID_STEP, golden-section refinement around the best node."""
    n = int(math.ceil((hi - lo) / GRID_STEP)) + 1
    grid = np.linspace(lo, hi, n)
    vals = phi(grid)
    j = int(np.argmin(vals))
    a, b = grid[max(j - 1, 0)], grid[min(j + 1, n - 1)]
    t = _golden(lambda x: float(phi(x)[0]), a, b)
    return t if phi(t)[0] <= vals[j] else float(grid[j])


def _perp_cost(y, basis, t, fe, fperp, p):
    r2 = ((y[None, :] - fperp) ** 2).sum(axis=1)
    return float((((t - fe) ** 2 + r2) ** (p / 2)).sum())


def update_color(i: int, labeling: Labeling, palette: Palette, problem: Problem) -> np.ndarray:
    """Color minimising the volume terms of region ``i`` (the interface term is ignored).

    An empty region keeps its previous color. With p = 2 and either no
    damaged pixels in the region or mu = 0, the answer is the region mean of ``f``.
    """
    prev = np.array(palette.colors[i], dtype=float)
    lab = labeling.flat()
    region = lab == i
    if not region.any():
        return prev
    d = problem.mask.damaged.reshape(-1)
    F = problem.image.flat()[region & ~d]
    prm = problem.params
    if prm.mu == 0 or not (region & d).any():
        if F.shape[0] == 0:
            return prev
        if prm.p == 2:
            return F.mean(axis=0)

    m = palette.channels
    e = problem.table.e if problem.table is not None else unit(np.eye(m)[0])
    basis = _perp_basis(e)
    G = problem.grey.value.reshape(-1)[region & d] if (region & d).any() else np.empty(0)
    fe = F @ e
    fperp = F @ basis.T
    if F.shape[0] == 0:
        y = basis @ prev
    elif prm.p == 1:
        y = np.median(fperp, axis=0)
    else:
        y = fperp.mean(axis=0)

    lo, hi = search_range(e)
    lo, hi = min(lo, float(fe.min(initial=lo))), max(hi, float(fe.max(initial=hi)))
    rounds = 1 if (prm.p == 2 or F.shape[0] == 0 or m == 1) else 3
    t = float(prev @ e)
    for _ in range(rounds):
        r2 = ((y[None, :] - fperp) ** 2).sum(axis=1) if F.shape[0] else np.empty(0)
        phi = _AlongE(fe, r2, G, problem.table, prm.lam, prm.mu, prm.p)
        t = minimize_along_e(phi, lo, hi)
        if rounds > 1:
            res = minimize(_perp_cost, y, args=(basis, t, fe, fperp, prm.p), method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
            if res.fun <= _perp_cost(y, basis, t, fe, fperp, prm.p):
                y = res.x
    return t * e + basis.T @ y


def merge_degenerate(palette: Palette, labeling: Labeling, tol: float = 1e-6):
    """Merge colors within ``tol`` of a lower-indexed color into it.

    Returns ``(palette, labeling, merged)`` where ``merged`` lists
    ``(kept, absorbed)`` pairs in the original indexing.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    dist = palette.distances()
    k = palette.k
    target = list(range(k))
    merged = []
    for j in range(k):
        for i in range(j):
            if target[i] == i and dist[i, j] <= tol:
                target[j] = i
                merged.append((i, j))
                break
    if not merged:
        return palette, labeling, []
    keep = [i for i in range(k) if target[i] == i]
    new_index = {old: n for n, old in enumerate(keep)}
    remap = np.array([new_index[target[i]] for i in range(k)])
    return (Palette(palette.colors[keep]),
            Labeling(remap[labeling.label], labeling.geometry),
            merged)


def init_palette_kmeans(image: ColorImage, mask: DamageMask, k: int, seed: int = 0,
                        max_iter: int = 50) -> Palette:
    """k-means++ seeding and Lloyd iterations on the undamaged colors.

    Runs on the distinct colors weighted by their counts. With at most ``k``
    distinct colors those colors are returned, padded with repeats.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = image.flat()[~mask.damaged.reshape(-1)]
    if pts.shape[0] == 0:
        raise ValueError("no undamaged pixels")
    uniq, counts = np.unique(pts, axis=0, return_counts=True)
    if uniq.shape[0] <= k:
        if uniq.shape[0] < k:
            warnings.warn(f"only {uniq.shape[0]} distinct undamaged colors for k={k}; "
                          "palette padded with duplicates")
        return Palette(uniq[np.arange(k) % uniq.shape[0]])

    w = counts.astype(float)
    rng = np.random.default_rng(seed)
    centers = [uniq[rng.choice(uniq.shape[0], p=w / w.sum())]]
    d2 = ((uniq - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        prob = w * d2
        idx = rng.choice(uniq.shape[0], p=prob / prob.sum())
        centers.append(uniq[idx])
        d2 = np.minimum(d2, ((uniq - uniq[idx]) ** 2).sum(axis=1))
    centers = np.array(centers)

    assign = None
    for _ in range(max_iter):
        dist = ((uniq[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(dist, axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        near = dist[np.arange(uniq.shape[0]), assign]
        for c in range(k):
            members = assign == c
            if members.any():
                centers[c] = np.average(uniq[members], axis=0, weights=w[members])
            else:
                far = int(np.argmax(near))
                centers[c] = uniq[far]
                near[far] = 0.0
    return Palette(centers)


@dataclass
class PaletteSolveResult:
    palette: Palette
    labeling: Labeling
    energies: list[float] = field(default_factory=list)
    merge_events: list[tuple] = field(default_factory=list)
    pruned: list[tuple] = field(default_factory=list)
    move_traces: list = field(default_factory=list)
    color_updates_rejected: int = 0


def _prune_unused(palette: Palette, labeling: Labeling):
    used = np.unique(labeling.label)
    if used.size == palette.k:
        return palette, labeling, []
    remap = np.full(palette.k, -1)
    remap[used] = np.arange(used.size)
    dropped = [i for i in range(palette.k) if remap[i] < 0]
    return Palette(palette.colors[used]), Labeling(remap[labeling.label], labeling.geometry), dropped


def solve_free_palette(problem: Problem, k: int, opts: SolveOptions = SolveOptions(),
                       palette: Optional[Palette] = None, seed: int = 0, merge_tol: float = 1e-6,
                       max_outer: int = 30, stop_tol: float = 1e-10) -> PaletteSolveResult:
    """Block-coordinate descent over (labeling, palette) for ``k`` free colors.

    Every step is accepted only if it does not raise the total energy, so
    the recorded outer energies never increase.
    """
    pal = palette if palette is not None else init_palette_kmeans(problem.image, problem.mask, k, seed)
    result = PaletteSolveResult(pal, None)
    lab = None
    prev = math.inf
    for it in range(max_outer):
        lab, trace = solve_fixed_palette(pal, problem, opts, init=lab)
        result.move_traces.append(trace)
        energy = energy_value(lab, pal, problem)
        for i in range(pal.k):
            cand = pal.with_color(i, update_color(i, lab, pal, problem))
            e_new = energy_value(lab, cand, problem)
            if e_new <= energy:
                pal, energy = cand, e_new
            else:
                result.color_updates_rejected += 1
        m_pal, m_lab, pairs = merge_degenerate(pal, lab, merge_tol)
        if pairs:
            e_new = energy_value(m_lab, m_pal, problem)
            if e_new <= energy:
                pal, lab, energy = m_pal, m_lab, e_new
                result.merge_events += [(it, i, j) for i, j in pairs]
        pal, lab, dropped = _prune_unused(pal, lab)
        result.pruned += [(it, i) for i in dropped]
        result.energies.append(energy)
        if prev - energy < stop_tol:
            break
        prev = energy
    result.palette, result.labeling = pal, lab
    return result
