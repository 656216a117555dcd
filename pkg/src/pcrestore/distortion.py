"""Grey-level distortion ``L`` along a color direction ``e``.

Tables are piecewise linear in ``t``. Fitting uses PCA for ``e`` and an
equal-count binned, isotonic regression of the grey level against ``f . e``.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import isotonic_regression

from .core import ColorImage, DamageMask, GreyObservation


class Extrapolation(enum.Enum):
    CLAMP_ENDS = "clamp"
    LINEAR_ENDS = "linear"


@dataclass(frozen=True, eq=False)
class DistortionTable:
    e: np.ndarray
    t: np.ndarray
    values: np.ndarray
    extrapolation: Extrapolation = Extrapolation.CLAMP_ENDS

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float).reshape(-1)
        t = np.asarray(self.t, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if e.size < 1 or not np.all(np.isfinite(e)) or abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError("direction e must be a finite unit vector")
        if t.size < 1 or t.shape != v.shape:
            raise ValueError("table needs at least one (t, L) sample and matching lengths")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("table samples must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("table t values must be strictly increasing")
        if v.min() < 0:
            raise ValueError("table L values must be nonnegative")
        ext = self.extrapolation
        if not isinstance(ext, Extrapolation):
            ext = Extrapolation(ext)
        for name, arr in (("e", e), ("t", t), ("values", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "extrapolation", ext)

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def __call__(self, t):
        return eval_L(self, t)

    @classmethod
    def from_function(cls, fn, e, lo=-1.0, hi=2.0, n=301, extrapolation=Extrapolation.CLAMP_ENDS):
        t = np.linspace(lo, hi, n)
        return cls(unit(e), t, np.asarray(fn(t), dtype=float), extrapolation)

    @classmethod
    def identity(cls, e, lo=-1.0, hi=2.0, extrapolation=Extrapolation.LINEAR_ENDS):
        # identity is only nonnegative for t >= 0
        return cls(unit(e), np.array([max(lo, 0.0), hi]), np.array([max(lo, 0.0), hi]), extrapolation)


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector has no direction")
    out = v / n
    # one renormalisation pass brings |out| to within a couple of ulps of 1
    return out / np.linalg.norm(out)


def eval_L(tab: DistortionTable, t):
    """Evaluate the table at ``t`` (scalar or array); result is clipped at 0."""
    t_arr = np.asarray(t, dtype=float)
    out = np.interp(t_arr, tab.t, tab.values)
    if tab.extrapolation is Extrapolation.LINEAR_ENDS and tab.t.size >= 2:
        lo_slope = (tab.values[1] - tab.values[0]) / (tab.t[1] - tab.t[0])
        hi_slope = (tab.values[-1] - tab.values[-2]) / (tab.t[-1] - tab.t[-2])
        out = np.where(t_arr < tab.t[0], tab.values[0] + lo_slope * (t_arr - tab.t[0]), out)
        out = np.where(t_arr > tab.t[-1], tab.values[-1] + hi_slope * (t_arr - tab.t[-1]), out)
        out = np.maximum(out, 0.0)
    if np.ndim(out) == 0:
        return float(out)
    return out


def fit_distortion(image: ColorImage, grey: GreyObservation, bins: int,
                   calibration: Optional[np.ndarray] = None) -> DistortionTable:
    """Fit ``e`` and a monotone ``L`` from pixels where both color and grey are known.

    ``calibration`` is a boolean raster selecting the calibration strip;
    by default every pixel with a defined grey value is used.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    colors = image.flat()
    g = grey.value.reshape(-1)
    sel = ~np.isnan(g)
    if calibration is not None:
        sel &= np.asarray(calibration, dtype=bool).reshape(-1)
    if sel.sum() < 2:
        raise ValueError(f"need at least 2 calibration pixels, got {int(sel.sum())}")
    c = colors[sel]
    g = g[sel]
    m = c.shape[1]

    centered = c - c.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 1e-12 * max(1.0, np.sqrt(c.shape[0])):
        warnings.warn("calibration colors have zero variance; using e = (1,...,1)/sqrt(M)")
        e = unit(np.ones(m))
    else:
        e = unit(vt[0])
        if (c @ e).mean() < 0:
            e = -e

    proj = c @ e
    order = np.argsort(proj, kind="stable")
    chunks = [ch for ch in np.array_split(order, min(bins, order.size)) if ch.size]
    centers = np.array([proj[ch].mean() for ch in chunks])
    means = np.array([g[ch].mean() for ch in chunks])
    counts = np.array([ch.size for ch in chunks], dtype=float)

    # bins whose centers coincide (many identical projections) are pooled
    keep_t, keep_v, keep_w = [], [], []
    for tc, gv, w in zip(centers, means, counts):
        if keep_t and tc <= keep_t[-1]:
            tot = keep_w[-1] + w
            keep_v[-1] = (keep_v[-1] * keep_w[-1] + gv * w) / tot
            keep_w[-1] = tot
        else:
            keep_t.append(tc)
            keep_v.append(gv)
            keep_w.append(w)
    t = np.array(keep_t)
    v = np.array(keep_v)
    if t.size > 1:
        v = isotonic_regression(v, weights=np.array(keep_w), increasing=True).x
    return DistortionTable(e, t, np.maximum(v, 0.0), Extrapolation.CLAMP_ENDS)


def synthesize_instance(clean: ColorImage, mask: DamageMask, tab: DistortionTable,
                        noise_sigma: float = 0.0, seed: int = 0):
    """Damage a clean image: returns ``(f, g)``; ``g`` is None when nothing is damaged.

    Damaged pixels of ``f`` are overwritten with mid-grey.
    """
    if not clean.geometry.same_grid(mask.geometry):
        raise ValueError("image and mask sizes differ")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    d = mask.damaged
    data = np.array(clean.data)
    if noise_sigma > 0:
        data = np.clip(data + rng.normal(0.0, noise_sigma, size=data.shape), 0.0, 1.0)
    data[d] = 0.5
    f = ColorImage(data, clean.geometry)
    if not d.any():
        return f, None
    g = np.full(d.shape, np.nan)
    g[d] = eval_L(tab, clean.data[d] @ tab.e)
    if noise_sigma > 0:
        g[d] = np.maximum(g[d] + rng.normal(0.0, noise_sigma, size=int(d.sum())), 0.0)
    return f, GreyObservation(g, clean.geometry)
