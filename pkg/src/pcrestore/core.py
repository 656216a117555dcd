"""Domain types for piecewise-constant restoration on a pixel grid.

Every raster type is immutable: arrays are copied on construction and
flagged read-only. Labels are 0-based in memory; files and JSON reports
use 1-based labels (see :mod:`pcrestore.netpbm`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:
    from .distortion import DistortionTable


class Neighborhood(enum.Enum):
    N4 = 4
    N8 = 8


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridGeometry:
    width: int
    height: int
    spacing_h: float = 1.0
    neighborhood: Neighborhood = Neighborhood.N4

    def __post_init__(self):
        if int(self.width) != self.width or self.width < 1:
            raise ValueError(f"width must be a positive integer, got {self.width}")
        if int(self.height) != self.height or self.height < 1:
            raise ValueError(f"height must be a positive integer, got {self.height}")
        if not (math.isfinite(self.spacing_h) and self.spacing_h > 0):
            raise ValueError(f"spacing_h must be > 0, got {self.spacing_h}")
        if not isinstance(self.neighborhood, Neighborhood):
            object.__setattr__(self, "neighborhood", Neighborhood(self.neighborhood))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def pixel_area(self) -> float:
        return self.spacing_h * self.spacing_h

    def same_grid(self, other: "GridGeometry") -> bool:
        return self.width == other.width and self.height == other.height

    @classmethod
    def for_shape(cls, shape, spacing_h: float = 1.0, neighborhood=Neighborhood.N4) -> "GridGeometry":
        return cls(width=int(shape[1]), height=int(shape[0]), spacing_h=spacing_h,
                   neighborhood=Neighborhood(neighborhood) if not isinstance(neighborhood, Neighborhood) else neighborhood)


def _resolve_geometry(geometry: Optional[GridGeometry], shape) -> GridGeometry:
    if geometry is None:
        return GridGeometry.for_shape(shape)
    if geometry.shape != tuple(shape[:2]):
        raise ValueError(f"array shape {tuple(shape[:2])} does not match geometry {geometry.shape}")
    return geometry


@dataclass(frozen=True, eq=False)
class ColorImage:
    """M-channel raster with values in [0, 1], stored as (height, width, M)."""

    data: np.ndarray
    geometry: Optional[GridGeometry] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] < 1:
            raise ValueError(f"color image must be (H, W, M), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("color image contains non-finite values")
        if data.size and (data.min() < 0.0 or data.max() > 1.0):
            raise ValueError("color image values must lie in [0, 1]")
        object.__setattr__(self, "geometry", _resolve_geometry(self.geometry, data.shape))
        object.__setattr__(self, "data", _frozen(data))

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1, self.channels)


@dataclass(frozen=True, eq=False)
class DamageMask:
    damaged: np.ndarray
    geometry: Optional[GridGeometry] = None

    def __post_init__(self):
        damaged = np.asarray(self.damaged, dtype=bool)
        if damaged.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {damaged.shape}")
        if damaged.all():
            raise ValueError("every pixel is damaged; the undamaged region must be nonempty")
        object.__setattr__(self, "geometry", _resolve_geometry(self.geometry, damaged.shape))
        object.__setattr__(self, "damaged", _frozen(damaged))

    @classmethod
    def empty(cls, geometry: GridGeometry) -> "DamageMask":
        return cls(np.zeros(geometry.shape, dtype=bool), geometry)

    @property
    def count(self) -> int:
        return int(self.damaged.sum())


@dataclass(frozen=True, eq=False)
class GreyObservation:
    """Grey level recorded inside the damage; NaN marks pixels with no value."""

    value: np.ndarray
    geometry: Optional[GridGeometry] = None

    def __post_init__(self):
        value = np.asarray(self.value, dtype=float)
        if value.ndim != 2:
            raise ValueError(f"grey observation must be 2-D, got shape {value.shape}")
        defined = value[~np.isnan(value)]
        if not np.all(np.isfinite(defined)) or (defined.size and defined.min() < 0):
            raise ValueError("grey observation must be finite and nonnegative where defined")
        object.__setattr__(self, "geometry", _resolve_geometry(self.geometry, value.shape))
        object.__setattr__(self, "value", _frozen(value))


@dataclass(frozen=True, eq=False)
class Palette:
    colors: np.ndarray

    def __post_init__(self):
        colors = np.asarray(self.colors, dtype=float)
        if colors.ndim == 1:
            colors = colors[:, None]
        if colors.ndim != 2 or colors.shape[0] < 1:
            raise ValueError(f"palette must be (k, M) with k >= 1, got shape {colors.shape}")
        if not np.all(np.isfinite(colors)):
            raise ValueError("palette contains non-finite values")
        object.__setattr__(self, "colors", _frozen(colors))

    def __len__(self) -> int:
        return self.colors.shape[0]

    @property
    def k(self) -> int:
        return self.colors.shape[0]

    @property
    def channels(self) -> int:
        return self.colors.shape[1]

    def distances(self) -> np.ndarray:
        """Euclidean label-distance matrix d(i, j) = |a_i - a_j|."""
        diff = self.colors[:, None, :] - self.colors[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2))

    def strict_triangle(self, i: int, j: int, l: int) -> bool:
        if len({i, j, l}) != 3:
            raise ValueError("strict_triangle needs three distinct indices")
        d = self.distances()
        return bool(d[i, j] < d[i, l] + d[l, j])

    def with_color(self, i: int, color) -> "Palette":
        colors = np.array(self.colors)
        colors[i] = color
        return Palette(colors)


@dataclass(frozen=True, eq=False)
class Labeling:
    label: np.ndarray
    geometry: Optional[GridGeometry] = None

    def __post_init__(self):
        label = np.asarray(self.label)
        if label.ndim != 2:
            raise ValueError(f"labeling must be 2-D, got shape {label.shape}")
        if label.size and not np.issubdtype(label.dtype, np.integer):
            if not np.all(label == np.round(label)):
                raise ValueError("labels must be integers")
        label = label.astype(np.int64)
        if label.size and label.min() < 0:
            raise ValueError("labels must be nonnegative")
        object.__setattr__(self, "geometry", _resolve_geometry(self.geometry, label.shape))
        object.__setattr__(self, "label", _frozen(label))

    @classmethod
    def constant(cls, geometry: GridGeometry, value: int = 0) -> "Labeling":
        return cls(np.full(geometry.shape, value, dtype=np.int64), geometry)

    def flat(self) -> np.ndarray:
        return self.label.reshape(-1)

    def check_range(self, k: int) -> None:
        if self.label.size and self.label.max() >= k:
            raise ValueError(f"label {int(self.label.max())} out of range for a palette of {k} colors")

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        return self.geometry.same_grid(other.geometry) and np.array_equal(self.label, other.label)

    __hash__ = None


@dataclass(frozen=True)
class ModelParams:
    lam: float = 1.0
    mu: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be > 0, got {self.lam}")
        # mu = 0 switches the damaged-pixel term off (used to isolate the color update)
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if not (math.isfinite(self.p) and self.p >= 1):
            raise ValueError(f"p must be >= 1, got {self.p}")


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything the energy needs besides the palette and the labeling."""

    image: ColorImage
    mask: DamageMask
    grey: Optional[GreyObservation]
    table: Optional["DistortionTable"]
    params: ModelParams = field(default_factory=ModelParams)

    def __post_init__(self):
        if not self.image.geometry.same_grid(self.mask.geometry):
            raise ValueError("image and mask sizes differ")
        if self.grey is not None and not self.image.geometry.same_grid(self.grey.geometry):
            raise ValueError("image and grey observation sizes differ")
        if self.mask.count:
            if self.grey is None:
                raise ValueError("damaged pixels need a grey observation")
            if self.table is None:
                raise ValueError("damaged pixels need a distortion table")
            if np.isnan(self.grey.value[self.mask.damaged]).any():
                raise ValueError("grey observation missing on a damaged pixel")
        if self.table is not None and self.table.e.shape[0] != self.image.channels:
            raise ValueError("distortion direction and image channel count differ")

    @property
    def geometry(self) -> GridGeometry:
        return self.image.geometry


@dataclass
class ValidationReport:
    fatal: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.fatal


def _raw(obj, attr):
    if obj is None:
        return None
    return np.asarray(getattr(obj, attr, obj))


def validate_instance(image, mask, grey, palette, params) -> ValidationReport:
    """Check a candidate instance without raising.

    Accepts the typed objects or plain arrays (so that inputs the typed
    constructors would reject can still be diagnosed). ``params`` may be a
    :class:`ModelParams` or a ``(lam, mu, p)`` tuple.
    """
    report = ValidationReport()
    f = _raw(image, "data")
    d = _raw(mask, "damaged")
    g = _raw(grey, "value")
    a = _raw(palette, "colors")

    if f is None or f.ndim not in (2, 3):
        report.fatal.append("image must be a 2-D or 3-D array")
        return report
    if f.ndim == 2:
        f = f[:, :, None]
    shape = f.shape[:2]
    with np.errstate(invalid="ignore"):
        if not np.all(np.isfinite(f)):
            report.fatal.append("image contains NaN or infinite values")
        elif f.size and (f.min() < 0 or f.max() > 1):
            report.fatal.append("image values outside [0, 1]")

    if d is None or d.shape != shape:
        report.fatal.append(f"mask shape {None if d is None else d.shape} does not match image {shape}")
        d = None
    else:
        d = d.astype(bool)
        if d.all():
            report.fatal.append("Ω\\D empty: every pixel is damaged")

    if g is not None:
        if g.shape != shape:
            report.fatal.append(f"grey observation shape {g.shape} does not match image {shape}")
        elif d is not None:
            gd = g[d]
            if np.isnan(gd).any():
                report.fatal.append("grey observation missing on damaged pixels")
            elif not np.all(np.isfinite(gd)):
                report.fatal.append("grey observation has infinite values")
            elif gd.size and gd.min() < 0:
                report.fatal.append("grey observation is negative on damaged pixels")
    elif d is not None and d.any():
        report.fatal.append("damaged pixels present but no grey observation")

    if a is None or a.ndim != 2 or a.shape[0] < 1:
        report.fatal.append("palette must be a nonempty (k, M) array")
    else:
        if not np.all(np.isfinite(a)):
            report.fatal.append("palette contains NaN or infinite values")
        if a.shape[1] != f.shape[2]:
            report.fatal.append(f"palette has {a.shape[1]} channels, image has {f.shape[2]}")
        dup = [(i, j) for i in range(a.shape[0]) for j in range(i + 1, a.shape[0]) if np.array_equal(a[i], a[j])]
        if dup:
            pairs = ", ".join(f"({i + 1},{j + 1})" for i, j in dup)
            report.warnings.append(f"duplicate colors; zero interface cost for pairs {pairs}")

    if isinstance(params, ModelParams):
        lam, mu, p = params.lam, params.mu, params.p
    else:
        lam, mu, p = params
    if not (lam > 0 and mu >= 0 and p >= 1) or not all(map(math.isfinite, (lam, mu, p))):
        report.fatal.append(f"model parameters out of range: lambda={lam}, mu={mu}, p={p}")
    elif mu == 0:
        report.warnings.append("mu = 0: damaged pixels carry no fidelity cost")
    return report
