"""Binary netpbm (P5/P6), palette text files and distortion-table CSV."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .core import ColorImage, GreyObservation, GridGeometry, Labeling, Palette
from .distortion import DistortionTable, Extrapolation, unit

MASK_THRESHOLD = 128


class FormatError(ValueError):
    """Malformed or unreadable input file."""


def _tokens(buf: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out, i, n = [], 0, len(buf)
    while len(out) < count:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i:i + 1] == b"#":
            while i < n and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not buf[i:i + 1].isspace() and buf[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise FormatError("truncated netpbm header")
        out.append(buf[start:i])
    if i >= n or not buf[i:i + 1].isspace():
        raise FormatError("netpbm header must end with a single whitespace byte")
    return out, i + 1


def read_netpbm(path) -> np.ndarray:
    """Raw 8-bit samples: (H, W) for P5, (H, W, 3) for P6."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from exc
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: not a binary PGM/PPM file")
    try:
        (w, h, maxval), offset = _tokens(buf[2:], 3)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FormatError(f"{path}: bad header ({exc})") from exc
    if w < 1 or h < 1:
        raise FormatError(f"{path}: image size {w}x{h} is empty")
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    chans = 3 if magic == b"P6" else 1
    data = buf[2 + offset:]
    need = w * h * chans
    if len(data) < need:
        raise FormatError(f"{path}: expected {need} bytes of pixel data, found {len(data)}")
    arr = np.frombuffer(data[:need], dtype=np.uint8)
    return arr.reshape(h, w, 3) if chans == 3 else arr.reshape(h, w)


def write_netpbm(path, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ValueError("netpbm writer expects uint8 samples")
    if arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    elif arr.ndim == 2:
        magic = b"P5"
    else:
        raise ValueError(f"cannot write array of shape {arr.shape}")
    header = magic + b"\n%d %d\n255\n" % (arr.shape[1], arr.shape[0])
    Path(path).write_bytes(header + np.ascontiguousarray(arr).tobytes())


def to_bytes(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)


def read_image(path, geometry_kw=None) -> ColorImage:
    raw = read_netpbm(path)
    if raw.ndim != 3:
        raise FormatError(f"{path}: expected a PPM (P6) color image")
    geom = GridGeometry.for_shape(raw.shape, **(geometry_kw or {}))
    return ColorImage(raw / 255.0, geom)


def read_mask(path, geometry_kw=None) -> np.ndarray:
    raw = read_netpbm(path)
    if raw.ndim != 2:
        raise FormatError(f"{path}: expected a PGM (P5) mask")
    return raw >= MASK_THRESHOLD


def read_grey(path, mask: np.ndarray, geometry_kw=None) -> GreyObservation:
    raw = read_netpbm(path)
    if raw.ndim != 2:
        raise FormatError(f"{path}: expected a PGM (P5) grey image")
    if raw.shape != mask.shape:
        raise FormatError(f"{path}: size {raw.shape} differs from mask {mask.shape}")
    g = np.where(mask, raw / 255.0, np.nan)
    return GreyObservation(g, GridGeometry.for_shape(raw.shape, **(geometry_kw or {})))


def write_mask(path, damaged: np.ndarray) -> None:
    write_netpbm(path, np.where(damaged, 255, 0).astype(np.uint8))


def read_labels(path, geometry: GridGeometry | None = None) -> Labeling:
    """Label maps store 1-based labels; 0 is rejected."""
    raw = read_netpbm(path)
    if raw.ndim != 2:
        raise FormatError(f"{path}: expected a PGM (P5) label map")
    if raw.min() < 1:
        raise FormatError(f"{path}: label value 0 found; label maps are 1-based")
    return Labeling(raw.astype(np.int64) - 1, geometry)


def write_labels(path, labeling: Labeling) -> None:
    lab = labeling.label + 1
    if lab.max() > 255:
        raise ValueError("label maps hold at most 255 labels")
    write_netpbm(path, lab.astype(np.uint8))


def read_palette(path) -> Palette:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from exc
    rows = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(x) for x in line.split()])
        except ValueError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from exc
    if not rows or len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: palette needs at least one color and a constant channel count")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
        raise FormatError(f"{path}: palette values must lie in [0, 1]")
    return Palette(arr)


def write_palette(path, palette: Palette) -> None:
    lines = [" ".join(f"{x:.17g}" for x in row) for row in palette.colors]
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path, channels: int = 3) -> DistortionTable:
    """CSV rows ``t,L``; optional header and ``# e: ...`` / ``# extrapolation: ...`` lines.

    Without an ``e`` line the direction defaults to (1,...,1)/sqrt(channels).
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror or exc}") from exc
    e = None
    ext = Extrapolation.CLAMP_ENDS
    body = []
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("#"):
            key, _, val = s[1:].partition(":")
            key = key.strip().lower()
            try:
                if key == "e":
                    e = [float(x) for x in val.replace(",", " ").split()]
                elif key == "extrapolation":
                    ext = Extrapolation(val.strip().lower())
            except ValueError as exc:
                raise FormatError(f"{path}: bad '{key}' line ({exc})") from exc
            continue
        if s:
            body.append(s)
    ts, vs = [], []
    for n, row in enumerate(csv.reader(body)):
        if len(row) != 2:
            raise FormatError(f"{path}: expected 't,L' rows, got {row}")
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError:
            if n == 0:
                continue  # header
            raise FormatError(f"{path}: non-numeric row {row}") from None
        ts.append(t)
        vs.append(v)
    if not ts:
        raise FormatError(f"{path}: table has no samples")
    try:
        if e is None:
            e = unit(np.ones(channels))
        elif abs(np.linalg.norm(e) - 1.0) > 1e-12:
            e = unit(e)
        return DistortionTable(e, ts, vs, ext)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_table(path, table: DistortionTable) -> None:
    out = io.StringIO()
    out.write("# e: " + ",".join(f"{x:.17g}" for x in table.e) + "\n")
    out.write(f"# extrapolation: {table.extrapolation.value}\n")
    out.write("t,L\n")
    for t, v in zip(table.t, table.values):
        out.write(f"{t:.17g},{v:.17g}\n")
    Path(path).write_text(out.getvalue())
