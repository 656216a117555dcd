"""Command-line entry point: ``pcrestore <command> [flags]``.

Exit codes: 0 success, 1 unreadable or malformed input, 2 validation or
size failure. Messages go to standard error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import (DamageMask, GreyObservation, GridGeometry, Labeling, ModelParams, Neighborhood,
                   Palette, Problem, validate_instance)
from .diagnostics import regularity_report
from .distortion import eval_L, fit_distortion, synthesize_instance
from .energy import nontriviality_check, total_energy
from .formats import (FormatError, read_grey, read_image, read_labels, read_mask, read_netpbm,
                      read_palette, read_table, to_bytes, write_labels, write_mask, write_netpbm,
                      write_table)
from .oracle import InstanceTooLarge, brute_force_fixed_palette
from .palette import solve_free_palette
from .solver import Engine, SolveOptions, solve_fixed_palette


class ValidationFailure(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    flags: dict = field(default_factory=dict)

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        flags = {k: v for k, v in sorted(vars(ns).items()) if k not in ("func", "command")}
        return cls(ns.command, flags)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        d = json.loads(text)
        return cls(d["command"], d["flags"])


def _geometry_kw(args) -> dict:
    return {"spacing_h": args.h, "neighborhood": Neighborhood(args.neighborhood)}


def _params(args) -> ModelParams:
    try:
        return ModelParams(args.lam, args.mu, args.p)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc


def _dump(obj, path=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(x):
    """Replace non-finite floats (e.g. infinite slack) with None for strict JSON."""
    if isinstance(x, float) and not np.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _load_problem(args):
    """Read image, mask, grey observation and table.

    Without ``--grey`` the observation is computed from the image through the table.
    """
    gkw = _geometry_kw(args)
    image = read_image(args.image, gkw)
    damaged = read_mask(args.mask)
    if damaged.shape != image.geometry.shape:
        raise ValidationFailure(f"mask {args.mask} size {damaged.shape} differs from image {image.geometry.shape}")
    table = read_table(args.table, image.channels) if args.table else None
    if table is not None and not table.is_monotone:
        print(f"warning: {args.table}: L values are not non-decreasing", file=sys.stderr)
    if args.grey:
        grey = read_grey(args.grey, damaged, gkw)
    elif damaged.any():
        if table is None:
            raise ValidationFailure("damaged pixels present: pass --grey or --table")
        g = np.full(damaged.shape, np.nan)
        g[damaged] = eval_L(table, image.data[damaged] @ table.e)
        grey = GreyObservation(g, image.geometry)
    else:
        grey = None
    if damaged.any() and table is None:
        raise ValidationFailure("damaged pixels present but no --table given")
    return image, damaged, grey, table


def _problem(args, image, damaged, grey, table, palette) -> Problem:
    params = _params(args)
    report = validate_instance(image, damaged, grey, palette, params)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if not report.ok:
        raise ValidationFailure("; ".join(report.fatal))
    try:
        return Problem(image, DamageMask(damaged, image.geometry), grey, table, params)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc


def _solve_opts(args) -> SolveOptions:
    return SolveOptions(max_sweeps=args.max_sweeps, move_order=args.move_order, seed=args.seed,
                        engine=Engine(args.engine))


def cmd_restore(args) -> int:
    image, damaged, grey, table = _load_problem(args)
    if args.palette:
        palette = read_palette(args.palette)
        if palette.channels != image.channels:
            raise ValidationFailure("palette and image channel counts differ")
    else:
        if args.k < 1:
            raise ValidationFailure("--k must be >= 1")
        palette = Palette(np.full((1, image.channels), 0.5))  # placeholder for validation only
    problem = _problem(args, image, damaged, grey, table, palette)
    opts = _solve_opts(args)

    out = {"config": asdict(RunConfig.from_namespace(args))}
    if args.palette and not args.free:
        labeling, trace = solve_fixed_palette(palette, problem, opts)
        out["energy_trace"] = trace.energies
        out["termination"] = trace.reason
        out["outer_energies"] = []
        out["merge_events"] = []
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = solve_free_palette(problem, args.k, opts, palette=palette if args.palette else None,
                                     seed=args.seed)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        palette, labeling = res.palette, res.labeling
        out["energy_trace"] = [e for t in res.move_traces for e in t.energies]
        out["termination"] = res.move_traces[-1].reason if res.move_traces else ""
        out["outer_energies"] = res.energies
        out["merge_events"] = [list(m) for m in res.merge_events]
        out["pruned_labels"] = [list(m) for m in res.pruned]

    if palette.k > 255:
        raise ValidationFailure("label maps hold at most 255 labels")
    out["palette"] = palette.colors.tolist()
    out["energy"] = total_energy(labeling, palette, problem).to_dict()
    out["regularity"] = regularity_report(labeling, palette, radii=args.radii, etas=args.etas).to_dict()

    prefix = args.out
    restored = palette.colors[labeling.label]
    write_netpbm(f"{prefix}.ppm", to_bytes(restored))
    write_labels(f"{prefix}_labels.pgm", labeling)
    _dump(_clean(out), f"{prefix}_report.json")
    return 0


def cmd_energy(args) -> int:
    image, damaged, grey, table = _load_problem(args)
    palette = read_palette(args.palette)
    problem = _problem(args, image, damaged, grey, table, palette)
    labeling = read_labels(args.labels, image.geometry)
    if labeling.label.max() >= palette.k:
        raise ValidationFailure(f"label {int(labeling.label.max()) + 1} exceeds palette size {palette.k}")
    _dump(total_energy(labeling, palette, problem).to_dict())
    return 0


def cmd_oracle(args) -> int:
    image, damaged, grey, table = _load_problem(args)
    palette = read_palette(args.palette)
    problem = _problem(args, image, damaged, grey, table, palette)
    try:
        labeling, energy = brute_force_fixed_palette(palette, problem)
    except InstanceTooLarge as exc:
        raise ValidationFailure(str(exc)) from exc
    if args.out_labels:
        write_labels(args.out_labels, labeling)
    _dump({"labels": (labeling.label + 1).tolist(), "energy": energy})
    return 0


def cmd_diagnose(args) -> int:
    labeling = read_labels(args.labels)
    geom = GridGeometry.for_shape(labeling.label.shape, **_geometry_kw(args))
    labeling = Labeling(labeling.label, geom)
    palette = read_palette(args.palette) if args.palette else None
    if palette is not None and labeling.label.max() >= palette.k:
        raise ValidationFailure("label map uses more labels than the palette has")
    report = regularity_report(labeling, palette, radii=args.radii, etas=args.etas)
    _dump(_clean(report.to_dict()), args.out)
    return 0


def cmd_fit(args) -> int:
    image = read_image(args.image)
    raw = read_netpbm(args.grey)
    if raw.ndim != 2 or raw.shape != image.geometry.shape:
        raise FormatError(f"{args.grey}: expected a PGM the size of the image")
    grey = GreyObservation(raw / 255.0, image.geometry)
    calib = read_mask(args.calibration) if args.calibration else None
    if calib is not None and calib.shape != raw.shape:
        raise ValidationFailure("calibration mask size differs from the image")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            table = fit_distortion(image, grey, args.bins, calib)
        except ValueError as exc:
            raise ValidationFailure(str(exc)) from exc
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_table(args.out, table)
    return 0


def cmd_synth(args) -> int:
    clean = read_image(args.clean)
    damaged = read_mask(args.mask)
    table = read_table(args.table, clean.channels)
    try:
        mask = DamageMask(damaged, clean.geometry)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from exc
    f, g = synthesize_instance(clean, mask, table, args.noise, args.seed)
    write_netpbm(f"{args.out}_f.ppm", to_bytes(f.data))
    write_mask(f"{args.out}_mask.pgm", damaged)
    if g is not None:
        write_netpbm(f"{args.out}_g.pgm", to_bytes(np.nan_to_num(g.value, nan=0.0)))
    return 0


def cmd_check_L(args) -> int:
    table = read_table(args.table)
    res = nontriviality_check(table, args.tol)
    gamma = res.growth_exponent
    _dump({"classification": res.verdict.value, "gamma_hat": None if np.isnan(gamma) else gamma,
           "tails_used": res.tails_used, "monotone": table.is_monotone})
    return 0


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--neighborhood", type=int, choices=(4, 8), default=4)
    common.add_argument("--lambda", dest="lam", type=float, default=1.0)
    common.add_argument("--mu", type=float, default=1.0)
    common.add_argument("--p", type=float, default=2.0)
    common.add_argument("--h", type=float, default=1.0)

    inst = argparse.ArgumentParser(add_help=False)
    inst.add_argument("--image", required=True, help="observed image f (PPM)")
    inst.add_argument("--mask", required=True, help="damage mask (PGM, >= 128 means damaged)")
    inst.add_argument("--grey", help="grey observation on the damage (PGM)")
    inst.add_argument("--table", help="distortion table (CSV)")

    diag = argparse.ArgumentParser(add_help=False)
    diag.add_argument("--radii", type=_floats, default=[2.0, 4.0, 8.0])
    diag.add_argument("--etas", type=_floats, default=[0.01, 0.05, 0.1, 0.2])

    parser = argparse.ArgumentParser(prog="pcrestore", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("restore", parents=[common, inst, diag], help="restore a damaged image")
    p.add_argument("--palette", help="fixed palette file; omit to fit k colors")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--free", action="store_true", help="also re-optimise a given palette")
    p.add_argument("--engine", choices=[e.value for e in Engine], default="expansion")
    p.add_argument("--max-sweeps", type=int, default=20)
    p.add_argument("--move-order", choices=("sequential", "random"), default="sequential")
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("energy", parents=[common, inst], help="energy of a given labeling")
    p.add_argument("--palette", required=True)
    p.add_argument("--labels", required=True, help="label map (PGM, 1-based)")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("oracle", parents=[common, inst], help="exhaustive minimisation (tiny inputs)")
    p.add_argument("--palette", required=True)
    p.add_argument("--out-labels")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("diagnose", parents=[common, diag], help="regularity report for a labeling")
    p.add_argument("--labels", required=True)
    p.add_argument("--palette")
    p.add_argument("--out", help="JSON output path (default: stdout)")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("fit", parents=[common], help="fit a distortion table")
    p.add_argument("--image", required=True)
    p.add_argument("--grey", required=True)
    p.add_argument("--calibration", help="PGM selecting calibration pixels (>= 128)")
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", parents=[common], help="damage a clean image")
    p.add_argument("--clean", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output prefix")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("check-L", parents=[common], help="growth classification of a table")
    p.add_argument("--table", required=True)
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(func=cmd_check_L)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValidationFailure, InstanceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # typed constructors reject invariant violations
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
