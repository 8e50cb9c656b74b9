"""Command-line entry point: analysis, reconstruction and holonomy runs.

Exit codes: 0 all checks passed, 1 a check failed (report still written),
2 configuration or input error.  Reports are deterministic JSON (sorted
keys, 17-significant-digit floats); figures are rendered next to them
unless --no-plot is given.
"""

import argparse
import os
import sys

import numpy as np

from . import io as iomod
from . import plotting
from .algebroid import identity_residuals
from .errors import BonnetLabError, FieldsFormatError, UnknownPreset
from .forms import form_comparison_residual
from .hypersurface import PRESET_NAMES, available_presets, preset
from .logderiv import check_bonnet_conditions
from .reconstruct import (Polyline, TensorFieldPair, align_rigid,
                          gauss_codazzi_residual, holonomy_loop,
                          reconstruct_grid)

OUT_DIR_ENV = "BONNETLAB_OUT_DIR"

DEFAULT_TOLERANCES = {
    "identity": 1e-4,          # identity-residual suite
    "forms": 1e-6,             # derived vs classical forms
    "m0": 1e-8,                # base-point recovery
    "path_independence": 1e-6, # reconstruction path independence
    "gc_warn": 1e-4,           # Gauss-Codazzi warning gate
}

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker bound for sample-parallel checks")
    p.add_argument("--tolerance", action="append", default=[], metavar="KEY=VAL",
                   help=f"override a tolerance; keys: {', '.join(sorted(DEFAULT_TOLERANCES))}")
    p.add_argument("--report", help="write the JSON report to this path")
    p.add_argument("--out-dir", default=None,
                   help=f"base directory for outputs (default ${OUT_DIR_ENV} or cwd)")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def _add_patch_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"one of: {', '.join(PRESET_NAMES)}")
    p.add_argument("--n", type=int, default=2, help="intrinsic dimension (default 2)")
    p.add_argument("--grid", type=int, default=None, help="grid samples per axis")
    p.add_argument("--radius", type=float, default=1.0, help="sphere/cylinder radius")
    p.add_argument("--radius-major", type=float, default=2.0, help="torus major radius")
    p.add_argument("--radius-minor", type=float, default=0.5, help="torus minor radius")
    p.add_argument("--quad", type=float, default=None,
                   help="graph preset: scalar quadratic coefficient")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bonnetlab",
        description="Killing-field algebroid checks and Bonnet reconstruction")
    sub = ap.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run algebroid identity, reconstruction-"
                                        "hypothesis and form-comparison checks")
    _add_patch_args(pa)
    _add_common(pa)
    pa.add_argument("--samples", type=int, default=100, help="random samples per check")
    pa.add_argument("--condition-points", type=int, default=25,
                    help="sample points for the rank/transitivity checks")
    pa.add_argument("--x0", help="comma-separated chart coordinates of the base point")
    pa.add_argument("--out", help="base path for sampled-grid CSV/OBJ exports")

    pr = sub.add_parser("reconstruct", help="integrate (g, II) data to a surface grid")
    _add_patch_args(pr)
    _add_common(pr)
    pr.add_argument("--fields", help="JSON (g, II) data file (alternative to --preset)")
    pr.add_argument("--steps", type=float, default=512,
                    help="RK4 steps per unit chart length (default 512)")
    pr.add_argument("--x0", help="comma-separated chart coordinates of the start point")
    pr.add_argument("--out", help="base path for CSV (+OBJ for n=2) exports")

    ph = sub.add_parser("holonomy", help="frame deviation around a rectangular loop")
    _add_patch_args(ph)
    _add_common(ph)
    ph.add_argument("--fields", help="JSON (g, II) data file (alternative to --preset)")
    ph.add_argument("--steps", type=float, default=512,
                    help="RK4 steps per unit chart length (default 512)")
    ph.add_argument("--loop", metavar="LO1,LO2,HI1,HI2",
                    help="rectangle corners in chart coordinates (default: inset box)")

    pp = sub.add_parser("presets", help="list available presets")
    pp.add_argument("--n", type=int, default=2)

    return ap


def _parse_tolerances(pairs) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"--tolerance expects KEY=VAL, got {item!r}")
        key, _, val = item.partition("=")
        if key not in tol:
            raise ConfigError(
                f"unknown tolerance key {key!r}; valid: {', '.join(sorted(tol))}")
        try:
            tol[key] = float(val)
        except ValueError:
            raise ConfigError(f"tolerance {key}: {val!r} is not a number")
        if tol[key] <= 0:
            raise ConfigError(f"tolerance {key} must be positive")
    return tol


def _parse_point(text, n, chart=None) -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"could not parse coordinates {text!r}")
    if len(vals) != n:
        raise ConfigError(f"expected {n} coordinates, got {len(vals)}")
    point = np.asarray(vals)
    if chart is not None and not chart.contains(point):
        raise ConfigError(f"point {text} lies outside the chart box")
    return point


def _out_path(name, args):
    if name is None:
        return None
    base = args.out_dir or os.environ.get(OUT_DIR_ENV) or ""
    if base and not os.path.isabs(name):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, name)
    return name


def _build_patch(args):
    if not args.preset:
        raise ConfigError("this run needs --preset")
    params = {}
    if args.preset in ("sphere", "cylinder"):
        params["radius"] = args.radius
    elif args.preset == "torus":
        params["radius_major"] = args.radius_major
        params["radius_minor"] = args.radius_minor
    elif args.preset == "graph" and args.quad is not None:
        params["quad"] = args.quad
    grid = args.grid if args.grid else 17
    try:
        return preset(args.preset, n=args.n, grid=grid, **params)
    except (UnknownPreset, ValueError) as exc:
        raise ConfigError(str(exc))


def _build_fields(args):
    """Return (fields, truth_patch_or_None) honoring preset-xor-fields."""
    has_fields = getattr(args, "fields", None) is not None
    if bool(args.preset) == has_fields:
        raise ConfigError("exactly one data source: give --preset or --fields")
    if has_fields:
        return iomod.load_fields(args.fields), None
    patch = _build_patch(args)
    return TensorFieldPair.from_patch(patch), patch


def _positive(args, names) -> None:
    for name in names:
        val = getattr(args, name, None)
        if val is not None and val <= 0:
            raise ConfigError(f"--{name.replace('_', '-')} must be positive")


def _emit_report(report, args) -> None:
    text = iomod.canonical_json(report)
    sys.stdout.write(text)
    path = _out_path(args.report, args)
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def _figure_base(args):
    path = _out_path(args.report, args)
    if path:
        return os.path.splitext(path)[0]
    out = getattr(args, "out", None)
    if out:
        return _out_path(out, args)
    return None


def run_analyze(args) -> int:
    _positive(args, ("samples", "condition_points", "n", "threads"))
    tol = _parse_tolerances(args.tolerance)
    patch = _build_patch(args)
    x0 = patch.chart.center if args.x0 is None else _parse_point(args.x0, patch.n, patch.chart)

    ident = identity_residuals(patch, samples=args.samples, seed=args.seed,
                               tolerance=tol["identity"], threads=args.threads)
    bonnet = check_bonnet_conditions(patch, x0, sample_points=args.condition_points,
                                     seed=args.seed, m0_tolerance=tol["m0"])
    add = form_comparison_residual(patch, samples=args.samples, seed=args.seed)
    add_ok = max(add["g_max_err"], add["II_max_err"]) < tol["forms"]

    ok = ident.passed and bonnet.all_ok and bonnet.m0_ok and add_ok
    report = {
        "command": "analyze",
        "preset": args.preset,
        "n": patch.n,
        "seed": args.seed,
        "samples": args.samples,
        "identity_residuals": ident.to_json(),
        "bonnet_conditions": bonnet.to_json(),
        "form_comparison": {**add, "tolerance": tol["forms"], "pass": add_ok},
        "pass": ok,
    }
    _emit_report(report, args)

    out_base = _out_path(args.out, args) if args.out else None
    if out_base:
        iomod.export_patch_csv(patch, out_base + ".csv")
        if patch.n == 2:
            nodes = patch.chart.node_grid()
            pos = patch.f(nodes.reshape(-1, patch.n)).reshape(nodes.shape[:-1] + (3,))
            iomod.export_obj(pos, out_base + ".obj")
    if not args.no_plot:
        base = _figure_base(args)
        if base:
            stats = dict(report["identity_residuals"])
            stats["forms_g"] = {"max": add["g_max_err"], "tolerance": tol["forms"]}
            stats["forms_II"] = {"max": add["II_max_err"], "tolerance": tol["forms"]}
            plotting.save_residual_figure(stats, base + "_residuals.png",
                                          title=f"{args.preset} residuals")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def run_reconstruct(args) -> int:
    _positive(args, ("steps", "n", "grid"))
    tol = _parse_tolerances(args.tolerance)
    if args.grid is None:
        args.grid = 33
    fields, truth = _build_fields(args)
    chart = fields.chart
    x0 = chart.center if args.x0 is None else _parse_point(args.x0, chart.n, chart)

    rng = np.random.default_rng(args.seed)
    gc_worst = (0.0, 0.0)
    for u in chart.sample(rng, 9):
        gres, cres = gauss_codazzi_residual(fields, u)
        gc_worst = (max(gc_worst[0], gres), max(gc_worst[1], cres))
    if max(gc_worst) > tol["gc_warn"]:
        sys.stderr.write(
            f"warning: Gauss-Codazzi residuals {gc_worst[0]:.3e}/{gc_worst[1]:.3e} "
            f"exceed {tol['gc_warn']:.1e}; the data may not be integrable\n")

    orientation = truth.orientation if truth is not None else 1
    result = reconstruct_grid(fields, x0, steps_per_unit=args.steps, seed=args.seed,
                              orientation=orientation)
    ok = result.path_independence < tol["path_independence"]

    report = {
        "command": "reconstruct",
        "source": args.fields if args.fields else f"preset:{args.preset}",
        "n": chart.n,
        "seed": args.seed,
        "gauss_codazzi_gate": {"gauss": gc_worst[0], "codazzi": gc_worst[1],
                               "warn_above": tol["gc_warn"]},
        "result": result.to_json(),
        "path_independence_tolerance": tol["path_independence"],
        "pass": ok,
    }
    if truth is not None:
        nodes = chart.node_grid().reshape(-1, chart.n)
        target = truth.f(nodes)
        motion, rms = align_rigid(result.positions.reshape(-1, chart.n + 1), target)
        report["alignment"] = {"rms": rms, "motion": motion.to_json()}
    _emit_report(report, args)

    out_base = _out_path(args.out, args) if args.out else None
    if out_base:
        iomod.export_positions_csv(chart, result.positions, out_base + ".csv")
        if chart.n == 2:
            iomod.export_obj(result.positions, out_base + ".obj")
    if not args.no_plot:
        base = _figure_base(args)
        if base:
            plotting.save_surface_figure(chart, result.positions, base + "_surface.png",
                                         title="reconstructed grid")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def run_holonomy(args) -> int:
    _positive(args, ("steps", "n", "grid"))
    _parse_tolerances(args.tolerance)
    fields, _ = _build_fields(args)
    chart = fields.chart
    if chart.n < 2:
        raise ConfigError("holonomy loops need an at least 2-dimensional chart")
    if args.loop:
        vals = _parse_point(args.loop, 4)
        lo = np.array([vals[0], vals[1]])
        hi = np.array([vals[2], vals[3]])
    else:
        lo = chart.lower[:2] + 0.1 * chart.span[:2]
        hi = chart.upper[:2] - 0.1 * chart.span[:2]
    if np.any(lo > hi):
        raise ConfigError("loop corners must satisfy lo <= hi componentwise")
    rect = Polyline.rectangle(lo, hi)
    pts = rect.points
    if chart.n > 2:
        rest = chart.center[2:]
        pts = np.column_stack([pts, np.tile(rest, (pts.shape[0], 1))])
    loop = Polyline(pts)

    deviation = holonomy_loop(fields, loop, steps_per_unit=args.steps)
    report = {
        "command": "holonomy",
        "source": args.fields if args.fields else f"preset:{args.preset}",
        "loop": {"lower": lo.tolist(), "upper": hi.tolist()},
        "steps_per_unit": args.steps,
        "deviation": deviation,
    }
    _emit_report(report, args)
    if not args.no_plot:
        base = _figure_base(args)
        if base:
            plotting.save_loop_figure(loop.points[:, :2], deviation, base + "_loop.png")
    return EXIT_OK


def run_presets(args) -> int:
    for name in available_presets(args.n):
        p = preset(name, n=args.n)
        params = ", ".join(f"{k}={v}" for k, v in p.params) or "-"
        chart = p.chart
        print(f"{name:9s} params: {params:32s} chart: "
              f"[{', '.join(f'{v:.3g}' for v in chart.lower)}] .. "
              f"[{', '.join(f'{v:.3g}' for v in chart.upper)}]")
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    handlers = {
        "analyze": run_analyze,
        "reconstruct": run_reconstruct,
        "holonomy": run_holonomy,
        "presets": run_presets,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except FieldsFormatError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except BonnetLabError as exc:
        sys.stderr.write(f"check failed: {exc}\n")
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
