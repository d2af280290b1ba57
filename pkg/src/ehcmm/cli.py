"""Command-line entry point.

    ehcmm build-reachmap  [--samples N] [--voxel-size M] [--seed S] [--output PATH]
    ehcmm episode         --method NAME --scene NAME|PATH [--svg] ...
    ehcmm experiment      --suite NAME [--methods a,b,c] [--seed S] ...

Outputs go to --output-dir, else $EHCMM_OUTPUT_DIR, else ./ehcmm-out.  Every
output file name carries the config hash and the seed.  Reachability maps
built on demand are cached under $EHCMM_CACHE_DIR (default
~/.cache/ehcmm) keyed by robot model and build arguments.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import experiments as ex
from .controller import METHODS, ControllerParams, canonical_method, load_params
from .errors import InvalidInputError, SchemaError, UnusableMapError
from .kinematics import default_model, load_model, model_to_dict
from .reachability import build_map, cached_map, load_map, save_map
from .simulator import TRACE_COLUMNS, NoiseModel, load_scene, trace_rows

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2  # argparse
EXIT_MISSING_FILE = 3
EXIT_SCHEMA = 4
EXIT_UNKNOWN_METHOD = 5
EXIT_INVALID_INPUT = 6
EXIT_UNUSABLE_MAP = 7

OUTPUT_ENV = "EHCMM_OUTPUT_DIR"
CACHE_ENV = "EHCMM_CACHE_DIR"
BUILTIN_SCENES = ("three-objects", "three-objects-no-table", "monitoring-forward",
                  "monitoring-downward", "monitoring-sideways")


class MissingFileError(Exception):
    pass


class UnknownMethodError(Exception):
    pass


def _output_dir(args) -> Path:
    d = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or "ehcmm-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "ehcmm")


def _require(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise MissingFileError(f"{what} not found: {path}")
    return p


def _methods(text: str) -> list[str]:
    out = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            out.append(canonical_method(name))
        except InvalidInputError as exc:
            raise UnknownMethodError(str(exc)) from exc
    if not out:
        raise UnknownMethodError("no method given")
    return out


def _load_common(args):
    """Robot, params and map, all validated before any simulation starts."""
    robot_path = _require(getattr(args, "robot", None), "robot model")
    params_path = _require(getattr(args, "params", None), "controller params")
    map_path = _require(getattr(args, "map", None), "reachability map")
    model = load_model(robot_path) if robot_path else default_model()
    params = load_params(params_path) if params_path else ControllerParams()
    if map_path:
        rmap = load_map(map_path)
    else:
        rmap = cached_map(model, _cache_dir(), args.map_samples, args.map_voxel, args.map_seed)
    rmap.boundary_set()  # raises UnusableMapError on an empty boundary set
    return model, params, rmap


def _noise(args) -> NoiseModel | None:
    if getattr(args, "no_noise", False):
        return NoiseModel.zero()
    return None


def _stem(kind: str, name: str, config_hash: str, seed: int) -> str:
    return f"{kind}-{name}-cfg{config_hash}-seed{seed}"


# ---------------------------------------------------------------------------
# commands

def cmd_build_reachmap(args) -> int:
    robot_path = _require(args.robot, "robot model")
    model = load_model(robot_path) if robot_path else default_model()
    rmap = build_map(model, args.samples, args.voxel_size, args.seed)
    if args.output:
        out = Path(args.output)
        out.parent.mkdir(parents=True, exist_ok=True)
    else:
        cfg = ex.config_digest({"robot": model_to_dict(model), "samples": args.samples,
                                "voxel_size": args.voxel_size})
        out = _output_dir(args) / (_stem("reachmap", model.name, cfg, args.seed) + ".bin")
    save_map(rmap, out)
    n = int((rmap.grid > 0.95).sum())
    print(f"wrote {out} ({'x'.join(map(str, rmap.dims))} voxels, {n} above 0.95)")
    return EXIT_OK


def _scene(args, model):
    name = args.scene
    if name in BUILTIN_SCENES:
        if name.startswith("three-objects"):
            return ex.three_objects_scene(table=name == "three-objects", seed=args.seed,
                                          noise=_noise(args), model=model)
        return ex.monitoring_scene(name.split("-", 1)[1], seed=args.seed, noise=_noise(args),
                                   model=model)
    sc = load_scene(_require(name, "scene"))
    if args.no_noise:
        sc.noise = NoiseModel.zero()
    if args.seed_given:
        sc.seed = args.seed
    return sc


def cmd_episode(args) -> int:
    method = _methods(args.method)[0]
    model, params, rmap = _load_common(args)
    scene = _scene(args, model)
    records, traces = ex.run_episode(model, rmap, params, method, scene)
    cfg = ex.config_digest({"controller": params.to_dict(), "robot": model_to_dict(model),
                            "scene": scene.name, "method": method,
                            "noise": [scene.noise.base_t_sigma, scene.noise.base_r_sigma,
                                      scene.noise.arm_sigma, scene.noise.mode]})
    out_dir = _output_dir(args)
    stem = _stem("episode", f"{method}-{scene.name}", cfg, scene.seed)
    path = out_dir / f"{stem}.csv"
    t_offset = 0.0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "t_total"] + TRACE_COLUMNS)
        for k, tr in enumerate(traces):
            for row, cells in zip(tr, trace_rows(tr)):
                if k > 0 and row.t == 0.0:
                    continue  # the first row repeats the previous target's final state
                w.writerow([k, repr(t_offset + row.t)] + cells)
            t_offset += tr[-1].t
    print(f"wrote {path}")
    if args.svg:
        svg = out_dir / f"{stem}.svg"
        svg.write_text(error_plot_svg(traces, f"{method} / {scene.name}"))
        print(f"wrote {svg}")
    for r in records:
        status = "ok" if r.success else "timeout"
        print(f"target {r.index}: {status} t={r.time:.2f}s |e|={r.final_error:.4f} m")
    return EXIT_OK


def cmd_experiment(args) -> int:
    methods = _methods(args.methods) if args.methods else None
    model, params, rmap = _load_common(args)
    noise = _noise(args)
    common = dict(seed=args.seed, noise=noise, timeout=args.timeout)
    if args.suite == "random-reach":
        sets = 10 if args.full else args.sets
        rep = ex.run_random_reach(model, rmap, params, methods or ("ehc-nompbs", "neo-c", "neo-e"),
                                  sets=sets, points=args.points, obstacles=not args.no_obstacles,
                                  **common)
    elif args.suite == "sequential-grasp":
        rep = ex.run_sequential_grasp_analogue(model, rmap, params,
                                               methods or ("tsmm", "neo-c", "neo-e", "ehc"),
                                               trials=args.trials, table=not args.no_table,
                                               **common)
    else:
        rep = ex.run_monitoring(model, rmap, params, methods or ("neo-e", "ehc-nompbs", "ehc"),
                                trials=args.trials, **common)
    out_dir = _output_dir(args)
    stem = _stem("report", args.suite, rep.config_hash, args.seed)
    rep.write_json(out_dir / f"{stem}.json")
    rep.write_csv(out_dir / f"{stem}.csv")
    print(rep.table())
    print(f"wrote {out_dir / stem}.json and .csv")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plot

def error_plot_svg(traces, title: str = "", width: int = 640, height: int = 320) -> str:
    """Static |e(t)| polyline over the concatenated targets of an episode."""
    pts = []
    t0 = 0.0
    for tr in traces:
        for row in tr:
            pts.append((t0 + row.t, row.e_norm))
        t0 += tr[-1].t
    t_max = max(p[0] for p in pts) or 1.0
    e_max = max(p[1] for p in pts) or 1.0
    m = 40
    sx = (width - 2 * m) / t_max
    sy = (height - 2 * m) / e_max
    poly = " ".join(f"{m + t * sx:.1f},{height - m - e * sy:.1f}" for t, e in pts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>\n'
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>\n'
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">'
        f't [s] (0 to {t_max:.2f})</text>\n'
        f'<text x="8" y="{m - 10}" font-size="12">|e| [m] (max {e_max:.3f})</text>\n'
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{poly}"/>\n'
        f'</svg>\n'
    )


# ---------------------------------------------------------------------------
# parser

def _add_common(p):
    p.add_argument("--robot", help="robot model YAML (default: built-in 6-DOF model)")
    p.add_argument("--params", help="controller parameter YAML")
    p.add_argument("--map", help="reachability map binary (default: cached build)")
    p.add_argument("--map-samples", type=int, default=200_000)
    p.add_argument("--map-voxel", type=float, default=0.05)
    p.add_argument("--map-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or ./ehcmm-out)")
    p.add_argument("--no-noise", action="store_true", help="disable actuation noise")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ehcmm", description="embodied holistic mobile manipulation")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-reachmap", help="build and save a reachability map")
    b.add_argument("--robot")
    b.add_argument("--samples", type=int, default=200_000)
    b.add_argument("--voxel-size", type=float, default=0.05)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--output", help="output path (default: output dir, hashed name)")
    b.add_argument("--output-dir")
    b.set_defaults(func=cmd_build_reachmap)

    e = sub.add_parser("episode", help="run one closed-loop episode and write its trace")
    e.add_argument("--method", required=True, help=f"one of {', '.join(METHODS)}")
    e.add_argument("--scene", required=True,
                   help=f"scene YAML or built-in: {', '.join(BUILTIN_SCENES)}")
    e.add_argument("--svg", action="store_true", help="also write an |e(t)| plot")
    _add_common(e)
    e.set_defaults(func=cmd_episode)

    x = sub.add_parser("experiment", help="run an experiment suite")
    x.add_argument("--suite", required=True, choices=ex.SUITES)
    x.add_argument("--methods", help="comma-separated method names")
    x.add_argument("--sets", type=int, default=5, help="random-reach sets")
    x.add_argument("--points", type=int, default=50, help="random-reach points per set")
    x.add_argument("--full", action="store_true", help="random-reach at 10 sets (500 points)")
    x.add_argument("--trials", type=int, default=15)
    x.add_argument("--timeout", type=float, default=30.0)
    x.add_argument("--no-table", action="store_true")
    x.add_argument("--no-obstacles", action="store_true")
    _add_common(x)
    x.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if hasattr(args, "map_samples"):
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = 0
    try:
        return args.func(args)
    except MissingFileError as exc:
        code, msg = EXIT_MISSING_FILE, str(exc)
    except UnknownMethodError as exc:
        code, msg = EXIT_UNKNOWN_METHOD, str(exc)
    except SchemaError as exc:
        code, msg = EXIT_SCHEMA, f"schema error: {exc}"
    except UnusableMapError as exc:
        code, msg = EXIT_UNUSABLE_MAP, f"unusable map: {exc}"
    except (InvalidInputError, ValueError) as exc:
        code, msg = EXIT_INVALID_INPUT, f"invalid input: {exc}"
    except OSError as exc:
        code, msg = EXIT_ERROR, f"error: {exc}"
    print(f"ehcmm: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
