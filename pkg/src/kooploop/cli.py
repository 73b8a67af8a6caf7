"""Command-line pipeline: generate data, synthesize loops, evaluate, serve.

Exit codes: 0 on success, 1 on runtime failure (solver/file errors), 2 on
usage errors (argparse's own convention).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import datagen
from .cyclic_solver import (
    CyclicSolveError,
    SolverWeights,
    load_solution,
    save_solution,
    solve_cyclic,
)
from .trajectory import TrajectoryFormatError, load_trajectory, save_trajectory

DATASET_CLASSES = ("nbody", "sheet", "water")

# Table defaults per dataset class: subspace rank.
DEFAULT_RANKS = {"nbody": 3, "sheet": 8, "water": 16}


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        xs, ys = text.lower().split("x")
        return int(xs), int(ys)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"grid must look like 32x32, got {text!r}") from exc


def cmd_gen(args: argparse.Namespace) -> int:
    """Generate a dataset of the requested class and write a .traj file."""
    overrides = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides.update(json.load(fh))
    steps = args.frames - 1
    if args.dataset == "nbody":
        cfg = datagen.default_nbody_config(steps=steps, seed=args.seed)
        if overrides:
            cfg = datagen.NBodyConfig(**{**_cfg_dict(cfg), **overrides})
        traj = datagen.gen_nbody(cfg)
    elif args.dataset == "sheet":
        cfg = datagen.default_sheet_config(steps=steps, seed=args.seed)
        if overrides:
            cfg = datagen.PinnedSheetConfig(**{**_cfg_dict(cfg), **overrides})
        traj = datagen.gen_pinned_sheet(cfg)
    else:
        cfg = datagen.default_water_config(steps=steps, seed=args.seed)
        if args.grid:
            nx, ny = args.grid
            cfg = datagen.ShallowWaterConfig(**{**_cfg_dict(cfg), "nx": nx, "ny": ny,
                                                "bump_center": (0.35 * ny, 0.6 * nx)})
        if overrides:
            cfg = datagen.ShallowWaterConfig(**{**_cfg_dict(cfg), **overrides})
        traj = datagen.gen_shallow_water(cfg)
    save_trajectory(traj, args.out)
    print(f"wrote {args.out}: n={traj.n} frames={traj.frame_count} dt={traj.dt}")
    return 0


def _cfg_dict(cfg) -> dict:
    out = {}
    for name in cfg.__dataclass_fields__:
        value = getattr(cfg, name)
        if isinstance(value, np.ndarray):
            value = value.tolist()
        out[name] = value
    return out


def default_rank_for(traj) -> int | None:
    """Class-based default subspace dimension, judged from the layout.

    Height grids get the wave default, particle systems the small/large
    defaults by element count; unknown layouts fall back to energy selection.
    """
    names = {b.name for b in traj.layout.blocks}
    if "height" in names:
        return DEFAULT_RANKS["water"]
    if "positions" in names:
        elems = traj.layout.block("positions").elements
        return DEFAULT_RANKS["nbody"] if elems <= 32 else DEFAULT_RANKS["sheet"]
    return None


def cmd_loop(args: argparse.Namespace) -> int:
    """Fit the surrogate, solve the cyclic program, report a summary row."""
    traj = load_trajectory(args.input)
    weights = SolverWeights(w_red=args.w_red, w_u=args.w_u)
    if args.rank is None:
        rank = default_rank_for(traj)
    elif args.rank == "auto":
        rank = None
    else:
        rank = int(args.rank)
    t0 = time.perf_counter()
    solution = solve_cyclic(traj, rank=rank, harmonics=args.harmonics,
                            weights=weights)
    total = time.perf_counter() - t0
    m = solution.metrics
    basis_m = solution.gamma.shape[1]
    print("n frames r m processing_s optimization_s closure")
    print(f"{traj.n} {traj.frame_count} {solution.rank} {basis_m} "
          f"{m.preprocess_seconds} {m.solve_seconds} {m.closure_residual}")
    save_solution(solution, args.out, include_frames=not args.no_frames)
    metrics = dict(m.to_json())
    metrics.update({
        "n": traj.n,
        "frames": traj.frame_count,
        "r": solution.rank,
        "m": basis_m,
        "total_seconds": total,
    })
    metrics_path = args.metrics or (str(args.out) + ".metrics.json")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
    print(f"wrote {args.out} and {metrics_path}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    """Compare a stored loop against its source trajectory."""
    traj = load_trajectory(args.trajectory)
    stored = load_solution(args.solution)
    frames = stored["frames"]
    if frames is None:
        print("error: solution file was written without frames", file=sys.stderr)
        return 1
    if frames.shape[1] != traj.n:
        print(f"error: state dimension mismatch: trajectory n={traj.n}, "
              f"solution n={frames.shape[1]}", file=sys.stderr)
        return 1
    t_count = int(stored["header"]["T"])
    raw_seam = float(np.linalg.norm(traj.frames[-1] - traj.frames[0]))
    loop_seam = float(np.linalg.norm(frames[-1] - frames[0]))
    diffs = frames[:t_count] - traj.frames[:t_count]
    rmse = float(np.sqrt(np.mean(diffs**2)))
    control = stored["header"]["metrics"]["control_cost"]
    print(f"raw_seam_gap {raw_seam}")
    print(f"loop_seam_gap {loop_seam}")
    print(f"fidelity_rmse {rmse}")
    print(f"control_energy {control}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    """Run the interactive edit service until interrupted."""
    import uvicorn

    from .service import create_app

    app = create_app(data_dir=args.data_dir, snapshot_dir=args.snapshot_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kooploop",
        description="Synthesize exactly cyclic animation loops from sampled "
                    "trajectories via a reduced linear surrogate and minimal "
                    "periodic control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a sample dataset")
    gen.add_argument("dataset", choices=DATASET_CLASSES)
    gen.add_argument("--frames", type=int, default=401,
                     help="total frames to record (default 401)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--grid", type=_parse_grid, default=None,
                     help="water grid as NXxNY, e.g. 32x32")
    gen.add_argument("--config", default=None,
                     help="JSON file of config overrides for the dataset class")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    loop = sub.add_parser("loop", help="synthesize a cyclic loop from a .traj file")
    loop.add_argument("input")
    loop.add_argument("--rank", default=None,
                      help="subspace dimension, or 'auto' for energy-based "
                           "(default: per dataset class)")
    loop.add_argument("--harmonics", type=int, default=8)
    loop.add_argument("--w-red", type=float, default=1e-2, dest="w_red")
    loop.add_argument("--w-u", type=float, default=3.0, dest="w_u")
    loop.add_argument("--out", required=True)
    loop.add_argument("--metrics", default=None,
                      help="metrics JSON path (default: <out>.metrics.json)")
    loop.add_argument("--no-frames", action="store_true",
                      help="store only coefficients in the .cyc file")
    loop.set_defaults(func=cmd_loop)

    ev = sub.add_parser("eval", help="compare a loop against its source trajectory")
    ev.add_argument("trajectory")
    ev.add_argument("solution")
    ev.set_defaults(func=cmd_eval)

    serve = sub.add_parser("serve", help="run the interactive edit service")
    serve.add_argument("--port", type=int, default=8008)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--data-dir", default=".",
                       help="directory .traj references resolve against")
    serve.add_argument("--snapshot-dir", default=None,
                       help="write each session's latest loop here on shutdown")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TrajectoryFormatError, CyclicSolveError, datagen.SimulationError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
