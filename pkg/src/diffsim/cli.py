"""Command-line driver: simulate | render | estimate | sweep | control | bench.

Exit codes: 0 success, 1 runtime divergence, 2 usage or configuration error.
GRADSIM_THREADS caps the worker count for anything that could fan out
(current commands are single-process; the variable is validated and exported
to keep BLAS pools bounded for reproducible timing)."""

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from .config import ConfigError, apply_model_flags, load_scene, parse_scene
from .control import ControlTask, optimize_initial_velocity, optimize_policy
from .dynamics.particles import SimulationError
from .engine import backward, rollout
from .estimation import (LossSpec, OptimizerConfig, estimate, sweep_landscape,
                         write_estimate_csv, write_landscape_csv)
from .render.imageio import read_ppm, write_pgm, write_ppm
from .scene import ModelParams


def worker_count():
    raw = os.environ.get("GRADSIM_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"GRADSIM_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("GRADSIM_THREADS must be >= 1")
    return n


def _write_frames(out, frames, with_sil=False):
    for k in range(frames.num_frames):
        if not frames.rendered[k]:
            continue
        write_ppm(os.path.join(out, f"frame_{k:04d}.ppm"), frames.rgb[k])
        if with_sil:
            write_pgm(os.path.join(out, f"sil_{k:04d}.pgm"), frames.sil[k])


def _write_states(path, scene, tape):
    header = ["step"]
    for i, s in enumerate(tape.states[0]):
        for key, val in s.items():
            header += [f"b{i}_{key}{j}" for j in range(np.size(val))]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for step, state in enumerate(tape.states):
            row = [step]
            for s in state:
                for val in s.values():
                    row += [repr(float(v)) for v in np.ravel(val)]
            w.writerow(row)


def cmd_simulate(args):
    scene, _ = load_scene(args.config)
    if args.seed is not None:
        scene.seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    tape, frames = rollout(scene, render=True)
    _write_frames(args.out, frames)
    _write_states(os.path.join(args.out, "states.csv"), scene, tape)
    return 0


def cmd_render(args):
    scene, _ = load_scene(args.config)
    os.makedirs(args.out, exist_ok=True)
    _, frames = rollout(scene, render=True)
    _write_frames(args.out, frames, with_sil=True)
    return 0


def _loss_spec(args):
    return LossSpec(mode=args.loss, channel=args.channel)


def _opt_config(args):
    return OptimizerConfig(method=args.optimizer, lr=args.lr,
                           iters=args.iters)


def cmd_estimate(args):
    with open(args.config) as f:
        cfg = json.load(f)
    gt_scene, _ = parse_scene(cfg)
    est_scene, _ = parse_scene(apply_model_flags(cfg, args))
    true_params = ModelParams.from_scene(gt_scene)
    if args.self_target:
        try:
            with open(args.self_target) as f:
                hidden = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"hidden-params file not found: "
                              f"{args.self_target}")
        for k, v in hidden.items():
            true_params.set(k, np.broadcast_to(
                v, np.shape(true_params.get(k))))
    keys = args.param
    if not keys:
        raise ConfigError("estimate needs at least one --param")
    init = ModelParams.from_scene(est_scene)
    # target rendered by the ground-truth scene; candidate simulated by the
    # (possibly imperfect) estimator scene
    from .estimation import render_target

    spec = _loss_spec(args)
    target = render_target(gt_scene, true_params, spec)

    from .estimation import estimate

    opt = _opt_config(args)
    result = estimate(est_scene, None, init, keys, spec, opt, target=target)
    os.makedirs(args.out, exist_ok=True)
    write_estimate_csv(os.path.join(args.out, "estimate.csv"), result)
    for line in result.diagnostics:
        print(line)
    final = result.params.to_vector(keys)
    print(f"final params: {dict(zip(keys, np.atleast_1d(final).tolist()))}")
    return 0


def cmd_sweep(args):
    scene, _ = load_scene(args.config)
    try:
        lo, hi, n = args.grid.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError("--grid must look like lo:hi:n")
    if n < 2:
        raise ConfigError("--grid needs at least 2 points")
    values = np.linspace(lo, hi, n)
    curve = sweep_landscape(scene, args.param[0], values, _loss_spec(args))
    os.makedirs(args.out, exist_ok=True)
    write_landscape_csv(os.path.join(args.out, "landscape.csv"), curve)
    return 0


def cmd_control(args):
    scene, _ = load_scene(args.config)
    if args.seed is not None:
        scene.seed = args.seed
    os.makedirs(args.out, exist_ok=True)
    target = read_ppm(args.target)
    spec = LossSpec("last-frame-mse", args.channel)
    if args.channel == "rgb":
        task = ControlTask(scene, target_rgb=target, body=args.body,
                           spec=spec)
    else:
        task = ControlTask(scene, target_sil=target, body=args.body,
                           spec=spec)
    opt = _opt_config(args)
    if args.mode == "policy":
        ctrl, result = optimize_policy(task, opt, seed=scene.seed)
        np.save(os.path.join(args.out, "weights.npy"), ctrl.W)
        controllers = {args.body: ctrl}
        params = None
    else:
        params, result = optimize_initial_velocity(
            task, opt, per_particle=args.per_particle)
        with open(os.path.join(args.out, "velocity.json"), "w") as f:
            json.dump(params.get(f"body.{args.body}.init_vel").tolist(), f)
        controllers = None
    write_estimate_csv(os.path.join(args.out, "trace.csv"), result)
    num = scene.horizon // scene.render_stride
    _, frames = rollout(scene, params, controllers=controllers, render=True,
                        frames_needed={num - 1})
    write_ppm(os.path.join(args.out, "best_frame.ppm"), frames.rgb[num - 1])
    for line in result.diagnostics:
        print(line)
    return 0


def _bench_scene(n_tets, dt=1e-3):
    """Freely oscillating FEM block (uniform squeeze, no contact): exercises
    the element kernels without stability tuning per size."""
    from . import meshes
    from .scene import FemBody, Scene

    per_axis = max(1, round((n_tets / 5.0) ** (1.0 / 3.0)))
    nz = max(1, round(n_tets / 5.0 / per_axis / per_axis))
    mesh = meshes.box_tet_mesh(per_axis, per_axis, nz)
    body = FemBody(mesh, mass=2.0, mu=1e3, lam=1e3, init_pos=(0, 0.6, 0))
    sc = Scene(bodies=[body], dt=dt, horizon=1,
               gravity=np.zeros(3))
    # gentle uniform compression so forces are non-trivial
    state_scale = 0.02
    body.init_vel = np.asarray((0.0, -state_scale, 0.0))
    sc.camera.width = sc.camera.height = 64
    return sc, mesh.num_elements


def cmd_bench(args):
    rows = []
    for n in args.tets:
        scene, actual = _bench_scene(n)
        scene.horizon = args.steps
        t0 = time.perf_counter()
        tape, _ = rollout(scene)
        t_fwd = time.perf_counter() - t0
        t0 = time.perf_counter()
        _, frames = rollout(scene, render=True,
                            frames_needed={args.steps - 1})
        t_fr = time.perf_counter() - t0
        cot = [{"x": np.ones_like(tape.final_state[0]["x"]),
                "v": np.zeros_like(tape.final_state[0]["v"])}]
        t0 = time.perf_counter()
        backward(tape, d_states={tape.horizon: cot})
        t_bwd = time.perf_counter() - t0
        rows.append((actual, args.steps / t_fwd, args.steps / t_fr,
                     args.steps / t_bwd))
    print(f"{'tets':>8} {'forward_hz':>12} {'fwd+render_hz':>14} "
          f"{'backward_hz':>12}")
    for r in rows:
        print(f"{r[0]:>8d} {r[1]:>12.1f} {r[2]:>14.1f} {r[3]:>12.1f}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="diffsim",
        description="differentiable multiphysics simulation and rendering")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="scene config JSON")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("simulate", help="run a rollout; dump frames+states")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("render", help="render frames and silhouettes")
    common(sp)
    sp.set_defaults(func=cmd_render)

    def opt_args(sp):
        sp.add_argument("--loss", default="all-frames-mse",
                        choices=["all-frames-mse", "first-last-mse",
                                 "last-frame-mse"])
        sp.add_argument("--channel", default="rgb",
                        choices=["rgb", "silhouette"])
        sp.add_argument("--optimizer", default="adam",
                        choices=["adam", "sgd"])
        sp.add_argument("--lr", type=float, default=0.05)
        sp.add_argument("--iters", type=int, default=100)

    sp = sub.add_parser("estimate", help="recover parameters from video")
    common(sp)
    sp.add_argument("--param", action="append", default=[],
                    help="parameter key, e.g. body.0.mass (repeatable)")
    sp.add_argument("--self-target", metavar="HIDDEN_JSON",
                    help="render the target from these hidden params")
    sp.add_argument("--no-friction", action="store_true")
    sp.add_argument("--perfect-elastic", action="store_true")
    sp.add_argument("--rigid-as-deformable", action="store_true")
    sp.add_argument("--deformable-as-rigid", action="store_true")
    opt_args(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("sweep", help="loss landscape over one parameter")
    common(sp)
    sp.add_argument("--param", action="append", default=[], required=True)
    sp.add_argument("--grid", required=True, help="lo:hi:n")
    opt_args(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("control", help="optimize policy or initial velocity")
    common(sp)
    sp.add_argument("--target", required=True, help="goal image (PPM/PGM)")
    sp.add_argument("--mode", default="policy",
                    choices=["policy", "velocity"])
    sp.add_argument("--body", type=int, default=0)
    sp.add_argument("--per-particle", action="store_true")
    opt_args(sp)
    sp.set_defaults(func=cmd_control)

    sp = sub.add_parser("bench", help="throughput report")
    sp.add_argument("--tets", type=lambda s: [int(v) for v in s.split(",")],
                    default=[100, 1000, 10000])
    sp.add_argument("--steps", type=int, default=100)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        worker_count()
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except SimulationError as err:
        print(f"error: simulation diverged: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
