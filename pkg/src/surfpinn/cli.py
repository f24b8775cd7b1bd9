"""Command-line front end: train / eval / verify / tableau / fd-check.

All run artifacts are plain text (JSON config and manifest, CSV logs and
dumps, text checkpoints) so external tools can consume them without
bindings. A manifest written into every run directory echoes the fully
resolved configuration; feeding it back via --config reproduces the run
bit-for-bit in single-thread mode.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__, bench, network
from .errors import (
    NonFiniteLoss,
    NonFiniteUpdate,
    StageCountUnsupported,
    SurfPinnError,
    TrainingDiverged,
)
from .geometry import Sphere, Torus
from .irk import MAX_STAGES, gauss_legendre_tableau, order_check, save_tableau
from .trainer import TrainingConfig, train

DEFAULT_CONFIG = {
    "problem": "sphere-continuous",
    "exact_variant": None,
    "stages": None,
    "mollifier_eps": None,
    "surface": None,  # optional {"kind": ..., <numeric parameters>} override
    "network_seed": 0,
    "weights": [1.0, 1.0, 1.0, 1.0],
    "threads": None,
    "collocation": {
        "n_space": None,
        "n_times": None,
        "n_u": None,
        "n_0": None,
        "n_c": None,
        "seed": None,
    },
    "training": {
        "iterations": 10_000,
        "learning_rate": 1e-3,
        "adam_betas": [0.9, 0.999],
        "adam_eps": 1e-8,
        "batch_size": 0,
        "seed": 0,
        "log_every": 100,
        "checkpoint_every": 5_000,
    },
}


def _merge(base, extra):
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path):
    """Read a JSON config; a run manifest (with a "config" key) also works."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SystemExit(
            f"error: config {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        )
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    unknown = set(data) - set(DEFAULT_CONFIG)
    if unknown:
        raise SystemExit(f"error: config {path}: unknown keys {sorted(unknown)}")
    return _merge(DEFAULT_CONFIG, data)


def _apply_threads(threads):
    if threads is None:
        return
    import numba
    from threadpoolctl import threadpool_limits

    threadpool_limits(limits=int(threads))
    numba.set_num_threads(max(1, int(threads)))


def _resolve_train_config(args):
    config = load_config(args.config) if args.config else dict(DEFAULT_CONFIG)
    config = json.loads(json.dumps(config))  # deep copy, JSON-clean
    for key in ("problem", "exact_variant", "stages", "mollifier_eps",
                "network_seed", "threads"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            config[key] = val
    if args.weights is not None:
        config["weights"] = [float(v) for v in args.weights.split(",")]
    for key in ("n_space", "n_times", "n_u", "n_0", "n_c"):
        val = getattr(args, key)
        if val is not None:
            config["collocation"][key] = val
    if args.colloc_seed is not None:
        config["collocation"]["seed"] = args.colloc_seed
    for key in ("iterations", "learning_rate", "batch_size", "seed",
                "log_every", "checkpoint_every"):
        val = getattr(args, key)
        if val is not None:
            config["training"][key] = val
    return config


def _build_problem(config):
    problem = bench.get_problem(config["problem"], config.get("exact_variant"))
    if config.get("mollifier_eps") is not None and config["problem"] == "torus-heating":
        problem = bench._problem_torus_heating(float(config["mollifier_eps"]))
    surface_cfg = config.get("surface")
    if surface_cfg is not None:
        from .geometry import surface_from_config

        params = {k: v for k, v in surface_cfg.items() if k != "kind"}
        surface = surface_from_config(surface_cfg["kind"], params)
        if config["problem"] == "torus-heating" and "torus" not in surface.kind:
            raise SystemExit(
                "error: torus-heating's forcing is tied to a torus surface"
            )
        problem.surface = surface
        if problem.exact is not None:
            # the manufactured forcing is surface-specific
            problem.rhs = bench.manufactured_rhs(surface, problem.exact)
    stages = config.get("stages")
    if stages is not None:
        if problem.mode != "discrete":
            raise SystemExit("error: --stages only applies to discrete problems")
        if not 1 <= int(stages) <= MAX_STAGES:
            raise SystemExit(
                f"error: stage count {stages} unsupported; 64-bit precision "
                f"caps q at {MAX_STAGES} (order 2q is already negligible there)"
            )
        problem.q = int(stages)
    return problem


def cmd_train(args):
    config = _resolve_train_config(args)
    _apply_threads(config.get("threads"))
    problem = _build_problem(config)

    os.makedirs(args.out, exist_ok=True)
    started = time.time()
    manifest = {
        "meta": {
            "command": "train",
            "surfpinn_version": __version__,
            "numpy_version": np.__version__,
            "started_unix": started,
        },
        "config": config,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)

    colloc_kwargs = {
        k: v for k, v in config["collocation"].items() if v is not None
    }
    colloc = problem.collocation(**colloc_kwargs)
    if args.dump_colloc:
        colloc.dump_csv(os.path.join(args.out, "colloc.csv"))
    params = network.init_params(problem.layer_sizes(), config["network_seed"])
    setup = bench.training_setup(problem, colloc, config["weights"])
    tcfg = TrainingConfig(
        iterations=config["training"]["iterations"],
        learning_rate=config["training"]["learning_rate"],
        adam_betas=tuple(config["training"]["adam_betas"]),
        adam_eps=config["training"]["adam_eps"],
        batch_size=config["training"]["batch_size"],
        seed=config["training"]["seed"],
        log_every=config["training"]["log_every"],
        checkpoint_every=config["training"]["checkpoint_every"],
    )
    try:
        params, log = train(setup, params, tcfg, out_dir=args.out)
    except (NonFiniteLoss, NonFiniteUpdate, TrainingDiverged) as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 2
    log.to_csv(os.path.join(args.out, "log.csv"))
    manifest["meta"]["wall_seconds"] = time.time() - started
    with open(os.path.join(args.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    last = log.records[-1]
    print(
        f"done: {tcfg.iterations} iterations, final total {last.total:.6e} "
        f"({last.wall_seconds:.1f}s); artifacts in {args.out}"
    )
    return 0


def cmd_eval(args):
    if not os.path.exists(args.checkpoint):
        print(f"error: checkpoint {args.checkpoint} not found", file=sys.stderr)
        return 1
    _apply_threads(args.threads)
    params = network.load_checkpoint(args.checkpoint)
    problem = bench.get_problem(args.problem, args.exact_variant)
    if args.stages is not None:
        problem.q = int(args.stages)
    expected = problem.layer_sizes()
    if tuple(params.layer_sizes) != tuple(expected):
        print(
            f"error: checkpoint layers {params.layer_sizes} do not match "
            f"problem preset {expected}",
            file=sys.stderr,
        )
        return 1
    os.makedirs(args.out, exist_ok=True)
    times = [float(v) for v in args.times.split(",")]
    seed = args.eval_seed
    points = problem.collocation(n_c=args.n_c, seed=seed).eval_points

    report = bench.ErrorReport()
    have_exact = problem.exact is not None
    if not have_exact:
        print("warning: no exact solution; writing field dumps only", file=sys.stderr)
    for t in times:
        u_pred = bench.predict(params, problem, points, t)
        u_exact = problem.exact.u(points, t) if have_exact else None
        bench.dump_fields_csv(
            os.path.join(args.out, f"fields_t{t:g}.csv"), points, t, u_pred, u_exact
        )
        if have_exact:
            err = bench.relative_error(params, problem, points, t)
            report.append(t, err, len(points), seed)
            print(f"t={t:g}  Err={err:.6e}")
    if have_exact:
        report.to_csv(os.path.join(args.out, "errors.csv"))
    return 0


def cmd_verify(args):
    _apply_threads(args.threads)
    surface = {"sphere": Sphere(1.0), "torus": Torus(1.0, 0.25)}.get(args.surface)
    if surface is None:
        print(f"error: unknown surface {args.surface!r}", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    rows = bench.verify_theorem(
        surface, bench.random_trials(rng, args.trials), resolution=args.resolution
    )
    import csv

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["surface", "estimate", "trial", "lhs", "rhs", "C", "margin"])
        for i, row in enumerate(rows):
            writer.writerow(
                [
                    args.surface,
                    row.estimate,
                    i // 3,
                    repr(row.lhs),
                    repr(row.rhs),
                    repr(row.constant),
                    repr(row.margin),
                ]
            )
    worst = min((row.margin for row in rows), default=0.0)
    print(f"{len(rows)} inequality rows, worst margin {worst:.3e}")
    return 0 if worst >= -1e-8 else 1


def cmd_tableau(args):
    try:
        tableau = gauss_legendre_tableau(args.stages)
    except StageCountUnsupported as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    np.set_printoptions(precision=17, linewidth=200)
    print(f"Gauss-Legendre tableau, q = {tableau.q} (order {2 * tableau.q})")
    print("c =", tableau.c)
    print("b =", tableau.b)
    print("a =")
    for row in tableau.a:
        print("   ", row)
    residual = order_check(tableau, 2 * tableau.q)
    print(f"order-condition residual through order {2 * tableau.q}: {residual:.3e}")
    if args.save:
        save_tableau(tableau, args.save)
        print(f"saved to {args.save}")
    return 0


def cmd_fd_check(args):
    _apply_threads(args.threads)
    from .diffengine import fd_check
    from .residuals import ContinuousAssembler
    from .sampling import fibonacci_sphere

    try:
        depth, width = (int(v) for v in args.layers.split("x"))
    except ValueError:
        print("error: --layers expects DEPTHxWIDTH, e.g. 4x100", file=sys.stderr)
        return 1
    params = network.init_params((4, *([width] * depth), 1), args.seed)
    problem = bench.get_problem("sphere-continuous")
    rng = np.random.default_rng(args.seed)
    pts = fibonacci_sphere(args.points)
    ts = rng.uniform(0.0, problem.horizon, args.points)
    x0 = -fibonacci_sphere(3)
    batch = np.vstack(
        [
            np.column_stack([pts, ts / problem.horizon]),
            np.column_stack([x0, np.zeros(len(x0))]),
        ]
    )
    asm = ContinuousAssembler(
        len(pts),
        np.vstack([pts, x0]),
        problem.rhs(pts, ts),
        problem.u0(x0),
        problem.horizon,
    )
    worst = fd_check(params, batch, asm, step=args.step)
    print(f"fd-check {args.layers}: worst relative discrepancy {worst:.3e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="surfpinn",
        description="Mesh-free PINN solver for PDEs on closed surfaces",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network on a registry problem")
    p.add_argument("--problem", default=None)
    p.add_argument("--exact-variant", dest="exact_variant", default=None)
    p.add_argument("--config", default=None, help="JSON config or run manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="training seed")
    p.add_argument("--network-seed", dest="network_seed", type=int, default=None)
    p.add_argument("--colloc-seed", dest="colloc_seed", type=int, default=None)
    p.add_argument("--n-space", dest="n_space", type=int, default=None)
    p.add_argument("--n-times", dest="n_times", type=int, default=None)
    p.add_argument("--n-u", dest="n_u", type=int, default=None)
    p.add_argument("--n-0", dest="n_0", type=int, default=None)
    p.add_argument("--n-c", dest="n_c", type=int, default=None)
    p.add_argument("--stages", type=int, default=None)
    p.add_argument("--mollifier-eps", dest="mollifier_eps", type=float, default=None)
    p.add_argument("--weights", default=None, help="lambda_res,ng,hess,init")
    p.add_argument("--log-every", dest="log_every", type=int, default=None)
    p.add_argument(
        "--checkpoint-every", dest="checkpoint_every", type=int, default=None
    )
    p.add_argument("--threads", type=int, default=None)
    p.add_argument(
        "--dump-colloc", dest="dump_colloc", action="store_true",
        help="write the interior collocation set to colloc.csv for audit",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint at given times")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--exact-variant", dest="exact_variant", default=None)
    p.add_argument("--stages", type=int, default=None)
    p.add_argument("--times", required=True, help="comma-separated times")
    p.add_argument("--out", required=True)
    p.add_argument("--n-c", dest="n_c", type=int, default=10_000)
    p.add_argument("--eval-seed", dest="eval_seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="numerically verify the prior estimates")
    p.add_argument("--surface", default="sphere", choices=["sphere", "torus"])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--out", default="theorem.csv")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("tableau", help="print a Gauss-Legendre tableau")
    p.add_argument("stages", type=int)
    p.add_argument("--save", default=None)
    p.set_defaults(func=cmd_tableau)

    p = sub.add_parser("fd-check", help="finite-difference gradient audit")
    p.add_argument("--layers", default="4x100", help="DEPTHxWIDTH")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_fd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SurfPinnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
