"""Command-line entry point.

Exit codes: 0 on success, 2 on flag errors (argparse), 1 on runtime errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

GRADCHECK_TOL = 1e-5
ARCHS = ("linear", "relu", "maxout", "lift1d", "lift2d", "scaled", "std2d")


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0 <= v < 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1), got {v}")
    return v


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _common(p: argparse.ArgumentParser, epochs: int | None = 2000) -> None:
    p.add_argument("--seed", type=_seed, default=7, help="PRNG seed")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--no-plots", action="store_true", help="skip SVG figures")
    if epochs is not None:
        p.add_argument("--epochs", type=_positive_int, default=epochs, help="training epochs")
        p.add_argument("--batch-size", type=_positive_int, default=128, help="minibatch size")
        p.add_argument("--lr", type=float, default=0.1, help="learning rate")
        p.add_argument("--momentum", type=_unit_interval, default=0.9, help="momentum")
        p.add_argument("--weight-decay", type=float, default=1e-4, help="L2 weight decay")
        p.add_argument("--knots", type=_positive_int, default=20, help="knots per lifted coordinate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftlayers", description="Lifting layers toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit1d", help="1-D sine fit: Lift-Net vs Std-Net", formatter_class=_Formatter)
    _common(p)
    p.add_argument("--samples", type=_positive_int, default=50, help="training samples")

    p = sub.add_parser("fit2d", help="2-D fit of cos(x2 sin x1)", formatter_class=_Formatter)
    _common(p)
    p.add_argument("--grid", type=_positive_int, default=50, help="training grid points per axis")
    p.add_argument("--vertices", type=_positive_int, nargs="+", default=[4, 11],
                   help="vertex counts per axis for the direct fits")
    p.add_argument("--skip-networks", action="store_true", help="only run the direct fits")

    p = sub.add_parser("robust", help="robust regression with outliers", formatter_class=_Formatter)
    _common(p, epochs=None)
    p.add_argument("--samples", type=_positive_int, default=200, help="number of samples")
    p.add_argument("--fraction", type=_unit_interval, default=0.4, help="outlier fraction")
    p.add_argument("--tau", type=float, default=0.3, help="truncation of the linear loss")
    p.add_argument("--knots-x", type=_positive_int, default=50, help="input knots")
    p.add_argument("--knots-y", type=_positive_int, default=50, help="output knots")
    p.add_argument("--runs", type=_positive_int, default=4, help="direct non-convex runs")
    p.add_argument("--iters", type=_positive_int, default=3000, help="iterations per direct run")
    p.add_argument("--lr", type=float, default=0.01, help="learning rate of the direct runs")
    p.add_argument("--momentum", type=_unit_interval, default=0.9, help="momentum of the direct runs")

    p = sub.add_parser("gradcheck", help="finite-difference gradient check", formatter_class=_Formatter)
    p.add_argument("--arch", choices=ARCHS, default="lift2d", help="network to check")
    p.add_argument("--seed", type=_seed, default=0, help="PRNG seed")
    p.add_argument("--batch", type=_positive_int, default=8, help="batch size")
    p.add_argument("--h", type=float, default=1e-6, help="finite-difference step")

    p = sub.add_parser("meshinfo", help="grid triangulation summary and export", formatter_class=_Formatter)
    p.add_argument("--dim", type=_positive_int, default=2, help="dimension")
    p.add_argument("--vertices", type=_positive_int, default=11, help="vertices per axis (>= 2)")
    p.add_argument("--lower", type=float, default=0.0, help="lower bound per axis")
    p.add_argument("--upper", type=float, default=float(2 * np.pi), help="upper bound per axis")
    p.add_argument("--mesh", help="read a mesh file instead of generating a grid")
    p.add_argument("--export", help="write the mesh to this file")

    p = sub.add_parser("costmatrix", help="cost matrix and closed-form assignment for (x,y) data",
                       formatter_class=_Formatter)
    p.add_argument("--data", help="CSV with x,y columns (default: generated outlier data)")
    p.add_argument("--seed", type=_seed, default=7, help="seed for generated data")
    p.add_argument("--knots-x", type=_positive_int, default=50, help="input knots")
    p.add_argument("--knots-y", type=_positive_int, default=50, help="output knots")
    p.add_argument("--tau", type=float, default=0.3, help="truncation of the linear loss")
    p.add_argument("--out", default="runs", help="output directory")
    return parser


def _config(args) -> "ExperimentConfig":
    from .experiments import ExperimentConfig
    kw = dict(seed=args.seed, out_dir=args.out, plots=not args.no_plots)
    if args.command in ("fit1d", "fit2d"):
        kw.update(epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
                  momentum=args.momentum, weight_decay=args.weight_decay, knots=args.knots,
                  architecture=args.command)
        checkpoints = tuple(e for e in (25, 75, 200, 2000) if e <= args.epochs)
        kw["checkpoint_epochs"] = checkpoints if args.epochs in checkpoints else checkpoints + (args.epochs,)
    if args.command == "fit1d":
        kw["n_samples"] = args.samples
    elif args.command == "fit2d":
        kw.update(train_grid=args.grid, vertex_counts=tuple(args.vertices))
    elif args.command == "robust":
        kw.update(architecture="robust", robust_samples=args.samples, outlier_fraction=args.fraction,
                  truncation=args.tau, knots_x=args.knots_x, knots_y=args.knots_y,
                  nonconvex_runs=args.runs, nonconvex_iters=args.iters,
                  nonconvex_lr=args.lr, momentum=args.momentum)
    return ExperimentConfig(**kw)


def _cmd_fit1d(args) -> int:
    from .experiments import run_fit1d
    res = run_fit1d(args.config)
    print(f"closed-form objective {res.optimum:.6g}")
    print(f"lift  objective {res.lift.final[1]:.6g} (relative gap {res.relative_gap:.3g}) "
          f"rmse {res.lift.final[2]:.4g}")
    print(f"std   objective {res.std.final[1]:.6g} rmse {res.std.final[2]:.4g}")
    print(f"outputs in {args.out} (config {res.config.config_hash()})")
    return 0


def _cmd_fit2d(args) -> int:
    from .experiments import run_fit2d
    res = run_fit2d(args.config, train_networks=not args.skip_networks)
    for n, v in res.vector_rmse.items():
        print(f"vector lifting {n}x{n} vertices: rmse {v:.4g}")
    for s in (res.lift, res.std):
        if s is not None:
            note = f" (diverged at epoch {s.diverged_at})" if s.diverged_at else ""
            print(f"{s.name} net final rmse {s.final[2]:.4g}{note}")
    print(f"outputs in {args.out} (config {res.config.config_hash()})")
    return 0


def _cmd_robust(args) -> int:
    from .experiments import run_robust
    res = run_robust(args.config)
    print(f"lifted rmse {res.lifted_rmse:.4g}  absolute-loss rmse {res.absolute_rmse:.4g}")
    for i, r in enumerate(res.nonconvex, 1):
        print(f"direct run {i}: objective {r.objective:.6g} rmse {r.rmse:.4g}")
    print(f"outputs in {args.out} (config {res.config.config_hash()})")
    return 0


def gradcheck_network(arch: str, seed: int):
    """Seeded network and input batch for the ``gradcheck`` command."""
    from .core import KnotSequence
    from .experiments import TWO_PI, lift_net_2d, make_rng, sine_knots, std_net_2d
    from .nn import Dense, Lifting, Maxout, Network, ReLU
    rng = make_rng(seed)
    if arch == "linear":
        return Network([Dense(3, 2, rng=rng)], 3), rng.normal(size=(8, 3))
    if arch == "relu":
        return Network([Dense(3, 6, rng=rng), ReLU(), Dense(6, 1, rng=rng)], 3), rng.normal(size=(8, 3))
    if arch == "maxout":
        return Network([Dense(3, 6, rng=rng), Maxout(3), Dense(2, 1, rng=rng)], 3), rng.normal(size=(8, 3))
    if arch == "scaled":
        net = Network([Dense(2, 3, rng=rng), Lifting(KnotSequence.symmetric(2.0, 5), mode="scaled"),
                       Dense(12, 1, rng=rng)], 2)
        return net, rng.normal(size=(8, 2))
    if arch == "lift1d":
        net = Network([Lifting(sine_knots(20)), Dense(20, 1, bias=False, rng=rng)], 1)
        return net, rng.uniform(0.0, TWO_PI, size=(8, 1))
    if arch == "std2d":
        return std_net_2d(rng), rng.uniform(0.0, TWO_PI, size=(8, 2))
    return lift_net_2d(sine_knots(20), rng), rng.uniform(0.0, TWO_PI, size=(8, 2))


def _cmd_gradcheck(args) -> int:
    from .experiments import make_rng
    from .nn import gradient_check
    net, x = gradcheck_network(args.arch, args.seed)
    x = x[: args.batch] if args.batch <= len(x) else np.resize(x, (args.batch, x.shape[1]))
    rng = make_rng(args.seed, 1)
    y = rng.normal(size=(len(x), net.out_features))
    res = gradient_check(net, x, y, h=args.h, rng=rng)
    print(f"{args.arch}: max relative error {res.max_rel_error:.3e} "
          f"({'ok' if res.max_rel_error <= GRADCHECK_TOL else 'FAIL'}, tolerance {GRADCHECK_TOL:g})")
    return 0 if res.max_rel_error <= GRADCHECK_TOL else 1


def _cmd_meshinfo(args) -> int:
    from .core import KnotSequence
    from .simplex import Triangulation, grid_triangulation, mesh_diameter
    if args.mesh:
        tri = Triangulation.load(args.mesh)
    else:
        if args.vertices < 2:
            raise ValueError("need at least 2 vertices per axis")
        tri = grid_triangulation([KnotSequence.uniform(args.lower, args.upper, args.vertices)] * args.dim)
    print(f"dimension {tri.dim}")
    print(f"vertices {tri.n_vertices}")
    print(f"simplices {tri.n_simplices}")
    print(f"mesh diameter {mesh_diameter(tri):.6g}")
    if args.export:
        tri.save(args.export)
        print(f"written to {args.export}")
    return 0


def _cmd_costmatrix(args) -> int:
    from .core import KnotSequence
    from .experiments import Y_RANGE, gen_outlier_data
    from .losses import LossSpec
    from . import output_lifting as ol
    if args.data:
        xy = np.loadtxt(args.data, delimiter=",", ndmin=2, comments="#")
        x, y = xy[:, 0], xy[:, 1]
        kx = KnotSequence.uniform(float(x.min()), float(x.max()), args.knots_x)
        ky = KnotSequence.uniform(float(y.min()), float(y.max()), args.knots_y)
    else:
        d = gen_outlier_data(200, 0.4, args.seed)
        x, y = d.x, d.y
        kx = KnotSequence.uniform(0.0, 1.0, args.knots_x)
        ky = KnotSequence.uniform(*Y_RANGE, args.knots_y)
    cost = ol.build_cost_matrix(x, y, kx, ky, LossSpec("truncated_linear", args.tau))
    theta = ol.solve_closed_form(cost)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    tag = _hash(resolved)
    ol.write_matrix_csv(out / f"costmatrix_{tag}_cost.csv", cost)
    ol.write_matrix_csv(out / f"costmatrix_{tag}_theta.csv", theta)
    (out / f"costmatrix_{tag}_config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    print(f"cost matrix {cost.shape[0]}x{cost.shape[1]}, objective {theta.objective(cost):.6g}")
    print(f"outputs in {out} ({tag})")
    return 0


def _hash(d: dict) -> str:
    import hashlib
    d = {k: v for k, v in d.items() if k != "out"}
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


_COMMANDS = {
    "fit1d": ("experiments.run_fit1d", _cmd_fit1d),
    "fit2d": ("experiments.run_fit2d", _cmd_fit2d),
    "robust": ("experiments.run_robust", _cmd_robust),
    "gradcheck": ("nn.gradient_check", _cmd_gradcheck),
    "meshinfo": ("simplex.Triangulation", _cmd_meshinfo),
    "costmatrix": ("output_lifting.build_cost_matrix", _cmd_costmatrix),
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    operation, handler = _COMMANDS[args.command]
    if args.command in ("fit1d", "fit2d", "robust"):
        try:
            args.config = _config(args)
        except ValueError as exc:
            print(f"usage: liftlayers {args.command} [options] (see --help)\n"
                  f"liftlayers {args.command}: error: {exc}", file=sys.stderr)
            return 2
    try:
        return handler(args)
    except Exception as exc:  # report and map to exit code 1
        print(f"liftlayers {args.command}: {operation} failed: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
