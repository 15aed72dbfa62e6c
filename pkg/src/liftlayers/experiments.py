"""Seeded synthetic experiments: 1-D sine fit, 2-D fit and robust regression.

Randomness comes from :func:`make_rng`, a Philox4x64-10 counter-based
generator keyed by ``seed + 2**64 * stream``, so each consumer (data, each
network initialization, batch shuffling, ...) draws from its own stream and
results depend only on the config.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import output_lifting as ol
from .core import KnotSequence
from .losses import LossSpec, batch_loss
from .nn import SGD, Dense, Lifting, Network, ReLU, l2_penalty, train_epoch
from .simplex import fit_spline_nd, grid_triangulation, lift_nd_many
from .spline_fit import Spline1D, fit_spline_1d

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# stream ids for make_rng
DATA, INIT_LIFT, INIT_STD, SHUFFLE_LIFT, SHUFFLE_STD, INIT_NONCONVEX = range(6)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(key=seed + (stream << 64)))


@dataclass
class ExperimentConfig:
    seed: int = 7
    epochs: int = 2000
    batch_size: int = 128
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    architecture: str = "all"
    knots: int = 20
    out_dir: str | None = None
    checkpoint_epochs: tuple = (25, 75, 200, 2000)
    plots: bool = True
    # fit1d
    n_samples: int = 50
    eval_points: int = 1000
    # fit2d
    train_grid: int = 50
    vertex_counts: tuple = (4, 11)
    # robust
    robust_samples: int = 200
    outlier_fraction: float = 0.4
    truncation: float = 0.3
    knots_x: int = 50
    knots_y: int = 50
    nonconvex_runs: int = 4
    init_std: float = 0.1
    nonconvex_lr: float = 0.01
    nonconvex_iters: int = 3000

    def __post_init__(self):
        self.checkpoint_epochs = tuple(int(e) for e in self.checkpoint_epochs)
        self.vertex_counts = tuple(int(v) for v in self.vertex_counts)
        self.validate()

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0 <= self.outlier_fraction < 1:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        if self.truncation <= 0:
            raise ValueError("truncation must be positive")
        if min(self.knots, self.knots_x, self.knots_y) < 2:
            raise ValueError("knot counts must be >= 2")
        if self.n_samples < 2 or self.train_grid < 2:
            raise ValueError("need at least 2 samples")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("plots")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)


@dataclass
class MetricSeries:
    name: str
    records: list = field(default_factory=list)
    diverged_at: int | None = None

    def append(self, epoch: int, objective: float, rmse: float) -> None:
        if self.records and epoch <= self.records[-1][0]:
            raise ValueError("epochs must increase")
        self.records.append((int(epoch), float(objective), float(rmse)))

    @property
    def epochs(self) -> np.ndarray:
        return np.array([r[0] for r in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r[1] for r in self.records])

    @property
    def rmses(self) -> np.ndarray:
        return np.array([r[2] for r in self.records])

    @property
    def final(self) -> tuple:
        return self.records[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "objective", "rmse"])
            for e, obj, rmse in self.records:
                w.writerow([e, repr(obj), repr(rmse)])

    @classmethod
    def from_csv(cls, path, name: str | None = None) -> "MetricSeries":
        s = cls(name or Path(path).stem)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                s.append(int(row["epoch"]), float(row["objective"]), float(row["rmse"]))
        return s


# -- data generators --------------------------------------------------------

def gen_sine_data(n: int, seed: int):
    """``n`` samples with ``x ~ U[0, 2pi]`` and ``y = sin(x)``."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    x = make_rng(seed, DATA).uniform(0.0, TWO_PI, size=n)
    return x, np.sin(x)


def target_2d(x1, x2):
    return np.cos(x2 * np.sin(x1))


def gen_2d_data(grid_n: int):
    """Uniform ``grid_n x grid_n`` grid on ``[0, 2pi]^2`` with targets ``cos(x2 sin x1)``."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    g = np.linspace(0.0, TWO_PI, grid_n)
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([x1.ravel(), x2.ravel()])
    return pts, target_2d(pts[:, 0], pts[:, 1])


Y_RANGE = (-0.5, 0.5)


def robust_ground_truth(x):
    """Ground-truth curve of the robust regression data on ``[0, 1]``."""
    return 0.25 * np.sin(TWO_PI * np.asarray(x, dtype=float))


@dataclass
class OutlierData:
    x: np.ndarray
    y: np.ndarray
    outliers: np.ndarray
    ground_truth: Callable = robust_ground_truth
    y_range: tuple = Y_RANGE


def gen_outlier_data(n: int, outlier_fraction: float, seed: int) -> OutlierData:
    """Samples of the ground-truth curve with ``floor(fraction * n)`` replaced by uniform noise."""
    if not 0 <= outlier_fraction < 1:
        raise ValueError("outlier_fraction must lie in [0, 1)")
    rng = make_rng(seed, DATA)
    x = rng.uniform(0.0, 1.0, size=n)
    y = robust_ground_truth(x)
    k = int(np.floor(outlier_fraction * n))
    idx = rng.permutation(n)[:k]
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    y[idx] = rng.uniform(*Y_RANGE, size=k)
    return OutlierData(x, y, mask)


# -- networks ----------------------------------------------------------------

def lift_net_1d(knots: KnotSequence, rng: np.random.Generator) -> Network:
    """``<theta, lift(x)>`` with no bias."""
    return Network([Lifting(knots), Dense(len(knots), 1, bias=False, rng=rng)], 1)


def std_net_1d(rng: np.random.Generator, hidden: int = 9) -> Network:
    return Network([Dense(1, hidden, rng=rng), ReLU(), Dense(hidden, 1, rng=rng)], 1)


def lift_net_2d(knots: KnotSequence, rng: np.random.Generator, hidden: int = 20) -> Network:
    width = 2 * len(knots)
    return Network([Lifting(knots), Dense(width, hidden, rng=rng), ReLU(),
                    Dense(hidden, 1, rng=rng)], 2)


def std_net_2d(rng: np.random.Generator, wide: int = 40, hidden: int = 20) -> Network:
    return Network([Dense(2, wide, rng=rng), Dense(wide, hidden, rng=rng), ReLU(),
                    Dense(hidden, 1, rng=rng)], 2)


def _rmse(pred, truth) -> float:
    d = np.asarray(pred, dtype=float).ravel() - np.asarray(truth, dtype=float).ravel()
    return float(np.sqrt(np.mean(d * d)))


def training_objective(net: Network, x, y, weight_decay: float) -> float:
    """Mean squared error plus the weight-decay penalty SGD minimizes."""
    mse, _ = batch_loss(LossSpec("squared"), net.predict(x), np.reshape(y, (-1, 1)))
    return mse + l2_penalty(net, weight_decay)


def _train(net, x, y, cfg: ExperimentConfig, shuffle_stream: int, name: str,
           x_eval, y_eval, on_epoch=None) -> MetricSeries:
    opt = SGD(net, cfg.learning_rate, cfg.momentum, cfg.weight_decay)
    rng = make_rng(cfg.seed, shuffle_stream)
    series = MetricSeries(name)
    loss = LossSpec("squared")
    x = np.reshape(x, (len(x), -1))
    y = np.reshape(y, (-1, 1))
    series.append(0, training_objective(net, x, y, cfg.weight_decay), _rmse(net.predict(x_eval), y_eval))
    for epoch in range(1, cfg.epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            train_epoch(net, x, y, loss, opt, cfg.batch_size, rng)
            rmse = _rmse(net.predict(x_eval), y_eval)
            objective = training_objective(net, x, y, cfg.weight_decay)
        series.append(epoch, objective, rmse)
        if not np.isfinite(objective):
            # nothing sensible to record past this point
            series.diverged_at = epoch
            log.warning("%s network diverged at epoch %d", name, epoch)
            break
        if on_epoch is not None:
            on_epoch(epoch, net)
    return series


# -- runners -------------------------------------------------------------------

@dataclass
class Fit1DResult:
    config: ExperimentConfig
    x: np.ndarray
    y: np.ndarray
    lift: MetricSeries
    std: MetricSeries
    optimum: float
    closed_form: Spline1D
    lift_net: Network
    std_net: Network
    checkpoints: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def relative_gap(self) -> float:
        return (self.lift.final[1] - self.optimum) / abs(self.optimum)


def sine_knots(count: int) -> KnotSequence:
    return KnotSequence.uniform(0.0, TWO_PI, count)


def run_fit1d(cfg: ExperimentConfig) -> Fit1DResult:
    """Train Lift-Net and Std-Net on sine samples and compare with the convex optimum.

    The reference optimum minimizes the same weight-decayed objective in
    closed form: ``(A^T A + N wd / 2 I) theta = A^T y``.
    """
    t0 = time.perf_counter()
    x, y = gen_sine_data(cfg.n_samples, cfg.seed)
    knots = sine_knots(cfg.knots)
    x_eval = np.linspace(0.0, TWO_PI, cfg.eval_points)
    y_eval = np.sin(x_eval)
    closed = fit_spline_1d(x, y, knots, ridge=0.5 * len(x) * cfg.weight_decay)
    ref = lift_net_1d(knots, make_rng(cfg.seed, INIT_LIFT))
    ref.layers[1].params["weight"][0] = closed.theta
    optimum = training_objective(ref, x, y, cfg.weight_decay)

    checkpoints: dict = {}

    def keep(arch):
        def hook(epoch, net):
            if epoch in cfg.checkpoint_epochs:
                from .nn import checkpoint_text
                checkpoints[(arch, epoch)] = checkpoint_text(net)
        return hook

    lift_net = lift_net_1d(knots, make_rng(cfg.seed, INIT_LIFT))
    std_net = std_net_1d(make_rng(cfg.seed, INIT_STD))
    lift = _train(lift_net, x, y, cfg, SHUFFLE_LIFT, "lift", x_eval, y_eval, keep("lift"))
    std = _train(std_net, x, y, cfg, SHUFFLE_STD, "std", x_eval, y_eval, keep("std"))
    res = Fit1DResult(cfg, x, y, lift, std, optimum, closed, lift_net, std_net, checkpoints,
                      time.perf_counter() - t0)
    if cfg.out_dir:
        _export_fit1d(res)
    return res


@dataclass
class Fit2DResult:
    config: ExperimentConfig
    points: np.ndarray
    targets: np.ndarray
    lift: MetricSeries | None
    std: MetricSeries | None
    vector_rmse: dict
    vector_theta: dict
    seconds: float = 0.0
    vector_seconds: float = 0.0


def run_fit2d(cfg: ExperimentConfig, train_networks: bool = True) -> Fit2DResult:
    """Coordinate-wise Lift-Net vs Std-Net by SGD, plus direct vector-valued lifting fits.

    All RMSEs are measured against the target function on the training grid.
    """
    t0 = time.perf_counter()
    pts, y = gen_2d_data(cfg.train_grid)
    vec_rmse, vec_theta = {}, {}
    for n in cfg.vertex_counts:
        tri = grid_triangulation([KnotSequence.uniform(0.0, TWO_PI, n)] * 2)
        theta = fit_spline_nd(pts, y, tri)
        vec_theta[n] = theta
        vec_rmse[n] = _rmse(lift_nd_many(pts, tri) @ theta[0], y)
    t_vec = time.perf_counter() - t0
    lift = std = None
    if train_networks:
        knots = sine_knots(cfg.knots)
        lift = _train(lift_net_2d(knots, make_rng(cfg.seed, INIT_LIFT)), pts, y, cfg,
                      SHUFFLE_LIFT, "lift", pts, y)
        std = _train(std_net_2d(make_rng(cfg.seed, INIT_STD)), pts, y, cfg,
                     SHUFFLE_STD, "std", pts, y)
    res = Fit2DResult(cfg, pts, y, lift, std, vec_rmse, vec_theta,
                      time.perf_counter() - t0, t_vec)
    if cfg.out_dir:
        _export_fit2d(res)
    return res


@dataclass
class NonconvexRun:
    objective: float
    rmse: float
    theta: np.ndarray


@dataclass
class RobustResult:
    config: ExperimentConfig
    data: OutlierData
    cost: ol.CostMatrix
    assignment: ol.AssignmentMatrix
    lifted_rmse: float
    absolute_spline: Spline1D
    absolute_rmse: float
    nonconvex: list
    lifted_objective: float
    seconds: float = 0.0

    @property
    def nonconvex_spread(self) -> float:
        objs = [r.objective for r in self.nonconvex]
        return max(objs) - min(objs) if objs else 0.0


def truncated_objective(pred, y, tau: float) -> float:
    return float(np.mean(LossSpec("truncated_linear", tau)(pred, y)))


def run_robust(cfg: ExperimentConfig) -> RobustResult:
    """Robust regression with outliers: lifted convex solution vs L1 spline vs direct descent.

    The direct runs minimize the mean truncated-linear loss of the spline
    ``<theta, lift_x(x)>`` by full-batch gradient descent with momentum,
    each from its own zero-mean Gaussian initialization.
    """
    t0 = time.perf_counter()
    data = gen_outlier_data(cfg.robust_samples, cfg.outlier_fraction, cfg.seed)
    kx = KnotSequence.uniform(0.0, 1.0, cfg.knots_x)
    ky = KnotSequence.uniform(*data.y_range, cfg.knots_y)
    loss = LossSpec("truncated_linear", cfg.truncation)
    cost = ol.build_cost_matrix(data.x, data.y, kx, ky, loss)
    theta = ol.solve_closed_form(cost)
    x_eval = np.linspace(0.0, 1.0, cfg.eval_points)
    truth = data.ground_truth(x_eval)
    lifted_rmse = _rmse(ol.lifted_predict(theta, kx, ky, x_eval), truth)
    lifted_obj = truncated_objective(ol.lifted_predict(theta, kx, ky, data.x), data.y, cfg.truncation)

    l1 = fit_spline_1d(data.x, data.y, kx, loss="absolute")
    l1_rmse = _rmse(l1(x_eval), truth)

    runs = []
    init_rng = make_rng(cfg.seed, INIT_NONCONVEX)
    xb = data.x[:, None]
    yb = data.y[:, None]
    for _ in range(cfg.nonconvex_runs):
        net = Network([Lifting(kx), Dense(len(kx), 1, bias=False)], 1)
        net.layers[1].params["weight"][0] = init_rng.normal(0.0, cfg.init_std, size=len(kx))
        opt = SGD(net, cfg.nonconvex_lr, cfg.momentum, weight_decay=0.0)
        for _ in range(cfg.nonconvex_iters):
            net.loss_and_backward(xb, yb, loss)
            opt.step()
        w = net.layers[1].params["weight"][0].copy()
        runs.append(NonconvexRun(truncated_objective(net.predict(xb), yb, cfg.truncation),
                                 _rmse(net.predict(x_eval), truth), w))
    res = RobustResult(cfg, data, cost, theta, lifted_rmse, l1, l1_rmse, runs, lifted_obj,
                       time.perf_counter() - t0)
    if cfg.out_dir:
        _export_robust(res)
    return res


# -- export ----------------------------------------------------------------------

def _prefix(cfg: ExperimentConfig, name: str) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / f"{name}_{cfg.config_hash()}"


def write_config_sidecar(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def write_summary(path, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        for k, v in rows:
            w.writerow([k, repr(v) if isinstance(v, float) else v])


def _export_fit1d(res: Fit1DResult) -> None:
    p = _prefix(res.config, "fit1d")
    write_config_sidecar(res.config, f"{p}_config.json")
    res.lift.to_csv(f"{p}_lift.csv")
    res.std.to_csv(f"{p}_std.csv")
    for (arch, epoch), text in sorted(res.checkpoints.items()):
        Path(f"{p}_{arch}_e{epoch}.ckpt").write_text(text)
    write_summary(f"{p}_summary.csv", [
        ("closed_form_objective", res.optimum),
        ("lift_final_objective", res.lift.final[1]),
        ("lift_relative_gap", res.relative_gap),
        ("lift_final_rmse", res.lift.final[2]),
        ("std_final_objective", res.std.final[1]),
        ("std_final_rmse", res.std.final[2]),
        ("std_diverged_at", res.std.diverged_at or ""),
        ("seconds", res.seconds),
    ])
    if res.config.plots:
        from . import plotting
        plotting.plot_fit1d(res, f"{p}_fits.svg")
        plotting.plot_series([res.lift, res.std], f"{p}_curves.svg")


def _export_fit2d(res: Fit2DResult) -> None:
    p = _prefix(res.config, "fit2d")
    write_config_sidecar(res.config, f"{p}_config.json")
    rows = [(f"vector_rmse_{n}x{n}", v) for n, v in res.vector_rmse.items()]
    for s in (res.lift, res.std):
        if s is not None:
            s.to_csv(f"{p}_{s.name}.csv")
            rows.append((f"{s.name}_final_rmse", s.final[2]))
            rows.append((f"{s.name}_diverged_at", s.diverged_at or ""))
    rows.append(("seconds", res.seconds))
    write_summary(f"{p}_summary.csv", rows)
    if res.config.plots:
        from . import plotting
        plotting.plot_fit2d(res, f"{p}_vector.svg")
        series = [s for s in (res.lift, res.std) if s is not None]
        if series:
            plotting.plot_series(series, f"{p}_curves.svg")


def _export_robust(res: RobustResult) -> None:
    p = _prefix(res.config, "robust")
    write_config_sidecar(res.config, f"{p}_config.json")
    ol.write_matrix_csv(f"{p}_cost.csv", res.cost)
    ol.write_matrix_csv(f"{p}_theta.csv", res.assignment)
    rows = [("lifted_rmse", res.lifted_rmse), ("lifted_objective", res.lifted_objective),
            ("absolute_rmse", res.absolute_rmse)]
    for i, r in enumerate(res.nonconvex, 1):
        rows += [(f"nonconvex{i}_objective", r.objective), (f"nonconvex{i}_rmse", r.rmse)]
    rows += [("nonconvex_spread", res.nonconvex_spread), ("seconds", res.seconds)]
    write_summary(f"{p}_summary.csv", rows)
    if res.config.plots:
        from . import plotting
        plotting.plot_robust(res, f"{p}_fits.svg")
