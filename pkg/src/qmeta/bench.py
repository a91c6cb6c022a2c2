"""Experiment drivers: instance generation, training, benchmark curves,
seed-distance samples and cost-concentration reports.

Every driver is a deterministic function of its config and seeds; CSV files
use a fixed column order and 17 significant digits.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, oracle
from .cost import QnnCost, relative_error
from .lstm import LstmParams, RnnState, rnn_step
from .metatrain import MetaTrainConfig, load_checkpoint, train, write_training_log
from .problems import (ProblemInstance, load_instance, sample_instances, save_instance)

METHODS = ("LSTM", "LSTM+NM", "Rnd+NM", "Heur+NM", "GPR")
LSTM_METHODS = ("LSTM", "LSTM+NM")

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class ExperimentConfig:
    problem: str = "maxcut"
    noise_var: float = 0.0
    roster: tuple[str, ...] = METHODS
    budget: int = 100
    test_size: int = 50
    seed: int = 0
    out_dir: str | None = None
    test_n_range: tuple[int, int] | None = None
    p_steps: int | None = None
    lstm_queries: int = 10
    random_k: int = 10
    oracle_restarts: int = 50
    # QAOA heuristic seed: mean canonical optimum over a slice of the training distribution
    heuristic_instances: int = 20
    heuristic_restarts: int = 20
    train_n_range: tuple[int, int] | None = None
    train_seed: int = 0
    vqe_ramp: float = 1.0
    vqe_floor: str = "exact"  # "exact" | "landscape"
    periodic_distance: bool = True
    threads: int | None = None

    def validate(self) -> None:
        if not self.roster:
            raise ConfigError("optimizer roster is empty")
        bad = [r for r in self.roster if r not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if self.noise_var < 0:
            raise ConfigError("noise variance must be >= 0")
        if self.test_size < 1:
            raise ConfigError("test_size must be positive")
        seed_queries = max(self.lstm_queries, self.random_k)
        if any(r.endswith("+NM") for r in self.roster) and self.budget < seed_queries + 1:
            raise ConfigError(f"budget must be >= {seed_queries + 1} when a +NM method is present")
        if self.lstm_queries < 1 or self.random_k < 1:
            raise ConfigError("lstm_queries and random_k must be positive")
        if self.vqe_floor not in ("exact", "landscape"):
            raise ConfigError("vqe_floor must be 'exact' or 'landscape'")


@dataclass
class BenchmarkReport:
    curves: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    final: dict[str, np.ndarray] = field(default_factory=dict)  # per-instance rel. error at last query
    traces: dict[tuple[str, str], baselines.OptimizerTrace] = field(default_factory=dict)
    optima: dict[str, oracle.OracleResult] = field(default_factory=dict)
    distances: dict[str, np.ndarray] = field(default_factory=dict)


def worker_count(cfg_threads: int | None = None) -> int:
    if cfg_threads is not None:
        return max(1, int(cfg_threads))
    env = os.environ.get("QMETA_THREADS")
    return max(1, int(env)) if env else 1


def _ordered_map(fn, tasks, workers: int):
    """``map`` whose output order is the task order, regardless of completion."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


# ---------------------------------------------------------------- inputs

def load_test_set(cfg: ExperimentConfig, instances_dir=None) -> list[ProblemInstance]:
    if instances_dir is not None:
        return read_instance_dir(instances_dir)
    return sample_instances(cfg.problem, cfg.test_size, cfg.seed, "test",
                            n_range=cfg.test_n_range, p_steps=cfg.p_steps)


def read_instance_dir(path) -> list[ProblemInstance]:
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"instance directory {path} does not exist")
    files = sorted(path.glob("*.json"))
    files = [f for f in files if f.name != "manifest.json"]
    if not files:
        raise ConfigError(f"no instance files in {path}")
    return [load_instance(f) for f in files]


def cmd_gen(problem: str, count: int, seed: int, out_dir, split: str = "test",
            n_range=None, p_steps: int | None = None) -> list[Path]:
    """Write ``count`` instance files plus ``manifest.json``."""
    if count < 1:
        raise ConfigError("instance count must be positive")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create {out}: {exc}") from exc
    insts = sample_instances(problem, count, seed, split, n_range=n_range, p_steps=p_steps)
    paths = []
    for inst in insts:
        p = out / f"{inst.instance_id}.json"
        save_instance(inst, p)
        paths.append(p)
    manifest = {"problem": problem, "split": split, "count": count, "seed": seed,
                "n_range": list(n_range) if n_range is not None else None,
                "instances": [{"instance_id": i.instance_id, "rng_seed": i.rng_seed} for i in insts]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return paths


def cmd_train(cfg: MetaTrainConfig, out_dir, instances_dir=None, resume_from=None):
    """Train (or resume) and write ``checkpoint.json`` and ``training_log.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instances = read_instance_dir(instances_dir) if instances_dir is not None else None
    init, resume = None, None
    if resume_from is not None:
        if not Path(resume_from).exists():
            raise ConfigError(f"checkpoint {resume_from} not found")
        init, resume = load_checkpoint(resume_from)
    ckpt = out / "checkpoint.json"
    params, report = train(cfg, instances=instances, init=init, resume=resume, checkpoint_path=ckpt)
    first = int(resume["training"]["epoch"]) if resume else 0
    write_training_log(out / "training_log.csv", report, first)
    return params, report


# ---------------------------------------------------------------- oracles

def instance_optimum(inst: ProblemInstance, restarts: int, seed: int, index: int) -> oracle.OracleResult:
    cost = QnnCost(inst)
    box = baselines.seeding_box(inst.kind) if inst.kind == "hubbard" else baselines.QAOA_BOX
    return oracle.basin_hopping(cost, restarts, _rng(seed, 7919, index), box=box,
                                periods=oracle.parameter_periods(inst))


def _optimum_task(args):
    inst, restarts, seed, index = args
    return instance_optimum(inst, restarts, seed, index)


def compute_optima(instances, restarts: int, seed: int, workers: int = 1) -> list[oracle.OracleResult]:
    tasks = [(inst, restarts, seed, i) for i, inst in enumerate(instances)]
    return _ordered_map(_optimum_task, tasks, workers)


def training_optima_mean(cfg: ExperimentConfig, workers: int = 1) -> np.ndarray:
    """QAOA heuristic seed: mean canonical optimum over training-distribution instances."""
    train_insts = sample_instances(cfg.problem, cfg.heuristic_instances, cfg.train_seed, "train",
                                   n_range=cfg.train_n_range, p_steps=cfg.p_steps)
    res = compute_optima(train_insts, cfg.heuristic_restarts, cfg.train_seed, workers)
    return baselines.heuristic_seed(cfg.problem, training_optima=[r.theta_star for r in res])


def heuristic_for(cfg: ExperimentConfig, p_steps: int, workers: int = 1) -> np.ndarray:
    if cfg.problem == "hubbard":
        return baselines.heuristic_seed("hubbard", p_steps=p_steps, ramp=cfg.vqe_ramp)
    return training_optima_mean(cfg, workers)


# ---------------------------------------------------------------- methods

def lstm_queries(params: LstmParams, f, trace: baselines.OptimizerTrace, k: int, truth=None) -> np.ndarray:
    """Let the network spend ``k`` queries from ``theta = 0``; return its incumbent."""
    s = RnnState.initial(params)
    for t in range(k):
        y = trace.query(f, s.theta, truth)
        if t < k - 1:
            s, _ = rnn_step(params, s, y)
    start = len(trace) - k
    ys = trace.ys[start:]
    return trace.thetas[start + int(np.argmin(ys))].copy()


def _nm_tail(f, seed, budget: int, trace: baselines.OptimizerTrace, truth) -> None:
    """Nelder-Mead on the remaining budget.  A budget too small for the full
    initial simplex is spent on its leading vertices, which is what the
    simplex method would have queried first anyway."""
    seed = np.asarray(seed, dtype=float)
    if budget >= seed.size + 2:
        baselines.nelder_mead(f, seed, budget, trace=trace, truth=truth)
        return
    trace.budget = len(trace) + budget
    for k in range(-1, budget - 1):
        x = seed.copy()
        if k >= 0:
            x[k] += 0.1
        trace.query(f, x, truth)


def run_method(method: str, cost: QnnCost, cfg: ExperimentConfig, rng: np.random.Generator,
               params: LstmParams | None = None, heuristic=None) -> baselines.OptimizerTrace:
    m = cost.num_params
    var = cfg.noise_var
    f = (lambda th: cost.evaluate_noisy(th, var, rng)) if var > 0 else cost.evaluate
    truth = cost.evaluate
    box = baselines.seeding_box(cost.kind)
    tr = baselines.OptimizerTrace(method, cfg.budget)
    if method in LSTM_METHODS:
        if params is None:
            raise ConfigError(f"{method} needs a trained checkpoint")
        k = min(cfg.lstm_queries, cfg.budget)
        seed = lstm_queries(params, f, tr, k, truth)
        if method == "LSTM+NM":
            _nm_tail(f, seed, cfg.budget - k, tr, truth)
    elif method == "Rnd+NM":
        seed = baselines.random_seed(f, m, cfg.random_k, rng, box, trace=tr, truth=truth)
        _nm_tail(f, seed, cfg.budget - cfg.random_k, tr, truth)
    elif method == "Heur+NM":
        if heuristic is None:
            raise ConfigError("Heur+NM needs a heuristic seed")
        _nm_tail(f, heuristic, cfg.budget, tr, truth)
    elif method == "GPR":
        baselines.gp_bayesopt(f, m, cfg.budget, rng, bounds=box, trace=tr, truth=truth)
    else:
        raise ConfigError(f"unknown method {method!r}")
    tr.method = method
    return tr


def _bench_task(args):
    inst, index, method, cfg, params, heuristic = args
    rng = _rng(cfg.seed, index, METHODS.index(method))
    return run_method(method, QnnCost(inst), cfg, rng, params, heuristic)


def relative_error_curve(tr: baselines.OptimizerTrace, floor: float, length: int | None = None) -> np.ndarray:
    """Best-so-far noiseless relative error per query index, padded to ``length``
    with its final value when the optimizer stopped early."""
    best = np.minimum.accumulate(np.asarray(tr.values, dtype=float))
    rel = np.array([relative_error(v, floor) for v in best])
    if length is not None and len(rel) < length:
        rel = np.concatenate([rel, np.full(length - len(rel), rel[-1])])
    return rel


def aggregate(curves: np.ndarray) -> dict[str, np.ndarray]:
    """Mean, 95% CI half-width (1.96 s / sqrt(N)) and median across instances (axis 0)."""
    N = curves.shape[0]
    mean = curves.mean(axis=0)
    sd = curves.std(axis=0, ddof=1) if N > 1 else np.zeros(curves.shape[1])
    return {"mean": mean, "ci": 1.96 * sd / math.sqrt(N), "median": np.median(curves, axis=0), "n": N}


def cmd_bench(cfg: ExperimentConfig, params: LstmParams | None = None, instances=None,
              optima=None, heuristic=None) -> BenchmarkReport:
    """Run every roster method on every test instance and aggregate relative-error curves.

    ``optima`` maps instance_id to an :class:`oracle.OracleResult` floor; missing
    entries are computed.  Writes ``curves.csv``, ``traces.csv`` and
    ``optima.csv`` into ``cfg.out_dir`` when set.
    """
    cfg.validate()
    if any(r in LSTM_METHODS for r in cfg.roster) and params is None:
        raise ConfigError("roster contains LSTM methods but no checkpoint was given")
    workers = worker_count(cfg.threads)
    instances = load_test_set(cfg) if instances is None else list(instances)
    report = BenchmarkReport()
    report.optima = dict(optima or {})
    todo = [(i, inst) for i, inst in enumerate(instances) if inst.instance_id not in report.optima]
    if todo:
        if cfg.problem == "hubbard" and cfg.vqe_floor == "exact":
            found = [oracle.exact_squashed_floor(inst) for _, inst in todo]
        else:
            found = compute_optima([inst for _, inst in todo], cfg.oracle_restarts, cfg.seed, workers)
        for (_, inst), res in zip(todo, found):
            report.optima[inst.instance_id] = res
    if heuristic is None and "Heur+NM" in cfg.roster:
        heuristic = heuristic_for(cfg, instances[0].p_steps, workers)

    tasks = [(inst, i, method, cfg, params, heuristic)
             for i, inst in enumerate(instances) for method in cfg.roster]
    traces = _ordered_map(_bench_task, tasks, workers)
    for (inst, _, method, *_), tr in zip(tasks, traces):
        report.traces[(inst.instance_id, method)] = tr
    _tighten_floors(report, instances, cfg.roster)

    for method in cfg.roster:
        length = max(len(report.traces[(i.instance_id, method)]) for i in instances)
        curves = np.array([relative_error_curve(report.traces[(i.instance_id, method)],
                                                report.optima[i.instance_id].fbar_star, length)
                           for i in instances])
        report.curves[method] = aggregate(curves)
        report.final[method] = curves[:, -1]
    if cfg.out_dir is not None:
        write_bench_outputs(cfg.out_dir, report, instances, cfg.roster)
    return report


def _tighten_floors(report: BenchmarkReport, instances, roster) -> None:
    """A landscape search can miss the optimum that some benchmarked method
    found; the floor then becomes the best recorded value (tagged ``+trace``)."""
    for inst in instances:
        res = report.optima[inst.instance_id]
        if res.method == "exact_diag":
            continue
        best_v, best_x = res.fbar_star, None
        for method in roster:
            tr = report.traces[(inst.instance_id, method)]
            k = int(np.argmin(tr.values))
            if tr.values[k] < best_v:
                best_v, best_x = tr.values[k], tr.thetas[k]
        if best_x is not None:
            log.warning("%s: oracle value %.10g beaten by a trace (%.10g); tightening the floor",
                        inst.instance_id, res.fbar_star, best_v)
            report.optima[inst.instance_id] = oracle.OracleResult(
                np.array(best_x, dtype=float), float(best_v), res.method + "+trace", res.restarts, inst.instance_id)


def write_bench_outputs(out_dir, report: BenchmarkReport, instances, roster) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "query", "mean_rel_err", "ci95_half_width", "median_rel_err", "n_instances"])
        for method in roster:
            c = report.curves[method]
            for q in range(len(c["mean"])):
                w.writerow([method, q + 1, _fmt(c["mean"][q]), _fmt(c["ci"][q]), _fmt(c["median"][q]), c["n"]])
    with open(out / "traces.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id", "method", "query", "y", "fbar", "best_so_far", "rel_err"])
        for inst in instances:
            floor = report.optima[inst.instance_id].fbar_star
            for method in roster:
                tr = report.traces[(inst.instance_id, method)]
                best = np.minimum.accumulate(np.asarray(tr.values))
                for q, (y, v, b) in enumerate(zip(tr.ys, tr.values, best)):
                    w.writerow([inst.instance_id, method, q + 1, _fmt(y), _fmt(v), _fmt(b),
                                _fmt(relative_error(b, floor))])
    oracle.write_optima_table(out / "optima.csv", [report.optima[i.instance_id] for i in instances])


# -------------------------------------------------------------- distances

def cmd_distances(cfg: ExperimentConfig, params: LstmParams, instances=None, optima=None,
                  heuristic=None) -> dict[str, np.ndarray]:
    """Distance of the LSTM-after-k-queries incumbent and of the heuristic seed
    to each instance's landscape optimum.  Writes ``distances.csv`` when
    ``cfg.out_dir`` is set."""
    cfg.validate()
    if params is None:
        raise ConfigError("distances need a trained checkpoint")
    workers = worker_count(cfg.threads)
    instances = load_test_set(cfg) if instances is None else list(instances)
    optima = dict(optima or {})
    todo = [inst for inst in instances
            if inst.instance_id not in optima or not optima[inst.instance_id].method.startswith("basin_hopping")]
    if todo:
        for inst, res in zip(todo, compute_optima(todo, cfg.oracle_restarts, cfg.seed, workers)):
            optima[inst.instance_id] = res
    if heuristic is None:
        heuristic = heuristic_for(cfg, instances[0].p_steps, workers)
    rows = []
    out = {"LSTM": [], "Heur": []}
    for i, inst in enumerate(instances):
        cost = QnnCost(inst)
        rng = _rng(cfg.seed, i, METHODS.index("LSTM"))
        f = (lambda th: cost.evaluate_noisy(th, cfg.noise_var, rng)) if cfg.noise_var > 0 else cost.evaluate
        tr = baselines.OptimizerTrace("LSTM", cfg.lstm_queries)
        seed = lstm_queries(params, f, tr, cfg.lstm_queries)
        periods = oracle.parameter_periods(inst) if cfg.periodic_distance else None
        star = optima[inst.instance_id].theta_star
        for label, theta in (("LSTM", seed), ("Heur", heuristic)):
            d = oracle.param_distance(theta, star, periods, sign_symmetric=cfg.periodic_distance)
            out[label].append(d)
            rows.append((inst.instance_id, label, d))
    if cfg.out_dir is not None:
        path = Path(cfg.out_dir)
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "distances.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "method", "distance"])
            for iid, label, d in rows:
                w.writerow([iid, label, _fmt(d)])
    return {k: np.array(v) for k, v in out.items()}


# ---------------------------------------------------------- concentration

def cmd_concentration(problem: str, sizes, per_size: int, seed: int, theta=None,
                      p_steps: int | None = None, out_dir=None) -> list[dict]:
    """Mean and (population) variance of the squashed cost at a fixed ``theta``
    across ``per_size`` random instances of every size."""
    if per_size < 1:
        raise ConfigError("per_size must be positive")
    if problem == "hubbard":
        raise ConfigError("concentration sweeps are defined for the QAOA classes")
    rows = []
    for n in sizes:
        insts = sample_instances(problem, per_size, seed + int(n), "test", n_range=(n, n), p_steps=p_steps)
        th = np.zeros(insts[0].num_params) if theta is None else np.asarray(theta, dtype=float)
        vals = np.array([QnnCost(i).evaluate(th) for i in insts])
        rows.append({"n": int(n), "mean": float(vals.mean()), "variance": float(vals.var()),
                     "samples": per_size})
    if out_dir is not None:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        with open(path / "concentration.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "mean", "variance", "samples"])
            for r in rows:
                w.writerow([r["n"], _fmt(r["mean"]), _fmt(r["variance"]), r["samples"]])
    return rows
