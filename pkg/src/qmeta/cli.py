"""``qmeta`` command line: gen, train, bench, distances, concentration.

Exit status is 0 on success, 2 for configuration errors (bad flags, missing
files or directories) and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, oracle
from .metatrain import MetaTrainConfig, load_checkpoint

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("qmeta")


def _range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    try:
        lo, hi = (int(parts[0]), int(parts[-1]))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected N or LO:HI, got {text!r}") from exc
    if len(parts) > 2 or lo > hi:
        raise argparse.ArgumentTypeError(f"expected N or LO:HI, got {text!r}")
    return lo, hi


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", choices=("maxcut", "sk", "hubbard"), default="maxcut")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--p-steps", type=int, default=None, help="ansatz depth (class default if omitted)")
    p.add_argument("-v", "--verbose", action="store_true")


def _experiment(p: argparse.ArgumentParser) -> None:
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--instances", type=Path, default=None, help="directory of instance JSONs")
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--test-size", type=int, default=50)
    p.add_argument("--test-n", type=_range, default=None, help="test sizes, N or LO:HI")
    p.add_argument("--train-n", type=_range, default=None,
                   help="sizes used for the QAOA heuristic seed, N or LO:HI")
    p.add_argument("--oracle-restarts", type=int, default=50)
    p.add_argument("--optima", type=Path, default=None, help="optima CSV to reuse")
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qmeta", description="Meta-learned initialization for QAOA/VQE.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample problem instances to JSON")
    _common(g)
    g.add_argument("--count", type=int, default=50)
    g.add_argument("--split", choices=("train", "test"), default="test")
    g.add_argument("--n", dest="n_range", type=_range, default=None, help="sizes, N or LO:HI")

    t = sub.add_parser("train", help="meta-train the LSTM optimizer")
    _common(t)
    t.add_argument("--instances", type=Path, default=None, help="training instance directory")
    t.add_argument("--checkpoint", type=Path, default=None, help="resume from this checkpoint")
    t.add_argument("--train-instances", type=int, default=10000)
    t.add_argument("--n", dest="n_range", type=_range, default=None)
    t.add_argument("--epochs", type=int, default=1000)
    t.add_argument("--horizon", type=int, default=10)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--patience", type=int, default=25)
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--meta-loss", default="observed_improvement")
    t.add_argument("--clip-norm", type=float, default=None)

    b = sub.add_parser("bench", help="optimizer comparison curves")
    _common(b)
    _experiment(b)
    b.add_argument("--roster", default=",".join(bench.METHODS),
                   help="comma-separated subset of " + ",".join(bench.METHODS))

    d = sub.add_parser("distances", help="seed-to-optimum distance samples")
    _common(d)
    _experiment(d)

    c = sub.add_parser("concentration", help="spread of the cost at fixed angles across instances")
    _common(c)
    c.add_argument("--sizes", default="6,8,10", help="comma-separated qubit counts")
    c.add_argument("--per-size", type=int, default=20)
    c.add_argument("--theta", default=None, help="comma-separated angles (zeros if omitted)")
    return ap


def _experiment_config(a, roster) -> bench.ExperimentConfig:
    cfg = bench.ExperimentConfig(problem=a.problem, noise_var=a.noise_var, roster=roster,
                                 budget=a.budget, test_size=a.test_size, seed=a.seed,
                                 out_dir=str(a.out), test_n_range=a.test_n, p_steps=a.p_steps,
                                 oracle_restarts=a.oracle_restarts, train_n_range=a.train_n,
                                 threads=a.threads)
    cfg.validate()
    return cfg


def _params(a, required: bool):
    if a.checkpoint is None:
        if required:
            raise bench.ConfigError("--checkpoint is required")
        return None
    if not a.checkpoint.exists():
        raise bench.ConfigError(f"checkpoint {a.checkpoint} not found")
    return load_checkpoint(a.checkpoint)[0]


def _optima(a):
    if a.optima is None:
        return None
    if not a.optima.exists():
        raise bench.ConfigError(f"optima table {a.optima} not found")
    return {iid: r for (iid, _), r in oracle.read_optima_table(a.optima).items()}


def run(a) -> None:
    if a.command == "gen":
        paths = bench.cmd_gen(a.problem, a.count, a.seed, a.out, a.split, a.n_range, a.p_steps)
        print(f"wrote {len(paths)} instances to {a.out}")
    elif a.command == "train":
        cfg = MetaTrainConfig(problem=a.problem, n_train_instances=a.train_instances, n_range=a.n_range,
                              p_steps=a.p_steps, max_epochs=a.epochs, horizon=a.horizon,
                              batch_size=a.batch_size, learning_rate=a.lr, patience=a.patience,
                              meta_loss=a.meta_loss, hidden_dim=a.hidden, clip_norm=a.clip_norm,
                              seed=a.seed)
        cfg.validate()
        _, rep = bench.cmd_train(cfg, a.out, a.instances, a.checkpoint)
        print(f"best epoch {rep.best_epoch}, stopped at {rep.stop_epoch}; checkpoint {rep.checkpoint}")
    elif a.command == "bench":
        roster = tuple(r.strip() for r in a.roster.split(",") if r.strip())
        cfg = _experiment_config(a, roster)
        params = _params(a, any(r in bench.LSTM_METHODS for r in roster))
        insts = bench.load_test_set(cfg, a.instances)
        rep = bench.cmd_bench(cfg, params, insts, _optima(a))
        for m in roster:
            c = rep.curves[m]
            print(f"{m:8s} final mean rel. error {c['mean'][-1]:.4g} +- {c['ci'][-1]:.2g}"
                  f"  median {c['median'][-1]:.4g}")
    elif a.command == "distances":
        cfg = _experiment_config(a, ("LSTM",))
        params = _params(a, True)
        insts = bench.load_test_set(cfg, a.instances)
        d = bench.cmd_distances(cfg, params, insts, _optima(a))
        for k, v in d.items():
            print(f"{k:5s} mean distance {v.mean():.4g} over {len(v)} instances")
    elif a.command == "concentration":
        sizes = [int(s) for s in a.sizes.split(",") if s.strip()]
        theta = None if a.theta is None else np.array([float(x) for x in a.theta.split(",")])
        rows = bench.cmd_concentration(a.problem, sizes, a.per_size, a.seed, theta, a.p_steps, a.out)
        print(json.dumps(rows, indent=1))


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(a)
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
