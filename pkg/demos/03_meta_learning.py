#!/usr/bin/env python3
"""Train a small LSTM optimizer on small graphs and compare it with baselines on larger ones.

Runs in a few minutes on one core.  Scale ``N_TRAIN`` and ``EPOCHS`` up for sharper curves.
"""

# %%
import logging
import time

import numpy as np

from qmeta import bench, metatrain as mt, problems as pg

logging.basicConfig(level=logging.INFO, format="%(message)s")
N_TRAIN, EPOCHS = 300, 30

# %% meta-training on noiseless simulations of graphs with 5-6 vertices
cfg = mt.MetaTrainConfig(problem="maxcut", n_train_instances=N_TRAIN, n_range=(5, 6),
                         max_epochs=EPOCHS, learning_rate=3e-3, seed=0)
t0 = time.perf_counter()
params, report = mt.train(cfg)
print(f"trained {report.stop_epoch} epochs in {time.perf_counter() - t0:.0f}s, "
      f"best validation OI loss {min(report.val_loss):.4f}")

# %% benchmark on 8-vertex graphs, with readout noise of variance 0.05
test = pg.sample_instances("maxcut", 8, 99, "test", n_range=(8, 8))
ecfg = bench.ExperimentConfig(problem="maxcut", noise_var=0.05, budget=60, seed=1, oracle_restarts=20,
                              train_n_range=(5, 6), heuristic_instances=10, heuristic_restarts=10)
rep = bench.cmd_bench(ecfg, params, test)

# %% mean relative error after q queries
qs = [1, 5, 10, 20, 40, 60]
print("method    " + "".join(f"q={q:<8d}" for q in qs))
for m, c in rep.curves.items():
    vals = [c["mean"][min(q, len(c["mean"])) - 1] for q in qs]
    print(f"{m:9s} " + "".join(f"{v:<10.4f}" for v in vals))

# %% how close do the seeds land to the optimum?
d = bench.cmd_distances(ecfg, params, test, rep.optima)
print({k: round(float(v.mean()), 4) for k, v in d.items()})
