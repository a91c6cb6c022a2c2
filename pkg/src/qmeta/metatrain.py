"""Meta-training of the LSTM optimizer by backpropagation through time.

Gradients flow from the meta-loss through every query ``y_t = f(theta_t)``
(using the exact QNN gradient) and back through the recurrent cell.  Training
only ever sees noiseless cost evaluations.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cost import QnnCost
from .lstm import META_LOSSES, LstmParams, _cell_backward, _cell_forward, loss_and_grad
from .problems import sample_instances

log = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = 1


@dataclass
class MetaTrainConfig:
    problem: str = "maxcut"
    n_train_instances: int = 10000
    n_range: tuple[int, int] | None = None
    p_steps: int | None = None
    max_epochs: int = 1000
    horizon: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    patience: int = 25
    validation_fraction: float = 0.1
    meta_loss: str = "observed_improvement"
    hidden_dim: int = 64
    init_scale: float = 0.08
    clip_norm: float | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.batch_size < 1 or self.max_epochs < 1 or self.n_train_instances < 2:
            raise ValueError("batch_size, max_epochs and n_train_instances must be positive")
        if self.learning_rate <= 0 or self.hidden_dim < 1 or self.patience < 0:
            raise ValueError("learning_rate and hidden_dim must be positive, patience >= 0")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")
        if self.meta_loss not in META_LOSSES:
            raise ValueError(f"unknown meta-loss {self.meta_loss!r}")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stop_epoch: int = 0
    wall_time: float = 0.0
    checkpoint: str | None = None


# ------------------------------------------------------------ forward/back

def _forward(p: LstmParams, costs, T: int, with_grad: bool):
    B, m = len(costs), p.num_params
    theta = np.zeros((B, m))
    h = np.zeros((B, p.hidden_dim))
    c = np.zeros((B, p.hidden_dim))
    thetas, ys, qgrads, caches, hs = [], np.zeros((B, T)), [], [], []
    for t in range(T):
        thetas.append(theta)
        g = np.zeros((B, m))
        for b, cost in enumerate(costs):
            if with_grad:
                ys[b, t], g[b] = cost.value_and_gradient(theta[b])
            else:
                ys[b, t] = cost.evaluate(theta[b])
        qgrads.append(g)
        if t < T - 1:
            x = np.concatenate([theta, ys[:, t:t + 1]], axis=1)
            h, c, cache = _cell_forward(p, x, h, c)
            caches.append(cache)
            hs.append(h)
            theta = h @ p.w_out.T + p.b_out
    return thetas, ys, qgrads, caches, hs


def batch_loss(p: LstmParams, costs, T: int, loss: str = "observed_improvement") -> float:
    """Mean meta-loss over ``costs`` (forward pass only)."""
    _, ys, *_ = _forward(p, costs, T, with_grad=False)
    return float(np.mean([loss_and_grad(loss, row)[0] for row in ys]))


def meta_gradient(p: LstmParams, costs, T: int, loss: str = "observed_improvement"):
    """Batch-mean meta-loss and its exact gradient with respect to ``p``."""
    B, m = len(costs), p.num_params
    thetas, ys, qgrads, caches, hs = _forward(p, costs, T, with_grad=True)
    losses, dys = zip(*(loss_and_grad(loss, row) for row in ys))
    dy = np.array(dys) / B
    grads = {k: np.zeros_like(v) for k, v in
             zip(("w_in", "w_rec", "bias", "w_out", "b_out"), p.arrays())}
    dtheta = dy[:, T - 1:T] * qgrads[T - 1]
    dh_next = np.zeros((B, p.hidden_dim))
    dc_next = np.zeros((B, p.hidden_dim))
    for t in range(T - 2, -1, -1):
        # theta_{t+1} = w_out h_t + b_out
        grads["w_out"] += dtheta.T @ hs[t]
        grads["b_out"] += dtheta.sum(axis=0)
        dh = dtheta @ p.w_out + dh_next
        dx, dh_next, dc_next = _cell_backward(p, caches[t], dh, dc_next, grads)
        dy_total = dy[:, t] + dx[:, m]
        dtheta = dy_total[:, None] * qgrads[t] + dx[:, :m]
    return float(np.mean(losses)), LstmParams(*(grads[k] for k in ("w_in", "w_rec", "bias", "w_out", "b_out")))


# -------------------------------------------------------------- optimizer

class Adam:
    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t}

    def load_state_dict(self, d: dict) -> None:
        self.m = np.array(d["m"], dtype=float)
        self.v = np.array(d["v"], dtype=float)
        self.t = int(d["t"])


# ------------------------------------------------------------- checkpoints

def save_checkpoint(path, params: LstmParams, metadata: dict, optimizer: Adam | None = None) -> None:
    d = {"schema_version": CHECKPOINT_SCHEMA, "m": params.num_params,
         "hidden_dim": params.hidden_dim, "weights": params.to_dict(), "training": metadata}
    if optimizer is not None:
        d["optimizer"] = optimizer.state_dict()
    Path(path).write_text(json.dumps(d) + "\n")


def load_checkpoint(path) -> tuple[LstmParams, dict]:
    d = json.loads(Path(path).read_text())
    if d.get("schema_version") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema_version {d.get('schema_version')!r}")
    params = LstmParams.from_dict(d["weights"])
    if params.num_params != d["m"] or params.hidden_dim != d["hidden_dim"]:
        raise ValueError("checkpoint header disagrees with weight shapes")
    return params, d


def write_training_log(path, report: TrainReport, first_epoch: int = 0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss", "seconds"])
        for k, (tr, va, s) in enumerate(zip(report.train_loss, report.val_loss, report.seconds)):
            w.writerow([first_epoch + k + 1, f"{tr:.17g}", f"{va:.17g}", f"{s:.6f}"])


# ---------------------------------------------------------------- training

def split_instances(instances, validation_fraction: float):
    """Disjoint train/validation split by position (ids are unique per sample)."""
    n_val = max(1, int(round(validation_fraction * len(instances))))
    return instances[n_val:], instances[:n_val]


def _live_init(cfg: MetaTrainConfig, m: int, rng: np.random.Generator, val_costs,
               max_draws: int = 50) -> LstmParams:
    """Draw initial weights, redrawing while no validation trajectory improves.

    Every trajectory starts at theta = 0, a stationary point of QAOA-type
    landscapes; if no early proposal beats y_1 the observed-improvement
    subgradient is identically zero and training cannot start.
    """
    params = LstmParams.init(m, cfg.hidden_dim, rng, cfg.init_scale)
    if cfg.meta_loss != "observed_improvement":
        return params
    for _ in range(max_draws - 1):
        if batch_loss(params, val_costs, cfg.horizon, cfg.meta_loss) < 0:
            break
        params = LstmParams.init(m, cfg.hidden_dim, rng, cfg.init_scale)
    return params


def train(cfg: MetaTrainConfig, instances=None, init: LstmParams | None = None,
          resume: dict | None = None, checkpoint_path=None):
    """Train an optimizer network; returns ``(best_params, report)``.

    ``instances`` defaults to ``cfg.n_train_instances`` fresh samples.  Early
    stopping watches the validation meta-loss and returns the best weights.
    """
    cfg.validate()
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    if instances is None:
        instances = sample_instances(cfg.problem, cfg.n_train_instances, cfg.seed, "train",
                                     n_range=cfg.n_range, p_steps=cfg.p_steps)
    train_set, val_set = split_instances(list(instances), cfg.validation_fraction)
    train_costs = [QnnCost(i) for i in train_set]
    val_costs = [QnnCost(i) for i in val_set]
    m = train_costs[0].num_params
    if any(c.num_params != m for c in train_costs + val_costs):
        raise ValueError("all instances must share one parameter count")

    params = init if init is not None else _live_init(cfg, m, rng, val_costs)
    adam = Adam(params.flatten().size, cfg.learning_rate, cfg.beta1, cfg.beta2)
    start_epoch = 0
    if resume is not None:
        start_epoch = int(resume.get("training", {}).get("epoch", 0))
        if "optimizer" in resume:
            adam.load_state_dict(resume["optimizer"])
        rng = np.random.default_rng([cfg.seed, start_epoch])

    report = TrainReport()
    best_val = batch_loss(params, val_costs, cfg.horizon, cfg.meta_loss)
    best_params = params.copy()
    since_best = 0
    flat = params.flatten()
    for epoch in range(cfg.max_epochs):
        e0 = time.perf_counter()
        order = rng.permutation(len(train_costs))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_costs[k] for k in order[start:start + cfg.batch_size]]
            loss, g = meta_gradient(params, batch, cfg.horizon, cfg.meta_loss)
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite meta-loss at epoch {start_epoch + epoch + 1}")
            gflat = g.flatten()
            if cfg.clip_norm is not None:
                gn = np.linalg.norm(gflat)
                if gn > cfg.clip_norm:
                    gflat *= cfg.clip_norm / gn
            flat = adam.step(flat, gflat)
            params = params.unflatten(flat)
            losses.append(loss * len(batch))
        train_loss = float(np.sum(losses) / len(train_costs))
        val_loss = batch_loss(params, val_costs, cfg.horizon, cfg.meta_loss)
        if not np.isfinite(val_loss):
            raise FloatingPointError(f"non-finite validation loss at epoch {start_epoch + epoch + 1}")
        report.train_loss.append(train_loss)
        report.val_loss.append(val_loss)
        report.seconds.append(time.perf_counter() - e0)
        log.info("epoch %d train %.6f val %.6f", start_epoch + epoch + 1, train_loss, val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            report.best_epoch = start_epoch + epoch + 1
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break
    report.stop_epoch = start_epoch + len(report.train_loss)
    report.wall_time = time.perf_counter() - t0
    if checkpoint_path is not None:
        meta = {"epoch": report.stop_epoch, "best_epoch": report.best_epoch,
                "meta_loss": best_val, "loss_name": cfg.meta_loss, "rng_seed": cfg.seed,
                "config": _jsonable(asdict(cfg))}
        save_checkpoint(checkpoint_path, best_params, meta, adam)
        report.checkpoint = str(checkpoint_path)
    return best_params, report


def _jsonable(d: dict) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}
