"""Acceptance checks, one test per criterion; each records a PASS/FAIL line."""

import time

import numpy as np
import pytest

from qmeta import bench, dense, metatrain as mt, oracle, problems as pg
from qmeta.cost import QnnCost
from qmeta.lstm import LstmParams, observed_improvement_loss
from qmeta.problems import GraphInstance, HubbardInstance, ProblemInstance

from conftest import central_difference


def test_c01_simulator_matches_dense_unitaries(criterion):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 5))
        pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
        keep = rng.random(len(pairs)) < 0.6
        edges = tuple(e for e, on in zip(pairs, keep) if on) or (pairs[0],)
        P = int(rng.integers(1, 4))
        inst = ProblemInstance(GraphInstance(n, edges), P)
        theta = rng.uniform(-np.pi, np.pi, 2 * P)
        psi = QnnCost(inst).state(theta)
        H = dense.pauli_sum_matrix(pg.build_cost_hamiltonian(inst), n)
        ref = dense.qaoa_unitary(H, n, theta[0::2], theta[1::2]) @ pg.initial_state(inst)
        worst = max(worst, float(np.max(np.abs(psi - ref))))
    dt = time.perf_counter() - t0
    criterion(1, "statevector vs dense QAOA", worst <= 1e-10 and dt < 10,
              f"max amp err {worst:.2e}, {dt:.1f}s")


def test_c02_closed_forms_at_zero(criterion):
    mc = (pg.sample_instances("maxcut", 200, 0, "train") + pg.sample_instances("maxcut", 50, 0, "test")
          + pg.sample_instances("maxcut", 50, 1, "train", n_range=(4, 8)))
    sk = pg.sample_instances("sk", 200, 0, "train") + pg.sample_instances("sk", 50, 0, "test")
    e_mc = max(abs(QnnCost(i).evaluate(np.zeros(i.num_params)) - 0.5) for i in mc)
    e_sk = max(abs(QnnCost(i).evaluate(np.zeros(i.num_params))) for i in sk)
    criterion(2, "MaxCut f(0)=1/2, SK f(0)=0", e_mc <= 1e-12 and e_sk <= 1e-12,
              f"maxcut {e_mc:.1e} over {len(mc)}, sk {e_sk:.1e} over {len(sk)}")


def test_c03_adjoint_gradients(criterion):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    insts = {"maxcut": pg.sample_maxcut((6, 6), 0, p_steps=2), "sk": pg.sample_sk((6, 6), 0, p_steps=3),
             "hubbard": ProblemInstance(HubbardInstance(2, 2, 1.0, 2.0), 5)}
    worst = {}
    for kind, inst in insts.items():
        c = QnnCost(inst)
        errs = []
        for _ in range(20):
            th = rng.uniform(-np.pi, np.pi, c.num_params) if kind != "hubbard" else rng.uniform(-1, 1, c.num_params)
            g, fd = c.gradient(th), central_difference(c.evaluate, th, 1e-5)
            errs.append(np.linalg.norm(g - fd) / np.linalg.norm(fd))
        worst[kind] = max(errs)
    dt = time.perf_counter() - t0
    criterion(3, "adjoint gradient vs central differences", max(worst.values()) <= 1e-5 and dt < 120,
              ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {dt:.1f}s")


def test_c04_meta_gradient(criterion):
    t0 = time.perf_counter()
    costs = [QnnCost(pg.sample_maxcut((5, 6), 4, p_steps=1))]
    T, loss = 3, "observed_improvement"
    # an init whose trajectory never improves has an identically zero OI gradient
    p = next(q for s in range(200)
             if mt.batch_loss(q := LstmParams.init(2, 4, np.random.default_rng(s), scale=0.6), costs, T) < 0)
    _, g = mt.meta_gradient(p, costs, T, loss)
    flat = p.flatten()
    fd = np.zeros_like(flat)
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = 1e-4
        fd[k] = (mt.batch_loss(p.unflatten(flat + e), costs, T) - mt.batch_loss(p.unflatten(flat - e), costs, T)) / 2e-4
    ana = g.flatten()
    big = np.abs(fd) > 1e-6
    rel = np.abs(ana[big] - fd[big]) / np.abs(fd[big])
    dt = time.perf_counter() - t0
    criterion(4, "BPTT meta-gradient vs finite differences", big.sum() > 0 and rel.max() <= 1e-3 and dt < 60,
              f"max rel err {rel.max():.1e} over {big.sum()}/{flat.size} coords, {dt:.1f}s")


def test_c05_telescoping(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(10_000):
        ys = rng.normal(size=int(rng.integers(1, 25))) * rng.choice([1e-3, 1, 1e3])
        worst = max(worst, abs(observed_improvement_loss(ys) - (ys.min() - ys[0])))
    criterion(5, "OI loss telescopes to min y - y_1", worst <= 1e-12, f"max dev {worst:.1e}")


def test_c06_hubbard_anchor(criterion):
    hb = HubbardInstance(2, 2, 1.0, 0.0)
    e0 = oracle.exact_ground_energy(hb)
    s = pg.initial_state(ProblemInstance(hb, 5))
    th, tv, _ = pg.hubbard_parts(hb)
    T = (th + tv).to_sparse(hb.num_qubits)
    var = np.vdot(T @ s, T @ s).real - np.vdot(s, T @ s).real ** 2
    criterion(6, "2x2 free-fermion energy and kinetic eigenstate",
              abs(e0 + 4.0) <= 1e-9 and var <= 1e-9, f"E0 {e0:.12f}, var {var:.1e}")


@pytest.fixture(scope="module")
def generalization():
    cfg = mt.MetaTrainConfig(problem="maxcut", n_train_instances=500, n_range=(5, 6), horizon=10,
                             max_epochs=100, learning_rate=3e-3, seed=0)
    t0 = time.perf_counter()
    params, rep = mt.train(cfg)
    test = pg.sample_instances("maxcut", 20, 12345, "test", n_range=(8, 8))
    ecfg = bench.ExperimentConfig(problem="maxcut", roster=("LSTM", "LSTM+NM", "Rnd+NM"), budget=100,
                                  seed=1, oracle_restarts=50, train_n_range=(5, 6), heuristic_instances=20)
    report = bench.cmd_bench(ecfg, params, test)
    dists = bench.cmd_distances(ecfg, params, test, report.optima)
    return rep, report, dists, time.perf_counter() - t0


@pytest.mark.slow
def test_c07_generalizes_to_larger_graphs(criterion, generalization):
    rep, report, _, dt = generalization
    final = {m: report.final[m] for m in report.final}
    lstm10 = report.curves["LSTM"]["mean"][9]
    rnd10 = report.curves["Rnd+NM"]["mean"][9]
    med_lstm_nm = float(np.median(final["LSTM+NM"]))
    med_rnd_nm = float(np.median(final["Rnd+NM"]))
    ok = rep.stop_epoch <= 100 and lstm10 <= rnd10 and med_lstm_nm <= med_rnd_nm and dt < 1800
    criterion(7, "train n in [5,6], test n=8", ok,
              f"mean@10 LSTM {lstm10:.4f} vs best-of-10 {rnd10:.4f}; median@100 LSTM+NM {med_lstm_nm:.2e} "
              f"vs Rnd+NM {med_rnd_nm:.2e}; {rep.stop_epoch} epochs, {dt:.0f}s")


@pytest.mark.slow
def test_c08_lstm_seed_closer_than_heuristic(criterion, generalization):
    _, _, d, _ = generalization
    criterion(8, "distance to optimum: LSTM-10 vs heuristic", d["LSTM"].mean() < d["Heur"].mean(),
              f"LSTM {d['LSTM'].mean():.4f} vs heuristic {d['Heur'].mean():.4f}")


def test_c09_noise_variance(criterion):
    c = QnnCost(pg.sample_maxcut((8, 8), 2))
    th = np.array([0.4, -0.3, 0.2, 0.6])
    rng = np.random.default_rng(9)
    draws = np.array([c.evaluate_noisy(th, 0.05, rng) for _ in range(100_000)])
    v = draws.var(ddof=1)
    criterion(9, "noisy readout variance", 0.045 <= v <= 0.055, f"sample variance {v:.5f}")


def test_c10_bench_is_deterministic(criterion, tmp_path):
    insts = pg.sample_instances("maxcut", 4, 77, "test", n_range=(6, 6))
    params = LstmParams.init(4, 16, np.random.default_rng(0), scale=0.3)
    outs = []
    for k in range(2):
        cfg = bench.ExperimentConfig(problem="maxcut", noise_var=0.05, budget=25, seed=10, out_dir=str(tmp_path / f"r{k}"),
                                     oracle_restarts=5, heuristic_instances=4, heuristic_restarts=3,
                                     train_n_range=(6, 6))
        bench.cmd_bench(cfg, params, insts)
        bench.cmd_distances(cfg, params, insts)
        outs.append(tmp_path / f"r{k}")
    names = ("curves.csv", "traces.csv", "optima.csv", "distances.csv")
    same = [(outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names]
    criterion(10, "benchmark CSVs byte-identical across runs", all(same),
              ", ".join(f"{n} {'same' if s else 'DIFFERENT'}" for n, s in zip(names, same)))
