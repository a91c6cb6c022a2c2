#!/usr/bin/env python3
"""Fermi-Hubbard VQE on a 2x2 plaquette: encoding, initial state, exact floor, ramp seed."""

# %%
import numpy as np

from qmeta import baselines, oracle, problems as pg, sim
from qmeta.cost import QnnCost
from qmeta.problems import HubbardInstance, ProblemInstance

hb = HubbardInstance(2, 2, t=1.0, U=2.0)
inst = ProblemInstance(hb, p_steps=3, instance_id="plaquette")
th, tv, v = pg.hubbard_parts(hb)
print("qubits", hb.num_qubits, "| terms: hop_h", len(th), "hop_v", len(tv), "interaction", len(v))

# %% the initial state fills the lowest hopping orbitals for both spins
s = pg.initial_state(inst)
N = hb.nsites
print("particles", sim.expectation(s, pg.number_operator(hb.num_qubits)))
print("spin up", sim.expectation(s, pg.number_operator(hb.num_qubits, range(N))))
print("kinetic energy", sim.expectation(s, th + tv), "| orbital energies", np.linalg.eigvalsh(pg.hopping_matrix(hb)))

# %% exact ground energies across interaction strengths
for U in (0.0, 1.0, 2.0, 4.0, 8.0):
    print(f"U={U:4.1f}  E0={oracle.exact_ground_energy(HubbardInstance(2, 2, 1.0, U)):+.6f}")

# %% squashed floor versus what the ansatz reaches
cost = QnnCost(inst)
floor = oracle.exact_squashed_floor(inst).fbar_star
best = oracle.basin_hopping(cost, 10, np.random.default_rng(0), box=baselines.VQE_BOX)
print(f"floor {floor:.6f}  ansatz optimum {best.fbar_star:.6f}  gap {best.fbar_star - floor:.2e}")

# %% the adiabatic-style ramp as a starting point for Nelder-Mead
seed = baselines.heuristic_seed("hubbard", p_steps=3, ramp=1.0)
print("ramp seed", seed.reshape(3, 3))
tr = baselines.nelder_mead(cost.evaluate, seed, 150)
print(f"ramp f = {cost.evaluate(seed):.5f} -> NM after {len(tr)} queries {tr.best()[1]:.5f}")
