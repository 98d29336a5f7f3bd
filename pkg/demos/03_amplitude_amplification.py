"""
Amplifying the wrong-class component of an annealed state
=========================================================

Simulate the transverse-field anneal of a tiny network exactly, tune the anneal
time so that the wrong-class weight is small, and compare Grover-style
amplification with repeated direct sampling.
"""

import numpy as np

from isingdragon.coherent import (AnnealSchedule, anneal_evolve, amplitude_amplify, decompose,
                                  direct_sampling_runs, expectation_update_inputs, toy_network,
                                  tune_anneal_time)
from isingdragon.network import build_system_hamiltonian

params, x, y = toy_network(0)
problem = build_system_hamiltonian(params, x)
print("%d spins, ground state decodes to class %d" % (problem.n_spins, y))

for t_f in (0.5, 2.0, 8.0):
    psi = anneal_evolve(problem, AnnealSchedule.linear(t_f, 500))
    print("t_f=%4.1f  wrong-class weight %.4f" % (t_f, decompose(psi, params, y).p_wrong))

for p in (0.04, 0.01):
    t_f = tune_anneal_time(problem, params, y, p)
    state, queries, res = amplitude_amplify(problem, AnnealSchedule.linear(t_f, 1000), params, y)
    print("p=%.2f: k=%d, %d anneal runs, success %.3f; direct sampling needs %d runs"
          % (res.p_initial, res.k, queries, res.success_prob, direct_sampling_runs(res.p_initial)))

# the amplified state feeds the update rule through exact expectation values
h, o, corr = expectation_update_inputs(decompose(state, params, y).psi_wrong, params.n_hidden)
print("hidden <Z>:", np.round(h, 3))
print("output <Z>:", np.round(o, 3))
