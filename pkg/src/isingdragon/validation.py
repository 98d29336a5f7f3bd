"""Brute-force validation suite: annealer versus exact ground states on toy networks."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ising import brute_force_ground_state, energy
from .network import NetworkParams, build_system_hamiltonian
from .samplers import AnnealConfig, derive_seed, forward_anneal


def naive_energy(problem, state) -> float:
    """Double loop over the dense coupling matrix; deliberately independent of ``energy``."""
    n = problem.n_spins
    Jd = np.zeros((n, n))
    for (i, j), w in zip(problem.edges, problem.weights):
        Jd[i, j] += w
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += Jd[i, j] * float(state[i]) * float(state[j])
        total += problem.biases[i] * float(state[i])
    return total


def random_toy_network(rng: np.random.Generator, max_hidden: int = 12,
                       max_output: int = 12) -> tuple[NetworkParams, np.ndarray]:
    """Random small network plus input image; outputs use 2 to 4 classes."""
    n_classes = int(rng.integers(2, 5))
    redundancy = int(rng.integers(1, max_output // n_classes + 1))
    n_hidden = int(rng.integers(2, max_hidden + 1))
    n_input = int(rng.integers(2, 9))
    n_out = n_classes * redundancy
    params = NetworkParams(rng.normal(0, 1, (n_hidden, n_input)),
                           rng.normal(0, 1, (n_hidden, n_out)),
                           rng.normal(0, 0.5, n_hidden), rng.normal(0, 0.5, n_out),
                           n_classes, redundancy)
    return params, rng.random(n_input)


@dataclass
class OracleReport:
    n_problems: int
    exact_hits: int
    max_energy_rel_error: float
    n_energy_checks: int
    seconds: float

    @property
    def hit_rate(self) -> float:
        return self.exact_hits / self.n_problems

    def summary(self) -> str:
        return (f"ground_state_hits={self.exact_hits}/{self.n_problems} "
                f"energy_checks={self.n_energy_checks} "
                f"max_rel_error={self.max_energy_rel_error:.3e} seconds={self.seconds:.1f}")


def oracle_suite(n_problems: int = 100, seed: int = 0, n_energy_checks: int = 1000,
                 config: AnnealConfig | None = None, tol: float = 1e-9) -> OracleReport:
    config = config or AnnealConfig.thorough()
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    hits = 0
    problems = []
    for k in range(n_problems):
        params, x = random_toy_network(rng)
        problem = build_system_hamiltonian(params, x)
        problems.append(problem)
        _, e_exact = brute_force_ground_state(problem)
        _, e_found = forward_anneal(problem, config.with_seed(derive_seed(seed, k)))
        hits += e_found <= e_exact + tol * max(1.0, abs(e_exact))
    worst = 0.0
    for k in range(n_energy_checks):
        problem = problems[k % len(problems)]
        s = rng.choice(np.array([-1, 1], dtype=np.int8), problem.n_spins)
        ref = naive_energy(problem, s)
        got = energy(problem, s)
        worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    return OracleReport(n_problems, hits, worst, n_energy_checks, time.perf_counter() - t0)
