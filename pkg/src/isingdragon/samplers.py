"""Classical stand-ins for the annealer: forward and cyclic simulated annealing."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .ising import DimensionError, IsingProblem, energy, spin_state


def geometric_betas(beta_min: float, beta_max: float, n_steps: int) -> tuple[float, ...]:
    return tuple(float(b) for b in np.geomspace(beta_min, beta_max, n_steps))


@dataclass(frozen=True)
class AnnealConfig:
    """Sampler settings.

    ``cycle_depth`` is the fraction of the schedule, counted from the cold
    end, that each cyclic-annealing cycle re-enters.
    """

    sweeps: int = 20
    beta_schedule: tuple[float, ...] = field(default_factory=lambda: geometric_betas(0.1, 10.0, 50))
    restarts: int = 1
    rng_seed: int = 0
    cycle_depth: float = 0.3
    n_cycles: int = 5
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "beta_schedule", tuple(float(b) for b in self.beta_schedule))
        self.validate()

    def validate(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.beta_schedule:
            raise ValueError("beta_schedule is empty")
        b = np.asarray(self.beta_schedule)
        if np.any(b <= 0) or not np.all(np.isfinite(b)):
            raise ValueError("beta_schedule must be strictly positive")
        if np.any(np.diff(b) < 0):
            raise ValueError("beta_schedule must be non-decreasing")
        if not 0.0 < self.cycle_depth <= 1.0:
            raise ValueError("cycle_depth must lie in (0, 1]")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def thorough(cls, **kw) -> "AnnealConfig":
        """Settings used for oracle-agreement checks on toy problems."""
        base = dict(sweeps=20, beta_schedule=geometric_betas(0.1, 10.0, 50), restarts=4)
        base.update(kw)
        return cls(**base)

    @classmethod
    def fast(cls, **kw) -> "AnnealConfig":
        base = dict(sweeps=5, beta_schedule=geometric_betas(0.3, 10.0, 12), restarts=1,
                    n_cycles=2)
        base.update(kw)
        return cls(**base)

    def with_seed(self, seed: int) -> "AnnealConfig":
        return replace(self, rng_seed=int(seed))


@dataclass
class SampleBatch:
    states: list[np.ndarray]
    energies: list[float]
    origins: list[str]

    def __post_init__(self):
        if not (len(self.states) == len(self.energies) == len(self.origins)):
            raise ValueError("batch lists differ in length")
        if not self.states:
            raise ValueError("empty batch")

    def __len__(self):
        return len(self.states)

    def as_array(self) -> np.ndarray:
        return np.stack(self.states)

    def lowest(self) -> int:
        """Index of the lowest-energy member (first on ties)."""
        return int(np.argmin(self.energies))


def derive_seed(seed: int, index: int) -> int:
    """Counter-based child seed, stable across serial and parallel execution."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _run(problem: IsingProblem, init: np.ndarray, betas, sweeps, restarts, randomize, seed):
    indptr, indices, data = problem._csr
    best, best_e, _, _ = _kernels.metropolis_anneal(
        indptr, indices, data, problem.biases.copy(), problem.free_indices.astype(np.int64),
        init.astype(np.int8), np.asarray(betas, dtype=np.float64), int(sweeps),
        int(restarts), bool(randomize), int(seed) & 0x7FFFFFFF)
    return best, float(best_e)


def _initial(problem: IsingProblem) -> np.ndarray:
    s = np.ones(problem.n_spins, dtype=np.int8)
    if problem.frozen is not None:
        fixed = problem.frozen != 0
        s[fixed] = problem.frozen[fixed]
    return s


def forward_anneal(problem: IsingProblem, config: AnnealConfig) -> tuple[np.ndarray, float]:
    """Lowest-energy state seen over all restarts of a forward anneal from random states."""
    config.validate()
    best, e = _run(problem, _initial(problem), config.beta_schedule, config.sweeps,
                   config.restarts, True, derive_seed(config.rng_seed, 0))
    return best, energy(problem, best)


def cyclic_anneal(problem: IsingProblem, reference, config: AnnealConfig) -> tuple[np.ndarray, float]:
    """Repeated partial re-heat and re-cool starting at ``reference``.

    Each cycle starts from the best state found so far and runs the coldest
    ``cycle_depth`` fraction of the schedule.
    """
    config.validate()
    ref = spin_state(reference)
    if ref.shape[0] != problem.n_spins:
        raise DimensionError(f"reference length {ref.shape[0]} != {problem.n_spins}")
    ref = problem.check_state(ref)
    betas = config.beta_schedule
    depth = max(1, math.ceil(config.cycle_depth * len(betas)))
    tail = betas[len(betas) - depth:]
    best, best_e = ref.copy(), energy(problem, ref)
    for c in range(config.n_cycles):
        seed = derive_seed(config.rng_seed, 1_000_003 + c)
        s, e = _run(problem, best, tail, config.sweeps, 1, False, seed)
        if e < best_e:
            best, best_e = s, e
    return best, energy(problem, best)


def sample_batch(problem: IsingProblem, references: Sequence[np.ndarray], m: int,
                 config: AnnealConfig, labels: Sequence[str] | None = None) -> SampleBatch:
    """``m`` low-energy states: cyclic anneals from ``references`` in order, then forward anneals.

    Member ``k`` runs with seed ``derive_seed(config.rng_seed, k)`` so the batch
    is identical for any ``config.workers``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    references = list(references)
    if labels is None:
        labels = [f"ref{k}" for k in range(len(references))]
    n_cyc = min(m, len(references))

    def member(k):
        cfg = config.with_seed(derive_seed(config.rng_seed, k))
        if k < n_cyc:
            return cyclic_anneal(problem, references[k], cfg)
        return forward_anneal(problem, cfg)

    if config.workers > 1 and m > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(member, range(m)))
    else:
        results = [member(k) for k in range(m)]
    states = [s for s, _ in results]
    energies = [energy(problem, s) for s in states]
    origins = [str(labels[k]) if k < n_cyc else "random" for k in range(m)]
    return SampleBatch(states, energies, origins)


def metropolis_walk(problem: IsingProblem, state, n_flips: int, seed: int = 0):
    """Random single-spin flips with incremental energy tracking.

    Returns the final state and the incrementally tracked energy, for auditing
    the flip-delta path against full evaluation.
    """
    s = problem.check_state(state) if problem.frozen is None else spin_state(state)
    indptr, indices, data = problem._csr
    s, e = _kernels.random_flip_walk(indptr, indices, data, problem.biases.copy(), s,
                                     int(n_flips), int(seed))
    return s, float(e)
