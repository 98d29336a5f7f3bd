"""Sampler-based training: equilibrium propagation and dragon (multi-state) updates."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ising import DimensionError
from .network import (NetworkParams, _check_class, _pixels, build_nudge_hamiltonian,
                      build_system_hamiltonian, decode, infer, init_params, nudge_state,
                      wrong_basin_references)
from .samplers import AnnealConfig, SampleBatch, derive_seed, forward_anneal, sample_batch

log = logging.getLogger(__name__)

__all__ = ["LearningRates", "EpochRecord", "TrainRun", "eqprop_update", "dragon_update",
           "expectation_update", "train_epoch", "train_run", "init_params", "evaluate"]

METHODS = ("eqprop", "dragon", "deep_sweep", "backprop")
# seed-stream index for the per-image inference anneal inside an epoch
INFER_STREAM = 999_999


@dataclass(frozen=True)
class LearningRates:
    delta_W: float = 0.01
    delta_J: float = 0.01
    delta_h: float = 0.002
    delta_o: float = 0.002

    def __post_init__(self):
        for name in ("delta_W", "delta_J", "delta_h", "delta_o"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass
class EpochRecord:
    epoch: int
    train_error: float
    test_error: float | None = None
    wall_time: float | None = None


@dataclass
class TrainRun:
    method: str
    m: int
    epochs: int
    rng_seed: int
    records: list[EpochRecord] = field(default_factory=list)
    config_hash: str = ""
    dataset_hash: str = ""
    params: object = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def curve(self, which: str = "train") -> list[tuple[int, float]]:
        key = f"{which}_error"
        return [(r.epoch, getattr(r, key)) for r in self.records
                if getattr(r, key) is not None]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_error", "test_error", "wall_seconds", "method", "m",
                    "seed", "config_hash", "dataset_hash"])
        for r in self.records:
            w.writerow([r.epoch, repr(float(r.train_error)),
                        "" if r.test_error is None else repr(float(r.test_error)),
                        "" if r.wall_time is None else f"{r.wall_time:.6f}",
                        self.method, self.m, self.rng_seed, self.config_hash,
                        self.dataset_hash])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainRun":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("run CSV has no records")
        first = rows[0]
        run = cls(first["method"], int(first["m"]), len(rows), int(first["seed"]),
                  config_hash=first.get("config_hash", ""),
                  dataset_hash=first.get("dataset_hash", ""))
        for r in rows:
            run.records.append(EpochRecord(
                int(r["epoch"]), float(r["train_error"]),
                float(r["test_error"]) if r.get("test_error") else None,
                float(r["wall_seconds"]) if r.get("wall_seconds") else None))
        return run


def _apply(params: NetworkParams, x, h_free, o_free, corr_free, nudge, rates):
    x = _pixels(params, x)
    nudge = np.asarray(nudge, dtype=np.float64)
    if nudge.shape[0] != params.n_spins:
        raise DimensionError(f"nudge state length {nudge.shape[0]} != {params.n_spins}")
    hn, on = nudge[:params.n_hidden], nudge[params.n_hidden:]
    dW = rates.delta_W * (np.outer(h_free, x) - np.outer(hn, x))
    dJ = rates.delta_J * (corr_free - np.outer(hn, on))
    dbh = rates.delta_h * (h_free - hn)
    dbo = rates.delta_o * (o_free - on)
    return params.replace(W=params.W + dW, J=params.J + dJ, b_h=params.b_h + dbh,
                          b_o=params.b_o + dbo)


def eqprop_update(params: NetworkParams, x, y: int, free_state, nudge_state,
                  rates: LearningRates) -> NetworkParams:
    """Contrastive update from one free state and the nudge state.

    dW_ia = dW (s_i x_a - s_i^N x_a), dJ = dJ (s_i s_a - s_i^N s_a^N), and
    the bias deltas from the spin differences.
    """
    _check_class(params, y)
    s = np.asarray(free_state, dtype=np.float64)
    if s.shape[0] != params.n_spins:
        raise DimensionError(f"free state length {s.shape[0]} != {params.n_spins}")
    h, o = s[:params.n_hidden], s[params.n_hidden:]
    return _apply(params, x, h, o, np.outer(h, o), nudge_state, rates)


def batch_statistics(states, n_hidden: int):
    """Sample means of hidden and output spins and the hidden-output correlator."""
    S = np.asarray(states, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("empty batch")
    m = S.shape[0]
    h, o = S[:, :n_hidden], S[:, n_hidden:]
    return h.sum(axis=0) / m, o.sum(axis=0) / m, (h.T @ o) / m


def dragon_update(params: NetworkParams, x, y: int, batch, nudge_state,
                  rates: LearningRates) -> NetworkParams:
    """Eqprop update with free-state statistics averaged over the ``m`` batch states."""
    _check_class(params, y)
    states = batch.states if isinstance(batch, SampleBatch) else batch
    if len(states) == 0:
        raise ValueError("empty batch")
    S = np.asarray(states)
    if S.ndim != 2 or S.shape[1] != params.n_spins:
        raise DimensionError(f"batch states must have {params.n_spins} spins")
    h, o, c = batch_statistics(S, params.n_hidden)
    return _apply(params, x, h, o, c, nudge_state, rates)


def expectation_update(params: NetworkParams, x, y: int, hidden_means, output_means,
                       correlators, nudge_state, rates: LearningRates) -> NetworkParams:
    """Update driven by quantum expectation values in place of sample averages."""
    _check_class(params, y)
    return _apply(params, x, np.asarray(hidden_means), np.asarray(output_means),
                  np.asarray(correlators), nudge_state, rates)


def _nudge(params, x, y, mode, nudge_strength, config):
    if mode == "analytic":
        return nudge_state(params, x, y)
    if mode == "sampled":
        s, _ = forward_anneal(build_nudge_hamiltonian(params, x, y, nudge_strength), config)
        return s
    raise ValueError(f"unknown nudge mode {mode!r}")


def train_epoch(params: NetworkParams, dataset, method: str, m: int, rates: LearningRates,
                config: AnnealConfig, seed: int, *, nudge_strength: float = 1.0,
                nudge_mode: str = "analytic", use_references: bool = True,
                batch_size: int = 1, error_source: str = "batch",
                diagnostics: dict | None = None):
    """One pass over ``dataset`` in seeded shuffled order.

    Returns the end-of-epoch parameters and the fraction of images misclassified
    during the pass. With ``error_source="batch"`` the prediction is the
    lowest-energy sample drawn for the update; ``"inference"`` spends one extra
    forward anneal per image so the prediction does not depend on ``m``.
    """
    if method not in ("eqprop", "dragon"):
        raise ValueError(f"train_epoch handles eqprop and dragon, not {method!r}")
    if error_source not in ("batch", "inference"):
        raise ValueError(f"unknown error source {error_source!r}")
    X, Y = dataset.X, dataset.y
    if len(Y) == 0:
        raise ValueError("empty dataset")
    if np.any(np.asarray(Y) < 0):
        raise ValueError("dataset contains unlabeled images")
    order = np.random.default_rng(seed).permutation(len(Y))
    wrong = 0
    landed = total_cyc = 0
    pending = []
    for t, idx in enumerate(order):
        x, y = X[idx], int(Y[idx])
        cfg = config.with_seed(derive_seed(seed, t))
        problem = build_system_hamiltonian(params, x)
        if method == "eqprop":
            batch = sample_batch(problem, [], 1, cfg)
        else:
            refs = wrong_basin_references(params, x, y) if use_references else []
            labels = [str(c) for c in range(params.n_classes) if c != y]
            batch = sample_batch(problem, refs, m, cfg, labels)
            for state, origin in zip(batch.states, batch.origins):
                if origin != "random":
                    total_cyc += 1
                    landed += decode(state, params) == y
        if error_source == "batch" or method == "eqprop":
            pred_state = batch.states[batch.lowest()]
        else:
            pred_state, _ = forward_anneal(problem, cfg.with_seed(derive_seed(cfg.rng_seed,
                                                                              INFER_STREAM)))
        if decode(pred_state, params) != y:
            wrong += 1
        nudge = _nudge(params, x, y, nudge_mode, nudge_strength, cfg)
        if batch_size == 1:
            if method == "eqprop":
                params = eqprop_update(params, x, y, batch.states[0], nudge, rates)
            else:
                params = dragon_update(params, x, y, batch, nudge, rates)
        else:
            pending.append((x, y, batch, nudge))
            if len(pending) == batch_size or t == len(order) - 1:
                params = _minibatch(params, pending, rates)
                pending = []
    if diagnostics is not None:
        diagnostics["correct_basin_fraction"] = landed / total_cyc if total_cyc else None
    return params, wrong / len(order)


def _minibatch(params, items, rates):
    total = None
    for x, y, batch, nudge in items:
        new = dragon_update(params, x, y, batch, nudge, rates)
        d = [new.W - params.W, new.J - params.J, new.b_h - params.b_h, new.b_o - params.b_o]
        total = d if total is None else [a + b for a, b in zip(total, d)]
    return params.replace(W=params.W + total[0], J=params.J + total[1],
                          b_h=params.b_h + total[2], b_o=params.b_o + total[3])


def evaluate(params: NetworkParams, dataset, config: AnnealConfig, seed: int) -> float:
    """Error rate of annealer-based inference over ``dataset``."""
    wrong = 0
    for t in range(len(dataset.y)):
        cfg = config.with_seed(derive_seed(seed, t))
        pred = infer(params, dataset.X[t], lambda p: forward_anneal(p, cfg))
        wrong += pred != int(dataset.y[t])
    return wrong / len(dataset.y)


def train_run(params: NetworkParams, train, method: str, m: int, epochs: int,
              rates: LearningRates, config: AnnealConfig, seed: int, *, test=None,
              nudge_strength: float = 1.0, nudge_mode: str = "analytic",
              fallback_threshold: float = 0.8, batch_size: int = 1,
              record_wall_time: bool = False, error_source: str = "batch",
              config_hash: str = "",
              dataset_hash: str = "", callback=None) -> TrainRun:
    """Train for ``epochs`` epochs, recording per-epoch train and test error.

    For dragon training, once the share of reference-seeded samples that land
    in the correct basin reaches ``fallback_threshold`` the remaining epochs
    draw all batch members by forward annealing.
    """
    run = TrainRun(method, m if method == "dragon" else 1, epochs, seed,
                   config_hash=config_hash, dataset_hash=dataset_hash)
    use_refs = True
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        diag: dict = {}
        params, err = train_epoch(params, train, method, m, rates, config,
                                  derive_seed(seed, epoch), nudge_strength=nudge_strength,
                                  nudge_mode=nudge_mode, use_references=use_refs,
                                  batch_size=batch_size, error_source=error_source,
                                  diagnostics=diag)
        wall = time.perf_counter() - t0
        frac = diag.get("correct_basin_fraction")
        if use_refs and frac is not None and frac >= fallback_threshold:
            use_refs = False
            log.info("epoch %d: %.2f of reference-seeded samples reached the correct basin;"
                     " switching to forward annealing", epoch, frac)
        test_err = None
        if test is not None:
            test_err = evaluate(params, test, config, derive_seed(seed, 10_000 + epoch))
        run.records.append(EpochRecord(epoch, err, test_err,
                                       wall if record_wall_time else None))
        if callback is not None:
            callback(run.records[-1])
    run.params = params
    return run


def run_many(jobs: Sequence[dict], workers: int = 1) -> list[TrainRun]:
    """Execute independent ``train_run`` keyword sets, optionally in threads."""
    if workers <= 1:
        return [train_run(**job) for job in jobs]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: train_run(**job), jobs))
