"""Glue from a RunConfig to datasets, sampler settings and a finished training run."""

from __future__ import annotations

from .backprop import BackpropHyper, backprop_train
from .config import RunConfig
from .data import Dataset, load_mnist, make_splits, synthetic_digits
from .network import init_params
from .samplers import AnnealConfig, geometric_betas
from .trainers import LearningRates, TrainRun, train_run


def anneal_config(cfg: RunConfig) -> AnnealConfig:
    return AnnealConfig(sweeps=cfg.sweeps,
                        beta_schedule=geometric_betas(cfg.beta_min, cfg.beta_max, cfg.beta_steps),
                        restarts=cfg.restarts, rng_seed=cfg.seed, cycle_depth=cfg.cycle_depth,
                        n_cycles=cfg.n_cycles, workers=cfg.workers)


def learning_rates(cfg: RunConfig) -> LearningRates:
    return LearningRates(cfg.delta_W, cfg.delta_J, cfg.delta_h, cfg.delta_o)


def datasets(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    """Seeded train and test sets described by ``cfg``."""
    if cfg.dataset == "mnist":
        if not cfg.mnist_images or not cfg.mnist_labels:
            raise ValueError("dataset = mnist needs mnist_images and mnist_labels paths")
        source = load_mnist(cfg.mnist_images, cfg.mnist_labels)
        return make_splits(source, cfg.train_per_class, cfg.test_per_class, cfg.data_seed)
    kw = dict(n_classes=cfg.n_classes, side=cfg.synthetic_side, flip_prob=cfg.synthetic_flip_prob)
    train = synthetic_digits(cfg.train_per_class, cfg.data_seed, split="train", **kw)
    test = synthetic_digits(cfg.test_per_class, cfg.data_seed + 1, split="test", **kw)
    return train, test


def run_from_config(cfg: RunConfig, callback=None) -> TrainRun:
    train, test = datasets(cfg)
    test = test if cfg.evaluate_test else None
    if cfg.method == "backprop":
        return backprop_train(train, cfg.epochs, cfg.seed, n_hidden=cfg.n_hidden,
                              redundancy=cfg.redundancy,
                              hyper=BackpropHyper(cfg.bp_learning_rate, cfg.bp_batch_size),
                              test=test, record_wall_time=cfg.record_wall_time,
                              config_hash=cfg.hash, dataset_hash=train.hash)
    params = init_params(cfg.init_seed, n_input=train.X.shape[1], n_hidden=cfg.n_hidden,
                         n_classes=cfg.n_classes, redundancy=cfg.redundancy)
    return train_run(params, train, cfg.method, cfg.m, cfg.epochs, learning_rates(cfg),
                     anneal_config(cfg), cfg.seed, test=test,
                     nudge_strength=cfg.nudge_strength, nudge_mode=cfg.nudge_mode,
                     fallback_threshold=cfg.fallback_threshold, batch_size=cfg.batch_size,
                     record_wall_time=cfg.record_wall_time,
                     error_source=cfg.train_error_source, config_hash=cfg.hash,
                     dataset_hash=train.hash, callback=callback)
