"""Command-line entry point.

Exit status 0 on success, 1 on runtime failure, 2 on usage errors. Every
failure is reported as one line on stderr: ``error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind: str, message: str) -> None:
    msg = " ".join(str(message).split())
    print(f"error: {kind}: {msg}", file=sys.stderr)


@contextmanager
def locked_dir(path):
    """Create ``path`` and hold an exclusive lockfile in it for the duration."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    lock = path / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"output directory {path} is in use (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield path
    finally:
        lock.unlink(missing_ok=True)


def _load_cfg(args):
    from .config import load_config
    overrides = {k: getattr(args, k, None) for k in ("method", "epochs", "workers", "seed", "m")}
    return load_config(args.config, **overrides)


def cmd_train(args) -> int:
    from . import checkpoint
    from .pipeline import run_from_config

    cfg = _load_cfg(args)
    with locked_dir(args.out) as out:
        def progress(rec):
            if not args.quiet:
                test = "" if rec.test_error is None else f" test_error={rec.test_error:.4f}"
                print(f"epoch={rec.epoch} train_error={rec.train_error:.4f}{test}", flush=True)
        run = run_from_config(cfg, callback=progress)
        (out / "run.csv").write_text(run.to_csv())
        (out / "config.txt").write_text(cfg.dumps())
        if cfg.method != "backprop":
            checkpoint.save(run.params, out / "checkpoint.txt", cfg.hash)
    last = run.records[-1]
    print(f"done method={run.method} m={run.m} epochs={len(run.records)} "
          f"final_train_error={last.train_error!r} config_hash={cfg.hash}")
    return 0


def _sampler(args):
    from .samplers import AnnealConfig
    if args.config:
        from .pipeline import anneal_config
        return anneal_config(_load_cfg(args))
    return AnnealConfig(rng_seed=args.seed or 0)


def cmd_infer(args) -> int:
    from . import checkpoint
    from .network import build_system_hamiltonian, decode, group_sums
    from .samplers import forward_anneal

    params = checkpoint.load(args.checkpoint)
    if args.image is not None:
        x = np.load(args.image) if args.image.endswith(".npy") else np.loadtxt(args.image)
        x = np.asarray(x, dtype=np.float64).ravel()
        label = None
    else:
        if not args.config:
            raise UsageError("--image-id needs --config to locate the dataset")
        from .pipeline import datasets
        train, test = datasets(_load_cfg(args))
        ds = train if args.split == "train" else test
        if not 0 <= args.image_id < len(ds):
            raise ValueError(f"image id {args.image_id} outside 0..{len(ds) - 1} "
                             f"of the {args.split} set")
        x, label = ds.X[args.image_id], int(ds.y[args.image_id])
    state, e = forward_anneal(build_system_hamiltonian(params, x), _sampler(args))
    g = group_sums(state, params)
    lab = "" if label is None else f" label={label}"
    print(f"class={decode(state, params)} group_sums={','.join(str(int(v)) for v in g)} "
          f"energy={e!r}{lab}")
    return 0


def cmd_landscape(args) -> int:
    from . import checkpoint
    from .analysis import landscape_snapshot, snapshot_svg
    from .pipeline import anneal_config, datasets

    cfg = _load_cfg(args)
    params = checkpoint.load(args.checkpoint)
    _, test = datasets(cfg)
    with locked_dir(args.out) as out:
        snap = landscape_snapshot(params, test, args.samples, anneal_config(cfg), cfg.seed,
                                  epoch=args.epoch)
        (out / "landscape.csv").write_text(snap.to_csv(config_hash=cfg.hash))
        if args.svg:
            snapshot_svg(snap, out / "landscape.svg",
                         title=None if args.epoch is None else f"epoch {args.epoch}")
    print(f"points={len(snap.classes)} stress={snap.stress!r} "
          f"separation={snap.separation():.3f} config_hash={cfg.hash}")
    return 0


def _read_runs(paths):
    from .trainers import TrainRun
    return [TrainRun.from_csv(Path(p).read_text()) for p in paths]


def cmd_fit(args) -> int:
    from .analysis import fit_scaling

    for path, run in zip(args.runs, _read_runs(args.runs)):
        f = fit_scaling(run.curve(args.which), (args.start, args.end))
        print(f"run={path} method={run.method} m={run.m} seed={run.rng_seed} z={f.z!r} "
              f"r2={f.r_squared!r} range={f.fit_range[0]}-{f.fit_range[1]} "
              f"points={f.n_points} excluded={f.n_excluded}")
    return 0


def cmd_compare(args) -> int:
    from .analysis import compare_runs

    report = compare_runs(_read_runs(args.runs), which=args.which,
                          fit_range=(args.start, args.end),
                          reference_epoch=args.reference_epoch, force=args.force)
    if args.out:
        with locked_dir(args.out) as out:
            (out / "comparison.csv").write_text(report.to_csv())
            (out / "comparison.txt").write_text(report.to_text())
    sys.stdout.write(report.to_text())
    return 0


def cmd_coherent(args) -> int:
    from .coherent import amplification_experiment

    rows = amplification_experiment(tuple(args.p), seed=args.seed, n_steps=args.steps)
    chash = hashlib.sha256(f"coherent:{args.p}:{args.seed}:{args.steps}".encode()).hexdigest()[:16]
    buf = io.StringIO()
    cols = ["n_spins", "p_target", "k", "queries", "success_prob", "method", "config_hash"]
    w = csv.DictWriter(buf, cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "p_target": repr(float(r["p_target"])),
                    "success_prob": repr(float(r["success_prob"])), "config_hash": chash})
    if args.out:
        Path(args.out).write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return 0


def cmd_oracle(args) -> int:
    from .validation import oracle_suite

    rep = oracle_suite(args.n, args.seed, args.energy_checks)
    print(rep.summary())
    return 0 if rep.hit_rate >= args.min_hit_rate else 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="isingdragon", description="Ising-network training experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a network from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--method", choices=["eqprop", "dragon", "backprop"])
    t.add_argument("--m", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--workers", type=int)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="classify one image with a checkpoint")
    i.add_argument("--checkpoint", required=True)
    src = i.add_mutually_exclusive_group(required=True)
    src.add_argument("--image-id", type=int, help="position in the configured split")
    src.add_argument("--image", help=".npy or whitespace-separated pixel file")
    i.add_argument("--config")
    i.add_argument("--split", choices=["train", "test"], default="train")
    i.add_argument("--seed", type=int)
    i.set_defaults(func=cmd_infer)

    lsc = sub.add_parser("landscape", help="MDS snapshot of sampled low-energy states")
    lsc.add_argument("--checkpoint", required=True)
    lsc.add_argument("--config", required=True, help="config describing the test set")
    lsc.add_argument("--out", required=True)
    lsc.add_argument("--samples", type=int, default=10, help="samples per test image")
    lsc.add_argument("--epoch", type=int)
    lsc.add_argument("--svg", action="store_true")
    lsc.set_defaults(func=cmd_landscape)

    for name, func, nargs in (("fit", cmd_fit, "+"), ("compare", cmd_compare, "+")):
        f = sub.add_parser(name, help="scaling fit per run" if name == "fit"
                           else "compare scaling across runs")
        f.add_argument("runs", nargs=nargs, help="run CSV files")
        f.add_argument("--which", choices=["train", "test"], default="train")
        f.add_argument("--start", type=int, default=2)
        f.add_argument("--end", type=int)
        if name == "compare":
            f.add_argument("--force", action="store_true",
                           help="allow runs on different datasets")
            f.add_argument("--reference-epoch", type=int, default=100)
            f.add_argument("--out")
        f.set_defaults(func=func)

    c = sub.add_parser("coherent", help="amplitude amplification on a small network")
    c.add_argument("--p", type=float, nargs="+", default=[0.04, 0.01])
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--steps", type=int, default=1000)
    c.add_argument("--out")
    c.set_defaults(func=cmd_coherent)

    o = sub.add_parser("oracle", help="annealer versus brute force on toy networks")
    o.add_argument("--n", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--energy-checks", type=int, default=1000)
    o.add_argument("--min-hit-rate", type=float, default=0.95)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _fail("usage", exc)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        _fail("usage", exc)
        return 2
    except Exception as exc:  # noqa: BLE001
        _fail(type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
