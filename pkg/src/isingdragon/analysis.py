"""Training-curve scaling fits, Hamming-preserving MDS landscapes and run comparison."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import NetworkParams, build_system_hamiltonian, decode
from .samplers import AnnealConfig, derive_seed, sample_batch

# error-rate exponents reported for hardware runs, used as reference rows
REPORTED_EXPONENTS = {"dragon": 1.01, "backprop": 0.78, "eqprop": 0.64}


class InsufficientDataError(ValueError):
    pass


@dataclass
class ScalingFit:
    z: float
    log_intercept: float
    r_squared: float
    fit_range: tuple[int, int]
    n_points: int
    n_excluded: int = 0

    def predict(self, epoch) -> np.ndarray:
        return np.exp(self.log_intercept) * np.asarray(epoch, dtype=float) ** (-self.z)


def fit_scaling(curve: Sequence[tuple[float, float]], fit_range=(2, None),
                min_points: int = 5) -> ScalingFit:
    """Least-squares line through (ln epoch, ln error); z is minus the slope.

    Points outside ``fit_range`` (inclusive, ``None`` = open) are ignored and
    zero-error points are excluded and counted.
    """
    data = np.asarray(curve, dtype=np.float64).reshape(-1, 2)
    lo, hi = fit_range
    keep = np.ones(data.shape[0], dtype=bool)
    if lo is not None:
        keep &= data[:, 0] >= lo
    if hi is not None:
        keep &= data[:, 0] <= hi
    data = data[keep]
    if np.any(data[:, 0] < 1):
        raise ValueError("epochs must be >= 1")
    if np.any(data[:, 1] > 1) or np.any(data[:, 1] < 0):
        raise ValueError("error rates must lie in [0, 1]")
    zero = data[:, 1] <= 0
    data = data[~zero]
    if data.shape[0] < min_points:
        raise InsufficientDataError(
            f"{data.shape[0]} usable points (after excluding {int(zero.sum())} zero-error "
            f"epochs); need {min_points}")
    x = np.log(data[:, 0])
    y = np.log(data[:, 1])
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = yc - slope * xc
    ss_tot = float(yc @ yc)
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(-slope, intercept, r2, (int(data[0, 0]), int(data[-1, 0])),
                      int(data.shape[0]), int(zero.sum()))


# ---------------------------------------------------------------------------
# multidimensional scaling
# ---------------------------------------------------------------------------

def hamming_matrix(states) -> np.ndarray:
    S = np.asarray(states, dtype=np.float64)
    n = S.shape[1]
    # s_i . s_j = n - 2 d_ij for +-1 vectors
    return 0.5 * (n - S @ S.T)


def _pairwise(X):
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    return np.sqrt(np.maximum(d2, 0.0))


def _raw_stress(D, X):
    iu = np.triu_indices(D.shape[0], 1)
    diff = _pairwise(X)[iu] - D[iu]
    return float(diff @ diff)


@dataclass
class MDSResult:
    coords: np.ndarray
    stress: float          # normalized: sqrt(raw / sum D^2)
    history: list[float]   # raw stress after each iteration
    n_iter: int


def smacof(D, dim: int = 2, seed: int = 0, max_iter: int = 300, rtol: float = 1e-6,
           init=None) -> MDSResult:
    """Stress majorization with Guttman transforms and unit weights."""
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    total = float(np.sum(np.triu(D, 1) ** 2))
    if total == 0:
        return MDSResult(np.zeros((n, dim)), 0.0, [0.0], 0)
    if init is None:
        X = np.random.default_rng(seed).standard_normal((n, dim))
        X *= math.sqrt(total / n) / max(np.linalg.norm(X), 1e-12)
    else:
        X = np.asarray(init, dtype=np.float64).copy()
    X -= X.mean(axis=0)
    stress = _raw_stress(D, X)
    history = [stress]
    it = 0
    for it in range(1, max_iter + 1):
        dist = _pairwise(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, D / dist, 0.0)
        B = -ratio
        np.fill_diagonal(B, 0.0)
        np.fill_diagonal(B, -B.sum(axis=1))
        X = B @ X / n
        new = _raw_stress(D, X)
        history.append(new)
        done = stress > 0 and (stress - new) / stress < rtol
        stress = new
        if done or stress == 0:
            break
    return MDSResult(X, math.sqrt(stress / total), history, it)


def mds_project(states, dim: int = 2, seed: int = 0, **kw) -> MDSResult:
    """Embed spin states in ``dim`` dimensions approximately preserving Hamming distances."""
    states = np.asarray(states)
    if states.ndim != 2 or states.shape[0] < 2:
        raise ValueError("need at least two states of equal length")
    return smacof(hamming_matrix(states), dim, seed, **kw)


@dataclass
class LandscapeSnapshot:
    coords: np.ndarray       # (N, 2)
    classes: np.ndarray      # decoded class per point, -1 if unclassified
    image_ids: np.ndarray
    labels: np.ndarray       # true class of the source image
    stress: float
    epoch: int | None = None
    states: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self, config_hash: str | None = None) -> str:
        """Columns x, y, class, image_id; a config_hash column is appended when given."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        extra = [] if config_hash is None else [config_hash]
        w.writerow(["x", "y", "class", "image_id"] + (["config_hash"] if extra else []))
        for (x, y), c, i in zip(self.coords, self.classes, self.image_ids):
            w.writerow([repr(float(x)), repr(float(y)), int(c), int(i)] + extra)
        return buf.getvalue()

    def separation(self, by: str = "label") -> float:
        """Mean embedded distance between groups over mean distance within groups."""
        groups = self.labels if by == "label" else self.classes
        d = _pairwise(self.coords)
        same = groups[:, None] == groups[None, :]
        off = ~np.eye(len(groups), dtype=bool)
        intra = d[same & off].mean()
        inter = d[~same].mean()
        return float(inter / intra) if intra > 0 else math.inf


def landscape_snapshot(params: NetworkParams, test_set, samples_per_image: int,
                       config: AnnealConfig, seed: int, epoch: int | None = None,
                       **mds_kw) -> LandscapeSnapshot:
    """Sample low-energy states of every test image's Hamiltonian and embed them jointly."""
    states, classes, ids, labels = [], [], [], []
    for t in range(len(test_set.y)):
        problem = build_system_hamiltonian(params, test_set.X[t])
        batch = sample_batch(problem, [], samples_per_image,
                             config.with_seed(derive_seed(seed, t)))
        for s in batch.states:
            states.append(s)
            classes.append(decode(s, params))
            ids.append(int(test_set.ids[t]))
            labels.append(int(test_set.y[t]))
    res = mds_project(np.stack(states), seed=seed, **mds_kw)
    return LandscapeSnapshot(res.coords, np.array(classes), np.array(ids), np.array(labels),
                             res.stress, epoch, np.stack(states))


CLASS_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
UNCLASSIFIED_COLOR = "#b0b0b0"


def snapshot_svg(snapshot: LandscapeSnapshot, path, title: str | None = None):
    """Scatter plot of a snapshot coloured by decoded class, gray for class -1."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 5))
    for c in sorted(set(snapshot.classes.tolist())):
        sel = snapshot.classes == c
        color = UNCLASSIFIED_COLOR if c < 0 else CLASS_COLORS[c % len(CLASS_COLORS)]
        ax.scatter(snapshot.coords[sel, 0], snapshot.coords[sel, 1], s=6, c=color,
                   label=str(c), linewidths=0)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
    ax.legend(fontsize=6, markerscale=2, loc="upper right")
    if title:
        ax.set_title(title)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# run comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonRow:
    method: str
    m: int
    seed: int
    fit: ScalingFit


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    mean_z: dict[str, float]
    resource_multiple: dict[str, float]
    reference_epoch: int
    which: str

    def ordering(self) -> list[str]:
        return sorted(self.mean_z, key=lambda k: -self.mean_z[k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "m", "seed", "z", "log_intercept", "r_squared", "fit_start",
                    "fit_end", "n_points", "n_excluded", "source"])
        for r in self.rows:
            f = r.fit
            w.writerow([r.method, r.m, r.seed, repr(f.z), repr(f.log_intercept),
                        repr(f.r_squared), f.fit_range[0], f.fit_range[1], f.n_points,
                        f.n_excluded, "measured"])
        for method, z in REPORTED_EXPONENTS.items():
            w.writerow([method, "", "", z, "", "", "", "", "", "", "reported"])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"scaling exponents ({self.which} error, error ~ epoch^-z)"]
        lines.append(f"{'method':<12}{'m':>4}{'seed':>8}{'z':>9}{'r2':>8}  fit range")
        for r in self.rows:
            f = r.fit
            lines.append(f"{r.method:<12}{r.m:>4}{r.seed:>8}{f.z:>9.3f}{f.r_squared:>8.3f}"
                         f"  [{f.fit_range[0]}, {f.fit_range[1]}]")
        lines.append("")
        lines.append(f"{'method':<12}{'mean z':>9}{'reported':>10}{'resource x':>12}")
        for method in self.ordering():
            ref = REPORTED_EXPONENTS.get(method.split(":")[0])
            ref_s = f"{ref:.2f}" if ref is not None else "-"
            mult = self.resource_multiple.get(method, math.nan)
            lines.append(f"{method:<12}{self.mean_z[method]:>9.3f}{ref_s:>10}{mult:>12.2f}")
        lines.append(f"resource multiple = epochs needed to match the best method's fitted "
                     f"error at epoch {self.reference_epoch}")
        return "\n".join(lines) + "\n"


def compare_runs(runs, which: str = "train", fit_range=(2, None), reference_epoch: int = 100,
                 force: bool = False) -> ComparisonReport:
    """Fit every run, average exponents per method and estimate resource multiples."""
    runs = list(runs)
    if len(runs) < 2:
        raise InsufficientDataError("comparison needs at least two runs")
    hashes = {r.dataset_hash for r in runs if r.dataset_hash}
    if len(hashes) > 1 and not force:
        raise ValueError(f"runs use different datasets {sorted(hashes)}; pass force to mix")
    rows = [ComparisonRow(r.method, r.m, r.rng_seed, fit_scaling(r.curve(which), fit_range))
            for r in runs]
    groups: dict[str, list[ScalingFit]] = {}
    for row in rows:
        key = row.method if row.method != "dragon" else f"dragon:m={row.m}"
        groups.setdefault(key, []).append(row.fit)
    mean_z = {k: float(np.mean([f.z for f in v])) for k, v in groups.items()}
    mean_icpt = {k: float(np.mean([f.log_intercept for f in v])) for k, v in groups.items()}
    best = max(mean_z, key=mean_z.get)
    target = mean_icpt[best] - mean_z[best] * math.log(reference_epoch)
    multiple = {}
    for k in mean_z:
        if mean_z[k] > 0:
            epochs = math.exp((mean_icpt[k] - target) / mean_z[k])
            multiple[k] = epochs / reference_epoch
        else:
            multiple[k] = math.inf
    return ComparisonReport(rows, mean_z, multiple, reference_epoch, which)
