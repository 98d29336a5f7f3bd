"""Deep layered Ising networks trained two layers at a time (active-layer sweep).

Layer 0 receives the input fields W x; the last layer is the output layer.
Only the two active layers are unfrozen in any anneal, the rest stay fixed
at their current values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ising import ContractError, DimensionError, IsingProblem
from .samplers import AnnealConfig, derive_seed, forward_anneal, sample_batch
from .trainers import LearningRates, batch_statistics


@dataclass(frozen=True, eq=False)
class DeepNetworkParams:
    W: np.ndarray                   # (n_0, n_input)
    J: tuple[np.ndarray, ...]       # J[l] has shape (n_l, n_{l+1})
    b: tuple[np.ndarray, ...]       # b[l] has shape (n_l,)
    n_classes: int
    redundancy: int

    def __post_init__(self):
        J = tuple(np.asarray(j, dtype=np.float64) for j in self.J)
        b = tuple(np.asarray(v, dtype=np.float64).reshape(-1) for v in self.b)
        W = np.asarray(self.W, dtype=np.float64)
        if len(b) < 2 or len(J) != len(b) - 1:
            raise DimensionError("need L >= 2 layers with L-1 coupling matrices")
        sizes = [v.shape[0] for v in b]
        if W.shape[0] != sizes[0]:
            raise DimensionError("W rows must match the first layer")
        for l, j in enumerate(J):
            if j.shape != (sizes[l], sizes[l + 1]):
                raise DimensionError(f"J[{l}] shape {j.shape} != {(sizes[l], sizes[l + 1])}")
        if sizes[-1] != self.n_classes * self.redundancy:
            raise DimensionError("output layer size must be n_classes * redundancy")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "b", b)

    @property
    def layers(self) -> list[int]:
        return [v.shape[0] for v in self.b]

    @property
    def n_layers(self) -> int:
        return len(self.b)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.layers)])

    @property
    def n_spins(self) -> int:
        return int(self.offsets[-1])

    def layer_slice(self, l: int) -> slice:
        o = self.offsets
        return slice(int(o[l]), int(o[l + 1]))

    def equals(self, other: "DeepNetworkParams") -> bool:
        return (np.array_equal(self.W, other.W) and len(self.J) == len(other.J)
                and all(np.array_equal(a, c) for a, c in zip(self.J, other.J))
                and all(np.array_equal(a, c) for a, c in zip(self.b, other.b))
                and self.n_classes == other.n_classes and self.redundancy == other.redundancy)


def init_deep(seed: int, n_input: int, layers, n_classes: int, redundancy: int) -> DeepNetworkParams:
    rng = np.random.default_rng(seed)
    layers = list(layers)
    W = rng.uniform(-1, 1, (layers[0], n_input)) / np.sqrt(n_input)
    J = tuple(rng.uniform(-1, 1, (layers[l], layers[l + 1])) / np.sqrt(layers[l])
              for l in range(len(layers) - 1))
    b = tuple(np.zeros(n) for n in layers)
    return DeepNetworkParams(W, J, b, n_classes, redundancy)


def deep_hamiltonian(params: DeepNetworkParams, x, y: int | None = None,
                     nudge_strength: float = 1.0, frozen=None) -> IsingProblem:
    """Layered Hamiltonian with input fields on layer 0; nudged when ``y`` is given."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.W.shape[1],):
        raise DimensionError(f"image shape {x.shape} != ({params.W.shape[1]},)")
    off = params.offsets
    edges, weights = [], []
    for l, j in enumerate(params.J):
        ii, kk = np.meshgrid(np.arange(j.shape[0]), np.arange(j.shape[1]), indexing="ij")
        edges.append(np.stack([off[l] + ii.ravel(), off[l + 1] + kk.ravel()], axis=1))
        weights.append(j.ravel())
    biases = np.concatenate(params.b).copy()
    biases[params.layer_slice(0)] += params.W @ x
    if y is not None:
        biases[params.layer_slice(params.n_layers - 1)] -= nudge_strength * _nudge_vector(params, y)
    layers = tuple(np.arange(off[l], off[l + 1]) for l in range(params.n_layers))
    return IsingProblem(params.n_spins, np.concatenate(edges), np.concatenate(weights), biases,
                        frozen, layers)


def _nudge_vector(params: DeepNetworkParams, y: int) -> np.ndarray:
    if not 0 <= y < params.n_classes:
        raise ContractError(f"class {y} outside 0..{params.n_classes - 1}")
    n = -np.ones(params.layers[-1])
    n[y * params.redundancy:(y + 1) * params.redundancy] = 1.0
    return n


def _sign_against(field) -> np.ndarray:
    return np.where(field >= 0, -1, 1).astype(np.int8)


def _layer_field(params: DeepNetworkParams, x, state, l: int) -> np.ndarray:
    """Total field on layer ``l`` from its bias, input and neighbouring layers."""
    f = params.b[l].copy()
    if l == 0:
        f += params.W @ x
    else:
        f += params.J[l - 1].T @ state[params.layer_slice(l - 1)]
    if l + 1 < params.n_layers:
        f += params.J[l] @ state[params.layer_slice(l + 1)]
    return f


def feedforward_state(params: DeepNetworkParams, x) -> np.ndarray:
    """Initial configuration: each layer anti-aligned with the field from the layer below."""
    x = np.asarray(x, dtype=np.float64)
    s = np.zeros(params.n_spins, dtype=np.int8)
    f = params.b[0] + params.W @ x
    s[params.layer_slice(0)] = _sign_against(f)
    for l in range(1, params.n_layers):
        f = params.b[l] + params.J[l - 1].T @ s[params.layer_slice(l - 1)]
        s[params.layer_slice(l)] = _sign_against(f)
    return s


def _frozen_except(params: DeepNetworkParams, state, active) -> np.ndarray:
    mask = state.astype(np.int8).copy()
    for l in active:
        mask[params.layer_slice(l)] = 0
    return mask


def _frozen_ok(mask, state) -> bool:
    fixed = mask != 0
    return bool(np.all(state[fixed] == mask[fixed]))


def forward_sweep(params: DeepNetworkParams, x, config: AnnealConfig, seed: int,
                  history: list | None = None) -> np.ndarray:
    state = feedforward_state(params, x)
    for l in range(params.n_layers - 1):
        mask = _frozen_except(params, state, (l, l + 1))
        problem = deep_hamiltonian(params, x, frozen=mask)
        s, _ = forward_anneal(problem, config.with_seed(derive_seed(seed, l)))
        ok = _frozen_ok(mask, s)
        if history is not None:
            history.append({"phase": "forward", "active": (l, l + 1), "frozen_unchanged": ok})
        if not ok:
            raise RuntimeError(f"frozen spins changed while annealing layers {(l, l + 1)}")
        state = s
    return state


def deep_decode(params: DeepNetworkParams, state) -> int:
    out = np.asarray(state)[params.layer_slice(params.n_layers - 1)].astype(np.int64)
    g = out.reshape(params.n_classes, params.redundancy).sum(axis=1)
    winners = np.flatnonzero(g == g.max())
    return int(winners[0]) if winners.shape[0] == 1 else -1


def deep_infer(params: DeepNetworkParams, x, config: AnnealConfig, seed: int) -> int:
    return deep_decode(params, forward_sweep(params, x, config, seed))


def deep_sweep_pass(params: DeepNetworkParams, x, y: int, m: int, rates: LearningRates,
                    config: AnnealConfig, seed: int, *, history: list | None = None
                    ) -> DeepNetworkParams:
    """One forward and one backward active-layer sweep, producing one parameter update.

    Backward step for pair (l, l+1): ``m`` free samples with the other layers
    frozen at the forward-sweep state; nudge state with layer l+1 taken from
    the step above (the class pattern for the output layer) and layer l
    anti-aligned with its field. Pair (l, l+1) updates J[l], b[l], W when
    l == 0, and the output bias at the top pair, so every parameter moves
    once per pass. All deltas use the pre-pass parameters.
    """
    L = params.n_layers
    if L < 2:
        raise ValueError("deep sweep needs at least two layers")
    x = np.asarray(x, dtype=np.float64)
    free = forward_sweep(params, x, config, derive_seed(seed, 0), history)
    nudged = free.copy()
    nudged[params.layer_slice(L - 1)] = _nudge_vector(params, y).astype(np.int8)
    dJ = [np.zeros_like(j) for j in params.J]
    db = [np.zeros_like(v) for v in params.b]
    dW = np.zeros_like(params.W)
    for l in range(L - 2, -1, -1):
        lo, hi = params.layer_slice(l), params.layer_slice(l + 1)
        mask = _frozen_except(params, free, (l, l + 1))
        problem = deep_hamiltonian(params, x, frozen=mask)
        refs, labels = [], None
        if l + 1 == L - 1:
            labels = [str(c) for c in range(params.n_classes) if c != y]
            for c in range(params.n_classes):
                if c == y:
                    continue
                r = free.copy()
                r[hi] = _nudge_vector(params, c).astype(np.int8)
                r[lo] = _sign_against(_layer_field(params, x, r, l))
                refs.append(r)
        batch = sample_batch(problem, refs, m, config.with_seed(derive_seed(seed, 100 + l)),
                             labels)
        ok = all(_frozen_ok(mask, s) for s in batch.states)
        nudged[lo] = _sign_against(_layer_field(params, x, nudged, l))
        if history is not None:
            history.append({"phase": "backward", "active": (l, l + 1), "frozen_unchanged": ok,
                            "batch": batch, "nudge": nudged.copy()})
        if not ok:
            raise RuntimeError(f"frozen spins changed while sampling layers {(l, l + 1)}")
        S = np.stack(batch.states)
        pair = np.concatenate([S[:, lo], S[:, hi]], axis=1)
        n_lo = lo.stop - lo.start
        h_mean, o_mean, corr = batch_statistics(pair, n_lo)
        hn = nudged[lo].astype(np.float64)
        on = nudged[hi].astype(np.float64)
        dJ[l] = rates.delta_J * (corr - np.outer(hn, on))
        db[l] = rates.delta_h * (h_mean - hn)
        if l == 0:
            dW = rates.delta_W * (np.outer(h_mean, x) - np.outer(hn, x))
        if l + 1 == L - 1:
            db[L - 1] = rates.delta_o * (o_mean - on)
    return DeepNetworkParams(params.W + dW, tuple(j + d for j, d in zip(params.J, dJ)),
                             tuple(v + d for v, d in zip(params.b, db)),
                             params.n_classes, params.redundancy)


def deep_train(params: DeepNetworkParams, dataset, passes: int, m: int, rates: LearningRates,
               config: AnnealConfig, seed: int, *, eval_every: int | None = None,
               stop_at_zero: bool = True, history: list | None = None):
    """Run ``passes`` single-image sweep updates in seeded shuffled epochs.

    Returns the final parameters and a list of (pass_count, train_error)
    evaluated every ``eval_every`` passes (default: once per epoch).
    """
    n = len(dataset.y)
    eval_every = eval_every or n
    rng = np.random.default_rng(seed)
    curve = []
    order = rng.permutation(n)
    for t in range(passes):
        if t and t % n == 0:
            order = rng.permutation(n)
        idx = order[t % n]
        params = deep_sweep_pass(params, dataset.X[idx], int(dataset.y[idx]), m, rates, config,
                                 derive_seed(seed, t), history=history)
        if (t + 1) % eval_every == 0:
            err = deep_error(params, dataset, config, derive_seed(seed, 10_000_000 + t))
            curve.append((t + 1, err))
            if stop_at_zero and err == 0.0:
                break
    return params, curve


def deep_error(params: DeepNetworkParams, dataset, config: AnnealConfig, seed: int) -> float:
    wrong = sum(deep_infer(params, dataset.X[i], config, derive_seed(seed, i)) != dataset.y[i]
                for i in range(len(dataset.y)))
    return wrong / len(dataset.y)
