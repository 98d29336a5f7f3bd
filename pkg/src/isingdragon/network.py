"""Three-layer Ising neural network: parameters, Hamiltonians, decoding, nudges.

Spins are ordered hidden first, then output. Output unit ``alpha`` belongs to
class ``alpha // redundancy``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .ising import ContractError, DimensionError, IsingProblem

Sampler = Callable[[IsingProblem], tuple[np.ndarray, float]]


@dataclass(frozen=True, eq=False)
class NetworkParams:
    W: np.ndarray  # (n_hidden, n_input)
    J: np.ndarray  # (n_hidden, n_output)
    b_h: np.ndarray
    b_o: np.ndarray
    n_classes: int = 10
    redundancy: int = 4

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        J = np.asarray(self.J, dtype=np.float64)
        b_h = np.asarray(self.b_h, dtype=np.float64).reshape(-1)
        b_o = np.asarray(self.b_o, dtype=np.float64).reshape(-1)
        if W.ndim != 2 or J.ndim != 2:
            raise DimensionError("W and J must be matrices")
        if W.shape[0] != J.shape[0] or b_h.shape[0] != J.shape[0]:
            raise DimensionError("hidden dimension mismatch among W, J, b_h")
        if b_o.shape[0] != J.shape[1]:
            raise DimensionError("output dimension mismatch between J and b_o")
        if J.shape[1] != self.n_classes * self.redundancy:
            raise DimensionError(
                f"n_output {J.shape[1]} != n_classes*redundancy "
                f"{self.n_classes}*{self.redundancy}")
        for name, arr in (("W", W), ("J", J), ("b_h", b_h), ("b_o", b_o)):
            if not np.all(np.isfinite(arr)):
                raise ContractError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_input(self) -> int:
        return self.W.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[0]

    @property
    def n_output(self) -> int:
        return self.J.shape[1]

    @property
    def n_spins(self) -> int:
        return self.n_hidden + self.n_output

    def replace(self, **kw) -> "NetworkParams":
        return replace(self, **kw)

    def equals(self, other: "NetworkParams") -> bool:
        return (self.n_classes == other.n_classes and self.redundancy == other.redundancy
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("W", "J", "b_h", "b_o")))


@dataclass(frozen=True)
class InputImage:
    pixels: np.ndarray
    label: int | None = None

    def __post_init__(self):
        x = np.asarray(self.pixels, dtype=np.float64).reshape(-1)
        if np.any(x < 0) or np.any(x > 1):
            raise ContractError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", x)


def _pixels(params: NetworkParams, x) -> np.ndarray:
    x = x.pixels if isinstance(x, InputImage) else np.asarray(x, dtype=np.float64)
    if x.shape != (params.n_input,):
        raise DimensionError(f"image has shape {x.shape}, expected ({params.n_input},)")
    return x


def _check_class(params: NetworkParams, y: int) -> int:
    if not 0 <= int(y) < params.n_classes:
        raise ContractError(f"class {y} outside 0..{params.n_classes - 1}")
    return int(y)


def nudge_vector(params: NetworkParams, y: int) -> np.ndarray:
    """+1 on the ``redundancy`` output units of class ``y``, -1 elsewhere."""
    y = _check_class(params, y)
    n = -np.ones(params.n_output)
    n[y * params.redundancy:(y + 1) * params.redundancy] = 1.0
    return n


def encode_bias(params: NetworkParams, x) -> np.ndarray:
    """Hidden-layer fields from the input image, h = W x."""
    return params.W @ _pixels(params, x)


def _layers(params: NetworkParams):
    nh = params.n_hidden
    return (np.arange(nh), np.arange(nh, nh + params.n_output))


def _edges(params: NetworkParams):
    nh, no = params.n_hidden, params.n_output
    ii, aa = np.meshgrid(np.arange(nh), np.arange(no), indexing="ij")
    return np.stack([ii.ravel(), nh + aa.ravel()], axis=1)


def build_system_hamiltonian(params: NetworkParams, x) -> IsingProblem:
    """Ising problem for the network with image ``x`` loaded as hidden fields."""
    hb = params.b_h + encode_bias(params, x)
    biases = np.concatenate([hb, params.b_o])
    return IsingProblem(params.n_spins, _edges(params), params.J.ravel(), biases,
                        layers=_layers(params))


def build_nudge_hamiltonian(params: NetworkParams, x, y: int,
                            nudge_strength: float = 1.0) -> IsingProblem:
    """System Hamiltonian with output biases shifted by ``-nudge_strength * n[y]``."""
    base = build_system_hamiltonian(params, x)
    shift = np.zeros(params.n_spins)
    shift[params.n_hidden:] = -nudge_strength * nudge_vector(params, y)
    return base.with_biases(base.biases + shift)


def group_sums(state, params: NetworkParams) -> np.ndarray:
    s = np.asarray(state)
    if s.shape[0] != params.n_spins:
        raise DimensionError(f"state length {s.shape[0]} != {params.n_spins}")
    out = s[params.n_hidden:].astype(np.int64)
    return out.reshape(params.n_classes, params.redundancy).sum(axis=1)


def decode(state, params: NetworkParams) -> int:
    """Class with the unique largest group sum, or -1 when the maximum is shared."""
    g = group_sums(state, params)
    top = g.max()
    winners = np.flatnonzero(g == top)
    return int(winners[0]) if winners.shape[0] == 1 else -1


def decode_outputs(outputs: np.ndarray, n_classes: int, redundancy: int) -> np.ndarray:
    """Vectorized decode over rows of output spins."""
    g = np.asarray(outputs).reshape(-1, n_classes, redundancy).sum(axis=2)
    top = g.max(axis=1, keepdims=True)
    ties = (g == top).sum(axis=1)
    return np.where(ties == 1, g.argmax(axis=1), -1)


def _hidden_from_outputs(params: NetworkParams, x, outputs: np.ndarray) -> np.ndarray:
    field = params.J @ outputs + params.b_h + encode_bias(params, x)
    # -sign(field) with sign(0) = +1
    return np.where(field >= 0, -1, 1).astype(np.int8)


def nudge_state(params: NetworkParams, x, y: int) -> np.ndarray:
    """Output spins set to n[y]; hidden spins anti-aligned with their total field."""
    n = nudge_vector(params, y)
    hidden = _hidden_from_outputs(params, x, n)
    return np.concatenate([hidden, n.astype(np.int8)])


def wrong_basin_references(params: NetworkParams, x, y: int) -> list[np.ndarray]:
    """Nudge states of every class other than ``y``, in ascending class order."""
    y = _check_class(params, y)
    return [nudge_state(params, x, c) for c in range(params.n_classes) if c != y]


def infer(params: NetworkParams, x, sampler: Sampler) -> int:
    state, _ = sampler(build_system_hamiltonian(params, x))
    return decode(state, params)


def init_params(seed: int, n_input: int = 784, n_hidden: int = 120, n_classes: int = 10,
                redundancy: int = 4) -> NetworkParams:
    """Uniform weights in +-1/sqrt(fan-in) and zero biases."""
    rng = np.random.default_rng(seed)
    n_output = n_classes * redundancy
    lim_w = 1.0 / np.sqrt(n_input)
    lim_j = 1.0 / np.sqrt(n_hidden)
    W = rng.uniform(-lim_w, lim_w, size=(n_hidden, n_input))
    J = rng.uniform(-lim_j, lim_j, size=(n_hidden, n_output))
    return NetworkParams(W, J, np.zeros(n_hidden), np.zeros(n_output), n_classes, redundancy)
