"""Spin configurations, Ising problems, energies and the exact enumeration oracle.

Energy convention (minimized everywhere)::

    E(s) = sum_{(i,j)} J_ij s_i s_j + sum_i b_i s_i

Spin states are plain ``int8`` numpy arrays holding +1/-1.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels

MAX_ENUM_SPINS = 24
TIE_TOL = 1e-9


class DimensionError(ValueError):
    """Array lengths or shapes do not agree."""


class ContractError(ValueError):
    """A documented precondition was violated."""


class CapacityError(ValueError):
    """The problem is too large for exhaustive treatment."""


def spin_state(values) -> np.ndarray:
    """Validate ``values`` as a +1/-1 vector and return it as ``int8``."""
    s = np.asarray(values)
    if s.ndim != 1:
        raise DimensionError(f"spin state must be 1-D, got shape {s.shape}")
    if not np.all((s == 1) | (s == -1)):
        raise ContractError("spin state entries must be +1 or -1")
    return s.astype(np.int8)


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(np.array([-1, 1], dtype=np.int8), size=n)


def hamming(a, b) -> int:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def lex_index(state: np.ndarray) -> int:
    """Integer whose order matches lexicographic order of states (-1 < +1)."""
    idx = 0
    for v in state:
        idx = (idx << 1) | (1 if v > 0 else 0)
    return idx


def state_from_index(idx: int, n: int) -> np.ndarray:
    bits = (idx >> np.arange(n - 1, -1, -1, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class IsingProblem:
    """Sparse Ising problem over ``n_spins`` spins.

    ``edges`` is a (k, 2) array with ``i < j`` per row and ``weights`` the
    matching couplings. ``frozen`` holds 0 for free spins and the fixed value
    (+1/-1) for frozen ones; frozen spins still contribute to energies.
    ``layers`` optionally records the layer index sets of a layered network
    so the bipartite structure can be checked and exploited.
    """

    n_spins: int
    edges: np.ndarray
    weights: np.ndarray
    biases: np.ndarray
    frozen: np.ndarray | None = None
    layers: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        n = int(self.n_spins)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        biases = np.asarray(self.biases, dtype=np.float64).reshape(-1)
        if weights.shape[0] != edges.shape[0]:
            raise DimensionError("edges and weights differ in length")
        if biases.shape[0] != n:
            raise DimensionError(f"expected {n} biases, got {biases.shape[0]}")
        if edges.size:
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ContractError("couplings must satisfy i < j (no self-couplings)")
            if edges.min() < 0 or edges.max() >= n:
                raise DimensionError("coupling index out of range")
            keys = edges[:, 0] * n + edges[:, 1]
            if np.unique(keys).shape[0] != keys.shape[0]:
                raise ContractError("duplicate coupling pair")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise ContractError("non-finite coefficient")
        frozen = self.frozen
        if frozen is not None:
            frozen = np.asarray(frozen, dtype=np.int8).reshape(-1)
            if frozen.shape[0] != n:
                raise DimensionError("frozen mask length mismatch")
            if not np.all(np.isin(frozen, (-1, 0, 1))):
                raise ContractError("frozen mask entries must be 0, +1 or -1")
            if not frozen.any():
                frozen = None
        layers = self.layers
        if layers is not None:
            layers = tuple(np.asarray(l, dtype=np.int64) for l in layers)
        for name, val in (("n_spins", n), ("edges", edges), ("weights", weights),
                          ("biases", biases), ("frozen", frozen), ("layers", layers)):
            object.__setattr__(self, name, val)
        for arr in (edges, weights, biases, frozen):
            if arr is not None:
                arr.setflags(write=False)

    @classmethod
    def from_couplings(cls, n_spins, couplings: Iterable[tuple[int, int, float]] = (),
                       biases=None, frozen=None, layers=None) -> "IsingProblem":
        rows = []
        for i, j, w in couplings:
            i, j = int(i), int(j)
            if i == j:
                raise ContractError("self-coupling")
            rows.append((min(i, j), max(i, j), float(w)))
        edges = np.array([(i, j) for i, j, _ in rows], dtype=np.int64).reshape(-1, 2)
        weights = np.array([w for _, _, w in rows], dtype=np.float64)
        if biases is None:
            biases = np.zeros(n_spins)
        return cls(n_spins, edges, weights, biases, frozen, layers)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.n_spins
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        vals = np.concatenate([self.weights, self.weights])
        m = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        m.sort_indices()
        return m

    @cached_property
    def _csr(self):
        a = self.adjacency
        return (a.indptr.astype(np.int64), a.indices.astype(np.int64),
                a.data.astype(np.float64))

    @property
    def free_mask(self) -> np.ndarray:
        if self.frozen is None:
            return np.ones(self.n_spins, dtype=bool)
        return self.frozen == 0

    @property
    def free_indices(self) -> np.ndarray:
        return np.flatnonzero(self.free_mask)

    def with_biases(self, biases) -> "IsingProblem":
        return IsingProblem(self.n_spins, self.edges, self.weights, biases,
                            self.frozen, self.layers)

    def with_frozen(self, frozen) -> "IsingProblem":
        return IsingProblem(self.n_spins, self.edges, self.weights, self.biases,
                            frozen, self.layers)

    def local_fields(self, state) -> np.ndarray:
        """b_i + sum_j J_ij s_j for every spin."""
        s = self.check_state(state)
        return self.biases + self.adjacency @ s.astype(np.float64)

    def check_state(self, state) -> np.ndarray:
        s = spin_state(state)
        if s.shape[0] != self.n_spins:
            raise DimensionError(f"state length {s.shape[0]} != n_spins {self.n_spins}")
        if self.frozen is not None:
            fixed = self.frozen != 0
            if np.any(s[fixed] != self.frozen[fixed]):
                raise ContractError("state violates frozen mask")
        return s

    def is_bipartite_layered(self) -> bool:
        """True when every coupling joins adjacent layers of ``layers``."""
        if self.layers is None:
            return False
        layer_of = np.full(self.n_spins, -1)
        for k, idx in enumerate(self.layers):
            layer_of[idx] = k
        if np.any(layer_of < 0):
            return False
        if not self.edges.size:
            return True
        li = layer_of[self.edges[:, 0]]
        lj = layer_of[self.edges[:, 1]]
        return bool(np.all(np.abs(li - lj) == 1))


def energy(problem: IsingProblem, state) -> float:
    s = problem.check_state(state).astype(np.float64)
    e = problem.edges
    return float(np.dot(problem.weights, s[e[:, 0]] * s[e[:, 1]]) + np.dot(problem.biases, s))


def flip_delta(problem: IsingProblem, state, i: int) -> float:
    """Energy change from flipping spin ``i``: -2 s_i (b_i + sum_j J_ij s_j)."""
    s = problem.check_state(state)
    row = problem.adjacency.getrow(i)
    f = problem.biases[i] + float(row.data @ s[row.indices])
    return -2.0 * float(s[i]) * f


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------

@dataclass
class _Reduced:
    """Problem restricted to free spins, frozen contributions folded in."""

    free: np.ndarray
    adj: sp.csr_matrix
    biases: np.ndarray
    const: float
    template: np.ndarray = field(repr=False)

    def expand(self, sub_state) -> np.ndarray:
        s = self.template.copy()
        s[self.free] = sub_state
        return s


def _reduce(problem: IsingProblem) -> _Reduced:
    free = problem.free_indices
    template = np.ones(problem.n_spins, dtype=np.int8)
    if problem.frozen is None:
        return _Reduced(free, problem.adjacency, problem.biases.copy(), 0.0, template)
    fixed = np.flatnonzero(~problem.free_mask)
    template[fixed] = problem.frozen[fixed]
    a = problem.adjacency
    s_fixed = problem.frozen[fixed].astype(np.float64)
    biases = problem.biases[free] + a[free][:, fixed] @ s_fixed
    a_ff = a[fixed][:, fixed]
    const = float(problem.biases[fixed] @ s_fixed + 0.5 * s_fixed @ (a_ff @ s_fixed))
    sub = a[free][:, free].tocsr()
    sub.sort_indices()
    return _Reduced(free, sub, biases, const, template)


def _csr_arrays(a: sp.csr_matrix):
    return a.indptr.astype(np.int64), a.indices.astype(np.int64), a.data.astype(np.float64)


def _bipartition(problem: IsingProblem, red: _Reduced):
    """Split free positions into (A, B) by layer parity, A the smaller side."""
    if not problem.is_bipartite_layered():
        return None
    pos = np.full(problem.n_spins, -1)
    pos[red.free] = np.arange(red.free.shape[0])
    even = np.concatenate([l for k, l in enumerate(problem.layers) if k % 2 == 0])
    odd = np.concatenate([l for k, l in enumerate(problem.layers) if k % 2 == 1]) \
        if len(problem.layers) > 1 else np.empty(0, dtype=np.int64)
    side0 = np.sort(pos[even][pos[even] >= 0])
    side1 = np.sort(pos[odd][pos[odd] >= 0])
    if side1.shape[0] < side0.shape[0]:
        side0, side1 = side1, side0
    return side0, side1


def _energy_tol(problem: IsingProblem) -> float:
    scale = float(np.abs(problem.weights).sum() + np.abs(problem.biases).sum())
    return TIE_TOL * max(1.0, scale)


def _plan(problem: IsingProblem):
    red = _reduce(problem)
    nfree = red.free.shape[0]
    if nfree <= MAX_ENUM_SPINS:
        return red, None
    parts = _bipartition(problem, red)
    if parts is not None and parts[0].shape[0] <= MAX_ENUM_SPINS:
        return red, parts
    raise CapacityError(
        f"{nfree} free spins exceeds the enumeration limit of {MAX_ENUM_SPINS} "
        "and no small bipartite side is available")


def _completion(red: _Reduced, a_pos, b_pos, a_idx: int) -> np.ndarray:
    sa = state_from_index(a_idx, a_pos.shape[0])
    g = red.biases[b_pos] + red.adj[b_pos][:, a_pos] @ sa.astype(np.float64)
    sb = np.where(g < 0, 1, -1).astype(np.int8)
    sub = np.empty(red.free.shape[0], dtype=np.int8)
    sub[a_pos] = sa
    sub[b_pos] = sb
    return sub, g


def _conditional_table(red: _Reduced, a_pos, b_pos) -> np.ndarray:
    block = red.adj[a_pos][:, b_pos].toarray()
    return _kernels.conditional_energies(red.biases[a_pos].copy(), block,
                                         red.biases[b_pos].copy())


def brute_force_ground_state(problem: IsingProblem) -> tuple[np.ndarray, float]:
    """Exact global minimizer, ties broken by lexicographically smallest state.

    Uses full enumeration of the free spins when there are at most 24 of them;
    otherwise, for layered bipartite problems, enumerates the smaller side and
    sets the other side by the sign of its local field.
    """
    return low_energy_spectrum(problem, 1)[0]


def low_energy_spectrum(problem: IsingProblem, k: int) -> list[tuple[np.ndarray, float]]:
    """The ``k`` lowest-energy states in ascending energy, ties lexicographic."""
    if k < 1:
        raise ContractError("k must be >= 1")
    red, parts = _plan(problem)
    tol = _energy_tol(problem)
    nfree = red.free.shape[0]
    if parts is None:
        if nfree == 0:
            s = red.template.copy()
            return [(s, energy(problem, s))]
        indptr, indices, data = _csr_arrays(red.adj)
        if k == 1:
            idx, _ = _kernels.enumerate_ground(indptr, indices, data, red.biases.copy(), tol)
            picks = [int(idx)]
        else:
            e = _kernels.enumerate_energies(indptr, indices, data, red.biases.copy())
            k = min(k, e.shape[0])
            if k < e.shape[0]:
                kth = np.partition(e, k - 1)[k - 1]
                cand = np.flatnonzero(e <= kth + tol)
            else:
                cand = np.arange(e.shape[0])
            picks = _sort_ties(cand, e[cand], tol)[:k]
        out = []
        for idx in picks:
            s = red.expand(state_from_index(idx, nfree))
            out.append((s, energy(problem, s)))
        return out
    return _bipartite_spectrum(problem, red, parts, k, tol)


def _sort_ties(indices, energies, tol) -> list[int]:
    """Order by energy, treating values within ``tol`` of the previous as tied."""
    order = np.lexsort((indices, energies))
    idx = np.asarray(indices)[order]
    en = np.asarray(energies)[order]
    groups = np.zeros(en.shape[0], dtype=np.int64)
    if en.shape[0] > 1:
        groups[1:] = np.cumsum(np.diff(en) > tol)
    order2 = np.lexsort((idx, groups))
    return [int(i) for i in idx[order2]]


def _bipartite_spectrum(problem, red, parts, k, tol):
    a_pos, b_pos = parts
    table = _conditional_table(red, a_pos, b_pos)
    n_total = 2 ** red.free.shape[0]
    k = min(k, n_total)
    kk = min(k, table.shape[0])
    kth = np.partition(table, kk - 1)[kk - 1]
    cand = np.flatnonzero(table <= kth + tol)
    # best-first over (A assignment, set of B excitations); flip cost is 2|g_b|
    heap = []
    seqs = {}
    for a_idx in cand:
        sub, g = _completion(red, a_pos, b_pos, int(a_idx))
        costs = 2.0 * np.abs(g)
        order = np.argsort(costs, kind="stable")
        seqs[int(a_idx)] = (sub, order, costs[order])
        heapq.heappush(heap, (float(table[a_idx]), int(a_idx), ()))
    found = []
    while heap:
        e, a_idx, flips = heapq.heappop(heap)
        if len(found) >= k and e > found[k - 1][0] + tol:
            break
        sub, order, costs = seqs[a_idx]
        s = sub.copy()
        for j in flips:
            s[b_pos[order[j]]] *= -1
        found.append((e, s))
        found.sort(key=lambda t: t[0])
        if flips:
            last = flips[-1]
            if last + 1 < costs.shape[0]:
                heapq.heappush(heap, (e + costs[last + 1], a_idx, flips + (last + 1,)))
                heapq.heappush(heap, (e - costs[last] + costs[last + 1], a_idx,
                                      flips[:-1] + (last + 1,)))
        elif costs.shape[0]:
            heapq.heappush(heap, (e + costs[0], a_idx, (0,)))
    states = [red.expand(s) for _, s in found]
    energies = np.array([energy(problem, s) for s in states])
    lex = np.array([lex_index(s[red.free]) for s in states], dtype=object)
    # lexsort cannot take object keys beyond 63 bits; sort in Python instead
    keyed = sorted(range(len(states)), key=lambda t: (energies[t], lex[t]))
    ranked = []
    for t in keyed:
        if ranked and energies[t] <= energies[ranked[-1][0]] + tol:
            ranked[-1][1].append(t)
        else:
            ranked.append((t, [t]))
    ordered = [t for _, grp in ranked for t in sorted(grp, key=lambda u: lex[u])]
    return [(states[t], float(energies[t])) for t in ordered[:k]]


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------

def dumps(problem: IsingProblem) -> str:
    """Line format: ``ising n``, ``c i j J``, ``b i v``, ``f i +-1``, ``l k idx...``."""
    lines = [f"ising {problem.n_spins}"]
    for (i, j), w in zip(problem.edges, problem.weights):
        lines.append(f"c {i} {j} {float(w)!r}")
    for i in np.flatnonzero(problem.biases):
        lines.append(f"b {i} {float(problem.biases[i])!r}")
    if problem.frozen is not None:
        for i in np.flatnonzero(problem.frozen):
            lines.append(f"f {i} {int(problem.frozen[i]):+d}")
    if problem.layers is not None:
        for k, idx in enumerate(problem.layers):
            lines.append(" ".join(["l", str(k)] + [str(int(v)) for v in idx]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> IsingProblem:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("ising "):
        raise ValueError("missing 'ising <n_spins>' header")
    n = int(lines[0].split()[1])
    couplings, biases, frozen = [], np.zeros(n), np.zeros(n, dtype=np.int8)
    layers: dict[int, list[int]] = {}
    for lineno, ln in enumerate(lines[1:], start=2):
        tok = ln.split()
        try:
            if tok[0] == "c":
                couplings.append((int(tok[1]), int(tok[2]), float(tok[3])))
            elif tok[0] == "b":
                biases[int(tok[1])] = float(tok[2])
            elif tok[0] == "f":
                frozen[int(tok[1])] = int(tok[2])
            elif tok[0] == "l":
                layers[int(tok[1])] = [int(v) for v in tok[2:]]
            else:
                raise ValueError(f"unknown record type {tok[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    layer_tuple = tuple(np.array(layers[k], dtype=np.int64) for k in sorted(layers)) \
        if layers else None
    return IsingProblem.from_couplings(n, couplings, biases, frozen, layer_tuple)


def problems_equal(a: IsingProblem, b: IsingProblem) -> bool:
    if a.n_spins != b.n_spins:
        return False
    fa = a.frozen if a.frozen is not None else np.zeros(a.n_spins, np.int8)
    fb = b.frozen if b.frozen is not None else np.zeros(b.n_spins, np.int8)
    la = a.layers or ()
    lb = b.layers or ()
    return (np.array_equal(a.edges, b.edges) and np.array_equal(a.weights, b.weights)
            and np.array_equal(a.biases, b.biases) and np.array_equal(fa, fb)
            and len(la) == len(lb) and all(np.array_equal(x, y) for x, y in zip(la, lb)))


def iter_all_states(n: int) -> Sequence[np.ndarray]:
    """All 2^n states in lexicographic order, as an (2^n, n) int8 array."""
    idx = np.arange(2 ** n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)
