"""Dense state-vector simulation of transverse-field annealing and amplitude amplification.

Basis convention: amplitude index ``k`` holds spin ``p`` in bit ``n-1-p`` of
``k``, with bit 0 meaning spin +1 and bit 1 meaning spin -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .ising import CapacityError, DimensionError, IsingProblem, brute_force_ground_state
from .network import NetworkParams, decode_outputs

MAX_QUBITS = 16


class IntegratorError(RuntimeError):
    pass


class NoTargetError(ValueError):
    pass


def basis_spins(n: int) -> np.ndarray:
    """(2^n, n) int8 array of spin values for every basis index."""
    k = np.arange(2 ** n, dtype=np.int64)
    bits = (k[:, None] >> np.arange(n - 1, -1, -1, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def basis_index(state) -> int:
    idx = 0
    for v in state:
        idx = (idx << 1) | (0 if v > 0 else 1)
    return idx


def uniform_state(n: int) -> np.ndarray:
    return np.full(2 ** n, 1.0 / math.sqrt(2 ** n), dtype=np.complex128)


def basis_state(state) -> np.ndarray:
    n = len(state)
    psi = np.zeros(2 ** n, dtype=np.complex128)
    psi[basis_index(state)] = 1.0
    return psi


def superposition(states) -> np.ndarray:
    """Equal-weight superposition of distinct basis states."""
    states = [np.asarray(s) for s in states]
    n = states[0].shape[0]
    psi = np.zeros(2 ** n, dtype=np.complex128)
    for s in states:
        psi[basis_index(s)] = 1.0
    return psi / np.linalg.norm(psi)


def diagonal_energies(problem: IsingProblem) -> np.ndarray:
    if problem.n_spins > MAX_QUBITS:
        raise CapacityError(f"{problem.n_spins} spins exceeds the {MAX_QUBITS}-qubit limit")
    Z = basis_spins(problem.n_spins).astype(np.float64)
    e = problem.edges
    return Z[:, e[:, 0]] * Z[:, e[:, 1]] @ problem.weights + Z @ problem.biases


def driver(n: int) -> sp.csr_matrix:
    """Transverse-field driver -sum_p X_p."""
    dim = 2 ** n
    k = np.arange(dim)
    rows = np.concatenate([k] * n)
    cols = np.concatenate([k ^ (1 << b) for b in range(n)])
    return sp.csr_matrix((-np.ones(rows.shape[0]), (rows, cols)), shape=(dim, dim))


@dataclass(frozen=True)
class AnnealSchedule:
    """Tabulated s(t) on a uniform grid of ``n_steps + 1`` knots over [0, t_f]."""

    t_f: float
    s_values: tuple[float, ...]

    def __post_init__(self):
        s = np.asarray(self.s_values, dtype=np.float64)
        if s.shape[0] < 2:
            raise ValueError("schedule needs at least one step")
        if s[0] != 0.0 or s[-1] != 1.0:
            raise ValueError("schedule must satisfy s(0) = 0 and s(t_f) = 1")
        if np.any(np.diff(s) < 0):
            raise ValueError("schedule must be non-decreasing")
        if not self.t_f > 0:
            raise ValueError("t_f must be positive")
        object.__setattr__(self, "s_values", tuple(float(v) for v in s))

    @classmethod
    def linear(cls, t_f: float = 10.0, n_steps: int = 1000) -> "AnnealSchedule":
        return cls(t_f, tuple(np.linspace(0.0, 1.0, n_steps + 1)))

    @classmethod
    def from_function(cls, s_of_t: Callable[[float], float], t_f: float,
                      n_steps: int = 1000) -> "AnnealSchedule":
        t = np.linspace(0.0, t_f, n_steps + 1)
        vals = np.array([s_of_t(v) for v in t], dtype=np.float64)
        vals[0], vals[-1] = 0.0, 1.0
        return cls(t_f, tuple(vals))

    @property
    def n_steps(self) -> int:
        return len(self.s_values) - 1

    @property
    def dt(self) -> float:
        return self.t_f / self.n_steps

    def midpoints(self) -> np.ndarray:
        s = np.asarray(self.s_values)
        return 0.5 * (s[1:] + s[:-1])


class Annealer:
    """Propagator for one (problem, schedule) pair, forward and reversed in time.

    Each step applies exp(-i H dt) for the Hamiltonian frozen at the step
    midpoint, H = (1 - s) * driver + s * H_problem. The exponential acts on
    the vector through its Taylor series summed to machine precision, with
    the step split so that ||H|| dt <= 1/2 per sub-step.
    """

    def __init__(self, problem: IsingProblem, schedule: AnnealSchedule):
        n = problem.n_spins
        if n > MAX_QUBITS:
            raise CapacityError(f"{n} spins exceeds the {MAX_QUBITS}-qubit limit")
        self.n = n
        self.schedule = schedule
        self.energies = diagonal_energies(problem)
        k = np.arange(2 ** n)
        self._flips = [k ^ (1 << b) for b in range(n)]
        self._emax = float(np.abs(self.energies).max()) if n else 0.0
        self.queries = 0

    def apply_h(self, psi, s):
        out = s * self.energies * psi
        if s != 1.0:
            drv = np.zeros_like(psi)
            for f in self._flips:
                drv += psi[f]
            out -= (1.0 - s) * drv
        return out

    def _step(self, psi, s, sign):
        norm_bound = (1.0 - s) * self.n + s * self._emax
        tau = self.schedule.dt
        n_sub = max(1, int(math.ceil(norm_bound * tau / 0.5)))
        h = -1j * sign * tau / n_sub
        for _ in range(n_sub):
            term = psi
            acc = psi.copy()
            for j in range(1, 60):
                term = self.apply_h(term, s) * (h / j)
                acc += term
                if np.linalg.norm(term) < 1e-17:
                    break
            psi = acc
        return psi

    def forward(self, psi):
        self.queries += 1
        for s in self.schedule.midpoints():
            psi = self._step(psi, s, 1.0)
        return self._checked(psi)

    def reverse(self, psi):
        """Adjoint evolution: the schedule run backwards with t -> t_f - t."""
        self.queries += 1
        for s in self.schedule.midpoints()[::-1]:
            psi = self._step(psi, s, -1.0)
        return self._checked(psi)

    @staticmethod
    def _checked(psi):
        drift = abs(np.linalg.norm(psi) - 1.0)
        if drift > 1e-6:
            raise IntegratorError(f"norm drift {drift:.2e} exceeds 1e-6; increase n_steps")
        return psi


def _check_initial(n: int, initial):
    if initial is None:
        return uniform_state(n)
    psi = np.asarray(initial, dtype=np.complex128)
    if psi.shape != (2 ** n,):
        raise DimensionError(f"state dimension {psi.shape} != ({2 ** n},)")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-9:
        raise ValueError("initial state is not normalized")
    return psi


def anneal_evolve(problem: IsingProblem, schedule: AnnealSchedule, initial=None,
                  reverse: bool = False) -> np.ndarray:
    """Final state of the annealing evolution; uniform superposition by default."""
    ann = Annealer(problem, schedule)
    psi = _check_initial(problem.n_spins, initial)
    return ann.reverse(psi) if reverse else ann.forward(psi)


def fidelity(a, b) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass
class Decomposition:
    p_correct: float
    psi_correct: np.ndarray | None
    psi_wrong: np.ndarray | None

    @property
    def p_wrong(self) -> float:
        return 1.0 - self.p_correct


def correct_mask(params: NetworkParams, y: int) -> np.ndarray:
    """Basis states whose output spins decode to ``y``."""
    Z = basis_spins(params.n_spins)
    return decode_outputs(Z[:, params.n_hidden:], params.n_classes, params.redundancy) == y


def decompose(state, params: NetworkParams, y: int) -> Decomposition:
    psi = np.asarray(state, dtype=np.complex128)
    if psi.shape != (2 ** params.n_spins,):
        raise DimensionError(f"state dimension {psi.shape} does not match {params.n_spins} spins")
    mask = correct_mask(params, y)
    a = np.where(mask, psi, 0)
    b = np.where(mask, 0, psi)
    pa = float(np.vdot(a, a).real)
    pb = float(np.vdot(b, b).real)
    total = pa + pb
    return Decomposition(pa / total,
                         a / math.sqrt(pa) if pa > 0 else None,
                         b / math.sqrt(pb) if pb > 0 else None)


def expectation_update_inputs(psi, n_hidden: int):
    """<Z_i>, <Z_alpha> and <Z_i Z_alpha> for hidden i and output alpha.

    Weights are scaled by the largest probability before normalizing, so an
    equal superposition of m basis states gives exactly count/m.
    """
    psi = np.asarray(psi)
    n = int(round(math.log2(psi.shape[0])))
    prob = np.abs(psi) ** 2
    r = prob / prob.max()
    Z = basis_spins(n).astype(np.float64)
    norm = r.sum()
    means = (r @ Z) / norm
    Zh, Zo = Z[:, :n_hidden], Z[:, n_hidden:]
    corr = ((Zh * r[:, None]).T @ Zo) / norm
    return means[:n_hidden], means[n_hidden:], corr


def grover_iterations(p: float) -> int:
    """round(pi / (4 asin sqrt p) - 1/2), clipped at zero."""
    if not 0 < p <= 1:
        raise NoTargetError(f"target weight {p} must be positive")
    # half-up rounding of v - 1/2 is floor(v)
    return max(0, math.floor(math.pi / (4.0 * math.asin(math.sqrt(p)))))


def direct_sampling_runs(p: float, confidence: float = 0.9) -> int:
    """Independent runs needed to observe the target with the given probability."""
    if p >= 1:
        return 1
    return int(math.ceil(math.log(1 - confidence) / math.log1p(-p)))


@dataclass
class AmplifyResult:
    state: np.ndarray
    queries: int
    k: int
    p_initial: float
    success_prob: float


def amplify(prepare: Callable, unprepare: Callable, initial: np.ndarray,
            target: np.ndarray) -> AmplifyResult:
    """Amplitude amplification of the ``target`` basis subspace.

    ``prepare``/``unprepare`` are the state-preparation unitary U and its
    adjoint. Each iteration flips the sign of the target subspace, then applies
    U^dagger, the reflection about the initial state and U. The flip must come
    first: U R U^dagger leaves the freshly prepared state unchanged.
    """
    psi = prepare(initial)
    queries = 1
    p = float(np.sum(np.abs(psi[target]) ** 2))
    if p <= 0:
        raise NoTargetError("target component has zero weight")
    k = grover_iterations(p)
    for _ in range(k):
        psi = np.where(target, -psi, psi)
        phi = unprepare(psi)
        phi = 2 * np.vdot(initial, phi) * initial - phi
        psi = prepare(phi)
        queries += 2
    success = float(np.sum(np.abs(psi[target]) ** 2))
    return AmplifyResult(psi, queries, k, p, success)


def householder_preparation(initial: np.ndarray, psi: np.ndarray):
    """Self-inverse reflection mapping ``initial`` onto ``psi`` up to a global phase."""
    overlap = np.vdot(initial, psi)
    if abs(overlap) > 0:
        psi = psi * (abs(overlap) / overlap)
    v = initial - psi
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return (lambda x: x), (lambda x: x)
    v = v / nv

    def reflect(x):
        return x - 2 * np.vdot(v, x) * v

    return reflect, reflect


def amplitude_amplify(problem: IsingProblem, schedule: AnnealSchedule, params: NetworkParams,
                      y: int, target: str = "wrong", initial=None) -> tuple[np.ndarray, int, AmplifyResult]:
    """Amplify the wrong (or correct) component of the annealed state.

    Returns the amplified state, the number of forward/reversed annealing runs
    (2k + 1), and the full result record.
    """
    if target not in ("wrong", "correct"):
        raise ValueError("target must be 'wrong' or 'correct'")
    ann = Annealer(problem, schedule)
    psi0 = _check_initial(problem.n_spins, initial)
    mask = correct_mask(params, y)
    if target == "wrong":
        mask = ~mask
    res = amplify(ann.forward, ann.reverse, psi0, mask)
    return res.state, res.queries, res


# ---------------------------------------------------------------------------
# toy amplification experiment
# ---------------------------------------------------------------------------

def toy_network(seed: int = 0, n_input: int = 4, n_hidden: int = 4, n_classes: int = 2,
                redundancy: int = 2):
    """Small random network plus an image whose ground state decodes to a class.

    Returns (params, x, y) with y the class of the exact ground state.
    """
    from .network import build_system_hamiltonian, decode, init_params

    for s in range(seed, seed + 1000):
        rng = np.random.default_rng(s)
        params = init_params(s, n_input, n_hidden, n_classes, redundancy)
        params = params.replace(J=params.J * 3.0, b_o=rng.normal(0, 0.2, params.n_output))
        x = rng.random(n_input)
        gs, _ = brute_force_ground_state(build_system_hamiltonian(params, x))
        y = decode(gs, params)
        if y >= 0:
            return params, x, y
    raise RuntimeError("no decodable toy network found")


def wrong_weight(problem, schedule_factory, params, y, t_f) -> float:
    psi = anneal_evolve(problem, schedule_factory(t_f))
    return decompose(psi, params, y).p_wrong


def tune_anneal_time(problem, params, y, p_target: float, *, n_steps: int = 1000,
                     t_max: float = 400.0) -> float:
    """Anneal time at which the wrong-class weight equals ``p_target``."""
    factory = lambda t: AnnealSchedule.linear(t, n_steps)  # noqa: E731
    f = lambda t: wrong_weight(problem, factory, params, y, t) - p_target  # noqa: E731
    lo, hi = 1e-3, 1.0
    f_lo = f(lo)
    if f_lo <= 0:
        raise ValueError("wrong weight is already below target at t_f -> 0")
    while f(hi) > 0:
        lo, hi = hi, hi * 2
        if hi > t_max:
            raise ValueError(f"wrong weight stays above {p_target} up to t_f = {t_max}")
    return brentq(f, lo, hi, xtol=1e-10, rtol=1e-12)


def amplification_experiment(p_targets=(0.04, 0.01), seed: int = 0, n_steps: int = 1000):
    """Rows of (n_spins, p_target, k, queries, success_prob, method) for each target."""
    from .network import build_system_hamiltonian

    params, x, y = toy_network(seed)
    problem = build_system_hamiltonian(params, x)
    rows = []
    for p in p_targets:
        t_f = tune_anneal_time(problem, params, y, p, n_steps=n_steps)
        _, queries, res = amplitude_amplify(problem, AnnealSchedule.linear(t_f, n_steps),
                                            params, y, "wrong")
        rows.append(dict(n_spins=problem.n_spins, p_target=res.p_initial, k=res.k,
                         queries=queries, success_prob=res.success_prob, method="amplified"))
        runs = direct_sampling_runs(res.p_initial)
        rows.append(dict(n_spins=problem.n_spins, p_target=res.p_initial, k=0, queries=runs,
                         success_prob=1 - (1 - res.p_initial) ** runs, method="direct"))
    return rows
