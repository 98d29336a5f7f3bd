import numpy as np
import pytest

from isingdragon.deep import (DeepNetworkParams, deep_decode, deep_hamiltonian, deep_sweep_pass,
                              feedforward_state, forward_sweep, init_deep)
from isingdragon.ising import ContractError, DimensionError, energy
from isingdragon.network import (NetworkParams, build_nudge_hamiltonian,
                                 build_system_hamiltonian, nudge_state)
from isingdragon.samplers import AnnealConfig, derive_seed
from isingdragon.trainers import LearningRates, dragon_update

RATES = LearningRates(0.03, 0.02, 0.01, 0.005)


def deep(seed=0, layers=(4, 3, 5, 6), n_input=5):
    p = init_deep(seed, n_input, layers, 3, 2)
    rng = np.random.default_rng(seed + 100)
    return DeepNetworkParams(p.W, p.J, tuple(rng.normal(scale=0.3, size=n) for n in layers),
                             3, 2)


def as_shallow(p: DeepNetworkParams) -> NetworkParams:
    return NetworkParams(p.W, p.J[0], p.b[0], p.b[1], p.n_classes, p.redundancy)


class TestParams:
    def test_shapes(self):
        p = deep()
        assert p.layers == [4, 3, 5, 6] and p.n_spins == 18
        assert p.layer_slice(2) == slice(7, 12)

    def test_single_layer_rejected(self):
        with pytest.raises(DimensionError):
            DeepNetworkParams(np.zeros((6, 2)), (), (np.zeros(6),), 3, 2)

    def test_output_size(self):
        with pytest.raises(DimensionError):
            init_deep(0, 4, [3, 5], 3, 2)

    def test_coupling_shape(self):
        with pytest.raises(DimensionError):
            DeepNetworkParams(np.zeros((2, 2)), (np.zeros((3, 6)),), (np.zeros(2), np.zeros(6)),
                              3, 2)


class TestHamiltonian:
    @pytest.mark.parametrize("seed", range(5))
    def test_two_layers_match_shallow(self, seed):
        p = deep(seed, layers=(4, 6))
        rng = np.random.default_rng(seed)
        x = rng.random(5)
        s = rng.choice(np.array([-1, 1], dtype=np.int8), p.n_spins)
        shallow = as_shallow(p)
        assert energy(deep_hamiltonian(p, x), s) == pytest.approx(
            energy(build_system_hamiltonian(shallow, x), s), rel=1e-12)
        assert energy(deep_hamiltonian(p, x, 1, 0.5), s) == pytest.approx(
            energy(build_nudge_hamiltonian(shallow, x, 1, nudge_strength=0.5), s), rel=1e-12)

    def test_layer_chain_energy(self):
        p = deep(1)
        rng = np.random.default_rng(1)
        x = rng.random(5)
        s = rng.choice(np.array([-1, 1], dtype=np.int8), p.n_spins)
        parts = [s[p.layer_slice(l)].astype(float) for l in range(p.n_layers)]
        ref = sum(parts[l] @ p.J[l] @ parts[l + 1] for l in range(p.n_layers - 1))
        ref += sum(p.b[l] @ parts[l] for l in range(p.n_layers)) + (p.W @ x) @ parts[0]
        assert energy(deep_hamiltonian(p, x), s) == pytest.approx(ref, rel=1e-12)

    def test_is_layered(self):
        assert deep_hamiltonian(deep(), np.zeros(5)).is_bipartite_layered()

    def test_bad_class(self):
        with pytest.raises(ContractError):
            deep_hamiltonian(deep(), np.zeros(5), 3)


class TestDecode:
    def test_winner(self):
        p = deep()
        s = -np.ones(p.n_spins, dtype=np.int8)
        s[-2:] = 1
        assert deep_decode(p, s) == 2

    def test_tie(self):
        p = deep()
        assert deep_decode(p, np.ones(p.n_spins, dtype=np.int8)) == -1


class TestSweep:
    def test_feedforward_anti_aligned(self):
        p = deep(2)
        x = np.random.default_rng(2).random(5)
        s = feedforward_state(p, x)
        f0 = p.b[0] + p.W @ x
        assert np.all(s[p.layer_slice(0)] == np.where(f0 >= 0, -1, 1))

    def test_forward_sweep_frozen_layers(self):
        hist = []
        forward_sweep(deep(3), np.full(5, 0.5), AnnealConfig.fast(), 0, hist)
        assert [h["active"] for h in hist] == [(0, 1), (1, 2), (2, 3)]
        assert all(h["frozen_unchanged"] for h in hist)

    @pytest.mark.parametrize("seed", range(3))
    def test_backward_frozen_unchanged(self, seed):
        p = deep(seed)
        x = np.random.default_rng(seed).random(5)
        hist = []
        deep_sweep_pass(p, x, seed % 3, 4, RATES, AnnealConfig.fast(), seed, history=hist)
        back = [h for h in hist if h["phase"] == "backward"]
        assert [h["active"] for h in back] == [(2, 3), (1, 2), (0, 1)]
        free = forward_sweep(p, x, AnnealConfig.fast(), derive_seed(seed, 0))
        for h in back:
            lo, hi = h["active"]
            keep = np.ones(p.n_spins, dtype=bool)
            keep[p.layer_slice(lo)] = keep[p.layer_slice(hi)] = False
            assert h["frozen_unchanged"]
            assert all(np.array_equal(s[keep], free[keep]) for s in h["batch"].states)

    def test_top_pair_uses_class_references(self):
        hist = []
        deep_sweep_pass(deep(4), np.full(5, 0.2), 1, 3, RATES, AnnealConfig.fast(), 4,
                        history=hist)
        top = hist[-3]
        assert top["active"] == (2, 3) and top["batch"].origins == ["0", "2", "random"]

    def test_deterministic(self):
        cfg = AnnealConfig.fast()
        a = deep_sweep_pass(deep(5), np.full(5, 0.3), 0, 3, RATES, cfg, 9)
        b = deep_sweep_pass(deep(5), np.full(5, 0.3), 0, 3, RATES, cfg, 9)
        assert a.equals(b)


class TestTwoLayerReduction:
    @pytest.mark.parametrize("seed", range(6))
    def test_equals_dragon_update(self, seed):
        p = deep(seed, layers=(4, 6))
        rng = np.random.default_rng(seed)
        x, y = rng.random(5), int(rng.integers(0, 3))
        hist = []
        new = deep_sweep_pass(p, x, y, 5, RATES, AnnealConfig.fast(), seed, history=hist)
        entry = hist[-1]
        shallow = as_shallow(p)
        assert np.array_equal(entry["nudge"], nudge_state(shallow, x, y))
        ref = dragon_update(shallow, x, y, entry["batch"], entry["nudge"], RATES)
        assert np.array_equal(new.W - p.W, ref.W - shallow.W)
        assert np.array_equal(new.J[0] - p.J[0], ref.J - shallow.J)
        assert np.array_equal(new.b[0] - p.b[0], ref.b_h - shallow.b_h)
        assert np.array_equal(new.b[1] - p.b[1], ref.b_o - shallow.b_o)


class TestUpdateAssignment:
    def test_each_pair_owns_its_parameters(self):
        p = deep(6)
        x = np.random.default_rng(6).random(5)
        hist = []
        new = deep_sweep_pass(p, x, 2, 4, RATES, AnnealConfig.fast(), 6, history=hist)
        for h in (h for h in hist if h["phase"] == "backward"):
            lo, hi = h["active"]
            S = np.stack(h["batch"].states).astype(float)
            a, b = S[:, p.layer_slice(lo)], S[:, p.layer_slice(hi)]
            an = h["nudge"][p.layer_slice(lo)].astype(float)
            bn = h["nudge"][p.layer_slice(hi)].astype(float)
            dJ = RATES.delta_J * (a.T @ b / len(S) - np.outer(an, bn))
            assert np.allclose(new.J[lo] - p.J[lo], dJ, atol=1e-15)
            assert np.allclose(new.b[lo] - p.b[lo], RATES.delta_h * (a.mean(0) - an), atol=1e-15)
            if lo == 0:
                assert np.allclose(new.W - p.W, RATES.delta_W * np.outer(a.mean(0) - an, x),
                                   atol=1e-15)
            if hi == p.n_layers - 1:
                assert np.allclose(new.b[hi] - p.b[hi], RATES.delta_o * (b.mean(0) - bn),
                                   atol=1e-15)
