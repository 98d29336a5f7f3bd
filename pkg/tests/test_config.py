import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingdragon.config import ConfigError, RunConfig, load_config, parse_config

SAMPLE = """
# a toy run
method = eqprop     # trailing comment
m = 3
epochs = 4
beta_max = 5.5
evaluate_test = false
"""


class TestParse:
    def test_typed_values(self):
        cfg = parse_config(SAMPLE)
        assert cfg.method == "eqprop" and cfg.m == 3 and cfg.epochs == 4
        assert cfg.beta_max == 5.5 and cfg.evaluate_test is False
        assert cfg.sweeps == RunConfig().sweeps

    @pytest.mark.parametrize("text,match", [
        ("colour = red", "line 1: unknown key"),
        ("m = 2\nm = 3", "line 2: duplicate"),
        ("m 2", "line 1: expected"),
        ("m = two", "cannot parse"),
        ("evaluate_test = maybe", "cannot parse"),
        ("method = sgd", "method"),
        ("epochs = 0", "epochs"),
        ("train_error_source = oracle", "train_error_source"),
    ])
    def test_rejects(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(text)

    def test_overrides(self):
        cfg = parse_config(SAMPLE, epochs=9, seed=None)
        assert cfg.epochs == 9 and cfg.seed == 0

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            parse_config("", colour=1)

    def test_load(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text(SAMPLE)
        assert load_config(p) == parse_config(SAMPLE)


class TestDumpsAndHash:
    def test_round_trip(self):
        cfg = parse_config(SAMPLE)
        assert parse_config(cfg.dumps()) == cfg

    @given(st.integers(1, 50), st.floats(0.01, 100, allow_nan=False), st.booleans())
    @settings(max_examples=50)
    def test_round_trip_property(self, m, beta, flag):
        cfg = RunConfig(m=m, beta_max=beta, record_wall_time=flag)
        assert parse_config(cfg.dumps()) == cfg

    def test_hash_ignores_workers(self):
        assert RunConfig(workers=1).hash == RunConfig(workers=4).hash

    @pytest.mark.parametrize("change", [dict(m=11), dict(seed=1), dict(beta_max=9.0),
                                        dict(method="eqprop")])
    def test_hash_sensitive(self, change):
        assert RunConfig(**change).hash != RunConfig().hash

    def test_every_field_dumped(self):
        keys = [ln.split(" = ")[0] for ln in RunConfig().dumps().splitlines()]
        assert keys == [f.name for f in dataclasses.fields(RunConfig)]
