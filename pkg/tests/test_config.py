import numpy as np
import pytest

from discrepid.config import (
    EXPERIMENTS,
    build_library,
    load_preset,
    load_raw_config,
    nominal_model,
    parse_config,
    pendulum_params,
    truth_model,
)
from discrepid.errors import ConfigError


def minimal_vdp(**overrides):
    raw = {
        "experiment": "vdp-param",
        "system": {"alpha": 0.5, "alpha_nominal": 0.1},
        "integration": {"dt": 0.01, "t_span": 25.0, "x0": [0.5, 0.0]},
    }
    raw.update(overrides)
    return raw


class TestParsing:
    def test_minimal(self):
        cfg = parse_config(minimal_vdp())
        assert cfg.experiment == "vdp-param"
        assert cfg.integration.dt == 0.01
        assert cfg.solver.threshold == 0.05

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_vdp(experiment="vdp-chaos"))
        assert exc.value.field == "experiment"

    def test_zero_t_span_names_field(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_vdp(integration={"dt": 0.01, "t_span": 0.0, "x0": [0.5, 0.0]}))
        assert "t_span" in exc.value.field

    def test_wrong_x0_length(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_vdp(integration={"dt": 0.01, "t_span": 1.0, "x0": [0.5]}))
        assert "x0" in exc.value.field

    def test_negative_sigma(self):
        with pytest.raises(ConfigError) as exc:
            parse_config(minimal_vdp(noise={"sigma": -0.1}))
        assert "sigma" in exc.value.field

    def test_swingup_requires_block(self):
        raw = {
            "experiment": "pendulum-swingup",
            "integration": {"dt": 0.001, "t_span": 2.7, "x0": [3.14, 3.14, 0, 0, 0, 0]},
        }
        with pytest.raises(ConfigError) as exc:
            parse_config(raw)
        assert exc.value.field == "swingup"


class TestPresets:
    @pytest.mark.parametrize("name", EXPERIMENTS)
    def test_presets_parse(self, name):
        cfg = parse_config(load_preset(name))
        assert cfg.experiment == name

    def test_preset_thisholds(self):
        assert parse_config(load_preset("vdp-param")).solver.threshold == 0.05
        assert parse_config(load_preset("pendulum-energy")).solver.threshold == 1e-5
        assert parse_config(load_preset("pendulum-swingup")).solver.threshold == 0.01

    def test_load_raw_accepts_path(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"experiment": "vdp-param"}')
        assert load_raw_config(str(p))["experiment"] == "vdp-param"

    def test_load_raw_unknown(self):
        with pytest.raises(ConfigError):
            load_raw_config("no-such-thing")


class TestBuilders:
    def test_models_for_vdp(self):
        cfg = parse_config(minimal_vdp())
        t = truth_model(cfg)
        n = nominal_model(cfg)
        x = np.array([0.7, -0.3])
        assert not np.allclose(t.f(x, None), n.f(x, None))

    def test_pendulum_params_preset(self):
        cfg = parse_config(load_preset("pendulum-energy"))
        p = pendulum_params(cfg)
        assert p.m1 == 0.2704

    def test_pendulum_params_inline(self):
        raw = load_preset("pendulum-energy")
        raw["system"]["params"] = {
            "m1": 1.0, "m2": 1.0, "a1": 0.5, "a2": 0.5, "I1": 0.1, "I2": 0.1,
            "l1": 1.0, "l2": 1.0, "k1": 0.0, "k2": 0.0, "g": 9.81,
        }
        assert pendulum_params(parse_config(raw)).m1 == 1.0

    def test_library_blocks(self):
        lib = build_library(
            {
                "state_dim": 2,
                "blocks": [
                    {"type": "polynomial", "max_degree": 2, "exclude": ["x1^2", "x2^2"]},
                    {"type": "fourier", "max_order": 1},
                ],
            },
            2,
        )
        assert lib.size == 7 + 4

    def test_library_energy_type(self):
        lib = build_library({"type": "energy", "velocity_trig_products": True}, 4)
        assert lib.size == 68

    def test_library_explicit_terms(self):
        lib = build_library(
            {"state_dim": 2, "control_dim": 0,
             "terms": [{"exponents": [1, 0]}, {"trig": [["sin", 1, 2]]}]},
            2,
        )
        assert lib.names == ["x1", "sin(2*x2)"]

    def test_unknown_block_type(self):
        with pytest.raises(ConfigError):
            build_library({"state_dim": 2, "blocks": [{"type": "wavelet"}]}, 2)
