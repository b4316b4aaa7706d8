import json

import numpy as np
import pytest
from pydantic import ValidationError

from src.algebra.errors import ConfigError
from src.app.config import ProbeGrid, RunConfig, load_run_config, parse_run_config
from src.physics.spectral_model import ConstantDispersion, LinearDispersion, PhysParams

GAUSSIAN = {"type": "gaussian", "re_amp": 1.0, "im_amp": 0.0, "center": [0.0], "width": 1.0}


def base_config(**overrides):
    data = {
        "schema": 1,
        "phys": {"hbar": 1.0, "mass": 1.0, "dim": 1},
        "dispersion": {"type": "constant", "omega0": 1.0},
        "form_factors": [GAUSSIAN],
        "epsilon": "1,0",
        "times": [1.0, 1.0],
        "probe_p": [3.0],
    }
    data.update(overrides)
    return data


class TestParseRunConfig:
    def test_valid_config(self):
        config = parse_run_config(base_config())
        assert config.phys == PhysParams()
        assert isinstance(config.dispersion, ConstantDispersion)
        assert config.epsilon.values() == (1, 0)
        assert config.probe_p.values == (3.0,)
        assert config.route == "all"
        assert config.kernel_factors == (0, 0)

    def test_single_factor_is_broadcast(self):
        factors = parse_run_config(base_config()).factors()
        assert len(factors) == 2
        assert factors[0] is factors[1]

    def test_factor_indices(self):
        second = dict(GAUSSIAN, width=0.5)
        config = parse_run_config(base_config(form_factors=[GAUSSIAN, second], factor_indices=[1, 0]))
        assert [f.width for f in config.factors()] == [0.5, 1.0]

    def test_factor_indices_out_of_range(self):
        config = parse_run_config(base_config(factor_indices=[0, 3]))
        with pytest.raises(ConfigError):
            config.factors()

    def test_times_must_match_epsilon(self):
        config = parse_run_config(base_config(times=[1.0]))
        with pytest.raises(ConfigError):
            config.position_times()

    def test_linspace_momentum_grid(self):
        config = parse_run_config(base_config(probe_p={"start": 1.0, "stop": 2.0, "num": 5}))
        assert np.allclose(config.probe_p.values, [1.0, 1.25, 1.5, 1.75, 2.0])

    @pytest.mark.parametrize("overrides", [
        {"schema": 2},
        {"colour": "red"},
        {"route": "fastest"},
        {"epsilon": "1,2"},
        {"times": [1.0, -1.0]},
        {"lambda_list": [0.5, 0.0]},
        {"kernel_factors": [0, 5]},
        {"phys": {"hbar": 1.0, "planck": 2.0}},
        {"phys": {"mass": -1.0}},
        {"probe_p": {"start": 0.0, "stop": 1.0}},
        {"form_factors": [dict(GAUSSIAN, type="lorentzian")]},
        {"dispersion": {"type": "linear"}},
    ])
    def test_invalid_configs(self, overrides):
        with pytest.raises(ConfigError):
            parse_run_config(base_config(**overrides))

    def test_missing_schema(self):
        data = base_config()
        del data["schema"]
        with pytest.raises(ConfigError):
            parse_run_config(data)

    def test_require_names_missing_field(self):
        config = parse_run_config({"schema": 1})
        with pytest.raises(ConfigError, match="dispersion"):
            config.require("dispersion")

    def test_with_epsilon(self):
        config = RunConfig(schema=1).with_epsilon(parse_run_config(base_config(epsilon="1,1,0,0")).epsilon)
        assert config.epsilon.n == 2

    def test_error_names_the_offending_field(self):
        with pytest.raises(ConfigError, match="mass"):
            parse_run_config(base_config(phys={"mass": -1.0}))

    def test_validation_error_is_chained(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_run_config(base_config(route="fastest"))
        assert isinstance(excinfo.value.__cause__, ValidationError)

    def test_dispersion_selected_by_type(self):
        config = parse_run_config(base_config(dispersion={"type": "linear", "c": 2.0}))
        assert isinstance(config.dispersion, LinearDispersion)
        assert config.dispersion.c == 2.0

    def test_empty_momentum_grid_is_missing(self):
        config = parse_run_config(base_config(omega_probe=[]))
        with pytest.raises(ConfigError, match="omega_probe"):
            config.require("omega_probe")


class TestProbeGrid:
    def test_scalar(self):
        assert ProbeGrid.model_validate(2.5).values == (2.5,)

    def test_list(self):
        assert ProbeGrid.model_validate([1, 2.5]).values == (1.0, 2.5)

    def test_rejects_strings(self):
        with pytest.raises(ValidationError):
            ProbeGrid.model_validate("2.5")

    def test_linspace_rejects_unknown_fields(self):
        with pytest.raises(ValidationError):
            ProbeGrid.model_validate({"start": 0.0, "stop": 1.0, "num": 3, "step": 0.5})


class TestLoadRunConfig:
    def test_round_trip_from_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(base_config()))
        assert load_run_config(str(path)).epsilon.values() == (1, 0)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{schema: 1")
        with pytest.raises(ConfigError):
            load_run_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(str(tmp_path / "absent.json"))
