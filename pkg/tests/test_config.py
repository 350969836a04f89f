"""
Tests for run configuration.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from tau_depth.config import RunConfig, load_config, parse_config_text
from tau_depth.errors import ConfigError


class TestRunConfig:
    """Tests for defaults and validation."""

    def test_defaults(self):
        """Defaults are valid and map onto the component options."""
        config = RunConfig().validate(60.0)
        assert config.window_s == 2.0
        assert config.solver_options().rate_hz == 100.0
        assert config.tracker_options().max_iters == 20
        gain = config.gain()
        assert (gain.l1, gain.l2) == (2.0, 20.0)

    def test_positive_fields(self):
        """Non-positive numeric fields are rejected."""
        with pytest.raises(ConfigError, match="window_s"):
            RunConfig(window_s=0.0).validate()
        with pytest.raises(ConfigError, match="observer_l2"):
            RunConfig(observer_l2=-1.0).validate()

    def test_bias_interval_may_be_zero(self):
        """The gyro-bias interval is off at zero but cannot be negative."""
        RunConfig(gyro_bias_interval_s=0.0).validate()
        with pytest.raises(ConfigError):
            RunConfig(gyro_bias_interval_s=-0.5).validate()

    def test_seed_may_be_zero(self):
        """Seed zero is the default; negative seeds are rejected."""
        assert RunConfig(seed=0).validate().seed == 0
        with pytest.raises(ConfigError, match="seed"):
            RunConfig(seed=-1).validate()

    def test_sample_count_floor(self):
        """At least six template pixels are needed for an affine fit."""
        with pytest.raises(ConfigError):
            RunConfig(sample_count=5).validate()

    def test_decimation(self):
        """Decimation must divide the frame rate."""
        assert RunConfig().decimation_step(60.0) == 1
        assert RunConfig(decimate_hz=30.0).decimation_step(60.0) == 2
        assert RunConfig(decimate_hz=60.0).decimation_step(60.0) == 1
        with pytest.raises(ConfigError):
            RunConfig(decimate_hz=7.0).validate(60.0)
        with pytest.raises(ConfigError):
            RunConfig(decimate_hz=120.0).decimation_step(60.0)

    def test_overrides(self):
        """None overrides keep the current value; unknown keys fail."""
        config = RunConfig().with_overrides(window_s=3.0, gate_threshold=None)
        assert config.window_s == 3.0
        assert config.gate_threshold == 2.0
        with pytest.raises(ConfigError, match="window"):
            RunConfig().with_overrides(window=3.0)


class TestConfigFiles:
    """Tests for key = value configuration files."""

    def test_parse(self):
        """Values are converted to the field types; comments are skipped."""
        config = parse_config_text(
            "# tracker\n"
            "patch_size = 40\n"
            "window_s = 1.5   # shorter window\n"
            "median_filter = yes\n"
            "decimate_hz = 30\n"
            "\n")
        assert config.patch_size == 40 and isinstance(config.patch_size, int)
        assert config.window_s == 1.5
        assert config.median_filter is True
        assert config.decimate_hz == 30.0

    def test_none_value(self):
        """Optional fields accept 'none'."""
        base = RunConfig(decimate_hz=30.0)
        assert parse_config_text("decimate_hz = none", base).decimate_hz is None

    @pytest.mark.parametrize("text", [
        "patch_size 40",
        "patch = 40",
        "patch_size = 40.5",
        "median_filter = maybe",
        "window_s = fast",
    ])
    def test_malformed(self, text):
        """Malformed lines, unknown keys and bad values are config errors."""
        with pytest.raises(ConfigError):
            parse_config_text(text)

    def test_load_layers(self, tmp_path):
        """File values override defaults; explicit overrides win over the file."""
        path = tmp_path / "run.cfg"
        path.write_text("window_s = 1.5\nobserver_l1 = 3\n")
        config = load_config(path, window_s=2.5, observer_l1=None)
        assert config.window_s == 2.5
        assert config.observer_l1 == 3.0

    def test_load_missing(self, tmp_path):
        """A missing configuration file is an error."""
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")

    def test_load_defaults(self):
        """Without a file the defaults are returned."""
        assert load_config() == RunConfig()
