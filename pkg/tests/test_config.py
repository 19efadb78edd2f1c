"""
Unit tests for experiment configuration
"""
import pytest
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.bench import build_problem
from src.config import (
    DB_PATH, OUTPUT_DIR, ExperimentConfig, LMConfig, NetConfig, load_config, parse_sweep,
)
from src.errors import ConfigError


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_defaults_validate():
    config = ExperimentConfig().validate()
    assert config.net_config() == NetConfig(40, 200, 1, 0)
    assert config.lm_config().seed == 0
    assert config.out_dir == OUTPUT_DIR
    assert config.db_path == DB_PATH
    assert config.lm.separable is True


def test_parse_sweep():
    assert parse_sweep("64, 128,256") == [64, 128, 256]
    assert parse_sweep("16 32") == [16, 32]
    with pytest.raises(ConfigError):
        parse_sweep("64, big")


def test_load_full_config(tmp_path):
    path = write(tmp_path, """
[experiment]
name = ring
mode = exact
seed = 7

[problem]
geometry = circle 0.5
u_minus = x^2 + y^2
u_plus = 0.25

[network]
width = 12
samples = 60

[training]
max_epochs = 50
loss_tol = 1e-10

[grid]
sweep = 32, 64, 128

[output]
out_dir = results
db_path =
timings = yes
""")
    config = load_config(path).validate()
    assert config.name == "ring"
    assert config.seed == 7
    assert config.preset is None
    assert config.problem["u_minus"] == "x^2 + y^2"
    assert config.width == 12
    assert config.n_samples == 60
    assert config.lm.max_epochs == 50
    assert config.lm.loss_tol == pytest.approx(1e-10)
    assert config.sweep == [32, 64, 128]
    assert config.out_dir == "results"
    assert config.db_path is None
    assert config.timings is True
    assert config.lm_config().seed == 7


def test_training_mode_switch(tmp_path):
    config = load_config(write(tmp_path, "[training]\nseparable = no\n"))
    assert config.lm.separable is False
    assert config.lm_config().separable is False
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[training]\nseparable = sometimes\n"))


def test_file_overrides_base(tmp_path):
    base = ExperimentConfig(width=99)
    path = write(tmp_path, "[grid]\nsweep = 16 32\n")
    config = load_config(path, base=base)
    assert config.width == 99
    assert config.sweep == [16, 32]
    assert base.sweep == [64, 128, 256, 512]


def test_problem_keys_keep_case(tmp_path):
    path = write(tmp_path, "[problem]\ngeometry = custom\nlevel_set = X^2 + y^2 - 1\n")
    config = load_config(path)
    assert "level_set" in config.problem


def test_bad_values(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[network]\nwidth = wide\n"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[output]\ntimings = maybe\n"))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.ini"))


def test_validate_rejects():
    with pytest.raises(ConfigError):
        ExperimentConfig(sweep=[64, 100]).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=None).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="relative").validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="successive", sweep=[64]).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(preset=None).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(width=0).validate()
    with pytest.raises(ConfigError):
        LMConfig(up_factor=1.0).validate()


@pytest.mark.parametrize("name", ["example1.ini", "custom_circle.ini", "ellipse_jumps.ini"])
def test_shipped_configs(name):
    path = os.path.join(os.path.dirname(__file__), '..', 'configs', name)
    config = load_config(path).validate()
    problem = build_problem(config)
    assert problem.dim == 2


def test_json_round_trip():
    config = ExperimentConfig(name="x", sweep=[8, 16])
    config.lm.max_epochs = 12
    restored = ExperimentConfig.from_json(config.to_json())
    assert restored == config
    assert isinstance(restored.lm, LMConfig)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
