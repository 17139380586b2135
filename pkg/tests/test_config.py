import pytest
from pydantic import ValidationError

from delone_lab.config import ExperimentConfig, load_config


def test_defaults_valid():
    cfg = ExperimentConfig()
    assert cfg.h == 0.0125 and cfg.window == 40.0
    assert len(cfg.hash()) == 64


def test_unknown_field_rejected():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"bogus": 1})


@pytest.mark.parametrize("bad", [
    {"good_scale": {"zeta": 1.5}},
    {"grid": {"h": 0.05}},
    {"L": 20.01},
    {"kind": "good-scale", "n_trials": 10},
    {"x": [0.0, 1.0]},
])
def test_preconditions_checked_at_parse(bad):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(bad)


def test_hash_ignores_out_and_threads():
    a = ExperimentConfig(out="a", threads=1)
    b = ExperimentConfig(out="b", threads=8)
    assert a.hash() == b.hash() != ExperimentConfig(seed=1).hash()


def test_env_and_override_precedence(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 3\nn_trials: 40\n")
    env = {"DELONE_LAB_CONFIG": str(path), "DELONE_LAB_SEED": "11", "DELONE_LAB_THREADS": "2"}
    cfg = load_config(None, {"n_trials": 50}, environ=env)
    assert (cfg.seed, cfg.n_trials, cfg.threads) == (11, 50, 2)
