import json

import pytest

from chemoutcome.config import PipelineConfig, load_config
from chemoutcome.errors import ConfigError


def test_defaults():
    cfg = load_config(env={})
    assert cfg.survival.n_trees == 300 and cfg.corpus.chunk_size_limit == 2500
    assert cfg.time_grid()[0] == 30.0 and cfg.time_grid()[-1] == 1095.0


def test_precedence(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("[survival]\nseed = 1\nn_trees = 50\nmin_leaf_size = 7\n")
    env = {"CHEMOUTCOME_SURVIVAL__SEED": "2", "CHEMOUTCOME_SURVIVAL__N_TREES": "60"}
    cfg = load_config(p, env=env, overrides={"survival.seed": "3"})
    assert cfg.survival.seed == 3  # flag beats env beats file
    assert cfg.survival.n_trees == 60  # env beats file
    assert cfg.survival.min_leaf_size == 7  # file beats default


def test_json_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"retrieval": {"k": 4}, "paths": {"drugs": None}}))
    cfg = load_config(p, env={})
    assert cfg.retrieval.k == 4 and cfg.paths.drugs is None


@pytest.mark.parametrize(
    "text",
    ["[survival]\nn_tress = 5\n", "[surival]\nseed = 1\n", "[survival]\nn_trees = 'many'\n", "not = [toml"],
)
def test_bad_files(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p, env={})


def test_unknown_env_key():
    with pytest.raises(ConfigError):
        load_config(env={"CHEMOUTCOME_SURVIVAL__TREES": "5"})
    # variables without a section separator are not config
    assert load_config(env={"CHEMOUTCOME_LLM_API_KEY": "x"}).survival.seed == 0


def test_coercion():
    cfg = load_config(env={}, overrides={"cohort.strict": "yes", "survival.mtry": "none", "survival.threshold": "0.4"})
    assert cfg.cohort.strict is True and cfg.survival.mtry is None and cfg.survival.threshold == 0.4
    with pytest.raises(ConfigError):
        load_config(env={}, overrides={"cohort.strict": "perhaps"})
    with pytest.raises(ConfigError):
        load_config(env={}, overrides={"survival.n_trees": 2.5})


@pytest.mark.parametrize(
    "key,value",
    [("survival.threshold", "1.5"), ("retrieval.fusion", "max"), ("extraction.backend", "http"),
     ("survival.grid_start", "0"), ("survival.test_fraction", "1")],
)
def test_validation(key, value):
    with pytest.raises(ConfigError):
        load_config(env={}, overrides={key: value})


def test_to_json_round_trip(tmp_path):
    cfg = PipelineConfig()
    p = tmp_path / "dump.json"
    p.write_text(cfg.to_json())
    assert load_config(p, env={}) == cfg
