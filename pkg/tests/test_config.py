import json

import pytest

from scenegrasp.config import PipelineConfig, config_from_dict, load_config
from scenegrasp.errors import ConfigError
from scenegrasp.grasp import PlannerParams


def test_defaults_follow_published_setup():
    cfg = PipelineConfig()
    assert (cfg.noise.k, cfg.noise.s, cfg.noise.sigma, cfg.noise.l) == (5000.0, 0.0002, 0.001, 6)
    assert cfg.experiment.elevations == (30.0, 45.0, 90.0)
    assert cfg.experiment.yaws == (0.0, 72.0, 144.0, 216.0, 288.0)
    assert cfg.viewpoints.sampler == "dodecahedron"
    assert cfg.method == "all-views"


def test_toml_round_trip(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('seed = 7\nmethod = "top-only"\n[noise]\nsigma = 0.002\n[planner]\ntop_k = 8\n'
                 '[experiment]\nmethods = ["real-view"]\nelevations = [45.0]\n')
    cfg = load_config(p)
    assert cfg.seed == 7 and cfg.method == "top-only"
    assert cfg.noise.sigma == 0.002 and cfg.noise.l == 6
    assert cfg.planner == PlannerParams(top_k=8)
    assert cfg.experiment.methods == ("real-view",) and cfg.experiment.elevations == (45.0,)
    assert config_from_dict(cfg.to_dict()) == cfg


def test_json_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"seed": 3, "completion": {"n_samples": 4}}))
    cfg = load_config(p)
    assert cfg.seed == 3 and cfg.completion.n_samples == 4


@pytest.mark.parametrize("data", [
    {"sede": 1},
    {"noise": {"sigmaa": 0.1}},
    {"nosie": {}},
    {"noise": {"sigma": "big"}},
    {"noise": {"enabled": 1}},
    {"completion": {"resolution": 40.5}},
    {"method": "side-view"},
    {"experiment": {"methods": ["real-view", "nope"]}},
    {"experiment": {"mode": "sometimes"}},
    {"noise": {"l": 0}},
    {"noise": 5},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_unreadable_or_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 1")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_digest_tracks_content():
    a, b = PipelineConfig(), PipelineConfig(seed=1)
    assert a.digest() == PipelineConfig().digest()
    assert a.digest() != b.digest()
    assert len(a.digest()) == 12
