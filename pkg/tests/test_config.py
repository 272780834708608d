import pytest
from pydantic import ValidationError

from fbsch.config import SEED_ENV, dump_config, load_config


def write(tmp_path, text):
    path = tmp_path / "run.yaml"
    path.write_text(text)
    return path


def test_defaults_are_benchmark():
    cfg = load_config()
    p = cfg.model.params()
    assert (p.a0, p.a2, p.sigma, p.horizon) == (1 / 3, -1 / 3, 1 / 3, 1.0)
    study = cfg.study_config()
    assert study.mode == "temporal" and study.expected_rate == pytest.approx(0.375)
    assert [m for m, _ in study.levels] == [8, 16, 32, 64, 128]


def test_file_and_overrides(tmp_path):
    path = write(tmp_path, """
model: {h1: 0.75, h2: 0.5}
discretization: {m_ref: 512, n_ref: 64, levels: [8, 24]}
study: {mode: spatial, trajectories: 50, seed: 7}
""")
    with pytest.raises(ValidationError):
        load_config(path)  # 24 does not divide n_ref
    path = write(tmp_path, """
model: {h1: 0.75, h2: 0.5}
discretization: {m_ref: 512, n_ref: 64, levels: [8, 16, 32]}
study: {mode: temporal, trajectories: 50, seed: 7}
""")
    cfg = load_config(path, {"model.h1": 0.95, "study.seed": None})
    assert cfg.model.h1 == 0.95 and cfg.study.seed == 7


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, "model: {a4: 1.0}\n"))
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, "solver: {}\n"))


@pytest.mark.parametrize("text", [
    "model: {h1: 1.0}\n", "model: {sigma: -1}\n", "model: {a0: 0}\n", "model: {initial: 'y'}\n",
    "study: {trajectories: 1}\n", "discretization: {levels: [7]}\n", "study: {mode: joint}\n",
])
def test_invalid_values(tmp_path, text):
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, text))


def test_top_level_must_be_mapping(tmp_path):
    with pytest.raises(ValueError):
        load_config(write(tmp_path, "- 1\n- 2\n"))


def test_seed_env(monkeypatch, tmp_path):
    monkeypatch.setenv(SEED_ENV, "99")
    assert load_config().study.seed == 99
    assert load_config(write(tmp_path, "study: {seed: 3}\n")).study.seed == 3
    assert load_config(None, {"study.seed": 5}).study.seed == 5


def test_joint_levels(tmp_path):
    cfg = load_config(write(tmp_path, "discretization: {levels: [[8, 8], [16, 16]]}\nstudy: {mode: joint}\n"))
    assert cfg.study_config().levels == ((8, 8), (16, 16))


def test_dump_round_trip(tmp_path):
    cfg = load_config(None, {"model.h2": 0.95})
    again = load_config(write(tmp_path, dump_config(cfg)))
    assert again == cfg
