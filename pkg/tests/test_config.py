import math

import pytest

from enn.config import ConfigError, load_config, parse_config, set_value
from enn.presets import PRESETS

BASE = """\
[experiment]
schema_version = 1
name = t
dataset = logic
trainer = enn
seed = 3
evaluations = error

[enn]
target_subconcepts = 8
differentia_multiplier = inf
"""


def test_every_preset_parses():
    for name, text in PRESETS.items():
        cfg = parse_config(text, name)
        assert cfg.name == name


def test_values_are_typed():
    cfg = parse_config(BASE)
    assert cfg.seed == 3 and cfg.enn.target_subconcepts == 8
    assert math.isinf(cfg.enn.differentia_multiplier) and cfg.enn.symbolic
    assert cfg.deliberation is None and cfg.gdn is None


def test_unknown_key_reports_its_line():
    text = BASE + "svm_kost = 3\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text, "x.cfg")
    assert err.value.line == 12 and "svm_kost" in str(err.value) and "svm_cost" in str(err.value)
    assert str(err.value).startswith("x.cfg:12:")


def test_bad_value_reports_its_line():
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("seed = 3", "seed = three"))
    assert err.value.line == 6


def test_unknown_section_dataset_and_evaluation():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(BASE + "[extra]\na = 1\n")
    with pytest.raises(ConfigError, match="must be one of"):
        parse_config(BASE.replace("dataset = logic", "dataset = cifar"))
    with pytest.raises(ConfigError) as err:
        parse_config(BASE.replace("evaluations = error", "evaluations = error, magic"))
    assert "magic" in str(err.value) and err.value.line == 7


def test_schema_version_and_required_keys():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(BASE.replace("schema_version = 1", "schema_version = 2"))
    with pytest.raises(ConfigError, match="missing required key 'trainer'"):
        parse_config(BASE.replace("trainer = enn\n", ""))
    with pytest.raises(ConfigError, match="enn"):
        parse_config(BASE.split("[enn]")[0])


def test_set_value_and_seed_override():
    cfg = parse_config(BASE).with_seed(11)
    assert cfg.seed == 11
    text = set_value(BASE, "deliberation", "trigger_ratio", "3")
    assert parse_config(text).deliberation.trigger_ratio == 3.0
    text = set_value(BASE, "enn", "svm_cost", "5")
    assert parse_config(text).enn.svm_cost == 5.0
    assert parse_config(BASE).sha256 != cfg.sha256


def test_load_config_names_and_files(tmp_path):
    assert load_config("logic_enn").dataset == "logic"
    path = tmp_path / "a.cfg"
    path.write_text(BASE)
    assert load_config(str(path)).name == "t"
    with pytest.raises(ConfigError, match="presets"):
        load_config("no_such_thing")
