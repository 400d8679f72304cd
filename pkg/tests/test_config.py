from pathlib import Path

import pytest

from fmpair.config import METHODS, load_config, parse_config
from fmpair.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]

BASE = """
[dataset]
path = ratings.csv
columns = user, item, rating

[model]
method = {method}
"""


def parse(text, base="/data"):
    return parse_config(text, base)


def field_of(text):
    with pytest.raises(ConfigError) as err:
        parse(text)
    return err.value.field


def test_minimal_config_defaults():
    cfg = parse(BASE.format(method="fm-pair"))
    assert cfg.path == Path("/data/ratings.csv")
    assert (cfg.folds, cfg.pool, cfg.ns, cfg.exclude) == (4, 1000, [10], "train")
    assert (cfg.train.k, cfg.train.epochs, cfg.train.learn_rate, cfg.train.sigma0) == (10, 300, 0.005, 0.1)
    assert cfg.train.item_bias_enabled


def test_bpr_mf_disables_bias():
    assert not parse(BASE.format(method="bpr-mf")).train.item_bias_enabled


def test_unknown_method_names_field():
    assert field_of(BASE.format(method="fm-magic")) == "model.method"


def test_unknown_keys_and_sections():
    assert field_of(BASE.format(method="fm-pair") + "learning_rate = 0.1\n") == "model.learning_rate"
    assert field_of(BASE.format(method="fm-pair") + "[extras]\nx = 1\n") == "extras"


def test_bad_values_name_their_field():
    assert field_of(BASE.format(method="fm-pair") + "k = ten\n") == "model.k"
    assert field_of(BASE.format(method="fm-pair") + "epochs = 0\n") == "model.epochs"
    assert field_of(BASE.format(method="fm-pair") + "[eval]\nexclude = some\n") == "eval.exclude"
    assert field_of(BASE.format(method="fm-pair") + "[split]\nfolds = 1\n") == "split.folds"


def test_missing_dataset_path():
    assert field_of("[model]\nmethod = fm-pair\n").startswith("dataset")


def test_method_requirements():
    assert field_of(BASE.format(method="fm-pair-cd")) == "cross_domain"
    assert field_of(BASE.format(method="fm-pair-all")) == "cross_domain"
    assert field_of(BASE.format(method="fm-pair-context")).startswith("features")


def test_context_schema_from_config():
    text = """
[dataset]
path = r.tsv
columns = user, item, rating, mood, age
delimiter = tab
context = mood, age
[model]
method = fm-pair-context
[features]
context = mood, age
bins.age = 0, 18, 65  # edges
weight.mood = 0.5
"""
    cfg = parse(text)
    assert cfg.descriptor.delimiter == "\t"
    schema = cfg.context
    assert schema["age"].kind == "binned" and schema["age"].bins.tolist() == [0, 18, 65]
    assert schema["mood"].weight == 0.5
    assert field_of(text.replace("context = mood, age\nbins", "context = mood\nbins")).startswith("features.")
    assert field_of(text.replace("bins.age = 0, 18, 65", "bins.age = 5")).startswith("features.")


def test_cross_domain_config_section():
    text = """
[dataset]
path = r.csv
columns = user, item, domain
implicit = false
[model]
method = fm-pair-cd
[cross_domain]
target = books
sources = music
scheme = binary
"""
    cfg = parse(text)
    assert cfg.cross_domain.target == "books" and list(cfg.cross_domain.sources) == ["music"]
    assert field_of(text.replace("scheme = binary", "scheme = tfidf")).startswith("cross_domain")
    assert field_of(text.replace("columns = user, item, domain", "columns = user, item")) == "dataset.columns"


def test_resolved_config_round_trips():
    for name in sorted(p.name for p in (ROOT / "configs").glob("*.ini")):
        cfg = load_config(ROOT / "configs" / name)
        again = parse_config(cfg.to_ini(), "/elsewhere")
        assert again.to_ini() == cfg.to_ini(), name


def test_shipped_configs_cover_methods():
    methods = {load_config(p).method for p in (ROOT / "configs").glob("*.ini")}
    assert {"fm-pair", "bpr-mf", "most-popular", "fm-map", "fm-pair-context", "fm-explicit"} <= methods
    assert methods <= set(METHODS)


def test_run_section_is_ignored():
    cfg = parse(BASE.format(method="most-popular") + "[run]\nversion = 0.1.0\nsha256.r = abc\n")
    assert cfg.method == "most-popular"
