import json

import pytest
import yaml

from app.config import (
    SUITES,
    expand_checks,
    load_config,
    merge_overrides,
    parse_region,
    validate_config,
)
from app.core.lattice import Region
from app.errors import ConfigError


def test_defaults():
    config = validate_config({})
    assert config.models == []
    assert config.ladder == [1]
    assert config.jobs == 1
    assert not config.timing


def test_suites_expand_in_order_without_duplicates():
    assert expand_checks(["lto", "lto1", "rp"]) == ["canonical_state", "lto1", "lto2", "lto3_lto4", "rp"]
    assert expand_checks(["all"]) == list(SUITES["all"])


def test_unknown_check_names_its_position():
    with pytest.raises(ConfigError) as info:
        validate_config({"checks": ["lto1", "lto9"]})
    assert info.value.code == "CONFIG_INVALID"
    assert info.value.field == "checks.1"


def test_region_check_must_be_a_lattice_check():
    with pytest.raises(ConfigError) as info:
        validate_config({"regions": [{"check": "skein_modular", "R": {"rect": [0, 0, 1, 1]}}]})
    assert info.value.field == "regions.0.check"


@pytest.mark.parametrize(
    "data,field",
    [
        ({"ladder": [0]}, "ladder"),
        ({"dense_budget": 0}, "dense_budget"),
        ({"models": [{"patch": [1, 4]}]}, "models.0.patch"),
        ({"models": [{"kind": "honeycomb"}]}, "models.0.kind"),
    ],
)
def test_field_paths(data, field):
    with pytest.raises(ConfigError) as info:
        validate_config(data)
    assert info.value.detail["field"] == field


def test_regions_parse_rect_and_sites():
    assert parse_region({"rect": [1, 1, 2, 1]}) == Region.rectangle(1, 1, 2, 1)
    assert parse_region({"sites": [[0, 0]]}) == Region.from_coords([(0, 0)])
    with pytest.raises(ValueError):
        parse_region({"rect": [0, 0, 0, 1]})


def test_budget_from_environment(monkeypatch):
    monkeypatch.setenv("LTO_VERIFY_BUDGET", "123")
    assert validate_config({}).dense_budget == 123
    monkeypatch.setenv("LTO_VERIFY_BUDGET", "lots")
    with pytest.raises(ConfigError) as info:
        validate_config({})
    assert info.value.field == "dense_budget"


def test_load_yaml_with_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump({"models": [{"kind": "toric", "patch": [4, 5]}], "checks": ["lto"], "seed": 3}))
    config = load_config(path, {"seed": 11, "checks": None, "tolerances": {"tol": 1e-6}})
    assert config.seed == 11
    assert config.checks == ["lto"]
    assert config.tolerances.tol == 1e-6
    assert config.models[0].patch == [4, 5]


def test_load_json_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"categories": [{"cat": "ising", "n": 1}]}))
    assert load_config(path).categories[0].cat == "ising"


def test_unreadable_or_non_mapping_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_merge_overrides_skips_empty_values():
    merged = merge_overrides({"checks": ["hd"], "tolerances": {"angle": 1e-6}}, {"checks": [], "tolerances": {"tol": 1e-3}})
    assert merged["checks"] == ["hd"]
    assert merged["tolerances"] == {"angle": 1e-6, "tol": 1e-3}
