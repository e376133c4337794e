from pathlib import Path

import pytest

from configuration import (
    THREADS_VARIABLE,
    get_dispersion,
    get_potential,
    get_thread_count,
    load_config,
    parse_config,
    resolve_run,
)
from utilities.errors import ConfigurationError
from utilities.potential import CosineBump, DiskIndicator, TabulatedShape

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"

MINIMAL = """
dispersion:
  kind: dirac
model:
  alpha: 0.1
  beta: 0.2
"""


def test_minimal_config_uses_defaults():
    config = parse_config(MINIMAL)
    assert config.model.alphas == [0.1]
    assert config.model.betas == [0.2]
    assert config.discretization.N == 8
    assert config.run.out_dir == "results"
    assert get_dispersion(config).label == "dirac"


def test_empty_document_is_all_defaults():
    config = parse_config("")
    assert config.potential.shape == "square"
    assert config.potential.amplitudes == (0.0, 0.0, 1.0)


@pytest.mark.parametrize("name", ["standard_cell.yaml", "free_reference.yaml", "alpha_sweep.yaml"])
def test_shipped_configs_load(name):
    config = load_config(CONFIG_DIR / name)
    get_dispersion(config)
    get_potential(config)


def test_alpha_out_of_range():
    with pytest.raises(ConfigurationError, match=r"model.alpha: alpha must lie in \(0, 0.5\]"):
        parse_config("model:\n  alpha: 0.6\n")


def test_alpha_list_checked_elementwise():
    with pytest.raises(ConfigurationError, match="alpha must lie in"):
        parse_config("model:\n  alpha: [0.1, 0.7]\n")


def test_negative_beta():
    with pytest.raises(ConfigurationError, match="beta must be non-negative"):
        parse_config("model:\n  beta: -1\n")


def test_unknown_key():
    with pytest.raises(ConfigurationError, match="model.gamma"):
        parse_config("model:\n  gamma: 1.0\n")


def test_unknown_preset():
    with pytest.raises(ConfigurationError, match="dispersion.kind"):
        parse_config("dispersion:\n  kind: graphene\n")


def test_window_must_increase():
    with pytest.raises(ConfigurationError, match="increasing"):
        parse_config("feshbach:\n  window: [0.01, -0.01]\n")


def test_kernel_radii_range():
    with pytest.raises(ConfigurationError, match="radii"):
        parse_config("kernel:\n  radii: [1.0e-4, 1.0]\n")


def test_invalid_yaml():
    with pytest.raises(ConfigurationError, match="not valid YAML"):
        parse_config("model: [unclosed\n")


def test_non_mapping_document():
    with pytest.raises(ConfigurationError, match="mapping"):
        parse_config("- 1\n- 2\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_config(tmp_path / "absent.yaml")


def test_empty_alpha_list():
    assert parse_config("model:\n  alpha: []\n").model.alphas == []


def test_potential_shapes():
    disk = parse_config("potential:\n  shape: disk\n  radius: 0.25\n")
    assert isinstance(get_potential(disk).shape, DiskIndicator)
    cosine = parse_config("potential:\n  shape: cosine\n  half_width: 0.3\n")
    assert isinstance(get_potential(cosine).shape, CosineBump)
    table = parse_config("potential:\n  shape: tabulated\n  values: [[1, 0], [0, 1]]\n")
    assert isinstance(get_potential(table).shape, TabulatedShape)


def test_tabulated_needs_values():
    with pytest.raises(ConfigurationError, match="potential.values"):
        get_potential(parse_config("potential:\n  shape: tabulated\n"))


def test_potential_outside_cell_is_a_configuration_error():
    with pytest.raises(ConfigurationError, match="escapes the unit cell"):
        get_potential(parse_config("potential:\n  side: 1.5\n"))


def test_multilayer_preset():
    config = parse_config("dispersion:\n  kind: multilayer\n  layers: 3\n")
    assert get_dispersion(config).label == "multilayer-3"


def test_thread_precedence(monkeypatch):
    config = parse_config("run:\n  threads: 3\n")
    monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    assert get_thread_count(config) == 3
    monkeypatch.setenv(THREADS_VARIABLE, "5")
    assert get_thread_count(config) == 5
    assert get_thread_count(config, override=2) == 2


def test_thread_variable_must_be_integer(monkeypatch):
    monkeypatch.setenv(THREADS_VARIABLE, "many")
    with pytest.raises(ConfigurationError, match=THREADS_VARIABLE):
        get_thread_count(parse_config(""))


def test_resolve_run_applies_overrides(monkeypatch):
    monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    run = resolve_run(parse_config("run:\n  seed: 4\n"), out_dir="elsewhere", seed=7, threads=2)
    assert (run.out_dir, run.seed, run.threads) == ("elsewhere", 7, 2)
    assert resolve_run(parse_config("run:\n  seed: 4\n")).seed == 4


def test_resolve_run_rejects_negative_seed():
    with pytest.raises(ConfigurationError, match="run.seed"):
        resolve_run(parse_config(""), seed=-1)


def test_new_section_defaults():
    config = parse_config("")
    assert config.feshbach.certify_truncation is True
    assert config.kernel.lattice_check is True
    assert config.spectrum.correction_constant == 0.0
    with pytest.raises(ConfigurationError, match="spectrum.correction_constant"):
        parse_config("spectrum:\n  correction_constant: -1.0\n")
