import numpy as np
import pytest

from tdsrobust.config import build_nonlinearity, load_config, parse_config
from tdsrobust.errors import ConfigError
from tdsrobust.rfdesim import NonlinearityKind
from tdsrobust.sysmodel import SectorKind


def test_defaults(example_config):
    config = parse_config(example_config())
    assert config.system.n == 2
    assert config.structure.p == 4
    assert config.sector is None
    assert config.order == 24
    assert config.spectrum_order == 32
    assert config.simulation.step == pytest.approx(1e-2)
    assert config.simulation.nonlinearity is None
    assert config.monotone_tol == pytest.approx(1e-5)
    assert config.derivative_tol == pytest.approx(1e-4)
    assert config.c_grid == [(1.0, 1.0), (1.0, 0.5), (0.1, 1.0)]
    assert [w.shape for w in config.complete_type] == [(2, 2)] * 3


def test_structure_defaults_to_identity(example_config):
    conf = example_config()
    conf["structure"] = {"b": [0.0, 1.0]}
    config = parse_config(conf)
    assert config.structure.b.shape == (2, 1)
    np.testing.assert_array_equal(config.structure.c0, np.eye(2))


def test_preset_sector(example_config):
    config = parse_config(example_config(sector={"preset": "I|a", "params": {"gamma": 0.1}}))
    assert config.sector_kind == SectorKind.I_A
    np.testing.assert_allclose(config.sector.pi_zz, 0.01 * np.eye(4))


def test_raw_sector(example_config):
    raw = {"pi_zz": np.eye(4).tolist(), "pi_za": 0.0, "pi_aa": (-np.eye(2)).tolist()}
    config = parse_config(example_config(sector={"raw": raw}))
    assert config.sector_kind is None
    assert config.sector.pi_za.shape == (4, 2)


def test_sector_without_k1_is_left_open(example_config):
    conf = example_config(sector={"preset": "III|a", "params": {"k2": 1.0}})
    conf["structure"] = {"c1": np.zeros((0, 2)).tolist()}
    config = parse_config(conf)
    assert config.sector_kind == SectorKind.III_A
    assert config.sector is None


@pytest.mark.parametrize(
    "section, value, path",
    [
        ("system", {"a0": [[0.0]], "a1": [[0.0]], "h": -1.0}, "system.h"),
        ("sector", {"preset": "I|a"}, "sector.params.gamma"),
        ("sector", {"preset": "IV"}, "sector.preset"),
        ("sweep", {"grid_points": 3}, "sweep.grid_points"),
        ("simulation", {"step": 0.0}, "simulation.step"),
    ],
)
def test_errors_name_the_offending_key(example_config, section, value, path):
    with pytest.raises(ConfigError) as info:
        parse_config(example_config(**{section: value}))
    assert info.value.path == path


def test_model_errors_are_qualified(example_config):
    conf = example_config()
    conf["structure"] = {"b": np.eye(3).tolist()}
    with pytest.raises(ConfigError) as info:
        parse_config(conf)
    assert info.value.path == "structure"


def test_asymmetric_raw_sector(example_config):
    raw = {"pi_zz": [[1.0, 1.0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]],
           "pi_za": 0.0, "pi_aa": (-np.eye(2)).tolist()}
    with pytest.raises(ConfigError) as info:
        parse_config(example_config(sector={"raw": raw}))
    assert info.value.path == "sector.raw"


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(broken))


def test_load_config(example_config, write_config):
    config = load_config(write_config(example_config(output={"dir": "elsewhere"})))
    assert config.output_dir == "elsewhere"


def test_nonlinearities_from_config(example_config):
    conf = example_config(simulation={"nonlinearity": {"type": "Saturation", "slope": 0.08, "limit": 0.5}})
    nl = parse_config(conf).nonlinearity()
    assert nl.kind == NonlinearityKind.SATURATION
    assert (nl.p, nl.m) == (4, 2)
    np.testing.assert_allclose(nl([10.0, 0.1, 5.0, 5.0]), [0.04, 0.008])

    linear = build_nonlinearity({"type": "LinearGain", "gain": 0.05}, 4, 2)
    np.testing.assert_allclose(linear([1.0, 2.0, 3.0, 4.0]), [0.05, 0.1])

    varying = build_nonlinearity({"type": "TimeVaryingGain", "gain": 0.5, "frequency": 2.0}, 1, 1)
    assert varying([1.0], t=np.pi / 2)[0] == pytest.approx(-0.5)


def test_nonlinearity_errors(example_config):
    with pytest.raises(ConfigError, match="required"):
        parse_config(example_config()).nonlinearity()
    with pytest.raises(ConfigError):
        build_nonlinearity({"type": "CubicDiagonal"}, 4, 2)
    with pytest.raises(ConfigError):
        build_nonlinearity({"type": "LinearGain", "gain": [[1.0, 2.0]]}, 4, 2)
    with pytest.raises(ConfigError):
        build_nonlinearity({"type": "Saturation", "slope": 1.0}, 1, 1)
