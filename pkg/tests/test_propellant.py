import numpy as np
import pytest
from scipy import constants as phy_const

from hallcal.errors import ConfigurationError
from hallcal.propellant import BUNDLED_PROPELLANTS, PropellantSpec, load_propellant


@pytest.mark.parametrize("name", BUNDLED_PROPELLANTS)
def test_bundled_tables_load(name):
    spec = load_propellant(name)
    assert spec.species_name == name
    T = np.geomspace(0.5, 100.0, 20)
    assert np.all(np.diff(spec.ionization_rate(T)) >= 0.0)
    assert np.all(spec.collision_rate(T) > 0.0)


def test_xenon_mass(xenon):
    assert xenon.ion_mass == pytest.approx(131.293 * phy_const.atomic_mass)


def test_explicit_table_from_file(tmp_path):
    path = tmp_path / "argon.toml"
    path.write_text(
        'name = "argon"\n'
        "atomic_mass = 39.948\n"
        "ionization_energy_cost = 47.0\n"
        "[ionization]\n"
        "T_e = [1.0, 10.0, 100.0]\n"
        "k = [0.0, 1e-14, 1e-13]\n"
        "[momentum_transfer]\n"
        "T_e = [0.1, 200.0]\n"
        "k = [1e-13, 1e-13]\n"
    )
    spec = load_propellant(path)
    assert spec.ionization_rate(np.array([5.5]))[0] == pytest.approx(0.5e-14)


def test_unknown_propellant():
    with pytest.raises(ConfigurationError, match="bundled: xenon"):
        load_propellant("unobtainium")


def test_missing_key():
    with pytest.raises(ConfigurationError, match="atomic_mass"):
        PropellantSpec.from_config(
            {"name": "x", "ionization": {}, "momentum_transfer": {}}
        )


def test_table_validation(xenon):
    with pytest.raises(ConfigurationError, match="nondecreasing"):
        xenon.with_ionization_table(np.array([1.0, 2.0]), np.array([2.0, 1.0]))
    with pytest.raises(ConfigurationError, match="increase"):
        xenon.with_ionization_table(np.array([2.0, 1.0]), np.array([1.0, 2.0]))
