import json

import numpy as np
import pytest

from hallcal.artifacts import (
    ChainStore,
    RunManifest,
    load_chain,
    save_chain,
    save_diagnostics,
    save_metrics,
    save_predictions,
    save_system_output,
)
from hallcal.errors import ChainFileError, ConfigurationError, DatasetParseError
from hallcal.inference import Chain, chain_diagnostics
from hallcal.system import SystemOutput
from hallcal.uq import QoiMetrics, default_targets, propagate


def _chain(n=20, names=("a", "b")):
    rng = np.random.default_rng(0)
    return Chain(
        names=names,
        samples=rng.normal(size=(n, len(names))),
        log_posterior=rng.normal(size=n),
        accepted=rng.random(n) < 0.3,
        stage=rng.integers(0, 3, size=n),
        burn_in_fraction=0.25,
        delayed_rejection=True,
    )


def test_chain_round_trip(tmp_path):
    chain = _chain()
    store = save_chain(chain, tmp_path / "chain.dat", metadata={"seed": 3})
    loaded = load_chain(store.path)
    assert loaded.names == chain.names
    assert np.array_equal(loaded.samples, chain.samples)
    assert np.array_equal(loaded.log_posterior, chain.log_posterior)
    assert np.array_equal(loaded.accepted, chain.accepted)
    assert loaded.burn_in_fraction == 0.25
    assert ChainStore(store.path).metadata == {"seed": 3}


def test_chain_appends_only_new_rows(tmp_path):
    chain = _chain()
    store = ChainStore.create(tmp_path / "chain.dat", chain.names)
    assert store.append(chain.head(8)) == 8
    assert len(store.chain) == 8
    assert store.append(chain) == 12
    assert store.append(chain) == 0
    assert ChainStore(store.path).rows_written == 20
    assert np.array_equal(load_chain(store.path).samples, chain.samples)


def test_partial_chain_is_readable(tmp_path):
    chain = _chain()
    store = ChainStore.create(tmp_path / "chain.dat", chain.names)
    store.append(chain.head(5))
    loaded = load_chain(store.path)
    assert len(loaded) == 5
    assert loaded.medians().shape == (2,)


def test_chain_with_rejected_start(tmp_path):
    chain = _chain(n=3)
    chain.log_posterior[1] = -np.inf
    loaded = load_chain(save_chain(chain, tmp_path / "chain.dat").path)
    assert loaded.log_posterior[1] == -np.inf


def test_append_checks_columns(tmp_path):
    store = ChainStore.create(tmp_path / "chain.dat", ("a", "b"))
    with pytest.raises(ConfigurationError):
        store.append(_chain(names=("a", "c")))


def test_corrupt_chain_reports_line(tmp_path):
    path = save_chain(_chain(n=5), tmp_path / "chain.dat").path
    lines = path.read_text("utf-8").splitlines()
    lines[4] = lines[4].replace(" ", " x ", 1)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(ChainFileError) as error:
        load_chain(path)
    assert error.value.line == 5
    assert isinstance(error.value, DatasetParseError)


def test_not_a_chain_file(tmp_path):
    path = tmp_path / "chain.dat"
    path.write_text("a b\n1 2\n", encoding="utf-8")
    with pytest.raises(ChainFileError):
        load_chain(path)
    with pytest.raises(FileNotFoundError):
        load_chain(tmp_path / "missing.dat")


def test_save_predictions(tmp_path, linear_model, condition):
    rows = np.linspace(1.0, 2.0, 11)[:, np.newaxis]
    targets = default_targets([condition], ["I_D", "u_ion"])
    ensemble = propagate(linear_model([1.0]), ("a",), rows, targets)
    written = save_predictions(ensemble, tmp_path / "predictions")
    assert [p.name for p in written] == ["000_I_D.dat", "001_u_ion.dat"]
    lines = written[1].read_text("utf-8").splitlines()
    assert '# mode = "epistemic"' in lines
    assert "# samples = 11" in lines
    assert lines[5].split() == ["z", "q5", "q50", "q95"]
    assert len(lines) == 6 + 5
    scalar = written[0].read_text("utf-8").splitlines()
    assert scalar[-1].split()[1] == "1.5"


def test_save_metrics(tmp_path):
    rows = {"Posterior": {"T_c": QoiMetrics(mu=0.1, sigma=0.02, mu50=0.05, xi=0.1, n=4)}}
    lines = save_metrics(rows, tmp_path / "metrics.dat").read_text("utf-8").splitlines()
    assert lines[1].split() == ["Posterior", "T_c", "0.1", "0.05", "0.1", "0.02", "0.5", "4"]


def test_save_diagnostics(tmp_path):
    path = save_diagnostics(chain_diagnostics(_chain()), tmp_path / "diagnostics.dat")
    lines = path.read_text("utf-8").splitlines()
    assert lines[0].split() == ["parameter", "min", "5th", "50th", "95th", "max", "std", "ess"]
    assert [line.split()[0] for line in lines[1:]] == ["a", "b"]


def test_save_system_output(tmp_path):
    output = SystemOutput(
        V_cc=31.0,
        j_ion={1.0: (np.array([0.0, 0.1]), np.array([5.0, 4.0]))},
    )
    written = save_system_output(output, tmp_path, {"condition": "nominal"})
    assert [p.name for p in written] == ["output.json", "j_ion_r1.dat"]
    summary = json.loads(written[0].read_text("utf-8"))
    assert summary["outputs"] == {"V_cc": 31.0}
    assert summary["condition"] == "nominal"


def test_manifest_round_trip(tmp_path):
    config = tmp_path / "hallcal.toml"
    config.write_text("[project]\nname = \"x\"\n", encoding="utf-8")
    manifest = RunManifest(
        command="calibrate",
        config=config,
        out=tmp_path / "out",
        seed=4,
        options={"samples": 100},
        fingerprints={"model": "abc"},
    )
    manifest.validate()
    path = manifest.write()
    assert path.name == "calibrate.manifest.json"
    assert RunManifest.read(tmp_path / "out", "calibrate") == manifest


def test_manifest_validation(tmp_path):
    with pytest.raises(FileNotFoundError):
        RunManifest("predict", tmp_path / "missing.toml").validate()
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        RunManifest("predict", None, out=blocker / "out").validate()
