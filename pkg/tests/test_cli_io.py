import json

import numpy as np
import pytest

from nlsrom import cli, experiments, storage
from nlsrom.config import RunConfig, example1, example2
from nlsrom.errors import ConfigurationError
from nlsrom.experiments import run_fom


def _tiny(tmp_path, **rom):
    cfg = example1().replace(mesh={"nx": 4, "ny": 4}, time={"tau": 0.01, "T": 0.05},
                             output={"directory": str(tmp_path)})
    return cfg.replace(rom={"k": 4, "m": 3, **rom})


# configuration -----------------------------------------------------------------

def test_config_round_trip(tmp_path):
    for cfg in (example1(), example2()):
        assert RunConfig.from_ini(cfg.to_ini()) == cfg
        cfg.save(tmp_path / "c.ini")
        assert RunConfig.load(tmp_path / "c.ini") == cfg


def test_presets():
    e1, e2 = RunConfig.load("example1"), RunConfig.load("example2")
    assert (e1.mesh.nx, e1.physics.alpha, e1.time.tau, e1.rom.k, e1.rom.m) == (32, 2.0, 1e-3, 10, 15)
    assert e2.physics.potential == "harmonic" and e2.initial.kind == "gaussian"
    assert (e2.rom.k, e2.rom.m, e2.time.tau, e2.time.T) == (20, 20, 1e-2, 3.0)
    assert e1.rom_tau == e1.time.tau


def test_overrides_and_bad_keys():
    cfg = example1().override(["time.T=0.5", "rom.threshold=0.99", "rom.k=", "rom.corrected=false"])
    assert cfg.time.T == 0.5 and cfg.rom.threshold == 0.99 and cfg.rom.k is None
    assert cfg.rom.corrected is False
    for bad in (["time.T"], ["nosuch.key=1"], ["time.bogus=1"], ["time.tau=abc"], ["time.tau=-1"],
                ["rom.variant=galerkin"], ["time.T=nan"], ["rom.k=", "rom.threshold="]):
        with pytest.raises(ConfigurationError):
            example1().override(bad)
    with pytest.raises(ConfigurationError):
        RunConfig.from_ini("[extra]\nx = 1\n")
    with pytest.raises(ConfigurationError):
        RunConfig.load("no-such-preset")


# snapshot files ------------------------------------------------------------------

def test_snapshot_file_round_trip(tmp_path, rng):
    X = rng.standard_normal((7, 5))
    X[0, 0] = np.nextafter(1.0, 2.0)
    storage.write_snapshots(tmp_path / "s.hrom", X, 0.25, "nonlinearity")
    back = storage.read_snapshots(tmp_path / "s.hrom")
    assert np.array_equal(back.matrix, X) and back.dt == 0.25 and back.tag == "nonlinearity"
    raw = (tmp_path / "s.hrom").read_bytes()
    assert raw[:5] == b"HROM1" and len(raw) == 5 + 4 + 8 + 8 + 8 + 1 + 7 * 5 * 8
    # column-major payload
    assert np.frombuffer(raw[34:42], "<f8")[0] == X[0, 0]
    assert np.frombuffer(raw[42:50], "<f8")[0] == X[1, 0]


def test_snapshot_file_errors(tmp_path, rng):
    good = storage.SnapshotFile(rng.standard_normal((3, 2)), 0.1).to_bytes()
    for buf in (b"XXXX1" + good[5:], good[:-1], good[:10]):
        with pytest.raises(storage.SnapshotFormatError):
            storage.SnapshotFile.from_bytes(buf)


def test_artifact_is_deterministic(tmp_path, rng):
    arrays = {"U": rng.standard_normal((6, 2)), "idx": np.array([3, 1])}
    storage.save_artifact(tmp_path / "a.zip", arrays, {"k": 2})
    storage.save_artifact(tmp_path / "b.zip", dict(reversed(list(arrays.items()))), {"k": 2})
    assert (tmp_path / "a.zip").read_bytes() == (tmp_path / "b.zip").read_bytes()
    back, meta = storage.load_artifact(tmp_path / "a.zip")
    assert meta == {"k": 2} and np.array_equal(back["U"], arrays["U"])


def test_csv_full_precision(tmp_path):
    x = 0.1 + 0.2
    storage.write_csv(tmp_path / "x.csv", ["a", "b"], [[x, 3]])
    header, rows = storage.read_csv(tmp_path / "x.csv")
    assert header == ["a", "b"] and float(rows[0][0]) == x and rows[0][1] == "3"


# pipeline ------------------------------------------------------------------------

def test_zero_horizon_gives_one_row(tmp_path):
    res = run_fom(_tiny(tmp_path).replace(time={"T": 0.0}))
    _, rows = storage.read_csv(tmp_path / "fom.csv")
    assert len(rows) == 1 and float(rows[0][3]) == 0.0
    assert res.states.shape[1] == 1


def test_pipeline_smoke(tmp_path):
    cfg = _tiny(tmp_path)
    res = run_fom(cfg)
    header, rows = storage.read_csv(tmp_path / "fom.csv")
    assert header == ["t", "mass", "energy", "mass_drift", "energy_drift", "l2_error"]
    assert len(rows) == 6
    timing = json.loads((tmp_path / "fom_timing.json").read_text())
    assert timing["steps"] == 5 and timing["omega"] == 6.0
    assert storage.read_snapshots(tmp_path / "states.hrom").matrix.shape == (192, 6)
    assert res.nonlinear.shape == (192, 6)

    for variant in ("pod", "pod_deim", "pod_dmd"):
        vcfg = cfg.replace(rom={"variant": variant})
        model = experiments.build_rom_offline(vcfg)
        assert model.basis.k == 4
        out = experiments.run_rom_online(vcfg)
        assert out.l2l2_vs_fom is not None and np.isfinite(out.l2l2_vs_fom)
        h, r = storage.read_csv(tmp_path / f"rom_{variant}.csv")
        assert h[-1] == "reduced_dim" and len(r) == 6 and r[0][-1] == "4"

    rows = experiments.sweep_modes(cfg, [1, 2])
    assert [r[:2] for r in rows] == [["deim", 1], ["deim", 2], ["dmd", 1], ["dmd", 2]]
    assert experiments.sweep_modes(cfg, []) == []
    h, r = storage.read_csv(tmp_path / "sweep.csv")
    assert h == experiments.SWEEP_HEADER and r == []

    result = experiments.bench(cfg, repeat=1)
    assert set(result) == {"fom", "pod_deim", "pod_dmd"}
    assert (tmp_path / "bench.csv").exists()


def test_same_seed_same_output(tmp_path):
    texts = []
    cfg = _tiny(tmp_path)
    for _ in range(2):
        run_fom(cfg)
        experiments.build_rom_offline(cfg)
        res = experiments.run_rom_online(cfg)
        texts.append((res.trajectory.states.tobytes(), (tmp_path / "rom.zip").read_bytes()))
    assert texts[0] == texts[1]


def test_offline_needs_snapshots(tmp_path):
    with pytest.raises(ConfigurationError):
        experiments.build_rom_offline(_tiny(tmp_path / "empty"))


# command line --------------------------------------------------------------------

def _ini(tmp_path):
    path = tmp_path / "tiny.ini"
    _tiny(tmp_path / "out").save(path)
    return str(path)


def test_cli_pipeline(tmp_path, capsys):
    ini = _ini(tmp_path)
    assert cli.main(["fom", "run", ini]) == 0
    assert cli.main(["rom", "build", ini, "--set", "rom.variant=pod_dmd"]) == 0
    assert cli.main(["rom", "run", ini, "--set", "rom.variant=pod_dmd"]) == 0
    assert cli.main(["sweep", ini, "--modes", "1", "--reducers", "deim"]) == 0
    assert "rom run: pod_dmd" in capsys.readouterr().out
    assert (tmp_path / "out" / "rom_pod_dmd.csv").exists()
    assert cli.main(["config", "example2"]) == 0
    assert "[physics]" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    ini = _ini(tmp_path)
    assert cli.main(["rom", "build", ini]) == 1  # no snapshots yet
    assert cli.main(["fom", "run", ini, "--set", "time.newton_max_iter=1",
                     "--set", "time.newton_tol=1e-300"]) == 3
    (tmp_path / "file").write_text("")
    assert cli.main(["fom", "run", ini, "--out", str(tmp_path / "file" / "sub")]) == 2
    with pytest.raises(SystemExit):
        cli.main(["bogus"])
