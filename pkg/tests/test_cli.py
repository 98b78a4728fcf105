import csv
import json
import struct

import numpy as np
import pytest

from cohlim import cli
from cohlim.config import (
    ConfigError,
    build_grid,
    build_measure,
    build_test_function,
    config_digest,
    load_config,
    parse_t_grid,
    read_value_file,
    validate_config,
)
from cohlim.mode_space import MomentumGrid

GRID = {"d": 1, "R": 4.0, "N": 512}
DENSITY = {"name": "gaussian", "center": 1.0, "width": 0.70710678}
GAUSS_F = {"name": "gaussian", "label": "f", "modulation": 1.0}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def read_result(out_dir):
    with open(out_dir / "result.json") as fh:
        return json.load(fh)


class TestConfigValidation:
    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="/experiment"):
            validate_config({"experiment": "nope"})

    def test_stochastic_requires_seed(self):
        with pytest.raises(ConfigError, match="/seed"):
            validate_config({"experiment": "clt"})

    def test_deterministic_needs_no_seed(self):
        validate_config({"experiment": "functional"})

    def test_digest_stable_under_key_order(self):
        a = {"experiment": "functional", "grid": GRID}
        b = {"grid": dict(GRID), "experiment": "functional"}
        assert config_digest(a) == config_digest(b)

    def test_load_rejects_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(p)

    def test_parse_t_grid(self):
        np.testing.assert_allclose(parse_t_grid("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1.0])

    def test_parse_t_grid_rejects_garbage(self):
        with pytest.raises(ConfigError):
            parse_t_grid("0,1,2")


class TestBuilders:
    def test_grid_roundtrip(self):
        assert build_grid(GRID) == MomentumGrid(1, 4.0, 512)

    def test_measure_kinds(self):
        assert build_measure({"kind": "uniform"}).kind == "uniform"
        mu = build_measure({"kind": "atoms", "atoms": [[0.0, 0.5], [3.14159, 0.5]]})
        assert mu.kind == "atoms"

    def test_value_file_roundtrip(self, tmp_path):
        vals = np.arange(6, dtype=float).reshape(3, 2)
        p = tmp_path / "vals.bin"
        with open(p, "wb") as fh:
            for re, im in vals:
                fh.write(struct.pack("<dd", re, im))
        out = read_value_file(p)
        np.testing.assert_allclose(out, [0 + 1j, 2 + 3j, 4 + 5j])

    def test_value_file_odd_count_rejected(self, tmp_path):
        p = tmp_path / "vals.bin"
        p.write_bytes(struct.pack("<ddd", 1.0, 2.0, 3.0))
        with pytest.raises(ConfigError, match="odd"):
            read_value_file(p)

    def test_test_function_from_file(self, tmp_path):
        g = MomentumGrid(1, 2.0, 4)
        p = tmp_path / "f.bin"
        with open(p, "wb") as fh:
            for i in range(4):
                fh.write(struct.pack("<dd", float(i), 0.0))
        f = build_test_function({"values_file": str(p), "label": "x"}, g)
        np.testing.assert_allclose(f.values, [0, 1, 2, 3])

    def test_test_function_wrong_size(self, tmp_path):
        g = MomentumGrid(1, 2.0, 8)
        p = tmp_path / "f.bin"
        p.write_bytes(struct.pack("<dd", 1.0, 0.0))
        with pytest.raises(ConfigError, match="cells"):
            build_test_function({"values_file": str(p)}, g)


class TestCliRuns:
    def test_functional_fock(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            {
                "experiment": "functional",
                "kind": "fock",
                "grid": GRID,
                "functions": [GAUSS_F],
            },
        )
        out = tmp_path / "out"
        rc = cli.main(["functional", "--config", cfg, "--out", str(out)])
        assert rc == 0
        record = read_result(out)
        assert record["schema"] == "1" and record["pass"]
        with open(out / "functional.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["label"] == "f"
        assert 0.0 < float(rows[0]["modulus"]) <= 1.0

    def test_clt_pass_and_reproducible(self, tmp_path):
        body = {
            "experiment": "clt",
            "seed": 11,
            "samples": 500,
            "grid": GRID,
            "measure": {"kind": "uniform"},
            "density": DENSITY,
            "functions": [GAUSS_F],
        }
        cfg = write_cfg(tmp_path, body)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert cli.main(["clt", "--config", cfg, "--out", str(out1)]) == 0
        assert cli.main(["clt", "--config", cfg, "--out", str(out2)]) == 0
        r1, r2 = read_result(out1), read_result(out2)
        assert r1["values"]["ks_distance"] == r2["values"]["ks_distance"]
        assert r1["inputs_digest"] == r2["inputs_digest"]

    def test_clt_rejects_inadmissible_measure(self, tmp_path, capsys):
        body = {
            "experiment": "clt",
            "seed": 1,
            "grid": GRID,
            "measure": {"kind": "atoms", "atoms": [[0.0, 1.0]]},
            "density": DENSITY,
            "functions": [GAUSS_F],
        }
        cfg = write_cfg(tmp_path, body)
        rc = cli.main(["clt", "--config", cfg, "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "mu_hat_1 nonzero" in capsys.readouterr().err

    def test_wrong_subcommand_for_config(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            {"experiment": "functional", "grid": GRID, "functions": [GAUSS_F]},
        )
        rc = cli.main(["dynamics", "--config", cfg, "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_moments_subcommand(self, tmp_path):
        body = {
            "experiment": "moments",
            "seed": 3,
            "samples": 2000,
            "pq": "1,1",
            "grid": GRID,
            "mu2": [0.3, 0.2],
            "density": DENSITY,
            "functions": [GAUSS_F, {"name": "gaussian", "label": "g", "center": 0.5}],
        }
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "o"
        assert cli.main(["moments", "--config", cfg, "--out", str(out)]) == 0
        record = read_result(out)
        assert record["values"]["z_score"] < 5.0

    def test_gns_check_averaged(self, tmp_path):
        body = {
            "experiment": "gns-check",
            "rep": "averaged",
            "grid": GRID,
            "mu2": [-1.0, 0.0],
            "density": DENSITY,
            "functions": [GAUSS_F],
        }
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "o"
        assert cli.main(["gns-check", "--config", cfg, "--out", str(out)]) == 0
        record = read_result(out)
        assert record["assertions"][0]["value"] < 1e-9

    def test_dynamics_time_series(self, tmp_path):
        body = {
            "experiment": "dynamics",
            "grid": GRID,
            "mu2": [-1.0, 0.0],
            "density": DENSITY,
            "dispersion": {"form": "photon"},
            "functions": [{"name": "gaussian", "label": "f", "center": 2.0}],
            "t_grid": "0:10:2",
        }
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "o"
        assert cli.main(["dynamics", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "dynamics.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert float(rows[-1]["metric"]) < float(rows[0]["metric"])

    def test_decohere_time_series(self, tmp_path):
        body = {
            "experiment": "decohere",
            "seed": 7,
            "samples": 2000,
            "grid": GRID,
            "density": DENSITY,
            "dispersion": {"form": "photon"},
            "form_factor": {"name": "gaussian", "label": "g"},
            "energies": [0.0, 1.0],
            "couplings": [0.0, 1.0],
            "t_grid": "0:1:0.5",
        }
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "o"
        assert cli.main(["decohere", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "decohere.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[0]["envelope_gaussian"]) == 1.0
        assert float(rows[-1]["envelope_gaussian"]) < 1.0

    def test_diverge_slope(self, tmp_path):
        body = {
            "experiment": "diverge",
            "d": 1,
            "R": 4.0,
            "function": {"name": "gaussian"},
            "density": {"name": "gaussian"},
            "tolerances": {"slope": 0.05},
        }
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "o"
        assert cli.main(["diverge", "--config", cfg, "--out", str(out)]) == 0
        record = read_result(out)
        assert abs(record["values"]["slope"] - 0.5) < 0.05

    def test_rarefied_convergence_table(self, tmp_path):
        body = {
            "experiment": "rarefied",
            "grid": {"d": 1, "R": 4.0, "N": 1024},
            "functions": [{"name": "gaussian", "label": "g", "center": 1.0}],
            "alpha": {"name": "gaussian", "center": 1.0},
            "sigma": 0.7,
            "a": 0.2,
            "b": 1.8,
            "L_values": [1000.0, 100000.0],
        }
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "o"
        assert cli.main(["rarefied", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "rarefied.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[-1]["abs_error"]) < 0.01

    def test_chi_sample_table(self, tmp_path):
        body = {
            "experiment": "chi",
            "seed": 5,
            "samples": 200,
            "grid": GRID,
            "mu2": [0.0, 0.0],
            "density": DENSITY,
            "functions": [GAUSS_F],
        }
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "o"
        assert cli.main(["chi", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "chi_samples.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 200
