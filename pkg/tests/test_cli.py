import filecmp
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from fringe3d import arrayio


def run_cli(args, env_extra=None, cwd=None):
    env = dict(os.environ)
    env.update(env_extra or {})
    return subprocess.run(
        [sys.executable, "-m", "fringe3d.cli", *args],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )


MINIMAL_SIM = {
    "simulate": {
        "lateral_shape": [8, 8],
        "grid": {"num_channels": 4},
        "phantom": {
            "kind": "double_layer",
            "plate_kind": "solid",
            "plate_origin": [1, 1],
            "plate_size_px": 5,
            "lateral_stagger_px": 2,
        },
    }
}


def write_cfg(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def assert_trees_equal(a, b):
    cmp = filecmp.dircmp(a, b)

    def walk(c):
        assert not c.left_only and not c.right_only, (c.left_only, c.right_only)
        assert not c.diff_files, c.diff_files
        for sub in c.subdirs.values():
            walk(sub)

    walk(cmp)


class TestSimulate:
    def test_minimal_run_files_and_forward_match(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_SIM)
        out = tmp_path / "sim"
        r = run_cli(["simulate", "-c", str(cfg), "-o", str(out)])
        assert r.returncode == 0, r.stderr
        for name in ("mask", "measurement", "truth_ac", "truth_total", "truth_volume"):
            assert (out / f"{name}.bin").exists()
            assert (out / f"{name}.hdr").exists()
        assert (out / "mask.pgm").exists()
        # thin wrapper contract: Y equals the library forward of the truth
        from fringe3d.sensing import SensingOperator

        mask = arrayio.load_mask(out / "mask")
        total = arrayio.load_cube(out / "truth_total")
        m = arrayio.load_measurement(out / "measurement")
        op = SensingOperator(mask, num_channels=4)
        assert np.array_equal(m.image, op.forward(total.data))

    def test_manifest_echoes_resolved_config(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_SIM)
        out = tmp_path / "sim"
        run_cli(["simulate", "-c", str(cfg), "-o", str(out)])
        manifest = yaml.safe_load((out / "manifest.yaml").read_text())
        eff = manifest["effective_config"]
        assert eff["lateral_shape"] == [8, 8]
        assert eff["grid"]["center_wavelength_nm"] == 830.0  # default resolved
        assert eff["mask"]["seed"] == 7

    def test_unknown_keys_rejected_exit_2(self, tmp_path):
        cfg = write_cfg(
            tmp_path,
            {"simulate": {"gird": {"num_channels": 4}, "noise": {"sed": 1}}},
        )
        r = run_cli(["simulate", "-c", str(cfg), "-o", str(tmp_path / "x")])
        assert r.returncode == 2
        assert "simulate.gird" in r.stderr and "simulate.noise.sed" in r.stderr

    def test_rerun_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, MINIMAL_SIM)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(["simulate", "-c", str(cfg), "-o", str(a)]).returncode == 0
        assert run_cli(["simulate", "-c", str(cfg), "-o", str(b)]).returncode == 0
        assert_trees_equal(a, b)

    def test_noise_requires_photon_scale(self, tmp_path):
        cfg = dict(MINIMAL_SIM)
        cfg = {"simulate": {**MINIMAL_SIM["simulate"], "noise": {"enabled": True}}}
        path = write_cfg(tmp_path, cfg)
        r = run_cli(["simulate", "-c", str(path), "-o", str(tmp_path / "x")])
        assert r.returncode == 2
        assert "photon_scale_e" in r.stderr


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("chain")
    cfg = write_cfg(tmp, MINIMAL_SIM)
    out = tmp / "sim"
    r = run_cli(["simulate", "-c", str(cfg), "-o", str(out)])
    assert r.returncode == 0, r.stderr
    return out


RECON_CFG = {"reconstruct": {"solver": {"max_outer_iters": 15}}}


class TestReconstructDecode:
    def test_chain_runs_and_decodes(self, tmp_path, sim_dir):
        cfg = write_cfg(tmp_path, RECON_CFG)
        rec = tmp_path / "rec"
        r = run_cli(["reconstruct", "-m", str(sim_dir), "-c", str(cfg), "-o", str(rec)])
        assert r.returncode == 0, r.stderr
        assert (rec / "residuals.csv").exists()
        assert (rec / "residuals.png").exists()
        dec = tmp_path / "dec"
        r = run_cli(["decode", "-i", str(rec / "recon_cube"), "-o", str(dec)])
        assert r.returncode == 0, r.stderr
        manifest = yaml.safe_load((dec / "manifest.yaml").read_text())
        assert manifest["derived"]["num_planes"] == 2  # Nl=4 -> 2 planes
        assert (dec / "plane_000.pgm").exists()
        assert (dec / "plane_001.pgm").exists()
        vol, meta = arrayio.read_array(dec / "decoded_volume")
        assert vol.shape == (8, 8, 2)

    def test_missing_input_is_io_error(self, tmp_path):
        r = run_cli(["decode", "-i", str(tmp_path / "nope"), "-o", str(tmp_path / "d")])
        assert r.returncode == 4
        assert "ERROR code=4" in r.stderr


class TestOracle:
    def test_pass_report(self, tmp_path):
        out = tmp_path / "report.txt"
        r = run_cli(["oracle", "--dims", "6", "6", "4", "--seed", "3", "-o", str(out)])
        assert r.returncode == 0
        assert r.stdout.count("PASS") == 3
        assert out.read_text() == r.stdout

    def test_large_dims_skip_dense(self):
        r = run_cli(["oracle", "--dims", "32", "32", "16", "--seed", "0"])
        assert r.returncode == 0
        assert "SKIP dense-oracle" in r.stdout


DATASET_CFG = {
    "dataset": {
        "count": 5,
        "val_fraction": 0.2,
        "lateral_shape": [24, 24],
        "grid": {"num_channels": 4},
        "noise": {"realizations": 2},
    }
}


class TestDataset:
    def test_counts_splits_and_recomputation_oracle(self, tmp_path):
        cfg = write_cfg(tmp_path, DATASET_CFG)
        out = tmp_path / "ds"
        r = run_cli(["dataset", "-c", str(cfg), "-o", str(out)])
        assert r.returncode == 0, r.stderr
        manifest = yaml.safe_load((out / "manifest.yaml").read_text())
        entries = manifest["entries"]
        assert len(entries) == 5
        assert [e["split"] for e in entries] == ["train"] * 4 + ["val"]
        scale = manifest["derived"]["target_scale"]

        from fringe3d.sensing import SensingOperator

        mask = arrayio.load_mask(out / "mask")
        op = SensingOperator(mask, num_channels=4)
        for e in entries[:2]:
            target, meta = arrayio.read_array(out / e["directory"] / "target")
            assert np.abs(target).max() < 1.0  # tanh range
            assert float(meta["target_scale"]) == pytest.approx(scale)
            inp, _ = arrayio.read_array(out / e["directory"] / e["inputs"][0])
            # input correlates with the clean normalized backprojection
            bp = op.normalized_backprojection(op.forward_sheared(target * scale))
            bp = bp / scale
            num = float(np.sum(inp * bp))
            den = float(np.linalg.norm(inp) * np.linalg.norm(bp))
            assert num / den > 0.5

    def test_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path, DATASET_CFG)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli(["dataset", "-c", str(cfg), "-o", str(a)]).returncode == 0
        assert run_cli(["dataset", "-c", str(cfg), "-o", str(b)]).returncode == 0
        assert_trees_equal(a, b)


CHAR_CFG = {
    "characterize": {
        "protocols": ["benchmark"],
        "benchmark": {"lateral_shape": [32, 32], "num_channels": 8, "mask_seed": 3,
                      "stagger_px": 6},
        "solver": {"max_outer_iters": 20},
    }
}


class TestCharacterize:
    def test_benchmark_only_writes_csv_and_figure(self, tmp_path):
        cfg = write_cfg(tmp_path, CHAR_CFG)
        out = tmp_path / "char"
        r = run_cli(["characterize", "-c", str(cfg), "-o", str(out)])
        assert r.returncode == 0, r.stderr
        text = (out / "metrics.csv").read_text()
        assert "benchmark" in text and "psnr_gain_db" in text
        assert (out / "benchmark_residuals.png").exists()
