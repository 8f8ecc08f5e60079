import json
import math

import numpy as np
import pytest

from rwre_lab.cli import main
from rwre_lab.errors import ConfigError
from rwre_lab.harness import (config_hash, execute, load_config, windowed_max)

STD_DIST = {"kappa": 0.1, "atoms": [[2 / 3, 0.8], [1 / 3, 0.2]]}


def write_cfg(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


class TestConfig:
    def test_load_applies_defaults(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, {"experiment": "er-classic"}))
        assert cfg["seed"] == 1 and cfg["workers"] == 1

    def test_bad_experiment_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, {"experiment": "nope"}))

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write_cfg(tmp_path, {"experiment": "chi", "typo": 1}))

    def test_hash_stable_under_key_order(self):
        a = config_hash({"experiment": "chi", "seed": 1})
        b = config_hash({"seed": 1, "experiment": "chi"})
        assert a == b


class TestWindowedMax:
    def test_same_k_for_nearby_n(self):
        from rwre_lab import FiniteLaw, a_alpha
        a = a_alpha(FiniteLaw.pm_one(), 0.5)
        n1, n2 = 10 ** 6, 10 ** 6 + 500
        assert int(a * math.log(n1)) == int(a * math.log(n2))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        sums = np.concatenate(([0.0], np.cumsum(rng.choice([-1, 1], size=500))))
        k = 17
        brute = max(sums[t + k] - sums[t] for t in range(0, sums.size - k)) / k
        assert windowed_max(sums, k) == brute


class TestRunners:
    def test_er_classic_small(self, tmp_path):
        cfg = load_config(write_cfg(tmp_path, {
            "experiment": "er-classic", "seed": 3,
            "params": {"alpha": 0.5, "n_grid": [100_000], "n_seeds": 2}}))
        manifest, rows = execute(cfg, out_dir=tmp_path / "out")
        assert (tmp_path / "out" / "er_classic.csv").exists()
        assert (tmp_path / "out" / "manifest.json").exists()
        for row in rows:
            assert abs(row["statistic"] - 0.5) < 0.2

    def test_manifest_reproducible(self, tmp_path):
        payload = {"experiment": "chi", "seed": 5, "distribution": STD_DIST,
                   "params": {"k": 30, "x": 0.5, "c": 4.0, "n_samples": 300}}
        cfg = load_config(write_cfg(tmp_path, payload))
        m1, _ = execute(cfg, out_dir=tmp_path / "a")
        m2, _ = execute(cfg, out_dir=tmp_path / "b")
        assert m1.outputs["chi.csv"] == m2.outputs["chi.csv"]

    def test_chi_slope_checkpoints(self, tmp_path):
        payload = {"experiment": "chi-slope", "seed": 6, "distribution": STD_DIST,
                   "params": {"x": 0.5, "c": 4.0, "k_grid": [40, 60, 80],
                              "n_samples": 400}}
        cfg = load_config(write_cfg(tmp_path, payload))
        out = tmp_path / "out"
        _, first = execute(cfg, out_dir=out)
        ckpts = sorted(out.glob("ckpt_chi_*.json"))
        assert len(ckpts) == 3
        _, second = execute(cfg, out_dir=out)  # resumes from checkpoints
        assert first["slope"] == second["slope"]

    def test_er_rwre_small(self, tmp_path):
        payload = {"experiment": "er-rwre", "seed": 7, "distribution": STD_DIST,
                   "params": {"A": 3.0, "n_grid": [20_000, 40_000],
                              "seeds": [0, 1], "x_star_band": [0.5, 0.8]}}
        cfg = load_config(write_cfg(tmp_path, payload))
        _, rows = execute(cfg, out_dir=tmp_path / "out")
        assert len(rows) == 4
        for row in rows:
            assert -1.0 <= row["statistic"] <= 1.0
            assert "in_band" in row and "seed_nonincreasing" in row

    def test_hitprob_runner(self, tmp_path):
        payload = {"experiment": "hitprob", "seed": 8, "distribution": STD_DIST,
                   "params": {"x": 4, "y": 14, "n_walks": 20_000}}
        cfg = load_config(write_cfg(tmp_path, payload))
        _, row = execute(cfg, out_dir=tmp_path / "out")
        assert row["within_4_sigma"]

    def test_rate_im_runner(self, tmp_path):
        payload = {"experiment": "rate-im", "seed": 9, "distribution": STD_DIST,
                   "params": {"z_grid": [0.1, 0.3]}}
        cfg = load_config(write_cfg(tmp_path, payload))
        _, rows = execute(cfg, out_dir=tmp_path / "out")
        root = [r for r in rows if r["z"] == "root_s"][0]
        ratio = [r for r in rows if r["z"] == "min_ratio"][0]
        assert ratio["value"] == pytest.approx(root["value"], abs=1e-6)


class TestCli:
    def test_exit_code_config_error(self, tmp_path, capsys):
        path = write_cfg(tmp_path, {"experiment": "chi"})
        assert main(["er-classic", "--config", str(path)]) == 2

    def test_exit_code_success(self, tmp_path):
        path = write_cfg(tmp_path, {
            "experiment": "er-classic", "seed": 2,
            "params": {"alpha": 0.5, "n_grid": [50_000], "n_seeds": 1}})
        assert main(["er-classic", "--config", str(path),
                     "--out", str(tmp_path / "out")]) == 0

    def test_seed_override(self, tmp_path):
        path = write_cfg(tmp_path, {
            "experiment": "er-classic", "seed": 2,
            "params": {"alpha": 0.5, "n_grid": [50_000], "n_seeds": 1}})
        assert main(["er-classic", "--config", str(path), "--seed", "9",
                     "--out", str(tmp_path / "out2")]) == 0
        manifest = json.loads((tmp_path / "out2" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 9
