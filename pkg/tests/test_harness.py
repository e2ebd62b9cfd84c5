import csv
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from anisolap.harness import (COLUMNS, ConfigError, ExperimentConfig,
                              format_suite_report, monotonicity_violation,
                              property_suite, report, run)

REPO = Path(__file__).resolve().parent.parent
SMOKE = REPO / "configs" / "smoke.toml"
ANISO = REPO / "configs" / "aniso.toml"


def base_config(**overrides):
    data = {
        "experiment": {"name": "t", "seed": 7},
        "domain": {"kind": "disk", "r": 1.0},
        "norm": {"kind": "euclidean"},
        "young": {"kind": "power", "p": 2.0},
        "problem": {"bc": "dirichlet", "mesh_sizes": [0.25, 0.125]},
        "load": {"kind": "constant", "value": 1.0},
    }
    data.update(overrides)
    return data


class TestConfig:
    def test_smoke_parses(self):
        cfg = ExperimentConfig.from_file(SMOKE)
        assert cfg.name == "smoke" and cfg.bc == "dirichlet"

    def test_missing_table(self):
        data = base_config()
        del data["young"]
        with pytest.raises(ConfigError, match="young"):
            ExperimentConfig.from_dict(data)

    def test_unknown_table(self):
        with pytest.raises(ConfigError, match="extras"):
            ExperimentConfig.from_dict(base_config(extras={}))

    def test_unknown_load_kind(self):
        with pytest.raises(ConfigError, match="load kind"):
            ExperimentConfig.from_dict(base_config(load={"kind": "mystery"}))

    def test_bad_toml_position_annotated(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[experiment\nname='x'\n")
        with pytest.raises(ConfigError, match="line"):
            ExperimentConfig.from_file(bad)

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file("/does/not/exist.toml")


class TestRun:
    def test_smoke_passes_quickly(self, tmp_path):
        import time
        t0 = time.perf_counter()
        code, messages = run(SMOKE, tmp_path)
        elapsed = time.perf_counter() - t0
        assert code == 0 and not messages
        assert elapsed < 10.0
        assert (tmp_path / "smoke.csv").exists()
        assert (tmp_path / "smoke.svg").exists()
        assert (tmp_path / "smoke.runtimes.txt").exists()

    def test_aniso_passes(self, tmp_path):
        code, messages = run(ANISO, tmp_path)
        assert code == 0 and not messages

    def test_rerun_byte_identical(self, tmp_path):
        run(SMOKE, tmp_path / "a")
        run(SMOKE, tmp_path / "b")
        assert ((tmp_path / "a" / "smoke.csv").read_bytes()
                == (tmp_path / "b" / "smoke.csv").read_bytes())

    def test_malformed_config_no_partial_csv(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[experiment]\nname = 'broken'\n")  # missing tables
        proc = subprocess.run(
            [sys.executable, "-m", "anisolap", "run", str(bad), "--out", str(tmp_path)],
            capture_output=True, text=True)
        assert proc.returncode == 2
        assert not list(tmp_path.glob("*.csv"))

    def test_failed_assertion_exit_one(self, tmp_path):
        data = base_config()
        data["assertions"] = {"grad_sup_target": 0.4, "grad_sup_rtol": 0.01}
        cfg = ExperimentConfig.from_dict(data)
        code, messages = run(cfg, tmp_path)
        assert code == 1
        assert any("grad_sup" in m for m in messages)
        assert (tmp_path / "t.csv").exists()  # rows still recorded

    def test_solver_error_recorded_per_row(self, tmp_path):
        data = base_config(load={"kind": "concentrating", "k": 400.0})
        cfg = ExperimentConfig.from_dict(data)
        code, messages = run(cfg, tmp_path)
        assert code == 1
        text = (tmp_path / "t.csv").read_text()
        assert "error:" in text

    def test_csv_columns_documented(self, tmp_path):
        run(SMOKE, tmp_path)
        lines = (tmp_path / "smoke.csv").read_text().splitlines()
        documented = [li.split(" ", 2)[2].split(":")[0] for li in lines
                      if li.startswith("# column")]
        header = next(li for li in lines if not li.startswith("#")).split(",")
        assert documented == header == [name for name, _ in COLUMNS]

    def test_sweep_scales(self, tmp_path):
        data = base_config()
        data["problem"]["mesh_sizes"] = [0.25]
        data["sweep"] = {"load_scales": [1.0, 4.0]}
        code, _ = run(ExperimentConfig.from_dict(data), tmp_path)
        assert code == 0
        rows = [r for r in csv.DictReader(
            li for li in (tmp_path / "t.csv").read_text().splitlines()
            if not li.startswith("#"))]
        assert len(rows) == 2
        g0, g1 = float(rows[0]["grad_sup"]), float(rows[1]["grad_sup"])
        assert g1 == pytest.approx(4.0 * g0, rel=1e-6)

    def test_natural_growth_sweep(self, tmp_path):
        data = base_config()
        data["problem"]["mesh_sizes"] = [0.25]
        data["problem"]["kappa"] = 0.5
        data["young"] = {"kind": "power", "p": 3.0}
        code, messages = run(ExperimentConfig.from_dict(data), tmp_path)
        assert code == 0, messages
        rows = [r for r in csv.DictReader(
            li for li in (tmp_path / "t.csv").read_text().splitlines()
            if not li.startswith("#"))]
        assert float(rows[0]["kk_ratio"]) > 0

    def test_cli_end_to_end(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "anisolap", "run", str(SMOKE), "--out", str(tmp_path)],
            capture_output=True, text=True)
        assert proc.returncode == 0


class TestReport:
    def test_replot_from_csv(self, tmp_path):
        run(SMOKE, tmp_path)
        out = tmp_path / "replot.svg"
        report(tmp_path / "smoke.csv", out, xcol="mesh_h", ycol="grad_sup")
        assert out.read_text().startswith("<svg")

    def test_unknown_column(self, tmp_path):
        run(SMOKE, tmp_path)
        with pytest.raises(ConfigError):
            report(tmp_path / "smoke.csv", tmp_path / "x.svg", ycol="nope")


class TestPropertySuite:
    def test_default_seed_all_pass(self):
        results = property_suite(seed=1234, scale=0.25)
        rep = format_suite_report(results)
        assert all(r.passed for r in results), rep
        assert f"{len(results)}/{len(results)} properties passed" in rep

    def test_seed_sweep_not_flaky(self):
        for seed in range(10):
            results = property_suite(seed=seed, scale=0.1)
            assert all(r.passed for r in results), format_suite_report(results)

    def test_deterministic_under_fixed_seed(self):
        r1 = property_suite(seed=77, scale=0.1)
        r2 = property_suite(seed=77, scale=0.1)
        assert [(r.name, r.draws, r.violations) for r in r1] \
            == [(r.name, r.draws, r.violations) for r in r2]

    def test_broken_b_fails_with_witness(self):
        # negative control: a decreasing segment must be caught and located
        grid = np.linspace(0.1, 10, 200)

        def bad_b(t):
            t = np.asarray(t, dtype=float)
            return np.where((t > 3) & (t < 4), 2.0 - 0.5 * (t - 3), t)

        idx = monotonicity_violation(bad_b, grid)
        assert idx is not None
        assert 2.9 < grid[idx] < 4.1

    def test_good_b_clean(self):
        grid = np.geomspace(0.01, 100, 300)
        assert monotonicity_violation(lambda t: np.asarray(t) ** 2, grid) is None
