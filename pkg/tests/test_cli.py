"""End-to-end tests of the command-line driver and its artifacts."""

import datetime as dt
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import volfit as vf
from volfit.cli import export_plot_data, main, run_pipeline

from helpers import planted_table

SMALL_CONFIG = (
    "kz_trend_window = 15\n"
    "kz_trend_iters = 2\n"
    "kz_seasonal_window = 5\n"
    "kz_seasonal_iters = 3\n"
    "n_train = 40\n"
)

FIT_ARTIFACTS = sorted(
    [f"model_{name}.json" for name in vf.SERIES_NAMES]
    + [f"report_{name}.json" for name in vf.SERIES_NAMES]
    + ["coefficients.csv"]
)


def weekday_dates(count, start=dt.date(2011, 1, 3)):
    days, day = [], start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


def sample_prices(n=80, seed=77, spike_at=None):
    rng = np.random.default_rng(seed)
    t = np.arange(1, n)
    returns = 0.004 * np.sin(2 * np.pi * t / 7.0) + rng.normal(0, 0.01, n - 1)
    if spike_at is not None:
        returns[spike_at] += 0.8
    prices = 20.0 * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
    lines = ["Date,Close"] + [
        f"{d.isoformat()},{float(p)!r}"
        for d, p in zip(weekday_dates(n), prices)
    ]
    return "\n".join(lines) + "\n"


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "prices.csv").write_text(sample_prices(), encoding="utf-8")
    (tmp_path / "volfit.cfg").write_text(SMALL_CONFIG, encoding="utf-8")
    return tmp_path


def run_cli(*args):
    return main([str(a) for a in args])


class TestDecomposeCommand:
    def test_writes_decomposition_csv(self, workspace):
        rc = run_cli(
            "decompose", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg", "--out-dir", workspace / "out",
        )
        assert rc == 0
        lines = (workspace / "out" / "decomposition.csv").read_text().splitlines()
        assert lines[0] == "index,original,trend,seasonal,remainder"
        assert len(lines) == 80       # header + 79 returns from 80 prices

    def test_missing_input_exits_2(self, workspace, capsys):
        rc = run_cli("decompose", "--input", workspace / "missing.csv")
        assert rc == 2
        assert capsys.readouterr().err

    def test_even_window_exits_2_with_config_error(self, workspace, capsys):
        bad = workspace / "bad.cfg"
        bad.write_text("kz_trend_window = 4\n", encoding="utf-8")
        rc = run_cli(
            "decompose", "--input", workspace / "prices.csv", "--config", bad,
            "--out-dir", workspace / "out",
        )
        assert rc == 2
        assert "ConfigError" in capsys.readouterr().err

    def test_bundled_file_row_count(self, tmp_path):
        data = Path(__file__).resolve().parent.parent / "data" / "synthetic_vix.csv"
        rc = run_cli("decompose", "--input", data, "--out-dir", tmp_path)
        assert rc == 0
        lines = (tmp_path / "decomposition.csv").read_text().splitlines()
        assert len(lines) - 1 == 2856     # 2857 prices -> 2856 returns

    def test_missing_cells_serialized_empty(self, tmp_path):
        text = sample_prices(n=60)
        lines = text.splitlines()
        lines[10] = lines[10].rsplit(",", 1)[0] + ",null"
        (tmp_path / "prices.csv").write_text("\n".join(lines) + "\n")
        (tmp_path / "volfit.cfg").write_text(
            "kz_trend_window = 9\nkz_trend_iters = 2\n"
            "kz_seasonal_window = 3\nkz_seasonal_iters = 2\nn_train = 30\n"
        )
        rc = run_cli(
            "decompose", "--input", tmp_path / "prices.csv",
            "--config", tmp_path / "volfit.cfg", "--out-dir", tmp_path,
        )
        assert rc == 0
        rows = (tmp_path / "decomposition.csv").read_text().splitlines()[1:]
        originals = [row.split(",")[1] for row in rows]
        assert "" in originals        # the return touching the null price


class TestFitCommand:
    def test_writes_all_nine_artifacts(self, workspace):
        out = workspace / "out"
        rc = run_cli(
            "fit", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg", "--out-dir", out,
        )
        assert rc == 0
        assert sorted(p.name for p in out.iterdir()) == FIT_ARTIFACTS

    def test_reruns_are_byte_identical(self, workspace):
        for sub in ("a", "b"):
            rc = run_cli(
                "fit", "--input", workspace / "prices.csv",
                "--config", workspace / "volfit.cfg",
                "--out-dir", workspace / sub,
            )
            assert rc == 0
        for name in FIT_ARTIFACTS:
            assert (workspace / "a" / name).read_bytes() == \
                (workspace / "b" / name).read_bytes()

    def test_method_flag_changes_models_on_outlier_data(self, tmp_path):
        (tmp_path / "prices.csv").write_text(
            sample_prices(spike_at=20), encoding="utf-8"
        )
        (tmp_path / "volfit.cfg").write_text(SMALL_CONFIG, encoding="utf-8")
        for method in ("ols", "lar"):
            rc = run_cli(
                "fit", "--input", tmp_path / "prices.csv",
                "--config", tmp_path / "volfit.cfg",
                "--method", method, "--out-dir", tmp_path / method,
            )
            assert rc == 0
        ols_doc = (tmp_path / "ols" / "model_volatility.json").read_text()
        lar_doc = (tmp_path / "lar" / "model_volatility.json").read_text()
        assert ols_doc != lar_doc
        assert vf.model_from_document(ols_doc).method == "ols"
        assert vf.model_from_document(lar_doc).method == "lar"

    def test_oversized_n_train_exits_2(self, workspace):
        out = workspace / "out"
        rc = run_cli(
            "fit", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg",
            "--n-train", 500, "--out-dir", out,
        )
        assert rc == 2
        assert not out.exists() or not any(out.iterdir())

    def test_report_counts_cover_every_row(self, workspace):
        out = workspace / "out"
        run_cli(
            "fit", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg", "--out-dir", out,
        )
        report = vf.report_from_document(
            (out / "report_volatility.json").read_text()
        )
        # 80 prices -> 79 returns -> 78 feature rows at lag 1
        assert report.n_train + report.n_test + len(report.excluded) == 78

    def test_env_var_default_out_dir(self, workspace, monkeypatch):
        target = workspace / "env_out"
        monkeypatch.setenv("VOLFIT_OUT_DIR", str(target))
        rc = run_cli(
            "fit", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg",
        )
        assert rc == 0
        assert (target / "coefficients.csv").exists()


class TestPredictCommand:
    def _write_model(self, path, terms, coefficients):
        model = vf.PolySurfaceModel(
            term_set=terms,
            coefficients=tuple(coefficients),
            bounds=tuple((c, c) for c in coefficients),
            method="ols",
            n_points=9,
            sigma=0.0,
            iterations=0,
        )
        path.write_text(vf.model_to_document(model), encoding="utf-8")

    def test_zero_model(self, tmp_path, capsys):
        doc = tmp_path / "model.json"
        self._write_model(doc, vf.TermSet(((0, 0),)), [0.0])
        assert run_cli("predict", doc, 3.0, -2.0) == 0
        assert capsys.readouterr().out.strip() == "0.00000"

    def test_hand_evaluated_point(self, tmp_path, capsys):
        doc = tmp_path / "model.json"
        self._write_model(doc, vf.TermSet(((0, 0), (1, 1))), [1.0, 2.0])
        assert run_cli("predict", doc, 3.0, 4.0) == 0
        assert capsys.readouterr().out.strip() == "25.0000"

    def test_truncated_document_exits_2(self, tmp_path, capsys):
        doc = tmp_path / "model.json"
        doc.write_text('{"method": "ols"', encoding="utf-8")
        assert run_cli("predict", doc, 0.0, 0.0) == 2
        assert "FormatError" in capsys.readouterr().err


class TestExportPlotCommand:
    def test_grid_two_hits_the_corners(self, workspace):
        out = workspace / "plots"
        rc = run_cli(
            "export-plot", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg",
            "--grid", 2, "--out-dir", out,
        )
        assert rc == 0
        config = vf.load_config(SMALL_CONFIG)
        _, results = run_pipeline(
            (workspace / "prices.csv").read_text(), config
        )
        model = results["volatility"]["model"]
        train = results["volatility"]["train"]
        rows = (out / "surface_volatility.csv").read_text().splitlines()
        assert rows[0] == "x,y,f"
        assert len(rows) == 5
        for row in rows[1:]:
            xs, ys, fs = (float(c) for c in row.split(","))
            assert xs in (train.x.min(), train.x.max())
            assert ys in (train.y.min(), train.y.max())
            assert fs == vf.evaluate_surface(model, xs, ys)

    def test_residual_rows_match_table(self, workspace):
        out = workspace / "plots"
        rc = run_cli(
            "export-plot", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg", "--out-dir", out,
        )
        assert rc == 0
        config = vf.load_config(SMALL_CONFIG)
        _, results = run_pipeline(
            (workspace / "prices.csv").read_text(), config
        )
        for name in vf.SERIES_NAMES:
            rows = (out / f"residuals_{name}.csv").read_text().splitlines()
            assert len(rows) - 1 == len(results[name]["train"])

    def test_grid_density_validation(self):
        rng = np.random.default_rng(40)
        terms = vf.TermSet(((0, 0), (1, 0)))
        table = planted_table(terms, [1.0, 2.0], 30, rng, noise=0.1)
        model = vf.fit_ols(table, terms)
        with pytest.raises(ValueError):
            export_plot_data(model, table, 1)


class TestEvaluateCommand:
    def test_prints_grid_and_summary(self, workspace, capsys):
        rc = run_cli(
            "evaluate", "--input", workspace / "prices.csv",
            "--config", workspace / "volfit.cfg",
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert out.startswith("m,series,")
        for name in vf.SERIES_NAMES:
            assert f"{name}: method=lar" in out


class TestProcessEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "volfit", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "decompose" in proc.stdout
