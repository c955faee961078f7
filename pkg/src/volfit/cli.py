"""Command-line driver: ingestion -> decomposition -> fitting -> evaluation.

Five subcommands share one config file plus flag overrides (flags win):

* decompose    write the component series as a 5-column CSV
* fit          fit one surface per series and write models, reports, and
               the coefficient table
* predict      evaluate a saved model document at one (x, y) point
* evaluate     print the coefficient grid and RMSE summary, write nothing
* export-plot  write surface-grid and residual CSVs for each series

All artifacts are UTF-8 with LF line endings and are byte-identical across
reruns on the same inputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import surface as sf
from .decompose import DecomposedSeries, decompose, log_returns
from .errors import ExclusionError, VolfitError
from .ingest import PipelineConfig, load_config, parse_price_csv

FIT_FUNCTIONS = {
    "ols": lambda table, terms, config: sf.fit_ols(
        table, terms, confidence_level=config.confidence_level
    ),
    "lar": lambda table, terms, config: sf.fit_lar(
        table, terms, confidence_level=config.confidence_level
    ),
    "bisquare": lambda table, terms, config: sf.fit_bisquare(
        table, terms, confidence_level=config.confidence_level
    ),
}


def export_plot_data(model: sf.PolySurfaceModel, table: sf.FeatureTable,
                     grid_density: int) -> tuple[str, str]:
    """Plot-data files for one fitted surface.

    The surface CSV holds grid_density**2 rows (x, y, f(x, y)) spanning the
    table's observed x and y ranges; the residual CSV holds one
    (provenance index, residual) row per table row.
    """
    if grid_density < 2:
        raise ValueError("grid density must be >= 2")
    xs = np.linspace(float(table.x.min()), float(table.x.max()), grid_density)
    ys = np.linspace(float(table.y.min()), float(table.y.max()), grid_density)
    surface_buf = io.StringIO()
    writer = csv.writer(surface_buf, lineterminator="\n")
    writer.writerow(["x", "y", "f"])
    for x in xs:
        for y in ys:
            writer.writerow([repr(float(x)), repr(float(y)),
                             repr(sf.evaluate_surface(model, x, y))])
    residual_buf = io.StringIO()
    writer = csv.writer(residual_buf, lineterminator="\n")
    writer.writerow(["index", "residual"])
    for t, r in zip(table.provenance, ev.residuals(model, table)):
        writer.writerow([int(t), repr(float(r))])
    return surface_buf.getvalue(), residual_buf.getvalue()


def decomposition_csv(dec: DecomposedSeries) -> str:
    """5-column CSV of the decomposition; missing values become empty cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "original", "trend", "seasonal", "remainder"])
    columns = (dec.original.values, dec.trend, dec.seasonal, dec.remainder)
    for i in range(len(dec)):
        row = [str(i + 1)]
        for col in columns:
            v = col[i]
            row.append("" if np.isnan(v) else repr(float(v)))
        writer.writerow(row)
    return buf.getvalue()


def _load_inputs(args) -> tuple[str, PipelineConfig]:
    raw_prices = Path(args.input).read_text(encoding="utf-8")
    if args.config is not None:
        config = load_config(Path(args.config).read_text(encoding="utf-8"))
    else:
        config = PipelineConfig()
    overrides = {}
    if getattr(args, "method", None) is not None:
        overrides["fit_method"] = args.method
    if getattr(args, "n_train", None) is not None:
        overrides["n_train"] = args.n_train
    if getattr(args, "threshold", None) is not None:
        overrides["outlier_threshold"] = args.threshold
    if getattr(args, "lag", None) is not None:
        overrides["feature_spec"] = replace(config.feature_spec, lag=args.lag)
    if overrides:
        config = replace(config, **overrides)
    return raw_prices, config


def _out_dir(args) -> Path:
    if args.out_dir is not None:
        return Path(args.out_dir)
    return Path(os.environ.get("VOLFIT_OUT_DIR", "."))


def _write_artifacts(out_dir: Path, artifacts: dict[str, str]) -> None:
    """Write every artifact or none: on failure partial files are removed."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name, text in artifacts.items():
            path = out_dir / name
            path.write_text(text, encoding="utf-8", newline="\n")
            written.append(path)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def run_pipeline(raw_prices: str, config: PipelineConfig):
    """Shared fit pipeline over all four series.

    Per series: build the feature table, split chronologically, fit, drop
    training outliers and refit, and report both RMSE modes.  Test rows
    are never excluded.
    """
    prices = parse_price_csv(raw_prices, config)
    returns = log_returns(prices)
    dec = decompose(returns, config.kz_trend, config.kz_seasonal)
    fit = FIT_FUNCTIONS[config.fit_method]
    results = {}
    for name in sf.SERIES_NAMES:
        terms = config.term_sets[name]
        table = sf.build_feature_table(dec.component(name), config.feature_spec)
        train, test = ev.split_train_test(table, config.n_train)
        model = fit(train, terms, config)
        try:
            kept, excluded = sf.remove_outliers(
                train, model, config.outlier_threshold
            )
        except ExclusionError:
            kept, excluded = train, ()
        if excluded:
            model = fit(kept, terms, config)
        report = ev.fit_report(name, config.fit_method, model, kept, test, excluded)
        results[name] = {
            "table": table,
            "train": kept,
            "test": test,
            "model": model,
            "report": report,
        }
    return dec, results


def _cmd_decompose(args) -> int:
    raw_prices, config = _load_inputs(args)
    prices = parse_price_csv(raw_prices, config)
    dec = decompose(log_returns(prices), config.kz_trend, config.kz_seasonal)
    _write_artifacts(_out_dir(args), {"decomposition.csv": decomposition_csv(dec)})
    return 0


def _cmd_fit(args) -> int:
    raw_prices, config = _load_inputs(args)
    _, results = run_pipeline(raw_prices, config)
    artifacts: dict[str, str] = {}
    for name in sf.SERIES_NAMES:
        artifacts[f"model_{name}.json"] = sf.model_to_document(results[name]["model"])
        artifacts[f"report_{name}.json"] = ev.report_to_document(results[name]["report"])
    models = {name: results[name]["model"] for name in sf.SERIES_NAMES}
    artifacts["coefficients.csv"] = ev.coefficient_table_csv(models)
    _write_artifacts(_out_dir(args), artifacts)
    return 0


def _cmd_predict(args) -> int:
    model = sf.model_from_document(Path(args.model).read_text(encoding="utf-8"))
    value = sf.evaluate_surface(model, args.x, args.y)
    print(f"{value:#.6g}")
    return 0


def _cmd_evaluate(args) -> int:
    raw_prices, config = _load_inputs(args)
    _, results = run_pipeline(raw_prices, config)
    models = {name: results[name]["model"] for name in sf.SERIES_NAMES}
    print(ev.export_coefficient_table(models), end="")
    for name in sf.SERIES_NAMES:
        r = results[name]["report"]
        print(
            f"{name}: method={r.method} train_rmse={r.train_rmse:#.6g} "
            f"test_rmse={r.test_rmse:#.6g} n_train={r.n_train} "
            f"n_test={r.n_test} excluded={len(r.excluded)} "
            f"converged={r.converged}"
        )
    return 0


def _cmd_export_plot(args) -> int:
    raw_prices, config = _load_inputs(args)
    _, results = run_pipeline(raw_prices, config)
    artifacts: dict[str, str] = {}
    for name in sf.SERIES_NAMES:
        surface_csv, residual_csv = export_plot_data(
            results[name]["model"], results[name]["train"], args.grid
        )
        artifacts[f"surface_{name}.csv"] = surface_csv
        artifacts[f"residuals_{name}.csv"] = residual_csv
    _write_artifacts(_out_dir(args), artifacts)
    return 0


def _add_pipeline_options(parser: argparse.ArgumentParser, fitting: bool) -> None:
    parser.add_argument("--input", required=True, help="price CSV path")
    parser.add_argument("--config", help="pipeline config file")
    parser.add_argument("--out-dir",
                        help="output directory (default: $VOLFIT_OUT_DIR or .)")
    if fitting:
        parser.add_argument("--method", choices=sorted(sf.FIT_METHODS),
                            help="override the configured fit method")
        parser.add_argument("--n-train", type=int, dest="n_train",
                            help="override the training row count")
        parser.add_argument("--lag", type=int, help="override the feature lag")
        parser.add_argument("--threshold", type=float,
                            help="override the outlier threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volfit",
        description="Decompose a return series and fit polynomial "
                    "prediction surfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dec = sub.add_parser("decompose", help="write the decomposition CSV")
    _add_pipeline_options(p_dec, fitting=False)
    p_dec.set_defaults(func=_cmd_decompose)

    p_fit = sub.add_parser("fit", help="fit all four series and write artifacts")
    _add_pipeline_options(p_fit, fitting=True)
    p_fit.set_defaults(func=_cmd_fit)

    p_pred = sub.add_parser("predict", help="evaluate a saved model at (x, y)")
    p_pred.add_argument("model", help="model document path")
    p_pred.add_argument("x", type=float)
    p_pred.add_argument("y", type=float)
    p_pred.set_defaults(func=_cmd_predict)

    p_eval = sub.add_parser("evaluate",
                            help="print the coefficient grid and RMSE summary")
    _add_pipeline_options(p_eval, fitting=True)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_plot = sub.add_parser("export-plot",
                            help="write surface-grid and residual CSVs")
    _add_pipeline_options(p_plot, fitting=True)
    p_plot.add_argument("--grid", type=int, default=25,
                        help="surface grid density per axis (default 25)")
    p_plot.set_defaults(func=_cmd_export_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (VolfitError, OSError, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
