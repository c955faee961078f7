"""Sparse bivariate polynomial surfaces fit by ordinary and robust least squares.

A surface is a sparse polynomial ``f(x, y) = sum_j c_j * x**m_j * y**n_j``
over a configured list of exponent pairs.  Feature tables pair a scaled
time index with a lagged series value, so a fitted surface predicts the
current value of a series from when it is observed and where it recently
was.  The robust variants (least absolute residuals and Tukey bisquare)
run as iteratively reweighted least squares seeded by the ordinary
solution; all solves go through a pivoted QR factorization rather than
normal equations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .errors import (
    DegreesOfFreedomError,
    ExclusionError,
    FormatError,
    InsufficientData,
    RankError,
)

TIME_INDEX_SCALED = "time_index_scaled"
LAGGED_VALUE = "lagged_value"
FEATURE_SOURCES = (TIME_INDEX_SCALED, LAGGED_VALUE)

FIT_METHODS = ("ols", "lar", "bisquare")
SERIES_NAMES = ("volatility", "trend", "seasonal", "remainder")

# MAD of a standard normal; dividing a median absolute deviation by this
# turns it into a consistent estimate of the Gaussian sigma.
MAD_TO_SIGMA = 0.6745


@dataclass(frozen=True)
class TermSet:
    """Ordered, duplicate-free list of (m, n) exponent pairs for one surface."""

    terms: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("term set must be non-empty")
        coerced = []
        seen = set()
        for m, n in self.terms:
            m, n = int(m), int(n)
            if m < 0 or n < 0:
                raise ValueError(f"exponents must be non-negative, got ({m}, {n})")
            if (m, n) in seen:
                raise ValueError(f"duplicate term ({m}, {n})")
            seen.add((m, n))
            coerced.append((m, n))
        object.__setattr__(self, "terms", tuple(coerced))

    def __len__(self) -> int:
        return len(self.terms)

    def labels(self) -> list[str]:
        return [f"{m}:{n}" for m, n in self.terms]

    @classmethod
    def parse(cls, text: str) -> "TermSet":
        """Parse a comma-separated list of m:n pairs, e.g. ``"0:0,0:1,1:0"``."""
        pairs = []
        for chunk in text.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            m_part, sep, n_part = chunk.partition(":")
            if not sep:
                raise ValueError(f"term {chunk!r} is not of the form m:n")
            pairs.append((int(m_part), int(n_part)))
        return cls(tuple(pairs))


# Sparsity patterns used when the configuration does not override them:
# one surface per decomposed series.
DEFAULT_TERM_SETS: dict[str, TermSet] = {
    "volatility": TermSet(((0, 0), (0, 1), (0, 2), (1, 0), (1, 1))),
    "trend": TermSet(
        ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1),
         (3, 0), (3, 1), (4, 0), (4, 1), (5, 0))
    ),
    "seasonal": TermSet(((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0))),
    "remainder": TermSet(
        ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (3, 0))
    ),
}


@dataclass(frozen=True)
class FeatureSpec:
    """How to turn one series into regression features.

    Exactly one of x/y is the scaled time index t/T in (0, 1] and the other
    is the series value ``lag`` steps earlier; the target is always the
    current value.
    """

    x_source: str = TIME_INDEX_SCALED
    y_source: str = LAGGED_VALUE
    lag: int = 1

    def __post_init__(self):
        if self.x_source not in FEATURE_SOURCES:
            raise ValueError(f"unknown x_source {self.x_source!r}")
        if self.y_source not in FEATURE_SOURCES:
            raise ValueError(f"unknown y_source {self.y_source!r}")
        if self.x_source == self.y_source:
            raise ValueError("x_source and y_source must differ")
        if self.lag < 1:
            raise ValueError("lag must be >= 1")


@dataclass(frozen=True)
class FeatureTable:
    """Complete-case regression rows extracted from one series.

    ``provenance`` holds the 1-based source index t of each row's target, so
    excluded or split rows can always be traced back to the series.
    """

    x: np.ndarray
    y: np.ndarray
    target: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        object.__setattr__(self, "provenance", np.asarray(self.provenance, dtype=int))
        lengths = {arr.shape for arr in (self.x, self.y, self.target, self.provenance)}
        if len(lengths) != 1 or self.x.ndim != 1:
            raise ValueError("feature columns must be 1-d and equally long")
        for name in ("x", "y", "target"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"feature column {name!r} contains non-finite entries")

    def __len__(self) -> int:
        return int(self.x.size)

    def subset(self, selector) -> "FeatureTable":
        """New table holding the selected rows (indices, mask, or slice)."""
        return FeatureTable(
            self.x[selector], self.y[selector],
            self.target[selector], self.provenance[selector],
        )


@dataclass(frozen=True)
class IrlsOptions:
    """Tuning knobs for the reweighted least-squares loops."""

    max_iterations: int = 50
    tolerance: float = 1e-8
    lar_floor: float = 1e-8
    bisquare_constant: float = 4.685

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0 or self.lar_floor <= 0 or self.bisquare_constant <= 0:
            raise ValueError("tolerance, lar_floor, and bisquare_constant must be > 0")


@dataclass(frozen=True)
class PolySurfaceModel:
    """Fitted surface: coefficients with confidence bounds and fit metadata.

    ``weights`` keeps the final reweighting used by the robust fits so that
    standard errors can be recomputed; it is internal state and is not part
    of the serialized document.
    """

    term_set: TermSet
    coefficients: tuple[float, ...]
    bounds: tuple[tuple[float, float], ...]
    method: str
    n_points: int
    sigma: float
    iterations: int
    converged: bool = True
    weights: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.method not in FIT_METHODS:
            raise ValueError(f"unknown fit method {self.method!r}")
        if not (len(self.coefficients) == len(self.term_set) == len(self.bounds)):
            raise ValueError("coefficients, terms, and bounds must align")
        for c, (lo, hi) in zip(self.coefficients, self.bounds):
            if not (lo <= c <= hi):
                raise ValueError(f"coefficient {c} outside its bounds ({lo}, {hi})")


def build_feature_table(series, spec: FeatureSpec) -> FeatureTable:
    """Extract (x, y, target) rows from a series with NaN-coded missing values.

    With the default spec, row t (1-based) is
    ``x = t / T, y = series[t - lag], target = series[t]``; rows touching a
    missing value are dropped and the surviving targets' indices are kept as
    provenance.
    """
    values = np.asarray(series, dtype=float)
    total = values.size
    if total <= spec.lag:
        raise InsufficientData(
            f"series of length {total} cannot support lag {spec.lag}"
        )
    t = np.arange(spec.lag + 1, total + 1)
    target = values[t - 1]
    lagged = values[t - 1 - spec.lag]
    scaled = t / total
    x = scaled if spec.x_source == TIME_INDEX_SCALED else lagged
    y = scaled if spec.y_source == TIME_INDEX_SCALED else lagged
    keep = np.isfinite(target) & np.isfinite(lagged)
    if not keep.any():
        raise InsufficientData("no complete rows after dropping missing values")
    return FeatureTable(x[keep], y[keep], target[keep], t[keep])


def design_matrix(table: FeatureTable, terms: TermSet) -> np.ndarray:
    """Matrix with entry (i, j) = x_i**m_j * y_i**n_j (0**0 taken as 1)."""
    columns = [table.x ** m * table.y ** n for m, n in terms.terms]
    return np.column_stack(columns) if columns else np.empty((len(table), 0))


def evaluate_surface(model: PolySurfaceModel, x, y):
    """Evaluate sum of c * x**m * y**n; broadcasts over array inputs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    for c, (m, n) in zip(model.coefficients, model.term_set.terms):
        out = out + c * x ** m * y ** n
    return float(out) if out.ndim == 0 else out


def _require_rows(X: np.ndarray, terms: TermSet) -> None:
    n, p = X.shape
    if n < p:
        raise InsufficientData(
            f"{n} rows cannot determine {p} terms ({', '.join(terms.labels())})"
        )


def _qr_solve(X: np.ndarray, z: np.ndarray, terms: TermSet):
    """Least-squares solve via column-pivoted QR.

    Returns the coefficient vector and the (R, pivot) pair for covariance
    work.  Raises RankError naming the dependent columns when the matrix
    does not have full column rank.
    """
    n, p = X.shape
    q, r, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, p) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.count_nonzero(diag > tol))
    if rank < p:
        dependent = tuple(terms.labels()[j] for j in piv[rank:])
        raise RankError(
            "design matrix is rank deficient; dependent columns: "
            + ", ".join(dependent),
            columns=dependent,
        )
    beta_pivoted = linalg.solve_triangular(r, q.T @ z)
    beta = np.empty(p)
    beta[piv] = beta_pivoted
    return beta, (r, piv)


def _wls_solve(X, z, w, terms):
    sw = np.sqrt(w)
    return _qr_solve(X * sw[:, None], z * sw, terms)


def _unscaled_covariance(r: np.ndarray, piv: np.ndarray) -> np.ndarray:
    """(X'X)^-1 (or its weighted analogue) from a pivoted QR factor."""
    p = r.shape[1]
    rinv = linalg.solve_triangular(r, np.eye(p))
    cov_pivoted = rinv @ rinv.T
    cov = np.empty_like(cov_pivoted)
    cov[np.ix_(piv, piv)] = cov_pivoted
    return cov


def _weighted_factor(X, weights, terms):
    sw = np.sqrt(weights)
    Xw = X * sw[:, None]
    q, r, piv = linalg.qr(Xw, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(Xw.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    if int(np.count_nonzero(diag > tol)) < X.shape[1]:
        return None
    return r, piv


def _mad_sigma(residuals: np.ndarray) -> float:
    """Robust scale: median absolute deviation about the median, normalized."""
    med = np.median(residuals)
    return float(np.median(np.abs(residuals - med)) / MAD_TO_SIGMA)


def bisquare_weights(u) -> np.ndarray:
    """Tukey biweight: (1 - u**2)**2 for |u| < 1, exactly zero outside."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, (1.0 - u * u) ** 2, 0.0)


def _finish_model(
    method: str,
    table: FeatureTable,
    terms: TermSet,
    X: np.ndarray,
    beta: np.ndarray,
    weights: np.ndarray,
    iterations: int,
    converged: bool,
    confidence_level: float,
    factor=None,
) -> PolySurfaceModel:
    """Assemble the model record: sigma, t-based bounds, bookkeeping."""
    n, p = X.shape
    residuals = table.target - X @ beta
    sse = float(residuals @ residuals)
    sigma = math.sqrt(sse / (n - p)) if n > p else 0.0
    coefficients = tuple(float(b) for b in beta)
    if n > p:
        if factor is None:
            factor = _weighted_factor(X, weights, terms)
        if factor is None:
            # weights annihilated too many rows for a covariance estimate;
            # fall back to the unweighted design
            factor = _weighted_factor(X, np.ones(n), terms)
        se = sigma * np.sqrt(np.maximum(np.diag(_unscaled_covariance(*factor)), 0.0))
        tq = float(stats.t.ppf(0.5 + confidence_level / 2.0, n - p))
        bounds = tuple(
            (float(c - tq * s), float(c + tq * s))
            for c, s in zip(coefficients, se)
        )
    else:
        # interpolating fit: zero residual degrees of freedom, point bounds
        bounds = tuple((c, c) for c in coefficients)
    return PolySurfaceModel(
        term_set=terms,
        coefficients=coefficients,
        bounds=bounds,
        method=method,
        n_points=n,
        sigma=sigma,
        iterations=iterations,
        converged=converged,
        weights=np.asarray(weights, dtype=float),
    )


def fit_ols(table: FeatureTable, terms: TermSet,
            confidence_level: float = 0.95) -> PolySurfaceModel:
    """Ordinary least squares via pivoted QR.

    Minimizes the summed squared residuals; sigma is sqrt(SSE / (n - p)).
    """
    X = design_matrix(table, terms)
    _require_rows(X, terms)
    beta, factor = _qr_solve(X, table.target, terms)
    return _finish_model(
        "ols", table, terms, X, beta, np.ones(len(table)),
        iterations=0, converged=True,
        confidence_level=confidence_level, factor=factor,
    )


def _lar_iterate(X, y, beta, floor, terms, opts):
    """Reweighted iterations for the absolute-residual objective.

    Returns (best_beta, solve_count, converged, objective_history); the
    history holds sum|r| after the starting point and each completed solve.
    """
    residuals = y - X @ beta
    best_obj = float(np.sum(np.abs(residuals)))
    best_beta = beta
    history = [best_obj]
    converged = False
    solves = 0
    for _ in range(opts.max_iterations):
        w = 1.0 / np.maximum(np.abs(residuals), floor)
        try:
            candidate, _ = _wls_solve(X, y, w, terms)
        except RankError:
            break
        solves += 1
        obj = float(np.sum(np.abs(y - X @ candidate)))
        if obj > best_obj * (1.0 + 1e-12):
            # reweighting stopped paying off; keep the best iterate
            break
        history.append(obj)
        if obj < best_obj:
            best_obj, best_beta = obj, candidate
        step = float(np.max(np.abs(candidate - beta)))
        scale = max(float(np.max(np.abs(candidate))), np.finfo(float).tiny)
        residuals = y - X @ candidate
        beta = candidate
        if step <= opts.tolerance * scale:
            converged = True
            break
    return best_beta, solves, converged, history


def fit_lar(table: FeatureTable, terms: TermSet,
            opts: IrlsOptions | None = None,
            confidence_level: float = 0.95) -> PolySurfaceModel:
    """Least absolute residuals via IRLS with weights 1 / max(|r|, floor).

    Starts from the ordinary solution and approximates argmin sum|r_i|.
    The floor is ``opts.lar_floor`` times the starting sigma, keeping the
    weights finite near interpolated points.  A fit that fails to meet the
    coefficient-change tolerance returns its best iterate with
    ``converged=False``.
    """
    opts = opts or IrlsOptions()
    X = design_matrix(table, terms)
    _require_rows(X, terms)
    y = table.target
    beta, factor = _qr_solve(X, y, terms)
    n, p = X.shape
    residuals = y - X @ beta
    sse = float(residuals @ residuals)
    if n == p or sse == 0.0:
        # the starting point already interpolates; both objectives coincide
        return _finish_model(
            "lar", table, terms, X, beta, np.ones(n),
            iterations=0, converged=True,
            confidence_level=confidence_level, factor=factor,
        )
    floor = opts.lar_floor * math.sqrt(sse / (n - p))
    beta, solves, converged, _ = _lar_iterate(X, y, beta, floor, terms, opts)
    weights = 1.0 / np.maximum(np.abs(y - X @ beta), floor)
    return _finish_model(
        "lar", table, terms, X, beta, weights,
        iterations=solves, converged=converged,
        confidence_level=confidence_level,
    )


def fit_bisquare(table: FeatureTable, terms: TermSet,
                 opts: IrlsOptions | None = None,
                 confidence_level: float = 0.95) -> PolySurfaceModel:
    """Tukey bisquare IRLS: w = (1 - u**2)**2 inside |u| < 1, else 0.

    u = r / (c * sigma_mad) with sigma_mad the median absolute deviation of
    the residuals about their median over 0.6745, recomputed every
    iteration; points far from the surface lose all weight.  A zero
    sigma_mad means the surface already interpolates the bulk of the rows
    and the current iterate is returned as-is.
    """
    opts = opts or IrlsOptions()
    X = design_matrix(table, terms)
    _require_rows(X, terms)
    y = table.target
    beta, factor = _qr_solve(X, y, terms)
    n, p = X.shape
    if n == p:
        return _finish_model(
            "bisquare", table, terms, X, beta, np.ones(n),
            iterations=0, converged=True,
            confidence_level=confidence_level, factor=factor,
        )
    converged = False
    solves = 0
    for _ in range(opts.max_iterations):
        residuals = y - X @ beta
        scale = _mad_sigma(residuals)
        if scale == 0.0:
            converged = True
            break
        w = bisquare_weights(residuals / (opts.bisquare_constant * scale))
        if np.count_nonzero(w) < p:
            break
        try:
            candidate, _ = _wls_solve(X, y, w, terms)
        except RankError:
            break
        solves += 1
        step = float(np.max(np.abs(candidate - beta)))
        ref = max(float(np.max(np.abs(candidate))), np.finfo(float).tiny)
        beta = candidate
        if step <= opts.tolerance * ref:
            converged = True
            break
    final_residuals = y - X @ beta
    scale = _mad_sigma(final_residuals)
    if scale > 0.0:
        weights = bisquare_weights(
            final_residuals / (opts.bisquare_constant * scale)
        )
        if np.count_nonzero(weights) < p:
            weights = np.ones(n)
    else:
        weights = np.ones(n)
    return _finish_model(
        "bisquare", table, terms, X, beta, weights,
        iterations=solves, converged=converged,
        confidence_level=confidence_level,
    )


def _reconstruct_weights(model: PolySurfaceModel, table: FeatureTable,
                         X: np.ndarray) -> np.ndarray:
    """Rebuild the final IRLS weights for a model lacking stored ones."""
    n = len(table)
    if model.method == "ols":
        return np.ones(n)
    residuals = table.target - X @ np.asarray(model.coefficients)
    if model.method == "lar":
        floor = IrlsOptions().lar_floor * model.sigma
        if floor == 0.0:
            return np.ones(n)
        return 1.0 / np.maximum(np.abs(residuals), floor)
    scale = _mad_sigma(residuals)
    if scale == 0.0:
        return np.ones(n)
    weights = bisquare_weights(residuals / (IrlsOptions().bisquare_constant * scale))
    if np.count_nonzero(weights) < len(model.term_set):
        return np.ones(n)
    return weights


def confidence_bounds(model: PolySurfaceModel, table: FeatureTable,
                      level: float) -> tuple[tuple[float, float], ...]:
    """Per-term Student-t intervals at the given confidence level.

    bound = c +- t_{1-(1-level)/2, n-p} * se(c), with the standard errors
    taken from the diagonal of sigma^2 (X'WX)^-1 where W holds the final
    IRLS weights (identity for ordinary least squares).
    """
    n, p = len(table), len(model.term_set)
    if n <= p:
        raise DegreesOfFreedomError(
            f"confidence bounds need more rows ({n}) than terms ({p})"
        )
    X = design_matrix(table, model.term_set)
    if model.weights is not None and len(model.weights) == n:
        weights = np.asarray(model.weights, dtype=float)
    else:
        weights = _reconstruct_weights(model, table, X)
    factor = _weighted_factor(X, weights, model.term_set)
    if factor is None:
        factor = _weighted_factor(X, np.ones(n), model.term_set)
    if factor is None:
        raise RankError("design matrix is rank deficient")
    se = model.sigma * np.sqrt(np.maximum(np.diag(_unscaled_covariance(*factor)), 0.0))
    tq = float(stats.t.ppf(0.5 + level / 2.0, n - p))
    return tuple(
        (float(c - tq * s), float(c + tq * s))
        for c, s in zip(model.coefficients, se)
    )


def remove_outliers(table: FeatureTable, model: PolySurfaceModel,
                    threshold: float = 3.0):
    """Drop rows whose standardized residual exceeds the threshold.

    The scale is the median of |r| over 0.6745, taken about zero so that a
    table whose residuals are all identical keeps every row.  Returns the
    filtered table and the provenance indices of the dropped rows; raises
    ExclusionError when dropping would leave fewer rows than model terms.
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    residuals = table.target - evaluate_surface(model, table.x, table.y)
    absolute = np.abs(residuals)
    scale = float(np.median(absolute)) / MAD_TO_SIGMA
    if scale > 0.0:
        keep = absolute / scale <= threshold
    else:
        # majority of rows fit exactly; anything off the surface is an outlier
        keep = absolute == 0.0
    if np.all(keep):
        return table, ()
    if int(np.count_nonzero(keep)) < len(model.term_set):
        raise ExclusionError(
            "outlier exclusion would leave fewer rows than model terms"
        )
    excluded = tuple(int(t) for t in table.provenance[~keep])
    return table.subset(keep), excluded


def model_to_document(model: PolySurfaceModel) -> str:
    """Serialize a fitted model to its JSON document."""
    doc = {
        "method": model.method,
        "terms": [[m, n] for m, n in model.term_set.terms],
        "coefficients": list(model.coefficients),
        "bounds": [[lo, hi] for lo, hi in model.bounds],
        "sigma": model.sigma,
        "n_points": model.n_points,
        "iterations": model.iterations,
        "converged": model.converged,
    }
    return json.dumps(doc, indent=2) + "\n"


def model_from_document(text: str) -> PolySurfaceModel:
    """Parse a model document; raises FormatError on anything malformed."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    try:
        terms = TermSet(tuple((int(m), int(n)) for m, n in doc["terms"]))
        return PolySurfaceModel(
            term_set=terms,
            coefficients=tuple(float(c) for c in doc["coefficients"]),
            bounds=tuple((float(lo), float(hi)) for lo, hi in doc["bounds"]),
            method=str(doc["method"]),
            n_points=int(doc["n_points"]),
            sigma=float(doc["sigma"]),
            iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"model document is malformed: {exc}") from exc
