"""
Dataset ingestion, export, multinomial simulation and the bootstrap
feasibility harness.

Summarized CSV: ``x_<name>`` covariate columns followed by ``y_1..y_J`` counts.
Raw CSV: covariate columns plus one ``category`` column whose labels follow a
declared order.
"""

import io
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core.config import settings
from ..core.design import DesignSpec
from ..core.exceptions import DataError, MultinomialLinkError
from ..core.likelihood import Dataset
from ..core.prob import category_probs
from ..core.seeding import SeedStreams
from ..core.structure import ModelSpec
from .fitter import FitOptions, fisher_scoring
from .reporting import atomic_write_text

logger = logging.getLogger(__name__)

PathOrBuffer = Union[str, os.PathLike, io.IOBase]

CATEGORY_COLUMN = "category"


@dataclass(frozen=True)
class RawTable:
    """Subject-level rows: covariates plus a category label"""
    frame: pd.DataFrame
    covariates: Tuple[str, ...]
    categories: Tuple[str, ...]

    def aggregate(self) -> Dataset:
        """Group rows by distinct setting and count categories"""
        labels = self.frame[CATEGORY_COLUMN]
        unknown = sorted(set(labels) - set(self.categories))
        if unknown:
            raise DataError(f"Unknown category labels {unknown}; declared order is {list(self.categories)}")
        if not self.covariates:
            counts = labels.value_counts().reindex(list(self.categories), fill_value=0)
            return Dataset(np.zeros((1, 0)), counts.to_numpy()[None, :], (), self.categories)
        frame = self.frame[list(self.covariates)].copy()
        frame["_code"] = pd.Categorical(labels, categories=list(self.categories)).codes
        table = (
            frame.groupby(list(self.covariates) + ["_code"], sort=True).size()
            .unstack("_code", fill_value=0)
            .reindex(columns=range(len(self.categories)), fill_value=0)
        )
        x = np.array([list(k) if isinstance(k, tuple) else [k] for k in table.index], dtype=float)
        return Dataset(x, table.to_numpy(), self.covariates, self.categories)


def _read_csv(source: PathOrBuffer) -> pd.DataFrame:
    try:
        # "NA" may be a response category, so no implicit missing-value parsing
        frame = pd.read_csv(source, sep=",", encoding="utf-8", decimal=".", keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataError("Input CSV is empty")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"Malformed CSV: {str(e)}")
    if frame.empty:
        raise DataError("Input CSV has a header but no rows")
    return frame


def _numeric(frame: pd.DataFrame, columns: Sequence[str], what: str) -> np.ndarray:
    try:
        values = frame[list(columns)].apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise DataError(f"Non-numeric {what}: {str(e)}")
    if not np.all(np.isfinite(values)):
        raise DataError(f"Missing or non-finite {what}")
    return values


def read_raw(source: PathOrBuffer, categories: Sequence[str], covariates: Optional[Sequence[str]] = None) -> RawTable:
    frame = _read_csv(source)
    if CATEGORY_COLUMN not in frame.columns:
        raise DataError(f"Raw CSV needs a '{CATEGORY_COLUMN}' column")
    names = [c for c in frame.columns if c != CATEGORY_COLUMN] if covariates is None else list(covariates)
    missing = [c for c in names if c not in frame.columns]
    if missing:
        raise DataError(f"Raw CSV lacks covariate columns {missing}")
    if len(set(categories)) != len(categories) or len(categories) < 2:
        raise DataError(f"Category order must list at least two distinct labels, got {list(categories)}")
    numeric = pd.DataFrame(_numeric(frame, names, "covariate"), columns=names) if names else pd.DataFrame(index=frame.index)
    numeric[CATEGORY_COLUMN] = frame[CATEGORY_COLUMN].astype(str).str.strip().to_numpy()
    return RawTable(frame=numeric, covariates=tuple(names), categories=tuple(str(c) for c in categories))


def read_summarized(source: PathOrBuffer, categories: Optional[Sequence[str]] = None) -> Dataset:
    frame = _read_csv(source)
    x_cols = [c for c in frame.columns if str(c).startswith("x_")]
    y_cols = [c for c in frame.columns if str(c).startswith("y_")]
    expected = [f"y_{j}" for j in range(1, len(y_cols) + 1)]
    if len(y_cols) < 2 or set(y_cols) != set(expected):
        raise DataError(f"Summarized CSV needs count columns y_1..y_J, got {y_cols}")
    extra = [c for c in frame.columns if c not in x_cols and c not in y_cols]
    if extra:
        raise DataError(f"Unexpected columns in summarized CSV: {extra}")

    x = _numeric(frame, x_cols, "covariate") if x_cols else np.zeros((len(frame), 0))
    y = _numeric(frame, expected, "count")
    if np.any(y < 0) or not np.all(y == np.round(y)):
        raise DataError("Counts must be non-negative integers")

    covariates = tuple(c[2:] for c in x_cols)
    grouped = pd.DataFrame(np.column_stack([x, y]), columns=list(x_cols) + expected)
    if x_cols:
        summed = grouped.groupby(list(x_cols), sort=False, as_index=False)[expected].sum()
    else:
        summed = grouped[expected].sum().to_frame().T
    if len(summed) < len(grouped):
        logger.warning(f"Summed counts of {len(grouped) - len(summed)} duplicate setting rows")
    empty = summed[expected].sum(axis=1) <= 0
    if empty.any():
        logger.warning(f"Dropped {int(empty.sum())} settings without observations")
        summed = summed[~empty]
    if summed.empty:
        raise DataError("No observations in input")

    return Dataset(
        summed[list(x_cols)].to_numpy(dtype=float) if x_cols else np.zeros((1, 0)),
        summed[expected].to_numpy().astype(np.int64),
        covariates,
        tuple(categories) if categories else (),
    )


def ingest(
    source: PathOrBuffer,
    fmt: str = "summarized",
    categories: Optional[Sequence[str]] = None,
    covariates: Optional[Sequence[str]] = None,
) -> Dataset:
    """
    Load a dataset from CSV

    Args:
        source: Path or text buffer
        fmt: "summarized" or "raw"
        categories: Declared category order; required for raw input
        covariates: Raw covariate columns; all non-category columns when omitted

    Returns:
        Dataset grouped by distinct covariate setting

    Raises:
        DataError: On unknown labels, non-numeric covariates or empty input
    """
    try:
        if fmt == "summarized":
            data = read_summarized(source, categories)
        elif fmt == "raw":
            if not categories:
                raise DataError("Raw input needs the declared category order")
            data = read_raw(source, categories, covariates).aggregate()
        else:
            raise DataError(f"Unknown data format: {fmt}")
    except DataError as e:
        logger.error(f"Failed to ingest data: {str(e)}")
        raise
    logger.info(f"Ingested {data.m} settings, {data.J} categories, {data.total} observations")
    return data


def to_frame(data: Dataset) -> pd.DataFrame:
    frame = pd.DataFrame(data.x, columns=[f"x_{c}" for c in data.covariates])
    for j in range(data.J):
        frame[f"y_{j + 1}"] = data.y[:, j]
    return frame


def export(data: Dataset, path: Union[str, os.PathLike]) -> None:
    """Write data in the summarized format, atomically"""
    atomic_write_text(path, to_frame(data).to_csv(index=False, float_format="%.17g"))


def simulate(
    spec: ModelSpec,
    design: DesignSpec,
    theta: Sequence[float],
    x_settings: np.ndarray,
    n_per_setting: Union[int, Sequence[int]],
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Dataset:
    """
    Draw y_i ~ Multinomial(n_i, pi_i(theta)) at every setting

    Args:
        spec: Model family and links
        design: Predictor layout
        theta: Feasible parameter vector
        x_settings: m x d distinct settings
        n_per_setting: n_i, a scalar or one value per setting
        seed: Base seed; ignored when rng is given
        rng: Generator to draw from

    Raises:
        InfeasibleParameterError: If theta is infeasible at some setting
    """
    if rng is None:
        if seed is None:
            raise DataError("simulate needs a seed or a generator")
        rng = SeedStreams(seed).generator("simulate")
    xs = np.atleast_2d(np.asarray(x_settings, dtype=float))
    pi = category_probs(spec, design.build_X_all(xs), theta)
    n = np.broadcast_to(np.asarray(n_per_setting, dtype=np.int64), (xs.shape[0],))
    if np.any(n < 1):
        raise DataError("Every setting needs n_i >= 1")
    y = np.vstack([rng.multinomial(int(n_i), pi_i / pi_i.sum()) for n_i, pi_i in zip(n, pi)])
    return Dataset(xs, y, design.covariates)


@dataclass(frozen=True)
class ReplicateOutcome:
    index: int
    converged: bool
    feasible: bool
    min_fitted_probability: float
    loglik: float
    error: Optional[str] = None


@dataclass(frozen=True)
class BootstrapReport:
    replicates: Tuple[ReplicateOutcome, ...]

    @property
    def B(self) -> int:
        return len(self.replicates)

    @property
    def n_converged(self) -> int:
        return sum(1 for r in self.replicates if r.converged)

    @property
    def n_nonconverged(self) -> int:
        return sum(1 for r in self.replicates if r.error is None and not r.converged)

    @property
    def n_infeasible(self) -> int:
        return sum(1 for r in self.replicates if not r.feasible)

    @property
    def n_nonpositive(self) -> int:
        return sum(1 for r in self.replicates if r.error is None and not r.min_fitted_probability > 0.0)

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.replicates if r.error is not None)

    @property
    def min_fitted_probability(self) -> float:
        values = [r.min_fitted_probability for r in self.replicates if r.error is None]
        return float(min(values)) if values else float("nan")

    def summary(self) -> dict:
        return {
            "replicates": self.B,
            "converged": self.n_converged,
            "nonconverged": self.n_nonconverged,
            "infeasible": self.n_infeasible,
            "nonpositive_probability": self.n_nonpositive,
            "failed": self.n_failed,
            "min_fitted_probability": self.min_fitted_probability,
        }


def disaggregate(data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Setting index and category index of every observation"""
    flat = data.y.reshape(-1)
    cells = np.repeat(np.arange(flat.shape[0]), flat)
    return cells // data.J, cells % data.J


def resample(data: Dataset, rng: np.random.Generator) -> Dataset:
    """Observation-level bootstrap sample of the same total size"""
    setting, category = disaggregate(data)
    draw = rng.integers(0, setting.shape[0], setting.shape[0])
    counts = np.bincount(setting[draw] * data.J + category[draw], minlength=data.m * data.J)
    return data.with_counts(counts.reshape(data.m, data.J))


def _run_replicate(index, data, spec, design, rng, options) -> ReplicateOutcome:
    sample = resample(data, rng)
    try:
        fit = fisher_scoring(spec, design, sample, options)
    except MultinomialLinkError as e:
        logger.warning(f"Bootstrap replicate {index} failed: {str(e)}")
        return ReplicateOutcome(index, False, False, float("nan"), float("nan"), str(e))
    min_pi = fit.min_fitted_probability
    feasible = bool(np.all(fit.pi > 0.0) and np.all(fit.pi < 1.0))
    return ReplicateOutcome(index, fit.converged, feasible, min_pi, fit.loglik)


def bootstrap_study(
    data: Dataset,
    spec: ModelSpec,
    design: DesignSpec,
    B: int,
    seed: int,
    options: Optional[FitOptions] = None,
    jobs: Optional[int] = None,
) -> BootstrapReport:
    """
    Refit the model on B observation-level bootstrap samples

    Replicate b draws from its own stream derived from (seed, b), so the report
    does not depend on jobs.

    Args:
        data: Original data
        spec: Model family and links
        design: Predictor layout
        B: Number of replicates
        seed: Base seed
        options: Scoring controls
        jobs: Concurrent fits, settings.DEFAULT_JOBS when omitted

    Returns:
        BootstrapReport ordered by replicate index
    """
    if B < 1:
        raise DataError(f"B must be at least 1, got {B}")
    rngs = SeedStreams(seed).generators("bootstrap", B)
    workers = jobs or settings.DEFAULT_JOBS
    options = options or FitOptions.from_settings()
    logger.info(f"Bootstrap study: B={B}, seed={seed}, jobs={workers}, model={spec.label}")

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(
            lambda b: _run_replicate(b, data, spec, design, rngs[b], options), range(B)
        ))
    report = BootstrapReport(tuple(outcomes))
    logger.info(f"Bootstrap finished: {report.summary()}")
    return report
