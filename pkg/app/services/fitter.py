"""
Maximum likelihood fitting by Fisher scoring.

Starting values come from least squares on smoothed empirical links; an
infeasible start is pulled back toward an intercept-only anchor until it is
feasible. Every accepted iterate is feasible and strictly increases the
log-likelihood.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.config import settings
from ..core.design import DesignSpec, build_H, check_rank
from ..core.exceptions import FitError, InfeasibleParameterError, SpecError
from ..core.likelihood import Dataset, ScoreAndInfo, loglik_X, score_and_info_X
from ..core.prob import category_probs, check_feasible_X, pi_from_rho, rho_from_pi
from ..core.structure import ModelSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitOptions:
    """
    Fisher scoring controls

    Args:
        tolerance: Relative tolerance on the step size and on the log-likelihood gain
        backtrack_factor: Step shrink factor in (0, 1)
        eigen_floor: Smallest eigenvalue allowed in F before it is shifted
        max_iter: Maximum number of accepted iterations
        max_backtrack: Maximum number of step shrinks per iteration
    """
    tolerance: float = settings.FIT_TOLERANCE
    backtrack_factor: float = settings.BACKTRACK_FACTOR
    eigen_floor: float = settings.EIGEN_FLOOR
    max_iter: int = settings.MAX_ITER
    max_backtrack: int = settings.MAX_BACKTRACK

    def __post_init__(self):
        if not self.tolerance > 0.0:
            raise SpecError(f"tolerance must be positive, got {self.tolerance}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise SpecError(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")
        if not self.eigen_floor > 0.0:
            raise SpecError(f"eigen_floor must be positive, got {self.eigen_floor}")
        if self.max_iter < 1 or self.max_backtrack < 1:
            raise SpecError("max_iter and max_backtrack must be at least 1")

    @classmethod
    def from_settings(cls, **overrides) -> "FitOptions":
        values = settings.get_fit_defaults()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    loglik: float
    step_norm: float
    backtracks: int = 0
    shift: float = 0.0


@dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    design: DesignSpec
    theta: np.ndarray
    loglik: float
    F: np.ndarray
    pi: np.ndarray
    aic: float
    bic: float
    n_total: int
    converged: bool
    iterations: int
    trace: Tuple[TraceEntry, ...]
    diagnostics: Tuple[str, ...] = ()

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    @property
    def labels(self) -> List[str]:
        return self.design.column_labels

    @property
    def min_fitted_probability(self) -> float:
        return float(self.pi.min())


def information_criteria(loglik: float, p: int, n: int) -> Tuple[float, float]:
    """AIC = -2 l + 2 p and BIC = -2 l + p log n"""
    return -2.0 * loglik + 2.0 * p, -2.0 * loglik + math.log(n) * p


def _stack(design: DesignSpec, data: Dataset) -> np.ndarray:
    return design.build_X_all(data.x)


def initial_theta(spec: ModelSpec, design: DesignSpec, data: Dataset) -> np.ndarray:
    """
    Least-squares start on smoothed empirical links

    Probabilities are smoothed as (y_ij + 1) / (n_i + J), mapped to rho and
    eta = g(rho), and theta0 = pinv(X'X) X'Y over the stacked model matrices.
    """
    if data.J != spec.J or design.J != spec.J:
        raise SpecError(f"Data has {data.J} categories, model {spec.J}, design {design.J}")
    smoothed = (data.y + 1.0) / (data.n[:, None] + spec.J)
    eta = np.vstack([
        np.array([link.g(r) for link, r in zip(spec.links, rho_from_pi(spec, row))])
        for row in smoothed
    ])
    X_all = _stack(design, data)
    big_X = X_all.reshape(-1, design.p)
    big_Y = eta.reshape(-1)
    return np.linalg.pinv(big_X.T @ big_X) @ big_X.T @ big_Y


def anchor_theta(spec: ModelSpec, design: DesignSpec, data: Dataset) -> Tuple[np.ndarray, List[str]]:
    """
    Intercept-only anchor from pooled proportions

    Intercepts take g_j(rho_j) of the pooled smoothed proportions and every
    other coordinate is 0. Categories without an intercept get rho_j = g_j^-1(0)
    before the pooled probabilities are rebuilt.
    """
    notes: List[str] = []
    pooled = (data.y.sum(axis=0) + data.m) / (data.total + data.m * spec.J)
    rho = rho_from_pi(spec, pooled)

    intercepts = design.intercept_columns()
    missing = [j for j in range(1, spec.J) if j not in intercepts]
    if missing:
        for j in missing:
            rho[j - 1] = float(spec.links[j - 1].ginv(0.0))
        try:
            rho = rho_from_pi(spec, pi_from_rho(spec, rho))
        except InfeasibleParameterError as e:
            raise FitError(f"No feasible anchor for categories without intercepts {missing}: {str(e)}")
        notes.append(f"categories without intercept anchored at eta=0: {missing}")

    theta = np.zeros(design.p)
    assigned: Dict[int, int] = {}
    for j in sorted(intercepts):
        col = intercepts[j]
        if col in assigned:
            notes.append(f"category {j} shares its intercept with category {assigned[col]}")
            continue
        assigned[col] = j
        theta[col] = float(spec.links[j - 1].g(rho[j - 1]))
    return theta, notes


def feasible_initial(
    spec: ModelSpec,
    design: DesignSpec,
    data: Dataset,
    theta0: Sequence[float],
    options: Optional[FitOptions] = None,
) -> np.ndarray:
    """
    Pull an infeasible start back toward the intercept anchor

    Returns theta0 unchanged when it is feasible, otherwise
    anchor + delta^s (theta0 - anchor) for the smallest feasible s.

    Raises:
        FitError: If no feasible point is found within max_backtrack shrinks
    """
    return _feasible_initial(spec, design, data, np.asarray(theta0, dtype=float), options or FitOptions.from_settings())[0]


def _feasible_initial(spec, design, data, theta0, options) -> Tuple[np.ndarray, List[str]]:
    X_all = _stack(design, data)
    if check_feasible_X(spec, X_all, theta0).feasible:
        return theta0, []

    anchor, notes = anchor_theta(spec, design, data)
    diff = theta0 - anchor
    for s in range(1, options.max_backtrack + 1):
        candidate = anchor + options.backtrack_factor ** s * diff
        if check_feasible_X(spec, X_all, candidate).feasible:
            notes.append(f"start pulled back with s={s}")
            logger.debug(f"Initial estimate pulled back toward anchor with s={s}")
            return candidate, notes

    report = check_feasible_X(spec, X_all, anchor)
    if report.feasible:
        notes.append("start replaced by the anchor")
        return anchor, notes
    raise FitError(f"No feasible initial estimate for {spec.label}; anchor fails at {list(report.failures)[:5]}")


def relative_gain(candidate: float, current: float) -> float:
    """(l* - l) / max(1, |l|)"""
    return (candidate - current) / max(1.0, abs(current))


def _scoring_step(si: ScoreAndInfo, eigen_floor: float) -> Tuple[np.ndarray, float]:
    # solve (F + shift I) delta = score through the eigen-decomposition of F
    eigvals, eigvecs = np.linalg.eigh(si.F)
    shift = 0.0
    if eigvals.size and eigvals.min() < eigen_floor:
        shift = eigen_floor - eigvals.min()
    delta = eigvecs @ ((eigvecs.T @ si.score) / (eigvals + shift))
    return delta, shift


def fisher_scoring(
    spec: ModelSpec,
    design: DesignSpec,
    data: Dataset,
    options: Optional[FitOptions] = None,
    start: Optional[Sequence[float]] = None,
) -> FitResult:
    """
    Fit a multinomial link model by Fisher scoring

    A candidate theta + delta^s * Delta is accepted when it is feasible and
    its relative gain (l* - l) / max(1, |l|) reaches the tolerance; otherwise
    s grows. Iteration stops when the relative step
    delta^s |Delta| / max(1, |theta|) drops below the tolerance.

    Args:
        spec: Model family and links
        design: Predictor layout
        data: Summarized data
        options: Scoring controls, defaults from settings
        start: Optional starting point; must be feasible if given

    Returns:
        FitResult at the best iterate; converged is False when max_iter or
        max_backtrack ran out

    Raises:
        FitError: If no feasible starting point exists
    """
    options = options or FitOptions.from_settings()
    if data.J != spec.J or design.J != spec.J:
        raise SpecError(f"Data has {data.J} categories, model {spec.J}, design {design.J}")
    if design.covariates != data.covariates:
        raise SpecError(f"Design covariates {list(design.covariates)} do not match data {list(data.covariates)}")

    X_all = _stack(design, data)
    y = data.y
    notes: List[str] = []

    rank = check_rank(build_H(design, data.x))
    if not rank.full_row_rank:
        logger.warning(f"H has rank {rank.rank} < p={design.p} for {spec.label}; F will be singular")
        notes.append(f"H rank {rank.rank} < p={design.p}")

    if start is None:
        theta, start_notes = _feasible_initial(spec, design, data, initial_theta(spec, design, data), options)
        notes.extend(start_notes)
    else:
        theta = np.asarray(start, dtype=float)
        if not check_feasible_X(spec, X_all, theta).feasible:
            raise FitError("Supplied starting point is infeasible")

    si = score_and_info_X(spec, X_all, y, theta)
    trace: List[TraceEntry] = [TraceEntry(0, si.loglik, 0.0)]
    converged = False
    shifted = 0
    iteration = 0

    while iteration < options.max_iter:
        delta, shift = _scoring_step(si, options.eigen_floor)
        if shift > 0.0:
            shifted += 1
        delta_norm = float(np.linalg.norm(delta))
        scale = max(1.0, float(np.linalg.norm(theta)))

        accepted = None
        for s in range(options.max_backtrack + 1):
            step = options.backtrack_factor ** s
            if step * delta_norm / scale < options.tolerance:
                converged = True
                break
            candidate = theta + step * delta
            try:
                cand_l = loglik_X(spec, X_all, y, candidate)
            except InfeasibleParameterError:
                continue
            if relative_gain(cand_l, si.loglik) >= options.tolerance:
                accepted = (candidate, step, s)
                break

        if converged:
            break
        if accepted is None:
            logger.warning(
                f"Backtracking exhausted after {options.max_backtrack} shrinks at iteration {iteration + 1} "
                f"for {spec.label}; returning current iterate"
            )
            notes.append("backtracking exhausted")
            break

        theta, step, s = accepted
        iteration += 1
        si = score_and_info_X(spec, X_all, y, theta)
        trace.append(TraceEntry(iteration, si.loglik, step * delta_norm, s, shift))
        logger.debug(f"Iteration {iteration}: loglik={si.loglik:.10g} step={step * delta_norm:.3g} backtracks={s}")

    if shifted:
        logger.warning(f"Fisher information was shifted to stay positive definite in {shifted} iterations")
        notes.append(f"eigenvalue shift applied in {shifted} iterations")
    if not converged and iteration >= options.max_iter:
        logger.warning(f"Fisher scoring hit max_iter={options.max_iter} for {spec.label} without converging")
        notes.append("max_iter reached")

    aic, bic = information_criteria(si.loglik, design.p, data.total)
    pi = category_probs(spec, X_all, theta)
    logger.info(
        f"Fit {spec.label}/{design.structure.value}: loglik={si.loglik:.6f} AIC={aic:.4f} BIC={bic:.4f} "
        f"iterations={iteration} converged={converged}"
    )
    return FitResult(
        spec=spec,
        design=design,
        theta=theta,
        loglik=si.loglik,
        F=si.F,
        pi=pi,
        aic=aic,
        bic=bic,
        n_total=data.total,
        converged=converged,
        iterations=iteration,
        trace=tuple(trace),
        diagnostics=tuple(notes),
    )


def predict_proba(spec: ModelSpec, design: DesignSpec, theta: Sequence[float], x_settings: np.ndarray) -> np.ndarray:
    """
    Category probabilities at arbitrary settings

    Raises:
        InfeasibleParameterError: If theta is infeasible at any of the settings
    """
    return category_probs(spec, design.build_X_all(x_settings), theta)
