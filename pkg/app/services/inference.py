"""
Wald intervals and tests, likelihood-ratio tests and information criteria.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from ..core.config import settings
from ..core.exceptions import FitError, SingularMatrixError, SpecError
from .fitter import FitResult, information_criteria

logger = logging.getLogger(__name__)

_LRT_SLACK = 1e-8


@dataclass(frozen=True)
class CoefficientInterval:
    label: str
    estimate: float
    std_error: float
    lower: float
    upper: float


@dataclass(frozen=True)
class WaldTest:
    statistic: float
    df: int
    p_value: float


@dataclass(frozen=True)
class LikelihoodRatioTest:
    statistic: float
    df: int
    p_value: float


@dataclass(frozen=True)
class InformationCriteria:
    aic: float
    bic: float


@dataclass(frozen=True)
class InferenceReport:
    alpha: float
    coefficients: List[CoefficientInterval]
    criteria: InformationCriteria
    wald: Optional[WaldTest] = None


def covariance(fit: FitResult) -> np.ndarray:
    """
    F(theta_hat)^-1 by symmetric eigen-decomposition

    Raises:
        SingularMatrixError: If an eigenvalue is below COV_SINGULAR_TOL * trace(F)
    """
    F = 0.5 * (fit.F + fit.F.T)
    eigvals, eigvecs = np.linalg.eigh(F)
    threshold = settings.COV_SINGULAR_TOL * max(float(np.trace(F)), 0.0)
    if eigvals.size == 0 or eigvals.min() <= threshold:
        raise SingularMatrixError(
            f"Fisher information is singular (min eigenvalue {eigvals.min() if eigvals.size else 0.0:.3g})"
        )
    return (eigvecs / eigvals) @ eigvecs.T


def wald_ci(fit: FitResult, alpha: float = 0.05) -> List[CoefficientInterval]:
    """
    Per-coefficient intervals theta_hat_i -/+ z_{alpha/2} sqrt(sigma_ii)

    Args:
        fit: Fitted model
        alpha: Significance level in (0, 1)

    Returns:
        One interval per coordinate of theta, in column order
    """
    if not 0.0 < alpha < 1.0:
        raise SpecError(f"alpha must lie in (0, 1), got {alpha}")
    se = np.sqrt(np.diag(covariance(fit)))
    z = float(stats.norm.isf(alpha / 2.0))
    return [
        CoefficientInterval(label, float(est), float(s), float(est - z * s), float(est + z * s))
        for label, est, s in zip(fit.labels, fit.theta, se)
    ]


def wald_test(
    fit: FitResult,
    theta0: Optional[Sequence[float]] = None,
    subset: Optional[Sequence[int]] = None,
) -> WaldTest:
    """
    Wald test of H0: theta = theta0, or of a sub-vector when subset is given

    The full test uses W = (theta_hat - theta0)' F (theta_hat - theta0) with
    p degrees of freedom; the subset test inverts the matching block of F^-1.

    Args:
        fit: Fitted model
        theta0: Hypothesised values, zeros when omitted; length p, or the
            subset length when subset is given
        subset: Indices of the tested coordinates
    """
    if subset is None:
        target = np.zeros(fit.p) if theta0 is None else np.asarray(theta0, dtype=float)
        if target.shape != (fit.p,):
            raise SpecError(f"theta0 must have length {fit.p}")
        covariance(fit)
        d = fit.theta - target
        statistic = float(d @ fit.F @ d)
        df = fit.p
    else:
        idx = [int(i) for i in subset]
        if not idx or len(set(idx)) != len(idx) or any(not 0 <= i < fit.p for i in idx):
            raise SpecError(f"Invalid coefficient subset {list(subset)} for p={fit.p}")
        target = np.zeros(len(idx)) if theta0 is None else np.asarray(theta0, dtype=float)
        if target.shape != (len(idx),):
            raise SpecError(f"theta0 must have length {len(idx)} for the subset test")
        block = covariance(fit)[np.ix_(idx, idx)]
        d = fit.theta[idx] - target
        statistic = float(d @ np.linalg.solve(block, d))
        df = len(idx)
    statistic = max(statistic, 0.0)
    return WaldTest(statistic=statistic, df=df, p_value=float(stats.chi2.sf(statistic, df)))


def lrt(full: FitResult, reduced: FitResult, r: Optional[int] = None) -> LikelihoodRatioTest:
    """
    Likelihood-ratio test of a reduced model nested in full

    Raises:
        FitError: If the reduced model fits better than the full one beyond
            numerical slack
    """
    df = full.p - reduced.p if r is None else int(r)
    if df < 0:
        raise SpecError(f"Degrees of freedom must be non-negative, got {df}")
    statistic = 2.0 * (full.loglik - reduced.loglik)
    if statistic < -_LRT_SLACK:
        raise FitError(f"Likelihood-ratio statistic {statistic:.3g} is negative; one of the fits failed")
    statistic = max(statistic, 0.0)
    if df == 0:
        return LikelihoodRatioTest(statistic=statistic, df=0, p_value=1.0)
    return LikelihoodRatioTest(statistic=statistic, df=df, p_value=float(stats.chi2.sf(statistic, df)))


def aic_bic(fit: FitResult, n: Optional[float] = None) -> InformationCriteria:
    """AIC and BIC of a fit; n defaults to the number of observations"""
    aic, bic = information_criteria(fit.loglik, fit.p, fit.n_total if n is None else n)
    return InformationCriteria(aic=aic, bic=bic)


def build_report(fit: FitResult, alpha: float = 0.05) -> InferenceReport:
    """Intervals, criteria and the overall Wald test for a fitted model"""
    try:
        coefficients = wald_ci(fit, alpha)
        wald = wald_test(fit)
    except SingularMatrixError as e:
        logger.error(f"Failed to compute Wald inference: {str(e)}")
        raise
    return InferenceReport(alpha=alpha, coefficients=coefficients, criteria=aic_bic(fit), wald=wald)
