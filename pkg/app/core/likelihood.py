"""
Log-likelihood, score and expected Fisher information.

For setting i the Jacobian of the category probabilities is

    d pi_i / d theta' = C_i X_i,
    C_i = E_i D_i^{-1} diag(L pi_i) diag(rho_i^-2) diag((g^-1)'(eta_i)),
    E_i = [I; 0'] - pi_i 1'

so the score is sum_i y_i' diag(pi_i)^-1 C_i X_i and the information is
sum_i n_i X_i' C_i' diag(pi_i)^-1 C_i X_i.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .config import settings
from .design import DesignSpec, build_H, check_rank
from .exceptions import DataError, InfeasibleParameterError, SingularMatrixError
from .prob import NONPOSITIVE, SINGULAR, linear_predictors, rho_from_eta
from .structure import ModelSpec, build_lrb, dinv, dinv_b

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """
    Summarized data: m distinct covariate settings with their count vectors

    Args:
        x: m x d covariate settings
        y: m x J category counts
        covariates: Covariate names
        categories: Category labels in working order
    """
    x: np.ndarray
    y: np.ndarray
    covariates: Tuple[str, ...]
    categories: Tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        if x.ndim == 1:
            x = x[:, None] if len(self.covariates) == 1 else x[None, :]
        if y.ndim != 2 or y.shape[0] < 1:
            raise DataError(f"Counts must be an m x J matrix with m >= 1, got shape {y.shape}")
        if x.shape != (y.shape[0], len(self.covariates)):
            raise DataError(f"Settings shape {x.shape} does not match {y.shape[0]} rows of {len(self.covariates)} covariates")
        if y.shape[1] < 2:
            raise DataError("At least two response categories are required")
        if not np.all(np.isfinite(x)):
            raise DataError("Covariates must be finite")
        if np.any(y < 0) or not np.all(np.equal(np.mod(y, 1), 0)):
            raise DataError("Counts must be non-negative integers")
        y = y.astype(np.int64)
        if np.any(y.sum(axis=1) < 1):
            raise DataError("Every setting needs at least one observation")
        if x.shape[1] and np.unique(x, axis=0).shape[0] != x.shape[0]:
            raise DataError("Covariate settings must be pairwise distinct")
        if x.shape[1] == 0 and x.shape[0] != 1:
            raise DataError("Without covariates the data has a single setting")

        cats = tuple(self.categories) or tuple(str(j) for j in range(1, y.shape[1] + 1))
        if len(cats) != y.shape[1]:
            raise DataError(f"{len(cats)} category labels for {y.shape[1]} count columns")

        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", tuple(self.covariates))
        object.__setattr__(self, "categories", cats)

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def J(self) -> int:
        return self.y.shape[1]

    @property
    def n(self) -> np.ndarray:
        return self.y.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.y.sum())

    def select(self, rows: Sequence[int]) -> "Dataset":
        return Dataset(self.x[list(rows)], self.y[list(rows)], self.covariates, self.categories)

    def with_counts(self, y: np.ndarray) -> "Dataset":
        """Same settings with new counts; settings left without observations are dropped"""
        y = np.asarray(y)
        keep = np.flatnonzero(y.sum(axis=1) > 0)
        return Dataset(self.x[keep], y[keep], self.covariates, self.categories)


@dataclass(frozen=True)
class ScoreAndInfo:
    loglik: float
    score: np.ndarray
    F: np.ndarray


@dataclass(frozen=True)
class RankDiagnostics:
    setting_ranks: Tuple[int, ...]
    h_rank: int
    p: int
    full_row_rank: bool
    min_eigenvalue: float

    @property
    def positive_definite(self) -> bool:
        return self.full_row_rank


@dataclass
class _Evaluation:
    pi: np.ndarray                  # m x J
    C: np.ndarray                   # m x J x (J-1)


def _evaluate(spec: ModelSpec, X_all: np.ndarray, theta: np.ndarray, with_jacobian: bool = True) -> _Evaluation:
    eta = linear_predictors(X_all, theta)
    rho = rho_from_eta(spec, eta)
    m, n = rho.shape
    L = build_lrb(spec).L
    pi = np.empty((m, n + 1))
    C = np.empty((m, n + 1, n)) if with_jacobian else np.empty((0,))
    failures: List[Tuple[int, str]] = []

    for i in range(m):
        try:
            A = dinv(spec, rho[i])
            u = dinv_b(spec, rho[i])
        except SingularMatrixError:
            failures.append((i, SINGULAR))
            continue
        if not np.all(u > 0.0):
            failures.append((i, NONPOSITIVE))
            continue
        pi[i] = np.append(u, 1.0) / (1.0 + u.sum())
        if with_jacobian:
            deriv = np.array([link.ginv_prime(eta[i, j]) for j, link in enumerate(spec.links)])
            scale = (L @ pi[i, :-1]) / rho[i] ** 2 * deriv
            E = np.vstack([np.eye(n), np.zeros((1, n))]) - np.outer(pi[i], np.ones(n))
            C[i] = E @ (A * scale[None, :])

    if failures:
        raise InfeasibleParameterError(failures)
    return _Evaluation(pi=pi, C=C)


def _log_multinomial_constant(y: np.ndarray) -> float:
    n = y.sum(axis=1)
    return float(np.sum(gammaln(n + 1.0)) - np.sum(gammaln(y + 1.0)))


def _loglik_from_pi(y: np.ndarray, pi: np.ndarray) -> float:
    # 0 * log(pi) stays 0 since pi is bounded away from 0
    return float(np.sum(y * np.log(pi))) + _log_multinomial_constant(y)


def loglik_X(spec: ModelSpec, X_all: np.ndarray, y: np.ndarray, theta: Sequence[float]) -> float:
    ev = _evaluate(spec, X_all, np.asarray(theta, dtype=float), with_jacobian=False)
    return _loglik_from_pi(y, ev.pi)


def loglik(spec: ModelSpec, design: DesignSpec, theta: Sequence[float], data: Dataset) -> float:
    """
    Multinomial log-likelihood including the log n_i! - sum log y_ij! constants

    Raises:
        InfeasibleParameterError: If theta is infeasible at some setting
    """
    return loglik_X(spec, design.build_X_all(data.x), data.y, theta)


def pi_jacobian(spec: ModelSpec, design: DesignSpec, theta: Sequence[float], x_settings: np.ndarray) -> np.ndarray:
    """d pi_i / d theta' for every setting, shape m x J x p"""
    X_all = design.build_X_all(x_settings)
    ev = _evaluate(spec, X_all, np.asarray(theta, dtype=float))
    return np.einsum("mjk,mkp->mjp", ev.C, X_all)


def setting_weights(spec: ModelSpec, X_all: np.ndarray, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-observation weights W_i = C_i' diag(pi_i)^-1 C_i and the probabilities"""
    ev = _evaluate(spec, X_all, np.asarray(theta, dtype=float))
    W = np.einsum("mjk,mj,mjl->mkl", ev.C, 1.0 / ev.pi, ev.C)
    return W, ev.pi


def score_and_info(spec: ModelSpec, design: DesignSpec, theta: Sequence[float], data: Dataset) -> ScoreAndInfo:
    """
    Log-likelihood, score vector and Fisher information at theta

    Args:
        spec: Model family and links
        design: Predictor layout
        theta: Feasible parameter vector
        data: Summarized data

    Returns:
        ScoreAndInfo with a symmetric F

    Raises:
        InfeasibleParameterError: If theta is infeasible at some setting
    """
    return score_and_info_X(spec, design.build_X_all(data.x), data.y, theta)


def score_and_info_X(spec: ModelSpec, X_all: np.ndarray, y: np.ndarray, theta: Sequence[float]) -> ScoreAndInfo:
    """score_and_info on prebuilt model matrices"""
    ev = _evaluate(spec, X_all, np.asarray(theta, dtype=float))
    counts = np.asarray(y, dtype=float)

    CX = np.einsum("mjk,mkp->mjp", ev.C, X_all)
    score = np.einsum("mj,mjp->p", counts / ev.pi, CX)
    per_setting = np.einsum("mjp,mj,mjq->mpq", CX, 1.0 / ev.pi, CX)
    F = np.einsum("m,mpq->pq", counts.sum(axis=1), per_setting)
    F = 0.5 * (F + F.T)
    return ScoreAndInfo(loglik=_loglik_from_pi(y, ev.pi), score=score, F=F)


def build_U(W: np.ndarray, n: np.ndarray) -> np.ndarray:
    """
    Block matrix U with U_st = diag(n_i w_st(x_i)), ordered category-major
    to match the columns of build_H
    """
    m, k, _ = W.shape
    U = np.zeros((k * m, k * m))
    idx = np.arange(m)
    for s in range(k):
        for t in range(k):
            U[s * m + idx, t * m + idx] = n * W[:, s, t]
    return U


def information_via_H(spec: ModelSpec, design: DesignSpec, theta: Sequence[float], data: Dataset) -> np.ndarray:
    """F assembled as H U H'"""
    X_all = design.build_X_all(data.x)
    W, _ = setting_weights(spec, X_all, np.asarray(theta, dtype=float))
    H = build_H(design, data.x)
    return H @ build_U(W, data.n.astype(float)) @ H.T


def rank_diagnostics(spec: ModelSpec, design: DesignSpec, theta: Sequence[float], data: Dataset) -> RankDiagnostics:
    """
    Ranks of the per-setting information F_i and the full-row-rank verdict on H

    F is positive definite exactly when H has full row rank.
    """
    theta = np.asarray(theta, dtype=float)
    X_all = design.build_X_all(data.x)
    W, _ = setting_weights(spec, X_all, theta)
    ranks = []
    for i in range(data.m):
        Fi = X_all[i].T @ W[i] @ X_all[i]
        ranks.append(_rank(Fi))

    rc = check_rank(build_H(design, data.x))
    F = np.einsum("m,mpq->pq", data.n.astype(float), np.einsum("mjp,mjk,mkq->mpq", X_all, W, X_all))
    min_eig = float(np.linalg.eigvalsh(0.5 * (F + F.T)).min()) if F.size else 0.0
    if not rc.full_row_rank:
        logger.warning(f"H has rank {rc.rank} < p={design.p}; Fisher information is singular")
    return RankDiagnostics(
        setting_ranks=tuple(ranks),
        h_rank=rc.rank,
        p=design.p,
        full_row_rank=rc.full_row_rank,
        min_eigenvalue=min_eig,
    )


def _rank(M: np.ndarray) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv.max() <= 0:
        return 0
    return int(np.sum(sv > settings.RANK_TOL * sv.max()))
