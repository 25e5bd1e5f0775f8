"""
Maps between linear predictors, transformed probabilities and category
probabilities, and the feasibility test for parameter vectors.

    pi_i = D_i^{-1} b / (1 + 1' D_i^{-1} b),   pi_iJ = 1 / (1 + 1' D_i^{-1} b)

theta is feasible when D_i^{-1} exists and D_i^{-1} b is strictly positive at
every setting; only then are all category probabilities inside (0, 1).
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .design import DesignSpec
from .exceptions import InfeasibleParameterError, SingularMatrixError, SpecError
from .structure import Family, ModelSpec, build_lrb, dinv_b

logger = logging.getLogger(__name__)

SINGULAR = "singular"
NONPOSITIVE = "nonpositive"

_ALWAYS_FEASIBLE = (Family.BASELINE, Family.ADJACENT, Family.CONTINUATION)


@dataclass(frozen=True)
class CategoryProbs:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all((v > 0.0) & (v < 1.0)):
            raise ValueError(f"Category probabilities must lie in (0, 1), got {v}")
        if abs(v.sum() - 1.0) > 1e-12:
            raise ValueError(f"Category probabilities must sum to 1, got {v.sum()}")
        object.__setattr__(self, "values", v)

    @property
    def J(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FeasibilityReport:
    """Per-setting verdict: failures holds (setting index, cause) pairs"""
    failures: Tuple[Tuple[int, str], ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "failures": [{"setting": i, "cause": cause} for i, cause in self.failures],
        }


def linear_predictors(X_all: np.ndarray, theta: Sequence[float]) -> np.ndarray:
    """eta_i = X_i theta for every setting, shape m x (J-1)"""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (X_all.shape[2],):
        raise SpecError(f"theta has shape {theta.shape}, the design needs {X_all.shape[2]} coefficients")
    return np.einsum("mjp,p->mj", X_all, theta)


def rho_from_eta(spec: ModelSpec, eta: np.ndarray) -> np.ndarray:
    eta = np.atleast_2d(eta)
    return np.column_stack([link.ginv(eta[:, j]) for j, link in enumerate(spec.links)])


def eta_from_rho(spec: ModelSpec, rho: np.ndarray) -> np.ndarray:
    rho = np.atleast_2d(rho)
    return np.column_stack([link.g(rho[:, j]) for j, link in enumerate(spec.links)])


def _pi_or_cause(spec: ModelSpec, rho: np.ndarray):
    try:
        u = dinv_b(spec, rho)
    except SingularMatrixError:
        return None, SINGULAR
    if not np.all(u > 0.0):
        return None, NONPOSITIVE
    total = 1.0 + u.sum()
    return np.append(u, 1.0) / total, None


def pi_from_rho(spec: ModelSpec, rho: Sequence[float]) -> CategoryProbs:
    """
    Category probabilities from transformed probabilities

    Raises:
        InfeasibleParameterError: If D^-1 does not exist or D^-1 b has a
            non-positive entry
    """
    pi, cause = _pi_or_cause(spec, np.asarray(rho, dtype=float))
    if cause is not None:
        raise InfeasibleParameterError([(0, cause)])
    return CategoryProbs(pi)


def rho_from_pi(spec: ModelSpec, pi: Sequence[float]) -> np.ndarray:
    """rho_j = L_j' pi / (R_j' pi + pi_J b_j)"""
    p = pi.values if isinstance(pi, CategoryProbs) else np.asarray(pi, dtype=float)
    if p.shape != (spec.J,):
        raise SpecError(f"Expected {spec.J} category probabilities, got shape {p.shape}")
    lrb = build_lrb(spec)
    head = p[:-1]
    return (lrb.L @ head) / (lrb.R @ head + p[-1] * lrb.b)


def category_probs(spec: ModelSpec, X_all: np.ndarray, theta: Sequence[float]) -> np.ndarray:
    """
    Category probabilities at every setting, shape m x J

    Raises:
        InfeasibleParameterError: Listing every failing setting
    """
    rho = rho_from_eta(spec, linear_predictors(X_all, theta))
    out = np.empty((rho.shape[0], spec.J))
    failures: List[Tuple[int, str]] = []
    for i in range(rho.shape[0]):
        pi, cause = _pi_or_cause(spec, rho[i])
        if cause is not None:
            failures.append((i, cause))
        else:
            out[i] = pi
    if failures:
        raise InfeasibleParameterError(failures)
    return out


def check_feasible_X(spec: ModelSpec, X_all: np.ndarray, theta: Sequence[float], generic: bool = False) -> FeasibilityReport:
    """Feasibility on prebuilt model matrices; see check_feasible"""
    rho = rho_from_eta(spec, linear_predictors(X_all, theta))
    failures: List[Tuple[int, str]] = []

    if not generic and spec.family in _ALWAYS_FEASIBLE:
        return FeasibilityReport()

    if not generic and spec.family is Family.CUMULATIVE:
        ok = np.all(np.diff(rho, axis=1) > 0.0, axis=1)
        failures = [(int(i), NONPOSITIVE) for i in np.flatnonzero(~ok)]
        return FeasibilityReport(tuple(failures))

    for i in range(rho.shape[0]):
        _, cause = _pi_or_cause(spec, rho[i])
        if cause is not None:
            failures.append((i, cause))
    return FeasibilityReport(tuple(failures))


def check_feasible(
    spec: ModelSpec,
    design: DesignSpec,
    theta: Sequence[float],
    x_settings: np.ndarray,
    generic: bool = False,
) -> FeasibilityReport:
    """
    Decide whether theta lies in the feasible parameter space

    Baseline, adjacent and continuation families accept every theta; the
    cumulative family needs strictly increasing rho at every setting; two-group
    families test positivity of D_i^{-1} b directly.

    Args:
        spec: Model family and links
        design: Predictor layout
        theta: Parameter vector of length p
        x_settings: m x d covariate settings
        generic: Skip the family fast paths and test D_i^{-1} b everywhere

    Returns:
        FeasibilityReport listing failing settings
    """
    return check_feasible_X(spec, design.build_X_all(x_settings), theta, generic=generic)


def cumulative_po_intercept_order_ok(
    spec: ModelSpec,
    design: DesignSpec,
    theta: Sequence[float],
    x_settings: np.ndarray,
) -> bool:
    """
    Feasibility of a cumulative model with one link and shared slopes

    With identical links, rho increases across categories exactly when the
    category-specific part h_j(x)' beta_j does, so only that part is compared.
    """
    if spec.family is not Family.CUMULATIVE:
        raise SpecError("The intercept-order test applies to the cumulative family only")
    if len(set(spec.links)) != 1:
        raise SpecError("The intercept-order test needs the same link for every category")
    if design.constraints:
        raise SpecError("The intercept-order test needs coefficients shared by all categories or none")

    theta = np.asarray(theta, dtype=float)
    own = np.array([len(col.categories) == 1 for col in design.columns])
    X = design.build_X_all(x_settings)
    part = np.einsum("mjp,p->mj", X[:, :, own], theta[own])
    return bool(np.all(np.diff(part, axis=1) > 0.0))
