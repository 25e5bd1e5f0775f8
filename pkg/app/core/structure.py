"""
Model families as (L, R, b) triples.

A family fixes how the J-1 transformed probabilities rho_ij are built from
the category probabilities:

    rho_ij = L_j' pi_i / (R_j' pi_i + pi_iJ b_j)

Given rho_i, the probabilities are recovered through D_i = diag(1/rho_i) L - R.
Closed-form inverses of D_i exist for the four base families and for the
two-group families whose groups share the last category; every other layout
goes through a pivoted linear solve.

Adjacent categories use log(pi_j / pi_{j+1}); some packages model the
reciprocal ratio, which flips the sign of every coefficient.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from .config import settings
from .exceptions import SingularMatrixError, SpecError, DataError
from .links import LinkFunction, LOGIT

logger = logging.getLogger(__name__)


class Family(str, Enum):
    BASELINE = "baseline"
    CUMULATIVE = "cumulative"
    ADJACENT = "adjacent"
    CONTINUATION = "continuation"
    BASELINE_CUMULATIVE = "baseline-cumulative"
    BASELINE_ADJACENT = "baseline-adjacent"
    BASELINE_CONTINUATION = "baseline-continuation"

    @property
    def is_two_group(self) -> bool:
        return self in _TWO_GROUP_SECOND

    @property
    def second_group(self) -> "Family":
        """Family controlling the second group of a two-group model"""
        return _TWO_GROUP_SECOND[self]


_TWO_GROUP_SECOND = {
    Family.BASELINE_CUMULATIVE: Family.CUMULATIVE,
    Family.BASELINE_ADJACENT: Family.ADJACENT,
    Family.BASELINE_CONTINUATION: Family.CONTINUATION,
}

BASE_FAMILIES = (Family.BASELINE, Family.CUMULATIVE, Family.ADJACENT, Family.CONTINUATION)
TWO_GROUP_FAMILIES = tuple(_TWO_GROUP_SECOND)


@dataclass(frozen=True)
class ModelSpec:
    """
    Family structure, category count and per-category links

    Args:
        J: Number of response categories
        family: Model family
        links: J-1 link functions, one per transformed probability
        k: Size of the baseline group (two-group families only)
        s: Category shared by both groups, 1-based (two-group families only)
    """
    J: int
    family: Family
    links: Tuple[LinkFunction, ...]
    k: Optional[int] = None
    s: Optional[int] = None

    def __post_init__(self):
        if self.J < 2:
            raise SpecError(f"At least two categories are required, got J={self.J}")
        if len(self.links) != self.J - 1:
            raise SpecError(f"Expected {self.J - 1} links for J={self.J}, got {len(self.links)}")

        if self.family.is_two_group:
            if self.J < 4:
                raise SpecError(f"Two-group families need J >= 4, got J={self.J}")
            if self.k is None:
                raise SpecError("Two-group families need k")
            s = self.J if self.s is None else self.s
            object.__setattr__(self, "s", s)
            if not 1 <= self.k <= self.J - 3:
                raise SpecError(f"k must satisfy 1 <= k <= J-3, got k={self.k}, J={self.J}")
            if not self.k + 1 <= s <= self.J:
                raise SpecError(f"s must satisfy k+1 <= s <= J, got s={s}, k={self.k}, J={self.J}")
        elif self.k is not None or self.s is not None:
            raise SpecError(f"k and s only apply to two-group families, not {self.family.value}")

    @classmethod
    def create(
        cls,
        J: int,
        family: str,
        links: Optional[Sequence[LinkFunction]] = None,
        k: Optional[int] = None,
        s: Optional[int] = None,
    ) -> "ModelSpec":
        """Build a spec from plain values; links default to logit everywhere"""
        try:
            fam = Family(family)
        except ValueError:
            raise SpecError(f"Unknown model family: {family}")
        chosen = tuple(links) if links is not None else (LOGIT,) * (J - 1)
        return cls(J=J, family=fam, links=chosen, k=k, s=s)

    def with_links(self, links: Sequence[LinkFunction]) -> "ModelSpec":
        return replace(self, links=tuple(links))

    @property
    def label(self) -> str:
        if self.family.is_two_group:
            return f"{self.family.value}(k={self.k},s={self.s})"
        return self.family.value

    @property
    def has_explicit_inverse(self) -> bool:
        return not self.family.is_two_group or self.s == self.J


@dataclass(frozen=True)
class LRb:
    L: np.ndarray
    R: np.ndarray
    b: np.ndarray


def _base_lrb(family: Family, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    eye = np.eye(n)
    if family is Family.BASELINE:
        return eye, eye.copy(), np.ones(n)
    if family is Family.CUMULATIVE:
        return np.tril(np.ones((n, n))), np.ones((n, n)), np.ones(n)
    if family is Family.ADJACENT:
        b = np.zeros(n)
        b[-1] = 1.0
        return eye, eye + np.eye(n, k=1), b
    if family is Family.CONTINUATION:
        return eye, np.triu(np.ones((n, n))), np.ones(n)
    raise SpecError(f"{family.value} is not a base family")


@lru_cache(maxsize=256)
def _lrb_cached(family: Family, J: int, k: Optional[int], s: Optional[int]) -> LRb:
    n = J - 1
    if not family.is_two_group:
        L, R, b = _base_lrb(family, n)
    else:
        L2, R2, b2 = _base_lrb(family.second_group, n - k)
        L = np.zeros((n, n))
        R = np.zeros((n, n))
        L[:k, :k] = np.eye(k)
        R[:k, :k] = np.eye(k)
        L[k:, k:] = L2
        R[k:, k:] = R2
        b = np.concatenate([np.ones(k), b2])
        if s < J:
            # first group compares each category with the shared category s
            R[:k, s - 1] = 1.0
            b[:k] = 0.0
    for arr in (L, R, b):
        arr.flags.writeable = False
    return LRb(L=L, R=R, b=b)


def build_lrb(spec: ModelSpec) -> LRb:
    """
    Build the (L, R, b) triple of a model family

    Args:
        spec: Model specification

    Returns:
        LRb with (J-1)x(J-1) matrices L, R and length J-1 vector b
    """
    return _lrb_cached(spec.family, spec.J, spec.k, spec.s)


def _odds(rho: np.ndarray) -> np.ndarray:
    return rho / (1.0 - rho)


def _explicit_block(family: Family, rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    if family is Family.BASELINE:
        return np.diag(_odds(rho))

    if family is Family.CUMULATIVE:
        A = np.zeros((n, n))
        for t in range(n - 1):
            A[t, t] = rho[t]
            A[t + 1, t] = -rho[t]
        padded = np.concatenate([[0.0], rho[:-1], [1.0]])
        A[:, n - 1] = rho[-1] * np.diff(padded) / (1.0 - rho[-1])
        return A

    if family is Family.ADJACENT:
        odds = _odds(rho)
        A = np.zeros((n, n))
        for s_ in range(n):
            A[s_, s_:] = np.cumprod(odds[s_:])
        return A

    if family is Family.CONTINUATION:
        comp = 1.0 - rho
        A = np.zeros((n, n))
        for s_ in range(n):
            A[s_, s_] = rho[s_] / comp[s_]
            if s_ + 1 < n:
                tail = rho[s_] * rho[s_ + 1:] / np.cumprod(comp[s_:])[1:]
                A[s_, s_ + 1:] = tail
        return A

    raise SpecError(f"No closed-form inverse for {family.value}")


def _explicit_block_b(family: Family, rho: np.ndarray) -> np.ndarray:
    if family is Family.BASELINE:
        return _odds(rho)
    if family is Family.CUMULATIVE:
        return np.diff(np.concatenate([[0.0], rho])) / (1.0 - rho[-1])
    if family is Family.ADJACENT:
        return np.cumprod(_odds(rho)[::-1])[::-1]
    if family is Family.CONTINUATION:
        return rho / np.cumprod((1.0 - rho)[::-1])[::-1]
    raise SpecError(f"No closed-form D^-1 b for {family.value}")


def d_matrix(spec: ModelSpec, rho: np.ndarray) -> np.ndarray:
    """D_i = diag(1/rho_i) L - R"""
    lrb = build_lrb(spec)
    return lrb.L / np.asarray(rho, dtype=float)[:, None] - lrb.R


def _validate_rho(spec: ModelSpec, rho: Sequence[float]) -> np.ndarray:
    r = np.asarray(rho, dtype=float)
    if r.shape != (spec.J - 1,):
        raise DataError(f"Expected {spec.J - 1} transformed probabilities, got shape {r.shape}")
    if not np.all((r > 0.0) & (r < 1.0)):
        raise DataError(f"Transformed probabilities must lie in (0, 1), got {r}")
    return r


def _checked_d(spec: ModelSpec, rho: np.ndarray) -> np.ndarray:
    D = d_matrix(spec, rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(D, p=1)
    if not np.isfinite(cond) or 1.0 / cond < settings.SINGULAR_RCOND:
        raise SingularMatrixError(f"D is singular for {spec.label} at rho={rho}")
    return D


def dinv_generic(spec: ModelSpec, rho: Sequence[float]) -> np.ndarray:
    """D_i^{-1} by LU with partial pivoting; raises SingularMatrixError"""
    r = _validate_rho(spec, rho)
    D = _checked_d(spec, r)
    return np.linalg.solve(D, np.eye(spec.J - 1))


def dinv(spec: ModelSpec, rho: Sequence[float]) -> np.ndarray:
    """
    Inverse of D_i = diag(1/rho_i) L - R

    Uses the closed form of the family when one exists and falls back to a
    pivoted solve otherwise.

    Raises:
        SingularMatrixError: If the generic path meets a singular D_i
    """
    r = _validate_rho(spec, rho)
    if not spec.has_explicit_inverse:
        return dinv_generic(spec, r)
    if not spec.family.is_two_group:
        return _explicit_block(spec.family, r)

    k = spec.k
    n = spec.J - 1
    A = np.zeros((n, n))
    A[:k, :k] = np.diag(_odds(r[:k]))
    A[k:, k:] = _explicit_block(spec.family.second_group, r[k:])
    return A


def dinv_b(spec: ModelSpec, rho: Sequence[float]) -> np.ndarray:
    """
    D_i^{-1} b, the unnormalised category probabilities

    For the cumulative family the entries need not be positive; feasibility
    is judged by the caller.
    """
    r = _validate_rho(spec, rho)
    if not spec.has_explicit_inverse:
        D = _checked_d(spec, r)
        return np.linalg.solve(D, build_lrb(spec).b)
    if not spec.family.is_two_group:
        return _explicit_block_b(spec.family, r)

    k = spec.k
    return np.concatenate([_odds(r[:k]), _explicit_block_b(spec.family.second_group, r[k:])])


def reorder_counts(counts: np.ndarray, labels: Sequence[str], working_order: Sequence[str]) -> np.ndarray:
    """
    Reorder category columns to a working order

    Args:
        counts: m x J count matrix with columns in the order of labels
        labels: Current category labels
        working_order: Desired order, a permutation of labels

    Returns:
        The count matrix with columns permuted to working_order
    """
    if sorted(labels) != sorted(working_order) or len(set(labels)) != len(labels):
        raise SpecError(f"Working order {list(working_order)} is not a permutation of {list(labels)}")
    index = [list(labels).index(label) for label in working_order]
    return np.asarray(counts)[:, index]
