"""
Predictor structures and model matrices.

Each category j carries its own term list h_j; terms listed in ``common``
share one coefficient across every category (the po part of a ppo model),
and equality constraints merge the coefficient of one term across a subset
of categories (po-npo mixtures). Columns of X_i are laid out as

    free per-category slots (category-major), common terms, constraint groups

so the optimiser always works on an unconstrained vector in R^p.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .config import settings
from .exceptions import SpecError, DataError

logger = logging.getLogger(__name__)


class TermKind(str, Enum):
    INTERCEPT = "intercept"
    LINEAR = "linear"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class Term:
    kind: TermKind
    covariate: Optional[str] = None

    @property
    def label(self) -> str:
        if self.kind is TermKind.INTERCEPT:
            return "1"
        if self.kind is TermKind.QUADRATIC:
            return f"{self.covariate}^2"
        return self.covariate

    @property
    def is_intercept(self) -> bool:
        return self.kind is TermKind.INTERCEPT

    def __str__(self) -> str:
        return self.label


INTERCEPT = Term(TermKind.INTERCEPT)


def parse_term(text: str) -> Term:
    """Parse "1" / "intercept", "<name>" or "<name>^2" """
    raw = str(text).strip()
    if raw in ("1", "intercept"):
        return INTERCEPT
    if raw.endswith("^2"):
        name = raw[:-2].strip()
        kind = TermKind.QUADRATIC
    else:
        name = raw
        kind = TermKind.LINEAR
    if not name or not (name[0].isalpha() or name[0] == "_") or not all(c.isalnum() or c == "_" for c in name):
        raise SpecError(f"Invalid predictor term: {text!r}")
    return Term(kind, name)


class Structure(str, Enum):
    PO = "po"
    NPO = "npo"
    PPO = "ppo"
    MIXTURE = "mixture"


@dataclass(frozen=True)
class ConstraintGroup:
    """Coefficient of ``term`` shared by ``categories`` (1-based)"""
    term: Term
    categories: FrozenSet[int]

    @property
    def label(self) -> str:
        cats = ",".join(str(c) for c in sorted(self.categories))
        return f"beta[{cats}]:{self.term.label}"


@dataclass(frozen=True)
class Column:
    """One coordinate of theta: the term it multiplies and the categories using it"""
    label: str
    term: Term
    categories: Tuple[int, ...]


@dataclass(frozen=True)
class RankCheck:
    full_row_rank: bool
    rank: int


def _merge_groups(groups: Sequence[ConstraintGroup]) -> Tuple[ConstraintGroup, ...]:
    # groups on the same term stay pairwise disjoint; overlaps collapse into the first one
    merged: List[ConstraintGroup] = []
    for group in groups:
        cats = set(group.categories)
        hits = [i for i, g in enumerate(merged) if g.term == group.term and g.categories & cats]
        for i in hits:
            cats |= merged[i].categories
        combined = ConstraintGroup(group.term, frozenset(cats))
        if not hits:
            merged.append(combined)
            continue
        merged[hits[0]] = combined
        for i in reversed(hits[1:]):
            del merged[i]
    return tuple(merged)


@dataclass(frozen=True)
class DesignSpec:
    """
    Predictor layout of a multinomial link model

    Args:
        J: Number of response categories
        covariates: Covariate names, in the order of the setting vectors
        structure: po, npo, ppo or mixture
        per_category: J-1 term lists h_j
        common: Terms whose coefficient is shared by all categories
        constraints: Equality-constraint groups across categories
    """
    J: int
    covariates: Tuple[str, ...]
    structure: Structure
    per_category: Tuple[Tuple[Term, ...], ...]
    common: Tuple[Term, ...] = ()
    constraints: Tuple[ConstraintGroup, ...] = ()

    def __post_init__(self):
        if self.J < 2:
            raise SpecError(f"At least two categories are required, got J={self.J}")
        if len(self.per_category) != self.J - 1:
            raise SpecError(f"Expected {self.J - 1} per-category term lists, got {len(self.per_category)}")
        if len(set(self.covariates)) != len(self.covariates):
            raise SpecError(f"Duplicate covariate names: {list(self.covariates)}")

        known = set(self.covariates)
        for term in [t for terms in self.per_category for t in terms] + list(self.common):
            if term.covariate is not None and term.covariate not in known:
                raise SpecError(f"Unknown covariate reference: {term.covariate}")

        for j, terms in enumerate(self.per_category, start=1):
            if len(set(terms)) != len(terms):
                raise SpecError(f"Duplicate terms for category {j}")
            overlap = set(terms) & set(self.common)
            if overlap:
                raise SpecError(f"Category {j} repeats common terms {sorted(t.label for t in overlap)}")
        if len(set(self.common)) != len(self.common):
            raise SpecError("Duplicate common terms")

        merged = _merge_groups(self.constraints)
        for group in merged:
            if len(group.categories) < 2:
                raise SpecError(f"Constraint on {group.term.label} needs at least two categories")
            for c in group.categories:
                if not 1 <= c <= self.J - 1:
                    raise SpecError(f"Constraint category {c} outside 1..{self.J - 1}")
                if group.term not in self.per_category[c - 1]:
                    raise SpecError(f"Category {c} has no term {group.term.label} to constrain")
        object.__setattr__(self, "constraints", merged)

        if self.structure is Structure.PO:
            if any(terms != (INTERCEPT,) for terms in self.per_category):
                raise SpecError("po designs use intercept-only per-category terms")
        if self.structure in (Structure.PO, Structure.NPO, Structure.PPO) and self.constraints:
            raise SpecError(f"{self.structure.value} designs take no equality constraints; use mixture")
        if self.structure is Structure.NPO and self.common:
            raise SpecError("npo designs have no common terms")

    @classmethod
    def create(
        cls,
        J: int,
        covariates: Sequence[str],
        structure: str,
        per_category: Optional[Sequence[Sequence[str]]] = None,
        common: Optional[Sequence[str]] = None,
        constraints: Optional[Sequence[Tuple[str, Sequence[int]]]] = None,
    ) -> "DesignSpec":
        """
        Build a design from config-style values

        Args:
            J: Number of response categories
            covariates: Covariate names
            structure: "po", "npo", "ppo" or "mixture"
            per_category: J-1 lists of term strings; intercept-only when omitted
            common: Term strings shared by all categories
            constraints: (term string, 1-based categories) merge groups
        """
        try:
            struct = Structure(structure)
        except ValueError:
            raise SpecError(f"Unknown predictor structure: {structure}")
        if per_category is None:
            per = tuple((INTERCEPT,) for _ in range(J - 1))
        else:
            per = tuple(tuple(parse_term(t) for t in terms) for terms in per_category)
        com = tuple(parse_term(t) for t in (common or ()))
        groups = tuple(
            ConstraintGroup(parse_term(term), frozenset(int(c) for c in cats))
            for term, cats in (constraints or ())
        )
        return cls(J=J, covariates=tuple(covariates), structure=struct,
                   per_category=per, common=com, constraints=groups)

    @classmethod
    def main_effects(cls, J: int, covariates: Sequence[str], structure: str = "npo") -> "DesignSpec":
        """Main-effects po or npo design: an intercept plus every covariate"""
        names = [str(c) for c in covariates]
        if structure == "po":
            return cls.create(J, names, "po", common=names)
        if structure == "npo":
            return cls.create(J, names, "npo", per_category=[["1"] + names] * (J - 1))
        raise SpecError(f"main_effects supports po and npo, not {structure}")

    @cached_property
    def _group_of(self) -> Dict[Tuple[int, Term], int]:
        lookup = {}
        for g, group in enumerate(self.constraints):
            for c in group.categories:
                lookup[(c, group.term)] = g
        return lookup

    @cached_property
    def columns(self) -> Tuple[Column, ...]:
        cols: List[Column] = []
        for j, terms in enumerate(self.per_category, start=1):
            for term in terms:
                if (j, term) not in self._group_of:
                    cols.append(Column(f"beta{j}:{term.label}", term, (j,)))
        for term in self.common:
            cols.append(Column(f"zeta:{term.label}", term, tuple(range(1, self.J))))
        for group in self.constraints:
            cols.append(Column(group.label, group.term, tuple(sorted(group.categories))))
        return tuple(cols)

    @cached_property
    def slot_columns(self) -> Dict[Tuple[int, Term], int]:
        """(category, term) -> column index, for every coefficient slot"""
        lookup: Dict[Tuple[int, Term], int] = {}
        for idx, col in enumerate(self.columns):
            for c in col.categories:
                lookup[(c, col.term)] = idx
        return lookup

    @property
    def p(self) -> int:
        return len(self.columns)

    @property
    def d(self) -> int:
        return len(self.covariates)

    @property
    def column_labels(self) -> List[str]:
        return [c.label for c in self.columns]

    def intercept_columns(self) -> Dict[int, int]:
        """Category (1-based) -> column of its intercept, for categories that have one"""
        return {c: idx for (c, term), idx in self.slot_columns.items() if term.is_intercept}

    def _term_values(self, term: Term, settings_arr: np.ndarray) -> np.ndarray:
        if term.is_intercept:
            return np.ones(settings_arr.shape[0])
        col = settings_arr[:, self.covariates.index(term.covariate)]
        return col * col if term.kind is TermKind.QUADRATIC else col

    def build_X_all(self, settings_arr: np.ndarray) -> np.ndarray:
        """Stack of model matrices, shape m x (J-1) x p"""
        xs = np.asarray(settings_arr, dtype=float)
        if xs.ndim == 1:
            xs = xs[None, :]
        if xs.ndim != 2 or xs.shape[1] != self.d:
            raise DataError(f"Settings must have {self.d} covariates, got shape {xs.shape}")
        X = np.zeros((xs.shape[0], self.J - 1, self.p))
        for (c, term), idx in self.slot_columns.items():
            X[:, c - 1, idx] = self._term_values(term, xs)
        return X

    def drop_term(self, category: int, term: str) -> "DesignSpec":
        """Remove one coefficient slot from category's term list"""
        target = parse_term(term)
        if not 1 <= category <= self.J - 1 or target not in self.per_category[category - 1]:
            raise SpecError(f"Category {category} has no term {target.label}")
        per = list(self.per_category)
        per[category - 1] = tuple(t for t in per[category - 1] if t != target)
        groups = []
        for group in self.constraints:
            cats = group.categories
            if group.term == target:
                cats = cats - {category}
            if len(cats) >= 2:
                groups.append(ConstraintGroup(group.term, cats))
        structure = self.structure
        if structure is Structure.PO:
            structure = Structure.PPO
        return replace(self, structure=structure, per_category=tuple(per), constraints=tuple(groups))

    def with_constraint(self, term: Term, a: int, b: int) -> "DesignSpec":
        """Force the coefficients of term in categories a and b to be equal"""
        if self.structure is Structure.PO:
            raise SpecError("po designs already share every slope")
        group = ConstraintGroup(term, frozenset((a, b)))
        return replace(self, structure=Structure.MIXTURE, constraints=self.constraints + (group,))

    def same_coefficient(self, term: Term, a: int, b: int) -> bool:
        slots = self.slot_columns
        return slots.get((a, term)) is not None and slots.get((a, term)) == slots.get((b, term))

    def describe_constraints(self) -> List[str]:
        return [g.label for g in self.constraints]


def build_X(design: DesignSpec, x: Sequence[float]) -> np.ndarray:
    """
    Model matrix X_i of a single setting

    Args:
        design: Predictor layout
        x: Covariate vector of length d

    Returns:
        (J-1) x p matrix whose row j is f_j(x)'
    """
    xs = np.asarray(x, dtype=float)
    if xs.ndim != 1:
        raise DataError(f"Expected one covariate vector, got shape {xs.shape}")
    return design.build_X_all(xs[None, :])[0]


def build_H(design: DesignSpec, settings_arr: np.ndarray) -> np.ndarray:
    """p x m(J-1) matrix (f_1(x_1), ..., f_1(x_m), ..., f_{J-1}(x_m))"""
    X = design.build_X_all(settings_arr)
    m, n, p = X.shape
    return X.transpose(2, 1, 0).reshape(p, n * m)


def check_rank(H: np.ndarray) -> RankCheck:
    """Row rank of H with a relative singular-value cutoff"""
    H = np.asarray(H, dtype=float)
    if H.size == 0:
        return RankCheck(full_row_rank=H.shape[0] == 0, rank=0)
    sv = np.linalg.svd(H, compute_uv=False)
    top = sv.max() if sv.size else 0.0
    rank = int(np.sum(sv > settings.RANK_TOL * top)) if top > 0 else 0
    return RankCheck(full_row_rank=rank == H.shape[0], rank=rank)
