"""
Model search: backward po-npo mixture selection, exhaustive link
assignment search, two-group family enumeration and k-fold cross-validation
with cross-entropy loss.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..core.config import settings
from ..core.design import DesignSpec, Term
from ..core.exceptions import DataError, MultinomialLinkError, SearchLimitError, SpecError
from ..core.likelihood import Dataset
from ..core.links import LinkFunction
from ..core.prob import check_feasible_X
from ..core.seeding import SeedStreams
from ..core.structure import TWO_GROUP_FAMILIES, ModelSpec
from .data import disaggregate
from .fitter import FitOptions, FitResult, fisher_scoring, predict_proba

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

CRITERIA = ("aic", "bic")


@dataclass(frozen=True)
class RankedModel:
    model_id: str
    criterion: float
    links: Tuple[str, ...]
    constraints: Tuple[str, ...]
    converged: bool


@dataclass(frozen=True)
class SelectionStep:
    iteration: int
    term: str
    a: int
    b: int
    aic: float


@dataclass(frozen=True)
class SelectionTrace:
    initial_aic: float
    steps: Tuple[SelectionStep, ...]
    rejected_aic: Optional[float]
    design: DesignSpec
    fit: FitResult

    @property
    def constraints(self) -> List[str]:
        return self.design.describe_constraints()


@dataclass(frozen=True)
class SearchResult:
    spec: ModelSpec
    fit: FitResult
    ranking: Tuple[RankedModel, ...]


@dataclass(frozen=True)
class CrossValidationResult:
    k: int
    repeats: int
    losses: Tuple[float, ...]
    excluded_folds: int

    @property
    def loss(self) -> float:
        return float(np.mean(self.losses))


def _map(fn: Callable[[T], R], items: Sequence[T], jobs: Optional[int]) -> List[R]:
    workers = jobs or settings.DEFAULT_JOBS
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _criterion(fit: FitResult, criterion: str) -> float:
    _criterion_guard(criterion)
    return fit.aic if criterion == "aic" else fit.bic


def _try_fit(spec, design, data, options, start=None) -> Optional[FitResult]:
    try:
        return fisher_scoring(spec, design, data, options, start=start)
    except MultinomialLinkError as e:
        logger.warning(f"Skipping candidate {spec.label} {design.describe_constraints()}: {str(e)}")
        return None


def _mergeable_terms(design: DesignSpec) -> List[Term]:
    seen: List[Term] = []
    for terms in design.per_category:
        for term in terms:
            if term not in seen:
                seen.append(term)
    return [t for t in seen if sum(t in terms for terms in design.per_category) >= 2]


def closest_pair(design: DesignSpec, theta: np.ndarray, term: Term) -> Optional[Tuple[int, int, float]]:
    """
    Pair of categories whose coefficients of term are closest among pairs not
    yet constrained equal; ties go to the smaller (a, b)
    """
    cats = [j for j, terms in enumerate(design.per_category, start=1) if term in terms]
    best = None
    for a, b in itertools.combinations(cats, 2):
        if design.same_coefficient(term, a, b):
            continue
        gap = abs(theta[design.slot_columns[(a, term)]] - theta[design.slot_columns[(b, term)]])
        if best is None or gap < best[2]:
            best = (a, b, float(gap))
    return best


def _merged_start(prev: FitResult, new_design: DesignSpec) -> np.ndarray:
    # each new column starts at the mean of the previous coefficients it merges
    start = np.zeros(new_design.p)
    for idx, col in enumerate(new_design.columns):
        values = [prev.theta[prev.design.slot_columns[(c, col.term)]] for c in col.categories]
        start[idx] = float(np.mean(values))
    return start


def backward_mixture(
    spec: ModelSpec,
    npo_design: DesignSpec,
    data: Dataset,
    options: Optional[FitOptions] = None,
    jobs: Optional[int] = None,
) -> SelectionTrace:
    """
    Backward selection of a po-npo mixture by AIC

    Each round merges, for every term, the two categories with the closest
    unequal coefficients, fits all these candidates and keeps the one with the
    smallest AIC if it beats the current model. The search stops at the first
    round without improvement.

    Args:
        spec: Model family and links
        npo_design: Starting design without equality constraints
        data: Summarized data
        options: Scoring controls
        jobs: Concurrent candidate fits

    Returns:
        SelectionTrace with accepted merges and the final fit
    """
    options = options or FitOptions.from_settings()
    try:
        current = fisher_scoring(spec, npo_design, data, options)
    except MultinomialLinkError as e:
        logger.error(f"Failed to fit the starting npo model: {str(e)}")
        raise
    design = npo_design
    initial_aic = current.aic
    steps: List[SelectionStep] = []
    rejected: Optional[float] = None
    terms = _mergeable_terms(npo_design)
    iteration = 0

    while True:
        proposals = []
        for s_idx, term in enumerate(terms):
            pair = closest_pair(design, current.theta, term)
            if pair is not None:
                proposals.append((s_idx, term, pair[0], pair[1]))
        if not proposals:
            logger.info("Every coefficient is already shared; stopping")
            break

        def fit_candidate(proposal):
            _, term, a, b = proposal
            candidate = design.with_constraint(term, a, b)
            start = _merged_start(current, candidate)
            X_all = candidate.build_X_all(data.x)
            if not check_feasible_X(spec, X_all, start).feasible:
                start = None
            return candidate, _try_fit(spec, candidate, data, options, start)

        results = _map(fit_candidate, proposals, jobs)
        scored = [
            (fit.aic, proposal[0], proposal[2], proposal[3], proposal, candidate, fit)
            for proposal, (candidate, fit) in zip(proposals, results)
            if fit is not None
        ]
        if not scored:
            logger.warning("No candidate merge could be fitted; stopping")
            break
        best = min(scored, key=lambda item: item[:4])
        best_aic, _, a, b, proposal, candidate, fit = best
        if best_aic < current.aic:
            iteration += 1
            steps.append(SelectionStep(iteration, proposal[1].label, a, b, best_aic))
            logger.info(f"Merge {iteration}: {proposal[1].label} in categories {a},{b} -> AIC {best_aic:.4f}")
            design, current = candidate, fit
        else:
            rejected = best_aic
            logger.info(f"Best merge gives AIC {best_aic:.4f} >= {current.aic:.4f}; stopping")
            break

    return SelectionTrace(
        initial_aic=initial_aic,
        steps=tuple(steps),
        rejected_aic=rejected,
        design=design,
        fit=current,
    )


def _rank_fits(specs: Sequence[ModelSpec], design: DesignSpec, data: Dataset, criterion: str,
               options: FitOptions, jobs: Optional[int], model_id: Callable[[ModelSpec], str]) -> SearchResult:
    fits = _map(lambda spec: _try_fit(spec, design, data, options), list(specs), jobs)
    entries = [
        (_criterion(fit, criterion), model_id(spec), spec, fit)
        for spec, fit in zip(specs, fits) if fit is not None
    ]
    if not entries:
        raise SpecError("No candidate model could be fitted")
    entries.sort(key=lambda e: (e[0], e[1]))
    ranking = tuple(
        RankedModel(mid, value, tuple(link.name for link in spec.links), tuple(design.describe_constraints()), fit.converged)
        for value, mid, spec, fit in entries
    )
    _, _, best_spec, best_fit = entries[0]
    return SearchResult(spec=best_spec, fit=best_fit, ranking=ranking)


def link_search(
    template: ModelSpec,
    candidates: Sequence[LinkFunction],
    design: DesignSpec,
    data: Dataset,
    criterion: str = "bic",
    options: Optional[FitOptions] = None,
    jobs: Optional[int] = None,
) -> SearchResult:
    """
    Exhaustive search over per-category link assignments

    Ties in the criterion go to the lexicographically smaller assignment of
    link names, so the result does not depend on the order of candidates.

    Raises:
        SearchLimitError: If there are more than LINK_SEARCH_LIMIT assignments
    """
    pool = sorted(set(candidates), key=lambda link: link.name)
    if not pool:
        raise SpecError("At least one candidate link is required")
    count = len(pool) ** (template.J - 1)
    if count > settings.LINK_SEARCH_LIMIT:
        raise SearchLimitError(f"{count} link assignments exceed the limit of {settings.LINK_SEARCH_LIMIT}")
    _criterion_guard(criterion)

    specs = [template.with_links(combo) for combo in itertools.product(pool, repeat=template.J - 1)]
    logger.info(f"Link search over {count} assignments by {criterion.upper()}")
    result = _rank_fits(specs, design, data, criterion, options or FitOptions.from_settings(), jobs,
                        lambda spec: ",".join(link.name for link in spec.links))
    logger.info(f"Best links {[l.name for l in result.spec.links]} with {criterion.upper()} {result.ranking[0].criterion:.4f}")
    return result


def _criterion_guard(criterion: str) -> None:
    if criterion not in CRITERIA:
        raise SpecError(f"Unknown criterion {criterion}; use one of {CRITERIA}")


def enumerate_two_group_specs(J: int, links: Optional[Sequence[LinkFunction]] = None) -> List[ModelSpec]:
    """Every two-group family with 1 <= k <= J-3 and k+1 <= s <= J"""
    if J < 4:
        raise SpecError(f"Two-group models need J >= 4, got J={J}")
    specs = []
    for family in TWO_GROUP_FAMILIES:
        for k in range(1, J - 2):
            for s in range(k + 1, J + 1):
                specs.append(ModelSpec.create(J, family.value, links, k=k, s=s))
    return specs


def two_group_search(
    J: int,
    design: DesignSpec,
    data: Dataset,
    criterion: str = "aic",
    links: Optional[Sequence[LinkFunction]] = None,
    options: Optional[FitOptions] = None,
    jobs: Optional[int] = None,
) -> SearchResult:
    """Fit every two-group family and rank them by criterion"""
    _criterion_guard(criterion)
    specs = enumerate_two_group_specs(J, links)
    logger.info(f"Two-group search over {len(specs)} structures by {criterion.upper()}")
    return _rank_fits(specs, design, data, criterion, options or FitOptions.from_settings(), jobs,
                      lambda spec: spec.label)


def cross_entropy_loss(y: np.ndarray, pi: np.ndarray) -> float:
    """-sum y_ij log pi_ij"""
    y = np.asarray(y, dtype=float)
    pi = np.asarray(pi, dtype=float)
    mask = y > 0
    return float(-np.sum(y[mask] * np.log(pi[mask])))


def fold_assignment(data: Dataset, k: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Stratified observation-level folds

    Observations of each setting are shuffled and dealt round robin from a
    random starting fold, so every fold sees each setting with n_i >= k.

    Returns:
        (setting index, category index, fold) per observation
    """
    setting, category = disaggregate(data)
    folds = np.empty(setting.shape[0], dtype=np.int64)
    for i in range(data.m):
        idx = np.flatnonzero(setting == i)
        order = rng.permutation(idx)
        folds[order] = (int(rng.integers(k)) + np.arange(order.shape[0])) % k
    return setting, category, folds


def cross_validate(
    spec: ModelSpec,
    design: DesignSpec,
    data: Dataset,
    k: int,
    seed: int,
    repeats: int = 1,
    options: Optional[FitOptions] = None,
    jobs: Optional[int] = None,
) -> CrossValidationResult:
    """
    k-fold cross-validated cross-entropy loss

    Each repeat draws its own partition from the (seed, repeat) stream; its
    loss is the sum over folds of -sum y log pi_hat on the held-out part.
    Folds whose training fit fails or whose prediction is infeasible are
    excluded with a warning.

    Returns:
        CrossValidationResult whose loss is the mean over repeats
    """
    if k < 2:
        raise SpecError(f"k must be at least 2, got {k}")
    if repeats < 1:
        raise SpecError(f"repeats must be at least 1, got {repeats}")
    if data.total < k:
        raise DataError(f"{data.total} observations cannot fill {k} folds")
    options = options or FitOptions.from_settings()
    tasks = []
    for r, rng in enumerate(SeedStreams(seed).generators("cv", repeats)):
        setting, category, folds = fold_assignment(data, k, rng)
        for f in range(k):
            held = folds == f
            test = np.bincount(setting[held] * data.J + category[held], minlength=data.m * data.J)
            train = np.bincount(setting[~held] * data.J + category[~held], minlength=data.m * data.J)
            tasks.append((r, f, train.reshape(data.m, data.J), test.reshape(data.m, data.J)))

    def run(task):
        r, f, train, test = task
        try:
            fit = fisher_scoring(spec, design, data.with_counts(train), options)
            rows = np.flatnonzero(test.sum(axis=1) > 0)
            pi = predict_proba(spec, design, fit.theta, data.x[rows])
            return cross_entropy_loss(test[rows], pi)
        except MultinomialLinkError as e:
            logger.warning(f"Excluding fold {f} of repeat {r}: {str(e)}")
            return None

    outcomes = _map(run, tasks, jobs)
    totals = np.zeros(repeats)
    excluded = 0
    for (r, _, _, _), loss in zip(tasks, outcomes):
        if loss is None:
            excluded += 1
        else:
            totals[r] += loss
    if excluded == len(tasks):
        raise SpecError("Every cross-validation fold failed")
    result = CrossValidationResult(k=k, repeats=repeats, losses=tuple(float(t) for t in totals), excluded_folds=excluded)
    logger.info(f"{k}-fold cross-validation over {repeats} repeats: mean loss {result.loss:.4f}")
    return result
