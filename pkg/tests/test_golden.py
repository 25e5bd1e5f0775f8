"""
Published results on datasets that are not bundled with the repository.

Each test runs only when its CSV is present under data/ in the summarized
layout described in README.md.
"""

import itertools

import numpy as np
import pytest

from app.core.design import DesignSpec
from app.core.likelihood import Dataset
from app.core.links import parse_links
from app.core.structure import ModelSpec, reorder_counts
from app.services.data import ingest
from app.services.fitter import fisher_scoring
from app.services.selection import backward_mixture, link_search, two_group_search

from .conftest import DATA_DIR

POLICE_LABELS = ["Tasered", "Shot", "Shot&Tasered", "Other"]
POLICE_ORDER = ["Tasered", "Shot", "Other", "Shot&Tasered"]
METABOLIC_LABELS = ["Normal", "IFG", "DM", "NA"]


def load(name, categories=None):
    path = DATA_DIR / name
    if not path.exists():
        pytest.skip(f"{name} is not available")
    return ingest(path, categories=categories)


def test_trauma_logit_po():
    data = load("trauma.csv")
    design = DesignSpec.main_effects(5, data.covariates, "po")
    fit = fisher_scoring(ModelSpec.create(5, "cumulative"), design, data)
    assert fit.bic == pytest.approx(252.74, abs=0.05)


@pytest.mark.slow
def test_trauma_mixed_links():
    data = load("trauma.csv")
    design = DesignSpec.main_effects(5, data.covariates, "po")
    links = parse_links(["logit", "probit", "loglog", "cloglog"])
    result = link_search(ModelSpec.create(5, "cumulative"), links, design, data, "bic")
    assert result.ranking[0].criterion == pytest.approx(198.43, abs=0.05)
    assert [link.name for link in result.spec.links] == ["loglog", "probit", "loglog", "logit"]


def police_data():
    data = load("police.csv", POLICE_LABELS)
    y = reorder_counts(data.y, data.categories, POLICE_ORDER)
    return Dataset(data.x, y, data.covariates, tuple(POLICE_ORDER))


def test_police_continuation_npo():
    data = police_data()
    fit = fisher_scoring(ModelSpec.create(4, "continuation"), DesignSpec.main_effects(4, data.covariates), data)
    assert fit.aic == pytest.approx(192.01, abs=0.05)


@pytest.mark.slow
def test_police_mixture_selection():
    data = police_data()
    trace = backward_mixture(ModelSpec.create(4, "continuation"), DesignSpec.main_effects(4, data.covariates), data)
    assert trace.initial_aic == pytest.approx(192.01, abs=0.05)
    np.testing.assert_allclose([s.aic for s in trace.steps], [190.36, 188.47, 187.96, 187.04, 185.04], atol=0.05)
    assert trace.rejected_aic == pytest.approx(186.07, abs=0.05)


def test_metabolic_continuation_npo():
    data = load("metabolic.csv", METABOLIC_LABELS)
    fit = fisher_scoring(ModelSpec.create(4, "continuation"), DesignSpec.main_effects(4, data.covariates), data)
    assert fit.aic == pytest.approx(930.40, abs=0.05)


@pytest.mark.slow
def test_metabolic_two_group_models():
    data = load("metabolic.csv", METABOLIC_LABELS)
    design = DesignSpec.main_effects(4, data.covariates)
    best = np.inf
    for order in itertools.permutations(METABOLIC_LABELS):
        y = reorder_counts(data.y, data.categories, order)
        ordered = Dataset(data.x, y, data.covariates, order)
        best = min(best, two_group_search(4, design, ordered, "aic").ranking[0].criterion)
    assert best == pytest.approx(927.56, abs=0.05)
