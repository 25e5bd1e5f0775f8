import numpy as np
import pytest

from app.core.design import (
    INTERCEPT,
    DesignSpec,
    Structure,
    Term,
    TermKind,
    build_H,
    build_X,
    check_rank,
    parse_term,
)
from app.core.exceptions import DataError, SpecError

from .conftest import GRID


def test_parse_term():
    assert parse_term("1") is INTERCEPT
    assert parse_term("intercept") is INTERCEPT
    assert parse_term("dose") == Term(TermKind.LINEAR, "dose")
    assert parse_term(" dose^2 ") == Term(TermKind.QUADRATIC, "dose")
    assert parse_term("dose^2").label == "dose^2"


@pytest.mark.parametrize("text", ["", "^2", "2x", "dose-1", "a b"])
def test_parse_term_rejects_bad_names(text):
    with pytest.raises(SpecError):
        parse_term(text)


def test_house_flies_columns(house_flies_model):
    _, design = house_flies_model
    assert design.column_labels == ["beta1:1", "beta1:dose", "beta1:dose^2", "beta2:1", "beta2:dose"]
    X = build_X(design, [100.0])
    np.testing.assert_array_equal(X, np.array([
        [1.0, 100.0, 10000.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 100.0],
    ]))


def test_po_design_shares_slopes():
    design = DesignSpec.main_effects(4, ["x1", "x2"], "po")
    assert design.column_labels == ["beta1:1", "beta2:1", "beta3:1", "zeta:x1", "zeta:x2"]
    X = build_X(design, [2.0, -1.0])
    np.testing.assert_array_equal(X[:, :3], np.eye(3))
    np.testing.assert_array_equal(X[:, 3:], np.tile([2.0, -1.0], (3, 1)))


def test_ppo_design_mixes_own_and_common_terms():
    design = DesignSpec.create(3, ["x1", "x2"], "ppo", per_category=[["1", "x1"], ["1", "x1"]], common=["x2"])
    assert design.p == 5
    assert design.column_labels[-1] == "zeta:x2"
    X = build_X(design, [0.5, 3.0])
    np.testing.assert_array_equal(X, np.array([[1, 0.5, 0, 0, 3.0], [0, 0, 1, 0.5, 3.0]]))


def test_constraint_group_replaces_free_slots():
    design = DesignSpec.create(4, ["x"], "mixture", per_category=[["1", "x"]] * 3, constraints=[("x", [1, 3])])
    assert design.column_labels == ["beta1:1", "beta2:1", "beta2:x", "beta3:1", "beta[1,3]:x"]
    x_term = parse_term("x")
    assert design.same_coefficient(x_term, 1, 3)
    assert not design.same_coefficient(x_term, 1, 2)
    X = build_X(design, [2.0])
    np.testing.assert_array_equal(X[:, 4], [2.0, 0.0, 2.0])


def test_overlapping_constraints_merge():
    design = DesignSpec.create(
        5, ["x"], "mixture", per_category=[["1", "x"]] * 4, constraints=[("x", [1, 2]), ("x", [2, 3])]
    )
    assert design.describe_constraints() == ["beta[1,2,3]:x"]
    assert design.p == 4 + 2


def test_with_constraint_moves_to_mixture():
    design = DesignSpec.main_effects(4, ["x"], "npo")
    merged = design.with_constraint(parse_term("x"), 1, 2)
    assert merged.structure is Structure.MIXTURE
    assert merged.p == design.p - 1
    again = merged.with_constraint(parse_term("x"), 2, 3)
    assert again.describe_constraints() == ["beta[1,2,3]:x"]
    assert again.p == design.p - 2


def test_drop_term(house_flies_model):
    _, design = house_flies_model
    reduced = design.drop_term(1, "dose")
    assert reduced.column_labels == ["beta1:1", "beta1:dose^2", "beta2:1", "beta2:dose"]
    with pytest.raises(SpecError):
        design.drop_term(2, "dose^2")
    with pytest.raises(SpecError):
        design.drop_term(3, "dose")


def test_drop_term_from_constraint_group():
    design = DesignSpec.create(4, ["x"], "mixture", per_category=[["1", "x"]] * 3, constraints=[("x", [1, 2])])
    reduced = design.drop_term(2, "x")
    assert reduced.constraints == ()
    assert "beta1:x" in reduced.column_labels


def test_intercept_columns(house_flies_model):
    _, design = house_flies_model
    assert design.intercept_columns() == {1: 0, 2: 3}
    shared = DesignSpec.create(3, ["x"], "mixture", per_category=[["1"], ["1"]], constraints=[("1", [1, 2])])
    assert shared.intercept_columns() == {1: 0, 2: 0}


@pytest.mark.parametrize("kwargs", [
    {"structure": "po", "per_category": [["1", "x"]] * 3},
    {"structure": "npo", "per_category": [["1"]] * 3, "common": ["x"]},
    {"structure": "npo", "per_category": [["1", "x"]] * 3, "constraints": [("x", [1, 2])]},
    {"structure": "npo", "per_category": [["1", "z"]] * 3},
    {"structure": "npo", "per_category": [["1", "x"]] * 2},
    {"structure": "ppo", "per_category": [["1", "x"]] * 3, "common": ["x"]},
    {"structure": "mixture", "per_category": [["1"]] * 3, "constraints": [("x", [1, 2])]},
    {"structure": "mixture", "per_category": [["1", "x"]] * 3, "constraints": [("x", [1, 4])]},
    {"structure": "mixture", "per_category": [["1", "x"]] * 3, "constraints": [("x", [2])]},
    {"structure": "cubic"},
])
def test_invalid_designs(kwargs):
    with pytest.raises(SpecError):
        DesignSpec.create(4, ["x"], **kwargs)


def test_build_x_all_checks_covariate_count():
    design = DesignSpec.main_effects(3, ["x1", "x2"])
    with pytest.raises(DataError):
        design.build_X_all(np.zeros((4, 3)))


def test_h_is_category_major():
    design = DesignSpec.main_effects(4, ["x1", "x2"], "npo")
    X_all = design.build_X_all(GRID)
    H = build_H(design, GRID)
    m = GRID.shape[0]
    assert H.shape == (design.p, 3 * m)
    for i in range(m):
        for j in range(3):
            np.testing.assert_array_equal(H[:, j * m + i], X_all[i, j, :])


def test_rank_of_h():
    design = DesignSpec.main_effects(4, ["x1", "x2"], "npo")
    assert check_rank(build_H(design, GRID)).full_row_rank
    # two settings cannot identify an intercept and two slopes per category
    short = check_rank(build_H(design, GRID[:2]))
    assert not short.full_row_rank
    assert short.rank == 6
