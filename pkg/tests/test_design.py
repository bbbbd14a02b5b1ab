import numpy as np
import pytest

from surpeval.lmm import DesignError, FixedSpec, RandomTerm, build_design


def test_intercept_only_fixed_spec():
    design = build_design({"g": ["a", "b", "a", "b", "a"]},
                          FixedSpec(()), [RandomTerm("g")])
    assert design.X.shape == (5, 1)
    np.testing.assert_array_equal(design.X[:, 0], np.ones(5))


def test_random_intercept_indicator_columns():
    design = build_design({"subject": ["s2", "s1", "s3", "s1", "s2", "s3"]},
                          FixedSpec(()), [RandomTerm("subject")])
    Z = design.Z.toarray()
    assert Z.shape == (6, 3)
    assert (Z.sum(axis=1) == 1).all()
    assert set(np.flatnonzero(Z[0]).tolist()) == {1}   # levels sorted: s1,s2,s3


@pytest.mark.parametrize("g", [2, 3, 4, 5])
def test_correlated_intercept_slope_counts(g):
    n = 4 * g
    rng = np.random.default_rng(g)
    data = {"subject": [f"s{j}" for j in np.repeat(np.arange(g), 4)],
            "x": rng.normal(size=n)}
    design = build_design(data, FixedSpec(("x",)),
                          [RandomTerm("subject", ("x",), correlated=True)])
    assert design.q == 2 * g
    assert design.n_theta == 3
    # explicit enumeration: vech of a lower-triangular 2x2 template
    assert design.theta_names == (
        "subject:chol[intercept,intercept]",
        "subject:chol[x,intercept]",
        "subject:chol[x,x]")


def test_uncorrelated_term_theta_count():
    rng = np.random.default_rng(0)
    data = {"subject": ["a", "b"] * 4, "x": rng.normal(size=8)}
    design = build_design(data, FixedSpec(("x",)),
                          [RandomTerm("subject", ("x",), correlated=False)])
    assert design.n_theta == 2
    assert np.isfinite(design.theta_lower).all()


def test_q_formula_multiple_terms():
    rng = np.random.default_rng(1)
    n = 24
    data = {"subject": [f"s{j}" for j in np.repeat(np.arange(4), 6)],
            "item": [f"i{j}" for j in np.tile(np.arange(6), 4)],
            "x": rng.normal(size=n)}
    design = build_design(data, FixedSpec(("x",)),
                          [RandomTerm("subject", ("x",)), RandomTerm("item")])
    assert design.q == 4 * 2 + 6 * 1


def test_lambda_matrix_blocks():
    rng = np.random.default_rng(2)
    data = {"g": ["a", "b", "a", "b"], "x": rng.normal(size=4)}
    design = build_design(data, FixedSpec(("x",)), [RandomTerm("g", ("x",))])
    lam = design.lambda_matrix([2.0, 0.5, 1.5]).toarray()
    T = np.array([[2.0, 0.0], [0.5, 1.5]])
    np.testing.assert_array_equal(lam, np.kron(np.eye(2), T))


def test_unresolved_name():
    with pytest.raises(DesignError, match="nope"):
        build_design({"g": ["a", "b"]}, FixedSpec(("nope",)), [RandomTerm("g")])
    with pytest.raises(DesignError, match="missing"):
        build_design({"x": [1.0, 2.0]}, FixedSpec(("x",)),
                     [RandomTerm("missing")])


def test_single_level_factor():
    with pytest.raises(DesignError, match="fewer than 2 levels"):
        build_design({"g": ["a", "a", "a"]}, FixedSpec(()), [RandomTerm("g")])


def test_aliased_column_dropped_with_warning():
    rng = np.random.default_rng(3)
    x = rng.normal(size=8)
    data = {"x": x, "x2": 2 * x, "g": ["a", "b"] * 4}
    with pytest.warns(UserWarning, match="x2"):
        design = build_design(data, FixedSpec(("x", "x2")), [RandomTerm("g")])
    assert design.x_names == ("(Intercept)", "x")
    assert design.dropped == ("x2",)


def test_non_finite_column_rejected():
    with pytest.raises(DesignError, match="non-finite"):
        build_design({"x": [1.0, np.nan], "g": ["a", "b"]},
                     FixedSpec(("x",)), [RandomTerm("g")])
