import numpy as np
import pytest

from conftest import sim
from rescoh.errors import CollinearDesignError, InvalidInputError
from rescoh.regression import (
    INTERCEPT,
    LagDesign,
    Term,
    build_lag_design,
    ols_fit,
    product_term,
    stepwise_aic,
)

SIMULATION_COLUMNS = [
    "x1(t)", "x1(t-1)", "x1(t-2)", "x1(t-3)",
    "x2(t)", "x2(t-1)", "x2(t-2)", "x2(t-3)",
    "x1(t-1)x2(t)", "x1(t-2)x2(t-1)", "x1(t-3)x2(t-2)", "x1(t-4)x2(t-3)",
    "x1(t)x2(t-4)", "x1(t-1)x2(t-5)", "x1(t-2)x2(t-6)", "x1(t-3)x2(t-7)",
]


def sim_design(seed):
    x1, x2, y = sim(seed)
    return build_lag_design(y, {"x1": x1, "x2": x2}, 4, True, [product_term("x1", "x2", -1), product_term("x1", "x2", 4)])


class TestTerm:
    def test_parse(self):
        t = Term.parse("x1(t+4)x2(t)")
        assert t.factors == (("x1", 4), ("x2", 0))
        assert Term.parse("x1(t+4)*x2(t)") == t
        assert Term.parse("x1").factors == (("x1", 0),)
        assert t.lead == 4
        assert t.shifted(4).name == "x1(t)x2(t-4)"

    def test_parse_error(self):
        with pytest.raises(InvalidInputError):
            Term.parse("x1(t+)")


class TestDesign:
    def test_simulation_columns(self):
        d = sim_design(0)
        assert d.names == SIMULATION_COLUMNS
        assert d.n == 993

    def test_single_lag(self, rng):
        x, y = rng.standard_normal(30), rng.standard_normal(30)
        d = build_lag_design(y, {"x": x}, 1)
        assert d.names == ["x(t)"]
        np.testing.assert_array_equal(d.columns["x(t)"], x)

    def test_column_values(self):
        x1, x2, y = sim(0)
        d = sim_design(0)
        a, b = x1.values, x2.values
        t = np.arange(7, 1000)
        np.testing.assert_array_equal(d.response, y.values[7:])
        np.testing.assert_array_equal(d.columns["x1(t-2)x2(t-1)"], a[t - 2] * b[t - 1])
        np.testing.assert_array_equal(d.columns["x1(t-3)x2(t-7)"], a[t - 3] * b[t - 7])

    def test_too_short(self):
        with pytest.raises(InvalidInputError):
            build_lag_design(np.ones(3), {"x": np.ones(3)}, 4)

    def test_unknown_input(self):
        with pytest.raises(InvalidInputError):
            build_lag_design(np.ones(30), {"x": np.ones(30)}, 2, products=["z(t)x(t)"])


class TestOls:
    def test_perfect_fit(self, rng):
        x = rng.standard_normal(20)
        fit = ols_fit(LagDesign(2 * x, {"x": x}))
        assert fit.coef("x") == pytest.approx(2.0)
        assert fit.perfect_fit
        assert np.isnan(fit.std_errors).all()

    def test_matches_normal_equations(self, rng):
        n, p = 200, 5
        x = rng.standard_normal((n, p))
        y = x @ rng.standard_normal(p) + rng.standard_normal(n)
        fit = ols_fit(LagDesign(y, {f"c{j}": x[:, j] for j in range(p)}))
        xm = np.column_stack([np.ones(n), x])
        xtx_inv = np.linalg.inv(xm.T @ xm)
        beta = xtx_inv @ xm.T @ y
        resid = y - xm @ beta
        s2 = resid @ resid / (n - p - 1)
        np.testing.assert_allclose(fit.estimates, beta, rtol=1e-8)
        np.testing.assert_allclose(fit.std_errors, np.sqrt(s2 * np.diag(xtx_inv)), rtol=1e-8)
        assert fit.aic == pytest.approx(n * np.log(resid @ resid / n) + 2 * (p + 2), rel=1e-10)
        assert np.all((fit.p_values >= 0) & (fit.p_values <= 1))

    def test_coverage(self):
        g = np.random.default_rng(77)
        n, truth = 60, np.array([1.0, -0.5, 0.25])
        q, _ = np.linalg.qr(g.standard_normal((n, 3)))
        cols = {f"c{j}": q[:, j] for j in range(3)}
        hits = 0
        for _ in range(1000):
            y = q @ truth + 0.1 * g.standard_normal(n)
            fit = ols_fit(LagDesign(y, cols, include_intercept=False))
            hits += np.count_nonzero(np.abs(fit.estimates - truth) <= 3 * fit.std_errors)
        assert hits >= 0.99 * 3000

    def test_collinear_named(self, rng):
        x = rng.standard_normal(50)
        with pytest.raises(CollinearDesignError) as e:
            ols_fit(LagDesign(rng.standard_normal(50), {"a": x, "b": 2 * x}))
        assert list(e.value.columns) == ["b"]

    def test_permutation(self, rng):
        x = rng.standard_normal((100, 3))
        y = x @ [1.0, 2.0, 3.0] + rng.standard_normal(100)
        a = ols_fit(LagDesign(y, {"a": x[:, 0], "b": x[:, 1], "c": x[:, 2]}))
        b = ols_fit(LagDesign(y, {"c": x[:, 2], "a": x[:, 0], "b": x[:, 1]}))
        for name in "abc":
            assert a.row(name) == pytest.approx(b.row(name), rel=1e-10)

    def test_text_and_csv(self, rng):
        x = rng.standard_normal(40)
        fit = ols_fit(LagDesign(x + rng.standard_normal(40), {"x": x}))
        assert fit.to_csv().splitlines()[0] == "name,estimate,se,p_value"
        assert "Estimate" in fit.to_text() and INTERCEPT in fit.to_text()


class TestStepwise:
    def test_not_worse_than_full(self):
        d = sim_design(1)
        assert stepwise_aic(d).aic <= ols_fit(d).aic

    def test_keeps_intercept(self):
        d = sim_design(2)
        assert stepwise_aic(d).names[0] == INTERCEPT

    def test_finds_true_covariate(self):
        g = np.random.default_rng(5)
        hits = 0
        for _ in range(200):
            x = g.standard_normal((80, 6))
            y = x[:, 0] + 0.1 * g.standard_normal(80)
            fit = stepwise_aic(LagDesign(y, {f"c{j}": x[:, j] for j in range(6)}))
            hits += "c0" in fit.names
        assert hits >= 190

    def test_orthogonal_full_model_kept(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((100, 4)))
        y = q @ [10.0, -8.0, 6.0, 5.0] + 0.01 * rng.standard_normal(100)
        fit = stepwise_aic(LagDesign(y, {f"c{j}": q[:, j] for j in range(4)}))
        assert fit.names == [INTERCEPT, "c0", "c1", "c2", "c3"]

    def test_forward_and_backward(self, rng):
        x = rng.standard_normal((150, 4))
        y = 2 * x[:, 1] + rng.standard_normal(150)
        d = LagDesign(y, {f"c{j}": x[:, j] for j in range(4)})
        for direction in ("forward", "backward"):
            assert "c1" in stepwise_aic(d, direction).names
        with pytest.raises(InvalidInputError):
            stepwise_aic(d, "sideways")

    def test_simulation_true_terms_significant(self):
        fit = stepwise_aic(sim_design(1))
        for name, truth in zip(["x1(t)", "x2(t)", "x1(t-2)x2(t-1)", "x1(t)x2(t-4)"], [0.4, 0.3, 0.4, 0.3]):
            est, se, p = fit.row(name)
            assert p < 1e-6
            assert abs(est - truth) <= 3 * se
