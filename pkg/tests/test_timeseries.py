import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rescoh.errors import InvalidInputError
from rescoh.timeseries import (
    MODEL_COEFFICIENTS,
    Ar1Spec,
    Series,
    center,
    difference,
    simulate_ar1,
    simulate_system,
    synthesize_output,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestSeries:
    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(InvalidInputError):
            Series([])
        with pytest.raises(InvalidInputError):
            Series([1.0, np.nan])

    def test_dates_must_increase(self):
        with pytest.raises(InvalidInputError):
            Series([1, 2], dates=["2020-01-02", "2020-01-01"])

    def test_values_read_only(self):
        s = Series([1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0


class TestDifference:
    def test_examples(self):
        np.testing.assert_array_equal(difference([1, 1, 1]).values, [0, 0])
        np.testing.assert_array_equal(difference([1, 3, 2]).values, [2, -1])

    def test_too_short(self):
        with pytest.raises(InvalidInputError):
            difference([1.0])

    def test_dates_move_to_later_day(self):
        s = Series([1, 2, 4], dates=["2020-01-01", "2020-01-02", "2020-01-06"])
        d = difference(s)
        assert list(d.dates.astype(str)) == ["2020-01-02", "2020-01-06"]

    def test_ar1_increments_mean_zero(self):
        x = simulate_ar1(Ar1Spec(0.4, length=20000, seed=3))
        d = difference(x).values
        assert abs(d.mean()) < 3 * d.std() / np.sqrt(d.size)

    @given(st.lists(finite, min_size=1, max_size=50))
    def test_inverts_cumsum(self, xs):
        c = np.cumsum([0.0] + xs)
        np.testing.assert_allclose(difference(c).values, xs, atol=1e-6)


class TestCenter:
    def test_examples(self):
        np.testing.assert_array_equal(center([2, 4]).values, [-1, 1])

    def test_random_sum_zero(self, rng):
        z = center(rng.normal(5, 3, 10000)).values
        assert abs(z.sum()) < 1e-9

    @given(st.lists(finite, min_size=1, max_size=200))
    def test_idempotent_and_mean_zero(self, xs):
        once = center(xs).values
        twice = center(once).values
        scale = max(1.0, float(np.max(np.abs(xs))))
        assert abs(once.mean()) <= 1e-12 * len(xs) * scale
        np.testing.assert_allclose(twice, once, atol=1e-9 * scale)


class TestAr1:
    def test_invalid_phi(self):
        with pytest.raises(InvalidInputError):
            Ar1Spec(1.0)
        with pytest.raises(InvalidInputError):
            Ar1Spec(-1.2)

    def test_deterministic_and_length(self):
        spec = Ar1Spec(0.4, length=500, seed=9)
        a, b = simulate_ar1(spec), simulate_ar1(spec)
        assert len(a) == 500
        np.testing.assert_array_equal(a.values, b.values)

    def test_seed_changes_path(self):
        a = simulate_ar1(Ar1Spec(0.4, length=100, seed=1))
        b = simulate_ar1(Ar1Spec(0.4, length=100, seed=2))
        assert not np.array_equal(a.values, b.values)

    @pytest.mark.parametrize("phi", [0.0, 0.4])
    def test_lag1_autocorrelation(self, phi):
        n = 10000
        x = simulate_ar1(Ar1Spec(phi, length=n, seed=11)).values
        x = x - x.mean()
        r1 = np.sum(x[1:] * x[:-1]) / np.sum(x * x)
        assert abs(r1 - phi) < 3 / np.sqrt(n)

    def test_stationary_variance(self):
        x = simulate_ar1(Ar1Spec(0.4, length=100000, seed=5)).values
        assert x.var() == pytest.approx(1 / (1 - 0.16), rel=0.10)

    def test_burn_in_discarded(self):
        full = simulate_ar1(Ar1Spec(0.4, length=110, burn_in=0, seed=4))
        cut = simulate_ar1(Ar1Spec(0.4, length=100, burn_in=10, seed=4))
        np.testing.assert_array_equal(full.values[10:], cut.values)


class TestSynthesize:
    def test_ones(self):
        y = synthesize_output(np.ones(20), np.ones(20), noise_sd=0)
        assert len(y) == 10
        np.testing.assert_allclose(y.values, 1.4, rtol=0, atol=1e-15)
        assert MODEL_COEFFICIENTS == (0.4, 0.3, 0.4, 0.3)

    def test_formula(self, rng):
        x1, x2 = rng.standard_normal(60), rng.standard_normal(60)
        y = synthesize_output(x1, x2, noise_sd=0).values
        t = np.arange(10, 60)
        expect = 0.4 * x1[t] + 0.3 * x2[t] + 0.4 * x1[t - 2] * x2[t - 1] + 0.3 * x1[t] * x2[t - 4]
        np.testing.assert_array_equal(y, expect)

    def test_length_mismatch_and_too_short(self):
        with pytest.raises(InvalidInputError):
            synthesize_output(np.ones(20), np.ones(21))
        with pytest.raises(InvalidInputError):
            synthesize_output(np.ones(10), np.ones(10))

    def test_variance_matches_monte_carlo(self):
        # Oracle: the formula evaluated on 10^6 samples of AR(1) inputs
        # generated independently (truncated MA representation).
        g = np.random.default_rng(2024)
        n = 10**6
        def ar(phi):
            e = g.standard_normal(n + 200)
            return np.convolve(e, phi ** np.arange(60))[200 : n + 200]
        a, b = ar(0.4), ar(0.2)
        t = np.arange(10, n)
        pop = (
            0.4 * a[t] + 0.3 * b[t] + 0.4 * a[t - 2] * b[t - 1] + 0.3 * a[t] * b[t - 4]
            + g.standard_normal(t.size)
        ).var()
        _, _, y = simulate_system(seed=0)
        assert y.values.var() == pytest.approx(pop, rel=0.20)


def test_simulate_system_shapes_and_determinism():
    x1, x2, y = simulate_system(seed=7)
    assert len(x1) == len(x2) == len(y) == 1000
    assert (x1.name, x2.name, y.name) == ("x1", "x2", "y")
    again = simulate_system(seed=7)
    np.testing.assert_array_equal(y.values, again[2].values)
    # y lines up with the returned inputs
    x1n, x2n, y0 = simulate_system(seed=7, noise_sd=0)
    a, b = x1n.values, x2n.values
    t = np.arange(4, 1000)
    expect = 0.4 * a[t] + 0.3 * b[t] + 0.4 * a[t - 2] * b[t - 1] + 0.3 * a[t] * b[t - 4]
    np.testing.assert_allclose(y0.values[4:], expect, atol=1e-12)
