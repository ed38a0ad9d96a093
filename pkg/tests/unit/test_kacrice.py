import math

import numpy as np
import pytest
from scipy import integrate, special

from wavekac import kacrice
from wavekac.kacrice import IntensityResult, KacRiceError, TwoPointResult


def rng(seed=0):
    return np.random.default_rng(seed)


class TestZeroIntensity(object):
    def test_closed_form(self):
        assert kacrice.zero_intensity(2).value == pytest.approx(1 / (2 * math.sqrt(2)))
        assert kacrice.zero_intensity(3).value == pytest.approx(2 / (math.sqrt(3) * math.pi))

    def test_conditional_mc(self):
        res = kacrice.zero_intensity(2, "conditional-MC", 200000, rng(1))
        target = 1 / (2 * math.sqrt(2))
        assert res.method == "conditional-MC"
        assert res.mc_samples == 200000
        assert abs(res.value - target) < max(5 * res.standard_error, 1e-3)
        assert res.agrees_with(kacrice.zero_intensity(2), n_se=5)

    def test_errors(self):
        with pytest.raises(KacRiceError):
            kacrice.zero_intensity(1)
        with pytest.raises(KacRiceError):
            kacrice.zero_intensity(2, "semi-analytic")
        with pytest.raises(KacRiceError):
            kacrice.zero_intensity(2, "conditional-MC", 5, rng())


class TestCritIntensity(object):
    def test_constants(self):
        assert kacrice.PUBLISHED_CRIT_INTENSITY == pytest.approx(0.0324873, rel=1e-5)
        assert kacrice.ORACLE_CRIT_INTENSITY == pytest.approx(0.0918881, rel=1e-5)

    def test_closed_form(self):
        res = kacrice.crit_intensity(2, "closed-form")
        assert res.value == kacrice.PUBLISHED_CRIT_INTENSITY
        with pytest.raises(KacRiceError):
            kacrice.crit_intensity(3, "closed-form")

    def test_semi_analytic(self):
        res = kacrice.crit_intensity(2, "semi-analytic")
        assert res.value == pytest.approx(kacrice.ORACLE_CRIT_INTENSITY, rel=1e-10)
        # Half of all critical points are saddles
        assert res.by_index[1] == pytest.approx(res.value / 2)
        assert res.by_index[0] == pytest.approx(res.by_index[2])
        assert sum(res.by_index.values()) == pytest.approx(res.value)

    def test_conditional_mc(self):
        res = kacrice.crit_intensity(2, "conditional-MC", 200000, rng(2))
        target = kacrice.ORACLE_CRIT_INTENSITY
        assert abs(res.value - target) < max(5 * res.standard_error, 2e-3)
        assert res.by_index[1] == pytest.approx(target / 2, rel=0.05)
        assert sum(res.by_index.values()) == pytest.approx(res.value)

    def test_three_dimensions(self):
        res = kacrice.crit_intensity(3, "conditional-MC", 20000, rng(3))
        assert res.value > 0
        assert set(res.by_index) == set([0, 1, 2, 3])

    def test_to_dict(self):
        d = kacrice.crit_intensity(2, "semi-analytic").to_dict()
        assert d["method"] == "semi-analytic"
        assert set(d["by_index"]) == set(["0", "1", "2"])

    def test_unknown_method(self):
        with pytest.raises(KacRiceError):
            kacrice.crit_intensity(2, "guess")
        with pytest.raises(KacRiceError):
            kacrice.crit_intensity(4, "conditional-MC")


class TestTwoPoint(object):
    def test_single(self):
        res = kacrice.crit_two_point(1.0, 4000, rng())
        den, y, k2 = res.as_tuple()
        assert den > 0 and y > 0
        assert k2 == pytest.approx(den * y)

    def test_bad_separation(self):
        with pytest.raises(KacRiceError):
            kacrice.crit_two_point(0.0)

    def test_profile_drops_singular(self):
        res = kacrice.two_point_profile([1e-9, 1.0, 2.0], 2000, rng())
        assert res.dropped == [1e-9]
        assert list(res.r) == [1.0, 2.0]
        assert res.to_dict()["dropped"] == [1e-9]

    def test_den_exponent(self):
        r = np.logspace(-2, -1, 8)
        res = kacrice.near_diagonal_exponents(r, 2000, rng(4))
        assert res.slope_den == pytest.approx(-2.0, abs=0.1)

    def test_near_diagonal_exponents(self):
        "Y grows like r^2 and cancels the r^-2 blow up of Den"
        res = kacrice.near_diagonal_exponents(mc_samples=20000, rng=rng(4))
        assert res.slope_y == pytest.approx(2.0, abs=0.2)
        assert res.slope_den + res.slope_y == pytest.approx(0.0, abs=0.25)

    def test_too_few_points(self):
        with pytest.raises(KacRiceError):
            kacrice.near_diagonal_exponents([0.01, 0.1])


class TestGram(object):
    def test_single_point(self):
        assert kacrice.gram_zeros([[0.0, 0.0]]) == pytest.approx(2 * math.pi)
        assert kacrice.gram_crits([[0.0, 0.0]]) == pytest.approx(math.pi)
        assert kacrice.gram_zeros([[0.0, 0.0, 0.0]]) == pytest.approx(4 * math.pi)

    def test_pair(self):
        value = kacrice.gram_zeros([[0.0, 0.0], [1.0, 0.0]])
        assert value == pytest.approx(2 * math.pi * (1 - special.j0(1.0)))

    def test_positive(self):
        pts = rng(5).uniform(-3, 3, size=(5, 2))
        assert kacrice.gram_zeros(pts) > 0
        assert kacrice.gram_crits(pts) > 0

    def test_duplicates(self):
        with pytest.raises(KacRiceError):
            kacrice.gram_zeros([[1.0, 1.0], [1.0, 1.0]])

    def test_full_jet_singular(self):
        assert kacrice.gram_jets([[0.0, 0.0]], ("value", "gradient", "hessian")) < 1e-10


class TestDecorrelation(object):
    def test_profile(self):
        norms = kacrice.decorrelation_profile(2, [0.0, 1.0, 30.0])
        assert norms[0] == pytest.approx(np.linalg.norm(kacrice.one_point_law(2).cov, 2))
        assert norms[2] < norms[1]

    def test_envelope(self):
        r = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
        C, slope = kacrice.envelope_fit(r, kacrice.decorrelation_profile(2, r))
        assert -1.0 < slope < 0.0
        assert C > 0

    def test_negative(self):
        with pytest.raises(KacRiceError):
            kacrice.decorrelation_profile(2, [-1.0])


class TestFactorial(object):
    def test_conversion(self):
        assert kacrice.factorial_to_variance(3.0, 10.0) == 4.0

    def test_pair_density(self):
        s = np.linspace(0, 4.0, 4001)
        total = integrate.trapezoid(kacrice.disk_pair_density(s, 2.0), s)
        assert total == pytest.approx(1.0, rel=1e-3)

    def test_poisson(self):
        c = 0.1
        tp = TwoPointResult(2, [0.0, 10.0], [1.0, 1.0], [c * c, c * c], [0.0, 0.0])
        pred = kacrice.predicted_ball_variance(3.0, tp, c)
        assert pred["mean"] == pytest.approx(c * math.pi * 9)
        assert pred["variance"] == pytest.approx(pred["mean"], abs=0.01)

    def test_dimension(self):
        tp = TwoPointResult(3, [1.0], [1.0], [1.0], [0.0])
        with pytest.raises(KacRiceError):
            kacrice.predicted_ball_variance(1.0, tp, 1.0)


class TestIntensityResult(object):
    def test_agrees(self):
        a = IntensityResult(2, "crit", 1.0, "conditional-MC", 100, 0.1)
        b = IntensityResult(2, "crit", 1.2, "conditional-MC", 100, 0.1)
        assert a.agrees_with(b)
        assert not a.agrees_with(b, n_se=1)
        exact = IntensityResult(2, "crit", 1.0, "closed-form")
        assert exact.agrees_with(IntensityResult(2, "crit", 1.0, "semi-analytic"))
