import math
import unittest

import numpy as np

from udsapprox.dss import RateFunction, make_schedule
from udsapprox.exceptions import HorizonError, IndexRangeError, ParameterError
from udsapprox.limsup import (
    ApproxProfile,
    ProfileCoordinate,
    Window,
    check_kw_hypotheses,
    check_profile_domination,
    classify_trend,
    hit_indices,
    is_hit,
    measure_estimate,
    measure_sweep,
    series_partial_sums,
    sweep_rows,
)
from udsapprox.parallel import uniform_samples
from udsapprox.sequences import PointList, gen_kronecker
from udsapprox.ubiquity import RhoProfile

GOLDEN = (5**0.5 - 1) / 2


class TestHits(unittest.TestCase):
    def test_is_hit(self):
        self.assertTrue(is_hit([0.3], [0.31], [0.02]))
        self.assertFalse(is_hit([0.3], [0.31], [0.005]))
        self.assertTrue(is_hit([0.3, 0.7], [0.31, 0.69], [0.02, 0.02]))

    def test_is_hit_is_strict(self):
        self.assertFalse(is_hit([0.625], [0.5], [0.125]))

    def test_is_hit_dimension_mismatch(self):
        with self.assertRaises(ParameterError):
            is_hit([0.3, 0.4], [0.3], [0.1])

    def test_hit_indices(self):
        seq = gen_kronecker([0.5], 10)
        psi = ApproxProfile.uniform(ProfileCoordinate.constant(0.1), 1)
        self.assertEqual(hit_indices([0.05], seq, Window(1, 4), psi), [2, 4])

    def test_trivial_profiles(self):
        seq = gen_kronecker([GOLDEN], 20)
        one = ApproxProfile.uniform(ProfileCoordinate.power(1.0, 0.0), 1)
        zero = ApproxProfile.uniform(ProfileCoordinate.constant(0.0), 1)
        self.assertEqual(hit_indices([0.4], seq, Window(1, 20), one), list(range(1, 21)))
        self.assertEqual(hit_indices([0.4], seq, Window(1, 20), zero), [])

    def test_window_beyond_prefix(self):
        seq = gen_kronecker([GOLDEN], 20)
        psi = ApproxProfile.uniform(ProfileCoordinate.constant(0.1), 1)
        with self.assertRaises(IndexRangeError):
            hit_indices([0.4], seq, Window(1, 21), psi)

    def test_invalid_window(self):
        with self.assertRaises(ParameterError):
            Window(3, 2)
        with self.assertRaises(ParameterError):
            Window(0, 5)

    def test_profile_dimension_mismatch(self):
        seq = gen_kronecker([GOLDEN], 20)
        psi = ApproxProfile.uniform(ProfileCoordinate.constant(0.1), 2)
        with self.assertRaises(ParameterError):
            hit_indices([0.4], seq, Window(1, 5), psi)


class TestMeasureEstimate(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.golden = gen_kronecker([GOLDEN], 10**5)

    def test_trivial_profiles(self):
        one = ApproxProfile.uniform(ProfileCoordinate.power(1.0, 0.0), 1)
        zero = ApproxProfile.uniform(ProfileCoordinate.constant(0.0), 1)
        self.assertEqual(measure_estimate(self.golden, one, Window(1, 100), 1000, 0).fraction, 1.0)
        self.assertEqual(measure_estimate(self.golden, zero, Window(1, 100), 1000, 0).fraction, 0.0)

    def test_divergent_profile_covers_almost_everything(self):
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 1.0), 1)
        estimate = measure_estimate(self.golden, psi, Window(1, 10**5), 10**4, 1)
        self.assertGreaterEqual(estimate.fraction, 0.95)

    def test_convergent_tail_is_small(self):
        psi = ApproxProfile.uniform(ProfileCoordinate.power(1.0, 1.5), 1)
        estimate = measure_estimate(self.golden, psi, Window(10**4, 2 * 10**4), 10**4, 1)
        self.assertLessEqual(estimate.fraction, 0.05)

    def test_confidence_interval(self):
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 1.0), 1)
        estimate = measure_estimate(self.golden, psi, Window(1, 50), 2000, 3)
        p = estimate.fraction
        self.assertAlmostEqual(estimate.ci95, 1.96 * math.sqrt(p * (1 - p) / 2000), places=15)

    def test_growing_windows_are_monotone(self):
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 1.0), 1)
        windows = [Window(1, 100), Window(1, 1000), Window(1, 10**4)]
        estimates = measure_sweep(self.golden, psi, windows, 5000, 7)
        fractions = [e.fraction for e in estimates]
        self.assertEqual(fractions, sorted(fractions))
        self.assertEqual([row["window_max"] for row in sweep_rows(estimates)], [100, 1000, 10**4])

    def test_threads_do_not_change_estimate(self):
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 1.0), 1)
        a = measure_estimate(self.golden, psi, Window(1, 10**5), 5000, 2, threads=1)
        b = measure_estimate(self.golden, psi, Window(1, 10**5), 5000, 2, threads=3)
        self.assertEqual(a, b)

    def test_matches_direct_hit_search(self):
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 1.0), 1)
        win = Window(1, 500)
        samples = uniform_samples(4, 200, np.zeros(1), np.ones(1))
        expected = sum(1 for x in samples if hit_indices(x, self.golden, win, psi)) / 200
        self.assertEqual(measure_estimate(self.golden, psi, win, 200, 4).fraction, expected)

    def test_two_dimensional_tree_path(self):
        seq = gen_kronecker([GOLDEN, 2**0.5 - 1], 20000)
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.1, 0.5), 2)
        win = Window(1, 20000)
        samples = uniform_samples(8, 1000, np.zeros(2), np.ones(2))
        expected = sum(1 for x in samples if hit_indices(x, seq, win, psi)) / 1000
        self.assertEqual(measure_estimate(seq, psi, win, 1000, 8).fraction, expected)

    def test_more_samples_agree(self):
        """Test estimates at 1000 and 4000 samples agree within three combined ci95 for 20 seeds."""
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 1.0), 1)
        win = Window(20, 60)
        for seed in range(20):
            a = measure_estimate(self.golden, psi, win, 1000, seed)
            b = measure_estimate(self.golden, psi, win, 4000, seed)
            self.assertGreater(a.ci95, 0.0)
            self.assertLessEqual(abs(a.fraction - b.fraction), 3.0 * math.hypot(a.ci95, b.ci95))

    def test_monotone_in_profile(self):
        """Test a pointwise larger profile never hits fewer of the same samples."""
        pairs = [
            (ProfileCoordinate.power(0.2, 1.0), ProfileCoordinate.power(0.5, 1.0)),
            (ProfileCoordinate.power(0.5, 1.5), ProfileCoordinate.power(0.5, 1.0)),
            (ProfileCoordinate.constant(0.001), ProfileCoordinate.constant(0.002)),
        ]
        for small, large in pairs:
            for win in (Window(1, 100), Window(50, 5000)):
                a = measure_estimate(self.golden, ApproxProfile.uniform(small, 1), win, 2000, 5)
                b = measure_estimate(self.golden, ApproxProfile.uniform(large, 1), win, 2000, 5)
                self.assertLessEqual(a.fraction, b.fraction)
        seq = gen_kronecker([GOLDEN, 2**0.5 - 1], 3000)
        small = ApproxProfile((ProfileCoordinate.power(0.1, 0.5), ProfileCoordinate.power(0.05, 0.5)))
        large = ApproxProfile.uniform(ProfileCoordinate.power(0.1, 0.5), 2)
        a = measure_estimate(seq, small, Window(1, 3000), 2000, 6)
        b = measure_estimate(seq, large, Window(1, 3000), 2000, 6)
        self.assertLessEqual(a.fraction, b.fraction)

    def test_too_few_samples(self):
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 1.0), 1)
        with self.assertRaises(ParameterError):
            measure_estimate(self.golden, psi, Window(1, 10), 99, 0)


class TestSeries(unittest.TestCase):
    def test_khintchine_unit_terms(self):
        v = RateFunction.polylog(4, 1)
        psi = ApproxProfile((ProfileCoordinate.rate_power(v, 1.0),))
        report = series_partial_sums("khintchine", 5, psi, v=v, sched=make_schedule("square_exp", 5, M=2))
        self.assertEqual(report.terms, [1.0] * 5)
        self.assertEqual(report.partial_sums, [1.0, 2.0, 3.0, 4.0, 5.0])
        self.assertEqual(report.trend, "diverging")

    def test_khintchine_geometric_decay(self):
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 2.0),))
        v = RateFunction.power(1.0, 1.0)
        report = series_partial_sums("khintchine", 20, psi, v=v, sched=make_schedule("geometric", 20, M=2))
        for j, term in enumerate(report.terms, start=1):
            self.assertAlmostEqual(term / 2.0**-j, 1.0, places=10)
        self.assertEqual(report.trend, "converging")

    def test_short_geometric_decay(self):
        """Test a geometric series too short for the full ratio run is still converging."""
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 2.0),))
        v = RateFunction.power(1.0, 1.0)
        for J in (6, 10):
            report = series_partial_sums("khintchine", J, psi, v=v, sched=make_schedule("geometric", J, M=2))
            self.assertEqual(report.trend, "converging")

    def test_square_exp_criterion_is_constant(self):
        """Test the M^{j^2} criterion with psi_i = ((log N)^2 / N)^tau_i gives (log M)^2 for every j."""
        base = RateFunction.polylog(1.0, 2)
        psi = ApproxProfile((ProfileCoordinate.rate_power(base, 0.3), ProfileCoordinate.rate_power(base, 0.7)))
        report = series_partial_sums("thm13", 20, psi, M=3.0, n=2)
        self.assertFalse(report.log_space)
        for term in report.terms:
            self.assertAlmostEqual(term / math.log(3.0) ** 2, 1.0, places=9)
        self.assertEqual(report.trend, "diverging")

    def test_explicit_log_space(self):
        base = RateFunction.polylog(1.0, 2)
        psi = ApproxProfile((ProfileCoordinate.rate_power(base, 0.5), ProfileCoordinate.rate_power(base, 0.5)))
        report = series_partial_sums("thm13", 40, psi, M=3.0, n=2, log_space=True)
        self.assertTrue(report.log_space)
        for log_term in report.terms:
            self.assertAlmostEqual(math.exp(log_term) / math.log(3.0) ** 2, 1.0, places=9)

    def test_log_and_direct_agree(self):
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 2.0),))
        v = RateFunction.power(1.0, 1.0)
        sched = make_schedule("geometric", 20, M=2)
        direct = series_partial_sums("khintchine", 20, psi, v=v, sched=sched, log_space=False)
        logged = series_partial_sums("khintchine", 20, psi, v=v, sched=sched, log_space=True)
        for a, b in zip(direct.partial_sums, logged.partial_sums):
            self.assertLessEqual(abs(math.exp(b) - a) / a, 1e-9)

    def test_direct_overflow(self):
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 0.4),))
        with self.assertRaises(HorizonError):
            series_partial_sums("thm12", 10, psi, M=2.0, log_space=False)
        self.assertTrue(series_partial_sums("thm12", 10, psi, M=2.0).log_space)

    def test_bosh_chaika_harmonic(self):
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 1.0),))
        report = series_partial_sums("bosh_chaika", 1000, psi)
        self.assertEqual(report.trend, "diverging")
        self.assertAlmostEqual(report.partial_sums[-1], sum(1.0 / j for j in range(1, 1001)), places=9)

    def test_bosh_chaika_square_is_not_diverging(self):
        """Test sum j^-2 keeps terms above the floor but is not labelled diverging."""
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 2.0),))
        report = series_partial_sums("bosh_chaika", 1000, psi)
        self.assertEqual(report.trend, "inconclusive")

    def test_kw_criterion_needs_rho(self):
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 1.0),))
        with self.assertRaises(ParameterError):
            series_partial_sums("kw", 3, psi, sched=make_schedule("geometric", 3, M=2))

    def test_unknown_criterion(self):
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 1.0),))
        with self.assertRaises(ParameterError):
            series_partial_sums("borel", 3, psi)

    def test_short_series_is_inconclusive(self):
        self.assertEqual(classify_trend(np.log(np.array([1e-8, 1e-9]))), "inconclusive")


class TestHypothesisChecks(unittest.TestCase):
    def test_domination_holds_at_the_bound(self):
        v = RateFunction.polylog(2.0, 1)
        psi = ApproxProfile((ProfileCoordinate.rate_power(v, 0.4), ProfileCoordinate.rate_power(v, 0.6)))
        report = check_profile_domination(psi, v, (0.4, 0.6), range(1, 1001))
        self.assertTrue(report.holds)
        self.assertEqual(report.first_violation, [None, None])

    def test_domination_first_violation(self):
        psi = ApproxProfile((ProfileCoordinate.power(2.0, 1.0),))
        report = check_profile_domination(psi, RateFunction.power(1.0, 1.0), (1.0,), range(1, 101))
        self.assertFalse(report.holds)
        self.assertEqual(report.first_violation, [1])

    def test_domination_on_explicit_indices(self):
        psi = ApproxProfile((ProfileCoordinate.power(1.0, 1.0),))
        report = check_profile_domination(psi, RateFunction.power(1.0, 0.5), (1.0,), [4, 9, 16])
        self.assertTrue(report.holds)

    def test_two_indices_are_not_a_range(self):
        """Test a pair of explicit indices skips the violations between them."""
        psi = ApproxProfile((ProfileCoordinate.table([(1, 0.5), (9, 0.01)]),))
        v = RateFunction.table([(1, 1.0), (5, 0.1), (9, 0.05)])
        self.assertTrue(check_profile_domination(psi, v, (1.0,), (4, 9)).holds)
        report = check_profile_domination(psi, v, (1.0,), range(4, 10))
        self.assertFalse(report.holds)
        self.assertEqual(report.first_violation, [5])

    def test_kw_hypotheses(self):
        v = RateFunction.power(1.0, 1.0)
        rho = RhoProfile(v, (0.5, 0.5))
        sched = make_schedule("geometric", 10, M=2)
        psi = ApproxProfile.uniform(ProfileCoordinate.power(0.5, 0.5), 2)
        report = check_kw_hypotheses(psi, rho, sched, 0.8)
        self.assertTrue(report.decreasing)
        self.assertTrue(report.dominated)
        self.assertTrue(report.rho_regular)
        self.assertTrue(report.psi_regular)
        self.assertTrue(report.holds)

    def test_kw_regularity_is_either_or(self):
        rho = RhoProfile(RateFunction.power(1.0, 1.0), (0.5, 0.5))
        sched = make_schedule("geometric", 10, M=2)
        psi = ApproxProfile.uniform(ProfileCoordinate.constant(1e-6), 2)
        report = check_kw_hypotheses(psi, rho, sched, 0.8)
        self.assertFalse(report.psi_regular)
        self.assertTrue(report.holds)

    def test_kw_dimension_mismatch(self):
        rho = RhoProfile(RateFunction.power(1.0, 1.0), (1.0,))
        psi = ApproxProfile.uniform(ProfileCoordinate.constant(0.1), 2)
        with self.assertRaises(ParameterError):
            check_kw_hypotheses(psi, rho, make_schedule("geometric", 3, M=2), 0.5)

    def test_seq_of_points_is_accepted(self):
        seq = PointList(np.array([[0.2], [0.8]]))
        psi = ApproxProfile.uniform(ProfileCoordinate.constant(0.1), 1)
        self.assertEqual(hit_indices((0.25,), seq, Window(1, 2), psi), [1])


if __name__ == "__main__":
    unittest.main()
