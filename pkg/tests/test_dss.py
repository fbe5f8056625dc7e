import math
import unittest

import numpy as np

from udsapprox.dss import (
    RateFunction,
    Schedule,
    candidate_mesh,
    check_c_regular,
    check_dss,
    make_schedule,
    propose_schedule,
    verdict_of,
)
from udsapprox.exceptions import EmptyScheduleError, HorizonError, IndexRangeError, ParameterError
from udsapprox.reports import DssRecord
from udsapprox.sequences import gen_iid_uniform, gen_radical_inverse


class TestSchedule(unittest.TestCase):
    def test_square_exp(self):
        self.assertEqual(make_schedule("square_exp", 3, M=2).indices, (2, 16, 512))

    def test_triple_exp(self):
        self.assertEqual(make_schedule("triple_exp", 3, M=2).indices, (8, 512, 134217728))

    def test_geometric(self):
        self.assertEqual(make_schedule("geometric", 4, M=3).indices, (3, 9, 27, 81))

    def test_explicit_must_increase(self):
        with self.assertRaises(ParameterError):
            make_schedule("explicit", indices=[5, 3, 9])
        self.assertEqual(make_schedule("explicit", indices=[1, 4, 9]).indices, (1, 4, 9))

    def test_overflow_names_max_horizon(self):
        with self.assertRaisesRegex(HorizonError, "max feasible J is 7"):
            make_schedule("square_exp", 8, M=2)
        with self.assertRaisesRegex(HorizonError, "max feasible J is 3"):
            make_schedule("triple_exp", 4, M=2)

    def test_invalid_base(self):
        with self.assertRaises(ParameterError):
            make_schedule("geometric", 3, M=1.0)

    def test_blocks(self):
        sched = Schedule((2, 4, 8))
        self.assertEqual(sched.blocks(), [(0, 2), (2, 4), (4, 8)])
        self.assertEqual(sched.N(0), 0)
        with self.assertRaises(IndexRangeError):
            sched.block(4)
        with self.assertRaises(IndexRangeError):
            sched.block(0)


class TestRateFunction(unittest.TestCase):
    def test_polylog(self):
        v = RateFunction.polylog(4, 1)
        self.assertAlmostEqual(v(16), 4 * math.log(16) / 16, places=14)

    def test_kiefer_domain(self):
        with self.assertRaises(ParameterError):
            RateFunction.kiefer(0.5)(2)
        self.assertGreater(RateFunction.kiefer(0.5)(100), 0.0)

    def test_log_value_beyond_float_range(self):
        v = RateFunction.polylog(1, 2)
        log_N = 200 * math.log(2.0)
        self.assertTrue(math.isfinite(v.log_value(log_N)))
        self.assertAlmostEqual(v.log_value(log_N), 2 * math.log(log_N) - log_N, places=10)

    def test_table_is_step_function(self):
        v = RateFunction.table([(1, 0.5), (10, 0.1)])
        self.assertAlmostEqual(v(1), 0.5, places=14)
        self.assertAlmostEqual(v(9), 0.5, places=14)
        self.assertAlmostEqual(v(10), 0.1, places=14)
        self.assertAlmostEqual(v(10**6), 0.1, places=14)

    def test_table_rejects_increasing_values(self):
        with self.assertRaises(ParameterError):
            RateFunction.table([(1, 0.1), (10, 0.5)])

    def test_constant_zero(self):
        self.assertEqual(RateFunction.constant(0.0)(5), 0.0)


class TestCheckDss(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.vdc = gen_radical_inverse([2], 2**16)

    def test_constant_rate_fails_on_lacunarity(self):
        report = check_dss(self.vdc, Schedule((2, 4, 8)), RateFunction.constant(1.0))
        self.assertTrue(all(r.passed for r in report.records))
        self.assertEqual(report.tail_sup, 4.0)
        self.assertEqual(report.lacunarity_max, 4.0)
        self.assertEqual(report.verdict, "fail")

    def test_van_der_corput_square_exp_passes(self):
        sched = make_schedule("square_exp", 4, M=2)
        report = check_dss(self.vdc, sched, RateFunction.polylog(4, 1))
        self.assertEqual(report.verdict, "pass")
        self.assertLess(report.tail_sup, 1.0)
        self.assertEqual([r.N for r in report.records], [2, 16, 512, 65536])

    def test_monotone_in_rate(self):
        sched = Schedule((4, 32, 256, 2048))
        low = check_dss(self.vdc, sched, RateFunction.constant(0.01))
        high = check_dss(self.vdc, sched, RateFunction.constant(0.5))
        for a, b in zip(low.records, high.records):
            self.assertTrue(b.passed or not a.passed)

    def test_singleton_schedule(self):
        report = check_dss(self.vdc, Schedule((16,)), RateFunction.polylog(4, 1))
        self.assertEqual(report.tail_sup, 0.0)
        self.assertEqual(report.verdict, "pass")

    def test_iid_triple_exp(self):
        seq = gen_iid_uniform(5, 1, 512)
        report = check_dss(seq, make_schedule("triple_exp", 2, M=2), RateFunction.kiefer(0.5))
        self.assertEqual(len(report.records), 2)
        self.assertIn(report.verdict, ("pass", "fail"))

    def test_star_bound_fallback(self):
        seq = gen_radical_inverse([2, 3], 200)
        report = check_dss(seq, Schedule((50, 200)), RateFunction.constant(0.9))
        self.assertEqual([r.kind for r in report.records], ["extreme", "star_bound"])
        self.assertTrue(report.records[1].passed)

    def test_guard_makes_verdict_inconclusive(self):
        seq = gen_radical_inverse([2, 3], 600)
        report = check_dss(seq, Schedule((600,)), RateFunction.constant(0.9))
        self.assertTrue(report.records[0].skipped)
        self.assertEqual(report.verdict, "inconclusive")

    def test_exact_failure_outranks_skipped_index(self):
        """Test a failed exact index gives fail even when a later index is skipped."""
        seq = gen_radical_inverse([2, 3], 600)
        report = check_dss(seq, Schedule((50, 600)), RateFunction.constant(0.01))
        self.assertFalse(report.records[0].passed)
        self.assertTrue(report.records[1].skipped)
        self.assertEqual(report.verdict, "fail")

    def test_verdict_rules(self):
        failed = DssRecord(i=1, N=4, discrepancy=0.5, v=0.1, passed=False)
        passed = DssRecord(i=1, N=4, discrepancy=0.05, v=0.1, passed=True)
        skipped = DssRecord(i=2, N=600, discrepancy=None, v=0.1, passed=False, skipped=True, kind="none")
        self.assertEqual(verdict_of([failed, skipped], 5.0), "fail")
        self.assertEqual(verdict_of([failed, skipped], 0.5), "fail")
        self.assertEqual(verdict_of([passed, skipped], 5.0), "fail")
        self.assertEqual(verdict_of([passed, skipped], 0.5), "inconclusive")
        self.assertEqual(verdict_of([passed], 0.5), "pass")

    def test_schedule_beyond_prefix(self):
        with self.assertRaises(IndexRangeError):
            check_dss(gen_radical_inverse([2], 10), Schedule((4, 16)), RateFunction.constant(1.0))

    def test_threads_do_not_change_records(self):
        sched = make_schedule("geometric", 12, M=2)
        v = RateFunction.polylog(4, 1)
        self.assertEqual(check_dss(self.vdc, sched, v, threads=1), check_dss(self.vdc, sched, v, threads=3))


class TestCRegularity(unittest.TestCase):
    def test_geometric_reciprocal(self):
        sched = make_schedule("geometric", 10, M=2)
        self.assertEqual(check_c_regular(lambda N: 1.0 / N, sched, 0.5).holds_from, 1)

    def test_scale_invariance(self):
        sched = make_schedule("geometric", 10, M=2)
        self.assertEqual(check_c_regular(lambda N: 7.0 / N, sched, 0.5).holds_from, 1)

    def test_reciprocal_log_not_regular(self):
        sched = make_schedule("geometric", 5, M=2)
        self.assertIsNone(check_c_regular(lambda N: 1.0 / math.log(N), sched, 0.5).holds_from)

    def test_square_exp_inverse_square(self):
        sched = make_schedule("square_exp", 4, M=2)
        self.assertEqual(check_c_regular(lambda N: float(N) ** -2, sched, 0.9).holds_from, 1)

    def test_eventual_regularity(self):
        values = {1: 1.0, 2: 0.9, 3: 0.3, 4: 0.1}
        report = check_c_regular(values.__getitem__, Schedule((1, 2, 3, 4)), 0.5)
        self.assertEqual(report.holds_from, 2)
        np.testing.assert_allclose(report.ratios, [0.9, 1 / 3, 1 / 3])

    def test_c_range(self):
        with self.assertRaises(ParameterError):
            check_c_regular(lambda N: 1.0 / N, Schedule((1, 2)), 1.0)


class TestProposeSchedule(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.vdc = gen_radical_inverse([2], 2**16)
        cls.v = RateFunction.polylog(4, 1)

    def test_proposal_passes_check(self):
        sched = propose_schedule(self.vdc, self.v, 0.1)
        self.assertGreater(len(sched), 0)
        self.assertEqual(check_dss(self.vdc, sched, self.v).verdict, "pass")

    def test_more_slack_fewer_indices(self):
        loose = propose_schedule(self.vdc, self.v, 0.1)
        tight = propose_schedule(self.vdc, self.v, 0.99)
        self.assertLess(len(tight), len(loose))

    def test_zero_rate(self):
        with self.assertRaises(EmptyScheduleError) as ctx:
            propose_schedule(self.vdc, RateFunction.constant(0.0), 0.5)
        self.assertIn("candidates_checked", ctx.exception.diagnostics)

    def test_candidate_mesh(self):
        mesh = candidate_mesh(100)
        self.assertEqual(mesh[0], 1)
        self.assertEqual(mesh, sorted(set(mesh)))
        self.assertLessEqual(mesh[-1], 100)


if __name__ == "__main__":
    unittest.main()
