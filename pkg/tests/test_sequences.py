import os
import tempfile
import unittest
from fractions import Fraction

import numpy as np

from udsapprox.exceptions import (
    CoordinateRangeError,
    DimensionMismatchError,
    IndexRangeError,
    ParameterError,
    SequenceParseError,
)
from udsapprox.sequences import (
    GeneratorSpec,
    PointList,
    gen_iid_uniform,
    gen_kronecker,
    gen_radical_inverse,
    load_sequence,
    write_sequence,
)

GOLDEN = (5**0.5 - 1) / 2


class TestKronecker(unittest.TestCase):
    def test_dyadic_rotation(self):
        """Test alpha = 1/2 alternates between 0.5 and 0."""
        seq = gen_kronecker([0.5], 3)
        self.assertEqual(seq.coords[:, 0].tolist(), [0.5, 0.0, 0.5])

    def test_golden_ratio(self):
        seq = gen_kronecker([GOLDEN], 2)
        self.assertAlmostEqual(seq.point(1)[0], 0.6180339887, places=10)
        self.assertAlmostEqual(seq.point(2)[0], 0.2360679775, places=10)

    def test_two_dimensional_dyadic(self):
        seq = gen_kronecker([0.5, 0.25], 2)
        self.assertEqual(seq.point(1), (0.5, 0.25))
        self.assertEqual(seq.point(2), (0.0, 0.5))

    def test_alpha_outside_unit_interval(self):
        with self.assertRaises(ParameterError):
            gen_kronecker([1.0], 3)
        with self.assertRaises(ParameterError):
            gen_kronecker([0.0], 3)

    def test_additivity_for_dyadic_alpha(self):
        """Test {(j+k)a} = {{ja} + {ka}} exactly when a is dyadic."""
        a = 0.375
        seq = gen_kronecker([a], 64)
        x = seq.coords[:, 0]
        for j in range(1, 32):
            for k in range(1, 32):
                self.assertEqual(x[j + k - 1], (x[j - 1] + x[k - 1]) % 1.0)

    def test_accumulated_error_below_tolerance(self):
        """Test fractional parts against exact rational arithmetic up to N = 10^7."""
        N = 10**7
        seq = gen_kronecker([GOLDEN], N)
        alpha = Fraction(GOLDEN)
        for j in (1, 17, 12345, 999999, 4321987, N):
            exact = float((j * alpha) % 1)
            self.assertLess(abs(seq.point(j)[0] - exact), 1e-12)


class TestRadicalInverse(unittest.TestCase):
    def test_van_der_corput(self):
        seq = gen_radical_inverse([2], 4)
        self.assertEqual(seq.coords[:, 0].tolist(), [0.5, 0.25, 0.75, 0.125])

    def test_halton_first_point(self):
        seq = gen_radical_inverse([2, 3], 1)
        self.assertEqual(seq.point(1)[0], 0.5)
        self.assertAlmostEqual(seq.point(1)[1], 1.0 / 3.0, places=15)

    def test_bases_not_coprime(self):
        with self.assertRaises(ParameterError):
            gen_radical_inverse([2, 4], 10)

    def test_base_below_two(self):
        with self.assertRaises(ParameterError):
            gen_radical_inverse([1], 10)

    def test_dyadic_prefix_gap(self):
        """Test points 1..2^m - 1 are the nonzero multiples of 2^-m and point 2^m is 2^-(m+1)."""
        m = 10
        coords = gen_radical_inverse([2], 2**m).coords[:, 0]
        head = np.sort(coords[: 2**m - 1])
        np.testing.assert_array_equal(head, np.arange(1, 2**m) / 2.0**m)
        self.assertEqual(np.diff(head).min(), 2.0**-m)
        self.assertEqual(coords[2**m - 1], 2.0 ** -(m + 1))
        self.assertEqual(len(np.unique(coords)), 2**m)


class TestIidUniform(unittest.TestCase):
    def test_deterministic(self):
        a = gen_iid_uniform(1, 1, 3)
        b = gen_iid_uniform(1, 1, 3)
        np.testing.assert_array_equal(a.coords, b.coords)

    def test_seed_sensitivity(self):
        a = gen_iid_uniform(1, 1, 100)
        b = gen_iid_uniform(2, 1, 100)
        self.assertFalse(np.array_equal(a.coords, b.coords))

    def test_coordinate_means(self):
        seq = gen_iid_uniform(7, 2, 10**4)
        for mean in seq.coords.mean(axis=0):
            self.assertLess(abs(mean - 0.5), 0.02)

    def test_range(self):
        seq = gen_iid_uniform(11, 3, 5000)
        self.assertTrue(np.all((seq.coords >= 0.0) & (seq.coords < 1.0)))


class TestPointList(unittest.TestCase):
    def test_immutable(self):
        seq = PointList(np.array([[0.1], [0.2]]))
        with self.assertRaises(ValueError):
            seq.coords[0, 0] = 0.3

    def test_one_based_indexing(self):
        seq = PointList(np.array([[0.1], [0.2], [0.3]]))
        self.assertEqual(seq.point(1), (0.1,))
        self.assertEqual(seq.point(3), (0.3,))
        with self.assertRaises(IndexRangeError):
            seq.point(0)
        with self.assertRaises(IndexRangeError):
            seq.prefix(4)
        self.assertEqual(seq.window(2, 3)[:, 0].tolist(), [0.2, 0.3])

    def test_rejects_coordinate_one(self):
        with self.assertRaises(CoordinateRangeError):
            PointList(np.array([[1.0]]))


class TestLoadSequence(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, text: str) -> str:
        path = os.path.join(self.tmp.name, "seq.txt")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_load_one_dimensional(self):
        seq = load_sequence(self._write("0.5\n0.25\n"))
        self.assertEqual(seq.dim, 1)
        self.assertEqual(seq.coords[:, 0].tolist(), [0.5, 0.25])

    def test_comments_and_blank_lines(self):
        seq = load_sequence(self._write("# header\n\n0.5 0.125\n\n0.25 0.75\n"))
        self.assertEqual(len(seq), 2)
        self.assertEqual(seq.dim, 2)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError) as ctx:
            load_sequence(self._write("0.5 0.5\n0.1\n"))
        self.assertEqual(ctx.exception.line, 2)

    def test_range_error(self):
        with self.assertRaises(CoordinateRangeError):
            load_sequence(self._write("1.0\n"))

    def test_malformed_line(self):
        with self.assertRaises(SequenceParseError) as ctx:
            load_sequence(self._write("0.5\nabc\n"))
        self.assertEqual(ctx.exception.line, 2)
        self.assertIn("line 2", str(ctx.exception))

    def test_invalid_utf8(self):
        """Test undecodable bytes are reported as a parse error on their line."""
        path = os.path.join(self.tmp.name, "bad.txt")
        with open(path, "wb") as f:
            f.write(b"0.5\n0.\xff5\n")
        with self.assertRaises(SequenceParseError) as ctx:
            load_sequence(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_separators_must_be_single_spaces(self):
        for text in ("0.5\t0.25\n", "0.5  0.25\n", " 0.5 0.25\n"):
            with self.assertRaises(SequenceParseError) as ctx:
                load_sequence(self._write(text))
            self.assertEqual(ctx.exception.line, 1)

    def test_python_only_literals_rejected(self):
        for token in ("1_0e-1", "nan", "inf", "0x1p-1"):
            with self.assertRaises(SequenceParseError):
                load_sequence(self._write(f"0.5\n{token}\n"))

    def test_exponent_and_negative_literals(self):
        seq = load_sequence(self._write("7.62939453125e-06\n.5\n"))
        self.assertEqual(seq.coords[:, 0].tolist(), [7.62939453125e-06, 0.5])
        with self.assertRaises(CoordinateRangeError):
            load_sequence(self._write("-0.1\n"))

    def test_written_sequence_loads_back(self):
        seq = gen_radical_inverse([2, 3], 50)
        path = write_sequence(os.path.join(self.tmp.name, "halton.txt"), seq)
        np.testing.assert_array_equal(load_sequence(path).coords, seq.coords)


class TestGeneratorSpec(unittest.TestCase):
    def test_generate_matches_direct_call(self):
        spec = GeneratorSpec(kind="kronecker", count=10, alpha=(GOLDEN,))
        np.testing.assert_array_equal(spec.generate().coords, gen_kronecker([GOLDEN], 10).coords)

    def test_missing_parameters(self):
        with self.assertRaises(ParameterError):
            GeneratorSpec(kind="kronecker", count=10)
        with self.assertRaises(ParameterError):
            GeneratorSpec(kind="iid_uniform", count=10, seed=1)
        with self.assertRaises(ParameterError):
            GeneratorSpec(kind="sobol", count=10)

    def test_count_must_be_positive(self):
        with self.assertRaises(ParameterError):
            GeneratorSpec(kind="radical_inverse", count=0, bases=(2,))


if __name__ == "__main__":
    unittest.main()
