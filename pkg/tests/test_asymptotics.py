import pytest
import math
from fractions import Fraction

from asymptotics import (
    REGIME_ALGEBRAIC_PRODUCT, REGIME_BOX_ADMISSIBLE, REGIME_FIBER_STRICTLY_CONVEX,
    REGIME_SLICE_STRICTLY_CONVEX, REGIME_SMOOTH_SLICES, BoundDescriptor,
    InconsistentParameters, RegimeClass, ScanRow, TooFewUsableRows, eps_ladder, fit_rows,
    leading_term, predicted_exponent, predicted_multiplicative_bound,
    predicted_totally_real_bound, remainder, scan_and_fit, slice_sum,
)
from counting import count_sliced
from domains import Ball, Box
from splitter import SubspaceSpec, split


def synthetic_rows(beta, constant=3.0, ks=range(2, 10)):
    rows = []
    for k in ks:
        eps = 2.0 ** -k
        magnitude = constant * eps ** (-beta)
        rows.append(ScanRow(epsilon=eps, count_lo=0, count_hi=0, leading=0.0,
                            rem_lo=magnitude, rem_hi=magnitude))
    return rows


class TestPredictedExponent:
    """Tests for regime exponents"""

    def test_smooth_slices(self):
        """Test 1/(p - r + 1) - q"""
        regime = RegimeClass(REGIME_SMOOTH_SLICES, n=2, p=1, q=1, r=1)
        assert predicted_exponent(regime).power == pytest.approx(0.0)
        regime = RegimeClass(REGIME_SMOOTH_SLICES, n=3, p=2, q=1, r=0)
        assert predicted_exponent(regime).power == pytest.approx(-2 / 3)

    def test_slice_strictly_convex(self):
        """Test 2q/(n - r + 1) - q for the irrational disk"""
        regime = RegimeClass(REGIME_SLICE_STRICTLY_CONVEX, n=2, p=1, q=1, r=0)
        assert predicted_exponent(regime).power == pytest.approx(-1 / 3)

    def test_fiber_strictly_convex(self):
        regime = RegimeClass(REGIME_FIBER_STRICTLY_CONVEX, n=3, p=1, q=2, r=0)
        assert predicted_exponent(regime).power == pytest.approx(4 / 5 - 2)

    def test_box_admissible(self):
        """Test the log-only bound of degree n - r - 1"""
        bound = predicted_exponent(RegimeClass(REGIME_BOX_ADMISSIBLE, n=2, p=1, q=1, r=0))
        assert bound == BoundDescriptor(log_degree=1)
        assert bound.kind == "log"

    def test_algebraic_product(self):
        """Test the power-log bound with m = n - r - ell"""
        regime = RegimeClass(REGIME_ALGEBRAIC_PRODUCT, n=3, p=1, q=2, r=0, ell=1, s=1, t=1)
        bound = predicted_exponent(regime)
        assert bound.power == pytest.approx(-2 * 2 / 4)
        assert bound.log_degree == pytest.approx(2.1)
        assert bound.kind == "power_log"

    def test_algebraic_product_needs_signature(self):
        with pytest.raises(InconsistentParameters):
            predicted_exponent(RegimeClass(REGIME_ALGEBRAIC_PRODUCT, n=2, p=1, q=1, r=0, ell=1))

    def test_inconsistent_dims(self):
        with pytest.raises(InconsistentParameters):
            predicted_exponent(RegimeClass(REGIME_SMOOTH_SLICES, n=3, p=1, q=1, r=0))

    def test_unknown_regime(self):
        with pytest.raises(InconsistentParameters):
            predicted_exponent(RegimeClass("wiggly", n=2, p=1, q=1, r=0))

    def test_multiplicative_bound(self):
        bound = predicted_multiplicative_bound(n=2, ell=1, s=2, t=0)
        assert bound.power == pytest.approx(1 / 3)
        assert bound.log_degree == pytest.approx(2.1)

    def test_totally_real_bound(self):
        assert predicted_totally_real_bound(n=2, r=0).log_degree == pytest.approx(2.1)
        with pytest.raises(InconsistentParameters):
            predicted_totally_real_bound(n=2, r=3)


class TestLeadingTerm:
    """Tests for slice sums and leading terms"""

    def setup_method(self):
        self.strip = Box([Fraction(1, 2), Fraction(1, 2)], [1, Fraction(1, 2)])

    def test_strip(self, z2):
        """Test two unit slices give eps^-1 * 2"""
        sd = split(z2, SubspaceSpec.axes(2, [0]))
        total, stderr = slice_sum(sd, self.strip)
        assert total == pytest.approx(2.0)
        assert stderr == 0.0
        assert leading_term(sd, self.strip, Fraction(1, 10)) == pytest.approx(20.0)

    def test_remainder(self, z2):
        sd = split(z2, SubspaceSpec.axes(2, [0]))
        eps = Fraction(1, 10)
        lo, hi = remainder(sd, self.strip, eps, count_sliced(sd, self.strip, eps))
        assert lo == pytest.approx(-2.0)
        assert hi == pytest.approx(-2.0)

    def test_trivial_f_part_is_volume(self, z2, sqrt2):
        """Test r = 0 reduces the leading term to eps^-q vol(S)"""
        sd = split(z2, SubspaceSpec([[1, sqrt2]]))
        disk = Ball([0, 0], radius=1)
        assert leading_term(sd, disk, Fraction(1, 4)) == pytest.approx(4 * math.pi)

    def test_slope_two_chords(self, z2):
        """Test chord lengths over the dual slices of span(1, 2)"""
        sd = split(z2, SubspaceSpec([[1, 2]]))
        disk = Ball([0, 0], radius=3)
        total, _ = slice_sum(sd, disk)
        # Slices sit at distance |m| / sqrt5 from the origin.
        expected = sum(2 * math.sqrt(9 - m * m / 5) for m in range(-6, 7))
        assert total == pytest.approx(expected, rel=1e-12)

    def test_non_positive_eps(self, z2):
        sd = split(z2, SubspaceSpec.axes(2, [0]))
        with pytest.raises(InconsistentParameters):
            leading_term(sd, self.strip, 0)


class TestFitRows:
    """Tests for the remainder fit"""

    def test_recovers_exponent(self):
        """Test an exact power law is fitted exactly"""
        report = fit_rows(synthetic_rows(0.5), BoundDescriptor(power=-1 / 3))
        assert report.beta == pytest.approx(-0.5)
        assert report.C == pytest.approx(3.0)
        assert report.r2 == pytest.approx(1.0)
        assert not report.verdict

    def test_passes_within_bound(self):
        report = fit_rows(synthetic_rows(0.2), BoundDescriptor(power=-1 / 3))
        assert report.verdict

    def test_order_invariant(self):
        """Test shuffled rows give the same fit"""
        rows = synthetic_rows(0.3)
        assert fit_rows(rows[::-1], BoundDescriptor(power=0.0)).beta == pytest.approx(
            fit_rows(rows, BoundDescriptor(power=0.0)).beta
        )

    def test_excludes_small_remainders(self):
        """Test rows whose interval straddles |R| < 0.5 are dropped"""
        rows = synthetic_rows(0.0, constant=2.0)
        rows.append(ScanRow(epsilon=2.0 ** -12, count_lo=0, count_hi=1, leading=0.5,
                            rem_lo=-0.5, rem_hi=0.5))
        report = fit_rows(rows, BoundDescriptor(power=0.0))
        assert report.excluded_rows == 1
        assert report.used_rows == 8

    def test_too_few_rows(self):
        with pytest.raises(TooFewUsableRows):
            fit_rows(synthetic_rows(0.0, ks=range(2, 5)), BoundDescriptor(power=0.0))

    def test_log_bound_constant(self):
        """Test the log-only bound reports a constant and compares against zero"""
        report = fit_rows(synthetic_rows(0.0), BoundDescriptor(log_degree=1))
        assert report.verdict
        assert report.log_constant == pytest.approx(3.0 / 3.0)


class TestScanAndFit:
    """Tests for full remainder scans"""

    def test_strip_scan(self, z2):
        """Test the strip remainder stays at -2 with beta = 0"""
        sd = split(z2, SubspaceSpec.axes(2, [0]))
        strip = Box([Fraction(1, 2), Fraction(1, 2)], [1, Fraction(1, 2)])
        regime = RegimeClass.from_split(sd, REGIME_SMOOTH_SLICES)
        scan = scan_and_fit(sd, strip, eps_ladder(10, 1, 5), regime)
        assert [row.rem_lo for row in scan.rows] == pytest.approx([-2.0] * 5)
        assert scan.fit.beta == pytest.approx(0.0, abs=1e-9)
        assert scan.fit.verdict

    def test_dims_must_match(self, z2):
        sd = split(z2, SubspaceSpec.axes(2, [0]))
        regime = RegimeClass(REGIME_SMOOTH_SLICES, n=2, p=1, q=1, r=0)
        with pytest.raises(InconsistentParameters):
            scan_and_fit(sd, Ball([0, 0], radius=1), [Fraction(1, 2)], regime)

    def test_duplicate_eps(self, z2):
        sd = split(z2, SubspaceSpec.axes(2, [0]))
        regime = RegimeClass.from_split(sd, REGIME_SMOOTH_SLICES)
        with pytest.raises(InconsistentParameters):
            scan_and_fit(sd, Ball([0, 0], radius=1), [Fraction(1, 2), Fraction(2, 4)], regime)


class TestEpsLadder:
    def test_exact_ladder(self):
        assert eps_ladder(2, 1, 3) == [Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)]

    def test_float_ladder(self):
        assert eps_ladder(2.0, 0, 1) == [1.0, 0.5]
