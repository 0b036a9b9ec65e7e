import pytest
from fractions import Fraction

from counting import (
    METHOD_MULTIPLICATIVE, METHOD_NAIVE, METHOD_SLICED, BudgetExceeded, UnsupportedShift,
    WindowIncomplete, ZeroNorm, check_window, count, count_multiplicative, count_naive, count_sliced,
    lattice_signature, multiplier_matrix, norm_multiplier, remainder_multiplicative, remainder_shifted,
)
from domains import AnisoMap, Ball, Box
from lattice_core import Lattice
from splitter import SubspaceSpec, slice_window, split


class TestStripCount:
    """Tests for the strip (-1/2, 3/2) x (0, 1) stretched along y"""

    def setup_method(self):
        self.lattice = Lattice.standard(2)
        self.axis = SubspaceSpec.axes(2, [0])
        self.strip = Box([Fraction(1, 2), Fraction(1, 2)], [1, Fraction(1, 2)])
        self.eps = Fraction(1, 10)

    def test_sliced(self):
        """Test x in {0, 1}, y in 1..9 with y = 0, 10 decided outside"""
        result = count_sliced(split(self.lattice, self.axis), self.strip, self.eps)
        assert result.interval == (18, 18)
        assert result.method == METHOD_SLICED
        assert result.parameter == "1/10"

    def test_naive(self):
        result = count_naive(self.lattice, self.strip, AnisoMap(self.axis, self.eps))
        assert (result.certain, result.boundary_hits) == (18, 0)
        assert result.method == METHOD_NAIVE

    def test_methods_agree(self):
        """Test naive and sliced counts agree over several eps"""
        sd = split(self.lattice, self.axis)
        for k in range(0, 4):
            eps = Fraction(1, 2 ** k)
            naive = count_naive(self.lattice, self.strip, AnisoMap(self.axis, eps))
            sliced = count_sliced(sd, self.strip, eps)
            assert naive.interval == sliced.interval

    def test_workers_do_not_change_count(self):
        result = count_naive(self.lattice, self.strip, AnisoMap(self.axis, self.eps), workers=4)
        assert result.certain == 18

    def test_float_eps_reports_boundary(self):
        """Test an inexact eps leaves the y = 0 rows as boundary hits"""
        result = count_sliced(split(self.lattice, self.axis), self.strip, 0.1)
        assert result.certain == 18
        assert result.boundary_hits >= 2

    def test_record_points(self):
        """Test y = 1 is the only row when eps = 1/2"""
        result = count_naive(self.lattice, self.strip, AnisoMap(self.axis, Fraction(1, 2)), record=10)
        assert sorted(result.enumerated_points) == [(0, 1), (1, 1)]

    def test_shift_routes_to_naive(self):
        """Test a shifted count only sees x = 1"""
        result = count(self.lattice, self.axis, self.strip, self.eps, v=[Fraction(1, 2), 0])
        assert result.method == METHOD_NAIVE
        assert result.interval == (9, 9)

    def test_sliced_refuses_shift(self):
        with pytest.raises(UnsupportedShift):
            count_sliced(split(self.lattice, self.axis), self.strip, self.eps, v=[1, 0])

    def test_zero_shift_is_sliced(self):
        result = count(self.lattice, self.axis, self.strip, self.eps, v=[0, 0])
        assert result.method == METHOD_SLICED

    def test_budget(self):
        """Test a tiny budget is refused before enumeration"""
        with pytest.raises(BudgetExceeded):
            count_naive(self.lattice, self.strip, AnisoMap(self.axis, self.eps), budget=5)

    def test_remainder_shifted(self):
        """Test the shifted remainder subtracts eps^-1 vol(S) = 20"""
        rem = remainder_shifted(self.lattice, self.axis, self.strip, self.eps, v=[Fraction(1, 2), 0])
        assert rem.leading == pytest.approx(20.0)
        assert rem.lo == pytest.approx(-11.0)


class TestIrrationalCount:
    """Tests for counts against an irrational direction"""

    def test_disk_methods_agree(self, z2, sqrt2):
        """Test naive and sliced counts for the unit disk along span(1, sqrt2)"""
        subspace = SubspaceSpec([[1, sqrt2]])
        disk = Ball([0, 0], radius=1)
        sd = split(z2, subspace)
        for eps in (Fraction(1, 4), Fraction(1, 16)):
            naive = count_naive(z2, disk, AnisoMap(subspace, eps))
            sliced = count_sliced(sd, disk, eps)
            assert naive.interval == sliced.interval

    def test_slope_two(self, z2):
        """Test the rational slope-2 line with a radius-3 disk"""
        subspace = SubspaceSpec([[1, 2]])
        disk = Ball([0, 0], radius=3)
        sd = split(z2, subspace)
        eps = Fraction(1, 8)
        assert count_naive(z2, disk, AnisoMap(subspace, eps)).interval == count_sliced(sd, disk, eps).interval


class TestWindowCheck:
    """Tests for slice window completeness"""

    def setup_method(self):
        self.lattice = Lattice.standard(3)
        self.sd = split(self.lattice, SubspaceSpec.axes(3, [0, 1]))
        self.ball = Ball([0, 0, 0], radius=1)

    def test_full_window_passes(self):
        """Test the window for the unit ball holds the five slices meeting it"""
        window = slice_window(self.sd, [0, 0, 0], 1.0)
        assert sorted(m for m, _ in window) == [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]
        check_window(self.sd, self.ball, window, budget=10 ** 6)

    def test_short_window_fails(self):
        """Test a window built from too small a radius misses slices the domain meets"""
        window = slice_window(self.sd, [0, 0, 0], 0.5)
        assert [m for m, _ in window] == [(0, 0)]
        with pytest.raises(WindowIncomplete):
            check_window(self.sd, self.ball, window, budget=10 ** 6)

    def test_cube_needs_corner_slices(self):
        """Test the unit ball window is incomplete for the cube, whose projection holds (1, 1)"""
        window = slice_window(self.sd, [0, 0, 0], 1.0)
        with pytest.raises(WindowIncomplete) as e:
            check_window(self.sd, Box([0, 0, 0], [1, 1, 1]), window, budget=10 ** 6)
        assert abs(e.value.coefficients[0]) == abs(e.value.coefficients[1]) == 1


class TestMultiplicative:
    """Tests for counts in T.S"""

    def test_signature_of_plain_lattice(self, z2):
        assert lattice_signature(z2) == (2, 0)

    def test_diagonal_multiplier(self, z2):
        """Test T = (2, 1/2) on the open unit square keeps x in -1..1, y = 0"""
        square = Box([0, 0], [1, 1])
        result = count_multiplicative(z2, [2, Fraction(1, 2)], square)
        assert result.interval == (3, 3)
        assert result.method == METHOD_MULTIPLICATIVE

    def test_remainder(self, z2):
        rem = remainder_multiplicative(z2, [2, Fraction(1, 2)], Box([0, 0], [1, 1]))
        assert rem.leading == pytest.approx(4.0)
        assert rem.lo == pytest.approx(-1.0)

    def test_zero_norm(self, z2):
        with pytest.raises(ZeroNorm):
            count_multiplicative(z2, [0, 1], Box([0, 0], [1, 1]))

    def test_norm_sign(self):
        assert norm_multiplier([-2, 3], 2, 0) == pytest.approx(-6.0)

    def test_complex_block(self):
        """Test a complex entry becomes a rotation-scaling block"""
        matrix = multiplier_matrix([2, [0, 1]], 1, 1)
        assert matrix.tolist() == [[2.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]
        assert norm_multiplier([2, [0, 1]], 1, 1) == pytest.approx(2.0)

    def test_cbrt2_unit(self):
        """Test counting with the identity multiplier equals a plain count"""
        from numberfield import preset_lattice
        lattice = preset_lattice("Z[cbrt2]").embedded
        ball = Ball([0, 0, 0], radius=2)
        result = count_multiplicative(lattice, [1, [1, 0]], ball)
        # 0, the units +-1 and +-cbrt2 all lie inside.
        assert result.certain >= 5
        assert result.certain % 2 == 1
