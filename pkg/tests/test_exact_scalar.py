import pytest
import math
from fractions import Fraction

from exact_scalar import (
    DivisionByZero, EmbeddingOutOfRange, FieldElement, FieldMismatch,
    UnsupportedScalarKind, compare, determinant, format_scalar, inverse,
    is_exact, nullspace, parse_rational, rank, scalar_arith, scalar_to_json,
    sign, solve, to_complex, to_float,
)
from numberfield import PRESETS, analyze_field


class TestParseRational:
    """Tests for rational parsing"""

    def test_parse_string(self):
        """Test 'p/q' strings become canonical fractions"""
        assert parse_rational("6/8") == Fraction(3, 4)
        assert parse_rational(" -2/4 ") == Fraction(-1, 2)

    def test_parse_int(self):
        """Test integers are accepted"""
        assert parse_rational(7) == Fraction(7)

    def test_reject_float(self):
        """Test floats are not silently made exact"""
        with pytest.raises(UnsupportedScalarKind):
            parse_rational(0.5)

    def test_reject_bool(self):
        """Test booleans are rejected"""
        with pytest.raises(UnsupportedScalarKind):
            parse_rational(True)

    def test_reject_garbage(self):
        """Test unparseable strings raise"""
        with pytest.raises(UnsupportedScalarKind):
            parse_rational("one half")

    def test_is_exact(self):
        """Test the exactness predicate"""
        assert is_exact(Fraction(1, 3))
        assert is_exact(2)
        assert not is_exact(0.5)
        assert not is_exact(False)


class TestScalarArith:
    """Tests for rational and field arithmetic"""

    def setup_method(self):
        self.field = analyze_field(PRESETS["Z[sqrt2]"])
        self.root = FieldElement(self.field, [0, 1])

    def test_rational_ops(self):
        """Test the four operations on rationals"""
        assert scalar_arith("1/2", "1/3", "+") == Fraction(5, 6)
        assert scalar_arith("1/2", "1/3", "-") == Fraction(1, 6)
        assert scalar_arith("1/2", "1/3", "*") == Fraction(1, 6)
        assert scalar_arith("1/2", "1/3", "/") == Fraction(3, 2)

    def test_division_by_zero(self):
        """Test exact division by zero raises"""
        with pytest.raises(DivisionByZero):
            scalar_arith(1, 0, "/")
        with pytest.raises(DivisionByZero):
            scalar_arith(self.root, FieldElement(self.field, [0]), "/")

    def test_sqrt2_squared(self):
        """Test sqrt 2 squared reduces to the rational 2"""
        square = self.root * self.root
        assert square == 2
        assert square.is_rational()

    def test_inverse(self):
        """Test 1/sqrt2 = sqrt2/2"""
        assert self.root.inverse() == FieldElement(self.field, [0, Fraction(1, 2)])
        assert scalar_arith(1, self.root, "/") * self.root == 1

    def test_mixed_fields_raise(self):
        """Test combining elements of different fields raises"""
        other = FieldElement(analyze_field(PRESETS["Z[cbrt2]"]), [0, 1])
        with pytest.raises(FieldMismatch):
            scalar_arith(self.root, other, "+")

    def test_mixed_embeddings_raise(self):
        """Test combining readings through different embeddings raises"""
        with pytest.raises(FieldMismatch):
            self.root + self.root.with_embedding(1)

    def test_power(self):
        """Test integer powers including negative exponents"""
        assert self.root ** 4 == 4
        assert self.root ** -2 == Fraction(1, 2)


class TestToFloatAndCompare:
    """Tests for float conversion and exact comparison"""

    def setup_method(self):
        self.field = analyze_field(PRESETS["Z[sqrt2]"])
        self.root = FieldElement(self.field, [0, 1])

    def test_embeddings(self):
        """Test both real embeddings of sqrt 2"""
        assert to_float(self.root, 0) == pytest.approx(math.sqrt(2), abs=1e-15)
        assert to_float(self.root, 1) == pytest.approx(-math.sqrt(2), abs=1e-15)

    def test_embedding_out_of_range(self):
        """Test a missing embedding index raises"""
        with pytest.raises(EmbeddingOutOfRange):
            to_float(self.root, 2)

    def test_complex_embedding(self):
        """Test complex embeddings of the cube root of 2"""
        field = analyze_field(PRESETS["Z[cbrt2]"])
        theta = FieldElement(field, [0, 1])
        assert to_float(theta) == pytest.approx(2 ** (1 / 3), rel=1e-14)
        value = to_complex(theta, 1)
        assert abs(value) == pytest.approx(2 ** (1 / 3), rel=1e-12)
        assert value.imag > 0

    def test_compare_close_values(self):
        """Test 99/70 < sqrt2 < 577/408 is decided exactly"""
        assert compare(Fraction(99, 70), self.root) == -1
        assert compare(Fraction(577, 408), self.root) == 1
        assert compare(self.root, self.root) == 0

    def test_compare_tiny_difference(self):
        """Test a difference far below double precision still has a sign"""
        # 665857/470832 - sqrt2 is about 1.6e-12
        assert sign(Fraction(665857, 470832) - self.root) == 1

    def test_sign_under_conjugate(self):
        """Test sign depends on the embedding"""
        assert sign(self.root, 0) == 1
        assert sign(self.root, 1) == -1


class TestFormatting:
    """Tests for text and JSON forms"""

    def test_format_rational(self):
        assert format_scalar(Fraction(-3, 4)) == "-3/4"

    def test_format_field_element(self):
        """Test power-basis text form"""
        field = analyze_field(PRESETS["Z[sqrt2]"])
        assert format_scalar(FieldElement(field, [1, -2])) == "1 + -2*t"

    def test_scalar_to_json(self):
        """Test FieldElement JSON form"""
        field = analyze_field(PRESETS["Z[sqrt2]"])
        data = scalar_to_json(FieldElement(field, [Fraction(1, 2), 1], embedding=1))
        assert data == {"minpoly": [-2, 0, 1], "coords": ["1/2", "1"], "embedding": 1}


class TestExactLinearAlgebra:
    """Tests for exact Gaussian elimination"""

    def test_determinant(self):
        assert determinant([[1, 0], ["1/2", "1/2"]]) == Fraction(1, 2)
        assert determinant([[1, 2], [2, 4]]) == 0

    def test_inverse(self):
        """Test exact inverse of a rational matrix"""
        assert inverse([[2, 1], [1, 1]]) == [[1, -1], [-1, 2]]

    def test_rank_and_nullspace(self):
        """Test nullspace vectors are annihilated"""
        matrix = [[1, 2, 3], [2, 4, 6]]
        assert rank(matrix) == 1
        kernel = nullspace(matrix)
        assert len(kernel) == 2
        for vector in kernel:
            assert sum(a * b for a, b in zip(matrix[0], vector)) == 0

    def test_solve_over_field(self):
        """Test solving a system with sqrt 2 entries"""
        field = analyze_field(PRESETS["Z[sqrt2]"])
        root = FieldElement(field, [0, 1])
        x = solve([[1, 1], [root, -root]], [2, 0])
        assert x == [1, 1]
