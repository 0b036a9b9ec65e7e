import pytest
import math
import random
from fractions import Fraction

from exact_scalar import FieldElement
from numberfield import (
    BlocksNotSpanning, DependentGenerators, FrameMismatch, InvalidMinimalPolynomial,
    NonOrthonormalFrame, NotSquarefree, PRESETS, ReducibleDetected, STATUS_CERTIFIED,
    STATUS_INCONCLUSIVE, STATUS_REFUTED, analyze_field, canonical_embedding,
    decomposition_compatibility, embedding_blocks, field_norm, good_position_check,
    nm_e, norm_E, preset_lattice, product_of_vectors,
)


def random_element(rng, field, height):
    return FieldElement(field, [rng.randint(-height, height) for _ in range(field.degree)])


class TestAnalyzeField:
    """Tests for minimal polynomial validation"""

    def test_signatures(self):
        """Test signatures of the bundled presets"""
        assert analyze_field(PRESETS["Z[sqrt2]"]).signature == (2, 0)
        assert analyze_field(PRESETS["Z[cbrt2]"]).signature == (1, 1)
        assert analyze_field(PRESETS["Z[x]/(x^3-3x-1)"]).signature == (3, 0)

    def test_not_monic(self):
        with pytest.raises(InvalidMinimalPolynomial):
            analyze_field([-2, 0, 2])

    def test_not_squarefree(self):
        """Test x^2 - 2x + 1 is rejected"""
        with pytest.raises(NotSquarefree):
            analyze_field([1, -2, 1])

    def test_reducible(self):
        """Test x^2 - 1 is detected as reducible"""
        with pytest.raises(ReducibleDetected):
            analyze_field([-1, 0, 1])

    def test_real_roots_decreasing(self):
        """Test real embeddings are numbered by decreasing root"""
        field = analyze_field(PRESETS["Z[x]/(x^3-3x-1)"])
        roots = [float(field.root_value(i)) for i in range(3)]
        assert roots == sorted(roots, reverse=True)
        for root in roots:
            assert root ** 3 - 3 * root - 1 == pytest.approx(0, abs=1e-12)


class TestCanonicalEmbedding:
    """Tests for sigma(M)"""

    def test_sqrt2_rows(self, sqrt2_field, sqrt2):
        """Test sigma(Z[sqrt2]) = span{(1,1), (sqrt2,-sqrt2)}"""
        module = preset_lattice("Z[sqrt2]")
        assert module.embedded.exact
        assert [list(row) for row in module.embedded.basis] == [[1, 1], [sqrt2, -sqrt2]]

    def test_cbrt2_float_backed(self):
        """Test the cube-root field embeds with a flattened complex pair"""
        module = preset_lattice("Z[cbrt2]")
        lattice = module.embedded
        assert not lattice.exact
        assert lattice.dim == 3
        assert lattice.blocks == ((0,), (1, 2))
        # |disc(x^3 - 2)| = 108, and flattening C to R^2 halves the volume.
        assert lattice.covolume == pytest.approx(math.sqrt(108) / 2, rel=1e-12)

    def test_dependent_generators(self, sqrt2_field):
        with pytest.raises(DependentGenerators):
            canonical_embedding(sqrt2_field, [[1, 1], [2, 2]])

    def test_denominator(self, sqrt2_field):
        """Test the module denominator is the lcm of coordinate denominators"""
        module = canonical_embedding(sqrt2_field, [[1, 0], [Fraction(1, 2), Fraction(1, 2)]])
        assert module.denominator == 2

    def test_embedding_blocks(self):
        field = analyze_field(PRESETS["Z[cbrt2]"])
        assert embedding_blocks(field) == [(0,), (1, 2)]


class TestNorms:
    """Tests for the field norm and the norm form on R^s x C^t"""

    def test_field_norm_sqrt2(self, sqrt2_field):
        """Test N(3 + 2 sqrt2) = 1 and N(sqrt2) = -2"""
        assert field_norm(FieldElement(sqrt2_field, [3, 2])) == 1
        assert field_norm(FieldElement(sqrt2_field, [0, 1])) == -2
        assert field_norm(FieldElement(sqrt2_field, [0])) == 0

    def test_field_norm_cbrt2(self):
        """Test N(cbrt2) = 2"""
        field = analyze_field(PRESETS["Z[cbrt2]"])
        assert field_norm(FieldElement(field, [0, 1])) == 2

    @pytest.mark.parametrize("preset", ["Z[sqrt2]", "Z[cbrt2]"])
    def test_multiplicativity(self, preset):
        """Test |N(ab)| = |N(a)| |N(b)| exactly"""
        field = analyze_field(PRESETS[preset])
        rng = random.Random(3)
        for _ in range(50):
            a, b = random_element(rng, field, 20), random_element(rng, field, 20)
            assert abs(field_norm(a * b)) == abs(field_norm(a)) * abs(field_norm(b))

    @pytest.mark.parametrize("preset", ["Z[sqrt2]", "Z[cbrt2]"])
    def test_norm_E_matches_field_norm(self, preset):
        """Test Nm_E(sigma(xi)) = |N(xi)| for generator combinations"""
        module = preset_lattice(preset)
        s, t = module.signature
        rng = random.Random(5)
        for _ in range(30):
            coeffs = [rng.randint(-100, 100) for _ in range(module.field.degree)]
            if not any(coeffs):
                continue
            xi = module.element(coeffs)
            x = module.embedded.embed_float(coeffs)
            expected = abs(float(field_norm(xi)))
            assert norm_E(x, s, t) == pytest.approx(expected, rel=1e-10)

    def test_product_of_vectors(self):
        """Test componentwise product with one complex pair"""
        result = product_of_vectors([2.0, 1.0, 1.0], [3.0, 0.0, 1.0], 1, 1)
        assert result == pytest.approx([6.0, -1.0, 1.0])

    def test_nm_e(self):
        """Test prod (x, e_j) in a rotated frame"""
        c = 1 / math.sqrt(2)
        frame = [[c, c], [c, -c]]
        assert nm_e([1.0, 0.0], frame) == pytest.approx(0.5)

    def test_nm_e_rejects_skew_frame(self):
        with pytest.raises(NonOrthonormalFrame):
            nm_e([1.0, 0.0], [[1.0, 0.0], [1.0, 1.0]])


class TestGoodPosition:
    """Tests for good-position certificates and searches"""

    def test_certified_sqrt2(self):
        """Test sigma(Z[sqrt2]) is certified with bound 1"""
        verdict = good_position_check(preset_lattice("Z[sqrt2]"))
        assert verdict.status == STATUS_CERTIFIED
        assert verdict.bound == 1.0

    def test_certified_needs_totally_real(self):
        with pytest.raises(FrameMismatch):
            good_position_check(preset_lattice("Z[cbrt2]"))

    def test_certified_needs_module(self, z2):
        with pytest.raises(FrameMismatch):
            good_position_check(z2)

    def test_search_refutes_z2(self, z2):
        """Test Z^2 has a point on a coordinate axis"""
        verdict = good_position_check(z2, mode="search", radius=2)
        assert verdict.status == STATUS_REFUTED
        assert 0 in verdict.witness

    def test_search_respects_certificate(self):
        """Test min |Nm_e| found by search is at least the certified bound"""
        module = preset_lattice("Z[sqrt2]")
        verdict = good_position_check(module, mode="search", radius=20)
        assert verdict.status == STATUS_INCONCLUSIVE
        assert verdict.bound >= 1.0 - 1e-9

    def test_search_needs_radius(self, z2):
        with pytest.raises(ValueError):
            good_position_check(z2, mode="search")


class TestDecompositionCompatibility:
    """Tests for block decompositions of R^s x C^t"""

    def test_compatible(self):
        field = analyze_field(PRESETS["Z[cbrt2]"])
        verdict = decomposition_compatibility(field, [[0], [1, 2]])
        assert verdict.compatible
        assert verdict.block_signatures == [(1, 0), (0, 1)]

    def test_split_complex_pair(self):
        """Test a block boundary through a complex pair is incompatible"""
        field = analyze_field(PRESETS["Z[cbrt2]"])
        assert not decomposition_compatibility(field, [[0, 1], [2]]).compatible

    def test_not_spanning(self):
        field = analyze_field(PRESETS["Z[sqrt2]"])
        with pytest.raises(BlocksNotSpanning):
            decomposition_compatibility(field, [[0]])
