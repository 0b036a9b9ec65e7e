"""
Algebraic number fields and the lattices they produce.

A NumberField is given by a monic integer minimal polynomial. Real roots are
isolated by sympy (Sturm counts, interval refinement); complex roots get
isolating boxes and are polished with mpmath. Module lattices sigma(M) come
from the canonical embedding R^s x C^t, with complex coordinates flattened
to (Re, Im) pairs.
"""
import logging
import math
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from sympy import Poly, QQ, Rational, Symbol, ZZ

from exact_scalar import (
    DivisionByZero, FieldElement, GeometryError, determinant, is_exact,
    parse_rational, to_float,
)
from lattice_core import Lattice, minimal_vectors

logger = logging.getLogger(__name__)

_X = Symbol("x")
ROOT_BITS = 64
CERTIFIED_BITS = 128
WORKING_DPS = 60

PRESETS = {
    "Z[sqrt2]": (-2, 0, 1),
    "Z[cbrt2]": (-2, 0, 0, 1),
    "Z[x]/(x^3-3x-1)": (-1, -3, 0, 1),
}

STATUS_CERTIFIED = "certified"
STATUS_REFUTED = "refuted"
STATUS_INCONCLUSIVE = "inconclusive"


class InvalidMinimalPolynomial(GeometryError):
    """Raised for polynomials that are not monic with integer coefficients"""


class NotSquarefree(GeometryError):
    """Raised when the minimal polynomial has a repeated factor"""


class ReducibleDetected(GeometryError):
    """Raised when a low-degree factorisation of the minimal polynomial is found"""


class DependentGenerators(GeometryError):
    """Raised when module generators are Z-linearly dependent"""


class NonOrthonormalFrame(GeometryError):
    """Raised when a frame is not orthonormal within 1e-12"""


class FrameMismatch(GeometryError):
    """Raised when certified good position is requested for an unsupported frame"""


class BlocksNotSpanning(GeometryError):
    """Raised when decomposition blocks overlap or miss coordinates"""


def _to_sympy(q: Fraction) -> Rational:
    return Rational(q.numerator, q.denominator)


def _to_fraction(value) -> Fraction:
    return Fraction(int(value.p), int(value.q))


def _mpf(q: Fraction):
    return mpmath.mpf(q.numerator) / q.denominator


def _interval_horner(coeffs_high: Sequence[Fraction], lo: Fraction, hi: Fraction) -> Tuple[Fraction, Fraction]:
    """Enclosure of a polynomial over [lo, hi] by interval Horner evaluation"""
    acc_lo = acc_hi = coeffs_high[0]
    for c in coeffs_high[1:]:
        products = (acc_lo * lo, acc_lo * hi, acc_hi * lo, acc_hi * hi)
        acc_lo, acc_hi = min(products) + c, max(products) + c
    return acc_lo, acc_hi


class NumberField:
    """Number field Q(theta) with certified root enclosures"""

    def __init__(self, minpoly: Sequence[int]):
        self.minpoly = tuple(int(c) for c in minpoly)
        self.key = self.minpoly
        self.degree = len(self.minpoly) - 1
        self.poly = Poly(list(reversed(self.minpoly)), _X, domain=ZZ)
        self.poly_qq = Poly(list(reversed(self.minpoly)), _X, domain=QQ)
        self.real_count = int(self.poly.count_roots())
        self.complex_count = (self.degree - self.real_count) // 2

        ascending = self.poly.intervals(eps=Rational(1, 2 ** ROOT_BITS))
        self._real_intervals = [
            (_to_fraction(a), _to_fraction(b)) for (a, b), _ in reversed(ascending)
        ]
        self._interval_cache: Dict[Tuple[int, int], Tuple[Fraction, Fraction]] = {}
        self._complex_boxes: List[Tuple[Fraction, Fraction, Fraction, Fraction]] = []
        self._complex_roots = []
        if self.complex_count:
            self._isolate_complex_roots()

    def __repr__(self):
        return f"NumberField(minpoly={list(self.minpoly)}, s={self.real_count}, t={self.complex_count})"

    __str__ = __repr__

    @property
    def signature(self) -> Tuple[int, int]:
        return self.real_count, self.complex_count

    def _isolate_complex_roots(self):
        _, rectangles = self.poly.intervals(all=True, eps=Rational(1, 2 ** ROOT_BITS))
        boxes = []
        for (corner_lo, corner_hi), _ in rectangles:
            re_lo, im_lo = corner_lo.as_real_imag()
            re_hi, im_hi = corner_hi.as_real_imag()
            boxes.append(tuple(_to_fraction(v) for v in (re_lo, re_hi, im_lo, im_hi)))
        upper = [b for b in boxes if b[2] + b[3] > 0]
        if len(upper) < self.complex_count:
            upper = [(a, b, -d, -c) for a, b, c, d in boxes if c + d < 0]
        upper.sort(key=lambda b: (-(b[0] + b[1]), -(b[2] + b[3])))
        self._complex_boxes = upper[:self.complex_count]
        with mpmath.workdps(WORKING_DPS):
            coeffs = [mpmath.mpf(c) for c in reversed(self.minpoly)]
            for re_lo, re_hi, im_lo, im_hi in self._complex_boxes:
                start = mpmath.mpc(_mpf((re_lo + re_hi) / 2), _mpf((im_lo + im_hi) / 2))
                root = mpmath.findroot(lambda z: mpmath.polyval(coeffs, z), start)
                self._complex_roots.append(root)

    def root_interval(self, index: int, bits: int = ROOT_BITS) -> Tuple[Fraction, Fraction]:
        """Isolating interval of the real root with the given embedding index, width below 2^-bits"""
        if bits <= ROOT_BITS:
            return self._real_intervals[index]
        cached = self._interval_cache.get((index, bits))
        if cached is None:
            lo, hi = self._real_intervals[index]
            if lo != hi:
                a, b = self.poly.refine_root(_to_sympy(lo), _to_sympy(hi), eps=Rational(1, 2 ** bits))
                lo, hi = _to_fraction(a), _to_fraction(b)
            cached = (lo, hi)
            self._interval_cache[(index, bits)] = cached
        return cached

    def complex_box(self, index: int) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        """(re_lo, re_hi, im_lo, im_hi) box around the complex root of embedding s + index"""
        return self._complex_boxes[index]

    def root_value(self, index: int):
        """High-precision root for an embedding index (mpf for real, mpc for complex)"""
        if index < self.real_count:
            lo, hi = self.root_interval(index, CERTIFIED_BITS)
            return _mpf((lo + hi) / 2)
        return self._complex_roots[index - self.real_count]

    # Arithmetic in the power basis

    def _poly_of(self, coords: Sequence[Fraction]) -> Poly:
        return Poly([_to_sympy(c) for c in reversed(coords)], _X, domain=QQ)

    def _coords_of(self, poly: Poly) -> Tuple[Fraction, ...]:
        values = [_to_fraction(c) for c in reversed(poly.all_coeffs())]
        values += [Fraction(0)] * (self.degree - len(values))
        return tuple(values[:self.degree])

    def multiply(self, a: Sequence[Fraction], b: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        return self._coords_of((self._poly_of(a) * self._poly_of(b)).rem(self.poly_qq))

    def inverse(self, a: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        try:
            return self._coords_of(self._poly_of(a).invert(self.poly_qq))
        except Exception as e:
            raise DivisionByZero(f"Element {list(a)} is not invertible in {self}: {e}")

    def evaluate(self, coords: Sequence[Fraction], index: int):
        root = self.root_value(index)
        with mpmath.workdps(WORKING_DPS):
            value = mpmath.polyval([_mpf(c) for c in reversed(coords)], root)
            if index < self.real_count:
                return float(value)
            return complex(value)

    def sign(self, coords: Sequence[Fraction], index: int) -> int:
        """Certified sign of the element under a real embedding"""
        if not any(coords):
            return 0
        coeffs_high = list(reversed(coords))
        while len(coeffs_high) > 1 and coeffs_high[0] == 0:
            coeffs_high.pop(0)
        for bits in (ROOT_BITS, CERTIFIED_BITS):
            lo, hi = self.root_interval(index, bits)
            low, high = _interval_horner(coeffs_high, lo, hi)
            if low > 0:
                return 1
            if high < 0:
                return -1
        # Exact fallback: refine until the coordinate polynomial has no root
        # in the isolating interval, then its sign there is constant.
        _, g = self._poly_of(coords).clear_denoms(convert=True)
        bits = CERTIFIED_BITS
        while bits <= 1 << 16:
            lo, hi = self.root_interval(index, bits)
            if g.count_roots(_to_sympy(lo), _to_sympy(hi)) == 0:
                value = g.eval(_to_sympy(lo))
                return 1 if value > 0 else -1
            bits *= 2
        raise GeometryError(f"Sign of {list(coords)} under embedding {index} not resolved")

    def element(self, coords: Sequence[Any], embedding: int = 0) -> FieldElement:
        return FieldElement(self, coords, embedding)

    def conjugate_coords(self, coords: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        """Coordinates of the Galois conjugate in a real quadratic field"""
        if self.degree != 2:
            raise GeometryError(f"Conjugation in power coordinates needs a quadratic field, not {self}")
        c0, c1 = coords
        a1 = Fraction(self.minpoly[1])
        return (c0 - a1 * c1, -c1)


def _validate_minpoly(minpoly: Sequence[Any]) -> Tuple[int, ...]:
    if len(minpoly) < 2:
        raise InvalidMinimalPolynomial(f"Minimal polynomial {list(minpoly)} has degree < 1")
    coeffs = []
    for c in minpoly:
        q = parse_rational(c)
        if q.denominator != 1:
            raise InvalidMinimalPolynomial(f"Minimal polynomial {list(minpoly)} has non-integer coefficient {c}")
        coeffs.append(int(q))
    if coeffs[-1] != 1:
        raise InvalidMinimalPolynomial(f"Minimal polynomial {coeffs} is not monic")
    return tuple(coeffs)


@lru_cache(maxsize=64)
def _analyze(minpoly: Tuple[int, ...]) -> NumberField:
    poly = Poly(list(reversed(minpoly)), _X, domain=ZZ)
    if not poly.is_sqf:
        raise NotSquarefree(f"Minimal polynomial {list(minpoly)} is not squarefree", minpoly=list(minpoly))
    degree = len(minpoly) - 1
    if degree <= 4:
        _, factors = poly.factor_list()
        if len(factors) > 1:
            raise ReducibleDetected(
                f"Minimal polynomial {list(minpoly)} factors as {[str(f.as_expr()) for f, _ in factors]}",
                minpoly=list(minpoly)
            )
    else:
        if degree > 1 and poly.ground_roots():
            raise ReducibleDetected(f"Minimal polynomial {list(minpoly)} has a rational root", minpoly=list(minpoly))
        logger.warning(f"Irreducibility of degree-{degree} polynomial {list(minpoly)} is assumed")
    field = NumberField(minpoly)
    logger.info(f"Analyzed field {field}")
    return field


def analyze_field(minpoly: Sequence[Any]) -> NumberField:
    """Validate a minimal polynomial (low-to-high coefficients) and build its field"""
    return _analyze(_validate_minpoly(minpoly))


@dataclass(frozen=True)
class ModuleLattice:
    """Full module M of a number field together with its embedded lattice sigma(M)"""
    field: NumberField
    generators: Tuple[FieldElement, ...]
    embedded: Lattice
    denominator: int = 1

    @property
    def signature(self) -> Tuple[int, int]:
        return self.field.signature

    def element(self, coeffs: Sequence[int]) -> FieldElement:
        total = FieldElement(self.field, [0])
        for c, g in zip(coeffs, self.generators):
            total = total + g * int(c)
        return total


def embedding_blocks(field: NumberField) -> List[Tuple[int, ...]]:
    s, t = field.signature
    return [(i,) for i in range(s)] + [(s + 2 * j, s + 2 * j + 1) for j in range(t)]


def canonical_embedding(field: NumberField, generators: Sequence[Any]) -> ModuleLattice:
    """Embed the module spanned by ``generators`` into R^s x C^t (flattened)"""
    elements = []
    for g in generators:
        if isinstance(g, FieldElement):
            elements.append(FieldElement(field, g.coords))
        else:
            elements.append(FieldElement(field, g if isinstance(g, (list, tuple)) else [g]))
    if len(elements) != field.degree:
        raise DependentGenerators(f"Need {field.degree} generators, got {len(elements)}")
    if determinant([list(e.coords) for e in elements]) == 0:
        raise DependentGenerators("Module generators are Z-linearly dependent")

    denominator = 1
    for e in elements:
        for c in e.coords:
            denominator = denominator * c.denominator // math.gcd(denominator, c.denominator)

    s, t = field.signature
    blocks = embedding_blocks(field)
    label = f"sigma(M) in Q[x]/({list(field.minpoly)})"
    if field.degree == 1:
        embedded = Lattice([[e.coords[0]] for e in elements], blocks=blocks, label=label)
    elif field.degree == 2 and s == 2:
        rows = [[e, FieldElement(field, field.conjugate_coords(e.coords))] for e in elements]
        embedded = Lattice(rows, blocks=blocks, label=label)
    else:
        rows = []
        for e in elements:
            row = [field.evaluate(e.coords, i) for i in range(s)]
            for j in range(t):
                value = field.evaluate(e.coords, s + j)
                row.extend([value.real, value.imag])
            rows.append(row)
        embedded = Lattice.from_float(rows, blocks=blocks, label=label)
        logger.warning(f"{label} is float-backed: conjugates are not expressible in the field")
    logger.info(f"Embedded {label}: covolume {embedded.covolume:.12g}, denominator {denominator}")
    return ModuleLattice(field=field, generators=tuple(elements), embedded=embedded, denominator=denominator)


def preset_lattice(name: str) -> ModuleLattice:
    """sigma(Z[theta]) for a bundled preset field"""
    if name not in PRESETS:
        raise KeyError(f"Unknown preset {name!r}; choose from {sorted(PRESETS)}")
    field = analyze_field(PRESETS[name])
    generators = [[0] * i + [1] for i in range(field.degree)]
    return canonical_embedding(field, generators)


def field_norm(xi: FieldElement) -> Fraction:
    """Exact N_{K/Q}(xi) as the resultant of the minimal polynomial and the coordinate polynomial"""
    if xi.is_zero():
        return Fraction(0)
    if xi.is_rational():
        return xi.coords[0] ** xi.field.degree
    field = xi.field
    magnitude = abs(parse_rational(field.poly_qq.resultant(field._poly_of(xi.coords))))
    # Complex embeddings contribute |.|^2 > 0, so the sign comes from the real ones.
    negative = sum(1 for i in range(field.real_count) if field.sign(xi.coords, i) < 0)
    return -magnitude if negative % 2 else magnitude


def norm_E(x: Sequence[float], s: int, t: int) -> float:
    """prod |x'_a| * prod |x''_b|^2 on a flattened vector of R^s x C^t"""
    x = [to_float(v) if is_exact(v) else float(v) for v in x]
    value = 1.0
    for i in range(s):
        value *= abs(x[i])
    for j in range(t):
        re, im = x[s + 2 * j], x[s + 2 * j + 1]
        value *= re * re + im * im
    return value


def product_of_vectors(x: Sequence[float], y: Sequence[float], s: int, t: int) -> List[float]:
    """Componentwise product on R^s x C^t (complex pairs multiply as complex numbers)"""
    result = [float(x[i]) * float(y[i]) for i in range(s)]
    for j in range(t):
        a = complex(x[s + 2 * j], x[s + 2 * j + 1])
        b = complex(y[s + 2 * j], y[s + 2 * j + 1])
        c = a * b
        result.extend([c.real, c.imag])
    return result


def _frame_array(frame: Sequence[Sequence[Any]]) -> np.ndarray:
    array = np.array([[to_float(v) if is_exact(v) else float(v) for v in row] for row in frame], dtype=float)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise NonOrthonormalFrame(f"Frame must be square, got shape {array.shape}")
    if not np.allclose(array @ array.T, np.eye(array.shape[0]), rtol=0, atol=1e-12):
        raise NonOrthonormalFrame("Frame is not orthonormal within 1e-12")
    return array


def nm_e(x: Sequence[Any], frame: Sequence[Sequence[Any]]) -> float:
    """prod_j (x, e_j) for an orthonormal frame e"""
    array = _frame_array(frame)
    point = np.array([to_float(v) if is_exact(v) else float(v) for v in x], dtype=float)
    return float(np.prod(array @ point))


@dataclass
class GoodPositionVerdict:
    status: str
    mode: str
    bound: float
    radius: Optional[float] = None
    witness: Optional[Tuple[int, ...]] = None
    points_checked: int = 0
    details: Dict[str, Any] = dataclass_field(default_factory=dict)


def good_position_check(lattice, frame=None, mode: str = "certified", radius=None,
                        budget: Optional[int] = None) -> GoodPositionVerdict:
    """Certify or search for a positive lower bound of |Nm_e| over nonzero lattice points"""
    if mode == "certified":
        if not isinstance(lattice, ModuleLattice):
            raise FrameMismatch("Certified mode needs a module lattice built by canonical_embedding")
        n = lattice.field.degree
        if frame is not None and not np.allclose(_frame_array(frame), np.eye(n), atol=1e-12):
            raise FrameMismatch("Certified mode needs the canonical coordinate frame")
        if lattice.field.complex_count:
            raise FrameMismatch("Certified mode needs a totally real field: Nm_e differs from the field norm otherwise")
        bound = Fraction(1, lattice.denominator ** n)
        return GoodPositionVerdict(
            status=STATUS_CERTIFIED, mode=mode, bound=float(bound),
            details={"denominator": lattice.denominator, "degree": n}
        )
    if mode != "search":
        raise ValueError(f"Unknown good-position mode: {mode}")
    if radius is None:
        raise ValueError("Search mode needs a radius")
    embedded = lattice.embedded if isinstance(lattice, ModuleLattice) else lattice
    n = embedded.dim
    array = _frame_array(frame) if frame is not None else np.eye(n)
    standard = frame is None or np.array_equal(array, np.eye(n))
    points = minimal_vectors(embedded, radius, budget=budget)
    best = math.inf
    for point in points:
        if embedded.exact and standard:
            if any(v == 0 for v in point.embedded):
                return GoodPositionVerdict(status=STATUS_REFUTED, mode=mode, bound=0.0, radius=float(radius),
                                           witness=point.coeffs, points_checked=len(points))
        x = point.coordinates
        value = abs(float(np.prod(array @ x)))
        if value <= 1e-12 * max(1.0, float(np.linalg.norm(x))) ** n:
            return GoodPositionVerdict(status=STATUS_REFUTED, mode=mode, bound=0.0, radius=float(radius),
                                       witness=point.coeffs, points_checked=len(points))
        best = min(best, value)
    return GoodPositionVerdict(status=STATUS_INCONCLUSIVE, mode=mode, bound=best, radius=float(radius),
                               points_checked=len(points))


@dataclass
class CompatibilityVerdict:
    compatible: bool
    ell: int
    block_signatures: List[Tuple[int, int]]


def decomposition_compatibility(field: NumberField, blocks: Sequence[Sequence[int]]) -> CompatibilityVerdict:
    """Check that every embedding's coordinates lie inside a single block"""
    seen = []
    for block in blocks:
        seen.extend(block)
    if sorted(seen) != list(range(field.degree)):
        raise BlocksNotSpanning(
            f"Blocks {[list(b) for b in blocks]} do not partition coordinates 0..{field.degree - 1}"
        )
    owner = {c: i for i, block in enumerate(blocks) for c in block}
    signatures = [[0, 0] for _ in blocks]
    compatible = True
    for coords in embedding_blocks(field):
        owners = {owner[c] for c in coords}
        if len(owners) > 1:
            compatible = False
            continue
        signatures[owners.pop()][0 if len(coords) == 1 else 1] += 1
    return CompatibilityVerdict(
        compatible=compatible, ell=len(blocks), block_signatures=[tuple(s) for s in signatures]
    )
