"""
Exact scalar tower for lattice geometry.

Scalars are either ``fractions.Fraction`` values or ``FieldElement`` values of
a number field (coordinates in the power basis 1, theta, ..., theta^(d-1)).
A FieldElement carries the index of the real embedding through which it is
read as a real number. Real embeddings are numbered 0..s-1 by decreasing
root value; complex embeddings s..s+t-1 follow them.

The module also provides exact Gaussian elimination over Scalars, which is
all the linear algebra the trusted core needs.
"""
import logging
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Union

logger = logging.getLogger(__name__)


class GeometryError(Exception):
    """Base exception for lattice geometry errors"""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context
        for key, value in context.items():
            setattr(self, key, value)

    def __str__(self):
        return self.message


class DivisionByZero(GeometryError):
    """Raised when dividing by an exact zero"""


class FieldMismatch(GeometryError):
    """Raised when mixing elements of different fields or embeddings"""


class EmbeddingOutOfRange(GeometryError):
    """Raised when an embedding index does not exist or is not real"""


class UnsupportedScalarKind(GeometryError):
    """Raised when a value cannot be used as an exact scalar"""


class SingularMatrix(GeometryError):
    """Raised when an exact matrix has no inverse"""


class FieldElement:
    """Element of a number field, read as a real number through one embedding"""

    __slots__ = ("field", "coords", "embedding")

    def __init__(self, field, coords: Sequence[Any], embedding: int = 0):
        values = [parse_rational(c) for c in coords]
        if len(values) > field.degree:
            raise ValueError(f"Expected at most {field.degree} coordinates, got {len(values)}")
        values += [Fraction(0)] * (field.degree - len(values))
        self.field = field
        self.coords = tuple(values)
        self.embedding = embedding

    @classmethod
    def from_rational(cls, field, value, embedding: int = 0) -> "FieldElement":
        return cls(field, [parse_rational(value)], embedding)

    @classmethod
    def generator(cls, field, embedding: int = 0) -> "FieldElement":
        """The power-basis generator theta"""
        if field.degree == 1:
            return cls(field, [-Fraction(field.minpoly[0])], embedding)
        return cls(field, [0, 1], embedding)

    def is_zero(self) -> bool:
        return not any(self.coords)

    def is_rational(self) -> bool:
        return not any(self.coords[1:])

    def with_embedding(self, embedding: int) -> "FieldElement":
        return FieldElement(self.field, self.coords, embedding)

    def _coerce(self, other) -> Optional["FieldElement"]:
        if isinstance(other, FieldElement):
            if other.field.key != self.field.key:
                raise FieldMismatch(
                    f"Cannot combine elements of fields {self.field} and {other.field}",
                    left=self.field.key, right=other.field.key
                )
            if other.embedding != self.embedding:
                raise FieldMismatch(
                    f"Cannot combine embeddings {self.embedding} and {other.embedding}",
                    left=self.embedding, right=other.embedding
                )
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return FieldElement.from_rational(self.field, other, self.embedding)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return FieldElement(self.field, [a + b for a, b in zip(self.coords, other.coords)], self.embedding)

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(self.field, [-a for a in self.coords], self.embedding)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return FieldElement(self.field, [a - b for a, b in zip(self.coords, other.coords)], self.embedding)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            scale = Fraction(other)
            return FieldElement(self.field, [a * scale for a in self.coords], self.embedding)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return FieldElement(self.field, self.field.multiply(self.coords, other.coords), self.embedding)

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        if self.is_zero():
            raise DivisionByZero("Division by zero field element")
        return FieldElement(self.field, self.field.inverse(self.coords), self.embedding)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            if other == 0:
                raise DivisionByZero("Division by zero")
            scale = Fraction(other)
            return FieldElement(self.field, [a / scale for a in self.coords], self.embedding)
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = FieldElement.from_rational(self.field, 1, self.embedding)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return other.field.key == self.field.key and other.coords == self.coords
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.is_rational() and self.coords[0] == other
        return NotImplemented

    def __hash__(self):
        if self.is_rational():
            return hash(self.coords[0])
        return hash((self.field.key, self.coords))

    def __lt__(self, other):
        return compare(self, other) < 0

    def __le__(self, other):
        return compare(self, other) <= 0

    def __gt__(self, other):
        return compare(self, other) > 0

    def __ge__(self, other):
        return compare(self, other) >= 0

    def __abs__(self):
        return -self if sign(self) < 0 else self

    def __float__(self):
        return to_float(self)

    def __repr__(self):
        return f"FieldElement({format_scalar(self)}, embedding={self.embedding})"


Scalar = Union[Fraction, FieldElement]


def parse_rational(value: Any) -> Fraction:
    """Parse an int, Fraction, sympy Rational or "p/q" string into a canonical Fraction"""
    if isinstance(value, bool):
        raise UnsupportedScalarKind(f"Boolean is not a scalar: {value!r}", value=value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise UnsupportedScalarKind(f"Cannot parse rational {value!r}: {e}", value=value)
    if hasattr(value, "p") and hasattr(value, "q"):
        return Fraction(int(value.p), int(value.q))
    raise UnsupportedScalarKind(
        f"Expected an exact rational, got {type(value).__name__} {value!r}", value=value
    )


def to_scalar(value: Any) -> Scalar:
    if isinstance(value, FieldElement):
        return value
    return parse_rational(value)


def is_exact(value: Any) -> bool:
    if isinstance(value, bool):
        return False
    return isinstance(value, (int, Fraction, FieldElement))


def common_field(values) -> Optional[Any]:
    """The number field shared by the FieldElements in ``values``, or None when all are rational"""
    field = None
    for value in values:
        if isinstance(value, FieldElement):
            if field is None:
                field = value.field
            elif field.key != value.field.key:
                raise FieldMismatch(
                    f"Mixed fields {field} and {value.field}", left=field.key, right=value.field.key
                )
    return field


def scalar_arith(a: Any, b: Any, op: str) -> Scalar:
    a, b = to_scalar(a), to_scalar(b)
    if op == "+":
        return a + b
    if op in ("-", "−"):
        return a - b
    if op in ("*", "×"):
        return a * b
    if op in ("/", "÷"):
        if is_zero(b):
            raise DivisionByZero(f"Division of {format_scalar(a)} by zero")
        return a / b
    raise ValueError(f"Unknown operator: {op}")


def is_zero(value: Any) -> bool:
    if isinstance(value, FieldElement):
        return value.is_zero()
    return value == 0


def to_float(value: Any, embedding: Optional[int] = None) -> float:
    """Double-precision value of a scalar under a real embedding"""
    if isinstance(value, FieldElement):
        index = value.embedding if embedding is None else embedding
        _check_embedding(value.field, index, real=True)
        return float(value.field.evaluate(value.coords, index))
    if isinstance(value, float):
        return value
    return float(parse_rational(value))


def to_complex(value: Any, embedding: Optional[int] = None) -> complex:
    if isinstance(value, FieldElement):
        index = value.embedding if embedding is None else embedding
        _check_embedding(value.field, index, real=False)
        return complex(value.field.evaluate(value.coords, index))
    return complex(to_float(value))


def _check_embedding(field, index: int, real: bool):
    limit = field.real_count if real else field.real_count + field.complex_count
    if not 0 <= index < limit:
        kind = "real embedding" if real else "embedding"
        raise EmbeddingOutOfRange(
            f"{kind.capitalize()} index {index} out of range for {field} (have {limit})",
            index=index, limit=limit
        )


def sign(value: Any, embedding: Optional[int] = None) -> int:
    """Exact sign (-1, 0, 1) of a scalar under a real embedding"""
    if isinstance(value, FieldElement):
        index = value.embedding if embedding is None else embedding
        if value.is_zero():
            return 0
        _check_embedding(value.field, index, real=True)
        if value.is_rational():
            return (value.coords[0] > 0) - (value.coords[0] < 0)
        return value.field.sign(value.coords, index)
    q = parse_rational(value)
    return (q > 0) - (q < 0)


def compare(a: Any, b: Any, embedding: Optional[int] = None) -> int:
    """Exact comparison: -1 when a < b, 0 when equal, 1 when a > b"""
    return sign(to_scalar(a) - to_scalar(b), embedding)


def format_scalar(value: Any) -> str:
    if isinstance(value, FieldElement):
        terms = []
        for power, c in enumerate(value.coords):
            if c == 0:
                continue
            if power == 0:
                terms.append(str(c))
            elif power == 1:
                terms.append(f"{c}*t")
            else:
                terms.append(f"{c}*t^{power}")
        return " + ".join(terms) if terms else "0"
    if isinstance(value, float):
        return repr(value)
    return str(parse_rational(value))


def scalar_to_json(value: Any) -> Union[str, Dict[str, Any]]:
    if isinstance(value, FieldElement):
        return {
            "minpoly": list(value.field.minpoly),
            "coords": [str(c) for c in value.coords],
            "embedding": value.embedding,
        }
    return str(parse_rational(value))


# Exact linear algebra. Matrices are lists of rows.

def dot(u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
    total = Fraction(0)
    for a, b in zip(u, v):
        total = total + a * b
    return total


def transpose(matrix: Sequence[Sequence[Scalar]]) -> List[List[Scalar]]:
    return [list(col) for col in zip(*matrix)]


def mat_mul(a: Sequence[Sequence[Scalar]], b: Sequence[Sequence[Scalar]]) -> List[List[Scalar]]:
    columns = transpose(b)
    return [[dot(row, col) for col in columns] for row in a]


def mat_vec(matrix: Sequence[Sequence[Scalar]], vector: Sequence[Scalar]) -> List[Scalar]:
    return [dot(row, vector) for row in matrix]


def identity(n: int) -> List[List[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def _reduce_rows(matrix: Sequence[Sequence[Any]], columns: Optional[int] = None):
    """Gauss-Jordan elimination; returns (rref rows, pivot columns, determinant factor)"""
    rows = [[to_scalar(x) for x in row] for row in matrix]
    width = len(rows[0]) if rows else 0
    columns = width if columns is None else columns
    pivots = []
    det = Fraction(1)
    r = 0
    for c in range(columns):
        pivot = next((i for i in range(r, len(rows)) if not is_zero(rows[i][c])), None)
        if pivot is None:
            continue
        if pivot != r:
            rows[r], rows[pivot] = rows[pivot], rows[r]
            det = -det
        lead = rows[r][c]
        det = det * lead
        inv = 1 / lead if not isinstance(lead, FieldElement) else lead.inverse()
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and not is_zero(rows[i][c]):
                factor = rows[i][c]
                rows[i] = [x - factor * y for x, y in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots, det


def rank(matrix: Sequence[Sequence[Any]]) -> int:
    if not matrix:
        return 0
    return len(_reduce_rows(matrix)[1])


def determinant(matrix: Sequence[Sequence[Any]]) -> Scalar:
    n = len(matrix)
    if n == 0:
        return Fraction(1)
    _, pivots, det = _reduce_rows(matrix)
    if len(pivots) < n:
        return Fraction(0)
    return det


def inverse(matrix: Sequence[Sequence[Any]]) -> List[List[Scalar]]:
    n = len(matrix)
    augmented = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(matrix)]
    rows, pivots, _ = _reduce_rows(augmented, columns=n)
    if len(pivots) < n:
        raise SingularMatrix(f"Matrix of size {n} is singular", size=n)
    return [row[n:] for row in rows]


def nullspace(matrix: Sequence[Sequence[Any]], width: Optional[int] = None) -> List[List[Scalar]]:
    """Basis (as rows) of {x : matrix x = 0}"""
    if not matrix:
        return identity(width or 0)
    width = len(matrix[0])
    rows, pivots, _ = _reduce_rows(matrix)
    free = [c for c in range(width) if c not in pivots]
    basis = []
    for f in free:
        vector = [Fraction(0)] * width
        vector[f] = Fraction(1)
        for row, p in zip(rows, pivots):
            vector[p] = -row[f]
        basis.append(vector)
    return basis


def solve(matrix: Sequence[Sequence[Any]], rhs: Sequence[Any]) -> List[Scalar]:
    """Solve the square system matrix x = rhs exactly"""
    return mat_vec(inverse(matrix), [to_scalar(b) for b in rhs])
