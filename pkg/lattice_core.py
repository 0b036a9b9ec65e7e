"""
Lattices in Euclidean space.

Basis rows are lattice vectors. A lattice of rank k may sit in an ambient
space of dimension n >= k; duals and covolumes are then taken inside the
span. Exact lattices hold Scalars (rationals or elements of one number
field); float-backed lattices come from canonical embeddings whose
conjugates are not expressible in the field.
"""
import itertools
import logging
import math
import os
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from exact_scalar import (
    FieldElement, GeometryError, Scalar, common_field, compare, determinant,
    dot, inverse, is_exact, mat_mul, parse_rational, rank, sign, to_float,
    to_scalar, transpose,
)

logger = logging.getLogger(__name__)

DEFAULT_POINT_BUDGET = 50_000_000
BUDGET_ENV_VAR = "LATGEO_BUDGET"
THETA_TERM_CUTOFF = 1e-18


class SingularBasis(GeometryError):
    """Raised when basis rows are linearly dependent"""


class NonPositiveParameter(GeometryError):
    """Raised when a parameter that must be positive is not"""


class RadiusTooLargeForBudget(GeometryError):
    """Raised when an enumeration would exceed the point budget"""

    def __init__(self, message: str, estimate: float = 0, budget: int = 0):
        super().__init__(message, estimate=estimate, budget=budget)


def resolve_budget(budget: Optional[int] = None) -> int:
    """Point budget: explicit value, else the LATGEO_BUDGET environment variable, else the default"""
    if budget is not None:
        return int(budget)
    env_value = os.environ.get(BUDGET_ENV_VAR)
    if env_value:
        try:
            return int(float(env_value))
        except ValueError:
            logger.warning(f"Ignoring invalid {BUDGET_ENV_VAR}={env_value!r}")
    return DEFAULT_POINT_BUDGET


class Lattice:
    """Lattice of rank k in R^n with cached Gram matrix, dual and covolume"""

    def __init__(self, basis: Sequence[Sequence], dim: Optional[int] = None,
                 blocks: Optional[Sequence[Sequence[int]]] = None, label: str = ""):
        rows = [[to_scalar(x) if isinstance(x, str) else x for x in row] for row in basis]
        if dim is None:
            if not rows:
                raise ValueError("dim is required for a rank-0 lattice")
            dim = len(rows[0])
        for row in rows:
            if len(row) != dim:
                raise ValueError(f"Basis row {row} does not have length {dim}")
        self.dim = dim
        self.rank = len(rows)
        self.label = label
        self.blocks = tuple(tuple(b) for b in blocks) if blocks else None
        self.exact = all(is_exact(x) for row in rows for x in row)
        if self.exact:
            self.basis = tuple(tuple(to_scalar(x) for x in row) for row in rows)
            self.field = common_field(x for row in self.basis for x in row)
            if rows and rank(self.basis) < self.rank:
                raise SingularBasis(f"Basis rows of {self.describe()} are linearly dependent")
        else:
            self.basis = None
            self.field = None
            self._float_basis = np.array(rows, dtype=float).reshape(self.rank, dim)
            if self.rank and np.linalg.matrix_rank(self._float_basis) < self.rank:
                raise SingularBasis(f"Basis rows of {self.describe()} are linearly dependent")

    @classmethod
    def from_float(cls, basis, blocks=None, label: str = "") -> "Lattice":
        array = np.asarray(basis, dtype=float)
        return cls(array.tolist(), dim=array.shape[1], blocks=blocks, label=label)

    @classmethod
    def standard(cls, n: int) -> "Lattice":
        return cls([[int(i == j) for j in range(n)] for i in range(n)], label=f"Z^{n}")

    def describe(self) -> str:
        return self.label or f"lattice(rank={self.rank}, dim={self.dim})"

    def __repr__(self):
        return f"Lattice({self.describe()}, exact={self.exact})"

    @property
    def full_rank(self) -> bool:
        return self.rank == self.dim

    @cached_property
    def basis_float(self) -> np.ndarray:
        if not self.exact:
            return self._float_basis
        return np.array([[to_float(x) for x in row] for row in self.basis], dtype=float).reshape(self.rank, self.dim)

    @cached_property
    def gram(self):
        """Gram matrix: exact Scalars for exact lattices, numpy array otherwise"""
        if self.exact:
            return mat_mul(self.basis, transpose(self.basis)) if self.rank else []
        return self._float_basis @ self._float_basis.T

    @cached_property
    def gram_determinant(self):
        if self.exact:
            return determinant(self.gram)
        return float(np.linalg.det(self.gram)) if self.rank else 1.0

    @cached_property
    def covolume_exact(self) -> Optional[Scalar]:
        """|det B| as a Scalar for square exact bases"""
        if not (self.exact and self.full_rank):
            return None
        det = determinant(self.basis)
        return -det if sign(det) < 0 else det

    @cached_property
    def covolume(self) -> float:
        if self.covolume_exact is not None:
            return to_float(self.covolume_exact)
        if self.rank == 0:
            return 1.0
        if self.exact:
            return math.sqrt(to_float(self.gram_determinant))
        if self.full_rank:
            return abs(float(np.linalg.det(self._float_basis)))
        return math.sqrt(float(np.linalg.det(self.gram)))

    @cached_property
    def dual(self) -> "Lattice":
        """Dual lattice inside the span: basis (B B^T)^{-1} B"""
        if self.rank == 0:
            return Lattice([], dim=self.dim, label=f"dual({self.describe()})")
        label = f"dual({self.describe()})"
        if self.exact:
            if self.full_rank:
                rows = transpose(inverse(self.basis))
            else:
                rows = mat_mul(inverse(self.gram), self.basis)
            return Lattice(rows, dim=self.dim, blocks=self.blocks, label=label)
        rows = np.linalg.solve(self.gram, self._float_basis)
        return Lattice.from_float(rows, blocks=self.blocks, label=label)

    def embed(self, coeffs: Sequence[int]) -> List[Scalar]:
        """Exact coordinates of the lattice point with the given coefficients"""
        if not self.exact:
            raise GeometryError(f"{self.describe()} has no exact coordinates")
        point = [Fraction(0)] * self.dim
        for c, row in zip(coeffs, self.basis):
            if c:
                point = [p + c * x for p, x in zip(point, row)]
        return point

    def embed_float(self, coeffs: Sequence[int]) -> np.ndarray:
        return np.asarray(coeffs, dtype=float) @ self.basis_float if self.rank else np.zeros(self.dim)

    def coefficients(self, vector: Sequence) -> List[Scalar]:
        """Coefficients (x, d_i) of a vector of the span against the dual basis"""
        return [dot(vector, row) for row in self.dual.basis]

    def contains(self, vector: Sequence) -> bool:
        coeffs = self.coefficients(vector)
        if any(not _is_integer(c) for c in coeffs):
            return False
        return list(self.embed([int(_as_fraction(c)) for c in coeffs])) == [to_scalar(x) for x in vector]

    def same_lattice(self, other: "Lattice") -> bool:
        """Equal point sets, checked exactly by mutual integral containment"""
        if other.rank != self.rank or other.dim != self.dim:
            return False
        return all(self.contains(row) for row in other.basis) and all(other.contains(row) for row in self.basis)

    def point(self, coeffs: Sequence[int]) -> "LatticePoint":
        return LatticePoint(tuple(int(c) for c in coeffs), self)


def _is_integer(value) -> bool:
    if isinstance(value, FieldElement):
        return value.is_rational() and value.coords[0].denominator == 1
    return parse_rational(value).denominator == 1


def _as_fraction(value) -> Fraction:
    if isinstance(value, FieldElement):
        return value.coords[0]
    return parse_rational(value)


@dataclass(frozen=True)
class LatticePoint:
    coeffs: Tuple[int, ...]
    owner: Lattice = dataclass_field(compare=False, repr=False)

    @property
    def embedded(self) -> List[Scalar]:
        return self.owner.embed(self.coeffs)

    @property
    def coordinates(self) -> np.ndarray:
        return self.owner.embed_float(self.coeffs)

    @property
    def norm_sq(self):
        if self.owner.exact:
            point = self.embedded
            return dot(point, point)
        x = self.coordinates
        return float(x @ x)

    def __neg__(self):
        return LatticePoint(tuple(-c for c in self.coeffs), self.owner)


def dual(lattice: Lattice) -> Lattice:
    return lattice.dual


def covolume(lattice: Lattice) -> float:
    return lattice.covolume


def enumerate_near(basis, target, radius: float, slack: float = 1e-9) -> Iterator[Tuple[Tuple[int, ...], int, int]]:
    """
    Enumerate coefficient vectors c with |c . basis - target| <= radius.

    Yields blocks (rest, lo, hi): every vector (c0, *rest) with lo <= c0 <= hi is a
    candidate, and every solution appears in exactly one block. Candidates may lie
    slightly outside the ball (by the relative slack); callers classify them.
    """
    basis = np.asarray(basis, dtype=float)
    k = basis.shape[0]
    target = np.asarray(target, dtype=float)
    reach = radius + slack * max(1.0, radius)
    if k == 0:
        if float(target @ target) <= reach * reach:
            yield ((), 0, 0)
        return
    q, r = np.linalg.qr(basis.T)
    y_target = (q.T @ target).tolist()
    off_span = float(target @ target) - sum(y * y for y in y_target)
    available = reach * reach - max(off_span, 0.0)
    if available < 0:
        return
    r = r.tolist()
    coeffs = [0] * k

    def descend(level: int, remaining: float):
        shift = y_target[level] - sum(r[level][j] * coeffs[j] for j in range(level + 1, k))
        pivot = r[level][level]
        center = shift / pivot
        half = math.sqrt(max(remaining, 0.0)) / abs(pivot)
        lo, hi = math.ceil(center - half), math.floor(center + half)
        if level == 0:
            if lo <= hi:
                yield (tuple(coeffs[1:]), lo, hi)
            return
        for c in range(lo, hi + 1):
            coeffs[level] = c
            residual = c * pivot - shift
            yield from descend(level - 1, remaining - residual * residual)
        coeffs[level] = 0

    yield from descend(k - 1, available)


def block_coefficients(rest: Tuple[int, ...], lo: int, hi: int, rank_: int) -> np.ndarray:
    """Expand an enumeration block into an integer coefficient matrix"""
    if rank_ == 0:
        return np.zeros((1, 0), dtype=np.int64)
    count = hi - lo + 1
    block = np.empty((count, rank_), dtype=np.int64)
    block[:, 0] = np.arange(lo, hi + 1)
    if rank_ > 1:
        block[:, 1:] = np.asarray(rest, dtype=np.int64)
    return block


def count_ball_estimate(rank_: int, radius: float, covolume_: float) -> float:
    """Expected number of lattice points in a ball, used for budget checks"""
    unit = math.pi ** (rank_ / 2) / math.gamma(rank_ / 2 + 1)
    return unit * radius ** rank_ / covolume_


@dataclass
class ThetaCheck:
    lhs: float
    rhs: float
    error_bound: float

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.difference <= 1e-9 * max(1.0, self.lhs)


def _theta_sum(lattice: Lattice, t: float) -> Tuple[float, float]:
    """Truncated sum of exp(-pi t |x|^2) over the lattice plus a tail bound"""
    cutoff = math.sqrt(math.log(1.0 / THETA_TERM_CUTOFF) / (math.pi * t))
    basis = lattice.basis_float
    total = 0.0
    for rest, lo, hi in enumerate_near(basis, np.zeros(lattice.dim), cutoff):
        coeffs = block_coefficients(rest, lo, hi, lattice.rank)
        points = coeffs @ basis if lattice.rank else np.zeros((1, lattice.dim))
        total += float(np.exp(-math.pi * t * np.einsum("ij,ij->i", points, points)).sum())

    # Points of norm in (rho, rho + 1] number at most vol(B_{rho+1+D}) / covolume,
    # where D is the half-diameter bound of the fundamental parallelepiped.
    spread = 0.5 * float(np.linalg.norm(basis, axis=1).sum()) if lattice.rank else 0.0
    tail = 0.0
    rho = cutoff
    while True:
        term = count_ball_estimate(lattice.rank, rho + 1 + spread, lattice.covolume) * math.exp(-math.pi * t * rho * rho)
        tail += term
        if term < 1e-30:
            break
        rho += 1.0
    return total, tail


def theta_check(lattice: Lattice, t) -> ThetaCheck:
    """Poisson summation check: theta of L at t against the scaled theta of the dual at 1/t"""
    t = float(t)
    if t <= 0:
        raise NonPositiveParameter(f"theta_check needs t > 0, got {t}", value=t)
    lhs, lhs_tail = _theta_sum(lattice, t)
    dual_sum, dual_tail = _theta_sum(lattice.dual, 1.0 / t)
    scale = 1.0 / (lattice.covolume * t ** (lattice.rank / 2))
    result = ThetaCheck(lhs=lhs, rhs=scale * dual_sum, error_bound=lhs_tail + scale * dual_tail)
    logger.debug(f"theta_check {lattice.describe()} t={t}: lhs={result.lhs} rhs={result.rhs}")
    return result


def minimal_vectors(lattice: Lattice, radius, budget: Optional[int] = None) -> List[LatticePoint]:
    """All nonzero lattice points of norm <= radius, by exhaustive coefficient-box search"""
    radius_value = to_float(radius) if is_exact(radius) else float(radius)
    if radius_value <= 0:
        raise NonPositiveParameter(f"minimal_vectors needs radius > 0, got {radius}", value=radius)
    budget = resolve_budget(budget)
    dual_norms = np.linalg.norm(lattice.dual.basis_float, axis=1) if lattice.rank else np.zeros(0)
    bounds = [int(math.floor(radius_value * norm + 1e-9)) for norm in dual_norms]
    box_size = math.prod(2 * b + 1 for b in bounds)
    if box_size > budget:
        raise RadiusTooLargeForBudget(
            f"Coefficient box of {box_size} points for radius {radius} exceeds budget {budget}",
            estimate=box_size, budget=budget
        )
    radius_sq_exact = to_scalar(radius) ** 2 if (lattice.exact and is_exact(radius)) else None
    radius_sq = radius_value * radius_value
    gram = lattice.gram if lattice.exact else None
    gram_float = np.array([[to_float(x) for x in row] for row in gram]) if lattice.exact else lattice.gram
    found = []
    ranges = [range(-b, b + 1) for b in bounds]
    candidates = itertools.product(*ranges)
    while True:
        chunk = list(itertools.islice(candidates, 65536))
        if not chunk:
            break
        coeffs = np.array(chunk, dtype=float)
        norms = np.einsum("ij,jk,ik->i", coeffs, gram_float, coeffs)
        for row, norm in zip(chunk, norms):
            if not any(row):
                continue
            if norm < radius_sq * (1 - 1e-9):
                keep = True
            elif norm > radius_sq * (1 + 1e-9):
                keep = False
            elif radius_sq_exact is not None:
                exact_norm = dot(row, [dot(row, g) for g in gram])
                keep = compare(exact_norm, radius_sq_exact) <= 0
            else:
                keep = norm <= radius_sq
            if keep:
                found.append((float(norm), row))
    found.sort()
    logger.debug(f"minimal_vectors {lattice.describe()} radius={radius}: {len(found)} points")
    return [LatticePoint(row, lattice) for _, row in found]
