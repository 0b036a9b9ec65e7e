"""
Structural decomposition of a lattice against a subspace F.

Given a lattice and a subspace F with exact scalars, computes the group of
dual vectors lying in F, its span V, the complement V^perp, the sublattice of
points in V^perp, the dual of the F-part inside V, and one lattice point over
each point of that dual (slice representatives). Every SplitData is checked
against the covolume identity and the representative equations before it is
returned.
"""
import logging
import math
from dataclasses import dataclass, field as dataclass_field
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from exact_scalar import (
    FieldElement, GeometryError, UnsupportedScalarKind, common_field, determinant,
    dot, identity, inverse, is_exact, mat_mul, nullspace, rank, to_float,
    to_scalar, transpose,
)
from lattice_core import (
    Lattice, LatticePoint, RadiusTooLargeForBudget, block_coefficients,
    count_ball_estimate, enumerate_near, resolve_budget,
)

logger = logging.getLogger(__name__)

KIND_RATIONAL = "rational"
KIND_NUMBER_FIELD = "number-field"
INTERSECTION_RATIO_FLOOR = 1e-10


class InvalidSubspace(GeometryError):
    """Raised when subspace rows are dependent or malformed"""


class InvariantViolation(GeometryError):
    """Raised when a computed decomposition fails its own consistency checks"""


class NotInDualSliceLattice(GeometryError):
    """Raised when a point is not in the dual lattice of the F-part"""


class SubspaceSpec:
    """Linear subspace of R^n spanned by exact rows"""

    def __init__(self, rows: Sequence[Sequence[Any]], dim: Optional[int] = None, label: str = ""):
        rows = [list(row) for row in rows]
        if dim is None:
            if not rows:
                raise InvalidSubspace("dim is required for the zero subspace")
            dim = len(rows[0])
        for row in rows:
            if len(row) != dim:
                raise InvalidSubspace(f"Subspace row {row} does not have length {dim}")
            for x in row:
                if not is_exact(x):
                    raise UnsupportedScalarKind(
                        f"Subspace rows must be exact scalars, got {type(x).__name__} {x!r}", value=x
                    )
        self.dim = dim
        self.rows = tuple(tuple(to_scalar(x) for x in row) for row in rows)
        self.field = common_field(x for row in self.rows for x in row)
        self.kind = KIND_NUMBER_FIELD if self.field is not None else KIND_RATIONAL
        self.label = label
        if self.rows and rank(self.rows) < len(self.rows):
            raise InvalidSubspace(f"Subspace rows {self.describe()} are linearly dependent")

    @classmethod
    def axes(cls, dim: int, indices: Sequence[int], label: str = "") -> "SubspaceSpec":
        rows = [[int(i == j) for j in range(dim)] for i in indices]
        return cls(rows, dim=dim, label=label or f"axes{tuple(indices)}")

    @property
    def p(self) -> int:
        return len(self.rows)

    def describe(self) -> str:
        return self.label or f"span{[[str(x) for x in row] for row in self.rows]}"

    def __repr__(self):
        return f"SubspaceSpec({self.describe()}, dim={self.dim})"

    def complement(self) -> "SubspaceSpec":
        rows = nullspace(self.rows, width=self.dim) if self.rows else identity(self.dim)
        return SubspaceSpec(rows, dim=self.dim, label=f"complement({self.describe()})")

    @cached_property
    def projector(self) -> List[List[Any]]:
        """Exact orthogonal projector F^T (F F^T)^{-1} F"""
        if not self.rows:
            return [[Fraction(0)] * self.dim for _ in range(self.dim)]
        gram_inv = inverse(mat_mul(self.rows, transpose(self.rows)))
        return mat_mul(transpose(self.rows), mat_mul(gram_inv, self.rows))

    @cached_property
    def projector_float(self) -> np.ndarray:
        frame = self.frame_float
        return frame.T @ frame if frame.size else np.zeros((self.dim, self.dim))

    @cached_property
    def frame_float(self) -> np.ndarray:
        """Orthonormal rows spanning the subspace"""
        return orthonormal_frame(np.array([[to_float(x) for x in row] for row in self.rows], dtype=float), self.dim)

    def project(self, vector: Sequence[Any]) -> List[Any]:
        return [dot(row, vector) for row in self.projector]

    def coordinate_indices(self) -> Optional[Tuple[int, ...]]:
        """Axis indices when the subspace is spanned by standard basis vectors"""
        indices = []
        for row in self.rows:
            nonzero = [i for i, x in enumerate(row) if x != 0]
            if len(nonzero) != 1:
                return None
            indices.append(nonzero[0])
        return tuple(sorted(indices))


def orthonormal_frame(rows: np.ndarray, dim: int) -> np.ndarray:
    if rows.size == 0:
        return np.zeros((0, dim))
    q, _ = np.linalg.qr(rows.T)
    return q.T[:rows.shape[0]]


def hermite_reduce(matrix: Sequence[Sequence[int]]) -> Tuple[List[List[int]], List[List[int]], int]:
    """
    Row-reduce an integer matrix with unimodular operations.

    Returns (H, U, rank) with U A = H, H in row echelon form with its nonzero
    rows first. Rows of U past the rank span the integer left kernel of A.
    """
    n = len(matrix)
    m = len(matrix[0]) if n else 0
    work = [list(map(int, row)) + [int(i == j) for j in range(n)] for i, row in enumerate(matrix)]
    pivot_row = 0
    for col in range(m):
        if pivot_row == n:
            break
        while True:
            candidates = [i for i in range(pivot_row, n) if work[i][col] != 0]
            if not candidates:
                break
            best = min(candidates, key=lambda i: abs(work[i][col]))
            work[pivot_row], work[best] = work[best], work[pivot_row]
            settled = True
            for i in range(pivot_row + 1, n):
                if work[i][col]:
                    factor = work[i][col] // work[pivot_row][col]
                    work[i] = [a - factor * b for a, b in zip(work[i], work[pivot_row])]
                    if work[i][col]:
                        settled = False
            if settled:
                break
        if work[pivot_row][col] != 0:
            if work[pivot_row][col] < 0:
                work[pivot_row] = [-a for a in work[pivot_row]]
            pivot_row += 1
    return [row[:m] for row in work], [row[m:] for row in work], pivot_row


def integer_left_kernel(matrix: Sequence[Sequence[int]], rows: Optional[int] = None) -> List[List[int]]:
    """Basis of {c in Z^n : c A = 0}, saturated by construction"""
    if not matrix:
        return []
    if not matrix[0]:
        return [[int(i == j) for j in range(len(matrix))] for i in range(len(matrix))]
    _, transform, rank_ = hermite_reduce(matrix)
    return transform[rank_:]


def _expand(value, field) -> List[Fraction]:
    degree = field.degree if field is not None else 1
    if isinstance(value, FieldElement):
        return list(value.coords)
    return [to_scalar(value)] + [Fraction(0)] * (degree - 1)


def _integer_columns(matrix: List[List[Fraction]]) -> List[List[int]]:
    """Scale each column by the lcm of its denominators"""
    if not matrix or not matrix[0]:
        return [[] for _ in matrix]
    scales = []
    for col in zip(*matrix):
        lcm = 1
        for q in col:
            lcm = lcm * q.denominator // math.gcd(lcm, q.denominator)
        scales.append(lcm)
    return [[int(q * s) for q, s in zip(row, scales)] for row in matrix]


def _check_scalar_kinds(lattice: Lattice, subspace: SubspaceSpec):
    if subspace.dim != lattice.dim:
        raise InvalidSubspace(f"Subspace dim {subspace.dim} does not match lattice dim {lattice.dim}")
    if lattice.exact and lattice.field is not None and subspace.field is not None \
            and lattice.field.key != subspace.field.key:
        raise UnsupportedScalarKind(
            f"Lattice over {lattice.field} and subspace over {subspace.field} do not share a field"
        )


def _certified_generators(lattice: Lattice, subspace: SubspaceSpec) -> List[List[float]]:
    """F-part of the dual for float-backed algebraic lattices"""
    indices = subspace.coordinate_indices()
    if indices is not None and lattice.blocks:
        if any(not set(block) & set(indices) for block in lattice.blocks):
            # Nonzero dual points have every embedding block nonzero.
            return []
    raise UnsupportedScalarKind(
        f"Cannot compute the F-part of float-backed {lattice.describe()} for {subspace.describe()}: "
        "only coordinate subspaces missing a whole embedding block are certified"
    )


def gamma_F(lattice: Lattice, subspace: SubspaceSpec) -> List[List[Any]]:
    """Basis of the group of dual-lattice vectors lying in the subspace"""
    _check_scalar_kinds(lattice, subspace)
    n = lattice.dim
    if subspace.p == 0:
        return []
    dual = lattice.dual
    if subspace.p == n:
        return [list(row) for row in (dual.basis if dual.exact else dual.basis_float.tolist())]
    if not lattice.exact:
        return _certified_generators(lattice, subspace)

    complement = subspace.complement().rows
    field = common_field([x for row in dual.basis for x in row] + [x for row in complement for x in row])
    system = []
    for d in dual.basis:
        expanded = []
        for h in complement:
            expanded.extend(_expand(dot(d, h), field))
        system.append(expanded)
    kernel = integer_left_kernel(_integer_columns(system))
    generators = []
    for coeffs in kernel:
        vector = [Fraction(0)] * n
        for c, d in zip(coeffs, dual.basis):
            if c:
                vector = [v + c * x for v, x in zip(vector, d)]
        generators.append(vector)
    logger.debug(f"gamma_F {lattice.describe()} / {subspace.describe()}: rank {len(generators)}")
    return generators


@dataclass
class SplitData:
    lattice: Lattice
    F: SubspaceSpec
    H: SubspaceSpec
    gamma_f: Lattice
    v_perp: List[List[Any]]
    gamma_perp: Lattice
    gamma_f_dual: Lattice
    rep_coeffs: List[Tuple[int, ...]]
    perp_coeffs: List[Tuple[int, ...]]
    identity_residual: float
    checks: Dict[str, Any] = dataclass_field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.lattice.dim

    @property
    def p(self) -> int:
        return self.F.p

    @property
    def q(self) -> int:
        return self.n - self.p

    @property
    def r(self) -> int:
        return self.gamma_f.rank

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        return self.n, self.p, self.q, self.r

    @property
    def exact(self) -> bool:
        return self.lattice.exact

    @property
    def generators(self):
        return self.gamma_f.basis if self.gamma_f.exact else self.gamma_f.basis_float.tolist()

    @cached_property
    def v_frame(self) -> np.ndarray:
        return orthonormal_frame(self.gamma_f.basis_float, self.n)

    @cached_property
    def v_perp_frame(self) -> np.ndarray:
        return orthonormal_frame(np.array([[to_float(x) for x in row] for row in self.v_perp], dtype=float).reshape(-1, self.n), self.n)

    def project_v_float(self, vector) -> np.ndarray:
        frame = self.v_frame
        vector = np.asarray(vector, dtype=float)
        return frame.T @ (frame @ vector) if frame.size else np.zeros(self.n)

    def dual_coefficients(self, gamma_star: Sequence[Any]) -> Tuple[int, ...]:
        """Integers m_i with gamma_star = sum m_i l*_i, where m_i = (gamma_star, g_i)"""
        coeffs = []
        if self.gamma_f.exact and all(is_exact(x) for x in gamma_star):
            for g in self.gamma_f.basis:
                m = dot(gamma_star, g)
                if isinstance(m, FieldElement):
                    if not m.is_rational():
                        raise NotInDualSliceLattice(f"{gamma_star} pairs irrationally with a generator")
                    m = m.coords[0]
                if m.denominator != 1:
                    raise NotInDualSliceLattice(f"{gamma_star} is not in the dual of the F-part")
                coeffs.append(int(m))
        else:
            values = self.gamma_f.basis_float @ np.asarray([to_float(x) if is_exact(x) else float(x) for x in gamma_star])
            for m in values:
                if abs(m - round(m)) > 1e-9:
                    raise NotInDualSliceLattice(f"{gamma_star} is not in the dual of the F-part")
                coeffs.append(int(round(m)))
        return tuple(coeffs)

    def dual_point(self, m: Sequence[int]) -> List[Any]:
        if self.gamma_f_dual.exact:
            return self.gamma_f_dual.embed(m) if self.r else [Fraction(0)] * self.n
        return list(self.gamma_f_dual.embed_float(m))

    def representative(self, m: Sequence[int]) -> LatticePoint:
        """Lattice point over the dual point with coefficients m, additive in m"""
        coeffs = [0] * self.lattice.rank
        for mi, rep in zip(m, self.rep_coeffs):
            if mi:
                coeffs = [c + mi * x for c, x in zip(coeffs, rep)]
        return self.lattice.point(coeffs)

    def perp_point(self, coeffs: Sequence[int]) -> Tuple[int, ...]:
        """Coefficients in the full lattice of a point of the V^perp sublattice"""
        total = [0] * self.lattice.rank
        for c, row in zip(coeffs, self.perp_coeffs):
            if c:
                total = [t + c * x for t, x in zip(total, row)]
        return tuple(total)

    def summary(self) -> Dict[str, Any]:
        n, p, q, r = self.dims
        return {
            "n": n, "p": p, "q": q, "r": r,
            "covolume": self.lattice.covolume,
            "covolume_perp": self.gamma_perp.covolume,
            "covolume_f": self.gamma_f.covolume,
            "identity_residual": self.identity_residual,
        }


def slice_representative(sd: SplitData, gamma_star: Sequence[Any]) -> LatticePoint:
    return sd.representative(sd.dual_coefficients(gamma_star))


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _exact_split(lattice: Lattice, subspace: SubspaceSpec, generators: List[List[Any]]) -> SplitData:
    n = lattice.dim
    basis = [list(row) for row in lattice.basis]
    r = len(generators)
    gamma_f = Lattice(generators, dim=n, label="Gamma_F")

    pairing = []
    for b in basis:
        row = []
        for g in generators:
            value = dot(b, g)
            if isinstance(value, FieldElement):
                if not value.is_rational():
                    raise InvariantViolation("Generator pairs irrationally with a lattice vector")
                value = value.coords[0]
            if value.denominator != 1:
                raise InvariantViolation(f"Generator pairs non-integrally with a lattice vector: {value}")
            row.append(int(value))
        pairing.append(row)

    if r:
        echelon, transform, rank_ = hermite_reduce(pairing)
        if rank_ != r:
            raise InvariantViolation(f"Pairing matrix has rank {rank_}, expected {r}")
        perp_coeffs = [tuple(row) for row in transform[r:]]
    else:
        echelon, transform, rank_ = [], identity(n), 0
        perp_coeffs = [tuple(int(i == j) for j in range(n)) for i in range(n)]

    perp_rows = [lattice.embed(c) for c in perp_coeffs]
    gamma_perp = Lattice(perp_rows, dim=n, label="Gamma_perp")
    gamma_f_dual = gamma_f.dual
    v_perp = nullspace(generators) if r else identity(n)

    rep_coeffs = []
    if r:
        top = [[Fraction(x) for x in echelon[i]] for i in range(r)]
        top_inv = inverse(top)
        for i in range(r):
            y = top_inv[i]
            if any(v.denominator != 1 for v in y):
                raise InvariantViolation("Slice representative system has no integer solution")
            coeffs = [0] * n
            for yj, u in zip(y, transform[:r]):
                coeffs = [c + int(yj) * x for c, x in zip(coeffs, u)]
            rep_coeffs.append(_reduce_modulo_perp(lattice, coeffs, gamma_f_dual.basis[i], perp_coeffs, gamma_perp))

    # Covolume identity, squared so that it stays exact.
    lhs = gamma_perp.gram_determinant
    rhs = determinant(basis) ** 2 * gamma_f.gram_determinant
    if lhs != rhs:
        raise InvariantViolation(f"Covolume identity fails: {lhs} != {rhs}")
    for i, coeffs in enumerate(rep_coeffs):
        point = lattice.embed(coeffs)
        for j, g in enumerate(generators):
            if dot(point, g) != int(i == j):
                raise InvariantViolation(f"Representative {i} does not project onto its dual point")
    residual = abs(gamma_perp.covolume - lattice.covolume * gamma_f.covolume)

    return SplitData(
        lattice=lattice, F=subspace, H=subspace.complement(), gamma_f=gamma_f, v_perp=v_perp,
        gamma_perp=gamma_perp, gamma_f_dual=gamma_f_dual, rep_coeffs=rep_coeffs,
        perp_coeffs=perp_coeffs, identity_residual=residual,
        checks={"identity": "exact", "representatives": len(rep_coeffs)},
    )


def _reduce_modulo_perp(lattice: Lattice, coeffs: List[int], target, perp_coeffs, gamma_perp: Lattice) -> Tuple[int, ...]:
    """Shift a representative by the nearest point of the V^perp sublattice"""
    if not perp_coeffs:
        return tuple(coeffs)
    point = lattice.embed(coeffs)
    offset = [a - b for a, b in zip(point, target)]
    shifts = [_round_half_up(to_float(x)) for x in gamma_perp.coefficients(offset)]
    for s, row in zip(shifts, perp_coeffs):
        if s:
            coeffs = [c - s * x for c, x in zip(coeffs, row)]
    return tuple(coeffs)


def _float_split(lattice: Lattice, subspace: SubspaceSpec, generators) -> SplitData:
    n = lattice.dim
    if not generators:
        gamma_f = Lattice([], dim=n, label="Gamma_F")
        gamma_perp = lattice
        perp_coeffs = [tuple(int(i == j) for j in range(n)) for i in range(n)]
        rep_coeffs = []
        v_perp = identity(n)
    else:
        gamma_f = lattice.dual
        gamma_perp = Lattice([], dim=n, label="Gamma_perp")
        perp_coeffs = []
        rep_coeffs = [tuple(int(i == j) for j in range(n)) for i in range(n)]
        v_perp = []
    gamma_f_dual = gamma_f.dual
    expected = lattice.covolume * gamma_f.covolume
    residual = abs(gamma_perp.covolume - expected)
    if residual > 1e-12 * max(1.0, expected):
        raise InvariantViolation(f"Covolume identity fails: residual {residual}")
    return SplitData(
        lattice=lattice, F=subspace, H=subspace.complement(), gamma_f=gamma_f, v_perp=v_perp,
        gamma_perp=gamma_perp, gamma_f_dual=gamma_f_dual, rep_coeffs=rep_coeffs,
        perp_coeffs=perp_coeffs, identity_residual=residual,
        checks={"identity": "float", "representatives": len(rep_coeffs)},
    )


def split(lattice: Lattice, subspace: SubspaceSpec) -> SplitData:
    """Full decomposition of the lattice against F, with all invariants checked"""
    if not lattice.full_rank:
        raise UnsupportedScalarKind(f"{lattice.describe()} is not full rank")
    generators = gamma_F(lattice, subspace)
    if lattice.exact:
        sd = _exact_split(lattice, subspace, generators)
    else:
        sd = _float_split(lattice, subspace, generators)
    n, p, q, r = sd.dims
    logger.info(
        f"Split {lattice.describe()} by {subspace.describe()}: n={n} p={p} q={q} r={r}, "
        f"covolume of V^perp part {sd.gamma_perp.covolume:.12g}"
    )
    return sd


@dataclass
class IntersectionCertificate:
    radius: float
    points_checked: int
    min_ratio: float
    intersection_dim: int
    violations: List[Tuple[int, ...]] = dataclass_field(default_factory=list)

    @property
    def vacuous(self) -> bool:
        return self.intersection_dim == 0

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_trivial_intersection(sd: SplitData, search_radius: float, budget: Optional[int] = None) -> IntersectionCertificate:
    """Search the dual of the V^perp sublattice for points lying in F meet V^perp"""
    radius = float(search_radius)
    if radius <= 0:
        raise ValueError(f"search_radius must be positive, got {search_radius}")
    constraints = list(sd.H.rows) + [list(row) for row in (sd.gamma_f.basis if sd.gamma_f.exact else [])]
    if not sd.gamma_f.exact and sd.r:
        intersection = []
    else:
        intersection = nullspace(constraints) if constraints else identity(sd.n)
    if not intersection:
        return IntersectionCertificate(radius=radius, points_checked=0, min_ratio=1.0, intersection_dim=0)

    frame = orthonormal_frame(np.array([[to_float(x) for x in row] for row in intersection], dtype=float), sd.n)
    dual = sd.gamma_perp.dual
    budget = resolve_budget(budget)
    estimate = count_ball_estimate(dual.rank, radius, dual.covolume) if dual.rank else 1
    if estimate > budget:
        raise RadiusTooLargeForBudget(
            f"About {estimate:.3g} dual points within radius {radius} exceed budget {budget}",
            estimate=estimate, budget=budget
        )
    basis = dual.basis_float
    checked = 0
    best = math.inf
    violations = []
    for rest, lo, hi in enumerate_near(basis, np.zeros(sd.n), radius):
        coeffs = block_coefficients(rest, lo, hi, dual.rank)
        points = coeffs @ basis
        norms = np.linalg.norm(points, axis=1)
        mask = norms > 0
        if not mask.any():
            continue
        points, norms, coeffs = points[mask], norms[mask], coeffs[mask]
        residual = points - (points @ frame.T) @ frame
        ratios = np.linalg.norm(residual, axis=1) / norms
        checked += len(ratios)
        best = min(best, float(ratios.min()))
        for row, ratio in zip(coeffs, ratios):
            if ratio < INTERSECTION_RATIO_FLOOR:
                violations.append(tuple(int(c) for c in row))
    if violations:
        logger.warning(f"Trivial-intersection check found {len(violations)} dual points in F meet V^perp")
    return IntersectionCertificate(
        radius=radius, points_checked=checked, min_ratio=best if checked else 1.0,
        intersection_dim=len(intersection), violations=violations,
    )


def slice_window(sd: SplitData, center: Sequence[float], radius: float, slack: float = 1e-6) -> List[Tuple[Tuple[int, ...], np.ndarray]]:
    """Dual points m (with float coordinates) whose slice can meet the ball B(center, radius)"""
    if sd.r == 0:
        return [((), np.zeros(sd.n))]
    basis = sd.gamma_f_dual.basis_float
    target = sd.project_v_float(center)
    window = []
    for rest, lo, hi in enumerate_near(basis, target, radius + slack, slack=0.0):
        coeffs = block_coefficients(rest, lo, hi, sd.r)
        for row in coeffs:
            m = tuple(int(c) for c in row)
            window.append((m, np.asarray(row, dtype=float) @ basis))
    return window
