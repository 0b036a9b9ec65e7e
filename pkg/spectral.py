"""
Laplace eigenvalues of flat tori in the adiabatic limit.

The metric is folded into the dual lattice by an exact congruence
y = C^T k with g^{-1} = C C^T, so the eigenvalue count becomes an ordinary
lattice point count in a Euclidean ball and reuses the counting engine.
"""
import logging
import math
from fractions import Fraction
from functools import cached_property
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from counting import DEFAULT_TOL, CountResult, count
from domains import AnisoMap, Ball, unit_ball_volume
from exact_scalar import (
    GeometryError, UnsupportedScalarKind, determinant, identity, inverse, mat_vec,
    to_float, to_scalar, transpose,
)
from lattice_core import Lattice, NonPositiveParameter, block_coefficients, enumerate_near
from splitter import SplitData, SubspaceSpec, gamma_F, split

logger = logging.getLogger(__name__)

FOUR_PI_SQ = 4 * math.pi ** 2


class UnsupportedMetric(GeometryError):
    """Raised when a metric is not positive definite or has no exact rational factor"""


class InvalidDims(GeometryError):
    """Raised when partial density of states dimensions are out of range"""


def _rational_sqrt(value: Fraction) -> Optional[Fraction]:
    if value <= 0:
        return None
    num, den = value.numerator, value.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    return Fraction(rn, rd) if rn * rn == num and rd * rd == den else None


def exact_factor(matrix: Sequence[Sequence[Any]]) -> List[List[Fraction]]:
    """C with C C^T = matrix, from an LDL^T factorisation whose pivots are rational squares"""
    n = len(matrix)
    try:
        a = [[to_scalar(x) for x in row] for row in matrix]
    except UnsupportedScalarKind as e:
        raise UnsupportedMetric(f"Metric entries must be rational: {e}")
    if any(not isinstance(x, Fraction) for row in a for x in row):
        raise UnsupportedMetric("Metric entries must be rational")
    if any(a[i][j] != a[j][i] for i in range(n) for j in range(n)):
        raise UnsupportedMetric("Metric is not symmetric")
    lower = identity(n)
    pivots = []
    for j in range(n):
        d = a[j][j] - sum(lower[j][k] ** 2 * pivots[k] for k in range(j))
        if d <= 0:
            raise UnsupportedMetric("Metric is not positive definite")
        pivots.append(d)
        for i in range(j + 1, n):
            lower[i][j] = (a[i][j] - sum(lower[i][k] * lower[j][k] * pivots[k] for k in range(j))) / d
    roots = [_rational_sqrt(d) for d in pivots]
    if any(r is None for r in roots):
        raise UnsupportedMetric(f"LDL pivots {[str(d) for d in pivots]} are not all rational squares")
    return [[lower[i][j] * roots[j] for j in range(n)] for i in range(n)]


class FlatTorus:
    """E / Lambda with metric matrix G (standard coordinates) and foliation direction F"""

    def __init__(self, lattice: Lattice, metric: Optional[Sequence[Sequence[Any]]] = None,
                 subspace: Optional[SubspaceSpec] = None):
        if not (lattice.exact and lattice.full_rank):
            raise UnsupportedMetric("Flat tori need an exact full-rank lattice")
        self.lattice = lattice
        self.dim = lattice.dim
        self.metric = [[to_scalar(x) for x in row] for row in (metric or identity(self.dim))]
        self.subspace = subspace if subspace is not None else SubspaceSpec([], dim=self.dim)
        self.metric_inverse = inverse(self.metric)
        # Euclidean coordinates for covectors: |k|^2_{g^-1} = |C^T k|^2.
        self.congruence = transpose(exact_factor(self.metric_inverse))

    @cached_property
    def dual_lattice(self) -> Lattice:
        """C^T Lambda*, the dual lattice in Euclidean covector coordinates"""
        rows = [mat_vec(self.congruence, list(row)) for row in self.lattice.dual.basis]
        return Lattice(rows, label=f"C^T dual({self.lattice.describe()})")

    @cached_property
    def dual_subspace(self) -> SubspaceSpec:
        """Image of the annihilator of H, namely G F, in Euclidean covector coordinates"""
        rows = [mat_vec(self.congruence, mat_vec(self.metric, list(f))) for f in self.subspace.rows]
        return SubspaceSpec(rows, dim=self.dim, label=f"F*({self.subspace.describe()})")

    @cached_property
    def split_data(self) -> SplitData:
        return split(self.dual_lattice, self.dual_subspace)

    @cached_property
    def volume(self) -> float:
        """vol(E / Lambda) in the metric g"""
        return self.lattice.covolume * math.sqrt(to_float(determinant(self.metric)))

    def aniso(self, eps) -> AnisoMap:
        return AnisoMap(self.dual_subspace, eps)

    def covector_coordinates(self, k: Sequence[Any]) -> List[Any]:
        return mat_vec(self.congruence, [to_scalar(x) for x in k])

    def describe(self) -> str:
        return f"torus({self.lattice.describe()}, F={self.subspace.describe()})"


def eigenvalue(torus: FlatTorus, k: Sequence[Any], eps) -> float:
    """4 pi^2 |T_eps^-1 k|^2 in the dual metric, for k in the dual lattice"""
    y = np.array([to_float(x) for x in torus.covector_coordinates(k)])
    z = torus.aniso(eps).inverse(y)
    return FOUR_PI_SQ * float(z @ z)


def _ball(lam, scaled: bool, dim: int) -> Ball:
    if scaled:
        return Ball([0] * dim, radius_sq=lam)
    if not to_float(lam) > 0:
        raise NonPositiveParameter(f"lambda must be positive, got {lam}")
    return Ball([0] * dim, radius_sq=to_float(lam) / FOUR_PI_SQ)


def counting_function(torus: FlatTorus, lam, eps, scaled: bool = False, tol: float = DEFAULT_TOL,
                      budget: Optional[int] = None, workers: int = 1) -> CountResult:
    """
    N_eps(lambda) = #{k : lambda_k < lambda}.

    With scaled=True, lam is lambda / 4 pi^2 and is kept exact, so eigenvalues
    equal to the threshold are decided exactly instead of reported as boundary hits.
    """
    ball = _ball(lam, scaled, torus.dim)
    return count(torus.dual_lattice, torus.dual_subspace, ball, eps, tol=tol, budget=budget,
                 workers=workers, sd=torus.split_data)


def leading_term_spectral(torus: FlatTorus, lam, eps, scaled: bool = False) -> float:
    """
    eps^-q omega_{n-r} vol(E/Lambda) / vol(V / Lambda meet F) times the sum over the
    dual of Lambda meet F of (rho^2 - |k|^2)^((n-r)/2), with rho^2 = lambda / 4 pi^2.
    """
    rho_sq = to_float(lam) if scaled else to_float(lam) / FOUR_PI_SQ
    if not rho_sq > 0:
        raise NonPositiveParameter(f"lambda must be positive, got {lam}")
    eps_f = to_float(eps)
    n = torus.dim
    q = n - torus.subspace.p
    generators = gamma_F(torus.lattice.dual, torus.subspace)
    r = len(generators)
    g = np.array([[to_float(x) for x in row] for row in torus.metric])
    if r:
        basis = np.array([[to_float(x) for x in row] for row in generators])
        gram = basis @ g @ basis.T
        fiber_volume = math.sqrt(np.linalg.det(gram))
        # Dual covectors of Lambda meet F have Gram matrix gram^-1 in the dual metric.
        dual_basis = np.linalg.cholesky(np.linalg.inv(gram)).T
    else:
        fiber_volume = 1.0
        dual_basis = np.zeros((0, 0))
    rho = math.sqrt(rho_sq)
    total = 0.0
    for rest, lo, hi in enumerate_near(dual_basis, np.zeros(r), rho):
        coeffs = block_coefficients(rest, lo, hi, r)
        points = coeffs @ dual_basis if r else np.zeros((1, 0))
        gaps = rho_sq - np.einsum("ij,ij->i", points, points)
        total += float(np.sum(np.clip(gaps, 0.0, None) ** ((n - r) / 2)))
    return eps_f ** (-q) * unit_ball_volume(n - r) * torus.volume / fiber_volume * total


def eigenvalues_below(torus: FlatTorus, lam, eps, scaled: bool = False, limit: Optional[int] = None) -> List[Tuple[float, Tuple[int, ...]]]:
    """Sorted (eigenvalue, dual-lattice coefficients) pairs with eigenvalue < lambda"""
    rho_sq = to_float(lam) if scaled else to_float(lam) / FOUR_PI_SQ
    basis = torus.aniso(eps).inverse(torus.dual_lattice.basis_float)
    found = []
    for rest, lo, hi in enumerate_near(basis, np.zeros(torus.dim), math.sqrt(rho_sq)):
        coeffs = block_coefficients(rest, lo, hi, torus.dim)
        points = coeffs @ basis
        norms = np.einsum("ij,ij->i", points, points)
        for row, norm in zip(coeffs, norms):
            if norm < rho_sq:
                found.append((FOUR_PI_SQ * float(norm), tuple(int(c) for c in row)))
    found.sort()
    return found[:limit] if limit is not None else found


def partial_density_of_states(rho, center: Sequence[float], d: int, k: int) -> float:
    """omega_l sum over gamma in Z^k with |gamma - center| < rho of (rho^2 - |gamma - center|^2)^(l/2), l = d - k"""
    if not 0 < k < d:
        raise InvalidDims(f"Need 0 < k < d, got d={d} k={k}", d=d, k=k)
    if len(center) != k:
        raise InvalidDims(f"Center has {len(center)} coordinates, expected {k}", d=d, k=k)
    rho = float(rho)
    if rho < 0:
        raise NonPositiveParameter(f"rho must be nonnegative, got {rho}")
    ell = d - k
    target = np.asarray(center, dtype=float)
    basis = np.eye(k)
    total = 0.0
    for rest, lo, hi in enumerate_near(basis, target, rho):
        points = block_coefficients(rest, lo, hi, k).astype(float)
        gaps = rho * rho - np.sum((points - target) ** 2, axis=1)
        total += float(np.sum(gaps[gaps > 0] ** (ell / 2)))
    return unit_ball_volume(ell) * total


def pdos_remainder(rho, center: Sequence[float], d: int, k: int) -> float:
    """Partial density of states minus its volume term omega_d rho^d"""
    return partial_density_of_states(rho, center, d, k) - unit_ball_volume(d) * float(rho) ** d
