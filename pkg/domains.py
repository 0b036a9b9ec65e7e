"""
Bounded open domains and the anisotropic scaling map.

Every domain exposes a normalised gauge: negative inside, positive outside,
zero on the boundary, with magnitude comparable to relative distance. The
classification tolerance is applied to that gauge. Exact membership is
available whenever the domain parameters are exact scalars.
"""
import logging
import math
from fractions import Fraction
from functools import cached_property
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, spatial
from scipy.stats import qmc

from exact_scalar import (
    GeometryError, compare, dot, is_exact, mat_vec, to_float, to_scalar,
)
from lattice_core import NonPositiveParameter
from splitter import SubspaceSpec

logger = logging.getLogger(__name__)

INSIDE = "inside"
OUTSIDE = "outside"
BOUNDARY = "boundary"

CODE_INSIDE = 1
CODE_BOUNDARY = 0
CODE_OUTSIDE = -1

KIND_BALL = "ball"
KIND_ELLIPSOID = "ellipsoid"
KIND_BOX = "box"
KIND_PRODUCT = "product"
KIND_ORACLE = "oracle"
KIND_LP_BALL = "lp_ball"

DIRECTION_FORWARD = "forward"
DIRECTION_INVERSE = "inverse"

QMC_SEED = 0x5EED
QMC_SAMPLES = 2 ** 16
QMC_REPLICATES = 16
FRAME_TOLERANCE = 1e-9


class OracleFailure(GeometryError):
    """Raised when a membership or support oracle fails or returns a non-finite value"""


class DegenerateFrame(GeometryError):
    """Raised when a frame is not orthonormal"""


class UnsupportedKind(GeometryError):
    """Raised when an operation is not available for a domain kind"""


def unit_ball_volume(k: int) -> float:
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def _scalar(value) -> Any:
    """Exact scalar for ints, fractions and "p/q" strings; floats pass through"""
    return value if isinstance(value, float) else to_scalar(value)


def _floats(values) -> np.ndarray:
    return np.array([to_float(x) for x in values], dtype=float)


def _exact_tuple(values) -> Optional[tuple]:
    if all(is_exact(x) for x in values):
        return tuple(to_scalar(x) for x in values)
    return None


def _positive(name: str, value) -> Any:
    value = _scalar(value)
    number = to_float(value)
    if not number > 0:
        raise NonPositiveParameter(f"{name} must be positive, got {value}", value=value)
    return to_scalar(value) if is_exact(value) else float(value)


def check_frame(frame, dim: Optional[int] = None) -> np.ndarray:
    """Validate an orthonormal frame (rows) and return it as floats"""
    frame = np.asarray(frame, dtype=float)
    if frame.ndim != 2 or (dim is not None and frame.shape[1] != dim) or frame.shape[0] > frame.shape[1]:
        raise DegenerateFrame(f"Frame of shape {frame.shape} is not a set of orthonormal rows in R^{dim}")
    if frame.shape[0] and np.abs(frame @ frame.T - np.eye(frame.shape[0])).max() > FRAME_TOLERANCE:
        raise DegenerateFrame("Frame rows are not orthonormal")
    return frame


class Domain:
    """Base class for bounded open domains in R^dim"""

    kind = ""
    dim = 0
    qmc_seed = QMC_SEED
    qmc_samples = QMC_SAMPLES

    @property
    def exact(self) -> bool:
        return False

    def gauge(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains_exact(self, point: Sequence[Any]) -> Optional[bool]:
        """Exact strict membership, or None when the domain has inexact data"""
        return None

    def support(self, direction) -> float:
        raise NotImplementedError

    def circumball(self) -> Tuple[np.ndarray, float]:
        raise NotImplementedError

    def volume(self) -> float:
        raise NotImplementedError

    @property
    def strictly_convex(self) -> bool:
        return False

    def configure_qmc(self, seed: int = QMC_SEED, samples: int = QMC_SAMPLES) -> "Domain":
        self.qmc_seed = int(seed)
        self.qmc_samples = int(samples)
        return self

    def erode_dilate(self, delta) -> Tuple["Domain", "Domain"]:
        raise UnsupportedKind(f"erode_dilate is not available for {self.kind} domains", kind=self.kind)

    def slice_volume(self, base, frame) -> Tuple[float, float]:
        return qmc_slice_volume(self, base, frame, samples=self.qmc_samples, seed=self.qmc_seed)

    def describe(self) -> str:
        return f"{self.kind}(dim={self.dim})"

    def __repr__(self):
        return self.describe()


class Ellipsoid(Domain):
    """{z : (z - c)^T A (z - c) < 1} with A positive definite"""

    kind = KIND_ELLIPSOID

    def __init__(self, center: Sequence[Any], shape: Sequence[Sequence[Any]]):
        self.dim = len(center)
        self.center = tuple(_scalar(x) for x in center)
        self.center_f = _floats(center)
        self.shape = [[_scalar(x) for x in row] for row in shape]
        self.shape_f = np.array([[to_float(x) for x in row] for row in shape], dtype=float)
        if self.shape_f.shape != (self.dim, self.dim):
            raise ValueError(f"Shape matrix must be {self.dim}x{self.dim}")
        if not np.allclose(self.shape_f, self.shape_f.T):
            raise NonPositiveParameter("Shape matrix is not symmetric")
        try:
            np.linalg.cholesky(self.shape_f)
        except np.linalg.LinAlgError:
            raise NonPositiveParameter("Shape matrix is not positive definite")

    @property
    def exact(self) -> bool:
        return _exact_tuple(self.center) is not None and all(is_exact(x) for row in self.shape for x in row)

    @cached_property
    def semi_axes(self) -> np.ndarray:
        return 1.0 / np.sqrt(np.linalg.eigvalsh(self.shape_f))

    def gauge(self, points):
        d = np.atleast_2d(points) - self.center_f
        return np.sqrt(np.einsum("ij,jk,ik->i", d, self.shape_f, d)) - 1.0

    def contains_exact(self, point):
        if not (self.exact and all(is_exact(x) for x in point)):
            return None
        d = [to_scalar(z) - c for z, c in zip(point, self.center)]
        return compare(dot(d, mat_vec(self.shape, d)), 1) < 0

    def support(self, direction):
        u = np.asarray(direction, dtype=float)
        return float(self.center_f @ u + math.sqrt(u @ np.linalg.solve(self.shape_f, u)))

    def circumball(self):
        return self.center_f.copy(), float(self.semi_axes.max())

    def volume(self):
        return unit_ball_volume(self.dim) / math.sqrt(np.linalg.det(self.shape_f))

    @property
    def strictly_convex(self):
        return True

    def slice_volume(self, base, frame):
        frame = check_frame(frame, self.dim)
        k = frame.shape[0]
        offset = np.asarray(base, dtype=float) - self.center_f
        restricted = frame @ self.shape_f @ frame.T
        linear = frame @ self.shape_f @ offset
        constant = float(offset @ self.shape_f @ offset)
        minimum = constant - float(linear @ np.linalg.solve(restricted, linear)) if k else constant
        if minimum >= 1.0:
            return 0.0, 0.0
        if k == 0:
            return 1.0, 0.0
        value = unit_ball_volume(k) * (1.0 - minimum) ** (k / 2) / math.sqrt(np.linalg.det(restricted))
        return value, 0.0

    def erode_dilate(self, delta):
        """
        Conservative bracket of the parallel bodies: the eroded ellipsoid lies inside
        the inner parallel body and the dilated one contains the outer.
        """
        delta = to_float(delta)
        if delta < 0:
            raise NonPositiveParameter(f"delta must be nonnegative, got {delta}")
        if delta == 0:
            return self, self
        # Homotheties about the center by 1 -+ delta / a_min bracket the parallel bodies.
        a_min = float(self.semi_axes.min())
        inner = 1.0 - delta / a_min
        if inner <= 0:
            raise NonPositiveParameter(f"Erosion by {delta} empties the ellipsoid")
        outer = 1.0 + delta / a_min
        return (Ellipsoid(self.center_f.tolist(), (self.shape_f / inner ** 2).tolist()),
                Ellipsoid(self.center_f.tolist(), (self.shape_f / outer ** 2).tolist()))

    def describe(self):
        return f"ellipsoid(center={list(self.center_f)})"


class Ball(Ellipsoid):
    """Open Euclidean ball; radius_sq keeps radii like sqrt(2) exact"""

    kind = KIND_BALL

    def __init__(self, center: Sequence[Any], radius=None, radius_sq=None):
        if (radius is None) == (radius_sq is None):
            raise ValueError("Ball needs exactly one of radius and radius_sq")
        if radius is not None:
            radius = _positive("radius", radius)
            radius_sq = radius * radius
        else:
            radius_sq = _positive("radius_sq", radius_sq)
        self.radius_sq = radius_sq
        self.radius = math.sqrt(to_float(radius_sq))
        inv = 1 / radius_sq
        n = len(center)
        super().__init__(center, [[inv if i == j else 0 for j in range(n)] for i in range(n)])

    def gauge(self, points):
        d = np.atleast_2d(points) - self.center_f
        return np.linalg.norm(d, axis=1) / self.radius - 1.0

    def contains_exact(self, point):
        if not (self.exact and all(is_exact(x) for x in point)):
            return None
        d = [to_scalar(z) - c for z, c in zip(point, self.center)]
        return compare(dot(d, d), self.radius_sq) < 0

    def support(self, direction):
        u = np.asarray(direction, dtype=float)
        return float(self.center_f @ u + self.radius * np.linalg.norm(u))

    def circumball(self):
        return self.center_f.copy(), self.radius

    def volume(self):
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    def erode_dilate(self, delta):
        if to_float(delta) < 0:
            raise NonPositiveParameter(f"delta must be nonnegative, got {delta}")
        if to_float(delta) == 0:
            return self, self
        r = self._exact_radius()
        if is_exact(delta) and r is not None:
            return Ball(self.center, radius=r - to_scalar(delta)), Ball(self.center, radius=r + to_scalar(delta))
        delta = to_float(delta)
        return Ball(self.center_f.tolist(), radius=self.radius - delta), Ball(self.center_f.tolist(), radius=self.radius + delta)

    def _exact_radius(self):
        """Exact radius when radius_sq is the square of a rational"""
        if not isinstance(self.radius_sq, Fraction):
            return None
        num, den = self.radius_sq.numerator, self.radius_sq.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        return Fraction(rn, rd) if rn * rn == num and rd * rd == den else None

    def describe(self):
        return f"ball(center={list(self.center_f)}, radius={self.radius:.6g})"


class Box(Domain):
    """Open box {z : |U (z - c)|_i < h_i} with orthonormal edge frame U (rows)"""

    kind = KIND_BOX

    def __init__(self, center: Sequence[Any], half_widths: Sequence[Any], frame: Optional[Sequence[Sequence[Any]]] = None):
        self.dim = len(center)
        if len(half_widths) != self.dim:
            raise ValueError(f"Box needs {self.dim} half-widths, got {len(half_widths)}")
        self.center = tuple(_scalar(x) for x in center)
        self.center_f = _floats(center)
        self.half_widths = tuple(_positive("half-width", h) for h in half_widths)
        self.half_widths_f = _floats(self.half_widths)
        if frame is None:
            frame = [[int(i == j) for j in range(self.dim)] for i in range(self.dim)]
        self.frame = [[_scalar(x) for x in row] for row in frame]
        self.frame_f = check_frame([[to_float(x) for x in row] for row in frame], self.dim)
        if self.frame_f.shape[0] != self.dim:
            raise DegenerateFrame(f"Box frame must have {self.dim} rows")
        if self._frame_exact:
            for i, a in enumerate(self.frame):
                for j, b in enumerate(self.frame):
                    if dot(a, b) != int(i == j):
                        raise DegenerateFrame("Exact box frame is not orthonormal")

    @property
    def _frame_exact(self) -> bool:
        return all(is_exact(x) for row in self.frame for x in row)

    @property
    def exact(self):
        return (self._frame_exact and _exact_tuple(self.center) is not None
                and all(is_exact(h) for h in self.half_widths))

    def gauge(self, points):
        local = (np.atleast_2d(points) - self.center_f) @ self.frame_f.T
        return np.max(np.abs(local) / self.half_widths_f, axis=1) - 1.0

    def contains_exact(self, point):
        if not (self.exact and all(is_exact(x) for x in point)):
            return None
        d = [to_scalar(z) - c for z, c in zip(point, self.center)]
        for row, h in zip(self.frame, self.half_widths):
            y = dot(row, d)
            if compare(y, h) >= 0 or compare(-y, h) >= 0:
                return False
        return True

    def support(self, direction):
        u = np.asarray(direction, dtype=float)
        return float(self.center_f @ u + np.abs(self.frame_f @ u) @ self.half_widths_f)

    def circumball(self):
        return self.center_f.copy(), float(np.linalg.norm(self.half_widths_f))

    def volume(self):
        return float(np.prod(2.0 * self.half_widths_f))

    def slice_volume(self, base, frame):
        frame = check_frame(frame, self.dim)
        k = frame.shape[0]
        offset = self.frame_f @ (np.asarray(base, dtype=float) - self.center_f)
        directions = self.frame_f @ frame.T
        if k == 0:
            return (1.0 if np.all(np.abs(offset) < self.half_widths_f) else 0.0), 0.0
        # Section polytope {t : -h - offset < directions t < h - offset}.
        normals = np.vstack([directions, -directions])
        bounds = np.concatenate([self.half_widths_f - offset, self.half_widths_f + offset])
        if k == 1:
            lo, hi = -math.inf, math.inf
            for a, b in zip(normals[:, 0], bounds):
                if abs(a) < 1e-15:
                    if b <= 0:
                        return 0.0, 0.0
                elif a > 0:
                    hi = min(hi, b / a)
                else:
                    lo = max(lo, b / a)
            return max(hi - lo, 0.0), 0.0
        return _polytope_volume(normals, bounds), 0.0

    def erode_dilate(self, delta):
        if to_float(delta) < 0:
            raise NonPositiveParameter(f"delta must be nonnegative, got {delta}")
        if to_float(delta) == 0:
            return self, self
        if is_exact(delta) and self.exact:
            d = to_scalar(delta)
            inner = [h - d for h in self.half_widths]
            outer = [h + d for h in self.half_widths]
            return Box(self.center, inner, self.frame), Box(self.center, outer, self.frame)
        d = to_float(delta)
        return (Box(self.center_f.tolist(), (self.half_widths_f - d).tolist(), self.frame_f.tolist()),
                Box(self.center_f.tolist(), (self.half_widths_f + d).tolist(), self.frame_f.tolist()))

    def describe(self):
        return f"box(center={list(self.center_f)}, half_widths={list(self.half_widths_f)})"


def _polytope_volume(normals: np.ndarray, bounds: np.ndarray) -> float:
    """Volume of {t : normals t < bounds}, zero when the interior is empty"""
    k = normals.shape[1]
    norms = np.linalg.norm(normals, axis=1)
    flat = norms < 1e-15
    if np.any(bounds[flat] <= 0):
        return 0.0
    rows = np.unique(np.hstack([normals[~flat], bounds[~flat, None]]), axis=0)
    normals, bounds = rows[:, :k], rows[:, k]
    norms = np.linalg.norm(normals, axis=1)
    # Chebyshev center: maximise s subject to normals t + s |normal| <= bounds.
    result = optimize.linprog(
        c=np.concatenate([np.zeros(k), [-1.0]]),
        A_ub=np.hstack([normals, norms[:, None]]), b_ub=bounds,
        bounds=[(None, None)] * k + [(0, None)], method="highs",
    )
    if not result.success or result.x[-1] <= 1e-12:
        return 0.0
    interior = result.x[:k]
    halfspaces = np.hstack([normals, -bounds[:, None]])
    intersection = spatial.HalfspaceIntersection(halfspaces, interior)
    return float(spatial.ConvexHull(intersection.intersections).volume)


class Product(Domain):
    """Orthogonal direct sum of factors: z is inside iff W_j z lies in S_j for every j"""

    kind = KIND_PRODUCT

    def __init__(self, factors: Sequence[Tuple[Sequence[Sequence[Any]], Domain]]):
        if not factors:
            raise ValueError("Product needs at least one factor")
        self.factors = [([list(row) for row in frame], domain) for frame, domain in factors]
        self.frames_f = [np.array([[to_float(x) for x in row] for row in frame], dtype=float) for frame, _ in self.factors]
        self.dim = self.frames_f[0].shape[1]
        for frame, (_, domain) in zip(self.frames_f, self.factors):
            if frame.shape[0] != domain.dim:
                raise DegenerateFrame(f"Factor frame has {frame.shape[0]} rows for a {domain.dim}-dimensional factor")
        stacked = check_frame(np.vstack(self.frames_f), self.dim)
        if stacked.shape[0] != self.dim:
            raise DegenerateFrame("Product factors do not span the ambient space")

    @property
    def exact(self):
        return all(all(is_exact(x) for row in frame for x in row) and domain.exact for frame, domain in self.factors)

    def gauge(self, points):
        points = np.atleast_2d(points)
        return np.max([domain.gauge(points @ frame.T)
                       for frame, (_, domain) in zip(self.frames_f, self.factors)], axis=0)

    def contains_exact(self, point):
        if not (self.exact and all(is_exact(x) for x in point)):
            return None
        return all(domain.contains_exact(mat_vec(frame, [to_scalar(x) for x in point]))
                   for frame, domain in self.factors)

    def support(self, direction):
        u = np.asarray(direction, dtype=float)
        return float(sum(domain.support(frame @ u) for frame, (_, domain) in zip(self.frames_f, self.factors)))

    def circumball(self):
        center = np.zeros(self.dim)
        radius_sq = 0.0
        for frame, (_, domain) in zip(self.frames_f, self.factors):
            c, r = domain.circumball()
            center += c @ frame
            radius_sq += r * r
        return center, math.sqrt(radius_sq)

    def volume(self):
        return float(np.prod([domain.volume() for _, domain in self.factors]))

    @property
    def factor_strictly_convex(self) -> List[bool]:
        return [domain.strictly_convex for _, domain in self.factors]

    @property
    def strictly_convex(self):
        return len(self.factors) == 1 and self.factors[0][1].strictly_convex

    def slice_volume(self, base, frame):
        frame = check_frame(frame, self.dim)
        base = np.asarray(base, dtype=float)
        pieces = []
        for factor_frame, (_, domain) in zip(self.frames_f, self.factors):
            local = factor_frame @ frame.T
            if local.size:
                u, s, _ = np.linalg.svd(local, full_matrices=False)
                pieces.append((factor_frame, domain, u[:, s > 1e-12].T))
            else:
                pieces.append((factor_frame, domain, np.zeros((0, domain.dim))))
        if sum(p[2].shape[0] for p in pieces) != frame.shape[0]:
            logger.debug("Slice frame not adapted to the product factors; using QMC")
            return qmc_slice_volume(self, base, frame, samples=self.qmc_samples, seed=self.qmc_seed)
        value, rel_var = 1.0, 0.0
        for factor_frame, domain, local_frame in pieces:
            v, err = domain.slice_volume(factor_frame @ base, local_frame)
            if v == 0.0:
                return 0.0, 0.0
            value *= v
            rel_var += (err / v) ** 2
        return value, value * math.sqrt(rel_var)

    def configure_qmc(self, seed: int = QMC_SEED, samples: int = QMC_SAMPLES) -> "Domain":
        super().configure_qmc(seed, samples)
        for _, domain in self.factors:
            domain.configure_qmc(seed, samples)
        return self

    def erode_dilate(self, delta):
        pairs = [(frame, domain.erode_dilate(delta)) for frame, domain in self.factors]
        return (Product([(frame, pair[0]) for frame, pair in pairs]),
                Product([(frame, pair[1]) for frame, pair in pairs]))

    def describe(self):
        return f"product({', '.join(domain.describe() for _, domain in self.factors)})"


class OracleConvex(Domain):
    """Convex domain given by a membership function f (f < 0 inside) and a support function"""

    kind = KIND_ORACLE

    def __init__(self, dim: int, membership: Callable[[np.ndarray], float],
                 support: Callable[[np.ndarray], float], lipschitz: float,
                 strictly_convex: bool = False, volume: Optional[float] = None):
        self.dim = dim
        self._membership = membership
        self._support = support
        self.lipschitz = _positive("lipschitz", lipschitz)
        self._strictly_convex = strictly_convex
        self._volume = volume

    def _call(self, func, arg) -> float:
        try:
            value = float(func(arg))
        except Exception as e:
            raise OracleFailure(f"Oracle raised {type(e).__name__}: {e}", point=list(np.atleast_1d(arg)))
        if not math.isfinite(value):
            raise OracleFailure(f"Oracle returned non-finite value {value}", point=list(np.atleast_1d(arg)))
        return value

    def gauge(self, points):
        points = np.atleast_2d(points)
        return np.array([self._call(self._membership, z) for z in points]) / float(self.lipschitz)

    def support(self, direction):
        return self._call(self._support, np.asarray(direction, dtype=float))

    def circumball(self):
        eye = np.eye(self.dim)
        hi = np.array([self.support(e) for e in eye])
        lo = np.array([-self.support(-e) for e in eye])
        return (hi + lo) / 2, float(np.linalg.norm(hi - lo) / 2)

    def volume(self):
        if self._volume is not None:
            return float(self._volume)
        value, _ = qmc_slice_volume(self, np.zeros(self.dim), np.eye(self.dim),
                                    samples=self.qmc_samples, seed=self.qmc_seed)
        return value

    @property
    def strictly_convex(self):
        return self._strictly_convex


class LpBall(OracleConvex):
    """{z : ||z - c||_p < R}, a superellipse for p > 2"""

    kind = KIND_LP_BALL

    def __init__(self, center: Sequence[Any], radius, exponent):
        self.center = tuple(_scalar(x) for x in center)
        self.center_f = _floats(center)
        self.radius = _positive("radius", radius)
        self.radius_f = to_float(self.radius)
        self.exponent = _positive("exponent", exponent)
        p = to_float(self.exponent)
        if p < 1:
            raise NonPositiveParameter(f"lp_ball exponent must be at least 1, got {exponent}")
        self.p = p
        dim = len(center)
        lipschitz = max(1.0, dim ** (1.0 / p - 0.5))
        super().__init__(
            dim, membership=self._norm_minus_radius, support=self._support_value,
            lipschitz=lipschitz, strictly_convex=1 < p < math.inf,
            volume=(2 * math.gamma(1 + 1 / p)) ** dim / math.gamma(1 + dim / p) * self.radius_f ** dim,
        )

    def _norm_minus_radius(self, z):
        return float(np.sum(np.abs(np.asarray(z) - self.center_f) ** self.p) ** (1 / self.p)) - self.radius_f

    def _support_value(self, u):
        u = np.asarray(u, dtype=float)
        if self.p == 1:
            dual_norm = float(np.abs(u).max())
        else:
            q = self.p / (self.p - 1)
            dual_norm = float(np.sum(np.abs(u) ** q) ** (1 / q))
        return float(self.center_f @ u) + self.radius_f * dual_norm

    def gauge(self, points):
        d = np.abs(np.atleast_2d(points) - self.center_f)
        return (np.sum(d ** self.p, axis=1) ** (1 / self.p) - self.radius_f) / float(self.lipschitz)

    @property
    def exact(self):
        return (_exact_tuple(self.center) is not None and is_exact(self.radius)
                and isinstance(self.exponent, Fraction) and self.exponent.denominator == 1)

    def contains_exact(self, point):
        if not (self.exact and all(is_exact(x) for x in point)):
            return None
        p = int(self.exponent)
        total = sum(abs(to_scalar(z) - c) ** p for z, c in zip(point, self.center))
        return compare(total, self.radius ** p) < 0

    def circumball(self):
        # The l_p unit ball sits inside the Euclidean ball of radius max(1, n^(1/2 - 1/p)).
        return self.center_f.copy(), self.radius_f * max(1.0, self.dim ** (0.5 - 1.0 / self.p))

    def erode_dilate(self, delta):
        d = to_float(delta)
        if d < 0:
            raise NonPositiveParameter(f"delta must be nonnegative, got {delta}")
        if d == 0:
            return self, self
        shift = d * float(self.lipschitz)
        return (LpBall(self.center_f.tolist(), self.radius_f - shift, self.p),
                LpBall(self.center_f.tolist(), self.radius_f + shift, self.p))

    def describe(self):
        return f"lp_ball(center={list(self.center_f)}, radius={self.radius_f:.6g}, p={self.p:g})"


def qmc_slice_volume(domain: Domain, base, frame, samples: int = QMC_SAMPLES,
                     seed: int = QMC_SEED, replicates: int = QMC_REPLICATES) -> Tuple[float, float]:
    """Scrambled Halton estimate of a section volume with its replicate standard error"""
    frame = check_frame(frame, domain.dim)
    base = np.asarray(base, dtype=float)
    k = frame.shape[0]
    center, radius = domain.circumball()
    foot = frame @ (center - base)
    distance_sq = float(np.sum((center - base) ** 2) - foot @ foot)
    if distance_sq >= radius * radius:
        return 0.0, 0.0
    if k == 0:
        return (1.0 if domain.gauge(base[None, :])[0] < 0 else 0.0), 0.0
    reach = math.sqrt(radius * radius - distance_sq)
    cube = (2 * reach) ** k
    per_replicate = max(samples // replicates, 1)
    n_points = 1 << max(int(math.ceil(math.log2(per_replicate))), 1)
    estimates = []
    for i in range(replicates):
        sampler = qmc.Halton(d=k, scramble=True, seed=seed + i)
        u = sampler.random(n=n_points)
        t = foot + reach * (2 * u - 1)
        points = base + t @ frame
        estimates.append(cube * float(np.mean(domain.gauge(points) < 0)))
    estimates = np.array(estimates)
    stderr = float(estimates.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return float(estimates.mean()), stderr


def slice_volume(domain: Domain, base, frame) -> Tuple[float, float]:
    """(n - r)-volume of the section of the domain by base + span(frame)"""
    return domain.slice_volume(base, frame)


def classify_points(domain: Domain, points: np.ndarray, tol: float) -> np.ndarray:
    """Vectorised classification codes: 1 inside, -1 outside, 0 within tol of the boundary"""
    g = domain.gauge(points)
    codes = np.zeros(len(g), dtype=np.int8)
    codes[g < -tol] = CODE_INSIDE
    codes[g > tol] = CODE_OUTSIDE
    return codes


def classify(domain: Domain, point, tol: float = 1e-9, exact: bool = False) -> str:
    """Classify one point; with exact=True, near-boundary points with exact data are decided exactly"""
    if tol < 0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    code = classify_points(domain, _floats(point)[None, :], tol)[0]
    if code == CODE_INSIDE:
        return INSIDE
    if code == CODE_OUTSIDE:
        return OUTSIDE
    if exact:
        decided = domain.contains_exact(point)
        if decided is not None:
            return INSIDE if decided else OUTSIDE
    return BOUNDARY


def erode_dilate(domain: Domain, delta) -> Tuple[Domain, Domain]:
    return domain.erode_dilate(delta)


class AnisoMap:
    """T_eps: identity on F, multiplication by 1/eps on the orthogonal complement H"""

    def __init__(self, subspace: SubspaceSpec, eps):
        self.F = subspace
        self.dim = subspace.dim
        self.eps = _positive("eps", eps)
        self.eps_f = to_float(self.eps)

    @classmethod
    def identity(cls, dim: int) -> "AnisoMap":
        return cls(SubspaceSpec(identity_rows(dim), dim=dim, label="E"), 1)

    @property
    def exact(self) -> bool:
        return is_exact(self.eps)

    @cached_property
    def H(self) -> SubspaceSpec:
        return self.F.complement()

    @cached_property
    def _projector_f(self) -> np.ndarray:
        return np.array([[to_float(x) for x in row] for row in self.F.projector], dtype=float).reshape(self.dim, self.dim)

    @cached_property
    def forward_matrix(self) -> np.ndarray:
        p = self._projector_f
        return p + (np.eye(self.dim) - p) / self.eps_f

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        p = self._projector_f
        return p + (np.eye(self.dim) - p) * self.eps_f

    def forward(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        part_f = points @ self._projector_f
        return part_f + (points - part_f) / self.eps_f

    def inverse(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        part_f = points @ self._projector_f
        return part_f + (points - part_f) * self.eps_f

    def forward_exact(self, point: Sequence[Any]) -> List[Any]:
        point = [to_scalar(x) for x in point]
        part_f = self.F.project(point)
        return [a + (x - a) / self.eps for a, x in zip(part_f, point)]

    def inverse_exact(self, point: Sequence[Any]) -> List[Any]:
        point = [to_scalar(x) for x in point]
        part_f = self.F.project(point)
        return [a + (x - a) * self.eps for a, x in zip(part_f, point)]

    def describe(self) -> str:
        return f"T(F={self.F.describe()}, eps={self.eps})"


def identity_rows(dim: int) -> List[List[int]]:
    return [[int(i == j) for j in range(dim)] for i in range(dim)]


def apply_aniso(m: AnisoMap, point, direction: str = DIRECTION_FORWARD):
    """Apply T_eps or its inverse; exact inputs with an exact eps stay exact"""
    if direction not in (DIRECTION_FORWARD, DIRECTION_INVERSE):
        raise ValueError(f"Unknown direction: {direction}")
    if m.exact and all(is_exact(x) for x in point):
        return m.forward_exact(point) if direction == DIRECTION_FORWARD else m.inverse_exact(point)
    points = np.asarray(point, dtype=float)
    return m.forward(points) if direction == DIRECTION_FORWARD else m.inverse(points)


def bounding_box(domain: Domain, m: Optional[AnisoMap] = None, shift=None) -> Tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box containing T_eps(S) + shift, from support values along T_eps e_i"""
    matrix = m.forward_matrix if m is not None else np.eye(domain.dim)
    shift = np.zeros(domain.dim) if shift is None else _floats(shift)
    lo = np.array([-domain.support(-row) for row in matrix]) + shift
    hi = np.array([domain.support(row) for row in matrix]) + shift
    return lo, hi
