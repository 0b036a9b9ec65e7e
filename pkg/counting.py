"""
Counting lattice points in T_eps(S) + v and in T.S + v.

Naive and sliced counting feed candidate coefficient vectors through one
classifier, so both methods see the same floating point values and agree on
certain counts and on boundary hits. Points whose gauge falls within tol of
the boundary are decided exactly when the lattice, map, shift and domain are
all exact; otherwise they are reported as boundary hits.
"""
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from domains import (
    AnisoMap, CODE_BOUNDARY, CODE_INSIDE, Domain, classify_points,
)
from exact_scalar import (
    GeometryError, UnsupportedScalarKind, inverse, is_exact, mat_vec, to_float,
    to_scalar,
)
from lattice_core import (
    Lattice, block_coefficients, count_ball_estimate, enumerate_near, resolve_budget,
)
from numberfield import norm_E
from splitter import SplitData, SubspaceSpec, slice_window, split

logger = logging.getLogger(__name__)

METHOD_NAIVE = "naive"
METHOD_SLICED = "sliced"
METHOD_MULTIPLICATIVE = "multiplicative"

DEFAULT_TOL = 1e-9
WINDOW_SLACK = 1e-6
BUFFER_ROWS = 1 << 16


class BudgetExceeded(GeometryError):
    """Raised when a count would enumerate more candidates than the point budget"""

    def __init__(self, message: str, estimate: float = 0, budget: int = 0):
        super().__init__(message, estimate=estimate, budget=budget)


class WindowIncomplete(GeometryError):
    """Raised when a slice that may meet the domain was left out of the window"""


class ZeroNorm(GeometryError):
    """Raised when a multiplier has zero norm"""


class UnsupportedShift(GeometryError):
    """Raised when sliced counting is asked for a nonzero shift"""


@dataclass
class CountResult:
    certain: int
    boundary_hits: int
    method: str
    parameter: str
    slices: int = 0
    candidates: int = 0
    enumerated_points: List[Tuple[int, ...]] = dataclass_field(default_factory=list)
    wall_time_ms: float = dataclass_field(default=0.0, compare=False)

    @property
    def interval(self) -> Tuple[int, int]:
        return self.certain, self.certain + self.boundary_hits

    def as_row(self) -> dict:
        return {
            "parameter": self.parameter,
            "certain": self.certain,
            "boundary_hits": self.boundary_hits,
            "method": self.method,
            "wall_time_ms": round(self.wall_time_ms, 3),
        }


@dataclass
class Tally:
    inside: int = 0
    boundary: int = 0
    candidates: int = 0
    points: List[Tuple[int, ...]] = dataclass_field(default_factory=list)

    def merge(self, other: "Tally", record: int) -> "Tally":
        self.inside += other.inside
        self.boundary += other.boundary
        self.candidates += other.candidates
        room = record - len(self.points)
        if room > 0:
            self.points.extend(other.points[:room])
        return self


@dataclass
class Remainder:
    count: CountResult
    leading: float
    lo: float
    hi: float


class Classifier:
    """Classifies lattice points, given by coefficient rows, against the pulled-back domain"""

    def __init__(self, lattice: Lattice, domain: Domain, pullback: np.ndarray,
                 shift: Optional[Sequence[Any]], tol: float, record: int = 0,
                 exact_pullback: Optional[Callable[[List[Any]], List[Any]]] = None):
        self.lattice = lattice
        self.domain = domain
        self.basis = lattice.basis_float
        self.pullback = pullback
        self.shift = None if shift is None else [to_scalar(x) if is_exact(x) else float(x) for x in shift]
        self.shift_f = np.zeros(lattice.dim) if shift is None else np.array([to_float(x) for x in shift])
        self.tol = tol
        self.record = record
        self.exact_pullback = exact_pullback
        self.exact = (
            exact_pullback is not None and lattice.exact and domain.exact
            and (self.shift is None or all(is_exact(x) for x in self.shift))
        )

    def _decide(self, coeffs: Sequence[int]) -> Optional[bool]:
        point = self.lattice.embed([int(c) for c in coeffs])
        if self.shift is not None:
            point = [a - b for a, b in zip(point, self.shift)]
        return self.domain.contains_exact(self.exact_pullback(point))

    def run(self, coeffs: np.ndarray) -> Tally:
        tally = Tally(candidates=len(coeffs))
        if not len(coeffs):
            return tally
        points = coeffs @ self.basis - self.shift_f
        codes = classify_points(self.domain, points @ self.pullback.T, self.tol)
        inside = codes == CODE_INSIDE
        for i in np.flatnonzero(codes == CODE_BOUNDARY):
            decided = self._decide(coeffs[i]) if self.exact else None
            if decided is None:
                tally.boundary += 1
            elif decided:
                inside[i] = True
        tally.inside = int(inside.sum())
        if self.record:
            tally.points = [tuple(int(c) for c in row) for row in coeffs[inside][:self.record]]
        return tally


def _drain(classifier: Classifier, blocks: Iterable[np.ndarray]) -> Tally:
    """Classify coefficient blocks in buffers of about BUFFER_ROWS rows"""
    total = Tally()
    buffer, size = [], 0
    for block in blocks:
        buffer.append(block)
        size += len(block)
        if size >= BUFFER_ROWS:
            total.merge(classifier.run(np.vstack(buffer)), classifier.record)
            buffer, size = [], 0
    if buffer:
        total.merge(classifier.run(np.vstack(buffer)), classifier.record)
    return total


def _reduce(tallies: Iterable[Tally], record: int) -> Tally:
    total = Tally()
    for tally in tallies:
        total.merge(tally, record)
    return total


def _eps_label(eps) -> str:
    return str(to_scalar(eps)) if is_exact(eps) else repr(float(eps))


def _shift_is_zero(v) -> bool:
    return v is None or all((to_float(x) if is_exact(x) else float(x)) == 0 for x in v)


def coefficient_ranges(lattice: Lattice, domain: Domain, forward: np.ndarray, shift_f: np.ndarray,
                       tol: float) -> List[Tuple[int, int]]:
    """Integer range of each coefficient (x, d_i) over x in forward(S) + shift"""
    _, radius = domain.circumball()
    ranges = []
    for d in lattice.dual.basis_float:
        direction = forward.T @ d
        margin = 2 * tol * radius * float(np.linalg.norm(direction)) + 1e-9
        hi = domain.support(direction) + float(d @ shift_f) + margin
        lo = -domain.support(-direction) + float(d @ shift_f) - margin
        ranges.append((math.ceil(lo), math.floor(hi)))
    return ranges


def _box_scan(classifier: Classifier, ranges: List[Tuple[int, int]], workers: int) -> Tally:
    """Scan a coefficient box; the innermost coefficient is vectorised, the outermost is split across workers"""
    rank_ = len(ranges)
    if any(lo > hi for lo, hi in ranges):
        return Tally()
    lo0, hi0 = ranges[0]

    def blocks_for(outer_values):
        middle = [range(lo, hi + 1) for lo, hi in ranges[1:-1]]
        for last in outer_values:
            for mid in itertools.product(*middle):
                rest = tuple(mid) + ((last,) if rank_ > 1 else ())
                yield block_coefficients(rest, lo0, hi0, rank_)

    if rank_ == 1:
        return _drain(classifier, [block_coefficients((), lo0, hi0, 1)])
    lo_last, hi_last = ranges[-1]
    outer = list(range(lo_last, hi_last + 1))
    chunks = [outer] if workers <= 1 else [[x] for x in outer]
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as executor:
        tallies = executor.map(lambda chunk: _drain(classifier, blocks_for(chunk)), chunks)
        return _reduce(tallies, classifier.record)


def count_naive(lattice: Lattice, domain: Domain, m: AnisoMap, v: Optional[Sequence[Any]] = None,
                tol: float = DEFAULT_TOL, budget: Optional[int] = None, workers: int = 1,
                record: int = 0) -> CountResult:
    """Count lattice points in T_eps(S) + v by scanning the coefficient box of the image"""
    started = time.perf_counter()
    if domain.dim != lattice.dim:
        raise ValueError(f"Domain dim {domain.dim} does not match lattice dim {lattice.dim}")
    shift_f = np.zeros(lattice.dim) if v is None else np.array([to_float(x) for x in v])
    ranges = coefficient_ranges(lattice, domain, m.forward_matrix, shift_f, tol)
    budget = resolve_budget(budget)
    estimate = math.prod(max(hi - lo + 1, 0) for lo, hi in ranges)
    if estimate > budget:
        raise BudgetExceeded(
            f"Naive count at eps={_eps_label(m.eps)} needs {estimate} candidates, budget {budget}",
            estimate=estimate, budget=budget
        )
    classifier = Classifier(
        lattice, domain, m.inverse_matrix, v, tol, record,
        exact_pullback=m.inverse_exact if m.exact else None,
    )
    tally = _box_scan(classifier, ranges, workers)
    result = CountResult(
        certain=tally.inside, boundary_hits=tally.boundary, method=METHOD_NAIVE,
        parameter=_eps_label(m.eps), candidates=tally.candidates, enumerated_points=tally.points,
        wall_time_ms=(time.perf_counter() - started) * 1000,
    )
    logger.debug(f"count_naive eps={result.parameter}: {result.certain} (+{result.boundary_hits}) "
                 f"from {tally.candidates} candidates")
    return result


def check_window(sd: SplitData, domain: Domain, window, budget: int, tol: float = DEFAULT_TOL):
    """Every dual point whose slice can meet the domain must be in the window"""
    generators = sd.gamma_f.basis_float
    center, radius = domain.circumball()
    margin = 2 * tol * radius + 1e-9
    ranges = []
    for g in generators:
        ranges.append((math.ceil(-domain.support(-g) - margin), math.floor(domain.support(g) + margin)))
    size = math.prod(max(hi - lo + 1, 0) for lo, hi in ranges)
    if size > budget:
        logger.warning(f"Skipping slice window completeness check: {size} dual points in the box")
        return
    listed = {m for m, _ in window}
    target = sd.project_v_float(center)
    dual_basis = sd.gamma_f_dual.basis_float
    for m in itertools.product(*[range(lo, hi + 1) for lo, hi in ranges]):
        if m in listed:
            continue
        gamma_star = np.asarray(m, dtype=float) @ dual_basis
        offset = gamma_star - target
        distance = float(np.linalg.norm(offset))
        # gamma* lies outside P_V(S) when some direction in V separates it
        if distance > 0 and float(offset @ gamma_star) / distance > domain.support(offset / distance) + margin:
            continue
        raise WindowIncomplete(f"Slice over dual point {m} may meet the domain but is not in the window",
                               coefficients=m)


def count_sliced(sd: SplitData, domain: Domain, eps, v: Optional[Sequence[Any]] = None,
                 tol: float = DEFAULT_TOL, budget: Optional[int] = None, workers: int = 1,
                 record: int = 0) -> CountResult:
    """Count by summing, over the dual slices, the V^perp sublattice points in each pulled-back section"""
    started = time.perf_counter()
    if not _shift_is_zero(v):
        raise UnsupportedShift("Sliced counting needs v = 0; use count_naive for shifted domains")
    m = AnisoMap(sd.F, eps)
    center, radius = domain.circumball()
    reach = radius * (1 + 2 * tol) + 1e-12
    window = slice_window(sd, center, reach, slack=WINDOW_SLACK)
    budget = resolve_budget(budget)
    check_window(sd, domain, window, budget, tol)

    rank_perp = sd.gamma_perp.rank
    perp_basis = sd.gamma_perp.basis_float
    pulled = m.inverse(perp_basis) if rank_perp else np.zeros((0, sd.n))
    pulled_covolume = math.sqrt(abs(np.linalg.det(pulled @ pulled.T))) if rank_perp else 1.0
    estimate = len(window) * (count_ball_estimate(rank_perp, reach, pulled_covolume) if rank_perp else 1)
    if estimate > budget:
        raise BudgetExceeded(
            f"Sliced count at eps={_eps_label(eps)} needs about {estimate:.3g} candidates, budget {budget}",
            estimate=estimate, budget=budget
        )
    perp_coeffs = np.array(sd.perp_coeffs, dtype=np.int64).reshape(rank_perp, sd.n)
    classifier = Classifier(
        sd.lattice, domain, m.inverse_matrix, None, tol, record,
        exact_pullback=m.inverse_exact if m.exact else None,
    )

    def count_slice(entry) -> Tally:
        dual_coeffs, _ = entry
        rep = np.array(sd.representative(dual_coeffs).coeffs, dtype=np.int64)
        target = center - m.inverse(sd.lattice.embed_float(rep))

        def blocks():
            for rest, lo, hi in enumerate_near(pulled, target, reach):
                local = block_coefficients(rest, lo, hi, rank_perp)
                yield rep + local @ perp_coeffs

        return _drain(classifier, blocks())

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as executor:
        tally = _reduce(executor.map(count_slice, window), record)
    result = CountResult(
        certain=tally.inside, boundary_hits=tally.boundary, method=METHOD_SLICED,
        parameter=_eps_label(eps), slices=len(window), candidates=tally.candidates,
        enumerated_points=tally.points, wall_time_ms=(time.perf_counter() - started) * 1000,
    )
    logger.debug(f"count_sliced eps={result.parameter}: {result.certain} (+{result.boundary_hits}) "
                 f"over {len(window)} slices")
    return result


def count(lattice: Lattice, subspace: SubspaceSpec, domain: Domain, eps, v: Optional[Sequence[Any]] = None,
          method: Optional[str] = None, tol: float = DEFAULT_TOL, budget: Optional[int] = None,
          workers: int = 1, sd: Optional[SplitData] = None) -> CountResult:
    """Sliced count when v = 0 and the lattice splits against F, naive count otherwise"""
    if method is None:
        method = METHOD_SLICED if _shift_is_zero(v) else METHOD_NAIVE
    if method == METHOD_SLICED:
        if sd is None:
            try:
                sd = split(lattice, subspace)
            except UnsupportedScalarKind as e:
                logger.warning(f"Falling back to naive counting: {e}")
                method = METHOD_NAIVE
        if sd is not None:
            return count_sliced(sd, domain, eps, v, tol=tol, budget=budget, workers=workers)
    if method != METHOD_NAIVE:
        raise ValueError(f"Unknown count method: {method}")
    return count_naive(lattice, domain, AnisoMap(subspace, eps), v, tol=tol, budget=budget, workers=workers)


def lattice_signature(lattice: Lattice) -> Tuple[int, int]:
    """(s, t) read from the embedding blocks; lattices without blocks are treated as totally real"""
    if not lattice.blocks:
        return lattice.dim, 0
    s = sum(1 for block in lattice.blocks if len(block) == 1)
    t = sum(1 for block in lattice.blocks if len(block) == 2)
    return s, t


def _parse_multiplier(multiplier: Sequence[Any], s: int, t: int) -> List[Any]:
    """Flatten a multiplier into R^s x C^t coordinates; complex parts may be pairs or complex numbers"""
    flat = []
    values = list(multiplier)
    if len(values) == s + 2 * t and not any(isinstance(x, (complex, list, tuple)) for x in values):
        return values
    if len(values) != s + t:
        raise ValueError(f"Multiplier needs {s} real and {t} complex entries, got {len(values)}")
    flat.extend(values[:s])
    for value in values[s:]:
        if isinstance(value, complex):
            flat.extend([value.real, value.imag])
        else:
            flat.extend(list(value))
    return flat


def norm_multiplier(multiplier: Sequence[Any], s: int, t: int) -> float:
    """Nm T = prod T_j (real) * prod |T_j|^2 (complex), with sign from the real part"""
    flat = _parse_multiplier(multiplier, s, t)
    value = norm_E(flat, s, t)
    negative = sum(1 for x in flat[:s] if to_float(x) < 0)
    return -value if negative % 2 else value


def multiplier_matrix(multiplier: Sequence[Any], s: int, t: int, exact: bool = False):
    """Block-diagonal matrix of z -> T.z on R^s x C^t"""
    flat = _parse_multiplier(multiplier, s, t)
    n = s + 2 * t
    zero = 0 if exact else 0.0
    convert = to_scalar if exact else to_float
    matrix = [[zero] * n for _ in range(n)]
    for i in range(s):
        matrix[i][i] = convert(flat[i])
    for j in range(t):
        a, b = convert(flat[s + 2 * j]), convert(flat[s + 2 * j + 1])
        k = s + 2 * j
        matrix[k][k], matrix[k][k + 1] = a, -b
        matrix[k + 1][k], matrix[k + 1][k + 1] = b, a
    return matrix if exact else np.array(matrix, dtype=float)


def count_multiplicative(lattice: Lattice, multiplier: Sequence[Any], domain: Domain,
                         v: Optional[Sequence[Any]] = None, tol: float = DEFAULT_TOL,
                         budget: Optional[int] = None, workers: int = 1, record: int = 0) -> CountResult:
    """Count lattice points in T.S + v for a multiplier T on R^s x C^t"""
    started = time.perf_counter()
    s, t = lattice_signature(lattice)
    if s + 2 * t != lattice.dim:
        raise ValueError(f"Signature ({s}, {t}) does not match lattice dim {lattice.dim}")
    nm = norm_multiplier(multiplier, s, t)
    if nm == 0:
        raise ZeroNorm(f"Multiplier {list(multiplier)} has zero norm")
    forward = multiplier_matrix(multiplier, s, t)
    pullback = np.linalg.inv(forward)
    exact_pullback = None
    flat = _parse_multiplier(multiplier, s, t)
    if all(is_exact(x) for x in flat):
        exact_inverse = inverse(multiplier_matrix(multiplier, s, t, exact=True))
        exact_pullback = lambda point: mat_vec(exact_inverse, point)

    shift_f = np.zeros(lattice.dim) if v is None else np.array([to_float(x) for x in v])
    ranges = coefficient_ranges(lattice, domain, forward, shift_f, tol)
    budget = resolve_budget(budget)
    estimate = math.prod(max(hi - lo + 1, 0) for lo, hi in ranges)
    if estimate > budget:
        raise BudgetExceeded(
            f"Multiplicative count needs {estimate} candidates, budget {budget}",
            estimate=estimate, budget=budget
        )
    classifier = Classifier(lattice, domain, pullback, v, tol, record, exact_pullback=exact_pullback)
    tally = _box_scan(classifier, ranges, workers)
    label = "T=(" + ", ".join(str(to_scalar(x)) if is_exact(x) else repr(float(x)) for x in flat) + ")"
    return CountResult(
        certain=tally.inside, boundary_hits=tally.boundary, method=METHOD_MULTIPLICATIVE,
        parameter=label, candidates=tally.candidates, enumerated_points=tally.points,
        wall_time_ms=(time.perf_counter() - started) * 1000,
    )


def _remainder(result: CountResult, leading: float) -> Remainder:
    lo, hi = result.interval
    return Remainder(count=result, leading=leading, lo=lo - leading, hi=hi - leading)


def remainder_shifted(lattice: Lattice, subspace: SubspaceSpec, domain: Domain, eps,
                      v: Optional[Sequence[Any]] = None, tol: float = DEFAULT_TOL,
                      budget: Optional[int] = None, workers: int = 1) -> Remainder:
    """n_eps(S, v) - eps^-q vol(S) / vol(E / lattice)"""
    result = count_naive(lattice, domain, AnisoMap(subspace, eps), v, tol=tol, budget=budget, workers=workers)
    q = lattice.dim - subspace.p
    leading = to_float(eps) ** (-q) * domain.volume() / lattice.covolume
    return _remainder(result, leading)


def remainder_multiplicative(lattice: Lattice, multiplier: Sequence[Any], domain: Domain,
                             v: Optional[Sequence[Any]] = None, tol: float = DEFAULT_TOL,
                             budget: Optional[int] = None, workers: int = 1) -> Remainder:
    """n_T(S, v) - |Nm T| vol(S) / vol(E / lattice)"""
    result = count_multiplicative(lattice, multiplier, domain, v, tol=tol, budget=budget, workers=workers)
    s, t = lattice_signature(lattice)
    leading = abs(norm_multiplier(multiplier, s, t)) * domain.volume() / lattice.covolume
    return _remainder(result, leading)
