"""
Leading terms, remainders, predicted remainder bounds and empirical fits.

Remainder bounds are one-sided: a scan passes when the measured growth of the
remainder does not exceed the predicted growth plus a slack in the exponent.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dataclass_field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from counting import (
    DEFAULT_TOL, METHOD_NAIVE, METHOD_SLICED, CountResult, WINDOW_SLACK,
    check_window, count_naive, count_sliced,
)
from domains import AnisoMap, Domain
from exact_scalar import GeometryError, is_exact, to_float, to_scalar
from lattice_core import resolve_budget
from splitter import SplitData, slice_window

logger = logging.getLogger(__name__)

REGIME_SMOOTH_SLICES = "smooth_slices"
REGIME_FIBER_STRICTLY_CONVEX = "fiber_strictly_convex"
REGIME_SLICE_STRICTLY_CONVEX = "slice_strictly_convex"
REGIME_BOX_ADMISSIBLE = "box_admissible"
REGIME_ALGEBRAIC_PRODUCT = "algebraic_product"
REGIMES = (
    REGIME_SMOOTH_SLICES, REGIME_FIBER_STRICTLY_CONVEX, REGIME_SLICE_STRICTLY_CONVEX,
    REGIME_BOX_ADMISSIBLE, REGIME_ALGEBRAIC_PRODUCT,
)

FIT_SLACK = 0.15
MIN_MAGNITUDE = 0.5
MIN_ROWS = 4
DEFAULT_DELTA = 0.1


class InconsistentParameters(GeometryError):
    """Raised when regime parameters contradict each other or the split dimensions"""


class TooFewUsableRows(GeometryError):
    """Raised when too few scan rows survive the small-remainder exclusion"""

    def __init__(self, message: str, usable: int = 0, required: int = MIN_ROWS):
        super().__init__(message, usable=usable, required=required)


@dataclass(frozen=True)
class RegimeClass:
    name: str
    n: int
    p: int
    q: int
    r: int
    ell: Optional[int] = None
    s: Optional[int] = None
    t: Optional[int] = None
    delta: float = DEFAULT_DELTA

    @classmethod
    def from_split(cls, sd: SplitData, name: str, ell: Optional[int] = None, s: Optional[int] = None,
                   t: Optional[int] = None, delta: float = DEFAULT_DELTA) -> "RegimeClass":
        n, p, q, r = sd.dims
        return cls(name=name, n=n, p=p, q=q, r=r, ell=ell, s=s, t=t, delta=delta)

    def validate(self):
        if self.name not in REGIMES:
            raise InconsistentParameters(f"Unknown regime {self.name!r}; choose from {list(REGIMES)}")
        if self.p + self.q != self.n or min(self.p, self.q, self.r) < 0 or self.r > self.p:
            raise InconsistentParameters(
                f"Dimensions n={self.n} p={self.p} q={self.q} r={self.r} are inconsistent"
            )
        if self.q == 0:
            raise InconsistentParameters("Remainder bounds need q >= 1")
        if self.name == REGIME_ALGEBRAIC_PRODUCT:
            if self.ell is None or self.s is None or self.t is None:
                raise InconsistentParameters("algebraic_product needs ell, s and t")
            if self.s + 2 * self.t != self.n:
                raise InconsistentParameters(f"Signature ({self.s}, {self.t}) does not match n={self.n}")
            if not 1 <= self.ell <= self.n - self.r:
                raise InconsistentParameters(f"ell={self.ell} must lie in 1..{self.n - self.r}")
            if self.delta <= 0:
                raise InconsistentParameters(f"delta must be positive, got {self.delta}")
        elif self.ell is not None:
            raise InconsistentParameters(f"ell only applies to {REGIME_ALGEBRAIC_PRODUCT}")


@dataclass(frozen=True)
class BoundDescriptor:
    """|R| = O(eps^power * |log eps|^log_degree); missing parts are absent from the bound"""
    power: Optional[float] = None
    log_degree: Optional[float] = None

    @property
    def kind(self) -> str:
        if self.power is not None and self.log_degree is not None:
            return "power_log"
        return "power" if self.power is not None else "log"


def predicted_exponent(regime: RegimeClass) -> BoundDescriptor:
    regime.validate()
    n, p, q, r = regime.n, regime.p, regime.q, regime.r
    if regime.name == REGIME_SMOOTH_SLICES:
        return BoundDescriptor(power=1 / (p - r + 1) - q)
    if regime.name == REGIME_FIBER_STRICTLY_CONVEX:
        return BoundDescriptor(power=2 * q / (q + 1 + 2 * (p - r)) - q)
    if regime.name == REGIME_SLICE_STRICTLY_CONVEX:
        return BoundDescriptor(power=2 * q / (n - r + 1) - q)
    if regime.name == REGIME_BOX_ADMISSIBLE:
        return BoundDescriptor(log_degree=n - r - 1)
    m = n - r - regime.ell
    return BoundDescriptor(power=-q * m / (m + 2), log_degree=regime.s + regime.t + regime.delta)


def predicted_multiplicative_bound(n: int, ell: int, s: int, t: int, delta: float = DEFAULT_DELTA) -> BoundDescriptor:
    """Growth class |Nm T|^power * ln(2 + |Nm T|)^log_degree of the multiplicative remainder"""
    if s + 2 * t != n or not 1 <= ell <= n or delta <= 0:
        raise InconsistentParameters(f"Inconsistent multiplicative parameters n={n} ell={ell} s={s} t={t} delta={delta}")
    return BoundDescriptor(power=(n - ell) / (n - ell + 2), log_degree=s + t + delta)


def predicted_totally_real_bound(n: int, r: int, delta: float = DEFAULT_DELTA) -> BoundDescriptor:
    """|log eps|^(n - r + delta) class for F spanned by embedding coordinates of a totally real field"""
    if not 0 <= r <= n or delta <= 0:
        raise InconsistentParameters(f"Inconsistent parameters n={n} r={r} delta={delta}")
    return BoundDescriptor(log_degree=n - r + delta)


def slice_sum(sd: SplitData, domain: Domain, budget: Optional[int] = None) -> Tuple[float, float]:
    """Sum of (n - r)-volumes of the domain's sections by the dual slices, with a standard error"""
    if sd.r == 0:
        return domain.volume(), 0.0
    center, radius = domain.circumball()
    window = slice_window(sd, center, radius, slack=WINDOW_SLACK)
    check_window(sd, domain, window, resolve_budget(budget))
    frame = sd.v_perp_frame
    total, variance = 0.0, 0.0
    for _, gamma_star in window:
        value, stderr = domain.slice_volume(gamma_star, frame)
        total += value
        variance += stderr * stderr
    return total, math.sqrt(variance)


def leading_term(sd: SplitData, domain: Domain, eps, slices: Optional[Tuple[float, float]] = None) -> float:
    """eps^-q / vol(V^perp / Gamma^perp) times the slice-volume sum"""
    eps_f = to_float(eps)
    if not eps_f > 0:
        raise InconsistentParameters(f"eps must be positive, got {eps}")
    total, _ = slices if slices is not None else slice_sum(sd, domain)
    return eps_f ** (-sd.q) * total / sd.gamma_perp.covolume


def remainder(sd: SplitData, domain: Domain, eps, result: CountResult,
              slices: Optional[Tuple[float, float]] = None) -> Tuple[float, float]:
    lt = leading_term(sd, domain, eps, slices)
    lo, hi = result.interval
    return lo - lt, hi - lt


@dataclass
class ScanRow:
    epsilon: float
    count_lo: int
    count_hi: int
    leading: float
    rem_lo: float
    rem_hi: float
    method: str = METHOD_SLICED
    wall_time_ms: float = 0.0

    @property
    def magnitude(self) -> float:
        return abs((self.rem_lo + self.rem_hi) / 2)

    def usable(self, min_magnitude: float = MIN_MAGNITUDE) -> bool:
        return not (self.rem_lo < min_magnitude and self.rem_hi > -min_magnitude)


@dataclass
class FitReport:
    beta: float
    C: float
    r2: float
    verdict: bool
    predicted: BoundDescriptor
    used_rows: int
    excluded_rows: int
    log_constant: Optional[float] = None
    slack: float = FIT_SLACK
    delta: Optional[float] = None

    def to_json(self) -> Dict[str, Any]:
        data = asdict(self)
        data["predicted"] = {"kind": self.predicted.kind, **asdict(self.predicted)}
        return data


@dataclass
class RemainderScan:
    rows: List[ScanRow]
    fit: FitReport
    regime: Optional[RegimeClass]
    slice_stderr: float = 0.0
    extra: Dict[str, Any] = dataclass_field(default_factory=dict)


def fit_rows(rows: Sequence[ScanRow], predicted: BoundDescriptor, slack: float = FIT_SLACK,
             min_magnitude: float = MIN_MAGNITUDE, min_rows: int = MIN_ROWS,
             delta: Optional[float] = None) -> FitReport:
    """Least-squares fit of log|R| against log(1/eps), compared one-sidedly with the predicted bound"""
    ordered = sorted(rows, key=lambda row: -row.epsilon)
    usable = [row for row in ordered if row.usable(min_magnitude)]
    if len(usable) < min_rows:
        raise TooFewUsableRows(
            f"Only {len(usable)} rows have |R| >= {min_magnitude}; need {min_rows}",
            usable=len(usable), required=min_rows
        )
    x = np.array([math.log(1 / row.epsilon) for row in usable])
    y = np.array([math.log(row.magnitude) for row in usable])
    log_degree = predicted.log_degree or 0.0
    if predicted.kind == "power_log":
        y = y - log_degree * np.log(2 + x)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = y - (slope * x + intercept)
    spread = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(fitted ** 2)) / spread if spread > 0 else 1.0
    beta = -float(slope)
    floor = predicted.power if predicted.power is not None else 0.0
    verdict = beta >= floor - slack

    log_constant = None
    if predicted.log_degree is not None:
        log_constant = max(
            row.magnitude / (1 + abs(math.log2(row.epsilon))) ** log_degree for row in usable
        )
    report = FitReport(
        beta=beta, C=math.exp(float(intercept)), r2=r2, verdict=verdict, predicted=predicted,
        used_rows=len(usable), excluded_rows=len(ordered) - len(usable), log_constant=log_constant,
        slack=slack, delta=delta,
    )
    logger.info(f"Fit: beta={beta:.4f} (bound {floor:.4f} - {slack}), r2={r2:.3f}, "
                f"{'PASS' if verdict else 'FAIL'}")
    return report


def _sorted_eps(eps_list: Sequence[Any]) -> List[Any]:
    values = sorted(eps_list, key=lambda e: -to_float(e))
    floats = [to_float(e) for e in values]
    if any(a == b for a, b in zip(floats, floats[1:])):
        raise InconsistentParameters("eps values must be distinct")
    if floats and floats[-1] <= 0:
        raise InconsistentParameters("eps values must be positive")
    return values


def scan_and_fit(sd: SplitData, domain: Domain, eps_list: Sequence[Any], regime: RegimeClass,
                 tol: float = DEFAULT_TOL, budget: Optional[int] = None, workers: int = 1,
                 method: str = METHOD_SLICED, slack: float = FIT_SLACK,
                 min_magnitude: float = MIN_MAGNITUDE, min_rows: int = MIN_ROWS) -> RemainderScan:
    """Count, leading term and remainder for every eps, then fit the remainder growth"""
    n, p, q, r = sd.dims
    if (regime.n, regime.p, regime.q, regime.r) != (n, p, q, r):
        raise InconsistentParameters(
            f"Regime dims {(regime.n, regime.p, regime.q, regime.r)} do not match split dims {(n, p, q, r)}"
        )
    predicted = predicted_exponent(regime)
    eps_values = _sorted_eps(eps_list)
    slices = slice_sum(sd, domain, budget)

    def one_row(eps) -> ScanRow:
        if method == METHOD_NAIVE:
            result = count_naive(sd.lattice, domain, AnisoMap(sd.F, eps), tol=tol, budget=budget)
        else:
            result = count_sliced(sd, domain, eps, tol=tol, budget=budget)
        lt = leading_term(sd, domain, eps, slices)
        lo, hi = result.interval
        row = ScanRow(
            epsilon=to_float(eps), count_lo=lo, count_hi=hi, leading=lt,
            rem_lo=lo - lt, rem_hi=hi - lt, method=result.method, wall_time_ms=result.wall_time_ms,
        )
        logger.info(f"eps={row.epsilon:.6g}: count [{lo}, {hi}], leading {lt:.6f}, "
                    f"remainder [{row.rem_lo:.4f}, {row.rem_hi:.4f}]")
        return row

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as executor:
        rows = list(executor.map(one_row, eps_values))
    delta = regime.delta if regime.name == REGIME_ALGEBRAIC_PRODUCT else None
    fit = fit_rows(rows, predicted, slack=slack, min_magnitude=min_magnitude, min_rows=min_rows, delta=delta)
    return RemainderScan(rows=rows, fit=fit, regime=regime, slice_stderr=slices[1])


def eps_ladder(base, start: int, stop: int) -> List[Any]:
    """base^-k for k = start..stop, exact when base is exact"""
    scalar = to_scalar(base) if is_exact(base) else float(base)
    return [scalar ** (-k) for k in range(start, stop + 1)]
