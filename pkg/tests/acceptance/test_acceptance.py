"""
End-to-end checks of counting, splitting, spectral and number field identities.

These runs take minutes; they are deselected by default. Run with:
    pytest -m acceptance
"""
import pytest
import itertools
import json
import math
import random
from fractions import Fraction
from pathlib import Path

import numpy as np

import app
from asymptotics import (
    MIN_ROWS, REGIME_BOX_ADMISSIBLE, REGIME_SLICE_STRICTLY_CONVEX, REGIME_SMOOTH_SLICES,
    BoundDescriptor, RegimeClass, ScanRow, eps_ladder, fit_rows, leading_term,
    predicted_exponent, scan_and_fit,
)
from counting import BudgetExceeded, count_naive, count_sliced
from domains import AnisoMap, Ball, Box, Product
from exact_scalar import FieldElement, inverse, mat_mul, transpose
from lattice_core import Lattice, SingularBasis, theta_check
from numberfield import (
    PRESETS, STATUS_CERTIFIED, analyze_field, field_norm, good_position_check, norm_E,
    preset_lattice,
)
from reports import read_csv
from spectral import FlatTorus, counting_function, leading_term_spectral
from splitter import InvalidSubspace, SubspaceSpec, split

pytestmark = pytest.mark.acceptance

SCENARIOS = Path(__file__).resolve().parents[2] / "scenarios"


def random_lattice(rng, n, height=2):
    while True:
        rows = [
            [Fraction(int(i == j) * rng.randint(1, 2) + rng.randint(-1, 1), rng.randint(1, height))
             for j in range(n)]
            for i in range(n)
        ]
        try:
            return Lattice(rows)
        except SingularBasis:
            continue


def random_subspace(rng, n, p):
    while True:
        try:
            return SubspaceSpec([[rng.randint(-2, 2) for _ in range(n)] for _ in range(p)], dim=n)
        except InvalidSubspace:
            continue


def random_domain(rng, n):
    center = [Fraction(rng.randint(-2, 2), 4) for _ in range(n)]
    kind = rng.choice(["ball", "box", "product"] if n > 1 else ["ball", "box"])
    if kind == "ball":
        return Ball(center, radius=Fraction(rng.randint(2, 6), 4))
    if kind == "box":
        return Box(center, [Fraction(rng.randint(1, 4), 4) for _ in range(n)])
    unit = [[int(i == j) for j in range(n)] for i in range(n)]
    return Product([
        (unit[:1], Box(center[:1], [Fraction(rng.randint(1, 4), 4)])),
        (unit[1:], Ball(center[1:], radius=Fraction(rng.randint(2, 6), 4))),
    ])


def random_metric(rng, n):
    """G = (C C^T)^-1 for a rational lower-triangular C, so the congruence factor is exact"""
    c = [[Fraction(rng.randint(1, 3), rng.randint(1, 2)) if i == j else
          (Fraction(rng.randint(-1, 1), 2) if j < i else Fraction(0)) for j in range(n)] for i in range(n)]
    return inverse(mat_mul(c, transpose(c)))


class TestOracleEquivalence:
    """Sliced and naive counts agree on randomized cases"""

    def test_random_cases(self):
        rng = random.Random(20240601)
        compared = 0
        attempts = 0
        while compared < 100 and attempts < 400:
            attempts += 1
            n = rng.randint(1, 3)
            lattice = random_lattice(rng, n)
            subspace = random_subspace(rng, n, rng.randint(0, n))
            domain = random_domain(rng, n)
            q = n - subspace.p
            eps = rng.choice([Fraction(1), Fraction(1, 4), Fraction(1, 16), Fraction(1, 64)])
            while eps ** -q > 4096:
                eps *= 4
            try:
                naive = count_naive(lattice, domain, AnisoMap(subspace, eps), budget=5_000_000)
                sliced = count_sliced(split(lattice, subspace), domain, eps, budget=5_000_000)
            except BudgetExceeded:
                continue
            assert naive.interval == sliced.interval, (lattice.basis, subspace.rows, domain.describe(), eps)
            compared += 1
        assert compared == 100


class TestCovolumeIdentity:
    """Covolume identity for splits"""

    def test_random_rational(self):
        rng = random.Random(32)
        for _ in range(50):
            n = rng.randint(1, 4)
            lattice = random_lattice(rng, n, height=4)
            sd = split(lattice, random_subspace(rng, n, rng.randint(0, n)))
            assert sd.checks["identity"] == "exact"
            assert sd.identity_residual == 0

    @pytest.mark.parametrize("preset,axes", [("Z[sqrt2]", [0]), ("Z[cbrt2]", [0]), ("Z[cbrt2]", [1, 2])])
    def test_number_field_lattices(self, preset, axes):
        lattice = preset_lattice(preset).embedded
        sd = split(lattice, SubspaceSpec.axes(lattice.dim, axes))
        expected = lattice.covolume * sd.gamma_f.covolume
        assert abs(sd.gamma_perp.covolume - expected) <= 1e-12 * expected


class TestThetaIdentity:
    def test_random_lattices(self):
        """Test the Poisson summation identity on 50 random rational lattices"""
        rng = random.Random(3)
        for _ in range(50):
            lattice = random_lattice(rng, rng.randint(1, 4))
            for t in (Fraction(1, 2), 1, 2):
                result = theta_check(lattice, t)
                assert abs(result.lhs - result.rhs) <= 1e-9 * max(1.0, result.lhs)


class TestStripScenario:
    """The strip (-1/2, 3/2) x (0, 1) along the x-axis"""

    def test_count_and_leading_term(self, z2):
        sd = split(z2, SubspaceSpec.axes(2, [0]))
        strip = Box([Fraction(1, 2), Fraction(1, 2)], [1, Fraction(1, 2)])
        assert count_sliced(sd, strip, Fraction(1, 10)).interval == (18, 18)
        assert leading_term(sd, strip, Fraction(1, 10)) == pytest.approx(20.0)
        scan = scan_and_fit(sd, strip, eps_ladder(10, 1, 5), RegimeClass.from_split(sd, REGIME_SMOOTH_SLICES))
        for row in scan.rows:
            assert -2 - 1e-9 <= row.rem_lo <= row.rem_hi <= -1 + 1e-9

    def test_bundled_strip(self, tmp_path):
        assert app.main(["scan", "--config", str(SCENARIOS / "strip.json"), "--out", str(tmp_path)]) == app.EXIT_PASS
        rows = read_csv(tmp_path / "scan.csv")
        assert all(float(row["rem_lo"]) == pytest.approx(-2.0) for row in rows)

    def test_reruns_are_identical(self, tmp_path):
        """Test two runs produce the same CSV apart from timings"""
        tables = []
        for name in ("a", "b"):
            out = tmp_path / name
            app.main(["scan", "--config", str(SCENARIOS / "strip.json"), "--out", str(out)])
            tables.append([{k: v for k, v in row.items() if k != "wall_time_ms"} for row in read_csv(out / "scan.csv")])
        assert tables[0] == tables[1]


class TestConvergenceRegime:
    """Unit disk against the irrational line span(1, sqrt2)"""

    def test_disk_sqrt2(self, z2, sqrt2):
        sd = split(z2, SubspaceSpec([[1, sqrt2]]))
        disk = Ball([0, 0], radius=1)
        regime = RegimeClass.from_split(sd, REGIME_SLICE_STRICTLY_CONVEX)
        scan = scan_and_fit(sd, disk, eps_ladder(2, 4, 14), regime)
        assert scan.fit.beta >= -1 / 3 - 0.12
        last = min(scan.rows, key=lambda row: row.epsilon)
        assert max(abs(last.rem_lo), abs(last.rem_hi)) <= 0.05 * last.leading

    def test_bundled_disk(self, tmp_path):
        code = app.main(["scan", "--config", str(SCENARIOS / "disk_sqrt2.json"), "--out", str(tmp_path)])
        assert code == app.EXIT_PASS
        fit = json.loads((tmp_path / "fit.json").read_text())
        assert -0.45 <= fit["beta"] <= 0


class TestAnomalousRegime:
    """Axis-parallel unit square with sigma(Z[sqrt2])"""

    def test_good_position(self):
        verdict = good_position_check(preset_lattice("Z[sqrt2]"))
        assert verdict.status == STATUS_CERTIFIED
        assert verdict.bound == 1.0

    def test_box_sqrt2(self, sqrt2_lattice):
        sd = split(sqrt2_lattice, SubspaceSpec.axes(2, [0]))
        assert sd.r == 0
        square = Box([0, 0], [Fraction(1, 2), Fraction(1, 2)])
        regime = RegimeClass.from_split(sd, REGIME_BOX_ADMISSIBLE)
        assert predicted_exponent(regime).log_degree == 1
        rows = []
        for eps in eps_ladder(2, 4, 20):
            lo, hi = count_sliced(sd, square, eps).interval
            lt = leading_term(sd, square, eps)
            rows.append(ScanRow(epsilon=float(eps), count_lo=lo, count_hi=hi, leading=lt,
                                rem_lo=lo - lt, rem_hi=hi - lt))
        logs = [1 + abs(math.log2(row.epsilon)) for row in rows]
        magnitudes = [max(abs(row.rem_lo), abs(row.rem_hi)) for row in rows]
        c = max(m / g for m, g in zip(magnitudes, logs))
        print(f"|R| <= {c:.4f} (1 + |log2 eps|)")
        assert magnitudes[-1] <= 0.01 * rows[-1].leading

        assert len([row for row in rows if row.usable()]) >= MIN_ROWS
        assert abs(fit_rows(rows, BoundDescriptor(power=0.0)).beta) <= 0.15


class TestSpectralIdentity:
    """Eigenvalue counts against exact dual-lattice ball counts"""

    @staticmethod
    def brute_force(torus, lam, eps):
        aniso = torus.aniso(eps)
        basis = aniso.inverse(torus.dual_lattice.basis_float)
        sigma = float(np.linalg.svd(basis, compute_uv=False).min())
        bound = int(math.sqrt(float(lam)) / sigma) + 1
        total = 0
        for k in itertools.product(range(-bound, bound + 1), repeat=torus.dim):
            z = aniso.inverse_exact(torus.dual_lattice.embed(list(k)))
            if sum(x * x for x in z) < lam:
                total += 1
        return total

    def test_random_tori(self):
        rng = random.Random(77)
        for _ in range(50):
            n = rng.randint(2, 3)
            torus = FlatTorus(random_lattice(rng, n), random_metric(rng, n),
                              random_subspace(rng, n, rng.randint(0, n - 1)))
            lam = Fraction(rng.randint(1, 12), 4)
            eps = rng.choice([Fraction(1), Fraction(1, 2)] + ([Fraction(1, 4)] if n == 2 else []))
            result = counting_function(torus, lam, eps, scaled=True)
            assert result.boundary_hits == 0
            assert result.certain == self.brute_force(torus, lam, eps)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_axis_closed_form(self, k):
        """Test N(4 pi^2) = 2 ceil(1/eps) - 1 for the axis foliation of Z^2"""
        torus = FlatTorus(Lattice.standard(2), subspace=SubspaceSpec.axes(2, [0]))
        eps = Fraction(1, 10 ** k)
        assert counting_function(torus, 1, eps, scaled=True).interval == (2 * 10 ** k - 1,) * 2


class TestDualPathLeadingTerm:
    def test_random_tori(self):
        """Test the spectral leading term equals the sliced leading term of the dual ball"""
        rng = random.Random(8)
        for _ in range(20):
            n = rng.randint(2, 3)
            torus = FlatTorus(random_lattice(rng, n), random_metric(rng, n),
                              random_subspace(rng, n, rng.randint(0, n - 1)))
            lam = Fraction(rng.randint(1, 40), 4)
            eps = Fraction(1, rng.randint(1, 20))
            generic = leading_term(torus.split_data, Ball([0] * n, radius_sq=lam), eps)
            spectral = leading_term_spectral(torus, lam, eps, scaled=True)
            assert spectral == pytest.approx(generic, rel=1e-9)


class TestNormAlgebra:
    @pytest.mark.parametrize("preset", ["Z[sqrt2]", "Z[cbrt2]"])
    def test_multiplicativity(self, preset):
        field = analyze_field(PRESETS[preset])
        rng = random.Random(9)
        for _ in range(200):
            a = FieldElement(field, [rng.randint(-100, 100) for _ in range(field.degree)])
            b = FieldElement(field, [rng.randint(-100, 100) for _ in range(field.degree)])
            assert abs(field_norm(a * b)) == abs(field_norm(a)) * abs(field_norm(b))

    @pytest.mark.parametrize("preset", ["Z[sqrt2]", "Z[cbrt2]"])
    def test_norm_form(self, preset):
        module = preset_lattice(preset)
        s, t = module.signature
        rng = random.Random(10)
        for _ in range(200):
            coeffs = [rng.randint(-100, 100) for _ in range(module.field.degree)]
            if not any(coeffs):
                continue
            expected = abs(float(field_norm(module.element(coeffs))))
            assert norm_E(module.embedded.embed_float(coeffs), s, t) == pytest.approx(expected, rel=1e-10)
