import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatrmt.errors import DegenerateCoefficientError, DomainError, NoNonHoloSolution, PoleError, UnsupportedDegreeError
from quatrmt.transforms import (
    AtomicGeneral,
    AtomicTwoPoint,
    ScaledSemicircle,
    ShiftedBluePoly,
    WishartLike,
    blue,
    conjugate_pair_roots,
    conjugate_pairs,
    ensemble_from_json,
    green,
    shifted_blue_poly,
    viete_symmetric,
)

SINGLE_VALUED = [ScaledSemicircle(1.0), ScaledSemicircle(2.5), WishartLike(1.0, 1.0), WishartLike(0.7, 0.4)]
ATOMIC = [AtomicTwoPoint(0.5), AtomicTwoPoint(1.2), AtomicGeneral(((-1.0, 0.3), (0.5, 0.7)))]
CATALOG = SINGLE_VALUED + ATOMIC


def normalised(c):
    c = np.asarray(c, dtype=complex)
    return c / c[-1]


class TestGreen:
    def test_two_atoms_arithmetic(self):
        mu = 0.7
        assert cmath.isclose(green(AtomicTwoPoint(mu), 2 * mu), 2 / (3 * mu))

    def test_semicircle_at_three(self):
        assert math.isclose(green(ScaledSemicircle(1), 3).real, (3 - math.sqrt(5)) / 2, rel_tol=1e-14)

    @pytest.mark.parametrize("phase", np.linspace(0.1, 2 * np.pi, 7))
    def test_semicircle_moment_series(self, phase):
        z = 10 * cmath.exp(1j * phase)
        series = 1 / z + 1 / z**3 + 2 / z**5
        assert abs(green(ScaledSemicircle(1), z) - series) < 1e-6

    @pytest.mark.parametrize("ens", CATALOG, ids=str)
    def test_asymptotics_and_sign(self, ens):
        z = 1e4 * cmath.exp(0.3j)
        assert abs(green(ens, z) * z - 1) < 1e-3
        for z in (0.3 + 0.5j, -1.0 + 2j, 3 + 0.01j):
            assert green(ens, z).imag < 0

    @pytest.mark.parametrize("ens", CATALOG, ids=str)
    def test_conjugation_symmetry(self, ens):
        for z in (0.3 + 0.5j, -2 + 1j, 4 - 0.2j):
            assert cmath.isclose(green(ens, z.conjugate()), green(ens, z).conjugate(), rel_tol=1e-13)

    @pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
    def test_semicircle_branch_inside_cut(self, r):
        ens = ScaledSemicircle(r)
        for x in np.linspace(-0.99, 0.99, 21) * 2 * math.sqrt(r):
            assert green(ens, complex(x, 1e-8)).imag < 0

    def test_density_normalisation(self):
        # -(1/pi) Im G(x + i0) integrates to one
        ens = WishartLike(1.0, 2.0)
        lo, hi = ens.edges
        xs = np.linspace(lo, hi, 20001)
        rho = np.array([-green(ens, complex(x, 1e-12)).imag / math.pi for x in xs])
        assert abs(np.trapezoid(rho, xs) - 1) < 1e-3

    def test_real_point_errors(self):
        with pytest.raises(DomainError):
            green(ScaledSemicircle(1), 0.5)
        with pytest.raises(PoleError):
            green(ScaledSemicircle(1), 2.0)
        with pytest.raises(PoleError):
            green(AtomicTwoPoint(0.5), 0.5)
        assert math.isclose(green(ScaledSemicircle(1), 2.5).real, 0.5)


class TestBlue:
    def test_examples(self):
        assert blue(ScaledSemicircle(1), 1) == 2
        assert blue(WishartLike(1, 1), 1) == 0.5

    @pytest.mark.parametrize("ens", CATALOG, ids=str)
    def test_round_trip_fixed_point(self, ens):
        z = 2 + 0.5j
        assert abs(blue(ens, green(ens, z)) - z) < 1e-10

    @pytest.mark.parametrize("ens", SINGLE_VALUED, ids=str)
    def test_round_trip_random(self, ens, rng):
        for _ in range(100):
            z = complex(rng.uniform(-6, 6), rng.choice([-1, 1]) * rng.uniform(0.05, 4))
            assert abs(blue(ens, green(ens, z)) - z) < 1e-9

    @pytest.mark.parametrize("ens", ATOMIC, ids=str)
    def test_round_trip_random_outer_branch(self, ens, rng):
        # the Blue branch returned is the preimage of largest modulus
        rad = max(abs(lam) for lam, _ in ens.atoms)
        for _ in range(100):
            z = 2 * rad * cmath.exp(1j * rng.uniform(0, 2 * math.pi)) * rng.uniform(1, 4)
            assert abs(blue(ens, green(ens, z)) - z) < 1e-9

    @pytest.mark.parametrize("ens", CATALOG, ids=str)
    def test_green_of_blue(self, ens):
        for s in (0.05 + 0.02j, -0.03 + 0.04j):
            assert abs(green(ens, blue(ens, s)) - s) < 1e-9

    @pytest.mark.parametrize("ens", CATALOG, ids=str)
    def test_conjugation_symmetry(self, ens):
        for s in (0.2 + 0.1j, -0.4 + 0.3j):
            assert cmath.isclose(blue(ens, s.conjugate()), blue(ens, s).conjugate(), rel_tol=1e-13)

    def test_poles(self):
        with pytest.raises(PoleError):
            blue(ScaledSemicircle(1), 0)
        with pytest.raises(PoleError):
            blue(WishartLike(2.0, 1.0), -0.5)


class TestShiftedBlue:
    @given(st.floats(0.1, 5), st.floats(-5, 5), st.floats(-3, 3))
    def test_semicircle_form(self, r, x, m):
        p = shifted_blue_poly(ScaledSemicircle(r), x, m)
        assert np.allclose(normalised(p.coeffs), normalised([1 - m, -x, r]))

    @given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.1, 4), st.floats(-3, 3))
    def test_wishart_form(self, c, r, y, m):
        p = shifted_blue_poly(WishartLike(c, r), y, 1 - m)
        assert np.allclose(normalised(p.coeffs), normalised([-m, c * r - c * m + y, y * c]), atol=1e-9)

    @given(st.floats(0.1, 2), st.floats(-4, 4), st.floats(-3, 3))
    def test_two_atom_form(self, mu, x, m):
        if abs(x * x - mu * mu) < 1e-3:
            return
        p = shifted_blue_poly(AtomicTwoPoint(mu), x, m)
        assert np.allclose(normalised(p.coeffs), normalised([m * (m - 1), x * (2 * m - 1), x * x - mu * mu]), atol=1e-9)

    def test_degenerate_leading(self):
        with pytest.raises(DegenerateCoefficientError):
            shifted_blue_poly(AtomicTwoPoint(0.5), 0.5, 0.3)
        with pytest.raises(DegenerateCoefficientError):
            shifted_blue_poly(WishartLike(1, 1), 0.0, 0.3)

    @pytest.mark.parametrize("ens", SINGLE_VALUED, ids=str)
    def test_roots_solve_blue_equation(self, ens, rng):
        for _ in range(50):
            t, m = rng.uniform(-3, 3), rng.uniform(-2, 2)
            if abs(t) < 1e-3:
                continue
            for g in shifted_blue_poly(ens, t, m).roots():
                if abs(g) > 1e-6 and abs(1 + getattr(ens, "c", 0) * g) > 1e-6:
                    assert abs(blue(ens, g) - t - m / g) < 1e-9 * (1 + abs(t) + abs(m / g))

    @pytest.mark.parametrize("ens", ATOMIC, ids=str)
    def test_roots_solve_green_equation(self, ens, rng):
        for _ in range(50):
            t, m = rng.uniform(-3, 3), rng.uniform(-2, 2)
            for g in shifted_blue_poly(ens, t, m).roots():
                w = t + m / g
                if min(abs(w - lam) for lam, _ in ens.atoms) > 1e-6:
                    assert abs(green(ens, w) - g) < 1e-9 * (1 + abs(g))

    def test_general_atoms_have_higher_degree(self):
        ens = AtomicGeneral(((-1.0, 0.2), (0.0, 0.3), (2.0, 0.5)))
        assert shifted_blue_poly(ens, 0.7, 0.4).degree == 3


class TestRootPairs:
    def test_viete_examples(self):
        r, x, m = 2.0, 0.6, 0.3
        s, p = viete_symmetric(ShiftedBluePoly(np.array([1 - m, -x, r])))
        assert cmath.isclose(s, x / r) and cmath.isclose(p, (1 - m) / r)
        y, m = 0.4, 0.7
        s, p = viete_symmetric(ShiftedBluePoly(np.array([m, -y, 1.0])))
        assert cmath.isclose(s, y) and cmath.isclose(p, m)
        assert viete_symmetric(ShiftedBluePoly(np.array([1.0, 0.0, 1.0]))) == (0, 1)

    def test_viete_needs_quadratic(self):
        with pytest.raises(UnsupportedDegreeError):
            viete_symmetric(ShiftedBluePoly(np.array([1.0, 0.0, 0.0, 1.0])))

    def test_pair_examples(self):
        assert conjugate_pair_roots(ShiftedBluePoly(np.array([1.0, -1.0, 1.0]))) == pytest.approx((1, 1))
        assert conjugate_pair_roots(shifted_blue_poly(ScaledSemicircle(1), 0.0, 0.5)) == pytest.approx((0, 0.5))
        with pytest.raises(NoNonHoloSolution):
            conjugate_pair_roots(ShiftedBluePoly(np.array([2.0, -3.0, 1.0])))

    def test_cubic_pairs_match_roots(self):
        # (g - 2)(g^2 - 2g + 5): pair 1 +- 2i
        coeffs = np.polynomial.polynomial.polyfromroots([2, 1 + 2j, 1 - 2j]).real
        pairs = conjugate_pairs(ShiftedBluePoly(coeffs))
        assert len(pairs) == 1
        assert pairs[0].sum == pytest.approx(2) and pairs[0].product == pytest.approx(5)

    def test_pairs_sorted_by_imaginary_part(self):
        coeffs = np.polynomial.polynomial.polyfromroots([1j, -1j, 2 + 3j, 2 - 3j]).real
        pairs = conjugate_pairs(ShiftedBluePoly(coeffs))
        assert [p.root.imag for p in pairs] == pytest.approx([3, 1])

    def test_complex_coefficients_rejected(self):
        with pytest.raises(DomainError):
            conjugate_pairs(ShiftedBluePoly(np.array([1.0, 1j, 1.0])))


class TestCatalogParsing:
    @pytest.mark.parametrize("ens", CATALOG, ids=str)
    def test_json_round_trip(self, ens):
        assert ensemble_from_json(ens.to_json()) == ens

    @pytest.mark.parametrize(
        "bad",
        [
            {"kind": "nope"},
            {"kind": "semicircle"},
            {"kind": "semicircle", "r": 1, "extra": 2},
            {"kind": "semicircle", "r": -1},
            {"kind": "wishart", "c": 1, "r": 0},
            {"kind": "atoms", "atoms": [[0, 0.5], [1, 0.4]]},
            {"kind": "two_atoms", "mu": float("nan")},
            [1, 2],
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(DomainError):
            ensemble_from_json(bad)

    def test_supports(self):
        assert ScaledSemicircle(4).support() == [(-4, 4)]
        assert WishartLike(1, 1).support() == [(-4, 0)]
        assert (0.0, 0.0) in WishartLike(1, 0.5).support()
        assert AtomicTwoPoint(0.5).support() == [(-0.5, -0.5), (0.5, 0.5)]
