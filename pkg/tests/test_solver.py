import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quatrmt.errors import UnsupportedDegreeError
from quatrmt.references import Ginibre, Pastur, Scattering, closed_form_reference
from quatrmt.solver import (
    Branch,
    candidates_general,
    holomorphic_along,
    solve_general,
    solve_gue_special,
    solve_holomorphic,
)
from quatrmt.transforms import AtomicTwoPoint, ScaledSemicircle, WishartLike

S1 = ScaledSemicircle(1.0)
HOLO_PAIRS = [
    (S1, S1),
    (ScaledSemicircle(2.0), S1),
    (S1, WishartLike(1.0, 1.0)),
    (AtomicTwoPoint(0.5), S1),
    (WishartLike(1.0, 1.0), S1),
    (AtomicTwoPoint(0.5), WishartLike(1.0, 1.0)),
    (WishartLike(1.0, 1.0), WishartLike(0.5, 2.0)),
]


def mean(ens) -> float:
    # first moment: -c r for the Wishart-type ensemble, zero for the symmetric ones
    return -ens.c * ens.r if isinstance(ens, WishartLike) else 0.0


def blue_sum(ensH, ensHp, s):
    return ensH.blue(s) + 1j * ensHp.blue(1j * s) - 1 / s


class TestGeneral:
    def test_ginibre_example(self):
        sol = solve_general(S1, S1, 0.5 + 0.3j)
        assert sol.branch is Branch.NonHolomorphic
        assert math.isclose(sol.m, 0.5, abs_tol=1e-12)
        assert cmath.isclose(sol.G, 0.25 - 0.15j, abs_tol=1e-12)
        assert math.isclose(sol.C, -0.415, abs_tol=1e-12)

    @pytest.mark.parametrize("r, rp", [(1, 1), (2, 1), (0.5, 1.5)])
    def test_ginibre_general(self, r, rp):
        x, y = 0.3 * r, -0.2 * rp
        sol = solve_general(ScaledSemicircle(r), ScaledSemicircle(rp), complex(x, y))
        assert math.isclose(sol.m, rp / (r + rp), abs_tol=1e-10)
        assert cmath.isclose(sol.G, 0.5 * complex(x / r, -y / rp), abs_tol=1e-10)

    @pytest.mark.parametrize("mu", [0.5, 0.8])
    @pytest.mark.parametrize("x, y", [(0.1, 0.4), (-0.3, -1.0), (0.2, 0.05)])
    def test_pastur(self, mu, x, y):
        sol = solve_general(AtomicTwoPoint(mu), S1, complex(x, y))
        d = x * x - mu * mu
        assert math.isclose(sol.m, d + 1, abs_tol=1e-10)
        assert cmath.isclose(sol.G, -0.5j * y - x - x / (2 * d), abs_tol=1e-10)

    @pytest.mark.parametrize("z", [0.5 + 0.3j, -0.1 + 0.2j, 0.4 - 0.5j, 0.05 + 0.4j])
    def test_solution_invariants(self, z):
        # the Wishart part of i H' has eigenvalues on the negative imaginary axis
        for ensH, ensHp, w in [(S1, S1, z), (S1, WishartLike(1, 1), complex(z.real, -abs(z.imag) - 0.3)),
                               (AtomicTwoPoint(0.5), S1, complex(0.3 * z.real, z.imag))]:
            sol = solve_general(ensH, ensHp, w)
            assert sol.branch is Branch.NonHolomorphic
            assert abs(sol.g_prod - sol.gI_prod) < 1e-9
            assert sol.C <= 1e-9
            assert abs(sol.C - (0.25 * (sol.g_sum**2 + sol.gI_sum**2) - sol.g_prod)) < 1e-12
            assert cmath.isclose(sol.G, 0.5 * complex(sol.g_sum, -sol.gI_sum), abs_tol=1e-14)

    def test_root_pair_reconstruction(self):
        # G = Re g - i Re g^I with g, g^I the selected conjugate roots
        from quatrmt.transforms import conjugate_pairs, shifted_blue_poly

        z = 0.3 - 0.6j
        sol = solve_general(S1, WishartLike(1, 1), z)
        gH = [p for p in conjugate_pairs(shifted_blue_poly(S1, z.real, sol.m)) if abs(p.sum - sol.g_sum) < 1e-8]
        gI = [p for p in conjugate_pairs(shifted_blue_poly(WishartLike(1, 1), z.imag, 1 - sol.m))
              if abs(p.sum - sol.gI_sum) < 1e-8]
        assert gH and gI
        assert cmath.isclose(complex(gH[0].root.real, -gI[0].root.real), sol.G, abs_tol=1e-10)
        assert abs(abs(gH[0].root) ** 2 - abs(gI[0].root) ** 2) < 1e-10

    def test_outside_is_holomorphic(self):
        sol = solve_general(S1, S1, 2 + 0.5j)
        assert sol.branch is Branch.Holomorphic
        assert cmath.isclose(sol.G, 1 / (2 + 0.5j), abs_tol=1e-12)
        assert math.isnan(sol.m)

    def test_candidates_contain_solution(self):
        cands = candidates_general(S1, S1, 0.2 + 0.1j)
        assert any(c.admissible and abs(c.m - 0.5) < 1e-10 for c in cands)


class TestGueSpecial:
    @pytest.mark.parametrize("z", [0.5 + 0.3j, -0.7 - 0.2j, 0.1 + 0.9j])
    def test_ginibre(self, z):
        sol = solve_gue_special(S1, z)
        assert cmath.isclose(sol.G, z.conjugate() / 2, abs_tol=1e-12)
        assert math.isclose(sol.C, 0.25 * abs(z) ** 2 - 0.5, abs_tol=1e-12)

    @pytest.mark.parametrize("ensHp", [S1, ScaledSemicircle(0.5), WishartLike(1, 1), WishartLike(0.5, 2), AtomicTwoPoint(0.7)],
                             ids=str)
    def test_agrees_with_general(self, ensHp):
        for z in (0.2 + 0.1j, -0.4 + 0.3j, 0.1 - 0.5j, 0.5 + 0.2j):
            a, b = solve_gue_special(ensHp, z), solve_general(S1, ensHp, z)
            assert a.branch == b.branch
            assert abs(a.G - b.G) < 1e-8
            if a.branch is Branch.NonHolomorphic:
                assert abs(a.C - b.C) < 1e-8 and abs(a.m - b.m) < 1e-8

    def test_scattering_real_part(self):
        for z in (0.3 + 0.4j, -0.5 + 0.8j, 0.1 + 1.5j):
            sol = solve_gue_special(WishartLike(1, 1), z)
            if sol.branch is Branch.NonHolomorphic:
                assert math.isclose(sol.G.real, z.real / 2, abs_tol=1e-12)


class TestHolomorphic:
    def test_ginibre_inverse(self):
        assert cmath.isclose(solve_holomorphic(S1, S1, 2), 0.5, abs_tol=1e-12)

    @given(st.floats(0, 2 * math.pi))
    @settings(max_examples=25)
    def test_ginibre_borderline_branches_match(self, phi):
        z = math.sqrt(2) * cmath.exp(1j * phi)
        assert abs(solve_holomorphic(S1, S1, z) - z.conjugate() / 2) < 1e-9

    @pytest.mark.parametrize("pair", HOLO_PAIRS, ids=str)
    def test_asymptotics(self, pair):
        for phi in (0.3, 1.9, 4.0):
            z = 100 * cmath.exp(1j * phi)
            A = solve_holomorphic(*pair, z)
            mu = mean(pair[0]) + 1j * mean(pair[1])
            assert abs(A - 1 / z - mu / z**2) < 1e-4
            if mu == 0:
                assert abs(A - 1 / z) < 1e-4

    @pytest.mark.parametrize("pair", HOLO_PAIRS, ids=str)
    def test_solves_addition_law(self, pair):
        for z in (4 + 3j, -5 + 0.5j, 0.5 - 6j):
            A = solve_holomorphic(*pair, z)
            assert abs(blue_sum(*pair, A) - z) < 1e-9 * (1 + abs(z))

    def test_two_nonlinear_relations_unsupported(self):
        with pytest.raises(UnsupportedDegreeError):
            solve_holomorphic(AtomicTwoPoint(0.5), AtomicTwoPoint(0.7), 3 + 3j)

    def test_along_path_matches_pointwise(self):
        pts = 1.5 * np.exp(1j * np.linspace(0, 2 * np.pi, 50))
        vals = holomorphic_along(S1, S1, pts)
        assert np.max(np.abs(vals - 1 / pts)) < 1e-10


class TestCrossSolver:
    @pytest.mark.parametrize("model", [Ginibre(1, 1), Scattering(1, 1), Pastur(0.5)], ids=str)
    def test_grid_agreement(self, model):
        ensH, ensHp = model.ensembles()
        worst = 0.0
        n_inside = 0
        for x in np.linspace(-2.5, 2.5, 41) + 0.013:
            for y in np.linspace(-2.5, 2.5, 41) + 0.017:
                if min(abs(x - s) for s in model.singular_lines()[0] + (99.0,)) < 1e-3:
                    continue
                if min(abs(y - s) for s in model.singular_lines()[1] + (99.0,)) < 1e-3:
                    continue
                ref = closed_form_reference(model, complex(x, y))
                if ref.C > -1e-6:
                    continue
                sol = solve_general(ensH, ensHp, complex(x, y))
                assert sol.branch is Branch.NonHolomorphic
                worst = max(worst, abs(sol.G - ref.G), abs(sol.C - ref.C))
                n_inside += 1
        assert n_inside > 50
        assert worst < 1e-8
