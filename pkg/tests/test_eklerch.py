"""Eisenstein-Kronecker-Lerch numerics."""
from fractions import Fraction

import mpmath as mp
import pytest

from ektheta.curves import catalog_row, compute_periods
from ektheta.eklerch import (
    HeckeCharacter,
    PoleError,
    check_functional_equation,
    direct_hecke_sum,
    e2star_numeric,
    eisenstein_kronecker_lerch,
    ek_number,
    hecke_L_partial,
    rational_reconstruct,
)
from ektheta.scalars import ExactScalar


@pytest.fixture(scope="module")
def zi_lattice():
    return compute_periods(catalog_row("Z[sqrt(-1)]").curve(4), 256)


class TestEKValues:
    def test_e04_against_brute_force_lattice_sum(self, zi_lattice):
        # oracle: truncated sum 60 sum' gamma^-4 = g2, tail ~ R^-2
        w1, w2 = zi_lattice.pair_mpc()
        with mp.workprec(128):
            R = 120
            s = mp.fsum((m * w1 + n * w2) ** -4
                        for m in range(-R, R + 1) for n in range(-R, R + 1)
                        if (m, n) != (0, 0))
            val = ek_number(0, 4, 0, 0, zi_lattice, 1e-24,
                            z0_in_lattice=True, w0_in_lattice=True)
            assert abs(val.to_mpc() - s) < 1e-4
            assert abs(60 * s - 4) < 1e-3

    def test_e04_exact_value(self, zi_lattice):
        # e*_{0,4} = g2/60 = 1/15
        val = ek_number(0, 4, 0, 0, zi_lattice, 1e-24,
                        z0_in_lattice=True, w0_in_lattice=True)
        with mp.workprec(200):
            assert abs(val.to_mpc() - mp.mpf(1) / 15) < 1e-20

    def test_K4_at_s4(self, zi_lattice):
        val = eisenstein_kronecker_lerch(4, 0, 0, 4, zi_lattice, 1e-24,
                                         z0_in_lattice=True, w0_in_lattice=True)
        with mp.workprec(200):
            assert abs(val.to_mpc() - mp.mpf(1) / 15) < 1e-20

    def test_odd_weight_vanishes_on_square_lattice(self, zi_lattice):
        for a, b in [(0, 1), (0, 2), (1, 2), (0, 3), (2, 3), (1, 4)]:
            if (a + b) % 4 == 0:
                continue
            val = ek_number(a, b, 0, 0, zi_lattice, 1e-20,
                            z0_in_lattice=True, w0_in_lattice=True)
            assert abs(val.to_mpc()) < 1e-18, (a, b)

    def test_self_consistency_on_precision_doubling(self, zi_lattice):
        w1, w2 = zi_lattice.pair_mpc()
        z0, w0 = 0.23 * w1 + 0.17 * w2, -0.31 * w1 + 0.46 * w2
        coarse = eisenstein_kronecker_lerch(3, z0, w0, 2, zi_lattice, 1e-12)
        fine = eisenstein_kronecker_lerch(3, z0, w0, 2, zi_lattice, 1e-24)
        assert abs(coarse.to_mpc() - fine.to_mpc()) < 1e-12

    def test_pole_rejected(self, zi_lattice):
        with pytest.raises(PoleError):
            eisenstein_kronecker_lerch(0, 0, 0.5, 0, zi_lattice, 1e-10,
                                       z0_in_lattice=True, w0_in_lattice=False)

    def test_conjugation_symmetry(self, zi_lattice):
        w1, w2 = zi_lattice.pair_mpc()
        with mp.workprec(220):
            z0 = 0.31 * w1 + 0.12 * w2
            w0 = 0.27 * w1 - 0.39 * w2
            a, s = 2, mp.mpc(2.0, 0.5)
            lhs = mp.conj(eisenstein_kronecker_lerch(a, z0, w0, s, zi_lattice,
                                                     1e-20).to_mpc())
            rhs = eisenstein_kronecker_lerch(a, mp.conj(z0), mp.conj(w0),
                                             mp.conj(s), zi_lattice, 1e-20).to_mpc()
            assert abs(lhs - rhs) < 1e-18


class TestFunctionalEquation:
    def test_generic_point(self, zi_lattice):
        w1, w2 = zi_lattice.pair_mpc()
        res = check_functional_equation(2, 0.2 * w1 + 0.3 * w2,
                                        0.41 * w1 - 0.11 * w2, 2, zi_lattice, 1e-20)
        assert res < 2e-20

    def test_critical_symmetry_point(self, zi_lattice):
        w1, w2 = zi_lattice.pair_mpc()
        z0 = 0.25 * w1 + 0.4 * w2
        res = check_functional_equation(3, z0, z0, 2, zi_lattice, 1e-20)
        assert res < 1e-20

    def test_order_three_torsion_grid(self, zi_lattice):
        w1, w2 = zi_lattice.pair_mpc()
        for a in range(0, 5):
            for s in (Fraction(1), Fraction(2), Fraction(a + 1, 2)):
                if a == 0 and s in (0, 1):
                    continue
                sval = mp.mpf(s.numerator) / s.denominator
                res = check_functional_equation(a, w1 / 3, (w1 + w2) / 3,
                                                sval, zi_lattice, 1e-18)
                assert res < 1e-15, (a, s)


class TestDifferentialEquation:
    def test_dz_relation_via_central_differences(self, zi_lattice):
        # d/dz K_a(z,w,s) = -s K_{a+1}(z,w,s+1), Wirtinger derivative by
        # averaging real and imaginary difference quotients
        w1, w2 = zi_lattice.pair_mpc()
        with mp.workprec(300):
            z = mp.mpf("0.2713") * w1 + mp.mpf("0.1841") * w2
            w = mp.mpf("-0.3327") * w1 + mp.mpf("0.4196") * w2
            a, s = 2, 3
            h = mp.mpf(10) ** -12
            K = lambda zz: eisenstein_kronecker_lerch(a, zz, w, s, zi_lattice,
                                                      1e-40).to_mpc()
            dre = (K(z + h) - K(z - h)) / (2 * h)
            dim = (K(z + 1j * h) - K(z - 1j * h)) / (2j * h)
            dz = (dre + dim) / 2
            rhs = -s * eisenstein_kronecker_lerch(a + 1, z, w, s + 1, zi_lattice,
                                                  1e-40).to_mpc()
            assert abs(dz - rhs) / abs(rhs) < 1e-8


class TestE2StarCatalog:
    @pytest.mark.parametrize("label,want", [
        ("Z[2*sqrt(-1)]", Fraction(1)),
        ("Z[sqrt(-3)]", Fraction(1, 2)),
        ("Z[(1+sqrt(-11))/2]", Fraction(2)),
    ])
    def test_k2_matches_figure(self, label, want):
        lat = compute_periods(catalog_row(label).curve(1), 256)
        val = e2star_numeric(lat, 1e-20)
        with mp.workprec(256):
            ref = mp.mpf(want.numerator) / want.denominator
            assert abs(val.to_mpc() - ref) < 1e-15

    def test_rational_reconstruct(self):
        with mp.workprec(200):
            assert rational_reconstruct(mp.mpf(9) / 2, 100) == Fraction(9, 2)
            assert rational_reconstruct(mp.pi, 50) is None


def make_zi_conductor_character():
    """Canonical type-(1,0) character of conductor (2+2i) on Q(i):
    eps(alpha) = the unit making eps * alpha = 1 mod (2+2i)."""
    i = ExactScalar(0, 1, 1)
    one = ExactScalar(1)
    table = {one: one, i: -i, -one: -one, -i: i}
    return HeckeCharacter(d=1, conductor=ExactScalar(2, 2, 1),
                          infinity_type=(1, 0), table=table)


class TestHeckeL:
    def test_character_table_unit_inverse(self):
        char = make_zi_conductor_character()
        i = ExactScalar(0, 1, 1)
        # 3+2i = unit-class? reduce and check eps * alpha = 1 mod f
        for alpha in (ExactScalar(3, 2, 1), ExactScalar(1, 4, 1), ExactScalar(-5, 2, 1)):
            eps = char.eps(alpha)
            q = (eps * alpha - 1) / char.conductor
            assert q.a.denominator == 1 and q.b.denominator == 1

    def test_non_multiplicative_table_rejected(self):
        i = ExactScalar(0, 1, 1)
        one = ExactScalar(1)
        bad = {one: one, i: i, -one: -one, -i: i}
        with pytest.raises(ValueError):
            HeckeCharacter(1, ExactScalar(2, 2, 1), (1, 0), bad)

    def test_trivial_conductor_rejected_for_type_1_0(self):
        one = ExactScalar(1)
        with pytest.raises(ValueError):
            HeckeCharacter(1, one, (1, 0), {one: one})

    def test_empty_truncation_is_zero(self):
        char = make_zi_conductor_character()
        assert abs(direct_hecke_sum(char, 6, 0).to_mpc()) == 0

    def test_assembly_matches_direct_sum(self):
        char = make_zi_conductor_character()
        s = 6
        direct = direct_hecke_sum(char, s, 500, prec_bits=256)
        assembled = hecke_L_partial(char, s, target_error=1e-16, prec_bits=256)
        assert abs(direct.to_mpc() - assembled.to_mpc()) < 1e-10


class TestE2StarEstimate:
    def test_catalog_row_verified(self):
        from ektheta.eklerch import e2star_estimate
        lat = compute_periods(catalog_row("Z[sqrt(-3)]").curve(1), 200)
        val, rec, verified = e2star_estimate(lat)
        assert rec == Fraction(1, 2) and verified

    def test_non_catalog_reported_unverified(self):
        from ektheta.curves import CurveData
        from ektheta.eklerch import e2star_estimate
        from ektheta.scalars import ExactScalar
        lat = compute_periods(CurveData(ExactScalar(5), ExactScalar(1)), 200)
        val, rec, verified = e2star_estimate(lat)
        assert not verified
