"""Exact / p-adic scalar arithmetic."""
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ektheta.scalars import (
    ExactScalar,
    FieldMismatchError,
    PadicContext,
    RamifiedPrimeError,
    ValuationAtLeast,
    embed_padic,
)


def Q(x):
    return ExactScalar(Fraction(x))


def gauss(a, b):
    return ExactScalar(Fraction(a), Fraction(b), 1)


class TestExactScalar:
    def test_rational_add(self):
        assert Q(Fraction(1, 2)) + Q(Fraction(1, 3)) == Q(Fraction(5, 6))

    def test_sqrt_minus_one_squares(self):
        i = gauss(0, 1)
        assert i * i == Q(-1)

    def test_norm_identity(self):
        assert gauss(2, 3) * gauss(2, -3) == Q(13)

    def test_division(self):
        x = gauss(2, 3)
        assert x / x == Q(1)
        assert (Q(1) / gauss(0, 1)) == gauss(0, -1)

    def test_field_mismatch(self):
        with pytest.raises(FieldMismatchError):
            gauss(1, 1) * ExactScalar(0, 1, 3)

    def test_rational_mixes_with_any_tag(self):
        assert Q(2) * ExactScalar(0, 1, 7) == ExactScalar(0, 2, 7)

    def test_canonical_b_zero_drops_tag(self):
        x = ExactScalar(Fraction(3), Fraction(0), 0)
        y = gauss(1, 1) * gauss(1, -1) - Q(-1)  # = 2 - (-1) = 3
        assert x == y and hash(x) == hash(y)

    def test_nonsquarefree_tag_rejected(self):
        with pytest.raises(ValueError):
            ExactScalar(0, 1, 4)

    def test_json_round_trip(self):
        for x in (Q(Fraction(-7, 3)), gauss(Fraction(1, 2), Fraction(-5, 4))):
            assert ExactScalar.from_json(x.to_json()) == x


rationals = st.fractions(min_value=-1000, max_value=1000, max_denominator=10**4)


@st.composite
def quad_elements(draw, d=7):
    return ExactScalar(draw(rationals), draw(rationals), d)


class TestFieldAxioms:
    @given(quad_elements(), quad_elements(), quad_elements())
    @settings(max_examples=60, deadline=None)
    def test_associativity_distributivity(self, x, y, z):
        assert (x + y) + z == x + (y + z)
        assert (x * y) * z == x * (y * z)
        assert x * (y + z) == x * y + x * z

    @given(quad_elements())
    @settings(max_examples=60, deadline=None)
    def test_inverses(self, x):
        if x:
            assert x * (ExactScalar(1) / x) == ExactScalar(1)
        assert x + (-x) == ExactScalar(0)


class TestPadicScalar:
    def test_integer_arithmetic_matches_mod_pN(self):
        ctx = PadicContext(13)
        N = 6
        for a, b in [(7, 9), (13 * 5, 2), (-4, 13**2 * 3)]:
            x, y = ctx.from_int(a, N), ctx.from_int(b, N)
            assert (x + y).eq_mod(ctx.from_int(a + b, N), N)
            assert (x * y).eq_mod(ctx.from_int(a * b, N), N)

    def test_valuation_examples(self):
        ctx = PadicContext(13)
        assert ctx.from_int(13**2, 5).valuation() == 2
        assert ctx.zero(5).valuation() == ValuationAtLeast(5)
        assert ctx.from_fraction(Fraction(1, 13), 5).valuation() == -1

    def test_precision_tracking_product(self):
        ctx = PadicContext(5)
        x = ctx.from_int(2, 4)
        y = ctx.from_int(3, 7)
        assert (x * y).abs_prec == 4

    def test_division_shifts_precision(self):
        ctx = PadicContext(5)
        x = ctx.from_int(1, 6)
        y = ctx.from_int(25, 6)  # val 2, rel 4
        q = x / y
        assert q.val == -2
        assert q.abs_prec == 2  # -2 + rel 4

    def test_addition_cancellation_detected(self):
        ctx = PadicContext(7)
        x = ctx.from_int(3, 5)
        y = ctx.from_int(-3 + 7**3, 5)
        assert (x + y).valuation() == 3

    def test_unramified_f2_field_is_a_field(self):
        ctx = PadicContext(5, 2)
        x = ctx.from_vector((2, 3), 6)
        assert (x * x.inverse()).eq_mod(ctx.from_int(1, 6), 6)

    def test_json_shape(self):
        ctx = PadicContext(13)
        obj = ctx.from_fraction(Fraction(5, 13), 4).to_json()
        assert obj["p"] == 13 and obj["val"] == -1 and obj["prec"] == 4


def extended_euclid_inverse(a: int, m: int) -> int:
    """Independent oracle for modular inverses."""
    g, x, _ = _xgcd(a % m, m)
    assert g == 1
    return x % m


def _xgcd(a, b):
    if a == 0:
        return b, 0, 1
    g, x, y = _xgcd(b % a, a)
    return g, y - (b // a) * x, x


class TestEmbedPadic:
    def test_embed_one_third_matches_euclid_oracle(self):
        # oracle: inverse of 3 mod 13^5 by extended Euclid
        want = extended_euclid_inverse(3, 13**5)
        got = embed_padic(Q(Fraction(1, 3)), 13, 5)
        assert got.vector()[0] == want
        assert got.vector()[0] % 13 == 9

    def test_embed_sqrt_minus_one_is_declared_root(self):
        # oracle: brute-force roots of r^2 = -1 mod 13 are {5, 8}; smallest is 5
        roots = [r for r in range(13) if (r * r + 1) % 13 == 0]
        assert roots == [5, 8]
        got = embed_padic(ExactScalar(0, 1, 1), 13, 1)
        assert got.vector()[0] == 5

    def test_embed_zero(self):
        z = embed_padic(Q(0), 7, 4)
        assert z.is_zero() and z.abs_prec == 4

    def test_embed_pole(self):
        x = embed_padic(Q(Fraction(1, 13)), 13, 5)
        assert x.valuation() == -1

    def test_ramified_rejected(self):
        with pytest.raises(RamifiedPrimeError):
            embed_padic(ExactScalar(0, 1, 7), 7, 3)

    def test_inert_needs_even_f(self):
        # -1 is not a square mod 7
        with pytest.raises(ValueError):
            embed_padic(ExactScalar(0, 1, 1), 7, 3, f=1)
        r = embed_padic(ExactScalar(0, 1, 1), 7, 3, f=2)
        sq = r * r
        assert sq.eq_mod(PadicContext(7, 2).from_int(-1, 3), 3)

    @given(st.integers(-200, 200), st.integers(-200, 200),
           st.integers(-200, 200), st.integers(-200, 200))
    @settings(max_examples=40, deadline=None)
    def test_ring_homomorphism(self, a1, b1, a2, b2):
        x = ExactScalar(a1, b1, 1)
        y = ExactScalar(a2, b2, 1)
        N = 5
        ex, ey = embed_padic(x, 13, N), embed_padic(y, 13, N)
        assert embed_padic(x * y, 13, N).eq_mod(ex * ey, N)
        assert embed_padic(x + y, 13, N).eq_mod(ex + ey, N)


class TestBigComplex:
    def test_precision_never_silently_reduced(self):
        from ektheta.scalars import BigComplex
        x = BigComplex.make("1.25", 100)
        y = BigComplex.make("2.5", 200)
        assert (x + y).prec_bits == 200
        assert (x * y).prec_bits == 200
        assert (x / y).prec_bits == 200

    def test_json_round_trip(self):
        from ektheta.scalars import BigComplex
        import mpmath as mp
        with mp.workprec(180):
            x = BigComplex(mp.mpf(1) / 3, -mp.mpf(7) ** 0.5, 180)
        y = BigComplex.from_json(x.to_json())
        with mp.workprec(180):
            assert abs(x.to_mpc() - y.to_mpc()) < mp.mpf(2) ** -150
