"""Arbitrary-precision evaluation of Eisenstein-Kronecker-Lerch sums.

The working representation is

    Gamma(s) K*_a(z0, w0, s) = I_a(z0, w0, s)
                               + A^(a+1-2s) I_a(w0, z0, a+1-s) <w0, z0>,

    I_a(z0, w0, s) = sum*_gamma Gamma(s, |z0+gamma|^2/A)
                     (conj(z0) + conj(gamma))^a <gamma, w0> / |z0+gamma|^(2s),

where sum* omits gamma = -z0 whenever z0 lies in the lattice.  Each lattice
sum is truncated at a radius R with the Gaussian tail bound

    sum_{|z0+gamma| > R} ... <= C * R^(a+1) exp(-R^2/A),

with the covolume constant C computed crudely and doubled.  Shells are
enumerated in a fixed order (growing max(|m|, |n|), then lexicographic), so
results are bit-reproducible at fixed precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Tuple

import mpmath as mp

from .curves import LatticeData, lattice_pair_mpc
from .scalars import BigComplex, ExactScalar

__all__ = [
    "PoleError",
    "TailBoundError",
    "eisenstein_kronecker_lerch",
    "ek_number",
    "check_functional_equation",
    "e2star_numeric",
    "is_lattice_point",
    "HeckeCharacter",
    "hecke_L_partial",
    "direct_hecke_sum",
    "rational_reconstruct",
]


class PoleError(ArithmeticError):
    """K*_a requested at one of its poles."""


class TailBoundError(ArithmeticError):
    """Requested target error unachievable at the lattice precision."""


def _work_prec(lattice: LatticeData, target_error) -> int:
    need = int(-mp.log(mp.mpf(target_error), 2)) + 48
    if need > lattice.prec_bits + 40:
        raise TailBoundError(
            f"target {target_error} needs ~{need} bits; lattice carries "
            f"{lattice.prec_bits}")
    return max(need, 64)


def is_lattice_point(z, lattice: LatticeData, prec: Optional[int] = None) -> bool:
    """Numeric membership test: distance to the nearest lattice point below
    2^(-prec/4)-level resolution."""
    prec = prec or lattice.prec_bits
    with mp.workprec(prec):
        w1, w2 = lattice.pair_mpc()
        z = mp.mpc(z)
        det = mp.im(mp.conj(w1) * w2)
        a = mp.im(mp.conj(w1) * z) / det
        b = -mp.im(mp.conj(w2) * z) / det
        # z = b*w1 ... solve z = x w1 + y w2 with real x, y
        y = a
        x = b
        dist = abs(z - (mp.nint(x) * w1 + mp.nint(y) * w2))
        return dist < mp.mpf(2) ** (-(prec // 4))


def _shells(mmax: int):
    yield (0, 0)
    for M in range(1, mmax + 1):
        for m in range(-M, M + 1):
            for n in range(-M, M + 1):
                if max(abs(m), abs(n)) == M:
                    yield (m, n)


def _radius_for(a: int, smax, A, target, covol):
    """Smallest R with 2 * (2 pi A / covol) R^(a+1) exp(-R^2/A) < target."""
    C = 4 * mp.pi * A / covol
    R = mp.sqrt(A) + 1
    while 2 * C * R ** (a + 1) * mp.exp(-R * R / A) * (1 + abs(smax)) > target:
        R += mp.sqrt(A) / 4
        if R > 600:
            raise TailBoundError("tail bound did not close below the target")
    return R


def _I_a(a: int, z0, w0, s, lattice: LatticeData, target, skip_minus_z0: bool):
    w1, w2 = lattice.pair_mpc()
    A = lattice.A()
    covol = mp.pi * A
    R = _radius_for(a, s, A, target, covol)
    short = min(abs(w1), abs(w2), abs(w1 + w2), abs(w1 - w2))
    mmax = int(mp.ceil((R + abs(z0)) / short * 2)) + 2
    tot = mp.mpc(0)
    R2 = R * R
    for (m, n) in _shells(mmax):
        g = m * w1 + n * w2
        zz = z0 + g
        az2 = abs(zz) ** 2
        if az2 > R2 * 4 and max(abs(m), abs(n)) * short > 2 * (R + abs(z0)):
            continue
        if skip_minus_z0 and az2 < mp.mpf(2) ** (-lattice.prec_bits // 2):
            continue
        if az2 == 0:
            continue
        term = mp.gammainc(s, az2 / A) * mp.conj(zz) ** a / az2 ** s \
            * lattice_pair_mpc(g, w0, A)
        tot += term
    return tot


def eisenstein_kronecker_lerch(a: int, z0, w0, s, lattice: LatticeData,
                               target_error=1e-20,
                               z0_in_lattice: Optional[bool] = None,
                               w0_in_lattice: Optional[bool] = None) -> BigComplex:
    """K*_a(z0, w0, s) for integer a >= 0 and complex s, within target_error.

    z0, w0 are complex values (anything mpmath accepts); exact-engine callers
    should pass the torsion flags rather than rely on the numeric membership
    classification.
    """
    if a < 0:
        raise ValueError("a must be a nonnegative integer")
    prec = _work_prec(lattice, target_error)
    with mp.workprec(prec):
        z0 = mp.mpc(z0)
        w0 = mp.mpc(w0)
        s = mp.mpc(s)
        dz = is_lattice_point(z0, lattice, prec) if z0_in_lattice is None else z0_in_lattice
        dw = is_lattice_point(w0, lattice, prec) if w0_in_lattice is None else w0_in_lattice
        if a == 0 and dz and abs(s) < mp.mpf(2) ** (-prec // 4):
            raise PoleError("K*_0 has a pole at s = 0 when z0 is a lattice point")
        if a == 0 and dw and abs(s - 1) < mp.mpf(2) ** (-prec // 4):
            raise PoleError("K*_0 has a pole at s = 1 when w0 is a lattice point")
        A = lattice.A()
        sub_target = mp.mpf(target_error) / (4 * (1 + A ** (a + 1)))
        I1 = _I_a(a, z0, w0, s, lattice, sub_target, skip_minus_z0=dz)
        I2 = _I_a(a, w0, z0, a + 1 - s, lattice, sub_target, skip_minus_z0=dw)
        val = (I1 + A ** (a + 1 - 2 * s) * I2 * lattice_pair_mpc(w0, z0, A)) / mp.gamma(s)
        return BigComplex(val.real, val.imag, prec)


def ek_number(a: int, b: int, z0, w0, lattice: LatticeData,
              target_error=1e-20, **flags) -> BigComplex:
    """e*_{a,b}(z0, w0) = K*_{a+b}(z0, w0, b)."""
    if a < 0 or b <= 0:
        raise ValueError("need a >= 0 and b > 0")
    return eisenstein_kronecker_lerch(a + b, z0, w0, b, lattice, target_error, **flags)


def check_functional_equation(a: int, z0, w0, s, lattice: LatticeData,
                              target_error=1e-20) -> mp.mpf:
    """|Gamma(s) K*_a(z0,w0,s) - A^(a+1-2s) Gamma(a+1-s) K*_a(w0,z0,a+1-s) <w0,z0>|.

    Both completed sides are assembled from the incomplete-gamma lattice sums
    directly, so values where Gamma(a+1-s) has a pole (compensated by a zero
    of K*) stay finite.
    """
    prec = _work_prec(lattice, target_error)
    with mp.workprec(prec):
        s = mp.mpc(s)
        z0 = mp.mpc(z0)
        w0 = mp.mpc(w0)
        A = lattice.A()
        dz = is_lattice_point(z0, lattice, prec)
        dw = is_lattice_point(w0, lattice, prec)
        sub = mp.mpf(target_error) / (4 * (1 + A ** (a + 1)))
        lhs = _I_a(a, z0, w0, s, lattice, sub, skip_minus_z0=dz) \
            + A ** (a + 1 - 2 * s) * _I_a(a, w0, z0, a + 1 - s, lattice, sub,
                                          skip_minus_z0=dw) \
            * lattice_pair_mpc(w0, z0, A)
        rhs = A ** (a + 1 - 2 * s) * (
            _I_a(a, w0, z0, a + 1 - s, lattice, sub, skip_minus_z0=dw)
            + A ** (2 * s - a - 1)
            * _I_a(a, z0, w0, s, lattice, sub, skip_minus_z0=dz)
            * lattice_pair_mpc(z0, w0, A)
        ) * lattice_pair_mpc(w0, z0, A)
        return abs(lhs - rhs)


def e2star_numeric(lattice: LatticeData, target_error=1e-20) -> BigComplex:
    """e2* = e*_{0,2}(Gamma) = K*_2(0, 0, 2)."""
    return eisenstein_kronecker_lerch(2, 0, 0, 2, lattice, target_error,
                                      z0_in_lattice=True, w0_in_lattice=True)


def rational_reconstruct(x, max_den: int = 10 ** 6, tol=None) -> Optional[Fraction]:
    """Continued-fraction rational reconstruction of a real value; None when
    no denominator <= max_den reproduces x within tol."""
    x = mp.mpf(x)
    tol = mp.mpf(tol) if tol is not None else mp.mpf(2) ** (-mp.mp.prec // 2)
    p0, q0, p1, q1 = 0, 1, 1, 0
    y = x
    for _ in range(64):
        a = int(mp.floor(y))
        p0, p1 = p1, a * p1 + p0
        q0, q1 = q1, a * q1 + q0
        if q1 > max_den:
            return None
        if abs(x - Fraction(p1, q1)) < tol:
            return Fraction(p1, q1)
        frac = y - a
        if frac == 0:
            return None
        y = 1 / frac
    return None


# ---------------------------------------------------------------------------
# Hecke L partial sums (class number 1)
# ---------------------------------------------------------------------------

_CLASS_NUMBER_ONE = {1, 2, 3, 7, 11, 19, 43, 67, 163}


def _ring_basis_omega(d: int) -> ExactScalar:
    """Second basis element of O_K over Z: sqrt(-d), or (1+sqrt(-d))/2."""
    if d % 4 == 3:
        return ExactScalar(Fraction(1, 2), Fraction(1, 2), d)
    return ExactScalar(0, 1, d)


def _in_ring(x: ExactScalar, d: int) -> bool:
    if d % 4 == 3:
        return (2 * x.a).denominator == 1 and (2 * x.b).denominator == 1 \
            and (2 * x.a - 2 * x.b).numerator % 2 == 0
    return x.a.denominator == 1 and x.b.denominator == 1


def _units(d: int):
    one = ExactScalar(1)
    if d == 1:
        i = ExactScalar(0, 1, 1)
        return [one, i, -one, -i]
    if d == 3:
        w = ExactScalar(Fraction(1, 2), Fraction(1, 2), 3)  # primitive 6th root
        us = [one]
        for _ in range(5):
            us.append(us[-1] * w)
        return us
    return [one, -one]


@dataclass
class HeckeCharacter:
    """Finite part of an algebraic Hecke character on a class-number-1 field.

    table maps canonical residue representatives mod the conductor (as
    ExactScalar ring elements) to exact root-of-unity values; infinity_type
    (m, n) gives phi((alpha)) = eps(alpha) alpha^m conj(alpha)^n.
    """

    d: int
    conductor: ExactScalar
    infinity_type: Tuple[int, int]
    table: Dict[ExactScalar, ExactScalar]

    def __post_init__(self):
        if self.d not in _CLASS_NUMBER_ONE:
            raise ValueError(f"class number of Q(sqrt(-{self.d})) is not 1")
        self._check_table()
        # w_f sanity for type (1,0)-style characters
        m, n = self.infinity_type
        if (m, n) == (1, 0) and self.count_units_cong_one() != 1:
            raise ValueError(
                "type (1,0) requires w_f = 1 (no nontrivial unit = 1 mod f)")

    # -- residue bookkeeping -------------------------------------------------
    def reduce(self, x: ExactScalar) -> ExactScalar:
        for r in self.table:
            q = (x - r) / self.conductor
            if _in_ring(q, self.d):
                return r
        raise KeyError(f"{x} is not coprime to the conductor (or table incomplete)")

    def eps(self, x: ExactScalar) -> ExactScalar:
        return self.table[self.reduce(x)]

    def value_on_generator(self, alpha: ExactScalar) -> ExactScalar:
        m, n = self.infinity_type
        return self.eps(alpha) * alpha ** m * alpha.conjugate() ** n

    def is_coprime(self, x: ExactScalar) -> bool:
        try:
            self.reduce(x)
            return True
        except KeyError:
            return False

    def count_units_cong_one(self) -> int:
        count = 0
        for u in _units(self.d):
            if _in_ring((u - 1) / self.conductor, self.d):
                count += 1
        return count

    def _check_table(self):
        reps = list(self.table)
        for r1 in reps:
            for r2 in reps:
                want = self.table[self.reduce(r1 * r2)]
                got = self.table[r1] * self.table[r2]
                if want != got:
                    raise ValueError(f"character table not multiplicative at "
                                     f"({r1}) * ({r2})")

    def well_defined_on_ideals(self) -> bool:
        """phi((alpha)) independent of the generator: phi(u alpha) = phi(alpha)."""
        m, n = self.infinity_type
        for u in _units(self.d):
            if not self.is_coprime(u):
                return False
            if self.eps(u) * u ** m * u.conjugate() ** n != ExactScalar(1):
                return False
        return True


def canonical_quadrant_generators(d: int, norm_bound: int):
    """One generator per nonzero ideal of O_K with norm <= norm_bound.

    For Z[i], the representative with re > 0, im >= 0; for unit group {+-1},
    the representative with im > 0 or (im = 0, re > 0); for Z[zeta_6] the
    sector 0 <= arg < pi/3 picked exactly via coordinates.
    """
    out = []
    w = _ring_basis_omega(d)
    bmax = int(math.isqrt(norm_bound)) + 2
    amax = int(math.isqrt(norm_bound)) + 2
    seen = set()
    for aa in range(-amax - bmax, amax + bmax + 1):
        for bb in range(-bmax, bmax + 1):
            x = ExactScalar(aa) + ExactScalar(bb) * w
            nx = x.norm()
            if nx == 0 or nx > norm_bound:
                continue
            # canonical associate: lexicographically largest (re, im)-key among
            # unit multiples, a deterministic fundamental-sector choice
            assoc = [x * u for u in _units(d)]
            key = max((ux.a, ux.b) for ux in assoc)
            if key in seen:
                continue
            seen.add(key)
            pick = next(ux for ux in assoc if (ux.a, ux.b) == key)
            out.append(pick)
    out.sort(key=lambda x: (x.norm(), x.a, x.b))
    return out


def direct_hecke_sum(char: HeckeCharacter, s, norm_bound: int,
                     prec_bits: int = 256) -> BigComplex:
    """Truncated L_f(phi, s) = sum_{(a,f)=1, Na <= bound} phi(a) Na^-s.

    Absolutely convergent for Re s > (m+n)/2 + 1; the caller picks s well
    inside the range so the tail is below the comparison tolerance.
    """
    with mp.workprec(prec_bits):
        tot = mp.mpc(0)
        for g in canonical_quadrant_generators(char.d, norm_bound):
            if not char.is_coprime(g):
                continue
            val = char.value_on_generator(g)
            tot += val.to_mpc(prec_bits) / mp.mpf(int(g.norm())) ** mp.mpc(s)
        return BigComplex(tot.real, tot.imag, prec_bits)


def hecke_L_partial(char: HeckeCharacter, s, target_error=1e-14,
                    prec_bits: int = 256, omega=1) -> BigComplex:
    """L_f(phi, s) assembled from Eisenstein-Kronecker-Lerch values.

    Class number 1 with trivial ray class group I(f)/P(f) (checked): the sum
    collapses to a single K* evaluation on the conductor lattice,

        L_f(phi, s) = (1/w_f) K*_{|m-n|}(alpha0^delta, 0, s - min(m,n);
                                          (f)^delta),

    alpha0 = 1, delta = conjugation when m > n.  omega optionally rescales
    the lattice (f * omega) for period-normalized values.
    """
    m, n = char.infinity_type
    if m == n:
        raise ValueError("infinity type must have m != n")
    if not char.well_defined_on_ideals():
        raise ValueError("character not trivial on units: not an ideal character")
    # trivial ray class group <=> #(O/f)^x == #units-image
    wf = char.count_units_cong_one()
    nclasses = len(char.table) * wf // len(_units(char.d))
    if nclasses != 1:
        raise NotImplementedError(
            "only conductors with trivial ray class group are assembled here")
    with mp.workprec(prec_bits + 32):
        w = _ring_basis_omega(char.d)
        f = char.conductor
        om = mp.mpc(omega)
        w1 = f.to_mpc(prec_bits + 32) * om
        w2 = (f * w).to_mpc(prec_bits + 32) * om
        if mp.im(w2 / w1) < 0:
            w2 = -w2
        delta_conj = m > n
        if delta_conj:
            w1, w2 = mp.conj(w1), mp.conj(w2)
            if mp.im(w2 / w1) < 0:
                w2 = -w2
        lat = LatticeData(
            BigComplex(w1.real, w1.imag, prec_bits + 32),
            BigComplex(w2.real, w2.imag, prec_bits + 32),
            BigComplex(mp.im(w2 * mp.conj(w1)) / mp.pi, mp.mpf(0), prec_bits + 32),
        )
        alpha0 = mp.conj(om) if delta_conj else om  # image of alpha0 = 1 scaled
        val = eisenstein_kronecker_lerch(
            abs(m - n), alpha0, 0, mp.mpc(s) - min(m, n), lat, target_error,
            w0_in_lattice=True)
        out = val.to_mpc() / wf
        return BigComplex(out.real, out.imag, prec_bits)


def e2star_estimate(lattice: LatticeData, target_error=1e-20,
                    max_den: int = 10 ** 4):
    """Numeric e2* with attempted continued-fraction rational reconstruction.

    Returns (value, reconstructed, verified): `reconstructed` is a Fraction
    or None; `verified` is True only when the reconstruction matches a
    catalog row's e2* for the lattice's curve, else the value is reported as
    unverified heuristics.
    """
    from .curves import catalog
    val = e2star_numeric(lattice, target_error)
    with mp.workprec(val.prec_bits):
        if abs(val.im) > mp.mpf(target_error) * 100:
            return val, None, False
        rec = rational_reconstruct(val.re, max_den, tol=mp.mpf(target_error) * 100)
    verified = False
    curve = lattice.curve
    if rec is not None and curve is not None:
        for row in catalog():
            try:
                cand = row.curve(curve.u if curve.u else 1)
            except ValueError:
                continue
            if cand.g2 == curve.g2 and cand.g3 == curve.g3 and \
                    cand.e2_star == ExactScalar(rec):
                verified = True
                break
    return val, rec, verified
