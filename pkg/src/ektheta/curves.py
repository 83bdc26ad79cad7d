"""CM curve catalog, exact Weierstrass expansions, periods and the pairing.

Conventions
-----------
Curves are given in the form y^2 = 4x^3 - g2 x - g3 with the invariant
differential dx/y; the local parameter at the origin is t = -2x/y, and the
formal logarithm lambda(t) is normalized by lambda'(0) = 1.  Lattices are
Gamma = Z w1 + Z w2 with Im(w2/w1) > 0, A = Im(w2 conj(w1))/pi, and the
pairing is <z, w> = exp[(z conj(w) - w conj(z))/A].

The catalog lists the thirteen CM curves over Q, one per imaginary quadratic
order, with a free scaling parameter u: replacing u multiplies (g2, g3, e2*)
by (u^2, u^3, u)-weighted powers, i.e. scales the lattice by u^(-1/2)-type
homogeneity.  Row data: (order label, field tag d, g2/u^2, g3/u^3, e2*/u)
with the weight conventions of the table itself (g2 ~ u^k as listed).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import List, Optional, Tuple

import mpmath as mp

from .scalars import BigComplex, ExactScalar
from .series import ExactRing, SeriesError, UniSeries

__all__ = [
    "CurveData",
    "CatalogRow",
    "LatticeData",
    "FormalLog",
    "catalog",
    "catalog_row",
    "wp_series",
    "sigma_series",
    "theta_series",
    "formal_log",
    "compute_periods",
    "pairing",
    "lattice_pair_mpc",
    "eisenstein_backcheck",
    "PeriodPrecisionError",
]


class PeriodPrecisionError(ArithmeticError):
    """Back-check residual of a computed period lattice exceeded tolerance."""


@dataclass(frozen=True)
class CurveData:
    """Weierstrass data y^2 = 4x^3 - g2 x - g3 with CM bookkeeping."""

    g2: ExactScalar
    g3: ExactScalar
    cm_order_label: str = ""
    d: int = 0
    e2_star: Optional[ExactScalar] = None
    u: ExactScalar = field(default_factory=lambda: ExactScalar(1))

    def __post_init__(self):
        if not self.discriminant():
            raise ValueError("degenerate curve: g2^3 - 27 g3^2 = 0")

    def discriminant(self) -> ExactScalar:
        return self.g2 ** 3 - ExactScalar(27) * self.g3 ** 2

    def ring(self) -> ExactRing:
        d = self.d
        if self.g2.is_rational() and self.g3.is_rational() and (
                self.e2_star is None or self.e2_star.is_rational()):
            d = 0
        return ExactRing(d)

    def scaled(self, c: ExactScalar) -> "CurveData":
        """Curve of the lattice c * Gamma: (g2, g3, e2*) / (c^4, c^6, c^2)."""
        return CurveData(
            g2=self.g2 / c ** 4,
            g3=self.g3 / c ** 6,
            cm_order_label=self.cm_order_label,
            d=self.d if self.d else c.d,
            e2_star=None if self.e2_star is None else self.e2_star / c ** 2,
            u=self.u,
        )

    def to_json(self):
        return {
            "g2": self.g2.to_json(),
            "g3": self.g3.to_json(),
            "cm_order": self.cm_order_label,
            "d": self.d,
            "e2_star": None if self.e2_star is None else self.e2_star.to_json(),
            "u": self.u.to_json(),
        }


@dataclass(frozen=True)
class CatalogRow:
    """One row of the CM-over-Q table, symbolic in the scaling u."""

    label: str
    d: int
    g2_coeff: int      # g2 = g2_coeff * u^2   (u^1 for the square lattice row)
    g2_upow: int
    g3_coeff: int      # g3 = g3_coeff * u^3
    g3_upow: int
    e2_coeff: Fraction  # e2* = e2_coeff * u

    def curve(self, u=1) -> CurveData:
        uu = u if isinstance(u, ExactScalar) else ExactScalar(Fraction(u))
        if not uu:
            raise ValueError("u must be nonzero")
        return CurveData(
            g2=ExactScalar(self.g2_coeff) * uu ** self.g2_upow,
            g3=ExactScalar(self.g3_coeff) * uu ** self.g3_upow,
            cm_order_label=self.label,
            d=self.d,
            e2_star=ExactScalar(self.e2_coeff) * uu,
        )

    def to_json(self):
        return {
            "cm_order": self.label,
            "d": self.d,
            "g2": {"coeff": str(self.g2_coeff), "u_pow": self.g2_upow},
            "g3": {"coeff": str(self.g3_coeff), "u_pow": self.g3_upow},
            "e2_star": {"coeff": f"{self.e2_coeff.numerator}/{self.e2_coeff.denominator}",
                        "u_pow": 1},
        }


_CATALOG: List[CatalogRow] = [
    CatalogRow("Z[(1+sqrt(-3))/2]", 3, 0, 2, 1, 3, Fraction(0)),
    CatalogRow("Z[sqrt(-3)]", 3, 15, 2, 11, 3, Fraction(1, 2)),
    CatalogRow("Z[(1+3*sqrt(-3))/2]", 3, 120, 2, 253, 3, Fraction(2)),
    CatalogRow("Z[sqrt(-1)]", 1, 1, 1, 0, 3, Fraction(0)),
    CatalogRow("Z[2*sqrt(-1)]", 1, 44, 2, 56, 3, Fraction(1)),
    CatalogRow("Z[(1+sqrt(-7))/2]", 7, 35, 2, 49, 3, Fraction(1, 2)),
    CatalogRow("Z[sqrt(-7)]", 7, 5 * 7 * 17, 2, 3 * 7**2 * 19, 3, Fraction(9, 2)),
    CatalogRow("Z[sqrt(-2)]", 2, 30, 2, 28, 3, Fraction(1, 2)),
    CatalogRow("Z[(1+sqrt(-11))/2]", 11, 8 * 3 * 11, 2, 7 * 11**2, 3, Fraction(2)),
    CatalogRow("Z[(1+sqrt(-19))/2]", 19, 8 * 19, 2, 19**2, 3, Fraction(2)),
    CatalogRow("Z[(1+sqrt(-43))/2]", 43, 16 * 5 * 43, 2, 3 * 7 * 43**2, 3, Fraction(12)),
    CatalogRow("Z[(1+sqrt(-67))/2]", 67, 8 * 5 * 11 * 67, 2, 7 * 31 * 67**2, 3,
               Fraction(38)),
    CatalogRow("Z[(1+sqrt(-163))/2]", 163, 16 * 5 * 23 * 29 * 163, 2,
               7 * 11 * 19 * 127 * 163**2, 3, Fraction(724)),
]

_ALIASES = {
    "Z[i]": "Z[sqrt(-1)]",
    "Z[2i]": "Z[2*sqrt(-1)]",
    "Z[sqrt-1]": "Z[sqrt(-1)]",
}


def catalog() -> List[CatalogRow]:
    """The thirteen CM curves over Q, symbolic in u."""
    return list(_CATALOG)


def catalog_row(label: str) -> CatalogRow:
    want = _ALIASES.get(label, label).replace(" ", "")
    for row in _CATALOG:
        if row.label.replace(" ", "") == want:
            return row
    raise KeyError(f"no catalog row labelled {label!r}")


# ---------------------------------------------------------------------------
# exact expansions
# ---------------------------------------------------------------------------

def wp_series(curve: CurveData, order: int, ring: Optional[ExactRing] = None) -> UniSeries:
    """Weierstrass wp as a Laurent series: z^-2 + sum_{k>=2} c_k z^(2k-2).

    c_2 = g2/20, c_3 = g3/28 and for k >= 4 the quadratic recursion
    c_k = 3/((2k+1)(k-3)) * sum_{i=2}^{k-2} c_i c_{k-i}.
    """
    if order < 4:
        raise SeriesError("wp needs order >= 4")
    ring = ring or curve.ring()
    g2, g3 = ring.coerce(curve.g2), ring.coerce(curve.g3)
    kmax = order // 2 + 1
    c = {2: g2 * Fraction(1, 20), 3: g3 * Fraction(1, 28)}
    for k in range(4, kmax + 1):
        s = None
        for i in range(2, k - 1):
            t = c[i] * c[k - i]
            s = t if s is None else s + t
        c[k] = s * ring.from_fraction(Fraction(3, (2 * k + 1) * (k - 3)))
    out = {-2: ring.one}
    for k, v in c.items():
        if 2 * k - 2 <= order:
            out[2 * k - 2] = v
    return UniSeries(ring, out, order)


def sigma_series(curve: CurveData, order: int, ring: Optional[ExactRing] = None) -> UniSeries:
    """Weierstrass sigma: the odd unit-derivative solution of
    (log sigma)'' = -wp, computed by integrating the regular part of -wp
    twice and exponentiating: sigma = z * exp(-I I (wp - z^-2))."""
    ring = ring or curve.ring()
    wp = wp_series(curve, order + 2, ring)
    P = UniSeries(ring, {k: v for k, v in wp.coeffs.items() if k >= 0}, order - 1)
    L = (-P).integrate().integrate()
    return L.exp().shift(1).truncate(order)


def theta_series(curve: CurveData, order: int, ring: Optional[ExactRing] = None) -> UniSeries:
    """Reduced theta series exp(-(e2*/2) z^2) sigma(z), theta'(0) = 1."""
    if curve.e2_star is None:
        raise ValueError("curve has no e2* (supply one or use a catalog row)")
    ring = ring or curve.ring()
    sig = sigma_series(curve, order, ring)
    e2 = ring.coerce(curve.e2_star)
    quad = UniSeries(ring, {2: -(e2 * Fraction(1, 2))}, order)
    return (quad.exp() * sig).truncate(order)


@dataclass(frozen=True)
class FormalLog:
    """lambda(t): odd series with lambda'(0) = 1, exponents in 4m + 6n + 1."""

    series: UniSeries
    curve: CurveData


def formal_log(curve: CurveData, order: int, ring: Optional[ExactRing] = None) -> FormalLog:
    """Formal logarithm for the parameter t = -2x/y:

        lambda(t) = sum_{m,n >= 0} (2m+3n)!/((m+2n)! m! n!)
                    (-g2/4)^m (-g3/4)^n t^(4m+6n+1)/(4m+6n+1).
    """
    ring = ring or curve.ring()
    qg2 = ring.coerce(curve.g2) * Fraction(-1, 4)
    qg3 = ring.coerce(curve.g3) * Fraction(-1, 4)
    out = {}
    g2pow = [ring.one]
    g3pow = [ring.one]
    m = 0
    while 4 * m + 1 <= order:
        if m >= len(g2pow):
            g2pow.append(g2pow[-1] * qg2)
        n = 0
        while (k := 4 * m + 6 * n + 1) <= order:
            if n >= len(g3pow):
                g3pow.append(g3pow[-1] * qg3)
            num = factorial(2 * m + 3 * n)
            den = factorial(m + 2 * n) * factorial(m) * factorial(n)
            c = g2pow[m] * g3pow[n] * Fraction(num, den * k)
            if not ring.is_zero(c):
                out[k] = out[k] + c if k in out else c
            n += 1
        m += 1
    return FormalLog(UniSeries(ring, out, order), curve)


# ---------------------------------------------------------------------------
# numeric lattice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeData:
    """Numeric period lattice with derived constants."""

    omega1: BigComplex
    omega2: BigComplex
    area: BigComplex             # A = Im(w2 conj(w1))/pi, real positive
    curve: Optional[CurveData] = None

    @property
    def prec_bits(self) -> int:
        return self.omega1.prec_bits

    def pair_mpc(self) -> Tuple[mp.mpc, mp.mpc]:
        return self.omega1.to_mpc(), self.omega2.to_mpc()

    def A(self) -> mp.mpf:
        return self.area.re

    def to_json(self):
        return {"omega1": self.omega1.to_json(), "omega2": self.omega2.to_json(),
                "A": self.area.to_json()}


def _agm(a, b, prec):
    """Optimal complex AGM: sqrt branch chosen by |a-b| <= |a+b|."""
    eps = mp.mpf(2) ** (-prec + 8)
    for _ in range(prec):
        if abs(a - b) <= eps * abs(a):
            break
        a, b = (a + b) / 2, mp.sqrt(a * b)
        if abs(a - b) > abs(a + b):
            b = -b
    return (a + b) / 2


def eisenstein_backcheck(w1, w2, prec_bits: int):
    """(g2, g3) of Z w1 + Z w2 via exponentially convergent q-expansions:
    g2 = (2 pi / w1)^4 E4/12, g3 = (2 pi / w1)^6 E6/216."""
    with mp.workprec(prec_bits):
        tau = w2 / w1
        q = mp.exp(2j * mp.pi * tau)
        nmax = max(8, int(prec_bits / max(1e-9, -mp.log(abs(q), 2))) + 4)
        E4 = 1 + 240 * mp.fsum(n ** 3 * q ** n / (1 - q ** n) for n in range(1, nmax))
        E6 = 1 - 504 * mp.fsum(n ** 5 * q ** n / (1 - q ** n) for n in range(1, nmax))
        g2 = (2 * mp.pi / w1) ** 4 * E4 / 12
        g3 = (2 * mp.pi / w1) ** 6 * E6 / 216
    return g2, g3


def eta1_quasi_period(w1, w2, prec_bits: int):
    """Quasi-period eta1 (sigma(z + w1) factor) = (pi^2/(3 w1)) E2(tau)."""
    with mp.workprec(prec_bits):
        tau = w2 / w1
        q = mp.exp(2j * mp.pi * tau)
        nmax = max(8, int(prec_bits / max(1e-9, -mp.log(abs(q), 2))) + 4)
        E2 = 1 - 24 * mp.fsum(n * q ** n / (1 - q ** n) for n in range(1, nmax))
        return mp.pi ** 2 / (3 * w1) * E2


def compute_periods(curve: CurveData, prec_bits: int = 256) -> LatticeData:
    """Period lattice of the curve with Im(w2/w1) > 0, validated by the
    Eisenstein back-check to 2^(-prec_bits/2).

    Roots of 4x^3 - g2 x - g3 are combined through the optimal AGM; the basis
    is then normalized (swap / negate / shear) to the tau fundamental domain
    and checked against the curve invariants.
    """
    work = prec_bits + 48
    with mp.workprec(work):
        g2 = curve.g2.to_mpc(work)
        g3 = curve.g3.to_mpc(work)
        roots = mp.polyroots([4, 0, -g2, -g3], maxsteps=200, extraprec=60)
        best = None
        # try all orderings; keep the basis whose back-check residual is least
        import itertools
        for e1, e2, e3 in itertools.permutations(roots):
            try:
                a = mp.sqrt(e1 - e3)
                b = mp.sqrt(e1 - e2)
                w1 = mp.pi / _agm(a, b, work)
                w2 = mp.pi * 1j / _agm(a, mp.sqrt(e2 - e3), work)
            except (mp.libmp.libhyper.NoConvergence, ZeroDivisionError):
                continue
            for cand2 in (w2, -w2, w2 + w1, w2 - w1):
                tau = cand2 / w1
                if mp.im(tau) <= 0:
                    continue
                bg2, bg3 = eisenstein_backcheck(w1, cand2, work)
                res = abs(bg2 - g2) + abs(bg3 - g3)
                if best is None or res < best[0]:
                    best = (res, w1, cand2)
        if best is None:
            raise PeriodPrecisionError("no admissible period basis found")
        res, w1, w2 = best
        tol = mp.mpf(2) ** (-(prec_bits // 2))
        scale = 1 + abs(g2) + abs(g3)
        if res > tol * scale:
            raise PeriodPrecisionError(
                f"back-check residual {mp.nstr(res, 5)} exceeds tolerance")
        area = mp.im(w2 * mp.conj(w1)) / mp.pi
        return LatticeData(
            omega1=BigComplex(w1.real, w1.imag, prec_bits),
            omega2=BigComplex(w2.real, w2.imag, prec_bits),
            area=BigComplex(area, mp.mpf(0), prec_bits),
            curve=curve,
        )


def lattice_pair_mpc(z, w, A) -> mp.mpc:
    """<z, w> = exp[(z conj(w) - w conj(z))/A] on raw mpmath values."""
    return mp.exp((z * mp.conj(w) - w * mp.conj(z)) / A)


def pairing(z: BigComplex, w: BigComplex, lattice: LatticeData) -> BigComplex:
    prec = max(z.prec_bits, w.prec_bits, lattice.prec_bits)
    with mp.workprec(prec):
        out = lattice_pair_mpc(z.to_mpc(), w.to_mpc(), lattice.A())
        return BigComplex(out.real, out.imag, prec)
