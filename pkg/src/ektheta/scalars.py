"""Coefficient scalars for the three arithmetic engines.

Three scalar kinds live here:

* :class:`ExactScalar` -- elements a + b*sqrt(-d) of an imaginary quadratic
  field Q(sqrt(-d)) with rational a, b.  The tag d = 0 encodes a plain
  rational (b is then zero).  Values are immutable and canonical: Fractions
  are kept reduced and a vanishing b collapses the tag to d = 0, so equality
  and hashing are structural.

* :class:`BigComplex` -- an arbitrary-precision complex number carrying its
  working mantissa precision in bits.  Arithmetic is performed at the larger
  of the two operand precisions and never silently narrows.

* :class:`PadicScalar` -- an element of the unramified extension W_f of Z_p
  of residue degree f, stored as p^val * unit with the unit known modulo
  p^(abs_prec - val).  Arithmetic tracks absolute precision: sums keep the
  minimum absolute precision, products the minimum relative precision, and
  division shifts valuations.

The p-adic embedding of exact scalars (``embed_padic``) fixes the split-prime
square root of -d deterministically: the root r of x^2 + d = 0 (mod p) with
the smallest nonnegative representative, Hensel-lifted, recorded on the
context so runs are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence, Union

import mpmath as mp

__all__ = [
    "ExactScalar",
    "BigComplex",
    "PadicContext",
    "PadicScalar",
    "ValuationAtLeast",
    "embed_padic",
    "FieldMismatchError",
    "RamifiedPrimeError",
]

RationalLike = Union[int, Fraction, "ExactScalar"]


class FieldMismatchError(ValueError):
    """Arithmetic attempted between distinct quadratic fields."""


class RamifiedPrimeError(ValueError):
    """p-adic embedding requested at a ramified or unusable prime."""


def _is_squarefree(d: int) -> bool:
    if d < 0:
        return False
    k = 2
    while k * k <= d:
        if d % (k * k) == 0:
            return False
        k += 1
    return True


class ExactScalar:
    """a + b*sqrt(-d), a and b rational, d squarefree >= 0 (d = 0: rational)."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a: RationalLike = 0, b: RationalLike = 0, d: int = 0):
        if isinstance(a, ExactScalar):
            if b:
                raise TypeError("cannot combine an ExactScalar with extra parts")
            a, b, d = a.a, a.b, a.d
        a = Fraction(a)
        b = Fraction(b)
        if b == 0:
            d = 0
        elif d <= 0 or not _is_squarefree(d):
            raise ValueError(f"field tag must be squarefree positive, got {d}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    def __setattr__(self, *args):
        raise AttributeError("ExactScalar is immutable")

    # -- coercion -----------------------------------------------------------
    @staticmethod
    def _coerce(x) -> "ExactScalar":
        if isinstance(x, ExactScalar):
            return x
        if isinstance(x, (int, Fraction)):
            return ExactScalar(x)
        return NotImplemented  # type: ignore[return-value]

    def _join(self, other: "ExactScalar") -> int:
        if self.d == other.d:
            return self.d
        if self.d == 0:
            return other.d
        if other.d == 0:
            return self.d
        raise FieldMismatchError(f"cannot mix Q(sqrt(-{self.d})) with Q(sqrt(-{other.d}))")

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        d = self._join(o)
        return ExactScalar(self.a + o.a, self.b + o.b, d)

    __radd__ = __add__

    def __neg__(self):
        return ExactScalar(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        d = self._join(o)
        # (a1 + b1 w)(a2 + b2 w) with w^2 = -d
        return ExactScalar(
            self.a * o.a - d * self.b * o.b,
            self.a * o.b + self.b * o.a,
            d,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        d = self._join(o)
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero ExactScalar")
        # multiply by conjugate / norm
        num = self * o.conjugate()
        return ExactScalar(num.a / n, num.b / n, d)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o / self

    def __pow__(self, k: int):
        if k < 0:
            return ExactScalar(1) / self ** (-k)
        out = ExactScalar(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- structure -----------------------------------------------------------
    def conjugate(self) -> "ExactScalar":
        return ExactScalar(self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        """a^2 + d b^2, the norm to Q."""
        return self.a * self.a + self.d * self.b * self.b

    def is_rational(self) -> bool:
        return self.b == 0

    def __bool__(self):
        return bool(self.a or self.b)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if self.b == 0 and o.b == 0:
            return self.a == o.a
        return self.a == o.a and self.b == o.b and self.d == o.d

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def __repr__(self):
        if self.b == 0:
            return f"ExactScalar({self.a})"
        return f"ExactScalar({self.a}, {self.b}, d={self.d})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a} + {self.b}*sqrt(-{self.d})"

    # -- numeric image under the fixed complex embedding sqrt(-d) -> i sqrt(d)
    def to_mpc(self, prec_bits: int = 113) -> mp.mpc:
        with mp.workprec(prec_bits):
            re = mp.mpf(self.a.numerator) / self.a.denominator
            im = (mp.mpf(self.b.numerator) / self.b.denominator) * mp.sqrt(self.d)
            return mp.mpc(re, im)

    # -- JSON ------------------------------------------------------------
    def to_json(self):
        if self.b == 0:
            return f"{self.a.numerator}/{self.a.denominator}"
        return {
            "a": f"{self.a.numerator}/{self.a.denominator}",
            "b": f"{self.b.numerator}/{self.b.denominator}",
            "d": self.d,
        }

    @staticmethod
    def from_json(obj) -> "ExactScalar":
        if isinstance(obj, str):
            return ExactScalar(Fraction(obj))
        return ExactScalar(Fraction(obj["a"]), Fraction(obj["b"]), obj["d"])


def _dps_for(prec_bits: int) -> int:
    return int(prec_bits * 0.30103) + 4


@dataclass(frozen=True)
class BigComplex:
    """Arbitrary-precision complex value with explicit mantissa precision."""

    re: mp.mpf
    im: mp.mpf
    prec_bits: int

    @staticmethod
    def make(value, prec_bits: int) -> "BigComplex":
        with mp.workprec(prec_bits):
            z = mp.mpc(value)
            return BigComplex(z.real, z.imag, prec_bits)

    def to_mpc(self) -> mp.mpc:
        with mp.workprec(max(self.prec_bits, mp.mp.prec)):
            return mp.mpc(self.re, self.im)

    def _binary(self, other, op):
        if isinstance(other, BigComplex):
            prec = max(self.prec_bits, other.prec_bits)
            ov = other.to_mpc()
        else:
            prec = self.prec_bits
            ov = other
        with mp.workprec(prec):
            out = op(self.to_mpc(), mp.mpc(ov))
            return BigComplex(out.real, out.imag, prec)

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return self._binary(other, lambda x, y: y - x)

    def __mul__(self, other):
        return self._binary(other, lambda x, y: x * y)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, lambda x, y: x / y)

    def __rtruediv__(self, other):
        return self._binary(other, lambda x, y: y / x)

    def __neg__(self):
        return BigComplex(-self.re, -self.im, self.prec_bits)

    def conjugate(self) -> "BigComplex":
        return BigComplex(self.re, -self.im, self.prec_bits)

    def abs(self) -> mp.mpf:
        with mp.workprec(self.prec_bits):
            return abs(self.to_mpc())

    def to_json(self):
        dps = _dps_for(self.prec_bits)
        return {
            "re": mp.nstr(self.re, dps),
            "im": mp.nstr(self.im, dps),
            "prec_bits": self.prec_bits,
        }

    @staticmethod
    def from_json(obj) -> "BigComplex":
        prec = obj["prec_bits"]
        with mp.workprec(prec):
            return BigComplex(mp.mpf(obj["re"]), mp.mpf(obj["im"]), prec)


# ---------------------------------------------------------------------------
# p-adic scalars
# ---------------------------------------------------------------------------

class ValuationAtLeast:
    """Marker for 'valuation >= bound' (value indistinguishable from zero)."""

    __slots__ = ("bound",)

    def __init__(self, bound: int):
        self.bound = bound

    def __eq__(self, other):
        return isinstance(other, ValuationAtLeast) and other.bound == self.bound

    def __repr__(self):
        return f"ValuationAtLeast({self.bound})"

    def __str__(self):
        return f">= {self.bound}"


def _poly_mulmod(u, v, modulus, pk):
    """Multiply coefficient tuples mod (modulus(x), p^k); modulus monic."""
    f = len(modulus) - 1
    out = [0] * (2 * f - 1)
    for i, ui in enumerate(u):
        if ui:
            for j, vj in enumerate(v):
                if vj:
                    out[i + j] = (out[i + j] + ui * vj) % pk
    for i in range(2 * f - 2, f - 1, -1):
        c = out[i]
        if c:
            for j in range(f + 1):
                out[i - f + j] = (out[i - f + j] - c * modulus[j]) % pk
        out[i] = 0
    return tuple(x % pk for x in out[:f])


@lru_cache(maxsize=None)
def _lex_min_irreducible(p: int, f: int) -> tuple:
    """Smallest monic irreducible of degree f over F_p, lex order on
    (c_0, ..., c_{f-1}); coefficients lifted to {0..p-1}."""
    if f == 1:
        return (0, 1)  # x itself; W_1 = Z_p needs no modulus but keep shape

    def polmod_pow(base, e, modulus):
        # base, result as tuples of length f over F_p
        result = tuple([1] + [0] * (f - 1))
        while e:
            if e & 1:
                result = _poly_mulmod(result, base, modulus, p)
            base = _poly_mulmod(base, base, modulus, p)
            e >>= 1
        return result

    def gcd_deg_positive(a_pol, modulus):
        # gcd(a(x), modulus(x)) over F_p nontrivial?
        a_list = [c % p for c in a_pol]
        b_list = [c % p for c in modulus]
        while any(a_list):
            while a_list and a_list[-1] == 0:
                a_list.pop()
            if not a_list:
                break
            while b_list and b_list[-1] == 0:
                b_list.pop()
            if len(b_list) < len(a_list):
                a_list, b_list = b_list, a_list
                continue
            # b -= lc(b)/lc(a) x^(db-da) a
            shift = len(b_list) - len(a_list)
            c = b_list[-1] * pow(a_list[-1], -1, p) % p
            for i, ai in enumerate(a_list):
                b_list[i + shift] = (b_list[i + shift] - c * ai) % p
            a_list, b_list = b_list, a_list
        while b_list and b_list[-1] == 0:
            b_list.pop()
        return len(b_list) > 1

    xpoly = tuple([0, 1] + [0] * (f - 2))
    primes = {q for q in range(2, f + 1) if f % q == 0 and all(q % r for r in range(2, q))}
    for n in range(p ** f):
        coeffs = []
        m = n
        for _ in range(f):
            coeffs.append(m % p)
            m //= p
        modulus = tuple(coeffs + [1])
        # irreducible iff x^(p^f) = x mod modulus and gcd(x^(p^(f/q)) - x, modulus) = 1
        if polmod_pow(xpoly, p ** f, modulus) != xpoly:
            continue
        ok = True
        for q in primes:
            xp = polmod_pow(xpoly, p ** (f // q), modulus)
            diff = tuple((xp[i] - xpoly[i]) % p for i in range(f))
            if any(diff) and gcd_deg_positive(diff, modulus):
                ok = False
                break
            if not any(diff):
                ok = False
                break
        if ok:
            return modulus
    raise RuntimeError("no irreducible found")  # pragma: no cover


@dataclass(frozen=True)
class PadicContext:
    """Unramified extension W_f of Z_p with a fixed lifted modulus."""

    p: int
    f: int = 1

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be prime")
        object.__setattr__(self, "_modulus", _lex_min_irreducible(self.p, self.f))

    @property
    def modulus(self) -> tuple:
        return self._modulus  # type: ignore[attr-defined]

    # -- element constructors -------------------------------------------------
    def zero(self, abs_prec: int) -> "PadicScalar":
        return PadicScalar(self, None, (), abs_prec)

    def from_int(self, n: int, abs_prec: int) -> "PadicScalar":
        return self.from_vector((n,) + (0,) * (self.f - 1), abs_prec)

    def from_vector(self, vec: Sequence[int], abs_prec: int) -> "PadicScalar":
        """Element sum vec[i] x^i known mod p^abs_prec."""
        vec = list(vec) + [0] * (self.f - len(vec))
        pk = self.p ** abs_prec
        vec = [v % pk for v in vec]
        val = 0
        while val < abs_prec and all(v % self.p ** (val + 1) == 0 for v in vec):
            val += 1
        if val >= abs_prec:
            return self.zero(abs_prec)
        q = self.p ** val
        unit = tuple((v // q) % self.p ** (abs_prec - val) for v in vec)
        return PadicScalar(self, val, unit, abs_prec)

    def from_fraction(self, x: Fraction, abs_prec: int) -> "PadicScalar":
        num, den = x.numerator, x.denominator
        if num == 0:
            return self.zero(abs_prec)
        vn = 0
        while num % self.p == 0:
            num //= self.p
            vn += 1
        vd = 0
        while den % self.p == 0:
            den //= self.p
            vd += 1
        val = vn - vd
        rel = abs_prec - val
        if rel <= 0:
            return self.zero(abs_prec)
        pk = self.p ** rel
        unit = (num * pow(den, -1, pk)) % pk
        return PadicScalar(self, val, (unit,) + (0,) * (self.f - 1), abs_prec)

    def teichmueller_unit_inverse(self, unit: tuple, rel: int) -> tuple:
        """Inverse of a unit vector mod p^rel (Hensel from the residue field)."""
        p, f = self.p, self.f
        mod = self.modulus
        # residue inverse over F_{p^f}: extended Euclid, or brute force for tiny f
        res = tuple(c % p for c in unit)
        inv0 = self._residue_inverse(res)
        pk = p
        inv = inv0
        while pk < p ** rel:
            pk = min(pk * pk, p ** rel)
            prod = _poly_mulmod(unit, inv, mod, pk)
            corr = tuple((-c) % pk for c in prod)
            corr = (corr[0] + 2) % pk, *corr[1:]
            inv = _poly_mulmod(inv, corr, mod, pk)
        return inv

    def _residue_inverse(self, res: tuple) -> tuple:
        p, f = self.p, self.f
        if f == 1:
            return (pow(res[0], -1, p),)
        # extended Euclid over F_p[x] between res-poly and modulus
        mod = [c % p for c in self.modulus]
        a = list(res)
        r0, r1 = mod[:], a + [0]
        s0, s1 = [0], [1]

        def trim(u):
            while u and u[-1] % p == 0:
                u.pop()
            return u

        r0, r1 = trim(r0), trim(r1)
        while len(r1) > 1:
            # divide r0 by r1
            q = [0] * (len(r0) - len(r1) + 1)
            rr = r0[:]
            inv_lead = pow(r1[-1], -1, p)
            for i in range(len(rr) - 1, len(r1) - 2, -1):
                c = rr[i] * inv_lead % p
                q[i - len(r1) + 1] = c
                if c:
                    for j, bj in enumerate(r1):
                        rr[i - len(r1) + 1 + j] = (rr[i - len(r1) + 1 + j] - c * bj) % p
            rr = trim(rr)
            # s update: s0 - q*s1
            qs = [0] * (len(q) + len(s1) - 1)
            for i, qi in enumerate(q):
                if qi:
                    for j, sj in enumerate(s1):
                        qs[i + j] = (qs[i + j] + qi * sj) % p
            news = [(s0[i] if i < len(s0) else 0) - (qs[i] if i < len(qs) else 0)
                    for i in range(max(len(s0), len(qs)))]
            news = [c % p for c in news]
            r0, r1 = r1, rr
            s0, s1 = s1, trim(news) or [0]
        if not r1 or r1 == [0]:
            raise ZeroDivisionError("residue not invertible")
        c = pow(r1[0], -1, p)
        out = [x * c % p for x in s1]
        out += [0] * (f - len(out))
        return tuple(out[:f])

    def __repr__(self):
        return f"PadicContext(p={self.p}, f={self.f})"


class PadicScalar:
    """p^val * unit in W_f, unit known mod p^(abs_prec - val); val None = zero."""

    __slots__ = ("ctx", "val", "unit", "abs_prec")

    def __init__(self, ctx: PadicContext, val: Optional[int], unit: tuple, abs_prec: int):
        self.ctx = ctx
        self.val = val
        self.unit = unit
        self.abs_prec = abs_prec

    # -- helpers ---------------------------------------------------------------
    @property
    def rel_prec(self) -> int:
        if self.val is None:
            return 0
        return self.abs_prec - self.val

    def is_zero(self) -> bool:
        """True when indistinguishable from zero at this precision."""
        return self.val is None

    def _coerce(self, other) -> "PadicScalar":
        if isinstance(other, PadicScalar):
            if other.ctx.p != self.ctx.p or other.ctx.f != self.ctx.f:
                raise FieldMismatchError("mixed p-adic contexts")
            return other
        if isinstance(other, int):
            return self.ctx.from_int(other, self.abs_prec)
        if isinstance(other, Fraction):
            return self.ctx.from_fraction(other, self.abs_prec)
        return NotImplemented  # type: ignore[return-value]

    def vector(self, digits: Optional[int] = None) -> tuple:
        """Coefficient vector of the value mod p^min(digits, abs_prec).

        Only valid for p-integral elements (val >= 0 or zero).
        """
        k = self.abs_prec if digits is None else min(digits, self.abs_prec)
        if self.val is None or self.val >= k:
            return (0,) * self.ctx.f
        if self.val < 0:
            raise ValueError("vector() needs a p-integral element; shift first")
        pk = self.ctx.p ** k
        q = self.ctx.p ** self.val
        return tuple((u % (pk // q)) * q % pk for u in self.unit)

    # -- arithmetic --------------------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        N = min(self.abs_prec, o.abs_prec)
        if self.val is None and o.val is None:
            return self.ctx.zero(N)
        v = min(x.val for x in (self, o) if x.val is not None)
        rel = N - v
        if rel <= 0:
            return self.ctx.zero(N)
        pk = self.ctx.p ** rel
        vec = [0] * self.ctx.f
        for x in (self, o):
            if x.val is None:
                continue
            q = self.ctx.p ** (x.val - v)
            for i, u in enumerate(x.unit):
                vec[i] = (vec[i] + u * q) % pk
        return self.ctx.from_vector(vec, rel).shift(v).with_abs_prec(N)

    __radd__ = __add__

    def __neg__(self):
        if self.val is None:
            return self
        pk = self.ctx.p ** self.rel_prec
        return PadicScalar(self.ctx, self.val, tuple((-u) % pk for u in self.unit),
                          self.abs_prec)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if self.val is None or o.val is None:
            # p^val-shifted zero: absolute precision of the product
            va = self.val if self.val is not None else self.abs_prec
            vb = o.val if o.val is not None else o.abs_prec
            rel = min(self.rel_prec or self.abs_prec, o.rel_prec or o.abs_prec)
            return self.ctx.zero(va + vb + max(rel, 0))
        rel = min(self.rel_prec, o.rel_prec)
        pk = self.ctx.p ** rel
        unit = _poly_mulmod(self.unit, o.unit, self.ctx.modulus, pk)
        val = self.val + o.val
        # unit*unit stays a unit; no re-extraction needed
        return PadicScalar(self.ctx, val, unit, val + rel)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return o * self.inverse()

    def inverse(self) -> "PadicScalar":
        if self.val is None:
            raise ZeroDivisionError("division by (indistinguishable-from-)zero p-adic")
        rel = self.rel_prec
        inv = self.ctx.teichmueller_unit_inverse(self.unit, rel)
        return PadicScalar(self.ctx, -self.val, inv, -self.val + rel)

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        if k == 0:
            return PadicScalar(self.ctx, 0, (1,) + (0,) * (self.ctx.f - 1), self.abs_prec)
        base = self
        result = None
        while k:
            if k & 1:
                result = base if result is None else result * base
            base = base * base
            k >>= 1
        return result

    # -- inspection ---------------------------------------------------------------
    def valuation(self):
        """v_p, or a ValuationAtLeast marker when the value could be 0."""
        if self.val is None:
            return ValuationAtLeast(self.abs_prec)
        return self.val

    def shift(self, k: int) -> "PadicScalar":
        """Multiply by p^k (exact)."""
        if self.val is None:
            return self.ctx.zero(self.abs_prec + k)
        return PadicScalar(self.ctx, self.val + k, self.unit, self.abs_prec + k)

    def with_abs_prec(self, N: int) -> "PadicScalar":
        """Truncate to absolute precision N (never increases knowledge)."""
        if N >= self.abs_prec:
            return self
        if self.val is None:
            return self.ctx.zero(N)
        rel = N - self.val
        if rel <= 0:
            return self.ctx.zero(N)
        pk = self.ctx.p ** rel
        return PadicScalar(self.ctx, self.val, tuple(u % pk for u in self.unit), N)

    def eq_mod(self, other, k: int) -> bool:
        o = self._coerce(other)
        diff = self - o
        return diff.val is None and diff.abs_prec >= k or \
            (diff.val is not None and diff.val >= k)

    def __eq__(self, other):
        """Equality at the shared precision."""
        try:
            o = self._coerce(other)
        except (FieldMismatchError, TypeError):
            return NotImplemented
        if o is NotImplemented:
            return NotImplemented
        return self.eq_mod(o, min(self.abs_prec, o.abs_prec))

    def __bool__(self):
        return self.val is not None

    def digits(self) -> list:
        """Base-p digit lists of the unit part, one per basis coordinate."""
        if self.val is None:
            return []
        out = []
        for u in self.unit:
            ds = []
            m = u % self.ctx.p ** self.rel_prec
            for _ in range(self.rel_prec):
                ds.append(m % self.ctx.p)
                m //= self.ctx.p
            out.append(ds)
        return out if self.ctx.f > 1 else out[0]

    def to_json(self):
        return {
            "p": self.ctx.p,
            "f": self.ctx.f,
            "val": self.val,
            "digits": self.digits(),
            "prec": self.abs_prec,
        }

    def __repr__(self):
        if self.val is None:
            return f"PadicScalar(O({self.ctx.p}^{self.abs_prec}))"
        if self.ctx.f == 1:
            return (f"PadicScalar({self.ctx.p}^{self.val}*{self.unit[0]}"
                    f" + O({self.ctx.p}^{self.abs_prec}))")
        return (f"PadicScalar({self.ctx.p}^{self.val}*{list(self.unit)}"
                f" + O({self.ctx.p}^{self.abs_prec}))")


# ---------------------------------------------------------------------------
# embedding Q(sqrt(-d)) -> W_f
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _sqrt_minus_d_mod(p: int, d: int, abs_prec: int, f: int) -> tuple:
    """Root of x^2 + d = 0 in W_f mod p^abs_prec; smallest residue, Hensel lifted.

    Returns a coefficient vector.  Raises RamifiedPrimeError when p | 4d and
    ValueError when no root exists in the requested extension.
    """
    if p == 2 or d % p == 0:
        raise RamifiedPrimeError(f"p={p} ramifies in Q(sqrt(-{d}))")
    pk = p ** abs_prec
    # split case: root mod p by deterministic search (smallest representative)
    r0 = None
    for r in range(p):
        if (r * r + d) % p == 0:
            r0 = r
            break
    if r0 is not None:
        r = r0
        prec = 1
        while prec < abs_prec:
            prec = min(2 * prec, abs_prec)
            q = p ** prec
            r = (r - (r * r + d) * pow(2 * r, -1, q)) % q
        return (r,) + (0,) * (f - 1)
    # inert: need even f; search the residue field in lex order
    if f % 2 != 0:
        raise ValueError(f"-{d} is not a square mod {p} and f={f} is odd")
    ctx = PadicContext(p, f)
    mod = ctx.modulus
    target = (-d) % p
    found = None
    for n in range(p ** f):
        coeffs = []
        m = n
        for _ in range(f):
            coeffs.append(m % p)
            m //= p
        sq = _poly_mulmod(tuple(coeffs), tuple(coeffs), mod, p)
        if sq == ((target,) + (0,) * (f - 1)):
            found = tuple(coeffs)
            break
    if found is None:
        raise ValueError("no square root in the residue field")  # pragma: no cover
    # Hensel in W_f
    r = found
    prec = 1
    while prec < abs_prec:
        prec = min(2 * prec, abs_prec)
        q = p ** prec
        val = _poly_mulmod(r, r, mod, q)
        val = tuple((v + (d if i == 0 else 0)) % q for i, v in enumerate(val))
        two_r = tuple(2 * c % q for c in r)
        inv = ctx.teichmueller_unit_inverse(two_r, prec)
        corr = _poly_mulmod(val, inv, mod, q)
        r = tuple((a - b) % q for a, b in zip(r, corr))
    return r


def embed_padic(x: ExactScalar, p: int, abs_prec: int, f: int = 1) -> PadicScalar:
    """Image of x under the fixed embedding i_p into W_f mod p^abs_prec.

    The embedding sends sqrt(-d) to the deterministic root of x^2 + d chosen
    by :func:`_sqrt_minus_d_mod`.  Denominator valuations shift abs_prec as
    usual for p-adic division.
    """
    ctx = PadicContext(p, f)
    guard = 4
    a_part = ctx.from_fraction(x.a, abs_prec + guard)
    if x.b == 0:
        return a_part.with_abs_prec(abs_prec)
    root = _sqrt_minus_d_mod(p, x.d, abs_prec + guard, f)
    rt = ctx.from_vector(root, abs_prec + guard)
    b_part = ctx.from_fraction(x.b, abs_prec + guard)
    return (a_part + b_part * rt).with_abs_prec(abs_prec)


def padic_valuation(x: PadicScalar):
    """Largest v with p^v | x, or a ValuationAtLeast(abs_prec) marker."""
    return x.valuation()
