"""Finite extensions of Q_p at capped absolute precision.

A local field is L = Q_p[y]/(g) for a monic integral g known modulo p^M.
Elements are integer coefficient vectors in the basis 1, y, ..., y^(deg g - 1)
times an explicit power p^shift, so elements of L with denominators are
representable.  Valuations come from resultants:
ord_varpi(x) = ord_p(Res(g, x)) / f, which needs no uniformizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math
from math import gcd
from typing import Sequence

import flint

from .errors import OutOfRange, PrecisionExhausted

INF = float("inf")
DEFAULT_PRECISION = 30


def ord_p(x: int, p: int) -> float | int:
    """Exact p-adic valuation of an integer; INF for zero."""
    x = int(x)
    if x == 0:
        return INF
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def ord_p_rational(x, p: int):
    x = Fraction(x)
    if x == 0:
        return INF
    return ord_p(x.numerator, p) - ord_p(x.denominator, p)


@dataclass(frozen=True)
class PrimeContext:
    """An odd prime together with the working precision exponent."""

    p: int
    M: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.p < 3 or not flint.fmpz(self.p).is_prime():
            raise ValueError(f"p must be an odd prime, got {self.p}")
        if self.M < 1:
            raise ValueError("precision exponent must be positive")

    @property
    def modulus(self) -> int:
        return self.p**self.M


@dataclass(frozen=True)
class LocalFieldSpec:
    """L = Q_p[y]/(g) with ramification index e and residue degree f_deg.

    ``g`` is ascending, monic, reduced modulo p^prec.  ``residual`` is the
    irreducible factor of g mod p (ascending), used for ordering.
    """

    ctx: PrimeContext
    g: tuple[int, ...]
    e: int
    f_deg: int
    prec: int
    residual: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        if len(self.g) - 1 != self.e * self.f_deg:
            raise ValueError("deg g must equal e * f")
        if self.g[-1] != 1:
            raise ValueError("g must be monic")

    @classmethod
    def rational(cls, ctx: PrimeContext) -> "LocalFieldSpec":
        """Q_p itself, presented as Q_p[y]/(y)."""
        return cls(ctx, (0, 1), 1, 1, ctx.M, (0, 1))

    @property
    def p(self) -> int:
        return self.ctx.p

    @property
    def degree(self) -> int:
        return len(self.g) - 1

    def poly(self) -> flint.fmpz_poly:
        return flint.fmpz_poly(list(self.g))

    # -- constructors -------------------------------------------------
    def element(self, coeffs: Sequence[int], shift: int = 0, prec: int | None = None) -> "LocalElem":
        return LocalElem.make(self, coeffs, shift, self.prec if prec is None else prec)

    def from_int(self, x: int) -> "LocalElem":
        if x == 0:
            return self.zero()
        v = ord_p(x, self.p)
        return self.element([x // self.p**v], v)

    def from_rational(self, x) -> "LocalElem":
        x = Fraction(x)
        if x == 0:
            return self.zero()
        v = ord_p_rational(x, self.p)
        unit = x / Fraction(self.p) ** v
        mod = self.p**self.prec
        return self.element([unit.numerator * pow(unit.denominator, -1, mod) % mod], v)

    def zero(self) -> "LocalElem":
        return LocalElem(self, (0,) * self.degree, 0, self.prec, True)

    def one(self) -> "LocalElem":
        return self.from_int(1)

    def gen(self) -> "LocalElem":
        """The class of y."""
        if self.degree == 1:
            return self.from_int(-self.g[0]) if self.g[0] else self.zero()
        return self.element([0, 1])

    def uniformizer(self) -> "LocalElem":
        """An element of valuation one, found by scanning y - c + t p."""
        if self.e == 1:
            return self.from_int(self.p)
        y = self.gen()
        for c in range(self.p):
            for t in range(self.p):
                x = y - self.from_int(c + t * self.p)
                try:
                    v = x.valuation()
                except PrecisionExhausted:
                    continue
                if v == INF or v <= 0 or gcd(int(v), self.e) != 1:
                    continue
                # a v - b e = 1 with a > 0
                a = pow(int(v), -1, self.e) if self.e > 1 else 1
                b = (a * int(v) - 1) // self.e
                return x**a * self.from_int(1).shifted(-b)
        raise PrecisionExhausted("no uniformizer found among simple candidates")


@dataclass(frozen=True)
class LocalElem:
    """p^shift * sum coeffs[i] y^i, coefficients known modulo p^prec."""

    field: LocalFieldSpec
    coeffs: tuple[int, ...]
    shift: int
    prec: int
    exact_zero: bool = False

    @classmethod
    def make(cls, field: LocalFieldSpec, coeffs: Sequence[int], shift: int, prec: int) -> "LocalElem":
        g = field.g
        n = field.degree
        mod = field.p**prec
        c = [int(x) for x in coeffs]
        # reduce modulo g (monic)
        while len(c) > n:
            top = c.pop()
            if top:
                base = len(c) - n
                for i in range(n):
                    c[base + i] -= top * g[i]
        c += [0] * (n - len(c))
        c = [x % mod for x in c]
        if prec <= 0:
            raise PrecisionExhausted("no p-adic digits left")
        return cls(field, tuple(c), shift, prec)

    @property
    def p(self) -> int:
        return self.field.p

    def _check(self, other: "LocalElem") -> None:
        if other.field != self.field:
            raise ValueError("elements of different local fields")

    def shifted(self, s: int) -> "LocalElem":
        """Multiply by p^s."""
        if self.exact_zero:
            return self
        return LocalElem(self.field, self.coeffs, self.shift + s, self.prec)

    def __add__(self, other: "LocalElem") -> "LocalElem":
        if isinstance(other, int):
            other = self.field.from_int(other)
        self._check(other)
        if self.exact_zero:
            return other
        if other.exact_zero:
            return self
        a, b = (self, other) if self.shift <= other.shift else (other, self)
        diff = b.shift - a.shift
        scale = self.p**diff
        prec = min(a.prec, b.prec + diff)
        coeffs = [x + scale * y for x, y in zip(a.coeffs, b.coeffs)]
        return LocalElem.make(self.field, coeffs, a.shift, prec)

    __radd__ = __add__

    def __neg__(self) -> "LocalElem":
        if self.exact_zero:
            return self
        return LocalElem.make(self.field, [-x for x in self.coeffs], self.shift, self.prec)

    def __sub__(self, other: "LocalElem") -> "LocalElem":
        if isinstance(other, int):
            other = self.field.from_int(other)
        return self + (-other)

    def __rsub__(self, other) -> "LocalElem":
        return (-self) + other

    def __mul__(self, other) -> "LocalElem":
        if isinstance(other, int):
            other = self.field.from_int(other)
        self._check(other)
        if self.exact_zero or other.exact_zero:
            return self.field.zero()
        n = self.field.degree
        prod = [0] * (2 * n - 1)
        for i, x in enumerate(self.coeffs):
            if x:
                for j, y in enumerate(other.coeffs):
                    prod[i + j] += x * y
        prec = min(self.prec, other.prec)
        return LocalElem.make(self.field, prod, self.shift + other.shift, prec)

    __rmul__ = __mul__

    def __pow__(self, e: int) -> "LocalElem":
        if e < 0:
            return self.inverse() ** (-e)
        out = self.field.one()
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def __truediv__(self, other) -> "LocalElem":
        if isinstance(other, int):
            other = self.field.from_int(other)
        return self * other.inverse()

    def is_zero_mod_prec(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def norm_valuation(self) -> int | float:
        """ord_p of the norm of the coefficient vector, certified below prec."""
        if self.exact_zero:
            return INF
        g = self.field.poly()
        x = flint.fmpz_poly(list(self.coeffs))
        if x.is_zero():
            raise PrecisionExhausted("all tracked digits vanish")
        if self.field.degree == 1:
            res = int(x(-self.field.g[0]))
        else:
            res = int(g.resultant(x))
        v = ord_p(res, self.p) if res else INF
        bound = min(self.prec, self.field.prec)
        # the norm scales ord_p by the degree; errors in the integral power
        # basis have ord_p >= bound, so they cannot move v below degree * bound
        if v >= bound * self.field.degree:
            raise PrecisionExhausted(f"valuation not certified below precision {bound}")
        return v

    def valuation(self):
        """ord_varpi of the element (integer, INF for zero)."""
        if self.exact_zero:
            return INF
        v = self.norm_valuation()
        f = self.field.f_deg
        if v % f:
            raise PrecisionExhausted("norm valuation not divisible by the residue degree")
        return v // f + self.field.e * self.shift

    def valuation_p(self) -> Fraction:
        """ord_p of the element (ord_p(p) = 1)."""
        v = self.valuation()
        return v if v == INF else Fraction(v, self.field.e)

    def inverse(self) -> "LocalElem":
        if self.exact_zero:
            raise ZeroDivisionError("inverse of zero")
        n = self.field.degree
        mat = flint.fmpz_mat(n, n)
        for j in range(n):
            basis = [0] * n
            basis[j] = 1
            col = self * self.field.element(basis)
            for i in range(n):
                mat[i, j] = col.coeffs[i]
        det = int(mat.det())
        if det == 0:
            raise PrecisionExhausted("multiplication matrix is singular at this precision")
        t = ord_p(det, self.p)
        if t >= self.prec:
            raise PrecisionExhausted("element is zero to working precision")
        unit = det // self.p**t
        adj = mat.adjugate() if hasattr(mat, "adjugate") else _adjugate(mat)
        prec = self.prec - t
        mod = self.p**prec
        w = pow(unit, -1, mod)
        coeffs = [int(adj[i, 0]) * w % mod for i in range(n)]
        return LocalElem.make(self.field, coeffs, -self.shift - t, prec)

    def normalized(self) -> "LocalElem":
        """Same element with the p-part of the coefficient content moved into the shift."""
        if self.exact_zero or self.is_zero_mod_prec():
            return self
        c = min(ord_p(x, self.p) if x else self.prec for x in self.coeffs)
        if c == 0:
            return self
        s = self.p**c
        return LocalElem(self.field, tuple(x // s for x in self.coeffs), self.shift + c, self.prec - c)

    def residue_ratio(self, other: "LocalElem") -> "LocalElem":
        return self / other

    def to_json(self) -> dict:
        return {"coeffs": [str(c) for c in self.coeffs], "shift": self.shift, "prec": self.prec, "zero": self.exact_zero}

    @classmethod
    def from_json(cls, field: LocalFieldSpec, data: dict) -> "LocalElem":
        if data.get("zero"):
            return field.zero()
        return cls(field, tuple(int(c) for c in data["coeffs"]), int(data["shift"]), int(data["prec"]))

    def __repr__(self) -> str:
        if self.exact_zero:
            return "LocalElem(0)"
        return f"LocalElem({list(self.coeffs)} * p^{self.shift}, prec={self.prec})"


def _adjugate(mat: flint.fmpz_mat) -> flint.fmpz_mat:
    n = mat.nrows()
    out = flint.fmpz_mat(n, n)
    for i in range(n):
        for j in range(n):
            minor = flint.fmpz_mat(n - 1, n - 1)
            rows = [r for r in range(n) if r != j]
            cols = [c for c in range(n) if c != i]
            for a, r in enumerate(rows):
                for b, c in enumerate(cols):
                    minor[a, b] = mat[r, c]
            out[i, j] = (-1) ** (i + j) * (minor.det() if n > 1 else 1)
    return out


# ---------------------------------------------------------------------------
# Factoring over Z_p


def _reduce_poly(f: flint.fmpz_poly, mod: int) -> flint.fmpz_poly:
    return flint.fmpz_poly([int(c) % mod for c in f.coeffs()])


def _to_nmod(f: flint.fmpz_poly, p: int) -> flint.nmod_poly:
    return flint.nmod_poly([int(c) % p for c in f.coeffs()], p)


def _lift_nmod(f: flint.nmod_poly) -> flint.fmpz_poly:
    return flint.fmpz_poly([int(c) for c in f.coeffs()])


def _hensel_split(h: flint.fmpz_poly, a0: flint.nmod_poly, p: int, prec: int):
    """Lift h = A * B with A = a0 (mod p), both monic, to precision p^prec."""
    b0 = divmod(_to_nmod(h, p), a0)[0]
    g, s, t = a0.xgcd(b0)
    if g.degree() != 0:
        raise ValueError("residual factors are not coprime")
    inv = pow(int(g[0]), -1, p)
    s, t = s * inv, t * inv  # s*A + t*B = 1
    a = _lift_nmod(a0)
    b = _lift_nmod(b0)
    pj = p
    for _ in range(1, prec):
        err = h - a * b
        e = _to_nmod(flint.fmpz_poly([int(c) // pj for c in err.coeffs()]), p) if not err.is_zero() else flint.nmod_poly([0], p)
        if not e.is_zero():
            da = divmod(t * e, a0)[1]
            db = divmod(e - da * b0, a0)[0]
            a = a + pj * _lift_nmod(da)
            b = b + pj * _lift_nmod(db)
        pj *= p
    mod = p**prec
    return _reduce_poly(a, mod), _reduce_poly(b, mod)


def _newton_polygon(vals: list) -> list[tuple[int, int]]:
    """Lower convex hull of (i, vals[i]) for finite vals, as a vertex list."""
    pts = [(i, v) for i, v in enumerate(vals) if v != INF]
    hull: list[tuple[int, int]] = []
    for pt in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (pt[0] - x1) >= (pt[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(pt)
    return hull


@dataclass
class _Block:
    poly: flint.fmpz_poly  # monic in x
    prec: int
    residual: tuple[int, ...]


def _substitute(h: flint.fmpz_poly, c: int, t: int, p: int) -> flint.fmpz_poly:
    """h(c + p^t w) / p^(t deg h)."""
    n = h.degree()
    shifted = h(flint.fmpz_poly([c, 1]))
    out = []
    for i in range(n + 1):
        coef = int(shifted[i]) * p ** (t * i)
        out.append(coef)
    scale = p ** (t * n)
    if any(x % scale for x in out):
        raise ValueError("substitution is not integral")
    return flint.fmpz_poly([x // scale for x in out])


def _unsubstitute(f: flint.fmpz_poly, c: int, t: int, p: int, mod: int) -> flint.fmpz_poly:
    """p^(t deg f) f((x - c)/p^t), monic integral in x."""
    n = f.degree()
    lin = flint.fmpz_poly([-c, 1])
    acc = flint.fmpz_poly([0])
    for i in range(n + 1):
        acc += int(f[i]) * p ** (t * (n - i)) * lin**i
    return _reduce_poly(acc, mod)


def _factor_block(h: flint.fmpz_poly, prec: int, p: int, depth: int = 0) -> list[tuple[flint.fmpz_poly, int, int, int]]:
    """Irreducible factors of a monic block; returns (factor, e, f, precision)."""
    if depth > 12:
        raise PrecisionExhausted("factor search did not terminate")
    n = h.degree()
    if n == 1:
        return [(h, 1, 1, prec)]
    res = _to_nmod(h, p).factor()[1]
    if len(res) > 1:
        out = []
        rest = h
        rest_prec = prec
        for fac, mult in res[:-1]:
            a, rest = _hensel_split(rest, fac**mult, p, rest_prec)
            out += _factor_block(a, rest_prec, p, depth + 1)
        out += _factor_block(rest, rest_prec, p, depth + 1)
        return out
    fac, mult = res[0]
    if mult == 1:
        return [(h, 1, n, prec)]
    if fac.degree() != 1:
        raise PrecisionExhausted("repeated residual factor of degree > 1 is not supported")
    c = (-int(fac[0])) % p
    z = h(flint.fmpz_poly([c, 1]))
    vals = [ord_p(int(z[i]), p) if int(z[i]) % p**prec else INF for i in range(n + 1)]
    if vals[0] == INF:
        raise PrecisionExhausted("constant term vanishes to working precision")
    hull = _newton_polygon(vals)
    if len(hull) == 2:
        slope = Fraction(vals[0], n)
        if slope.denominator == n:
            return [(h, n, 1, prec)]
        if slope.denominator == 1:
            t = int(slope)
            z2 = _substitute(h, c, t, p)
            new_prec = prec - t * n
            if new_prec <= 1:
                raise PrecisionExhausted("precision consumed by rescaling")
            parts = _factor_block(_reduce_poly(z2, p**new_prec), new_prec, p, depth + 1)
            mod = p**new_prec
            return [(_unsubstitute(f, c, t, p, mod), e, fd, pr) for f, e, fd, pr in parts]
        b = slope.denominator
        a = slope.numerator
        # residual polynomial along the segment
        rcoeffs = []
        for s in range(n // b + 1):
            i = s * b
            if vals[i] == a * (n - i) // b and vals[i] != INF:
                rcoeffs.append((int(z[i]) // p ** vals[i]) % p)
            else:
                rcoeffs.append(0)
        r = flint.nmod_poly(rcoeffs, p)
        rf = r.factor()[1]
        if len(rf) == 1 and rf[0][1] == 1:
            return [(h, b, n // b, prec)]
        raise PrecisionExhausted("residual polynomial of a ramified segment is not irreducible")
    # several segments: rescale at an integral root valuation and split there
    slopes = []
    for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
        slopes += [Fraction(y1 - y2, x2 - x1)] * (x2 - x1)
    lo, hi = min(slopes), max(slopes)
    t = next((t for t in range(int(math.ceil(lo)), int(math.floor(hi)) + 1) if 0 < sum(s > t for s in slopes) < n or (t in slopes and any(s < t for s in slopes))), None)
    if t is None:
        raise PrecisionExhausted("no integral slope separates the Newton polygon")
    a_fac, new_prec = _split_at(h, c, t, prec, p)
    mod = p**new_prec
    b_fac, rem = divmod(_reduce_poly(h, mod), a_fac)
    if _reduce_poly(rem, mod) != 0:
        raise PrecisionExhausted("slope factor does not divide the block")
    b_fac = _reduce_poly(b_fac, mod)
    return _factor_block(a_fac, new_prec, p, depth + 1) + _factor_block(b_fac, new_prec, p, depth + 1)


def _split_at(h: flint.fmpz_poly, c: int, t: int, prec: int, p: int) -> tuple[flint.fmpz_poly, int]:
    """Monic factor of h whose roots r have ord(r - c) > t, or = t when none exceed t."""
    n = h.degree()
    z = h(flint.fmpz_poly([c, 1]))
    scaled = [int(z[i]) * p ** (t * i) for i in range(n + 1)]
    content = min(ord_p(x, p) for x in scaled if x)
    g = flint.fmpz_poly([x // p**content for x in scaled])
    new_prec = prec - content
    if new_prec <= 1:
        raise PrecisionExhausted("precision consumed by rescaling")
    r = _to_nmod(g, p)
    low = next(i for i in range(n + 1) if int(r[i]))
    if low > 0:
        a0 = flint.nmod_poly([0] * low + [1], p)
    else:
        lead = int(r.leading_coefficient())
        a0 = r * pow(lead, -1, p)
    if a0.degree() in (0, n):
        raise PrecisionExhausted("rescaled residual does not split")
    a, _b = _hensel_split(_reduce_poly(g, p**new_prec), a0, p, new_prec)
    m = a.degree()
    mod = p**new_prec
    # back to z = p^t w, then to x = c + z
    return _unsubstitute(a, c, t, p, mod), new_prec


def hensel_factor(m: Sequence[int] | flint.fmpz_poly, ctx: PrimeContext) -> list[LocalFieldSpec]:
    """Irreducible factors of the monic integer polynomial m over Z_p.

    Factors are ordered by (degree, residual irreducible factor mod p,
    coefficients mod p^prec).  Irreducibility is certified by the residue
    factorization or a Newton polygon argument; anything else raises
    PrecisionExhausted.
    """
    f = m if isinstance(m, flint.fmpz_poly) else flint.fmpz_poly([int(c) for c in m])
    if int(f.leading_coefficient()) != 1:
        raise ValueError("polynomial must be monic")
    if f.degree() < 1:
        raise ValueError("polynomial must have positive degree")
    p = ctx.p
    parts = _factor_block(_reduce_poly(f, ctx.modulus), ctx.M, p)
    out = []
    for fac, e, fd, pr in parts:
        res = _to_nmod(fac, p).factor()[1]
        residual = tuple(int(c) for c in res[0][0].coeffs())
        g = tuple(int(c) % p**pr for c in fac.coeffs())
        g = g[:-1] + (1,)
        out.append(LocalFieldSpec(PrimeContext(p, ctx.M), g, e, fd, pr, residual))
    out.sort(key=lambda s: (s.degree, tuple(reversed(s.residual)), s.e, s.g))
    # the product of the factors must reproduce m
    prod = flint.fmpz_poly([1])
    low = min(s.prec for s in out)
    for s in out:
        prod *= s.poly()
    if _reduce_poly(prod - f, p**low) != 0:
        raise PrecisionExhausted("factor product does not reproduce the polynomial")
    return out


# ---------------------------------------------------------------------------
# Embedded Hecke fields


class EmbeddedNumberField:
    """Q(theta) = Q[x]/(m) completed at the prime_index-th prime above p.

    Elements of Q(theta) are coefficient vectors in powers of theta; ``embed``
    sends them into the local field by theta -> y.
    """

    def __init__(self, minpoly: Sequence[int], prime_index: int, ctx: PrimeContext):
        self.minpoly = tuple(int(c) for c in minpoly)
        self.ctx = ctx
        self.factors = hensel_factor(self.minpoly, ctx)
        if not 1 <= prime_index <= len(self.factors):
            raise ValueError(f"prime index {prime_index} out of range 1..{len(self.factors)}")
        self.prime_index = prime_index
        self.factor = self.factors[prime_index - 1]
        self.embed_root = self.factor.gen()
        self._powers = None

    @property
    def p(self) -> int:
        return self.ctx.p

    @property
    def e(self) -> int:
        return self.factor.e

    def _theta_powers(self) -> list[LocalElem]:
        if self._powers is None:
            d = len(self.minpoly) - 1
            pw = [self.factor.one()]
            for _ in range(d - 1):
                pw.append(pw[-1] * self.embed_root)
            self._powers = pw
        return self._powers

    def embed(self, coeffs: Sequence, denom: int = 1) -> LocalElem:
        """Image of sum coeffs[t] theta^t / denom; coefficients may be Fractions."""
        fr = [Fraction(c) / denom for c in coeffs]
        if not any(fr):
            return self.factor.zero()
        den = 1
        for x in fr:
            den = den * x.denominator // gcd(den, x.denominator)
        ints = [int(x * den) for x in fr]
        fld = self.factor
        if fld.degree == 1:
            r = self.embed_root.coeffs[0] if not self.embed_root.exact_zero else 0
            mod = self.p**fld.prec
            acc = 0
            for c in reversed(ints):
                acc = (acc * r + c) % mod
            val = fld.element([acc])
        else:
            pw = self._theta_powers()
            coeffs_l = [0] * fld.degree
            for t, c in enumerate(ints):
                if c:
                    for i, x in enumerate(pw[t].coeffs):
                        coeffs_l[i] += c * x
            val = fld.element(coeffs_l)
        if den != 1:
            val = val / fld.from_int(den)
        return val

    def residue_check(self) -> LocalElem:
        """m(embed_root), which must vanish to working precision."""
        acc = self.factor.zero()
        for c in reversed(self.minpoly):
            acc = acc * self.embed_root + self.factor.from_int(c)
        return acc

    def describe(self) -> dict:
        return {
            "p": self.p,
            "minpoly": list(self.minpoly),
            "prime_index": self.prime_index,
            "factor": [str(c) for c in self.factor.g],
            "e": self.factor.e,
            "f": self.factor.f_deg,
        }


def valuation(x: LocalElem):
    return x.valuation()


@lru_cache(maxsize=4096)
def teichmuller_int(a: int, p: int, M: int) -> int:
    """omega(a) mod p^M as an integer."""
    if a % p == 0:
        raise ValueError("Teichmuller lift needs a unit")
    mod = p**M
    t = a % mod
    for _ in range(M):
        t = pow(t, p, mod)
    return t


def teichmuller(a: int, ctx: PrimeContext) -> LocalElem:
    """The (p-1)-st root of unity congruent to a mod p, in Z_p / p^M."""
    return LocalFieldSpec.rational(ctx).element([teichmuller_int(a, ctx.p, ctx.M)])


def sqrt_local(x: LocalElem) -> LocalElem | None:
    """A square root of x in its field, or None when x is not a square.

    Supported for residue degree one; raises OutOfRange otherwise.
    """
    fld = x.field
    if x.exact_zero:
        return x
    if fld.f_deg != 1:
        raise OutOfRange("square roots need residue degree one")
    p = fld.p
    v = x.valuation()
    if v % 2:
        return None
    pi = fld.uniformizer()
    half = pi ** (v // 2)
    unit = x / (half * half)
    y0 = None
    for c in range(1, p):
        cand = fld.from_int(c)
        diff = cand * cand - unit
        if diff.is_zero_mod_prec() or diff.valuation() >= 1:
            y0 = cand
            break
    if y0 is None:
        return None
    y = y0
    two = fld.from_int(2)
    for _ in range(fld.prec.bit_length() + 2):
        y = y - (y * y - unit) / (two * y)
    return y * half


@dataclass
class HeckeRoots:
    alpha: LocalElem
    beta: LocalElem
    field: LocalFieldSpec
    extended: bool


def hecke_roots(a_p: LocalElem, eps_p: LocalElem, k: int, ctx: PrimeContext | None = None) -> HeckeRoots:
    """Roots of X^2 - a_p X + eps(p) p^(k-1).

    The roots live in the field of a_p when the discriminant is a square
    there.  Otherwise the quadratic extension is built explicitly, which is
    supported when a_p and eps(p) lie in Q_p.
    """
    fld = a_p.field
    p = fld.p
    if a_p.exact_zero:
        pass
    elif a_p.valuation() <= 0:
        raise ValueError("a_p is a unit: the form is ordinary at this prime")
    c = eps_p * fld.from_int(1).shifted(k - 1)
    disc = a_p * a_p - c * 4
    root = sqrt_local(disc)
    if root is not None:
        half = fld.from_rational(Fraction(1, 2))
        return HeckeRoots((a_p + root) * half, (a_p - root) * half, fld, False)
    if fld.degree != 1:
        raise OutOfRange("Hecke polynomial irreducible over a proper extension of Q_p")
    # K' = Q_p[y]/(y^2 - a y + c), monic with integral coefficients
    a_int = _rational_int(a_p)
    c_int = _rational_int(c)
    mod = p**fld.prec
    ctx2 = PrimeContext(p, fld.prec)
    specs = hensel_factor([c_int % mod, (-a_int) % mod, 1], ctx2)
    if len(specs) != 1:
        raise PrecisionExhausted("quadratic unexpectedly split")
    big = specs[0]
    alpha = big.gen()
    beta = big.from_int(a_int) - alpha
    return HeckeRoots(alpha, beta, big, True)


def _rational_int(x: LocalElem) -> int:
    """Integer representative of an integral element of Q_p."""
    if x.exact_zero:
        return 0
    if x.field.degree != 1:
        raise ValueError("not an element of Q_p")
    val = x.coeffs[0] if x.field.g[0] == 0 else x.coeffs[0]
    if x.shift < 0:
        raise ValueError("element is not integral")
    return val * x.p**x.shift
