"""Finite-level Iwasawa algebras K[G_n] = K[X]/(omega_n) and mu/lambda invariants.

The generator gamma of G_n corresponds to 1 + X, so a group element gamma^m
is the polynomial (1 + X)^m.  Integral polynomials over Z_p are handled as
plain integer lists (ascending) reduced modulo p^M; elements over a local
field L use :class:`GroupRingPoly`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

import flint

from .errors import HypothesisViolated, OutOfRange, PrecisionExhausted
from .padic import INF, LocalElem, LocalFieldSpec, PrimeContext, ord_p


# ---------------------------------------------------------------------------
# cyclotomic bookkeeping


def q_n(p: int, n: int) -> int:
    """p^(n-1) - p^(n-2) + ... ending in p - 1 (n even) or p^2 - p (n odd); zero for n < 2."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n < 2:
        return 0
    return sum((-1) ** (n - 1 - e) * p**e for e in range(1 if n % 2 else 0, n))


@lru_cache(maxsize=64)
def omega_n(p: int, n: int) -> flint.fmpz_poly:
    """(1 + X)^(p^n) - 1."""
    return flint.fmpz_poly([1, 1]) ** (p**n) - 1


@lru_cache(maxsize=64)
def phi_n(p: int, n: int) -> flint.fmpz_poly:
    """The p^n-th cyclotomic polynomial at 1 + X; X for n = 0."""
    x1 = flint.fmpz_poly([1, 1])
    if n == 0:
        return flint.fmpz_poly([0, 1])
    step = x1 ** (p ** (n - 1))
    acc = flint.fmpz_poly([0])
    term = flint.fmpz_poly([1])
    for _ in range(p):
        acc += term
        term *= step
    return acc


def binomial_row(m: int, length: int) -> list[int]:
    """Coefficients of (1 + X)^m truncated to ``length`` terms."""
    return [comb(m, i) for i in range(min(m, length - 1) + 1)]


def group_to_x(values: Sequence, p: int, n: int) -> list:
    """Convert sum_m c_m gamma^m (m < p^n) to X-coefficients of sum c_m (1+X)^m."""
    size = p**n
    out = [0] * size
    for m, c in enumerate(values):
        if c:
            for i in range(m + 1):
                out[i] += c * comb(m, i)
    return out


def x_to_group(coeffs: Sequence, p: int, n: int) -> list:
    """Inverse of :func:`group_to_x` (binomial inversion X = (1+X) - 1)."""
    size = p**n
    out = [0] * size
    for i, c in enumerate(coeffs):
        if c:
            for m in range(i + 1):
                out[m] += c * comb(i, m) * (-1) ** (i - m)
    return out


# ---------------------------------------------------------------------------
# integral polynomials modulo p^M (ascending integer lists)


def zp_mul(a: Sequence[int], b: Sequence[int], mod: int) -> list[int]:
    if not a or not b:
        return []
    fa = flint.fmpz_poly(list(a))
    fb = flint.fmpz_poly(list(b))
    return [int(c) % mod for c in (fa * fb).coeffs()]


def zp_rem(a: Sequence[int], m: Sequence[int], mod: int) -> list[int]:
    """Remainder of a by the monic polynomial m, coefficients mod ``mod``."""
    a = [int(x) % mod for x in a]
    d = len(m) - 1
    if m[-1] % mod != 1:
        raise ValueError("divisor must be monic")
    for top in range(len(a) - 1, d - 1, -1):
        c = a[top]
        if c:
            base = top - d
            for i in range(d):
                a[base + i] = (a[base + i] - c * m[i]) % mod
            a[top] = 0
    return a[:d] + [0] * (d - len(a[:d]))


def substitute_affine(coeffs: Sequence[int], scale: int, offset: int, mod: int) -> list[int]:
    """F(scale * X + offset) modulo ``mod``; degree is preserved."""
    n = len(coeffs)
    out = [0] * n
    # Horner in the linear polynomial scale*X + offset
    for c in reversed(coeffs):
        nxt = [0] * n
        for i, x in enumerate(out):
            if x:
                nxt[i] += x * offset
                if i + 1 < n:
                    nxt[i + 1] += x * scale
        nxt[0] += c
        out = [v % mod for v in nxt]
    return out


def tw_ints(coeffs: Sequence[int], i: int, u: int, p: int, M: int) -> list[int]:
    """Tw^i(F)(X) = F(u^i (1 + X) - 1) for F over Z/p^M."""
    mod = p**M
    ui = pow(u, i, mod) if i >= 0 else pow(pow(u, -1, mod), -i, mod)
    return substitute_affine(coeffs, ui, (ui - 1) % mod, mod)


def phi_products(p: int, n: int, h: int, M: int = 30, u: int | None = None):
    """(Phi_{n,h}, Phi^+_{n,h}, Phi^-_{n,h}) over Z/p^M, ascending coefficient lists.

    Phi_{m,h} = prod_{j<h} Tw^{-j}(Phi_m); Phi^+ takes even m in [2, n] and
    Phi^- odd m in [1, n].
    """
    if h < 1 or n < 1:
        raise ValueError("need h >= 1 and n >= 1")
    u = 1 + p if u is None else u
    mod = p**M

    def phi_mh(m: int) -> list[int]:
        base = [int(c) for c in phi_n(p, m).coeffs()]
        acc = [1]
        for j in range(h):
            acc = zp_mul(acc, tw_ints(base, -j, u, p, M), mod)
        return acc

    full = phi_mh(n)
    plus, minus = [1], [1]
    for m in range(1, n + 1):
        if m % 2 == 0:
            plus = zp_mul(plus, phi_mh(m), mod)
        else:
            minus = zp_mul(minus, phi_mh(m), mod)
    return full, plus, minus


def omega_nh(p: int, n: int, h: int, M: int = 30, u: int | None = None) -> list[int]:
    """omega_{n,h} = prod_{j<h} Tw^{-j}(omega_n) over Z/p^M."""
    u = 1 + p if u is None else u
    mod = p**M
    base = [int(c) for c in omega_n(p, n).coeffs()]
    acc = [1]
    for j in range(h):
        acc = zp_mul(acc, tw_ints(base, -j, u, p, M), mod)
    return acc


# ---------------------------------------------------------------------------
# invariants


@dataclass(frozen=True)
class IwasawaInvariants:
    """(mu, lambda) with mu in ord_varpi units; both infinite for zero."""

    mu: int | float
    lam: int | float

    def __post_init__(self):
        if (self.mu == INF) != (self.lam == INF):
            raise ValueError("mu and lambda must be infinite together")

    def as_tuple(self) -> tuple:
        return (self.mu, self.lam)


def mu_lambda_ints(coeffs: Sequence[int], p: int, prec: int | None = None) -> IwasawaInvariants:
    """mu/lambda of an integer-coefficient polynomial over Z_p (e = 1)."""
    best = INF
    lam = INF
    for i, c in enumerate(coeffs):
        if c:
            v = ord_p(c, p)
            if prec is not None and v >= prec:
                continue
            if v < best:
                best, lam = v, i
    return IwasawaInvariants(best, lam)


def lambda_mod_p(coeffs: Sequence[int], p: int) -> int | float:
    """Index of the first coefficient that is a unit; INF if none."""
    for i, c in enumerate(coeffs):
        if int(c) % p:
            return i
    return INF


# ---------------------------------------------------------------------------
# group ring elements over a local field


class GroupRingPoly:
    """An element p^(-denom_exp) * sum_i coeffs[i] X^i of K[G_n], deg < p^n."""

    def __init__(self, field: LocalFieldSpec, n: int, coeffs: Sequence[LocalElem], denom_exp: int = 0):
        p = field.p
        if len(coeffs) != p**n:
            raise ValueError(f"expected {p**n} coefficients, got {len(coeffs)}")
        self.field = field
        self.n = n
        self.coeffs = tuple(coeffs)
        self.denom_exp = denom_exp

    # -- constructors -------------------------------------------------
    @classmethod
    def from_ints(cls, field: LocalFieldSpec, n: int, ints: Sequence[int], denom_exp: int = 0) -> "GroupRingPoly":
        p = field.p
        size = p**n
        ints = list(ints)
        if len(ints) > size:
            ints = zp_rem(ints, [int(c) for c in omega_n(p, n).coeffs()], p**field.prec)
        ints += [0] * (size - len(ints))
        return cls(field, n, [field.from_int(int(c)) for c in ints], denom_exp)

    @classmethod
    def zero(cls, field: LocalFieldSpec, n: int) -> "GroupRingPoly":
        return cls(field, n, [field.zero()] * field.p**n)

    @property
    def p(self) -> int:
        return self.field.p

    @property
    def size(self) -> int:
        return self.p**self.n

    def is_zero(self) -> bool:
        return all(c.exact_zero for c in self.coeffs)

    def _aligned(self, other: "GroupRingPoly") -> tuple[list[LocalElem], list[LocalElem], int]:
        if other.field != self.field or other.n != self.n:
            raise ValueError("group ring elements over different rings")
        t = max(self.denom_exp, other.denom_exp)
        a = [c.shifted(t - self.denom_exp) for c in self.coeffs]
        b = [c.shifted(t - other.denom_exp) for c in other.coeffs]
        return a, b, t

    def __add__(self, other: "GroupRingPoly") -> "GroupRingPoly":
        a, b, t = self._aligned(other)
        return GroupRingPoly(self.field, self.n, [x + y for x, y in zip(a, b)], t)

    def __sub__(self, other: "GroupRingPoly") -> "GroupRingPoly":
        a, b, t = self._aligned(other)
        return GroupRingPoly(self.field, self.n, [x - y for x, y in zip(a, b)], t)

    def __neg__(self) -> "GroupRingPoly":
        return GroupRingPoly(self.field, self.n, [-c for c in self.coeffs], self.denom_exp)

    def scale(self, c: LocalElem) -> "GroupRingPoly":
        return GroupRingPoly(self.field, self.n, [x * c for x in self.coeffs], self.denom_exp)

    def __mul__(self, other: "GroupRingPoly") -> "GroupRingPoly":
        if other.field != self.field or other.n != self.n:
            raise ValueError("group ring elements over different rings")
        size = self.size
        prod = [self.field.zero() for _ in range(2 * size - 1)]
        for i, x in enumerate(self.coeffs):
            if x.exact_zero:
                continue
            for j, y in enumerate(other.coeffs):
                if not y.exact_zero:
                    prod[i + j] = prod[i + j] + x * y
        out = _reduce_local(prod, self.p, self.n, self.field)
        return GroupRingPoly(self.field, self.n, out, self.denom_exp + other.denom_exp)

    # -- invariants ---------------------------------------------------
    def mu_lambda(self) -> IwasawaInvariants:
        best = INF
        lam = INF
        lost = []
        for i, c in enumerate(self.coeffs):
            if c.exact_zero:
                continue
            try:
                v = c.valuation()
            except PrecisionExhausted:
                # certified lower bound for a coefficient lost in the precision tail
                bound = min(c.prec, self.field.prec)
                lost.append((i, self.field.e * (bound + c.shift)))
                continue
            if v < best:
                best, lam = v, i
        for i, tail in lost:
            if tail < best or (tail == best and i < lam):
                raise PrecisionExhausted(f"coefficient {i} is not certified below the minimum valuation")
        if best == INF:
            return IwasawaInvariants(INF, INF)
        return IwasawaInvariants(best - self.field.e * self.denom_exp, lam)

    # -- maps ---------------------------------------------------------
    def tw(self, i: int, u: LocalElem | int | None = None) -> "GroupRingPoly":
        """F(u^i (1 + X) - 1) on the polynomial representative (degree is preserved)."""
        fld = self.field
        if u is None:
            u = 1 + self.p
        ue = fld.from_int(u) if isinstance(u, int) else u
        ui = ue**i
        lin = [ui - 1, ui]  # ui*X + (ui - 1)
        size = self.size
        out = [fld.zero() for _ in range(size)]
        for c in reversed(self.coeffs):
            nxt = [fld.zero() for _ in range(size)]
            for idx, x in enumerate(out):
                if x.exact_zero:
                    continue
                nxt[idx] = nxt[idx] + x * lin[0]
                if idx + 1 < size:
                    nxt[idx + 1] = nxt[idx + 1] + x * lin[1]
            nxt[0] = nxt[0] + c
            out = nxt
        return GroupRingPoly(fld, self.n, out, self.denom_exp)

    def change_generator(self, c: int) -> "GroupRingPoly":
        """Substitute X -> (1 + X)^c - 1, i.e. replace gamma by gamma^c."""
        p, n, fld = self.p, self.n, self.field
        size = self.size
        base = [int(x) for x in (flint.fmpz_poly([1, 1]) ** c - 1).coeffs()]
        mod = p**fld.prec
        base = zp_rem(base, [int(x) for x in omega_n(p, n).coeffs()], mod) if len(base) > size else base
        power = [1] + [0] * (size - 1)
        out = [fld.zero() for _ in range(size)]
        omega = [int(x) for x in omega_n(p, n).coeffs()]
        for coef in self.coeffs:
            if not coef.exact_zero:
                for i, x in enumerate(power):
                    if x:
                        out[i] = out[i] + coef * x
            power = zp_rem(zp_mul(power, base, mod), omega, mod)
        return GroupRingPoly(fld, n, out, self.denom_exp)

    def project(self) -> "GroupRingPoly":
        """pi^n_{n-1}: reduction modulo omega_{n-1}."""
        if self.n < 1:
            raise ValueError("no lower level")
        out = _reduce_local(list(self.coeffs), self.p, self.n - 1, self.field)
        return GroupRingPoly(self.field, self.n - 1, out, self.denom_exp)

    def norm_up(self) -> "GroupRingPoly":
        """nu^{n+1}_n: multiply by Phi_{n+1} as an element of level n + 1."""
        p = self.p
        phi = [int(c) for c in phi_n(p, self.n + 1).coeffs()]
        fld = self.field
        size = p ** (self.n + 1)
        prod = [fld.zero() for _ in range(size + len(phi))]
        for i, x in enumerate(self.coeffs):
            if x.exact_zero:
                continue
            for j, y in enumerate(phi):
                if y:
                    prod[i + j] = prod[i + j] + x * y
        out = _reduce_local(prod, p, self.n + 1, fld)
        return GroupRingPoly(fld, self.n + 1, out, self.denom_exp)

    def mod_varpi_shape(self) -> list[int]:
        """Indices i with ord(c_i) equal to mu (the residue support)."""
        inv = self.mu_lambda()
        if inv.mu == INF:
            return []
        base = inv.mu + self.field.e * self.denom_exp
        out = []
        for i, c in enumerate(self.coeffs):
            if not c.exact_zero:
                try:
                    if c.valuation() == base:
                        out.append(i)
                except PrecisionExhausted:
                    pass
        return out

    def as_ints(self) -> list[int]:
        """Integer representatives of the coefficients (degree-one fields, integral elements)."""
        if self.field.degree != 1:
            raise ValueError("integer view needs a degree-one field")
        out = []
        mod = self.p**self.field.prec
        for c in self.coeffs:
            if c.exact_zero:
                out.append(0)
                continue
            s = c.shift - self.denom_exp
            if s < 0:
                raise ValueError("element is not integral")
            out.append(c.coeffs[0] * self.p**s % mod)
        return out

    # -- serialization ------------------------------------------------
    def to_json(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "field": {"g": [str(c) for c in self.field.g], "e": self.field.e, "f": self.field.f_deg, "prec": self.field.prec, "M": self.field.ctx.M},
            "coeffs": [c.to_json() for c in self.coeffs],
            "denom_exp": self.denom_exp,
        }

    @classmethod
    def from_json(cls, data: dict) -> "GroupRingPoly":
        fd = data["field"]
        g = tuple(int(c) for c in fd["g"])
        ctx = PrimeContext(int(data["p"]), int(fd["M"]))
        fld = LocalFieldSpec(ctx, g, int(fd["e"]), int(fd["f"]), int(fd["prec"]), _residual(g, ctx.p))
        coeffs = [LocalElem.from_json(fld, c) for c in data["coeffs"]]
        return cls(fld, int(data["n"]), coeffs, int(data["denom_exp"]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupRingPoly):
            return NotImplemented
        if other.field != self.field or other.n != self.n:
            return False
        diff = self - other
        return all(c.exact_zero or c.is_zero_mod_prec() for c in diff.coeffs)

    def __repr__(self) -> str:
        return f"GroupRingPoly(p={self.p}, n={self.n}, denom_exp={self.denom_exp})"


def _residual(g: Sequence[int], p: int) -> tuple[int, ...]:
    fac = flint.nmod_poly([c % p for c in g], p).factor()[1]
    return tuple(int(c) for c in fac[0][0].coeffs())


def _reduce_local(prod: list[LocalElem], p: int, n: int, fld: LocalFieldSpec) -> list[LocalElem]:
    """Reduce a coefficient list modulo omega_n = (1+X)^(p^n) - 1."""
    size = p**n
    omega = [int(c) for c in omega_n(p, n).coeffs()]
    prod = list(prod)
    for top in range(len(prod) - 1, size - 1, -1):
        c = prod[top]
        if c.exact_zero:
            continue
        base = top - size
        for i in range(size):
            if omega[i]:
                prod[base + i] = prod[base + i] - c * omega[i]
        prod[top] = fld.zero()
    out = prod[:size]
    out += [fld.zero()] * (size - len(out))
    return out


def mu_lambda(F: GroupRingPoly) -> IwasawaInvariants:
    return F.mu_lambda()


def reduce_mod_omega(coeffs: Sequence, field: LocalFieldSpec, n: int) -> GroupRingPoly:
    """Truncated power series (LocalElem or int coefficients) reduced to level n."""
    elems = [field.from_int(int(c)) if isinstance(c, int) else c for c in coeffs]
    size = field.p**n
    if len(elems) < size:
        elems += [field.zero()] * (size - len(elems))
    return GroupRingPoly(field, n, _reduce_local(elems, field.p, n, field))


def norm_map(F: GroupRingPoly) -> GroupRingPoly:
    return F.norm_up()


def proj(F: GroupRingPoly) -> GroupRingPoly:
    return F.project()


# ---------------------------------------------------------------------------
# evaluation at zeta - 1


def closed_form_valuation(inv: IwasawaInvariants, n: int, p: int, e: int = 1) -> Fraction:
    """mu * ord_p(varpi) + lambda / phi(p^n)."""
    return Fraction(inv.mu, e) + Fraction(inv.lam, p**n - p ** (n - 1))


def direct_zeta_valuation(F: GroupRingPoly, n: int | None = None) -> Fraction | float:
    """ord_p F(zeta_{p^n} - 1) via the resultant with Phi_{p^n}; Q_p coefficients only."""
    n = F.n if n is None else n
    if n < 1:
        raise ValueError("need n >= 1")
    fld = F.field
    if fld.degree != 1:
        raise OutOfRange("direct evaluation is implemented for coefficients in Q_p")
    p = F.p
    # common shift to make all coefficients integral
    shifts = [c.shift for c in F.coeffs if not c.exact_zero]
    if not shifts:
        return INF
    s0 = min(shifts)
    ints = []
    for c in F.coeffs:
        ints.append(0 if c.exact_zero else c.coeffs[0] * p ** (c.shift - s0))
    prec = min(c.prec + c.shift - s0 for c in F.coeffs if not c.exact_zero)
    # F(z - 1) against the p^n-th cyclotomic polynomial in z
    f = flint.fmpz_poly(ints)(flint.fmpz_poly([-1, 1]))
    cyc = flint.fmpz_poly.cyclotomic(p**n)
    res = int(cyc.resultant(f))
    deg = p**n - p ** (n - 1)
    v = ord_p(res, p) if res else INF
    # conjugates of zeta share one valuation, so each carries v / deg and
    # coefficient errors of size p^prec cannot move it below prec
    if v == INF or Fraction(v, deg) >= prec:
        raise PrecisionExhausted("resultant valuation not certified")
    return Fraction(v, deg) + s0 - F.denom_exp


def eval_val_at_zeta(F: GroupRingPoly, n: int | None = None) -> Fraction:
    """ord_p F(zeta_{p^n} - 1), checked against the mu/lambda closed form.

    Raises HypothesisViolated when lambda is too large for the closed form
    to apply; the exception carries the directly computed value.
    """
    n = F.n if n is None else n
    inv = F.mu_lambda()
    direct = direct_zeta_valuation(F, n)
    if inv.mu == INF:
        return direct
    e = F.field.e
    bound = Fraction(F.p**n - F.p ** (n - 1), e)
    if inv.lam >= bound:
        err = HypothesisViolated(f"lambda = {inv.lam} is not below phi(p^n) ord_p(varpi) = {bound}")
        err.direct = direct
        raise err
    closed = closed_form_valuation(inv, n, F.p, e)
    if closed != direct:
        raise AssertionError(f"closed form {closed} disagrees with direct evaluation {direct}")
    return direct


def invariants_after_reduction(coeffs: Iterable[int], p: int, n: int) -> IwasawaInvariants:
    """(mu, lambda) of an integral polynomial after reduction modulo omega_n."""
    red = zp_rem(list(coeffs), [int(c) for c in omega_n(p, n).coeffs()], p**60) if len(list(coeffs)) > p**n else list(coeffs)
    return mu_lambda_ints(red, p)
