"""Mazur-Tate elements of eigensymbols and their stabilizations.

Theta_{n,j}(f, omega^i) lives in O[G_n] and is built from the level-(n+1)
element: the value of phi | [[1, -a], [0, p^(n+1)]] on {oo} - {0} is split into
its monomial components, twisted by omega^(i-j) on the torsion part of a, and
placed at gamma^m(a) where (1+p)^m(a) = a omega(a)^(-1) mod p^(n+1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from . import __version__
from .errors import NonIntegral, PrecisionExhausted
from .iwasawa import GroupRingPoly, group_to_x
from .modsym import EigenSymbol, local_scale
from .padic import LocalElem, LocalFieldSpec, ord_p, teichmuller_int


def discrete_log_table(p: int, level: int) -> dict[int, int]:
    """m with (1+p)^m = x mod p^level, for x = 1 mod p."""
    mod = p**level
    out = {}
    x = 1
    u = 1 + p
    for m in range(p ** (level - 1)):
        out[x] = m
        x = x * u % mod
    return out


def theta_raw(sym: EigenSymbol, p: int, n: int) -> dict[int, np.ndarray]:
    """a -> (phi | [[1, -a], [0, p^n]])({oo} - {0}) for a in (Z/p^n)^x.

    Each value is an integer array of shape (k-1, d): X-degree by theta-power.
    """
    if n < 1:
        raise ValueError("level must be at least one")
    k = sym.weight
    w = k - 2
    big = p**n
    out = {}
    for a in range(1, big):
        if a % p == 0:
            continue
        b = sym.eval_infinity(-a, big)
        # P | [[1, -a], [0, p^n]] = P(p^n X, a X + Y)
        acted = np.zeros_like(b)
        for j in range(w + 1):
            acc = 0
            for i in range(j + 1):
                if any(b[i]):
                    acc = acc + b[i] * (big**i * comb(w - i, j - i) * a ** (j - i))
            acted[j] = acc
        out[a] = acted
    return out


@dataclass
class ThetaElement:
    """Theta_{n,j}(f, omega^i) over the completed Hecke field."""

    label: str | None
    p: int
    n: int
    i: int
    j: int
    sign: int
    body: GroupRingPoly
    integral: bool = True
    meta: dict = field(default_factory=dict)

    def invariants(self):
        return self.body.mu_lambda()

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "p": self.p,
            "n": self.n,
            "i": self.i,
            "j": self.j,
            "sign": self.sign,
            "integral": self.integral,
            "meta": self.meta,
            "body": self.body.to_json(),
            "version": __version__,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ThetaElement":
        return cls(data["label"], data["p"], data["n"], data["i"], data["j"], data["sign"], GroupRingPoly.from_json(data["body"]), data["integral"], data.get("meta", {}))


def theta_sign(i: int, k: int) -> int:
    """Star eigenvalue of the symbol feeding the omega^i component.

    With P | g = P(dX - cY, -bX + aY) the even characters of (Z/p)^x see the
    (-1)^k eigenspace, so the sign is (-1)^(i + k).
    """
    return (-1) ** (i + k)


def project_theta(raw: dict[int, np.ndarray], sym: EigenSymbol, n: int, j: int = 0, i: int = 0, strict: bool = False) -> ThetaElement:
    """Theta_{n,j}(f, omega^i) from the level-(n+1) raw values.

    The binomial coefficient C(k-2, j) is divided out; if p divides it the
    result carries a denominator (``integral`` False), or NonIntegral is
    raised when ``strict``.
    """
    emb = sym.embedding
    if emb is None:
        raise ValueError("normalize the symbol at a prime first")
    p = emb.p
    M = emb.factor.prec
    mod = p**M
    k = sym.weight
    if not 0 <= j <= k - 2:
        raise ValueError("j out of range")
    if not 0 <= i <= p - 2:
        raise ValueError("i out of range")
    level = n + 1
    big = p**level
    size = p**n
    d = sym.degree
    logs = discrete_log_table(p, level)
    binom = comb(k - 2, j)
    t = ord_p(binom, p)
    if t and strict:
        raise NonIntegral(f"p divides the binomial coefficient C({k - 2}, {j})")
    unit_inv = pow(binom // p**t, -1, mod)
    group = [[0] * d for _ in range(size)]
    for a, val in raw.items():
        if a % p == 0:
            continue
        tw = teichmuller_int(a, p, M + 2)
        chi = pow(tw, (i - j) % (p - 1), mod)
        m = logs[a * pow(tw, -1, big) % big]
        vec = val[j]
        row = group[m]
        for s in range(d):
            x = int(vec[s])
            if x:
                row[s] = (row[s] + chi * x) % mod
    # gamma^m -> (1 + X)^m, one theta-component at a time
    xcoeffs = [group_to_x([group[m][s] for m in range(size)], p, n) for s in range(d)]
    scale = local_scale(sym)
    fld = emb.factor
    coeffs = []
    for idx in range(size):
        vec = [xcoeffs[s][idx] * unit_inv % mod for s in range(d)]
        if any(vec):
            coeffs.append(emb.embed(vec) * scale)
        else:
            coeffs.append(fld.zero())
    body = GroupRingPoly(fld, n, coeffs, t)
    meta = {
        "normalization": dict(sym.normalization),
        "generator": f"gamma -> {1 + p}",
        "binomial_removed": True,
        "field": emb.describe(),
    }
    return ThetaElement(sym.label, p, n, i, j, sym.sign, body, t == 0, meta)


def theta(sym: EigenSymbol, n: int, j: int = 0, i: int = 0) -> ThetaElement:
    """Convenience wrapper: raw values at level n + 1 followed by projection."""
    p = sym.embedding.p
    return project_theta(theta_raw(sym, p, n + 1), sym, n, j, i)


@dataclass
class StabilizedTheta:
    """Theta_{n,j}(f, Upsilon, omega^i) over K' = K(alpha, beta)."""

    base: ThetaElement
    upsilon: LocalElem
    body: GroupRingPoly
    which: str = "alpha"

    def to_json(self) -> dict:
        return {"base": self.base.to_json(), "upsilon": self.upsilon.to_json(), "which": self.which, "body": self.body.to_json()}


def lift_poly(F: GroupRingPoly, target: LocalFieldSpec) -> GroupRingPoly:
    """View an element over Q_p (or over ``target`` already) as one over ``target``."""
    if F.field == target:
        return F
    if F.field.degree != 1:
        raise ValueError("only Q_p coefficients can be lifted")
    out = []
    for c in F.coeffs:
        if c.exact_zero:
            out.append(target.zero())
        else:
            val = c.coeffs[0] if F.field.g == (0, 1) else c.coeffs[0]
            out.append(target.element([val], c.shift, min(c.prec, target.prec)))
    return GroupRingPoly(target, F.n, out, F.denom_exp)


def stabilize(theta_n: GroupRingPoly, theta_prev: GroupRingPoly, upsilon: LocalElem, eps_p: LocalElem, k: int) -> GroupRingPoly:
    """Upsilon^-(n+1) Theta_n - eps(p) p^(k-2) Upsilon^-(n+2) nu(Theta_{n-1})."""
    fld = upsilon.field
    n = theta_n.n
    if theta_prev.n != n - 1:
        raise ValueError("levels must be consecutive")
    a = lift_poly(theta_n, fld)
    b = lift_poly(theta_prev, fld).norm_up()
    eps = eps_p if eps_p.field == fld else fld.from_int(_as_int(eps_p))
    try:
        inv = upsilon.inverse()
    except PrecisionExhausted:
        raise
    c1 = inv ** (n + 1)
    c2 = eps * fld.one().shifted(k - 2) * inv ** (n + 2)
    return a.scale(c1) - b.scale(c2)


def _as_int(x: LocalElem) -> int:
    if x.exact_zero:
        return 0
    return x.coeffs[0] * x.p**x.shift


def theta_series(sym: EigenSymbol, nmax: int, j: int = 0, i: int = 0) -> list[ThetaElement]:
    return [theta(sym, n, j, i) for n in range(nmax + 1)]
