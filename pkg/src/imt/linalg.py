"""Exact linear algebra helpers on top of python-flint.

Subspaces are stored as matrices whose columns form a basis.  Every routine
here is exact; nothing is ever rounded.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import flint


def qmat(rows: Sequence[Sequence]) -> flint.fmpq_mat:
    rows = [list(r) for r in rows]
    nr = len(rows)
    nc = len(rows[0]) if nr else 0
    flat = []
    for r in rows:
        for x in r:
            if isinstance(x, Fraction):
                flat.append(flint.fmpq(x.numerator, x.denominator))
            else:
                flat.append(x)
    return flint.fmpq_mat(nr, nc, flat)


def identity(n: int) -> flint.fmpq_mat:
    m = flint.fmpq_mat(n, n)
    for i in range(n):
        m[i, i] = 1
    return m


def to_fmpq(m: flint.fmpz_mat) -> flint.fmpq_mat:
    return flint.fmpq_mat(m)


def kernel(a: flint.fmpq_mat) -> flint.fmpq_mat:
    """Columns spanning the right kernel of ``a``."""
    n = a.ncols()
    if a.nrows() == 0:
        return identity(n)
    num, _den = a.numer_denom()
    ns, nullity = num.nullspace()
    out = flint.fmpq_mat(n, nullity)
    for j in range(nullity):
        for i in range(n):
            out[i, j] = ns[i, j]
    return echelon_columns(out)


def echelon_columns(w: flint.fmpq_mat) -> flint.fmpq_mat:
    """Canonical basis of the column span: reduced echelon form, transposed."""
    if w.ncols() == 0:
        return w
    r, rank = w.transpose().rref()
    out = flint.fmpq_mat(w.nrows(), rank)
    for j in range(rank):
        for i in range(w.nrows()):
            out[i, j] = r[j, i]
    return out


def pivot_rows(w: flint.fmpq_mat) -> list[int]:
    """Row indices ``P`` such that the square block ``w[P, :]`` is invertible."""
    r, rank = w.transpose().rref()
    piv = []
    for j in range(rank):
        for i in range(w.nrows()):
            if r[j, i] != 0:
                piv.append(i)
                break
    return piv


def submatrix_rows(w: flint.fmpq_mat, rows: Sequence[int]) -> flint.fmpq_mat:
    out = flint.fmpq_mat(len(rows), w.ncols())
    for a, i in enumerate(rows):
        for j in range(w.ncols()):
            out[a, j] = w[i, j]
    return out


def coordinates(basis: flint.fmpq_mat, vecs: flint.fmpq_mat, check: bool = True) -> flint.fmpq_mat:
    """Solve ``basis @ X = vecs`` for X; ``vecs`` must lie in the column span."""
    piv = pivot_rows(basis)
    sq = submatrix_rows(basis, piv)
    rhs = submatrix_rows(vecs, piv)
    x = sq.solve(rhs)
    if check and basis * x != vecs:
        raise ValueError("vectors do not lie in the span of the basis")
    return x


def restrict(op: flint.fmpq_mat, w: flint.fmpq_mat) -> flint.fmpq_mat:
    """Matrix of ``op`` on the invariant subspace spanned by the columns of ``w``."""
    return coordinates(w, op * w)


def poly_at_matrix(coeffs: Sequence, a: flint.fmpq_mat) -> flint.fmpq_mat:
    """Evaluate the polynomial with ascending ``coeffs`` at the square matrix ``a``."""
    n = a.nrows()
    acc = flint.fmpq_mat(n, n)
    for c in reversed(list(coeffs)):
        acc = acc * a
        for i in range(n):
            acc[i, i] += c
    return acc


def hstack(mats: Sequence[flint.fmpq_mat]) -> flint.fmpq_mat:
    mats = [m for m in mats if m.ncols() > 0]
    if not mats:
        raise ValueError("nothing to stack")
    n = mats[0].nrows()
    out = flint.fmpq_mat(n, sum(m.ncols() for m in mats))
    off = 0
    for m in mats:
        for i in range(n):
            for j in range(m.ncols()):
                out[i, off + j] = m[i, j]
        off += m.ncols()
    return out


def intersect(u: flint.fmpq_mat, v: flint.fmpq_mat) -> flint.fmpq_mat:
    """Basis of the intersection of two column spans."""
    if u.ncols() == 0 or v.ncols() == 0:
        return flint.fmpq_mat(u.nrows(), 0)
    n = u.nrows()
    big = hstack([u, -v])
    ker = kernel(big)
    part = flint.fmpq_mat(u.ncols(), ker.ncols())
    for i in range(u.ncols()):
        for j in range(ker.ncols()):
            part[i, j] = ker[i, j]
    res = u * part
    if res.ncols() == 0:
        return flint.fmpq_mat(n, 0)
    return echelon_columns(res)


def column(m: flint.fmpq_mat, j: int) -> list[flint.fmpq]:
    return [m[i, j] for i in range(m.nrows())]


def clear_denominators(vec: Sequence) -> list[int]:
    """Scale a rational vector to a primitive integer vector."""
    fr = [Fraction(int(x.p), int(x.q)) if isinstance(x, flint.fmpq) else Fraction(x) for x in vec]
    from math import gcd, lcm

    den = 1
    for x in fr:
        den = lcm(den, x.denominator)
    ints = [int(x * den) for x in fr]
    g = 0
    for x in ints:
        g = gcd(g, x)
    if g > 1:
        ints = [x // g for x in ints]
    return ints
