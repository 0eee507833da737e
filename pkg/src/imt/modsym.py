"""Weight-k modular symbols for Gamma_0(N) with a rational character and for
Gamma_1(N).

A symbol phi in Hom_Gamma(Delta^0, V_{k-2}) is stored through the function
``psi(g) = phi(g({oo} - {0})) | g`` on the cosets Gamma \\ SL_2(Z).  The cosets
are indexed by bottom rows (c : d) modulo N, so ``psi`` is the list of values
of phi on the Manin symbols (c : d) (x) X^j Y^(k-2-j).  The two- and
three-term Manin relations and the character rule become a homogeneous
linear system; its kernel is the symbol space.

Polynomials P = sum_j b_j X^j Y^(k-2-j) are coefficient vectors indexed by
the X-degree j, and the right action is P|g = P(dX - cY, -bX + aY).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, gcd
from typing import Sequence

import flint
import numpy as np

from . import linalg
from .errors import EigenSplitFailed, SchemaMismatch, TooLarge, ZeroReduction

Mat = tuple[int, int, int, int]

SIGMA: Mat = (0, -1, 1, 0)
TAU: Mat = (0, -1, 1, -1)
TAU2: Mat = (-1, 1, -1, 0)
IOTA: Mat = (-1, 0, 0, 1)

MAX_LEVEL = 64
MAX_WEIGHT = 52
MAX_UNKNOWNS = 6000


def mat_mul(x: Mat, y: Mat) -> Mat:
    a, b, c, d = x
    e, f, g, h = y
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def mat_adj(x: Mat) -> Mat:
    """Adjugate; equals the inverse for determinant one."""
    a, b, c, d = x
    return (d, -b, -c, a)


def _expand(x: int, y: int, e: int) -> list[int]:
    """Coefficients of (xX + yY)^e indexed by the power of X."""
    return [comb(e, s) * x**s * y ** (e - s) for s in range(e + 1)]


@lru_cache(maxsize=200_000)
def act_matrix(g: Mat, k: int) -> tuple[tuple[int, ...], ...]:
    """Matrix A with (P|g) = b @ A for the row vector b of coefficients of P.

    Row j holds the coefficients of (dX - cY)^j (-bX + aY)^(k-2-j).
    """
    a, b, c, d = g
    w = k - 2
    rows = []
    for j in range(w + 1):
        left = _expand(d, -c, j)
        right = _expand(-b, a, w - j)
        row = [0] * (w + 1)
        for s, u in enumerate(left):
            if u:
                for t, v in enumerate(right):
                    row[s + t] += u * v
        rows.append(tuple(row))
    return tuple(rows)


def act(poly: Sequence[int], g: Mat, k: int) -> list[int]:
    """Right action of an integer matrix on a coefficient vector."""
    a = act_matrix(g, k)
    n = k - 1
    return [sum(poly[j] * a[j][m] for j in range(n)) for m in range(n)]


def kronecker(d: int, n: int) -> int:
    """Kronecker symbol (d / n) for n >= 1."""
    if n <= 0:
        raise ValueError("n must be positive")
    result = 1
    while n % 2 == 0:
        n //= 2
        if d % 2 == 0:
            return 0
        if d % 8 in (3, 5):
            result = -result
    if n == 1:
        return result
    # Jacobi symbol for odd n
    a = d % n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


@dataclass(frozen=True)
class Character:
    """A Dirichlet character modulo N with values in {0, +1, -1}.

    ``disc`` is 1 for the trivial character, otherwise a fundamental
    discriminant D with |D| dividing N and the character is d -> (D / d).
    """

    modulus: int
    disc: int = 1

    def __post_init__(self):
        if self.disc != 1 and self.modulus % abs(self.disc):
            raise ValueError(f"conductor {abs(self.disc)} does not divide {self.modulus}")

    def __call__(self, d: int) -> int:
        d %= self.modulus
        if gcd(d, self.modulus) != 1:
            return 0
        if self.disc == 1:
            return 1
        return kronecker(self.disc, d if d > 0 else d + self.modulus)

    @property
    def is_trivial(self) -> bool:
        return self.disc == 1

    def parity(self) -> int:
        return self(-1) if self.modulus > 2 else 1


def lift_to_sl2(c: int, d: int, n: int) -> Mat:
    """A matrix in SL_2(Z) whose bottom row is congruent to (c, d) mod n."""
    c %= n
    d %= n
    if n == 1:
        return (1, 0, 0, 1)
    for dc in range(0, 50 * n, n):
        cc = c + dc
        for dd in range(0, 50 * n, n):
            dd2 = d + dd
            if gcd(cc, dd2) == 1:
                g, x, y = _egcd(dd2, cc)
                # x*dd2 + y*cc = 1, need a*dd2 - b*cc = 1
                return (x, -y, cc, dd2)
    raise ValueError(f"cannot lift ({c}, {d}) mod {n}")


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def manin_paths(num: int, den: int) -> list[Mat]:
    """Matrices g_i in SL_2(Z) with {oo} - {num/den} = sum_i g_i({oo} - {0})."""
    if den == 0:
        return []
    if den < 0:
        num, den = -num, -den
    g0 = gcd(num, den)
    num //= g0
    den //= g0
    # continued fraction convergents p_i/q_i
    p_prev2, q_prev2 = 0, 1
    p_prev, q_prev = 1, 0
    out = []
    a, b = num, den
    i = 0
    while b:
        q, r = divmod(a, b)
        p_cur = q * p_prev + p_prev2
        q_cur = q * q_prev + q_prev2
        s = 1 if i % 2 == 0 else -1
        out.append((p_prev, s * p_cur, q_prev, s * q_cur))
        p_prev2, q_prev2, p_prev, q_prev = p_prev, q_prev, p_cur, q_cur
        a, b = b, r
        i += 1
    return out


class _Cosets:
    """Coset bookkeeping: bottom rows mod N, reduced by the character rule."""

    def __init__(self, level: int, flavor: str, char: Character | None):
        self.level = level
        self.flavor = flavor
        self.char = char
        n = level
        pairs = [(c, d) for c in range(n) for d in range(n) if gcd(gcd(c, d), n) == 1]
        self.lookup: dict[tuple[int, int], tuple[int, int]] = {}
        self.reps: list[tuple[int, int]] = []
        self.killed: set[int] = set()
        if flavor == "gamma1":
            for pr in pairs:
                self.lookup[pr] = (len(self.reps), 1)
                self.reps.append(pr)
            return
        units = [u for u in range(1, n + 1) if gcd(u, n) == 1]
        for pr in pairs:
            if pr in self.lookup:
                continue
            idx = len(self.reps)
            self.reps.append(pr)
            for u in units:
                q = ((u * pr[0]) % n, (u * pr[1]) % n)
                val = char(u) if char is not None else 1
                if q in self.lookup:
                    if self.lookup[q] != (idx, val):
                        self.killed.add(idx)
                else:
                    self.lookup[q] = (idx, val)

    def __len__(self) -> int:
        return len(self.reps)

    def find(self, c: int, d: int) -> tuple[int, int]:
        n = self.level
        return self.lookup[(c % n, d % n)]


class ModSymSpace:
    """The full space Hom_Gamma(Delta^0, V_{k-2}) for one group and character.

    Attributes
    ----------
    basis : fmpq_mat
        Columns span the solutions of the Manin relations inside the space of
        all coset-indexed value vectors (dimension ``len(cosets) * (k - 1)``).
    """

    def __init__(self, level: int, weight: int, flavor: str = "gamma0", character: Character | None = None):
        if level < 1 or weight < 2:
            raise ValueError("need level >= 1 and weight >= 2")
        if level > MAX_LEVEL or weight > MAX_WEIGHT:
            raise TooLarge(f"level {level} or weight {weight} beyond desk-scale bounds")
        if flavor not in ("gamma0", "gamma1"):
            raise ValueError(f"unknown flavor {flavor!r}")
        if flavor == "gamma0" and character is None:
            character = Character(level)
        if flavor == "gamma1":
            character = None
        self.level = level
        self.weight = weight
        self.flavor = flavor
        self.character = character
        self.cosets = _Cosets(level, flavor, character)
        self.n = weight - 1
        self.size = len(self.cosets) * self.n
        if self.size > MAX_UNKNOWNS:
            raise TooLarge(f"{self.size} unknowns exceed the bound {MAX_UNKNOWNS}")
        self._reps_sl2 = [lift_to_sl2(c, d, level) for c, d in self.cosets.reps]
        self.basis = self._solve_relations()
        self._pivots = linalg.pivot_rows(self.basis) if self.basis.ncols() else []
        self._hecke_cache: dict[int, flint.fmpq_mat] = {}
        self._star: flint.fmpq_mat | None = None
        self._cusp: flint.fmpq_mat | None = None

    # -- construction -------------------------------------------------
    def __repr__(self) -> str:
        ch = "" if self.character is None or self.character.is_trivial else f", chi_{self.character.disc}"
        return f"ModSymSpace(N={self.level}, k={self.weight}, {self.flavor}{ch}, dim={self.dimension})"

    @property
    def dimension(self) -> int:
        return self.basis.ncols()

    def _solve_relations(self) -> flint.fmpq_mat:
        n = self.n
        k = self.weight
        rows: list[dict[int, int]] = []
        a_sigma = act_matrix(SIGMA, k)
        a_tau = act_matrix(TAU, k)
        a_tau2 = act_matrix(TAU2, k)
        for i, (c, d) in enumerate(self.cosets.reps):
            if i in self.cosets.killed:
                for m in range(n):
                    rows.append({i * n + m: 1})
                continue
            i1, s1 = self.cosets.find(d, -c)
            for m in range(n):
                row: dict[int, int] = {}
                for j in range(n):
                    if a_sigma[j][m]:
                        row[i * n + j] = row.get(i * n + j, 0) + a_sigma[j][m]
                row[i1 * n + m] = row.get(i1 * n + m, 0) + s1
                rows.append(row)
            it, st = self.cosets.find(d, -c - d)
            iu, su = self.cosets.find(-c - d, c)
            for m in range(n):
                row = {i * n + m: 1}
                for j in range(n):
                    if a_tau2[j][m]:
                        key = it * n + j
                        row[key] = row.get(key, 0) + st * a_tau2[j][m]
                    if a_tau[j][m]:
                        key = iu * n + j
                        row[key] = row.get(key, 0) + su * a_tau[j][m]
                rows.append(row)
        mat = flint.fmpz_mat(len(rows), self.size)
        for r, row in enumerate(rows):
            for col, v in row.items():
                if v:
                    mat[r, col] = v
        ns, nullity = mat.nullspace()
        out = flint.fmpq_mat(self.size, nullity)
        for j in range(nullity):
            for i in range(self.size):
                out[i, j] = ns[i, j]
        return linalg.echelon_columns(out)

    # -- evaluation of symbols given by full value vectors ---------------
    def path_terms(self, num: int, den: int) -> list[tuple[int, int, Mat]]:
        """Terms (coset index, scalar, matrix h) with phi({oo} - {num/den}) = sum scalar * psi[idx] | h."""
        out = []
        for g in manin_paths(num, den):
            idx, s = self.cosets.find(g[2], g[3])
            if idx in self.cosets.killed:
                continue
            out.append((idx, s, mat_adj(g)))
        return out

    def _operator_from_terms(self, terms: dict[tuple[int, int], list[list[int]]]) -> flint.fmpq_mat:
        """Assemble the column operator on the unknown space and restrict to the basis."""
        n = self.n
        big = flint.fmpz_mat(self.size, self.size)
        for (tgt, src), block in terms.items():
            for j in range(n):
                for m in range(n):
                    v = block[j][m]
                    if v:
                        # row-vector rule: psi'[tgt][m] += psi[src][j] * block[j][m]
                        big[tgt * n + m, src * n + j] += v
        image = flint.fmpq_mat(big) * self.basis
        return linalg.coordinates(self.basis, image)

    def _accumulate(self, terms, tgt: int, src: int, scalar: int, h: Mat) -> None:
        a = act_matrix(h, self.weight)
        n = self.n
        block = terms.setdefault((tgt, src), [[0] * n for _ in range(n)])
        for j in range(n):
            rj = a[j]
            bj = block[j]
            for m in range(n):
                if rj[m]:
                    bj[m] += scalar * rj[m]

    def hecke_coset_reps(self, ell: int) -> list[Mat]:
        reps = [(1, a, 0, ell) for a in range(ell)]
        if self.level % ell:
            _, x, y = _egcd(ell, self.level)
            # x*ell + y*N = 1, so [[x, -y], [N, ell]] has determinant one
            gam = (x, -y, self.level, ell)
            reps.append(mat_mul(gam, (ell, 0, 0, 1)))
        return reps

    def hecke(self, ell: int) -> flint.fmpq_mat:
        """Matrix of T_ell (U_ell when ell divides N) on ``basis`` coordinates."""
        if ell in self._hecke_cache:
            return self._hecke_cache[ell]
        if not flint.fmpz(ell).is_prime():
            raise ValueError("ell must be prime")
        terms: dict = {}
        reps = self.hecke_coset_reps(ell)
        for i, g in enumerate(self._reps_sl2):
            if i in self.cosets.killed:
                continue
            for delta in reps:
                m = mat_mul(delta, g)
                a, b, c, d = m
                for idx, s, h in self.path_terms(b, d):
                    self._accumulate(terms, i, idx, s, mat_mul(h, m))
                for idx, s, h in self.path_terms(a, c):
                    self._accumulate(terms, i, idx, -s, mat_mul(h, m))
        op = self._operator_from_terms(terms)
        self._hecke_cache[ell] = op
        return op

    def star(self) -> flint.fmpq_mat:
        """Matrix of the involution phi -> phi | diag(-1, 1)."""
        if self._star is None:
            terms: dict = {}
            for i, (c, d) in enumerate(self.cosets.reps):
                if i in self.cosets.killed:
                    continue
                idx, s = self.cosets.find(-c, d)
                self._accumulate(terms, i, idx, s, IOTA)
            self._star = self._operator_from_terms(terms)
        return self._star

    def diamond(self, e: int) -> flint.fmpq_mat:
        """Diamond operator <e> for a unit e mod N."""
        if gcd(e, self.level) != 1:
            raise ValueError("e must be a unit mod N")
        terms: dict = {}
        for i, (c, d) in enumerate(self.cosets.reps):
            if i in self.cosets.killed:
                continue
            idx, s = self.cosets.find(e * c, e * d)
            self._accumulate(terms, i, idx, s, (1, 0, 0, 1))
        return self._operator_from_terms(terms)

    # -- subspaces -------------------------------------------------------
    def good_primes(self, count: int, start: int = 2) -> list[int]:
        out = []
        q = start
        while len(out) < count:
            if flint.fmpz(q).is_prime() and self.level % q:
                out.append(q)
            q += 1
        return out

    def auxiliary_prime(self) -> int:
        """Smallest good prime whose Eisenstein eigenvalues beat the Ramanujan bound."""
        k = self.weight
        for q in self.good_primes(30):
            if q ** (k - 1) - 1 > 2 * q ** ((k - 1) / 2) * 1.0001 + 1e-9:
                return q
        raise RuntimeError("no auxiliary prime found")

    def cuspidal_subspace(self) -> flint.fmpq_mat:
        """Hecke-stable complement of the boundary symbols.

        Eisenstein eigenvalues at the auxiliary prime q have absolute value at
        least q^(k-1) - 1, cuspidal ones at most 2 q^((k-1)/2); the factors of
        the characteristic polynomial are sorted by that test.
        """
        if self._cusp is not None:
            return self._cusp
        d = self.dimension
        if d == 0:
            self._cusp = flint.fmpq_mat(0, 0)
            return self._cusp
        q = self.auxiliary_prime()
        t = self.hecke(q)
        bound = 2 * q ** ((self.weight - 1) / 2)
        lower = q ** (self.weight - 1) - 1
        cut = (bound + lower) / 2
        cusp_poly = flint.fmpq_poly([1])
        for fac, mult in t.charpoly().factor()[1]:
            num = _to_fmpz_poly(fac)
            roots = num.complex_roots()
            mags = [abs(complex(r.real.mid(), r.imag.mid())) for r, _m in roots]
            if max(mags) < cut:
                cusp_poly *= fac**mult
        mat = linalg.poly_at_matrix([cusp_poly[i] for i in range(cusp_poly.degree() + 1)], t)
        self._cusp = linalg.kernel(mat)
        return self._cusp

    def sign_subspace(self, sign: int, within: flint.fmpq_mat | None = None) -> flint.fmpq_mat:
        w = self.cuspidal_subspace() if within is None else within
        if w.ncols() == 0:
            return w
        st = linalg.restrict(self.star(), w)
        ker = linalg.kernel(st - sign * linalg.identity(st.nrows()))
        return linalg.echelon_columns(w * ker) if ker.ncols() else flint.fmpq_mat(w.nrows(), 0)

    def values(self, coords: Sequence) -> np.ndarray:
        """Full coset-value table (cosets x (k-1)) of the symbol with these basis coordinates."""
        vec = flint.fmpq_mat(len(coords), 1, [flint.fmpq(c) if not isinstance(c, flint.fmpq) else c for c in coords])
        full = self.basis * vec
        out = np.empty((len(self.cosets), self.n), dtype=object)
        for i in range(len(self.cosets)):
            for m in range(self.n):
                x = full[i * self.n + m, 0]
                out[i, m] = Fraction(int(x.p), int(x.q))
        return out


def _to_fmpz_poly(f: flint.fmpq_poly) -> flint.fmpz_poly:
    den = f.denom()
    return flint.fmpz_poly([int(c * den) for c in f.coeffs()])


@lru_cache(maxsize=64)
def build_space(level: int, weight: int, flavor: str = "gamma0", disc: int = 1) -> ModSymSpace:
    """Build (and memoize) the symbol space for Gamma_0(N) with character (disc / .) or Gamma_1(N)."""
    char = None if flavor == "gamma1" else Character(level, disc)
    return ModSymSpace(level, weight, flavor, char)


# ---------------------------------------------------------------------------
# Hecke fields and eigen symbols


@dataclass
class NumberField:
    """Q[x]/(m) with m monic irreducible over Q; elements are coefficient tuples."""

    minpoly: tuple[int, ...]  # ascending, monic

    @property
    def degree(self) -> int:
        return len(self.minpoly) - 1

    def reduce(self, coeffs: Sequence) -> tuple[Fraction, ...]:
        c = [Fraction(x) for x in coeffs]
        d = self.degree
        m = self.minpoly
        while len(c) > d:
            top = c.pop()
            if top:
                for i in range(d):
                    c[len(c) - d + i] -= top * m[i]
        c += [Fraction(0)] * (d - len(c))
        return tuple(c)

    def mul(self, x: Sequence, y: Sequence) -> tuple[Fraction, ...]:
        out = [Fraction(0)] * (len(x) + len(y) - 1)
        for i, a in enumerate(x):
            if a:
                for j, b in enumerate(y):
                    out[i + j] += a * b
        return self.reduce(out)

    def trace(self, x: Sequence) -> Fraction:
        """Absolute trace, via the power sums of the roots of m."""
        d = self.degree
        # Newton identities for power sums of roots of monic m
        e = [Fraction(self.minpoly[d - i]) * (-1) ** i for i in range(d + 1)]
        power = [Fraction(d)]
        for i in range(1, d):
            s = Fraction(0)
            for j in range(1, i):
                s += (-1) ** (j - 1) * e[j] * power[i - j]
            s += (-1) ** (i - 1) * i * e[i]
            power.append(s)
        return sum(Fraction(x[i]) * power[i] for i in range(d))


@dataclass
class EigenSymbol:
    """A Hecke eigensymbol with values in a Hecke field.

    ``values`` has shape (cosets, k-1, d) of Python ints: entry [i, j, t] is
    the coefficient of theta^t in the X^j Y^(k-2-j) coefficient of psi on the
    i-th coset, where theta generates the Hecke field ``field``.
    """

    space: ModSymSpace
    sign: int
    field: NumberField
    generator_op: str
    eigenvalues: dict[int, tuple[Fraction, ...]]
    values: np.ndarray
    label: str | None = None
    normalization: dict = field(default_factory=dict)
    embedding: object = None

    @property
    def weight(self) -> int:
        return self.space.weight

    @property
    def level(self) -> int:
        return self.space.level

    @property
    def degree(self) -> int:
        return self.field.degree

    def character_value(self, ell: int) -> int:
        ch = self.space.character
        if ch is None:
            raise ValueError("Gamma_1 symbols carry the character in the Hecke field")
        return ch(ell)

    def scaled(self, num: int, den: int = 1) -> "EigenSymbol":
        vals = self.values * num
        if den != 1:
            if any(int(v) % den for v in vals.flat):
                raise ValueError("scaling would leave non-integral coordinates")
            vals = vals // den
        return EigenSymbol(self.space, self.sign, self.field, self.generator_op, self.eigenvalues, vals, self.label, dict(self.normalization), self.embedding)

    def eval_infinity(self, num: int, den: int) -> np.ndarray:
        """phi({oo} - {num/den}) as an array of shape (k-1, d)."""
        k = self.weight
        out = np.zeros(self.values.shape[1:], dtype=object)
        for idx, s, h in self.space.path_terms(num, den):
            a = np.array(act_matrix(h, k), dtype=object)
            out += s * (a.T @ self.values[idx])
        return out

    def evaluate(self, r: tuple[int, int], s: tuple[int, int]) -> np.ndarray:
        """phi({r} - {s}) for cusps given as (numerator, denominator); (1, 0) is oo."""
        return self.eval_infinity(*s) - self.eval_infinity(*r)


def evaluate(sym: EigenSymbol, r, s) -> np.ndarray:
    """Value of ``sym`` on the divisor {r} - {s}; cusps are Fractions, ints or ``None`` for oo."""
    return sym.evaluate(_cusp(r), _cusp(s))


def _cusp(x) -> tuple[int, int]:
    if x is None or x == "oo":
        return (1, 0)
    if isinstance(x, tuple):
        return x
    fr = Fraction(x)
    return (fr.numerator, fr.denominator)


def _combination_operator(space: ModSymSpace, within: flint.fmpq_mat, primes: Sequence[int], seed: int):
    rng = random.Random(seed)
    coeffs = {q: rng.randint(1, 7) for q in primes}
    t = None
    for q in primes:
        part = linalg.restrict(space.hecke(q), within) * coeffs[q]
        t = part if t is None else t + part
    return t, coeffs


def _squarefree_irreducible(poly: flint.fmpq_poly) -> bool:
    facs = poly.factor()[1]
    return len(facs) == 1 and facs[0][1] == 1


def newform_orbits(space: ModSymSpace, sign: int, nprimes: int = 8):
    """Split the cuspidal sign subspace into Galois orbits of multiplicity one.

    Pieces are refined by the primary decomposition under T_q for the first
    ``nprimes`` good primes in turn.  A piece is a single orbit once some T_q
    has squarefree irreducible characteristic polynomial on it; pieces where
    every T_q has a repeated factor carry an eigensystem more than once (old
    forms) and are dropped.  Returns (subspace, defining factor) pairs.
    """
    ws = space.sign_subspace(sign)
    if ws.ncols() == 0:
        return []
    pieces = [ws]
    done = []
    for q in space.good_primes(nprimes):
        nxt = []
        for w in pieces:
            t = linalg.restrict(space.hecke(q), w)
            facs = t.charpoly().factor()[1]
            for fac, mult in facs:
                coeffs = [fac[i] for i in range(fac.degree() + 1)]
                g = linalg.poly_at_matrix(coeffs, t)
                gm = g
                for _ in range(mult - 1):
                    gm = gm * g
                sub = linalg.echelon_columns(w * linalg.kernel(gm)) if len(facs) > 1 else w
                if mult == 1:
                    done.append((sub, fac))
                else:
                    nxt.append(sub)
        pieces = nxt
        if not pieces:
            break
    done.sort(key=lambda o: (o[0].ncols(), _orbit_sort_key(space, o[0])))
    return done


def _orbit_sort_key(space: ModSymSpace, w: flint.fmpq_mat) -> tuple:
    out = []
    for q in space.good_primes(3):
        tr = linalg.restrict(space.hecke(q), w)
        s = sum((tr[i, i] for i in range(tr.nrows())), flint.fmpq(0))
        out.append(Fraction(int(s.p), int(s.q)))
    return tuple(out)


def eigensymbol_from_orbit(space: ModSymSpace, sign: int, w: flint.fmpq_mat, check_primes: int = 6, label: str | None = None) -> EigenSymbol:
    """Eigenvector over the Hecke field for the orbit spanned by the columns of ``w``."""
    d = w.ncols()
    gen_op = None
    tw = None
    for q in space.good_primes(8):
        cand = linalg.restrict(space.hecke(q), w)
        if _squarefree_irreducible(cand.charpoly()):
            gen_op, tw = f"T{q}", cand
            break
    if tw is None:
        primes = space.good_primes(4)
        tw, coeffs = _combination_operator(space, w, primes, 20240607)
        if not _squarefree_irreducible(tw.charpoly()):
            raise EigenSplitFailed("no Hecke operator generates the eigenvalue field")
        gen_op = "+".join(f"{c}*T{q}" for q, c in coeffs.items())
    cp = tw.charpoly()
    m = [cp[i] for i in range(d + 1)]
    if m[d] != 1:
        raise EigenSplitFailed("characteristic polynomial not monic")
    if any(c.q != 1 for c in m):
        raise EigenSplitFailed("generator eigenvalue is not integral")
    field_ = NumberField(tuple(int(c.p) for c in m))
    # cyclic vector w0 and Krylov basis
    e0 = None
    for j in range(d):
        v = flint.fmpq_mat(d, 1)
        v[j, 0] = 1
        kry = [v]
        for _ in range(d - 1):
            kry.append(tw * kry[-1])
        km = linalg.hstack(kry)
        if km.rank() == d:
            e0 = kry
            break
    if e0 is None:
        raise EigenSplitFailed("no cyclic vector")
    # b(x) = m(x) / (x - theta), coefficients in Q(theta) as theta-polynomials
    b = [None] * d
    b[d - 1] = [Fraction(1)]
    for i in range(d - 1, 0, -1):
        # b_{i-1} = m_i + theta * b_i
        nxt = [Fraction(0)] + b[i]
        nxt[0] += Fraction(int(m[i].p), int(m[i].q))
        b[i - 1] = nxt
    # eigenvector coordinates (in w-coordinates) for each theta power
    coords = [[Fraction(0)] * d for _ in range(d)]  # coords[t][row]
    for i in range(d):
        vec = e0[i]
        for t, coef in enumerate(b[i]):
            if coef:
                for r in range(d):
                    x = vec[r, 0]
                    coords[t][r] += coef * Fraction(int(x.p), int(x.q))
    # reduce theta-powers >= d using m (only arises if d == 1 edge) -- b has degree <= d-1 in theta
    full_cols = []
    for t in range(d):
        colv = flint.fmpq_mat(d, 1, [flint.fmpq(x.numerator, x.denominator) for x in coords[t]])
        full_cols.append(w * colv)
    # values table: cosets x (k-1) x d, scaled to integers
    nc = len(space.cosets)
    n = space.n
    fracs = np.empty((nc, n, d), dtype=object)
    for t in range(d):
        vals = space.basis * full_cols[t]
        for i in range(nc):
            for jj in range(n):
                x = vals[i * n + jj, 0]
                fracs[i, jj, t] = Fraction(int(x.p), int(x.q))
    ints = _primitive_integer_array(fracs)
    sym = EigenSymbol(space, sign, field_, gen_op, {}, ints, label)
    sym.eigenvalues = _eigenvalues(space, sym, w, full_cols, space.good_primes(check_primes) + _bad_primes(space))
    return sym


def _bad_primes(space: ModSymSpace) -> list[int]:
    return [q for q in range(2, space.level + 1) if space.level % q == 0 and flint.fmpz(q).is_prime()]


def _primitive_integer_array(fracs: np.ndarray) -> np.ndarray:
    from math import lcm

    den = 1
    for x in fracs.flat:
        den = lcm(den, x.denominator)
    out = np.empty(fracs.shape, dtype=object)
    g = 0
    for idx, x in np.ndenumerate(fracs):
        v = int(x * den)
        out[idx] = v
        g = gcd(g, v)
    if g > 1:
        for idx, v in np.ndenumerate(out):
            out[idx] = v // g
    return out


def _eigenvalues(space, sym, w, full_cols, primes) -> dict[int, tuple[Fraction, ...]]:
    """Read off a_ell in the Hecke field by applying T_ell to the eigenvector."""
    d = sym.degree
    out = {}
    # pick a coordinate position (row of w-space) where the eigenvector is nonzero as an element of K
    for q in primes:
        tq = space.hecke(q)
        # eigenvector as d columns (theta-powers) in space-basis coordinates
        img = [tq * col for col in full_cols]
        a_q = _solve_scalar(sym.field, full_cols, img)
        out[q] = a_q
    return out


def _solve_scalar(fld: NumberField, vec: list, img: list) -> tuple[Fraction, ...]:
    """Find a in K with img = a * vec, where vectors are given theta-componentwise."""
    d = fld.degree
    nrows = vec[0].nrows()
    # find a row where vec is nonzero in K
    for r in range(nrows):
        v = [Fraction(int(vec[t][r, 0].p), int(vec[t][r, 0].q)) for t in range(d)]
        if any(v):
            u = [Fraction(int(img[t][r, 0].p), int(img[t][r, 0].q)) for t in range(d)]
            a = _field_div(fld, u, v)
            # verify on all rows
            for rr in range(nrows):
                vv = [Fraction(int(vec[t][rr, 0].p), int(vec[t][rr, 0].q)) for t in range(d)]
                uu = [Fraction(int(img[t][rr, 0].p), int(img[t][rr, 0].q)) for t in range(d)]
                if fld.mul(a, vv) != tuple(uu):
                    raise EigenSplitFailed("vector is not a Hecke eigenvector")
            return a
    raise EigenSplitFailed("zero eigenvector")


def _field_div(fld: NumberField, u: Sequence[Fraction], v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """u / v in Q[x]/(m) by solving the multiplication-by-v linear system."""
    d = fld.degree
    cols = []
    for i in range(d):
        basis_el = [Fraction(0)] * d
        basis_el[i] = Fraction(1)
        cols.append(fld.mul(v, basis_el))
    mat = linalg.qmat([[cols[j][i] for j in range(d)] for i in range(d)])
    rhs = linalg.qmat([[x] for x in u])
    sol = mat.solve(rhs)
    return tuple(Fraction(int(sol[i, 0].p), int(sol[i, 0].q)) for i in range(d))


def eigen_decompose(space: ModSymSpace, sign: int, label_hints: dict | None = None, max_degree: int = 12) -> list[EigenSymbol]:
    """Eigensymbols for every newform orbit of the given sign.

    ``label_hints`` maps labels to selectors understood by :func:`matches`;
    matching symbols get that label.
    """
    out = []
    for w, _fac in newform_orbits(space, sign):
        if w.ncols() > max_degree:
            raise EigenSplitFailed(f"orbit of degree {w.ncols()} exceeds the bound {max_degree}")
        sym = eigensymbol_from_orbit(space, sign, w)
        for label, sel in (label_hints or {}).items():
            if matches(sym, sel):
                sym.label = label
        out.append(sym)
    return out


def matches(sym: EigenSymbol, selector: dict) -> bool:
    """Whether ``sym`` fits a selector {"degree": d, "traces": {ell: trace}}."""
    if "degree" in selector and sym.degree != selector["degree"]:
        return False
    for ell, tr in selector.get("traces", {}).items():
        ell = int(ell)
        if ell not in sym.eigenvalues:
            return False
        if sym.field.trace(sym.eigenvalues[ell]) != Fraction(tr):
            return False
    return True


# ---------------------------------------------------------------------------
# local normalization and mod-p maps


def test_divisors(level: int, p: int) -> list[Mat]:
    """Lifts to SL_2(Z) of representatives of P^1(Z/(level p))."""
    big = level * p
    seen = set()
    out = []
    units = [u for u in range(1, big) if gcd(u, big) == 1] if big > 1 else [1]
    for c in range(big):
        for d in range(big):
            if gcd(gcd(c, d), big) != 1 or (c, d) in seen:
                continue
            for u in units:
                seen.add(((u * c) % big, (u * d) % big))
            out.append(lift_to_sl2(c, d, big))
    return out


def divisor_values(sym: EigenSymbol, p: int) -> list[np.ndarray]:
    """phi({g oo} - {g 0}) for g over the level-Np test set, shape (k-1, d) each."""
    out = []
    for a, b, c, d in test_divisors(sym.level, p):
        out.append(sym.eval_infinity(b, d) - sym.eval_infinity(a, c))
    return out


def _embed_array(emb, arr: np.ndarray) -> list:
    return [emb.embed([int(x) for x in arr[j]]) for j in range(arr.shape[0])]


def cohomological_normalize(sym: EigenSymbol, emb) -> EigenSymbol:
    """Scale ``sym`` at the prime of ``emb`` so that its values have norm one.

    The values stay in Z[theta]; the scaling exponent is recorded and applied
    after embedding (see :func:`local_scale`).
    """
    best = None
    for i in range(sym.values.shape[0]):
        for j in range(sym.values.shape[1]):
            vec = sym.values[i, j]
            if not any(vec):
                continue
            v = emb.embed([int(x) for x in vec]).valuation()
            best = v if best is None else min(best, v)
    if best is None:
        raise ZeroReduction("zero symbol cannot be normalized")
    out = EigenSymbol(sym.space, sym.sign, sym.field, sym.generator_op, sym.eigenvalues, sym.values, sym.label, dict(sym.normalization), emb)
    out.normalization.update({"p": emb.p, "prime_index": emb.prime_index, "scale_valuation": best})
    return out


def local_scale(sym: EigenSymbol):
    """The element varpi^(-v) that makes the embedded symbol cohomological."""
    emb = sym.embedding
    if emb is None:
        raise ValueError("symbol has not been normalized at a prime")
    v = sym.normalization["scale_valuation"]
    fld = emb.factor
    if v == 0:
        return fld.one()
    if fld.e == 1:
        return fld.one().shifted(-v)
    return fld.uniformizer() ** (-v)


def local_values(sym: EigenSymbol, arr: np.ndarray) -> list:
    """Embedded and normalized coefficients of a (k-1, d) value array."""
    s = local_scale(sym)
    return [x * s for x in _embed_array(sym.embedding, arr)]


@dataclass
class ReducedSymbol:
    """Values P(0, 1) of a normalized symbol on the level-Np test set, as local elements."""

    p: int
    weight: int
    values: list
    field: object


def phi_k_reduce(sym: EigenSymbol, p: int | None = None, scale_exp: int = 0) -> ReducedSymbol:
    """Image under P(X, Y) -> P(0, 1) of varpi^(-scale_exp) times the normalized symbol.

    Raises ZeroReduction when every value vanishes modulo varpi.
    """
    emb = sym.embedding
    if emb is None:
        raise ValueError("normalize the symbol first")
    p = emb.p if p is None else p
    s = local_scale(sym)
    if scale_exp:
        fld = emb.factor
        s = s * (fld.one().shifted(-scale_exp) if fld.e == 1 else fld.uniformizer() ** (-scale_exp))
    vals = []
    for arr in divisor_values(sym, p):
        vec = arr[0]
        vals.append(emb.embed([int(x) for x in vec]) * s if any(vec) else emb.factor.zero())
    units = [v for v in vals if not v.exact_zero and v.valuation() == 0]
    if not units:
        if any(not v.exact_zero and v.valuation() < 0 for v in vals):
            raise ValueError("scaled symbol is not integral")
        raise ZeroReduction("all test values vanish modulo varpi")
    return ReducedSymbol(p, sym.weight, vals, emb.factor)


def _common_field(a, b):
    if a.field == b.field:
        return a.values, b.values
    # any degree-one presentation is Q_p, with the value in the constant slot
    if b.field.degree == 1:
        return a.values, [_lift_rational(x, a.field) for x in b.values]
    if a.field.degree == 1:
        return [_lift_rational(x, b.field) for x in a.values], b.values
    raise ValueError("reduced symbols live in different residue fields")


def _lift_rational(x, fld):
    if x.exact_zero:
        return fld.zero()
    return fld.element([x.coeffs[0]], x.shift, min(x.prec, fld.prec))


def compare_phi(f_red: ReducedSymbol, g_red: ReducedSymbol):
    """The unit c with f = c g modulo varpi on the whole test set, or None."""
    if f_red.p != g_red.p:
        raise ValueError("different primes")
    if (f_red.weight - g_red.weight) % (f_red.p - 1):
        raise ValueError("weights are not congruent modulo p - 1")
    fv, gv = _common_field(f_red, g_red)
    if len(fv) != len(gv):
        raise ValueError("test sets differ")
    i0 = next((i for i, y in enumerate(gv) if not y.exact_zero and y.valuation() == 0), None)
    if i0 is None:
        raise ZeroReduction("second symbol reduces to zero")
    c = fv[i0] / gv[i0]
    if c.valuation() != 0:
        return None
    for x, y in zip(fv, gv):
        diff = x - c * y
        if diff.exact_zero or diff.is_zero_mod_prec():
            continue
        if diff.valuation() < 1:
            return None
    return c


def theta_k_lift(poly: Sequence[int], k: int, p: int) -> list[int]:
    """(X^p Y - X Y^p) P(X, Y) mod p, with P of degree k - p - 3 given by X-degree coefficients."""
    if k < p + 3:
        raise ValueError("need k >= p + 3")
    if len(poly) != k - p - 2:
        raise ValueError(f"expected {k - p - 2} coefficients")
    out = [0] * (k - 1)
    for j, b in enumerate(poly):
        if b % p:
            out[j + p] += b  # X^p Y * X^j Y^(w-j)
            out[j + 1] -= b  # X Y^p * X^j Y^(w-j)
    return [x % p for x in out]


def _ord_p_local(x) -> Fraction | float:
    if x.exact_zero or x.is_zero_mod_prec():
        return float("inf")
    return x.valuation_p()


def _test_value_table(sym: EigenSymbol) -> list[list]:
    s = local_scale(sym)
    table = []
    for arr in divisor_values(sym, sym.embedding.p):
        table.append([sym.embedding.embed([int(x) for x in arr[j]]) * s if any(arr[j]) else sym.embedding.factor.zero() for j in range(arr.shape[0])])
    return table


def filtration_level(sym: EigenSymbol) -> tuple[int, int]:
    """(r, t): the largest r with all values in Fil^r and the largest t <= r for Fil^(r,t)."""
    if sym.embedding is None:
        raise ValueError("normalize the symbol first")
    table = [[_ord_p_local(x) for x in row] for row in _test_value_table(sym)]
    w = sym.weight - 2

    def in_fil(r: int) -> bool:
        return all(row[j] >= r - j for row in table for j in range(min(r, w + 1)))

    r = 0
    while r < 4 * (w + 2) and in_fil(r + 1):
        r += 1

    def in_sub(t: int) -> bool:
        lo = max(r + 1 - t, 0)
        return all(row[j] >= r - j + 1 for row in table for j in range(lo, min(r, w) + 1))

    t = 0
    while t < r and in_sub(t + 1):
        t += 1
    return r, t


def mu_min(sym: EigenSymbol) -> int | float:
    """Minimum over the test set of ord_varpi of the Y^(k-2) coefficient."""
    if sym.embedding is None:
        raise ValueError("normalize the symbol first")
    best = float("inf")
    for row in _test_value_table(sym):
        x = row[0]
        if not (x.exact_zero or x.is_zero_mod_prec()):
            best = min(best, x.valuation())
    return best


# ---------------------------------------------------------------------------
# space cache

CACHE_VERSION = 1


def space_to_json(space: ModSymSpace) -> dict:
    def mat(m):
        return {"rows": m.nrows(), "cols": m.ncols(), "entries": [str(m[i, j]) for i in range(m.nrows()) for j in range(m.ncols())]}

    return {
        "version": CACHE_VERSION,
        "level": space.level,
        "weight": space.weight,
        "flavor": space.flavor,
        "disc": space.character.disc if space.character is not None else None,
        "basis": mat(space.basis),
        "hecke": {str(ell): mat(m) for ell, m in sorted(space._hecke_cache.items())},
    }


def space_from_json(data: dict) -> ModSymSpace:
    if data.get("version") != CACHE_VERSION:
        raise SchemaMismatch(f"cache version {data.get('version')} != {CACHE_VERSION}")

    def mat(d):
        return flint.fmpq_mat(d["rows"], d["cols"], [flint.fmpq(*_split_frac(x)) for x in d["entries"]])

    space = ModSymSpace.__new__(ModSymSpace)
    level, weight, flavor = int(data["level"]), int(data["weight"]), data["flavor"]
    char = None if flavor == "gamma1" else Character(level, int(data["disc"]))
    space.level, space.weight, space.flavor, space.character = level, weight, flavor, char
    space.cosets = _Cosets(level, flavor, char)
    space.n = weight - 1
    space.size = len(space.cosets) * space.n
    space._reps_sl2 = [lift_to_sl2(c, d, level) for c, d in space.cosets.reps]
    space.basis = mat(data["basis"])
    if space.basis.nrows() != space.size:
        raise SchemaMismatch("basis shape does not match the coset count")
    space._pivots = linalg.pivot_rows(space.basis) if space.basis.ncols() else []
    space._hecke_cache = {int(k): mat(v) for k, v in data["hecke"].items()}
    space._star = None
    space._cusp = None
    return space


def _split_frac(s: str) -> tuple[int, int]:
    if "/" in s:
        a, b = s.split("/")
        return int(a), int(b)
    return int(s), 1


def save_space(space: ModSymSpace, path) -> None:
    """Atomic JSON write (temporary file plus rename)."""
    import json
    import os
    import tempfile

    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(space_to_json(space), fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_space(path) -> ModSymSpace:
    import json

    with open(path) as fh:
        return space_from_json(json.load(fh))
