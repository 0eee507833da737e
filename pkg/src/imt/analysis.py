"""Signed invariants, valuation formulas, Serre weight sets and pair comparisons."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import HypothesisViolated, InsufficientData, OutOfRange, ZeroReduction
from .iwasawa import GroupRingPoly, eval_val_at_zeta, q_n
from .padic import INF

# ---------------------------------------------------------------------------
# signed invariants from lambda(Theta_n)


@dataclass
class SignedReport:
    label: str | None
    p: int
    k: int
    prime_index: int | None = None
    i: int = 0
    j: int = 0
    series: list[tuple[int, object, object]] = field(default_factory=list)
    mu: object = None
    lam_sharp: int | None = None
    lam_flat: int | None = None
    n0: int | None = None
    n_max: int | None = None
    pattern: str = "none"
    verdicts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def lambdas(self) -> dict[int, object]:
        return {n: lam for n, _mu, lam in self.series}

    def to_json(self) -> dict:
        out = asdict(self)
        out["series"] = [[n, _jsonable(mu), _jsonable(lam)] for n, mu, lam in self.series]
        out["mu"] = _jsonable(self.mu)
        return out


def _jsonable(x):
    if x == INF:
        return "inf"
    if isinstance(x, Fraction):
        return str(x)
    return x


def _phi_pn(p: int, n: int) -> int:
    return p**n - p ** (n - 1) if n >= 1 else 1


def _find_constant_tail(diffs: dict[int, object], parity_of, min_points: int) -> tuple[int, dict[int, object]] | None:
    """Smallest n0 with diffs constant on each parity class of n >= n0."""
    ns = sorted(diffs)
    for n0 in ns:
        tail = [n for n in ns if n >= n0]
        classes: dict[int, list] = {0: [], 1: []}
        for n in tail:
            classes[parity_of(n)].append(diffs[n])
        if any(len(v) < min_points for v in classes.values()):
            return None
        if all(x != INF and x is not None and len(set(v)) == 1 for v in classes.values() for x in v):
            return n0, {par: v[0] for par, v in classes.items()}
    return None


def extract_signed(
    series: Iterable[tuple[int, object, object]],
    k: int,
    p: int,
    label: str | None = None,
    prime_index: int | None = None,
    i: int = 0,
    j: int = 0,
    min_points: int = 2,
) -> SignedReport:
    """Read lambda-sharp and lambda-flat off lambda(Theta_n) - (k-1) q_n.

    ``series`` holds (n, mu, lambda) triples in any order.  Odd n give the
    flat invariant and even n the sharp one, provided the differences are
    constant on each parity class from some n0 on.  Otherwise the
    corestriction pattern lambda_n = (k_g - 1) q_(n-1) + c + p^n - p^(n-1) is
    tried for a lower weight k_g.
    """
    data = {}
    for n, mu, lam in series:
        if n in data and data[n] != (mu, lam):
            raise ValueError(f"conflicting entries for n = {n}")
        data[n] = (mu, lam)
    if not data:
        raise InsufficientData("empty series")
    ns = sorted(data)
    report = SignedReport(label, p, k, prime_index, i, j, [(n, *data[n]) for n in ns], n_max=ns[-1])
    counts = [sum(1 for n in ns if n % 2 == par) for par in (0, 1)]
    if min(counts) < min_points:
        raise InsufficientData(f"need {min_points} points per parity, have {counts}")

    diffs = {n: (data[n][1] - (k - 1) * q_n(p, n) if data[n][1] != INF else INF) for n in ns}
    found = _find_constant_tail(diffs, lambda n: n % 2, min_points)
    if found is not None:
        n0, vals = found
        report.pattern = "FL"
        report.n0 = n0
        report.lam_sharp = vals[0]
        report.lam_flat = vals[1]
        if k == p + 1:
            report.extra["weight2_signed"] = {"flat": vals[1] - (p - 1), "sharp": vals[0]}
    else:
        shifted = _corestriction_pattern(data, k, p, min_points)
        if shifted is not None:
            report.pattern = "corestriction"
            report.n0, kg, vals = shifted
            report.extra["corestriction"] = {"k_g": kg, "sharp_g": vals[0], "flat_g": vals[1]}

    tail = [n for n in ns if report.n0 is None or n >= report.n0]
    mus = {data[n][0] for n in tail}
    report.mu = mus.pop() if len(mus) == 1 else None
    report.verdicts = {
        "signed_pattern": report.pattern == "FL",
        "mu_stable": report.mu is not None,
        "flat_lower_bound": None if report.lam_flat is None else report.lam_flat >= k - 2,
    }
    return report


def _corestriction_pattern(data: dict, k: int, p: int, min_points: int):
    ns = [n for n in sorted(data) if n >= 1 and data[n][1] != INF]
    fits = []
    for kg in range(2, k):
        diffs = {n - 1: data[n][1] - _phi_pn(p, n) - (kg - 1) * q_n(p, n - 1) for n in ns}
        found = _find_constant_tail(diffs, lambda m: m % 2, 1)
        if found is None:
            continue
        m0, vals = found
        if max(sum(1 for m in diffs if m >= m0 and m % 2 == par) for par in (0, 1)) < min_points:
            continue
        fits.append((m0 + 1, kg, vals))
    return fits[0] if len(fits) == 1 else None


def check_lower_bound(report: SignedReport) -> dict:
    """lambda(Theta_n) >= (k-1) q_n + k - 2 for odd n in the stable range, and lambda-flat >= k - 2."""
    k, p = report.k, report.p
    per_n = {}
    for n, _mu, lam in report.series:
        if n % 2 == 1 and (report.n0 is None or n >= report.n0) and lam != INF:
            per_n[n] = lam >= (k - 1) * q_n(p, n) + k - 2
    out = {"per_n": per_n, "holds": all(per_n.values()) if per_n else None, "tight": None}
    if report.lam_flat is not None:
        out["flat_ok"] = report.lam_flat >= k - 2
        out["tight"] = report.lam_flat == k - 2
        out["holds"] = out["flat_ok"] and (out["holds"] is not False)
    return out


# ---------------------------------------------------------------------------
# Serre weight bookkeeping


def s_of(m: int, p: int) -> int:
    """The integer in [1, p-1] congruent to m - 1 modulo p - 1."""
    return (m - 2) % (p - 1) + 1


def k_prime(m: int, p: int) -> int:
    return (m - 2) % (p - 1)


def canonical_class(t: int, p: int) -> int:
    """Smallest representative of t modulo p^2 - 1 under t ~ p t."""
    mod = p * p - 1
    return min(t % mod, p * t % mod)


@dataclass(frozen=True)
class SerreCombinatorics:
    p: int
    k: int
    s: int
    k_prime: int
    delta: int
    elements: tuple[int, ...]
    weight_bound_ok: bool
    s_equivalent: bool

    @property
    def classes(self) -> frozenset[int]:
        return frozenset(canonical_class(t, self.p) for t in self.elements)


def serre_delta(p: int, k: int) -> int:
    m = (k - 2) // (p + 1)
    half = k_prime(k, p) // 2
    if m <= half:
        return 0
    if half + 1 <= m <= half + (p - 1) // 2:
        return 1
    return 2


def serre_combinatorics(p: int, k: int) -> SerreCombinatorics:
    """The set of inertia types s(k) + j(p-1) reachable from the image of theta."""
    if k < 2 or k >= p * p + 1:
        raise OutOfRange(f"weight {k} outside [2, p^2]")
    s = s_of(k, p)
    kp = k_prime(k, p)
    delta = serre_delta(p, k)
    m = (k - 2) // (p + 1)
    if k <= p + 2:
        elements: tuple[int, ...] = ()
    else:
        skip = {(kp + 2) // 2, (p + kp + 3) // 2}
        elements = tuple(s + jj * (p - 1) for jj in range(1, m + delta + 1) if jj not in skip)
    mod = p * p - 1
    targets = {s % mod, p * s % mod}
    s_equiv = any(t % mod in targets for t in elements)
    return SerreCombinatorics(p, k, s, kp, delta, elements, m + delta < s, s_equiv)


def weight_transfer_applies(p: int, k_f: int, k_g: int) -> bool:
    """k_f < (k_g - 1 - delta)(p + 1) with delta computed at weight k_f."""
    if not 2 < k_g < p + 1:
        raise ValueError("need 2 < k_g < p + 1")
    if (k_f - k_g) % (p - 1):
        raise ValueError("weights must agree modulo p - 1")
    return k_f < (k_g - 1 - serre_delta(p, k_f)) * (p + 1)


def small_slope_applies(slope, k_g: int) -> bool:
    return Fraction(slope) < k_g - 2


# ---------------------------------------------------------------------------
# valuation of twisted L-values


@dataclass
class BKValuation:
    value: Fraction
    hypothesis_ok: bool
    direct: Fraction | None = None
    agree: bool | None = None


def bk_valuation(report: SignedReport, n: int, e: int = 1, theta: GroupRingPoly | None = None) -> BKValuation:
    """mu ord_p(varpi) + ((k-1) q_n + lambda-star) / phi(p^n), lambda-star by parity of n.

    When ``theta`` (Theta_n) is given, the value is compared with the
    valuation of Theta_n at a primitive p^n-th root of unity.
    """
    p, k = report.p, report.k
    star = report.lam_flat if n % 2 else report.lam_sharp
    if star is None or report.mu is None:
        raise InsufficientData("signed invariants are not available")
    value = Fraction(report.mu, e) + Fraction((k - 1) * q_n(p, n) + star, _phi_pn(p, n))
    hyp = Fraction(1, e) > Fraction(p * (k - 1), p * p - 1)
    out = BKValuation(value, hyp)
    if theta is not None:
        try:
            out.direct = eval_val_at_zeta(theta, n)
        except HypothesisViolated as exc:
            out.direct = getattr(exc, "direct", None)
        out.agree = out.direct == value
    return out


# ---------------------------------------------------------------------------
# comparing two forms


def _normalized_coeffs(F: GroupRingPoly):
    fld = F.field
    vals = [c.valuation() for c in F.coeffs if not (c.exact_zero or c.is_zero_mod_prec())]
    if not vals:
        return None
    v = min(vals)
    scale = fld.uniformizer() ** (-v) if v else fld.one()
    return [c * scale for c in F.coeffs]


def theta_congruence(F: GroupRingPoly, G: GroupRingPoly):
    """Unit c with varpi^(-mu) F = c varpi^(-mu) G modulo varpi, or None.

    G may have Q_p coefficients; it is then viewed over F's field.
    """
    from .mazurtate import lift_poly

    if F.n != G.n:
        raise ValueError("elements live at different levels")
    G = lift_poly(G, F.field)
    fs, gs = _normalized_coeffs(F), _normalized_coeffs(G)
    if fs is None or gs is None:
        return None
    i0 = next(i for i, c in enumerate(gs) if not (c.exact_zero or c.is_zero_mod_prec()) and c.valuation() == 0)
    if fs[i0].exact_zero or fs[i0].is_zero_mod_prec():
        return None
    c = fs[i0] / gs[i0]
    if c.valuation() != 0:
        return None
    for x, y in zip(fs, gs):
        diff = x - c * y
        if diff.exact_zero or diff.is_zero_mod_prec():
            continue
        if diff.valuation() < 1:
            return None
    return c


def compare_pair(
    f_report: SignedReport,
    g_report: SignedReport,
    f_sym=None,
    g_sym=None,
    f_thetas: dict[int, GroupRingPoly] | None = None,
    g_thetas: dict[int, GroupRingPoly] | None = None,
) -> dict:
    """Lambda equalities, the mod-varpi symbol comparison and the corestriction congruence."""
    from . import modsym

    if f_report.p != g_report.p or f_report.i != g_report.i:
        raise ValueError("reports must share p and i")
    p = f_report.p
    lf, lg = f_report.lambdas(), g_report.lambdas()
    common = sorted(set(lf) & set(lg))
    lam_equal = {n: lf[n] == lg[n] for n in common}
    verdict: dict = {"p": p, "lambda_equal": lam_equal, "all_equal": all(lam_equal.values()) if lam_equal else None}
    shifted = {n: lf[n] == lg[n - 1] + _phi_pn(p, n) for n in sorted(lf) if n >= 1 and n - 1 in lg}
    verdict["corestriction_lambda"] = shifted
    if f_sym is not None and g_sym is not None:
        mu_f = modsym.mu_min(f_sym)
        scale = int(mu_f) if mu_f not in (INF, 0) else 0
        try:
            c = modsym.compare_phi(modsym.phi_k_reduce(f_sym, scale_exp=scale), modsym.phi_k_reduce(g_sym))
            verdict["symbols"] = {"mu_min": mu_f, "congruent": c is not None}
        except ZeroReduction as exc:
            verdict["symbols"] = {"mu_min": mu_f, "congruent": False, "zero_reduction": str(exc)}
    if f_thetas and g_thetas and not verdict["all_equal"]:
        cong = {}
        for n, F in sorted(f_thetas.items()):
            if n >= 1 and n - 1 in g_thetas:
                cong[n] = theta_congruence(F, g_thetas[n - 1].norm_up()) is not None
        verdict["corestriction_congruence"] = cong
    return verdict


# ---------------------------------------------------------------------------
# tables

TABLE_COLUMNS = ["label", "k", "N", "d", "i", "slope", "lambda0", "lambda1", "lambda2", "lambda3", "lambda4", "lambda_sharp", "lambda_flat"]


def table_row(report: SignedReport, N: int, d: int, slope) -> dict:
    row = {"label": report.label, "k": report.k, "N": N, "d": d, "i": report.i, "slope": slope}
    lams = report.lambdas()
    for n in range(5):
        row[f"lambda{n}"] = lams.get(n)
    row["lambda_sharp"] = report.lam_sharp
    row["lambda_flat"] = report.lam_flat
    return row


def _cell(x) -> str:
    if x is None:
        return ""
    if x == INF:
        return "inf"
    return str(x)


def format_table(rows: Sequence[dict], fmt: str = "tsv") -> str:
    """Rows in the column layout label, k, N, d, i, slope, lambda(Theta_0..4), sharp, flat."""
    header = ["label", "k", "N", "d", "i", "slope", "λ(Θ0)", "λ(Θ1)", "λ(Θ2)", "λ(Θ3)", "λ(Θ4)", "λ♯", "λ♭"]
    body = [[_cell(r.get(c)) for c in TABLE_COLUMNS] for r in rows]
    if fmt == "tsv":
        return "\n".join("\t".join(line) for line in [header, *body]) + "\n"
    if fmt in ("md", "markdown"):
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(line) + " |" for line in body]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
