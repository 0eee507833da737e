"""Regenerate src/imt/data/forms.json from local modular symbol computations.

Each entry is located by an identifying selector (degree plus a few traces);
the script then records the full trace list, exact a_ell, the Hecke field
polynomial and the slope at every prime above p.
"""

import sys
from fractions import Fraction

from imt import modsym, padic
from imt.forms import FormDescriptor, default_fixture_path, save_fixtures
from imt.mazurtate import theta_sign

ELL_MAX = 13

# label, aliases, lmfdb label, (N, k, flavor, disc), identifying selector, p, preferred slope
FORMS = [
    ("27.4.a.b", ["G0N27k4A"], "27.4.a.b", (27, 4, "gamma0", 1), {"degree": 1, "traces": {2: 3}}, 5, None),
    ("9.4.a.a", ["G0N9k4A"], "9.4.a.a", (9, 4, "gamma0", 1), {"degree": 1}, 5, None),
    ("9.8.a.b", ["G0N9k8B"], "9.8.a.b", (9, 8, "gamma0", 1), {"degree": 2}, 5, None),
    ("9.16.a.b", ["G0N9k16A"], "9.16.a.b", (9, 16, "gamma0", 1), {"degree": 1, "traces": {2: 0}}, 5, None),
    ("27.16.a.b", ["G0N27k16C"], "27.16.a.b", (27, 16, "gamma0", 1), {"degree": 5, "traces": {2: -273}}, 5, Fraction(3)),
    ("G0N14k2A", [], None, (14, 2, "gamma0", 1), {"degree": 1}, 5, None),
    ("G1N7k3A", [], None, (7, 3, "gamma0", -7), {"degree": 1, "traces": {2: -3}}, 5, None),
    ("G1N7k5B", [], None, (7, 5, "gamma0", -7), {"degree": 1, "traces": {2: 1}}, 5, None),
    ("G1N3k7A", [], None, (3, 7, "gamma0", -3), {"degree": 1}, 5, None),
    ("G1N23k7B", [], None, (23, 7, "gamma0", -23), {"degree": 1, "traces": {2: -7}}, 5, None),
    ("G1N13k2A", [], None, (13, 2, "gamma1", 1), {"degree": 2}, 7, None),
    ("G1N8k3A", ["8.3.d.a"], "8.3.d.a", (8, 3, "gamma0", -8), {"degree": 1, "traces": {2: -2}}, 7, None),
    ("G0N17k4A", [], None, (17, 4, "gamma0", 1), {"degree": 1, "traces": {2: -3}}, 7, None),
    ("G1N4k5A", ["4.5.b.a"], "4.5.b.a", (4, 5, "gamma0", -4), {"degree": 1}, 7, None),
    ("4.17.b.b", ["G1N4k17B"], "4.17.b.b", (4, 17, "gamma0", -4), {"degree": 6}, 7, Fraction(1, 2)),
]


def describe(label, aliases, lmfdb, spec, selector, p, slope):
    N, k, flavor, disc = spec
    space = modsym.build_space(N, k, flavor, disc)
    hits = [s for s in modsym.eigen_decompose(space, theta_sign(0, k)) if modsym.matches(s, selector)]
    if len(hits) != 1:
        raise SystemExit(f"{label}: {len(hits)} orbits match {selector}")
    sym = hits[0]
    ells = [ell for ell in sorted(sym.eigenvalues) if ell <= ELL_MAX]
    traces = {ell: str(sym.field.trace(sym.eigenvalues[ell])) for ell in ells}
    a_ell = {ell: [str(c) for c in sym.eigenvalues[ell]] for ell in ells}
    ctx = padic.PrimeContext(p, 30)
    nfac = len(padic.hensel_factor(sym.field.minpoly, ctx))
    primes = []
    for idx in range(1, nfac + 1):
        emb = padic.EmbeddedNumberField(sym.field.minpoly, idx, ctx)
        ap = emb.embed(sym.eigenvalues[p])
        sl = "inf" if ap.exact_zero else str(ap.valuation_p())
        primes.append({"index": idx, "slope": sl, "e": emb.e, "f": emb.factor.f_deg})
    nonord = [q for q in primes if q["slope"] != "0"]
    if slope is not None:
        nonord = [q for q in nonord if q["slope"] == str(slope)]
    if not nonord:
        raise SystemExit(f"{label}: no non-ordinary prime above {p}")
    desc = FormDescriptor(
        label, N, k, flavor, disc, sym.degree, list(sym.field.minpoly), traces, a_ell, aliases, lmfdb,
        {p: primes}, {p: nonord[0]["index"]}, "computed",
    )
    # the identifying traces must still single out the orbit
    assert len([s for s in modsym.eigen_decompose(space, theta_sign(0, k)) if modsym.matches(s, desc.selector())]) == 1
    return desc


def main(out=None):
    descs = []
    for row in FORMS:
        d = describe(*row)
        print(d.label, d.degree, d.primes, file=sys.stderr, flush=True)
        descs.append(d)
    save_fixtures(descs, out or default_fixture_path())


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
