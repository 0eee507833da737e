"""One PASS/FAIL line per acceptance criterion, printed to the terminal."""

import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

from imt import analysis as an
from imt import logmatrix as lm
from imt.iwasawa import q_n
from imt.jobs import FormRun, JobSpec
from imt.padic import INF

from conftest import form_run

TABLE1 = {"G0N14k2A": (0, 0, 4, 20), "G1N7k3A": (0, 1, 8, 41), "G0N9k4A": (0, 2, 12, 62), "G1N7k5B": (0, 3, 16, 83), "G1N3k7A": (0, 4, 24, 124), "G1N23k7B": (0, 1, 5, 25)}
TABLE2 = {"G1N13k2A": (0, 0, 6), "G1N8k3A": (0, 1, 12), "G0N17k4A": (0, 2, 18), "G1N4k5A": (0, 3, 24)}


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def _lams(run):
    return tuple(lam for _n, _mu, lam in run.series())


def _forms():
    """Every form of criteria 1-3 as (label, p, nmax)."""
    return [("27.4.a.b", 5, 3)] + [(lab, 5, 3) for lab in TABLE1] + [(lab, 7, 2) for lab in TABLE2]


def _fl(label, p):
    """The small-weight hypothesis p > k - 1 under which the signed pattern is proved."""
    return p > form_run(label, p).desc.k - 1


def _fl_forms():
    return [f for f in _forms() if _fl(f[0], f[1])]


def _outside_fl():
    return [f[0] for f in _forms() if not _fl(f[0], f[1])]


def test_criterion_1_small_example(verdict, fixtures):
    t0 = time.perf_counter()
    run = form_run("27.4.a.b", 5, nmax=3)
    series = run.series()
    rep = run.report()
    elapsed = time.perf_counter() - t0
    deep = FormRun(fixtures["27.4.a.b"], JobSpec(p=5, nmax=4, deep=True).validate())
    lam4 = deep.theta(4).invariants()
    ok = (
        [lam for _, _, lam in series] == [0, 2, 12, 62]
        and all(mu == 0 for _, mu, _ in series)
        and (rep.lam_sharp, rep.lam_flat) == (0, 2)
        and elapsed < 120
        and (lam4.mu, lam4.lam) == (0, 312)
    )
    verdict(1, ok, f"lambda = {[lam for _, _, lam in series]} + n=4 {lam4.lam}, sharp {rep.lam_sharp}, flat {rep.lam_flat}, {elapsed:.1f}s")


def test_criterion_2_first_table(verdict):
    got = {lab: _lams(form_run(lab, 5, nmax=3)) for lab in TABLE1}
    bad = {lab: v for lab, v in got.items() if v != TABLE1[lab]}
    verdict(2, not bad, f"{len(TABLE1) - len(bad)}/{len(TABLE1)} rows exact" + (f", mismatches {bad}" if bad else ""))


def test_criterion_3_second_table(verdict):
    got = {lab: _lams(form_run(lab, 7, nmax=2)) for lab in TABLE2}
    bad = {lab: v for lab, v in got.items() if v != TABLE2[lab]}
    verdict(3, not bad, f"{len(TABLE2) - len(bad)}/{len(TABLE2)} rows exact" + (f", mismatches {bad}" if bad else ""))


def test_criterion_4_q_n_and_pattern(verdict):
    qs_ok = [q_n(5, n) for n in range(5)] == [0, 0, 4, 20, 104] and [q_n(7, n) for n in range(5)] == [0, 0, 6, 42, 300]
    failures = []
    for label, p, nmax in _fl_forms():
        run = form_run(label, p, nmax=nmax)
        rep = run.report()
        for n, _mu, lam in rep.series:
            if n >= 1:
                star = rep.lam_flat if n % 2 else rep.lam_sharp
                if star is None or lam != (run.desc.k - 1) * q_n(p, n) + star:
                    failures.append((label, n))
    verdict(4, qs_ok and not failures, f"q_n tables {'ok' if qs_ok else 'wrong'}, pattern failures {failures}, {len(_fl_forms())} forms with p > k-1 (not applicable: {_outside_fl()})")


def test_criterion_5_congruent_pairs(verdict):
    checks = {}
    for f_lab, g_lab, p in [("9.4.a.a", "9.8.a.b", 5), ("4.5.b.a", "4.17.b.b", 7)]:
        f, g = form_run(f_lab, p, nmax=2), form_run(g_lab, p, nmax=2)
        out = an.compare_pair(f.report(), g.report(), f.sym, g.sym)
        checks[f"{f_lab}~{g_lab}"] = bool(out["all_equal"])
    g4 = form_run("9.4.a.a", 5, nmax=3)
    for label, prime_index, g in [("9.16.a.b", None, g4), ("27.16.a.b", 1, form_run("27.4.a.b", 5, nmax=2))]:
        nmax = 3 if label == "9.16.a.b" else 2
        f = form_run(label, 5, nmax=nmax, prime_index=prime_index)
        lams = _lams(f)
        glam = g.report().lambdas()
        shifted = all(lams[n] == glam[n - 1] + 5**n - 5 ** (n - 1) for n in range(1, nmax + 1))
        out = an.compare_pair(f.report(), g.report(), None, None, {n: th.body for n, th in f.thetas().items()}, {n: th.body for n, th in g.thetas().items()})
        cong = all(out["corestriction_congruence"].values())
        checks[f"{label}@{f.slope()}"] = lams[:3] == (0, 4, 22) and shifted and cong
    verdict(5, all(checks.values()), str(checks))


P7_WORKED = {6: set(), 12: {11}, 18: {11, 17}, 24: {11, 17}, 30: {11, 17, 19}, 36: {11, 17, 19, 35}}


def _serre_status():
    ok_p5 = set(an.serre_combinatorics(5, 8).elements) == {7} and set(an.serre_combinatorics(5, 16).elements) == {7, 15}
    empty = all(not an.serre_combinatorics(p, k).elements for p in (5, 7, 11) for k in range(2, p + 3))
    got = {k: set(an.serre_combinatorics(7, k).elements) for k in P7_WORKED}
    differ = {k: sorted(v) for k, v in got.items() if v != P7_WORKED[k]}
    return ok_p5, empty, got, differ


@pytest.mark.xfail(strict=True, reason="the worked p = 7 list prints 19 at k = 30 and 36, which is not congruent to s(k) = 5 mod 6")
def test_criterion_6_serre_sets(verdict):
    ok_p5, empty, _got, differ = _serre_status()
    verdict(6, ok_p5 and empty and not differ, f"p=5 {'ok' if ok_p5 else 'wrong'}, small weights empty {empty}, p=7 sets differing from the worked list: {differ}")


def test_serre_sets_apart_from_the_misprint():
    ok_p5, empty, got, differ = _serre_status()
    assert ok_p5 and empty
    assert sorted(differ) == [30, 36]
    assert got[30] == {11, 17, 29} and got[36] == {11, 17, 29, 35}


def test_criterion_7_log_matrix(verdict):
    t0 = time.perf_counter()
    results = {}
    for label, p in [("27.4.a.b", 5), ("G0N17k4A", 7)]:
        run = form_run(label, p, nmax=2)
        a_p, eps, k = run.a_p_int(), run.eps_p(), run.desc.k
        for n in (1, 2):
            C = lm.c_matrix(a_p, eps, k, p, n)
            structure = lm.check_cnf_structure(C)["passed"]
            sol = lm.solve_signed(run.theta(n).body.as_ints(), run.theta(n - 1).body.as_ints(), C)
            residual_ok = sol.consistent and (sol.residual_valuation == INF or sol.residual_valuation >= C.M - 5)
            results[f"{label} n={n}"] = structure and residual_ok
    elapsed = time.perf_counter() - t0
    verdict(7, all(results.values()) and elapsed < 600, f"{results}, {elapsed:.1f}s")


SUITES = {
    "test_logmatrix.py": ["test_psi_inverts_phi", "test_mellin_round_trip", "test_measure_lives_on_principal_units"],
    "test_padic.py": ["test_teichmuller_multiplicative"],
    "test_modsym.py": ["test_manin_relations_at_level_one", "test_gamma_invariance", "test_hecke_operators_commute_with_each_other_and_star", "test_path_additivity"],
    "test_iwasawa.py": ["test_zeta_valuation_closed_form", "test_generator_change_keeps_invariants", "test_reduction_keeps_invariants", "test_congruent_elements_share_invariants"],
}


def test_criterion_8_property_suites(verdict):
    """Runs the generative suites from the module test files in a child process."""
    here = Path(__file__).parent
    nodes = [f"{here / f}::{name}" for f, names in SUITES.items() for name in names]
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *nodes], capture_output=True, text=True, cwd=here.parent)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    verdict(8, proc.returncode == 0, f"{len(nodes)} suites: {summary}")


def test_criterion_9_lower_bound(verdict):
    tight, bad = [], []
    for label, p, nmax in _fl_forms():
        out = an.check_lower_bound(form_run(label, p, nmax=nmax).report())
        if not out["holds"]:
            bad.append(label)
        elif out["tight"]:
            tight.append(label)
    verdict(9, not bad, f"violations {bad}, tight {len(tight)}/{len(_fl_forms())}: {tight} (not applicable: {_outside_fl()})")


def test_criterion_10_valuation_cross_check(verdict):
    run = form_run("27.4.a.b", 5, nmax=3)
    rep = run.report()
    rows = {n: an.bk_valuation(rep, n, theta=run.theta(n).body) for n in (1, 2, 3)}
    ok = all(r.agree and isinstance(r.direct, Fraction) for r in rows.values()) and rows[3].value == Fraction(31, 50)
    verdict(10, ok, ", ".join(f"n={n}: {r.value} vs {r.direct}" for n, r in rows.items()))
