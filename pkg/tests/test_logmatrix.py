import pytest
from hypothesis import given, settings, strategies as st

from imt import logmatrix as lm
from imt.errors import NotInPsiZero, SingularSystem, TruncationTooSmall
from imt.iwasawa import q_n
from imt.padic import INF, hecke_roots

from conftest import form_run

M = 20


@settings(max_examples=50)
@given(st.sampled_from([3, 5, 7]), st.lists(st.integers(0, 5**M - 1), min_size=1, max_size=6))
def test_psi_inverts_phi(p, coeffs):
    """A polynomial of degree d, carried with room for phi to act exactly."""
    D = p * (len(coeffs) + 1)
    F = lm.PiSeries.make(coeffs, D, p, M)
    G = lm.psi_op(lm.phi_op(F))
    assert G.coeffs[: len(coeffs)] == F.coeffs[: len(coeffs)]
    assert not any(G.coeffs[len(coeffs):])


@settings(max_examples=50)
@given(st.sampled_from([(3, 2), (5, 1), (5, 2), (7, 1)]), st.data())
def test_mellin_round_trip(pm, data):
    p, m = pm
    units = [b for b in range(1, p**m) if b % p]
    vals = data.draw(st.dictionaries(st.sampled_from(units), st.integers(1, p**M - 1), max_size=len(units)))
    F = lm.mellin(vals, p, M, p**m + 1)
    assert lm.mellin_inverse(F, m) == vals


def test_mellin_inverse_rejects_mass_off_units():
    F = lm.mellin({5: 1, 1: 2}, 5, M, 26)
    with pytest.raises(NotInPsiZero):
        lm.mellin_inverse(F, 1)


def test_mellin_truncation_errors():
    with pytest.raises(TruncationTooSmall):
        lm.mellin({30: 1}, 5, M, 26)
    with pytest.raises(TruncationTooSmall):
        lm.mellin_inverse(lm.PiSeries.make([1], 10, 5, M), 2)
    with pytest.raises(TruncationTooSmall):
        lm.psi_op(lm.PiSeries.make([1], 3, 5, M))


@pytest.mark.parametrize("p", [3, 5, 7])
def test_delta_and_its_inverse(p):
    D = 3 * p
    q, delta = lm.q_delta(p, M, D)
    one = lm.PiSeries.make([1], D, p, M)
    assert delta * lm.delta_inverse(p, M, D) == one
    # phi(pi) = pi q
    pi = lm.PiSeries.make([0, 1], D, p, M)
    assert lm.phi_op(pi) == pi * q


@pytest.mark.parametrize("a_p, eps, k, p", [(15, 1, 4, 5), (0, 1, 16, 5), (7, 1, 4, 7), (0, -1, 3, 7)])
def test_pf_times_its_inverse(a_p, eps, k, p):
    D = lm.min_truncation(k, p) + p
    scaled = lm.pf_matrix_scaled(a_p, eps, k, p, M, D)
    inv = lm.pf_inverse(a_p, eps, k, p, M, D)
    q, _ = lm.q_delta(p, M, D)
    target = q ** (k - 1) * eps
    zero = lm.PiSeries.make([0], D, p, M)
    assert (scaled * inv).entries() == (target, zero, zero, target)


@pytest.mark.parametrize("n", [1, 2])
def test_measure_lives_on_principal_units(n):
    p = 5
    meas = lm.log_matrix_measure(15, 1, 4, p, n, M)
    for entry in meas.entries():
        coeffs = [int(c) for c in entry.coeffs()]
        assert all(c % p**M == 0 for e, c in enumerate(coeffs) if e % p != 1)
        series = lm.PiSeries.from_T(coeffs, len(coeffs) + p ** (n + 1), p, M)
        support = lm.mellin_inverse(series, n + 1)
        assert all(b % p == 1 for b in support)


def test_measure_truncation_guard():
    with pytest.raises(TruncationTooSmall):
        lm.log_matrix_measure(15, 1, 4, 5, 1, M, D=lm.min_truncation(4, 5) - 1)
    with pytest.raises(ValueError):
        lm.log_matrix_measure(15, 1, 4, 5, 0, M)


@pytest.mark.parametrize("a_p, eps, k, p, n", [(15, 1, 4, 5, 1), (15, 1, 4, 5, 2), (0, 1, 4, 5, 1), (0, 1, 6, 5, 2), (7, 1, 4, 7, 1), (14, 1, 4, 7, 2), (0, -1, 3, 7, 1)])
def test_cnf_structure_mod_p(a_p, eps, k, p, n):
    rep = lm.check_cnf_structure(lm.c_matrix(a_p, eps, k, p, n))
    assert rep["passed"], rep


def test_structure_check_rejects_ordinary():
    with pytest.raises(ValueError):
        lm.check_cnf_structure(lm.c_matrix(1, 1, 4, 5, 1))


@pytest.mark.parametrize("p, n", [(5, 1), (5, 2), (5, 3), (7, 1), (7, 2)])
@pytest.mark.parametrize("parity", ["+", "-"])
def test_mellin_of_q_products(p, n, parity):
    out = lm.q_product_transform(p, n, 4, parity)
    assert out["remainder_valuation"] == INF and out["unit_cofactor"]


def test_stabilization_residuals():
    C1, C2 = lm.c_matrix(15, 1, 4, 5, 1), lm.c_matrix(15, 1, 4, 5, 2)
    res = lm.stabilization_residuals(C1, C2)
    assert res[0] == [INF] * 4
    assert all(v >= 5 for row in res[1:] for v in row)
    with pytest.raises(ValueError):
        lm.stabilization_residuals(C1, C1)


@pytest.mark.parametrize("n", [1, 2])
def test_signed_system_for_27_4_a_b(n):
    run = form_run("27.4.a.b", 5)
    C = lm.c_matrix(run.a_p_int(), run.eps_p(), 4, 5, n)
    Qn, Qprev = run.theta(n).body.as_ints(), run.theta(n - 1).body.as_ints()
    sol = lm.solve_signed(Qn, Qprev, C)
    assert sol.consistent and sol.residual_valuation == INF
    assert sol.rank < sol.size
    assert sol.shortcut["q_term"] == 3 * q_n(5, n)
    assert sol.shortcut["lambda_signed"] == (0 if n % 2 == 0 else 2)
    if n == 2:
        bad = list(Qn)
        bad[3] += 1
        assert not lm.solve_signed(bad, Qprev, C).consistent
    with pytest.raises(SingularSystem):
        lm.solve_signed(Qn, Qprev, C, strict=True)
    with pytest.raises(ValueError):
        lm.solve_signed(Qn[:-1], Qprev, C)


def test_padic_log_ratio_of_generator_is_one():
    assert lm.padic_log_ratio(6, 5, 10) % 5**10 == 1


@pytest.mark.parametrize("a_p, eps, k", [(15, 1, 4), (0, 1, 16), (0, -1, 5)])
def test_diagonalization(a_p, eps, k):
    from imt.padic import LocalFieldSpec, PrimeContext

    fld = LocalFieldSpec.rational(PrimeContext(5 if eps == 1 else 7, 40))
    roots = hecke_roots(fld.from_int(a_p), fld.from_int(eps), k)
    big = roots.field
    assert lm.check_diagonalization(roots.alpha, roots.beta, big.from_int(a_p), big.from_int(eps), k)
    assert not lm.check_diagonalization(roots.alpha, roots.beta, big.from_int(a_p + 5), big.from_int(eps), k)
