from fractions import Fraction

import flint
import pytest
from hypothesis import assume, given, settings, strategies as st

from imt.errors import HypothesisViolated
from imt.iwasawa import (
    GroupRingPoly,
    closed_form_valuation,
    direct_zeta_valuation,
    eval_val_at_zeta,
    group_to_x,
    mu_lambda_ints,
    omega_n,
    phi_n,
    phi_products,
    q_n,
    x_to_group,
    zp_rem,
)
from imt.padic import INF, LocalFieldSpec, PrimeContext, hensel_factor

M = 20


def qp(p):
    return LocalFieldSpec.rational(PrimeContext(p, M))


def omega_ints(p, n):
    return [int(c) for c in omega_n(p, n).coeffs()]


@st.composite
def series_with_invariants(draw, p, n, max_mu=2, lam_below=None, length_factor=2):
    """An integral polynomial of length about length_factor * p^n with prescribed (mu, lambda)."""
    size = p**n
    lam_cap = (lam_below or size) - 1
    mu = draw(st.integers(0, max_mu))
    lam = draw(st.integers(0, lam_cap))
    length = draw(st.integers(lam + 1, length_factor * size))
    coeffs = []
    for i in range(length):
        c = draw(st.integers(-(p**3), p**3))
        if i < lam:
            c *= p ** (mu + 1)
        elif i == lam:
            c = (c * p + draw(st.integers(1, p - 1))) * p**mu
        else:
            c *= p**mu
        coeffs.append(c)
    return coeffs, mu, lam


@pytest.mark.parametrize("p, n, expected", [(5, 0, 0), (5, 1, 0), (5, 2, 4), (5, 3, 20), (5, 4, 104), (7, 2, 6), (7, 3, 42), (7, 4, 300)])
def test_q_n_values(p, n, expected):
    assert q_n(p, n) == expected


@pytest.mark.parametrize("p", [3, 5, 7])
@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_omega_is_x_times_cyclotomic_factors(p, n):
    prod = flint.fmpz_poly([0, 1])
    for m in range(1, n + 1):
        prod *= phi_n(p, m)
    assert prod == omega_n(p, n)
    assert omega_n(p, n).degree() == p**n
    if n:
        assert phi_n(p, n).degree() == p**n - p ** (n - 1)


def test_phi_1_for_p5():
    x1 = flint.fmpz_poly([1, 1])
    assert phi_n(5, 1) == sum((x1**i for i in range(5)), flint.fmpz_poly([0]))
    assert phi_n(5, 0) == flint.fmpz_poly([0, 1])


def test_phi_product_edge_cases():
    full, plus, minus = phi_products(5, 1, 1, M)
    assert plus == [1]
    assert minus == [int(c) % 5**M for c in phi_n(5, 1).coeffs()]
    assert full == minus


@pytest.mark.parametrize("p, n, h", [(5, 1, 3), (5, 2, 3), (5, 3, 3), (7, 2, 2), (3, 4, 2)])
def test_phi_product_degrees_and_lambda(p, n, h):
    full, plus, minus = phi_products(p, n, h, M)
    assert len(full) - 1 == h * (p**n - p ** (n - 1))
    # the factor of opposite parity to n carries (h) q_n
    carrier = plus if n % 2 else minus
    assert mu_lambda_ints(carrier, p).as_tuple() == (0, h * q_n(p, n))


def test_group_x_round_trip():
    vals = [3, 0, -1, 7, 2]
    assert x_to_group(group_to_x(vals, 5, 1), 5, 1) == vals


def test_mu_lambda_examples():
    fld = qp(5)
    F = GroupRingPoly.from_ints(fld, 1, [0, 5, 0, 1])
    assert F.mu_lambda().as_tuple() == (0, 3)
    assert GroupRingPoly.zero(fld, 1).mu_lambda().as_tuple() == (INF, INF)


def test_mu_counts_uniformizer_units_in_ramified_field():
    fld = hensel_factor([-5, 0, 1], PrimeContext(5, M))[0]
    pi = fld.uniformizer()
    F = GroupRingPoly(fld, 1, [pi * fld.from_int(5), pi, fld.zero(), fld.zero(), fld.zero()])
    assert F.mu_lambda().as_tuple() == (1, 1)


def test_json_round_trip():
    F = GroupRingPoly.from_ints(qp(5), 2, list(range(-12, 13)), denom_exp=1)
    G = GroupRingPoly.from_json(F.to_json())
    assert G == F and G.denom_exp == 1


@settings(max_examples=200)
@given(st.data())
def test_reduction_keeps_invariants(data):
    """Reducing modulo omega_n keeps (mu, lambda) once lambda < p^n."""
    p = data.draw(st.sampled_from([3, 5, 7]))
    n = data.draw(st.integers(1, 2))
    coeffs, mu, lam = data.draw(series_with_invariants(p, n))
    assert mu_lambda_ints(coeffs, p).as_tuple() == (mu, lam)
    red = GroupRingPoly.from_ints(qp(p), n, coeffs)
    assert red.mu_lambda().as_tuple() == (mu, lam)


@settings(max_examples=200)
@given(st.data())
def test_congruent_elements_share_invariants(data):
    """F = G mod (p, omega_n) with mu(F) = 0 and lambda(F) < p^n forces equal invariants."""
    p = data.draw(st.sampled_from([3, 5, 7]))
    n = data.draw(st.integers(1, 2))
    coeffs, _, lam = data.draw(series_with_invariants(p, n, max_mu=0))
    size = p**n
    mod = p**M
    G = zp_rem(coeffs, omega_ints(p, n), mod) if len(coeffs) > size else coeffs + [0] * (size - len(coeffs))
    noise = data.draw(st.lists(st.integers(-(p**4), p**4), min_size=size, max_size=size))
    G = [(g + p * h) % mod for g, h in zip(G, noise)]
    assert GroupRingPoly.from_ints(qp(p), n, G).mu_lambda().as_tuple() == (0, lam)


@settings(max_examples=20)
@given(st.data())
def test_zeta_valuation_closed_form(data):
    p = data.draw(st.sampled_from([3, 5, 7]))
    n = data.draw(st.integers(1, 2))
    phi = p**n - p ** (n - 1)
    coeffs, mu, lam = data.draw(series_with_invariants(p, n, lam_below=phi, length_factor=1))
    F = GroupRingPoly.from_ints(qp(p), n, coeffs)
    inv = F.mu_lambda()
    assert inv.lam < phi
    assert direct_zeta_valuation(F, n) == closed_form_valuation(inv, n, p) == eval_val_at_zeta(F, n)


def test_zeta_valuation_examples():
    fld = qp(5)
    assert eval_val_at_zeta(GroupRingPoly.from_ints(fld, 1, [0, 1]), 1) == Fraction(1, 4)
    assert eval_val_at_zeta(GroupRingPoly.from_ints(fld, 2, [5]), 2) == 1
    u = 6
    F = flint.fmpz_poly([1 - u, 1]) * flint.fmpz_poly([1 - u * u, 1])
    G = GroupRingPoly.from_ints(fld, 1, [int(c) for c in F.coeffs()])
    assert G.mu_lambda().as_tuple() == (0, 2)
    assert eval_val_at_zeta(G, 1) == Fraction(1, 2)


def test_zeta_valuation_flags_large_lambda():
    F = GroupRingPoly.from_ints(qp(5), 1, [0, 0, 0, 0, 1])
    with pytest.raises(HypothesisViolated) as info:
        eval_val_at_zeta(F, 1)
    assert info.value.direct == direct_zeta_valuation(F, 1)


@settings(max_examples=100)
@given(st.data())
def test_invariants_add_under_multiplication(data):
    p = data.draw(st.sampled_from([3, 5]))
    n = 2
    F, muF, lamF = data.draw(series_with_invariants(p, n, max_mu=1, length_factor=1))
    G, muG, lamG = data.draw(series_with_invariants(p, n, max_mu=1, length_factor=1))
    assume(lamF + lamG < p**n)
    fld = qp(p)
    prod = GroupRingPoly.from_ints(fld, n, F) * GroupRingPoly.from_ints(fld, n, G)
    assert prod.mu_lambda().as_tuple() == (muF + muG, lamF + lamG)


@settings(max_examples=60)
@given(st.data())
def test_generator_change_keeps_invariants(data):
    p = data.draw(st.sampled_from([3, 5]))
    n = data.draw(st.integers(1, 2))
    coeffs, mu, lam = data.draw(series_with_invariants(p, n, length_factor=1))
    c = data.draw(st.integers(1, p**n * 3).filter(lambda c: c % p))
    F = GroupRingPoly.from_ints(qp(p), n, coeffs)
    assert F.change_generator(c).mu_lambda() == F.mu_lambda()


@settings(max_examples=60)
@given(st.data())
def test_twist_is_invertible_and_keeps_invariants(data):
    p = data.draw(st.sampled_from([3, 5]))
    coeffs, mu, lam = data.draw(series_with_invariants(p, 1, length_factor=1))
    i = data.draw(st.integers(-3, 3))
    F = GroupRingPoly.from_ints(qp(p), 1, coeffs)
    T = F.tw(i)
    assert T.mu_lambda() == F.mu_lambda()
    assert T.tw(-i) == F


def test_twist_of_x():
    fld = qp(5)
    X = GroupRingPoly.from_ints(fld, 1, [0, 1])
    assert X.tw(0) == X
    assert X.tw(1) == GroupRingPoly.from_ints(fld, 1, [5, 6])


@pytest.mark.parametrize("n", [1, 2])
def test_projection_of_norm_is_multiplication_by_p(n):
    fld = qp(5)
    F = GroupRingPoly.from_ints(fld, n - 1, list(range(1, 5 ** (n - 1) + 1)))
    assert F.norm_up().project() == F.scale(fld.from_int(5))


def test_norm_of_identity_is_phi_1():
    fld = qp(5)
    one = GroupRingPoly.from_ints(fld, 0, [1])
    assert one.norm_up() == GroupRingPoly.from_ints(fld, 1, [int(c) for c in phi_n(5, 1).coeffs()])
