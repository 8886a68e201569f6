import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from conftest import fit_odd_polynomial, wick_gue_trace, wick_wishart_trace
from extk import combinatorics as cb
from extk import moments as mo
from extk.errors import ResourceError, ValidationError
from extk.moments import MomentPolynomial


def poly_d(**terms):
    return MomentPolynomial(("d",), {(int(k[1:]),): v for k, v in terms.items()})


# --- polynomial type -------------------------------------------------------------

polys = st.dictionaries(
    st.tuples(st.integers(0, 6), st.integers(0, 3)), st.integers(-20, 20), max_size=6
).map(lambda t: MomentPolynomial(("d", "s"), t))


@given(polys, polys)
def test_polynomial_ring_laws(a, b):
    assert (a + b) - b == a
    assert a * b == b * a
    assert (a * b).evaluate(d=3, s=2) == a.evaluate(d=3, s=2) * b.evaluate(d=3, s=2)


@given(polys)
def test_polynomial_json_roundtrip(a):
    assert MomentPolynomial.from_json(a.to_json()) == a
    assert all(t["coeff"] != "0" for t in a.to_json()["terms"])


def test_terms_sorted_descending():
    exps = [tuple(t["exps"]) for t in mo.wishart_modified_moment(2, 2).to_json()["terms"]]
    assert exps == sorted(exps, reverse=True)


# --- plain ensembles ------------------------------------------------------------


def test_gue_plain():
    n = lambda **t: MomentPolynomial(("n",), {(int(k[1:]),): v for k, v in t.items()})
    assert mo.gue_plain_moment(2) == n(n2=1)
    assert mo.gue_plain_moment(4) == n(n3=2, n1=1)
    assert mo.gue_plain_moment(3).is_zero()
    for p in range(1, 7):
        assert mo.gue_plain_moment(2 * p).coeff(p + 1) == cb.catalan(p)
    with pytest.raises(ResourceError):
        mo.gue_plain_moment(14)


def test_wishart_plain():
    ns = lambda t: MomentPolynomial(("n", "s"), t)
    assert mo.wishart_plain_moment(1) == ns({(1, 1): 1})
    assert mo.wishart_plain_moment(2) == ns({(1, 2): 1, (2, 1): 1})
    for p in range(1, 7):
        at_n = mo.wishart_plain_moment(p).substitute("s", 1, "n", 1)
        assert at_n.coeff(p + 1) == cb.catalan(p)


# --- modified GUE ----------------------------------------------------------------


def test_gue_modified_examples():
    assert mo.gue_modified_moment(1, 1) == poly_d(d4=1)
    assert mo.gue_modified_moment(1, 2) == poly_d(d5=2, d3=2)
    assert mo.gue_modified_moment(2, 2) == poly_d(d7=8, d5=26, d3=14)
    assert mo.gue_modified_moment(0, 3) == poly_d(d4=1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_gue_second_order_against_wick(k):
    poly = mo.gue_modified_moment(1, k)
    for d in (1, 2):
        assert poly.evaluate(d=d) == round(wick_gue_trace(d, k, 2))


def test_gue_fourth_order_against_wick():
    vals = [wick_gue_trace(d, 2, 4) for d in (1, 2, 3)]
    poly = mo.gue_modified_moment(2, 2)
    assert [poly.evaluate(d=d) for d in (1, 2, 3)] == [round(v) for v in vals]


@pytest.mark.parametrize("p,k", [(1, 1), (1, 3), (2, 1), (2, 2), (2, 3), (3, 2)])
def test_gue_against_direct_sum(p, k, brute_lift_sum):
    poly = mo.gue_modified_moment(p, k)
    terms = brute_lift_sum["gue"](p, k)
    assert poly == MomentPolynomial(("d",), {(e,): c for e, c in terms.items()})


def test_gue_leading_and_parity():
    for p in range(1, 5):
        for k in range(1, 4):
            poly = mo.gue_modified_moment(p, k)
            top = 2 * p + k + 1
            assert poly.degree("d") == top
            assert poly.coeff(top) == k**p * cb.catalan(p)
            assert all((top - e[0]) % 2 == 0 for e in poly.terms)


def test_gue_unbalanced():
    poly = mo.gue_modified_moment(1, 2, balanced=False)
    assert poly.vars == ("dA", "dB")
    assert poly == MomentPolynomial(("dA", "dB"), {(2, 3): 2, (2, 1): 2})
    for p in range(1, 4):
        for k in range(1, 4):
            u = mo.gue_modified_moment(p, k, balanced=False)
            assert u.coeff(p + 1, p + k) == cb.catalan(p) * k**p
            assert max(e[0] + e[1] for e in u.terms) == 2 * p + k + 1
            assert u.substitute("dB", 1, "dA", 1).terms == mo.gue_modified_moment(p, k).terms


def test_gue_caps():
    with pytest.raises(ResourceError):
        mo.gue_modified_moment(6, 2)
    with pytest.raises(ResourceError):
        mo.gue_modified_moment(2, 5)


# --- modified Wishart ------------------------------------------------------------


def test_wishart_modified_examples():
    ds = lambda t: MomentPolynomial(("d", "s"), t)
    assert mo.wishart_modified_moment(1, 1) == ds({(2, 1): 1})
    assert mo.wishart_modified_moment(1, 2) == ds({(3, 1): 2})
    assert mo.wishart_modified_moment(2, 1) == ds({(4, 1): 1, (2, 2): 1})
    assert mo.wishart_modified_moment(2, 2) == ds({(5, 1): 2, (3, 2): 4, (3, 1): 2})


@pytest.mark.parametrize("k", [1, 2])
def test_wishart_against_wick(k):
    for order in (1, 2):
        poly = mo.wishart_modified_moment(order, k)
        for d in (1, 2):
            for s in (1, 2, 5):
                assert poly.evaluate(d=d, s=s) == round(wick_wishart_trace(d, k, s, order))


@pytest.mark.parametrize("p,k", [(1, 3), (2, 2), (3, 1), (3, 2), (4, 2)])
def test_wishart_against_direct_sum(p, k, brute_lift_sum):
    terms = brute_lift_sum["wishart"](p, k)
    assert mo.wishart_modified_moment(p, k) == MomentPolynomial(("d", "s"), terms)


def test_wishart_leading_is_mp_moment():
    for p in range(1, 5):
        for k in range(1, 4):
            for c in (1, 2):
                poly = mo.wishart_modified_moment(p, k).at_environment_ratio(c)
                assert poly.degree("d") == 2 * p + k + 1
                assert poly.coeff(2 * p + k + 1) == mo.mp_moment(c * k, p)


# --- word moments -----------------------------------------------------------------


def test_word_examples():
    for k in (1, 2, 3):
        assert mo.gue_word_moment((1, 1), k) == MomentPolynomial(("d",), {(k + 3,): 1})
    for k in (2, 3):
        assert mo.gue_word_moment((1, 2), k) == MomentPolynomial(("d",), {(k + 1,): 1})
    assert mo.word_limit((1, 2, 1, 2), 2) == 0
    assert mo.word_limit((1, 1, 2, 2), 2) == 1
    with pytest.raises(ValidationError):
        mo.gue_word_moment((1, 2, 1), 2)


def test_word_against_wick():
    for word in [(1, 2), (1, 1), (1, 2, 1, 2), (1, 1, 2, 2), (1, 2, 2, 1)]:
        poly = mo.gue_word_moment(word, 2)
        for d in (1, 2):
            assert poly.evaluate(d=d) == round(wick_gue_trace(d, 2, len(word), word=word))


def test_word_limits_count_compatible_nc_pairings():
    for length in (2, 4, 6):
        for word in itertools.product((1, 2, 3), repeat=length):
            assert mo.word_limit(word, 3) == mo.compatible_nc_pairings(word)


def test_words_sum_to_modified_moment():
    for p, k in [(1, 2), (2, 2), (2, 3)]:
        total = MomentPolynomial.zero(("d",))
        for word in itertools.product(range(1, k + 1), repeat=2 * p):
            total = total + mo.gue_word_moment(word, k)
        assert total == mo.gue_modified_moment(p, k)


# --- partially transposed leading terms -------------------------------------------


def test_gamma_leading_restricted_formula():
    assert mo.gamma_modified_moment_leading(1, 2) == [(5, 2)]
    assert mo.gamma_modified_moment_leading(1, 3) == [(6, 3)]
    assert mo.gamma_modified_moment_leading(3, 4) == [(11, 5 * 2 * 2**3)]
    assert mo.gamma_modified_moment_leading(2, 3, half_only=False) == [(8, 2 * 9)]


def test_gamma_leading_against_exact_wick():
    # partial transposition on the last ceil(k/2) factors keeps the full leading term
    vals = [wick_gue_trace(d, 2, 4, pt=True) for d in (1, 2, 3)]
    assert fit_odd_polynomial(vals, (1, 2, 3), (7, 5, 3)) == [8, 26, 14]
    assert mo.gamma_modified_moment_leading(2, 2, half_only=False) == [(7, 8)]
    vals = [wick_gue_trace(d, 3, 2, pt=True) for d in (1, 2, 3)]
    assert fit_odd_polynomial(vals, (1, 2, 3), (6, 4, 2)) == [3, 6, 0]
    assert mo.gamma_modified_moment_leading(1, 3, half_only=False) == [(6, 3)]


# --- second moment and variance ---------------------------------------------------


def test_second_moment_small():
    poly = mo.second_moment_poly(1, 1)
    assert poly == MomentPolynomial(("d", "s"), {(4, 2): 1, (2, 1): 1})
    # E(Tr W~)^2 = d^(2(k-1)) E(Tr W)^2 with E(Tr W)^2 = n^2 s^2 + n s
    assert mo.second_moment_poly(1, 2) == MomentPolynomial(("d", "s"), {(6, 2): 4, (4, 1): 4})


def test_second_moment_leading_factorizes():
    for p, k in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)]:
        for c in (1, 2):
            sec = mo.second_moment_poly(p, k).at_environment_ratio(c)
            top = 2 * (2 * p + k + 1)
            assert sec.degree("d") == top
            assert sec.coeff(top) == mo.mp_moment(c * k, p) ** 2
            var = mo.variance_poly(p, k, c)
            assert var.degree("d") <= top - 2


def test_variance_known_value():
    assert mo.variance_poly(2, 2, 1) == MomentPolynomial(("d",), {(10,): 152, (8,): 120, (6,): 40, (4,): 8})


# --- limit laws --------------------------------------------------------------------


def test_limit_moment_examples():
    assert mo.sc_moment(2, 2) == 2
    assert mo.sc_moment(Fraction(3, 2), 5) == 0
    assert [mo.mp_moment(1, p) for p in range(1, 9)] == [cb.catalan(p) for p in range(1, 9)]
    assert [mo.mp_moment(2, p) for p in range(1, 5)] == [2, 6, 22, 90]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sc_quadrature(k):
    r = 2 * np.sqrt(k)
    for q in range(0, 9):
        # weight sqrt(r - x) sqrt(x + r) is handled exactly by QUADPACK's algebraic rule
        val, _ = quad(lambda x: x**q / (2 * np.pi * k), -r, r, weight="alg", wvar=(0.5, 0.5))
        ref = float(mo.sc_moment(k, q))
        assert abs(val - ref) <= 1e-6 * max(1.0, abs(ref))


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 3.0])
def test_mp_quadrature(lam):
    lo, hi = mo.mp_support(lam)
    atom = mo.mp_atom(lam)
    if lam == 1:
        # lower edge at 0: the density behaves like x^(-1/2) there
        mass, _ = quad(lambda x: 1 / (2 * np.pi), lo, hi, weight="alg", wvar=(-0.5, 0.5))
    else:
        mass, _ = quad(lambda x: 1 / (2 * np.pi * x), lo, hi, weight="alg", wvar=(0.5, 0.5))
    assert abs(mass + atom - 1) < 1e-8
    for q in range(1, 9):
        val, _ = quad(lambda x: x ** (q - 1) / (2 * np.pi), lo, hi, weight="alg", wvar=(0.5, 0.5))
        ref = float(mo.mp_moment(lam, q))
        assert abs(val - ref) <= 1e-6 * ref


def test_density_examples():
    assert mo.sc_density(2, 2 * np.sqrt(2)) == 0
    assert mo.sc_density(2, -2 * np.sqrt(2)) == 0
    lo, hi = mo.mp_support(2)
    assert np.isclose(lo, (np.sqrt(2) - 1) ** 2) and np.isclose(hi, (np.sqrt(2) + 1) ** 2)
    xs = np.linspace(0, 7, 701)
    inside = (xs > lo) & (xs < hi)
    assert np.all(mo.mp_density(2, xs)[inside] > 0) and np.all(mo.mp_density(2, xs)[~inside] == 0)
    with pytest.raises(ValidationError):
        mo.mp_density(0, 1.0)


def test_limit_law_dispatch():
    dens, mom = mo.limit_law("wishart", 2, 1.0)
    assert mom(3) == 22
    dens, mom = mo.limit_law("gue", 3)
    assert mom(4) == 18
    with pytest.raises(ValidationError):
        mo.limit_law("goe", 2)
