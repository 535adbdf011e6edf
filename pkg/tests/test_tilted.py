import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from assembly_lab import assembly as A
from assembly_lab import counting as ct
from assembly_lab import tilted
from assembly_lab.errors import DivergenceError, InvalidInputError, NoSolutionError, RangeError

SP, PM, MP = A.SET_PARTITIONS, A.PERMUTATIONS, A.MAPPINGS
X_ONLY = A.from_json({"name": "singletons", "m": [1]})


def test_y_pmf_examples():
    d = tilted.y_pmf(SP, Fraction(1), "finite", 2)
    assert [d.prob(1), d.prob(2)] == [Fraction(2, 3), Fraction(1, 3)]
    x = 0.4
    d = tilted.y_pmf(PM, x, "infinite")
    for i in range(1, 10):
        assert d.prob(i) == pytest.approx(x**i / (i * -math.log(1 - x)), rel=1e-12)
    assert abs(d.pmf.sum() - 1) <= 1e-14 + d.tail_bound
    assert tilted.y_pmf(SP, 1e-6, "infinite").x_prob(0) > 1 - 1e-6


def test_y_pmf_errors():
    with pytest.raises(DivergenceError):
        tilted.y_pmf(PM, 1.5, "infinite")
    with pytest.raises(InvalidInputError):
        tilted.y_pmf(SP, 0.0, "finite", 3)


def test_mean_X_examples():
    assert tilted.mean_X(SP, 0.01) == pytest.approx(0.005, rel=0.05)
    assert tilted.mean_X(X_ONLY, 0.7) == 0
    direct = tilted.y_pmf(PM, 0.5, "infinite").mean() - 1
    assert tilted.mean_X(PM, 0.5) == pytest.approx(direct, abs=1e-10)
    closed = 0.5 / (0.5 * math.log(2)) - 1  # x A'(x)/A(x) with A = -log(1-x)/x
    assert tilted.mean_X(PM, 0.5) == pytest.approx(closed, rel=1e-12)


@pytest.mark.parametrize("spec", [SP, PM, MP], ids=lambda s: s.name)
def test_mean_X_small_x_slope(spec):
    target = spec.m(2) / (2 * spec.m(1))
    r3, r4 = tilted.mean_X(spec, 1e-3) / 1e-3, tilted.mean_X(spec, 1e-4) / 1e-4
    # Richardson: the O(x) correction cancels in (10 r4 - r3) / 9
    assert (10 * r4 - r3) / 9 == pytest.approx(target, rel=0.01)
    assert abs(r4 - target) < abs(r3 - target)


def test_tn_pmf_examples():
    d = tilted.tn_pmf(PM, 1.0, 3)
    assert d.prob(3) == pytest.approx(math.exp(-11 / 6), rel=1e-14)
    assert d.prob(0) == pytest.approx(math.exp(-sum(1 / i for i in range(1, 4))), rel=1e-14)
    assert tilted.tn_pmf(SP, 1.0, 1).prob(1) == pytest.approx(math.exp(-1))
    exact = tilted.tn_pmf(PM, Fraction(1), 3)
    assert exact.coeffs[3] == 1  # 1/6 + 1/2 + 1/3


def test_ysum_pmf_examples():
    x = Fraction(1, 3)
    table = tilted.ysum_pmf(SP, x, 2, 3, "finite")
    w = [x, x**2 / 2, x**3 / 6]
    p1, p2 = w[0] / sum(w), w[1] / sum(w)
    assert table.prob(2, 3) == 2 * p1 * p2
    assert table.prob(0, 0) == 1 and table.prob(0, 1) == 0
    x = 0.2
    table = tilted.ysum_pmf(PM, x, 5, 5, "infinite")
    assert table.prob(5, 5) == pytest.approx((x / -math.log(1 - x)) ** 5, rel=1e-12)


def test_xsum_matches_ysum():
    for spec, x in ((SP, 0.3), (PM, 0.2), (MP, 0.1)):
        for k, r in ((5, 3), (12, 6)):
            table = tilted.ysum_pmf(spec, x, k, k + r, "infinite")
            xs = tilted.xsum_pmf(spec, x, k, r)
            for s in range(r + 1):
                assert xs[s] == pytest.approx(float(table.prob(k, k + s)), rel=1e-10)


def test_solve_x_T_examples():
    assert tilted.solve_x_T(PM, 1) == pytest.approx(1.0)
    assert tilted.solve_x_T(X_ONLY, 5) == pytest.approx(5.0)
    x = tilted.solve_x_T(SP, 10)
    mean_T = sum(i * A.lambda_i(SP, x, i) for i in range(1, 11))
    assert abs(mean_T - 10) <= 1e-9 * 10


def test_solve_x_p1_ratio_examples():
    assert tilted.solve_x_p1(SP, 100, 95, "ratio", exact=True) == Fraction(1, 9)
    assert tilted.solve_x_p1(PM, 100, 95, "ratio", exact=True) == Fraction(1, 9)
    with pytest.raises(RangeError):
        tilted.solve_x_p1(SP, 100, 50, "ratio")
    with pytest.raises(RangeError):
        tilted.solve_x_p1(SP, 100, 52, "ratio")  # x = 96/4 = 24, x rho > 1


@pytest.mark.parametrize("spec", [SP, PM, MP], ids=lambda s: s.name)
def test_solve_x_p1_root_is_smallest(spec):
    for n, k in ((100, 95), (1000, 980), (60, 55)):
        r = n - k
        x = tilted.solve_x_p1(spec, n, k)

        def g(v):
            return k * A.lambda_i(spec, v, 2) / A.egf_M(spec, v).value - r

        assert abs(g(x)) <= 1e-12 * r
        grid = np.linspace(x * 1e-3, x * (1 - 1e-9), 400)
        assert all(g(v) < 0 for v in grid)


def test_solve_x_p1_no_root():
    # x^2 / (-log(1-x)) peaks near 0.41, so 40 p_1(x) = 10 is unreachable
    with pytest.raises(NoSolutionError):
        tilted.solve_x_p1(PM, 50, 40)


def test_solve_theta_x():
    theta, x = tilted.solve_theta_x(SP, 100, 95)
    lam = [theta * A.lambda_i(SP, x, i) for i in range(1, 101)]
    assert sum(lam) == pytest.approx(95, rel=1e-10)
    assert sum(i * v for i, v in enumerate(lam, start=1)) == pytest.approx(100, rel=1e-10)


def test_identity_examples():
    assert tilted.identity_check_pn(PM, Fraction(1), 3) == 0
    assert tilted.identity_check_pn(SP, Fraction(1, 2), 4) == 0
    assert tilted.identity_check_pn(MP, Fraction(1, 3), 0) == 0
    for x in (Fraction(1, 7), Fraction(2), Fraction(5, 3)):
        assert tilted.identity_check_pnk(SP, x, 3, 2) == 0
    assert tilted.identity_check_pnk(PM, 0.3, 6, 2) <= 1e-10
    assert ct.count_pnk(PM, 6, 2) == 274
    for spec in (SP, PM, MP):
        assert tilted.identity_check_pnk(spec, Fraction(1, 4), 7, 7) == 0


def test_identity_x_invariance_grid():
    grid = [Fraction(1, 10), Fraction(1, 4), Fraction(1, 3)]
    for spec in (SP, PM, MP):
        for x in grid:
            for n in range(1, 9):
                assert tilted.identity_check_pn(spec, x, n) == 0
                for k in range(1, n + 1):
                    assert tilted.identity_check_pnk(spec, x, n, k, "finite") == 0
                    assert tilted.identity_check_pnk(spec, x, n, k, "infinite") == 0


def test_multinomial_identity():
    """Counts of an i.i.d. k-sample from the Y law are multinomial in the type."""
    x = Fraction(2, 5)
    for spec in (SP, PM, MP):
        for n in range(1, 9):
            d = tilted.y_pmf(spec, x, "finite", n)
            p = [d.prob(i) for i in range(1, n + 1)]
            for k in range(1, n + 1):
                brute: Counter = Counter()
                for seq in itertools.product(range(1, n - k + 2), repeat=k):
                    if sum(seq) != n:
                        continue
                    w = Fraction(1)
                    for y in seq:
                        w *= p[y - 1]
                    brute[ct.PartitionType.from_parts(seq)] += w
                for a in ct.enumerate_types(n, k):
                    closed = Fraction(math.factorial(k))
                    for i, ai in enumerate(a.a, start=1):
                        closed *= p[i - 1] ** ai / math.factorial(ai)
                    assert brute[a] == closed


def test_theta_x_marginal_examples():
    m = tilted.theta_x_marginal("assembly", 1, 2.0, 1.0, 1)
    assert m.family == "poisson" and m.params["mu"] == 2.0
    b = tilted.theta_x_marginal("selection", 3, 1.0, 1.0, 1)
    assert b.family == "binomial" and b.params == {"n": 3, "p": 0.5}
    g = tilted.theta_x_marginal("multiset", 1, 1.0, 0.5, 1)
    for j in range(1, 6):
        assert g.sf_ge(j) == pytest.approx(2.0**-j)
    with pytest.raises(DivergenceError):
        tilted.theta_x_marginal("multiset", 1, 1.0, 1.0, 1)


def test_convolution_csv_rows():
    rows = tilted.ysum_pmf(SP, Fraction(1, 2), 2, 3, "finite").to_csv_rows()
    assert rows[0] == (0, 0, 1.0)
    assert all(0 <= p <= 1 for _, _, p in rows)


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=Fraction(1, 20), max_value=Fraction(3, 1), max_denominator=20),
       st.integers(1, 8), st.sampled_from([SP, PM]))
def test_property_exact_identity_finite_mode(x, n, spec):
    assert tilted.identity_check_pn(spec, x, n) == 0
    for k in range(1, n + 1):
        assert tilted.identity_check_pnk(spec, x, n, k, "finite") == 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.9), st.integers(1, 6), st.integers(0, 10))
def test_property_ysum_rows_are_subprobabilities(x, k, r):
    table = tilted.ysum_pmf(PM, x, k, k + r, "infinite")
    for j in range(k + 1):
        assert sum(float(table.prob(j, s)) for s in range(k + r + 1)) <= 1 + 1e-12
