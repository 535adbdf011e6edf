import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from assembly_lab import assembly as A
from assembly_lab import bounds as bd
from assembly_lab import counting as ct
from assembly_lab.errors import RangeError, UnsupportedError

SP, PM, MP, GR = A.SET_PARTITIONS, A.PERMUTATIONS, A.MAPPINGS, A.GRAPHS
NO_TRIPLES = A.from_json({"name": "no-triples", "m": [1, 1, 0, 1]})


def test_c0_printed_value():
    assert bd.C0 == pytest.approx(1.0844375514192, abs=1e-13)


def test_lambda_limit_examples():
    assert bd.lambda_limit(SP, 1) == Fraction(2, 3)
    assert bd.lambda_limit(PM, 1) == Fraction(4, 3)
    assert bd.lambda_limit(SP, 0) == 0
    assert bd.lambda_limit_ell(SP, 1, 2) == Fraction(1, 3)
    assert bd.lambda_limit_ell(PM, 2, 2) == 16


def test_lambda_ell_one_is_lambda_exactly():
    for spec in (SP, PM, MP):
        for t in (Fraction(j, 7) for j in range(0, 30)):
            assert bd.lambda_limit_ell(spec, t, 1) == bd.lambda_limit(spec, t)


def test_asymptotic_pnk():
    exact = math.log(ct.low_rank_pnk(SP, 2500, 50))
    assert abs(bd.asymptotic_pnk(SP, 2500, 50) - exact) <= 0.25 * abs(exact)
    assert bd.asymptotic_pnk(MP, 300, 0) == 0.0
    errs = []
    for n, r in ((400, 20), (1600, 40), (6400, 80)):
        ex = math.log(ct.low_rank_pnk(SP, n, r))
        errs.append(abs(bd.asymptotic_pnk(SP, n, r) - ex) / ex)
    assert errs[0] > errs[1] > errs[2]


def test_lemma23_examples():
    res = bd.lemma23_bound(SP, 6, 2)
    assert res.y == pytest.approx(4 / 3) and res.bound == pytest.approx(math.expm1(4 / 3))
    assert float(ct.low_rank_largest_law(SP, 6, 2)[3]) == pytest.approx(4 / 13)
    zero = bd.lemma23_bound(NO_TRIPLES, 50, 5)
    assert zero.y == 0 and zero.bound == 0
    assert 3 not in ct.low_rank_largest_law(NO_TRIPLES, 50, 5)
    big = bd.lemma23_bound(SP, 10_000, 10)
    assert big.bound == pytest.approx(math.expm1(2 / 3 * 100 / 9980))
    assert float(ct.low_rank_largest_law(SP, 10_000, 10)[3]) <= big.bound


def test_lemma24_examples():
    res = bd.lemma24_bound(SP, 10_000, 10)
    assert res.x == pytest.approx(20 / 9980) and res.rho == pytest.approx(0.550321, abs=1e-6)
    assert res.holds
    law = ct.low_rank_largest_law(SP, 10_000, 10)
    assert float(sum(v for j, v in law.items() if j >= 4)) <= res.u4
    bad = bd.lemma24_bound(SP, 100, 45)
    assert bad.x == pytest.approx(9) and not bad.hyp_24
    assert bad.lower is None and bad.u4 is None
    one = bd.lemma24_bound(SP, 200, 1)
    assert one.holds and one.u4 >= 0
    assert ct.low_rank_largest_law(SP, 200, 1) == {2: 1}


def test_lemma24_unsupported_for_graphs():
    with pytest.raises(UnsupportedError):
        bd.lemma24_bound(GR, 1000, 5)


@pytest.mark.parametrize("spec", [SP, PM], ids=lambda s: s.name)
def test_sandwich_contains_exact(spec):
    san = bd.thm15_sandwich(spec, 10_000, 10)
    assert san.hypotheses and san.guarantee
    assert san.z == pytest.approx(bd.lemma23_bound(spec, 10_000, 10).bound + san.u4)
    exact = math.log(ct.low_rank_pnk(spec, 10_000, 10))
    assert san.log_lower - 1e-9 <= exact <= san.log_upper + 1e-9
    a = ct.inverse_copartition((1,) * 10, 10_000)
    assert san.log_lower == pytest.approx(ct.log_count_N(spec, a), abs=1e-9)


def test_sandwich_printed_lower_is_not_a_bound():
    # n^{2r} in place of (n)_{2r} overshoots the exact count at this size
    san = bd.thm15_sandwich(SP, 10_000, 10)
    assert san.log_lower_printed > math.log(ct.low_rank_pnk(SP, 10_000, 10))


def test_sandwich_flags_without_guarantee():
    san = bd.thm15_sandwich(SP, 100, 45)
    assert not san.hypotheses and not san.guarantee
    assert san.log_lower is None and san.log_upper is None


def test_hypothesis_flag_contract():
    for spec in (SP, PM, MP):
        for n in (20, 60, 200, 1000):
            for r in range(1, n // 2):
                l24 = bd.lemma24_bound(spec, n, r)
                assert (l24.u4 is not None) == l24.holds
                san = bd.thm15_sandwich(spec, n, r)
                if not san.guarantee:
                    assert san.log_lower is None and san.log_upper is None
                else:
                    assert san.hypotheses and san.z < 1


def test_feller_examples():
    f = bd.feller_bounds(1, 10, 0.1)
    assert f.b == pytest.approx(0.387420489, rel=1e-9)
    assert f.lower == pytest.approx(math.exp(-1) * math.exp(-2 / 9), rel=1e-9)
    assert f.upper == pytest.approx(math.exp(-1) * math.exp(0.1), rel=1e-9)
    assert f.strict()
    z = bd.feller_bounds(0, 10, 0.1)
    assert z.lower == pytest.approx(math.exp(-1 - 1 / 9)) and z.upper == pytest.approx(math.exp(-1))
    assert z.strict()


def test_feller_k_equals_n_is_flagged():
    f = bd.feller_bounds(1, 1, 0.5)
    assert f.lower_singular and f.lower == 0.0


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 1000), st.floats(1e-3, 1 - 1e-3), st.data())
def test_property_feller_strict(n, p, data):
    k = data.draw(st.integers(0, n - 1)) if n > 1 else 0
    assert bd.feller_bounds(k, n, p).strict()


def test_binomial_point_bounds_h_zero():
    res = bd.binomial_point_bounds(20, 100, 0.2)
    assert res.h == 0 and res.f == 0
    assert res.b < 1 / math.sqrt(2 * math.pi * 0.2 * 0.8 * 100)
    assert res.b == pytest.approx(stats.binom.pmf(20, 100, 0.2))


def test_binomial_point_bounds_display_fails_off_center():
    """The displayed f/g exponents do not give a sandwich away from k = pn.

    At (n, p, k) = (100, 0.2, 25) the lower bound exceeds the exact mass;
    this is the documented failure behind the auxiliary sweep.
    """
    res = bd.binomial_point_bounds(25, 100, 0.2)
    assert res.valid
    assert res.b == pytest.approx(stats.binom.pmf(25, 100, 0.2))
    assert res.lower > res.b and not res.strict()


def test_sd_f_g_formulas():
    assert bd.sd_f(0.0, 50, 0.3) == 0
    h, n, p = -2.0, 40.0, 0.25
    d = p * n - h
    assert bd.sd_g(h, n, p) == pytest.approx(h * p * n / d + h * h / d + h / (2 * d))
    with pytest.raises(RangeError):
        bd.sd_g(20.0, 40.0, 0.25)


def test_deviation_thresholds_examples():
    th = bd.deviation_thresholds(SP, 10_000, 9_990)
    assert th.n3_lhs == pytest.approx(1e7 / 9990**2, rel=1e-12)
    assert th.n3_rhs_statement == pytest.approx(43.6, rel=0.01)
    assert th.n3_ok and th.x_rho_ok
    assert th.n3 == 1488
    deg = bd.deviation_thresholds(SP, 500, 500)
    assert deg.n3_lhs == 0 and deg.n3_ok


def test_deviation_thresholds_sqrt_family():
    th = bd.deviation_thresholds(SP, 10_000, 9_900, family=bd.t_sqrt_family(1.0))
    # the bound the proof uses stays near lambda(1) = 2/3; the displayed mu grows like r
    assert th.mu_proof == pytest.approx(2 / 3, rel=0.05)
    assert th.mu > 50


def test_sd_bounds_degenerate_rank_zero():
    rep = bd.sd_bounds(SP, 400, 400, 0)
    assert rep.x == 0 and rep.lam_printed == 0 and rep.lam_reindexed == 0
    assert ct.low_rank_largest_law(SP, 400, 0) == {1: 1}


def test_sd_bounds_2500_example_flags():
    rep = bd.sd_bounds(SP, 2500, 2450, 0)
    # r = 50 is far outside n r^3 / k^2 <= const, so no interval is asserted
    assert not rep.effective
    assert not rep.thresholds.n3_ok


def test_sd_lambda_tracks_limit_along_sqrt_family():
    n = 10**6
    r = int(math.sqrt(n))
    rep = bd.sd_bounds(SP, n, n - r, family=bd.t_sqrt_family(1.0), grid=[n])
    assert rep.lam_reindexed / float(bd.lambda_limit(SP, 1)) == pytest.approx(1, abs=0.02)


def test_type_ratio_examples():
    tr = bd.type_ratios(SP, 100, 10)
    assert tr.ratio1 == Fraction(20, 27)
    assert tr.ratio1 == tr.exact1
    assert tr.ratio3 == tr.exact3
    # the displayed second ratio omits a 1/2! for the two size-3 components
    assert tr.ratio2 == 2 * tr.exact2
    zero = bd.type_ratios(NO_TRIPLES, 100, 10)
    assert zero.ratio1 == 0 and zero.ratio2 == 0


def test_type_ratios_match_counts_small_n():
    for spec in (SP, PM, MP):
        for n in range(10, 41):
            for r in range(4, n // 2):
                tr = bd.type_ratios(spec, n, r, with_exact=True)
                assert tr.ratio1 == tr.exact1 and tr.ratio3 == tr.exact3
                assert tr.ratio2 == 2 * tr.exact2


def test_type_ratio_proxy_at_large_n():
    tr = bd.type_ratios(SP, 10**6, 30)
    assert float(tr.exact1) / tr.proxy1 == pytest.approx(1, abs=0.1)


def test_conjecture_C_examples():
    assert bd.conjecture_C(SP, 0).value == 0
    assert bd.conjecture_C(PM, 1).value == Fraction(2, 9)


def test_thm2_classify():
    b = bd.thm2_classify(SP, 10_000, 100)
    assert b.boundary and b.ell == 1 and b.support == (2, 3)
    assert b.p_boundary[2] == pytest.approx(math.exp(-2 / 3))
    mid = bd.thm2_classify(SP, 10**6, int(10**3.6))
    assert not mid.boundary and mid.support == (3,)
    small = bd.thm2_classify(SP, 10**6, 5)
    assert small.support == (2,)
    two = bd.thm2_classify(SP, 10_000, 464)
    assert two.boundary and two.ell == 2 and two.support == (3, 4)
    assert b.label == "asymptotic prediction"


def test_bounds_report_json():
    rep = bd.bounds_report(SP, 10_000, 10, sd=True)
    blob = json.loads(rep.dumps())
    assert blob["hyp_24"] and blob["hyp_needed"] and blob["guarantee"]
    assert blob["c0"] == pytest.approx(bd.C0)
    assert "d3_printed" in blob["sd"] and "n3" in blob["sd"]["thresholds"]
    bad = json.loads(bd.bounds_report(SP, 100, 45).dumps())
    assert not bad["hyp_24"] and bad["pnk_lower"] is None and bad["u4"] is None


def test_interval_log_space():
    iv = bd.Interval(-800.0, -700.0)
    assert iv.lower == 0.0 and iv.upper > 0 and not iv.empty  # lower underflows, log form does not
    assert bd.Interval(800.0, 900.0).upper == math.inf
    assert bd.Interval(1.0, 0.0).empty
    assert bd.Interval(-1.0, 0.0).contains(0.5)
