"""Limit constants and completely effective bounds in the low-rank regime.

Every function that can issue a guarantee returns hypothesis flags next to
it; when a flag is false the guarantee fields are ``None``.  Bounds on
probabilities are evaluated in log space.

Several displayed inequalities from the source are implemented exactly as
printed even where a numerical check shows them to be false; the
``printed`` / ``reindexed`` pairs below make such discrepancies visible
instead of silently correcting them.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import assembly as asm
from .assembly import AssemblySpec
from .counting import count_N, log_count_N, inverse_copartition
from .errors import InvalidInputError, RangeError
from . import tilted

__all__ = [
    "C0",
    "BoundsReport",
    "lambda_limit",
    "lambda_limit_ell",
    "asymptotic_pnk",
    "lemma23_bound",
    "lemma24_bound",
    "thm15_sandwich",
    "feller_bounds",
    "binomial_point_bounds",
    "sd_f",
    "sd_g",
    "deviation_thresholds",
    "fixed_rank_family",
    "t_sqrt_family",
    "sd_bounds",
    "type_ratios",
    "conjecture_C",
    "thm2_classify",
    "bounds_report",
]

C0 = math.e / math.sqrt(2 * math.pi)
# slack for log-space comparisons against exact values
LOG_MARGIN = 1e-9


def _m123(spec: AssemblySpec) -> tuple[int, int, int]:
    return spec.m(1), spec.m(2), spec.m(3)


def _q(v):
    """Keep rationals exact, everything else float."""
    if isinstance(v, bool):
        raise InvalidInputError("boolean is not a number")
    if isinstance(v, Rational):
        return Fraction(v)
    return float(v)


# -- limit constants ------------------------------------------------------------

def lambda_limit(spec: AssemblySpec, t):
    """Poisson mean 2 m1 m3 t^2 / (3 m2^2) of D_3 on the scale r ~ t sqrt(n)."""
    m1, m2, m3 = _m123(spec)
    if m2 == 0:
        raise InvalidInputError("lambda(t, M) is undefined when m_2 = 0")
    t = _q(t)
    return Fraction(2 * m1 * m3, 3 * m2 * m2) * t * t if isinstance(t, Fraction) else \
        2 * m1 * m3 * t * t / (3 * m2 * m2)


def lambda_limit_ell(spec: AssemblySpec, t, ell: int):
    """2^(l+1) m1^l m_(l+2) t^(l+1) / ((l+2)! m2^(l+1)) on the scale r ~ t n^(l/(l+1))."""
    if ell < 1:
        raise InvalidInputError("ell must be at least 1")
    m1, m2 = spec.m(1), spec.m(2)
    if m2 == 0:
        raise InvalidInputError("lambda(t, ell, M) is undefined when m_2 = 0")
    c = Fraction(2 ** (ell + 1) * m1**ell * spec.m(ell + 2), math.factorial(ell + 2) * m2 ** (ell + 1))
    t = _q(t)
    return c * t ** (ell + 1) if isinstance(t, Fraction) else float(c) * t ** (ell + 1)


def _log_type1(spec: AssemblySpec, n: int, r: int, falling: bool = True) -> float:
    """log of (n)_{2r} m1^(n-2r) m2^r / (r! 2^r); n^{2r} replaces (n)_{2r} if not ``falling``."""
    m1, m2 = spec.m(1), spec.m(2)
    lead = math.lgamma(n + 1) - math.lgamma(n - 2 * r + 1) if falling else 2 * r * math.log(n)
    return (lead + (n - 2 * r) * math.log(m1) + r * math.log(m2)
            - math.lgamma(r + 1) - r * math.log(2))


def asymptotic_pnk(spec: AssemblySpec, n: int, r: int) -> float:
    """log of n^{2r} m1^{n-2r} m2^r / (r! 2^r) * exp(-t^2 (2 - 2 m1 m3 / (3 m2^2))), t = r/sqrt(n)."""
    m1, m2, m3 = _m123(spec)
    if min(m1, m2, m3) <= 0:
        raise InvalidInputError("need m_1, m_2, m_3 > 0")
    if not 0 <= 2 * r <= n:
        raise RangeError("need 0 <= 2r <= n")
    if r == 0:
        return n * math.log(m1)
    t2 = r * r / n
    return _log_type1(spec, n, r, falling=False) - t2 * (2 - 2 * m1 * m3 / (3 * m2 * m2))


# -- size-3 and size>=4 tail bounds and the p(n,k) sandwich ---------------------

@dataclass(frozen=True)
class Lemma23Result:
    y: float
    bound: float  # guarantee P(L1 = 3) <= bound


def lemma23_bound(spec: AssemblySpec, n: int, r: int) -> Lemma23Result:
    """y = (2 m1 m3 / (3 m2^2)) r^2 / (n - 2r); P(L1 = 3) <= e^y - 1."""
    m1, m2, m3 = _m123(spec)
    if m1 <= 0 or m2 <= 0:
        raise InvalidInputError("need m_1, m_2 > 0")
    if not 0 < 2 * r < n or r <= 0:
        raise RangeError(f"need 0 < r < n/2 (n = {n}, r = {r})")
    y = 2 * m1 * m3 / (3 * m2 * m2) * r * r / (n - 2 * r)
    return Lemma23Result(y, math.expm1(y) if y < 709 else math.inf)


@dataclass(frozen=True)
class Lemma24Result:
    x: float
    rho: float
    hyp_24: bool       # x rho <= 1/2
    hyp_needed: bool   # 2 k rho^3 x^2 / m1 <= 1/2
    lower: float | None  # P(X_1 + ... + X_k = r) >= lower
    u4: float | None     # P(L1 >= 4) <= u4

    @property
    def holds(self) -> bool:
        return self.hyp_24 and self.hyp_needed


def lemma24_bound(spec: AssemblySpec, n: int, r: int) -> Lemma24Result:
    spec.require_low_rank()
    if not 0 < 2 * r < n or r <= 0:
        raise RangeError(f"need 0 < r < n/2 (n = {n}, r = {r})")
    m1, m2 = spec.m(1), spec.m(2)
    k = n - r
    x = 2 * m1 * r / (m2 * (n - 2 * r))
    rho = asm.rho(spec)
    hyp_24 = x * rho <= 0.5
    hyp_needed = 2 * k * rho**3 * x * x / m1 <= 0.5
    if not (hyp_24 and hyp_needed):
        return Lemma24Result(x, rho, hyp_24, hyp_needed, None, None)
    scale = 2 * C0 * math.sqrt(2 * math.pi * r)
    return Lemma24Result(x, rho, True, True, 1 / scale, k * 2 * rho**4 * x**3 / m1 * scale)


@dataclass(frozen=True)
class SandwichResult:
    y: float
    u4: float | None
    z: float | None
    hypotheses: bool
    guarantee: bool
    log_lower: float | None
    log_upper: float | None
    # n^{2r} in place of (n)_{2r}, as displayed; not a valid lower bound in general
    log_lower_printed: float | None
    note: str = ""


def thm15_sandwich(spec: AssemblySpec, n: int, r: int) -> SandwichResult:
    """N(n, a) <= p(n, k) <= N(n, a) / (1 - z) with a = (n-2r, r, 0, ...) and z = (e^y - 1) + u4."""
    l23 = lemma23_bound(spec, n, r)
    l24 = lemma24_bound(spec, n, r)
    note = "lower bound uses the falling factorial (n)_{2r}; the n^{2r} variant is reported separately"
    if not l24.holds:
        return SandwichResult(l23.y, None, None, False, False, None, None, None, note)
    z = l23.bound + l24.u4
    if z >= 1:
        return SandwichResult(l23.y, l24.u4, z, True, False, None, None, None, note)
    lo = _log_type1(spec, n, r)
    # upper = lower * (1 + z/(1-z)) = lower / (1-z)
    return SandwichResult(l23.y, l24.u4, z, True, True, lo, lo - math.log1p(-z),
                          _log_type1(spec, n, r, falling=False), note)


# -- auxiliary binomial inequalities ---------------------------------------------

@dataclass(frozen=True)
class FellerBounds:
    b: float
    lower: float
    upper: float
    lower_singular: bool = False
    log_b: float = 0.0
    log_lower: float = -math.inf
    log_upper: float = 0.0

    def strict(self) -> bool:
        """Strict sandwich, compared in log space so underflow cannot hide a violation."""
        return self.log_lower < self.log_b < self.log_upper


def _log_poisson(k: int, lam: float) -> float:
    return k * math.log(lam) - lam - math.lgamma(k + 1) if lam > 0 else (0.0 if k == 0 else -math.inf)


def feller_bounds(k: int, n: int, p: float) -> FellerBounds:
    """p(k; np) exp(-k^2/(n-k) - lam^2/(n-lam)) < b(k; n, p) < p(k; np) exp(k lam / n)."""
    if not 0 < p < 1 or not 0 <= k <= n or n < 1:
        raise InvalidInputError("need 0 < p < 1 and 0 <= k <= n")
    lam = n * p
    lp = _log_poisson(k, lam)
    log_b = float(stats.binom.logpmf(k, n, p))
    log_up = lp + k * lam / n
    if k == n:
        return FellerBounds(math.exp(log_b), 0.0, _safe_exp(log_up), True, log_b, -math.inf, log_up)
    log_lo = lp - k * k / (n - k) - lam * lam / (n - lam)
    return FellerBounds(math.exp(log_b), math.exp(log_lo), _safe_exp(log_up), False, log_b, log_lo, log_up)


def sd_f(h: float, n: float, p: float) -> float:
    q = 1 - p
    return -h / (2 * p * n) + h / (2 * q * n) - h * h / (p * n) - h * h / (q * n)


def sd_g(h: float, n: float, p: float) -> float:
    """The h < 0 branch of the lower exponent, which the SD bounds use for every h."""
    d = p * n - h
    if d <= 0:
        raise RangeError("p n - h must be positive")
    return h * p * n / d + h * h / d + h / (2 * d)


def _g_upper_branch(h: float, n: float, p: float) -> float:
    d = (1 - p) * n - h
    if d <= 0:
        raise RangeError("q n - h must be positive")
    return h * (1 - p) * n / d + h * h / d + h / (2 * d)


@dataclass(frozen=True)
class BinomialBounds:
    b: float
    h: float
    beta: float
    f: float
    g: float | None
    upper: float        # exp(f) / sqrt(2 pi p q n)
    lower: float | None  # exp(-beta + g) / sqrt(2 pi p q n)
    valid: bool
    log_b: float = 0.0
    log_upper: float = 0.0
    log_lower: float | None = None

    def strict(self) -> bool:
        return self.valid and self.log_lower < self.log_b < self.log_upper


def binomial_point_bounds(k: int, n: int, p: float) -> BinomialBounds:
    """The displayed upper (via f) and two-branch lower (via g, beta) point bounds."""
    if not 0 < p < 1 or p * n < 1 or not 0 < k < n:
        raise InvalidInputError("need 0 < p < 1, p n >= 1 and 0 < k < n")
    q = 1 - p
    h = k - p * n
    beta = 1 / (12 * k) + 1 / (12 * (n - k))
    log_scale = 0.5 * math.log(2 * math.pi * p * q * n)
    log_b = float(stats.binom.logpmf(k, n, p))
    b = math.exp(log_b)
    f = sd_f(h, n, p)
    try:
        if h > 0:
            g = _g_upper_branch(h, n, p)
        elif h < 0:
            g = sd_g(h, n, p)
        else:
            g = 0.0
    except RangeError:
        return BinomialBounds(b, h, beta, f, None, _safe_exp(f - log_scale), None, False,
                              log_b, f - log_scale, None)
    lo = -beta + g - log_scale
    return BinomialBounds(b, h, beta, f, g, _safe_exp(f - log_scale), _safe_exp(lo), True,
                          log_b, f - log_scale, lo)


# -- effectivity thresholds -------------------------------------------------------

def fixed_rank_family(r: int) -> Callable[[int], int]:
    return lambda n: n - r


def t_sqrt_family(t: float) -> Callable[[int], int]:
    return lambda n: n - int(math.floor(t * math.sqrt(n)))


def _sd_x(spec: AssemblySpec, n: int, k: int) -> float:
    return 2 * spec.m(1) / spec.m(2) * (n - k) / k


@dataclass(frozen=True)
class Thresholds:
    mu: float            # sup k b1/(b0+b1) over the family grid, as displayed
    log_n0: float        # mu e^2
    mu_proof: float      # sup k m3 x^2 / 3!, the binomial the proof actually bounds
    log_n0_proof: float
    n3_lhs: float
    n3_rhs_statement: float  # (m1 / 2 rho^4) (2 m1/m2)^3
    n3_rhs_proof: float      # (m1 / 2 rho^4) (m2/2 m1)^3
    x_rho_ok: bool
    n3_ok: bool              # LHS <= min of the two right sides
    n3: int | None           # smallest grid n with both n3 conditions (conservative side)
    family_grid: tuple[int, ...]


def deviation_thresholds(spec: AssemblySpec, n: int, k: int,
                         family: Callable[[int], int] | None = None,
                         grid: Sequence[int] | None = None) -> Thresholds:
    """n0 = exp(mu e^2) and the n3 condition, family-relative.

    ``family`` maps n' to k'; the sups run over ``grid`` (default: n' from n
    up to 1000 n on a geometric grid, which suffices whenever the family
    quantities are monotone, as for fixed rank).
    """
    spec.require_low_rank()
    m1, m2, m3 = _m123(spec)
    if family is None:
        family = fixed_rank_family(n - k)
    if grid is None:
        grid = sorted({n} | {int(round(n * 10 ** (j / 8))) for j in range(1, 25)})
    grid = tuple(int(g) for g in grid)
    rho = asm.rho(spec)
    rhs_stmt = m1 / (2 * rho**4) * (2 * m1 / m2) ** 3
    rhs_proof = m1 / (2 * rho**4) * (m2 / (2 * m1)) ** 3
    rhs = min(rhs_stmt, rhs_proof)

    mu = mu2 = 0.0
    for ng in grid:
        kg = family(ng)
        if not 1 <= kg <= ng:
            continue
        xg = _sd_x(spec, ng, kg)
        if xg == 0:
            continue  # rank 0 contributes nothing to either sup
        b0, b1 = m1 * xg, m2 * xg * xg / 2
        mu = max(mu, kg * b1 / (b0 + b1))
        mu2 = max(mu2, kg * m3 * xg * xg / 6)

    def cond(ng: int) -> bool:
        kg = family(ng)
        if not 1 <= kg <= ng:
            return False
        lhs = ng * (ng - kg) ** 3 / kg**2
        return _sd_x(spec, ng, kg) * rho <= 0.5 and lhs <= rhs

    x = _sd_x(spec, n, k) if k >= 1 else math.inf
    lhs = n * (n - k) ** 3 / k**2 if k >= 1 else math.inf
    n3 = _smallest(cond, 1, max(grid))
    return Thresholds(mu, mu * math.e**2, mu2, mu2 * math.e**2, lhs, rhs_stmt, rhs_proof,
                      x * rho <= 0.5, lhs <= rhs, n3, grid)


def _smallest(cond: Callable[[int], bool], lo: int, hi: int) -> int | None:
    """Smallest n in [lo, hi] with cond(n), assuming cond is eventually monotone."""
    if not cond(hi):
        return None
    # geometric scan for the first hit, then bisection on the last gap
    prev, cur = lo, lo
    while not cond(cur):
        prev, cur = cur, min(hi, max(cur + 1, int(cur * 1.25)))
    a, b = prev, cur
    while b - a > 1:
        mid = (a + b) // 2
        if cond(mid):
            b = mid
        else:
            a = mid
    return a if cond(a) else b


# -- SD deviation bounds--------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Closed interval [exp(log_lower), exp(log_upper)] kept in log space."""

    log_lower: float
    log_upper: float

    @property
    def lower(self) -> float:
        return _safe_exp(self.log_lower)

    @property
    def upper(self) -> float:
        return _safe_exp(self.log_upper)

    @property
    def empty(self) -> bool:
        return self.log_lower > self.log_upper

    def contains(self, v: float, margin: float = LOG_MARGIN) -> bool:
        lv = math.log(v) if v > 0 else -math.inf
        return self.log_lower - margin <= lv <= self.log_upper + margin


def _safe_exp(v: float) -> float:
    return math.inf if v > 709 else math.exp(v)


@dataclass
class SDReport:
    n: int
    k: int
    m: int
    x: float
    b0: float
    b1: float
    b2: float
    lam_printed: float
    lam_reindexed: float
    p: float
    beta: float
    f_vals: dict
    g_vals: dict
    thresholds: Thresholds
    effective: bool             # thresholds met (proof's mu) and every branch guard valid
    effective_printed_mu: bool  # thresholds met with the displayed mu
    d3_printed: Interval | None
    l1_printed: Interval | None
    d3_reindexed: Interval | None
    l1_reindexed: Interval | None
    warnings: list = field(default_factory=list)


def _sd_intervals(n, k, m, r, lam, poisson_log_mass, feller_lower_exp, b2, m1, x, p, beta):
    """The four displayed inequalities for a given Poisson factor; None on a branch failure."""
    ln = math.log(n)
    lead = math.log((n - 1) / n)
    try:
        # P(D3 = m) lower
        h = 2 * m + ln
        d_lo = (poisson_log_mass + feller_lower_exp + lead
                + (-beta + sd_g(h, k, p)) - sd_f(h, k, p))
        # P(D3 = m) upper
        log_s = -0.5 * math.log(2 * math.pi * r)
        log_num = np.logaddexp(-ln, log_s + sd_f(ln, k - ln, p))
        log_den = lead + log_s - beta + sd_g(ln, k - ln, p)
        d_hi = poisson_log_mass + lam * m / k + float(log_num) - log_den
        # e^lam P(L1 = 2)
        l_hi = sd_f(0, k, p) - lead - (-beta + sd_g(ln, k, p))
        tail = 1 - 1 / (n * (1 - b2 / (m1 * x)))
        if tail <= 0:
            return None, None
        l_lo = (-lam * lam / (n - lam) + (-beta + sd_g(0, k, p)) - lead
                - sd_f(ln, k, p) + math.log(tail))
    except (RangeError, ValueError, ZeroDivisionError):
        return None, None
    return Interval(d_lo, d_hi), Interval(l_lo - lam, l_hi - lam)


def sd_bounds(spec: AssemblySpec, n: int, k: int, m: int = 0,
              family: Callable[[int], int] | None = None,
              grid: Sequence[int] | None = None) -> SDReport:
    """Intervals for P(D_3(n,k) = m) and P(L1 = 2).

    ``*_printed`` evaluates the displayed inequalities verbatim (lambda =
    m3 x^2 / (6 m1), Poisson factor lambda^k/k!).  ``*_reindexed`` uses the
    mean of N_2 the argument needs, lambda = k m3 x^2 / (6 m1), with the
    Poisson mass lambda^m/m! and Feller's exponents at (m, k).
    """
    spec.require_low_rank()
    m1, m2, m3 = _m123(spec)
    if m3 <= 0:
        raise InvalidInputError("need m_3 > 0")
    if not 1 <= k <= n or m < 0:
        raise InvalidInputError("need 1 <= k <= n and m >= 0")
    r = n - k
    warnings = ["the displayed bounds carry lambda^k/k! while the argument concerns N_2 = m; "
                "the reindexed intervals use lambda^m/m!"]
    x = _sd_x(spec, n, k)
    b0, b1, b2 = m1 * x, m2 * x * x / 2, m3 * x**3 / 6
    lam = m3 * x * x / (6 * m1)
    lam_re = k * lam
    p = b1 / (b0 + b1) if x > 0 else 0.0
    thr = deviation_thresholds(spec, n, k, family, grid)
    if r == 0:
        # degenerate rank 0: no components of size 2 or 3, all bounds collapse
        one, zero = Interval(0.0, 0.0), Interval(-math.inf, -math.inf)
        d3 = one if m == 0 else zero
        return SDReport(n, k, m, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, {}, {}, thr, True, True,
                        d3, zero, d3, zero, warnings)
    beta = 1 / (12 * r) + 1 / (12 * (k - r)) if k > r else math.inf
    ln = math.log(n)
    f_vals, g_vals = {}, {}
    for name, (h, nn) in {"2m+log n, k": (2 * m + ln, k), "log n, k-log n": (ln, k - ln),
                          "0, k": (0.0, k), "log n, k": (ln, k)}.items():
        f_vals[name] = sd_f(h, nn, p)
        try:
            g_vals[name] = sd_g(h, nn, p)
        except RangeError:
            g_vals[name] = None
    guards = all(v is not None for v in g_vals.values()) and k - ln > 0 and math.isfinite(beta)
    thresholds_ok = thr.x_rho_ok and thr.n3_ok
    effective = guards and thresholds_ok and ln >= thr.log_n0_proof
    effective_printed = guards and thresholds_ok and ln >= thr.log_n0

    def pm(lam_, idx):
        return _log_poisson(idx, lam_)

    d3p = l1p = d3r = l1r = None
    if guards:
        if n - lam > 0:
            d3p, l1p = _sd_intervals(n, k, m, r, lam, pm(lam, k),
                                     -k * k / (n - k) - lam * lam / (n - lam), b2, m1, x, p, beta)
        if k - m > 0 and k - lam_re > 0:
            d3r, l1r = _sd_intervals(n, k, m, r, lam_re, pm(lam_re, m),
                                     -m * m / (k - m) - lam_re**2 / (k - lam_re), b2, m1, x, p, beta)
    if not effective:
        warnings.append("thresholds not met: intervals carry no guarantee")
    if not effective_printed:
        warnings.append("with the displayed mu the threshold exp(mu e^2) is not met")
    return SDReport(n, k, m, x, b0, b1, b2, lam, lam_re, p, beta, f_vals, g_vals, thr,
                    effective, effective_printed, d3p, l1p, d3r, l1r, warnings)


# -- perspective ratios, conjecture diagnostic, regime classification -----------------

@dataclass(frozen=True)
class TypeRatios:
    ratio1: Fraction  # N(a')/N(a)
    ratio2: Fraction  # N(a'')/N(a), as displayed
    ratio3: Fraction  # N(a''')/N(a)
    exact1: Fraction  # quotients of count_N, computed independently
    exact2: Fraction
    exact3: Fraction
    proxy1: float     # (2 m1 m3 / 3 m2^2) r^2/n
    proxy2: float     # r^4/n^2
    proxy3: float     # r^3/n^2


def type_ratios(spec: AssemblySpec, n: int, r: int, with_exact: bool | None = None) -> TypeRatios:
    if r < 4 or n <= 2 * r:
        raise RangeError("need r >= 4 and n > 2r")
    m1, m2, m3, m4 = spec.m(1), spec.m(2), spec.m(3), spec.m(4)
    d1 = n - 2 * r + 1
    d2 = d1 * (n - 2 * r + 2)
    ratio1 = Fraction(m1 * r * (r - 1) * 4 * m3, d1 * m2**2 * 6)
    ratio2 = Fraction(m1**2 * math.perm(r, 4) * 16 * m3**2, d2 * 36 * m2**4)
    ratio3 = Fraction(m1**2 * math.perm(r, 3) * 8 * m4, d2 * m2**3 * 24)
    if with_exact is None:
        with_exact = n <= 400
    if with_exact:
        base = count_N(spec, inverse_copartition((1,) * r, n))
        exact = [Fraction(count_N(spec, inverse_copartition(c, n)), base)
                 for c in ((2,) + (1,) * (r - 2), (2, 2) + (1,) * (r - 4), (3,) + (1,) * (r - 3))]
    else:
        base = log_count_N(spec, inverse_copartition((1,) * r, n))
        exact = [Fraction(math.exp(log_count_N(spec, inverse_copartition(c, n)) - base))
                 for c in ((2,) + (1,) * (r - 2), (2, 2) + (1,) * (r - 4), (3,) + (1,) * (r - 3))]
    return TypeRatios(ratio1, ratio2, ratio3, *exact,
                      2 * m1 * m3 / (3 * m2 * m2) * r * r / n, r**4 / n**2, r**3 / n**2)


@dataclass(frozen=True)
class ConjectureC:
    value: float | Fraction
    lam: float | Fraction
    conjectural: bool = True


def conjecture_C(spec: AssemblySpec, t) -> ConjectureC:
    """(2 lam^2 + lam) - 2 t^2 lam - t^2 (m4/4) lam with lam = lambda(t, M).  Diagnostic only."""
    lam = lambda_limit(spec, t)
    t = _q(t)
    m4 = spec.m(4)
    quarter = Fraction(m4, 4) if isinstance(lam, Fraction) else m4 / 4
    return ConjectureC((2 * lam * lam + lam) - 2 * t * t * lam - t * t * quarter * lam, lam)


@dataclass
class Thm2Prediction:
    alpha: float
    ell: int
    boundary: bool
    t: float | None
    support: tuple[int, ...]
    lam: float | None
    p_boundary: dict | None
    x: float | None
    d_magnitudes: dict
    label: str = "asymptotic prediction"


def thm2_classify(spec: AssemblySpec, n: int, r: int, boundary_tol: float = 0.02) -> Thm2Prediction:
    """Place (n, r) among the scales r ~ n^(l/(l+1)) and state the limiting L1 behaviour.

    Between the boundaries l and l+1 the prediction is L1 = l+2 w.h.p.; within
    ``boundary_tol`` of alpha = l/(l+1) it is L1 in {l+1, l+2} with
    P(L1 = l+1) -> exp(-lambda(t, l, M)).
    """
    m1, m2 = spec.m(1), spec.m(2)
    if m1 <= 0 or m2 <= 0:
        raise InvalidInputError("need m_1, m_2 > 0")
    if not 1 <= r < n:
        raise RangeError("need 1 <= r < n")
    alpha = math.log(r) / math.log(n) if r > 1 else 0.0
    ell = 0
    while alpha >= (ell + 1) / (ell + 2):
        ell += 1
    near = min(((abs(alpha - j / (j + 1)), j) for j in (ell, ell + 1) if j >= 1), default=(math.inf, 0))
    boundary = near[0] <= boundary_tol
    k = n - r
    try:
        x = tilted.solve_x_p1(spec, n, k, variant="p1")
    except Exception:
        x = (2 * m1 / m2) * r / k
    if boundary:
        b = near[1]
        t = r / n ** (b / (b + 1))
        lam = float(lambda_limit_ell(spec, t, b))
        support = (b + 1, b + 2)
        p_bd = {b + 1: math.exp(-lam), b + 2: -math.expm1(-lam)}
        top = b + 2
        ell = b
    else:
        t, lam, p_bd = None, None, None
        support = (ell + 2,)
        top = ell + 2
    mags = {i: k * spec.m(i) * x ** (i - 1) / (m1 * math.factorial(i)) for i in range(1, top + 1)}
    return Thm2Prediction(alpha, ell, boundary, t, support, lam, p_bd, x, mags)


# -- the serializable report -------------------------------------------------------------

@dataclass
class BoundsReport:
    n: int
    k: int
    r: int
    x: float
    rho: float
    hyp_24: bool
    hyp_needed: bool
    y: float
    u4: float | None
    z: float | None
    guarantee: bool
    pnk_lower: float | None
    pnk_upper: float | None
    pnk_lower_printed: float | None
    c0: float = C0
    sd: dict | None = None

    def to_json(self) -> dict:
        return _jsonable(asdict(self))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def bounds_report(spec: AssemblySpec, n: int, r: int, sd: bool = False, m: int = 0) -> BoundsReport:
    san = thm15_sandwich(spec, n, r)
    l24 = lemma24_bound(spec, n, r)
    rep = BoundsReport(n, n - r, r, l24.x, l24.rho, l24.hyp_24, l24.hyp_needed, san.y, san.u4,
                       san.z, san.guarantee, san.log_lower, san.log_upper, san.log_lower_printed)
    if sd:
        rep.sd = asdict(sd_bounds(spec, n, n - r, m))
        rep.sd.pop("thresholds", None)
        rep.sd["thresholds"] = asdict(deviation_thresholds(spec, n, n - r))
    return rep
