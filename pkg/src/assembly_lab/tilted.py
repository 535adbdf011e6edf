"""Tilted independent processes and the exact identities they satisfy.

Under the x-tilt, Z_i ~ Poisson(lambda_i(x)) independently with
lambda_i = m_i x^i / i!.  Conditioning on T_n = sum i Z_i = n recovers the
uniform assembly of size n; the i.i.d. sample Y_1..Y_k with
P(Y = i) proportional to lambda_i, conditioned on sum Y = n, recovers the
uniform assembly with k components.

Passing ``x`` as a ``Fraction`` selects exact arithmetic.  Poisson
normalizers exp(-Lambda) and the infinite-mode normalizer M(x) are carried
symbolically there, so identities can be checked with zero tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.optimize import brentq

from . import assembly as asm
from .assembly import AssemblySpec
from .counting import count_p, count_pnk
from .errors import DivergenceError, InvalidInputError, NoSolutionError, RangeError

__all__ = [
    "TiltedProcess",
    "YDistribution",
    "TnDistribution",
    "ConvolutionTable",
    "Marginal",
    "y_pmf",
    "mean_X",
    "tn_pmf",
    "ysum_pmf",
    "xsum_pmf",
    "ysum_prob",
    "solve_x_T",
    "solve_x_p1",
    "solve_theta_x",
    "identity_check_pn",
    "identity_check_pnk",
    "theta_x_marginal",
]

# mass of the infinite-mode Y distribution that may be discarded by truncation
Y_TAIL_TOL = 1e-15


def _is_exact(x) -> bool:
    return isinstance(x, Fraction)


def _lambdas(spec: AssemblySpec, x, count: int, theta=1) -> list:
    return [asm.lambda_i(spec, x, i, theta) for i in range(1, count + 1)]


@dataclass(frozen=True)
class TiltedProcess:
    """Independent Poisson counts Z_1..Z_n under the (theta, x) tilt."""

    spec: AssemblySpec
    x: float | Fraction
    n: int
    theta: float | Fraction = 1

    def __post_init__(self) -> None:
        if self.x <= 0 or self.theta <= 0:
            raise InvalidInputError("x and theta must be positive")

    @property
    def lam(self) -> list:
        return _lambdas(self.spec, self.x, self.n, self.theta)

    def mean_T(self):
        return sum(i * v for i, v in enumerate(self.lam, start=1))

    def mean_K(self):
        return sum(self.lam)


@dataclass
class YDistribution:
    """Law of one component size Y (and of X = Y - 1).

    ``weights[i-1]`` is lambda_i; ``normalizer`` is their total (finite mode)
    or M(x) (infinite mode).  ``normalizer is None`` means M(x) is kept
    symbolic (exact infinite mode), so only ratios are available.
    """

    support_mode: str
    weights: list
    normalizer: float | Fraction | None
    tail_bound: float = 0.0

    @property
    def pmf(self) -> np.ndarray:
        if self.normalizer is None:
            raise InvalidInputError("normalizer M(x) is symbolic in exact infinite mode")
        return np.array([float(w / self.normalizer) for w in self.weights])

    def prob(self, i: int):
        if self.normalizer is None:
            raise InvalidInputError("normalizer M(x) is symbolic in exact infinite mode")
        if 1 <= i <= len(self.weights):
            return self.weights[i - 1] / self.normalizer
        return 0 * self.normalizer

    def x_prob(self, i: int):
        return self.prob(i + 1)

    def mean(self) -> float:
        pmf = self.pmf
        return float(np.dot(np.arange(1, len(pmf) + 1), pmf))


def _infinite_cutoff(spec: AssemblySpec, x: float, n: int | None) -> tuple[int, float, float]:
    ev = asm.egf_M(spec, x, rel_tol=Y_TAIL_TOL)
    cutoff = max(ev.truncation_index, n or 0)
    return cutoff, ev.value, ev.tail_bound / ev.value


def y_pmf(spec: AssemblySpec, x, mode: str = "finite", n: int | None = None) -> YDistribution:
    """Distribution of Y: lambda_i over [n] (finite) or lambda_i / M(x) over N (infinite)."""
    if x <= 0:
        raise InvalidInputError("x must be positive")
    if mode == "finite":
        if n is None or n < 1:
            raise InvalidInputError("finite mode needs n >= 1")
        w = _lambdas(spec, x, n)
        total = sum(w)
        if total == 0:
            raise InvalidInputError("all weights vanish")
        return YDistribution("finite", w, total, 0.0)
    if mode != "infinite":
        raise InvalidInputError(f"unknown mode {mode!r}")
    if _is_exact(x):
        # M(x) stays symbolic; weights up to n are all an identity ever needs
        asm.egf_M(spec, float(x))  # raises on divergence
        if n is None:
            raise InvalidInputError("exact infinite mode needs n")
        return YDistribution("infinite", _lambdas(spec, x, n), None, 0.0)
    cutoff, total, tail = _infinite_cutoff(spec, float(x), n)
    return YDistribution("infinite", _lambdas(spec, x, cutoff), total, tail)


def _moment_sum(spec: AssemblySpec, x: float, shift: int) -> float:
    """sum_i (i + shift) lambda_i(x), summed until the geometric tail is negligible."""
    ev = asm.egf_M(spec, x, rel_tol=Y_TAIL_TOL)
    T = ev.truncation_index
    terms = [(i + shift) * asm.lambda_i(spec, x, i) for i in range(1, T + 1)]
    # extend until the weighted tail bound sum_{i>T} i q^i is negligible too
    while spec.m_list is None or T < len(spec.m_list):
        q = x * asm._tail_rho(spec, T)
        bound = q ** (T + 1) * ((T + 1) - T * q) / (1 - q) ** 2 if q < 1 else math.inf
        if bound <= Y_TAIL_TOL * max(abs(math.fsum(terms)), ev.value):
            break
        T += 1
        terms.append((T + shift) * asm.lambda_i(spec, x, T))
    return math.fsum(terms)


def mean_X(spec: AssemblySpec, x: float) -> float:
    """E_x X = x A'(x)/A(x) with A(z) = M(z)/z, i.e. sum (i-1) lambda_i / M(x)."""
    x = float(x)
    M = asm.egf_M(spec, x, rel_tol=Y_TAIL_TOL).value
    return _moment_sum(spec, x, -1) / M


@dataclass
class TnDistribution:
    """P(T_n = s) = exp(-log_scale) * coeffs[s] for s = 0..n."""

    log_scale: float | Fraction
    coeffs: list

    @property
    def probs(self) -> np.ndarray:
        scale = float(self.log_scale)
        return np.array([math.exp(math.log(c) - scale) if c > 0 else 0.0 for c in map(float, self.coeffs)])

    def prob(self, s: int) -> float:
        c = self.coeffs[s]
        return math.exp(math.log(float(c)) - float(self.log_scale)) if c > 0 else 0.0


def tn_pmf(spec: AssemblySpec, x, n: int, theta=1) -> TnDistribution:
    """Law of T_n = Z_1 + 2 Z_2 + ... + n Z_n on {0..n} by iterated Poisson convolution.

    Truncating each convolution at s <= n is exact on that range since every
    term only shifts mass upward.
    """
    lam = _lambdas(spec, x, n, theta)
    zero = Fraction(0) if _is_exact(x) else 0.0
    coeffs = [zero] * (n + 1)
    coeffs[0] = Fraction(1) if _is_exact(x) else 1.0
    for i, li in enumerate(lam, start=1):
        if not li:
            continue
        # unnormalized Poisson weights li^t / t!
        w = [coeffs[0] * 0 + 1]
        for t in range(1, n // i + 1):
            w.append(w[-1] * li / t)
        new = list(coeffs)
        for s in range(i, n + 1):
            acc = zero
            for t in range(1, s // i + 1):
                acc += coeffs[s - i * t] * w[t]
            new[s] += acc
        coeffs = new
    return TnDistribution(sum(lam) if lam else zero, coeffs)


@dataclass
class ConvolutionTable:
    """rows[j][s] / normalizer**j = P(Y_1 + ... + Y_j = s), s <= n.

    Float tables store probabilities directly (normalizer 1.0).  A ``None``
    normalizer is the symbolic M(x) of exact infinite mode.
    """

    k: int
    n: int
    rows: list[list]
    normalizer: float | Fraction | None = 1.0
    mode: str = "finite"

    def weight(self, j: int, s: int):
        return self.rows[j][s] if 0 <= s <= self.n else 0

    def prob(self, j: int, s: int):
        if self.normalizer is None:
            raise InvalidInputError("normalizer M(x) is symbolic in exact infinite mode")
        return self.weight(j, s) / self.normalizer**j

    def to_csv_rows(self) -> list[tuple[int, int, float]]:
        out = []
        for j, row in enumerate(self.rows):
            for s, v in enumerate(row):
                if v:
                    out.append((j, s, float(v / self.normalizer**j) if self.normalizer else float(v)))
        return out


def ysum_pmf(spec: AssemblySpec, x, k: int, n: int, mode: str = "finite") -> ConvolutionTable:
    """All k-fold convolutions of the Y law up to total n (O(k n^2))."""
    if k < 0:
        raise InvalidInputError("k must be nonnegative")
    exact = _is_exact(x)
    if n < 1:
        zero_row = [Fraction(1) if exact else 1.0]
        return ConvolutionTable(k, 0, [zero_row] + [[0]] * k, 1 if exact else 1.0, mode)
    ydist = y_pmf(spec, x, mode, n)
    if exact:
        w = [Fraction(0)] + list(ydist.weights[:n])
        norm = ydist.normalizer
    else:
        w = [0.0] + list(ydist.pmf[:n])
        norm = 1.0
    zero = w[0]
    rows = [[zero + 1] + [zero] * n]
    for _ in range(k):
        prev = rows[-1]
        row = [zero] * (n + 1)
        for s in range(1, n + 1):
            acc = zero
            for i in range(1, s + 1):
                if prev[s - i]:
                    acc += prev[s - i] * w[i]
            row[s] = acc
        rows.append(row)
    return ConvolutionTable(k, n, rows, norm, mode)


def xsum_pmf(spec: AssemblySpec, x: float, k: int, r: int, mode: str = "infinite",
             n: int | None = None) -> np.ndarray:
    """P(X_1 + ... + X_k = s) for s = 0..r by binary powering (float).

    X = Y - 1 is nonnegative, so truncating every product at degree r is exact
    on that range.  Coefficients are kept with a running log scale.
    """
    if mode == "finite" and n is None:
        n = k + r
    ydist = y_pmf(spec, float(x), mode, n)
    pmf = ydist.pmf
    base = np.zeros(r + 1)
    top = min(len(pmf), r + 1)
    base[:top] = pmf[:top]
    p0 = base[0]
    if p0 <= 0:
        raise InvalidInputError("P(X = 0) must be positive")
    base = base / p0
    result = np.zeros(r + 1)
    result[0] = 1.0
    log_res = 0.0
    power = base.copy()
    log_pow = 0.0
    e = k
    while e:
        if e & 1:
            result = np.convolve(result, power)[: r + 1]
            s = result.max()
            result /= s
            log_res += math.log(s) + log_pow
        e >>= 1
        if e:
            power = np.convolve(power, power)[: r + 1]
            s = power.max()
            power /= s
            log_pow = 2 * log_pow + math.log(s)
    log_total = log_res + k * math.log(p0)
    with np.errstate(divide="ignore"):
        return np.exp(np.log(result) + log_total)


def ysum_prob(spec: AssemblySpec, x: float, k: int, n: int, mode: str = "infinite") -> float:
    """P_x(Y_1 + ... + Y_k = n), the acceptance probability of hard rejection."""
    r = n - k
    if r < 0:
        return 0.0
    return float(xsum_pmf(spec, x, k, r, mode, n=n)[r])


# -- saddle-point solvers ---------------------------------------------------

def _expected_T(spec: AssemblySpec, x: float, n: int) -> float:
    return math.fsum(i * asm.lambda_i(spec, x, i) for i in range(1, n + 1))


def _bracket_root(f, x0: float, upper: float) -> tuple[float, float]:
    """Grow a geometric bracket from x0 until f changes sign below ``upper``."""
    lo = hi = x0
    while f(lo) > 0:
        lo /= 2
        if lo < 1e-300:
            raise NoSolutionError("no sign change near zero")
    while f(hi) < 0:
        lo = hi
        hi = min(hi * 2, upper)
        if hi >= upper and f(hi) < 0:
            raise NoSolutionError("target unreachable within the admissible range")
        if hi > 1e300:
            raise NoSolutionError("target unreachable")
    return lo, hi


def solve_x_T(spec: AssemblySpec, n: int, mode: str = "finite") -> float:
    """Root of E_x T_n = sum_{i<=n} i lambda_i(x) = n (relative tolerance 1e-12)."""
    if n < 1:
        raise InvalidInputError("n must be positive")
    if mode == "finite":
        if all(spec.m(i) == 0 for i in range(1, n + 1)):
            raise NoSolutionError("all lambda_i vanish")

        def f(x):
            return _expected_T(spec, x, n) - n

        upper = math.inf
    else:
        R = asm.radius(spec)

        def f(x):
            try:
                return _moment_sum(spec, x, 0) - n
            except DivergenceError:
                return math.inf

        upper = R * (1 - 1e-12) if math.isfinite(R) else math.inf
    lo, hi = _bracket_root(f, 1.0 if not math.isfinite(upper) else min(1.0, upper / 2), upper)
    return brentq(f, lo, hi, xtol=1e-300, rtol=1e-13, maxiter=500)


def solve_x_p1(spec: AssemblySpec, n: int, k: int, variant: str = "p1",
               check_range: bool = True, exact: bool = False):
    """Saddle choice of x for the rank-r regime, r = n - k.

    ``"p1"``: smallest positive root of k p_1(x) = r with p_1 = lambda_2/M(x).
    ``"ratio"``: the closed form x = 2 m_1 r / (m_2 (n - 2r)), the root of
    k p_1/(p_0 + p_1) = r.
    """
    r = n - k
    m1, m2 = spec.m(1), spec.m(2)
    if m1 <= 0 or m2 <= 0:
        raise InvalidInputError("need m_1 > 0 and m_2 > 0")
    if r < 1:
        raise RangeError("need rank r = n - k >= 1")
    if variant == "ratio":
        if 2 * r >= n:
            raise RangeError(f"need r < n/2 (r = {r}, n = {n})")
        xf = Fraction(2 * m1 * r, m2 * (n - 2 * r))
        if check_range and spec.radius_positive and float(xf) * asm.rho(spec) >= 1:
            raise RangeError(f"x = {float(xf)} has x*rho >= 1")
        return xf if exact else float(xf)
    if variant != "p1":
        raise InvalidInputError(f"unknown variant {variant!r}")
    R = asm.radius(spec)
    x0 = (2 * m1 / m2) * (r / k)
    # stop at 0.999 R, where M(x) still needs only a few 10^4 series terms;
    # with infinite radius, scan two decades past the first guess
    upper = R * (1 - 1e-3) if math.isfinite(R) else max(100.0, 100 * x0)

    def f(x):
        try:
            return k * asm.lambda_i(spec, x, 2) / asm.egf_M(spec, x).value - r
        except DivergenceError:
            raise NoSolutionError(f"k p_1(x) = r has no root where M(x) can be evaluated (x = {x})") from None

    # scan upward from well below the first guess so the first crossing is the smallest root
    grid_lo = min(x0, upper) / 64
    prev_x, prev_f = grid_lo, f(grid_lo)
    if prev_f >= 0:
        raise NoSolutionError("k p_1 already exceeds r at the bottom of the scan")
    xg = prev_x
    while xg < upper:
        xg = min(xg * 1.05, upper)
        fv = f(xg)
        if fv >= 0:
            return brentq(f, prev_x, xg, xtol=1e-300, rtol=1e-13, maxiter=500)
        prev_x, prev_f = xg, fv
        if xg >= upper:
            break
    raise NoSolutionError("k p_1(x) = r has no root below the radius of convergence")


def solve_theta_x(spec: AssemblySpec, n: int, k: int) -> tuple[float, float]:
    """(theta, x) with E K_n = k and E T_n = n under the (theta, x) tilt (finite n)."""
    if not 1 <= k < n:
        raise NoSolutionError("need 1 <= k < n (k = n only in the x -> 0 limit)")

    def ratio(x):
        lam = [asm.lambda_i(spec, x, i) for i in range(1, n + 1)]
        return math.fsum(i * v for i, v in enumerate(lam, start=1)) / math.fsum(lam) - n / k

    lo, hi = _bracket_root(ratio, 1.0, math.inf)
    x = brentq(ratio, lo, hi, xtol=1e-300, rtol=1e-13, maxiter=500)
    theta = k / math.fsum(asm.lambda_i(spec, x, i) for i in range(1, n + 1))
    return theta, x


# -- exact identities ---------------------------------------------------------

def identity_check_pn(spec: AssemblySpec, x, n: int):
    """|RHS - p(n)| / p(n) for p(n) = (n!/x^n) exp(sum lambda_i) P_x(T_n = n).

    Exact x gives an exact ``Fraction`` (the exp factors cancel symbolically).
    """
    p = count_p(spec, n)
    if n == 0:
        return Fraction(0) if _is_exact(x) else 0.0
    dist = tn_pmf(spec, x, n)
    if _is_exact(x):
        rhs = Fraction(math.factorial(n)) / x**n * dist.coeffs[n]
        return abs(rhs - p) / p
    xf = float(x)
    # exp(sum lambda) P(T_n = n) is the unnormalized coefficient; using it
    # directly avoids underflow when sum lambda is large
    log_rhs = math.lgamma(n + 1) - n * math.log(xf) + math.log(float(dist.coeffs[n]))
    return abs(math.exp(log_rhs - math.log(p)) - 1.0)


def identity_check_pnk(spec: AssemblySpec, x, n: int, k: int, mode: str = "finite"):
    """|RHS - p(n,k)| / p(n,k) for RHS = (n!/k!) Z^k / x^n P_x(Y_1+..+Y_k = n).

    Z is lambda_1 + ... + lambda_n (finite) or M(x) (infinite).
    """
    p = count_pnk(spec, n, k)
    if p == 0:
        raise InvalidInputError(f"p({n},{k}) = 0")
    if n == 0:
        return Fraction(0) if _is_exact(x) else 0.0
    table = ysum_pmf(spec, x, k, n, mode)
    if _is_exact(x):
        if table.normalizer is None:
            # Z^k multiplies P = weight / Z^k: the symbolic M(x)^k cancels
            zk_prob = table.weight(k, n)
        else:
            zk_prob = table.normalizer**k * table.prob(k, n)
        rhs = Fraction(math.factorial(n), math.factorial(k)) * zk_prob / x**n
        return abs(rhs - p) / p
    xf = float(x)
    if mode == "finite":
        Z = math.fsum(asm.lambda_i(spec, xf, i) for i in range(1, n + 1))
    else:
        Z = asm.egf_M(spec, xf).value
    prob = table.prob(k, n)
    log_rhs = (math.lgamma(n + 1) - math.lgamma(k + 1) + k * math.log(Z)
               - n * math.log(xf) + math.log(prob))
    return abs(math.exp(log_rhs - math.log(p)) - 1.0)


# -- (theta, x) marginals for the three structure classes -----------------------

@dataclass(frozen=True)
class Marginal:
    """Law of Z_i under the (theta, x) tilt."""

    family: str
    params: dict
    dist: object = field(compare=False, repr=False)

    def pmf(self, j: int) -> float:
        return float(self.dist.pmf(j))

    def sf_ge(self, j: int) -> float:
        """P(Z >= j)."""
        return float(self.dist.sf(j - 1))


def theta_x_marginal(structure_class: str, m_i: int, theta: float, x: float, i: int) -> Marginal:
    if theta <= 0 or x <= 0 or m_i < 0 or i < 1:
        raise InvalidInputError("need theta, x > 0, m_i >= 0, i >= 1")
    w = theta * x**i
    if structure_class == "assembly":
        mu = theta * m_i * x**i / math.factorial(i)
        return Marginal("poisson", {"mu": mu}, stats.poisson(mu))
    if structure_class == "selection":
        p = w / (1 + w)
        return Marginal("binomial", {"n": m_i, "p": p}, stats.binom(m_i, p))
    if structure_class == "multiset":
        if w >= 1:
            raise DivergenceError("multiset marginal needs theta x^i < 1")
        # m_i-fold sum of geometrics with P(G >= j) = w^j; scipy counts failures
        return Marginal("negative_binomial", {"n": m_i, "ratio": w}, stats.nbinom(m_i, 1 - w))
    raise InvalidInputError(f"unknown structure class {structure_class!r}")
