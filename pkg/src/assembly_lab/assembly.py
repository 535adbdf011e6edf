"""Assembly specifications: the sequence m_1, m_2, ... and its EGF M(z).

An assembly of size n is a set partition of [n] whose blocks of size i are
each decorated in one of m_i ways.  Everything downstream (counts, tilted
processes, bounds) only needs the m-sequence, so this module owns it.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, NamedTuple

from scipy.special import gammaincc

from .errors import (
    ConfigurationError,
    DivergenceError,
    InconsistentInputError,
    InvalidInputError,
    UnsupportedError,
)

__all__ = [
    "AssemblySpec",
    "SeriesEval",
    "PositivityFlags",
    "BUILTIN_RULES",
    "builtin",
    "from_json",
    "load_assembly_file",
    "m",
    "m_from_p",
    "egf_M",
    "lambda_i",
    "log_lambda_i",
    "rho",
    "radius",
    "SET_PARTITIONS",
    "PERMUTATIONS",
    "MAPPINGS",
    "GRAPHS",
]

BUILTIN_RULES = ("set_partitions", "permutations", "mappings", "graphs")

_ALIASES = {
    "set_partitions": "set_partitions",
    "set-partitions": "set_partitions",
    "setpartitions": "set_partitions",
    "permutations": "permutations",
    "mappings": "mappings",
    "random-mappings": "mappings",
    "random_mappings": "mappings",
    "graphs": "graphs",
    "simple-graphs": "graphs",
    "simple_graphs": "graphs",
}

# terms beyond this index are never summed in egf_M
_MAX_SERIES_TERMS = 200_000
# above this index log m_i for mappings uses the incomplete-gamma form
_MAPPINGS_EXACT_LOG = 300


class PositivityFlags(NamedTuple):
    m1: bool
    m2: bool
    m3: bool
    all: bool


class SeriesEval(NamedTuple):
    """Truncated series value with a rigorous bound on the discarded tail."""

    value: float
    truncation_index: int
    tail_bound: float


def _mappings_m(i: int) -> int:
    # (i-1)! * sum_{j<i} i^j / j!, each summand is an integer
    total = 0
    ratio = math.factorial(i - 1)  # (i-1)!/j! at j = 0
    power = 1
    for j in range(i):
        if j:
            ratio //= j
            power *= i
        total += power * ratio
    return total


@dataclass(frozen=True)
class AssemblySpec:
    """Immutable description of an assembly.

    Exactly one of ``rule`` (a built-in closed form) or ``m_list`` (explicit
    m_1..m_N, zero beyond) must be given.  The memo cache is the only mutable
    state; it is guarded by a lock so concurrent readers see each value
    computed once.
    """

    name: str
    rule: str | None = None
    m_list: tuple[int, ...] | None = None
    radius_positive: bool = True
    cache_limit: int = 4096
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: Any = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if (self.rule is None) == (self.m_list is None):
            raise ConfigurationError("give exactly one of rule or m_list")
        if self.rule is not None and self.rule not in BUILTIN_RULES:
            raise ConfigurationError(f"unknown assembly rule {self.rule!r}")
        if self.m_list is not None:
            vals = tuple(self.m_list)
            if any((not isinstance(v, int)) or isinstance(v, bool) or v < 0 for v in vals):
                raise ConfigurationError("m_list entries must be nonnegative integers")
            object.__setattr__(self, "m_list", vals)
        if self.rule == "graphs" and self.radius_positive:
            raise ConfigurationError("simple graphs have radius of convergence zero")

    def __reduce__(self):
        # the lock cannot be pickled; worker processes rebuild an empty cache
        return (AssemblySpec, (self.name, self.rule, self.m_list, self.radius_positive, self.cache_limit))

    # -- sequence access -------------------------------------------------
    def m(self, i: int) -> int:
        if i < 1:
            raise InvalidInputError(f"m_i is defined for i >= 1, got {i}")
        if self.m_list is not None:
            return self.m_list[i - 1] if i <= len(self.m_list) else 0
        if self.rule == "set_partitions":
            return 1
        if self.rule == "permutations":
            return math.factorial(i - 1)
        cached = self._cache.get(i)
        if cached is not None:
            return cached
        if self.rule == "mappings":
            val = _mappings_m(i)
            if i <= self.cache_limit:
                with self._lock:
                    self._cache.setdefault(i, val)
            return val
        return self._graphs_m(i)

    def _graphs_m(self, i: int) -> int:
        # connected labelled graphs: c_n = 2^C(n,2) - sum_k C(n-1,k-1) c_k 2^C(n-k,2)
        with self._lock:
            seq = self._cache.setdefault("graphs_seq", [])
            while len(seq) < i:
                n = len(seq) + 1
                val = 1 << (n * (n - 1) // 2)
                for kk in range(1, n):
                    val -= math.comb(n - 1, kk - 1) * seq[kk - 1] * (1 << ((n - kk) * (n - kk - 1) // 2))
                seq.append(val)
            return seq[i - 1]

    def m_seq(self, N: int) -> list[int]:
        """Return [m_1, ..., m_N]."""
        return [self.m(i) for i in range(1, N + 1)]

    def log_m(self, i: int) -> float:
        """Natural log of m_i (``-inf`` when m_i = 0), without forming huge ints."""
        if self.rule == "set_partitions":
            return 0.0
        if self.rule == "permutations":
            return math.lgamma(i)
        if self.rule == "mappings" and i > _MAPPINGS_EXACT_LOG:
            # sum_{j<i} i^j/j! = e^i Q(i, i), Q the regularized upper incomplete gamma
            return math.lgamma(i) + i + math.log(gammaincc(i, i))
        v = self.m(i)
        return math.log(v) if v > 0 else -math.inf

    @property
    def positivity_flags(self) -> PositivityFlags:
        if self.m_list is not None:
            # a finite list is zero beyond its end
            return PositivityFlags(self.m(1) > 0, self.m(2) > 0, self.m(3) > 0, False)
        return PositivityFlags(True, True, True, True)

    @property
    def is_builtin(self) -> bool:
        return self.rule is not None

    def require_low_rank(self) -> None:
        """Raise unless the effective low-rank bounds may be applied."""
        if not self.radius_positive:
            raise UnsupportedError(
                f"{self.name}: M has zero radius of convergence; low-rank bounds do not apply"
            )
        flags = self.positivity_flags
        if not (flags.m1 and flags.m2):
            raise UnsupportedError(f"{self.name}: need m_1 > 0 and m_2 > 0")

    def to_json(self) -> dict:
        m_field: Any = {"rule": self.rule} if self.rule else list(self.m_list or ())
        return {"name": self.name, "m": m_field, "radius_positive": self.radius_positive}


SET_PARTITIONS = AssemblySpec("set-partitions", rule="set_partitions")
PERMUTATIONS = AssemblySpec("permutations", rule="permutations")
MAPPINGS = AssemblySpec("mappings", rule="mappings")
GRAPHS = AssemblySpec("graphs", rule="graphs", radius_positive=False)

_BUILTINS = {
    "set_partitions": SET_PARTITIONS,
    "permutations": PERMUTATIONS,
    "mappings": MAPPINGS,
    "graphs": GRAPHS,
}


def builtin(name: str) -> AssemblySpec:
    """Look up a built-in assembly by name (``set-partitions``, ``mappings``, ...)."""
    key = _ALIASES.get(name.strip().lower())
    if key is None:
        raise ConfigurationError(f"unknown built-in assembly {name!r}")
    return _BUILTINS[key]


def from_json(obj: dict) -> AssemblySpec:
    """Build a spec from the custom-assembly JSON object."""
    try:
        name = obj["name"]
        m_field = obj["m"]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"assembly JSON missing field: {exc}") from None
    if isinstance(m_field, dict):
        rule = _ALIASES.get(str(m_field.get("rule", "")).lower())
        if rule is None:
            raise ConfigurationError(f"unknown rule {m_field.get('rule')!r}")
        default_radius = rule != "graphs"
        return AssemblySpec(
            name, rule=rule, radius_positive=bool(obj.get("radius_positive", default_radius))
        )
    if isinstance(m_field, list):
        return AssemblySpec(
            name, m_list=tuple(m_field), radius_positive=bool(obj.get("radius_positive", True))
        )
    raise ConfigurationError("field 'm' must be a list of integers or {'rule': ...}")


def load_assembly_file(path: str | Path) -> AssemblySpec:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read assembly file {path}: {exc}") from None
    return from_json(obj)


# -- module-level operations -------------------------------------------------

def m(spec: AssemblySpec, i: int) -> int:
    return spec.m(i)


def m_from_p(p_values: list[int]) -> list[int]:
    """Recover m_1..m_N from p(0..N) through the formal log of P(z) = sum p(n) z^n/n!.

    Works in exact rationals: with a_n = p(n)/n!, the log b = log(sum a_n z^n)
    satisfies n b_n = n a_n - sum_{j<n} j b_j a_{n-j}; then m_n = n! b_n.
    """
    if not p_values or p_values[0] != 1:
        raise InvalidInputError("p(0) must equal 1")
    N = len(p_values) - 1
    a = [Fraction(p, math.factorial(n)) for n, p in enumerate(p_values)]
    b = [Fraction(0)] * (N + 1)
    for n in range(1, N + 1):
        acc = n * a[n]
        for j in range(1, n):
            acc -= j * b[j] * a[n - j]
        b[n] = acc / n
    out = []
    for n in range(1, N + 1):
        val = b[n] * math.factorial(n)
        if val.denominator != 1:
            raise InconsistentInputError(f"m_{n} = {val} is not an integer")
        if val < 0:
            raise InconsistentInputError(f"m_{n} = {val} is negative")
        out.append(int(val))
    return out


def radius(spec: AssemblySpec) -> float:
    """Radius of convergence of M."""
    if not spec.radius_positive:
        return 0.0
    if spec.rule == "permutations":
        return 1.0
    if spec.rule == "mappings":
        return 1.0 / math.e
    return math.inf


def rho(spec: AssemblySpec, probe_limit: int = 200) -> float:
    """sup_{i >= 3} (m_i / i!)^{1/i}.

    Built-ins use their closed forms: (1/i!)^{1/i} decreases (sup at i = 3),
    (1/i)^{1/i} increases to 1, and for mappings (m_i/i!)^{1/i} < e increases
    to e.  Finite lists use the exact finite maximum; ``probe_limit`` caps
    the scan for very long lists.
    """
    if not spec.radius_positive:
        raise UnsupportedError(f"{spec.name}: rho is infinite (zero radius of convergence)")
    if spec.rule == "set_partitions":
        return 6.0 ** (-1.0 / 3.0)
    if spec.rule == "permutations":
        return 1.0
    if spec.rule == "mappings":
        return math.e
    return _tail_rho(spec, 2, probe_limit)


def _root_term(spec: AssemblySpec, i: int) -> float:
    lm = spec.log_m(i)
    if lm == -math.inf:
        return 0.0
    return math.exp((lm - math.lgamma(i + 1)) / i)


def _tail_rho(spec: AssemblySpec, T: int, probe_limit: int | None = None) -> float:
    """sup_{i > T} (m_i / i!)^{1/i}; bounds the tail of M beyond index T."""
    if spec.rule == "set_partitions":
        return _root_term(spec, T + 1)
    if spec.rule == "permutations":
        return 1.0
    if spec.rule == "mappings":
        return math.e
    if spec.rule == "graphs":
        return math.inf
    L = len(spec.m_list or ())
    if probe_limit is not None:
        L = min(L, probe_limit)
    return max((_root_term(spec, i) for i in range(T + 1, L + 1)), default=0.0)


def log_lambda_i(spec: AssemblySpec, x: float, i: int, theta: float = 1.0) -> float:
    """log(theta * m_i * x^i / i!), ``-inf`` when m_i = 0."""
    lm = spec.log_m(i)
    if lm == -math.inf:
        return -math.inf
    return math.log(theta) + lm + i * math.log(x) - math.lgamma(i + 1)


def lambda_i(spec: AssemblySpec, x: float | Fraction, i: int, theta: float | Fraction = 1):
    """Poisson mean theta * m_i x^i / i! of the i-th tilted count.

    A ``Fraction`` x gives an exact ``Fraction``; otherwise the value is a
    float computed in log space so large i does not overflow.
    """
    if x <= 0:
        raise InvalidInputError("x must be positive")
    if isinstance(x, Fraction):
        return Fraction(theta) * spec.m(i) * x**i / math.factorial(i)
    v = log_lambda_i(spec, float(x), i, float(theta))
    return 0.0 if v == -math.inf else math.exp(v)


def egf_M(spec: AssemblySpec, x: float, rel_tol: float = 1e-15) -> SeriesEval:
    """Evaluate M(x) = sum m_i x^i / i! with a geometric tail bound.

    Summation stops at the first T for which sup_{i>T}(m_i/i!)^{1/i} * x < 1
    and the tail sum_{i>T} (rho_T x)^i is at most ``rel_tol`` times the value.
    """
    if not spec.radius_positive:
        raise UnsupportedError(f"{spec.name}: M has zero radius of convergence")
    if x <= 0:
        raise InvalidInputError("x must be positive")
    x = float(x)
    if x >= radius(spec):
        raise DivergenceError(f"{spec.name}: x = {x} is outside the disc of convergence")
    terms = []
    running = 0.0
    for T in range(1, _MAX_SERIES_TERMS + 1):
        term = lambda_i(spec, x, T)
        terms.append(term)
        running += term
        value = running
        if spec.m_list is not None and T >= len(spec.m_list):
            return SeriesEval(math.fsum(terms), T, 0.0)
        if T < 2:
            continue
        q = x * _tail_rho(spec, T)
        if q >= 1:
            continue
        tail = q ** (T + 1) / (1 - q)
        if tail <= rel_tol * value:
            return SeriesEval(math.fsum(terms), T, tail)
    raise DivergenceError(f"{spec.name}: series at x = {x} did not reach tolerance")
