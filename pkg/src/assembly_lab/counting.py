"""Exact counting of assemblies by component type.

Two routes are provided for everything in the low-rank regime:

* enumeration over copartitions of the rank r (one term per component type),
  used for full laws when the number of partitions of r is manageable;
* a labelled-count dynamic program over (rank, number of non-singleton
  components), used for marginals at ranks where enumeration is hopeless.

Counts are Python ints; probabilities are ``Fraction`` in exact mode and
natural logs in log mode.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .assembly import AssemblySpec
from .errors import BudgetExceededError, EmptySupportError, InvalidInputError

__all__ = [
    "Copartition",
    "PartitionType",
    "ExactLaw",
    "LargestPartTable",
    "count_N",
    "log_count_N",
    "count_p",
    "count_pnk",
    "pnk_table",
    "partitions",
    "partition_count",
    "enumerate_types",
    "copartition",
    "inverse_copartition",
    "exact_component_law",
    "low_rank_law",
    "low_rank_pnk",
    "low_rank_largest_law",
    "low_rank_count_law",
    "partition_largest_part_table",
    "lehner_normalizer",
    "log_falling",
]

Copartition = tuple

MAX_ENUMERATION_RANK = 60


@dataclass(frozen=True)
class PartitionType:
    """Component counts a = (a_1, ..., a_n): a_i components of size i."""

    a: tuple[int, ...]

    def __post_init__(self) -> None:
        a = tuple(int(v) for v in self.a)
        if any(v < 0 for v in a):
            raise InvalidInputError("component counts must be nonnegative")
        if sum((i + 1) * v for i, v in enumerate(a)) != len(a):
            raise InvalidInputError(f"sum i*a_i must equal n = {len(a)}")
        object.__setattr__(self, "a", a)

    @classmethod
    def from_parts(cls, parts: Sequence[int]) -> "PartitionType":
        n = sum(parts)
        a = [0] * n
        for p in parts:
            if p < 1:
                raise InvalidInputError("parts must be positive")
            a[p - 1] += 1
        return cls(tuple(a))

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def k(self) -> int:
        return sum(self.a)

    @property
    def r(self) -> int:
        return self.n - self.k

    @property
    def largest(self) -> int:
        for i in range(len(self.a), 0, -1):
            if self.a[i - 1]:
                return i
        return 0

    def parts(self) -> tuple[int, ...]:
        out: list[int] = []
        for i in range(len(self.a), 0, -1):
            out.extend([i] * self.a[i - 1])
        return tuple(out)

    def get(self, i: int) -> int:
        return self.a[i - 1] if 1 <= i <= len(self.a) else 0


# -- single-type counts ----------------------------------------------------

def count_N(spec: AssemblySpec, a: PartitionType) -> int:
    """Number of assemblies of type a: n! prod m_i^{a_i} / (a_i! (i!)^{a_i})."""
    num = math.factorial(a.n)
    den = 1
    for i, ai in enumerate(a.a, start=1):
        if ai:
            mi = spec.m(i)
            if mi == 0:
                return 0
            num *= mi**ai
            den *= math.factorial(ai) * math.factorial(i) ** ai
    return num // den


def log_count_N(spec: AssemblySpec, a: PartitionType) -> float:
    """log N(n, a) via log-gamma; ``-inf`` for impossible types."""
    total = math.lgamma(a.n + 1)
    for i, ai in enumerate(a.a, start=1):
        if ai:
            lm = spec.log_m(i)
            if lm == -math.inf:
                return -math.inf
            total += ai * (lm - math.lgamma(i + 1)) - math.lgamma(ai + 1)
    return total


# -- totals ----------------------------------------------------------------

_P_CACHE: dict = {}


def _p_table(spec: AssemblySpec, N: int) -> tuple[int, ...]:
    cached = _P_CACHE.get(spec)
    if cached is not None and len(cached) > N:
        return cached
    p = list(cached) if cached else [1]
    ms = spec.m_seq(N)
    for n in range(len(p), N + 1):
        # condition on the size i of the component containing element n
        p.append(sum(math.comb(n - 1, i - 1) * ms[i - 1] * p[n - i] for i in range(1, n + 1)))
    out = tuple(p)
    _P_CACHE[spec] = out
    return out


def count_p(spec: AssemblySpec, n: int) -> int:
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    return _p_table(spec, n)[n]


_PNK_CACHE: dict = {}


def _pnk_rows(spec: AssemblySpec, N: int) -> tuple[tuple[int, ...], ...]:
    cached = _PNK_CACHE.get(spec)
    if cached is not None and len(cached) > N:
        return cached
    ms = spec.m_seq(N)
    rows: list[list[int]] = [list(r) for r in cached] if cached else [[1]]
    for n in range(len(rows), N + 1):
        row = [0] * (n + 1)
        for k in range(1, n + 1):
            acc = 0
            for i in range(1, n - k + 2):
                prev = rows[n - i]
                if k - 1 < len(prev) and prev[k - 1]:
                    acc += math.comb(n - 1, i - 1) * ms[i - 1] * prev[k - 1]
            row[k] = acc
        rows.append(row)
    out = tuple(tuple(r) for r in rows)
    _PNK_CACHE[spec] = out
    return out


def pnk_table(spec: AssemblySpec, N: int) -> list[list[int]]:
    """Triangle p(n, k) for 0 <= k <= n <= N."""
    return [list(r) for r in _pnk_rows(spec, N)]


def count_pnk(spec: AssemblySpec, n: int, k: int) -> int:
    """p(n, k), the number of assemblies of size n with exactly k components."""
    if not 0 <= k <= n:
        raise InvalidInputError("need 0 <= k <= n")
    return _pnk_rows(spec, n)[n][k]


# -- integer partitions and copartitions -------------------------------------

def partitions(r: int, max_parts: int | None = None, max_part: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of r as weakly decreasing tuples, in ascending lexicographic order."""
    if r < 0:
        return
    if max_parts is None:
        max_parts = r
    if max_part is None:
        max_part = r
    yield from _partitions(r, max_part, max_parts)


def _partitions(r: int, max_part: int, max_parts: int) -> Iterator[tuple[int, ...]]:
    if r == 0:
        yield ()
        return
    if max_parts == 0:
        return
    # the first part must be large enough for the rest to fit in max_parts parts
    lo = -(-r // max_parts)
    for first in range(lo, min(r, max_part) + 1):
        for rest in _partitions(r - first, first, max_parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def partition_count(r: int) -> int:
    """p_r, the number of integer partitions of r."""
    table = [1] + [0] * r
    for part in range(1, r + 1):
        for s in range(part, r + 1):
            table[s] += table[s - part]
    return table[r]


def copartition(a: PartitionType) -> Copartition:
    """Drop parts of size 1 and decrement the rest."""
    return tuple(p - 1 for p in a.parts() if p > 1)


def inverse_copartition(c: Sequence[int], n: int) -> PartitionType:
    """Add 1 to each part of c and pad with singletons up to size n."""
    c = tuple(c)
    r = sum(c)
    ones = n - r - len(c)
    if ones < 0:
        raise InvalidInputError(f"n = {n} is too small for copartition {c}")
    return PartitionType.from_parts([p + 1 for p in c] + [1] * ones) if n else PartitionType(())


def enumerate_types(n: int, k: int) -> Iterator[PartitionType]:
    """Every type of size n with k parts, ordered lexicographically by copartition."""
    if not 0 <= k <= n:
        raise InvalidInputError("need 0 <= k <= n")
    if k == 0:
        if n == 0:
            yield PartitionType(())
        return
    for c in partitions(n - k, max_parts=k):
        yield inverse_copartition(c, n)


# -- laws ------------------------------------------------------------------

def _multiplicities(c: Sequence[int]) -> dict[int, int]:
    mult: dict[int, int] = {}
    for p in c:
        mult[p] = mult.get(p, 0) + 1
    return mult


@dataclass
class ExactLaw:
    """Law of the component type of a uniform assembly of size n with k components.

    The support is stored as copartitions of the rank r = n - k.  In exact
    mode ``prob`` holds Fractions summing to 1; in log mode ``log_prob``
    holds natural logs with absolute error at most ``log_error``.
    """

    n: int
    k: int
    support: list[Copartition]
    prob: list[Fraction] | None = None
    log_prob: list[float] | None = None
    log_error: float = 0.0
    mode: str = "exact"

    @property
    def r(self) -> int:
        return self.n - self.k

    def probabilities(self) -> list:
        """Exact Fractions in exact mode, floats in log mode."""
        if self.prob is not None:
            return list(self.prob)
        return [math.exp(v) for v in self.log_prob or ()]

    def types(self) -> Iterator[PartitionType]:
        for c in self.support:
            yield inverse_copartition(c, self.n)

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probabilities()))

    def _marginal(self, key) -> dict:
        out: dict = {}
        for c, p in zip(self.support, self.probabilities()):
            v = key(c)
            out[v] = out.get(v, 0) + p
        return dict(sorted(out.items()))

    def largest_law(self) -> dict:
        """Distribution of L_1, the largest component size."""
        return self._marginal(lambda c: (c[0] + 1) if c else (1 if self.n else 0))

    def count_law(self, i: int) -> dict:
        """Distribution of D_i, the number of components of size i."""
        if i == 1:
            return self._marginal(lambda c: self.k - len(c))
        return self._marginal(lambda c: sum(1 for p in c if p == i - 1))

    def to_rows(self) -> list[dict]:
        rows = []
        for idx, c in enumerate(self.support):
            row = {"copartition": " ".join(map(str, c))}
            if self.prob is not None:
                row["probability_num"] = self.prob[idx].numerator
                row["probability_den"] = self.prob[idx].denominator
            else:
                row["log_probability"] = self.log_prob[idx]
            rows.append(row)
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["copartition", "probability_num", "probability_den"] if self.prob is not None else [
            "copartition", "log_probability"]
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in self.to_rows():
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "r": self.r, "mode": self.mode,
                "log_error": self.log_error, "rows": self.to_rows()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def exact_component_law(spec: AssemblySpec, n: int, k: int) -> ExactLaw:
    """Exact law N(n, a)/p(n, k) over all types, computed with size-n vectors."""
    support, weights = [], []
    for a in enumerate_types(n, k):
        w = count_N(spec, a)
        if w:
            support.append(copartition(a))
            weights.append(w)
    total = sum(weights)
    if total == 0:
        raise EmptySupportError(f"p({n},{k}) = 0 for {spec.name}")
    return ExactLaw(n, k, support, [Fraction(w, total) for w in weights])


def log_falling(n: int, j: int) -> float:
    """log of the falling factorial (n)_j = n (n-1) ... (n-j+1)."""
    return math.fsum(math.log(n - i) for i in range(j))


def low_rank_law(spec: AssemblySpec, n: int, r: int, mode: str = "exact",
                 max_rank: int = MAX_ENUMERATION_RANK) -> ExactLaw:
    """Law of the copartition of a uniform rank-r assembly of size n.

    A copartition c with j parts and multiplicities mu_c has weight
    (n)_{r+j} m_1^{n-r-j} prod_c m_{c+1}^{mu_c} / (mu_c! ((c+1)!)^{mu_c}),
    so no vector of length n is ever formed.
    """
    if r < 0 or n < r + 1:
        raise InvalidInputError("need r >= 0 and n >= r + 1")
    if r > max_rank:
        raise BudgetExceededError(
            f"rank {r} needs {partition_count(r)} partitions (limit rank {max_rank})")
    if mode not in ("exact", "log"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    k = n - r
    jmax = min(r, k)
    support: list[Copartition] = []
    if mode == "exact":
        m1 = spec.m(1)
        base = n - r - jmax  # common power of m_1 factored out
        falling = [1]
        for j in range(1, r + jmax + 1):
            falling.append(falling[-1] * (n - j + 1))
        weights = []
        for c in partitions(r, max_parts=jmax):
            j = len(c)
            num = falling[r + j] * m1 ** (jmax - j)
            den = 1
            for part, mu in _multiplicities(c).items():
                mi = spec.m(part + 1)
                num *= mi**mu
                den *= math.factorial(mu) * math.factorial(part + 1) ** mu
            if num:
                q, rem = divmod(num, den)
                support.append(c)
                weights.append(q if rem == 0 else Fraction(num, den))
        total = sum(weights)
        if total == 0 or (base > 0 and m1 == 0):
            raise EmptySupportError(f"no rank-{r} assemblies of size {n} for {spec.name}")
        return ExactLaw(n, k, support, [Fraction(w) / total for w in weights])

    log_m1 = spec.log_m(1)
    # log of (n)_{r+j} / (n)_r and of m_1^{-j}; summed incrementally for accuracy
    rel = [0.0]
    for j in range(1, jmax + 1):
        rel.append(rel[-1] + math.log(n - r - j + 1) - (log_m1 if log_m1 != -math.inf else 0.0))
    logs = []
    nterms = 0
    for c in partitions(r, max_parts=jmax):
        j = len(c)
        if log_m1 == -math.inf and j != k:
            continue
        v = rel[j]
        for part, mu in _multiplicities(c).items():
            lm = spec.log_m(part + 1)
            if lm == -math.inf:
                v = -math.inf
                break
            v += mu * (lm - math.lgamma(part + 2)) - math.lgamma(mu + 1)
            nterms += 1
        if v != -math.inf:
            support.append(c)
            logs.append(v)
    if not logs:
        raise EmptySupportError(f"no rank-{r} assemblies of size {n} for {spec.name}")
    arr = np.asarray(logs)
    top = arr.max()
    log_total = top + math.log(math.fsum(np.exp(arr - top)))
    scale = max(1.0, float(np.abs(arr).max()), abs(rel[-1]))
    err = 64 * (2 * r + 8) * np.finfo(float).eps * scale
    return ExactLaw(n, k, support, log_prob=[float(v - log_total) for v in arr],
                    log_error=float(err), mode="log")


# -- low-rank dynamic program ------------------------------------------------

def _block_ways(spec: AssemblySpec, size: int, t: int) -> int:
    """Ways to split t*size labelled points into t decorated blocks of one size."""
    return (math.factorial(t * size) // (math.factorial(t) * math.factorial(size) ** t)) * spec.m(size) ** t


def _add_size(spec: AssemblySpec, table: list[list[int]], size: int, r: int) -> list[list[int]]:
    # table[rho][j]: labelled assemblies on rho + j points, j blocks of size >= 2, rank rho
    step = size - 1
    if spec.m(size) == 0:
        return table
    new = [row[:] for row in table]
    for rho in range(step, r + 1):
        tmax = rho // step
        row = new[rho]
        for j in range(1, rho + 1):
            acc = 0
            for t in range(1, min(tmax, j) + 1):
                prev = table[rho - t * step][j - t] if j - t <= rho - t * step else 0
                if prev:
                    acc += prev * math.comb(rho + j, t * size) * _block_ways(spec, size, t)
            if acc:
                row[j] += acc
    return new


def _empty_table(r: int) -> list[list[int]]:
    table = [[0] * (rho + 1) for rho in range(r + 1)]
    table[0][0] = 1
    return table


@lru_cache(maxsize=32)
def _rank_tables(spec: AssemblySpec, r: int) -> tuple:
    """Cumulative tables after admitting block sizes 2, 3, ..., r + 1."""
    tables = [_empty_table(r)]
    for size in range(2, r + 2):
        tables.append(_add_size(spec, tables[-1], size, r))
    return tuple(tables)


def _singleton_weights(spec: AssemblySpec, n: int, r: int) -> list[int]:
    """C(n, r+j) m_1^{n-r-j} for j = 0..min(r, n-r)."""
    m1 = spec.m(1)
    jmax = min(r, n - r)
    return [math.comb(n, r + j) * m1 ** (n - r - j) for j in range(jmax + 1)]


def _combine(weights: list[int], row: list[int]) -> int:
    return sum(w * row[j] for j, w in enumerate(weights) if j < len(row))


def low_rank_pnk(spec: AssemblySpec, n: int, r: int) -> int:
    """p(n, n - r) from the low-rank dynamic program (exact)."""
    if r < 0 or n < r:
        raise InvalidInputError("need 0 <= r <= n")
    if n == r:
        return 1 if n == 0 else 0
    return _combine(_singleton_weights(spec, n, r), _rank_tables(spec, r)[-1][r])


def low_rank_largest_law(spec: AssemblySpec, n: int, r: int) -> dict[int, Fraction]:
    """Exact law of L_1 for a uniform rank-r assembly of size n."""
    if r < 0 or n < r + 1:
        raise InvalidInputError("need r >= 0 and n >= r + 1")
    if r == 0:
        return {1: Fraction(1)}
    w = _singleton_weights(spec, n, r)
    tables = _rank_tables(spec, r)
    cumulative = [_combine(w, t[r]) for t in tables]  # index L: sizes <= L + 1
    total = cumulative[-1]
    if total == 0:
        raise EmptySupportError(f"no rank-{r} assemblies of size {n} for {spec.name}")
    law = {}
    for L in range(1, len(cumulative)):
        diff = cumulative[L] - cumulative[L - 1]
        if diff:
            law[L + 1] = Fraction(diff, total)
    return law


def low_rank_count_law(spec: AssemblySpec, n: int, r: int, size: int) -> dict[int, Fraction]:
    """Exact law of D_size (number of components of that size), size >= 2."""
    if size < 2:
        raise InvalidInputError("size must be at least 2 (D_1 is determined by j)")
    if r < 0 or n < r + 1:
        raise InvalidInputError("need r >= 0 and n >= r + 1")
    table = _empty_table(r)
    for s in range(2, r + 2):
        if s != size:
            table = _add_size(spec, table, s, r)
    w = _singleton_weights(spec, n, r)
    step = size - 1
    counts: dict[int, int] = {}
    for t in range(0, r // step + 1):
        rho = r - t * step
        row = []
        for j in range(min(r, n - r) + 1):
            jj = j - t
            if jj < 0 or jj > rho:
                row.append(0)
                continue
            base = table[rho][jj]
            if t:
                base *= math.comb(r + j, t * size) * _block_ways(spec, size, t)
            row.append(base)
        val = _combine(w, row)
        if val:
            counts[t] = val
    total = sum(counts.values())
    if total == 0:
        raise EmptySupportError(f"no rank-{r} assemblies of size {n} for {spec.name}")
    return {t: Fraction(v, total) for t, v in sorted(counts.items())}


# -- integer partitions: largest part ------------------------------------------

@dataclass
class LargestPartTable:
    """Exact counts of partitions of r by largest part."""

    r: int
    at_most: list[int]  # at_most[j] = #partitions of r with largest part <= j
    total: int = field(init=False)

    def __post_init__(self) -> None:
        self.total = self.at_most[self.r]

    def count(self, j: int) -> int:
        if j < 1 or j > self.r:
            return 0
        return self.at_most[j] - self.at_most[j - 1]

    def prob(self, j: int) -> Fraction:
        return Fraction(self.count(j), self.total)

    def mean(self) -> Fraction:
        # E L = sum_{j>=1} P(L >= j) = sum_{j=0}^{r-1} (1 - P(L <= j))
        acc = sum(self.total - self.at_most[j] for j in range(self.r))
        return Fraction(acc, self.total)

    def quantile(self, q: float) -> int:
        target = Fraction(q).limit_denominator(10**12) * self.total
        for j in range(1, self.r + 1):
            if self.at_most[j] >= target:
                return j
        return self.r


def partition_largest_part_table(r: int) -> LargestPartTable:
    """Dynamic program over (amount, max part) with exact big integers."""
    if r < 1:
        raise InvalidInputError("r must be at least 1")
    row = np.zeros(r + 1, dtype=object)
    row[:] = 0
    row[0] = 1
    at_most = [0] * (r + 1)
    at_most[0] = 0
    for j in range(1, r + 1):
        # row[s] += row[s - j], processed in blocks of length j so each block
        # reads only already-updated entries
        for start in range(j, r + 1, j):
            stop = min(start + j, r + 1)
            row[start:stop] += row[start - j:stop - j]
        at_most[j] = int(row[r])
    return LargestPartTable(r, at_most)


def lehner_normalizer(r: int) -> float:
    """(1/2c) sqrt(r) log r with c = pi/sqrt(6)."""
    c = math.pi / math.sqrt(6.0)
    return math.sqrt(r) * math.log(r) / (2 * c)
