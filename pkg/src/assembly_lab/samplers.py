"""Seeded samplers: Boltzmann, the two k-Boltzmann variants, and exact hard rejection.

Randomness comes from numpy's PCG64.  A run is identified by ``(seed,
stream)``; stream ``b`` is the child ``SeedSequence(seed, spawn_key=(b,))``,
so work split into blocks gives the same output for any number of workers.

Exact D(n,k) proposals are drawn as multinomial counts over sizes 1..r+1
plus one overflow cell for every larger size.  A proposal with an overflow
component can never satisfy Y_1 + ... + Y_k = n, so no truncation of the Y
law enters the accepted samples.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np
from scipy.optimize import minimize_scalar

from . import assembly as asm
from .assembly import AssemblySpec
from .counting import PartitionType, copartition
from .errors import InvalidInputError, NoSolutionError, RangeError
from . import tilted

__all__ = [
    "SamplerConfig",
    "SampleReport",
    "make_rng",
    "default_x",
    "sample_boltzmann",
    "sample_k_v1",
    "sample_k_v1_counts",
    "sample_k_v2",
    "sample_exact_Dnk",
    "iter_exact_Dnk",
    "sample_exact_Cn",
    "iter_exact_Cn",
    "sample_many",
    "dump_samples",
]

DEFAULT_MAX_TRIALS = 10**6
BATCH = 4096
BLOCK = 1024


@dataclass(frozen=True)
class SamplerConfig:
    spec: AssemblySpec
    n: int
    k: int | None = None
    x: float | None = None
    theta: float = 1.0
    seed: int = 0
    max_trials: int | None = None
    mode: str = "infinite"
    stream: int = 0

    def __post_init__(self) -> None:
        if self.n < 0:
            raise InvalidInputError("n must be nonnegative")
        if self.x is not None and not self.x > 0:
            raise InvalidInputError("x must be positive")
        if not self.theta > 0:
            raise InvalidInputError("theta must be positive")
        if self.max_trials is not None and self.max_trials < 1:
            raise InvalidInputError("max_trials must be at least 1")
        if self.k is not None and not 0 <= self.k <= self.n:
            raise InvalidInputError("need 0 <= k <= n")
        if self.mode not in ("finite", "infinite"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SampleReport:
    """One outcome of a rejection sampler.

    ``result`` is a PartitionType (exact D), a Z-vector (exact C) or None
    when ``max_trials`` proposals were all rejected.
    """

    result: object
    trials_used: int
    accepted: bool

    @property
    def copartition(self) -> tuple:
        if isinstance(self.result, PartitionType):
            return copartition(self.result)
        if self.result is None:
            raise InvalidInputError("rejected report carries no sample")
        return copartition(_z_to_type(self.result))


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def _z_to_type(z) -> PartitionType:
    return PartitionType(tuple(int(v) for v in z))


def default_x(config: SamplerConfig, kind: str = "dnk") -> float:
    """x policy: the explicit saddle choice for k-samplers, E T_n = n otherwise."""
    if config.x is not None:
        return float(config.x)
    spec, n = config.spec, config.n
    if kind in ("boltzmann", "cn"):
        return tilted.solve_x_T(spec, n)
    k = config.k if config.k is not None else n
    r = n - k
    if r == 0:
        # only all-singleton proposals succeed; make them overwhelmingly likely
        return 1.0 / (n * n + 1)
    R = asm.radius(spec)
    try:
        x = tilted.solve_x_p1(spec, n, k, variant="ratio", check_range=False)
        if config.mode == "finite" or x < R:
            return x
    except RangeError:
        pass
    try:
        return tilted.solve_x_p1(spec, n, k, variant="p1")
    except NoSolutionError:
        return _best_acceptance_x(config, R)


def _best_acceptance_x(config: SamplerConfig, R: float) -> float:
    """x in (0, R) maximizing P(Y_1 + ... + Y_k = n), when no saddle root exists.

    Every such x gives an exact sampler; this one only minimizes expected trials.
    """
    spec, n, k = config.spec, config.n, config.k

    if math.isfinite(R):
        to_x, bounds = (lambda t: R * t), (1e-3, 1 - 1e-3)
    else:
        to_x, bounds = math.exp, (-7.0, 7.0)

    def neg_log_accept(t):
        try:
            p = tilted.ysum_prob(spec, to_x(t), k, n, config.mode)
        except ArithmeticError:
            return math.inf
        return -math.log(p) if p > 0 else math.inf

    res = minimize_scalar(neg_log_accept, bounds=bounds, method="bounded", options={"xatol": 1e-6})
    return float(to_x(res.x))


def _rng_for(config: SamplerConfig, rng) -> np.random.Generator:
    return rng if rng is not None else make_rng(config.seed, config.stream)


def _lambda_vec(spec: AssemblySpec, x: float, n: int, theta: float = 1.0) -> np.ndarray:
    return np.array([asm.lambda_i(spec, x, i, theta) for i in range(1, n + 1)], dtype=float)


# -- unconditioned samplers ----------------------------------------------------

def sample_boltzmann(config: SamplerConfig, size: int | None = None, rng=None) -> np.ndarray:
    """Independent Z_i ~ Poisson(lambda_i(x)), i = 1..n; shape (n,) or (size, n)."""
    x = default_x(config, "boltzmann")
    lam = _lambda_vec(config.spec, x, config.n, config.theta)
    gen = _rng_for(config, rng)
    shape = (config.n,) if size is None else (size, config.n)
    return gen.poisson(lam, size=shape)


def _y_cdf(config: SamplerConfig, x: float) -> np.ndarray:
    ydist = tilted.y_pmf(config.spec, x, config.mode, config.n)
    cdf = np.cumsum(ydist.pmf)
    cdf /= cdf[-1]
    return cdf


def sample_k_v1(config: SamplerConfig, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """k i.i.d. sizes from the Y law and their counts N_1, N_2, ... (no conditioning).

    Infinite mode draws from the Y law truncated where its tail mass is
    below 1e-15.
    """
    if not config.k or config.k < 1:
        raise InvalidInputError("k must be at least 1")
    x = default_x(config, "dnk")
    cdf = _y_cdf(config, x)
    gen = _rng_for(config, rng)
    ys = np.searchsorted(cdf, gen.random(config.k), side="right") + 1
    ys = np.minimum(ys, len(cdf))
    counts = np.bincount(ys, minlength=len(cdf) + 1)[1:]
    return ys, counts


def sample_k_v1_counts(config: SamplerConfig, size: int, rng=None) -> np.ndarray:
    """Count vectors of ``size`` independent k-samples, shape (size, cutoff)."""
    x = default_x(config, "dnk")
    pmf = tilted.y_pmf(config.spec, x, config.mode, config.n).pmf
    gen = _rng_for(config, rng)
    return gen.multinomial(config.k, pmf / pmf.sum(), size=size)


def sample_k_v2(config: SamplerConfig, rng=None, size: int | None = None) -> np.ndarray:
    """Z_i ~ Poisson(theta lambda_i(x)) independently; neither T_n nor K_n is conditioned.

    With ``config.x`` unset, (theta, x) solve E K_n = k and E T_n = n.
    """
    if config.x is None:
        if config.k is None:
            raise InvalidInputError("k is needed to solve for (theta, x)")
        theta, x = tilted.solve_theta_x(config.spec, config.n, config.k)
    else:
        theta, x = config.theta, float(config.x)
    lam = _lambda_vec(config.spec, x, config.n, theta)
    gen = _rng_for(config, rng)
    shape = (config.n,) if size is None else (size, config.n)
    return gen.poisson(lam, size=shape)


# -- exact samplers by hard rejection -------------------------------------------

def _resolve_max_trials(config: SamplerConfig, accept_prob) -> int:
    if config.max_trials is not None:
        return config.max_trials
    try:
        y = accept_prob()
    except (InvalidInputError, NoSolutionError, ArithmeticError, ValueError):
        return DEFAULT_MAX_TRIALS
    if not y > 0 or not math.isfinite(y):
        return DEFAULT_MAX_TRIALS
    return max(1, math.ceil(50 / y))


def _rejection_stream(gen, propose, accept, build, max_trials: int) -> Iterator[SampleReport]:
    """Turn batched proposals into the sequential report stream.

    A report is emitted at each acceptance, and a rejected report whenever
    ``max_trials`` consecutive proposals fail.
    """
    since = 0  # proposals since the last emitted report
    while True:
        batch = propose(gen)
        ok = np.flatnonzero(accept(batch))
        prev = -1
        for idx in ok:
            used = since + (idx - prev)
            while used > max_trials:
                yield SampleReport(None, max_trials, False)
                used -= max_trials
            yield SampleReport(build(batch[idx]), int(used), True)
            since = 0
            prev = idx
        since += len(batch) - 1 - prev
        while since >= max_trials:
            yield SampleReport(None, max_trials, False)
            since -= max_trials


def _dnk_plan(config: SamplerConfig) -> tuple[float, np.ndarray, int]:
    spec, n, k = config.spec, config.n, config.k
    if k is None:
        raise InvalidInputError("exact D(n,k) sampling needs k")
    if k == 0:
        raise InvalidInputError("k = 0 has no components to sample" if n else "k = 0 requires n = 0")
    x = default_x(config, "dnk")
    r = n - k
    L = r + 1
    ydist = tilted.y_pmf(spec, x, config.mode, n)
    pmf = ydist.pmf
    used = pmf[:L]
    overflow = math.fsum(pmf[L:]) + ydist.tail_bound
    pvals = np.append(used, overflow)
    pvals /= pvals.sum()
    if pvals[0] <= 0:
        raise InvalidInputError("P(Y = 1) vanishes; no proposal can be accepted")
    return x, pvals, L


def iter_exact_Dnk(config: SamplerConfig, rng=None) -> Iterator[SampleReport]:
    """Endless stream of exact D(n,k) draws by hard rejection of k-sample proposals."""
    x, pvals, L = _dnk_plan(config)
    n, k = config.n, config.k
    r = n - k
    weights = np.arange(L)  # X = Y - 1 for the in-range cells
    gen = _rng_for(config, rng)
    max_trials = _resolve_max_trials(
        config, lambda: tilted.ysum_prob(config.spec, x, k, n, config.mode))

    def propose(g):
        return g.multinomial(k, pvals, size=BATCH)

    def accept(batch):
        return (batch[:, L] == 0) & (batch[:, :L] @ weights == r)

    def build(row):
        a = [0] * n
        a[:L] = (int(v) for v in row[:L])
        return PartitionType(tuple(a))

    return _rejection_stream(gen, propose, accept, build, max_trials)


def sample_exact_Dnk(config: SamplerConfig, rng=None) -> SampleReport:
    return next(iter_exact_Dnk(config, rng))


def iter_exact_Cn(config: SamplerConfig, rng=None) -> Iterator[SampleReport]:
    """Exact draws from C(n): Boltzmann vectors rejected until T_n = n."""
    n = config.n
    if n < 1:
        raise InvalidInputError("n must be positive")
    x = default_x(config, "cn")
    lam = _lambda_vec(config.spec, x, n, config.theta)
    sizes = np.arange(1, n + 1)
    gen = _rng_for(config, rng)
    max_trials = _resolve_max_trials(config, lambda: tilted.tn_pmf(config.spec, x, n, config.theta).prob(n))

    def propose(g):
        return g.poisson(lam, size=(BATCH, n))

    def accept(batch):
        return batch @ sizes == n

    return _rejection_stream(gen, propose, accept, lambda row: row.copy(), max_trials)


def sample_exact_Cn(config: SamplerConfig, rng=None) -> SampleReport:
    return next(iter_exact_Cn(config, rng))


# -- many samples, deterministic under any worker count --------------------------

_ITERATORS = {"exact-dnk": iter_exact_Dnk, "exact-cn": iter_exact_Cn}


def _run_block(args) -> list[SampleReport]:
    kind, config, block, size = args
    stream = _ITERATORS[kind](replace(config, stream=block))
    return [next(stream) for _ in range(size)]


def sample_many(config: SamplerConfig, count: int, kind: str = "exact-dnk",
                jobs: int = 1, block: int = BLOCK) -> list[SampleReport]:
    """``count`` reports from block b = 0, 1, ... each on its own derived stream.

    The block layout depends only on ``count`` and ``block``, so the output
    is identical for every ``jobs``.
    """
    if kind not in _ITERATORS:
        raise InvalidInputError(f"unknown sampler {kind!r}")
    if count < 0:
        raise InvalidInputError("count must be nonnegative")
    tasks = []
    b = 0
    while b * block < count:
        tasks.append((kind, config, b, min(block, count - b * block)))
        b += 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_block, tasks))
    else:
        parts = [_run_block(t) for t in tasks]
    return [rep for part in parts for rep in part]


def dump_samples(reports: list[SampleReport], *, seed: int, x: float, theta: float = 1.0) -> str:
    """One line per accepted sample (copartition parts, space separated) after a header."""
    trials = sum(rep.trials_used for rep in reports)
    accepted = [rep for rep in reports if rep.accepted]
    lines = [f"# seed={seed} x={x!r} theta={theta!r} trials={trials} accepted={len(accepted)}"]
    lines.extend(" ".join(map(str, rep.copartition)) for rep in accepted)
    return "\n".join(lines) + "\n"
