"""Command-line front end: count, law, sample, bounds, limit-experiment.

Each command is a thin adapter over the library; every output embeds a run
manifest, and reruns with the same arguments differ only in its timestamp.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__
from . import assembly as asm
from . import bounds as bd
from . import counting as ct
from . import samplers as sm
from . import tilted
from .cache import DiskCache
from .errors import (AssemblyLabError, BudgetExceededError, ConfigurationError, DivergenceError,
                     InvalidInputError, NoSolutionError, UnsupportedError)

EXIT_OK, EXIT_INVALID, EXIT_HYPOTHESIS, EXIT_BUDGET = 0, 2, 3, 4

# largest rank for which the limit experiment uses the exact marginal DP
DP_MAX_RANK = 200
# cost cap (proposal draws) for a Monte Carlo grid point
MC_MAX_COST = 5 * 10**10
CONTRAST_MAX_RANK = 10**5


@dataclass
class RunManifest:
    command: str
    assembly: str
    params: dict
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_json(self) -> dict:
        return asdict(self)

    def comment_line(self) -> str:
        return "# manifest: " + json.dumps(self.to_json(), sort_keys=True)


# -- helpers -----------------------------------------------------------------

def _spec(args) -> asm.AssemblySpec:
    if args.assembly_file:
        return asm.load_assembly_file(args.assembly_file)
    return asm.builtin(args.assembly or "set-partitions")


def _assembly_id(args) -> str:
    return f"file:{args.assembly_file}" if args.assembly_file else (args.assembly or "set-partitions")


def _params(args, *names) -> dict:
    out = {}
    for name in names:
        v = getattr(args, name, None)
        if v is not None and v is not False:
            out[name] = v
    return out


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_text(manifest: RunManifest, body: dict) -> str:
    return json.dumps({"manifest": manifest.to_json(), **body}, indent=2, sort_keys=True,
                      default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _csv_text(manifest: RunManifest, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(manifest.comment_line() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _resolve_nk(args, need: bool = True) -> tuple[int, int | None]:
    n = args.n
    if n is None:
        raise InvalidInputError("--n is required")
    if args.k is not None and args.r is not None and args.k != n - args.r:
        raise InvalidInputError("--k and --r disagree")
    if args.k is not None:
        return n, args.k
    if args.r is not None:
        return n, n - args.r
    if need:
        raise InvalidInputError("give --k or --r")
    return n, None


# -- count ---------------------------------------------------------------------

def cmd_count(args) -> int:
    spec = _spec(args)
    n = args.n
    if n is None or n < 0:
        raise InvalidInputError("--n must be a nonnegative integer")
    cache = DiskCache.from_env()
    key = {"what": "pnk", "spec": spec.to_json(), "n": n}
    table = cache.get(key) if cache else None
    if table is None:
        table = ct.pnk_table(spec, n)
        if cache:
            cache.put(key, table)
    table = [[int(v) for v in row] for row in table]
    rows = []
    for nn in range(n + 1):
        total = sum(table[nn])
        for kk in range(nn + 1):
            if args.k is not None and (nn != n or kk != args.k):
                continue
            rows.append((nn, kk, table[nn][kk], total))
    manifest = RunManifest("count", _assembly_id(args), _params(args, "n", "k"))
    _emit(args, _csv_text(manifest, ["n", "k", "p_nk", "p_n"], rows))
    return EXIT_OK


# -- law -------------------------------------------------------------------------

def cmd_law(args) -> int:
    spec = _spec(args)
    n, k = _resolve_nk(args)
    r = n - k
    method = args.method
    if method == "auto":
        method = "low-rank" if r <= ct.MAX_ENUMERATION_RANK and n >= 2 * r else "full"
    if method == "low-rank":
        if r > ct.MAX_ENUMERATION_RANK:
            raise BudgetExceededError(
                f"rank {r} exceeds {ct.MAX_ENUMERATION_RANK}: {ct.partition_count(r)} types would be enumerated")
        law = ct.low_rank_law(spec, n, r, mode=args.mode or "exact")
    else:
        if r > ct.MAX_ENUMERATION_RANK:
            raise BudgetExceededError(
                f"rank {r} exceeds {ct.MAX_ENUMERATION_RANK}: {ct.partition_count(r)} types would be enumerated")
        law = ct.exact_component_law(spec, n, k)
    manifest = RunManifest("law", _assembly_id(args),
                           {**_params(args, "n", "k", "r", "mode"), "method": method})
    if args.format == "csv":
        rows = law.to_rows()
        header = list(rows[0].keys()) if rows else ["copartition"]
        _emit(args, _csv_text(manifest, header, [[row[h] for h in header] for row in rows]))
    else:
        _emit(args, _json_text(manifest, {"law": law.to_json()}))
    return EXIT_OK


# -- sample ---------------------------------------------------------------------------

def _x_policy(args, kind: str, spec, n, k):
    x = args.x
    if x is None:
        x = "auto-T" if kind in ("boltzmann", "exact-cn") else "auto-p1"
    if x == "auto-T":
        return tilted.solve_x_T(spec, n), "auto-T"
    if x == "auto-p1":
        cfg = sm.SamplerConfig(spec, n, k if k is not None else n)
        return sm.default_x(cfg, "dnk"), "auto-p1"
    try:
        return float(x), "explicit"
    except ValueError:
        raise InvalidInputError(f"--x must be auto-p1, auto-T or a number, got {x!r}") from None


def _z_line(z) -> str:
    return " ".join(f"{i}:{int(v)}" for i, v in enumerate(z, start=1) if v)


def cmd_sample(args) -> int:
    spec = _spec(args)
    kind = args.sampler
    n = args.n
    if n is None:
        raise InvalidInputError("--n is required")
    _, k = _resolve_nk(args, need=kind in ("k1", "exact-dnk"))
    count = args.samples if args.samples is not None else 1
    if count < 0:
        raise InvalidInputError("--samples must be nonnegative")
    theta = args.theta if args.theta is not None else 1.0
    if kind == "k2" and args.x is None:
        if k is None:
            raise InvalidInputError("k2 needs --k or --r (or an explicit --x and --theta)")
        theta, x = tilted.solve_theta_x(spec, n, k)
        policy = "solve-theta-x"
    else:
        x, policy = _x_policy(args, kind, spec, n, k)
    cfg = sm.SamplerConfig(spec, n, k, x=x, theta=theta, seed=args.seed, mode=args.support)
    lines: list[str] = []
    summary: dict = {"sampler": kind, "x": x, "theta": theta, "x_policy": policy, "samples": count}
    if kind in ("exact-dnk", "exact-cn"):
        reps = sm.sample_many(cfg, count, kind=kind, jobs=args.jobs) if count else []
        acc = [rep for rep in reps if rep.accepted]
        trials = sum(rep.trials_used for rep in reps)
        summary.update(accepted=len(acc), trials=trials,
                       acceptance_rate=(len(acc) / trials) if trials else None)
        if kind == "exact-dnk":
            lines = [" ".join(map(str, rep.copartition)) for rep in acc]
            if k is not None and 0 < n - k < n / 2:
                summary["lemma24_floor"] = 1 / (2 * bd.C0 * math.sqrt(2 * math.pi * (n - k)))
        else:
            lines = [_z_line(rep.result) for rep in acc]
    else:
        rng = sm.make_rng(args.seed, 0)
        if kind == "boltzmann":
            draws = sm.sample_boltzmann(cfg, size=count, rng=rng) if count else np.zeros((0, n))
            lines = [_z_line(z) for z in draws]
        elif kind == "k2":
            draws = sm.sample_k_v2(cfg, rng=rng, size=count) if count else np.zeros((0, n))
            lines = [_z_line(z) for z in draws]
        elif kind == "k1":
            mats = sm.sample_k_v1_counts(cfg, count, rng=rng) if count else np.zeros((0, 1))
            lines = [_z_line(row) for row in mats]
        else:
            raise InvalidInputError(f"unknown sampler {kind!r}")
    manifest = RunManifest("sample", _assembly_id(args),
                           {**_params(args, "n", "k", "r", "theta", "seed", "samples", "sampler", "support"),
                            "x": x, "x_policy": policy})
    header = [manifest.comment_line(), "# summary: " + json.dumps(summary, sort_keys=True, default=_json_default),
              f"# seed={args.seed} x={x!r} theta={theta!r} trials={summary.get('trials', count)}"]
    _emit(args, "\n".join(header + lines) + "\n")
    return EXIT_OK


# -- bounds ------------------------------------------------------------------------

def cmd_bounds(args) -> int:
    spec = _spec(args)
    n, k = _resolve_nk(args)
    r = n - k
    manifest = RunManifest("bounds", _assembly_id(args), _params(args, "n", "k", "r", "sd", "m"))
    try:
        rep = bd.bounds_report(spec, n, r, sd=args.sd, m=args.m or 0)
    except UnsupportedError as exc:
        _emit(args, _json_text(manifest, {"error": str(exc), "hypotheses": False}))
        return EXIT_HYPOTHESIS
    _emit(args, _json_text(manifest, {"report": rep.to_json()}))
    return EXIT_OK if rep.guarantee else EXIT_HYPOTHESIS


# -- limit experiment -------------------------------------------------------------------

def _limit_point(task) -> dict:
    spec, n, r, ell, t, samples, seed, block = task
    k = n - r
    lam = float(bd.lambda_limit_ell(spec, t, ell))
    target = math.exp(-lam)
    row = {"n": n, "r": r, "ell": ell, "t": t, "limit_P_L1_eq": target}
    if r <= DP_MAX_RANK:
        law = ct.low_rank_largest_law(spec, n, r)
        p_eq = float(law.get(ell + 1, 0))
        p_pair = float(law.get(ell + 1, 0) + law.get(ell + 2, 0))
        row.update(method="exact", P_L1_eq=p_eq, P_L1_pair=p_pair, abs_diff=abs(p_eq - target),
                   ci_low=None, ci_high=None, samples=None)
        return row
    cfg = sm.SamplerConfig(spec, n, k, seed=seed)
    reps = sm.sample_many(cfg, samples, block=block)
    acc = [rep.result.largest for rep in reps if rep.accepted]
    m = len(acc)
    hits_eq = sum(1 for v in acc if v == ell + 1)
    hits_pair = sum(1 for v in acc if v in (ell + 1, ell + 2))
    p_eq = hits_eq / m if m else math.nan
    p_pair = hits_pair / m if m else math.nan
    lo, hi = _wilson(hits_pair, m)
    row.update(method="monte-carlo", P_L1_eq=p_eq, P_L1_pair=p_pair, abs_diff=abs(p_eq - target),
               ci_low=lo, ci_high=hi, samples=m)
    return row


def _wilson(hits: int, m: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval."""
    if m == 0:
        return math.nan, math.nan
    ph = hits / m
    den = 1 + z * z / m
    mid = (ph + z * z / (2 * m)) / den
    half = z * math.sqrt(ph * (1 - ph) / m + z * z / (4 * m * m)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def _check_limit_cost(rows_plan, samples: int) -> None:
    for n, r in rows_plan:
        if r > DP_MAX_RANK:
            if samples <= 0:
                raise BudgetExceededError(f"rank {r} needs Monte Carlo but --samples is 0")
            # expected proposals ~ sqrt(2 pi r) per accepted sample, ~ r+2 cells each
            cost = samples * math.sqrt(2 * math.pi * r) * (r + 2) * 8
            if cost > MC_MAX_COST:
                raise BudgetExceededError(f"grid point n={n}, r={r}: estimated cost {cost:.3g} exceeds budget")


def cmd_limit_experiment(args) -> int:
    spec = _spec(args)
    if args.contrast:
        r = args.r
        if r is None or r < 1:
            raise InvalidInputError("contrast mode needs --r >= 1")
        if r > CONTRAST_MAX_RANK:
            raise BudgetExceededError(f"contrast DP at r = {r} exceeds the budget {CONTRAST_MAX_RANK}")
        tab = ct.partition_largest_part_table(r)
        mean = float(tab.mean())
        norm = ct.lehner_normalizer(r)
        manifest = RunManifest("limit-experiment", "integer-partitions",
                               {"contrast": True, "r": r})
        body = {"r": r, "mean_largest_part": mean, "lehner_normalizer": norm, "ratio": mean / norm,
                "median": tab.quantile(0.5), "q05": tab.quantile(0.05), "q95": tab.quantile(0.95)}
        _emit(args, _json_text(manifest, {"contrast": body}))
        return EXIT_OK
    ell = args.ell or 1
    t = args.t if args.t is not None else 1.0
    ns = args.n_grid
    if not ns:
        raise InvalidInputError("give one or more --n values")
    plan = []
    for n in ns:
        r = int(round(t * n ** (ell / (ell + 1))))
        if not 0 < 2 * r < n:
            raise InvalidInputError(f"n = {n} gives r = {r} outside 0 < r < n/2")
        plan.append((n, r))
    samples = args.samples if args.samples is not None else 2000
    _check_limit_cost(plan, samples)
    tasks = [(spec, n, r, ell, t, samples, args.seed, sm.BLOCK) for n, r in plan]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_limit_point, tasks))
    else:
        rows = [_limit_point(tk) for tk in tasks]
    header = ["n", "r", "ell", "t", "method", "P_L1_eq", "limit_P_L1_eq", "abs_diff", "P_L1_pair",
              "ci_low", "ci_high", "samples"]
    manifest = RunManifest("limit-experiment", _assembly_id(args),
                           {"n": list(ns), "t": t, "ell": ell, "samples": samples, "seed": args.seed})
    _emit(args, _csv_text(manifest, header, [["" if row[h] is None else row[h] for h in header] for row in rows]))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--assembly", help="built-in assembly (set-partitions, permutations, mappings, graphs)")
    common.add_argument("--assembly-file", help="JSON assembly definition")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)

    p = argparse.ArgumentParser(prog="assembly-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("count", parents=[common], help="p(n) and p(n,k) as a CSV triangle")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--k", type=int)
    c.set_defaults(func=cmd_count)

    law = sub.add_parser("law", parents=[common], help="exact law of the component type")
    law.add_argument("--n", type=int, required=True)
    law.add_argument("--k", type=int)
    law.add_argument("--r", type=int)
    law.add_argument("--mode", choices=["exact", "log"], default="exact")
    law.add_argument("--method", choices=["auto", "full", "low-rank"], default="auto")
    law.add_argument("--format", choices=["json", "csv"], default="json")
    law.set_defaults(func=cmd_law)

    s = sub.add_parser("sample", parents=[common], help="seeded samplers")
    s.add_argument("--sampler", choices=["boltzmann", "k1", "k2", "exact-dnk", "exact-cn"], default="exact-dnk")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int)
    s.add_argument("--r", type=int)
    s.add_argument("--x", help="auto-p1, auto-T or a positive number")
    s.add_argument("--theta", type=float)
    s.add_argument("--samples", type=int)
    s.add_argument("--support", choices=["finite", "infinite"], default="infinite")
    s.set_defaults(func=cmd_sample)

    b = sub.add_parser("bounds", parents=[common], help="effective low-rank bounds report")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--k", type=int)
    b.add_argument("--r", type=int)
    b.add_argument("--sd", action="store_true", help="include the SD deviation-bound subreport")
    b.add_argument("--m", type=int, default=0, help="value of D_3 for the SD interval")
    b.set_defaults(func=cmd_bounds)

    le = sub.add_parser("limit-experiment", parents=[common], help="convergence tables and the partition contrast")
    le.add_argument("--n", dest="n_grid", type=int, nargs="+")
    le.add_argument("--t", type=float)
    le.add_argument("--ell", type=int, default=1)
    le.add_argument("--r", type=int)
    le.add_argument("--samples", type=int)
    le.add_argument("--contrast", action="store_true")
    le.add_argument("--mode", choices=["exact", "log"], default="exact")
    le.set_defaults(func=cmd_limit_experiment)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except UnsupportedError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS if args.command == "bounds" else EXIT_INVALID
    except (InvalidInputError, ConfigurationError, DivergenceError, NoSolutionError,
            AssemblyLabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
