"""Monte Carlo threshold lab: success curves, quantile thresholds, means.

One pool of per-trial stopping times serves every estimator for a
configuration: quantiles of the same empirical distribution are coupled and
monotone in theta, and the pool is embarrassingly parallel with bit-for-bit
reproducible results for any worker count (trial i is always driven by
stream (seed_base, i) regardless of which process runs it).

Every report that mentions a threshold is for the *given* strategy, which
upper-bounds the strategy-optimal threshold; the infimum over all strategies
is not computable and is never claimed.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
from dataclasses import dataclass
from fractions import Fraction

from .engine import SemiRandomStar, run_process
from .errors import DataError, UsageError

WILSON_Z = 1.96

# Subadditivity slack: the underlying inequality only guarantees that SOME
# finite constant works, so the calibration below is a recorded choice, not a
# derived value.
SUBADDITIVITY_SE_FACTOR = 3.0
SUBADDITIVITY_DRIFT_EXPONENT = -0.1


def resolve_workers(flag: int | None = None) -> int:
    """Worker count: explicit flag, then APLAB_WORKERS, then 1."""
    if flag is not None:
        if flag < 1:
            raise UsageError("workers must be >= 1")
        return flag
    env = os.environ.get("APLAB_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"APLAB_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError("APLAB_WORKERS must be >= 1")
        return value
    return 1


# ---------------------------------------------------------------------------
# Trial pools


@dataclass
class TrialPool:
    property_id: str
    strategy_id: str
    n: int
    seed_base: int
    max_steps: int
    times: list[int | None]  # per trial; None = censored at max_steps

    @property
    def trials(self) -> int:
        return len(self.times)

    def successes_at(self, t: int) -> int:
        return sum(1 for T in self.times if T is not None and T <= t)

    def p_hat(self, t: int) -> float:
        return self.successes_at(t) / self.trials

    def censored(self) -> int:
        return sum(1 for T in self.times if T is None)

    def config(self) -> dict:
        return {
            "kind": "trials",
            "property": self.property_id,
            "strategy": self.strategy_id,
            "n": self.n,
            "seed_base": self.seed_base,
            "trials": self.trials,
            "max_steps": self.max_steps,
        }


_WORKER_STATE: dict = {}


def _init_worker(strategy_id, property_id, n, seed_base, max_steps):
    from .properties import parse_property_id
    from .strategies import parse_strategy_id

    _WORKER_STATE["strategy"] = parse_strategy_id(strategy_id)
    _WORKER_STATE["property"] = parse_property_id(property_id)
    _WORKER_STATE["n"] = n
    _WORKER_STATE["seed_base"] = seed_base
    _WORKER_STATE["max_steps"] = max_steps


def _run_trial(trial: int) -> int | None:
    trace = run_process(
        SemiRandomStar(_WORKER_STATE["n"]),
        _WORKER_STATE["strategy"],
        _WORKER_STATE["property"],
        seed=_WORKER_STATE["seed_base"],
        trial=trial,
        max_steps=_WORKER_STATE["max_steps"],
    )
    return trace.stopping_time


def run_pool(
    strategy_id: str,
    property_id: str,
    n: int,
    trials: int,
    seed_base: int,
    *,
    max_steps: int | None = None,
    workers: int | None = None,
) -> TrialPool:
    """Run `trials` independent processes; trial i uses stream (seed_base, i)."""
    if trials < 1:
        raise UsageError("trials must be >= 1")
    if max_steps is None:
        max_steps = 10 * n
    nworkers = resolve_workers(workers)
    init_args = (strategy_id, property_id, n, seed_base, max_steps)
    if nworkers == 1:
        _init_worker(*init_args)
        times = [_run_trial(i) for i in range(trials)]
    else:
        ctx = multiprocessing.get_context("fork")
        chunk = max(1, trials // (nworkers * 4))
        with ctx.Pool(nworkers, initializer=_init_worker, initargs=init_args) as pool:
            times = pool.map(_run_trial, range(trials), chunksize=chunk)
    return TrialPool(
        property_id=property_id,
        strategy_id=strategy_id,
        n=n,
        seed_base=seed_base,
        max_steps=max_steps,
        times=times,
    )


# ---------------------------------------------------------------------------
# Interval and estimator arithmetic


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials < 1 or not 0 <= successes <= trials:
        raise UsageError("wilson_interval needs 0 <= successes <= trials, trials >= 1")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class SuccessCurve:
    n: int
    strategy_id: str
    property_id: str
    grid: list[tuple[int, int, int, float, float, float]]
    # rows: (t, trials, successes, p_hat, wilson_lo, wilson_hi)


def success_curve(pool: TrialPool, t_grid) -> SuccessCurve:
    grid_sorted = list(t_grid)
    if grid_sorted != sorted(grid_sorted):
        raise UsageError("t_grid must be sorted")
    rows = []
    for t in grid_sorted:
        s = pool.successes_at(t)
        lo, hi = wilson_interval(s, pool.trials)
        rows.append((t, pool.trials, s, s / pool.trials, lo, hi))
    return SuccessCurve(
        n=pool.n,
        strategy_id=pool.strategy_id,
        property_id=pool.property_id,
        grid=rows,
    )


@dataclass
class ThresholdEstimate:
    theta: Fraction
    n: int
    t_hat: int
    ci: tuple[int, int]
    trials_used: int


def _quantile_rank(theta: Fraction, trials: int) -> int:
    """k = ceil(theta * trials), computed exactly."""
    num = theta.numerator * trials
    den = theta.denominator
    return -(-num // den)


def estimate_m_theta(pool: TrialPool, theta: Fraction) -> ThresholdEstimate:
    theta = Fraction(theta)
    if not 0 < theta < 1:
        raise UsageError("theta must lie strictly between 0 and 1")
    m = pool.trials
    k = _quantile_rank(theta, m)
    finite = sorted(T for T in pool.times if T is not None)
    if len(finite) < k:
        raise DataError(
            f"success fraction never reaches {theta} within max_steps="
            f"{pool.max_steps} ({len(finite)}/{m} trials finished)"
        )
    t_hat = finite[k - 1]
    # definitional invariant of the empirical quantile
    assert pool.successes_at(t_hat) * theta.denominator >= theta.numerator * m
    assert pool.successes_at(t_hat - 1) * theta.denominator < theta.numerator * m
    theta_f = float(theta)
    t_lo = None
    t_hi = None
    count = 0
    i = 0
    while i < len(finite):
        t = finite[i]
        while i < len(finite) and finite[i] == t:
            count += 1
            i += 1
        lo, hi = wilson_interval(count, m)
        if t_lo is None and hi >= theta_f:
            t_lo = t
        if t_hi is None and lo >= theta_f:
            t_hi = t
            break
    if t_lo is None:
        t_lo = t_hat
    if t_hi is None:
        t_hi = pool.max_steps  # upper uncertainty exceeds the horizon
    return ThresholdEstimate(theta=theta, n=pool.n, t_hat=t_hat, ci=(t_lo, t_hi), trials_used=m)


def sharpness_width(pool: TrialPool, theta1: Fraction, theta2: Fraction):
    theta1, theta2 = Fraction(theta1), Fraction(theta2)
    if not theta1 <= theta2:
        raise UsageError("need theta1 <= theta2")
    if theta1 == theta2:
        return 0, 0.0
    a = estimate_m_theta(pool, theta1)
    b = estimate_m_theta(pool, theta2)
    width = b.t_hat - a.t_hat
    return width, width / pool.n


@dataclass
class MeanEstimate:
    n: int
    mean: float
    se: float
    trials_used: int
    censored: int


def estimate_I_n(pool: TrialPool) -> MeanEstimate:
    if pool.trials < 30:
        raise UsageError("estimate_I_n needs at least 30 trials")
    finite = [T for T in pool.times if T is not None]
    censored = pool.trials - len(finite)
    if censored * 10 > pool.trials:
        raise DataError(
            f"{censored}/{pool.trials} trials censored at max_steps={pool.max_steps}; "
            "mean estimate would be biased"
        )
    mean = sum(finite) / len(finite)
    var = sum((T - mean) ** 2 for T in finite) / (len(finite) - 1)
    se = math.sqrt(var / len(finite))
    return MeanEstimate(n=pool.n, mean=mean, se=se, trials_used=len(finite), censored=censored)


def subadditivity_check(estimates: dict[int, MeanEstimate], n: int, i: int) -> dict:
    """Subadditivity check: the per-vertex cost at n is at most the worse of
    the two split parts, up to statistical slack."""
    j = n - i
    if min(i, j) < n ** 0.8:
        raise UsageError("split parts must both be at least n^0.8")
    try:
        en, ei, ej = estimates[n], estimates[i], estimates[j]
    except KeyError as exc:
        raise UsageError(f"missing estimate for n={exc.args[0]}") from None
    lhs = en.mean / n
    rhs_core = max(ei.mean / i, ej.mean / j)
    se_combined = en.se / n + ei.se / i + ej.se / j
    slack = SUBADDITIVITY_SE_FACTOR * se_combined + n ** SUBADDITIVITY_DRIFT_EXPONENT
    margin = rhs_core + slack - lhs
    return {
        "n": n,
        "i": i,
        "lhs": lhs,
        "rhs": rhs_core + slack,
        "slack": slack,
        "margin": margin,
        "holds": margin >= 0,
    }


@dataclass
class LinearFit:
    points: list[tuple[int, float]]  # (n, I_n estimate)
    ratios: list[float]  # I_n / n
    drift: float  # |last ratio - previous ratio|
    converged: bool


def linear_fit(estimates: list[MeanEstimate]) -> LinearFit:
    if len(estimates) < 3:
        raise UsageError("linear_fit needs at least 3 doubling n values")
    ns = [e.n for e in estimates]
    if ns != sorted(ns) or len(set(ns)) != len(ns):
        raise UsageError("n values must be strictly increasing")
    points = [(e.n, e.mean) for e in estimates]
    ratios = [e.mean / e.n for e in estimates]
    drift = abs(ratios[-1] - ratios[-2])
    a, b = estimates[-2], estimates[-1]
    converged = drift <= 3 * (a.se / a.n + b.se / b.n)
    return LinearFit(points=points, ratios=ratios, drift=drift, converged=converged)


# ---------------------------------------------------------------------------
# CSV persistence (schemas consumed by the plotting component)

TRIALS_HEADER = "property,strategy,n,seed_base,trial,stopping_time,censored"
SUMMARY_HEADER = "property,strategy,n,theta,t_hat,ci_lo,ci_hi,trials"


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def format_trials_csv(pool: TrialPool) -> str:
    lines = [f"# config={config_hash(pool.config())}", TRIALS_HEADER]
    for trial, T in enumerate(pool.times):
        st = "" if T is None else str(T)
        cen = 1 if T is None else 0
        lines.append(
            f"{pool.property_id},{pool.strategy_id},{pool.n},"
            f"{pool.seed_base},{trial},{st},{cen}"
        )
    return "\n".join(lines) + "\n"


def format_summary_csv(pool: TrialPool, estimates: list[ThresholdEstimate]) -> str:
    lines = [f"# config={config_hash(pool.config())}", SUMMARY_HEADER]
    for est in estimates:
        theta = f"{est.theta.numerator}/{est.theta.denominator}"
        lines.append(
            f"{pool.property_id},{pool.strategy_id},{pool.n},{theta},"
            f"{est.t_hat},{est.ci[0]},{est.ci[1]},{est.trials_used}"
        )
    return "\n".join(lines) + "\n"


def parse_trials_csv(text: str) -> tuple[str, list[dict]]:
    """Returns (config hash, rows).  Raises DataError on schema mismatch."""
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith("# config="):
        raise DataError("trials CSV must start with a '# config=' line")
    if lines[1] != TRIALS_HEADER:
        raise DataError(f"trials CSV header mismatch: {lines[1]!r}")
    cfg = lines[0][len("# config=") :]
    rows = []
    for ln in lines[2:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != 7:
            raise DataError(f"bad trials row: {ln!r}")
        rows.append(
            {
                "property": parts[0],
                "strategy": parts[1],
                "n": int(parts[2]),
                "seed_base": int(parts[3]),
                "trial": int(parts[4]),
                "stopping_time": None if parts[5] == "" else int(parts[5]),
                "censored": int(parts[6]),
            }
        )
    return cfg, rows


def parse_summary_csv(text: str) -> tuple[str, list[dict]]:
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith("# config="):
        raise DataError("summary CSV must start with a '# config=' line")
    if lines[1] != SUMMARY_HEADER:
        raise DataError(f"summary CSV header mismatch: {lines[1]!r}")
    cfg = lines[0][len("# config=") :]
    rows = []
    for ln in lines[2:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != 8:
            raise DataError(f"bad summary row: {ln!r}")
        num, _, den = parts[3].partition("/")
        rows.append(
            {
                "property": parts[0],
                "strategy": parts[1],
                "n": int(parts[2]),
                "theta": Fraction(int(num), int(den or "1")),
                "t_hat": int(parts[4]),
                "ci_lo": int(parts[5]),
                "ci_hi": int(parts[6]),
                "trials": int(parts[7]),
            }
        )
    return cfg, rows
