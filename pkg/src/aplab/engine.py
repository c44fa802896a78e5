"""Adaptive edge-arrival process engine.

Each step t = 1, 2, ... an edge subset X_t is drawn from the arrival
distribution; the strategy inspects the evolving multigraph and keeps exactly
one edge of X_t, which is added.  The run stops at the first step whose graph
satisfies the (monotone) target property, or after max_steps.

Determinism contract: all environment randomness is a pure function of
(seed, trial, step) via the counter streams in aplab.rng, so results are
independent of execution order and worker count.  Strategy randomness, if a
strategy asks for any, comes from a separate tagged stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .errors import ContractViolation, UsageError
from .graph import MultiGraph
from .rng import (
    TAG_ENV,
    TAG_STRATEGY,
    CounterRng,
    draw_u64,
    env_counter,
    star_centers_block,
    stream_key,
)

__all__ = [
    "SemiRandomStar",
    "UniformKEdges",
    "Explicit",
    "StarSample",
    "EdgeListSample",
    "StrategyHandle",
    "Trace",
    "sample_at",
    "run_process",
    "run_free_move",
    "convert_free_to_standard",
    "format_trace",
    "trace_manifest",
]

_BLOCK = 4096  # steps per vectorized center block in the star fast path


# ---------------------------------------------------------------------------
# Arrival distributions


@dataclass(frozen=True)
class SemiRandomStar:
    """X_t = all edges at a uniformly random center vertex (the 'square')."""

    n: int

    def descriptor(self) -> dict:
        return {"kind": "star", "n": self.n}


@dataclass(frozen=True)
class UniformKEdges:
    """X_t = k distinct uniformly random edges."""

    n: int
    k: int

    def __post_init__(self):
        if self.k < 1 or self.k > self.n * (self.n - 1) // 2:
            raise UsageError(f"k={self.k} infeasible on {self.n} vertices")

    def descriptor(self) -> dict:
        return {"kind": "uniform-k", "n": self.n, "k": self.k}


@dataclass(frozen=True)
class Explicit:
    """Finite-support distribution given as ((edges, probability), ...).

    Probabilities are exact rationals summing to one; each outcome's edges are
    stored sorted and normalized (u < v).
    """

    n: int
    outcomes: tuple[tuple[tuple[tuple[int, int], ...], Fraction], ...]

    @staticmethod
    def build(n: int, outcomes) -> "Explicit":
        norm = []
        total = Fraction(0)
        for edges, p in outcomes:
            p = Fraction(p)
            if p <= 0:
                raise UsageError("outcome probabilities must be positive")
            es = []
            for u, v in edges:
                if u == v or not (1 <= u <= n and 1 <= v <= n):
                    raise UsageError(f"bad edge ({u},{v}) in explicit outcome")
                es.append((u, v) if u < v else (v, u))
            es = tuple(sorted(es))
            if len(set(es)) != len(es):
                raise UsageError("duplicate edge inside an explicit outcome")
            if not es:
                raise UsageError("empty outcome in explicit distribution")
            norm.append((es, p))
            total += p
        if total != 1:
            raise UsageError(f"outcome probabilities sum to {total}, not 1")
        return Explicit(n, tuple(norm))

    def descriptor(self) -> dict:
        return {
            "kind": "explicit",
            "n": self.n,
            "outcomes": [
                {"edges": [list(e) for e in es], "p": f"{p.numerator}/{p.denominator}"}
                for es, p in self.outcomes
            ],
        }


# ---------------------------------------------------------------------------
# Offered edge subsets


class StarSample:
    """All edges incident to one center vertex, represented implicitly."""

    __slots__ = ("n", "center")

    def __init__(self, n: int, center: int):
        self.n = n
        self.center = center

    def __contains__(self, edge) -> bool:
        u, v = edge
        if u == v or not (1 <= u <= self.n and 1 <= v <= self.n):
            return False
        return u == self.center or v == self.center

    def edges(self):
        c = self.center
        for v in range(1, self.n + 1):
            if v != c:
                yield (c, v) if c < v else (v, c)

    def lowest_edge(self) -> tuple[int, int]:
        return (1, 2) if self.center == 1 else (1, self.center)

    def descriptor(self):
        return {"kind": "star", "center": self.center}


class EdgeListSample:
    """An explicit finite edge subset."""

    __slots__ = ("edge_tuple",)

    def __init__(self, edges):
        es = tuple(sorted((u, v) if u < v else (v, u) for u, v in edges))
        if not es:
            raise UsageError("empty edge sample")
        self.edge_tuple = es

    def __contains__(self, edge) -> bool:
        u, v = edge
        e = (u, v) if u < v else (v, u)
        return e in self.edge_tuple

    def edges(self):
        return iter(self.edge_tuple)

    def lowest_edge(self) -> tuple[int, int]:
        return self.edge_tuple[0]

    def descriptor(self):
        return {"kind": "edges", "edges": [list(e) for e in self.edge_tuple]}


# ---------------------------------------------------------------------------
# Strategy handles and traces


@dataclass(frozen=True)
class StrategyHandle:
    """Named constructor for per-trial strategy instances.

    Instances must expose decide(g, sample, rng) -> edge; star-capable
    strategies additionally expose decide_star(g, center, rng) -> circle
    vertex, which the engine uses on star arrivals.  deterministic=True
    promises the instance never touches the rng argument.
    """

    id: str
    make: Callable[[int], object]
    deterministic: bool = True


@dataclass
class Trace:
    n: int
    seed: int
    trial: int
    strategy_id: str
    property_id: str
    stopping_time: int | None  # None = not reached within max_steps
    steps_run: int
    max_steps: int
    final_graph: MultiGraph
    steps: list[tuple[int, int, int, int]] | None = None  # (t, center, u, v)
    free_move: tuple[int, dict] | None = None  # (tau, swapped-sample descriptor)

    @property
    def reached(self) -> bool:
        return self.stopping_time is not None


# ---------------------------------------------------------------------------
# Sampling


def sample_at(dist, key: int, step: int):
    """The offered subset at a (1-based) step: pure in (dist, key, step)."""
    if isinstance(dist, SemiRandomStar):
        c = draw_u64(key, env_counter(step)) % dist.n + 1
        return StarSample(dist.n, c)
    if isinstance(dist, UniformKEdges):
        chosen: list[tuple[int, int]] = []
        seen: set[tuple[int, int]] = set()
        j = 0
        while len(chosen) < dist.k:
            u = draw_u64(key, env_counter(step, j)) % dist.n + 1
            v = draw_u64(key, env_counter(step, j + 1)) % dist.n + 1
            j += 2
            if u == v:
                continue
            e = (u, v) if u < v else (v, u)
            if e in seen:
                continue
            seen.add(e)
            chosen.append(e)
        return EdgeListSample(chosen)
    if isinstance(dist, Explicit):
        x = Fraction(draw_u64(key, env_counter(step)) >> 11, 1 << 53)
        cum = Fraction(0)
        for es, p in dist.outcomes:
            cum += p
            if x < cum:
                return EdgeListSample(es)
        return EdgeListSample(dist.outcomes[-1][0])  # x == 1 cannot occur; guard
    raise UsageError(f"unknown distribution {dist!r}")


def _audit(strategy, tracker, g) -> None:
    vf = getattr(strategy, "verify_certificate", None)
    if vf is not None:
        vf(g)
    tv = getattr(tracker, "verify", None)
    if tv is not None:
        tv(g)


# ---------------------------------------------------------------------------
# Standard runs


def run_process(
    dist,
    strategy: StrategyHandle,
    prop,
    *,
    seed: int,
    trial: int = 0,
    max_steps: int | None = None,
    record_steps: bool = False,
    audit_every: int = 0,
) -> Trace:
    """Run one trial of the process; returns its Trace.

    max_steps defaults to 10n.  Reaching it is not an error: the trace simply
    reports stopping_time = None for the prefix that was run.
    """
    n = dist.n
    if max_steps is None:
        max_steps = 10 * n
    strat = strategy.make(n)
    tracker = prop.make_tracker(n)
    env_key = stream_key(seed, trial, TAG_ENV)
    srng = CounterRng.for_stream(seed, trial, TAG_STRATEGY)
    g = MultiGraph(n)
    steps_log: list[tuple[int, int, int, int]] | None = [] if record_steps else None

    stopping = 0 if tracker.is_satisfied() else None
    t = 0
    if stopping is None and isinstance(dist, SemiRandomStar) and hasattr(strat, "decide_star"):
        stopping, t = _run_star_fast(
            g, strat, tracker, env_key, srng, max_steps, steps_log, audit_every
        )
    elif stopping is None:
        decide = strat.decide
        while t < max_steps:
            t += 1
            sample = sample_at(dist, env_key, t)
            e = decide(g, sample, srng)
            if e not in sample:
                raise ContractViolation(
                    f"strategy {strategy.id!r} chose {e} outside the offered sample at step {t}"
                )
            u, v = e
            g.add_edge(u, v)
            if steps_log is not None:
                c = sample.center if isinstance(sample, StarSample) else 0
                steps_log.append((t, c, min(u, v), max(u, v)))
            done = tracker.update(g, u, v, strat)
            if audit_every and t % audit_every == 0:
                _audit(strat, tracker, g)
            if done:
                stopping = t
                break

    return Trace(
        n=n,
        seed=seed,
        trial=trial,
        strategy_id=strategy.id,
        property_id=prop.id,
        stopping_time=stopping,
        steps_run=t,
        max_steps=max_steps,
        final_graph=g,
        steps=steps_log,
    )


def _run_star_fast(g, strat, tracker, env_key, srng, max_steps, steps_log, audit_every):
    """Hot loop for star arrivals with a star-capable strategy."""
    n = g.n
    deg = g.degree
    edges = g.edges
    decide = strat.decide_star
    update = tracker.update
    t = 0
    while t < max_steps:
        hi = min(max_steps, t + _BLOCK)
        centers = star_centers_block(env_key, t + 1, hi + 1, n).tolist()
        for c in centers:
            t += 1
            v = decide(g, c, srng)
            if v == c or not 1 <= v <= n:
                raise ContractViolation(
                    f"strategy chose circle {v} for square {c} at step {t}"
                )
            edges.append((c, v) if c < v else (v, c))
            deg[c] += 1
            deg[v] += 1
            if steps_log is not None:
                steps_log.append((t, c, min(c, v), max(c, v)))
            done = update(g, c, v, strat)
            if audit_every and t % audit_every == 0:
                _audit(strat, tracker, g)
            if done:
                return t, t
    return None, t


# ---------------------------------------------------------------------------
# Free-move runs (one mid-run sample swap) and their reduction


def run_free_move(
    dist,
    free_strategy_handle: StrategyHandle,
    prop,
    *,
    seed: int,
    trial: int = 0,
    max_steps: int | None = None,
    record_steps: bool = False,
) -> Trace:
    """Like run_process, but the strategy may replace one offered sample.

    The instance made by free_strategy_handle must expose
    propose_swap(g, sample, step) -> replacement sample | None in addition to
    decide.  The replacement must lie in the support of the arrival
    distribution; a second accepted swap is a contract violation.
    """
    n = dist.n
    if max_steps is None:
        max_steps = 10 * n
    strat = free_strategy_handle.make(n)
    if not hasattr(strat, "propose_swap"):
        raise UsageError(f"strategy {free_strategy_handle.id!r} has no free move")
    tracker = prop.make_tracker(n)
    env_key = stream_key(seed, trial, TAG_ENV)
    srng = CounterRng.for_stream(seed, trial, TAG_STRATEGY)
    g = MultiGraph(n)
    steps_log: list[tuple[int, int, int, int]] | None = [] if record_steps else None
    free_move = None
    stopping = 0 if tracker.is_satisfied() else None
    t = 0
    while stopping is None and t < max_steps:
        t += 1
        sample = sample_at(dist, env_key, t)
        proposal = strat.propose_swap(g, sample, t)
        if proposal is not None:
            if free_move is not None:
                raise ContractViolation("second free move proposed")
            _check_in_support(dist, proposal)
            free_move = (t, proposal.descriptor())
            sample = proposal
        e = strat.decide(g, sample, srng)
        if e not in sample:
            raise ContractViolation(f"free strategy chose {e} outside sample at step {t}")
        u, v = e
        g.add_edge(u, v)
        if steps_log is not None:
            c = sample.center if isinstance(sample, StarSample) else 0
            steps_log.append((t, c, min(u, v), max(u, v)))
        if tracker.update(g, u, v, strat):
            stopping = t

    return Trace(
        n=n,
        seed=seed,
        trial=trial,
        strategy_id=free_strategy_handle.id,
        property_id=prop.id,
        stopping_time=stopping,
        steps_run=t,
        max_steps=max_steps,
        final_graph=g,
        steps=steps_log,
        free_move=free_move,
    )


def _check_in_support(dist, sample) -> None:
    if isinstance(dist, SemiRandomStar):
        if not isinstance(sample, StarSample) or not 1 <= sample.center <= dist.n:
            raise UsageError("free move must be a star sample from the same vertex set")
        return
    if isinstance(dist, Explicit):
        if isinstance(sample, EdgeListSample):
            for es, _ in dist.outcomes:
                if sample.edge_tuple == es:
                    return
        raise UsageError("free move outside the support of the arrival distribution")
    if isinstance(dist, UniformKEdges):
        if (
            isinstance(sample, EdgeListSample)
            and len(sample.edge_tuple) == dist.k
            and all(1 <= u <= dist.n and 1 <= v <= dist.n for u, v in sample.edge_tuple)
        ):
            return
        raise UsageError("free move must offer k distinct edges on the same vertex set")
    raise UsageError(f"unknown distribution {dist!r}")


class _ConvertedStrategy:
    """Standard strategy that simulates a one-free-move strategy.

    Runs the free strategy on a private virtual graph.  At the swap step the
    virtual graph receives the inner choice from the swapped sample while the
    real process takes the lowest edge of the true sample; the inner choice
    is remembered as the missing edge.  Once the virtual graph satisfies the
    target property, a replacement procedure chases the missing edge within
    its step budget; afterwards the strategy goes inert.
    """

    def __init__(self, inner, prop, n: int):
        self.inner = inner
        self.prop = prop
        self.n = n
        self.virtual = MultiGraph(n)
        self.vtracker = prop.make_tracker(n)
        self.step = 0
        self.swapped = False
        self.missing: tuple[int, int] | None = None
        self.nominal_win: int | None = None
        self.fragment = None

    def decide(self, g, sample, rng):
        self.step += 1
        if self.nominal_win is None:
            return self._mirror(sample, rng)
        if self.missing is not None and self.fragment is None:
            context = None
            ctx_fn = getattr(self.inner, "replacement_context", None)
            if callable(ctx_fn):
                context = ctx_fn()
            self.fragment = self.prop.make_replacement(self.n, g, context, self.missing)
        if self.fragment is not None and not self.fragment.failed:
            move = self.fragment.propose(g, sample)
            if move is not None:
                return move
        return sample.lowest_edge()

    def _mirror(self, sample, rng):
        inner_sample = sample
        swap_now = False
        if not self.swapped:
            proposal = self.inner.propose_swap(self.virtual, sample, self.step)
            if proposal is not None:
                self.swapped = True
                swap_now = True
                inner_sample = proposal
        e_virtual = self.inner.decide(self.virtual, inner_sample, rng)
        if e_virtual not in inner_sample:
            raise ContractViolation("inner free strategy left its sample")
        self.virtual.add_edge(*e_virtual)
        won = self.vtracker.update(self.virtual, e_virtual[0], e_virtual[1], self.inner)
        if swap_now:
            e_real = sample.lowest_edge()
            ev = (min(e_virtual), max(e_virtual))
            if ev != e_real:
                self.missing = ev
        else:
            e_real = e_virtual
        if won:
            self.nominal_win = self.step
        return e_real


def convert_free_to_standard(free_strategy_handle: StrategyHandle, prop) -> StrategyHandle:
    """Reduce a one-free-move strategy to a standard strategy.

    Requires the target property to carry a replacement procedure (a step
    budget for re-acquiring one missing edge); properties without one cannot
    absorb the swapped-away edge and are rejected.
    """
    if prop.make_replacement is None:
        raise UsageError(
            f"property {prop.id!r} has no replacement procedure; cannot convert"
        )

    def make(n: int):
        return _ConvertedStrategy(free_strategy_handle.make(n), prop, n)

    return StrategyHandle(
        id=f"converted:{free_strategy_handle.id}",
        make=make,
        deterministic=free_strategy_handle.deterministic,
    )


# ---------------------------------------------------------------------------
# Trace serialization


def format_trace(trace: Trace) -> str:
    """Step log, one 't center u v' line per step (center 0 off star arrivals)."""
    if trace.steps is None:
        raise UsageError("trace was run without record_steps")
    return "\n".join(f"{t} {c} {u} {v}" for t, c, u, v in trace.steps) + "\n"


def trace_manifest(trace: Trace) -> dict:
    man = {
        "n": trace.n,
        "seed": trace.seed,
        "trial": trace.trial,
        "strategy": trace.strategy_id,
        "property": trace.property_id,
        "stopping_time": trace.stopping_time,
        "reached": trace.reached,
        "steps_run": trace.steps_run,
        "max_steps": trace.max_steps,
        "edges": trace.final_graph.num_edges,
    }
    if trace.free_move is not None:
        man["free_move"] = {"step": trace.free_move[0], "sample": trace.free_move[1]}
    return man


def dump_trace_manifest(trace: Trace) -> str:
    return json.dumps(trace_manifest(trace), indent=2, sort_keys=True) + "\n"
