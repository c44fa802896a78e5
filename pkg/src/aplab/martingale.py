"""Exact verification of the win-probability martingale machinery.

Everything in this module is enumeration-based and uses rational arithmetic
end to end: win-probability tables over explicit finite sample spaces, the
one-swap boost argument (a strategy that replaces a single offered sample by
a strictly better one the moment such a witness exists), the iterated
amplification schedule, and the balanced-coupling construction behind the
one-sided tail bound for martingales that are balanced only with high
probability.

The threshold constant `c` involves a square root, so it is never
materialised: all comparisons against `c` are performed on squares of
rational quantities, with explicit sign checks before squaring (a difference
must be shown positive before its square is compared).  The only floating
point in the module is the exponential in the tail bound, which is padded
upward by a documented relative 1e-12 so rounding can only loosen the
asserted inequality, never fake a violation.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from .engine import EdgeListSample, Explicit, StrategyHandle
from .errors import CheckFailure, DataError, UsageError
from .graph import MultiGraph

__all__ = [
    "FiniteProductSpace",
    "DoobTable",
    "exact_doob",
    "BoostParams",
    "make_boost_params",
    "PotentialReport",
    "find_potential",
    "BoostRunReport",
    "potential_boost_run",
    "QuantifyReport",
    "verify_quantify_boost",
    "ScheduleReport",
    "boost_schedule",
    "DiscreteMartingale",
    "is_balanced",
    "stable_sequences",
    "CouplingRecord",
    "CouplingResult",
    "couple_balanced",
    "audit_coupling",
    "TailReport",
    "tail_bound_check",
    "optimal_win_probability",
    "strategy_function_count",
    "m_star_exact",
    "rational_sqrt",
    "parse_rational",
    "format_rational",
    "load_instance",
    "bundled_instance_path",
    "report_to_jsonable",
]

MAX_SEQUENCE_SPACE = 10**6
MAX_MARTINGALE_SPACE = 10**5
MAX_STRATEGY_FUNCTIONS = 10**4

# Relative upward padding applied to the floating-point exponential in the
# tail bound.  math.exp and the preceding division are each correctly rounded
# to ~2^-52 relative error, so inflating by 1e-12 strictly dominates the
# accumulated rounding and keeps the asserted inequality conservative.
EXP_UPWARD_PAD = Fraction(1, 10**12)


def parse_rational(text) -> Fraction:
    """Parse "p/q" or "p" (also accepts ints) into an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise DataError(f"expected a rational string, got {text!r}")
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(int(num.strip()), int(den.strip()))
        return Fraction(int(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise DataError(f"bad rational literal {text!r}") from exc


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rational_sqrt(x: Fraction) -> Fraction | None:
    """Exact square root of a rational, or None when it is irrational."""
    x = Fraction(x)
    if x < 0:
        return None
    rn = math.isqrt(x.numerator)
    rd = math.isqrt(x.denominator)
    if rn * rn == x.numerator and rd * rd == x.denominator:
        return Fraction(rn, rd)
    return None


# ---------------------------------------------------------------------------
# Finite product spaces


@dataclass(frozen=True)
class FiniteProductSpace:
    """An independent product of finite factors with exact probabilities.

    factors[j] is a tuple of (element, probability) pairs; probabilities are
    positive rationals summing to one within each factor.  Sequences are
    addressed by tuples of per-factor indices, which keeps elements hashable
    regardless of what they are (edge lists, labels, ...).
    """

    factors: tuple[tuple[tuple[object, Fraction], ...], ...]

    def __post_init__(self):
        for j, factor in enumerate(self.factors):
            if not factor:
                raise UsageError(f"factor {j} is empty")
            total = Fraction(0)
            for _, p in factor:
                if not isinstance(p, Fraction) or p <= 0:
                    raise UsageError(f"factor {j} has a non-positive probability")
                total += p
            if total != 1:
                raise UsageError(f"factor {j} probabilities sum to {total}, not 1")

    @property
    def num_factors(self) -> int:
        return len(self.factors)

    def size(self, j: int) -> int:
        return len(self.factors[j])

    def element(self, j: int, i: int):
        return self.factors[j][i][0]

    def prob(self, j: int, i: int) -> Fraction:
        return self.factors[j][i][1]

    def num_sequences(self) -> int:
        out = 1
        for factor in self.factors:
            out *= len(factor)
        return out

    def sequences(self):
        """All index tuples, in lexicographic factor order."""
        return itertools.product(*(range(len(f)) for f in self.factors))

    def weight(self, idx: tuple[int, ...]) -> Fraction:
        w = Fraction(1)
        for j, i in enumerate(idx):
            w *= self.prob(j, i)
        return w

    @staticmethod
    def iid(outcome_probs, n_factors: int) -> "FiniteProductSpace":
        """n_factors independent copies of one factor."""
        factor = tuple((elem, Fraction(p)) for elem, p in outcome_probs)
        return FiniteProductSpace(tuple(factor for _ in range(n_factors)))


# ---------------------------------------------------------------------------
# Exact win-probability tables


@dataclass
class DoobTable:
    """Exact conditional win probabilities on every draw prefix.

    tables maps each index prefix (length 0..N) to the probability that the
    fixed deterministic strategy wins given that prefix; length-N entries are
    the 0/1 win indicator, and the empty prefix holds the overall win
    probability mu.  Every interior entry equals the probability-weighted
    average of its children (exact tower property).
    """

    N: int
    space: FiniteProductSpace
    tables: dict[tuple[int, ...], Fraction]

    @property
    def mu(self) -> Fraction:
        return self.tables[()]

    def value(self, prefix: tuple[int, ...]) -> Fraction:
        return self.tables[tuple(prefix)]

    def check_tower(self) -> None:
        """Verify the defining averaging identity at every interior prefix."""
        for prefix, val in self.tables.items():
            j = len(prefix)
            if j == self.N:
                if val not in (0, 1):
                    raise CheckFailure(f"leaf {prefix} holds {val}, not an indicator")
                continue
            total = Fraction(0)
            for i in range(self.space.size(j)):
                total += self.space.prob(j, i) * self.tables[prefix + (i,)]
            if total != val:
                raise CheckFailure(
                    f"prefix {prefix}: children average {total} != stored {val}"
                )


def exact_doob(dist: Explicit, strategy: StrategyHandle, prop, N: int) -> DoobTable:
    """Enumerate every length-N draw sequence and tabulate win probabilities.

    The strategy is replayed from scratch on each sequence (it may be
    stateful, so branches cannot share an instance); the win indicator is 1
    when the target property holds after at most N picked edges.  Prefix
    values are aggregated bottom-up with exact rationals.
    """
    if not isinstance(dist, Explicit):
        raise UsageError("exact tables need an explicit finite-support distribution")
    if not strategy.deterministic:
        raise UsageError("exact tables require a deterministic strategy")
    if N < 0:
        raise UsageError("N must be >= 0")
    K = len(dist.outcomes)
    if K**N > MAX_SEQUENCE_SPACE:
        raise UsageError(
            f"sequence space {K}^{N} exceeds the {MAX_SEQUENCE_SPACE} enumeration cap"
        )
    n = dist.n
    samples = [EdgeListSample(list(es)) for es, _ in dist.outcomes]

    tables: dict[tuple[int, ...], Fraction] = {}
    if N == 0:
        g = MultiGraph(n)
        tables[()] = Fraction(1) if prop.check(g) else Fraction(0)
        return DoobTable(N=0, space=FiniteProductSpace(()), tables=tables)

    empty_wins = prop.check(MultiGraph(n))
    for idx in itertools.product(range(K), repeat=N):
        if empty_wins:
            tables[idx] = Fraction(1)
            continue
        strat = strategy.make(n)
        g = MultiGraph(n)
        won = False
        for step, i in enumerate(idx, start=1):
            e = strat.decide(g, samples[i], None)
            if e not in samples[i]:
                raise CheckFailure(f"strategy picked {e} outside the offered sample")
            g.add_edge(*e)
            if prop.check(g):
                won = True
                break
        tables[idx] = Fraction(1) if won else Fraction(0)

    for j in range(N - 1, -1, -1):
        for prefix in itertools.product(range(K), repeat=j):
            total = Fraction(0)
            for i in range(K):
                total += dist.outcomes[i][1] * tables[prefix + (i,)]
            tables[prefix] = total

    space = FiniteProductSpace.iid([(es, p) for es, p in dist.outcomes], N)
    return DoobTable(N=N, space=space, tables=tables)


# ---------------------------------------------------------------------------
# Boost parameters


@dataclass(frozen=True)
class BoostParams:
    """Parameters of the one-swap boost: threshold constant held as c^2.

    c = mu(1-mu)/sqrt(2*c_theta*m_star) is irrational in general, so only
    c2 = c^2 (exact rational) is stored; all comparisons are squared.
    c_theta upper-bounds 1 + log2(1/(1-theta)); rounding it up only shrinks
    c, which keeps every asserted inequality on its conservative side.
    """

    theta: Fraction
    mu: Fraction
    m_star: int
    c_theta: Fraction
    c2: Fraction

    def validate(self) -> None:
        if not 0 < self.theta < 1:
            raise UsageError("theta must lie strictly between 0 and 1")
        if not 0 <= self.mu <= 1:
            raise UsageError("mu must lie in [0, 1]")
        if self.m_star < 1:
            raise UsageError("m_star must be a positive integer")
        if self.c_theta < 1:
            raise UsageError("c_theta must be >= 1")
        if 0 < self.mu < 1:
            if self.c2 <= 0:
                raise UsageError("threshold constant must be positive")
        elif self.c2 != 0:
            raise UsageError("degenerate mu must give a zero threshold constant")

    @property
    def c_exact(self) -> Fraction | None:
        """The threshold constant itself, when it happens to be rational."""
        return rational_sqrt(self.c2)


def _log2_upper(x: Fraction) -> Fraction:
    """An exact rational upper bound on log2(x) for x > 1.

    Exact when x is an integer power of two; otherwise the float log is
    padded by 2^-40, which dwarfs its few-ulp rounding error.
    """
    if x <= 1:
        raise UsageError("log2 upper bound needs x > 1")
    if x.denominator == 1:
        n = x.numerator
        if n & (n - 1) == 0:
            return Fraction(n.bit_length() - 1)
    approx = math.log2(x.numerator) - math.log2(x.denominator)
    return Fraction(approx) + Fraction(1, 2**40)


def make_boost_params(theta, mu, m_star: int) -> BoostParams:
    theta = Fraction(theta)
    mu = Fraction(mu)
    if not 0 < theta < 1:
        raise UsageError("theta must lie strictly between 0 and 1")
    if m_star < 1:
        raise UsageError("m_star must be a positive integer")
    c_theta = 1 + _log2_upper(1 / (1 - theta))
    c2 = mu * mu * (1 - mu) * (1 - mu) / (2 * c_theta * m_star)
    params = BoostParams(theta=theta, mu=mu, m_star=int(m_star), c_theta=c_theta, c2=c2)
    params.validate()
    return params


def _exceeds_c(delta: Fraction, c2: Fraction) -> bool:
    """delta > c, decided without materialising c: sign first, then squares."""
    return delta > 0 and delta * delta > c2


# ---------------------------------------------------------------------------
# Potential detection


@dataclass
class PotentialReport:
    """Where the one-swap boost fires, and with what replacement.

    swaps maps each minimal potential prefix (no proper ancestor already had
    potential) to the index of its witness: the first alternative, in the
    factor's declared order, whose conditional win probability beats the
    realised one by more than c.  A sequence is stable when none of its
    prefixes appears under a key; tau of a sequence is the length of its
    recorded prefix, or None when stable.
    """

    N: int
    c2: Fraction
    swaps: dict[tuple[int, ...], int]
    unstable_mass: Fraction
    stable_set_mass: Fraction

    def tau_of(self, seq: tuple[int, ...]) -> int | None:
        for j in range(1, len(seq) + 1):
            if seq[:j] in self.swaps:
                return j
        return None

    def witness_of(self, seq: tuple[int, ...]) -> int | None:
        for j in range(1, len(seq) + 1):
            if seq[:j] in self.swaps:
                return self.swaps[seq[:j]]
        return None


def find_potential(doob: DoobTable, params: BoostParams) -> PotentialReport:
    """Locate, per prefix, the first step at which a strictly better swap exists.

    A prefix r_1..r_j has potential when some same-factor alternative w has
    conditional win probability exceeding the realised prefix's by more than
    c (squared comparison).  The walk records only minimal such prefixes; the
    subtree below an armed prefix shares its tau.
    """
    params.validate()
    if params.mu != doob.mu:
        raise UsageError(
            f"params.mu = {params.mu} disagrees with the table's mu = {doob.mu}"
        )
    swaps: dict[tuple[int, ...], int] = {}
    unstable_mass = Fraction(0)

    def walk(prefix: tuple[int, ...], weight: Fraction) -> None:
        j = len(prefix)
        if j > 0:
            parent = prefix[:-1]
            here = doob.tables[prefix]
            witness = None
            for i in range(doob.space.size(j - 1)):
                delta = doob.tables[parent + (i,)] - here
                if _exceeds_c(delta, params.c2):
                    witness = i
                    break
            if witness is not None:
                swaps[prefix] = witness
                nonlocal unstable_mass
                unstable_mass += weight
                return
        if j == doob.N:
            return
        for i in range(doob.space.size(j)):
            walk(prefix + (i,), weight * doob.space.prob(j, i))

    if doob.N > 0:
        walk((), Fraction(1))
    return PotentialReport(
        N=doob.N,
        c2=params.c2,
        swaps=swaps,
        unstable_mass=unstable_mass,
        stable_set_mass=1 - unstable_mass,
    )


# ---------------------------------------------------------------------------
# The one-swap boost, run exactly


@dataclass
class BoostRunReport:
    """Exact accounting of the boosted strategy against the base one.

    The boosted strategy follows the base strategy but, the first time the
    realised prefix has potential, replaces the offered draw by the witness;
    the continuation keeps the original factor distributions, so its win
    probability is exactly the table value at the swapped prefix.
    """

    mu: Fraction
    boosted_win: Fraction
    unstable_mass: Fraction
    base_stable_win: Fraction  # E[win indicator ; stable]
    base_unstable_win: Fraction  # E[win indicator ; some prefix armed]
    boosted_unstable_win: Fraction  # same event, after the swap
    equal_on_stable: bool
    gap_exceeds_c: bool | None  # None when nothing ever arms
    bound_holds: bool


def potential_boost_run(doob: DoobTable, params: BoostParams) -> BoostRunReport:
    """Compute the boosted win probability and verify its three guarantees.

    (1) On stable sequences the boosted and base strategies coincide.
    (2) Conditioned on a swap happening, the boosted win probability exceeds
        the base conditional win probability by more than c.
    (3) Overall, boosted >= mu + c * P[swap], with equality only when no
        prefix ever arms.
    All three are checked in exact arithmetic (squared where c appears) and a
    violation raises CheckFailure.
    """
    report = find_potential(doob, params)
    base_swap = Fraction(0)  # E[base win ; swap event], via tower at the prefix
    boost_swap = Fraction(0)  # E[boosted win ; swap event]
    for prefix, witness in report.swaps.items():
        w = doob.space.weight(prefix)
        base_swap += w * doob.tables[prefix]
        boost_swap += w * doob.tables[prefix[:-1] + (witness,)]

    # Independent pass over full sequences for the stable-side contribution.
    base_stable = Fraction(0)
    base_unstable_direct = Fraction(0)
    for seq in doob.space.sequences():
        w = doob.space.weight(seq)
        f = doob.tables[seq]
        if report.tau_of(seq) is None:
            base_stable += w * f
        else:
            base_unstable_direct += w * f

    if base_unstable_direct != base_swap:
        raise CheckFailure(
            "tower aggregation at armed prefixes disagrees with direct enumeration: "
            f"{base_swap} != {base_unstable_direct}"
        )

    boosted_win = base_stable + boost_swap
    mu = doob.mu
    equal_on_stable = (boosted_win - boost_swap) == (mu - base_swap)
    if not equal_on_stable:
        raise CheckFailure("boosted strategy deviates from base on stable sequences")

    p_swap = report.unstable_mass
    gap_exceeds_c: bool | None = None
    if p_swap > 0:
        gap = (boost_swap - base_swap) / p_swap
        gap_exceeds_c = _exceeds_c(gap, params.c2)
        if not gap_exceeds_c:
            raise CheckFailure(
                f"conditional improvement {gap} does not exceed the threshold constant"
            )

    lift = boosted_win - mu
    bound_holds = lift >= 0 and lift * lift >= params.c2 * p_swap * p_swap
    if not bound_holds:
        raise CheckFailure(
            f"boosted win {boosted_win} falls short of mu + c * {p_swap}"
        )
    if p_swap == 0 and boosted_win != mu:
        raise CheckFailure("no swap ever armed, yet the win probability moved")

    return BoostRunReport(
        mu=mu,
        boosted_win=boosted_win,
        unstable_mass=p_swap,
        base_stable_win=base_stable,
        base_unstable_win=base_swap,
        boosted_unstable_win=boost_swap,
        equal_on_stable=equal_on_stable,
        gap_exceeds_c=gap_exceeds_c,
        bound_holds=bound_holds,
    )


# ---------------------------------------------------------------------------
# Lower bound on how often the swap arms


@dataclass
class QuantifyReport:
    """P[swap] >= (1 - mu)/2, in the regime N <= c_theta * m_star and mu > 0."""

    precondition_ok: bool
    holds: bool
    unstable_mass: Fraction
    threshold: Fraction
    margin: Fraction


def verify_quantify_boost(doob: DoobTable, params: BoostParams) -> QuantifyReport:
    """Check the arming-probability lower bound exactly.

    The bound's hypotheses are the horizon precondition N <= c_theta * m_star
    and a strategy that wins with positive probability (mu = 0 leaves nothing
    to swap toward, and the threshold constant degenerates to zero).  When a
    hypothesis fails the result is reported with precondition_ok False and
    nothing is asserted; otherwise a violation raises CheckFailure.
    """
    report = find_potential(doob, params)
    threshold = (1 - doob.mu) / 2
    margin = report.unstable_mass - threshold
    precondition_ok = (
        Fraction(doob.N) <= params.c_theta * params.m_star and doob.mu > 0
    )
    holds = report.unstable_mass >= threshold
    if precondition_ok and not holds:
        raise CheckFailure(
            f"P[swap] = {report.unstable_mass} < (1 - mu)/2 = {threshold}"
        )
    return QuantifyReport(
        precondition_ok=precondition_ok,
        holds=holds,
        unstable_mass=report.unstable_mass,
        threshold=threshold,
        margin=margin,
    )


# ---------------------------------------------------------------------------
# Iterated amplification schedule


@dataclass
class ScheduleReport:
    iterations: int
    terminal: Fraction
    capped: bool
    floor: Fraction  # the guaranteed terminal value min(theta2, theta + theta(1-theta)^3/32)


_SCHEDULE_SCALE = 1 << 96


def boost_schedule(theta, theta2, m_star: int) -> ScheduleReport:
    """Iterate g <- g + g(1-g)^3 / (4*ceil(sqrt(m_star))) for ceil(sqrt(m_star)) steps.

    Run in fixed point at scale 2^96 with floor rounding, so every iterate is
    a lower bound on the exact sequence; using ceil(sqrt(m_star)) in the
    denominator also rounds the per-step gain down.  Both roundings only
    lower the terminal value, and the asserted floor
    min(theta2, theta + theta(1-theta)^3/32) still holds with enormous slack
    (the 1/32 already gives away a factor 8 against the 1/4 in the gain).
    The iteration stops early once theta2 is reached.
    """
    theta = Fraction(theta)
    theta2 = Fraction(theta2)
    if not 0 < theta < theta2 < 1:
        raise UsageError("need 0 < theta < theta2 < 1")
    if m_star < 1:
        raise UsageError("m_star must be a positive integer")
    s = math.isqrt(m_star)
    s_up = s if s * s == m_star else s + 1

    scale = _SCHEDULE_SCALE
    fp = theta.numerator * scale // theta.denominator
    iterations = 0
    capped = False
    for _ in range(s_up):
        if fp * theta2.denominator >= theta2.numerator * scale:
            capped = True
            break
        gain = fp * (scale - fp) ** 3 // (scale**3 * 4 * s_up)
        fp += gain
        iterations += 1

    terminal = Fraction(fp, scale)
    floor = min(theta2, theta + theta * (1 - theta) ** 3 / 32)
    # Allow for the fixed-point floor at initialisation and per step.
    slack = Fraction(s_up + 1, scale)
    if terminal + slack < floor:
        raise CheckFailure(
            f"schedule terminal {float(terminal):.12f} fell below its floor {float(floor):.12f}"
        )
    return ScheduleReport(
        iterations=iterations, terminal=terminal, capped=capped, floor=floor
    )


# ---------------------------------------------------------------------------
# Discrete martingales on finite product spaces


@dataclass
class DiscreteMartingale:
    """A martingale over a product space, with per-level balance targets.

    The space's factor 0 carries the starting values; values maps every index
    prefix of length 1..num_factors to the martingale value at that prefix
    (the value at level j lives on prefixes of length j+1).  c[j-1] is the
    balance target for level j: within one parent, the spread of level-j
    values should not exceed it for the martingale to count as balanced
    there.
    """

    space: FiniteProductSpace
    values: dict[tuple[int, ...], Fraction]
    c: tuple[Fraction, ...]

    @property
    def k(self) -> int:
        return self.space.num_factors - 1

    def value(self, prefix) -> Fraction:
        return self.values[tuple(prefix)]

    def validate(self) -> None:
        if len(self.c) != self.k:
            raise DataError(
                f"{self.k}-level martingale needs {self.k} balance targets, got {len(self.c)}"
            )
        if any(cj < 0 for cj in self.c):
            raise DataError("balance targets must be non-negative")
        if self.space.num_sequences() > MAX_MARTINGALE_SPACE:
            raise UsageError(
                f"product space exceeds the {MAX_MARTINGALE_SPACE} enumeration cap"
            )
        for length in range(1, self.space.num_factors + 1):
            for prefix in itertools.product(
                *(range(self.space.size(j)) for j in range(length))
            ):
                if prefix not in self.values:
                    raise DataError(f"missing value at prefix {prefix}")
        for length in range(1, self.space.num_factors):
            for prefix in itertools.product(
                *(range(self.space.size(j)) for j in range(length))
            ):
                total = Fraction(0)
                for i in range(self.space.size(length)):
                    total += self.space.prob(length, i) * self.values[prefix + (i,)]
                if total != self.values[prefix]:
                    raise DataError(
                        f"averaging identity fails at {prefix}: children give {total}, "
                        f"stored {self.values[prefix]}"
                    )


def _level_parents(space: FiniteProductSpace, level: int):
    """Parent prefixes whose children live at the given level (1-based)."""
    return itertools.product(*(range(space.size(j)) for j in range(level)))


def is_balanced(M: DiscreteMartingale) -> bool:
    """True iff at every level the within-parent value spread is at most c."""
    for level in range(1, M.space.num_factors):
        cj = M.c[level - 1]
        for parent in _level_parents(M.space, level):
            vals = [M.values[parent + (i,)] for i in range(M.space.size(level))]
            if max(vals) - min(vals) > cj:
                return False
    return True


def stable_sequences(M: DiscreteMartingale):
    """Index sequences whose realised value is, at every level, within c of
    the best same-parent alternative; returns (set of sequences, their mass)."""
    stable: set[tuple[int, ...]] = set()
    mass = Fraction(0)
    maxima: dict[tuple[int, ...], Fraction] = {}
    for level in range(1, M.space.num_factors):
        for parent in _level_parents(M.space, level):
            maxima[parent] = max(
                M.values[parent + (i,)] for i in range(M.space.size(level))
            )
    for seq in M.space.sequences():
        ok = True
        for level in range(1, M.space.num_factors):
            parent = seq[:level]
            if maxima[parent] - M.values[seq[: level + 1]] > M.c[level - 1]:
                ok = False
                break
        if ok:
            stable.add(seq)
            mass += M.space.weight(seq)
    return stable, mass


# ---------------------------------------------------------------------------
# Balanced coupling


@dataclass
class CouplingRecord:
    """One application of the down-shift at a parent prefix."""

    parent: tuple[int, ...]
    level: int
    small: tuple[int, ...]  # indices strictly more than c below the best sibling
    large: tuple[int, ...]
    gamma: Fraction
    gamma_small: Fraction
    gamma_large: Fraction


@dataclass
class CouplingResult:
    coupled: DiscreteMartingale
    records: list[CouplingRecord]


def couple_balanced(M: DiscreteMartingale) -> CouplingResult:
    """Build a balanced martingale pinned to M's start and dominated by M on
    every stable sequence.

    At each parent, the children strictly more than c below the best sibling
    (the small ones) are merged to a single constant branch, paid for by
    shifting every large child down by the same total probability mass; the
    shift gamma is the smallest non-negative rational placing the merged
    value inside the large children's shifted range.  Large branches recurse
    with their shift accumulated; small branches stay constant forever.  The
    result is verified against an independent checker before being returned.
    """
    M.validate()
    new_values: dict[tuple[int, ...], Fraction] = {}
    records: list[CouplingRecord] = []
    space = M.space
    nf = space.num_factors

    def fill_constant(prefix: tuple[int, ...], const: Fraction) -> None:
        new_values[prefix] = const
        level = len(prefix)
        if level >= nf:
            return
        for i in range(space.size(level)):
            fill_constant(prefix + (i,), const)

    def build(parent: tuple[int, ...], shift: Fraction) -> None:
        level = len(parent)
        if level >= nf:
            return
        cj = M.c[level - 1]
        size = space.size(level)
        shifted = [M.values[parent + (i,)] - shift for i in range(size)]
        top = max(shifted)
        small = tuple(i for i in range(size) if shifted[i] < top - cj)
        if not small:
            for i in range(size):
                new_values[parent + (i,)] = shifted[i]
                build(parent + (i,), shift)
            return
        large = tuple(i for i in range(size) if shifted[i] >= top - cj)
        p_small = sum((space.prob(level, i) for i in small), Fraction(0))
        p_large = sum((space.prob(level, i) for i in large), Fraction(0))
        e_small = (
            sum((space.prob(level, i) * shifted[i] for i in small), Fraction(0))
            / p_small
        )
        lo_large = min(shifted[i] for i in large)
        hi_large = max(shifted[i] for i in large)
        scale = p_small * p_large / (p_small + p_large)
        lower = (lo_large - e_small) * scale
        upper = (hi_large - e_small) * scale
        gamma = max(Fraction(0), lower)
        if gamma > upper:
            raise DataError(
                f"no feasible shift at {parent}: interval [{lower}, {upper}] "
                "excludes every non-negative value (input is not a martingale)"
            )
        gamma_small = gamma / p_small
        gamma_large = gamma / p_large
        const = e_small + gamma_small
        records.append(
            CouplingRecord(
                parent=parent,
                level=level,
                small=small,
                large=large,
                gamma=gamma,
                gamma_small=gamma_small,
                gamma_large=gamma_large,
            )
        )
        for i in small:
            fill_constant(parent + (i,), const)
        for i in large:
            new_values[parent + (i,)] = shifted[i] - gamma_large
            build(parent + (i,), shift + gamma_large)

    for i0 in range(space.size(0)):
        new_values[(i0,)] = M.values[(i0,)]
        build((i0,), Fraction(0))

    coupled = DiscreteMartingale(space=space, values=new_values, c=M.c)
    result = CouplingResult(coupled=coupled, records=records)
    audit_coupling(M, coupled)
    return result


def audit_coupling(original: DiscreteMartingale, coupled: DiscreteMartingale) -> None:
    """Independent check of the coupling contract; raises CheckFailure.

    Knows nothing about how the coupled martingale was built: it re-verifies
    the averaging identity, equal starting values, balance, and domination on
    every stable sequence directly from the two value tables.
    """
    if coupled.space is not original.space and coupled.space != original.space:
        raise CheckFailure("coupled martingale lives on a different space")
    if coupled.c != original.c:
        raise CheckFailure("coupled martingale changed the balance targets")
    coupled.validate()
    for i0 in range(original.space.size(0)):
        if coupled.values[(i0,)] != original.values[(i0,)]:
            raise CheckFailure(
                f"starting value moved at factor-0 element {i0}: "
                f"{coupled.values[(i0,)]} != {original.values[(i0,)]}"
            )
    if not is_balanced(coupled):
        raise CheckFailure("coupled martingale is not balanced")
    stable, _ = stable_sequences(original)
    for seq in stable:
        for length in range(1, original.space.num_factors + 1):
            p = seq[:length]
            if coupled.values[p] > original.values[p]:
                raise CheckFailure(
                    f"domination fails on stable sequence {seq} at prefix {p}: "
                    f"{coupled.values[p]} > {original.values[p]}"
                )


# ---------------------------------------------------------------------------
# One-sided tail bound


@dataclass
class TailReport:
    t: Fraction
    lhs: Fraction  # P[M_k <= M_0 - t], exact
    exp_bound: Fraction  # upward-padded value of exp(-2 t^2 / sum c_j^2)
    unstable_mass: Fraction
    rhs: Fraction
    holds: bool


def tail_bound_check(M: DiscreteMartingale, t) -> TailReport:
    """Check P[M_k <= M_0 - t] <= exp(-2 t^2 / sum c_j^2) + P[not stable].

    Both probabilities are exact; only the exponential is floating point,
    padded upward by a relative 1e-12 (far above its actual rounding error)
    so the comparison can only be loosened by rounding.  A violation raises
    CheckFailure.
    """
    M.validate()
    t = Fraction(t)
    if t < 0:
        raise UsageError("t must be non-negative")
    lhs = Fraction(0)
    for seq in M.space.sequences():
        if M.values[seq] <= M.values[seq[:1]] - t:
            lhs += M.space.weight(seq)
    sum_c2 = sum((cj * cj for cj in M.c), Fraction(0))
    if t == 0:
        exp_bound = Fraction(1)
    elif sum_c2 == 0:
        exp_bound = Fraction(0)
    else:
        raw = math.exp(float(-2 * t * t / sum_c2))
        exp_bound = Fraction(raw) * (1 + EXP_UPWARD_PAD)
    _, stable_mass = stable_sequences(M)
    unstable = 1 - stable_mass
    rhs = exp_bound + unstable
    holds = lhs <= rhs
    if not holds:
        raise CheckFailure(f"tail bound violated: {lhs} > {rhs} at t = {t}")
    return TailReport(
        t=t, lhs=lhs, exp_bound=exp_bound, unstable_mass=unstable, rhs=rhs, holds=holds
    )


# ---------------------------------------------------------------------------
# Optimal win probabilities for tiny explicit instances


def optimal_win_probability(dist: Explicit, prop, N: int) -> Fraction:
    """Best achievable P[property within N steps], by exact backward induction.

    The optimum over all (adaptive, deterministic) strategies satisfies
    W_r(g) = sum_s p_s * max_{e in s} W_{r-1}(g + e), with W stopping at 1
    once the property holds; memoised on the canonical edge multiset, which
    is sound because every target property is a function of the graph alone.
    """
    if not isinstance(dist, Explicit):
        raise UsageError("optimal win probabilities need an explicit distribution")
    n = dist.n
    memo: dict[tuple, Fraction] = {}

    def key_of(g: MultiGraph) -> tuple:
        return tuple(sorted(g.edge_multiset().elements()))

    def value(g: MultiGraph, r: int) -> Fraction:
        if prop.check(g):
            return Fraction(1)
        if r == 0:
            return Fraction(0)
        key = (key_of(g), r)
        if key in memo:
            return memo[key]
        total = Fraction(0)
        for es, p in dist.outcomes:
            best = Fraction(0)
            for u, v in es:
                h = g.copy()
                h.add_edge(u, v)
                w = value(h, r - 1)
                if w > best:
                    best = w
                    if best == 1:
                        break
            total += p * best
        memo[key] = total
        return total

    return value(MultiGraph(n), N)


def strategy_function_count(dist: Explicit, prop, N: int, cap: int = MAX_STRATEGY_FUNCTIONS) -> int:
    """Number of distinct deterministic strategies on the reachable states.

    Counts the product, over every reachable (step, graph, offered sample)
    decision point, of the number of available picks; stops and raises
    UsageError once the running product exceeds the cap, in which case the
    instance is too large for exhaustive strategy-space claims and the
    caller should supply m_star explicitly.
    """
    n = dist.n
    count = 1
    layer: set[tuple] = set()
    g0 = MultiGraph(n)
    if prop.check(g0):
        return 1
    layer.add(tuple())
    for _step in range(N):
        next_layer: set[tuple] = set()
        for gkey in layer:
            g = MultiGraph(n)
            for u, v in gkey:
                g.add_edge(u, v)
            if prop.check(g):
                continue  # play stops here; no further decisions on this branch
            for es, _p in dist.outcomes:
                count *= len(es)
                if count > cap:
                    raise UsageError(
                        f"more than {cap} deterministic strategies; supply m_star explicitly"
                    )
                for u, v in es:
                    h = g.copy()
                    h.add_edge(u, v)
                    next_layer.add(tuple(sorted(h.edge_multiset().elements())))
        layer = next_layer
    return count


def m_star_exact(dist: Explicit, prop, theta, *, limit: int) -> int:
    """Smallest horizon at which the optimal win probability reaches theta.

    Exhaustive and exact; guarded by the strategy-count cap so the claim
    "optimal over all deterministic strategies" stays honest.  Raises
    UsageError when theta is not reached within the limit.
    """
    theta = Fraction(theta)
    if not 0 < theta <= 1:
        raise UsageError("theta must lie in (0, 1]")
    strategy_function_count(dist, prop, limit)
    for N in range(limit + 1):
        if optimal_win_probability(dist, prop, N) >= theta:
            return N
    raise UsageError(f"optimal strategy does not reach {theta} within {limit} steps")


# ---------------------------------------------------------------------------
# Instance files


def _space_from_json(obj) -> FiniteProductSpace:
    factors = []
    for factor in obj:
        factors.append(
            tuple((entry["label"], parse_rational(entry["p"])) for entry in factor)
        )
    return FiniteProductSpace(tuple(factors))


def load_instance(path_or_obj):
    """Load a verification instance from JSON (path, file-like, or dict).

    Two kinds are understood:
      kind "doob": an explicit distribution, a strategy id, an edge-list
        target, a horizon N, theta, and optionally m_star (computed
        exhaustively when omitted and the instance is tiny) — returns a dict
        with the built objects;
      kind "martingale": factors with labelled elements, a value table keyed
        by comma-joined index prefixes, and balance targets — returns a dict
        holding the DiscreteMartingale.
    """
    if isinstance(path_or_obj, dict):
        obj = path_or_obj
    else:
        try:
            if hasattr(path_or_obj, "read"):
                obj = json.load(path_or_obj)
            else:
                with open(path_or_obj, "r", encoding="utf-8") as fh:
                    obj = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read instance file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"instance file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "kind" not in obj:
        raise DataError("instance JSON must be an object with a 'kind' field")
    kind = obj["kind"]
    try:
        if kind == "doob":
            from .properties import edges_property
            from .strategies import parse_strategy_id

            n = int(obj["n"])
            outcomes = [
                (
                    [tuple(int(x) for x in e) for e in entry["edges"]],
                    parse_rational(entry["p"]),
                )
                for entry in obj["outcomes"]
            ]
            dist = Explicit.build(n, outcomes)
            strategy = parse_strategy_id(obj.get("strategy", "lowest-edge"))
            target = [tuple(int(x) for x in e) for e in obj["target_edges"]]
            prop = edges_property(target, obj.get("target_label", "target"))
            N = int(obj["N"])
            theta = parse_rational(obj["theta"])
            if "m_star" in obj:
                m_star = int(obj["m_star"])
                m_star_supplied = True
            else:
                m_star = m_star_exact(dist, prop, theta, limit=max(N, 1))
                m_star_supplied = False
            return {
                "kind": "doob",
                "dist": dist,
                "strategy": strategy,
                "prop": prop,
                "N": N,
                "theta": theta,
                "m_star": m_star,
                "m_star_supplied": m_star_supplied,
            }
        if kind == "martingale":
            space = _space_from_json(obj["factors"])
            values = {}
            for key, val in obj["values"].items():
                prefix = tuple(int(x) for x in key.split(",")) if key else ()
                values[prefix] = parse_rational(val)
            c = tuple(parse_rational(x) for x in obj["c"])
            mart = DiscreteMartingale(space=space, values=values, c=c)
            mart.validate()
            return {"kind": "martingale", "martingale": mart}
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (DataError, UsageError)):
            raise
        raise DataError(f"malformed {kind!r} instance: {exc}") from exc
    raise DataError(f"unknown instance kind {kind!r}")


def bundled_instance_path(name: str):
    """Filesystem path of a packaged instance (e.g. 'two_subset')."""
    ref = resources.files("aplab").joinpath("instances", f"{name}.json")
    if not ref.is_file():
        raise UsageError(f"no bundled instance named {name!r}")
    return ref


def report_to_jsonable(obj):
    """Recursively render a report for JSON output, keeping rationals exact."""
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, dict):
        return {str(k): report_to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [report_to_jsonable(v) for v in obj]
    if hasattr(obj, "__dataclass_fields__"):
        return {
            name: report_to_jsonable(getattr(obj, name))
            for name in obj.__dataclass_fields__
        }
    return obj
