"""Shared fixtures for the test suite.

The randomised martingale sweep is expensive enough to run once per session:
both the unit suite and the acceptance suite assert on its outcome, so it is
computed here and cached at session scope.  Everything runs in exact rational
arithmetic; the library's own audits raise CheckFailure on any violation, so
a passing sweep certifies every instance it generated.
"""

import itertools
import random
from fractions import Fraction as F

import pytest

from aplab.engine import Explicit
from aplab.martingale import (
    DiscreteMartingale,
    FiniteProductSpace,
    couple_balanced,
    exact_doob,
    find_potential,
    is_balanced,
    make_boost_params,
    potential_boost_run,
    tail_bound_check,
    verify_quantify_boost,
)
from aplab.properties import edges_property
from aplab.strategies import parse_strategy_id


def random_explicit_distribution(rng, n):
    """A small Explicit distribution with 2-3 weighted edge-list outcomes."""
    K = rng.choice([2, 3])
    all_edges = [(u, v) for u in range(1, n + 1) for v in range(u + 1, n + 1)]
    outs = []
    weights = [rng.randint(1, 5) for _ in range(K)]
    tot = sum(weights)
    for w in weights:
        edges = rng.sample(all_edges, rng.choice([1, 2]))
        outs.append((edges, F(w, tot)))
    return Explicit.build(n, outs), all_edges


def random_martingale(rng, k_max=5, size_max=4, seq_cap=3000):
    """A random exact martingale: random leaves, interiors by averaging."""
    while True:
        k = rng.randint(1, k_max)
        sizes = [rng.randint(1, 2)] + [rng.randint(2, size_max) for _ in range(k)]
        total = 1
        for s in sizes:
            total *= s
        if total <= seq_cap:
            break
    factors = []
    for s in sizes:
        w = [rng.randint(1, 4) for _ in range(s)]
        t = sum(w)
        factors.append(tuple((f"x{j}", F(wj, t)) for j, wj in enumerate(w)))
    space = FiniteProductSpace(tuple(factors))
    vals = {}
    for seq in itertools.product(*(range(s) for s in sizes)):
        vals[seq] = F(rng.randint(-16, 16), rng.choice([1, 2, 4, 8]))
    for L in range(len(sizes) - 1, 0, -1):
        for p in itertools.product(*(range(s) for s in sizes[:L])):
            vals[p] = sum(
                (space.prob(L, i) * vals[p + (i,)] for i in range(sizes[L])), F(0)
            )
    c = tuple(F(rng.randint(0, 12), 4) for _ in range(k))
    return DiscreteMartingale(space=space, values=vals, c=c)


@pytest.fixture(scope="session")
def martingale_fuzz_results():
    """Run the three randomised exact-verification sweeps once per session.

    Phase A/B: 200 random tiny Doob instances through table construction,
    tower check, boosting (self-auditing), a per-sequence recount of the
    armed mass, and — where the horizon precondition applies — the
    quantified arming bound.

    Phase C: 500 random martingales through the balancing coupling, with
    idempotence on already-balanced inputs and the bounded-difference
    consequence checked on every coupled prefix.

    Phase D: 500 tail-bound checks on fresh random martingales (the check
    itself raises CheckFailure on a violation).

    The three phases share one seeded generator, so each phase's instance
    stream is fixed and the counts below are stable.
    """
    rng = random.Random(2026)

    conforming = 0
    for case in range(200):
        n = rng.choice([3, 4])
        dist, all_edges = random_explicit_distribution(rng, n)
        target = rng.sample(all_edges, rng.choice([1, 2]))
        prop = edges_property(target, f"f{case}")
        strat = parse_strategy_id(rng.choice(["lowest-edge", f"hashpick:{case}"]))
        N = rng.randint(1, 4)
        theta = rng.choice([F(1, 4), F(1, 2), F(3, 4)])
        doob = exact_doob(dist, strat, prop, N)
        doob.check_tower()
        # m_star = N makes the horizon precondition N <= C * m_star automatic.
        params = make_boost_params(theta, doob.mu, N)
        potential_boost_run(doob, params)  # raises CheckFailure on violation
        rep = find_potential(doob, params)
        direct = sum(
            (
                doob.space.weight(s)
                for s in doob.space.sequences()
                if rep.tau_of(s) is not None
            ),
            F(0),
        )
        assert direct == rep.unstable_mass, case
        q = verify_quantify_boost(doob, params)
        if q.precondition_ok:
            conforming += 1
            assert q.holds, case

    bounded_diff_checks = 0
    for case in range(500):
        M = random_martingale(rng)
        res = couple_balanced(M)  # self-audits the coupling contract
        Mp = res.coupled
        if is_balanced(M):
            assert Mp.values == M.values and res.records == []
        for p, v in Mp.values.items():
            if len(p) >= 2:
                assert abs(v - Mp.values[p[:-1]]) <= Mp.c[len(p) - 2], (case, p)
                bounded_diff_checks += 1

    tails = 0
    for case in range(500):
        M = random_martingale(rng, k_max=4, size_max=3, seq_cap=800)
        t = F(rng.randint(0, 24), 4)
        tail_bound_check(M, t)  # raises CheckFailure on violation
        tails += 1

    return {
        "doob_instances": 200,
        "conforming": conforming,
        "couplings": 500,
        "bounded_diff_checks": bounded_diff_checks,
        "tail_checks": tails,
    }
