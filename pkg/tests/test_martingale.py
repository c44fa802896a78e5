"""Exact-arithmetic tests for the martingale verification lab.

The two bundled instances are small enough to work by hand, so every number
asserted here is an exact rational derived independently:

* two-subset: two equally likely single-edge outcomes, target one of them,
  horizon 1.  The forced strategy wins iff the target is offered (mu = 1/2);
  swapping the losing draw wins the rest, so the boosted strategy wins
  everything.
* one-step coupling: a fair step from 1/2 to {0, 1} with balance target 2/5.
  The only admissible merge collapses both branches to the constant 1/2,
  with shift gamma = (1/2 - 0) * (1/2 * 1/2) / (1/2 + 1/2) = 1/4 applied to
  the low branch.
* a 5-step +-1/2 coin walk whose exact tail probabilities are binomial:
  P[|M_5| >= 5/2] = 2/64 + ... = 1/32, P[>= 3/2] = 6/32, P[>= 1/2] = 16/32.

Randomised sweeps (seeded, session-cached in conftest) re-run the audited
pipelines on hundreds of machine-generated instances.
"""

import json
import math
import os

import pytest
from fractions import Fraction as F

from aplab.engine import EdgeListSample, Explicit, SemiRandomStar, StrategyHandle
from aplab.errors import CheckFailure, DataError, UsageError
from aplab.martingale import (
    DiscreteMartingale,
    FiniteProductSpace,
    audit_coupling,
    boost_schedule,
    bundled_instance_path,
    couple_balanced,
    exact_doob,
    find_potential,
    format_rational,
    is_balanced,
    load_instance,
    m_star_exact,
    make_boost_params,
    optimal_win_probability,
    parse_rational,
    potential_boost_run,
    rational_sqrt,
    report_to_jsonable,
    stable_sequences,
    strategy_function_count,
    tail_bound_check,
    verify_quantify_boost,
)
from aplab.martingale import _log2_upper
from aplab.properties import edges_property
from aplab.strategies import parse_strategy_id

import itertools


# ---------------------------------------------------------------------------
# rational helpers


def test_parse_rational_accepts_strings_ints_and_fractions():
    assert parse_rational("1/2") == F(1, 2)
    assert parse_rational(" -7/4") == F(-7, 4)
    assert parse_rational(" 3 ") == F(3)
    assert parse_rational(3) == F(3)
    assert parse_rational(F(1, 2)) == F(1, 2)
    with pytest.raises(DataError):
        parse_rational("abc")
    with pytest.raises(DataError):
        parse_rational("1/0")
    with pytest.raises(DataError):
        parse_rational(1.5)  # floats are ambiguous; only exact inputs allowed


def test_format_rational_round_trips_through_parse():
    for x in [F(1, 2), F(-7, 4), F(3), F(0), F(22, 7)]:
        assert parse_rational(format_rational(x)) == x
    assert format_rational(F(3)) == "3"
    assert format_rational(F(1, 2)) == "1/2"


def test_rational_sqrt_is_exact_or_none():
    assert rational_sqrt(F(1, 4)) == F(1, 2)
    assert rational_sqrt(F(9, 16)) == F(3, 4)
    assert rational_sqrt(F(36)) == F(6)
    assert rational_sqrt(F(0)) == F(0)
    assert rational_sqrt(F(2)) is None  # irrational
    assert rational_sqrt(F(-1)) is None


def test_log2_upper_is_exact_on_powers_of_two_and_padded_otherwise():
    assert _log2_upper(F(2)) == 1
    assert _log2_upper(F(8)) == 3
    assert _log2_upper(F(1024)) == 10
    ub = _log2_upper(F(10, 3))
    true = math.log2(10 / 3)
    assert float(ub) >= true and float(ub) - true < 1e-9
    with pytest.raises(UsageError):
        _log2_upper(F(1))


# ---------------------------------------------------------------------------
# finite product spaces


def test_product_space_weights_and_validation():
    sp = FiniteProductSpace.iid((("a", F(1, 3)), ("b", F(2, 3))), 3)
    assert sp.num_factors == 3
    assert sp.num_sequences() == 8
    assert sp.weight((0, 1, 1)) == F(1, 3) * F(2, 3) * F(2, 3) == F(4, 27)
    assert sum(sp.weight(s) for s in sp.sequences()) == 1
    with pytest.raises(UsageError):
        FiniteProductSpace(((),))  # empty factor
    with pytest.raises(UsageError):
        FiniteProductSpace(((("a", F(1, 2)),),))  # probabilities sum to 1/2
    with pytest.raises(UsageError):
        FiniteProductSpace(((("a", F(3, 2)), ("b", F(-1, 2))),))  # negative prob


# ---------------------------------------------------------------------------
# the bundled two-outcome instance, by hand


@pytest.fixture(scope="module")
def two_subset():
    inst = load_instance(bundled_instance_path("two_subset"))
    doob = exact_doob(inst["dist"], inst["strategy"], inst["prop"], inst["N"])
    params = make_boost_params(inst["theta"], doob.mu, inst["m_star"])
    return inst, doob, params


def test_bundled_instance_derives_its_own_horizon(two_subset):
    inst, _, _ = two_subset
    assert inst["kind"] == "doob"
    assert inst["N"] == 1 and inst["theta"] == F(1, 2)
    # m_star omitted in the file: computed exhaustively as the first horizon
    # at which the optimal strategy reaches theta = 1/2.
    assert inst["m_star"] == 1 and not inst["m_star_supplied"]


def test_doob_table_matches_hand_computation(two_subset):
    _, doob, _ = two_subset
    assert doob.mu == F(1, 2)
    assert doob.tables[(0,)] == 1  # target edge offered: win
    assert doob.tables[(1,)] == 0  # other edge offered: loss
    doob.check_tower()


def test_boost_constants_match_hand_computation(two_subset):
    _, _, params = two_subset
    # theta = 1/2 gives C = 1 + log2(2) = 2, exactly (dyadic case);
    # c^2 = mu^2 (1-mu)^2 / (2 C m*) = (1/16) / 4 = 1/64, so c = 1/8.
    assert params.c_theta == 2
    assert params.c2 == F(1, 64)
    assert params.c_exact == F(1, 8)


def test_potential_arms_exactly_on_the_losing_draw(two_subset):
    _, doob, params = two_subset
    rep = find_potential(doob, params)
    assert rep.swaps == {(1,): 0}  # after the losing draw, swap to the winner
    assert rep.unstable_mass == F(1, 2)
    assert rep.stable_set_mass == F(1, 2)
    assert rep.tau_of((1,)) == 1 and rep.witness_of((1,)) == 0
    assert rep.tau_of((0,)) is None


def test_boosted_strategy_wins_every_sequence(two_subset):
    _, doob, params = two_subset
    run = potential_boost_run(doob, params)
    assert run.boosted_win == 1
    # the guaranteed lift: mu + c * P[swap] = 1/2 + (1/8)(1/2) = 9/16
    assert run.boosted_win >= F(9, 16)
    assert run.equal_on_stable and run.gap_exceeds_c and run.bound_holds


def test_quantified_arming_bound_with_exact_margin(two_subset):
    _, doob, params = two_subset
    q = verify_quantify_boost(doob, params)
    assert q.precondition_ok and q.holds
    # P[swap] = 1/2 versus threshold (1 - mu)/2 = 1/4: margin 1/4.
    assert q.threshold == F(1, 4)
    assert q.margin == F(1, 4)


def test_boost_with_certain_win_is_trivial():
    dist = Explicit.build(3, [([(1, 2)], F(1, 2)), ([(1, 3)], F(1, 2))])
    prop = edges_property([], "nothing")  # empty target: satisfied at once
    doob = exact_doob(dist, parse_strategy_id("lowest-edge"), prop, 2)
    assert doob.mu == 1
    params = make_boost_params(F(1, 2), doob.mu, 1)
    assert params.c2 == 0
    rep = find_potential(doob, params)
    assert rep.unstable_mass == 0
    run = potential_boost_run(doob, params)
    assert run.boosted_win == 1
    q = verify_quantify_boost(doob, params)
    assert q.holds and q.threshold == 0


def test_boost_with_impossible_target_stays_at_zero():
    dist = Explicit.build(3, [([(1, 2)], F(1, 2)), ([(1, 3)], F(1, 2))])
    prop = edges_property([(2, 3)], "unreachable")  # never offered
    doob = exact_doob(dist, parse_strategy_id("lowest-edge"), prop, 2)
    assert doob.mu == 0
    params = make_boost_params(F(1, 2), doob.mu, 1)
    rep = find_potential(doob, params)
    assert rep.unstable_mass == 0 and rep.stable_set_mass == 1
    run = potential_boost_run(doob, params)
    # no prefix ever arms, and then the boosted win must equal mu exactly
    assert run.boosted_win == 0 == doob.mu


def test_exact_doob_input_guards(two_subset):
    inst, doob, _ = two_subset
    with pytest.raises(UsageError):
        exact_doob(inst["dist"], inst["strategy"], inst["prop"], -1)
    with pytest.raises(UsageError):  # rng-using strategies have no fixed table
        exact_doob(
            inst["dist"],
            StrategyHandle(id="x", make=lambda n: None, deterministic=False),
            inst["prop"],
            1,
        )
    with pytest.raises(UsageError):  # continuous distributions cannot be tabulated
        exact_doob(SemiRandomStar(5), inst["strategy"], inst["prop"], 1)
    with pytest.raises(UsageError):  # 2^21 sequences exceed the enumeration cap
        exact_doob(inst["dist"], inst["strategy"], inst["prop"], 21)
    # N = 0: the table is a single root cell holding the indicator at start
    d0 = exact_doob(inst["dist"], inst["strategy"], edges_property([], "none"), 0)
    assert d0.tables == {(): F(1)} and d0.mu == 1 and d0.space.num_factors == 0
    assert exact_doob(inst["dist"], inst["strategy"], inst["prop"], 0).mu == 0


def test_find_potential_rejects_mismatched_mu(two_subset):
    _, doob, _ = two_subset
    with pytest.raises(UsageError):
        find_potential(doob, make_boost_params(F(1, 2), F(1, 3), 1))


def test_boost_params_validation():
    with pytest.raises(UsageError):
        make_boost_params(F(0), F(1, 2), 1)
    with pytest.raises(UsageError):
        make_boost_params(F(1), F(1, 2), 1)
    with pytest.raises(UsageError):
        make_boost_params(F(1, 2), F(1, 2), 0)


# ---------------------------------------------------------------------------
# balancing coupling


@pytest.fixture(scope="module")
def one_step():
    return load_instance(bundled_instance_path("coupling_k1"))["martingale"]


def test_bundled_step_couples_to_the_constant_martingale(one_step):
    m1 = one_step
    assert not is_balanced(m1)  # gap 1 exceeds the 2/5 target
    res = couple_balanced(m1)
    (rec,) = res.records
    assert rec.gamma == F(1, 4)
    assert rec.small == (0,) and rec.large == (1,)
    # both branches merge at the conditional mean 1/2
    assert res.coupled.values[(0, 0)] == F(1, 2)
    assert res.coupled.values[(0, 1)] == F(1, 2)
    stable, mass = stable_sequences(m1)
    assert stable == {(0, 1)} and mass == F(1, 2)


def test_balanced_input_passes_through_unchanged(one_step):
    m1 = one_step
    m_bal = DiscreteMartingale(space=m1.space, values=dict(m1.values), c=(F(1),))
    assert is_balanced(m_bal)  # gap 1 fits within target 1
    res = couple_balanced(m_bal)
    assert res.records == [] and res.coupled.values == m_bal.values
    assert not is_balanced(
        DiscreteMartingale(space=m1.space, values=dict(m1.values), c=(F(2, 5),))
    )


def test_coupling_audit_accepts_real_and_rejects_fake(one_step):
    m1 = one_step
    audit_coupling(m1, couple_balanced(m1).coupled)
    with pytest.raises(CheckFailure):
        audit_coupling(m1, m1)  # the original is not balanced


def test_martingale_validation_errors(one_step):
    m1 = one_step
    with pytest.raises(DataError):  # wrong number of balance targets
        DiscreteMartingale(space=m1.space, values=dict(m1.values), c=(F(1), F(1))).validate()
    with pytest.raises(DataError):  # negative target
        DiscreteMartingale(space=m1.space, values=dict(m1.values), c=(F(-1),)).validate()
    vals = dict(m1.values)
    del vals[(0, 1)]
    with pytest.raises(DataError):  # incomplete value table
        DiscreteMartingale(space=m1.space, values=vals, c=(F(2, 5),)).validate()
    vals2 = dict(m1.values)
    vals2[(0,)] = F(1, 3)
    with pytest.raises(DataError):  # averaging identity broken
        DiscreteMartingale(space=m1.space, values=vals2, c=(F(2, 5),)).validate()
    big = FiniteProductSpace.iid((("a", F(1, 2)), ("b", F(1, 2))), 17)
    with pytest.raises(UsageError):  # 2^17 sequences exceed the enumeration cap
        DiscreteMartingale(space=big, values={}, c=tuple(F(1) for _ in range(16))).validate()


# ---------------------------------------------------------------------------
# tail bound


def symmetric_walk(steps):
    """A +-1/2 fair coin walk: balanced with unit targets, exact binomial tails."""
    fac0 = ((("start", F(1)),),)
    step = (("down", F(1, 2)), ("up", F(1, 2)))
    space = FiniteProductSpace(fac0 + tuple(step for _ in range(steps)))
    vals = {}
    for L in range(1, steps + 2):
        for p in itertools.product(*(range(space.size(j)) for j in range(L))):
            vals[p] = sum(F(1, 2) if i == 1 else F(-1, 2) for i in p[1:])
    return DiscreteMartingale(
        space=space, values=vals, c=tuple(F(1) for _ in range(steps))
    )


def test_symmetric_walk_tail_probabilities_are_exact():
    walk = symmetric_walk(5)
    walk.validate()
    assert is_balanced(walk)
    # binomial tails: 2*C(5,0)/32, 2*(C(5,0)+C(5,1))/32, all-but-nothing, and
    # t=0 also gives 16/32 because an odd-length walk never returns to 0
    for t, exact_tail in [
        (F(5, 2), F(1, 32)),
        (F(3, 2), F(6, 32)),
        (F(1, 2), F(16, 32)),
        (F(0), F(16, 32)),
    ]:
        tr = tail_bound_check(walk, t)
        assert tr.lhs == exact_tail
        assert tr.unstable_mass == 0
        assert tr.holds
        assert tr.exp_bound >= tr.lhs


def test_tail_bound_on_unbalanced_instance_adds_unstable_mass(one_step):
    m1 = one_step
    tr = tail_bound_check(m1, F(2))
    assert tr.lhs == 0  # no sequence moves by 2
    assert tr.unstable_mass == F(1, 2)
    assert tr.rhs == tr.exp_bound + F(1, 2)
    assert tr.holds
    tr0 = tail_bound_check(m1, F(0))
    assert tr0.lhs == F(1, 2)  # all stable mass trivially deviates by >= 0
    assert tr0.holds
    with pytest.raises(UsageError):
        tail_bound_check(m1, F(-1))


# ---------------------------------------------------------------------------
# amplification schedule


def test_boost_schedule_floor_and_cap():
    s = boost_schedule(F(1, 2), F(9, 10), 10**4)
    # guaranteed floor min(theta2, theta + theta (1-theta)^3 / 32) = 1/2 + 1/512
    assert s.floor == F(1, 2) + F(1, 512)
    assert s.terminal >= s.floor - F(101, 1 << 96)  # fixed-point slack only
    assert not s.capped and s.iterations == 100
    s2 = boost_schedule(F(1, 2), F(1, 2) + F(1, 10**9), 10**4)
    assert s2.capped  # the tiny target is reached before the iteration budget
    with pytest.raises(UsageError):
        boost_schedule(F(9, 10), F(1, 2), 10**4)
    with pytest.raises(UsageError):
        boost_schedule(F(1, 2), F(9, 10), 0)


def test_boost_schedule_grid_respects_amplification_floor():
    for th in [F(i, 10) for i in range(1, 10)]:
        for m_star in (10**2, 10**4, 10**6):
            r = boost_schedule(th, F(99, 100), m_star)
            floor = min(F(99, 100), th + th * (1 - th) ** 3 / 32)
            assert r.terminal >= floor - F(1002, 1 << 96), (th, m_star)


# ---------------------------------------------------------------------------
# optimal strategies on tiny spaces


def test_optimal_win_probability_and_exact_horizon(two_subset):
    inst, _, _ = two_subset
    dist, prop = inst["dist"], inst["prop"]
    # P[target offered within N single-edge draws] = 1 - 2^-N
    assert optimal_win_probability(dist, prop, 1) == F(1, 2)
    assert optimal_win_probability(dist, prop, 3) == F(7, 8)
    # single-edge samples leave no choices: exactly one strategy function
    assert strategy_function_count(dist, prop, 5) == 1
    assert m_star_exact(dist, prop, F(7, 8), limit=5) == 3
    with pytest.raises(UsageError):
        m_star_exact(dist, prop, F(3, 2), limit=3)
    with pytest.raises(UsageError):  # optimum at horizon 2 is 3/4 < 1
        m_star_exact(dist, prop, F(1), limit=2)
    with pytest.raises(UsageError):
        optimal_win_probability(SemiRandomStar(5), prop, 1)


def test_strategy_function_count_honours_its_cap():
    dist = Explicit.build(4, [([(1, 2), (3, 4)], F(1, 2)), ([(1, 3)], F(1, 2))])
    prop = edges_property([(1, 2)], "t")
    assert strategy_function_count(dist, prop, 2) > 1  # a real choice exists
    with pytest.raises(UsageError):
        strategy_function_count(dist, prop, 2, cap=1)


# ---------------------------------------------------------------------------
# instance files and report serialisation


def test_report_serialises_exact_rationals(two_subset):
    _, doob, params = two_subset
    run = potential_boost_run(doob, params)
    js = report_to_jsonable(run)
    assert js["boosted_win"] == "1"
    assert js["mu"] == "1/2"
    json.dumps(js)  # everything must be JSON-ready


def test_load_instance_accepts_dicts_and_honours_supplied_m_star():
    with open(bundled_instance_path("two_subset"), "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    obj["m_star"] = 2
    inst = load_instance(obj)
    assert inst["m_star"] == 2 and inst["m_star_supplied"]


def test_load_instance_rejects_malformed_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(DataError):
        load_instance(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(DataError):
        load_instance(str(arr))
    with pytest.raises(DataError):
        load_instance(str(tmp_path / "missing.json"))
    with pytest.raises(DataError):
        load_instance({"kind": "mystery"})
    with open(bundled_instance_path("two_subset"), "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    del obj["outcomes"]
    with pytest.raises(DataError):
        load_instance(obj)
    with pytest.raises(UsageError):
        bundled_instance_path("nope")


# ---------------------------------------------------------------------------
# randomised sweeps (session-cached; see conftest)


def test_random_doob_instances_survive_the_boost_pipeline(martingale_fuzz_results):
    r = martingale_fuzz_results
    assert r["doob_instances"] == 200
    # the quantified bound applies whenever mu > 0 and the horizon fits
    assert r["conforming"] == 79


def test_random_couplings_respect_balance_targets(martingale_fuzz_results):
    r = martingale_fuzz_results
    assert r["couplings"] == 500
    assert r["bounded_diff_checks"] == 82255


def test_random_tail_bounds_never_violate(martingale_fuzz_results):
    assert martingale_fuzz_results["tail_checks"] == 500
