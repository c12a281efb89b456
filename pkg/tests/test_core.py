import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfd.core import (Demonstration, LfdError, Policy, ProblemInstance, T, Transition, Variant,
                      batch, consistent_modulo, consistent_with_demo, consistent_with_set,
                      derivation_distance, derivation_distance_exhaustive, extract_parameters,
                      inc_hist, is_valid, label_key, merge_positive_singletons, run_policy,
                      split_positive, triggers)
from lfd.documents import worked_example
from lfd.reduce import complete, reduce_ds_to_batch

S = frozenset
FIG = worked_example()
p1, p2 = FIG["p1"], FIG["p2"]
d1, d2, d3, d4 = FIG["d1"], FIG["d2"], FIG["d3"], FIG["d4"]

FEATURES = ["f1", "f2", "f3", "f4", "f5"]
ACTIONS = ["a1", "a2", "a3"]

states = st.frozensets(st.sampled_from(FEATURES), min_size=1, max_size=4)
transitions = st.builds(Transition, states, st.sampled_from(ACTIONS))
policies = st.builds(lambda trs: Policy(tuple(trs)), st.lists(transitions, max_size=5))
steps = st.tuples(states, st.sampled_from(ACTIONS))
demos = st.builds(Demonstration, st.sampled_from(["pos", "neg"]),
                  st.lists(steps, min_size=1, max_size=4).map(tuple))


# --------------------------------------------------------------------------
# construction


def test_natural_label_order():
    assert sorted(["f10", "f2", "f1"], key=label_key) == ["f1", "f2", "f10"]


def test_empty_trigger_rejected():
    with pytest.raises(LfdError):
        Transition(S(), "a1")


def test_empty_state_and_empty_demo_rejected():
    with pytest.raises(LfdError):
        Demonstration.pos((S(), "a1"))
    with pytest.raises(LfdError):
        Demonstration("pos", ())


def test_policy_collapses_duplicates_and_sorts():
    p = Policy.of(({"f2"}, "a1"), ({"f1"}, "a2"), ({"f2"}, "a1"))
    assert len(p) == 2
    assert [tr.trigger for tr in p] == [S({"f1"}), S({"f2"})]
    assert Policy(()) == Policy.of()


def test_instance_validation():
    d = Demonstration.pos((S({"f1"}), "a1"))
    with pytest.raises(LfdError):
        batch(["f1"], ["a1"], [d], t=0, f_t=1)
    with pytest.raises(LfdError):
        batch(["f1"], ["a2"], [d], t=1, f_t=1)
    with pytest.raises(LfdError):
        batch(["f1", "f1"], ["a1"], [d], t=1, f_t=1)
    with pytest.raises(LfdError):
        inc_hist(["f1"], ["a1"], [d], Policy.of(({"f1"}, "a1")), d, t=1, f_t=1, c=1)
    with pytest.raises(LfdError):
        inc_hist(["f1"], ["a1"], [], Policy.of(({"f1"}, "a1")), d, t=1, f_t=1, c=0)
    with pytest.raises(LfdError):
        ProblemInstance(Variant.BATCH, ("f1",), ("a1",), (d,), Policy(()), t=1, f_t=1)


# --------------------------------------------------------------------------
# predicates on the worked example


def test_triggers():
    assert triggers(T({"f1"}, "a1"), S({"f1", "f4"}))
    assert triggers(T({"f1"}, "a1"), S({"f1"}))
    assert not triggers(T({"f2"}, "a1"), S({"f1"}))


def test_run_policy():
    assert run_policy(p1, S({"f1", "f4"})) == {"a1", "a4"}
    assert run_policy(p2, S({"f4"})) == set()
    assert run_policy(p1, S({"f2"})) == {"a2"}


def test_validity():
    assert is_valid(p1, [d1, d2])
    assert not is_valid(p1, [d3])
    assert is_valid(p2, [d3])


def test_consistency():
    assert consistent_with_demo(p1, d2)
    assert consistent_with_demo(p2, d2)
    assert not consistent_with_demo(p1, d3)
    assert consistent_with_set(p1, [d1, d2])
    assert not consistent_with_set(p2, [d1, d2])
    assert consistent_with_set(p2, [d3])


def test_positive_consistency_needs_exactly_one_action():
    p = Policy.of(({"f1"}, "a1"), ({"f2"}, "a2"))
    assert not consistent_with_demo(p, Demonstration.pos((S({"f1", "f2"}), "a1")))


def test_consistency_modulo():
    assert consistent_modulo(p1, p2, d4)
    assert not consistent_modulo(p2, p1, d4)
    assert consistent_modulo(p1, p1, d4)


def test_consistency_modulo_negative_step():
    ref = Policy.of(({"f1"}, "a1"), ({"f2"}, "a2"))
    neg = Demonstration.neg((S({"f1"}), "a1"))
    assert consistent_modulo(Policy.of(({"f2"}, "a2")), ref, neg)
    assert not consistent_modulo(ref, ref, neg)
    # keeping the reference behaviour is fine when it already avoids the action
    assert consistent_modulo(ref, ref, Demonstration.neg((S({"f1"}), "a2")))


def test_derivation_distance():
    assert derivation_distance(p1, p2) == 3
    assert derivation_distance_exhaustive(p1, p2) == 3
    assert math.isinf(derivation_distance(p2, p1))
    assert derivation_distance(p1, p1) == 0
    assert derivation_distance(p1, Policy(())) == 4
    assert derivation_distance(Policy(()), Policy(())) == 0


def test_merge_and_split():
    a = Demonstration.pos((S({"f2"}), "a"))
    b = Demonstration.pos((S({"f1"}), "a"))
    assert merge_positive_singletons([a, b]) == Demonstration.pos((S({"f1"}), "a"), (S({"f2"}), "a"))
    assert merge_positive_singletons([a]) == a
    parts = split_positive(d1)
    assert len(parts) == 4
    assert consistent_with_set(p1, parts) and consistent_with_demo(p1, merge_positive_singletons(parts))
    with pytest.raises(LfdError):
        merge_positive_singletons([d2])
    with pytest.raises(LfdError):
        merge_positive_singletons([d1])


def test_extract_parameters():
    inst = batch(FIG["F"], FIG["A"], [d1, d2, d3, d4], t=1, f_t=1)
    pv = extract_parameters(inst)
    assert (pv.nF, pv.nA, pv.nd, pv.ld, pv.feap) == (4, 4, 4, 4, 2)
    one = batch(["f1"], ["a1"], [Demonstration.pos((S({"f1"}), "a1"))], t=1, f_t=1)
    pv = extract_parameters(one)
    assert (pv.nd, pv.ld, pv.feap, pv.t, pv.ft, pv.c) == (1, 1, 1, 1, 1, None)
    pv = extract_parameters(reduce_ds_to_batch(complete(3), 1).instance)
    assert (pv.nF, pv.nA, pv.nd, pv.ld, pv.feap) == (3, 1, 3, 1, 3)


# --------------------------------------------------------------------------
# properties


@given(transitions, states, states)
def test_triggering_is_monotone(tr, s, extra):
    if triggers(tr, s):
        assert triggers(tr, s | extra)


@given(policies, states)
def test_run_is_bounded(p, s):
    out = run_policy(p, s)
    assert out <= set(ACTIONS)
    assert len(out) <= len(p)


@given(policies, st.lists(demos, max_size=3), st.lists(demos, max_size=3))
def test_validity_splits_over_union(p, xs, ys):
    assert is_valid(p, xs + ys) == (is_valid(p, xs) and is_valid(p, ys))


@given(policies, policies)
@settings(max_examples=300)
def test_distance_matches_exhaustive(old, new):
    fast, slow = derivation_distance(old, new), derivation_distance_exhaustive(old, new)
    assert fast == slow
    assert math.isinf(fast) == (len(new) > len(old))
    assert (fast == 0) == (old == new)


@given(policies, st.lists(st.tuples(states, st.sampled_from(ACTIONS)), min_size=1, max_size=6))
def test_merge_split_preserves_consistency(p, pairs):
    singles = [Demonstration.pos(pair) for pair in pairs]
    merged = merge_positive_singletons(singles)
    assert consistent_with_set(p, singles) == consistent_with_demo(p, merged)
    assert consistent_with_set(p, split_positive(merged)) == consistent_with_demo(p, merged)


def test_modulo_quantifier_follows_worked_example():
    # {f1} is not inside any d4 state, so it must be replicated; {f2},{f3} are exempt
    ref = Policy.of(({"f1"}, "a1"), ({"f2"}, "a4"))
    d = Demonstration.pos((S({"f2"}), "a2"))
    assert consistent_modulo(Policy.of(({"f1"}, "a1"), ({"f2"}, "a2")), ref, d)
    assert not consistent_modulo(Policy.of(({"f2"}, "a2")), ref, d)


def test_distance_agrees_on_enumerated_small_policies():
    pool = [T({f}, a) for f in ("f1", "f2") for a in ("a1", "a2")] + [T({"f1", "f2"}, "a1")]
    subsets = [Policy(c) for r in range(4) for c in itertools.combinations(pool, r)]
    rng = random.Random(3)
    for old, new in (rng.sample(subsets, 2) for _ in range(400)):
        assert derivation_distance(old, new) == derivation_distance_exhaustive(old, new)
