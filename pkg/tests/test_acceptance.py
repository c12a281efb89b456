"""Acceptance suite: one test per criterion, summarised as PASS/FAIL lines."""
import math
import random
import time

import pytest

from lfd.core import (Demonstration, Policy, batch, consistent_modulo, consistent_with_demo,
                      consistent_with_set, derivation_distance, derivation_distance_exhaustive,
                      is_valid, merge_positive_singletons, run_policy, split_positive)
from lfd.documents import RESULT_FILES, data_text, worked_example
from lfd.lattice import count_statuses, grid, load_results, propagate, render_map
from lfd.reduce import (Construction, all_graphs, brute_force_dominating_set, extract_dominating_set,
                        grid_subgraph, is_dominating, reduce_graph, uniform_random)
from lfd.solve import BACKTRACKING, REFERENCE, solve, solve_batch, solve_batch_min_t, solve_min_t

from instances import instance_corpus, positive_singletons, random_policy, random_state

criterion = pytest.mark.criterion


def graph_corpus():
    graphs = [g for n in range(1, 5) for g in all_graphs(n)]
    rng = random.Random(20240611)
    for i in range(200):
        graphs.append(uniform_random(rng.randint(2, 7), rng.choice([0.2, 0.35, 0.5, 0.7]), seed=i))
    for i, (rows, cols) in enumerate([(2, 3), (1, 7), (2, 2), (3, 2), (1, 5)] * 4):
        graphs.append(grid_subgraph(rows, cols, 0.8, seed=i))
    return graphs


GRAPHS = graph_corpus()


# --------------------------------------------------------------------------


@criterion(1, "worked-example predicates reproduce all 12 statements in < 1 s")
def test_worked_example_statements():
    t0 = time.perf_counter()
    fig = worked_example()
    p1, p2, d1, d2, d3, d4 = (fig[k] for k in ("p1", "p2", "d1", "d2", "d3", "d4"))
    statements = [
        is_valid(p1, [d1, d2]),
        not is_valid(p1, [d3]),
        is_valid(p2, [d1, d2]),
        is_valid(p2, [d3]),
        derivation_distance(p1, p2) <= 3,
        math.isinf(derivation_distance(p2, p1)),
        consistent_with_set(p1, [d1, d2]),
        not consistent_with_set(p1, [d3]),
        not consistent_with_set(p2, [d1, d2]) and consistent_with_set(p2, [d2]),
        consistent_with_set(p2, [d3]),
        consistent_modulo(p1, p2, d4),
        not consistent_modulo(p2, p1, d4),
    ]
    elapsed = time.perf_counter() - t0
    assert statements == [True] * 12
    # exactness of the distance claim, against the exhaustive oracle
    assert derivation_distance(p1, p2) == derivation_distance_exhaustive(p1, p2) == 3
    # the supporting action sets quoted alongside the statements
    assert run_policy(p1, frozenset({"f1", "f4"})) == {"a1", "a4"}
    assert run_policy(p1, frozenset({"f2", "f4"})) == {"a2", "a4"}
    assert run_policy(p2, frozenset({"f4"})) == set()
    assert elapsed < 1.0


EXAMPLE_MAP_GRID = """\
| | -- | C | D | C, D |
|---|---|---|---|---|
| -- | NPh | X | X | X |
| A | X | X | X | X |
| B | X | X | ??? | ??? |
| A, B | √ | √ | √ | √ |
"""


@criterion(2, "small example map reproduced cell-for-cell, byte-stable")
def test_example_map():
    renders = []
    for _ in range(3):
        universe, results = load_results(data_text(RESULT_FILES["example_map"]))
        renders.append(render_map(propagate(results, universe), ["A", "B"], ["C", "D"]))
    assert renders[0] == EXAMPLE_MAP_GRID
    assert len(set(renders)) == 1
    counts = count_statuses(propagate(results, universe))
    assert (counts.intractable, counts.tractable, counts.unknown, counts.conflict) == (9, 4, 2, 0)


# transcription of the published batch-learning map; rows over {t, f_t, F, A},
# columns over {nd, ld, feap}, both in size-then-position order
PUBLISHED_BATCH_MAP = [
    "NPh X X X ??? X X ???",
    "X X X ??? ??? ??? ??? ???",
    "X X X X ??? X X ???",
    "??? ??? ??? ??? ??? ??? ??? ???",
    "X X X X ??? X X √",
    "X X X ??? ??? ??? ??? ???",
    "??? ??? ??? ??? ??? ??? ??? ???",
    "X X X ??? ??? ??? ??? √",
    "??? ??? ??? ??? ??? ??? ??? ???",
    "X X X ??? ??? X X √",
    "√ √ √ √ √ √ √ √",
    "??? ??? ??? ??? ??? ??? ??? ???",
    "X X X ??? ??? ??? ??? √",
    "√ √ √ √ √ √ √ √",
    "√ √ √ √ √ √ √ √",
    "√ √ √ √ √ √ √ √",
]
# the single cell where the closure is stronger than the published table
KNOWN_DISCREPANCY = {("f_t, A", "feap"): ("???", "X")}


@criterion(3, "batch-learning map matches the published table except the one known cell")
def test_batch_map():
    universe, results = load_results(data_text(RESULT_FILES["lfdbat"]))
    imap = propagate(results, universe)
    row_labels, col_labels, body = grid(imap, universe[:4], universe[4:])
    published = [r.split() for r in PUBLISHED_BATCH_MAP]
    assert len(body) == len(published) == 16 and all(len(r) == 8 for r in published)
    diffs = {(rl, cl): (published[i][j], body[i][j])
             for i, rl in enumerate(row_labels) for j, cl in enumerate(col_labels)
             if published[i][j] != body[i][j]}
    assert diffs == KNOWN_DISCREPANCY
    counts = count_statuses(imap)
    assert (counts.tractable, counts.intractable, counts.unknown, counts.conflict) == (36, 35, 56, 0)
    published_filled = sum(c in ("X", "√") for row in published for c in row)
    assert published_filled == 70
    assert counts.tractable + counts.intractable == published_filled + 1


@criterion(4, "every reduction round-trips on the graph corpus with verified witnesses in < 60 s")
def test_reduction_round_trip():
    assert sum(g.n <= 4 for g in GRAPHS) >= 75 and len(GRAPHS) - 75 >= 200
    assert max(g.n for g in GRAPHS) <= 7
    t0 = time.perf_counter()
    checked = 0
    for idx, g in enumerate(GRAPHS):
        ds = brute_force_dominating_set(g)[0]
        for k in range(1, g.n + 1):
            for lemma in Construction:
                art = reduce_graph(lemma, g, k, seed=idx * 31 + k)
                out = solve(art.instance)
                assert out.found == (ds <= k), (g, k, lemma)
                if out.found:
                    witness = extract_dominating_set(art, out.result)
                    assert len(witness) <= k and is_dominating(g, witness)
                checked += 1
    elapsed = time.perf_counter() - t0
    assert checked > 5000
    assert elapsed < 60, elapsed


@criterion(5, "minimum t equals DS for the batch reduction and DS + 1 for the two positive incremental ones")
def test_min_t_correspondence():
    offsets = {Construction.BAT: 0, Construction.INC_HIST_POS: 1, Construction.INC_NOHIST_POS: 1}
    for idx, g in enumerate(GRAPHS):
        ds = brute_force_dominating_set(g)[0]
        for lemma, offset in offsets.items():
            art = reduce_graph(lemma, g, g.n, seed=idx)
            _, t = solve_min_t(art.instance)
            assert t == ds + offset, (g, lemma, ds, t)
            if lemma is Construction.BAT:
                assert solve_batch_min_t(art.instance.demos, art.instance.f_t)[1] == ds


@criterion(6, "reference enumeration and backtracking agree on 500 random instances, 1 and 4 workers")
def test_strategy_equivalence():
    corpus = instance_corpus(500, seed=6, max_features=5, max_actions=3, max_t=3, max_c=3)
    assert all(len(i.features) <= 5 and len(i.actions) <= 3 and i.t <= 3 and (i.c or 0) <= 3
               for i in corpus)
    found = 0
    for inst in corpus:
        outcomes = [solve(inst, strategy, jobs=jobs).result
                    for strategy in (REFERENCE, BACKTRACKING) for jobs in (1, 4)]
        assert all(o == outcomes[0] for o in outcomes), inst
        found += outcomes[0] is not None
    # both outcomes must be well represented for the comparison to mean anything
    assert 100 < found < 400


@criterion(7, "consistency survives merging and splitting positive singleton demonstrations (1000 trials)")
def test_merge_split_invariance():
    rng = random.Random(8)
    features = ["f1", "f2", "f3", "f4"]
    actions = ["a1", "a2"]
    outcomes = set()
    for _ in range(1000):
        p = random_policy(rng, features, actions, rng.randint(0, 4), 2)
        singles = positive_singletons(rng, features, actions, rng.randint(1, 5))
        merged = merge_positive_singletons(singles)
        before = consistent_with_set(p, singles)
        assert before == consistent_with_demo(p, merged)
        assert consistent_with_set(p, split_positive(merged)) == before
        outcomes.add(before)
    assert outcomes == {True, False}


@criterion(8, "batch solving with 4 features, 2 actions and 1000 demonstrations takes < 5 s")
def test_fixed_parameter_scaling():
    rng = random.Random(9)
    features, actions = ["f1", "f2", "f3", "f4"], ["a1", "a2"]
    hidden = Policy.of(({"f1"}, "a1"), ({"f2", "f3"}, "a2"))
    demos = []
    while len(demos) < 1000:
        s = random_state(rng, features, 4)
        out = run_policy(hidden, s)
        if len(out) == 1:
            demos.append(Demonstration.pos((s, next(iter(out)))))
        elif not out:
            demos.append(Demonstration.neg((s, rng.choice(actions))))
    inst = batch(features, actions, demos, t=3, f_t=2)
    t0 = time.perf_counter()
    out = solve_batch(inst, BACKTRACKING)
    elapsed = time.perf_counter() - t0
    assert out.found and len(out.result) <= 2
    assert elapsed < 5.0, elapsed

    # a contradiction forces the full search space to be exhausted
    first_positive = next(d for d in demos if d.positive)
    contradiction = demos + [Demonstration.neg(first_positive.steps[0])]
    t0 = time.perf_counter()
    assert not solve_batch(batch(features, actions, contradiction, t=3, f_t=2), BACKTRACKING).found
    assert time.perf_counter() - t0 < 5.0
