"""Graphs, dominating sets, and reductions from Dominating Set to LfD problems.

Vertex ``i`` (0-based) is represented by feature ``f{i+1}``; the helper
features used by the incremental constructions are ``fx`` and ``fy``.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .core import (
    Demonstration,
    Kind,
    LfdError,
    Policy,
    ProblemInstance,
    Transition,
    Variant,
    satisfies,
)

FX, FY = "fx", "fy"


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 0:
            raise LfdError(f"bad vertex count {self.n!r}")
        norm = set()
        for e in self.edges:
            u, v = e
            if u == v:
                raise LfdError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise LfdError(f"edge {e} out of range for n={self.n}")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def neighbors(self, v: int) -> set:
        return {b if a == v else a for a, b in self.edges if v in (a, b)}

    def degree(self, v: int) -> int:
        return sum(1 for e in self.edges if v in e)

    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.n)), default=0)

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_json(cls, doc: dict) -> "Graph":
        try:
            return cls(int(doc["n"]), frozenset(tuple(e) for e in doc.get("edges", [])))
        except (KeyError, TypeError, ValueError) as exc:
            raise LfdError(f"malformed graph document: {exc}") from None


def complete(n: int) -> Graph:
    return Graph(n, frozenset(itertools.combinations(range(n), 2)))


def path(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def cycle(n: int) -> Graph:
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def closed_neighborhood(g: Graph, v: int) -> frozenset:
    if not 0 <= v < g.n:
        raise LfdError(f"vertex {v} out of range for n={g.n}")
    return frozenset({v} | g.neighbors(v))


def is_dominating(g: Graph, vs) -> bool:
    vs = set(vs)
    return all(closed_neighborhood(g, v) & vs for v in range(g.n))


def brute_force_dominating_set(g: Graph) -> tuple:
    """Minimum dominating set by trying subsets in order of size.

    Returns ``(size, vertices)``; the witness is the lexicographically first
    minimum set.
    """
    if g.n < 1:
        raise LfdError("graph needs at least one vertex")
    nbhd = [sum(1 << u for u in closed_neighborhood(g, v)) for v in range(g.n)]
    full = (1 << g.n) - 1
    for size in range(1, g.n + 1):
        for combo in itertools.combinations(range(g.n), size):
            covered = 0
            for v in combo:
                covered |= nbhd[v]
            if covered == full:
                return size, frozenset(combo)
    raise AssertionError("unreachable: V dominates itself")


def all_graphs(n: int):
    """Every labelled graph on ``n`` vertices."""
    pairs = list(itertools.combinations(range(n), 2))
    for bits in range(1 << len(pairs)):
        yield Graph(n, frozenset(p for k, p in enumerate(pairs) if bits >> k & 1))


# --------------------------------------------------------------------------
# generators


def uniform_random(n: int, edge_prob: float, seed: int = 0) -> Graph:
    if n < 1 or not 0.0 <= edge_prob <= 1.0:
        raise LfdError("need n >= 1 and 0 <= edge_prob <= 1")
    rng = random.Random(seed)
    return Graph(n, frozenset(e for e in itertools.combinations(range(n), 2)
                              if rng.random() < edge_prob))


def grid_subgraph(rows: int, cols: int, keep_prob: float = 1.0, seed: int = 0) -> Graph:
    """Random subgraph of a ``rows x cols`` grid with maximum degree 3.

    Planar by construction.  Edges at vertices left with degree 4 are dropped
    (highest-numbered neighbour first) until every degree is at most 3.
    """
    if rows < 1 or cols < 1 or not 0.0 <= keep_prob <= 1.0:
        raise LfdError("need rows, cols >= 1 and 0 <= keep_prob <= 1")
    rng = random.Random(seed)
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    kept = {e for e in sorted(edges) if rng.random() < keep_prob}
    for v in range(rows * cols):
        inc = sorted((e for e in kept if v in e), key=lambda e: e[0] + e[1] - v)
        while len(inc) > 3:
            kept.discard(inc.pop())
    return Graph(rows * cols, frozenset(kept))


GRAPH_MODELS = {"uniform_random": uniform_random, "grid_subgraph": grid_subgraph}


def gen_graph(model: str, seed: int = 0, **params) -> Graph:
    try:
        fn = GRAPH_MODELS[model]
    except KeyError:
        raise LfdError(f"unknown graph model {model!r}") from None
    return fn(seed=seed, **params)


# --------------------------------------------------------------------------
# reductions


class Construction(str, Enum):
    BAT = "bat"
    INC_HIST_POS = "inchist-pos"
    INC_HIST_NEG = "inchist-neg"
    INC_NOHIST_POS = "incnohist-pos"
    INC_NOHIST_NEG = "incnohist-neg"


@dataclass(frozen=True)
class ReductionArtifact:
    instance: ProblemInstance
    vertex_features: tuple  # vertex i -> feature label
    lemma: Construction
    k: int
    graph: Graph
    seed: Optional[int] = None

    def vertex_of(self, feature: str) -> Optional[int]:
        try:
            return self.vertex_features.index(feature)
        except ValueError:
            return None

    def meta(self) -> dict:
        return {"lemma": self.lemma.value, "k": self.k, "seed": self.seed,
                "vertex_features": list(self.vertex_features), "graph": self.graph.to_json()}


def vertex_feature(v: int) -> str:
    return f"f{v + 1}"


def _prepare(g: Graph, k: int, pd3: bool) -> tuple:
    if not isinstance(k, int) or k < 1:
        raise LfdError(f"k must be a positive integer, got {k!r}")
    if g.n < 1:
        raise LfdError("graph needs at least one vertex")
    if pd3 and g.max_degree() > 3:
        raise LfdError("graph has a vertex of degree > 3")
    vf = tuple(vertex_feature(v) for v in range(g.n))
    states = [frozenset(vf[u] for u in closed_neighborhood(g, v)) for v in range(g.n)]
    return vf, states


def _distinct_vertices(g: Graph, count: int, seed: int) -> list:
    # seed-policy vertices are drawn without replacement so the policy keeps its size
    return random.Random(seed).sample(range(g.n), min(count, g.n))


def reduce_ds_to_batch(g: Graph, k: int, *, pd3: bool = False) -> ReductionArtifact:
    vf, states = _prepare(g, k, pd3)
    demos = tuple(Demonstration(Kind.POSITIVE, ((s, "a"),)) for s in states)
    inst = ProblemInstance(Variant.BATCH, vf, ("a",), demos, t=k, f_t=1)
    return ReductionArtifact(inst, vf, Construction.BAT, k, g)


def reduce_ds_to_inc_hist_pos(g: Graph, k: int, seed: int = 0, *, pd3: bool = False) -> ReductionArtifact:
    vf, states = _prepare(g, k, pd3)
    demos = tuple(Demonstration(Kind.POSITIVE, ((s | {FX}, "a1"),)) for s in states)
    seed_policy = Policy((Transition(frozenset({FX}), "a1"),) + tuple(
        Transition(frozenset({vf[v]}), "a1") for v in _distinct_vertices(g, k, seed)))
    d_new = Demonstration(Kind.POSITIVE, ((frozenset({FX, FY}), "a2"),))
    inst = ProblemInstance(Variant.INC_HIST, vf + (FX, FY), ("a1", "a2"), demos, seed_policy,
                           d_new, t=k + 1, f_t=1, c=k + 2)
    return ReductionArtifact(inst, vf, Construction.INC_HIST_POS, k, g, seed)


def reduce_ds_to_inc_hist_neg(g: Graph, k: int, seed: int = 0, *, pd3: bool = False) -> ReductionArtifact:
    vf, states = _prepare(g, k, pd3)
    demos = tuple(Demonstration(Kind.POSITIVE, ((s | {FX}, "a"),)) for s in states)
    seed_policy = Policy((Transition(frozenset({FX}), "a"),) + tuple(
        Transition(frozenset({vf[v]}), "a") for v in _distinct_vertices(g, k - 1, seed)))
    d_new = Demonstration(Kind.NEGATIVE, ((frozenset({FX}), "a"),))
    inst = ProblemInstance(Variant.INC_HIST, vf + (FX,), ("a",), demos, seed_policy, d_new,
                           t=k, f_t=1, c=k)
    return ReductionArtifact(inst, vf, Construction.INC_HIST_NEG, k, g, seed)


def reduce_ds_to_inc_nohist_pos(g: Graph, k: int, *, pd3: bool = False) -> ReductionArtifact:
    vf, states = _prepare(g, k, pd3)
    # The extra transition is triggered by {fx}: a trigger contained in d_new's
    # state is exempt from replication, so it adds no obligation beyond d_new.
    policy = Policy(tuple(Transition(s, "a") for s in states) + (Transition(frozenset({FX}), "a"),))
    d_new = Demonstration(Kind.POSITIVE, ((frozenset({FX}), "a"),))
    inst = ProblemInstance(Variant.INC_NOHIST, vf + (FX,), ("a",), (), policy, d_new,
                           t=k + 1, f_t=1, c=g.n + 1)
    return ReductionArtifact(inst, vf, Construction.INC_NOHIST_POS, k, g)


def reduce_ds_to_inc_nohist_neg(g: Graph, k: int, *, pd3: bool = False) -> ReductionArtifact:
    vf, states = _prepare(g, k, pd3)
    policy = Policy(tuple(Transition(s, "a") for s in states))
    d_new = Demonstration(Kind.NEGATIVE, ((frozenset({FX}), "a"),))
    inst = ProblemInstance(Variant.INC_NOHIST, vf + (FX,), ("a",), (), policy, d_new,
                           t=k, f_t=1, c=g.n)
    return ReductionArtifact(inst, vf, Construction.INC_NOHIST_NEG, k, g)


REDUCTIONS = {
    Construction.BAT: reduce_ds_to_batch,
    Construction.INC_HIST_POS: reduce_ds_to_inc_hist_pos,
    Construction.INC_HIST_NEG: reduce_ds_to_inc_hist_neg,
    Construction.INC_NOHIST_POS: reduce_ds_to_inc_nohist_pos,
    Construction.INC_NOHIST_NEG: reduce_ds_to_inc_nohist_neg,
}


def reduce_graph(lemma, g: Graph, k: int, seed: int = 0, *, pd3: bool = False) -> ReductionArtifact:
    lemma = Construction(lemma)
    fn = REDUCTIONS[lemma]
    if lemma in (Construction.INC_HIST_POS, Construction.INC_HIST_NEG):
        return fn(g, k, seed, pd3=pd3)
    return fn(g, k, pd3=pd3)


def extract_dominating_set(art: ReductionArtifact, solution: Policy) -> frozenset:
    """Read a dominating set of size <= k off a verified solution.

    Transitions whose triggers mention ``fx``/``fy`` only serve ``d_new``
    and are skipped.
    """
    if not satisfies(art.instance, solution):
        raise LfdError("policy is not a solution of the reduced instance")
    vertices = set()
    for tr in solution:
        vs = [art.vertex_of(f) for f in tr.trigger]
        if all(v is not None for v in vs):
            vertices.update(vs)
    if len(vertices) > art.k or not is_dominating(art.graph, vertices):
        raise LfdError(f"extracted vertex set {sorted(vertices)} is not a dominating set of size <= {art.k}")
    return frozenset(vertices)
