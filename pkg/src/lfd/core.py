"""Domain model for learning policies from demonstrations.

States, triggers and policies are plain frozensets of string labels; a policy
is a single-state transducer, i.e. an unordered set of (trigger, action)
transitions.  Everything here is immutable and side-effect free.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment


class LfdError(ValueError):
    """Raised for malformed entities or instances."""


_CHUNK = re.compile(r"(\d+)")


def label_key(label: str) -> tuple:
    """Natural sort key: ``f2 < f10 < fx``."""
    return tuple((0, int(c)) if c.isdigit() else (1, c) for c in _CHUNK.split(label) if c)


def sort_labels(labels: Iterable[str]) -> list[str]:
    return sorted(labels, key=label_key)


def set_key(labels: Iterable[str]) -> tuple:
    return tuple(label_key(x) for x in sort_labels(labels))


State = frozenset  # frozenset[str]


class Kind(str, Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"


@dataclass(frozen=True)
class Transition:
    trigger: frozenset
    action: str

    def __post_init__(self):
        object.__setattr__(self, "trigger", frozenset(self.trigger))
        if not self.trigger:
            raise LfdError("transition trigger must be non-empty")
        if not self.action:
            raise LfdError("transition action must be a non-empty label")

    @property
    def key(self) -> tuple:
        return (set_key(self.trigger), label_key(self.action))

    def __repr__(self):
        return f"({{{','.join(sort_labels(self.trigger))}}},{self.action})"


def T(trigger: Iterable[str], action: str) -> Transition:
    return Transition(frozenset(trigger), action)


@dataclass(frozen=True)
class Policy:
    """Set of transitions; duplicates collapse.  ``transitions`` is kept in
    canonical order so iteration and comparison are deterministic."""

    transitions: tuple = ()

    def __post_init__(self):
        ts = frozenset(self.transitions)
        object.__setattr__(self, "transitions", tuple(sorted(ts, key=lambda t: t.key)))

    @classmethod
    def of(cls, *pairs) -> "Policy":
        return cls(tuple(T(trig, act) for trig, act in pairs))

    def __len__(self):
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)

    @property
    def key(self) -> tuple:
        """Canonical order: fewer transitions first, then lexicographic."""
        return (len(self.transitions), tuple(t.key for t in self.transitions))

    def features(self) -> frozenset:
        return frozenset().union(*(t.trigger for t in self.transitions))

    def __repr__(self):
        return "{" + ", ".join(map(repr, self.transitions)) + "}"


@dataclass(frozen=True)
class Demonstration:
    kind: Kind
    steps: tuple  # of (frozenset state, action)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        steps = tuple((frozenset(s), a) for s, a in self.steps)
        if not steps:
            raise LfdError("a demonstration needs at least one step")
        for s, a in steps:
            if not s:
                raise LfdError("demonstration states must be non-empty")
            if not a:
                raise LfdError("demonstration actions must be non-empty labels")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def pos(cls, *steps) -> "Demonstration":
        return cls(Kind.POSITIVE, tuple(steps))

    @classmethod
    def neg(cls, *steps) -> "Demonstration":
        return cls(Kind.NEGATIVE, tuple(steps))

    @property
    def positive(self) -> bool:
        return self.kind is Kind.POSITIVE

    @property
    def key(self) -> tuple:
        return (self.kind.value, tuple((set_key(s), label_key(a)) for s, a in self.steps))

    def states(self):
        return (s for s, _ in self.steps)


# --------------------------------------------------------------------------
# predicates


def triggers(tr: Transition, s: frozenset) -> bool:
    return tr.trigger <= s


def run_policy(p: Policy, s: frozenset) -> frozenset:
    return frozenset(tr.action for tr in p.transitions if tr.trigger <= s)


def is_valid(p: Policy, demos: Iterable[Demonstration]) -> bool:
    return all(len(run_policy(p, s)) <= 1 for d in demos for s in d.states())


def consistent_with_demo(p: Policy, d: Demonstration) -> bool:
    if d.positive:
        return all(run_policy(p, s) == {a} for s, a in d.steps)
    return all(a not in run_policy(p, s) for s, a in d.steps)


def consistent_with_set(p: Policy, demos: Iterable[Demonstration]) -> bool:
    return all(consistent_with_demo(p, d) for d in demos)


def consistent_modulo(candidate: Policy, reference: Policy, d: Demonstration) -> bool:
    """True iff ``candidate`` replicates ``reference`` modulo ``d``.

    Reference trigger-sets contained in some state of ``d`` are exempt from
    the replication requirement; the states of ``d`` themselves are governed
    by the demonstration instead.
    """
    demo_states = [s for s, _ in d.steps]
    for trig in {tr.trigger for tr in reference.transitions}:
        if any(trig <= s for s in demo_states):
            continue
        if run_policy(candidate, trig) != run_policy(reference, trig):
            return False
    for s, a in d.steps:
        got = run_policy(candidate, s)
        if d.positive:
            if got != {a}:
                return False
        else:
            ref = run_policy(reference, s)
            if got and not (a not in ref and got == ref):
                return False
    return True


def _pair_cost(old: Transition, new: Transition) -> int:
    return (old.trigger != new.trigger) + (old.action != new.action)


def derivation_distance(old: Policy, new: Policy) -> float:
    """Fewest substitutions/deletions turning ``old`` into ``new``.

    Trigger and action substitutions count separately; insertions are not
    allowed, so the result is ``math.inf`` when ``new`` is larger.
    """
    n_old, n_new = len(old), len(new)
    if n_new > n_old:
        return math.inf
    if n_new == 0:
        return n_old
    cost = np.array([[_pair_cost(o, n) for o in old.transitions] for n in new.transitions])
    rows, cols = linear_sum_assignment(cost)
    return int(cost[rows, cols].sum()) + (n_old - n_new)


def derivation_distance_exhaustive(old: Policy, new: Policy) -> float:
    """Same as :func:`derivation_distance` by trying every injective matching."""
    n_old, n_new = len(old), len(new)
    if n_new > n_old:
        return math.inf
    best = math.inf
    for perm in itertools.permutations(range(n_old), n_new):
        c = sum(_pair_cost(old.transitions[j], new.transitions[i]) for i, j in enumerate(perm))
        best = min(best, c)
    return best + (n_old - n_new)


def merge_positive_singletons(demos: Iterable[Demonstration]) -> Demonstration:
    steps = []
    for d in demos:
        if not d.positive or len(d.steps) != 1:
            raise LfdError("merge needs positive single-step demonstrations")
        steps.append(d.steps[0])
    if not steps:
        raise LfdError("nothing to merge")
    steps.sort(key=lambda st: (set_key(st[0]), label_key(st[1])))
    return Demonstration(Kind.POSITIVE, tuple(steps))


def split_positive(d: Demonstration) -> list[Demonstration]:
    if not d.positive:
        raise LfdError("only positive demonstrations can be split")
    return [Demonstration(Kind.POSITIVE, (st,)) for st in d.steps]


# --------------------------------------------------------------------------
# problem instances


class Variant(str, Enum):
    BATCH = "batch"
    INC_HIST = "inc-hist"
    INC_NOHIST = "inc-nohist"


@dataclass(frozen=True)
class ParameterVector:
    nF: int
    nA: int
    nd: int
    ld: int
    feap: int
    t: Optional[int] = None
    ft: Optional[int] = None
    c: Optional[int] = None

    def by_name(self) -> dict:
        """Values keyed by the lattice parameter names."""
        return {"F": self.nF, "A": self.nA, "nd": self.nd, "ld": self.ld,
                "feap": self.feap, "t": self.t, "f_t": self.ft, "c": self.c}


@dataclass(frozen=True)
class ProblemInstance:
    variant: Variant
    features: tuple
    actions: tuple
    demos: tuple = ()
    policy: Optional[Policy] = None
    d_new: Optional[Demonstration] = None
    t: int = 1
    f_t: int = 1
    c: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "features", tuple(sort_labels(self.features)))
        object.__setattr__(self, "actions", tuple(sort_labels(self.actions)))
        object.__setattr__(self, "demos", tuple(self.demos))
        self._validate()

    def _validate(self):
        F, A = set(self.features), set(self.actions)
        if len(F) != len(self.features) or len(A) != len(self.actions):
            raise LfdError("duplicate feature or action labels")
        if not all(self.features) or not all(self.actions):
            raise LfdError("labels must be non-empty")
        for name in ("t", "f_t"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise LfdError(f"{name} must be a positive integer, got {v!r}")
        inc = self.variant is not Variant.BATCH
        if inc:
            if not isinstance(self.c, int) or self.c < 1:
                raise LfdError(f"c must be a positive integer, got {self.c!r}")
            if self.policy is None or self.d_new is None:
                raise LfdError(f"{self.variant.value} needs a policy and d_new")
        else:
            if self.policy is not None or self.d_new is not None or self.c is not None:
                raise LfdError("batch instances take only demonstrations, t and f_t")
        if self.variant is Variant.INC_NOHIST and self.demos:
            raise LfdError("inc-nohist instances carry no demonstration history")

        def check_demo(d):
            for s, a in d.steps:
                if not s <= F:
                    raise LfdError(f"unknown features {sort_labels(s - F)}")
                if a not in A:
                    raise LfdError(f"unknown action {a!r}")

        for d in self.all_demos():
            check_demo(d)
        if self.policy is not None:
            for tr in self.policy:
                if not tr.trigger <= F:
                    raise LfdError(f"unknown features {sort_labels(tr.trigger - F)}")
                if tr.action not in A:
                    raise LfdError(f"unknown action {tr.action!r}")
        if self.variant is Variant.INC_HIST and self.d_new in self.demos:
            raise LfdError("d_new must not already be in the demonstration set")

    def all_demos(self) -> tuple:
        """D plus d_new where present."""
        return self.demos + ((self.d_new,) if self.d_new is not None else ())

    def replace(self, **kw) -> "ProblemInstance":
        import dataclasses
        return dataclasses.replace(self, **kw)


def batch(features, actions, demos, t, f_t) -> ProblemInstance:
    return ProblemInstance(Variant.BATCH, tuple(features), tuple(actions), tuple(demos), t=t, f_t=f_t)


def inc_hist(features, actions, demos, policy, d_new, t, f_t, c) -> ProblemInstance:
    return ProblemInstance(Variant.INC_HIST, tuple(features), tuple(actions), tuple(demos),
                           policy, d_new, t, f_t, c)


def inc_nohist(features, actions, policy, d_new, t, f_t, c) -> ProblemInstance:
    return ProblemInstance(Variant.INC_NOHIST, tuple(features), tuple(actions), (),
                           policy, d_new, t, f_t, c)


def extract_parameters(inst: ProblemInstance) -> ParameterVector:
    demos = inst.all_demos()
    return ParameterVector(
        nF=len(inst.features),
        nA=len(inst.actions),
        nd=len(demos),
        ld=max((len(d.steps) for d in demos), default=0),
        feap=max((len(s) for d in demos for s in d.states()), default=0),
        t=inst.t,
        ft=inst.f_t,
        c=inst.c,
    )


def satisfies(inst: ProblemInstance, p: Policy) -> bool:
    """Whether ``p`` meets every clause of the instance's output contract."""
    if len(p) > inst.t or any(len(tr.trigger) > inst.f_t for tr in p):
        return False
    F, A = set(inst.features), set(inst.actions)
    if any(not tr.trigger <= F or tr.action not in A for tr in p):
        return False
    if inst.variant is Variant.BATCH:
        return is_valid(p, inst.demos) and consistent_with_set(p, inst.demos)
    if derivation_distance(inst.policy, p) > inst.c:
        return False
    if inst.variant is Variant.INC_HIST:
        demos = inst.all_demos()
        return is_valid(p, demos) and consistent_with_set(p, demos)
    return consistent_modulo(p, inst.policy, inst.d_new)
