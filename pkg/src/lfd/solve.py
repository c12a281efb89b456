"""Exact solvers for batch and incremental policy inference.

Two strategies are provided and must agree on every instance:

* ``REFERENCE`` enumerates every policy of at most ``t`` transitions drawn
  from the candidate transitions (triggers of at most ``f_t`` features) and
  tests it with the predicates in :mod:`lfd.core`.
* ``BACKTRACKING`` compiles the instance into covering requirements,
  per-transition admissibility, pairwise conflicts and an edit budget, and
  searches the same canonical order with pruning.

Both return the canonically least solution (fewest transitions, then
lexicographic), so the answer does not depend on the strategy or on the
number of worker processes.
"""
from __future__ import annotations

import atexit
import itertools
import multiprocessing as mp
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    Demonstration,
    LfdError,
    Policy,
    ProblemInstance,
    Transition,
    Variant,
    consistent_modulo,
    consistent_with_set,
    derivation_distance,
    is_valid,
    run_policy,
    satisfies,
    sort_labels,
)


class Strategy(str, Enum):
    REFERENCE = "reference"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolveStrategy:
    kind: Strategy = Strategy.BACKTRACKING
    restrict_features: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Strategy(self.kind))


REFERENCE = SolveStrategy(Strategy.REFERENCE)
BACKTRACKING = SolveStrategy(Strategy.BACKTRACKING)


@dataclass(frozen=True)
class SolveOutcome:
    result: Optional[Policy]  # None stands for bottom
    candidates: int = 0
    elapsed: float = 0.0

    @property
    def found(self) -> bool:
        return self.result is not None


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


_POOLS: dict = {}


def _pool(jobs: int) -> ProcessPoolExecutor:
    pool = _POOLS.get(jobs)
    if pool is None:
        pool = ProcessPoolExecutor(jobs, mp_context=mp.get_context("fork"))
        _POOLS[jobs] = pool
    return pool


@atexit.register
def _shutdown_pools():
    for pool in _POOLS.values():
        pool.shutdown(wait=False, cancel_futures=True)
    _POOLS.clear()


# --------------------------------------------------------------------------
# candidate transitions


def feature_universe(inst: ProblemInstance, restrict: bool) -> tuple:
    if not restrict:
        return inst.features
    if inst.variant is Variant.INC_NOHIST:
        raise LfdError("restrict_features needs a demonstration set to restrict against")
    used = set()
    for d in inst.all_demos():
        for s in d.states():
            used |= s
    return tuple(sort_labels(used))


def candidate_transitions(inst: ProblemInstance, restrict: bool = False) -> list:
    """All transitions a solution may use, in canonical order.

    With ``restrict`` the triggers are built only from features that occur in
    the demonstrations; the given policy's own transitions stay available so
    that unchanged transitions can still be kept at zero cost.
    """
    feats = feature_universe(inst, restrict)
    out = set()
    for size in range(1, min(inst.f_t, len(feats)) + 1):
        for trig in itertools.combinations(feats, size):
            trig = frozenset(trig)
            out.update(Transition(trig, a) for a in inst.actions)
    if restrict and inst.policy is not None:
        out.update(tr for tr in inst.policy if len(tr.trigger) <= inst.f_t)
    return sorted(out, key=lambda tr: tr.key)


# --------------------------------------------------------------------------
# reference enumeration


def _reference_accepts(inst: ProblemInstance, p: Policy) -> bool:
    if inst.variant is Variant.BATCH:
        return is_valid(p, inst.demos) and consistent_with_set(p, inst.demos)
    if len(p) > len(inst.policy):
        return False
    if inst.variant is Variant.INC_HIST:
        demos = inst.all_demos()
        if not (is_valid(p, demos) and consistent_with_set(p, demos)):
            return False
    elif not consistent_modulo(p, inst.policy, inst.d_new):
        return False
    return derivation_distance(inst.policy, p) <= inst.c


def _reference_chunk(args):
    inst, cands, m, lo, hi = args
    seen = 0
    if m == 0:
        p = Policy(())
        return (p if _reference_accepts(inst, p) else None), 1
    for first in range(lo, hi):
        head = cands[first]
        for rest in itertools.combinations(cands[first + 1:], m - 1):
            seen += 1
            p = Policy((head,) + rest)
            if _reference_accepts(inst, p):
                return p, seen
    return None, seen


# --------------------------------------------------------------------------
# backtracking over a compiled model


def _bits(xs: Iterable[int]) -> int:
    out = 0
    for x in xs:
        out |= 1 << x
    return out


@dataclass
class _Model:
    cands: list            # Transition, canonical order
    acts: list             # action index per candidate
    covers: list           # requirement bitmask per candidate
    dead_from: list        # requirements no candidate at index >= i can cover
    conflicts: list        # candidate bitmask per candidate
    aon_fires: list        # per candidate: bitmask over all-or-nothing states
    aon_need: list         # per all-or-nothing state: required action bitmask
    all_req: int
    max_cover: int
    cost_rows: Optional[list]  # per candidate: substitution cost vs each old transition
    n_old: int
    budget: Optional[int]
    max_size: int


def _compile(inst: ProblemInstance, cands: list) -> Optional[_Model]:
    """Translate the instance into constraints over candidate indices.

    Returns None when some requirement can never be met.
    """
    fidx = {f: i for i, f in enumerate(inst.features)}
    aidx = {a: i for i, a in enumerate(inst.actions)}
    all_acts = (1 << len(inst.actions)) - 1

    def fmask(s):
        return _bits(fidx[f] for f in s)

    # state mask -> [allowed actions, required actions, single-action?, all-or-nothing set]
    states: dict = {}

    def st(mask):
        if mask not in states:
            states[mask] = [all_acts, 0, False, 0]
        return states[mask]

    if inst.variant is Variant.INC_NOHIST:
        ref, dn = inst.policy, inst.d_new
        dn_states = [s for s, _ in dn.steps]
        for trig in {tr.trigger for tr in ref}:
            if any(trig <= s for s in dn_states):
                continue
            r = _bits(aidx[a] for a in run_policy(ref, trig))
            rec = st(fmask(trig))
            rec[0] &= r
            rec[1] |= r
        for s, a in dn.steps:
            rec = st(fmask(s))
            if dn.positive:
                rec[0] &= 1 << aidx[a]
                rec[1] |= 1 << aidx[a]
            else:
                r_acts = run_policy(ref, s)
                if a in r_acts or not r_acts:
                    rec[0] = 0
                else:
                    r = _bits(aidx[x] for x in r_acts)
                    rec[0] &= r
                    rec[3] = r
    else:
        demos = inst.demos if inst.variant is Variant.BATCH else inst.all_demos()
        for d in demos:
            for s, a in d.steps:
                rec = st(fmask(s))
                rec[2] = True
                if d.positive:
                    rec[0] &= 1 << aidx[a]
                    rec[1] |= 1 << aidx[a]
                else:
                    rec[0] &= ~(1 << aidx[a])

    cmask = [fmask(tr.trigger) for tr in cands]
    cact = [aidx[tr.action] for tr in cands]
    items = list(states.items())
    old = set(inst.policy.transitions) if inst.policy is not None else set()

    reqs = [(m, b) for m, rec in items for b in range(len(inst.actions)) if rec[1] >> b & 1]
    single = [m for m, rec in items if rec[2]]
    aon = [(m, rec[3]) for m, rec in items if rec[3]]

    keep = []
    for i, tr in enumerate(cands):
        tm, b = cmask[i], cact[i]
        if any(tm & ~m == 0 and not rec[0] >> b & 1 for m, rec in items):
            continue
        relevant = any(tm & ~m == 0 and rb == b for m, rb in reqs) or any(
            tm & ~m == 0 for m, _ in aon)
        # unchanged transitions of the given policy can be kept at no edit cost
        if relevant or tr in old:
            keep.append(i)

    kc = [cands[i] for i in keep]
    km = [cmask[i] for i in keep]
    ka = [cact[i] for i in keep]
    n = len(kc)
    covers = [_bits(r for r, (m, b) in enumerate(reqs) if km[i] & ~m == 0 and ka[i] == b)
              for i in range(n)]
    all_req = (1 << len(reqs)) - 1
    last = [-1] * len(reqs)
    for i in range(n):
        for r in range(len(reqs)):
            if covers[i] >> r & 1:
                last[r] = i
    if any(x < 0 for x in last):
        return None
    dead_from = [_bits(r for r in range(len(reqs)) if last[r] < i) for i in range(n + 1)]
    fires = [_bits(k for k, m in enumerate(single) if km[i] & ~m == 0) for i in range(n)]
    conflicts = [
        _bits(j for j in range(n) if ka[j] != ka[i] and fires[i] & fires[j]) for i in range(n)
    ]
    aon_fires = [_bits(k for k, (m, _) in enumerate(aon) if km[i] & ~m == 0) for i in range(n)]

    cost_rows, n_old, budget = None, 0, None
    max_size = inst.t
    if inst.policy is not None and inst.variant is not Variant.BATCH:
        olds = inst.policy.transitions
        n_old, budget = len(olds), inst.c
        cost_rows = [[(o.trigger != tr.trigger) + (o.action != tr.action) for o in olds]
                     for tr in kc]
        max_size = min(max_size, n_old)
    return _Model(kc, ka, covers, dead_from, conflicts, aon_fires, [r for _, r in aon],
                  all_req, max((c.bit_count() for c in covers), default=0),
                  cost_rows, n_old, budget, min(max_size, n))


def _match_cost(model: _Model, chosen: list) -> int:
    if not chosen:
        return 0
    cost = np.array([model.cost_rows[i] for i in chosen])
    r, c = linear_sum_assignment(cost)
    return int(cost[r, c].sum())


def _aon_ok(model: _Model, chosen: list) -> bool:
    for k, need in enumerate(model.aon_need):
        fired = _bits(model.acts[i] for i in chosen if model.aon_fires[i] >> k & 1)
        if fired and fired != need:
            return False
    return True


def _backtrack_chunk(args):
    model, m, lo, hi = args
    counter = [0]
    chosen: list = []

    def over_budget(depth_after: int) -> bool:
        if model.budget is None:
            return False
        return (model.n_old - m) + _match_cost(model, chosen) > model.budget

    def dfs(start: int, depth: int, cov: int, conf: int, stop: int) -> bool:
        remaining = m - depth - 1
        for i in range(start, stop):
            if conf >> i & 1:
                continue
            counter[0] += 1
            ncov = cov | model.covers[i]
            open_ = model.all_req & ~ncov
            if open_:
                if remaining == 0 or open_ & model.dead_from[i + 1]:
                    continue
                if open_.bit_count() > remaining * model.max_cover:
                    continue
            chosen.append(i)
            if over_budget(depth + 1):
                chosen.pop()
                continue
            if remaining == 0:
                if _aon_ok(model, chosen):
                    return True
            elif dfs(i + 1, depth + 1, ncov, conf | model.conflicts[i],
                     len(model.cands) - remaining + 1):
                return True
            chosen.pop()
        return False

    if m == 0:
        ok = model.all_req == 0 and (model.budget is None or model.n_old <= model.budget)
        return ([] if ok else None), 1
    found = dfs(lo, 0, 0, 0, min(hi, len(model.cands) - m + 1))
    return (list(chosen) if found else None), counter[0]


# --------------------------------------------------------------------------
# driver


def _chunks(n_first: int, jobs: int) -> list:
    if n_first <= 0:
        return []
    pieces = min(n_first, max(1, jobs * 4))
    step, extra = divmod(n_first, pieces)
    out, lo = [], 0
    for k in range(pieces):
        hi = lo + step + (1 if k < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def _run_chunks(worker, payloads: list, jobs: int):
    """Run ``payloads`` in order; return the first hit and the work done."""
    seen = 0
    if jobs <= 1 or len(payloads) <= 1:
        for args in payloads:
            hit, n = worker(args)
            seen += n
            if hit is not None:
                return hit, seen
        return None, seen
    futures = [_pool(jobs).submit(worker, args) for args in payloads]
    result = None
    for fut in futures:
        if result is not None:
            fut.cancel()
            continue
        hit, n = fut.result()
        seen += n
        if hit is not None:
            result = hit
    return result, seen


def check_preconditions(inst: ProblemInstance) -> None:
    if inst.variant is Variant.INC_HIST:
        if not (is_valid(inst.policy, inst.demos) and consistent_with_set(inst.policy, inst.demos)):
            raise LfdError("the given policy is not valid for and consistent with D")


def solve(inst: ProblemInstance, strategy: SolveStrategy = BACKTRACKING, *, jobs: int = 1,
          check: bool = True) -> SolveOutcome:
    """Solve any instance variant; see the module docstring for the contract."""
    t0 = time.perf_counter()
    if check:
        check_preconditions(inst)
    cands = candidate_transitions(inst, strategy.restrict_features)
    seen = 0
    result = None
    if strategy.kind is Strategy.REFERENCE:
        for m in range(0, min(inst.t, len(cands)) + 1):
            payloads = [(inst, cands, 0, 0, 0)] if m == 0 else [
                (inst, cands, m, lo, hi) for lo, hi in _chunks(len(cands) - m + 1, jobs)]
            result, n = _run_chunks(_reference_chunk, payloads, jobs)
            seen += n
            if result is not None:
                break
    else:
        model = _compile(inst, cands)
        if model is not None:
            for m in range(0, model.max_size + 1):
                payloads = [(model, 0, 0, 0)] if m == 0 else [
                    (model, m, lo, hi) for lo, hi in _chunks(len(model.cands) - m + 1, jobs)]
                hit, n = _run_chunks(_backtrack_chunk, payloads, jobs)
                seen += n
                if hit is not None:
                    result = Policy(tuple(model.cands[i] for i in hit))
                    break
    if result is not None and not satisfies(inst, result):
        raise RuntimeError(f"solver returned an unsound policy {result!r}")
    return SolveOutcome(result, seen, time.perf_counter() - t0)


def solve_batch(inst: ProblemInstance, strategy: SolveStrategy = BACKTRACKING, **kw) -> SolveOutcome:
    if inst.variant is not Variant.BATCH:
        raise LfdError("solve_batch needs a batch instance")
    return solve(inst, strategy, **kw)


def solve_inc_hist(inst: ProblemInstance, strategy: SolveStrategy = BACKTRACKING, **kw) -> SolveOutcome:
    if inst.variant is not Variant.INC_HIST:
        raise LfdError("solve_inc_hist needs an inc-hist instance")
    return solve(inst, strategy, **kw)


def solve_inc_nohist(inst: ProblemInstance, strategy: SolveStrategy = BACKTRACKING, **kw) -> SolveOutcome:
    if inst.variant is not Variant.INC_NOHIST:
        raise LfdError("solve_inc_nohist needs an inc-nohist instance")
    return solve(inst, strategy, **kw)


def default_t_max(inst: ProblemInstance) -> int:
    """Batch: one transition per distinct demo state suffices.
    Incremental: a derived policy never outgrows the given one."""
    if inst.variant is Variant.BATCH:
        return max(1, len({s for d in inst.demos for s in d.states()}))
    return max(1, len(inst.policy))


def solve_min_t(inst: ProblemInstance, strategy: SolveStrategy = BACKTRACKING, *,
                t_max: Optional[int] = None, **kw) -> tuple:
    """Smallest ``t`` (up to ``t_max``) admitting a solution.

    Returns ``(outcome, t)`` with ``t`` None on bottom.  The canonical
    solution already has the fewest transitions, so one search at ``t_max``
    gives the same answer as trying ``t = 1, 2, ...`` in turn.
    """
    t_max = default_t_max(inst) if t_max is None else t_max
    if t_max < 1:
        raise LfdError("t_max must be at least 1")
    out = solve(inst.replace(t=t_max), strategy, **kw)
    if out.result is None:
        return out, None
    return out, max(1, len(out.result))


def solve_batch_min_t(demos: Iterable[Demonstration], f_t: int, t_max: Optional[int] = None, *,
                      features=None, actions=None,
                      strategy: SolveStrategy = BACKTRACKING, **kw) -> tuple:
    """Minimum-``t`` batch learning; returns ``(policy, t)`` or ``(None, None)``."""
    demos = tuple(demos)
    if features is None:
        features = set().union(*(s for d in demos for s in d.states()))
    if actions is None:
        actions = {a for d in demos for _, a in d.steps}
    inst = ProblemInstance(Variant.BATCH, tuple(features), tuple(actions), demos, t=1, f_t=f_t)
    out, t = solve_min_t(inst, strategy, t_max=t_max, **kw)
    return out.result, t
