"""JSON documents for instances and policies, plus the shipped fixtures.

Instance documents look like::

    {"problem": "batch", "features": ["f1", "f2"], "actions": ["a"],
     "demonstrations": [{"type": "pos", "steps": [{"state": ["f1"], "action": "a"}]}],
     "limits": {"t": 1, "f_t": 1}}

with optional ``policy``, ``d_new``, ``candidate`` (a policy under test, used
by ``lfd check``) and ``meta`` (free-form, e.g. reduction provenance).
Serialization always emits the canonical form: every list sorted.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Any, Mapping, Optional

from .core import Demonstration, LfdError, Policy, ProblemInstance, Transition, Variant, sort_labels


def _labels(xs, what: str) -> list:
    if not isinstance(xs, list) or not all(isinstance(x, str) and x for x in xs):
        raise LfdError(f"{what} must be a list of non-empty strings")
    return xs


def policy_to_json(p: Policy) -> dict:
    return {"transitions": [{"trigger": sort_labels(tr.trigger), "action": tr.action} for tr in p]}


def policy_from_json(doc: Mapping) -> Policy:
    try:
        return Policy(tuple(Transition(frozenset(_labels(tr["trigger"], "trigger")), tr["action"])
                            for tr in doc["transitions"]))
    except (KeyError, TypeError) as exc:
        raise LfdError(f"malformed policy: {exc!r}") from None


def demo_to_json(d: Demonstration) -> dict:
    return {"type": d.kind.value,
            "steps": [{"state": sort_labels(s), "action": a} for s, a in d.steps]}


def demo_from_json(doc: Mapping) -> Demonstration:
    try:
        steps = tuple((frozenset(_labels(st["state"], "state")), st["action"]) for st in doc["steps"])
        return Demonstration(doc["type"], steps)
    except (KeyError, TypeError) as exc:
        raise LfdError(f"malformed demonstration: {exc!r}") from None


def _demo_sort_key(d: Demonstration):
    return d.key


@dataclass(frozen=True)
class Entities:
    """Everything a document may carry, before assembling an instance."""
    problem: Optional[Variant]
    features: tuple
    actions: tuple
    demos: tuple
    policy: Optional[Policy]
    d_new: Optional[Demonstration]
    candidate: Optional[Policy]
    limits: dict
    meta: Optional[dict]

    def check_symbols(self):
        F, A = set(self.features), set(self.actions)
        pols = [p for p in (self.policy, self.candidate) if p is not None]
        demos = list(self.demos) + ([self.d_new] if self.d_new else [])
        for tr in (tr for p in pols for tr in p):
            if not tr.trigger <= F or tr.action not in A:
                raise LfdError(f"transition {tr!r} uses undeclared symbols")
        for s, a in (st for d in demos for st in d.steps):
            if not s <= F or a not in A:
                raise LfdError(f"demonstration step ({sort_labels(s)}, {a}) uses undeclared symbols")


def parse_entities(doc: Any) -> Entities:
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise LfdError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise LfdError("an instance document must be a JSON object")
    try:
        problem = Variant(doc["problem"]) if "problem" in doc else None
    except ValueError:
        raise LfdError(f"unknown problem {doc['problem']!r}") from None
    features = tuple(_labels(doc.get("features", []), "features"))
    actions = tuple(_labels(doc.get("actions", []), "actions"))
    demos = doc.get("demonstrations", [])
    if not isinstance(demos, list):
        raise LfdError("demonstrations must be a list")
    limits = doc.get("limits", {})
    if not isinstance(limits, Mapping) or set(limits) - {"t", "f_t", "c"}:
        raise LfdError("limits may only hold t, f_t and c")
    ent = Entities(
        problem, features, actions,
        tuple(demo_from_json(d) for d in demos),
        policy_from_json(doc["policy"]) if doc.get("policy") is not None else None,
        demo_from_json(doc["d_new"]) if doc.get("d_new") is not None else None,
        policy_from_json(doc["candidate"]) if doc.get("candidate") is not None else None,
        dict(limits), doc.get("meta"))
    ent.check_symbols()
    return ent


def instance_from_entities(ent: Entities) -> ProblemInstance:
    if ent.problem is None:
        raise LfdError("the document does not name a problem")
    lim = ent.limits
    if "t" not in lim or "f_t" not in lim:
        raise LfdError("limits.t and limits.f_t are required")
    return ProblemInstance(ent.problem, ent.features, ent.actions, ent.demos, ent.policy,
                           ent.d_new, lim["t"], lim["f_t"], lim.get("c"))


def instance_from_json(doc: Any) -> ProblemInstance:
    return instance_from_entities(parse_entities(doc))


def instance_to_json(inst: ProblemInstance, *, candidate: Optional[Policy] = None,
                     meta: Optional[dict] = None) -> dict:
    doc = {"problem": inst.variant.value, "features": list(inst.features),
           "actions": list(inst.actions),
           "demonstrations": [demo_to_json(d) for d in sorted(inst.demos, key=_demo_sort_key)]}
    if inst.policy is not None:
        doc["policy"] = policy_to_json(inst.policy)
    if inst.d_new is not None:
        doc["d_new"] = demo_to_json(inst.d_new)
    doc["limits"] = {"t": inst.t, "f_t": inst.f_t}
    if inst.c is not None:
        doc["limits"]["c"] = inst.c
    if candidate is not None:
        doc["candidate"] = policy_to_json(candidate)
    if meta is not None:
        doc["meta"] = meta
    return doc


def dumps(doc: Any) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# --------------------------------------------------------------------------
# shipped fixtures


def data_text(name: str) -> str:
    return resources.files("lfd").joinpath("data", name).read_text(encoding="utf-8")


RESULT_FILES = {name: f"{name}_results.json" for name in (
    "lfdbat", "lfdinchist_pos", "lfdinchist_neg", "lfdincnohist_pos", "lfdincnohist_neg", "example_map")}


def worked_example() -> dict:
    """Named entities of the raincoat/sunglasses example: d1..d4, p1, p2, F, A."""
    doc = json.loads(data_text("worked_example.json"))
    out = {"F": tuple(doc["features"]), "A": tuple(doc["actions"])}
    out.update({k: demo_from_json(v) for k, v in doc["demonstrations"].items()})
    out.update({k: policy_from_json(v) for k, v in doc["policies"].items()})
    return out

