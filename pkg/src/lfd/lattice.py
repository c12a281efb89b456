"""Intractability maps over parameter sets.

Raw results say a problem is fp-(in)tractable relative to a parameter set.
Tractability propagates to every superset and intractability to every
non-empty subset; :func:`propagate` closes a list of raw results under both
rules and records which results justify each cell.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

from .core import ProblemInstance, extract_parameters

UNBOUNDED = "@"


class LatticeError(ValueError):
    pass


class ResultKind(str, Enum):
    TRACTABLE = "tractable"
    INTRACTABLE = "intractable"
    CLASSICAL_NP_HARD = "classical_np_hard"


class Conjecture(str, Enum):
    NONE = "none"
    P_NEQ_NP = "P!=NP"
    FPT_NEQ_W1 = "FPT!=W[1]"

    @property
    def strength(self) -> int:
        return {"none": 0, "FPT!=W[1]": 1, "P!=NP": 2}[self.value]


class Status(str, Enum):
    TRACTABLE = "tractable"
    INTRACTABLE = "intractable"
    UNKNOWN = "unknown"
    CONFLICT = "conflict"


SYMBOLS = {Status.TRACTABLE: "√", Status.INTRACTABLE: "X", Status.UNKNOWN: "???",
           Status.CONFLICT: "!"}


@dataclass(frozen=True)
class RawResult:
    kind: ResultKind
    params: tuple  # sorted (name, "@" | int) pairs
    conjecture: Conjecture = Conjecture.NONE
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ResultKind(self.kind))
        object.__setattr__(self, "conjecture", Conjecture(self.conjecture or "none"))
        params = self.params.items() if isinstance(self.params, Mapping) else self.params
        norm = []
        for name, value in params:
            if value != UNBOUNDED and not (isinstance(value, int) and value >= 0):
                raise LatticeError(f"{self.label}: parameter {name} must be '@' or a count")
            norm.append((name, value))
        object.__setattr__(self, "params", tuple(sorted(norm)))
        if self.kind is ResultKind.TRACTABLE and self.conjecture is not Conjecture.NONE:
            raise LatticeError(f"{self.label}: tractability results carry no conjecture")
        if self.kind is ResultKind.INTRACTABLE and self.conjecture is Conjecture.NONE:
            raise LatticeError(f"{self.label}: intractability results need a conjecture")
        if self.kind is ResultKind.CLASSICAL_NP_HARD:
            if self.params:
                raise LatticeError(f"{self.label}: classical NP-hardness has no parameters")
            if self.conjecture is Conjecture.NONE:
                object.__setattr__(self, "conjecture", Conjecture.P_NEQ_NP)

    @property
    def names(self) -> frozenset:
        return frozenset(n for n, _ in self.params)

    @property
    def constants(self) -> dict:
        return {n: v for n, v in self.params if v != UNBOUNDED}


@dataclass(frozen=True)
class CellStatus:
    status: Status
    conjecture: Conjecture = Conjecture.NONE
    provenance: tuple = ()


@dataclass
class IntractabilityMap:
    universe: tuple
    cells: dict  # frozenset -> CellStatus
    results: tuple = ()

    def __getitem__(self, params) -> CellStatus:
        return self.cells[frozenset(params)]

    def ordered(self, names: Iterable[str]) -> tuple:
        idx = {p: i for i, p in enumerate(self.universe)}
        return tuple(sorted(names, key=idx.__getitem__))

    @property
    def np_hard(self) -> list:
        return [r for r in self.results if r.kind is ResultKind.CLASSICAL_NP_HARD]


def subsets(names: Sequence[str], *, nonempty: bool = False) -> list:
    """All subsets ordered by size, then lexicographically by position."""
    out = []
    for size in range(1 if nonempty else 0, len(names) + 1):
        out.extend(frozenset(c) for c in itertools.combinations(names, size))
    return out


def propagate(results: Iterable[RawResult], universe: Sequence[str]) -> IntractabilityMap:
    results = tuple(results)
    universe = tuple(universe)
    if len(set(universe)) != len(universe):
        raise LatticeError("duplicate parameter names in universe")
    for r in results:
        unknown = r.names - set(universe)
        if unknown:
            raise LatticeError(f"{r.label}: unknown parameters {sorted(unknown)}")
    tract = [r for r in results if r.kind is ResultKind.TRACTABLE]
    intract = [r for r in results if r.kind is ResultKind.INTRACTABLE]
    cells = {}
    for cell in subsets(universe, nonempty=True):
        ups = [r for r in tract if r.names <= cell]
        downs = [r for r in intract if cell <= r.names]
        conj = max((r.conjecture for r in downs), key=lambda c: c.strength,
                   default=Conjecture.NONE)
        prov = tuple(r.label for r in ups + downs)
        if ups and downs:
            status = Status.CONFLICT
        elif ups:
            status = Status.TRACTABLE
        elif downs:
            status = Status.INTRACTABLE
        else:
            status = Status.UNKNOWN
        cells[cell] = CellStatus(status, conj, prov)
    return IntractabilityMap(universe, cells, results)


def as_raw_results(imap: IntractabilityMap) -> list:
    """Every determined cell restated as a raw result."""
    out = []
    for cell, st in imap.cells.items():
        if st.status is Status.TRACTABLE:
            out.append(RawResult(ResultKind.TRACTABLE, {p: UNBOUNDED for p in cell},
                                 label=",".join(imap.ordered(cell))))
        elif st.status is Status.INTRACTABLE:
            out.append(RawResult(ResultKind.INTRACTABLE, {p: UNBOUNDED for p in cell},
                                 st.conjecture, ",".join(imap.ordered(cell))))
    return out + imap.np_hard


def detect_conflicts(imap: IntractabilityMap) -> list:
    return [(imap.ordered(cell), st.provenance)
            for cell, st in imap.cells.items() if st.status is Status.CONFLICT]


class Counts(NamedTuple):
    tractable: int
    intractable: int
    unknown: int
    conflict: int


def count_statuses(imap: IntractabilityMap) -> Counts:
    tally = {s: 0 for s in Status}
    for st in imap.cells.values():
        tally[st.status] += 1
    return Counts(tally[Status.TRACTABLE], tally[Status.INTRACTABLE],
                  tally[Status.UNKNOWN], tally[Status.CONFLICT])


# --------------------------------------------------------------------------
# rendering


def grid(imap: IntractabilityMap, row_params: Sequence[str], col_params: Sequence[str], *,
         annotate_raw: bool = False) -> tuple:
    """Header labels and cell symbols for a row x column layout."""
    rows, cols = imap.ordered(row_params), imap.ordered(col_params)
    if set(rows) & set(cols):
        raise LatticeError("row and column parameters overlap")
    if set(rows) | set(cols) != set(imap.universe) or len(rows) + len(cols) != len(imap.universe):
        raise LatticeError("row and column parameters must partition the universe")
    row_sets, col_sets = subsets(rows), subsets(cols)
    raw_at = {}
    for r in imap.results:
        if r.kind is not ResultKind.CLASSICAL_NP_HARD:
            raw_at.setdefault(r.names, []).append(r.label)

    def label(s):
        return ", ".join(imap.ordered(s)) if s else "--"

    body = []
    for rs in row_sets:
        line = []
        for cs in col_sets:
            cell = rs | cs
            if not cell:
                line.append("NPh" if imap.np_hard else "???")
                continue
            sym = SYMBOLS[imap.cells[cell].status]
            if annotate_raw and cell in raw_at:
                sym += "^" + ",".join(raw_at[cell])
            line.append(sym)
        body.append(line)
    return [label(s) for s in row_sets], [label(s) for s in col_sets], body


def render_map(imap: IntractabilityMap, row_params: Sequence[str], col_params: Sequence[str],
               fmt: str = "markdown", *, annotate_raw: bool = False) -> str:
    row_labels, col_labels, body = grid(imap, row_params, col_params, annotate_raw=annotate_raw)
    if fmt in ("markdown", "md"):
        lines = ["| | " + " | ".join(col_labels) + " |",
                 "|---" * (len(col_labels) + 1) + "|"]
        lines += [f"| {rl} | " + " | ".join(row) + " |" for rl, row in zip(row_labels, body)]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + col_labels)
        for rl, row in zip(row_labels, body):
            w.writerow([rl] + row)
        return buf.getvalue()
    if fmt == "json":
        doc = {"rows": row_labels, "cols": col_labels, "grid": body,
               "counts": count_statuses(imap)._asdict(), "map": map_to_json(imap)}
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    raise LatticeError(f"unknown format {fmt!r}")


def map_to_json(imap: IntractabilityMap) -> dict:
    cells = []
    for cell, st in imap.cells.items():
        cells.append({"params": list(imap.ordered(cell)), "status": st.status.value,
                      "conjecture": None if st.conjecture is Conjecture.NONE else st.conjecture.value,
                      "provenance": list(st.provenance)})
    return {"universe": list(imap.universe), "cells": cells}


# --------------------------------------------------------------------------
# raw-result documents


def result_from_json(doc: Mapping) -> RawResult:
    try:
        return RawResult(doc["kind"], dict(doc.get("params", {})),
                         doc.get("conjecture") or Conjecture.NONE, doc.get("label", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise LatticeError(f"malformed raw result {doc!r}: {exc}") from None


def result_to_json(r: RawResult) -> dict:
    return {"kind": r.kind.value, "label": r.label,
            "conjecture": None if r.conjecture is Conjecture.NONE else r.conjecture.value,
            "params": dict(r.params)}


def load_results(doc: Union[Mapping, str]) -> tuple:
    """Parse a raw-results document; returns ``(universe, results)``."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        universe = tuple(doc["universe"])
        results = tuple(result_from_json(r) for r in doc["results"])
    except (KeyError, TypeError) as exc:
        raise LatticeError(f"malformed raw-results document: {exc}") from None
    return universe, results


def dump_results(universe: Sequence[str], results: Iterable[RawResult]) -> dict:
    return {"universe": list(universe), "results": [result_to_json(r) for r in results]}


# --------------------------------------------------------------------------
# advice


@dataclass(frozen=True)
class Advice:
    status: Status
    cell: tuple
    conjecture: Conjecture
    provenance: tuple
    parameters: dict = field(default_factory=dict)
    note: str = ""

    def to_json(self) -> dict:
        return {"status": self.status.value, "cell": list(self.cell),
                "conjecture": None if self.conjecture is Conjecture.NONE else self.conjecture.value,
                "provenance": list(self.provenance), "parameters": self.parameters,
                "note": self.note}


def advise(inst: ProblemInstance, imap: IntractabilityMap, thresholds: Mapping[str, int]) -> Advice:
    """Look up the map cell spanned by the parameters that are small here.

    A parameter is small when its value does not exceed its threshold;
    parameters without a threshold, or outside the map's universe, are
    treated as unrestricted.
    """
    values = {k: v for k, v in extract_parameters(inst).by_name().items() if v is not None}
    small = [p for p in imap.universe
             if p in thresholds and p in values and values[p] <= thresholds[p]]
    if not small:
        hard = imap.np_hard
        note = "no parameter is small"
        if hard:
            note += "; NP-hard in general (unless P=NP): " + ",".join(r.label for r in hard)
        return Advice(Status.UNKNOWN, (), hard[0].conjecture if hard else Conjecture.NONE,
                      tuple(r.label for r in hard), values, note)
    st = imap[small]
    notes = {Status.TRACTABLE: "fixed-parameter tractable in the small parameters",
             Status.INTRACTABLE: f"fp-intractable unless {st.conjecture.value} fails",
             Status.UNKNOWN: "parameterized status not established",
             Status.CONFLICT: "raw results contradict each other on this cell"}
    return Advice(st.status, tuple(small), st.conjecture, st.provenance, values, notes[st.status])
