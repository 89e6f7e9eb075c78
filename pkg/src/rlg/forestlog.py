"""Forest logs: derivation-trace events, their file format, and loading.

One fact per line, terms in canonical text, the operation counter as the
last argument, e.g.

    table_call(win(?_G1),top,none,new,1).
    new_answer(win(b),win(?_G1),7).

Counters are dense 1..N for a full log. A whole line is one term, so
variables shared between payload arguments print with shared numbering.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .terms import (
    App, Atom, Num, Term, TermSyntaxError, VariantKey, canonical_text, mk_app,
    mk_list, parse_term, subsumes, variant_key,
)

KINDS = (
    "table_call", "new_answer", "conditional_answer", "delay",
    "simplification", "completed", "subgoal_abstraction",
    "answer_abstraction", "interrupt", "resumed", "aborted",
)


@dataclass
class Event:
    ctr: int
    kind: str
    callee: Optional[Term] = None
    caller: Optional[Term] = None        # None means the top-level query
    rule_id: Optional[str] = None
    stage: Optional[str] = None          # new | old
    answer: Optional[Term] = None
    subgoal: Optional[Term] = None
    delay: Optional[Tuple[Term, ...]] = None
    outcome: Optional[str] = None        # succeeded | failed
    scc_id: Optional[int] = None
    original: Optional[Term] = None
    abstracted: Optional[Term] = None
    literal: Optional[Term] = None
    info: Optional[str] = None           # interrupt kind: timer | user


def event_term(e: Event, compat: bool = False) -> Term:
    """The whole event as one term (kind applied to payload + ctr)."""
    k = e.kind
    if k == "table_call":
        args: List[Term] = [e.callee, e.caller if e.caller is not None else Atom("top")]
        if not compat:
            args.append(Atom(e.rule_id) if e.rule_id else Atom("none"))
        args.append(Atom(e.stage))
    elif k == "new_answer":
        args = [e.answer, e.subgoal]
    elif k == "conditional_answer":
        args = [e.answer, e.subgoal, mk_list(list(e.delay or ()))]
    elif k == "delay":
        args = [e.subgoal, e.literal]
    elif k == "simplification":
        args = [e.subgoal, e.answer, Atom(e.outcome)]
    elif k == "completed":
        args = [e.subgoal, Num(e.scc_id)]
    elif k == "subgoal_abstraction":
        args = [e.original, e.abstracted]
    elif k == "answer_abstraction":
        args = [e.original, e.abstracted, e.subgoal]
    elif k == "interrupt":
        args = [Atom(e.info)]
    elif k in ("resumed", "aborted"):
        args = []
    else:
        raise ValueError(f"unknown event kind {k}")
    return mk_app(Atom(k), *args, Num(e.ctr))


def serialize_event(e: Event, compat: bool = False) -> str:
    return canonical_text(event_term(e, compat)) + "."


def serialize(events, compat: bool = False) -> str:
    out = io.StringIO()
    for e in events:
        out.write(serialize_event(e, compat))
        out.write("\n")
    return out.getvalue()


def _opt_atom(t: Term) -> Optional[str]:
    if isinstance(t, Atom):
        return None if t.name == "none" else t.name
    return None


def event_from_term(t: Term) -> Event:
    if not (isinstance(t, App) and isinstance(t.fn, Atom)):
        raise ValueError("not an event fact")
    kind = t.fn.name
    if kind not in KINDS:
        raise ValueError(f"unknown event kind {kind}")
    args = t.args
    ctr_t = args[-1]
    if not isinstance(ctr_t, Num):
        raise ValueError("missing counter")
    ctr = ctr_t.value
    p = args[:-1]
    if kind == "table_call":
        if len(p) == 4:
            callee, caller, rid, stage = p
            rule_id = _opt_atom(rid)
        elif len(p) == 3:
            callee, caller, stage = p
            rule_id = None
        else:
            raise ValueError("table_call arity")
        return Event(ctr, kind, callee=callee,
                     caller=None if caller == Atom("top") else caller,
                     rule_id=rule_id,
                     stage=stage.name if isinstance(stage, Atom) else None)
    if kind == "new_answer":
        return Event(ctr, kind, answer=p[0], subgoal=p[1])
    if kind == "conditional_answer":
        return Event(ctr, kind, answer=p[0], subgoal=p[1],
                     delay=tuple(p[2].args) if isinstance(p[2], App) else ())
    if kind == "delay":
        return Event(ctr, kind, subgoal=p[0], literal=p[1])
    if kind == "simplification":
        return Event(ctr, kind, subgoal=p[0], answer=p[1],
                     outcome=p[2].name if isinstance(p[2], Atom) else None)
    if kind == "completed":
        return Event(ctr, kind, subgoal=p[0],
                     scc_id=p[1].value if isinstance(p[1], Num) else None)
    if kind == "subgoal_abstraction":
        return Event(ctr, kind, original=p[0], abstracted=p[1])
    if kind == "answer_abstraction":
        return Event(ctr, kind, original=p[0], abstracted=p[1], subgoal=p[2])
    if kind == "interrupt":
        return Event(ctr, kind, info=p[0].name if isinstance(p[0], Atom) else None)
    return Event(ctr, kind)


class IoFailure(Exception):
    pass


class EventSink:
    """Collects events in memory and optionally streams them to a file."""

    def __init__(self, path: Optional[str] = None, compat: bool = False):
        self.events: List[Event] = []
        self.compat = compat
        self.path = path
        self.io_error: Optional[str] = None
        self._fh = None
        if path:
            try:
                self._fh = open(path, "w", encoding="utf-8", buffering=1)
            except OSError as exc:
                self.io_error = str(exc)
                self._fh = None

    def emit(self, e: Event):
        self.events.append(e)
        if self._fh is not None:
            try:
                self._fh.write(serialize_event(e, self.compat) + "\n")
            except OSError as exc:
                self.io_error = str(exc)
                try:
                    self._fh.close()
                except OSError:
                    pass
                self._fh = None

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None


@dataclass
class Malformed:
    line_no: int
    text: str
    reason: str


@dataclass
class Log:
    events: List[Event] = field(default_factory=list)
    diagnostics: List[Malformed] = field(default_factory=list)
    by_kind: Dict[str, List[Event]] = field(default_factory=dict)
    by_callee: Dict[VariantKey, List[Event]] = field(default_factory=dict)
    by_caller: Dict[VariantKey, List[Event]] = field(default_factory=dict)
    by_rule: Dict[str, List[Event]] = field(default_factory=dict)

    def add(self, e: Event):
        self.events.append(e)
        self.by_kind.setdefault(e.kind, []).append(e)
        if e.callee is not None:
            self.by_callee.setdefault(variant_key(e.callee), []).append(e)
        if e.caller is not None:
            self.by_caller.setdefault(variant_key(e.caller), []).append(e)
        if e.rule_id is not None:
            self.by_rule.setdefault(e.rule_id, []).append(e)


def log_from_events(events) -> Log:
    log = Log()
    for e in events:
        log.add(e)
    return log


def coverage_gaps(log: Log) -> List[str]:
    """Operation ranges missing from the log (logging toggled off mid-run).

    Event counters are the engine's operation numbers, so any jump in the
    sequence is a span of unlogged work.
    """
    out: List[str] = []
    prev = 0
    for e in log.events:
        if e.ctr > prev + 1:
            out.append(f"ops {prev + 1}..{e.ctr - 1} not logged")
        prev = max(prev, e.ctr)
    return out


def load_log(path: str) -> Log:
    log = Log()
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.split("\n")
    truncated = bool(lines and lines[-1].strip() and not lines[-1].rstrip().endswith("."))
    for i, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        if not line.endswith("."):
            if truncated and i == len(lines):
                log.diagnostics.append(Malformed(i, line[:80], "truncated tail"))
                continue
            log.diagnostics.append(Malformed(i, line[:80], "missing terminator"))
            continue
        try:
            t = parse_term(line[:-1])
            log.add(event_from_term(t))
        except (TermSyntaxError, ValueError, IndexError) as exc:
            log.diagnostics.append(Malformed(i, line[:80], str(exc)))
    return log


def query(log: Log, variant: Optional[str] = None, callee: Optional[Term] = None,
          caller: Optional[Term] = None, rule_id: Optional[str] = None,
          ctr_range: Optional[Tuple[int, int]] = None,
          by_subsumption: bool = False) -> List[Event]:
    """Selector over the indexed log; results are ctr-ordered."""
    pools: List[List[Event]] = []
    if variant is not None:
        pools.append(log.by_kind.get(variant, []))
    if rule_id is not None:
        pools.append(log.by_rule.get(rule_id, []))
    if callee is not None and not by_subsumption:
        pools.append(log.by_callee.get(variant_key(callee), []))
    if caller is not None and not by_subsumption:
        pools.append(log.by_caller.get(variant_key(caller), []))
    base = min(pools, key=len) if pools else log.events
    out = []
    for e in base:
        if variant is not None and e.kind != variant:
            continue
        if rule_id is not None and e.rule_id != rule_id:
            continue
        if callee is not None:
            if e.callee is None:
                continue
            if by_subsumption:
                if not subsumes(callee, e.callee):
                    continue
            elif variant_key(e.callee) != variant_key(callee):
                continue
        if caller is not None:
            if e.caller is None:
                continue
            if by_subsumption:
                if not subsumes(caller, e.caller):
                    continue
            elif variant_key(e.caller) != variant_key(caller):
                continue
        if ctr_range is not None and not (ctr_range[0] <= e.ctr <= ctr_range[1]):
            continue
        out.append(e)
    out.sort(key=lambda e: e.ctr)
    return out
