"""Profiling and diagnosis over forest logs and table snapshots.

Four tool families live here:

  * table_dump: inspect tables whose subgoals match a pattern, with an
    optional per-predicate summary for drill-down,
  * overview: an operation census of one run computed from its log,
  * sccs / abstract_subgoal: recursive components of the call graph,
    optionally after coalescing subgoals by mode or by predicate,
  * terminyzer_calls / terminyzer_answers / suggest_delay: detect
    non-terminating call and answer patterns and propose a ground-guard
    delay annotation that breaks them.

Everything operates on immutable snapshots or loaded logs, so the tools
are safe to run while an evaluation is paused.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .forestlog import Event, Log
from .reader import FLit, formula_text
from .terms import (
    App, Atom, Lit, Term, Var, VariantKey, canonical_text, mk_app, subsumes,
    term_depth, variant_key, vars_of,
)
from .transform import CompiledKB, NormalRule, decode_atom


class NoSharedVariable(Exception):
    """An offending literal shares no variable with a later body sibling,
    so no ground-guard rewrite can be suggested for it."""


# ---------------------------------------------------------------------------
# subgoal abstraction

def _pred_label(t) -> str:
    """Predicate-class label of a subgoal, e.g. "win/1"."""
    if isinstance(t, Lit):
        lab = _pred_label(t.atom)
        return f"neg({lab})" if t.neg else lab
    if isinstance(t, App):
        if isinstance(t.fn, Atom) and t.fn.name == "neg" and len(t.args) == 1:
            return f"neg({_pred_label(t.args[0])})"
        fn = t.fn.name if isinstance(t.fn, Atom) else canonical_text(t.fn)
        return f"{fn}/{len(t.args)}"
    if isinstance(t, Atom):
        return t.name if "/" in t.name else f"{t.name}/0"
    return f"{canonical_text(t)}/0"


def abstract_subgoal(s, mode: str):
    """Coalesce a subgoal: mode_abstraction maps every argument to the
    atom `bound` or `free`; predicate_abstraction keeps only name/arity.
    Both are idempotent."""
    if isinstance(s, Lit):
        return Lit(abstract_subgoal(s.atom, mode), s.neg)
    assert not isinstance(s, Var), "a subgoal is always an application or atom"
    if mode == "mode_abstraction":
        if isinstance(s, App):
            if isinstance(s.fn, Atom) and s.fn.name == "neg" and len(s.args) == 1:
                return mk_app(s.fn, abstract_subgoal(s.args[0], mode))
            args = [Atom("free") if isinstance(a, Var) or a == Atom("free")
                    else Atom("bound") for a in s.args]
            return mk_app(s.fn, *args)
        return s
    if mode == "predicate_abstraction":
        return Atom(_pred_label(s))
    raise ValueError(f"unknown abstraction mode {mode!r}")


# ---------------------------------------------------------------------------
# table dump

@dataclass
class TableDumpEntry:
    subgoal: Term
    answer_count: int
    true_count: int
    undefined_count: int
    call_count: int
    status: str                   # active | completed
    calling_rules: Set[Tuple[Optional[str], Optional[Term]]]

    def as_json(self) -> dict:
        rules = sorted(
            [rid or "", canonical_text(c) if c is not None else ""]
            for (rid, c) in self.calling_rules)
        return {
            "subgoal": canonical_text(self.subgoal),
            "answer_count": self.answer_count,
            "true_count": self.true_count,
            "undefined_count": self.undefined_count,
            "call_count": self.call_count,
            "status": self.status,
            "calling_rules": rules,
        }


@dataclass
class TableSummaryRow:
    predicate: str
    table_count: int
    answer_count: int
    call_count: int

    def as_json(self) -> dict:
        return {
            "predicate": self.predicate,
            "table_count": self.table_count,
            "answer_count": self.answer_count,
            "call_count": self.call_count,
        }


def table_dump(tables: Sequence, pattern: Optional[Term] = None,
               summary: bool = False):
    """Entries for every table whose subgoal the pattern subsumes; a
    variable or absent pattern selects all tables. With summary=True the
    selection is aggregated by predicate class instead."""
    entries = []
    for view in tables:
        if pattern is not None and not subsumes(pattern, view.subgoal):
            continue
        true_count = sum(1 for a in view.answers if a.tv == "true")
        entries.append(TableDumpEntry(
            subgoal=view.subgoal,
            answer_count=len(view.answers),
            true_count=true_count,
            undefined_count=len(view.answers) - true_count,
            call_count=view.call_count,
            status="completed" if view.status == "complete" else "active",
            calling_rules={(rid, caller) for (caller, rid) in view.callers},
        ))
    entries.sort(key=lambda en: canonical_text(en.subgoal))
    if not summary:
        return entries
    rows: Dict[str, TableSummaryRow] = {}
    for en in entries:
        lab = _pred_label(en.subgoal)
        row = rows.get(lab)
        if row is None:
            rows[lab] = TableSummaryRow(lab, 1, en.answer_count, en.call_count)
        else:
            row.table_count += 1
            row.answer_count += en.answer_count
            row.call_count += en.call_count
    return [rows[k] for k in sorted(rows)]


# ---------------------------------------------------------------------------
# call-graph components

@dataclass
class Scc:
    id: int
    members: Set[Term]
    edges: Set[Tuple[Term, Term, Optional[str]]]
    trivial: bool

    def as_json(self) -> dict:
        return {
            "id": self.id,
            "members": sorted(canonical_text(m) for m in self.members),
            "edges": sorted(
                [canonical_text(a), canonical_text(b), r or ""]
                for (a, b, r) in self.edges),
            "trivial": self.trivial,
        }


def _tarjan(vertices: List[VariantKey],
            adj: Dict[VariantKey, Dict[VariantKey, None]]
            ) -> List[List[VariantKey]]:
    # adjacency dicts double as insertion-ordered sets, which keeps the
    # traversal (and thus component numbering) deterministic
    index: Dict[VariantKey, int] = {}
    low: Dict[VariantKey, int] = {}
    on: Set[str] = set()
    stack: List[str] = []
    comps: List[List[str]] = []
    counter = 0
    for v0 in vertices:
        if v0 in index:
            continue
        index[v0] = low[v0] = counter
        counter += 1
        stack.append(v0)
        on.add(v0)
        work = [(v0, iter(adj.get(v0, ())))]
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(adj.get(w, ()))))
                    pushed = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if pushed:
                continue
            work.pop()
            if work:
                pv = work[-1][0]
                low[pv] = min(low[pv], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.remove(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def sccs(log: Log, abstraction: Optional[str] = None) -> List[Scc]:
    """Strongly connected components of the caller-to-callee graph of the
    logged table calls. With an abstraction mode, subgoals are coalesced
    first, so components describe the abstracted graph. Components are
    numbered by the first appearance of a member; a singleton without a
    self-edge is flagged trivial."""
    display: Dict[VariantKey, Term] = {}
    first_seen: Dict[VariantKey, int] = {}
    adj: Dict[VariantKey, Dict[VariantKey, None]] = {}
    edges: Set[Tuple[str, str, Optional[str]]] = set()

    def vertex(t: Term, pos: int) -> VariantKey:
        if abstraction:
            t = abstract_subgoal(t, abstraction)
        k = variant_key(t)
        if k not in display:
            display[k] = t
            first_seen[k] = pos
            adj[k] = {}
        return k

    for e in log.by_kind.get("table_call", []):
        ck = vertex(e.callee, e.ctr)
        if e.caller is None:
            continue
        pk = vertex(e.caller, e.ctr)
        adj[pk][ck] = None
        edges.add((pk, ck, e.rule_id))
    order = sorted(display, key=lambda k: first_seen[k])
    comps = _tarjan(order, adj)
    comps.sort(key=lambda ms: min(first_seen[k] for k in ms))
    out = []
    for i, ms in enumerate(comps, 1):
        mset = set(ms)
        ed = {(display[a], display[b], r) for (a, b, r) in edges
              if a in mset and b in mset}
        out.append(Scc(
            id=i,
            members={display[k] for k in ms},
            edges=ed,
            trivial=len(ms) == 1 and not ed,
        ))
    return out


# ---------------------------------------------------------------------------
# run overview

@dataclass
class OverviewStats:
    total_calls: int
    distinct_subgoals: int
    total_answers: int
    undefined_answer_count: int
    scc_count: int
    scc_size_histogram: Dict[int, int]
    negation_op_counts: Dict[str, int]
    abstraction_counts: Dict[str, int]

    def as_json(self) -> dict:
        return {
            "total_calls": self.total_calls,
            "distinct_subgoals": self.distinct_subgoals,
            "total_answers": self.total_answers,
            "undefined_answer_count": self.undefined_answer_count,
            "scc_count": self.scc_count,
            "scc_size_histogram": {
                str(k): v for k, v in sorted(self.scc_size_histogram.items())},
            "negation_op_counts": dict(self.negation_op_counts),
            "abstraction_counts": dict(self.abstraction_counts),
        }


def overview(log: Log) -> OverviewStats:
    """Census of one run, computed from its log alone. Answer counts
    replay the per-answer event sequence: a new_answer is true, a
    conditional_answer stays undefined until a simplification settles it,
    and a failed simplification removes the answer."""
    calls = log.by_kind.get("table_call", [])
    state: Dict[Tuple[str, str], str] = {}
    for e in log.events:
        if e.kind == "new_answer":
            state[(variant_key(e.subgoal), variant_key(e.answer))] = "true"
        elif e.kind == "conditional_answer":
            key = (variant_key(e.subgoal), variant_key(e.answer))
            if state.get(key) != "true":
                state[key] = "cond"
        elif e.kind == "simplification":
            key = (variant_key(e.subgoal), variant_key(e.answer))
            state[key] = "true" if e.outcome == "succeeded" else "failed"
    live = [s for s in state.values() if s != "failed"]
    nontrivial = [c for c in sccs(log) if not c.trivial]
    hist: Dict[int, int] = {}
    for c in nontrivial:
        hist[len(c.members)] = hist.get(len(c.members), 0) + 1
    return OverviewStats(
        total_calls=len(calls),
        distinct_subgoals=sum(1 for e in calls if e.stage == "new"),
        total_answers=len(live),
        undefined_answer_count=sum(1 for s in live if s == "cond"),
        scc_count=len(nontrivial),
        scc_size_histogram=hist,
        negation_op_counts={
            k: len(log.by_kind.get(k, []))
            for k in ("delay", "simplification", "completed")},
        abstraction_counts={
            "subgoal": len(log.by_kind.get("subgoal_abstraction", [])),
            "answer": len(log.by_kind.get("answer_abstraction", []))},
    )


# ---------------------------------------------------------------------------
# termination analysis

@dataclass
class CallSequenceFinding:
    rule_cycle: List[str]
    witness_chain: List[Term]   # first few subgoals of the repeating tail
    growth: str
    cycle_repeats: int          # how often the rule cycle repeated in full

    def as_json(self) -> dict:
        return {
            "rule_cycle": list(self.rule_cycle),
            "witness_chain": [canonical_text(t) for t in self.witness_chain],
            "growth": self.growth,
            "cycle_repeats": self.cycle_repeats,
        }


@dataclass
class AnswerFlowFinding:
    subgoal: Term
    answer_event_ctrs: List[int]
    growth_rate: float
    feeding_rules: List[str]

    def as_json(self) -> dict:
        return {
            "subgoal": canonical_text(self.subgoal),
            "answer_event_ctrs": list(self.answer_event_ctrs),
            "growth_rate": self.growth_rate,
            "feeding_rules": list(self.feeding_rules),
        }


@dataclass
class Suggestion:
    rule_id: str
    position: int                 # body index of the delayed literal
    rewritten_literal: str
    rewritten_rule: str
    message: str

    def as_json(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "position": self.position,
            "rewritten_literal": self.rewritten_literal,
            "rewritten_rule": self.rewritten_rule,
            "message": self.message,
        }


@dataclass
class TerminyzerReport:
    call_sequence_findings: List[CallSequenceFinding]
    answer_flow_findings: List[AnswerFlowFinding]
    suggestions: List[Suggestion]

    def as_json(self) -> dict:
        return {
            "call_sequence_findings": [
                f.as_json() for f in self.call_sequence_findings],
            "answer_flow_findings": [
                f.as_json() for f in self.answer_flow_findings],
            "suggestions": [s.as_json() for s in self.suggestions],
        }


def _completed_keys(log: Log) -> Set[str]:
    return {variant_key(e.subgoal)
            for e in log.by_kind.get("completed", [])}


def _chain_finding(chain: List[Event], completed: Set[str], min_repeats: int,
                   min_depth_growth: int, max_cycle: int
                   ) -> Optional[CallSequenceFinding]:
    """Tail-anchored periodicity check of one root-to-leaf chain of new
    subgoals. A finding needs the rule sequence at the tail to repeat with
    some period at least min_repeats times while, per cycle position, the
    callee stays in one predicate class and its depth never shrinks, with
    at least one position gaining min_depth_growth depth overall. Chains
    ending in a completed table never qualify."""
    if variant_key(chain[-1].callee) in completed:
        return None
    n = len(chain)
    rids = [e.rule_id for e in chain]
    depths = [term_depth(e.callee) for e in chain]
    preds = [_pred_label(e.callee) for e in chain]
    for k in range(1, min(max_cycle, n // min_repeats) + 1):
        m = k * min_repeats
        window = rids[n - m:]
        if any(r is None for r in window):
            continue
        if any(window[i] != window[i + k] for i in range(m - k)):
            continue
        start = n - m
        while start > 0 and rids[start - 1] is not None \
                and rids[start - 1] == rids[start - 1 + k]:
            start -= 1
        seg = list(range(start, n))
        ok = True
        top_growth = 0
        for j in range(k):
            idx = seg[j::k]
            if len({preds[i] for i in idx}) != 1:
                ok = False
                break
            ds = [depths[i] for i in idx]
            if any(b < a for a, b in zip(ds, ds[1:])):
                ok = False
                break
            top_growth = max(top_growth, ds[-1] - ds[0])
        reps = len(seg) // k
        if not ok or top_growth < min_depth_growth or reps < min_repeats:
            continue
        first = seg[0]
        wit_idx = seg
        if first > 0 and preds[first - 1] == preds[first] \
                and depths[first - 1] <= depths[first]:
            wit_idx = [first - 1] + seg
        rate = top_growth / max(1, reps - 1)
        # keep a short prefix: it already demonstrates the growth, and on
        # long runaways serializing tens of thousands of ever-deeper
        # subgoals would dominate the analysis cost
        return CallSequenceFinding(
            rule_cycle=[rids[i] for i in seg[:k]],
            witness_chain=[chain[i].callee for i in wit_idx[:16]],
            growth=f"+{rate:g} depth/cycle",
            cycle_repeats=reps,
        )
    return None


def terminyzer_calls(log: Log, min_repeats: int = 3,
                     min_depth_growth: int = 2,
                     max_cycle: int = 8) -> List[CallSequenceFinding]:
    """Call-sequence analysis: repeating rule cycles that keep creating
    deeper subgoals. Chains follow stage=new table calls from each new
    subgoal to the new subgoal of its caller. A run that completed all
    its tables yields no findings."""
    news = [e for e in log.by_kind.get("table_call", [])
            if e.stage == "new"]
    by_callee: Dict[VariantKey, Event] = {}
    for e in news:
        by_callee.setdefault(variant_key(e.callee), e)
    parent: Dict[int, Optional[Event]] = {}
    has_child: Set[int] = set()
    for e in news:
        p = None
        if e.caller is not None:
            cand = by_callee.get(variant_key(e.caller))
            if cand is not None and cand.ctr < e.ctr:
                p = cand
        parent[e.ctr] = p
        if p is not None:
            has_child.add(p.ctr)
    completed = _completed_keys(log)
    best: Dict[tuple, CallSequenceFinding] = {}
    for leaf in news:
        if leaf.ctr in has_child:
            continue
        chain = [leaf]
        node = parent.get(leaf.ctr)
        while node is not None:
            chain.append(node)
            node = parent.get(node.ctr)
        chain.reverse()
        finding = _chain_finding(chain, completed, min_repeats,
                                 min_depth_growth, max_cycle)
        if finding is None:
            continue
        cyc = finding.rule_cycle
        rotations = [tuple(cyc[i:] + cyc[:i]) for i in range(len(cyc))]
        key = min(rotations)
        prev = best.get(key)
        if prev is None or finding.cycle_repeats > prev.cycle_repeats:
            best[key] = finding
    found = list(best.values())
    found.sort(key=lambda f: -f.cycle_repeats)
    return found


def terminyzer_answers(log: Log, window: int = 1000,
                       min_rate: float = 8.0) -> List[AnswerFlowFinding]:
    """Answer-flow analysis: tables that keep accumulating answers across
    several windows of the operation counter without ever completing.
    Growth is attributed to the rules whose calls consume the answers."""
    if window <= 0:
        raise ValueError("window must be positive")
    completed = _completed_keys(log)
    ctrs: Dict[str, List[int]] = {}
    disp: Dict[str, Term] = {}
    for e in log.events:
        if e.kind in ("new_answer", "conditional_answer"):
            k = variant_key(e.subgoal)
            ctrs.setdefault(k, []).append(e.ctr)
            disp.setdefault(k, e.subgoal)
    findings = []
    for k, seq in ctrs.items():
        if k in completed:
            continue
        span = seq[-1] // window - seq[0] // window + 1
        if span < 2:
            continue
        rate = len(seq) / span
        if rate < min_rate:
            continue
        feeding = sorted({e.rule_id for e in log.by_callee.get(k, [])
                          if e.kind == "table_call" and e.rule_id})
        findings.append(AnswerFlowFinding(
            subgoal=disp[k],
            answer_event_ctrs=list(seq),
            growth_rate=rate,
            feeding_rules=feeding,
        ))
    findings.sort(key=lambda f: -len(f.answer_event_ctrs))
    return findings


# ---------------------------------------------------------------------------
# delay suggestions

def _implicated(report: TerminyzerReport):
    """Per finding: the offending predicate classes and the rules to
    examine."""
    for f in report.call_sequence_findings:
        preds = {_pred_label(t) for t in f.witness_chain}
        yield preds, [r for r in f.rule_cycle if r]
    for f in report.answer_flow_findings:
        yield {_pred_label(f.subgoal)}, list(f.feeding_rules)


def _decoded_body(rule: NormalRule) -> List[Tuple[Lit, str, Optional[tuple]]]:
    out = []
    for g in rule.body:
        lit = Lit(g.atom) if isinstance(g.atom, Var) else decode_atom(g.atom)
        mode = "plain" if g.mode == "call" else g.mode
        out.append((lit, mode, g.guard))
    return out


def _rule_source(rule: NormalRule, body) -> str:
    head = formula_text(FLit(decode_atom(rule.head)))
    if not body:
        return f"{head}."
    parts = [formula_text(FLit(lit, mode, guard), 5)
             for (lit, mode, guard) in body]
    return f"{head} :- {' and '.join(parts)}."


def _suggest_for_rule(rule: NormalRule, preds: Set[str]
                      ) -> Optional[Suggestion]:
    body = _decoded_body(rule)
    offending = None
    for pos, (lit, mode, guard) in enumerate(body):
        if mode != "plain" or guard is not None or lit.neg:
            continue
        if _pred_label(lit.atom) in preds:
            offending = pos
            break
    if offending is None:
        return None
    lit, mode, _ = body[offending]
    own = [v.name for v in vars_of(lit.atom)]
    later: Set[str] = set()
    for (lit2, _m2, guard2) in body[offending + 1:]:
        later.update(v.name for v in vars_of(lit2.atom))
        if guard2:
            later.update(guard2)
    shared = tuple(n for n in own if n in later)
    if not shared:
        raise NoSharedVariable(
            f"rule {rule.rule_id}: literal {formula_text(FLit(lit))} shares "
            f"no variable with a later body literal")
    rewritten = formula_text(FLit(lit, mode, shared))
    fixed = body[:offending] + [(lit, mode, shared)] + body[offending + 1:]
    guards = ", ".join("?" + n for n in shared)
    return Suggestion(
        rule_id=rule.rule_id,
        position=offending,
        rewritten_literal=rewritten,
        rewritten_rule=_rule_source(rule, fixed),
        message=(f"rule {rule.rule_id}: postpone body literal "
                 f"{offending + 1} until {guards} ground: {rewritten}"),
    )


def suggest_delay(kb: CompiledKB, report: TerminyzerReport
                  ) -> List[Suggestion]:
    """For each finding, look for a positive body literal of an implicated
    rule that belongs to the offending predicate class and shares a
    variable with a later body literal; suggest wrapping it in a
    wish(ground(...)) delay. Findings without such a literal produce no
    suggestion but stay in the report."""
    out: List[Suggestion] = []
    seen: Set[Tuple[str, int]] = set()
    for preds, rule_ids in _implicated(report):
        for rid in rule_ids:
            rule = kb.rule_by_id.get(rid)
            if rule is None:
                continue
            try:
                s = _suggest_for_rule(rule, preds)
            except NoSharedVariable:
                continue
            if s is not None and (s.rule_id, s.position) not in seen:
                seen.add((s.rule_id, s.position))
                out.append(s)
    return out


def analyze_termination(log: Log, kb: Optional[CompiledKB] = None,
                        min_repeats: int = 3, min_depth_growth: int = 2,
                        window: int = 1000, min_rate: float = 8.0
                        ) -> TerminyzerReport:
    """Run both termination analyses and, when the knowledge base is
    available, attach delay suggestions."""
    report = TerminyzerReport(
        call_sequence_findings=terminyzer_calls(
            log, min_repeats=min_repeats, min_depth_growth=min_depth_growth),
        answer_flow_findings=terminyzer_answers(
            log, window=window, min_rate=min_rate),
        suggestions=[],
    )
    if kb is not None:
        report.suggestions = suggest_delay(kb, report)
    return report
