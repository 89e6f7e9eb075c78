"""Tabled evaluation under the well-founded semantics, with restraint.

Subgoals are tabled by variance of their (optionally depth-abstracted) call
pattern. Answers carry sets of delay elements; an answer with an empty delay
set is TRUE, one with only non-empty sets is UNDEFINED, and an answer whose
sets all die is retracted. Delay elements are:

  * a negative dependency on another table (from delaying `naf` inside a
    strongly connected component, or from consulting a table that completed
    with only conditional matches),
  * a positive reference to a conditional answer that was consumed,
  * permanent restraint markers: radial (depth abstraction), skip
    (skipped literal or the `undefined` builtin), unsafety (non-ground
    negation), wish (postponed literal never grounded).

Evaluation alternates between draining a task stack (resolution, answer
delivery) and rounds over the dependency graph of incomplete tables:
each strongly connected component either has negation suspensions inside
it, which get delayed, or it is simplified to a fixpoint and completed.

Depth-abstracted tables resolve program clauses against the first
original call only; later calls just consume matching answers. Negative
decisions over such a table fall back to UNDEFINED when the queried
instance is not covered by that seeding call.
"""

from __future__ import annotations

import time
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .terms import (
    App, Atom, Lit, Num, Term, Var, VariantKey, canonical_text, is_variant,
    mk_app, rename_term, resolve, subsumes, unify, variant_key, walk,
    abstract_lit,
)
from . import reader
from .transform import (
    CompiledKB, Goal, GoalPlan, NormalRule, compile_goal, decode_atom,
    encode_lit, is_builtin, pred_key,
)
from .forestlog import Event, EventSink

TRUE = "true"
UNDEFINED = "undefined"
FALSE = "false"

MARK_RADIAL = "radial"
MARK_SKIP = "skip"
MARK_UNSAFE = "unsafety"
MARK_WISH = "wish"
_MARKS = (MARK_RADIAL, MARK_SKIP, MARK_UNSAFE, MARK_WISH)

DEFAULT_MAX_OPS = 5_000_000


class EngineError(Exception):
    pass


class BuiltinInstantiationError(EngineError):
    """A builtin was reached with insufficiently instantiated arguments on a
    derivation path that carried no delay elements."""


class NoSuchTable(EngineError):
    pass


class SnapshotWhileRunning(EngineError):
    pass


class _Inst(Exception):
    """Internal: builtin argument not usable."""


class _OpLimit(Exception):
    pass


class _UserAbort(Exception):
    pass


class _Deadline(Exception):
    pass


# ---------------------------------------------------------------------------
# delay elements

class NafElem:
    """Negative dependency of a delay set on a table; identity-hashed."""
    __slots__ = ("table", "lit")

    def __init__(self, table: "Table", lit: Term):
        self.table = table
        self.lit = lit


class AnswerRef:
    """Positive dependency on a conditional answer that was consumed."""
    __slots__ = ("entry",)

    def __init__(self, entry: "AnswerEntry"):
        self.entry = entry


class AnswerEntry:
    __slots__ = ("lit", "delay_sets", "dead", "table", "cond_emitted", "_ref")

    def __init__(self, lit: Term, table: "Table"):
        self.lit = lit
        self.table = table
        self.delay_sets: List[frozenset] = []
        self.dead = False
        self.cond_emitted = False
        self._ref: Optional[AnswerRef] = None

    def is_true(self) -> bool:
        return bool(self.delay_sets) and not self.delay_sets[0]

    def ref(self) -> AnswerRef:
        if self._ref is None:
            self._ref = AnswerRef(self)
        return self._ref

    def tv(self) -> str:
        if self.dead or not self.delay_sets:
            return FALSE
        return TRUE if self.is_true() else UNDEFINED


class Susp:
    """A suspended body continuation: either an answer consumer on a table
    or a negation suspension waiting for the table to complete."""
    __slots__ = ("kind", "owner", "rule", "head", "env", "todo", "pending",
                 "delays", "target", "callee", "cursor", "scheduled")

    def __init__(self, kind, owner, rule, head, env, todo, pending, delays,
                 target, callee):
        self.kind = kind              # ans | naf
        self.owner = owner
        self.rule = rule
        self.head = head              # renamed head instance of this frame
        self.env = env
        self.todo = todo              # tuple of Goal
        self.pending = pending        # tuple of Goal (wish-postponed)
        self.delays = delays
        self.target = target          # resolved call atom / naf literal
        self.callee = callee
        self.cursor = 0
        self.scheduled = False


class Frame:
    __slots__ = ("owner", "rule", "head", "env", "todo", "pending", "delays")

    def __init__(self, owner, rule, head, env, todo, pending, delays):
        self.owner = owner
        self.rule = rule
        self.head = head              # renamed head instance of this frame
        self.env = env
        self.todo = todo              # list of Goal
        self.pending = pending        # list of Goal
        self.delays = delays          # frozenset


class Table:
    __slots__ = ("key", "seed", "abstracted", "ans_k", "index", "entries",
                 "entry_list", "consumers", "waiters", "deps", "completed",
                 "scc_id", "call_count", "callers", "naf_elems")

    def __init__(self, key: Term, seed: Term, abstracted: bool,
                 ans_k: Optional[int], index: int):
        self.key = key                # encoded, possibly abstracted
        self.seed = seed              # encoded first original call
        self.abstracted = abstracted
        self.ans_k = ans_k
        self.index = index
        self.entries: Dict[int, List[AnswerEntry]] = {}   # vh buckets
        self.entry_list: List[AnswerEntry] = []
        self.consumers: List[Susp] = []
        self.waiters: List[Susp] = []
        self.deps: Dict["Table", bool] = {}
        self.completed = False
        self.scc_id: Optional[int] = None
        self.call_count = 0
        self.callers: Dict[Tuple[Optional[int], Optional[str]], bool] = {}
        self.naf_elems: Dict[VariantKey, NafElem] = {}

    def find_entry(self, lit: Term) -> Optional[AnswerEntry]:
        for e in self.entries.get(lit.vh, ()):
            if is_variant(e.lit, lit):
                return e
        return None

    def naf_elem(self, lit: Term) -> NafElem:
        k = variant_key(lit)
        el = self.naf_elems.get(k)
        if el is None:
            el = NafElem(self, lit)
            self.naf_elems[k] = el
        return el


# ---------------------------------------------------------------------------
# options / results

@dataclass
class EvalOptions:
    logging: bool = True
    log_path: Optional[str] = None
    log_compat: bool = False
    max_ops: int = DEFAULT_MAX_OPS
    interval_ms: Optional[float] = None
    on_interrupt: Optional[Callable] = None
    subgoal_radius: Optional[int] = None   # overrides per-predicate bounds
    answer_radius: Optional[int] = None
    deadline_s: Optional[float] = None     # monotonic absolute deadline


@dataclass
class AnswerView:
    literal: Term                  # decoded display term
    tv: str
    bindings: Dict[str, Term]
    delays: Tuple[Term, ...] = ()


@dataclass
class TableView:
    subgoal: Term                  # decoded display term
    status: str                    # complete | incomplete
    scc_id: Optional[int]
    call_count: int
    callers: Tuple[Tuple[Optional[Term], Optional[str]], ...]
    answers: Tuple[AnswerView, ...]


class EvaluationHandle:
    def __init__(self, engine: "_Engine"):
        self._engine = engine
        self.state = "running"
        self.error: Optional[str] = None
        self._thread: Optional[threading.Thread] = None
        self._lock = threading.Condition()
        self._pause_req = False
        self._abort_req = False
        self._resume_req = False

    # --- inspection ---------------------------------------------------
    @property
    def op_counter(self) -> int:
        return self._engine.ops

    @property
    def elapsed_s(self) -> float:
        return self._engine.elapsed

    @property
    def events(self) -> List[Event]:
        return self._engine.sink.events

    @property
    def tables(self) -> List[Table]:
        return self._engine.tables

    @property
    def goal_table(self) -> Optional[Table]:
        return self._engine.goal_table

    @property
    def plan(self) -> GoalPlan:
        return self._engine.plan

    @property
    def kb(self) -> CompiledKB:
        return self._engine.kb

    def answers(self) -> List[AnswerView]:
        return self._engine.collect_answers()

    def truth_of(self, literal) -> str:
        return truth_of(self, literal)

    # --- control --------------------------------------------------------
    def set_logging(self, on: bool):
        self._engine.logging = bool(on)

    @property
    def logging(self) -> bool:
        return self._engine.logging

    def request_pause(self):
        with self._lock:
            self._pause_req = True

    def resume(self):
        with self._lock:
            self._resume_req = True
            self._lock.notify_all()

    def request_abort(self):
        with self._lock:
            self._abort_req = True
            self._resume_req = True
            self._lock.notify_all()

    def wait_paused(self, timeout: float = 5.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.state != "running":
                return True
            time.sleep(0.001)
        return self.state != "running"

    def join(self, timeout: Optional[float] = None) -> bool:
        """Wait for a background evaluation to reach a terminal state."""
        t = self._thread
        if t is not None:
            t.join(timeout)
            return not t.is_alive()
        return self.state != "running"


# ---------------------------------------------------------------------------
# builtins

_C_OPS = {"+": lambda a, b: a + b, "-": lambda a, b: a - b,
          "*": lambda a, b: a * b}


def _arith(t: Term, env: dict) -> int:
    t = resolve(t, env)
    memo: Dict[int, int] = {}
    stack = [(t, False)]
    while stack:
        node, ready = stack.pop()
        if id(node) in memo:
            continue
        if isinstance(node, Num):
            memo[id(node)] = node.value
            continue
        if isinstance(node, App) and isinstance(node.fn, Atom) and \
                node.fn.name in ("+", "-", "*", "/") and len(node.args) == 2:
            if ready:
                a = memo[id(node.args[0])]
                b = memo[id(node.args[1])]
                op = node.fn.name
                if op == "/":
                    if b == 0:
                        raise _Inst("division by zero")
                    q = a // b
                    if a % b != 0 and (a < 0) != (b < 0):
                        q += 1  # truncate toward zero
                    memo[id(node)] = q
                else:
                    memo[id(node)] = _C_OPS[op](a, b)
            else:
                stack.append((node, True))
                stack.append((node.args[0], False))
                stack.append((node.args[1], False))
            continue
        raise _Inst(f"non-numeric term in arithmetic: {canonical_text(node)}")
    return memo[id(t)]


def eval_builtin(atom: Term, env: dict):
    """-> (status, env) with status ok | fail | undef; raises _Inst."""
    if isinstance(atom, Atom):
        if atom.name == "undefined":
            return ("undef", env)
        raise _Inst(f"builtin {atom.name} needs arguments")
    name = atom.fn.name if isinstance(atom.fn, Atom) else None
    args = atom.args
    if name == "is" and len(args) == 2:
        v = _arith(args[1], env)
        s = unify(args[0], Num(v), env)
        return ("ok", s) if s is not None else ("fail", env)
    if name in (">", "<", ">=", "=<") and len(args) == 2:
        a = _arith(args[0], env)
        b = _arith(args[1], env)
        ok = {">": a > b, "<": a < b, ">=": a >= b, "=<": a <= b}[name]
        return ("ok", env) if ok else ("fail", env)
    if name == "=" and len(args) == 2:
        s = unify(args[0], args[1], env)
        return ("ok", s) if s is not None else ("fail", env)
    if name == "\\=" and len(args) == 2:
        s = unify(args[0], args[1], env)
        return ("fail", env) if s is not None else ("ok", env)
    raise _Inst(f"unknown builtin {name}/{len(args)}")


# ---------------------------------------------------------------------------
# the engine

class _Engine:
    def __init__(self, kb: CompiledKB, plan: GoalPlan, opts: EvalOptions):
        self.kb = kb
        self.plan = plan
        self.opts = opts
        self.logging = opts.logging
        self.sink = EventSink(opts.log_path if opts.logging else None,
                              compat=opts.log_compat)
        self.ops = 0
        self.max_ops = opts.max_ops
        self.tables: List[Table] = []
        self.registry: Dict[int, List[Table]] = {}
        self.stack: list = []
        self.rn = [0]
        self.goal_table: Optional[Table] = None
        self.handle = EvaluationHandle(self)
        self.elapsed = 0.0
        self._scc_n = 0
        self._tick_n = 0
        self._disp_cache: Dict[int, Term] = {}
        self._extra_index: Dict[object, List[NormalRule]] = {}
        for r in plan.extra_rules:
            self._extra_index.setdefault(pred_key(r.head), []).append(r)
        self._t0 = 0.0
        self._next_fire: Optional[float] = None
        self.deadline_hit = False
        self._closing = False

    # --- rules ----------------------------------------------------------
    def _rules_for(self, atom: Term) -> Sequence[NormalRule]:
        extra = self._extra_index.get(pred_key(atom))
        base = self.kb.rules_for(atom)
        if extra:
            return list(base) + extra
        return base

    # --- events ---------------------------------------------------------
    def _disp(self, t: Term) -> Term:
        hit = self._disp_cache.get(id(t))
        if hit is not None:
            return hit
        out = decode_atom(t).term()
        self._disp_cache[id(t)] = out
        return out

    def _delay_terms(self, ds) -> Tuple[Term, ...]:
        items = []
        for el in ds:
            if isinstance(el, str):
                items.append(Atom(el))
            elif isinstance(el, NafElem):
                items.append(mk_app(Atom("naf"), self._disp(el.lit)))
            else:
                items.append(self._disp(el.entry.lit))
        items.sort(key=canonical_text)
        return tuple(items)

    def _op(self, kind: str, force: bool = False, **fields):
        if not force and self.ops >= self.max_ops:
            raise _OpLimit()
        self.ops += 1
        self._tick()
        if self.logging:
            self.sink.emit(Event(self.ops, kind, **fields))

    # --- interrupt checkpoints -------------------------------------------
    def _tick(self):
        if self._closing:
            return
        self._tick_n += 1
        h = self.handle
        if h._abort_req:
            raise _UserAbort()
        if h._pause_req:
            self._service_pause()
        if (self._tick_n & 0xF) != 0:
            return
        now = time.monotonic()
        if self.opts.deadline_s is not None and now >= self.opts.deadline_s:
            raise _Deadline()
        if self._next_fire is not None and now >= self._next_fire:
            self._fire_timer(now)

    def _fire_timer(self, now: float):
        h = self.handle
        self._op("interrupt", force=True, info="timer")
        h.state = "paused"
        try:
            if self.opts.on_interrupt is not None:
                self.opts.on_interrupt(h)
        finally:
            if h._abort_req:
                h.state = "running"
                raise _UserAbort()
            h.state = "running"
            self._op("resumed", force=True)
            self._next_fire = time.monotonic() + (self.opts.interval_ms or 0) / 1000.0

    def _service_pause(self):
        h = self.handle
        self._op("interrupt", force=True, info="user")
        with h._lock:
            h._pause_req = False
            h.state = "paused"
            h._lock.notify_all()
            while not h._resume_req:
                h._lock.wait(0.1)
            h._resume_req = False
            if h._abort_req:
                h.state = "running"
                raise _UserAbort()
            h.state = "running"
        self._op("resumed", force=True)

    # --- tables -----------------------------------------------------------
    def _lookup(self, key: Term) -> Optional[Table]:
        for t in self.registry.get(key.vh, ()):
            if is_variant(t.key, key):
                return t
        return None

    def _call_table(self, atom: Term, caller: Optional[Table],
                    rule_id: Optional[str]) -> Table:
        sub_k, ans_k = self.kb.decl_for(atom)
        if self.opts.subgoal_radius is not None:
            sub_k = self.opts.subgoal_radius
        if self.opts.answer_radius is not None:
            ans_k = self.opts.answer_radius
        key = atom
        changed = False
        if sub_k is not None:
            dec = decode_atom(atom)
            abs_lit, changed = abstract_lit(dec, sub_k)
            if changed:
                key = encode_lit(abs_lit)
                self._op("subgoal_abstraction",
                         original=self._disp(atom),
                         abstracted=abs_lit.term())
        tbl = self._lookup(key)
        caller_disp = self._disp(caller.key) if caller is not None else None
        if tbl is not None:
            tbl.call_count += 1
            tbl.callers.setdefault(
                (caller.index if caller else None, rule_id), True)
            self._op("table_call", callee=self._disp(tbl.key),
                     caller=caller_disp, rule_id=rule_id, stage="old")
        else:
            tbl = Table(key, atom, changed, ans_k, len(self.tables))
            self.tables.append(tbl)
            self.registry.setdefault(key.vh, []).append(tbl)
            tbl.call_count = 1
            tbl.callers[(caller.index if caller else None, rule_id)] = True
            self._op("table_call", callee=self._disp(tbl.key),
                     caller=caller_disp, rule_id=rule_id, stage="new")
            # program-clause resolution, seeded from the first original call
            rules = self._rules_for(atom)
            for rule in reversed(rules):
                self.stack.append(("rule", tbl, rule, atom))
        if caller is not None:
            caller.deps.setdefault(tbl, True)
        return tbl

    def _schedule(self, susp: Susp):
        if not susp.scheduled:
            susp.scheduled = True
            self.stack.append(("deliver", susp))

    # --- answers ------------------------------------------------------------
    def _insert(self, table: Table, lit: Term, ds: frozenset):
        entry = table.find_entry(lit)
        if entry is not None and entry.dead:
            entry = None
        if entry is None:
            entry = AnswerEntry(lit, table)
            entry.delay_sets.append(ds)
            table.entries.setdefault(lit.vh, []).append(entry)
            table.entry_list.append(entry)
            if ds:
                entry.cond_emitted = True
                self._op("conditional_answer", answer=self._disp(lit),
                         subgoal=self._disp(table.key),
                         delay=self._delay_terms(ds))
            else:
                self._op("new_answer", answer=self._disp(lit),
                         subgoal=self._disp(table.key))
            for c in table.consumers:
                self._schedule(c)
            return
        if entry.is_true():
            return
        if not ds:
            entry.delay_sets = [ds]
            self._op("simplification", subgoal=self._disp(table.key),
                     answer=self._disp(entry.lit), outcome="succeeded")
            return
        for old in entry.delay_sets:
            if old <= ds:
                return
        entry.delay_sets = [old for old in entry.delay_sets if not ds < old]
        entry.delay_sets.append(ds)

    # --- negation decisions ----------------------------------------------
    def _decide_naf(self, table: Table, lit: Term) -> str:
        has_cond = False
        for e in table.entry_list:
            if e.dead:
                continue
            rn = rename_term(e.lit, {}, "_r", self.rn)
            if unify(rn, lit, {}) is None:
                continue
            if e.is_true():
                return "false"
            has_cond = True
        if has_cond:
            return "undef"
        if table.abstracted and not subsumes(table.seed, lit):
            return "undef"   # coverage not guaranteed by the seeding call
        return "true"

    # --- frame execution ----------------------------------------------------
    def _activate(self, table: Table, rule: NormalRule, call_atom: Term):
        mapping: dict = {}
        head = rename_term(rule.head, mapping, "_v", self.rn)
        env = unify(head, call_atom, {})
        if env is None:
            return
        todo = []
        for g in rule.body:
            atom = rename_term(g.atom, mapping, "_v", self.rn)
            guard = None
            if g.guard is not None:
                guard = tuple(rename_term(Var(n), mapping, "_v", self.rn).name
                              for n in g.guard)
            todo.append(Goal(atom, g.mode, guard))
        self._run_frame(Frame(table, rule, head, env, todo, [], frozenset()))

    def _instantiation(self, delays: frozenset, msg: str):
        if delays:
            return
        raise BuiltinInstantiationError(msg)

    def _run_frame(self, fr: Frame):
        env = fr.env
        todo = fr.todo
        pending = fr.pending
        delays = fr.delays
        owner = fr.owner
        rule = fr.rule
        head = fr.head
        rid = rule.rule_id if rule is not None else None
        while True:
            if pending:
                moved, still = [], []
                for g in pending:
                    if all(resolve(Var(n), env).ground for n in g.guard):
                        moved.append(g)
                    else:
                        still.append(g)
                if moved:
                    pending = still
                    todo[0:0] = moved
            if not todo:
                if pending:
                    g = pending.pop(0)
                    if g.mode == "call":
                        todo.append(Goal(g.atom, g.mode, None))
                    else:
                        a = resolve(g.atom, env)
                        if not a.ground:
                            delays = delays | {MARK_UNSAFE}
                        else:
                            todo.append(Goal(g.atom, g.mode, None))
                    continue
                break
            g = todo.pop(0)
            if g.guard is not None and \
                    not all(resolve(Var(n), env).ground for n in g.guard):
                pending.append(g)
                continue
            a = walk(g.atom, env)
            if isinstance(a, Var):
                if g.mode == "call":
                    return self._instantiation(
                        delays, "unbound variable in call position")
                delays = delays | {MARK_UNSAFE}
                continue
            a = resolve(a, env)
            if g.mode == "call":
                if is_builtin(a):
                    try:
                        st, env2 = eval_builtin(a, env)
                    except _Inst as exc:
                        return self._instantiation(delays, str(exc))
                    if st == "fail":
                        return
                    env = env2
                    if st == "undef":
                        delays = delays | {MARK_SKIP}
                    continue
                tbl = self._call_table(a, owner, rid)
                susp = Susp("ans", owner, rule, head, env, tuple(todo),
                            tuple(pending), delays, a, tbl)
                tbl.consumers.append(susp)
                self._schedule(susp)
                return
            # naf / unot
            if is_builtin(a):
                try:
                    st, _ = eval_builtin(a, env)
                except _Inst as exc:
                    return self._instantiation(delays, str(exc))
                if st == "ok":
                    return
                if st == "undef":
                    delays = delays | {MARK_SKIP}
                continue
            if not a.ground:
                delays = delays | {MARK_UNSAFE}
                continue
            tbl = self._call_table(a, owner, rid)
            if tbl.completed:
                d = self._decide_naf(tbl, a)
                if d == "false":
                    return
                if d == "undef":
                    delays = delays | {tbl.naf_elem(a)}
                continue
            susp = Susp("naf", owner, rule, head, env, tuple(todo),
                        tuple(pending), delays, a, tbl)
            tbl.waiters.append(susp)
            return
        self._emit_answer(owner, rule, head, env, delays)

    # --- answer emission (skip guards, answer abstraction) -----------------
    def _emit_answer(self, table: Table, rule: Optional[NormalRule],
                     head: Optional[Term], env: dict, delays: frozenset):
        if head is None or rule is None:
            return
        head = resolve(head, env)
        if rule.skips:
            head, skipped = self._apply_skips(rule, head)
            if skipped:
                delays = delays | {MARK_SKIP}
        if table.ans_k is not None:
            dec = decode_atom(head)
            abs_lit, changed = abstract_lit(dec, table.ans_k)
            if changed:
                self._op("answer_abstraction", original=dec.term(),
                         abstracted=abs_lit.term(),
                         subgoal=self._disp(table.key))
                head = encode_lit(abs_lit)
                delays = delays | {MARK_RADIAL}
        self._insert(table, head, delays)

    def _apply_skips(self, rule: NormalRule, head: Term):
        for sg in rule.skips:
            mapping: dict = {}
            tmpl = rename_term(sg.template, mapping, "_k", self.rn)
            s = unify(tmpl, head, {})
            if s is None:
                continue
            ok = True
            for cg in sg.condition:
                atom = rename_term(cg.atom, mapping, "_k", self.rn)
                atom = resolve(atom, s)
                try:
                    st, s2 = eval_builtin(atom, s)
                except _Inst:
                    ok = False
                    break
                if (st == "ok") == (cg.mode != "call"):
                    ok = False
                    break
                s = s2
            if not ok:
                continue
            for name, repl in zip(sg.var_names, sg.replacements):
                rv = mapping.get(name)
                nm = rv.name if rv is not None else name
                if isinstance(repl, Var):
                    self.rn[0] += 1
                    s[nm] = Var(f"_S{self.rn[0]}")
                else:
                    s[nm] = rename_term(repl, mapping, "_k", self.rn)
            return resolve(tmpl, s), True
        return head, False

    # --- delivery ------------------------------------------------------------
    def _deliver(self, susp: Susp):
        susp.scheduled = False
        entries = susp.callee.entry_list
        while susp.cursor < len(entries):
            e = entries[susp.cursor]
            susp.cursor += 1
            if e.dead:
                continue
            rn = rename_term(e.lit, {}, "_r", self.rn)
            env2 = unify(susp.target, rn, susp.env)
            if env2 is None:
                continue
            ds = susp.delays if e.is_true() else susp.delays | {e.ref()}
            self._run_frame(Frame(susp.owner, susp.rule, susp.head, env2,
                                  list(susp.todo), list(susp.pending), ds))

    # --- main loop -------------------------------------------------------
    def _drain(self):
        stack = self.stack
        while stack:
            task = stack.pop()
            self._tick()
            if task[0] == "deliver":
                self._deliver(task[1])
            elif task[0] == "rule":
                _, tbl, rule, atom = task
                self._activate(tbl, rule, atom)
            else:  # resume of a suspended frame
                self._run_frame(task[1])

    def run(self) -> EvaluationHandle:
        self._t0 = time.monotonic()
        if self.opts.interval_ms is not None:
            self._next_fire = self._t0 + self.opts.interval_ms / 1000.0
        try:
            self.goal_table = self._call_table(self.plan.call, None, None)
            self._round_loop()
        except _OpLimit:
            self._finish("failed", aborted=True,
                         error="operation budget exhausted")
            return self.handle
        except _UserAbort:
            self._finish("aborted", aborted=True)
            return self.handle
        except _Deadline:
            self.deadline_hit = True
            self._finish("aborted", aborted=True, error="deadline exceeded")
            return self.handle
        except BuiltinInstantiationError as exc:
            self._finish("failed", aborted=True, error=str(exc))
            raise
        self._finish("completed")
        return self.handle

    def _round_loop(self):
        while True:
            self._drain()
            incomplete = [t for t in self.tables if not t.completed]
            if not incomplete:
                return
            comps = self._tarjan(incomplete)
            progressed = False
            for comp in comps:
                comp.sort(key=lambda t: t.index)
                members = set(id(t) for t in comp)
                intra = [(t, w) for t in comp for w in t.waiters
                         if id(w.owner) in members]
                if intra:
                    for t, w in intra:
                        t.waiters.remove(w)
                        self._op("delay", subgoal=self._disp(w.owner.key),
                                 literal=mk_app(Atom("naf"),
                                                self._disp(w.target)))
                        fr = Frame(w.owner, w.rule, w.head, w.env,
                                   list(w.todo), list(w.pending),
                                   w.delays | {t.naf_elem(w.target)})
                        self.stack.append(("frame", fr))
                    progressed = True
                    break
                self._complete_scc(comp)
                progressed = True
                if self.stack:
                    break
            if not progressed:
                return

    # --- component completion ------------------------------------------------
    def _settle(self, comp: List[Table]):
        """Resolve the delay sets of a completing component exactly.

        The live answers form a finite residual system: each delay set is a
        rule body whose positive literals are answer references, whose
        negative literals are groups of answers blocking a naf, and whose
        restraint markers are forced-undefined constants.  The well-founded
        values of that system are computed by the alternating fixpoint and
        written back, so unfounded positive support (an answer justified
        only through itself) resolves to false rather than undefined."""
        members = set(id(t) for t in comp)
        unknown: List[AnswerEntry] = []
        uidx: Dict[int, int] = {}
        for t in comp:
            for e in t.entry_list:
                if not e.dead:
                    uidx[id(e)] = len(unknown)
                    unknown.append(e)
        bodies: List[list] = []
        for e in unknown:
            rules = []
            for ds in e.delay_sets:
                has_u = False
                pos: List[int] = []
                groups: List[frozenset] = []
                failed = False
                for el in ds:
                    if isinstance(el, str):
                        has_u = True
                    elif isinstance(el, AnswerRef):
                        e2 = el.entry
                        if e2.dead:
                            failed = True
                            break
                        j = uidx.get(id(e2))
                        if j is not None:
                            pos.append(j)
                        elif not e2.is_true():
                            has_u = True  # settled conditional answer
                    else:
                        if id(el.table) in members:
                            grp = set()
                            for e2 in el.table.entry_list:
                                if e2.dead:
                                    continue
                                rn = rename_term(e2.lit, {}, "_r", self.rn)
                                if unify(rn, el.lit, {}) is not None:
                                    grp.add(uidx[id(e2)])
                            if grp:
                                groups.append(frozenset(grp))
                        else:
                            d = self._decide_naf(el.table, el.lit)
                            if d == "false":
                                failed = True
                                break
                            if d == "undef":
                                has_u = True
                if not failed:
                    rules.append((has_u, tuple(pos), tuple(groups)))
            bodies.append(rules)

        def gamma(assume: set, weak: bool) -> set:
            out: set = set()
            changed = True
            while changed:
                changed = False
                for i in range(len(unknown)):
                    if i in out:
                        continue
                    for has_u, pos, groups in bodies[i]:
                        if has_u and not weak:
                            continue
                        if any(p not in out for p in pos):
                            continue
                        if any(g & assume for g in groups):
                            continue
                        out.add(i)
                        changed = True
                        break
            return out

        tset: set = set()
        uset = gamma(tset, True)
        while True:
            nt = gamma(uset, False)
            nu = gamma(nt, True)
            if nt == tset and nu == uset:
                break
            tset, uset = nt, nu

        for i, e in enumerate(unknown):
            t = e.table
            if i in tset:
                if not e.is_true():
                    e.delay_sets = [frozenset()]
                    self._op("simplification", subgoal=self._disp(t.key),
                             answer=self._disp(e.lit), outcome="succeeded")
            elif i not in uset:
                e.dead = True
                e.delay_sets = []
                self._op("simplification", subgoal=self._disp(t.key),
                         answer=self._disp(e.lit), outcome="failed")
        # prune the undefined answers' delay sets down to live support
        for e in unknown:
            if e.dead or e.is_true():
                continue
            new_sets: List[frozenset] = []
            for ds in e.delay_sets:
                keep = []
                failed = False
                for el in ds:
                    if isinstance(el, str):
                        keep.append(el)
                    elif isinstance(el, AnswerRef):
                        if el.entry.dead:
                            failed = True
                            break
                        if not el.entry.is_true():
                            keep.append(el)
                    else:
                        d = self._decide_naf(el.table, el.lit)
                        if d == "false":
                            failed = True
                            break
                        if d == "undef":
                            keep.append(el)
                if failed:
                    continue
                fs = frozenset(keep)
                if any(o <= fs for o in new_sets):
                    continue
                new_sets = [o for o in new_sets if not fs < o]
                new_sets.append(fs)
            e.delay_sets = new_sets

    def _complete_scc(self, comp: List[Table]):
        self._settle(comp)
        self._scc_n += 1
        for t in comp:
            t.completed = True
            t.scc_id = self._scc_n
            self._op("completed", subgoal=self._disp(t.key),
                     scc_id=self._scc_n)
        for t in comp:
            waiters = t.waiters
            t.waiters = []
            t.consumers = []
            for w in waiters:
                d = self._decide_naf(t, w.target)
                if d == "false":
                    continue
                delays = w.delays
                if d == "undef":
                    delays = delays | {t.naf_elem(w.target)}
                fr = Frame(w.owner, w.rule, w.head, w.env, list(w.todo),
                           list(w.pending), delays)
                self.stack.append(("frame", fr))

    # --- dependency components in reverse-topological order --------------
    def _tarjan(self, nodes: List[Table]) -> List[List[Table]]:
        idx: Dict[int, int] = {}
        low: Dict[int, int] = {}
        onstk: Dict[int, bool] = {}
        stk: List[Table] = []
        out: List[List[Table]] = []
        counter = [0]
        for root in nodes:
            if id(root) in idx:
                continue
            work: List[list] = [[root, 0, None]]
            while work:
                item = work[-1]
                v = item[0]
                if item[1] == 0:
                    idx[id(v)] = low[id(v)] = counter[0]
                    counter[0] += 1
                    stk.append(v)
                    onstk[id(v)] = True
                    item[2] = [d for d in v.deps if not d.completed]
                deps = item[2]
                descended = False
                while item[1] < len(deps):
                    w = deps[item[1]]
                    item[1] += 1
                    if id(w) not in idx:
                        work.append([w, 0, None])
                        descended = True
                        break
                    if onstk.get(id(w)):
                        if idx[id(w)] < low[id(v)]:
                            low[id(v)] = idx[id(w)]
                if descended:
                    continue
                work.pop()
                if low[id(v)] == idx[id(v)]:
                    comp = []
                    while True:
                        w = stk.pop()
                        onstk[id(w)] = False
                        comp.append(w)
                        if w is v:
                            break
                    out.append(comp)
                if work:
                    u = work[-1][0]
                    if low[id(v)] < low[id(u)]:
                        low[id(u)] = low[id(v)]
        return out

    # --- wrap-up -----------------------------------------------------------
    def _finish(self, state: str, aborted: bool = False,
                error: Optional[str] = None):
        self._closing = True
        if aborted:
            self._op("aborted", force=True)
        self.elapsed = time.monotonic() - self._t0
        self.handle.state = state
        if error:
            self.handle.error = error
        self.sink.close()

    def collect_answers(self) -> List[AnswerView]:
        tbl = self.goal_table
        if tbl is None:
            return []
        views: List[AnswerView] = []
        for e in tbl.entry_list:
            if e.dead:
                continue
            rn = rename_term(e.lit, {}, "_o", self.rn)
            s = unify(self.plan.call, rn, {})
            if s is None:
                continue
            bindings = {v: resolve(Var(v), s) for v in self.plan.out_vars}
            views.append(AnswerView(
                literal=self._disp(e.lit), tv=e.tv(), bindings=bindings,
                delays=self._delay_terms(
                    e.delay_sets[0]) if not e.is_true() and e.delay_sets
                else ()))
        views.sort(key=lambda v: 0 if v.tv == TRUE else 1)
        return views


# ---------------------------------------------------------------------------
# public entry points

def evaluate(kb: CompiledKB, goal, opts: Optional[EvalOptions] = None
             ) -> EvaluationHandle:
    plan = goal if isinstance(goal, GoalPlan) else compile_goal(kb, goal)
    eng = _Engine(kb, plan, opts or EvalOptions())
    return eng.run()


def timed_call(kb: CompiledKB, goal, interval_ms: float,
               handler: Callable, opts: Optional[EvalOptions] = None
               ) -> EvaluationHandle:
    opts = opts or EvalOptions()
    opts.interval_ms = interval_ms
    opts.on_interrupt = handler
    return evaluate(kb, goal, opts)


def evaluate_async(kb: CompiledKB, goal, opts: Optional[EvalOptions] = None
                   ) -> EvaluationHandle:
    """Start an evaluation on a daemon thread and return its handle at once.

    The handle is live immediately: callers may pause, resume, abort, or
    inspect counters while the run proceeds, and join() waits for the
    terminal state.
    """
    plan = goal if isinstance(goal, GoalPlan) else compile_goal(kb, goal)
    eng = _Engine(kb, plan, opts or EvalOptions())
    h = eng.handle

    def drive():
        try:
            eng.run()
        except Exception as exc:
            # run() records terminal state before re-raising; make sure a
            # crash never leaves the handle looking alive
            if h.state == "running":
                h.state = "failed"
                if h.error is None:
                    h.error = str(exc)

    t = threading.Thread(target=drive, daemon=True,
                         name="rlg-evaluate")
    h._thread = t
    t.start()
    return h


def _as_lit(literal) -> Lit:
    if isinstance(literal, Lit):
        return literal
    if isinstance(literal, str):
        f = reader.parse_goal(literal)
        if not isinstance(f, reader.FLit) or f.mode != "plain":
            raise ValueError("truth_of needs a single literal")
        return f.lit
    if isinstance(literal, Term):
        return decode_atom(literal) if not isinstance(literal, Var) \
            else Lit(literal)
    raise TypeError(f"not a literal: {literal!r}")


def truth_of(handle: EvaluationHandle, literal) -> str:
    """Truth value of a literal against the handle's tables.

    TRUE when some TRUE answer subsumes it; FALSE when a completed table
    covers its call and no live answer matches; UNDEFINED in between.
    Raises NoSuchTable when no table covers the literal's call pattern.
    A depth-abstracted table only supports a FALSE verdict for instances
    of the call that seeded it.
    """
    lit = _as_lit(literal)
    enc = encode_lit(lit)
    eng = handle._engine
    covered = False
    saw_undef = False
    for t in eng.tables:
        rn = rename_term(t.key, {}, "_q", eng.rn)
        if not subsumes(rn, enc):
            continue
        covered = True
        for e in t.entry_list:
            if e.dead:
                continue
            ern = rename_term(e.lit, {}, "_q", eng.rn)
            if subsumes(ern, enc) and e.is_true():
                return TRUE
            if unify(ern, enc, {}) is not None:
                saw_undef = True
        if not t.completed:
            saw_undef = True
        elif t.abstracted:
            srn = rename_term(t.seed, {}, "_q", eng.rn)
            if not subsumes(srn, enc):
                saw_undef = True
    if not covered:
        raise NoSuchTable(canonical_text(lit.term()))
    return UNDEFINED if saw_undef else FALSE


def table_snapshot(handle: EvaluationHandle) -> List[TableView]:
    if handle.state == "running":
        raise SnapshotWhileRunning("pause the evaluation first")
    eng = handle._engine
    views = []
    for t in eng.tables:
        answers = []
        for e in t.entry_list:
            if e.dead:
                continue
            answers.append(AnswerView(
                literal=eng._disp(e.lit), tv=e.tv(), bindings={},
                delays=eng._delay_terms(e.delay_sets[0])
                if not e.is_true() and e.delay_sets else ()))
        answers.sort(key=lambda v: 0 if v.tv == TRUE else 1)
        callers = tuple(
            (eng._disp(eng.tables[ci].key) if ci is not None else None, rid)
            for (ci, rid) in t.callers)
        views.append(TableView(
            subgoal=eng._disp(t.key),
            status="complete" if t.completed else "incomplete",
            scc_id=t.scc_id, call_count=t.call_count, callers=callers,
            answers=tuple(answers)))
    return views


@dataclass
class AnytimeResult:
    handle: EvaluationHandle
    radius: Optional[int]
    complete: bool                 # result carries no restraint markers
    budget_exhausted: bool
    rounds: List[Tuple[int, EvaluationHandle]] = field(default_factory=list)

    def answers(self) -> List[AnswerView]:
        return self.handle.answers()


def evaluate_anytime(kb: CompiledKB, goal, budget_ms: float,
                     schedule: Optional[Sequence[int]] = None,
                     opts: Optional[EvalOptions] = None) -> AnytimeResult:
    """Re-evaluates under growing abstraction radii until the budget runs
    out, the schedule is exhausted, or a round needed no restraint."""
    import copy
    if schedule is None:
        schedule = [1, 2, 4, 8, 16, 32, 64, 128]
    deadline = time.monotonic() + budget_ms / 1000.0
    base = opts or EvalOptions()
    plan = compile_goal(kb, goal)
    rounds: List[Tuple[int, EvaluationHandle]] = []
    best: Optional[EvaluationHandle] = None
    best_r: Optional[int] = None
    exhausted = False
    complete = False
    for r in schedule:
        o = copy.copy(base)
        o.subgoal_radius = r
        o.answer_radius = r
        o.deadline_s = deadline
        o.log_path = None
        eng = _Engine(kb, plan, o)
        h = eng.run()
        rounds.append((r, h))
        if h.state == "completed":
            best = h
            best_r = r
            restrained = any(t.abstracted for t in h.tables)
            if not restrained:
                for t in h.tables:
                    for e in t.entry_list:
                        for ds in e.delay_sets:
                            if MARK_RADIAL in ds:
                                restrained = True
                                break
            if not restrained:
                complete = True
                break
        else:
            exhausted = eng.deadline_hit
            break
        if time.monotonic() >= deadline:
            exhausted = True
            break
    if best is None:
        best = rounds[-1][1]
        best_r = rounds[-1][0]
    return AnytimeResult(handle=best, radius=best_r, complete=complete,
                         budget_exhausted=exhausted, rounds=rounds)
