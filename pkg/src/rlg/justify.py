"""Justification graphs over completed evaluations.

A justification explains why a literal came out true, false, or undefined
by meta-interpreting the compiled rules against the answer tables of a
finished evaluation.  Nothing is re-evaluated: every truth value shown in
the graph is read back from the tables, so building a justification never
changes the handle's operation counter.

The graph has four node kinds:

  G  a (sub)goal literal, colored by its truth value
  A  an argument: one rule instance whose head matched the goal
  F  an asserted fact
  P  prioritization metadata: an overrides fact that decided a refutation

Arguments for the opposing literal appear on the "con" side.  Nodes are
created lazily layer by layer; each carries an expansion flag telling the
caller whether unexplored pro and/or con children remain.
"""

import re
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from . import reader
from .engine import (
    BuiltinInstantiationError, EvaluationHandle, NoSuchTable, eval_builtin,
    truth_of, FALSE, TRUE, UNDEFINED, _MARKS,
)
from .reader import term_text
from .terms import (
    App, Atom, Lit, Num, Str, Term, Var, canonical_text, mk_app, rename_term,
    resolve, subsumes, unify, variant_key,
)
from .transform import (
    CompiledKB, Goal, NormalRule, decode_atom, encode_lit, is_builtin,
)


class UnknownNode(Exception):
    """Raised when a node id does not belong to the session."""


GREEN = "green"
RED = "red"
AMBER = "amber"
_COLOR = {TRUE: GREEN, FALSE: RED, UNDEFINED: AMBER, None: AMBER}

UNDEFEATED = "undefeated_bang"
DEFEATED = "defeated_downarrow"

PRO = "pro"
CON = "con_bar"

EXP_BOTH = "more_pro_and_con_black_plus"
EXP_PRO = "more_pro_green_plus"
EXP_NONE = "none"

_RANK = {FALSE: 0, UNDEFINED: 1, TRUE: 2}
_FLIP = {TRUE: FALSE, FALSE: TRUE, UNDEFINED: UNDEFINED, None: UNDEFINED}


def _min_tv(a: str, b: str) -> str:
    return a if _RANK[a] <= _RANK[b] else b


# ---------------------------------------------------------------------------
# English rendering

@dataclass(frozen=True)
class TextgenRule:
    """One display rule: a literal pattern and a template with ?Var slots."""
    pattern: Lit
    template: str
    priority: int = 0


_SLOT = re.compile(r"\?([A-Za-z_][A-Za-z0-9_]*)")


def _match_bind(pat: Term, t: Term) -> Optional[Dict[str, Term]]:
    """One-sided match of pattern onto t; returns pattern-variable bindings."""
    binding: Dict[str, Term] = {}
    stack = [(pat, t)]
    while stack:
        x, y = stack.pop()
        if isinstance(x, Var):
            seen = binding.get(x.name)
            if seen is None:
                binding[x.name] = y
            elif seen != y:
                return None
            continue
        if isinstance(y, Var):
            return None
        if type(x) is not type(y):
            return None
        if isinstance(x, Atom):
            if x.name != y.name:
                return None
        elif isinstance(x, Num):
            if x.value != y.value:
                return None
        elif isinstance(x, Str):
            if x.value != y.value:
                return None
        else:
            if len(x.args) != len(y.args):
                return None
            stack.append((x.fn, y.fn))
            stack.extend(zip(x.args, y.args))
    return binding


def _fill(template: str, binding: Dict[str, Term]) -> str:
    def repl(m):
        t = binding.get(m.group(1))
        return term_text(t) if t is not None else m.group(0)
    return _SLOT.sub(repl, template)


def textgen_rules_of(kb: CompiledKB) -> Tuple[TextgenRule, ...]:
    """Display rules collected from textgen(pattern, "template") facts."""
    return tuple(TextgenRule(pat, tmpl) for pat, tmpl in kb.textgen)


def render_literal(lit: Lit, rules=()) -> str:
    """English text for a literal.

    The highest-priority matching pattern wins (source order breaks ties).
    Negative literals without their own pattern wrap the positive rendering
    in "It is not the case that ... .".  isa/2 has a readable default and
    anything else falls back to canonical text.
    """
    for tr in sorted(rules, key=lambda r: -r.priority):
        if tr.pattern.neg != lit.neg:
            continue
        b = _match_bind(tr.pattern.atom, lit.atom)
        if b is not None:
            return _fill(tr.template, b)
    if lit.neg:
        pos = render_literal(Lit(lit.atom), rules).rstrip(".")
        return f"It is not the case that {pos}."
    a = lit.atom
    if isinstance(a, App) and a.fn == Atom("isa") and len(a.args) == 2:
        return (f"{term_text(a.args[0])} is an instance of the class "
                f"{term_text(a.args[1])}")
    return canonical_text(lit.term())


# ---------------------------------------------------------------------------
# nodes

@dataclass
class JustificationNode:
    id: str
    kind: str                           # G | A | F | P
    payload: object                     # Lit (G,F) | (rule_id, tag, body) (A)
                                        # | (winner, loser) (P)
    tv_color: Optional[str] = None      # green | red | amber (G, F)
    arg_status: Optional[str] = None    # undefeated_bang | defeated_downarrow
    side: str = PRO                     # pro | con_bar
    expansion: str = EXP_NONE
    note: Optional[str] = None          # revisited | restrained | unevaluated
    naf: bool = False                   # G body literal under naf/unot
    children: Optional[List[str]] = None
    session: Optional["Justification"] = field(default=None, repr=False)
    _thunk: Optional[Callable] = field(default=None, repr=False)

    @property
    def text(self) -> str:
        if self.session is not None:
            return self.session.render_node(self)
        return render(self, ())

    def as_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "text": self.text,
            "tvColor": self.tv_color,
            "argStatus": self.arg_status,
            "side": self.side,
            "expansion": self.expansion,
            "childIds": list(self.children) if self.children else [],
        }


def render(node, textgen_rules=()) -> str:
    """Text for a node (or a bare literal) under the given display rules."""
    if isinstance(node, Lit):
        return render_literal(node, textgen_rules)
    if node.kind in ("G", "F"):
        body = render_literal(node.payload, textgen_rules)
        note = f" ({node.note})" if node.note else ""
        return ("naf " + body if node.naf else body) + note
    if node.kind == "A":
        rule_id = node.payload[0]
        return f"rule {rule_id}"
    winner, loser = node.payload
    return render_literal(
        Lit(mk_app(Atom("overrides"), Atom(winner), Atom(loser))),
        textgen_rules)


# ---------------------------------------------------------------------------
# session

class Justification:
    """A navigable justification over one completed evaluation.

    The session owns node ids: expand() accepts an id (or node) and
    materializes the next layer.  Tables are immutable after completion,
    so several sessions may read the same handle concurrently.
    """

    def __init__(self, handle: EvaluationHandle):
        if handle.state != "completed":
            raise ValueError("justification requires a completed evaluation")
        self.handle = handle
        self.kb: CompiledKB = handle.kb
        self.textgen = textgen_rules_of(self.kb)
        self.nodes: Dict[str, JustificationNode] = {}
        self._count = 0
        self._rn = [0]

    # -- public ----------------------------------------------------------

    def root(self, literal) -> JustificationNode:
        lit = self._as_lit(literal)
        truth_of(self.handle, lit)   # raises NoSuchTable when never called
        return self._goal_node(lit, "call", PRO, frozenset())

    def expand(self, node) -> List[JustificationNode]:
        nid = node.id if isinstance(node, JustificationNode) else node
        n = self.nodes.get(nid)
        if n is None:
            raise UnknownNode(str(nid))
        if n.children is not None:
            return [self.nodes[c] for c in n.children]
        kids = n._thunk() if n._thunk is not None else []
        n.children = [k.id for k in kids]
        n.expansion = EXP_NONE
        n._thunk = None
        return kids

    def node(self, nid: str) -> JustificationNode:
        n = self.nodes.get(nid)
        if n is None:
            raise UnknownNode(str(nid))
        return n

    def render_node(self, node) -> str:
        return render(node, self.textgen)

    # -- literal plumbing --------------------------------------------------

    @staticmethod
    def _as_lit(literal) -> Lit:
        if isinstance(literal, Lit):
            return literal
        if isinstance(literal, str):
            f = reader.parse_goal(literal)
            if not isinstance(f, reader.FLit) or f.mode != "plain":
                raise ValueError("justify needs a single literal")
            return f.lit
        if isinstance(literal, Term):
            return decode_atom(literal)
        raise TypeError(f"not a literal: {literal!r}")

    def _fresh(self) -> str:
        self._count += 1
        return f"n{self._count}"

    def _register(self, node: JustificationNode) -> JustificationNode:
        self.nodes[node.id] = node
        return node

    # -- truth lookups (tables only; never re-evaluates) -------------------

    def _tv_of_enc(self, enc: Term) -> Optional[str]:
        if is_builtin(enc):
            try:
                status, _ = eval_builtin(enc, {})
            except BuiltinInstantiationError:
                return UNDEFINED
            return {"ok": TRUE, "fail": FALSE, "undef": UNDEFINED}[status]
        try:
            return truth_of(self.handle, decode_atom(enc))
        except NoSuchTable:
            return None

    def _covering_table(self, enc: Term):
        fallback = None
        for t in self.handle.tables:
            rn = rename_term(t.key, {}, "_j", self._rn)
            if not subsumes(rn, enc):
                continue
            if t.completed:
                return t
            if fallback is None:
                fallback = t
        return fallback

    def _answer_matches(self, enc: Term, env: dict):
        """Live answers unifying enc under env, true entries first.

        Returns None when no table covers the call (never evaluated).
        """
        t = self._covering_table(enc)
        if t is None:
            return None
        out = []
        for e in t.entry_list:
            if e.dead or not e.delay_sets:
                continue
            ern = rename_term(e.lit, {}, "_j", self._rn)
            s = unify(ern, enc, env)
            if s is None:
                continue
            out.append((TRUE if e.is_true() else UNDEFINED, s))
        out.sort(key=lambda p: 0 if p[0] == TRUE else 1)
        return out

    def _restrained(self, enc: Term) -> bool:
        """True when matching answers carry a restraint marker."""
        t = self._covering_table(enc)
        if t is None:
            return False
        if t.abstracted:
            srn = rename_term(t.seed, {}, "_j", self._rn)
            if not subsumes(srn, enc):
                return True
        for e in t.entry_list:
            if e.dead or e.is_true():
                continue
            ern = rename_term(e.lit, {}, "_j", self._rn)
            if unify(ern, enc, {}) is None:
                continue
            for ds in e.delay_sets:
                if any(isinstance(d, str) and d in _MARKS for d in ds):
                    return True
        return False

    # -- three-valued body join --------------------------------------------

    def _best(self, goals, i: int, env: dict):
        """Best achievable (tv, env, fail_index) for goals[i:] under env.

        fail_index is the position of a body literal that is false under
        the returned env (meaningful only when tv is false).
        """
        if i == len(goals):
            return (TRUE, env, -1)
        g = goals[i]
        atom = resolve(g.atom, env)
        if isinstance(atom, Var):
            tv2, env2, fi = self._best(goals, i + 1, env)
            return (_min_tv(UNDEFINED, tv2), env2, fi)
        if g.mode == "call" and is_builtin(atom):
            try:
                status, env2 = eval_builtin(atom, dict(env))
            except BuiltinInstantiationError:
                status, env2 = "undef", env
            if status == "fail":
                return (FALSE, env, i)
            tv2, env3, fi = self._best(goals, i + 1, env2)
            own = TRUE if status == "ok" else UNDEFINED
            return (_min_tv(own, tv2), env3, fi)
        if g.mode in ("naf", "unot"):
            ntv = _FLIP[self._tv_of_enc(atom)]
            if ntv == FALSE:
                return (FALSE, env, i)
            tv2, env2, fi = self._best(goals, i + 1, env)
            return (_min_tv(ntv, tv2), env2, fi)
        matches = self._answer_matches(atom, env)
        if matches is None:
            tv2, env2, fi = self._best(goals, i + 1, env)
            return (_min_tv(UNDEFINED, tv2), env2, fi)
        best = (FALSE, env, i)
        for tv_a, env2 in matches:
            tv2, env3, fi = self._best(goals, i + 1, env2)
            tv = _min_tv(tv_a, tv2)
            cand = (tv, env3, fi if tv2 == FALSE else i)
            if _RANK[tv] > _RANK[best[0]]:
                best = cand
            if best[0] == TRUE:
                break
        return best

    # -- node builders -----------------------------------------------------

    def _goal_node(self, lit: Lit, mode: str, side: str,
                   ancestors: frozenset) -> JustificationNode:
        naf = mode in ("naf", "unot")
        enc = encode_lit(lit)
        if isinstance(enc, Var):
            node = JustificationNode(
                id=self._fresh(), kind="G", payload=lit, tv_color=AMBER,
                side=side, naf=naf, note="unevaluated", session=self)
            node.children = []
            return self._register(node)
        tv = self._tv_of_enc(enc)
        note = None
        if tv is None:
            note = "unevaluated"
        color = _COLOR[_FLIP[tv] if naf else tv]
        key = variant_key(enc)
        if note is None and key in ancestors:
            note = "revisited"
        if note is None and tv == UNDEFINED and self._restrained(enc):
            note = "restrained"
        node = JustificationNode(
            id=self._fresh(), kind="G", payload=lit, tv_color=color,
            side=side, naf=naf, note=note, session=self)
        if note is not None or is_builtin(enc):
            node.expansion = EXP_NONE
            node.children = []
            return self._register(node)
        inner = ancestors | {key}
        if naf:
            # the inner positive goal registers its own key when it expands
            node.expansion = EXP_PRO
            node._thunk = lambda: [self._goal_node(lit, "call", PRO,
                                                   ancestors)]
            return self._register(node)
        pro = self._matching_rules(enc)
        opp = Lit(lit.atom, not lit.neg)
        con = self._matching_rules(encode_lit(opp))
        node.expansion = self._flag(len(pro), len(con))
        if not pro and not con:
            node.children = []
        else:
            node._thunk = lambda: (
                [self._rule_node(r, s, rh, rbody, PRO, inner) for
                 (r, s, rh, rbody) in pro] +
                [self._rule_node(r, s, rh, rbody, CON, inner) for
                 (r, s, rh, rbody) in con])
        return self._register(node)

    @staticmethod
    def _flag(npro: int, ncon: int) -> str:
        if npro and ncon:
            return EXP_BOTH
        if npro:
            return EXP_PRO
        return EXP_NONE

    def _matching_rules(self, enc: Term):
        """Rule instances whose renamed head unifies with enc."""
        if isinstance(enc, Var):
            return []
        out = []
        for r in self.kb.rules_for(enc):
            mapping: dict = {}
            rh = rename_term(r.head, mapping, "_j", self._rn)
            s = unify(rh, enc, {})
            if s is None:
                continue
            rbody = tuple(
                Goal(rename_term(g.atom, mapping, "_j", self._rn), g.mode,
                     g.guard)
                for g in r.body)
            out.append((r, s, rh, rbody))
        return out

    def _rule_node(self, rule: NormalRule, env: dict, rhead: Term, rbody,
                   side: str, ancestors: frozenset) -> JustificationNode:
        self_defeat = mk_app(Atom("defeated"), Atom(rule.tag))
        displayed = tuple(g for g in rbody
                          if not (g.mode == "naf" and g.atom == self_defeat))
        defeasible = len(displayed) != len(rbody)
        defeat_tv = self._tv_of_enc(self_defeat) if defeasible else FALSE
        if defeat_tv == TRUE:
            status = DEFEATED
        elif defeat_tv == FALSE:
            status = UNDEFEATED
        else:
            status = None
        tv, wenv, _fail = self._best(displayed, 0, env)
        body_lits = tuple((g.mode, decode_atom(resolve(g.atom, wenv)))
                          for g in displayed)
        if not displayed and status == UNDEFEATED:
            head_lit = decode_atom(resolve(rhead, env))
            node = JustificationNode(
                id=self._fresh(), kind="F", payload=head_lit,
                tv_color=GREEN, side=side, session=self)
            node.children = []
            return self._register(node)
        priority = self._priority_pairs(rule.tag) if status == DEFEATED else []
        node = JustificationNode(
            id=self._fresh(), kind="A",
            payload=(rule.rule_id, rule.tag, body_lits),
            arg_status=status, side=side, session=self)
        node.expansion = self._flag(len(displayed), len(priority))
        if not displayed and not priority:
            node.children = []
        else:
            goals = tuple(zip(displayed, body_lits))
            node._thunk = lambda: (
                [self._goal_node(bl, g.mode, PRO, ancestors)
                 for g, (_m, bl) in goals] +
                [self._priority_node(w, l) for (w, l) in priority])
        return self._register(node)

    def _priority_pairs(self, loser: str) -> List[Tuple[str, str]]:
        """overrides facts that decided a refutation of the loser tag."""
        pairs = []
        w = rename_term(Var("W"), {}, "_j", self._rn)
        refutes = mk_app(Atom("refutes"), w, Atom(loser))
        matches = self._answer_matches(refutes, {})
        if matches:
            for tv_a, s in matches:
                if tv_a != TRUE:
                    continue
                winner = resolve(w, s)
                if isinstance(winner, Atom):
                    pairs.append((winner.name, loser))
        if not pairs:
            over = mk_app(Atom("overrides"),
                          rename_term(Var("W"), {}, "_j", self._rn),
                          Atom(loser))
            for r, s, rh, rbody in self._matching_rules(over):
                sd = mk_app(Atom("defeated"), Atom(r.tag))
                if any(not (g.mode == "naf" and g.atom == sd)
                       for g in rbody):
                    continue   # not a bare overrides fact
                inst = resolve(rh, s)
                if isinstance(inst, App) and isinstance(inst.args[0], Atom):
                    pairs.append((inst.args[0].name, loser))
        seen = set()
        out = []
        for p in pairs:
            if p not in seen:
                seen.add(p)
                out.append(p)
        return out

    def _priority_node(self, winner: str, loser: str) -> JustificationNode:
        node = JustificationNode(
            id=self._fresh(), kind="P", payload=(winner, loser),
            side=CON, session=self)
        node.children = []
        return self._register(node)


# ---------------------------------------------------------------------------
# module-level conveniences

def justify_root(handle: EvaluationHandle, literal) -> JustificationNode:
    """Root G node for the literal's truth under a completed evaluation."""
    return Justification(handle).root(literal)


def expand(node) -> List[JustificationNode]:
    """Materialize and return the next layer under a node."""
    if not isinstance(node, JustificationNode) or node.session is None:
        raise UnknownNode(str(node))
    return node.session.expand(node.id)
