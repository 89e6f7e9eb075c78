"""Compilation pipeline: source rules -> normal encoded rules.

Stages, in order: head normalization with contrapositives for implication
heads (omni), Lloyd-Topor body reduction to conjunctions of literals,
defeasibility rewrite plus argumentation theory, skip-directive extraction,
and the Hilog/negation encoding that folds every user atom into apply/n+1
and every classical negation into a twin predicate.

All stages are pure; compiling byte-identical sources yields structurally
identical output, including generated rule and auxiliary-predicate ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import reader
from .reader import (
    FAnd, FIff, FImp, FLit, FNaf, FOr, FQuant, Rule, TableDecl, parse_program,
)
from .terms import (
    App, Atom, Lit, Num, Str, Term, Var, mk_app, rename_term, resolve,
    unify, vars_of,
)


class TransformError(Exception):
    def __init__(self, message: str, rule_id: Optional[str] = None):
        self.rule_id = rule_id
        where = f" (rule {rule_id})" if rule_id else ""
        super().__init__(message + where)


class UnsupportedHead(TransformError):
    pass


class SkipVarNotInHead(TransformError):
    pass


# ---------------------------------------------------------------------------
# encoded-program vocabulary

RESERVED_PREDS = frozenset({
    "frame", "isa", "sub", "ruledesc", "opposes", "overrides",
    "defeated", "candidate", "conflicts", "refutes", "rebuts", "headof",
})

BUILTIN_PREDS = frozenset({"is", ">", "<", ">=", "=<", "=", "\\=", "undefined"})

_NEG_SUFFIX = "_neg"


def encode_lit(lit: Lit) -> Term:
    """Callable encoded form of a literal; classical negation is folded in."""
    a = lit.atom
    if isinstance(a, Var):
        if lit.neg:
            raise TransformError("cannot negate a metavariable call")
        return a
    if isinstance(a, Atom):
        fn, args = a, ()
    elif isinstance(a, App):
        fn, args = a.fn, a.args
    else:
        raise TransformError(f"not a callable atom: {a!r}")
    if isinstance(fn, Atom) and fn.name in BUILTIN_PREDS:
        if lit.neg:
            raise TransformError(f"cannot apply neg to builtin {fn.name}")
        return a
    if isinstance(fn, Atom) and fn.name in RESERVED_PREDS:
        name = fn.name + _NEG_SUFFIX if lit.neg else fn.name
        return App(Atom(name), tuple(args)) if args else Atom(name)
    functor: Term = fn
    if lit.neg:
        functor = mk_app(Atom("negf"), functor)
    return App(Atom("apply"), (functor,) + tuple(args))


_decode_cache: Dict[int, Tuple[Term, Lit]] = {}


def decode_atom(t: Term) -> Lit:
    """Inverse of encode_lit on encoded atoms; identity on everything else."""
    hit = _decode_cache.get(id(t))
    if hit is not None and hit[0] is t:
        return hit[1]
    out = _decode_atom(t)
    _decode_cache[id(t)] = (t, out)
    return out


def _decode_atom(t: Term) -> Lit:
    if isinstance(t, App) and isinstance(t.fn, Atom):
        name = t.fn.name
        if name == "apply":
            functor = t.args[0]
            rest = t.args[1:]
            neg = False
            if isinstance(functor, App) and functor.fn == Atom("negf") and len(functor.args) == 1:
                neg = True
                functor = functor.args[0]
            atom = App(functor, rest) if rest else functor
            return Lit(atom, neg)
        if name.endswith(_NEG_SUFFIX) and name[:-len(_NEG_SUFFIX)] in RESERVED_PREDS:
            return Lit(App(Atom(name[:-len(_NEG_SUFFIX)]), t.args), True)
    if isinstance(t, Atom) and t.name.endswith(_NEG_SUFFIX) and \
            t.name[:-len(_NEG_SUFFIX)] in RESERVED_PREDS:
        return Lit(Atom(t.name[:-len(_NEG_SUFFIX)]), True)
    return Lit(t)


_WILD = ("*",)


def pred_key(atom: Term):
    """Dispatch key of an encoded atom; None when the predicate is unresolved."""
    if isinstance(atom, Atom):
        return ("a", atom.name)
    if isinstance(atom, App) and isinstance(atom.fn, Atom):
        if atom.fn.name == "apply":
            p = atom.args[0]
            if p.ground:
                return ("h", len(atom.args), p.vh)
            return None
        return ("f", atom.fn.name, len(atom.args))
    return None


def is_builtin(atom: Term) -> bool:
    if isinstance(atom, Atom):
        return atom.name in BUILTIN_PREDS
    return isinstance(atom, App) and isinstance(atom.fn, Atom) and atom.fn.name in BUILTIN_PREDS


# ---------------------------------------------------------------------------
# normal rules

@dataclass(frozen=True)
class Goal:
    """One encoded body element."""
    atom: Term                    # encoded atom, or a Var for metacalls
    mode: str = "call"            # call | naf | unot
    guard: Optional[tuple] = None  # wish(ground(?V),...) postponement variables


@dataclass(frozen=True)
class SkipGuard:
    template: Term                     # encoded head pattern
    var_names: Tuple[str, ...]         # template variables under guard
    replacements: Tuple[Term, ...]     # same length; Var means "leave unbound"
    condition: Tuple[Goal, ...]        # builtin tests over template variables


@dataclass(frozen=True)
class NormalRule:
    head: Term                    # encoded, positive
    body: Tuple[Goal, ...]
    rule_id: str
    tag: str
    origin: str = "user"          # user | omni_contrapositive | lt_auxiliary |
                                  # defeasibility_theory | frame_axiom
    skips: Tuple[SkipGuard, ...] = ()


@dataclass
class CompiledKB:
    rules: Tuple[NormalRule, ...]
    table_decls: Dict[object, Tuple[Optional[int], Optional[int]]]
    descriptor_store: Tuple[Term, ...]          # encoded ruledesc facts
    headof_facts: Dict[str, List[Term]]         # tag -> encoded head templates
    tag_index: Dict[str, str]                   # rule_id -> tag
    theory: str                                 # none | at_simple | at_default
    textgen: Tuple[Tuple[Lit, str], ...]        # (decoded pattern, template)
    aux_count: int = 0
    rule_index: Dict[object, Tuple[NormalRule, ...]] = field(default_factory=dict)
    wild_rules: Tuple[NormalRule, ...] = ()
    rule_by_id: Dict[str, NormalRule] = field(default_factory=dict)

    def rules_for(self, atom: Term) -> Tuple[NormalRule, ...]:
        key = pred_key(atom)
        if key is None:
            return self.rules
        return self.rule_index.get(key, ()) + self.wild_rules

    def decl_for(self, atom: Term) -> Tuple[Optional[int], Optional[int]]:
        key = pred_key(atom)
        if key is None:
            return (None, None)
        return self.table_decls.get(key, (None, None))


# ---------------------------------------------------------------------------
# formula utilities

def formula_free_vars(f, bound=frozenset()) -> List[str]:
    """Free variable names in first-occurrence order."""
    out: List[str] = []
    seen = set(bound)

    def walk(f, bound):
        if f is None:
            return
        if isinstance(f, FLit):
            base = f.lit.atom
            for v in vars_of(base):
                if v.name not in bound and v.name not in seen:
                    seen.add(v.name)
                    out.append(v.name)
        elif isinstance(f, (FAnd, FOr)):
            for x in f.items:
                walk(x, bound)
        elif isinstance(f, FNaf):
            walk(f.body, bound)
        elif isinstance(f, (FImp, FIff)):
            walk(f.lhs, bound)
            walk(f.rhs, bound)
        elif isinstance(f, FQuant):
            walk(f.body, bound | set(f.vars))
        else:
            raise TypeError(f)

    walk(f, frozenset(bound))
    return out


def subst_formula(f, mapping: Dict[str, Term]):
    """Apply a name->term substitution, respecting quantifier shadowing."""
    if f is None or not mapping:
        return f
    if isinstance(f, FLit):
        guard = f.guard
        if guard:
            names = []
            for g in guard:
                t = mapping.get(g)
                if t is None:
                    names.append(g)
                elif isinstance(t, Var):
                    names.append(t.name)
                # a guard variable substituted by a non-variable is satisfied
            guard = tuple(names) or None
        return FLit(Lit(resolve(f.lit.atom, mapping), f.lit.neg), f.mode, guard)
    if isinstance(f, FAnd):
        return FAnd([subst_formula(x, mapping) for x in f.items])
    if isinstance(f, FOr):
        return FOr([subst_formula(x, mapping) for x in f.items])
    if isinstance(f, FNaf):
        return FNaf(subst_formula(f.body, mapping))
    if isinstance(f, FImp):
        return FImp(subst_formula(f.lhs, mapping), subst_formula(f.rhs, mapping))
    if isinstance(f, FIff):
        return FIff(subst_formula(f.lhs, mapping), subst_formula(f.rhs, mapping))
    if isinstance(f, FQuant):
        inner = {k: v for k, v in mapping.items() if k not in f.vars}
        return FQuant(f.kind, list(f.vars), subst_formula(f.body, inner))
    raise TypeError(f)


# ---------------------------------------------------------------------------
# omni: head normalization

@dataclass
class HeadedRule:
    head: Lit
    body: object  # formula or None
    rule_id: str
    tag: str
    strict: bool
    origin: str
    descriptor: dict
    id_explicit: bool
    line: int


def omni_transform(rule: Rule) -> List[HeadedRule]:
    """Normalize a rule head to a single literal, adding contrapositives for
    implication chains: (A1 ==> ... ==> An ==> C) yields n+1 rules."""
    chains = _head_chains(rule.head, rule.rule_id)
    out: List[HeadedRule] = []
    for hyps, concl in chains:
        if not hyps:
            out.append(_headed(rule, concl, rule.body, "user"))
            continue
        body = list(hyps)
        out.append(_headed(rule, concl, _with_body(body, rule.body), "user"))
        for i, h in enumerate(hyps):
            rest = hyps[:i] + hyps[i + 1:]
            contra_body = rest + [FLit(concl.opposite())]
            out.append(_headed(rule, h.opposite(),
                               _with_body(contra_body, rule.body),
                               "omni_contrapositive"))
    return out


def _with_body(items: List, extra) -> object:
    parts = [FLit(x) if isinstance(x, Lit) else x for x in items]
    if extra is not None:
        parts.append(extra)
    if len(parts) == 1:
        return parts[0]
    return FAnd(parts)


def _headed(rule: Rule, head: Lit, body, origin: str) -> HeadedRule:
    return HeadedRule(head=head, body=body, rule_id=rule.rule_id, tag=rule.tag,
                      strict=rule.strict, origin=origin,
                      descriptor=rule.descriptor, id_explicit=rule.id_explicit,
                      line=rule.line)


def _head_chains(f, rid, fresh=None) -> List[Tuple[List[Lit], Lit]]:
    """-> list of (hypothesis literals, conclusion literal)."""
    if fresh is None:
        fresh = [0]
    if isinstance(f, FLit):
        if f.mode != "plain" or f.guard is not None:
            raise UnsupportedHead("naf/unot/wish cannot appear in a rule head", rid)
        if isinstance(f.lit.atom, Var):
            raise UnsupportedHead("a rule head must be an atom", rid)
        return [([], f.lit)]
    if isinstance(f, FQuant):
        if f.kind == "exists":
            raise UnsupportedHead("existential quantification in a rule head", rid)
        return _head_chains(f.body, rid, fresh)
    if isinstance(f, FAnd):
        out = []
        for x in f.items:
            out.extend(_head_chains(x, rid, fresh))
        return out
    if isinstance(f, FIff):
        return _head_chains(FImp(f.lhs, f.rhs), rid, fresh) + \
            _head_chains(FImp(f.rhs, f.lhs), rid, fresh)
    if isinstance(f, FImp):
        hyps = _hypothesis_lits(f.lhs, rid)
        out = []
        for tail_hyps, concl in _head_chains(f.rhs, rid, fresh):
            out.append((hyps + tail_hyps, concl))
        return out
    if isinstance(f, (FOr, FNaf)):
        raise UnsupportedHead("or/naf cannot appear in a rule head", rid)
    raise UnsupportedHead(f"unsupported head construct {type(f).__name__}", rid)


def _hypothesis_lits(f, rid) -> List[Lit]:
    if isinstance(f, FQuant):
        if f.kind == "exists":
            raise UnsupportedHead("existential quantification in a rule head", rid)
        return _hypothesis_lits(f.body, rid)
    if isinstance(f, FAnd):
        out = []
        for x in f.items:
            out.extend(_hypothesis_lits(x, rid))
        return out
    if isinstance(f, FLit) and f.mode == "plain" and f.guard is None \
            and not isinstance(f.lit.atom, Var):
        return [f.lit]
    raise UnsupportedHead(
        "implication-head hypotheses must be plain literals", rid)


# ---------------------------------------------------------------------------
# Lloyd-Topor: body normalization

@dataclass
class PGoal:
    lit: Lit
    mode: str = "call"
    guard: Optional[tuple] = None


@dataclass
class ProtoRule:
    head: Lit
    body: List[PGoal]
    rule_id: str
    tag: str
    strict: bool
    origin: str
    descriptor: dict = field(default_factory=dict)
    id_explicit: bool = False
    line: int = 0


class _LT:
    """Body reduction with shared auxiliary-predicate numbering."""

    def __init__(self, start: int = 0):
        self.aux_n = start
        self.fresh_n = 0
        self.aux_rules: List[ProtoRule] = []

    def reduce(self, f) -> List[List[PGoal]]:
        if f is None:
            return [[]]
        if isinstance(f, FLit):
            mode = "call" if f.mode == "plain" else f.mode
            return [[PGoal(f.lit, mode, f.guard)]]
        if isinstance(f, FAnd):
            alts = [[]]
            for item in f.items:
                nxt = []
                for prefix in alts:
                    for alt in self.reduce(item):
                        nxt.append(prefix + alt)
                alts = nxt
            return alts
        if isinstance(f, FOr):
            out = []
            for item in f.items:
                out.extend(self.reduce(item))
            return out
        if isinstance(f, FNaf):
            return [[self._aux_naf(f.body)]]
        if isinstance(f, FQuant):
            if f.kind == "exists":
                return self.reduce(self._open(f))
            # forall(V)Phi == naf exists(V) not-Phi; the opened variables stay
            # local to the auxiliary rule, so the aux arguments come from the
            # still-quantified formula
            inner = self._open(f)
            return [[self._aux_naf(_nnf_neg(inner), fv=formula_free_vars(f))]]
        if isinstance(f, FImp):
            # P ==> Q in a body reads as naf (P and naf Q)
            return [[self._aux_naf(FAnd([f.lhs, _negate_default(f.rhs)]))]]
        if isinstance(f, FIff):
            return self.reduce(FAnd([FImp(f.lhs, f.rhs), FImp(f.rhs, f.lhs)]))
        raise TypeError(f)

    def _open(self, q: FQuant):
        mapping = {}
        for name in q.vars:
            self.fresh_n += 1
            mapping[name] = Var(f"_Q{self.fresh_n}")
        return subst_formula(q.body, mapping)

    def _aux_naf(self, phi, fv: Optional[List[str]] = None) -> PGoal:
        """Create aux(fv) :- phi and return the goal `naf aux(fv)`."""
        self.aux_n += 1
        name = f"aux{self.aux_n}"
        if fv is None:
            fv = formula_free_vars(phi)
        head_atom: Term = Atom(name) if not fv else \
            App(Atom(name), tuple(Var(v) for v in fv))
        head = Lit(head_atom)
        for alt in self.reduce(phi):
            self.aux_rules.append(ProtoRule(
                head=head, body=alt, rule_id=name, tag=name, strict=True,
                origin="lt_auxiliary"))
        return PGoal(head, "naf")


def _negate_default(f):
    if isinstance(f, FLit) and f.mode == "plain" and f.guard is None:
        return FLit(f.lit, "naf")
    return FNaf(f)


def _nnf_neg(f):
    """Negation normal form of the classical complement, naf for literals."""
    if isinstance(f, FLit):
        if f.guard is not None:
            raise TransformError("wish guards cannot occur under quantifiers")
        if f.mode == "plain":
            return FLit(f.lit, "naf")
        if f.mode == "naf":
            return FLit(f.lit, "plain")
        raise TransformError("unot cannot be negated")
    if isinstance(f, FAnd):
        return FOr([_nnf_neg(x) for x in f.items])
    if isinstance(f, FOr):
        return FAnd([_nnf_neg(x) for x in f.items])
    if isinstance(f, FNaf):
        return f.body
    if isinstance(f, FImp):
        return FAnd([f.lhs, _nnf_neg(f.rhs)])
    if isinstance(f, FIff):
        return FOr([FAnd([f.lhs, _nnf_neg(f.rhs)]),
                    FAnd([f.rhs, _nnf_neg(f.lhs)])])
    if isinstance(f, FQuant):
        return FQuant("exists" if f.kind == "forall" else "forall",
                      list(f.vars), _nnf_neg(f.body))
    raise TypeError(f)


def lloyd_topor(hr: HeadedRule, lt: Optional[_LT] = None) -> List[ProtoRule]:
    """Reduce one headed rule; aux rules accumulate on the shared _LT."""
    own = lt is None
    if own:
        lt = _LT()
    alts = lt.reduce(hr.body)
    out = []
    for alt in alts:
        out.append(ProtoRule(head=hr.head, body=alt, rule_id=hr.rule_id,
                             tag=hr.tag, strict=hr.strict, origin=hr.origin,
                             descriptor=hr.descriptor,
                             id_explicit=hr.id_explicit, line=hr.line))
    if own:
        out.extend(lt.aux_rules)
    return out


# ---------------------------------------------------------------------------
# defeasibility

AT_SIMPLE_SRC = """
@@strict defeated(?T) :- (refutes(?T2,?T) or rebuts(?T2,?T)), candidate(?T2).
@@strict refutes(?T,?T2) :- conflicts(?T,?T2), overrides(?T,?T2).
@@strict rebuts(?T,?T2) :- conflicts(?T,?T2), naf overrides(?T,?T2).
@@strict conflicts(?T,?T2) :- (opposes(?T,?T2) or opposes(?T2,?T)), candidate(?T2).
@@strict candidate(?T) :- headof(?T,?H), ?H.
"""

AT_DEFAULT_SRC = """
@@strict defeated(?T) :- (refutes(?T2,?T) or rebuts(?T2,?T)), candidate(?T2).
@@strict refutes(?T,?T2) :- conflicts(?T,?T2), overrides(?T,?T2).
@@strict rebuts(?T,?T2) :- conflicts(?T,?T2), naf overrides(?T,?T2), naf overrides(?T2,?T).
@@strict conflicts(?T,?T2) :- opposes(?T,?T2) or opposes(?T2,?T).
@@strict candidate(?T) :- headof(?T,?H), ?H.
"""

FRAME_AXIOMS_SRC = """
@@strict isa(?O,?C) :- sub(?D,?C), isa(?O,?D).
@@strict sub(?A,?C) :- sub(?A,?B), sub(?B,?C).
"""


def _compile_fixed(src: str, prefix: str, origin: str, lt: _LT) -> List[ProtoRule]:
    rules, _ = parse_program(src, file=f"<{prefix}>")
    out: List[ProtoRule] = []
    for i, r in enumerate(rules, 1):
        mark = len(lt.aux_rules)
        stmt: List[ProtoRule] = []
        for hr in omni_transform(r):
            stmt.extend(lloyd_topor(hr, lt))
        stmt.extend(lt.aux_rules[mark:])
        del lt.aux_rules[mark:]
        mains = [p for p in stmt if p.origin != "lt_auxiliary"]
        for p in mains:
            p.origin = origin
        if len(mains) == 1:
            mains[0].rule_id = mains[0].tag = f"_{prefix}{i}"
        else:
            for j, p in enumerate(mains, 1):
                p.rule_id = p.tag = f"_{prefix}{i}_d{j}"
        out.extend(stmt)
    return out


def is_defeasible(proto: ProtoRule) -> bool:
    return proto.id_explicit and not proto.strict and \
        proto.origin in ("user", "omni_contrapositive")


def defeasibility_transform(protos: List[ProtoRule], theory: str, lt: _LT):
    """Returns (rewritten protos + theory/fact protos, headof map)."""
    headof: Dict[str, List[Lit]] = {}
    tag_order: List[str] = []
    for p in protos:
        if not is_defeasible(p):
            continue
        p.body = p.body + [PGoal(Lit(mk_app(Atom("defeated"), Atom(p.tag))), "naf")]
        headof.setdefault(p.tag, [])
        if p.tag not in tag_order:
            tag_order.append(p.tag)
        if not any(h == p.head for h in headof[p.tag]):
            headof[p.tag].append(p.head)

    extra: List[ProtoRule] = []
    n = 0
    for tag in tag_order:
        for head in headof[tag]:
            n += 1
            fact = Lit(mk_app(Atom("headof"), Atom(tag), encode_lit(head)))
            extra.append(ProtoRule(head=fact, body=[], rule_id=f"_ho{n}",
                                   tag=f"_ho{n}", strict=True,
                                   origin="defeasibility_theory"))
    n = 0
    for i, t1 in enumerate(tag_order):
        for t2 in tag_order[i + 1:]:
            if _opposing(headof[t1], headof[t2]):
                n += 1
                fact = Lit(mk_app(Atom("opposes"), Atom(t1), Atom(t2)))
                extra.append(ProtoRule(head=fact, body=[], rule_id=f"_op{n}",
                                       tag=f"_op{n}", strict=True,
                                       origin="defeasibility_theory"))
    src = AT_SIMPLE_SRC if theory == "at_simple" else AT_DEFAULT_SRC
    theory_rules = _compile_fixed(src, "th", "defeasibility_theory", lt)
    return protos + extra + theory_rules, headof


def _opposing(heads1: List[Lit], heads2: List[Lit]) -> bool:
    ctr = [0]
    for h1 in heads1:
        for h2 in heads2:
            if h1.neg == h2.neg:
                continue
            a1 = rename_term(h1.atom, {}, "_L", ctr)
            a2 = rename_term(h2.atom, {}, "_R", ctr)
            if unify(a1, a2, {}) is not None:
                return True
    return False


# ---------------------------------------------------------------------------
# skip directives

def _extract_skips(protos: List[ProtoRule]):
    from .terms import is_list
    directives = []
    rest = []
    for p in protos:
        a = p.head.atom
        if p.head.neg or not (isinstance(a, App) and a.fn == Atom("skip") and len(a.args) == 3):
            rest.append(p)
            continue
        template, var_list, repl_list = a.args
        if not (is_list(var_list) and is_list(repl_list)):
            raise TransformError("skip/3 takes a template, a variable list and "
                                 "a replacement list", p.rule_id)
        names = []
        for v in var_list.args:
            if not isinstance(v, Var):
                raise TransformError("skip variable list must contain variables",
                                     p.rule_id)
            names.append(v.name)
        tmpl_vars = {v.name for v in vars_of(template)}
        for nm in names:
            if nm not in tmpl_vars:
                raise SkipVarNotInHead(
                    f"skip variable ?{nm} does not occur in the template",
                    p.rule_id)
        if len(repl_list.args) != len(names):
            raise TransformError("skip replacement list length differs from "
                                 "the variable list", p.rule_id)
        cond = []
        for g in p.body:
            if g.mode != "call" or g.guard is not None or \
                    isinstance(g.lit.atom, Var) or not is_builtin(g.lit.atom):
                raise TransformError(
                    "skip conditions may use only builtin tests", p.rule_id)
            cond.append(Goal(g.lit.atom, "call"))
        directives.append(SkipGuard(
            template=encode_lit(Lit(template)),
            var_names=tuple(names),
            replacements=tuple(repl_list.args),
            condition=tuple(cond)))
    return rest, directives


def _attach_skips(rules: List[NormalRule], directives) -> List[NormalRule]:
    if not directives:
        return rules
    out = []
    ctr = [0]
    for r in rules:
        hits = []
        for d in directives:
            probe = rename_term(d.template, {}, "_S", ctr)
            if unify(probe, r.head, {}) is not None:
                hits.append(d)
        if hits:
            r = NormalRule(head=r.head, body=r.body, rule_id=r.rule_id,
                           tag=r.tag, origin=r.origin, skips=tuple(hits))
        out.append(r)
    return out


# ---------------------------------------------------------------------------
# full pipeline

def _encode_proto(p: ProtoRule) -> NormalRule:
    if isinstance(p.head.atom, Var):
        raise TransformError("a rule head must be an atom", p.rule_id)
    if is_builtin(p.head.atom):
        raise TransformError(
            f"cannot define builtin predicate in rule head", p.rule_id)
    goals = []
    for g in p.body:
        atom = g.lit.atom if isinstance(g.lit.atom, Var) else encode_lit(g.lit)
        goals.append(Goal(atom=atom, mode=g.mode, guard=g.guard))
    return NormalRule(head=encode_lit(p.head), body=tuple(goals),
                      rule_id=p.rule_id, tag=p.tag, origin=p.origin)


def _decl_key(name: str, arity: int):
    if name in RESERVED_PREDS:
        return ("f", name, arity) if arity else ("a", name)
    synthetic = Lit(mk_app(Atom(name), *(Var(f"_D{i}") for i in range(arity)))
                    if arity else Atom(name))
    return pred_key(encode_lit(synthetic))


def compile_kb(sources, theory: str = "default") -> CompiledKB:
    """sources: program text, or a list of (name, text) pairs."""
    theory = {"simple": "at_simple", "default": "at_default",
              "at_simple": "at_simple", "at_default": "at_default",
              "none": "none"}[theory]
    if isinstance(sources, str):
        sources = [("<kb>", sources)]
    stmt_counter = [0]
    src_rules: List[Rule] = []
    decls: List[TableDecl] = []
    for name, text in sources:
        rs, ds = parse_program(text, file=name, stmt_counter=stmt_counter)
        src_rules.extend(rs)
        decls.extend(ds)

    textgen: List[Tuple[Lit, str]] = []
    kept: List[Rule] = []
    for r in src_rules:
        a = r.head
        if r.body is None and isinstance(a, FLit) and not a.lit.neg and \
                isinstance(a.lit.atom, App) and a.lit.atom.fn == Atom("textgen") and \
                len(a.lit.atom.args) == 2 and isinstance(a.lit.atom.args[1], Str):
            textgen.append((Lit(a.lit.atom.args[0]), a.lit.atom.args[1].value))
            continue
        kept.append(r)

    lt = _LT()
    protos: List[ProtoRule] = []
    descriptor_facts: List[ProtoRule] = []
    dn = 0
    for r in kept:
        stmt_protos: List[ProtoRule] = []
        mark = len(lt.aux_rules)
        for hr in omni_transform(r):
            stmt_protos.extend(lloyd_topor(hr, lt))
        stmt_protos.extend(lt.aux_rules[mark:])
        del lt.aux_rules[mark:]
        mains = [p for p in stmt_protos if p.origin != "lt_auxiliary"]
        if len(mains) > 1:
            for j, p in enumerate(mains, 1):
                p.rule_id = f"{r.rule_id}_d{j}"
        protos.extend(stmt_protos)
        if r.descriptor:
            for k, v in r.descriptor.items():
                dn += 1
                fact = Lit(mk_app(Atom("ruledesc"), Atom(r.rule_id), Atom(k), v))
                descriptor_facts.append(ProtoRule(
                    head=fact, body=[], rule_id=f"_rd{dn}", tag=f"_rd{dn}",
                    strict=True, origin="user"))
    protos.extend(descriptor_facts)

    protos, skip_directives = _extract_skips(protos)

    headof: Dict[str, List[Lit]] = {}
    if theory != "none":
        protos, headof = defeasibility_transform(protos, theory, lt)

    protos.extend(_compile_fixed(FRAME_AXIOMS_SRC, "fx", "frame_axiom", _LT()))

    rules = [_encode_proto(p) for p in protos]
    rules = _attach_skips(rules, skip_directives)

    table_decls: Dict[object, Tuple[Optional[int], Optional[int]]] = {}
    for d in decls:
        table_decls[_decl_key(d.name, d.arity)] = (d.subgoal_abstract,
                                                   d.answer_abstract)

    index: Dict[object, list] = {}
    wild: List[NormalRule] = []
    by_id: Dict[str, NormalRule] = {}
    for r in rules:
        key = pred_key(r.head)
        if key is None:
            wild.append(r)
        else:
            index.setdefault(key, []).append(r)
        by_id.setdefault(r.rule_id, r)

    kb = CompiledKB(
        rules=tuple(rules),
        table_decls=table_decls,
        descriptor_store=tuple(r.head for r in rules
                               if isinstance(r.head, App) and
                               r.head.fn == Atom("ruledesc") and not r.body),
        headof_facts={t: [encode_lit(h) for h in hs] for t, hs in headof.items()},
        tag_index={p.rule_id: p.tag for p in protos},
        theory=theory,
        textgen=tuple(textgen),
        aux_count=lt.aux_n,
    )
    kb.rule_index = {k: tuple(v) for k, v in index.items()}
    kb.wild_rules = tuple(wild)
    kb.rule_by_id = by_id
    return kb


# ---------------------------------------------------------------------------
# goal compilation

@dataclass
class GoalPlan:
    call: Term                       # encoded atom to evaluate
    out_vars: Tuple[str, ...]        # variable names reported in answers
    extra_rules: Tuple[NormalRule, ...] = ()
    display: Optional[Lit] = None    # decoded shape for presenting answers


def compile_goal(kb: CompiledKB, goal) -> GoalPlan:
    """goal: text or parsed formula -> evaluation plan against kb."""
    if isinstance(goal, str):
        goal = reader.parse_goal(goal)
    if isinstance(goal, FLit) and goal.mode == "plain" and goal.guard is None \
            and not isinstance(goal.lit.atom, Var) and not is_builtin(goal.lit.atom):
        atom = encode_lit(goal.lit)
        return GoalPlan(call=atom,
                        out_vars=tuple(v.name for v in vars_of(atom)),
                        display=goal.lit)
    fv = formula_free_vars(goal)
    head_atom: Term = Atom("__goal__") if not fv else \
        App(Atom("__goal__"), tuple(Var(v) for v in fv))
    lt = _LT(start=kb.aux_count)
    hr = HeadedRule(head=Lit(head_atom), body=goal, rule_id="__goal__",
                    tag="__goal__", strict=True, origin="user",
                    descriptor={}, id_explicit=False, line=0)
    protos = lloyd_topor(hr, lt) + lt.aux_rules
    extra = tuple(_encode_proto(p) for p in protos)
    call = encode_lit(Lit(head_atom))
    return GoalPlan(call=call, out_vars=tuple(fv), extra_rules=extra,
                    display=Lit(head_atom))
