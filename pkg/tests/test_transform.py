"""Compilation pipeline: omni heads, Lloyd-Topor bodies, defeasibility,
skip extraction, and the Hilog/negation encoding."""

import pytest
from hypothesis import given, strategies as st

from rlg.reader import parse_program
from rlg.terms import App, Atom, Lit, Num, Str, Term, Var, mk_app, parse_term
from rlg.transform import (
    CompiledKB, Goal, NormalRule, SkipVarNotInHead, TransformError,
    UnsupportedHead, compile_goal, compile_kb, decode_atom, encode_lit,
    is_builtin, lloyd_topor, omni_transform, pred_key,
)

VACUOLE = ("forall(?x6)^contractile(vacuole)(?x6) ==> "
           "forall(?x9)^isotonic(environment)(?x9) ==> "
           "inactive(in(?x9))(?x6).")


def rules_of(text, theory="none"):
    kb = compile_kb(text, theory=theory)
    return [r for r in kb.rules if r.origin != "frame_axiom"]


def shape(rule: NormalRule):
    head = decode_atom(rule.head)
    body = []
    for g in rule.body:
        lit = g.atom if isinstance(g.atom, Var) else decode_atom(g.atom)
        body.append((g.mode, lit, g.guard))
    return head, body


def lit(text):
    t = parse_term(text.replace("neg ", "")) if text.startswith("neg ") else parse_term(text)
    return Lit(t, text.startswith("neg "))


def test_omni_vacuole_three_rules():
    rules = rules_of(VACUOLE)
    assert len(rules) == 3
    contr = "contractile(vacuole)(?x6)"
    iso = "isotonic(environment)(?x9)"
    inact = "inactive(in(?x9))(?x6)"
    expected = {
        (lit(inact), (("call", lit(contr), None), ("call", lit(iso), None))),
        (lit("neg " + contr), (("call", lit(iso), None),
                               ("call", lit("neg " + inact), None))),
        (lit("neg " + iso), (("call", lit(contr), None),
                             ("call", lit("neg " + inact), None))),
    }
    got = {(h, tuple(b)) for h, b in map(shape, rules)}
    assert got == expected


def test_omni_shared_tag_distinct_ids():
    rules = rules_of(VACUOLE)
    assert len({r.rule_id for r in rules}) == 3
    assert len({r.tag for r in rules}) == 1
    assert sorted(r.origin for r in rules) == \
        ["omni_contrapositive", "omni_contrapositive", "user"]


def test_omni_single_implication():
    rules = rules_of("a ==> b.")
    got = {(h, tuple(b)) for h, b in map(shape, rules)}
    assert got == {
        (lit("b"), (("call", lit("a"), None),)),
        (lit("neg a"), (("call", lit("neg b"), None),)),
    }


def test_omni_identity_on_plain_rules():
    rules = rules_of("p(?X) :- q(?X).")
    assert len(rules) == 1
    h, b = shape(rules[0])
    assert h == lit("p(?X)") and b == [("call", lit("q(?X)"), None)]


def test_omni_hypothesis_count_property():
    for n in range(1, 5):
        hyps = " and ".join(f"h{i}(?X)" for i in range(n))
        rules = rules_of(f"{hyps} ==> c(?X).")
        assert len(rules) == n + 1


def test_omni_body_carried_through():
    rules = rules_of("a ==> b :- w.")
    shapes = {(h, tuple(b)) for h, b in map(shape, rules)}
    assert (lit("b"), (("call", lit("a"), None), ("call", lit("w"), None))) in shapes
    assert (lit("neg a"), (("call", lit("neg b"), None),
                           ("call", lit("w"), None))) in shapes


def test_omni_iff_head():
    rules = rules_of("p <==> q.")
    shapes = {(h, tuple(b)) for h, b in map(shape, rules)}
    assert (lit("q"), (("call", lit("p"), None),)) in shapes
    assert (lit("p"), (("call", lit("q"), None),)) in shapes
    assert (lit("neg p"), (("call", lit("neg q"), None),)) in shapes
    assert (lit("neg q"), (("call", lit("neg p"), None),)) in shapes


def test_unsupported_heads():
    for bad in ["a or b.", "naf a.", "exists(?X)^p(?X).",
                "a ==> naf b.", "(naf a) ==> b."]:
        with pytest.raises(UnsupportedHead):
            compile_kb(bad)


def test_lt_forall_iff_body():
    rules = rules_of(
        "p_equivalent(?X,?Y) :- forall(?Z)(p(?Z,?X) <==> p(?Z,?Y)).")
    assert len(rules) == 3
    main = [r for r in rules if r.origin == "user"]
    auxes = [r for r in rules if r.origin == "lt_auxiliary"]
    assert len(main) == 1 and len(auxes) == 2
    h, b = shape(main[0])
    assert h == lit("p_equivalent(?X,?Y)")
    assert len(b) == 1 and b[0][0] == "naf"
    aux_call = b[0][1].atom
    assert isinstance(aux_call, App)
    assert len(aux_call.args) == 2  # aux over exactly ?X,?Y; ?Z stays local
    for aux in auxes:
        ah, ab = shape(aux)
        assert ah.atom.fn == aux_call.fn
        modes = [m for m, _, _ in ab]
        assert modes == ["call", "naf"]
    bodies = {tuple((m, l.atom.fn) for m, l, _ in shape(aux)[1]) for aux in auxes}
    assert len(bodies) == 1  # both alternatives are p-calls, one per direction


def test_lt_or_split():
    rules = rules_of("h :- a or b.")
    assert len(rules) == 2
    assert {shape(r)[1][0][1] for r in rules} == {lit("a"), lit("b")}
    assert {r.rule_id for r in rules} == {"_s1_d1", "_s1_d2"}


def test_lt_naf_conjunction_aux():
    rules = rules_of("h :- naf (a and b).")
    main = next(r for r in rules if r.origin == "user")
    aux = next(r for r in rules if r.origin == "lt_auxiliary")
    h, b = shape(main)
    assert b[0][0] == "naf" and b[0][1].atom == decode_atom(aux.head).atom
    _, ab = shape(aux)
    assert [(m, l) for m, l, _ in ab] == [("call", lit("a")), ("call", lit("b"))]


def test_lt_body_implication_is_default_valued():
    rules = rules_of("h :- p ==> q.")
    main = next(r for r in rules if r.origin == "user")
    aux = next(r for r in rules if r.origin == "lt_auxiliary")
    assert shape(main)[1][0][0] == "naf"
    _, ab = shape(aux)
    assert [(m, l) for m, l, _ in ab] == [("call", lit("p")), ("naf", lit("q"))]


def test_lt_exists_opens_locally():
    rules = rules_of("h(?X) :- exists(?Y)^r(?X,?Y).")
    assert len(rules) == 1
    _, b = shape(rules[0])
    atom = b[0][1].atom
    assert atom.args[0] == Var("X") and isinstance(atom.args[1], Var)
    assert atom.args[1].name != "Y"  # freshly opened


def test_wish_guard_survives_pipeline():
    rules = rules_of("main(?Y) :- wish(ground(?X))^p(?X,?Y) and q(?X).")
    _, b = shape(rules[0])
    assert b[0] == ("call", lit("p(?X,?Y)"), ("X",))
    assert b[1] == ("call", lit("q(?X)"), None)


CELLS = """
cell52 # red(blood(cell)).
red(blood(cell)) :: eukaryotic(cell).
@!{r1} ?x[has->nucleus] :- ?x # eukaryotic(cell).
@!{r2} neg ?x[has->nucleus] :- ?x # red(blood(cell)).
overrides(r2,r1).
"""


def test_defeasibility_rewrites_only_tagged_rules():
    kb = compile_kb(CELLS, theory="default")
    r1 = kb.rule_by_id["r1"]
    r2 = kb.rule_by_id["r2"]
    for r, tag in [(r1, "r1"), (r2, "r2")]:
        last = r.body[-1]
        assert last.mode == "naf"
        assert decode_atom(last.atom) == Lit(parse_term(f"defeated({tag})"))
    facts = kb.rule_by_id["_s1"]
    assert facts.body == ()  # strict fact untouched
    assert all("defeated" not in str(decode_atom(g.atom))
               for r in kb.rules if r.origin == "frame_axiom" for g in r.body)


def test_defeasibility_headof_and_auto_opposes():
    kb = compile_kb(CELLS, theory="default")
    assert set(kb.headof_facts) == {"r1", "r2"}
    opposes = [r for r in kb.rules
               if isinstance(r.head, App) and r.head.fn == Atom("opposes")]
    assert len(opposes) == 1
    assert opposes[0].head.args == (Atom("r1"), Atom("r2"))
    heads = [decode_atom(t) for t in kb.headof_facts["r1"]]
    assert heads == [Lit(parse_term("frame(?x,has,nucleus)"))]
    heads2 = [decode_atom(t) for t in kb.headof_facts["r2"]]
    assert heads2 == [Lit(parse_term("frame(?x,has,nucleus)"), True)]


def test_theory_variants_differ_in_rebuts_and_conflicts():
    def theory_rules(kind):
        kb = compile_kb(CELLS, theory=kind)
        return [r for r in kb.rules if r.origin == "defeasibility_theory"]

    def bodies(rules, pred):
        return [[(g.mode, decode_atom(g.atom).atom if not isinstance(g.atom, Var)
                  else g.atom) for g in r.body]
                for r in rules
                if isinstance(r.head, App) and r.head.fn == Atom(pred)]

    simple = theory_rules("simple")
    default = theory_rules("default")
    simple_rebuts = bodies(simple, "rebuts")
    default_rebuts = bodies(default, "rebuts")
    assert len(simple_rebuts[0]) == 2
    assert len(default_rebuts[0]) == 3
    assert default_rebuts[0][1][0] == "naf" and default_rebuts[0][2][0] == "naf"
    simple_conflicts = bodies(simple, "conflicts")
    default_conflicts = bodies(default, "conflicts")
    assert all(len(b) == 2 for b in simple_conflicts)   # opposes + candidate
    assert all(len(b) == 1 for b in default_conflicts)  # opposes only
    # candidate rule ends in a metacall in both theories
    for rules in (simple, default):
        cand = [r for r in rules
                if isinstance(r.head, App) and r.head.fn == Atom("candidate")]
        assert isinstance(cand[0].body[-1].atom, Var)


def test_theory_none_is_inert():
    kb = compile_kb(CELLS, theory="none")
    assert kb.theory == "none"
    assert not kb.headof_facts
    r1 = kb.rule_by_id["r1"]
    assert all(decode_atom(g.atom).atom.fn != Atom("defeated")
               for g in r1.body if not isinstance(g.atom, Var))


def test_strict_marker_blocks_defeasibility():
    kb = compile_kb("@!{r1} @@strict p(?X) :- q(?X).", theory="default")
    r1 = kb.rule_by_id["r1"]
    assert len(r1.body) == 1
    assert not kb.headof_facts


STEP = """
step(1).
step(?N_out) :- step(?N), ?N_out is ?N + 1.
skip(step(?N),[?N],[_]) :- ?N > 10.
"""


def test_skip_extraction_and_attachment():
    kb = compile_kb(STEP, theory="none")
    step_rules = [r for r in kb.rules
                  if pred_key(r.head) == pred_key(encode_lit(lit("step(0)")))]
    assert len(step_rules) == 2
    for r in step_rules:
        assert len(r.skips) == 1
        g = r.skips[0]
        assert g.var_names == ("N",)
        assert len(g.replacements) == 1 and isinstance(g.replacements[0], Var)
        assert len(g.condition) == 1
        assert g.condition[0].atom == parse_term("'>'(?N,10)")
    assert "skip" not in {r.head.fn.name for r in kb.rules
                          if isinstance(r.head, App) and isinstance(r.head.fn, Atom)}


def test_skip_constant_replacement_and_errors():
    kb = compile_kb("q(1). skip(q(?X),[?X],[bounded]) :- ?X > 5.", theory="none")
    r = next(r for r in kb.rules if r.skips)
    assert r.skips[0].replacements == (Atom("bounded"),)
    with pytest.raises(SkipVarNotInHead):
        compile_kb("q(1). skip(q(?X),[?Y],[_]) :- ?X > 5.", theory="none")
    with pytest.raises(TransformError):
        compile_kb("q(1). r(2). skip(q(?X),[?X],[_]) :- r(?X).", theory="none")


def test_encode_first_order():
    assert encode_lit(lit("p(a,b)")) == parse_term("apply(p,a,b)")
    assert encode_lit(lit("p")) == parse_term("apply(p)")


def test_encode_hilog_functor_is_data():
    enc = encode_lit(lit("eukaryotic(cell)(?x1)"))
    assert enc.fn == Atom("apply")
    assert enc.args[0] == parse_term("eukaryotic(cell)")
    assert enc.args[1] == Var("x1")


def test_encode_negation():
    assert encode_lit(lit("neg frame(cell52,has,nucleus)")) == \
        parse_term("frame_neg(cell52,has,nucleus)")
    enc = encode_lit(lit("neg p(a)"))
    assert enc == parse_term("apply(negf(p),a)")


def test_encode_reserved_and_builtin():
    assert encode_lit(lit("frame(a,b,c)")) == parse_term("frame(a,b,c)")
    assert encode_lit(lit("'>'(?X,1)")) == parse_term("'>'(?X,1)")
    assert is_builtin(parse_term("is(?X,1)"))
    assert not is_builtin(parse_term("apply(p,a)"))
    with pytest.raises(TransformError):
        encode_lit(Lit(parse_term("is(?X,1)"), True))


def test_pred_key_separates_predicates():
    k1 = pred_key(encode_lit(lit("p(a)")))
    k2 = pred_key(encode_lit(lit("q(a)")))
    k3 = pred_key(encode_lit(lit("p(a,b)")))
    assert len({k1, k2, k3}) == 3
    assert pred_key(encode_lit(lit("frame(a,b,c)"))) == ("f", "frame", 3)
    assert pred_key(App(Atom("apply"), (Var("P"), Atom("a")))) is None


_atoms = st.sampled_from("f g h p q".split())
_terms = st.recursive(
    st.one_of(st.sampled_from([Atom("a"), Atom("b"), Num(3), Str("s"),
                               Var("X"), Var("Y")])),
    lambda ch: st.builds(lambda f, args: mk_app(Atom(f), *args),
                         _atoms, st.lists(ch, min_size=1, max_size=3)),
    max_leaves=8)
_lits = st.builds(
    lambda fn, args, extra, neg: Lit(
        App(mk_app(Atom(fn), *args) if args else Atom(fn), tuple(extra))
        if extra else (mk_app(Atom(fn), *args) if args else Atom(fn)),
        neg),
    _atoms, st.lists(_terms, max_size=2), st.lists(_terms, max_size=2),
    st.booleans())


@given(_lits)
def test_encode_decode_round_trip(l):
    assert decode_atom(encode_lit(l)) == l


def test_table_decl_mapping():
    kb = compile_kb(":- table p/1 as subgoal_abstract(2),answer_abstract(3). "
                    "p(0).", theory="none")
    call = encode_lit(lit("p(?X)"))
    assert kb.decl_for(call) == (2, 3)
    assert kb.decl_for(encode_lit(lit("q(?X)"))) == (None, None)


def test_frame_axioms_always_present():
    kb = compile_kb("p.", theory="none")
    ax = [r for r in kb.rules if r.origin == "frame_axiom"]
    assert len(ax) == 2
    assert {r.head.fn.name for r in ax} == {"isa", "sub"}


def test_descriptor_store_facts():
    kb = compile_kb("@!{r1[author->alice]} p :- q.", theory="none")
    facts = [t for t in kb.descriptor_store]
    assert parse_term("ruledesc(r1,author,alice)") in facts


def test_textgen_extraction():
    kb = compile_kb('textgen(frame(?O,has,?P), "?O has a ?P"). p.',
                    theory="none")
    assert len(kb.textgen) == 1
    pat, tmpl = kb.textgen[0]
    assert pat == Lit(parse_term("frame(?O,has,?P)"))
    assert tmpl == "?O has a ?P"
    assert all(Atom("textgen") not in (r.head.fn,) for r in kb.rules
               if isinstance(r.head, App))


def test_compile_determinism():
    a = compile_kb(CELLS, theory="default")
    b = compile_kb(CELLS, theory="default")
    assert a.rules == b.rules
    assert [r.rule_id for r in a.rules] == [r.rule_id for r in b.rules]


def test_compile_goal_direct_vs_synthetic():
    kb = compile_kb("p(a).", theory="none")
    direct = compile_goal(kb, "p(?X)")
    assert direct.extra_rules == () and direct.out_vars == ("X",)
    synth = compile_goal(kb, "p(?X) and naf q(?X)")
    assert synth.out_vars == ("X",)
    assert len(synth.extra_rules) == 1
    assert synth.extra_rules[0].body[1].mode == "naf"
    naf_goal = compile_goal(kb, "naf p(a)")
    assert naf_goal.out_vars == ()
    assert len(naf_goal.extra_rules) == 1


def test_builtin_head_rejected():
    with pytest.raises(TransformError):
        compile_kb("is(?X,1) :- p.", theory="none")
