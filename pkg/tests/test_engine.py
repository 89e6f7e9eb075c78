import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from rlg.engine import (
    AnswerRef, BuiltinInstantiationError, EvalOptions, MARK_RADIAL, MARK_SKIP,
    MARK_UNSAFE, NoSuchTable, evaluate, evaluate_anytime, table_snapshot,
    timed_call, truth_of,
)
from rlg.terms import canonical_text, parse_term, is_variant
from rlg.transform import compile_kb, decode_atom
from rlg import forestlog

from wfs_reference import wfs_model, random_program, program_source


def run(src, goal, theory="none", **kw):
    kb = compile_kb(src, theory=theory)
    return evaluate(kb, goal, EvalOptions(**kw))


def answer_set(handle, tv=None):
    out = set()
    for a in handle.answers():
        if tv is None or a.tv == tv:
            out.add(canonical_text(a.literal))
    return out


WIN = """
move(a,b).
move(b,a).
move(b,c).
win(?X) :- move(?X,?Y) and naf win(?Y).
"""


def test_win_move_answers():
    h = run(WIN, "win(?X)")
    assert h.state == "completed"
    assert answer_set(h, "true") == {"win(b)"}
    assert answer_set(h) == {"win(b)"}
    assert truth_of(h, "win(b)") == "true"
    assert truth_of(h, "win(a)") == "false"
    assert truth_of(h, "win(c)") == "false"
    assert truth_of(h, "move(a,b)") == "true"


def test_win_move_bindings():
    h = run(WIN, "win(?X)")
    [a] = h.answers()
    assert canonical_text(a.bindings["X"]) == "b"


def test_mutual_negation_undefined():
    h = run("p :- naf q. q :- naf p.", "p")
    assert truth_of(h, "p") == "undefined"
    assert truth_of(h, "q") == "undefined"
    [a] = h.answers()
    assert a.tv == "undefined"
    assert any(canonical_text(d).startswith("naf(") for d in a.delays)


def test_fact_beats_negative_loop():
    src = "x :- naf x. a :- naf x. a. b :- a."
    h = run(src, "b")
    assert truth_of(h, "b") == "true"
    assert truth_of(h, "a") == "true"
    assert truth_of(h, "x") == "undefined"


def test_positive_loop_is_false():
    h = run("p :- q. q :- p.", "p")
    assert truth_of(h, "p") == "false"
    assert truth_of(h, "q") == "false"


def test_conditional_then_true_upgrades_consumers():
    # t is true through naf v (v has no rules); a consumer that first saw
    # the conditional support must still come out true
    src = """
    u :- naf u.
    t :- naf u.
    t :- naf v.
    s :- t.
    """
    h = run(src, "s")
    assert truth_of(h, "t") == "true"
    assert truth_of(h, "s") == "true"
    assert truth_of(h, "u") == "undefined"


def test_kill_of_consumed_conditional():
    # q's only support is naf p, but p is a fact: q and r must be false
    src = "p. q :- naf p. r :- q."
    h = run(src, "r")
    assert truth_of(h, "r") == "false"
    assert truth_of(h, "q") == "false"


def test_simplification_events_reconcile():
    src = """
    p. q :- naf p, naf z. r :- q. w :- naf w. y :- naf w. y.
    main :- r. main :- y.
    """
    h = run(src, "main")
    by = {}
    for e in h.events:
        by.setdefault(e.kind, []).append(e)
    succ = sum(1 for e in by.get("simplification", ()) if e.outcome == "succeeded")
    fail = sum(1 for e in by.get("simplification", ()) if e.outcome == "failed")
    true_n = len(by.get("new_answer", ())) + succ
    undef_n = len(by.get("conditional_answer", ())) - succ - fail
    got_true = got_undef = 0
    for t in h.tables:
        for e in t.entry_list:
            if e.dead:
                continue
            if e.tv() == "true":
                got_true += 1
            else:
                got_undef += 1
    assert true_n == got_true
    assert undef_n == got_undef


def test_events_equal_ops():
    h = run(WIN, "win(?X)")
    assert len(h.events) == h.op_counter
    assert [e.ctr for e in h.events] == list(range(1, h.op_counter + 1))


def test_logging_off_counts_ops():
    h = run(WIN, "win(?X)", logging=False)
    assert h.events == []
    assert h.op_counter > 0
    assert answer_set(h, "true") == {"win(b)"}


def test_determinism():
    a = run(WIN, "win(?X)")
    b = run(WIN, "win(?X)")
    assert forestlog.serialize(a.events) == forestlog.serialize(b.events)
    assert a.op_counter == b.op_counter


# ---------------------------------------------------------------------------
# radial restraint

RADIAL_ANSWERS = """
:- table p/1 as subgoal_abstract(2), answer_abstract(3).
p(0).
p(s(?X)) :- p(?X).
p(?X) :- p(s(?X)).
"""


def test_radial_answers_terminate_exactly():
    h = run(RADIAL_ANSWERS, "p(?Y)")
    assert h.state == "completed"
    assert answer_set(h, "true") == {"p(0)", "p(s(0))", "p(s(s(0)))"}
    undef = answer_set(h, "undefined")
    assert undef  # the abstracted frontier stays undefined
    radial = [e for e in h.events if e.kind == "answer_abstraction"]
    assert radial
    # every undefined answer shows a restraint delay
    for a in h.answers():
        if a.tv == "undefined":
            assert a.delays


def test_radial_answer_markers():
    h = run(RADIAL_ANSWERS, "p(?Y)")
    tbl = h.goal_table
    marked = [e for e in tbl.entry_list
              if any(MARK_RADIAL in ds for ds in e.delay_sets)]
    assert marked
    for e in marked:
        assert e.tv() == "undefined"


RADIAL_SUBGOALS = """
p(0).
p(s(?X)) :- p(?X).
p(?X) :- p(s(?X)).
"""


def test_radial_subgoals_k1():
    src = ":- table p/1 as subgoal_abstract(1).\n" + RADIAL_SUBGOALS
    h = run(src, "p(a)")
    assert h.state == "completed"
    keys = {canonical_text(decode_atom(t.key).term()) for t in h.tables}
    assert keys == {"p(a)", "p(s(?_G1))"}
    assert truth_of(h, "p(a)") == "false"
    assert [e for e in h.events if e.kind == "subgoal_abstraction"]


def test_radial_subgoals_k2():
    src = ":- table p/1 as subgoal_abstract(2).\n" + RADIAL_SUBGOALS
    h = run(src, "p(a)")
    assert h.state == "completed"
    keys = {canonical_text(decode_atom(t.key).term()) for t in h.tables}
    assert keys == {"p(a)", "p(s(a))", "p(s(s(?_G1)))"}
    assert truth_of(h, "p(a)") == "false"


def test_abstracted_table_conservative_negation():
    # naf over an instance outside the seeding call of an abstracted table
    # must not report true
    src = """
    :- table q/1 as subgoal_abstract(1).
    q(s(s(a))).
    r :- naf q(s(s(b))).
    top :- q(s(s(a))).
    main :- top, r.
    """
    h = run(src, "main")
    assert truth_of(h, "main") != "true"


# ---------------------------------------------------------------------------
# skipping

STEP = """
step(1).
step(?N_out) :- step(?N), ?N_out is ?N + 1.
skip(step(?N),[?N],[_]) :- ?N > 10.
"""


def test_skip_gives_eleven_answers():
    h = run(STEP, "step(?N)")
    assert h.state == "completed"
    answers = h.answers()
    assert len(answers) == 11
    true_lits = answer_set(h, "true")
    assert true_lits == {f"step({n})" for n in range(1, 11)}
    [u] = [a for a in answers if a.tv == "undefined"]
    assert canonical_text(u.literal) == "step(?_G1)"
    assert any(canonical_text(d) == "skip" for d in u.delays)


def test_skip_condition_false_keeps_answer():
    src = """
    val(3).
    val(?V_out) :- val(?V), ?V_out is ?V + 1, ?V < 5.
    skip(val(?N),[?N],[0]) :- ?N > 100.
    """
    h = run(src, "val(?V)")
    assert answer_set(h, "true") == {"val(3)", "val(4)", "val(5)"}
    assert answer_set(h, "undefined") == set()


def test_skip_replacement_constant():
    src = """
    w(1).
    w(?N_out) :- w(?N), ?N_out is ?N + 1.
    skip(w(?N),[?N],[capped]) :- ?N > 2.
    """
    h = run(src, "w(?X)")
    assert answer_set(h, "true") == {"w(1)", "w(2)"}
    assert answer_set(h, "undefined") == {"w(capped)"}


def test_undefined_builtin():
    h = run("p :- undefined.", "p")
    assert truth_of(h, "p") == "undefined"
    [a] = h.answers()
    assert any(canonical_text(d) == "skip" for d in a.delays)


# ---------------------------------------------------------------------------
# builtins and instantiation

def test_builtin_arith_and_compare():
    src = "f(?X) :- ?X is (2 + 3) * 4. g :- 5 > 4, 4 =< 4, 3 \\= 4, a = a."
    h = run(src, "f(?X)")
    [a] = h.answers()
    assert canonical_text(a.bindings["X"]) == "20"
    h2 = run(src, "g")
    assert truth_of(h2, "g") == "true"


def test_instantiation_error_on_pure_path():
    with pytest.raises(BuiltinInstantiationError):
        run("p :- ?Y is ?X + 1.", "p")


def test_instantiation_quiet_on_conditional_path():
    # the recursive rule consumes the skipped unbound answer: that path is
    # conditional, so the arithmetic failure must stay quiet
    h = run(STEP, "step(?N)")
    assert h.state == "completed"


def test_division():
    h = run("d(?X) :- ?X is 7 / 2. e(?X) :- ?X is (0 - 7) / 2.", "d(?X)")
    [a] = h.answers()
    assert canonical_text(a.bindings["X"]) == "3"
    h2 = run("e(?X) :- ?X is (0 - 7) / 2.", "e(?X)")
    [b] = h2.answers()
    assert canonical_text(b.bindings["X"]) == "-3"


# ---------------------------------------------------------------------------
# unsafety and wishes

def test_nonground_naf_unsafe():
    h = run("q(1). p :- naf q(?X).", "p")
    assert truth_of(h, "p") == "undefined"
    [a] = h.answers()
    assert any(canonical_text(d) == "unsafety" for d in a.delays)


def test_unot_ground_same_as_naf():
    h1 = run("q. p :- naf q.", "p")
    h2 = run("q. p :- unot q.", "p")
    assert truth_of(h1, "p") == "false"
    assert truth_of(h2, "p") == "false"


WISHED = """
p(0,a).
p(s(?X),?Y) :- p(?X,?Y).
q(0).
main(?Y) :- wish(ground(?X))^p(?X,?Y), q(?X).
"""


def test_wish_reorders_and_terminates():
    h = run(WISHED, "main(?Y)")
    assert h.state == "completed"
    [a] = h.answers()
    assert a.tv == "true"
    assert canonical_text(a.bindings["Y"]) == "a"


def test_without_wish_runs_away():
    src = """
    p(0,a).
    p(s(?X),?Y) :- p(?X,?Y).
    q(0).
    main(?Y) :- p(?X,?Y), q(?X).
    """
    h = run(src, "main(?Y)", max_ops=2000)
    assert h.state == "failed"
    assert h.events[-1].kind == "aborted"


def test_wish_unbound_at_end_positive_submitted():
    h = run("r(1). main :- wish(ground(?X))^r(?X).", "main")
    assert truth_of(h, "main") == "true"


def test_wish_unbound_negative_unsafe():
    h = run("r(1). main :- wish(ground(?X))^naf r(?X).", "main")
    assert truth_of(h, "main") == "undefined"
    [a] = h.answers()
    assert any(canonical_text(d) == "unsafety" for d in a.delays)


# ---------------------------------------------------------------------------
# defeasibility

CELLS = """
cell52 # red(blood(cell)).
red(blood(cell)) :: eukaryotic(cell).
@!{r1} ?x[has->nucleus] :- ?x # eukaryotic(cell).
@!{r2} neg ?x[has->nucleus] :- ?x # red(blood(cell)).
"""

OVERRIDES = "overrides(r2,r1).\n"


def test_cells_default_theory():
    h = run(CELLS + OVERRIDES, "cell52[has->nucleus]", theory="default")
    assert truth_of(h, "cell52[has->nucleus]") == "false"
    h2 = run(CELLS + OVERRIDES, "neg cell52[has->nucleus]", theory="default")
    assert truth_of(h2, "neg cell52[has->nucleus]") == "true"


def test_cells_no_override_undefined():
    h = run(CELLS, "cell52[has->nucleus]", theory="default")
    assert truth_of(h, "cell52[has->nucleus]") == "undefined"
    h2 = run(CELLS, "neg cell52[has->nucleus]", theory="default")
    assert truth_of(h2, "neg cell52[has->nucleus]") == "undefined"


def test_cells_cyclic_overrides_undefined():
    src = CELLS + "overrides(r2,r1).\noverrides(r1,r2).\n"
    h = run(src, "cell52[has->nucleus]", theory="default")
    assert truth_of(h, "cell52[has->nucleus]") == "undefined"
    h2 = run(src, "neg cell52[has->nucleus]", theory="default")
    assert truth_of(h2, "neg cell52[has->nucleus]") == "undefined"


def test_cells_simple_theory_undefined():
    h = run(CELLS + OVERRIDES, "cell52[has->nucleus]", theory="simple")
    assert truth_of(h, "cell52[has->nucleus]") == "undefined"
    h2 = run(CELLS + OVERRIDES, "neg cell52[has->nucleus]", theory="simple")
    assert truth_of(h2, "neg cell52[has->nucleus]") == "undefined"


def test_strict_rule_not_defeated():
    src = """
    @@strict bird(tweety).
    @!{r1} flies(?X) :- bird(?X).
    @!{r2} neg flies(?X) :- bird(?X).
    overrides(r2,r1).
    """
    h = run(src, "flies(tweety)", theory="default")
    assert truth_of(h, "flies(tweety)") == "false"
    h2 = run(src, "neg flies(tweety)", theory="default")
    assert truth_of(h2, "neg flies(tweety)") == "true"
    h3 = run(src, "bird(tweety)", theory="default")
    assert truth_of(h3, "bird(tweety)") == "true"


# ---------------------------------------------------------------------------
# resource limits, interrupts, snapshots

def test_op_limit_keeps_tables_and_log():
    h = run("r(?X) :- r(s(?X)).", "r(a)", max_ops=5000)
    assert h.state == "failed"
    assert h.error == "operation budget exhausted"
    assert h.events[-1].kind == "aborted"
    assert h.op_counter == 5001
    assert len(h.tables) > 100


def test_timed_call_fires_and_preserves_answers():
    fired = []

    def handler(handle):
        fired.append(handle.op_counter)
        assert handle.state == "paused"

    kb = compile_kb(WIN, theory="none")
    h = timed_call(kb, "win(?X)", 0.0, handler)
    base = run(WIN, "win(?X)")
    assert h.state == "completed"
    assert fired
    assert answer_set(h) == answer_set(base)
    kinds = {e.kind for e in h.events}
    assert "interrupt" in kinds and "resumed" in kinds


def test_timed_call_abort():
    def handler(handle):
        handle.request_abort()

    kb = compile_kb("r(?X) :- r(s(?X)).", theory="none")
    h = timed_call(kb, "r(a)", 0.0, handler)
    assert h.state == "aborted"
    assert h.events[-1].kind == "aborted"


def test_snapshot_after_completion():
    h = run(WIN, "win(?X)")
    views = table_snapshot(h)
    subgoals = {canonical_text(v.subgoal) for v in views}
    assert "win(?_G1)" in subgoals
    win_view = [v for v in views if canonical_text(v.subgoal) == "win(?_G1)"][0]
    assert win_view.status == "complete"
    assert [canonical_text(a.literal) for a in win_view.answers] == ["win(b)"]


def test_snapshot_during_pause():
    got = []

    def handler(handle):
        got.append(table_snapshot(handle))

    kb = compile_kb(WIN, theory="none")
    timed_call(kb, "win(?X)", 0.0, handler)
    assert got and isinstance(got[0], list)


def test_truth_of_no_such_table():
    h = run(WIN, "win(?X)")
    with pytest.raises(NoSuchTable):
        truth_of(h, "unseen(thing)")


def test_tables_win_scc():
    h = run(WIN, "win(?X)")
    win_tables = [t for t in h.tables
                  if canonical_text(decode_atom(t.key).term()) in
                  ("win(a)", "win(b)")]
    assert len(win_tables) == 2
    assert win_tables[0].scc_id == win_tables[1].scc_id


# ---------------------------------------------------------------------------
# anytime evaluation

DEEP = """
:- table p/1.
p(0).
p(s(?X)) :- p(?X).
p(?X) :- p(s(?X)).
"""


def test_anytime_growing_radius():
    kb = compile_kb(DEEP, theory="none")
    res = evaluate_anytime(kb, "p(s(s(s(0))))", budget_ms=10_000,
                           schedule=[1, 2, 4, 8])
    assert res.handle.state == "completed"
    assert res.radius is not None
    assert truth_of(res.handle, "p(s(s(s(0))))") == "true"
    assert len(res.rounds) >= 1


def test_anytime_budget_zero():
    kb = compile_kb(DEEP, theory="none")
    res = evaluate_anytime(kb, "p(0)", budget_ms=0, schedule=[1])
    assert res.budget_exhausted or res.handle.state == "completed"


# ---------------------------------------------------------------------------
# the goal compiler path for complex goals

def test_complex_goal():
    h = run(WIN, "win(?X) and naf move(?X,c)")
    assert {canonical_text(a.bindings["X"]) for a in h.answers()
            if a.tv == "true"} == set()
    h2 = run(WIN, "move(?X,?Y) and move(?Y,?X)")
    pairs = {(canonical_text(a.bindings["X"]), canonical_text(a.bindings["Y"]))
             for a in h2.answers() if a.tv == "true"}
    assert pairs == {("a", "b"), ("b", "a")}


def test_neg_goal():
    src = "neg safe(reactor2).\nsafe(reactor1)."
    h = run(src, "neg safe(?X)")
    assert answer_set(h, "true") == {"neg(safe(reactor2))"}


# ---------------------------------------------------------------------------
# well-founded equivalence on random programs

@pytest.mark.parametrize("seed", range(120))
def test_wfs_equivalence_sample(seed):
    atoms, rules = random_program(seed)
    t_ref, u_ref = wfs_model(rules)
    kb = compile_kb(program_source(atoms, rules), theory="none")
    h = evaluate(kb, "probe", EvalOptions(logging=False))
    assert h.state == "completed"
    for a in atoms:
        tv = truth_of(h, a)
        if a in t_ref:
            assert tv == "true", f"{a} should be true (seed {seed})"
        elif a in u_ref:
            assert tv == "undefined", f"{a} should be undefined (seed {seed})"
        else:
            assert tv == "false", f"{a} should be false (seed {seed})"


def test_file_log_roundtrip(tmp_path):
    path = str(tmp_path / "run.log")
    h = run(WIN, "win(?X)", log_path=path)
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    log = forestlog.load_log(path)
    assert not log.diagnostics
    assert forestlog.serialize(log.events) == text
    assert len(log.events) == h.op_counter
