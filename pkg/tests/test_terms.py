"""Kernel term tests: unification, variance, subsumption, abstraction,
canonical text round-trips."""

from hypothesis import given, settings, strategies as st

from rlg.terms import (
    App,
    Atom,
    Lit,
    Num,
    Str,
    Var,
    abstract_lit,
    atom_app,
    canonical_text,
    is_variant,
    lit_from_term,
    mk_app,
    mk_list,
    parse_term,
    resolve,
    subsumes,
    term_depth,
    term_from_json,
    term_to_json,
    unify,
    vars_of,
)


def V(n):
    return Var(n)


def A(n):
    return Atom(n)


def f(name, *args):
    return atom_app(name, *args)


def s_chain(n, base):
    t = base
    for _ in range(n):
        t = f("s", t)
    return t


# -- unification ------------------------------------------------------------

def test_unify_binds_variable():
    sub = unify(f("p", V("X")), f("p", A("a")))
    assert sub is not None
    assert resolve(V("X"), sub) == A("a")


def test_unify_mismatch_fails():
    assert unify(f("p", A("a")), f("p", A("b"))) is None
    assert unify(f("p", A("a")), f("q", A("a"))) is None
    assert unify(f("p", A("a")), f("p", A("a"), A("a"))) is None


def test_unify_occurs_check():
    assert unify(V("X"), f("s", V("X"))) is None


def test_unify_shared_variable():
    sub = unify(f("p", V("X"), V("X")), f("p", V("Y"), A("c")))
    assert sub is not None
    assert resolve(V("Y"), sub) == A("c")


def test_unify_hilog_functor_position():
    # variables may stand in functor position
    lhs = App(V("P"), (A("a"),))
    rhs = App(f("f", A("b")), (A("a"),))
    sub = unify(lhs, rhs)
    assert sub is not None
    assert resolve(V("P"), sub) == f("f", A("b"))


def test_unify_is_symmetric_on_result():
    a = f("p", V("X"), f("g", V("Y")))
    b = f("p", f("h", A("k")), V("Z"))
    s1 = unify(a, b)
    s2 = unify(b, a)
    assert s1 is not None and s2 is not None
    assert resolve(a, s1) == resolve(b, s1)
    assert resolve(a, s2) == resolve(b, s2)


def test_unify_deep_chain_iterative():
    # must not blow the recursion limit
    deep = s_chain(30000, A("z"))
    sub = unify(f("p", V("X")), f("p", deep))
    assert sub is not None
    assert term_depth(resolve(V("X"), sub)) == 30000


# -- variance / subsumption ---------------------------------------------------

def test_variant_renaming():
    assert is_variant(f("p", V("X"), V("Y")), f("p", V("A"), V("B")))
    assert not is_variant(f("p", V("X"), V("X")), f("p", V("A"), V("B")))
    assert not is_variant(f("p", V("X"), V("Y")), f("p", V("A"), V("A")))


def test_variant_ground():
    assert is_variant(f("p", A("a")), f("p", A("a")))
    assert not is_variant(f("p", A("a")), f("p", A("b")))


def test_subsumes_direction():
    gen = f("p", V("X"), V("Y"))
    spec = f("p", A("a"), f("g", V("Z")))
    assert subsumes(gen, spec)
    assert not subsumes(spec, gen)


def test_subsumes_consistent_bindings():
    assert subsumes(f("p", V("X"), V("X")), f("p", A("a"), A("a")))
    assert not subsumes(f("p", V("X"), V("X")), f("p", A("a"), A("b")))


def test_variants_subsume_each_other():
    a = f("p", V("X"), f("g", V("Y")))
    b = f("p", V("U"), f("g", V("W")))
    assert subsumes(a, b) and subsumes(b, a)


# -- depth and abstraction ----------------------------------------------------

def test_term_depth_convention():
    assert term_depth(V("X")) == 0
    assert term_depth(A("a")) == 0
    assert term_depth(f("p", A("0"))) == 1
    assert term_depth(f("p", s_chain(2, Num(0)))) == 3


def test_abstract_keeps_shallow_answer():
    lit = lit_from_term(f("p", s_chain(2, Num(0))))
    out, changed = abstract_lit(lit, 3)
    assert not changed
    assert out.atom == lit.atom


def test_abstract_replaces_deep_subterm():
    lit = lit_from_term(f("p", s_chain(3, Num(0))))
    out, changed = abstract_lit(lit, 3)
    assert changed
    assert is_variant(out.atom, f("p", s_chain(3, V("F"))))


def test_abstract_subgoal_bound_one():
    out, changed = abstract_lit(lit_from_term(f("p", f("s", A("a")))), 1)
    assert changed
    assert is_variant(out.atom, f("p", f("s", V("F"))))
    out2, changed2 = abstract_lit(lit_from_term(f("p", A("a"))), 1)
    assert not changed2


def test_abstract_fresh_var_per_occurrence():
    lit = lit_from_term(f("p", f("g", f("h", A("a"))), f("g", f("h", A("b")))))
    out, changed = abstract_lit(lit, 2)
    assert changed
    args = out.atom.args
    v1 = args[0].args[0].args[0]
    v2 = args[1].args[0].args[0]
    assert isinstance(v1, Var) and isinstance(v2, Var)
    assert v1.name != v2.name


def test_abstract_result_subsumes_original():
    lit = lit_from_term(f("p", s_chain(6, Num(0)), A("k")))
    out, changed = abstract_lit(lit, 2)
    assert changed
    assert subsumes(out.atom, lit.atom)
    # every argument of the result stays within the bound
    assert max(a.depth for a in out.atom.args) <= 2


# -- canonical text -----------------------------------------------------------

def test_canonical_variables_numbered_by_first_occurrence():
    t = f("p", V("Zed"), f("g", V("Zed"), V("Other")))
    assert canonical_text(t) == "p(?_G1,g(?_G1,?_G2))"


def test_canonical_curried_application():
    t = App(f("eukaryotic", A("cell")), (V("X"),))
    assert canonical_text(t) == "eukaryotic(cell)(?_G1)"
    back = parse_term(canonical_text(t))
    assert is_variant(back, t)


def test_canonical_quoting():
    assert canonical_text(A("has space")) == "'has space'"
    assert canonical_text(Str("hi")) == '"hi"'
    assert canonical_text(Num(-4)) == "-4"
    assert canonical_text(A("Benj")) == "Benj"


def test_canonical_list():
    t = mk_list([A("a"), Num(1)])
    assert canonical_text(t) == "[a,1]"
    assert is_variant(parse_term("[a,1]"), t)
    assert canonical_text(mk_list([])) == "[]"
    assert is_variant(parse_term("[]"), mk_list([]))


def test_parse_canonical_examples():
    t = parse_term("apply(apply(f,a),b)")
    assert canonical_text(t) == "apply(apply(f,a),b)"


def test_parse_deep_term_iterative():
    text = "p(" + "s(" * 20000 + "0" + ")" * 20000 + ")"
    t = parse_term(text)
    assert term_depth(t) == 20001
    assert canonical_text(t) == text


# -- hypothesis properties ----------------------------------------------------

_names = st.sampled_from(["a", "b", "f", "g", "pred", "Benj", "x_1", "with space"])
_varnames = st.sampled_from(["X", "Y", "Z", "Long_name", "_G1"])


def _terms(depth=3):
    leaf = st.one_of(
        st.builds(Atom, _names),
        st.builds(Var, _varnames),
        st.builds(Num, st.integers(-50, 50)),
        st.builds(Str, st.text(alphabet="ab\\\"c ", max_size=4)),
    )
    return st.recursive(
        leaf,
        lambda sub: st.builds(
            lambda fn, args: App(fn, tuple(args)),
            st.one_of(st.builds(Atom, _names), sub),
            st.lists(sub, min_size=1, max_size=3),
        ),
        max_leaves=12,
    )


@settings(max_examples=150, deadline=None)
@given(_terms())
def test_canonical_round_trip(t):
    back = parse_term(canonical_text(t))
    assert is_variant(back, t)
    assert canonical_text(back) == canonical_text(t)


@settings(max_examples=150, deadline=None)
@given(_terms())
def test_json_round_trip(t):
    assert term_from_json(term_to_json(t)) == t


@settings(max_examples=100, deadline=None)
@given(_terms(), _terms())
def test_unify_produces_common_instance(a, b):
    sub = unify(a, b)
    if sub is not None:
        ra = resolve(a, sub)
        rb = resolve(b, sub)
        assert ra == rb
        assert subsumes(a, ra)
        assert subsumes(b, rb)


@settings(max_examples=100, deadline=None)
@given(_terms())
def test_variant_reflexive(t):
    assert is_variant(t, t)
    assert subsumes(t, t)


@settings(max_examples=100, deadline=None)
@given(_terms(), st.integers(1, 4))
def test_abstraction_invariants(t, k):
    lit = Lit(f("p", t))
    out, changed = abstract_lit(lit, k)
    assert subsumes(out.atom, lit.atom)
    if not changed:
        assert out.atom == lit.atom
    # abstraction is idempotent: a second pass finds nothing deeper
    again, changed_again = abstract_lit(out, k)
    assert not changed_again
    assert again.atom == out.atom


def test_lit_wrapper():
    lit = lit_from_term(parse_term("neg(frame(c,has,n))"))
    assert lit.neg and canonical_text(lit.atom) == "frame(c,has,n)"
    assert canonical_text(lit.term()) == "neg(frame(c,has,n))"
    assert lit.opposite().neg is False
