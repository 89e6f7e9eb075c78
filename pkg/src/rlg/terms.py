"""Term kernel: Hilog terms, unification, variance, subsumption, abstraction.

Terms are immutable trees. Every node precomputes its depth, groundness and
two hashes (an exact one and a variance-insensitive one), so the hot paths of
the engine never have to walk a term to index it. All traversals here are
iterative; subgoal chains can grow tens of thousands of levels deep and must
not hit the interpreter recursion limit.
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Iterator, Optional

_VAR_VH = -0x51C3  # shared variance hash for every variable

LIST_FUNCTOR = "$list"


class Term:
    __slots__ = ("depth", "ground", "vh", "eh")

    def __hash__(self) -> int:
        return self.eh

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Term):
            return NotImplemented
        if self.eh != other.eh:
            return False
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if type(a) is not type(b):
                return False
            if isinstance(a, Var):
                if a.name != b.name:
                    return False
            elif isinstance(a, Atom):
                if a.name != b.name:
                    return False
            elif isinstance(a, Num):
                if a.value != b.value:
                    return False
            elif isinstance(a, Str):
                if a.value != b.value:
                    return False
            else:  # App
                if len(a.args) != len(b.args):
                    return False
                stack.append((a.fn, b.fn))
                stack.extend(zip(a.args, b.args))
        return True

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {canonical_text(self)}>"


class Var(Term):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.depth = 0
        self.ground = False
        self.vh = _VAR_VH
        self.eh = hash(("v", name))


class Atom(Term):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.depth = 0
        self.ground = True
        self.vh = hash(("a", name))
        self.eh = self.vh


class Num(Term):
    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value
        self.depth = 0
        self.ground = True
        self.vh = hash(("n", value))
        self.eh = self.vh


class Str(Term):
    __slots__ = ("value",)

    def __init__(self, value: str):
        self.value = value
        self.depth = 0
        self.ground = True
        self.vh = hash(("s", value))
        self.eh = self.vh


class App(Term):
    __slots__ = ("fn", "args")

    def __init__(self, fn: Term, args: tuple):
        self.fn = fn
        self.args = args
        d = fn.depth
        g = fn.ground
        vh = fn.vh
        eh = fn.eh
        for a in args:
            if a.depth > d:
                d = a.depth
            g = g and a.ground
            vh = vh * 1000003 ^ a.vh
            eh = eh * 1000003 ^ a.eh
        self.depth = d + 1
        self.ground = g
        self.vh = hash(("@", vh, len(args)))
        self.eh = hash(("@", eh, len(args)))


def mk_app(fn: Term, *args: Term) -> App:
    return App(fn, tuple(args))


def atom_app(name: str, *args: Term) -> Term:
    """Build name(args), or a bare Atom when there are no args."""
    if not args:
        return Atom(name)
    return App(Atom(name), tuple(args))


def mk_list(items) -> Term:
    return App(Atom(LIST_FUNCTOR), tuple(items))


def is_list(t: Term) -> bool:
    return isinstance(t, App) and isinstance(t.fn, Atom) and t.fn.name == LIST_FUNCTOR


# ---------------------------------------------------------------------------
# literals

class Lit:
    """A literal: an atom term with an explicit-negation flag."""

    __slots__ = ("neg", "atom")

    def __init__(self, atom: Term, neg: bool = False):
        self.neg = neg
        self.atom = atom

    def term(self) -> Term:
        """The literal as a plain term (negation as a neg/1 wrapper)."""
        if self.neg:
            return mk_app(Atom("neg"), self.atom)
        return self.atom

    def opposite(self) -> "Lit":
        return Lit(self.atom, not self.neg)

    def __eq__(self, other):
        return isinstance(other, Lit) and self.neg == other.neg and self.atom == other.atom

    def __hash__(self):
        return hash((self.neg, self.atom.eh))

    def __repr__(self):
        return f"<Lit {lit_text(self)}>"


def lit_from_term(t: Term) -> Lit:
    if isinstance(t, App) and isinstance(t.fn, Atom) and t.fn.name == "neg" and len(t.args) == 1:
        return Lit(t.args[0], True)
    return Lit(t, False)


def lit_text(lit: Lit) -> str:
    return canonical_text(lit.term())


# ---------------------------------------------------------------------------
# traversal helpers

def subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, App):
            stack.append(n.fn)
            stack.extend(reversed(n.args))


def vars_of(t: Term) -> list:
    """Distinct variables in first-occurrence order (functor before args)."""
    seen = {}
    stack = [t]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            if n.name not in seen:
                seen[n.name] = n
        elif isinstance(n, App):
            stack.extend(reversed(n.args))
            stack.append(n.fn)
    return list(seen.values())


def term_depth(t: Term) -> int:
    return t.depth


# ---------------------------------------------------------------------------
# substitutions

def walk(t: Term, subst: dict) -> Term:
    while isinstance(t, Var):
        nxt = subst.get(t.name)
        if nxt is None:
            return t
        t = nxt
    return t


def resolve(t: Term, subst: dict) -> Term:
    """Apply subst fully; the result contains no bound variables."""
    if t.ground or not subst:
        return t
    done: dict = {}  # id(node) -> rebuilt term
    keep = []  # keeps nodes alive so ids stay unique
    stack = [(t, False)]
    while stack:
        node, ready = stack.pop()
        nid = id(node)
        if nid in done:
            continue
        if isinstance(node, Var):
            tgt = walk(node, subst)
            if isinstance(tgt, Var):
                done[nid] = tgt
            elif tgt.ground:
                done[nid] = tgt
            elif id(tgt) in done:
                done[nid] = done[id(tgt)]
            elif ready:
                done[nid] = done[id(tgt)]
            else:
                stack.append((node, True))
                stack.append((tgt, False))
            keep.append(node)
            continue
        if node.ground or not isinstance(node, App):
            done[nid] = node
            continue
        if ready:
            fn = done[id(node.fn)]
            args = tuple(done[id(a)] for a in node.args)
            if fn is node.fn and all(x is y for x, y in zip(args, node.args)):
                done[nid] = node
            else:
                done[nid] = App(fn, args)
        else:
            stack.append((node, True))
            stack.append((node.fn, False))
            for a in node.args:
                stack.append((a, False))
        keep.append(node)
    return done[id(t)]


def occurs(name: str, t: Term, subst: dict) -> bool:
    stack = [t]
    while stack:
        n = walk(stack.pop(), subst)
        if isinstance(n, Var):
            if n.name == name:
                return True
        elif isinstance(n, App):
            if not n.ground:
                stack.append(n.fn)
                stack.extend(n.args)
    return False


def unify(a: Term, b: Term, subst: Optional[dict] = None) -> Optional[dict]:
    """Unify with occurs check; returns an extended substitution or None."""
    s = dict(subst) if subst else {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = walk(x, s)
        y = walk(y, s)
        if x is y:
            continue
        if isinstance(x, Var):
            if isinstance(y, Var) and y.name == x.name:
                continue
            if not y.ground and occurs(x.name, y, s):
                return None
            s[x.name] = y
            continue
        if isinstance(y, Var):
            if not x.ground and occurs(y.name, x, s):
                return None
            s[y.name] = x
            continue
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
        else:  # App
            if len(x.args) != len(y.args):
                return None
            if x.ground and y.ground:
                if x != y:
                    return None
                continue
            stack.append((x.fn, y.fn))
            stack.extend(zip(x.args, y.args))
    return s


def is_variant(a: Term, b: Term) -> bool:
    """True when a and b are equal up to a variable renaming bijection."""
    if a is b:
        return True
    if a.vh != b.vh:
        return False
    fwd: dict = {}
    bwd: dict = {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if type(x) is not type(y):
            return False
        if isinstance(x, Var):
            if fwd.setdefault(x.name, y.name) != y.name:
                return False
            if bwd.setdefault(y.name, x.name) != x.name:
                return False
        elif isinstance(x, Atom):
            if x.name != y.name:
                return False
        elif isinstance(x, Num):
            if x.value != y.value:
                return False
        elif isinstance(x, Str):
            if x.value != y.value:
                return False
        else:
            if len(x.args) != len(y.args):
                return False
            stack.append((x.fn, y.fn))
            stack.extend(zip(x.args, y.args))
    return True


def subsumes(general: Term, specific: Term) -> bool:
    """One-sided matching: some substitution of general's variables yields
    specific. Variables of specific are treated as constants."""
    binding: dict = {}
    stack = [(general, specific)]
    while stack:
        g, s = stack.pop()
        if isinstance(g, Var):
            prev = binding.get(g.name)
            if prev is None:
                binding[g.name] = s
            elif not (prev == s):
                return False
            continue
        if type(g) is not type(s):
            return False
        if isinstance(g, Atom):
            if g.name != s.name:
                return False
        elif isinstance(g, Num):
            if g.value != s.value:
                return False
        elif isinstance(g, Str):
            if g.value != s.value:
                return False
        else:
            if len(g.args) != len(s.args):
                return False
            stack.append((g.fn, s.fn))
            stack.extend(zip(g.args, s.args))
    return True


def rename_term(t: Term, mapping: dict, prefix: str, counter) -> Term:
    """Standardize apart: rewrite variables through mapping, inventing
    prefix<n> names from the counter (a one-element list) as needed."""
    if t.ground:
        return t
    done: dict = {}
    keep = []
    stack = [(t, False)]
    while stack:
        node, ready = stack.pop()
        nid = id(node)
        if nid in done:
            continue
        if isinstance(node, Var):
            nv = mapping.get(node.name)
            if nv is None:
                counter[0] += 1
                nv = Var(f"{prefix}{counter[0]}")
                mapping[node.name] = nv
            done[nid] = nv
            keep.append(node)
            continue
        if node.ground or not isinstance(node, App):
            done[nid] = node
            continue
        if ready:
            fn = done[id(node.fn)]
            args = tuple(done[id(a)] for a in node.args)
            done[nid] = App(fn, args)
        else:
            stack.append((node, True))
            stack.append((node.fn, False))
            for a in node.args:
                stack.append((a, False))
        keep.append(node)
    return done[id(t)]


# ---------------------------------------------------------------------------
# radial abstraction

def abstract_at_depth(atom: Term, k: int):
    """Replace every subterm nested more than k argument levels deep with a
    fresh variable, one per occurrence. The atom's own arguments sit at level
    1; functor position inherits its application's level. Returns
    (abstracted_atom, changed)."""
    if atom.depth <= k:  # args can be at most depth k, nothing to do
        return atom, False
    used = {v.name for v in vars_of(atom)}
    fresh_n = [0]

    def fresh() -> Var:
        while True:
            fresh_n[0] += 1
            name = f"_A{fresh_n[0]}"
            if name not in used:
                used.add(name)
                return Var(name)

    changed = [False]
    done: dict = {}
    keep = []
    stack = [(atom, 0, False)]
    while stack:
        node, level, ready = stack.pop()
        key = (id(node), level)
        if key in done and not ready:
            continue
        if level > k:
            if isinstance(node, Var):  # already as general as it gets
                done[key] = node
            else:
                changed[0] = True
                done[key] = fresh()
            keep.append(node)
            continue
        if not isinstance(node, App) or node.depth + level <= k:
            done[key] = node
            continue
        if ready:
            fn = done[(id(node.fn), level)]
            args = tuple(done[(id(a), level + 1)] for a in node.args)
            if fn is node.fn and all(x is y for x, y in zip(args, node.args)):
                done[key] = node
            else:
                done[key] = App(fn, args)
        else:
            stack.append((node, level, True))
            stack.append((node.fn, level, False))
            for a in node.args:
                stack.append((a, level + 1, False))
        keep.append(node)
    return done[(id(atom), 0)], changed[0]


def abstract_lit(lit: Lit, k: int):
    atom, changed = abstract_at_depth(lit.atom, k)
    return (Lit(atom, lit.neg), changed)


# ---------------------------------------------------------------------------
# canonical text

_BARE = re.compile(r"[a-z][A-Za-z0-9_]*\Z|[A-Z_][A-Za-z0-9_]*\Z")


@lru_cache(maxsize=65536)
def _atom_text(name: str) -> str:
    if name and _BARE.match(name) and name != LIST_FUNCTOR:
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _str_text(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def canonical_text(t: Term) -> str:
    """Deterministic text form; variables are numbered ?_G1, ?_G2, ... by
    first occurrence, so variants share one canonical string."""
    out = []
    names: dict = {}
    stack = [t]
    while stack:
        node = stack.pop()
        if isinstance(node, str):
            out.append(node)
        elif isinstance(node, Var):
            n = names.get(node.name)
            if n is None:
                n = len(names) + 1
                names[node.name] = n
            out.append(f"?_G{n}")
        elif isinstance(node, Atom):
            out.append(_atom_text(node.name))
        elif isinstance(node, Num):
            out.append(str(node.value))
        elif isinstance(node, Str):
            out.append(_str_text(node.value))
        else:  # App
            if is_list(node):
                stack.append("]")
                for i, a in enumerate(reversed(node.args)):
                    stack.append(a)
                    if i != len(node.args) - 1:
                        stack.append(",")
                stack.append("[")
            else:
                stack.append(")")
                for i, a in enumerate(reversed(node.args)):
                    stack.append(a)
                    if i != len(node.args) - 1:
                        stack.append(",")
                stack.append("(")
                stack.append(node.fn)
    return "".join(out)


class VariantKey:
    """Dict/set key equating terms up to variable renaming.

    Hashing is O(1) because terms precompute a renaming-invariant hash;
    equality short-circuits on identity before walking, so grouping deep
    subgoals avoids the cost of building canonical strings."""

    __slots__ = ("term", "_h")

    def __init__(self, term: Term):
        self.term = term
        self._h = term.vh

    def __hash__(self) -> int:
        return self._h

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, VariantKey):
            return NotImplemented
        return is_variant(self.term, other.term)

    def __repr__(self) -> str:
        return f"VariantKey({canonical_text(self.term)})"


def variant_key(t: Term) -> VariantKey:
    return VariantKey(t)


# ---------------------------------------------------------------------------
# term parsing (canonical/functional notation, used by the forest log reader
# and table patterns; the full surface grammar lives in the reader module)

class TermSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} (at offset {pos})")
        self.pos = pos


_TOKEN = re.compile(
    r"""\s*(?:
        (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
      | (?P<anon>\?(?![A-Za-z0-9_]))
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<num>-?\d+)
      | (?P<quoted>'(?:\\.|[^'\\])*')
      | (?P<string>"(?:\\.|[^"\\])*")
      | (?P<punct>[()\[\],])
    )""",
    re.VERBOSE,
)

_ESC = re.compile(r"\\(.)")


def _unescape(body: str) -> str:
    return _ESC.sub(lambda m: m.group(1), body)


def _tokenize_term(text: str):
    pos = 0
    tokens = []
    anon = 0
    n = len(text)
    match = _TOKEN.match
    while pos < n:
        m = match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise TermSyntaxError("unexpected character", pos)
        pos = m.end()
        kind = m.lastgroup
        val = m.group(kind)
        start = m.start()
        if kind == "name":
            tokens.append(("atom", val, start))
        elif kind == "punct":
            tokens.append((val, None, start))
        elif kind == "var":
            tokens.append(("var", val[1:], start))
        elif kind == "num":
            tokens.append(("num", int(val), start))
        elif kind == "quoted":
            tokens.append(("atom", _unescape(val[1:-1]), start))
        elif kind == "string":
            tokens.append(("str", _unescape(val[1:-1]), start))
        else:
            anon += 1
            tokens.append(("var", f"_Anon{anon}", start))
    return tokens


_ATOM_CACHE: dict = {}


def _cached_atom(name: str) -> Atom:
    """Shared Atom instances for the parse path; terms are immutable, so
    reuse is safe and spares both allocation and later hashing on logs
    that repeat the same functors millions of times."""
    a = _ATOM_CACHE.get(name)
    if a is None:
        if len(_ATOM_CACHE) >= 65536:
            _ATOM_CACHE.clear()
        a = Atom(name)
        _ATOM_CACHE[name] = a
    return a


def parse_term(text: str) -> Term:
    """Parse functional notation: atoms, ?vars, integers, "strings",
    f(a,b), curried f(a)(b), and [x,y] lists. Iterative, so canonical text
    of arbitrarily deep terms reloads safely."""
    tokens = _tokenize_term(text)
    if not tokens:
        raise TermSyntaxError("empty term", 0)
    # each frame: ["app", functor, args] or ["list", items]
    frames: list = []
    current: Optional[Term] = None
    i = 0
    while i < len(tokens):
        kind, val, pos = tokens[i]
        i += 1
        if kind == "var":
            if current is not None:
                raise TermSyntaxError("unexpected term", pos)
            current = Var(val)
        elif kind == "atom":
            if current is not None:
                raise TermSyntaxError("unexpected term", pos)
            current = _cached_atom(val)
        elif kind == "num":
            if current is not None:
                raise TermSyntaxError("unexpected term", pos)
            current = Num(val)
        elif kind == "str":
            if current is not None:
                raise TermSyntaxError("unexpected term", pos)
            current = Str(val)
        elif kind == "(":
            if current is None:
                raise TermSyntaxError("application needs a functor", pos)
            frames.append(["app", current, []])
            current = None
        elif kind == "[":
            if current is not None:
                raise TermSyntaxError("unexpected list", pos)
            frames.append(["list", None, []])
            current = None
        elif kind == ",":
            if not frames or current is None:
                raise TermSyntaxError("unexpected comma", pos)
            frames[-1][2].append(current)
            current = None
        elif kind == ")":
            if not frames or frames[-1][0] != "app" or current is None:
                raise TermSyntaxError("unbalanced parenthesis", pos)
            tag, fn, args = frames.pop()
            args.append(current)
            current = App(fn, tuple(args))
        elif kind == "]":
            if not frames or frames[-1][0] != "list":
                raise TermSyntaxError("unbalanced bracket", pos)
            tag, _fn, items = frames.pop()
            if current is not None:
                items.append(current)
            elif items:
                raise TermSyntaxError("dangling comma in list", pos)
            current = mk_list(items)
    if frames:
        raise TermSyntaxError("unterminated term", len(text))
    if current is None:
        raise TermSyntaxError("empty term", len(text))
    return current


def parse_lit(text: str) -> Lit:
    return lit_from_term(parse_term(text))


# ---------------------------------------------------------------------------
# JSON wire form

def term_to_json(t: Term):
    """JsonTerm: {"v": name} | {"s": atom} | {"s": int} | {"s": {"str": s}}
    | {"app": [fn, args...]}. Bijective with Term."""
    done: dict = {}
    stack = [(t, False)]
    while stack:
        node, ready = stack.pop()
        nid = id(node)
        if nid in done:
            continue
        if isinstance(node, Var):
            done[nid] = {"v": node.name}
        elif isinstance(node, Atom):
            done[nid] = {"s": node.name}
        elif isinstance(node, Num):
            done[nid] = {"s": node.value}
        elif isinstance(node, Str):
            done[nid] = {"s": {"str": node.value}}
        elif ready:
            done[nid] = {"app": [done[id(node.fn)]] + [done[id(a)] for a in node.args]}
        else:
            stack.append((node, True))
            stack.append((node.fn, False))
            for a in node.args:
                stack.append((a, False))
    return done[id(t)]


def term_from_json(j) -> Term:
    if not isinstance(j, dict):
        raise ValueError(f"bad JsonTerm: {j!r}")
    if "v" in j:
        return Var(j["v"])
    if "s" in j:
        v = j["s"]
        if isinstance(v, bool):
            raise ValueError("bad JsonTerm symbol")
        if isinstance(v, int):
            return Num(v)
        if isinstance(v, str):
            return Atom(v)
        if isinstance(v, dict) and "str" in v:
            return Str(v["str"])
        raise ValueError(f"bad JsonTerm symbol: {v!r}")
    if "app" in j:
        parts = j["app"]
        if len(parts) < 2:
            raise ValueError("application needs arguments")
        return App(term_from_json(parts[0]), tuple(term_from_json(p) for p in parts[1:]))
    raise ValueError(f"bad JsonTerm: {j!r}")
