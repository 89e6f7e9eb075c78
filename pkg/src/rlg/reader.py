"""Surface syntax reader.

Statements are `.`-terminated rules, facts and directives. The formula
grammar (tightest first): neg < naf/unot < and < or < ==> < <==>, with
forall/exists taking either `^` or a parenthesized body, and frame sugar
o[a->v], o#c, c::d at the literal level. Descriptor blocks @!{id[k->v]}
annotate the following rule; @@strict marks a rule non-defeasible.

Parse errors carry file, line, column and an expected-token hint; the parser
resynchronizes at the next `.` so one pass reports every broken statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .terms import App, Atom, Lit, Num, Str, Term, Var, mk_app, mk_list

# ---------------------------------------------------------------------------
# AST

@dataclass
class FLit:
    lit: Lit
    mode: str = "plain"  # plain | naf | unot
    guard: Optional[tuple] = None  # wish(ground(?X),...) delay guard variables


@dataclass
class FAnd:
    items: list


@dataclass
class FOr:
    items: list


@dataclass
class FNaf:
    body: object  # naf over a non-atomic formula


@dataclass
class FImp:
    lhs: object
    rhs: object


@dataclass
class FIff:
    lhs: object
    rhs: object


@dataclass
class FQuant:
    kind: str  # forall | exists
    vars: List[str]
    body: object


@dataclass
class Rule:
    head: object  # formula
    body: Optional[object]  # formula or None for facts
    rule_id: str
    tag: str
    strict: bool = False
    descriptor: dict = field(default_factory=dict)
    id_explicit: bool = False
    line: int = 0


@dataclass
class TableDecl:
    name: str
    arity: int
    subgoal_abstract: Optional[int] = None
    answer_abstract: Optional[int] = None
    line: int = 0


@dataclass
class ParseError:
    file: str
    line: int
    col: int
    message: str
    expected: Optional[str] = None

    def __str__(self):
        hint = f" (expected {self.expected})" if self.expected else ""
        return f"{self.file}:{self.line}:{self.col}: {self.message}{hint}"


class ParseFailure(Exception):
    """Raised by parse_program when any statement failed; carries them all."""

    def __init__(self, errors: List[ParseError]):
        super().__init__("; ".join(str(e) for e in errors))
        self.errors = errors


# ---------------------------------------------------------------------------
# lexer

_PUNCT = [
    "<==>", "==>", ":-", "::", "->", "@!", "@@", "\\=", ">=", "=<",
    "(", ")", "[", "]", "{", "}", ",", ".", "^", "#", ">", "<", "=",
    "+", "-", "*", "/",
]

_KEYWORDS = {"and", "or", "naf", "unot", "neg", "forall", "exists", "wish", "is"}


@dataclass
class Tok:
    kind: str  # name | var | anon | int | str | qatom | punct | eof
    text: str
    value: object
    line: int
    col: int


class _Lexer:
    def __init__(self, text: str, file: str):
        self.text = text
        self.file = file
        self.pos = 0
        self.line = 1
        self.col = 1
        self.toks: List[Tok] = []
        self.errors: List[ParseError] = []

    def _advance(self, n: int):
        for ch in self.text[self.pos:self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def run(self) -> List[Tok]:
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in " \t\r\n":
                self._advance(1)
                continue
            if text.startswith("//", self.pos):
                nl = text.find("\n", self.pos)
                self._advance((nl if nl >= 0 else len(text)) - self.pos)
                continue
            if text.startswith("/*", self.pos):
                end = text.find("*/", self.pos + 2)
                if end < 0:
                    self.errors.append(ParseError(self.file, self.line, self.col,
                                                  "unterminated block comment"))
                    break
                self._advance(end + 2 - self.pos)
                continue
            line, col = self.line, self.col
            if ch == "?":
                m = self._match_name(self.pos + 1)
                if m:
                    self.toks.append(Tok("var", "?" + m, m, line, col))
                    self._advance(1 + len(m))
                else:
                    self.toks.append(Tok("anon", "?", None, line, col))
                    self._advance(1)
                continue
            if ch == "'":
                self._quoted(line, col, "'", "qatom")
                continue
            if ch == '"':
                self._quoted(line, col, '"', "str")
                continue
            if ch.isdigit():
                j = self.pos
                while j < len(text) and text[j].isdigit():
                    j += 1
                self.toks.append(Tok("int", text[self.pos:j], int(text[self.pos:j]), line, col))
                self._advance(j - self.pos)
                continue
            if ch.isalpha() or ch == "_":
                name = self._match_name(self.pos)
                if name == "_":
                    self.toks.append(Tok("anon", "_", None, line, col))
                else:
                    self.toks.append(Tok("name", name, name, line, col))
                self._advance(len(name))
                continue
            for p in _PUNCT:
                if text.startswith(p, self.pos):
                    self.toks.append(Tok("punct", p, p, line, col))
                    self._advance(len(p))
                    break
            else:
                self.errors.append(ParseError(self.file, line, col,
                                              f"unexpected character {ch!r}"))
                self._advance(1)
        self.toks.append(Tok("eof", "", None, self.line, self.col))
        return self.toks

    def _match_name(self, start: int) -> str:
        j = start
        text = self.text
        while j < len(text) and (text[j].isalnum() or text[j] == "_"):
            j += 1
        return text[start:j]

    def _quoted(self, line, col, quote, kind):
        text = self.text
        j = self.pos + 1
        out = []
        while j < len(text):
            ch = text[j]
            if ch == "\\" and j + 1 < len(text):
                out.append(text[j + 1])
                j += 2
                continue
            if ch == quote:
                self.toks.append(Tok(kind, text[self.pos:j + 1], "".join(out), line, col))
                self._advance(j + 1 - self.pos)
                return
            out.append(ch)
            j += 1
        self.errors.append(ParseError(self.file, line, col, "unterminated quote"))
        self._advance(len(text) - self.pos)


# ---------------------------------------------------------------------------
# parser

BUILTIN_COMPARISONS = {">", "<", ">=", "=<", "=", "\\=", "is"}


class _Parser:
    def __init__(self, toks: List[Tok], file: str, stmt_counter):
        self.toks = toks
        self.i = 0
        self.file = file
        self.errors: List[ParseError] = []
        self.anon_n = 0
        self.stmt_counter = stmt_counter

    # token helpers ---------------------------------------------------------
    def peek(self, ahead=0) -> Tok:
        j = min(self.i + ahead, len(self.toks) - 1)
        return self.toks[j]

    def next(self) -> Tok:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_punct(self, p: str) -> bool:
        t = self.peek()
        return t.kind == "punct" and t.text == p

    def at_name(self, n: str) -> bool:
        t = self.peek()
        return t.kind == "name" and t.text == n

    def eat_punct(self, p: str) -> Tok:
        if not self.at_punct(p):
            raise self._err(f"found {self.peek().text or 'end of input'!r}", expected=repr(p))
        return self.next()

    def _err(self, message: str, expected: Optional[str] = None) -> "_Abort":
        t = self.peek()
        self.errors.append(ParseError(self.file, t.line, t.col, message, expected))
        return _Abort()

    def fresh_anon(self) -> Var:
        self.anon_n += 1
        return Var(f"_Anon{self.anon_n}")

    # statements ------------------------------------------------------------
    def parse_program(self) -> Tuple[List[Rule], List[TableDecl]]:
        rules: List[Rule] = []
        decls: List[TableDecl] = []
        while self.peek().kind != "eof":
            try:
                self._statement(rules, decls)
            except _Abort:
                self._resync()
        return rules, decls

    def _resync(self):
        while self.peek().kind != "eof":
            t = self.next()
            if t.kind == "punct" and t.text == ".":
                return

    def _statement(self, rules, decls):
        t = self.peek()
        if t.kind == "punct" and t.text == ":-":
            self.next()
            decls.append(self._table_decl())
            self.eat_punct(".")
            return
        descriptor: dict = {}
        desc_id = None
        line = t.line
        strict = False
        while self.at_punct("@!") or self.at_punct("@@"):
            if self.at_punct("@!"):
                if desc_id is not None:
                    raise self._err("duplicate descriptor block")
                desc_id, descriptor = self._descriptor_block()
                if self.peek().kind == "eof" or (self.peek().kind == "punct" and self.peek().text in (".", ":-")):
                    raise self._err("descriptor block must be followed by a rule")
            else:
                self.next()
                if not self.at_name("strict"):
                    raise self._err("unknown @@ marker", expected="'strict'")
                self.next()
                strict = True
        head = self._formula()
        body = None
        if self.at_punct(":-"):
            self.next()
            body = self._formula()
        self.eat_punct(".")
        self.stmt_counter[0] += 1
        rid = desc_id if desc_id is not None else f"_s{self.stmt_counter[0]}"
        tag = descriptor.get("tag", rid)
        tagname = tag.name if isinstance(tag, Atom) else (tag if isinstance(tag, str) else rid)
        rules.append(Rule(head=head, body=body, rule_id=rid, tag=tagname,
                          strict=strict, descriptor=descriptor,
                          id_explicit=desc_id is not None, line=line))

    def _descriptor_block(self):
        self.eat_punct("@!")
        self.eat_punct("{")
        idt = self.peek()
        if idt.kind not in ("name", "qatom"):
            raise self._err("descriptor id must be an atom", expected="identifier")
        self.next()
        attrs: dict = {}
        if self.at_punct("["):
            self.next()
            while True:
                k = self.peek()
                if k.kind not in ("name", "qatom"):
                    raise self._err("descriptor attribute name expected")
                self.next()
                self.eat_punct("->")
                attrs[k.value] = self._term()
                if self.at_punct(","):
                    self.next()
                    continue
                break
            self.eat_punct("]")
        self.eat_punct("}")
        return idt.value, attrs

    def _table_decl(self) -> TableDecl:
        if not self.at_name("table"):
            raise self._err("unknown directive", expected="'table'")
        tline = self.next().line
        name = self.peek()
        if name.kind not in ("name", "qatom"):
            raise self._err("predicate name expected")
        self.next()
        self.eat_punct("/")
        ar = self.peek()
        if ar.kind != "int":
            raise self._err("predicate arity expected", expected="integer")
        self.next()
        decl = TableDecl(name=name.value, arity=ar.value, line=tline)
        if self.at_name("as"):
            self.next()
            while True:
                spec = self.peek()
                if spec.kind != "name" or spec.value not in ("subgoal_abstract", "answer_abstract"):
                    raise self._err("unknown table spec",
                                    expected="subgoal_abstract(k) or answer_abstract(k)")
                self.next()
                self.eat_punct("(")
                k = self.peek()
                if k.kind != "int" or k.value < 1:
                    raise self._err("abstraction bound must be a positive integer")
                self.next()
                self.eat_punct(")")
                if spec.value == "subgoal_abstract":
                    decl.subgoal_abstract = k.value
                else:
                    decl.answer_abstract = k.value
                if self.at_punct(","):
                    self.next()
                    continue
                break
        return decl

    # formulas ----------------------------------------------------------------
    def _formula(self):
        return self._iff()

    def _iff(self):
        lhs = self._imp()
        if self.at_punct("<==>"):
            self.next()
            return FIff(lhs, self._iff())
        return lhs

    def _imp(self):
        lhs = self._or()
        if self.at_punct("==>"):
            self.next()
            return FImp(lhs, self._imp())
        return lhs

    def _or(self):
        items = [self._and()]
        while self.at_name("or"):
            self.next()
            items.append(self._and())
        return items[0] if len(items) == 1 else FOr(items)

    def _and(self):
        items = [self._unary()]
        while self.at_name("and") or self.at_punct(","):
            self.next()
            items.append(self._unary())
        return items[0] if len(items) == 1 else FAnd(items)

    def _unary(self):
        t = self.peek()
        if t.kind == "name" and t.text in ("naf", "unot"):
            self.next()
            inner = self._unary()
            if isinstance(inner, FLit) and inner.mode == "plain" and inner.guard is None:
                return FLit(inner.lit, t.text)
            if t.text == "unot":
                raise self._err("unot applies to a single literal")
            return FNaf(inner)
        if t.kind == "name" and t.text == "neg":
            self.next()
            inner = self._unary()
            if not (isinstance(inner, FLit) and inner.mode == "plain" and not inner.lit.neg):
                raise self._err("neg applies to a single positive literal")
            return FLit(Lit(inner.lit.atom, True), "plain")
        if t.kind == "name" and t.text in ("forall", "exists"):
            return self._quant()
        if t.kind == "name" and t.text == "wish":
            return self._wish()
        if self.at_punct("@!"):
            return self._body_descriptor()
        if self.at_punct("("):
            self.next()
            inner = self._formula()
            self.eat_punct(")")
            return inner
        return self._literal()

    def _quant(self):
        kind = self.next().text
        self.eat_punct("(")
        names = []
        while True:
            v = self.peek()
            if v.kind != "var":
                raise self._err("quantified variable expected", expected="?var")
            names.append(v.value)
            self.next()
            if self.at_punct(","):
                self.next()
                continue
            break
        self.eat_punct(")")
        if self.at_punct("^"):
            self.next()
            body = self._unary()
        elif self.at_punct("("):
            self.next()
            body = self._formula()
            self.eat_punct(")")
        else:
            raise self._err("quantifier body expected", expected="'^' or '('")
        return FQuant(kind, names, body)

    def _wish(self):
        self.next()
        self.eat_punct("(")
        names = []
        while True:
            if not self.at_name("ground"):
                raise self._err("only ground(?X) wishes are supported", expected="'ground'")
            self.next()
            self.eat_punct("(")
            v = self.peek()
            if v.kind != "var":
                raise self._err("wish guard must name a variable", expected="?var")
            self.next()
            names.append(v.value)
            self.eat_punct(")")
            if self.at_punct(","):
                self.next()
                continue
            break
        self.eat_punct(")")
        self.eat_punct("^")
        inner = self._unary()
        if not isinstance(inner, FLit) or inner.guard is not None:
            raise self._err("wish applies to a single literal")
        return FLit(inner.lit, inner.mode, guard=tuple(names))

    def _body_descriptor(self):
        self.next()
        self.eat_punct("{")
        subject = self._term()
        self.eat_punct("[")
        atoms = []
        while True:
            k = self.peek()
            if k.kind not in ("name", "qatom"):
                raise self._err("descriptor attribute name expected")
            self.next()
            self.eat_punct("->")
            val = self._term()
            atoms.append(FLit(Lit(mk_app(Atom("ruledesc"), subject, Atom(k.value), val))))
            if self.at_punct(","):
                self.next()
                continue
            break
        self.eat_punct("]")
        self.eat_punct("}")
        return atoms[0] if len(atoms) == 1 else FAnd(atoms)

    def _literal(self):
        left = self._term()
        if self.at_punct("["):
            self.next()
            atoms = []
            while True:
                attr = self._term()
                self.eat_punct("->")
                val = self._term()
                atoms.append(FLit(Lit(mk_app(Atom("frame"), left, attr, val))))
                if self.at_punct(","):
                    self.next()
                    continue
                break
            self.eat_punct("]")
            return atoms[0] if len(atoms) == 1 else FAnd(atoms)
        if self.at_punct("#"):
            self.next()
            cls = self._term()
            return FLit(Lit(mk_app(Atom("isa"), left, cls)))
        if self.at_punct("::"):
            self.next()
            sup = self._term()
            return FLit(Lit(mk_app(Atom("sub"), left, sup)))
        t = self.peek()
        if (t.kind == "punct" and t.text in BUILTIN_COMPARISONS) or (t.kind == "name" and t.text == "is"):
            op = self.next().text
            right = self._term()
            return FLit(Lit(mk_app(Atom(op), left, right)))
        if isinstance(left, (Var, Num, Str)):
            # a bare variable is a meta-call position; numbers never are
            if isinstance(left, Var):
                return FLit(Lit(left))
            raise self._err("a literal cannot be a bare number or string")
        return FLit(Lit(left))

    # terms -------------------------------------------------------------------
    def _term(self):
        return self._additive()

    def _additive(self):
        left = self._multiplicative()
        while self.at_punct("+") or self.at_punct("-"):
            op = self.next().text
            right = self._multiplicative()
            left = mk_app(Atom(op), left, right)
        return left

    def _multiplicative(self):
        left = self._postfixed()
        while self.at_punct("*") or self.at_punct("/"):
            op = self.next().text
            right = self._postfixed()
            left = mk_app(Atom(op), left, right)
        return left

    def _postfixed(self):
        t = self._primary()
        while self.at_punct("("):
            self.next()
            args = [self._term()]
            while self.at_punct(","):
                self.next()
                args.append(self._term())
            self.eat_punct(")")
            t = App(t, tuple(args))
        return t

    def _primary(self):
        t = self.peek()
        if t.kind == "var":
            self.next()
            return Var(t.value)
        if t.kind == "anon":
            self.next()
            return self.fresh_anon()
        if t.kind == "name" or t.kind == "qatom":
            self.next()
            return Atom(t.value)
        if t.kind == "int":
            self.next()
            return Num(t.value)
        if t.kind == "str":
            self.next()
            return Str(t.value)
        if self.at_punct("-") and self.peek(1).kind == "int":
            self.next()
            n = self.next()
            return Num(-n.value)
        if self.at_punct("["):
            self.next()
            items = []
            if not self.at_punct("]"):
                items.append(self._term())
                while self.at_punct(","):
                    self.next()
                    items.append(self._term())
            self.eat_punct("]")
            return mk_list(items)
        if self.at_punct("("):
            self.next()
            inner = self._term()
            self.eat_punct(")")
            return inner
        raise self._err(f"found {t.text or 'end of input'!r} where a term was expected",
                        expected="term")


class _Abort(Exception):
    pass


# ---------------------------------------------------------------------------
# entry points

def parse_program(text: str, file: str = "<string>", stmt_counter=None):
    """-> (rules, table_decls); raises ParseFailure listing every bad statement."""
    lexer = _Lexer(text, file)
    toks = lexer.run()
    parser = _Parser(toks, file, stmt_counter if stmt_counter is not None else [0])
    rules, decls = parser.parse_program()
    errors = lexer.errors + parser.errors
    if errors:
        raise ParseFailure(errors)
    return rules, decls


def parse_goal(text: str, file: str = "<goal>"):
    """Parse a query formula (no trailing dot required)."""
    lexer = _Lexer(text, file)
    toks = lexer.run()
    parser = _Parser(toks, file, [0])
    try:
        formula = parser._formula()
        if parser.peek().kind == "punct" and parser.peek().text == ".":
            parser.next()
        if parser.peek().kind != "eof":
            parser._err("trailing input after goal")
    except _Abort:
        pass
    errors = lexer.errors + parser.errors
    if errors:
        raise ParseFailure(errors)
    return formula


# ---------------------------------------------------------------------------
# pretty printing (reparseable; sugar is not reconstructed)

_INFIX_TERM = {"+", "-", "*", "/"}


def term_text(t: Term) -> str:
    parts: list = []
    _term_text(t, parts)
    return "".join(parts)


def _term_text(t: Term, out: list):
    from .terms import canonical_text, is_list
    if isinstance(t, App) and isinstance(t.fn, Atom) and t.fn.name in _INFIX_TERM and len(t.args) == 2:
        out.append("(")
        _term_text(t.args[0], out)
        out.append(f" {t.fn.name} ")
        _term_text(t.args[1], out)
        out.append(")")
        return
    if isinstance(t, Var):
        out.append("?" + t.name)
        return
    if isinstance(t, App):
        if is_list(t):
            out.append("[")
            for i, a in enumerate(t.args):
                if i:
                    out.append(",")
                _term_text(a, out)
            out.append("]")
            return
        _term_text(t.fn, out)
        out.append("(")
        for i, a in enumerate(t.args):
            if i:
                out.append(",")
            _term_text(a, out)
        out.append(")")
        return
    out.append(canonical_text(t))


def formula_text(f, prec: int = 0) -> str:
    # precedence ranks: iff=1, imp=2, or=3, and=4, unary=5
    if isinstance(f, FIff):
        s = f"{formula_text(f.lhs, 2)} <==> {formula_text(f.rhs, 1)}"
        return f"({s})" if prec > 1 else s
    if isinstance(f, FImp):
        s = f"{formula_text(f.lhs, 3)} ==> {formula_text(f.rhs, 2)}"
        return f"({s})" if prec > 2 else s
    if isinstance(f, FOr):
        s = " or ".join(formula_text(x, 4) for x in f.items)
        return f"({s})" if prec > 3 else s
    if isinstance(f, FAnd):
        s = " and ".join(formula_text(x, 5) for x in f.items)
        return f"({s})" if prec > 4 else s
    if isinstance(f, FNaf):
        return f"naf ({formula_text(f.body, 0)})"
    if isinstance(f, FQuant):
        vs = ",".join("?" + v for v in f.vars)
        return f"{f.kind}({vs})({formula_text(f.body, 0)})"
    if isinstance(f, FLit):
        lit = f.lit
        core = term_text(lit.atom)
        atom = lit.atom
        if isinstance(atom, App) and isinstance(atom.fn, Atom) and atom.fn.name in BUILTIN_COMPARISONS and len(atom.args) == 2:
            op = atom.fn.name
            core = f"{term_text(atom.args[0])} {op} {term_text(atom.args[1])}"
            if prec > 4:
                core = f"({core})"
        if lit.neg:
            core = f"neg {core}"
        if f.mode != "plain":
            core = f"{f.mode} {core}"
        if f.guard:
            guards = ",".join(f"ground(?{g})" for g in f.guard)
            core = f"wish({guards})^{core}"
        return core
    raise TypeError(f"not a formula: {f!r}")


def rule_text(rule: Rule) -> str:
    parts = []
    if rule.id_explicit or rule.descriptor:
        attrs = ", ".join(f"{k}->{term_text(v)}" for k, v in rule.descriptor.items())
        parts.append("@!{" + rule.rule_id + (f"[{attrs}]" if attrs else "") + "} ")
    if rule.strict:
        parts.append("@@strict ")
    parts.append(formula_text(rule.head))
    if rule.body is not None:
        parts.append(" :- ")
        parts.append(formula_text(rule.body))
    parts.append(".")
    return "".join(parts)
