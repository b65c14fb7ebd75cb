"""Parser and printers for the textual CHR language.

Grammar (one clause per ``.``)::

    clause     := decl | rule
    decl       := "constraints" spec ("," spec)*        spec := name "/" int
    rule       := [name "@"] [prio "::"] heads arrow [guard "|"] body
    heads      := atoms | atoms "\\" atoms              (``\\`` only with ``<=>``)
    arrow      := "<=>" | "==>"

``P :: name @ heads`` is accepted as well.  Terms follow Prolog conventions:
variables start with an uppercase letter or ``_``, ``%`` starts a line
comment, and arithmetic is plain compound terms (``+ - * mod`` infix).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, NamedTuple

from .terms import (
    BUILTIN,
    BUILTINS,
    CHR,
    QUERY_SERIAL,
    RULE_SERIAL,
    TRUE,
    Atom,
    Compound,
    ConstraintAtom,
    Int,
    Term,
    Var,
    make_atom,
    term_vars,
)


class CHRError(Exception):
    """Base class for all errors raised by chrkit."""


class ParseError(CHRError):
    def __init__(self, message: str, line: int = 0, col: int = 0) -> None:
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


# ---------------------------------------------------------------------------
# program representation


class Occurrence(NamedTuple):
    rule_index: int
    head_index: int  # position in kept ++ removed
    removed: bool


@dataclass(frozen=True)
class Rule:
    name: str
    kept: tuple[ConstraintAtom, ...]
    removed: tuple[ConstraintAtom, ...]
    guard: tuple[ConstraintAtom, ...] = (TRUE,)
    body: tuple[ConstraintAtom, ...] = (TRUE,)
    priority: Term | None = None

    @cached_property
    def heads(self) -> tuple[ConstraintAtom, ...]:
        return self.kept + self.removed

    @cached_property
    def head_vars(self) -> tuple[Var, ...]:
        seen: dict[Var, None] = {}
        for h in self.heads:
            for a in h.args:
                for v in term_vars(a):
                    seen.setdefault(v, None)
        return tuple(seen)

    @property
    def is_propagation(self) -> bool:
        return not self.removed

    @cached_property
    def trivial_guard(self) -> bool:
        return all(g == TRUE for g in self.guard)

    def is_removed(self, head_index: int) -> bool:
        return head_index >= len(self.kept)


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...]
    constraints: frozenset = field(default_factory=frozenset)

    @cached_property
    def occurrences(self) -> dict[tuple[str, int], tuple[Occurrence, ...]]:
        table: dict[tuple[str, int], list[Occurrence]] = {}
        for ri, rule in enumerate(self.rules):
            for hi, h in enumerate(rule.heads):
                table.setdefault(h.key, []).append(Occurrence(ri, hi, rule.is_removed(hi)))
        return {k: tuple(v) for k, v in table.items()}

    @cached_property
    def _by_name(self) -> dict[str, int]:
        return {r.name: i for i, r in enumerate(self.rules)}

    def rule(self, name: str) -> Rule:
        return self.rules[self._by_name[name]]

    def rule_index(self, name: str) -> int:
        return self._by_name[name]

    @cached_property
    def join_plans(self):
        from .joins import JoinPlans

        return JoinPlans(self)

    @property
    def has_priorities(self) -> bool:
        return any(r.priority is not None for r in self.rules)

    def structure(self) -> tuple:
        """Comparable view used for round-trip checks."""
        occ = tuple(sorted((k, v) for k, v in self.occurrences.items()))
        return (self.rules, occ)


# ---------------------------------------------------------------------------
# tokenizer

SYMBOL_CHARS = "+-*/\\^<>=~:.?@#&$"


class Token(NamedTuple):
    kind: str  # var, name, int, qname, punct, end
    text: str
    line: int
    col: int
    pos: int  # offset of first char
    stop: int  # offset after last char


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"[0-9]+")
_SYMBOLS = re.compile("[" + re.escape(SYMBOL_CHARS) + "]+")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    line, line_start = 1, 0

    def tok(kind: str, s: str, start: int, stop: int) -> None:
        tokens.append(Token(kind, s, line, start - line_start + 1, start, stop))

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            line_start = i + 1
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == "%":
            j = text.find("\n", i)
            i = n if j < 0 else j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise ParseError("unterminated block comment", line, i - line_start + 1)
            line += text.count("\n", i, j)
            if "\n" in text[i:j]:
                line_start = text.rfind("\n", i, j) + 1
            i = j + 2
        elif ch.isdigit():
            m = _INT.match(text, i)
            tok("int", m.group(), i, m.end())
            i = m.end()
        elif ch.isalpha() or ch == "_":
            m = _IDENT.match(text, i)
            s = m.group()
            tok("var" if (s[0].isupper() or s[0] == "_") else "name", s, i, m.end())
            i = m.end()
        elif ch == "'":
            j = i + 1
            buf = []
            while True:
                if j >= n or text[j] == "\n":
                    raise ParseError("unterminated quoted atom", line, i - line_start + 1)
                if text[j] == "'":
                    if text.startswith("''", j):
                        buf.append("'")
                        j += 2
                        continue
                    break
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                    continue
                buf.append(text[j])
                j += 1
            tok("qname", "".join(buf), i, j + 1)
            i = j + 1
        elif ch in "(),|":
            tok("punct", ch, i, i + 1)
            i += 1
        elif ch in SYMBOL_CHARS:
            m = _SYMBOLS.match(text, i)
            s = m.group()
            stop = m.end()
            # a trailing "." followed by layout (or EOF) ends the clause
            if s.endswith(".") and (stop >= n or text[stop].isspace() or text[stop] == "%"):
                if len(s) > 1:
                    tok("name", s[:-1], i, stop - 1)
                tok("end", ".", stop - 1, stop)
            else:
                tok("name", s, i, stop)
            i = stop
        else:
            raise ParseError(f"unexpected character {ch!r}", line, i - line_start + 1)
    return tokens


# ---------------------------------------------------------------------------
# term parser (operator precedence)

INFIX: dict[str, tuple[int, str]] = {
    "=": (700, "xfx"),
    "==": (700, "xfx"),
    "\\==": (700, "xfx"),
    "<": (700, "xfx"),
    "=<": (700, "xfx"),
    ">": (700, "xfx"),
    ">=": (700, "xfx"),
    "=:=": (700, "xfx"),
    "=\\=": (700, "xfx"),
    "is": (700, "xfx"),
    "+": (500, "yfx"),
    "-": (500, "yfx"),
    "*": (400, "yfx"),
    "/": (400, "yfx"),
    "mod": (400, "yfx"),
}
PREFIX: dict[str, int] = {"-": 200}

_RULE_MARKERS = {"@", "::", "<=>", "==>", "\\"}


class _TermParser:
    def __init__(self, tokens: list[Token], varmap: dict[str, Var], serial: int, anon: list[int]):
        self.toks = tokens
        self.i = 0
        self.varmap = varmap
        self.serial = serial
        self.anon = anon

    # helpers
    def peek(self) -> Token | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek() or (self.toks[-1] if self.toks else None)
        if tok is None:
            return ParseError(msg)
        return ParseError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t is None or t.text != text or t.kind not in ("punct", "name"):
            raise self.error(f"expected {text!r}")
        self.i += 1
        return t

    def at_end(self) -> bool:
        return self.i >= len(self.toks)

    def var(self, name: str) -> Var:
        if name == "_":
            self.anon[0] += 1
            return Var(f"_%{self.anon[0]}", self.serial)
        v = self.varmap.get(name)
        if v is None:
            v = self.varmap[name] = Var(name, self.serial)
        return v

    def starts_term(self, t: Token | None) -> bool:
        if t is None:
            return False
        if t.kind in ("var", "int", "qname"):
            return True
        if t.kind == "punct":
            return t.text == "("
        return t.kind == "name" and t.text not in _RULE_MARKERS

    # grammar
    def parse(self, max_prec: int = 1200) -> tuple[Term, int]:
        left, lprec = self.primary(max_prec)
        while True:
            t = self.peek()
            if t is None or t.kind != "name" or t.text not in INFIX:
                break
            prec, typ = INFIX[t.text]
            if prec > max_prec:
                break
            left_max = prec if typ == "yfx" else prec - 1
            if lprec > left_max:
                break
            self.i += 1
            right, _ = self.parse(prec - 1)
            left, lprec = Compound(t.text, (left, right)), prec
        return left, lprec

    def primary(self, max_prec: int) -> tuple[Term, int]:
        t = self.peek()
        if t is None:
            raise self.error("unexpected end of clause")
        self.i += 1
        if t.kind == "int":
            return Int(int(t.text)), 0
        if t.kind == "var":
            return self.var(t.text), 0
        if t.kind == "punct":
            if t.text == "(":
                inner, _ = self.parse(1200)
                self.expect(")")
                return inner, 0
            raise self.error(f"unexpected {t.text!r}", t)
        if t.kind == "end":
            raise self.error("unexpected end of clause", t)
        name = t.text
        nxt = self.peek()
        if nxt is not None and nxt.kind == "punct" and nxt.text == "(" and nxt.pos == t.stop:
            self.i += 1
            args = [self.parse(999)[0]]
            while True:
                p = self.peek()
                if p is not None and p.kind == "punct" and p.text == ",":
                    self.i += 1
                    args.append(self.parse(999)[0])
                    continue
                break
            self.expect(")")
            return Compound(name, tuple(args)), 0
        if t.kind == "name" and name == "-" and nxt is not None and nxt.kind == "int" and nxt.pos == t.stop:
            self.i += 1
            return Int(-int(nxt.text)), 0
        if t.kind == "name" and name in PREFIX and self.starts_term(nxt):
            prec = PREFIX[name]
            if prec <= max_prec:
                operand, _ = self.parse(prec)
                return Compound(name, (operand,)), prec
        if t.kind == "name" and name in _RULE_MARKERS:
            raise self.error(f"unexpected {name!r}", t)
        prec = INFIX[name][0] if (t.kind == "name" and name in INFIX) else 0
        return Atom(name), min(prec, max_prec)

    def term_list(self) -> list[Term]:
        items = [self.parse(999)[0]]
        while True:
            t = self.peek()
            if t is not None and t.kind == "punct" and t.text == ",":
                self.i += 1
                items.append(self.parse(999)[0])
                continue
            break
        if not self.at_end():
            raise self.error(f"unexpected {self.peek().text!r}")
        return items


def _is_identifier(name: str) -> bool:
    return bool(re.fullmatch(r"[a-z][A-Za-z0-9_]*", name))


def _to_atom(t: Term, where: str, tok: Token | None) -> ConstraintAtom:
    line, col = (tok.line, tok.col) if tok else (0, 0)
    if isinstance(t, Atom):
        symbol, args = t.name, ()
    elif isinstance(t, Compound):
        symbol, args = t.functor, t.args
    else:
        raise ParseError(f"{where}: expected a constraint, got {format_term(t)}", line, col)
    a = make_atom(symbol, args)
    if a.kind == CHR and not _is_identifier(symbol):
        raise ParseError(f"{where}: unknown built-in {symbol}/{len(args)}", line, col)
    return a


# ---------------------------------------------------------------------------
# clause parsing


def _split_clauses(tokens: list[Token]) -> list[list[Token]]:
    clauses, cur = [], []
    for t in tokens:
        if t.kind == "end":
            if not cur:
                raise ParseError("empty clause", t.line, t.col)
            clauses.append(cur)
            cur = []
        else:
            cur.append(t)
    if cur:
        raise ParseError("missing '.' at end of clause", cur[-1].line, cur[-1].col)
    return clauses


def _depth0(tokens: list[Token]) -> list[tuple[int, Token]]:
    out, depth = [], 0
    for i, t in enumerate(tokens):
        if t.kind == "punct" and t.text == "(":
            depth += 1
        elif t.kind == "punct" and t.text == ")":
            depth -= 1
        elif depth == 0 and ((t.kind == "name" and t.text in _RULE_MARKERS) or (t.kind == "punct" and t.text == "|")):
            out.append((i, t))
    return out


def _parse_atoms(tokens: list[Token], varmap, serial, anon, where: str, anchor: Token) -> list[ConstraintAtom]:
    if not tokens:
        raise ParseError(f"empty {where}", anchor.line, anchor.col)
    p = _TermParser(tokens, varmap, serial, anon)
    return [_to_atom(t, where, tokens[0]) for t in p.term_list()]


def _parse_declaration(tokens: list[Token]) -> list[tuple[str, int]]:
    p = _TermParser(tokens[1:], {}, RULE_SERIAL, [0])
    if p.at_end():
        raise ParseError("empty constraints declaration", tokens[0].line, tokens[0].col)
    keys = []
    for spec in p.term_list():
        if not (
            isinstance(spec, Compound)
            and spec.functor == "/"
            and isinstance(spec.args[0], Atom)
            and isinstance(spec.args[1], Int)
        ):
            raise ParseError("constraint declarations look like name/arity", tokens[0].line, tokens[0].col)
        key = (spec.args[0].name, spec.args[1].value)
        if key in BUILTINS:
            raise ParseError(f"cannot declare built-in {key[0]}/{key[1]}", tokens[0].line, tokens[0].col)
        keys.append(key)
    return keys


@dataclass
class _RawRule:
    name: str | None
    kept: list[ConstraintAtom]
    removed: list[ConstraintAtom]
    guard: list[ConstraintAtom]
    body: list[ConstraintAtom]
    priority: Term | None
    anchor: Token


def _parse_rule(tokens: list[Token]) -> _RawRule:
    varmap: dict[str, Var] = {}
    anon = [0]
    marks = _depth0(tokens)
    anchor = tokens[0]

    arrows = [(i, t) for i, t in marks if t.text in ("<=>", "==>")]
    if not arrows:
        raise ParseError("expected '<=>' or '==>'", anchor.line, anchor.col)
    if len(arrows) > 1:
        i, t = arrows[1]
        raise ParseError("more than one arrow in rule", t.line, t.col)
    arrow_i, arrow = arrows[0]

    prefix_marks = [(i, t) for i, t in marks if i < arrow_i and t.text in ("@", "::")]
    name = None
    priority = None
    start = 0
    seen = set()
    for i, t in prefix_marks:
        if t.text in seen:
            raise ParseError(f"repeated {t.text!r}", t.line, t.col)
        seen.add(t.text)
        segment = tokens[start:i]
        if not segment:
            raise ParseError(f"missing term before {t.text!r}", t.line, t.col)
        if t.text == "@":
            p = _TermParser(segment, {}, RULE_SERIAL, [0])
            nterm = p.parse(1200)[0]
            if not p.at_end() or isinstance(nterm, (Var, Int)):
                raise ParseError("rule name must be an atom or compound term", segment[0].line, segment[0].col)
            name = format_term(nterm)
        else:
            p = _TermParser(segment, varmap, RULE_SERIAL, anon)
            priority = p.parse(1200)[0]
            if not p.at_end():
                raise p.error("unexpected token in priority")
        start = i + 1

    head_toks = tokens[start:arrow_i]
    bs = [(i, t) for i, t in marks if start <= i < arrow_i and t.text == "\\"]
    if len(bs) > 1:
        raise ParseError("more than one '\\' in rule head", bs[1][1].line, bs[1][1].col)
    stray = [t for i, t in marks if start <= i < arrow_i and t.text not in ("\\",)]
    if stray:
        raise ParseError(f"unexpected {stray[0].text!r} in rule head", stray[0].line, stray[0].col)
    if bs:
        if arrow.text != "<=>":
            raise ParseError("'\\' requires '<=>'", bs[0][1].line, bs[0][1].col)
        cut = bs[0][0]
        kept = _parse_atoms(tokens[start:cut], varmap, RULE_SERIAL, anon, "kept head", arrow)
        removed = _parse_atoms(tokens[cut + 1 : arrow_i], varmap, RULE_SERIAL, anon, "removed head", arrow)
    else:
        if not head_toks:
            raise ParseError("rule with empty head", arrow.line, arrow.col)
        heads = _parse_atoms(head_toks, varmap, RULE_SERIAL, anon, "head", arrow)
        kept, removed = (heads, []) if arrow.text == "==>" else ([], heads)
    for h in kept + removed:
        if h.kind != CHR:
            raise ParseError(f"built-in {h.symbol}/{len(h.args)} in rule head", anchor.line, anchor.col)

    after = [(i, t) for i, t in marks if i > arrow_i]
    bad = [t for _, t in after if t.text != "|"]
    if bad:
        raise ParseError(f"unexpected {bad[0].text!r} after arrow", bad[0].line, bad[0].col)
    if len(after) > 1:
        raise ParseError("a rule may contain at most one '|'", after[1][1].line, after[1][1].col)
    if after:
        bar_i = after[0][0]
        guard = _parse_atoms(tokens[arrow_i + 1 : bar_i], varmap, RULE_SERIAL, anon, "guard", arrow)
        body = _parse_atoms(tokens[bar_i + 1 :], varmap, RULE_SERIAL, anon, "body", arrow)
        for g in guard:
            if g.kind != BUILTIN:
                raise ParseError(f"CHR constraint {g.symbol}/{len(g.args)} in guard", arrow.line, arrow.col)
    else:
        guard = [TRUE]
        body = _parse_atoms(tokens[arrow_i + 1 :], varmap, RULE_SERIAL, anon, "body", arrow)
    return _RawRule(name, kept, removed, guard, body, priority, anchor)


def parse_program(text: str) -> Program:
    """Parse program text into a normalized :class:`Program`."""
    declared: dict[tuple[str, int], None] = {}
    raws: list[_RawRule] = []
    for clause in _split_clauses(tokenize(text)):
        if clause[0].kind == "name" and clause[0].text == "constraints" and not any(
            t.text in ("<=>", "==>") for _, t in _depth0(clause)
        ):
            for key in _parse_declaration(clause):
                declared.setdefault(key, None)
            continue
        raws.append(_parse_rule(clause))

    taken: set[str] = set()
    for raw in raws:
        if raw.name is not None:
            if raw.name in taken:
                raise ParseError(f"duplicate rule name {raw.name!r}", raw.anchor.line, raw.anchor.col)
            taken.add(raw.name)

    rules = []
    counter = 0
    for raw in raws:
        name = raw.name
        if name is None:
            while True:
                counter += 1
                name = f"rule_{counter}"
                if name not in taken:
                    break
            taken.add(name)
        if raw.priority is not None:
            head_vars = {v for h in raw.kept + raw.removed for a in h.args for v in term_vars(a)}
            stray = [v for v in term_vars(raw.priority) if v not in head_vars]
            if stray:
                raise ParseError(
                    f"priority of rule {name!r} mentions non-head variable {stray[0].name}",
                    raw.anchor.line,
                    raw.anchor.col,
                )
        for h in raw.kept + raw.removed:
            declared.setdefault(h.key, None)
        rules.append(
            Rule(name, tuple(raw.kept), tuple(raw.removed), tuple(raw.guard), tuple(raw.body), raw.priority)
        )
    return Program(tuple(rules), frozenset(declared))


def parse_query(text: str, serial: int = QUERY_SERIAL) -> list[ConstraintAtom]:
    """Parse a comma-separated goal; variables are shared across the query."""
    tokens = tokenize(text)
    if tokens and tokens[-1].kind == "end":
        tokens = tokens[:-1]
    if any(t.kind == "end" for t in tokens):
        t = next(t for t in tokens if t.kind == "end")
        raise ParseError("unexpected '.' in query", t.line, t.col)
    if not tokens:
        return []
    p = _TermParser(tokens, {}, serial, [0])
    marks = [t for _, t in _depth0(tokens)]
    if marks:
        raise ParseError(f"unexpected {marks[0].text!r} in query", marks[0].line, marks[0].col)
    return [_to_atom(t, "query", tokens[0]) for t in p.term_list()]


# ---------------------------------------------------------------------------
# printing


def _quote(name: str) -> str:
    if _is_identifier(name) or (name and all(c in SYMBOL_CHARS for c in name)) or name == "[]":
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_term(t: Term, var_name: Callable[[Var], str] | None = None, max_prec: int = 1200) -> str:
    """Render ``t``; operators are written infix with minimal parentheses."""
    if var_name is None:
        var_name = _source_var_name
    cls = t.__class__
    if cls is Var:
        return var_name(t)  # type: ignore[arg-type]
    if cls is Int:
        return str(t.value)  # type: ignore[union-attr]
    if cls is Atom:
        return _quote(t.name)  # type: ignore[union-attr]
    f, args = t.functor, t.args  # type: ignore[union-attr]
    if len(args) == 2 and f in INFIX:
        prec, typ = INFIX[f]
        lmax = prec if typ == "yfx" else prec - 1
        left = format_term(args[0], var_name, lmax)
        right = format_term(args[1], var_name, prec - 1)
        sep = f" {f} " if f[0].isalpha() else f
        if sep == f and (right[0] in SYMBOL_CHARS or left[-1] in SYMBOL_CHARS):
            sep = f" {f} "
        s = f"{left}{sep}{right}"
        return f"({s})" if prec > max_prec else s
    if len(args) == 1 and f in PREFIX:
        prec = PREFIX[f]
        inner = format_term(args[0], var_name, prec)
        s = f"{f} {inner}" if (inner[0] in SYMBOL_CHARS or inner[0].isdigit()) else f"{f}{inner}"
        return f"({s})" if prec > max_prec else s
    inner = ",".join(format_term(a, var_name, 999) for a in args)
    return f"{_quote(f)}({inner})"


def _source_var_name(v: Var) -> str:
    if v.name.startswith("_%"):
        return "_"
    return v.name


def format_atom(a: ConstraintAtom, var_name: Callable[[Var], str] | None = None) -> str:
    return format_term(a.as_term(), var_name, 999)


class VarNamer:
    """Assigns ``_G0, _G1, ...`` to variables in first-seen order.

    Variables listed in ``keep`` print under their own names.
    """

    def __init__(self, keep: Iterable[Var] = (), prefix: str = "_G") -> None:
        self.names: dict[Var, str] = {}
        self.prefix = prefix
        self.count = 0
        for v in keep:
            self.names[v] = v.name

    def __call__(self, v: Var) -> str:
        name = self.names.get(v)
        if name is None:
            name = self.names[v] = f"{self.prefix}{self.count}"
            self.count += 1
        return name


def resolve_term(t: Term, bindings) -> Term:
    return t if bindings is None else bindings.resolve(t)


def standard_order_key(t: Term):
    """Prolog-style standard order: Var < Int < Atom < Compound."""
    cls = t.__class__
    if cls is Var:
        return (0, t.serial, t.name)  # type: ignore[union-attr]
    if cls is Int:
        return (1, t.value)  # type: ignore[union-attr]
    if cls is Atom:
        return (3, t.name)  # type: ignore[union-attr]
    return (4, len(t.args), t.functor, tuple(standard_order_key(a) for a in t.args))  # type: ignore[union-attr]


def format_store(constraints, bindings=None, *, namer: VarNamer | None = None, ids: bool = True) -> str:
    """Canonical rendering of identified constraints (``.atom``/``.id`` pairs)."""
    namer = namer if namer is not None else VarNamer()
    items = []
    for c in constraints:
        args = tuple(resolve_term(a, bindings) for a in c.atom.args)
        items.append(((c.atom.symbol, len(args), tuple(standard_order_key(a) for a in args), c.id), c.atom, args))
    items.sort(key=lambda x: x[0])
    parts = []
    for (_, _, _, cid), atom, args in items:
        s = format_atom(ConstraintAtom(atom.symbol, args, atom.kind), namer)
        parts.append(f"{s}#{cid}" if ids else s)
    return ", ".join(parts)


def print_canonical(x, bindings=None, *, ids: bool = True, namer: VarNamer | None = None) -> str:
    """Deterministic rendering of a term, constraint atom, or store snapshot.

    Variables print as ``_G0, _G1, ...`` in first-occurrence order unless a
    ``namer`` is supplied.
    """
    namer = namer if namer is not None else VarNamer()
    if isinstance(x, ConstraintAtom):
        args = tuple(resolve_term(a, bindings) for a in x.args)
        return format_atom(ConstraintAtom(x.symbol, args, x.kind), namer)
    if isinstance(x, (Var, Atom, Int, Compound)):
        return format_term(resolve_term(x, bindings), namer)
    live = getattr(x, "live", None)
    if live is not None:
        if bindings is None:
            bindings = getattr(x, "bindings", None)
        x = live.values()
    return format_store(x, bindings, namer=namer, ids=ids)


def format_rule(rule: Rule) -> str:
    parts = [f"{rule.name} @ "]
    if rule.priority is not None:
        parts.append(f"{format_term(rule.priority)} :: ")
    if rule.kept and rule.removed:
        parts.append(", ".join(map(format_atom, rule.kept)))
        parts.append(" \\ ")
        parts.append(", ".join(map(format_atom, rule.removed)))
        parts.append(" <=> ")
    elif rule.removed:
        parts.append(", ".join(map(format_atom, rule.removed)))
        parts.append(" <=> ")
    else:
        parts.append(", ".join(map(format_atom, rule.kept)))
        parts.append(" ==> ")
    if list(rule.guard) != [TRUE]:
        parts.append(", ".join(map(format_atom, rule.guard)))
        parts.append(" | ")
    parts.append(", ".join(map(format_atom, rule.body)))
    parts.append(".")
    return "".join(parts)


def format_program(program: Program) -> str:
    lines = []
    if program.constraints:
        specs = ", ".join(f"{_quote(n)}/{a}" for n, a in sorted(program.constraints))
        lines.append(f"constraints {specs}.")
    lines.extend(format_rule(r) for r in program.rules)
    return "\n".join(lines) + "\n"
