"""Text syntax for formulas and polynomials.

Grammar (lowest precedence first)::

    formula := ("A" | "E") ident "." formula | iff
    iff     := imp ("<->" imp)*
    imp     := or ("->" imp)?
    or      := and ("|" and)*
    and     := not ("&" not)*
    not     := "!" not | "(" formula ")" | atom | "true" | "false" | quantified
    atom    := poly rel poly          rel in < <= = != >= >
    poly    := sums and products of numbers and identifiers, "^" with a
               nonnegative integer exponent, "/" by constants

``->`` and ``<->`` are desugared into ``!``/``|``/``&``. Atoms ``p rel q``
become ``p - q rel 0``. ``#`` starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .formula import (FALSE, TRUE, And, Atom, Formula, Not, Or, Quantifier, free_variables,
                      fresh_name, all_variables, iff, implies, rename_free)
from .poly import Polynomial, as_rational


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op><->|->|<=|>=|!=|==|[-+*/^().,&|!<>=])
""", re.VERBOSE)

_RELS = {"<", "<=", "=", "==", "!=", ">=", ">"}


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, known: set | None):
        self.toks = tokenize(text)
        self.i = 0
        self.known = known

    # -- token helpers -----------------------------------------------------

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        found = tok.text or "end of input"
        raise ParseError(f"{msg}, found {found!r}", tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    # -- formulas ----------------------------------------------------------

    def is_quant(self) -> bool:
        t = self.tok
        return (t.kind == "ident" and t.text in ("A", "E") and self.peek().kind == "ident"
                and self.peek(2).text in (".", ","))

    def formula(self) -> Formula:
        if self.is_quant():
            return self.quant()
        return self.iff()

    def quant(self) -> Formula:
        kind = self.tok.text
        self.i += 1
        names = [self.ident()]
        while self.accept(","):
            names.append(self.ident())
        self.expect(".")
        body = self.formula()
        for v in reversed(names):
            body = Quantifier(kind, v, body)
        return body

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.error("expected identifier")
        self.i += 1
        return t.text

    def iff(self) -> Formula:
        f = self.imp()
        while self.accept("<->"):
            f = iff(f, self.imp())
        return f

    def imp(self) -> Formula:
        f = self.disj()
        if self.accept("->"):
            return implies(f, self.imp())
        return f

    def disj(self) -> Formula:
        parts = [self.conj()]
        while self.accept("|"):
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(parts)

    def conj(self) -> Formula:
        parts = [self.neg()]
        while self.accept("&"):
            parts.append(self.neg())
        return parts[0] if len(parts) == 1 else And(parts)

    def neg(self) -> Formula:
        t = self.tok
        if self.accept("!"):
            return Not(self.neg())
        if self.is_quant():
            return self.quant()
        if t.kind == "ident" and t.text in ("true", "false") and self.peek().text not in _RELS | set("+-*/^"):
            self.i += 1
            return TRUE if t.text == "true" else FALSE
        if t.text == "(":
            start = self.i
            try:
                return self.atom()
            except ParseError:
                self.i = start
            self.i += 1
            f = self.formula()
            self.expect(")")
            return f
        return self.atom()

    def atom(self) -> Formula:
        lhs = self.poly()
        t = self.tok
        if t.text not in _RELS:
            self.error("expected relation")
        self.i += 1
        rhs = self.poly()
        rel = "=" if t.text == "==" else t.text
        return Atom(lhs - rhs, rel)

    # -- polynomials -------------------------------------------------------

    def poly(self) -> Polynomial:
        p = self.term()
        while True:
            if self.accept("+"):
                p = p + self.term()
            elif self.accept("-"):
                p = p - self.term()
            else:
                return p

    def term(self) -> Polynomial:
        p = self.unary()
        while True:
            if self.accept("*"):
                p = p * self.unary()
            elif self.tok.text == "/":
                t = self.peek()
                self.i += 1
                q = self.unary()
                if not q.is_constant() or q.is_zero():
                    self.error("division only by nonzero constants", t)
                p = p / q.constant_value()
            else:
                return p

    def unary(self) -> Polynomial:
        if self.accept("-"):
            return -self.unary()
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Polynomial:
        base = self.primary()
        if self.accept("^"):
            t = self.tok
            if t.kind != "num" or "." in t.text:
                self.error("expected nonnegative integer exponent")
            self.i += 1
            return base ** int(t.text)
        return base

    def primary(self) -> Polynomial:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Polynomial.const(as_rational(t.text))
        if t.kind == "ident":
            if self.known is not None and t.text not in self.known:
                self.error(f"unknown variable {t.text!r}")
            self.i += 1
            return Polynomial.var(t.text)
        if self.accept("("):
            p = self.poly()
            self.expect(")")
            return p
        self.error("expected polynomial")


def parse(text: str, known_variables=None) -> Formula:
    """Parse a formula. With ``known_variables`` every identifier must be a
    known free variable or bound by an enclosing quantifier."""
    known = None
    if known_variables is not None:
        known = set(known_variables) | _bound_names(text)
    p = _Parser(text, known)
    f = p.formula()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return _rename_apart(f)


def parse_polynomial(text: str) -> Polynomial:
    p = _Parser(text, None)
    q = p.poly()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return q


def _bound_names(text: str) -> set:
    return set(re.findall(r"\b[AE]\s+([A-Za-z_][A-Za-z0-9_']*)\s*[.,]", text))


def _rename_apart(f: Formula) -> Formula:
    free = free_variables(f)
    used = set(all_variables(f))

    def walk(g, scope):
        if isinstance(g, Quantifier):
            v, body = g.var, g.body
            if v in free or v in scope:
                nv = fresh_name(v, used)
                used.add(nv)
                body = rename_free(body, {v: nv})
                v = nv
            return Quantifier(g.kind, v, walk(body, scope | {v}))
        if isinstance(g, Not):
            return Not(walk(g.arg, scope))
        if isinstance(g, (And, Or)):
            return type(g)(walk(a, scope) for a in g.args)
        return g

    return walk(f, frozenset())


def print_formula(f: Formula) -> str:
    from .formula import to_text
    return to_text(f)
