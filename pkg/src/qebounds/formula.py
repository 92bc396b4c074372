"""First-order formulas over polynomial sign conditions ``p rel 0``.

Relations are handled internally as sign sets: a bit mask over
``{negative, zero, positive}``. This makes negation, conjunction of atoms
with the same left-hand side, and ground evaluation uniform.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

from .poly import Polynomial, UnknownVariableError, as_rational

NEG, ZERO, POS = 1, 2, 4
ALL_SIGNS = NEG | ZERO | POS

REL_TO_MASK = {"<": NEG, "<=": NEG | ZERO, "=": ZERO, "!=": NEG | POS, ">=": ZERO | POS, ">": POS}
MASK_TO_REL = {m: r for r, m in REL_TO_MASK.items()}
RELATIONS = tuple(REL_TO_MASK)


def flip_mask(mask: int) -> int:
    """Sign set of ``-p`` given the sign set of ``p``."""
    return (mask & ZERO) | ((mask & NEG) << 2) | ((mask & POS) >> 2)


def sign_bit(value) -> int:
    return ZERO if value == 0 else (POS if value > 0 else NEG)


class Formula:
    """Base class of the immutable formula AST."""

    __slots__ = ()

    def __and__(self, other: "Formula") -> "Formula":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Formula":
        return Or((self, other))

    def __invert__(self) -> "Formula":
        return Not(self)

    def __str__(self) -> str:
        return to_text(self)

    @property
    def free_variables(self) -> frozenset:
        return free_variables(self)


class _Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        object.__setattr__(self, "value", value)

    def __repr__(self) -> str:
        return "TRUE" if self.value else "FALSE"

    def __eq__(self, other) -> bool:
        return isinstance(other, _Const) and other.value == self.value

    def __hash__(self) -> int:
        return hash(self.value)

    def __reduce__(self):
        return (_const, (self.value,))


def _const(value: bool) -> _Const:
    return TRUE if value else FALSE


TRUE = _Const(True)
FALSE = _Const(False)


class Atom(Formula):
    """``poly rel 0``."""

    __slots__ = ("poly", "mask", "_hash")

    def __init__(self, poly: Polynomial, rel: str | int):
        mask = REL_TO_MASK[rel] if isinstance(rel, str) else rel
        if mask not in MASK_TO_REL:
            raise ValueError(f"sign mask {mask} is not a relation")
        object.__setattr__(self, "poly", poly)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_hash", None)

    @property
    def rel(self) -> str:
        return MASK_TO_REL[self.mask]

    def __eq__(self, other) -> bool:
        return isinstance(other, Atom) and self.mask == other.mask and self.poly == other.poly

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((self.mask, self.poly))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        return f"Atom({str(self.poly)!r}, {self.rel!r})"

    def negate(self) -> "Atom":
        return Atom(self.poly, ALL_SIGNS ^ self.mask)


class Not(Formula):
    __slots__ = ("arg", "_hash")

    def __init__(self, arg: Formula):
        object.__setattr__(self, "arg", arg)
        object.__setattr__(self, "_hash", None)

    def __eq__(self, other) -> bool:
        return isinstance(other, Not) and self.arg == other.arg

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash(("not", self.arg))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        return f"Not({self.arg!r})"


class _Junction(Formula):
    __slots__ = ("args", "_hash")
    _tag = ""

    def __init__(self, args: Iterable[Formula]):
        flat = []
        for a in args:
            if type(a) is type(self):
                flat.extend(a.args)
            else:
                flat.append(a)
        if not flat:
            raise ValueError(f"{type(self).__name__} needs at least one argument")
        object.__setattr__(self, "args", tuple(flat))
        object.__setattr__(self, "_hash", None)

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and self.args == other.args

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((self._tag, self.args))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self.args)!r})"


class And(_Junction):
    __slots__ = ()
    _tag = "and"


class Or(_Junction):
    __slots__ = ()
    _tag = "or"


class Quantifier(Formula):
    """``kind`` is ``"E"`` (exists) or ``"A"`` (for all)."""

    __slots__ = ("kind", "var", "body", "_hash")

    def __init__(self, kind: str, var: str, body: Formula):
        if kind not in ("E", "A"):
            raise ValueError(f"bad quantifier kind {kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "_hash", None)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Quantifier) and self.kind == other.kind
                and self.var == other.var and self.body == other.body)

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((self.kind, self.var, self.body))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self) -> str:
        return f"Quantifier({self.kind!r}, {self.var!r}, {self.body!r})"


def Exists(var: str, body: Formula) -> Quantifier:
    return Quantifier("E", var, body)


def Forall(var: str, body: Formula) -> Quantifier:
    return Quantifier("A", var, body)


def exists(names: Iterable[str], body: Formula) -> Formula:
    for v in reversed(list(names)):
        body = Quantifier("E", v, body)
    return body


def forall(names: Iterable[str], body: Formula) -> Formula:
    for v in reversed(list(names)):
        body = Quantifier("A", v, body)
    return body


def implies(a: Formula, b: Formula) -> Formula:
    return Or((Not(a), b))


def iff(a: Formula, b: Formula) -> Formula:
    return And((Or((Not(a), b)), Or((a, Not(b)))))


def atom(lhs, rel: str, rhs=0) -> Atom:
    """``lhs rel rhs`` normalized to ``lhs - rhs rel 0``."""
    return Atom(Polynomial.lift(lhs) - Polynomial.lift(rhs), rel)


# -- traversal helpers ------------------------------------------------------

def iter_atoms(f: Formula):
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            yield g
        elif isinstance(g, _Junction):
            stack.extend(g.args)
        elif isinstance(g, Not):
            stack.append(g.arg)
        elif isinstance(g, Quantifier):
            stack.append(g.body)


def count_atoms(f: Formula) -> int:
    return sum(1 for _ in iter_atoms(f))


def free_variables(f: Formula) -> frozenset:
    if isinstance(f, Atom):
        return f.poly.variables
    if isinstance(f, _Const):
        return frozenset()
    if isinstance(f, Not):
        return free_variables(f.arg)
    if isinstance(f, _Junction):
        out = set()
        for a in f.args:
            out |= free_variables(a)
        return frozenset(out)
    if isinstance(f, Quantifier):
        return free_variables(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def all_variables(f: Formula) -> frozenset:
    out = set()
    for a in iter_atoms(f):
        out |= a.poly.variables
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Quantifier):
            out.add(g.var)
            stack.append(g.body)
        elif isinstance(g, _Junction):
            stack.extend(g.args)
        elif isinstance(g, Not):
            stack.append(g.arg)
    return frozenset(out)


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, Quantifier):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, _Junction):
        return all(is_quantifier_free(a) for a in f.args)
    return True


def map_atoms(f: Formula, fn) -> Formula:
    """Rebuild ``f`` with every atom replaced by ``fn(atom)``."""
    if isinstance(f, Atom):
        return fn(f)
    if isinstance(f, _Const):
        return f
    if isinstance(f, Not):
        return Not(map_atoms(f.arg, fn))
    if isinstance(f, _Junction):
        return type(f)(map_atoms(a, fn) for a in f.args)
    if isinstance(f, Quantifier):
        return Quantifier(f.kind, f.var, map_atoms(f.body, fn))
    raise TypeError(f"not a formula: {f!r}")


def fresh_name(base: str, avoid) -> str:
    stem = base.rstrip("0123456789").rstrip("_") if "_" in base else base
    for i in itertools.count(1):
        cand = f"{stem}_{i}"
        if cand not in avoid:
            return cand


def rename_free(f: Formula, mapping: Mapping[str, str]) -> Formula:
    """Rename free occurrences of variables (no capture checks)."""
    if not mapping:
        return f
    if isinstance(f, Atom):
        return Atom(f.poly.rename(mapping), f.mask)
    if isinstance(f, _Const):
        return f
    if isinstance(f, Not):
        return Not(rename_free(f.arg, mapping))
    if isinstance(f, _Junction):
        return type(f)(rename_free(a, mapping) for a in f.args)
    if isinstance(f, Quantifier):
        inner = {k: v for k, v in mapping.items() if k != f.var}
        return Quantifier(f.kind, f.var, rename_free(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


def substitute(f: Formula, values: Mapping[str, object]) -> Formula:
    """Replace free variables by rational numbers or polynomials."""
    vals = {k: Polynomial.lift(v if isinstance(v, Polynomial) else as_rational(v))
            for k, v in values.items()}
    if isinstance(f, Atom):
        if f.poly.variables & vals.keys():
            return Atom(f.poly.subs(vals), f.mask)
        return f
    if isinstance(f, _Const):
        return f
    if isinstance(f, Not):
        return Not(substitute(f.arg, vals))
    if isinstance(f, _Junction):
        return type(f)(substitute(a, vals) for a in f.args)
    if isinstance(f, Quantifier):
        inner = {k: v for k, v in vals.items() if k != f.var}
        return Quantifier(f.kind, f.var, substitute(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


# -- negation normal form ---------------------------------------------------

def to_nnf(f: Formula, negate: bool = False) -> Formula:
    """Push negations into atoms (complementing their sign sets)."""
    if isinstance(f, Atom):
        return f.negate() if negate else f
    if isinstance(f, _Const):
        return _const(f.value != negate)
    if isinstance(f, Not):
        return to_nnf(f.arg, not negate)
    if isinstance(f, And):
        parts = [to_nnf(a, negate) for a in f.args]
        return Or(parts) if negate else And(parts)
    if isinstance(f, Or):
        parts = [to_nnf(a, negate) for a in f.args]
        return And(parts) if negate else Or(parts)
    if isinstance(f, Quantifier):
        kind = {"E": "A", "A": "E"}[f.kind] if negate else f.kind
        return Quantifier(kind, f.var, to_nnf(f.body, negate))
    raise TypeError(f"not a formula: {f!r}")


# -- prenex form ------------------------------------------------------------

@dataclass(frozen=True)
class PrenexForm:
    """Quantifier prefix (outermost first) and quantifier-free matrix."""

    blocks: tuple
    matrix: Formula

    def to_formula(self) -> Formula:
        f = self.matrix
        for kind, v in reversed(self.blocks):
            f = Quantifier(kind, v, f)
        return f

    def __str__(self) -> str:
        return to_text(self.to_formula())


def to_prenex(f: Formula) -> PrenexForm:
    """Logically equivalent prenex form; bound variables are renamed apart."""
    g = to_nnf(f)
    used = set(all_variables(g))
    blocks, matrix = _prenex(g, used, set(free_variables(g)))
    return PrenexForm(tuple(blocks), matrix)


def _prenex(f: Formula, used: set, taken: set):
    # ``taken`` are names that a newly hoisted bound variable must avoid
    if isinstance(f, (Atom, _Const)):
        return [], f
    if isinstance(f, Quantifier):
        v = f.var
        body = f.body
        if v in taken:
            nv = fresh_name(v, used)
            used.add(nv)
            body = rename_free(body, {v: nv})
            v = nv
        taken.add(v)
        blocks, matrix = _prenex(body, used, taken)
        return [(f.kind, v)] + blocks, matrix
    if isinstance(f, _Junction):
        blocks = []
        parts = []
        for a in f.args:
            b, m = _prenex(a, used, taken)
            blocks.extend(b)
            parts.append(m)
        return blocks, type(f)(parts)
    if isinstance(f, Not):
        return _prenex(to_nnf(f), used, taken)
    raise TypeError(f"not a formula: {f!r}")


# -- simplification ---------------------------------------------------------

def simplify_basic(f: Formula) -> Formula:
    """Fold constant atoms, absorb ``true``/``false``, drop duplicate
    arguments and unwrap single-argument junctions. No reasoning about
    inequalities is attempted."""
    if isinstance(f, Atom):
        if f.poly.is_constant():
            return _const(bool(sign_bit(f.poly.constant_value()) & f.mask))
        return f
    if isinstance(f, _Const):
        return f
    if isinstance(f, Not):
        a = simplify_basic(f.arg)
        if isinstance(a, _Const):
            return _const(not a.value)
        if isinstance(a, Not):
            return a.arg
        return Not(a)
    if isinstance(f, _Junction):
        is_and = isinstance(f, And)
        unit, zero = (TRUE, FALSE) if is_and else (FALSE, TRUE)
        seen = {}
        for a in f.args:
            s = simplify_basic(a)
            if s == zero:
                return zero
            if s == unit:
                continue
            parts = s.args if type(s) is type(f) else (s,)
            for p in parts:
                seen.setdefault(p, None)
        if not seen:
            return unit
        if len(seen) == 1:
            return next(iter(seen))
        return type(f)(seen)
    if isinstance(f, Quantifier):
        body = simplify_basic(f.body)
        if isinstance(body, _Const) or f.var not in free_variables(body):
            return body
        return Quantifier(f.kind, f.var, body)
    raise TypeError(f"not a formula: {f!r}")


# -- evaluation ---------------------------------------------------------------

def eval_ground(f: Formula, assignment: Mapping[str, object]) -> bool:
    """Exact truth value of a quantifier-free formula at a rational point."""
    if isinstance(f, Atom):
        return bool(sign_bit(f.poly.evaluate(assignment)) & f.mask)
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, Not):
        return not eval_ground(f.arg, assignment)
    if isinstance(f, And):
        return all(eval_ground(a, assignment) for a in f.args)
    if isinstance(f, Or):
        return any(eval_ground(a, assignment) for a in f.args)
    if isinstance(f, Quantifier):
        raise ValueError("eval_ground needs a quantifier-free formula")
    raise TypeError(f"not a formula: {f!r}")


def eval_float(f: Formula, assignment: Mapping[str, float]) -> bool:
    """Floating-point truth value (used by sampling oracles)."""
    if isinstance(f, Atom):
        return bool(sign_bit(f.poly.evaluate_float(assignment)) & f.mask)
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, Not):
        return not eval_float(f.arg, assignment)
    if isinstance(f, And):
        return all(eval_float(a, assignment) for a in f.args)
    if isinstance(f, Or):
        return any(eval_float(a, assignment) for a in f.args)
    raise ValueError("eval_float needs a quantifier-free formula")


def compile_ground(f: Formula):
    """Return ``fn(assignment) -> bool`` evaluating ``f`` exactly, caching
    each distinct polynomial's value per call."""
    polys = {}
    for a in iter_atoms(f):
        polys.setdefault(a.poly, len(polys))
    plist = list(polys)

    def build(g):
        if isinstance(g, Atom):
            i, mask = polys[g.poly], g.mask
            return lambda sg: bool(sg(i) & mask)
        if isinstance(g, _Const):
            v = g.value
            return lambda sg: v
        if isinstance(g, Not):
            inner = build(g.arg)
            return lambda sg: not inner(sg)
        if isinstance(g, And):
            parts = [build(a) for a in g.args]
            return lambda sg: all(p(sg) for p in parts)
        if isinstance(g, Or):
            parts = [build(a) for a in g.args]
            return lambda sg: any(p(sg) for p in parts)
        raise ValueError("compile_ground needs a quantifier-free formula")

    root = build(f)

    def fn(assignment) -> bool:
        signs = [0] * len(plist)

        def sg(i):
            s = signs[i]
            if not s:
                s = signs[i] = sign_bit(plist[i].evaluate(assignment))
            return s

        return root(sg)

    return fn


# -- printing -----------------------------------------------------------------

def to_text(f: Formula) -> str:
    """Canonical text in the grammar accepted by :func:`qebounds.parsing.parse`."""
    if isinstance(f, _Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f"{f.poly} {f.rel} 0"
    if isinstance(f, Not):
        a = f.arg
        inner = to_text(a)
        if isinstance(a, (Atom, _Junction, Quantifier)):
            inner = f"({inner})"
        return "!" + inner
    if isinstance(f, And):
        return " & ".join(_wrap(a, (Or, Quantifier)) for a in f.args)
    if isinstance(f, Or):
        return " | ".join(_wrap(a, (And, Quantifier)) for a in f.args)
    if isinstance(f, Quantifier):
        return f"{f.kind} {f.var}. {to_text(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


def _wrap(f: Formula, kinds) -> str:
    s = to_text(f)
    return f"({s})" if isinstance(f, kinds) else s


def print_formula(f: Formula) -> str:
    return to_text(f)


def variables_of(f: Formula, kind_filter: str | None = None) -> list:
    """Bound variables (in prefix order) of a prenex-like formula."""
    out = []
    while isinstance(f, Quantifier):
        if kind_filter is None or f.kind == kind_filter:
            out.append(f.var)
        f = f.body
    return out


__all__ = [
    "Formula", "Atom", "Not", "And", "Or", "Quantifier", "TRUE", "FALSE",
    "Exists", "Forall", "exists", "forall", "implies", "iff", "atom",
    "PrenexForm", "to_prenex", "to_nnf", "simplify_basic", "eval_ground",
    "eval_float", "compile_ground", "to_text", "print_formula", "free_variables",
    "iter_atoms", "count_atoms", "substitute", "rename_free", "map_atoms",
    "is_quantifier_free", "UnknownVariableError", "RELATIONS",
]
