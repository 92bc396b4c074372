"""Real quantifier elimination by virtual substitution.

Quantified variables must occur with degree at most two at the moment they
are eliminated. ``exists v. phi`` is replaced by the disjunction, over a
finite elimination set of *virtual terms* (minus infinity, rational values,
linear and quadratic root expressions and their ``+epsilon`` shifts), of the
guarded substitution results. Universal quantifiers are handled as
``not exists not``.

A few standard refinements keep intermediate degrees small:

* the disjunction is explored lazily and per branch, so a block of
  quantifiers of the same kind is eliminated branch by branch, each branch
  choosing its own next variable and stopping early once ``true`` is found;
* equations give Gauss-style elimination sets;
* substituting a root of ``g`` into ``f`` first reduces ``f`` modulo ``g``;
* a variable occurring only in even powers (or in atoms that are odd in it)
  is replaced by its square after a sign split;
* a branch whose only remaining variable is the quantified one is decided
  exactly by real-root isolation (see :mod:`qebounds.univariate`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator

from gmpy2 import mpq

from . import univariate
from .formula import (ALL_SIGNS, FALSE, NEG, POS, TRUE, ZERO, And, Atom, Formula, Not, Or,
                      Quantifier, _Const, all_variables, flip_mask, free_variables, fresh_name,
                      iter_atoms, sign_bit, to_nnf, to_prenex)
from .poly import Polynomial

log = logging.getLogger(__name__)

DEFAULT_MAX_ATOMS = 10**6


# -- errors -----------------------------------------------------------------

@dataclass(frozen=True)
class DegreeReport:
    variable: str
    max_degree: int
    atom_index: int
    atom: str
    step: int = 0

    def __str__(self) -> str:
        return (f"variable {self.variable} has degree {self.max_degree} in atom "
                f"#{self.atom_index} ({self.atom}) at elimination step {self.step}")


class QEError(Exception):
    """Base class for engine limitations."""


class DegreeTooHigh(QEError):
    def __init__(self, report: DegreeReport):
        super().__init__(str(report))
        self.report = report


class QEOverflow(QEError):
    def __init__(self, atoms: int, cap: int):
        super().__init__(f"intermediate formula has {atoms} atoms (cap {cap})")
        self.atoms = atoms
        self.cap = cap


class NotClosedError(ValueError):
    pass


# -- formula construction with light simplification ------------------------

def mk_atom(poly: Polynomial, mask: int) -> Formula:
    """Atom ``poly`` with sign set ``mask``, normalized and folded."""
    mask &= ALL_SIGNS
    if mask == 0:
        return FALSE
    if mask == ALL_SIGNS:
        return TRUE
    if poly.is_constant():
        return TRUE if sign_bit(poly.constant_value()) & mask else FALSE
    q, s = poly.primitive()
    if s < 0:
        mask = flip_mask(mask)
    return Atom(q, mask)


def conj(parts: Iterable[Formula]) -> Formula:
    return _junction(parts, True)


def disj(parts: Iterable[Formula]) -> Formula:
    return _junction(parts, False)


def _junction(parts: Iterable[Formula], is_and: bool) -> Formula:
    kind = And if is_and else Or
    unit, zero = (TRUE, FALSE) if is_and else (FALSE, TRUE)
    atoms: dict = {}
    others: dict = {}
    stack = list(parts)
    stack.reverse()
    while stack:
        f = stack.pop()
        if f is unit or f == unit:
            continue
        if f is zero or f == zero:
            return zero
        if type(f) is kind:
            stack.extend(reversed(f.args))
            continue
        if isinstance(f, Atom):
            m = atoms.get(f.poly)
            if m is None:
                atoms[f.poly] = f.mask
            else:
                m = (m & f.mask) if is_and else (m | f.mask)
                if m == (0 if is_and else ALL_SIGNS):
                    return zero
                atoms[f.poly] = m
        else:
            others.setdefault(f, None)
    items = [Atom(p, m) for p, m in atoms.items()]
    items.extend(others)
    if not items:
        return unit
    if len(items) == 1:
        return items[0]
    return kind(items)


def negate(f: Formula) -> Formula:
    return to_nnf(f, True)


def qe_simplify(f: Formula) -> Formula:
    """NNF simplification used inside the engine: constant folding, atom
    normalization, and merging of atoms over the same polynomial."""
    if isinstance(f, Atom):
        return mk_atom(f.poly, f.mask)
    if isinstance(f, _Const):
        return f
    if isinstance(f, Not):
        return qe_simplify(to_nnf(f.arg, True))
    if isinstance(f, And):
        return conj(qe_simplify(a) for a in f.args)
    if isinstance(f, Or):
        return disj(qe_simplify(a) for a in f.args)
    if isinstance(f, Quantifier):
        return Quantifier(f.kind, f.var, qe_simplify(f.body))
    raise TypeError(f"not a formula: {f!r}")


def _vars(f: Formula) -> frozenset:
    out = set()
    for a in iter_atoms(f):
        out |= a.poly.variables
    return frozenset(out)


# -- virtual terms ------------------------------------------------------------

@dataclass(frozen=True)
class VirtualTerm:
    """A test point for the variable being eliminated.

    ``kind`` is one of ``"value"``, ``"root"``, ``"neginf"``, ``"eps"``.
    A root is a zero of ``a*v^2 + b*v + c``: for ``a`` nonzero it is
    ``(-b + branch*sqrt(b^2 - 4ac)) / (2a)``; with ``a == 0`` (and
    ``branch == 0``) it is the linear root ``-c/b``. ``"eps"`` denotes
    ``inner + epsilon`` for an infinitesimal positive epsilon.
    ``vanishing`` is the quadratic coefficient that a degenerate linear root
    assumes to be zero; it becomes part of the guard.
    """

    kind: str
    value: mpq | None = None
    a: Polynomial | None = None
    b: Polynomial | None = None
    c: Polynomial | None = None
    branch: int = 0
    inner: "VirtualTerm | None" = None
    vanishing: Polynomial | None = None

    @staticmethod
    def rational(q) -> "VirtualTerm":
        return VirtualTerm("value", value=mpq(q))

    @staticmethod
    def root(a, b, c, branch: int = 1) -> "VirtualTerm":
        a, b, c = (Polynomial.lift(t) for t in (a, b, c))
        if a.is_zero():
            if b.is_constant() and c.is_constant() and not b.is_zero():
                return VirtualTerm.rational(-c.constant_value() / b.constant_value())
            return VirtualTerm("root", a=a, b=b, c=c, branch=0)
        if branch not in (1, -1):
            raise ValueError("quadratic roots need branch +1 or -1")
        return VirtualTerm("root", a=a, b=b, c=c, branch=branch)

    @staticmethod
    def linear(b, c) -> "VirtualTerm":
        return VirtualTerm.root(0, b, c, 0)

    def plus_epsilon(self) -> "VirtualTerm":
        return VirtualTerm("eps", inner=self)

    @property
    def is_quadratic(self) -> bool:
        return self.kind == "root" and not self.a.is_zero()

    def discriminant(self) -> Polynomial:
        return self.b * self.b - self.a * self.c * 4

    def guard(self) -> Formula:
        if self.kind == "eps":
            return self.inner.guard()
        if self.kind != "root":
            return TRUE
        if self.a.is_zero():
            lin = mk_atom(self.b, POS | NEG)
            if self.vanishing is None:
                return lin
            return conj([mk_atom(self.vanishing, ZERO), lin])
        return conj([mk_atom(self.a, POS | NEG), mk_atom(self.discriminant(), POS | ZERO)])

    def __str__(self) -> str:
        if self.kind == "value":
            return str(self.value)
        if self.kind == "neginf":
            return "-inf"
        if self.kind == "eps":
            return f"{self.inner} + eps"
        if self.a.is_zero():
            return f"-({self.c})/({self.b})"
        sgn = "+" if self.branch > 0 else "-"
        return f"(-({self.b}) {sgn} sqrt({self.discriminant()}))/(2*({self.a}))"


NEG_INFINITY = VirtualTerm("neginf")


@dataclass(frozen=True)
class EliminationSet:
    variable: str
    terms: tuple  # of (VirtualTerm, guard Formula)

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)


# -- substitution -------------------------------------------------------------

def _even_power_multiplier(d: int) -> int:
    return d + (d & 1)


def _reduce_mod_root(f: Polynomial, v: str, a: Polynomial, b: Polynomial, c: Polynomial):
    """Return ``(r1, r0)`` with ``sign(f(t)) == sign(r1*t + r0)`` for every
    root ``t`` of ``a*v^2 + b*v + c`` (``a`` nonzero)."""
    coeffs = f.coefficients(v)
    if len(coeffs) <= 2:
        coeffs = coeffs + [Polynomial.const(0)] * (2 - len(coeffs))
        return coeffs[1], coeffs[0]
    if a.is_constant():
        inv = 1 / a.constant_value()
        bb, cc = b.scale(inv), c.scale(inv)
        work = list(coeffs)
        for k in range(len(work) - 1, 1, -1):
            lead = work[k]
            if lead.is_zero():
                continue
            work[k - 1] = work[k - 1] - lead * bb
            work[k - 2] = work[k - 2] - lead * cc
        return work[1], work[0]
    # pseudo-remainder with an even power of a
    work = list(coeffs)
    steps = 0
    for k in range(len(work) - 1, 1, -1):
        lead = work[k]
        work = [w * a for w in work[:k]]
        work[k - 1] = work[k - 1] - lead * b
        work[k - 2] = work[k - 2] - lead * c
        steps += 1
    r1, r0 = work[1], work[0]
    if steps & 1:
        r1, r0 = r1 * a, r0 * a
    return r1, r0


def _sqrt_sign(A: Polynomial, B: Polynomial, D: Polynomial, mask: int) -> Formula:
    """Formula for ``sign(A + B*sqrt(D)) in mask`` assuming ``D >= 0``."""
    if B.is_zero() or (D.is_constant() and D.constant_value() == 0):
        return mk_atom(A, mask)
    if D.is_constant():
        r = _rational_sqrt(D.constant_value())
        if r is not None:
            return mk_atom(A + B.scale(r), mask)
    if A.is_zero():
        parts = []
        if mask & ZERO:
            parts.append(disj([mk_atom(B, ZERO), mk_atom(D, ZERO)]))
        if mask & POS:
            parts.append(conj([mk_atom(B, POS), mk_atom(D, POS)]))
        if mask & NEG:
            parts.append(conj([mk_atom(B, NEG), mk_atom(D, POS)]))
        return disj(parts)
    E = A * A - B * B * D
    if mask == ALL_SIGNS:
        return TRUE
    if mask == NEG | ZERO:
        return disj([conj([mk_atom(A, NEG | ZERO), mk_atom(E, POS | ZERO)]),
                     conj([mk_atom(B, NEG | ZERO), mk_atom(E, NEG | ZERO)])])
    if mask == POS | ZERO:
        return disj([conj([mk_atom(A, POS | ZERO), mk_atom(E, POS | ZERO)]),
                     conj([mk_atom(B, POS | ZERO), mk_atom(E, NEG | ZERO)])])
    if mask == POS | NEG:
        return disj([mk_atom(E, POS | NEG),
                     conj([mk_atom(A, POS), mk_atom(B, POS)]),
                     conj([mk_atom(A, NEG), mk_atom(B, NEG)])])
    parts = []
    if mask & NEG:
        parts.append(disj([conj([mk_atom(A, NEG), mk_atom(E, POS)]),
                           conj([mk_atom(B, NEG), disj([mk_atom(A, NEG), mk_atom(E, NEG)])])]))
    if mask & POS:
        parts.append(disj([conj([mk_atom(A, POS), mk_atom(E, POS)]),
                           conj([mk_atom(B, POS), disj([mk_atom(A, POS), mk_atom(E, NEG)])])]))
    if mask & ZERO:
        parts.append(conj([mk_atom(E, ZERO),
                           disj([conj([mk_atom(A, NEG | ZERO), mk_atom(B, POS | ZERO)]),
                                 conj([mk_atom(A, POS | ZERO), mk_atom(B, NEG | ZERO)])])]))
    return disj(parts)


def _rational_sqrt(q: mpq):
    from gmpy2 import is_square, isqrt
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    if is_square(n) and is_square(d):
        return mpq(isqrt(n), isqrt(d))
    return None


def _sign_at_point(f: Polynomial, v: str, t: VirtualTerm, mask: int) -> Formula:
    """``sign(f(t)) in mask`` for a value or root term ``t``."""
    if not f.has_var(v):
        return mk_atom(f, mask)
    if t.kind == "value":
        return mk_atom(f.partial_evaluate({v: t.value}), mask)
    a, b, c = t.a, t.b, t.c
    if a.is_zero():
        coeffs = f.coefficients(v)
        if b.is_constant():
            return mk_atom(f.subs({v: c.scale(-1 / b.constant_value())}), mask)
        k = _even_power_multiplier(len(coeffs) - 1)
        total = Polynomial.const(0)
        neg_c = -c
        for i, ci in enumerate(coeffs):
            if not ci.is_zero():
                total = total + ci * neg_c ** i * b ** (k - i)
        return mk_atom(total, mask)
    r1, r0 = _reduce_mod_root(f, v, a, b, c)
    A0 = r0 * a * 2 - r1 * b
    B0 = r1 if t.branch > 0 else -r1
    D = t.discriminant()
    if a.is_constant():
        if a.constant_value() < 0:
            mask = flip_mask(mask)
        return _sqrt_sign(A0, B0, D, mask)
    return _sqrt_sign(A0 * a, B0 * a, D, mask)


def _sign_at_neginf(f: Polynomial, v: str, mask: int) -> Formula:
    coeffs = f.coefficients(v)
    if len(coeffs) <= 1:
        return mk_atom(f, mask)
    parts = []
    if mask & ZERO:
        parts.append(conj(mk_atom(ci, ZERO) for ci in coeffs))
    for want in (POS, NEG):
        if mask & want:
            alts = []
            zeros = []
            for i in range(len(coeffs) - 1, -1, -1):
                ci = coeffs[i] if i % 2 == 0 else -coeffs[i]
                alts.append(conj(zeros + [mk_atom(ci, want)]))
                zeros.append(mk_atom(coeffs[i], ZERO))
            parts.append(disj(alts))
    return disj(parts)


def _sign_at_eps(f: Polynomial, v: str, t: VirtualTerm, mask: int) -> Formula:
    coeffs = f.coefficients(v)
    if len(coeffs) <= 1:
        return mk_atom(f, mask)
    parts = []
    if mask & ZERO:
        parts.append(conj(mk_atom(ci, ZERO) for ci in coeffs))
    derivs = [f]
    for _ in range(len(coeffs) - 1):
        derivs.append(derivs[-1].diff(v))
    for want in (POS, NEG):
        if mask & want:
            alts = []
            zeros = []
            for g in derivs:
                alts.append(conj(zeros + [_sign_at_point(g, v, t, want)]))
                zeros.append(_sign_at_point(g, v, t, ZERO))
            parts.append(disj(alts))
    return disj(parts)


def virtual_substitute(atom: Atom, v: str, t: VirtualTerm) -> Formula:
    """Substitute the virtual term ``t`` for ``v`` in ``atom``.

    The result is ``v``-free and, under ``t.guard()``, equivalent to the atom
    holding at the point denoted by ``t``.
    """
    d = atom.poly.degree(v)
    if d <= 0:
        return mk_atom(atom.poly, atom.mask)
    if t.kind == "value":
        return mk_atom(atom.poly.partial_evaluate({v: t.value}), atom.mask)
    if d > 2:
        raise DegreeTooHigh(DegreeReport(v, d, 0, str(atom)))
    if t.kind == "neginf":
        return _sign_at_neginf(atom.poly, v, atom.mask)
    if t.kind == "eps":
        return _sign_at_eps(atom.poly, v, t.inner, atom.mask)
    return _sign_at_point(atom.poly, v, t, atom.mask)


def substitute_term(f: Formula, v: str, t: VirtualTerm, cache: dict | None = None) -> Formula:
    """Apply :func:`virtual_substitute` to every atom of an NNF formula."""
    if cache is None:
        cache = {}

    def walk(g):
        if isinstance(g, Atom):
            r = cache.get(g)
            if r is None:
                r = cache[g] = virtual_substitute(g, v, t)
            return r
        if isinstance(g, And):
            return conj(walk(a) for a in g.args)
        if isinstance(g, Or):
            return disj(walk(a) for a in g.args)
        if isinstance(g, _Const):
            return g
        raise ValueError(f"substitution needs a quantifier-free NNF formula, got {g!r}")

    return walk(f)


# -- elimination sets -------------------------------------------------------

def _candidate_roots(f: Polynomial, v: str, nonzero=frozenset()) -> list[VirtualTerm]:
    """Roots of ``f`` in ``v``. Leading coefficients whose primitive part is in
    ``nonzero`` are known not to vanish, so no degenerate root is needed."""
    coeffs = f.coefficients(v)
    d = len(coeffs) - 1
    if d == 1:
        return [VirtualTerm.root(0, coeffs[1], coeffs[0], 0)]
    if d == 2:
        c, b, a = coeffs
        out = [VirtualTerm.root(a, b, c, 1), VirtualTerm.root(a, b, c, -1)]
        if not a.is_constant() and not b.is_zero() and a.primitive()[0] not in nonzero:
            out.append(VirtualTerm("root", a=Polynomial.const(0), b=b, c=c, vanishing=a))
        return out
    return []


def _canonical_term(t: VirtualTerm) -> VirtualTerm:
    """Scale the root polynomial so equal roots get equal keys."""
    if t.kind == "eps":
        return VirtualTerm("eps", inner=_canonical_term(t.inner))
    if t.kind != "root":
        return t
    lead = t.b if t.a.is_zero() else t.a
    _, s = lead.primitive()
    k = 1 / (lead.content() * s)
    a, b, c = (p.scale(k) for p in (t.a, t.b, t.c))
    van = None if t.vanishing is None else t.vanishing.primitive()[0]
    return VirtualTerm("root", a=a, b=b, c=c, branch=t.branch if k > 0 else -t.branch,
                       vanishing=van)


def _check_degrees(atoms: list[Atom], v: str, step: int = 0):
    for i, a in enumerate(atoms):
        d = a.poly.degree(v)
        if d > 2:
            raise DegreeTooHigh(DegreeReport(v, d, i, str(a), step))


def elimination_set(matrix: Formula, v: str, nonzero=frozenset()) -> EliminationSet:
    """Minus infinity plus the (epsilon-shifted, for strict relations)
    candidate roots of every atom containing ``v``."""
    atoms = [a for a in iter_atoms(matrix) if a.poly.has_var(v)]
    _check_degrees(atoms, v)
    seen = {}
    seen[NEG_INFINITY] = TRUE
    for a in atoms:
        strict = not (a.mask & ZERO)
        for t in _candidate_roots(a.poly, v, nonzero):
            t = _canonical_term(t)
            if strict:
                t = t.plus_epsilon()
            if t not in seen:
                seen[t] = t.guard()
    return EliminationSet(v, tuple((t, g) for t, g in seen.items() if g != FALSE))


MAX_LEAD_SPLITS = 3


def _parametric_leads(phi: Formula, v: str) -> set:
    out = set()
    for a in iter_atoms(phi):
        if a.poly.degree(v) == 2:
            lead = a.poly.coefficient(v, 2)
            if not lead.is_constant():
                out.add(lead.primitive()[0])
    return out


def _drop_vanishing(phi: Formula, v: str, zero: frozenset) -> Formula:
    """Remove the ``v^2`` term of every atom whose ``v^2`` coefficient is (a
    multiple of) one of the polynomials in ``zero``."""
    if not zero:
        return phi

    def walk(g):
        if isinstance(g, Atom):
            if g.poly.degree(v) == 2:
                lead = g.poly.coefficient(v, 2)
                if lead.primitive()[0] in zero:
                    return mk_atom(g.poly - lead * Polynomial.var(v) ** 2, g.mask)
            return g
        if isinstance(g, And):
            return conj(walk(a) for a in g.args)
        if isinstance(g, Or):
            return disj(walk(a) for a in g.args)
        return g

    return walk(phi)


def _gauss_equation(matrix: Formula, v: str):
    """An equation conjunct containing ``v`` suitable for Gauss elimination."""
    parts = matrix.args if isinstance(matrix, And) else (matrix,)
    best = None
    for p in parts:
        if isinstance(p, Atom) and p.mask == ZERO and p.poly.has_var(v):
            d = p.poly.degree(v)
            if d > 2:
                continue
            lead = p.poly.coefficient(v, d)
            key = (d, not lead.is_constant(), len(p.poly))
            if best is None or key < best[0]:
                best = (key, p)
    return None if best is None else best[1]


# -- the engine ---------------------------------------------------------------

@dataclass
class QEOptions:
    max_atoms: int = DEFAULT_MAX_ATOMS
    univariate_fallback: bool = True
    even_reduction: bool = True
    backtrack: bool = True
    verbose: bool = False


@dataclass
class QEStats:
    substitutions: int = 0
    univariate_calls: int = 0
    even_reductions: int = 0
    max_atoms_seen: int = 0
    elimination_sets: list = field(default_factory=list)


class _Engine:
    def __init__(self, options: QEOptions | None = None):
        self.opt = options or QEOptions()
        self.stats = QEStats()
        self.cache: dict = {}
        self.step = 0
        self.used_names: set = set()
        self.positive: frozenset = frozenset()
        self._assume_cache: dict = {}

    # public entry points -------------------------------------------------

    def qe(self, f: Formula) -> Formula:
        pf = to_prenex(f)
        self.used_names |= set(all_variables(f))
        matrix = qe_simplify(pf.matrix)
        bound = {v for _, v in pf.blocks}
        facts = _positivity_facts(matrix, bound)
        self.positive = frozenset(facts)
        groups: list[tuple[str, list]] = []
        for kind, v in pf.blocks:
            if groups and groups[-1][0] == kind:
                groups[-1][1].append(v)
            else:
                groups.append((kind, [v]))
        for kind, vs in reversed(groups):
            self.step += 1
            if kind == "E":
                matrix = self.exists(matrix, frozenset(vs))
            else:
                matrix = negate(self.exists(negate(matrix), frozenset(vs)))
            matrix = qe_simplify(matrix)
        if facts:
            # results were simplified under these facts, so they must stay
            matrix = conj(list(facts.values()) + [matrix])
        return matrix

    def assume(self, f: Formula) -> Formula:
        """Fold atoms whose sign follows from the positivity facts."""
        if not self.positive:
            return f
        cache = self._assume_cache

        def walk(g):
            if isinstance(g, Atom):
                r = cache.get(g)
                if r is None:
                    q = _strip_positive_monomial(g.poly, self.positive)
                    sg = _sign_under_positive(q, self.positive)
                    if sg is not None:
                        r = TRUE if sg & g.mask else FALSE
                    else:
                        r = g if q is g.poly else mk_atom(q, g.mask)
                    cache[g] = r
                return r
            if isinstance(g, And):
                return conj(walk(a) for a in g.args)
            if isinstance(g, Or):
                return disj(walk(a) for a in g.args)
            return g

        return walk(f)

    # block elimination ------------------------------------------------------

    def exists(self, phi: Formula, block: frozenset) -> Formula:
        phi = self.assume(phi)
        key = (phi, block)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        res = self.assume(self._exists(phi, block))
        self.cache[key] = res
        return res

    def _exists(self, phi: Formula, block: frozenset) -> Formula:
        if isinstance(phi, _Const):
            return phi
        if isinstance(phi, Or):
            out = []
            for a in phi.args:
                r = self.exists(a, block)
                if r == TRUE:
                    return TRUE
                out.append(r)
            return disj(out)
        fv = _vars(phi)
        present = block & fv
        if not present:
            return phi
        if isinstance(phi, And):
            outside = [a for a in phi.args if not (_vars(a) & present)]
            if outside:
                inside = conj(a for a in phi.args if _vars(a) & present)
                r = self.exists(inside, present)
                return conj(outside + [r])
        candidates = self._order(phi, present)
        if (self.opt.univariate_fallback and len(present) == 1 and fv == present):
            (v,) = present
            if max(a.poly.degree(v) for a in iter_atoms(phi)) > 2 or not candidates:
                self.stats.univariate_calls += 1
                return TRUE if univariate.exists_univariate(phi, v) else FALSE
        last_error = None
        for v in candidates:
            try:
                return self._eliminate_then(phi, v, present)
            except DegreeTooHigh as e:
                last_error = e
                if not self.opt.backtrack:
                    break
        if last_error is None:
            atoms = list(iter_atoms(phi))
            v = min(present)
            i, a = max(enumerate(atoms), key=lambda ia: ia[1].poly.degree(v))
            last_error = DegreeTooHigh(DegreeReport(v, a.poly.degree(v), i, str(a), self.step))
        raise last_error

    def _order(self, phi: Formula, present: frozenset) -> list:
        """Candidate variables, most promising first.

        Prefers low effective degree, then variables whose ``v^2`` and ``v``
        coefficients do not mention the other block variables (substituting
        such roots keeps the remaining degrees low), then fewer atoms.
        """
        atoms = list(iter_atoms(phi))
        scored = []
        for v in sorted(present):
            others = present - {v}
            degs = [a.poly.degree(v) for a in atoms]
            dmax = max(degs)
            eff = dmax
            if dmax > 2 and self.opt.even_reduction and self._parity_ok(atoms, v):
                eff = (dmax + 1) // 2
            if eff > 2:
                continue
            coupling = 0
            if dmax <= 2:
                for a, d in zip(atoms, degs):
                    for k in range(1, d + 1):
                        coupling = max(coupling, _degree_in(a.poly.coefficient(v, k), others))
            n = sum(1 for d in degs if d > 0)
            scored.append(((eff, coupling, n), v))
        scored.sort()
        return [v for _, v in scored]

    @staticmethod
    def _parity_ok(atoms, v) -> bool:
        for a in atoms:
            parity = None
            for m, _ in a.poly.items():
                e = 0
                for w, k in m:
                    if w == v:
                        e = k
                        break
                if parity is None:
                    parity = e & 1
                elif parity != e & 1:
                    return False
        return True

    def _eliminate_then(self, phi: Formula, v: str, present: frozenset) -> Formula:
        atoms = [a for a in iter_atoms(phi) if a.poly.has_var(v)]
        dmax = max(a.poly.degree(v) for a in atoms)
        if dmax > 2:
            if self.opt.even_reduction and self._parity_ok(atoms, v):
                return self._even_reduce(phi, v, present)
            i, a = max(enumerate(atoms), key=lambda ia: ia[1].poly.degree(v))
            raise DegreeTooHigh(DegreeReport(v, dmax, i, str(a), self.step))
        rest = present - {v}
        out = []
        for disjunct in self._disjuncts(phi, v):
            r = self.exists(disjunct, rest) if rest else disjunct
            if r == TRUE:
                return TRUE
            out.append(r)
            self._check_size(out)
        return disj(out)

    def _check_size(self, parts):
        n = sum(_atom_count(p) for p in parts)
        if n > self.stats.max_atoms_seen:
            self.stats.max_atoms_seen = n
        if n > self.opt.max_atoms:
            raise QEOverflow(n, self.opt.max_atoms)

    def _disjuncts(self, phi: Formula, v: str) -> Iterator[Formula]:
        eq = _gauss_equation(phi, v)
        if eq is not None:
            yield from self._gauss_disjuncts(phi, v, eq)
            return
        leads = _parametric_leads(phi, v)
        if not leads or len(leads) > MAX_LEAD_SPLITS:
            yield from self._substitutions(phi, v, frozenset())
            return
        # case split on the parametric v^2 coefficients: where one vanishes its
        # atoms are linear, elsewhere only the proper quadratic roots are needed
        leads = sorted(leads, key=str)
        for pattern in product((ZERO, POS | NEG), repeat=len(leads)):
            cond = conj(mk_atom(a, m) for a, m in zip(leads, pattern))
            if cond == FALSE:
                continue
            zero = frozenset(a for a, m in zip(leads, pattern) if m == ZERO)
            branch = conj([cond, _drop_vanishing(phi, v, zero)])
            if branch == FALSE:
                continue
            yield from self._substitutions(branch, v, frozenset(leads) - zero)

    def _substitutions(self, phi: Formula, v: str, nonzero: frozenset) -> Iterator[Formula]:
        if not any(a.poly.has_var(v) for a in iter_atoms(phi)):
            yield phi
            return
        es = elimination_set(phi, v, nonzero)
        if self.opt.verbose:
            log.info("elimination set for %s: %s", v, ", ".join(str(t) for t, _ in es))
        self.stats.elimination_sets.append((v, len(es)))
        cache: dict = {}
        for t, guard in es:
            self.stats.substitutions += 1
            cache.clear()
            body = substitute_term(phi, v, t, cache)
            d = conj([guard, body])
            if d != FALSE:
                yield d

    def _gauss_disjuncts(self, phi: Formula, v: str, eq: Atom) -> Iterator[Formula]:
        coeffs = eq.poly.coefficients(v)
        roots = [_canonical_term(t) for t in _candidate_roots(eq.poly, v)]
        for t in roots:
            guard = t.guard()
            if guard == FALSE:
                continue
            self.stats.substitutions += 1
            d = conj([guard, substitute_term(phi, v, t, {})])
            if d != FALSE:
                yield d
        vanish = conj(mk_atom(ci, ZERO) for ci in coeffs)
        if vanish != FALSE:
            rest = [a for a in (phi.args if isinstance(phi, And) else (phi,)) if a != eq]
            # the equation holds identically here; v is still to be eliminated
            yield self.exists(conj([vanish] + rest), frozenset([v]))

    def _even_reduce(self, phi: Formula, v: str, present: frozenset) -> Formula:
        self.stats.even_reductions += 1
        y = fresh_name(v + "_sq", self.used_names | _vars(phi))
        self.used_names.add(y)
        zero_branch = substitute_term(phi, v, VirtualTerm.rational(0), {})
        out = []
        r = self.exists(zero_branch, present - {v}) if present - {v} else zero_branch
        if r == TRUE:
            return TRUE
        out.append(r)
        ypos = mk_atom(Polynomial.var(y), POS)
        for sign in (1, -1):
            branch = conj([ypos, _square_substitute(phi, v, y, sign)])
            r = self.exists(branch, (present - {v}) | {y})
            if r == TRUE:
                return TRUE
            out.append(r)
        return disj(out)


def _square_substitute(phi: Formula, v: str, y: str, sign: int) -> Formula:
    """Rewrite atoms even or odd in ``v`` in terms of ``y = v^2`` on the half
    line where ``sign(v) == sign``."""

    def walk(g):
        if isinstance(g, Atom):
            if not g.poly.has_var(v):
                return g
            terms = {}
            odd = False
            for m, c in g.poly.items():
                nm = []
                for w, k in m:
                    if w == v:
                        odd = bool(k & 1)
                        if k // 2:
                            nm.append((y, k // 2))
                    else:
                        nm.append((w, k))
                terms[tuple(sorted(nm))] = c
            p = Polynomial(terms)
            mask = g.mask
            if odd and sign < 0:
                mask = flip_mask(mask)
            return mk_atom(p, mask)
        if isinstance(g, And):
            return conj(walk(a) for a in g.args)
        if isinstance(g, Or):
            return disj(walk(a) for a in g.args)
        return g

    return walk(phi)


def _positivity_facts(matrix: Formula, bound) -> dict:
    """Top-level conjuncts ``u > 0`` for free variables ``u``."""
    parts = matrix.args if isinstance(matrix, And) else (matrix,)
    facts = {}
    for p in parts:
        if isinstance(p, Atom) and p.mask == POS and len(p.poly) == 1:
            (m, c), = p.poly.items()
            if len(m) == 1 and m[0][1] == 1 and c > 0 and m[0][0] not in bound:
                facts[m[0][0]] = p
    return facts


def _sign_under_positive(p: Polynomial, positive) -> int | None:
    """Sign bit of ``p`` if it is forced by all variables in ``positive``
    being positive, else ``None``."""
    sg = 0
    for m, c in p.items():
        for w, _ in m:
            if w not in positive:
                return None
        t = POS if c > 0 else NEG
        if sg and t != sg:
            return None
        sg = t
    return sg or ZERO


def _strip_positive_monomial(p: Polynomial, positive) -> Polynomial:
    """Divide out the largest monomial in positive variables dividing ``p``."""
    common = None
    for m, _ in p.items():
        here = {w: e for w, e in m if w in positive}
        if common is None:
            common = here
        else:
            common = {w: min(e, here[w]) for w, e in common.items() if w in here}
        if not common:
            return p
    if not common:
        return p
    terms = {}
    for m, c in p.items():
        terms[tuple((w, e - common.get(w, 0)) for w, e in m if e != common.get(w, 0))] = c
    return Polynomial(terms)


def _degree_in(p: Polynomial, names) -> int:
    best = 0
    for m, _ in p.items():
        best = max(best, sum(e for w, e in m if w in names))
    return best


def _atom_count(f: Formula) -> int:
    if isinstance(f, Atom):
        return 1
    if isinstance(f, (And, Or)):
        return sum(_atom_count(a) for a in f.args)
    return 0


# -- public API ---------------------------------------------------------------

def eliminate_existential(matrix: Formula, v: str, options: QEOptions | None = None) -> Formula:
    """Quantifier-free equivalent of ``exists v. matrix``."""
    eng = _Engine(options)
    eng.used_names |= set(all_variables(matrix)) | {v}
    return qe_simplify(eng.exists(qe_simplify(to_nnf(matrix)), frozenset([v])))


def qe(f: Formula, options: QEOptions | None = None) -> Formula:
    """Quantifier-free formula equivalent to ``f`` in its free variables."""
    return _Engine(options).qe(f)


def qe_with_stats(f: Formula, options: QEOptions | None = None) -> tuple[Formula, QEStats]:
    eng = _Engine(options)
    return eng.qe(f), eng.stats


def decide(f: Formula, options: QEOptions | None = None) -> bool:
    """Truth value of a closed formula."""
    fv = free_variables(f)
    if fv:
        raise NotClosedError(f"formula has free variables: {', '.join(sorted(fv))}")
    r = qe(f, options)
    if isinstance(r, _Const):
        return r.value
    from .formula import eval_ground
    return eval_ground(r, {})
