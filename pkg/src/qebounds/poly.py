"""Sparse multivariate polynomials with exact rational coefficients.

Variables are identified by their (interned) names. A monomial is a tuple of
``(name, exponent)`` pairs sorted by name with no zero exponents, and a
polynomial maps monomials to nonzero ``gmpy2.mpq`` coefficients.

>>> x, y = Polynomial.var("x"), Polynomial.var("y")
>>> str((x + y) ** 2)
'x^2 + 2*x*y + y^2'
"""
from __future__ import annotations

import math
import re
import sys
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

from gmpy2 import gcd, lcm, mpq, mpz

Monomial = tuple  # tuple[tuple[str, int], ...]
Number = Union[int, Fraction, "mpq", str]

ONE_MONO: Monomial = ()

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*\Z")


class UnknownVariableError(KeyError):
    """Raised when an evaluation or a system lookup meets an unassigned name."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown or unassigned variable {self.name!r}"


def as_rational(value) -> mpq:
    """Convert ints, Fractions, decimal strings and finite floats to ``mpq``."""
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot convert {value!r} to a rational")
        return mpq(Fraction(value))
    if isinstance(value, str):
        return mpq(Fraction(value.strip()))
    return mpq(value)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    out = []
    i = j = 0
    na, nb = len(a), len(b)
    while i < na and j < nb:
        va, ea = a[i]
        vb, eb = b[j]
        if va == vb:
            out.append((va, ea + eb))
            i += 1
            j += 1
        elif va < vb:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def _mono_str(m: Monomial) -> str:
    return "*".join(v if e == 1 else f"{v}^{e}" for v, e in m)


class Polynomial:
    """Immutable sparse polynomial over the rationals.

    Arithmetic operators accept polynomials and plain numbers. Equality is
    structural, which coincides with mathematical equality because the
    representation is canonical.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Number] | None = None):
        clean = {}
        if terms:
            for mono, coeff in terms.items():
                q = as_rational(coeff)
                if q:
                    clean[mono] = q
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict) -> "Polynomial":
        p = object.__new__(cls)
        p._terms = terms
        p._hash = None
        return p

    # -- constructors -------------------------------------------------------

    @classmethod
    def var(cls, name: str) -> "Polynomial":
        if not _IDENT.match(name):
            raise ValueError(f"invalid variable name {name!r}")
        return cls._raw({((sys.intern(name), 1),): mpq(1)})

    @classmethod
    def const(cls, value: Number) -> "Polynomial":
        q = as_rational(value)
        return cls._raw({ONE_MONO: q} if q else {})

    @staticmethod
    def lift(value) -> "Polynomial":
        if isinstance(value, Polynomial):
            return value
        return Polynomial.const(value)

    # -- basic queries ------------------------------------------------------

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        t = self._terms
        return not t or (len(t) == 1 and ONE_MONO in t)

    def constant_value(self) -> mpq:
        """Value of a constant polynomial; raises ``ValueError`` otherwise."""
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self._terms.get(ONE_MONO, mpq(0))

    def constant_term(self) -> mpq:
        return self._terms.get(ONE_MONO, mpq(0))

    @property
    def variables(self) -> frozenset:
        return frozenset(v for m in self._terms for v, _ in m)

    def has_var(self, v: str) -> bool:
        for m in self._terms:
            for w, _ in m:
                if w == v:
                    return True
        return False

    def degree(self, v: str | None = None) -> int:
        """Degree in ``v`` (total degree if ``v`` is None); -1 for zero."""
        if not self._terms:
            return -1
        if v is None:
            return max(_mono_degree(m) for m in self._terms)
        best = 0
        for m in self._terms:
            for w, e in m:
                if w == v and e > best:
                    best = e
        return best

    # -- arithmetic ---------------------------------------------------------

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw({m: -c for m, c in self._terms.items()})

    def __add__(self, other) -> "Polynomial":
        other = Polynomial.lift(other)
        if not other._terms:
            return self
        if not self._terms:
            return other
        out = dict(self._terms)
        for m, c in other._terms.items():
            s = out.get(m)
            if s is None:
                out[m] = c
            else:
                s = s + c
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Polynomial._raw(out)

    __radd__ = __add__

    def __sub__(self, other) -> "Polynomial":
        return self + (-Polynomial.lift(other))

    def __rsub__(self, other) -> "Polynomial":
        return Polynomial.lift(other) + (-self)

    def scale(self, k) -> "Polynomial":
        k = as_rational(k)
        if not k:
            return Polynomial._raw({})
        if k == 1:
            return self
        return Polynomial._raw({m: c * k for m, c in self._terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return self.scale(other)
        a, b = self._terms, other._terms
        if not a or not b:
            return Polynomial._raw({})
        if len(a) < len(b):
            a, b = b, a
        if len(b) == 1:
            (mb, cb), = b.items()
            if not mb:
                return self.scale(cb) if a is self._terms else other.scale(cb)
        out: dict = {}
        get = out.get
        for ma, ca in a.items():
            for mb, cb in b.items():
                m = _mono_mul(ma, mb)
                s = get(m)
                out[m] = ca * cb if s is None else s + ca * cb
        return Polynomial._raw({m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, k) -> "Polynomial":
        if isinstance(k, Polynomial):
            k = k.constant_value()
        k = as_rational(k)
        if not k:
            raise ZeroDivisionError("polynomial division by zero")
        return self.scale(1 / k)

    def __pow__(self, n: int) -> "Polynomial":
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # -- equality and hashing -----------------------------------------------

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)) or type(other).__name__ == "mpq":
            return self._terms == Polynomial.const(other)._terms
        return NotImplemented

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = self._hash = hash(frozenset(self._terms.items()))
        return h

    # -- calculus -----------------------------------------------------------

    def diff(self, v: str) -> "Polynomial":
        """Formal partial derivative with respect to ``v``."""
        out = {}
        for m, c in self._terms.items():
            for i, (w, e) in enumerate(m):
                if w == v:
                    if e == 1:
                        nm = m[:i] + m[i + 1:]
                    else:
                        nm = m[:i] + ((w, e - 1),) + m[i + 1:]
                    out[nm] = c * e
                    break
        return Polynomial._raw(out)

    def coefficients(self, v: str) -> list["Polynomial"]:
        """Coefficients ``[c0, ..., cd]`` with ``self == sum(ci * v**i)``.

        The list is empty for the zero polynomial; otherwise its last entry is
        nonzero.
        """
        buckets: dict[int, dict] = {}
        for m, c in self._terms.items():
            e = 0
            rest = m
            for i, (w, k) in enumerate(m):
                if w == v:
                    e = k
                    rest = m[:i] + m[i + 1:]
                    break
            buckets.setdefault(e, {})[rest] = c
        if not buckets:
            return []
        d = max(buckets)
        return [Polynomial._raw(buckets.get(i, {})) for i in range(d + 1)]

    def coefficient(self, v: str, k: int) -> "Polynomial":
        cs = self.coefficients(v)
        return cs[k] if k < len(cs) else Polynomial._raw({})

    @staticmethod
    def from_coefficients(coeffs: Sequence["Polynomial"], v: str) -> "Polynomial":
        x = Polynomial.var(v)
        out = Polynomial._raw({})
        power = Polynomial.const(1)
        for c in coeffs:
            out = out + Polynomial.lift(c) * power
            power = power * x
        return out

    # -- substitution and evaluation ---------------------------------------

    def subs(self, mapping: Mapping[str, "Polynomial | Number"]) -> "Polynomial":
        """Simultaneous substitution of polynomials for variables."""
        mapping = {k: Polynomial.lift(v) for k, v in mapping.items()}
        powers: dict = {}

        def power(v, e):
            key = (v, e)
            p = powers.get(key)
            if p is None:
                p = powers[key] = mapping[v] ** e
            return p

        out = Polynomial._raw({})
        for m, c in self._terms.items():
            keep = tuple((w, e) for w, e in m if w not in mapping)
            term = Polynomial._raw({keep: c})
            for w, e in m:
                if w in mapping:
                    term = term * power(w, e)
            out = out + term
        return out

    def rename(self, mapping: Mapping[str, str]) -> "Polynomial":
        """Rename variables; target names must not collide with kept ones."""
        if not mapping or not (self.variables & mapping.keys()):
            return self
        out = {}
        for m, c in self._terms.items():
            nm = tuple(sorted((sys.intern(mapping.get(w, w)), e) for w, e in m))
            out[nm] = c
        return Polynomial._raw(out)

    def evaluate(self, assignment: Mapping[str, Number]) -> mpq:
        """Exact value at a rational point covering every variable."""
        vals = {}
        total = mpq(0)
        for m, c in self._terms.items():
            t = c
            for w, e in m:
                x = vals.get(w)
                if x is None:
                    if w not in assignment:
                        raise UnknownVariableError(w)
                    x = vals[w] = as_rational(assignment[w])
                t = t * x ** e
            total += t
        return total

    def evaluate_float(self, assignment: Mapping[str, float]) -> float:
        total = 0.0
        for m, c in self._terms.items():
            t = float(c)
            for w, e in m:
                if w not in assignment:
                    raise UnknownVariableError(w)
                t *= float(assignment[w]) ** e
            total += t
        return total

    def partial_evaluate(self, assignment: Mapping[str, Number]) -> "Polynomial":
        """Substitute rational values for some variables."""
        vals = {k: as_rational(v) for k, v in assignment.items()}
        out: dict = {}
        for m, c in self._terms.items():
            keep = []
            for w, e in m:
                if w in vals:
                    c = c * vals[w] ** e
                else:
                    keep.append((w, e))
            if c:
                k = tuple(keep)
                s = out.get(k)
                out[k] = c if s is None else s + c
        return Polynomial._raw({m: c for m, c in out.items() if c})

    # -- normalization -----------------------------------------------------

    def content(self) -> mpq:
        """Positive rational ``k`` such that ``self / k`` has coprime integer
        coefficients. Zero for the zero polynomial."""
        if not self._terms:
            return mpq(0)
        num = mpz(0)
        den = mpz(1)
        for c in self._terms.values():
            num = gcd(num, c.numerator)
            den = lcm(den, c.denominator)
        return mpq(num, den)

    def leading_term(self) -> tuple[Monomial, mpq]:
        """Largest term in graded-lex order (variables compared by name)."""
        m = max(self._terms, key=_grlex_key)
        return m, self._terms[m]

    def _sign_term(self) -> mpq:
        # cheap canonical term used only to fix the sign in ``primitive``
        return self._terms[max(self._terms, key=_canon_key)]

    def primitive(self) -> tuple["Polynomial", int]:
        """Return ``(q, s)`` with ``self == s * k * q`` for some ``k > 0``,
        ``q`` having coprime integer coefficients and positive leading
        coefficient, and ``s`` in ``{-1, 0, 1}``."""
        if not self._terms:
            return self, 0
        k = self.content()
        s = 1 if self._sign_term() > 0 else -1
        factor = 1 / k if s > 0 else -1 / k
        if factor == 1:
            return self, s
        return Polynomial._raw({m: c * factor for m, c in self._terms.items()}), s

    # -- rendering ---------------------------------------------------------

    def sorted_terms(self) -> list[tuple[Monomial, mpq]]:
        return sorted(self._terms.items(), key=lambda mc: _grlex_key(mc[0]), reverse=True)

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for i, (m, c) in enumerate(self.sorted_terms()):
            neg = c < 0
            a = -c if neg else c
            if not m:
                body = _rat_str(a)
            elif a == 1:
                body = _mono_str(m)
            else:
                body = f"{_rat_str(a)}*{_mono_str(m)}"
            if i == 0:
                parts.append(f"-{body}" if neg else body)
            else:
                parts.append(f" - {body}" if neg else f" + {body}")
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({str(self)!r})"

    def __iter__(self) -> Iterator:
        return iter(self._terms.items())


def _rat_str(q: mpq) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _grlex_key(m: Monomial):
    # graded lex, variables ordered by name (x1 > x2 > ...)
    return (_mono_degree(m), tuple((_NameDesc(v), e) for v, e in m))


class _NameDesc:
    """Name wrapper that sorts in reverse, so smaller names dominate."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __lt__(self, other):
        return self.name > other.name

    def __eq__(self, other):
        return self.name == other.name


def _canon_key(m: Monomial):
    return (_mono_degree(m), m)


def var(name: str) -> Polynomial:
    return Polynomial.var(name)


def variables(names: str | Iterable[str]) -> tuple[Polynomial, ...]:
    """``variables("x1 x2 x3")`` returns three variable polynomials."""
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(Polynomial.var(n) for n in names)


def const(value: Number) -> Polynomial:
    return Polynomial.const(value)


def partial_derivative(p: Polynomial, v: str) -> Polynomial:
    return p.diff(v)


def univariate_view(p: Polynomial, v: str) -> list[Polynomial]:
    """Coefficients of ``p`` as a polynomial in ``v`` (``[0]`` view of zero)."""
    cs = p.coefficients(v)
    return cs if cs else [Polynomial.const(0)]


def evaluate(p: Polynomial, assignment: Mapping[str, Number]) -> mpq:
    return p.evaluate(assignment)


def evaluate_float(p: Polynomial, assignment: Mapping[str, float]) -> float:
    return p.evaluate_float(assignment)
