"""Independent oracles for the QE tests (sympy based, no engine code)."""
from __future__ import annotations

import random
from fractions import Fraction

import sympy as sp

from qebounds.formula import And, Atom, Not, Or, Quantifier, iter_atoms
from qebounds.poly import Polynomial

X = sp.Symbol("x")
RELS = ["<", "<=", "=", "!=", ">=", ">"]


def to_sympy(p: Polynomial, env=None):
    env = env or {}
    out = sp.Integer(0)
    for m, c in p.items():
        t = sp.Rational(int(c.numerator), int(c.denominator))
        for v, e in m:
            t *= (sp.Rational(*env[v]) if v in env else sp.Symbol(v)) ** e
        out += t
    return sp.expand(out)


class _Point:
    """A real number given either exactly (rational) or as a root of an
    irreducible rational quadratic with a high-precision approximation."""

    def __init__(self, value, minpoly=None):
        self.value = value
        self.minpoly = minpoly
        self.approx = sp.N(value, 60)

    def sign(self, q):
        if self.minpoly is None:
            v = q.subs(X, self.value)
            return int(sp.sign(v))
        if sp.rem(sp.Poly(q, X), self.minpoly).is_zero:
            return 0
        v = sp.N(q.subs(X, self.value), 60)
        return 1 if v > 0 else -1


def _test_points(polys):
    pts = []
    for q in polys:
        poly = sp.Poly(q, X)
        if poly.degree() <= 0:
            continue
        for fac, _ in sp.factor_list(poly)[1]:
            fac = sp.Poly(fac, X)
            if fac.degree() == 1:
                a, b = fac.all_coeffs()
                pts.append(_Point(-b / a))
            elif fac.degree() == 2:
                for r in sp.solve(fac.as_expr(), X):
                    if r.is_real:
                        pts.append(_Point(r, fac))
            else:
                raise ValueError("oracle handles degree <= 2 factors")
    pts.sort(key=lambda p: p.approx)
    uniq = []
    for p in pts:
        if not uniq or abs(p.approx - uniq[-1].approx) > sp.Float("1e-40", 60):
            uniq.append(p)
    if not uniq:
        return [_Point(sp.Integer(0))]
    out = [_Point(sp.floor(uniq[0].approx) - 1)]
    for a, b in zip(uniq, uniq[1:]):
        out.append(a)
        out.append(_Point(sp.nsimplify((a.approx + b.approx) / 2, rational=True)))
    out.append(uniq[-1])
    out.append(_Point(sp.ceiling(uniq[-1].approx) + 1))
    return out


def _truth(f, signs):
    if isinstance(f, Atom):
        s = signs[f.poly]
        return bool({-1: 1, 0: 2, 1: 4}[s] & f.mask)
    if isinstance(f, Not):
        return not _truth(f.arg, signs)
    if isinstance(f, And):
        return all(_truth(a, signs) for a in f.args)
    if isinstance(f, Or):
        return any(_truth(a, signs) for a in f.args)
    return f.value


def univariate_truth(kind: str, matrix, env) -> bool:
    """Truth of ``kind x. matrix`` once the other variables take the rational
    values in ``env`` (name -> (num, den))."""
    polys = {a.poly: to_sympy(a.poly, env) for a in iter_atoms(matrix)}
    pts = _test_points(list(polys.values()))
    vals = []
    for pt in pts:
        signs = {p: pt.sign(q) for p, q in polys.items()}
        vals.append(_truth(matrix, signs))
    return any(vals) if kind == "E" else all(vals)


# -- random instances ------------------------------------------------------------

def random_instance(seed: int, params=("a", "b"), max_atoms=3):
    """A formula ``Q x. matrix`` with atoms of degree <= 2 in ``x`` whose
    coefficients are sparse integer combinations of ``1`` and the params."""
    rng = random.Random(seed)
    x = Polynomial.var("x")
    basis = [Polynomial.const(1)] + [Polynomial.var(p) for p in params]

    def coeff(density):
        out = Polynomial()
        for t in basis:
            if rng.random() < density:
                out = out + t * rng.choice([-3, -2, -1, 1, 2, 3])
        return out

    atoms = []
    for _ in range(rng.randint(1, max_atoms)):
        deg = rng.choice([1, 2, 2])
        p = sum((coeff(0.5 if k < deg else 0.7) * x ** k for k in range(deg + 1)), Polynomial())
        if p.degree("x") < 1:
            p = p + x
        atoms.append(Atom(p, rng.choice(RELS)))
    matrix = atoms[0]
    for a in atoms[1:]:
        matrix = And([matrix, a]) if rng.random() < 0.5 else Or([matrix, a])
    kind = rng.choice(["E", "A"])
    points = [{p: (rng.randint(-12, 12), rng.randint(1, 4)) for p in params} for _ in range(3)]
    return Quantifier(kind, "x", matrix), points


def env_rational(env):
    return {k: Fraction(n, d) for k, (n, d) in env.items()}
