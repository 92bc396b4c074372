"""Exact real-root isolation for univariate rational polynomials.

Used to decide ``exists v. phi(v)`` when ``phi`` has no variable other than
``v``: all atom polynomials are split into a pairwise coprime basis, the real
roots of the basis are isolated with Sturm sequences into pairwise disjoint
rational intervals, and ``phi`` is evaluated at every root and at one rational
point inside every gap between consecutive roots.

Dense polynomials are lists of ``mpq`` coefficients, lowest degree first.
"""
from __future__ import annotations

from gmpy2 import mpq

from .formula import And, Atom, Formula, Or, _Const, iter_atoms, sign_bit

Dense = list


def trim(p: Dense) -> Dense:
    while p and not p[-1]:
        p.pop()
    return p


def deg(p: Dense) -> int:
    return len(p) - 1


def from_poly(poly, v: str) -> Dense:
    out = []
    for c in poly.coefficients(v):
        if not c.is_constant():
            raise ValueError(f"{poly} is not univariate in {v}")
        out.append(c.constant_value())
    return trim(out)


def peval(p: Dense, x) -> mpq:
    acc = mpq(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def sign_at(p: Dense, x) -> int:
    v = peval(p, x)
    return (v > 0) - (v < 0)


def derivative(p: Dense) -> Dense:
    return [c * i for i, c in enumerate(p)][1:]


def divmod_dense(a: Dense, b: Dense) -> tuple[Dense, Dense]:
    if not b:
        raise ZeroDivisionError("division by zero polynomial")
    a = list(a)
    db, lc = deg(b), b[-1]
    if deg(a) < db:
        return [], trim(a)
    q = [mpq(0)] * (deg(a) - db + 1)
    for k in range(deg(a) - db, -1, -1):
        c = a[k + db] / lc
        q[k] = c
        if c:
            for j in range(db + 1):
                a[k + j] -= c * b[j]
    return trim(q), trim(a[:db])


def monic(p: Dense) -> Dense:
    lc = p[-1]
    return [c / lc for c in p]


def gcd_dense(a: Dense, b: Dense) -> Dense:
    a, b = trim(list(a)), trim(list(b))
    while b:
        a, b = b, divmod_dense(a, b)[1]
    return monic(a) if a else a


def squarefree(p: Dense) -> Dense:
    g = gcd_dense(p, derivative(p))
    if deg(g) <= 0:
        return monic(p)
    return monic(divmod_dense(p, g)[0])


def sturm_sequence(p: Dense) -> list[Dense]:
    seq = [p, derivative(p)]
    while seq[-1] and deg(seq[-1]) > 0:
        r = divmod_dense(seq[-2], seq[-1])[1]
        if not r:
            break
        seq.append([-c for c in r])
    return [s for s in seq if s]


def variations(seq: list[Dense], x) -> int:
    count, last = 0, 0
    for s in seq:
        v = sign_at(s, x)
        if v:
            if last and v != last:
                count += 1
            last = v
    return count


def root_bound(p: Dense) -> mpq:
    lc = abs(p[-1])
    return 1 + max((abs(c) / lc for c in p[:-1]), default=mpq(0))


def isolate_roots(p: Dense) -> list[tuple[mpq, mpq]]:
    """Disjoint isolating intervals of the real roots of squarefree ``p``.

    Each item is ``(lo, hi)`` with ``lo < hi`` (one root strictly inside, no
    root at the endpoints) or ``lo == hi`` for an exact rational root.
    """
    if deg(p) < 1:
        return []
    seq = sturm_sequence(p)
    m = root_bound(p)
    out: list[tuple[mpq, mpq]] = []
    stack = [(-m, m)]
    while stack:
        lo, hi = stack.pop()
        n = variations(seq, lo) - variations(seq, hi)
        if n == 0:
            continue
        if n == 1:
            out.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        if peval(p, mid) == 0:
            out.append((mid, mid))
            delta = (hi - lo) / 4
            while True:
                a, b = mid - delta, mid + delta
                if peval(p, a) and peval(p, b) and variations(seq, a) - variations(seq, b) == 1:
                    break
                delta /= 2
            stack.append((lo, a))
            stack.append((b, hi))
        else:
            stack.append((lo, mid))
            stack.append((mid, hi))
    out.sort()
    return out


def refine(p: Dense, lo: mpq, hi: mpq) -> tuple[mpq, mpq]:
    """Halve an isolating interval of a simple root of ``p``."""
    if lo == hi:
        return lo, hi
    mid = (lo + hi) / 2
    sm = sign_at(p, mid)
    if sm == 0:
        return mid, mid
    if sign_at(p, lo) != sm:
        return lo, mid
    return mid, hi


def coprime_basis(polys: list[Dense]) -> list[Dense]:
    """Monic, squarefree, pairwise coprime polynomials whose products give
    the squarefree parts of the inputs."""
    basis: list[Dense] = []
    for p in polys:
        if deg(p) < 1:
            continue
        p = squarefree(p)
        new = []
        for b in basis:
            if deg(p) < 1:
                new.append(b)
                continue
            g = gcd_dense(p, b)
            if deg(g) > 0:
                new.append(g)
                rest = divmod_dense(b, g)[0]
                if deg(rest) > 0:
                    new.append(monic(rest))
                p = monic(divmod_dense(p, g)[0])
            else:
                new.append(b)
        if deg(p) > 0:
            new.append(p)
        basis = new
    return basis


def real_roots(polys: list[Dense]) -> list[tuple[int, mpq, mpq]]:
    """Sorted distinct real roots of the given polynomials as
    ``(basis_index, lo, hi)`` with pairwise disjoint closed intervals, plus the
    basis used."""
    basis = coprime_basis(polys)
    roots = []
    for i, b in enumerate(basis):
        for lo, hi in isolate_roots(b):
            roots.append([i, lo, hi])
    # refine until closed intervals are pairwise disjoint
    while True:
        roots.sort(key=lambda r: (r[1], r[2]))
        clash = False
        for k in range(len(roots) - 1):
            a, b = roots[k], roots[k + 1]
            if a[2] >= b[1]:
                clash = True
                for r in (a, b):
                    if r[1] != r[2]:
                        r[1], r[2] = refine(basis[r[0]], r[1], r[2])
        if not clash:
            break
    return [(i, lo, hi) for i, lo, hi in roots], basis


def exists_univariate(phi: Formula, v: str) -> bool:
    """Exact truth of ``exists v. phi`` for quantifier-free ``phi`` in ``v`` only."""
    polys = {}
    for a in iter_atoms(phi):
        if a.poly not in polys:
            polys[a.poly] = from_poly(a.poly, v)
    dense = list(polys.values())
    roots, basis = real_roots(dense)

    def holds(signs) -> bool:
        return _eval_signs(phi, signs)

    def signs_at_rational(x):
        return {p: sign_bit(peval(d, x)) for p, d in polys.items()}

    samples = []
    if not roots:
        samples.append(mpq(0))
    else:
        samples.append(roots[0][1] - 1)
        samples.append(roots[-1][2] + 1)
        for k in range(len(roots) - 1):
            samples.append((roots[k][2] + roots[k + 1][1]) / 2)
    for x in samples:
        if holds(signs_at_rational(x)):
            return True
    for i, lo, hi in roots:
        if lo == hi:
            if holds(signs_at_rational(lo)):
                return True
            continue
        b = basis[i]
        signs = {}
        for p, d in polys.items():
            if d and deg(d) >= deg(b) and not divmod_dense(d, b)[1]:
                signs[p] = sign_bit(0)
            else:
                signs[p] = sign_bit(peval(d, (lo + hi) / 2))
        if holds(signs):
            return True
    return False


def _eval_signs(f: Formula, signs) -> bool:
    if isinstance(f, Atom):
        return bool(signs[f.poly] & f.mask)
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, And):
        return all(_eval_signs(a, signs) for a in f.args)
    if isinstance(f, Or):
        return any(_eval_signs(a, signs) for a in f.args)
    raise ValueError(f"unexpected node in quantifier-free NNF formula: {f!r}")
