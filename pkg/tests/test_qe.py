import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qebounds.bounds import build_invariance_formula, lorenz_candidate
from qebounds.formula import (FALSE, NEG, POS, TRUE, ZERO, Atom, flip_mask, Not, Quantifier, eval_ground, free_variables, iter_atoms,
                              to_prenex)
from qebounds.parsing import parse, parse_polynomial
from qebounds.qe import (NEG_INFINITY, DegreeTooHigh, QEOptions, QEOverflow, VirtualTerm, decide,
                         elimination_set, eliminate_existential, qe, qe_with_stats, virtual_substitute)
from qebounds.system import lorenz
from qebounds.verify import sample_falsify

from oracles import env_rational, random_instance, univariate_truth

P = parse_polynomial
KNOWN_ANSWER = parse("(a1 = 0 | 4*a2*a0 - a1^2 != 0) & a0 > 0 & -4*a2*a0 + a1^2 <= 0")
LORENZ7 = {"s": 10, "r": 28, "b": "8/3"}


def _agree(f, g, names, n=2000, seed=0, span=10):
    rng = random.Random(seed)
    for _ in range(n):
        env = {v: Fraction(rng.randint(-span * 8, span * 8), rng.randint(1, 8)) for v in names}
        if eval_ground(f, env) != eval_ground(g, env):
            return env
    return None


# -- virtual substitution of single atoms ------------------------------------------

def test_substitute_rational_value():
    assert virtual_substitute(Atom(P("x - 5"), ">"), "x", VirtualTerm.rational(7)) is TRUE


def test_substitute_root_on_boundary():
    t = VirtualTerm.root(1, 0, -2, 1)
    assert virtual_substitute(Atom(P("x^2 - 2"), "<="), "x", t) is TRUE


def test_substitute_negative_infinity():
    assert virtual_substitute(Atom(P("x"), ">"), "x", NEG_INFINITY) is FALSE


def test_substitute_epsilon_after_root():
    # sqrt(2) + eps: x^2 - 2 > 0 holds, x^2 - 2 = 0 fails
    t = VirtualTerm.root(1, 0, -2, 1).plus_epsilon()
    assert virtual_substitute(Atom(P("x^2 - 2"), ">"), "x", t) is TRUE
    assert virtual_substitute(Atom(P("x^2 - 2"), "="), "x", t) is FALSE


def test_substitute_result_is_variable_free():
    t = VirtualTerm.root(P("a"), P("b"), P("c"), -1)
    g = virtual_substitute(Atom(P("x^2 + u*x - 1"), "<"), "x", t)
    assert "x" not in free_variables(g)


def test_substitute_degree_three():
    with pytest.raises(DegreeTooHigh) as err:
        virtual_substitute(Atom(P("x^3 - 1"), ">"), "x", VirtualTerm.root(1, 0, -1, 1))
    assert err.value.report.variable == "x"
    assert err.value.report.max_degree == 3


# -- existential elimination ----------------------------------------------------------

def test_no_solution():
    assert eliminate_existential(parse("x^2 + 1 < 0"), "x") is FALSE


def test_dualized_quadratic_matches_known_answer():
    g = parse("a2*x^2 + a1*x + a0 > 0")
    h = Not(eliminate_existential(Not(g), "x"))
    assert _agree(h, KNOWN_ANSWER, ("a0", "a1", "a2")) is None


def test_open_interval_always_nonempty():
    h = eliminate_existential(parse("x - u > 0 & x - u < 1"), "x")
    assert _agree(h, TRUE, ("u",)) is None


def _mask_on(g, p):
    """Sign set that the atoms of ``g`` impose on ``p`` (up to a positive factor)."""
    q, sq = p.primitive()
    for a in iter_atoms(g):
        r, sr = a.poly.primitive()
        if r == q:
            return a.mask if sr == sq else flip_mask(a.mask)
    return None


def test_elimination_guards_cover_discriminant():
    phi = parse("a*x^2 + b*x + c < 0 | d*x^2 - x + e = 0")
    es = elimination_set(phi, "x")
    quads = [(t, g) for t, g in es if t.kind in ("root", "eps")
             and (t if t.kind == "root" else t.inner).is_quadratic]
    assert len(quads) >= 4
    for t, g in quads:
        root = t if t.kind == "root" else t.inner
        assert _mask_on(g, root.discriminant()) == ZERO | POS, f"guard {g} lacks disc >= 0"
        assert _mask_on(g, root.a) == NEG | POS, f"guard {g} lacks a != 0"


def test_linear_root_guard():
    t = VirtualTerm.linear(P("b"), P("c"))
    assert t.guard() == Atom(P("b"), "!=")


# -- full QE -----------------------------------------------------------------------------

def test_tautology():
    assert qe(parse("A x. x^2 >= 0")) is TRUE


def test_quadratic_positivity_sampled():
    h = qe(parse("A x. a2*x^2 + a1*x + a0 > 0"))
    assert free_variables(h) <= {"a0", "a1", "a2"}
    assert _agree(h, KNOWN_ANSWER, ("a0", "a1", "a2"), n=3000) is None


def test_forall_exists_duality():
    F = parse("x^2 + a*x + b <= 0 | x - a = 0")
    left = qe(Quantifier("A", "x", F))
    right = Not(qe(Quantifier("E", "x", Not(F))))
    assert _agree(left, right, ("a", "b")) is None


@given(st.integers(0, 10 ** 6))
@settings(max_examples=60)
def test_duality_random(seed):
    f, points = random_instance(seed, max_atoms=2)
    dual = Quantifier("A" if f.kind == "E" else "E", "x", Not(f.body))
    a, b = qe(f), Not(qe(dual))
    for env in points:
        e = env_rational(env)
        assert eval_ground(a, e) == eval_ground(b, e)


def test_cubic_raises_with_report():
    with pytest.raises(DegreeTooHigh) as err:
        qe(parse("E x. x^3 + a*x + 1 = 0 & b*x^3 > 1"))
    r = err.value.report
    assert r.variable == "x" and r.max_degree == 3


def test_cubic_univariate_fallback_is_exact():
    # with no parameters the engine may decide exactly by root isolation
    assert decide(parse("E x. x^3 - 2 = 0 & x > 1"))
    assert not decide(parse("E x. x^3 - 2 = 0 & x > 2"))


def test_overflow_cap():
    with pytest.raises(QEOverflow):
        qe(parse("A x. A y. (a*x^2 + b*y^2 + c*x*y + d*x + e > 0 | x - y != 0) & f*x + g*y <= h"),
           QEOptions(max_atoms=20))


def test_stats_are_collected():
    _, stats = qe_with_stats(parse("E x. x^2 - a < 0"))
    assert stats.substitutions > 0


# -- decisions ------------------------------------------------------------------------------

def test_some_quadratic_is_positive():
    assert decide(parse("E a2. E a1. E a0. A x. a2*x^2 + a1*x + a0 > 0"))


@pytest.mark.parametrize("c,expect", [(40, True), (39, False)])
def test_sphere_invariance_decision(c, expect):
    # threshold oracle: 152/sqrt(15) = 39.2462...
    sys = lorenz(LORENZ7)
    f = build_invariance_formula(sys, lorenz_candidate("sphere-fixed", params=LORENZ7), c)
    assert decide(f) is expect


def test_decide_needs_closed_formula():
    with pytest.raises(ValueError):
        decide(parse("E x. x - a > 0"))


@pytest.mark.parametrize("text", [
    "A x. x^2 - 2*x + 2 > 0",
    "A x. A y. x^2 + y^2 - 2*x*y >= 0",
    "A x. (x - 1)*(x - 3) >= 0 | x - 1 > 0",
])
def test_decide_true_has_no_counterexample(text):
    f = parse(text)
    assert decide(f)
    pf = to_prenex(f)
    box = {v: (-10.0, 10.0) for _, v in pf.blocks}
    assert not sample_falsify(pf.matrix, box, n=100_000, seed=1).found


@pytest.mark.parametrize("text", [
    "E x. x^2 + 1 < 0",
    "E x. E y. x^2 + y^2 + 1 <= 0",
    "E x. x - 1 > 0 & x - 1 < 0",
])
def test_decide_false_has_no_witness(text):
    f = parse(text)
    assert not decide(f)
    pf = to_prenex(f)
    box = {v: (-10.0, 10.0) for _, v in pf.blocks}
    assert not sample_falsify(pf.matrix, box, n=100_000, seed=1, kind="exists").found


def test_sphere_invariance_sampled_soundness():
    sys = lorenz(LORENZ7)
    f = build_invariance_formula(sys, lorenz_candidate("sphere-fixed", params=LORENZ7), 40)
    pf = to_prenex(f)
    box = {v: (-80.0, 120.0) for _, v in pf.blocks}
    assert not sample_falsify(pf.matrix, box, n=100_000, seed=2).found


# -- univariate oracle --------------------------------------------------------------------

def vs_agrees_with_oracle(seed: int) -> bool:
    f, points = random_instance(seed)
    h = qe(f)
    return all(eval_ground(h, env_rational(env)) == univariate_truth(f.kind, f.body, env) for env in points)


@given(st.integers(0, 10 ** 9))
@settings(max_examples=150)
def test_vs_matches_univariate_oracle(seed):
    assert vs_agrees_with_oracle(seed)
