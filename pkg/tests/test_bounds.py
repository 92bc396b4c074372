import math
from pathlib import Path

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from qebounds.bounds import (TABLE1, BracketError, EllipsoidBound, InfeasibleError, LyapunovCandidate,
                             NoRealRoot, bisection_bound, biquadratic_ellipse, biquadratic_sphere,
                             build_convergence_formula, build_formula, build_invariance_formula,
                             closed_form_ellipse_bound, closed_form_sphere_bound, ellipsoid_volume,
                             find_bound, lorenz_candidate, minimize_center, monte_carlo_search,
                             quadratic_candidate, union_contains, union_projection_outline)
from qebounds.formula import Atom, iter_atoms, to_prenex
from qebounds.parsing import parse_polynomial
from qebounds.poly import Polynomial
from qebounds.qe import decide
from qebounds.system import (DynSystem, SystemFileError, UnknownSymbolError, load_system, lorenz,
                             parse_system)

P = parse_polynomial
LORENZ7 = {"s": 10, "r": 28, "b": "8/3"}
C1 = 152 / math.sqrt(15)  # 39.2462312415...
DATA = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="module")
def sys7():
    return lorenz(LORENZ7)


# -- systems ------------------------------------------------------------------------

def test_system_file_round_trip():
    sys = load_system(DATA / "lorenz.sys")
    assert sys.rhs == lorenz(LORENZ7).rhs
    again = parse_system(lorenz().to_text())
    assert again.rhs == lorenz().rhs


@pytest.mark.parametrize("text,msg", [
    ("vars x\node y = 1\n", "no equation for x"),
    ("vars x\node x = q*x\n", "unknown symbol"),
    ("vars x\nfoo x\n", "unknown directive"),
    ("params a\n", "no 'vars'"),
])
def test_system_file_errors(text, msg):
    with pytest.raises(SystemFileError, match=msg):
        parse_system(text)


def test_system_dimension_mismatch():
    with pytest.raises(ValueError):
        DynSystem(("x", "y"), (), (P("x"),))
    with pytest.raises(UnknownSymbolError):
        DynSystem(("x",), (), (P("x*k"),))


# -- formula builders ------------------------------------------------------------------

def test_invariance_formula_structure():
    f = build_invariance_formula(lorenz(), lorenz_candidate("sphere-fixed"))
    pf = to_prenex(f)
    assert pf.blocks == (("A", "x1"), ("A", "x2"), ("A", "x3"))
    atoms = set(iter_atoms(pf.matrix))
    V1 = P("x1^2 + x2^2 + (x3 - r - s)^2")
    Vdot = P("2*b*r*x3 + 2*b*s*x3 - 2*b*x3^2 - 2*s*x1^2 - 2*x2^2")
    assert Atom(V1 - P("c^2"), "<=") in atoms      # V - c^2 > 0 after the implication
    assert Atom(Vdot, "<") in atoms
    for v in ("s", "r", "b", "c"):
        assert Atom(P(v), ">") in atoms


def test_stationary_flow_with_unbounded_level():
    sys = DynSystem(("x",), (), (Polynomial(),))
    cand = LyapunovCandidate(P("x^2"))
    for c in (1, 10, 1000):
        assert not decide(build_invariance_formula(sys, cand, c))


@pytest.mark.parametrize("c,expect", [(40, True), (39, False)])
def test_ground_sphere_decisions(sys7, c, expect):
    assert decide(build_formula(sys7, lorenz_candidate("sphere-fixed", params=LORENZ7), c)) is expect


def test_convergence_formula_for_linear_decay():
    sys = DynSystem(("x",), (), (P("-x"),))
    f = build_convergence_formula(sys, LyapunovCandidate(P("x^2")), c=1)
    assert to_prenex(f).blocks[0] == ("E", "alpha")
    assert decide(f)


def test_convergence_ground_center_instance(sys7):
    cand = lorenz_candidate("sphere-center", x30=37)
    f = build_convergence_formula(sys7, cand, c=39)
    assert decide(f)
    assert not decide(build_convergence_formula(sys7, cand, c=38))


def test_convergence_implies_invariance(sys7):
    cand = lorenz_candidate("sphere-center", x30=40)
    for c in (38, mpq(3883, 100), 39, 40):
        if decide(build_formula(sys7, cand, c, "convergence")):
            assert decide(build_formula(sys7, cand, c, "invariance"))


# -- closed forms --------------------------------------------------------------------

def test_sphere_classic():
    cf = closed_form_sphere_bound(10, 28, mpq(8, 3))
    assert cf.c_squared == mpq(152 ** 2, 15)
    assert abs(cf.value - 39.246) < 5e-4
    assert abs(cf.value - C1) < 1e-12


def test_sphere_region_two():
    # 2s = b here, the shared edge of cases 2 and 3; both give r + s
    cf = closed_form_sphere_bound("0.5", 1, 1)
    assert cf.case in (2, 3) and cf.c_squared == mpq(9, 4)
    inner = closed_form_sphere_bound("0.6", 1, 1)
    assert inner.case == 2 and inner.c_squared == mpq(8, 5) ** 2


def test_sphere_region_three():
    cf = closed_form_sphere_bound("0.5", 1, "1.5")
    assert cf.case == 3
    assert abs(cf.value - 1.5909902576697319) < 1e-12  # 2.25/(2*sqrt(0.5))


def test_ellipse_classic():
    cf = closed_form_ellipse_bound(10, 28, mpq(8, 3))
    assert cf.c_squared == mpq(8, 3) ** 2 * 28 ** 2 * 6
    assert abs(cf.value - 182.895) < 1e-3


def test_ellipse_region_two():
    cf = closed_form_ellipse_bound("0.5", 1, 1)
    assert abs(cf.value - math.sqrt(2)) < 1e-12


def test_ellipse_grows_with_b():
    vals = [closed_form_ellipse_bound(10, 28, b).value for b in (2, 4, 16, 256, 4096)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_nonpositive_parameters_rejected():
    with pytest.raises(ValueError):
        closed_form_sphere_bound(0, 28, 1)
    with pytest.raises(ValueError):
        closed_form_ellipse_bound(10, -1, 1)


def test_regions_cover_grid():
    for s in np.linspace(0.1, 5, 25):
        for b in np.linspace(0.1, 5, 25):
            assert closed_form_sphere_bound(round(s, 4), 28, round(b, 4)).case in (1, 2, 3)


@pytest.mark.parametrize("s,b", [(1, 2), (3, 2), (mpq(1, 2), 1), (mpq(3, 4), mpq(3, 2)), (1, 5)])
def test_region_boundaries_agree(s, b):
    # b = 2 (cases 1/2), b = 2s (cases 2/3), s = 1 (cases 1/3): limits coincide
    r = 28
    c1 = mpq(s + r) ** 2 * mpq(b) ** 2 / (4 * (mpq(b) - 1)) if b != 1 else None
    c2 = mpq(r + s) ** 2
    c3 = mpq(s + r) ** 2 * mpq(b) ** 2 / (4 * s * (b - mpq(s))) if b > s else None
    got = closed_form_sphere_bound(s, r, b).c_squared
    candidates = [v for v in (c1, c2, c3) if v is not None]
    assert sum(1 for v in candidates if v == got) >= 2


# -- bound curves -----------------------------------------------------------------------

def test_sphere_validity_interval_exact():
    center, rad = biquadratic_sphere().validity_interval_exact()
    assert (center, rad) == (38, 40)  # 38 -/+ 2 sqrt(10)
    lo, hi = biquadratic_sphere().validity_interval()
    assert abs(lo - (38 - 2 * math.sqrt(10))) < 1e-9 and abs(hi - (38 + 2 * math.sqrt(10))) < 1e-9
    assert abs(hi - 44.324555320336758) < 1e-12


def test_ellipse_validity_interval_exact():
    center, rad = biquadratic_ellipse().validity_interval_exact()
    assert (center, rad) == (56, 112)  # 56 -/+ 4 sqrt(7)
    lo, hi = biquadratic_ellipse().validity_interval()
    assert abs(lo - 45.416994755741638) < 1e-9 and abs(hi - 66.583005244258362) < 1e-9


def test_sphere_curve_at_38():
    curve = biquadratic_sphere()
    a0, a1, a2 = curve.coefficients(38)
    assert (a0, a1, a2) == (4096 * 38 ** 4, 384 * 1444 * 430, 9 * (-40) * 440)
    # largest root of -158400 y^2 + 238433280 y + 8540717056 (sympy nroots, frozen)
    assert abs(curve(38) - 39.246231241568491) < 1e-9
    assert abs(curve(38) - 39.25) < 0.01


def test_curve_undefined_outside_interval():
    with pytest.raises(NoRealRoot):
        biquadratic_sphere()(30)
    with pytest.raises(NoRealRoot):
        biquadratic_ellipse()(70)


def test_curve_poles_at_endpoints():
    curve = biquadratic_sphere()
    lo, hi = curve.validity_interval()
    assert curve(lo + 1e-6) > 1e3 * curve(38)
    assert curve(hi - 1e-6) > 1e3 * curve(38)


def test_minimize_sphere_center():
    curve = biquadratic_sphere()
    x, c = minimize_center(curve, curve.validity_interval())
    assert abs(x - 36.118) < 1e-2 and abs(c - 38.164) < 1e-2


def test_minimize_ellipse_center():
    curve = biquadratic_ellipse()
    x, c = minimize_center(curve, curve.validity_interval())
    assert abs(x - 52.553) < 1e-2 and abs(c - 176.531) < 1e-2


def test_minimize_empty_interval():
    with pytest.raises(BracketError):
        minimize_center(lambda x: x, (2.0, 1.0))


# -- bisection ---------------------------------------------------------------------------

def test_bisection_sphere(sys7):
    res = bisection_bound(sys7, lorenz_candidate("sphere-fixed", params=LORENZ7), (30, 50), 1e-3)
    assert abs(res.c - C1) <= 1e-3
    assert res.c >= C1  # the certified end of the bracket


def test_bisection_ellipse(sys7):
    res = bisection_bound(sys7, lorenz_candidate("ellipse-fixed", params=LORENZ7), (150, 200), 1e-3)
    assert abs(res.c - 182.895) < 2e-3


def test_bisection_bad_bracket(sys7):
    with pytest.raises(BracketError, match="raise c_hi"):
        bisection_bound(sys7, lorenz_candidate("sphere-fixed", params=LORENZ7), (10, 20))


def test_unequal_weights_infeasible(sys7):
    cand = quadratic_candidate(1, 1, 2, 38)
    for c in (100, 1000, 10 ** 4):
        assert not decide(build_formula(sys7, cand, c))
    with pytest.raises(InfeasibleError):
        find_bound(sys7, cand)


def test_ground_decider_needs_ground_candidate(sys7):
    with pytest.raises(ValueError, match="free symbols"):
        bisection_bound(sys7, lorenz_candidate("sphere-center"), (30, 50))


def bound_pair(sys, x30, tol=1e-3):
    cand = lorenz_candidate("sphere-center", x30=x30)
    lo, hi = 30, 60
    c4 = bisection_bound(sys, cand, (lo, hi), tol, "invariance").c
    c5 = bisection_bound(sys, cand, (lo, hi), tol, "convergence").c
    return c4, c5


@pytest.mark.parametrize("x30", [34, 38, 42])
def test_invariance_bound_below_convergence_bound(sys7, x30):
    c4, c5 = bound_pair(sys7, x30)
    assert c4 <= c5 + 1e-3
    assert abs(c4 - biquadratic_sphere()(x30)) < 2e-3


# -- ellipsoids ----------------------------------------------------------------------------

@pytest.mark.parametrize("name,e,ref", TABLE1)
def test_table_volumes(name, e, ref):
    assert abs(ellipsoid_volume(e) - ref) / ref < 0.005


@given(st.floats(0.01, 100), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(1, 100))
def test_volume_reparametrization_invariant(lam, p1, p2, p3, c):
    e = EllipsoidBound(p1, p2, p3, 10.0, c)
    f = e.reparametrized(lam)
    assert math.isclose(f.volume, e.volume, rel_tol=1e-12)
    pts = np.random.default_rng(0).normal(size=(50, 3)) * c + [0, 0, 10]
    np.testing.assert_allclose(f.V(pts) / f.c ** 2, e.V(pts) / e.c ** 2, rtol=1e-12)


def test_union_membership():
    es = [e for _, e, _ in TABLE1]
    for e in es:
        assert union_contains(es, [0, 0, e.x30])
    # a point with V = (1 + 1e-6) c^2 for every member
    e = EllipsoidBound(1, 1, 1, 38, 39.246)
    edge = [0, 0, 38 + 39.246 * math.sqrt(1 + 1e-6)]
    assert not union_contains([e], edge)
    assert not union_contains([e, e.scaled(0.5)], edge)


def test_single_sphere_outline_is_circle():
    e = EllipsoidBound(1, 1, 1, 38, 10)
    lines = union_projection_outline([e], "x1x3", 400)
    assert len(lines) == 1
    pts = lines[0]
    radius = np.hypot(pts[:, 0], pts[:, 1] - 38)
    assert np.all(np.abs(radius - 10) < 0.1)


def test_outline_needs_members():
    with pytest.raises(ValueError):
        union_projection_outline([], "x1x3")


def test_ellipsoid_validation():
    with pytest.raises(ValueError):
        EllipsoidBound(0, 1, 1, 0, 1)
    with pytest.raises(ValueError):
        EllipsoidBound(1, 1, 1, 0, -1)


# -- Monte Carlo -----------------------------------------------------------------------------

def test_monte_carlo_no_samples(sys7):
    res = monte_carlo_search(sys7, n_samples=0)
    assert res.best is None and res.feasible == []


def test_monte_carlo_deterministic_and_ordered(sys7):
    a = monte_carlo_search(sys7, n_samples=12, seed=5)
    b = monte_carlo_search(sys7, n_samples=12, seed=5)
    assert a.samples == b.samples
    assert [s["index"] for s in a.samples] == list(range(12))
    if a.feasible:
        assert a.best == min(a.feasible, key=ellipsoid_volume)
        for e in a.feasible:
            assert e.p2 == e.p3


def test_monte_carlo_unequal_weights_infeasible(sys7):
    res = monte_carlo_search(sys7, n_samples=8, seed=3, constrain_p2_eq_p3=False, min_gap=0.1)
    assert res.n_feasible == 0
    assert all(abs(s["p"][1] - s["p"][2]) >= 0.1 for s in res.samples)
