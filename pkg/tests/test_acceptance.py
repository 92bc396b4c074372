"""Acceptance criteria, one test per criterion, each reporting PASS or FAIL."""
import functools
import itertools
import math
import random
import time
from fractions import Fraction

from conftest import ACCEPTANCE_LINES
from qebounds.bounds import (TABLE1, biquadratic_ellipse, biquadratic_sphere, bisection_bound,
                             build_invariance_formula, closed_form_ellipse_bound,
                             closed_form_sphere_bound, ellipsoid_volume, lorenz_candidate,
                             minimize_center, monte_carlo_search)
from qebounds.formula import compile_ground
from qebounds.parsing import parse
from qebounds.qe import qe
from qebounds.system import lorenz
from qebounds.verify import check_positive_invariance, integrate_rk4

import test_bounds as bounds_suite
import test_poly as poly_suite
import test_qe as qe_suite
import test_verify as verify_suite

LORENZ7 = {"s": 10, "r": 28, "b": "8/3"}
QUADRATIC_ANSWER = parse("(a1 = 0 | 4*a2*a0 - a1^2 != 0) & a0 > 0 & -4*a2*a0 + a1^2 <= 0")
IN1 = "4*(b - 1)*c^2 - b^2*(r + s)^2 >= 0"
IN2 = "4*s*(b - s)*c^2 - b^2*(r + s)^2 >= 0"


def sphere_region(lower: str):
    return parse(f"c - ({lower}) >= 0 & ((b - 2*s < 0 & b - 2 < 0) | ({IN1} & b - 2*s < 0)"
                 f" | ({IN2} & b - 2 < 0) | ({IN1} & {IN2}))")


def criterion(n: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                ACCEPTANCE_LINES.append(f"criterion {n} FAIL  {title}: {type(exc).__name__}: {exc}".splitlines()[0])
                print(ACCEPTANCE_LINES[-1])
                raise
            line = f"criterion {n} PASS  {title} ({time.perf_counter() - t0:.1f} s)"
            if detail:
                line += f"  [{detail}]"
            ACCEPTANCE_LINES.append(line)
            print(line)
        return run
    return wrap


@criterion(1, "quadratic positivity QE on 10^4 rational triples")
def test_criterion_1_quadratic_positivity():
    t0 = time.perf_counter()
    h = qe(parse("A x. a2*x^2 + a1*x + a0 > 0"))
    ours, ref = compile_ground(h), compile_ground(QUADRATIC_ANSWER)
    rng = random.Random(0)
    bad = 0
    for _ in range(10_000):
        env = {v: Fraction(rng.randint(-10 * 64, 10 * 64), 64) for v in ("a0", "a1", "a2")}
        bad += ours(env) != ref(env)
    elapsed = time.perf_counter() - t0
    assert bad == 0, f"{bad} disagreements"
    assert elapsed < 5, f"took {elapsed:.1f} s"
    return f"0 disagreements, {elapsed:.2f} s"


@criterion(2, "classic sphere bound: closed form and bisection")
def test_criterion_2_sphere_regression():
    cf = closed_form_sphere_bound(10, 28, Fraction(8, 3))
    assert cf.c_squared == Fraction(152 ** 2, 15)  # exact radical equality
    assert abs(cf.value - 152 / math.sqrt(15)) < 1e-9
    t0 = time.perf_counter()
    res = bisection_bound(lorenz(LORENZ7), lorenz_candidate("sphere-fixed", params=LORENZ7), (30, 50), 1e-4)
    elapsed = time.perf_counter() - t0
    assert abs(res.c - cf.value) < 1e-3
    assert elapsed < 60
    return f"c = {cf.value:.9f}, bisection {res.c:.6f} in {elapsed:.1f} s"


@criterion(3, "symbolic sphere QE vs the printed region formula on a 10^4 grid")
def test_criterion_3_symbolic_sphere_qe():
    h = compile_ground(qe(build_invariance_formula(lorenz(), lorenz_candidate("sphere-fixed"))))
    printed = compile_ground(sphere_region("r + 1"))
    grid = [Fraction(5 * k) for k in range(1, 11)]
    bad = [pt for pt in itertools.product(grid, repeat=4)
           if h(dict(zip("srbc", pt))) != printed(dict(zip("srbc", pt)))]
    assert not bad, f"{len(bad)} disagreements, first {bad[0]}"
    return "symbolic path, grid {5,10,...,50}^4"


def test_region_lower_bound_is_r_plus_s():
    """Off the uniform grid the printed ``c >= r+1`` is too weak; ``c >= r+s`` matches."""
    h = compile_ground(qe(build_invariance_formula(lorenz(), lorenz_candidate("sphere-fixed"))))
    corrected, printed = compile_ground(sphere_region("r + s")), compile_ground(sphere_region("r + 1"))
    witness = dict(s=5, r=28, b=1, c=30)
    assert printed(witness) and not h(witness)
    grid = [Fraction(x) for x in ("1/2", "1", "3/2", "2", "3", "5", "10", "20", "35", "50")]
    for pt in itertools.product(grid, repeat=4):
        env = dict(zip("srbc", pt))
        assert h(env) == corrected(env), env


@criterion(4, "variable-center sphere curve")
def test_criterion_4_sphere_center():
    bq = biquadratic_sphere()
    assert bq.validity_interval_exact() == (38, 40)  # 38 -/+ sqrt(40)
    lo, hi = bq.validity_interval()
    assert abs(lo - (38 - 2 * math.sqrt(10))) < 1e-9 and abs(hi - (38 + 2 * math.sqrt(10))) < 1e-9
    x30, c = minimize_center(bq, (lo, hi))
    assert abs(x30 - 36.118) < 1e-2 and abs(c - 38.164) < 1e-2
    at38 = bq(38)
    assert abs(at38 - 39.25) < 0.01
    assert abs(at38 - closed_form_sphere_bound(10, 28, Fraction(8, 3)).value) < 1e-6
    return f"min ({x30:.4f}, {c:.4f}), c(38) = {at38:.6f}"


@criterion(5, "classic ellipse bound and variable-center ellipse curve")
def test_criterion_5_ellipse():
    cf = closed_form_ellipse_bound(10, 28, Fraction(8, 3)).value
    assert abs(cf - 182.895) < 1e-3
    bq = biquadratic_ellipse()
    assert bq.validity_interval_exact() == (56, 112)  # 56 -/+ sqrt(112)
    lo, hi = bq.validity_interval()
    assert abs(lo - (56 - 4 * math.sqrt(7))) < 1e-9 and abs(hi - (56 + 4 * math.sqrt(7))) < 1e-9
    x30, c = minimize_center(bq, (lo, hi))
    assert abs(x30 - 52.553) < 1e-2 and abs(c - 176.531) < 1e-2
    return f"c = {cf:.4f}, min ({x30:.4f}, {c:.4f})"


@criterion(6, "reference ellipsoid volumes within 0.5%")
def test_criterion_6_table_volumes():
    worst = 0.0
    for name, e, ref in TABLE1:
        err = abs(ellipsoid_volume(e) - ref) / ref
        assert err < 0.005, f"{name}: {ellipsoid_volume(e):.4g} vs {ref:.4g}"
        worst = max(worst, err)
    return f"worst relative error {worst:.2%}"


@criterion(7, "Monte-Carlo feasibility")
def test_criterion_7_monte_carlo():
    t0 = time.perf_counter()
    sys = lorenz(LORENZ7)
    free = monte_carlo_search(sys, n_samples=100, seed=0, constrain_p2_eq_p3=False, min_gap=0.1)
    assert free.n_feasible == 0
    tied = monte_carlo_search(sys, n_samples=500, seed=0)
    assert tied.best is not None and tied.best.volume <= 2.35e5
    elapsed = time.perf_counter() - t0
    assert elapsed < 30 * 60
    return (f"unequal weights 0/100 feasible; tied weights {tied.n_feasible}/500 feasible, "
            f"best volume {tied.best.volume:.5g}, {elapsed:.0f} s")


@criterion(8, "property suites")
def test_criterion_8_property_suites():
    poly_suite.test_ring_axioms()
    poly_suite.test_leibniz_rule()
    poly_suite.test_lie_linear_and_product()
    poly_suite.test_general_ellipsoid_derivative_closed_form()

    bad = [seed for seed in range(1000) if not qe_suite.vs_agrees_with_oracle(seed)]
    assert not bad, f"virtual substitution disagrees with the oracle for seeds {bad[:5]}"

    sys = lorenz(LORENZ7)
    for x30 in (34, 36, 38, 40, 42):
        c4, c5 = bounds_suite.bound_pair(sys, x30)
        assert c4 <= c5 + 1e-3, (x30, c4, c5)

    ratio = verify_suite.rk4_error(0.1) / verify_suite.rk4_error(0.05)
    assert 12 <= ratio <= 20, ratio

    for name, e, _ in TABLE1:
        rep = check_positive_invariance(e, sys, n_starts=100, T=50.0, rel_tol=1e-4)
        assert rep.invariant, f"{name}: {rep.diagnostic}"
    return f"1000 oracle instances, RK4 ratio {ratio:.2f}, 5 ellipsoids invariant"


def test_lorenz_orbit_within_sphere_bound():
    traj = integrate_rk4(lorenz(LORENZ7), [1.0, 1.0, 1.0], 1e-3, 50.0, record_every=10)
    V = traj.states[:, 0] ** 2 + traj.states[:, 1] ** 2 + (traj.states[:, 2] - 38) ** 2
    assert V.max() <= closed_form_sphere_bound(10, 28, Fraction(8, 3)).value ** 2
