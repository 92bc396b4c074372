"""Invariant-set bounds for polynomial systems with quadratic candidates.

The level set ``{V <= c^2}`` of a candidate ``V`` is positively invariant
when every point outside it has ``dV/dt < 0`` (the *invariance* formula) or,
more strongly, when ``dV/dt <= -alpha (V - c^2)`` for some ``alpha > 0``
(the *convergence* formula). Both are first-order formulas over the reals;
the smallest admissible ``c`` is found symbolically (closed forms,
biquadratic curves in the center offset) or by exact bisection on ground
instances decided by :mod:`qebounds.qe`.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr, mpq
from scipy.optimize import minimize_scalar

from .formula import And, Atom, Formula, Quantifier, forall, implies
from .poly import Number, Polynomial, as_rational
from .qe import QEOptions, decide
from .system import DynSystem, lie_derivative_free, lorenz

STATE = ("x1", "x2", "x3")
PI = math.pi


class NoRealRoot(ValueError):
    pass


class BracketError(ValueError):
    pass


class InfeasibleError(ValueError):
    pass


# -- candidates ----------------------------------------------------------------

@dataclass(frozen=True)
class LyapunovCandidate:
    """``V(x) <= c^2`` with ``c`` named ``level_var``."""

    V: Polynomial
    level_var: str = "c"
    name: str = "custom"
    p: tuple | None = None
    x30: object = None


def quadratic_candidate(p1, p2, p3, x30, name: str = "custom", state=STATE) -> LyapunovCandidate:
    """``p1 x1^2 + p2 x2^2 + p3 (x3 - x30)^2``; entries may be numbers or
    symbol names."""
    x1, x2, x3 = (Polynomial.var(v) for v in state)
    P = [_sym(v) for v in (p1, p2, p3)]
    center = _sym(x30)
    V = P[0] * x1 ** 2 + P[1] * x2 ** 2 + P[2] * (x3 - center) ** 2
    return LyapunovCandidate(V, "c", name, (p1, p2, p3), x30)


def _sym(v) -> Polynomial:
    if isinstance(v, Polynomial):
        return v
    if isinstance(v, str) and v.replace("_", "").isalnum() and not v[0].isdigit():
        return Polynomial.var(v)
    return Polynomial.const(as_rational(v))


def lorenz_candidate(name: str, x30=None, p=None, params: Mapping | None = None) -> LyapunovCandidate:
    """Named candidates for the Lorenz system.

    ``sphere-fixed``: center ``(0, 0, r+s)``; ``sphere-center``: unit axes,
    center offset ``x30``; ``ellipse-fixed``: axes ``(r, s, s)`` about
    ``(0, 0, 2r)``; ``ellipse-center``: same axes, center ``x30``;
    ``general``/``custom``: weights ``p`` and center ``x30``.
    With ``params`` the system parameters are substituted.
    """
    s, r = _param(params, "s"), _param(params, "r")
    one = Polynomial.const(1)
    if name == "sphere-fixed":
        cand = quadratic_candidate(one, one, one, r + s, name)
    elif name == "sphere-center":
        cand = quadratic_candidate(one, one, one, "x30" if x30 is None else x30, name)
    elif name == "ellipse-fixed":
        cand = quadratic_candidate(r, s, s, r * 2, name)
    elif name == "ellipse-center":
        cand = quadratic_candidate(r, s, s, "x30" if x30 is None else x30, name)
    elif name in ("general", "custom"):
        if p is None:
            p = ("p1", "p2", "p3")
        cand = quadratic_candidate(p[0], p[1], p[2], "x30" if x30 is None else x30, name)
    else:
        raise ValueError(f"unknown candidate {name!r}")
    return cand


def _param(params, name) -> Polynomial:
    if params and name in params:
        return Polynomial.const(as_rational(params[name]))
    return Polynomial.var(name)


# -- formula construction ----------------------------------------------------

def _positivity(names) -> list:
    return [Atom(Polynomial.var(n), ">") for n in sorted(names)]


def _level(c) -> tuple[Polynomial, list]:
    if c is None or isinstance(c, str):
        name = c or "c"
        return Polynomial.var(name), [name]
    q = as_rational(c)
    if q <= 0:
        raise ValueError("level c must be positive")
    return Polynomial.const(q), []


def build_invariance_formula(sys: DynSystem, cand: LyapunovCandidate, c=None,
                             positive=None) -> Formula:
    """``forall x: positivity & (V > c^2 -> dV/dt < 0)``.

    ``c`` is a number or left symbolic. ``positive`` lists the free symbols
    assumed positive; by default the free system parameters and ``c``.
    """
    cp, cfree = _level(c if c is not None else cand.level_var)
    Vd = lie_derivative_free(cand.V, sys)
    body = implies(Atom(cand.V - cp * cp, ">"), Atom(Vd, "<"))
    pos = _default_positive(sys, cand, cfree) if positive is None else list(positive)
    matrix = And(_positivity(pos) + [body]) if pos else body
    return forall(sys.state_vars, matrix)


def build_convergence_formula(sys: DynSystem, cand: LyapunovCandidate, alpha_var: str = "alpha",
                              c=None, positive=None) -> Formula:
    """``exists alpha forall x: alpha > 0 & positivity & dV/dt <= -alpha (V - c^2)``."""
    cp, cfree = _level(c if c is not None else cand.level_var)
    Vd = lie_derivative_free(cand.V, sys)
    a = Polynomial.var(alpha_var)
    atom = Atom(Vd + a * (cand.V - cp * cp), "<=")
    pos = _default_positive(sys, cand, cfree) if positive is None else list(positive)
    inner = forall(sys.state_vars, And(_positivity([alpha_var] + pos) + [atom]))
    return Quantifier("E", alpha_var, inner)


def _default_positive(sys, cand, cfree) -> list:
    free = set(sys.params) | set(cfree)
    for v in cand.V.variables:
        if v not in sys.state_vars and v != "x30" and v not in free:
            free.add(v)
    return sorted(free)


def build_formula(sys, cand, c=None, method: str = "invariance") -> Formula:
    if method in ("invariance", "eq4"):
        return build_invariance_formula(sys, cand, c)
    if method in ("convergence", "eq5"):
        return build_convergence_formula(sys, cand, c=c)
    raise ValueError(f"unknown formula kind {method!r}")


# -- closed forms -------------------------------------------------------------

@dataclass(frozen=True)
class ClosedForm:
    """``c = sqrt(c_squared)`` with an exact rational ``c_squared``."""

    c_squared: mpq
    case: int
    expression: str

    @property
    def value(self) -> float:
        with gmpy2.context(gmpy2.get_context(), precision=200):
            return float(gmpy2.sqrt(mpfr(self.c_squared)))

    def __float__(self) -> float:
        return self.value


def _positive_rationals(*vals):
    out = [as_rational(v) for v in vals]
    if any(v <= 0 for v in out):
        raise ValueError("parameters must be positive")
    return out


def _region(s, b) -> int:
    if s >= 1 and b >= 2:
        return 1
    if 2 * s > b and b < 2:
        return 2
    if 2 * s <= b and s < 1:
        return 3
    raise AssertionError("parameter regions cover the positive quadrant")


def closed_form_sphere_bound(s, r, b) -> ClosedForm:
    """Smallest invariant sphere about ``(0, 0, r+s)`` for the Lorenz system."""
    s, r, b = _positive_rationals(s, r, b)
    case = _region(s, b)
    if case == 1:
        return ClosedForm((s + r) ** 2 * b ** 2 / (4 * (b - 1)), 1, "(s+r)*b/(2*sqrt(b-1))")
    if case == 2:
        return ClosedForm((r + s) ** 2, 2, "r+s")
    return ClosedForm((s + r) ** 2 * b ** 2 / (4 * s * (b - s)), 3, "(s+r)*b/(2*sqrt(s*(b-s)))")


def closed_form_ellipse_bound(s, r, b) -> ClosedForm:
    """Smallest invariant level of ``r x1^2 + s x2^2 + s (x3-2r)^2``."""
    s, r, b = _positive_rationals(s, r, b)
    case = _region(s, b)
    if case == 1:
        return ClosedForm(b ** 2 * r ** 2 * s / (b - 1), 1, "b*r*sqrt(s/(b-1))")
    if case == 2:
        return ClosedForm(4 * r ** 2 * s, 2, "2*r*sqrt(s)")
    return ClosedForm(b ** 2 * r ** 2 / (b - s), 3, "b*r/sqrt(b-s)")


# -- biquadratic bound curves --------------------------------------------------

@dataclass(frozen=True)
class Biquadratic:
    """``a2 c^4 + a1 c^2 + a0 = 0`` with coefficients polynomial in ``x30``.
    ``interval_factor`` is negative exactly on the validity interval."""

    a0: Polynomial
    a1: Polynomial
    a2: Polynomial
    interval_factor: Polynomial
    name: str = ""

    def coefficients(self, x30) -> tuple[mpq, mpq, mpq]:
        q = as_rational(x30)
        return tuple(p.evaluate({"x30": q}) for p in (self.a0, self.a1, self.a2))

    def validity_interval(self) -> tuple[float, float]:
        lo, hi = _quadratic_roots_exact(self.interval_factor)
        return float(lo), float(hi)

    def validity_interval_exact(self):
        """Endpoints as ``(center, radicand)`` pairs meaning ``center -/+ sqrt(radicand)``."""
        c2, c1, c0 = (self.interval_factor.coefficient("x30", k).constant_value() for k in (2, 1, 0))
        center = -c1 / (2 * c2)
        rad = (c1 * c1 - 4 * c2 * c0) / (4 * c2 * c2)
        return center, rad

    def is_valid(self, x30) -> bool:
        return self.interval_factor.evaluate({"x30": as_rational(x30)}) < 0

    def solve_largest_c(self, x30) -> float:
        """``sqrt`` of the largest positive root in ``c^2``."""
        if not self.is_valid(x30):
            raise NoRealRoot(f"x30={float(x30):g} is outside the validity interval "
                             f"({self.validity_interval()[0]:.6g}, {self.validity_interval()[1]:.6g})")
        a0, a1, a2 = self.coefficients(x30)
        y = _largest_root(a2, a1, a0)
        if y is None or y <= 0:
            raise NoRealRoot(f"no positive root at x30={float(x30):g}")
        with gmpy2.context(gmpy2.get_context(), precision=200):
            return float(gmpy2.sqrt(y))

    def __call__(self, x30) -> float:
        return self.solve_largest_c(x30)


def _largest_root(a2: mpq, a1: mpq, a0: mpq):
    with gmpy2.context(gmpy2.get_context(), precision=200):
        if a2 == 0:
            return None if a1 == 0 else mpfr(-a0 / a1)
        disc = a1 * a1 - 4 * a2 * a0
        if disc < 0:
            return None
        sq = gmpy2.sqrt(mpfr(disc))
        roots = [(-mpfr(a1) + sq) / (2 * mpfr(a2)), (-mpfr(a1) - sq) / (2 * mpfr(a2))]
        return max(roots)


def _quadratic_roots_exact(p: Polynomial):
    c2, c1, c0 = (p.coefficient("x30", k).constant_value() for k in (2, 1, 0))
    with gmpy2.context(gmpy2.get_context(), precision=200):
        sq = gmpy2.sqrt(mpfr(c1 * c1 - 4 * c2 * c0))
        r1 = (-mpfr(c1) - sq) / (2 * mpfr(c2))
        r2 = (-mpfr(c1) + sq) / (2 * mpfr(c2))
        return min(r1, r2), max(r1, r2)


def _x30_poly(text: str) -> Polynomial:
    from .parsing import parse_polynomial
    return parse_polynomial(text)


def biquadratic_sphere() -> Biquadratic:
    """Bound curve for unit spheres about ``(0, 0, x30)``, Lorenz ``s=10, r=28, b=8/3``."""
    return Biquadratic(
        _x30_poly("4096*x30^4"),
        _x30_poly("384*x30^2*(3*x30^2 - 228*x30 + 4762)"),
        _x30_poly("9*(x30^2 - 76*x30 + 1404)*(9*x30^2 - 684*x30 + 13436)"),
        _x30_poly("x30^2 - 76*x30 + 1404"),
        "sphere-center",
    )


def biquadratic_ellipse() -> Biquadratic:
    """Bound curve for ``28 x1^2 + 10 x2^2 + 10 (x3-x30)^2``, same parameters."""
    return Biquadratic(
        _x30_poly("3211264*x30^4"),
        _x30_poly("10752*x30^2*(3*x30^2 - 336*x30 + 10612)"),
        _x30_poly("9*(x30^2 - 112*x30 + 3024)*(9*x30^2 - 1008*x30 + 29456)"),
        _x30_poly("x30^2 - 112*x30 + 3024"),
        "ellipse-center",
    )


def minimize_center(bound_fn: Callable[[float], float], interval: tuple[float, float],
                    tol: float = 1e-4, margin: float = 1e-3) -> tuple[float, float]:
    """Golden-section minimum of ``bound_fn`` on the open ``interval``.

    The function is assumed unimodal there. Probes where it is undefined
    count as ``+inf``; the bracket is shrunk away from the endpoints until
    its middle point is below both ends.
    """
    lo, hi = interval
    if not hi > lo:
        raise BracketError("empty interval")

    def f(x):
        try:
            return float(bound_fn(x))
        except NoRealRoot:
            return math.inf

    width = hi - lo
    a, b = lo + margin * width, hi - margin * width
    mid = 0.5 * (a + b)
    fm = f(mid)
    for _ in range(60):
        if f(a) > fm and f(b) > fm:
            break
        # fall back to a coarse scan for a better middle point
        xs = np.linspace(a, b, 41)[1:-1]
        vals = [f(x) for x in xs]
        k = int(np.argmin(vals))
        mid, fm = float(xs[k]), vals[k]
        if f(a) > fm and f(b) > fm:
            break
        margin *= 0.5
        a, b = lo + margin * width, hi - margin * width
    else:
        raise BracketError("could not bracket a minimum")
    res = minimize_scalar(f, bracket=(a, mid, b), method="golden",
                          options={"xtol": tol / (2 * max(abs(mid), 1.0))})
    return float(res.x), float(res.fun)


# -- ellipsoids ---------------------------------------------------------------

@dataclass(frozen=True)
class EllipsoidBound:
    """``p1 x1^2 + p2 x2^2 + p3 (x3 - x30)^2 <= c^2``."""

    p1: float
    p2: float
    p3: float
    x30: float
    c: float

    def __post_init__(self):
        if min(self.p1, self.p2, self.p3) <= 0:
            raise ValueError("ellipsoid weights must be positive")
        if not self.c > 0:
            raise ValueError("ellipsoid level c must be positive")

    def V(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.p1 * x[..., 0] ** 2 + self.p2 * x[..., 1] ** 2 + self.p3 * (x[..., 2] - self.x30) ** 2

    def contains(self, x) -> np.ndarray | bool:
        return self.V(x) <= self.c ** 2

    @property
    def volume(self) -> float:
        return ellipsoid_volume(self)

    @property
    def semi_axes(self) -> tuple[float, float, float]:
        return tuple(self.c / math.sqrt(p) for p in (self.p1, self.p2, self.p3))

    def reparametrized(self, lam: float) -> "EllipsoidBound":
        """The same point set written with weights ``lam * p``."""
        return EllipsoidBound(lam * self.p1, lam * self.p2, lam * self.p3, self.x30, math.sqrt(lam) * self.c)

    def scaled(self, lam: float) -> "EllipsoidBound":
        """Same shape and center with every semi-axis multiplied by ``lam``."""
        return EllipsoidBound(self.p1, self.p2, self.p3, self.x30, lam * self.c)

    def candidate(self) -> LyapunovCandidate:
        return quadratic_candidate(_exactish(self.p1), _exactish(self.p2), _exactish(self.p3),
                                   _exactish(self.x30), "custom")

    def as_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "p3": self.p3, "x30": self.x30, "c": self.c}


def _exactish(v) -> mpq:
    """Shortest decimal rational that rounds to the float ``v``."""
    return mpq(Fraction(repr(float(v))))


def ellipsoid_volume(e: EllipsoidBound) -> float:
    return 4.0 * PI / 3.0 * e.c ** 3 / math.sqrt(e.p1 * e.p2 * e.p3)


def union_contains(es: Sequence[EllipsoidBound], point) -> bool:
    return any(bool(e.contains(point)) for e in es)


_PLANES = {"x1x2": (0, 1), "x1x3": (0, 2), "x2x3": (1, 2)}


def plane_axes(plane: str) -> tuple[int, int]:
    key = plane.replace(",", "").replace("(", "").replace(")", "").replace(" ", "")
    if key not in _PLANES:
        raise ValueError(f"plane must be one of {', '.join(_PLANES)}")
    return _PLANES[key]


def _projected(e: EllipsoidBound, i: int, j: int):
    """Center and semi-axes of the shadow of ``e`` on the coordinate plane ``(i, j)``."""
    center = (0.0, 0.0, e.x30)
    ax = e.semi_axes
    return (center[i], center[j]), (ax[i], ax[j])


def union_projection_outline(es: Sequence[EllipsoidBound], plane: str = "x1x3",
                             resolution: int = 400) -> list[np.ndarray]:
    """Boundary polylines of the union of the projected ellipses, traced on
    a ``resolution x resolution`` raster of the bounding box."""
    import contourpy

    if not es:
        raise ValueError("outline of an empty union")
    i, j = plane_axes(plane)
    boxes = []
    for e in es:
        (ci, cj), (ai, aj) = _projected(e, i, j)
        boxes.append((ci - ai, ci + ai, cj - aj, cj + aj))
    boxes = np.array(boxes)
    lo_i, hi_i = boxes[:, 0].min(), boxes[:, 1].max()
    lo_j, hi_j = boxes[:, 2].min(), boxes[:, 3].max()
    pad_i, pad_j = 0.05 * (hi_i - lo_i), 0.05 * (hi_j - lo_j)
    u = np.linspace(lo_i - pad_i, hi_i + pad_i, resolution)
    w = np.linspace(lo_j - pad_j, hi_j + pad_j, resolution)
    U, W = np.meshgrid(u, w)
    # smallest normalized level over the union; the union boundary is level 1
    level = np.full(U.shape, np.inf)
    for e in es:
        (ci, cj), (ai, aj) = _projected(e, i, j)
        level = np.minimum(level, ((U - ci) / ai) ** 2 + ((W - cj) / aj) ** 2)
    gen = contourpy.contour_generator(u, w, level)
    return [np.asarray(line) for line in gen.lines(1.0)]


# -- bisection on ground instances ------------------------------------------------

@dataclass
class BoundResult:
    c: float
    certificate: str
    candidate: str = "custom"
    x30: float | None = None
    volume: float | None = None
    wall_time: float = 0.0
    params: dict = field(default_factory=dict)
    bracket: tuple | None = None
    decisions: int = 0
    method: str = "invariance"

    def as_json(self, include_time: bool = True) -> dict:
        out = {
            "candidate": self.candidate,
            "params": {k: _jsonable(v) for k, v in sorted(self.params.items())},
            "c": self.c,
            "x30": self.x30,
            "volume": self.volume,
            "certificate": self.certificate,
        }
        if include_time:
            out["wall_time_ms"] = round(1000 * self.wall_time, 3)
        return out


def _jsonable(v):
    if isinstance(v, (int, float, str)) or v is None:
        return v
    return float(v)


def ground_decider(sys: DynSystem, cand: LyapunovCandidate, method: str = "invariance",
                   options: QEOptions | None = None) -> Callable[[mpq], bool]:
    """``c -> truth`` of the chosen formula; candidate and system must have
    no free symbols besides the state variables."""
    free = (cand.V.variables | set().union(*(p.variables for p in sys.rhs))) - set(sys.state_vars)
    if free:
        raise ValueError(f"ground instance expected; free symbols: {', '.join(sorted(free))}")

    def ok(c) -> bool:
        return decide(build_formula(sys, cand, as_rational(c), method), options)

    return ok


def bisection_bound(sys: DynSystem, cand: LyapunovCandidate, c_interval, tol: float = 1e-3,
                    method: str = "invariance", options: QEOptions | None = None,
                    check_bracket: bool = True) -> BoundResult:
    """Feasibility threshold of ``c`` by bisection with exact dyadic probes.

    Requires the formula to be false at the lower end and true at the upper
    end. The reported ``c`` is the upper end of the final bracket, which is
    certified feasible.
    """
    t0 = time.perf_counter()
    ok = ground_decider(sys, cand, method, options)
    lo, hi = (as_rational(v) for v in c_interval)
    if not 0 < lo < hi:
        raise BracketError("need 0 < c_lo < c_hi")
    n = 0
    if check_bracket:
        hi_ok = ok(hi)
        lo_ok = ok(lo)
        n += 2
        if hi_ok == lo_ok:
            what = "feasible" if hi_ok else "infeasible"
            raise BracketError(f"both ends of [{float(lo):g}, {float(hi):g}] are {what}; "
                               f"{'lower c_lo' if hi_ok else 'raise c_hi'} to bracket the threshold")
    tol_q = as_rational(tol)
    while hi - lo > tol_q:
        mid = (lo + hi) / 2
        n += 1
        if ok(mid):
            hi = mid
        else:
            lo = mid
    res = BoundResult(float(hi), "bisection", cand.name, bracket=(float(lo), float(hi)), decisions=n,
                      method=method)
    res.wall_time = time.perf_counter() - t0
    return res


def find_bound(sys: DynSystem, cand: LyapunovCandidate, tol: float = 1e-3, method: str = "invariance",
               c_start: Number = 1, c_max: Number = 10 ** 4, options: QEOptions | None = None) -> BoundResult:
    """Bisection with automatic bracketing by doubling from ``c_start``.

    Raises :class:`InfeasibleError` when the formula is false at ``c_max``
    (feasibility is monotone in ``c``).
    """
    t0 = time.perf_counter()
    ok = ground_decider(sys, cand, method, options)
    c_max = as_rational(c_max)
    n = 1
    if not ok(c_max):
        raise InfeasibleError(f"no feasible level up to c={float(c_max):g}")
    hi = as_rational(c_start)
    lo = None
    while hi < c_max:
        n += 1
        if ok(hi):
            break
        lo = hi
        hi = hi * 2
    else:
        hi = c_max
    if lo is None:
        lo = hi / 2
        while lo > as_rational(tol):
            n += 1
            if not ok(lo):
                break
            hi, lo = lo, lo / 2
        else:
            lo = mpq(0)
    if lo == 0:
        lo = as_rational(tol) / 2
    res = bisection_bound(sys, cand, (lo, hi), tol, method, options, check_bracket=False)
    res.decisions += n
    res.wall_time = time.perf_counter() - t0
    return res


# -- Monte Carlo over general ellipsoids -------------------------------------------

@dataclass(frozen=True)
class SearchRanges:
    p: tuple = (0.1, 5.0)
    x30: tuple = (10.0, 80.0)


@dataclass
class MonteCarloResult:
    best: EllipsoidBound | None
    feasible: list
    samples: list
    wall_time: float = 0.0

    @property
    def n_feasible(self) -> int:
        return len(self.feasible)


def _round_sample(v: float, digits: int) -> mpq:
    return mpq(Fraction(f"{v:.{digits}f}"))


def monte_carlo_search(sys: DynSystem | None = None, ranges: SearchRanges = SearchRanges(),
                       n_samples: int = 500, seed: int = 0, constrain_p2_eq_p3: bool = True,
                       min_gap: float = 0.0, tol: float = 1e-3, method: str = "invariance",
                       c_max: Number = 10 ** 4, digits: int = 3, progress=None) -> MonteCarloResult:
    """Random general ellipsoids ``p1 x1^2 + p2 x2^2 + p3 (x3-x30)^2``.

    Weights are uniform in ``ranges.p`` and the center in ``ranges.x30``,
    rounded to ``digits`` decimals so the exact decisions stay small. With
    ``constrain_p2_eq_p3`` the third weight copies the second; otherwise
    samples with ``|p2 - p3| < min_gap`` are redrawn. Each sample gets its
    smallest feasible level by bisection (or is recorded infeasible).
    """
    t0 = time.perf_counter()
    sys = sys or lorenz({"s": 10, "r": 28, "b": "8/3"})
    rng = np.random.default_rng(seed)
    feasible: list[EllipsoidBound] = []
    samples = []
    for k in range(n_samples):
        while True:
            p1, p2, p3 = rng.uniform(ranges.p[0], ranges.p[1], size=3)
            x30 = rng.uniform(ranges.x30[0], ranges.x30[1])
            if constrain_p2_eq_p3:
                p3 = p2
            q = [_round_sample(v, digits) for v in (p1, p2, p3, x30)]
            if constrain_p2_eq_p3 or abs(q[1] - q[2]) >= as_rational(min_gap):
                break
        cand = quadratic_candidate(q[0], q[1], q[2], q[3], "general")
        try:
            res = find_bound(sys, cand, tol=tol, method=method, c_max=c_max)
        except InfeasibleError:
            samples.append({"index": k, "p": [float(v) for v in q[:3]], "x30": float(q[3]), "c": None})
            if progress:
                progress(k, None)
            continue
        e = EllipsoidBound(float(q[0]), float(q[1]), float(q[2]), float(q[3]), res.c)
        feasible.append(e)
        samples.append({"index": k, "p": [float(v) for v in q[:3]], "x30": float(q[3]), "c": res.c,
                        "volume": e.volume})
        if progress:
            progress(k, e)
    best = min(feasible, key=ellipsoid_volume) if feasible else None
    return MonteCarloResult(best, feasible, samples, time.perf_counter() - t0)


# -- reference table --------------------------------------------------------------

TABLE1 = (
    ("V1", EllipsoidBound(1, 1, 1, 38, 39.246), 2.532e5),
    ("V2", EllipsoidBound(1, 1, 1, 36.1177, 38.164), 2.328e5),
    ("V3", EllipsoidBound(28, 10, 10, 56, 182.895), 4.843e5),
    ("V4", EllipsoidBound(28, 10, 10, 52.563, 176.531), 4.355e5),
    ("V5", EllipsoidBound(1, 1.62, 1.62, 32.83, 43.956), 2.196e5),
)
