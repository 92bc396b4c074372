"""Floating-point oracles: fixed-step RK4 and randomized falsification."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .bounds import EllipsoidBound
from .formula import Atom, And, Formula, Not, Or, _Const, NEG, POS, ZERO, compile_ground
from .poly import Polynomial, as_rational
from .system import DynSystem


class IntegrationError(ArithmeticError):
    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dim) or (len(times), n, dim)
    h: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _vector_field(sys: DynSystem):
    """Vectorized ``f(X)`` for states stacked along the last axis."""
    if not sys.is_ground():
        raise ValueError("system parameters must be fixed before integration")
    names = sys.state_vars
    idx = {n: i for i, n in enumerate(names)}
    compiled = []
    for p in sys.rhs:
        compiled.append([(float(c), [(idx[w], e) for w, e in m]) for m, c in p.items()])

    def f(X):
        out = np.zeros_like(X)
        for k, terms in enumerate(compiled):
            acc = out[..., k]
            for c, mono in terms:
                t = np.full(X.shape[:-1], c)
                for i, e in mono:
                    t = t * X[..., i] ** e
                acc += t
        return out

    return f


def integrate_rk4(sys: DynSystem, x0, h: float = 1e-3, T: float = 1.0, record_every: int = 1,
                  monitor=None) -> Trajectory:
    """Classic fixed-step RK4 from ``x0`` (one state or a stack of states).

    ``monitor(t, X)`` is called after every step. A non-finite state raises
    :class:`IntegrationError` with the blow-up time.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    if T < h:
        raise ValueError(f"horizon T={T} is shorter than the step h={h}")
    f = _vector_field(sys)
    X = np.array(x0, dtype=float)
    n = int(round(T / h))
    times = [0.0]
    states = [X.copy()]
    for k in range(1, n + 1):
        with np.errstate(over="ignore", invalid="ignore"):  # caught by the finiteness check
            k1 = f(X)
            k2 = f(X + 0.5 * h * k1)
            k3 = f(X + 0.5 * h * k2)
            k4 = f(X + h * k3)
            X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = k * h
        if not np.all(np.isfinite(X)):
            raise IntegrationError(f"state became non-finite at t={t:g}", t)
        if monitor is not None:
            monitor(t, X)
        if k % record_every == 0 or k == n:
            times.append(t)
            states.append(X.copy())
    return Trajectory(np.array(times), np.array(states), h)


# -- positive invariance ----------------------------------------------------------

@dataclass
class InvarianceReport:
    invariant: bool
    max_excess: float
    n_starts: int
    T: float
    h: float
    diagnostic: str = ""

    def as_json(self) -> dict:
        return {"invariant": self.invariant, "max_excess": self.max_excess, "n_starts": self.n_starts,
                "T": self.T, "h": self.h, "diagnostic": self.diagnostic}


def ellipsoid_starts(e: EllipsoidBound, n: int, seed: int = 0, boundary_fraction: float = 0.5) -> np.ndarray:
    """``n`` start points: a share on the surface ``V = c^2`` (normalized
    Gaussian directions), the rest uniform in the interior."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    n_bd = int(round(boundary_fraction * n))
    radius = np.ones(n)
    radius[n_bd:] = rng.uniform(size=n - n_bd) ** (1.0 / 3.0)
    axes = np.array(e.semi_axes)
    X = d * axes * radius[:, None]
    X[:, 2] += e.x30
    return X


def check_positive_invariance(e: EllipsoidBound, sys: DynSystem, n_starts: int = 100, T: float = 50.0,
                              rel_tol: float = 1e-4, h: float = 1e-3, seed: int = 0) -> InvarianceReport:
    """Integrate from boundary and interior starts and watch ``V(x(t))``.

    Invariant means ``V <= c^2 (1 + rel_tol)`` along every trajectory at
    every step. ``max_excess`` is the largest ``V / c^2 - 1`` seen.
    """
    X0 = ellipsoid_starts(e, n_starts, seed)
    c2 = e.c ** 2
    worst = [float(np.max(e.V(X0) / c2 - 1.0))]

    def monitor(t, X):
        worst[0] = max(worst[0], float(np.max(e.V(X) / c2 - 1.0)))

    try:
        integrate_rk4(sys, X0, h, T, record_every=max(1, int(round(T / h))), monitor=monitor)
    except IntegrationError as err:
        return InvarianceReport(False, math.inf, n_starts, T, h, f"integration failed: {err}")
    ok = worst[0] <= rel_tol
    return InvarianceReport(ok, worst[0], n_starts, T, h,
                            "" if ok else f"trajectory left the ellipsoid (V/c^2 - 1 = {worst[0]:.3g})")


# -- falsification ------------------------------------------------------------------

@dataclass
class FalsificationReport:
    found: bool
    witness: dict | None
    samples_used: int

    def __post_init__(self):
        if self.found != (self.witness is not None):
            raise ValueError("witness must be present exactly when found")


def _compile_margin(f: Formula, names: Sequence[str], fixed: Mapping[str, float]):
    """Vectorized robustness: positive where ``f`` holds strictly, negative
    where it fails (atoms ``p > 0`` give ``p``, ``p < 0`` give ``-p``, ...)."""
    idx = {n: i for i, n in enumerate(names)}

    def poly_fn(p: Polynomial):
        terms = []
        for m, c in p.items():
            coef = float(c)
            mono = []
            for w, e in m:
                if w in idx:
                    mono.append((idx[w], e))
                elif w in fixed:
                    coef *= float(fixed[w]) ** e
                else:
                    raise ValueError(f"variable {w!r} is neither sampled nor fixed")
            terms.append((coef, mono))

        def g(X):
            out = np.zeros(X.shape[0])
            for coef, mono in terms:
                t = np.full(X.shape[0], coef)
                for i, e in mono:
                    t = t * X[:, i] ** e
                out += t
            return out

        return g

    def build(g):
        if isinstance(g, Atom):
            pf, mask = poly_fn(g.poly), g.mask
            if mask == POS:
                return pf
            if mask == NEG:
                return lambda X: -pf(X)
            if mask == POS | ZERO:
                return pf
            if mask == NEG | ZERO:
                return lambda X: -pf(X)
            if mask == ZERO:
                return lambda X: -np.abs(pf(X))
            return lambda X: np.abs(pf(X))
        if isinstance(g, _Const):
            v = 1.0 if g.value else -1.0
            return lambda X: np.full(X.shape[0], v)
        if isinstance(g, Not):
            inner = build(g.arg)
            return lambda X: -inner(X)
        if isinstance(g, (And, Or)):
            parts = [build(a) for a in g.args]
            red = np.minimum if isinstance(g, And) else np.maximum
            def h(X, parts=parts, red=red):
                out = parts[0](X)
                for p in parts[1:]:
                    out = red(out, p(X))
                return out
            return h
        raise ValueError("falsification needs a quantifier-free matrix")

    return build(f)


def _compile_truth(f: Formula, names: Sequence[str], fixed: Mapping[str, float]):
    """Exact truth of the matrix at float points (each float is read as the
    rational it represents, so cancellation cannot fake a counterexample)."""
    fn = compile_ground(f)
    base = {k: as_rational(v) for k, v in fixed.items()}

    def truth(X):
        out = np.empty(X.shape[0], dtype=bool)
        for k, row in enumerate(X):
            env = dict(base)
            env.update((n, as_rational(float(v))) for n, v in zip(names, row))
            out[k] = fn(env)
        return out

    return truth


def sample_falsify(matrix: Formula, box: Mapping[str, tuple[float, float]], n: int = 10_000,
                   seed: int = 0, kind: str = "forall", fixed: Mapping[str, float] | None = None,
                   refine: int = 20) -> FalsificationReport:
    """Search for a counterexample of ``forall box: matrix`` (or a witness of
    ``exists box: matrix`` with ``kind="exists"``).

    Samples are uniform in the box plus box corners, face centers and the
    origin; the ``refine`` most promising samples are then polished by a
    Nelder-Mead search on the robustness margin. Candidates are confirmed
    by exact evaluation at the (rational) float point.
    """
    if kind not in ("forall", "exists"):
        raise ValueError("kind must be 'forall' or 'exists'")
    fixed = dict(fixed or {})
    names = list(box)
    lo = np.array([box[v][0] for v in names], dtype=float)
    hi = np.array([box[v][1] for v in names], dtype=float)
    rng = np.random.default_rng(seed)
    X = lo + (hi - lo) * rng.uniform(size=(max(n, 0), len(names)))
    special = [np.zeros(len(names)), 0.5 * (lo + hi)]
    for k in range(min(len(names), 10)):
        for end in (lo, hi):
            p = 0.5 * (lo + hi)
            p[k] = end[k]
            special.append(p)
    if len(names) <= 10:
        for bits in range(2 ** len(names)):
            special.append(np.where([(bits >> k) & 1 for k in range(len(names))], hi, lo))
    X = np.vstack([np.array(special)[:, :len(names)], X]) if len(names) else X
    margin = _compile_margin(matrix, names, fixed)
    sign = 1.0 if kind == "forall" else -1.0  # minimize sign*margin to look for a violation
    score = sign * margin(X)
    truth = _compile_truth(matrix, names, fixed)
    order = np.argsort(score)
    used = len(X)

    def is_hit(x) -> bool:
        t = bool(truth(np.asarray(x)[None, :])[0])
        return (not t) if kind == "forall" else t

    for k in order[: max(refine, 1)]:
        if is_hit(X[k]):
            return FalsificationReport(True, dict(zip(names, map(float, X[k]))), used)
    for k in order[:refine]:
        res = minimize(lambda x: float(sign * margin(np.clip(x, lo, hi)[None, :])[0]), X[k],
                       method="Nelder-Mead", options={"maxiter": 400, "xatol": 1e-10, "fatol": 1e-12})
        used += res.nfev
        x = np.clip(res.x, lo, hi)
        if is_hit(x):
            return FalsificationReport(True, dict(zip(names, map(float, x))), used)
    return FalsificationReport(False, None, used)
