"""scikit-learn style wrappers around the bound searches.

``fit`` computes an enclosing ellipsoid for a dynamical system; ``predict``
labels points as inside (1) or outside (0) and ``decision_function`` gives
``V(x) - c^2``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_is_fitted

from .bounds import (EllipsoidBound, SearchRanges, find_bound, monte_carlo_search,
                     quadratic_candidate, union_contains)
from .system import DynSystem, lorenz


def _default_system() -> DynSystem:
    return lorenz({"s": 10, "r": 28, "b": "8/3"})


def _points(X) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"expected points with 3 coordinates, got {X.shape[1]}")
    return X


class EllipsoidBoundEstimator(BaseEstimator):
    """Smallest invariant level of ``p1 x1^2 + p2 x2^2 + p3 (x3-x30)^2``."""

    def __init__(self, p=(1, 1, 1), x30=38, tol=1e-3, method="invariance", c_max=10 ** 4):
        self.p = p
        self.x30 = x30
        self.tol = tol
        self.method = method
        self.c_max = c_max

    def fit(self, system: DynSystem | None = None, y=None):
        sys = system if isinstance(system, DynSystem) else _default_system()
        cand = quadratic_candidate(*[str(v) for v in self.p], str(self.x30), "custom")
        res = find_bound(sys, cand, tol=self.tol, method=self.method, c_max=self.c_max)
        p1, p2, p3 = (float(v) for v in self.p)
        self.ellipsoid_ = EllipsoidBound(p1, p2, p3, float(self.x30), res.c)
        self.c_ = res.c
        self.volume_ = self.ellipsoid_.volume
        self.result_ = res
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "ellipsoid_")
        X = _points(X)
        return self.ellipsoid_.V(X) - self.c_ ** 2

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) <= 0).astype(int)


class MonteCarloEllipsoidSearch(BaseEstimator):
    """Random search over general ellipsoids; keeps the volume minimizer and
    the union of all feasible ones."""

    def __init__(self, n_samples=500, seed=0, p_range=(0.1, 5.0), x30_range=(10.0, 80.0),
                 constrain_p2_eq_p3=True, min_gap=0.0, tol=1e-3, method="invariance"):
        self.n_samples = n_samples
        self.seed = seed
        self.p_range = p_range
        self.x30_range = x30_range
        self.constrain_p2_eq_p3 = constrain_p2_eq_p3
        self.min_gap = min_gap
        self.tol = tol
        self.method = method

    def fit(self, system: DynSystem | None = None, y=None):
        sys = system if isinstance(system, DynSystem) else _default_system()
        res = monte_carlo_search(sys, SearchRanges(tuple(self.p_range), tuple(self.x30_range)),
                                 self.n_samples, self.seed, self.constrain_p2_eq_p3, self.min_gap,
                                 self.tol, self.method)
        self.best_ = res.best
        self.feasible_ = res.feasible
        self.samples_ = res.samples
        return self

    def predict(self, X) -> np.ndarray:
        """1 where a point lies in the union of the feasible ellipsoids."""
        check_is_fitted(self, "feasible_")
        if not self.feasible_:
            raise NotFittedError("the search found no feasible ellipsoid")
        X = _points(X)
        return np.array([int(union_contains(self.feasible_, x)) for x in X])
