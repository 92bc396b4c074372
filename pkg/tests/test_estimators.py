import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qebounds.estimators import EllipsoidBoundEstimator, MonteCarloEllipsoidSearch
from qebounds.plotting import Overlay, render_svg
from qebounds.bounds import TABLE1


def test_bound_estimator_fit_predict():
    est = EllipsoidBoundEstimator(p=(1, 1, 1), x30=38).fit()
    assert abs(est.c_ - 39.246) < 2e-3
    assert list(est.predict([[0, 0, 38], [50, 0, 38]])) == [1, 0]
    assert est.decision_function([[0, 0, 38]])[0] < 0


def test_params_and_clone():
    est = EllipsoidBoundEstimator(p=(1, 2, 2), x30=30, tol=1e-2)
    assert est.get_params()["x30"] == 30
    twin = clone(est)
    assert twin.get_params() == est.get_params()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        EllipsoidBoundEstimator().predict([[0, 0, 0]])


def test_point_shape_checked():
    est = EllipsoidBoundEstimator().fit()
    with pytest.raises(ValueError):
        est.predict([[0, 0]])


def test_search_without_feasible():
    search = MonteCarloEllipsoidSearch(n_samples=2, seed=0, constrain_p2_eq_p3=False, min_gap=0.1).fit()
    assert search.feasible_ == []
    with pytest.raises(NotFittedError):
        search.predict([[0, 0, 30]])


def test_search_union_predict():
    search = MonteCarloEllipsoidSearch(n_samples=15, seed=3).fit()
    assert search.feasible_
    e = search.best_
    assert list(search.predict(np.array([[0, 0, e.x30], [1e4, 0, 0]]))) == [1, 0]


def test_svg_is_deterministic():
    es = [e for _, e, _ in TABLE1]
    a = render_svg(es, [Overlay(es[0], "V1", "blue")], "x1x3")
    b = render_svg(es, [Overlay(es[0], "V1", "blue")], "x1x3")
    assert a == b and a.startswith("<svg") and a.rstrip().endswith("</svg>")


def test_svg_needs_content():
    with pytest.raises(ValueError):
        render_svg()
