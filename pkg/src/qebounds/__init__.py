"""Quantifier elimination by virtual substitution, and invariant-set bounds
for polynomial dynamical systems built on it."""
from .bounds import (TABLE1, BoundResult, EllipsoidBound, InfeasibleError, LyapunovCandidate,
                     bisection_bound, biquadratic_ellipse, biquadratic_sphere, build_convergence_formula,
                     build_formula, build_invariance_formula, closed_form_ellipse_bound,
                     closed_form_sphere_bound, ellipsoid_volume, find_bound, lorenz_candidate,
                     minimize_center, monte_carlo_search, quadratic_candidate)
from .formula import (FALSE, TRUE, And, Atom, Not, Or, eval_ground, exists, forall, simplify_basic,
                      to_prenex)
from .parsing import parse, parse_polynomial, print_formula
from .poly import Polynomial
from .qe import DegreeTooHigh, QEOptions, QEOverflow, decide, qe, qe_with_stats
from .system import DynSystem, lie_derivative, load_system, lorenz, lorenz_standard, parse_system
from .verify import check_positive_invariance, integrate_rk4, sample_falsify

__version__ = "0.1.0"

__all__ = [
    "TABLE1", "BoundResult", "EllipsoidBound", "InfeasibleError", "LyapunovCandidate", "bisection_bound",
    "biquadratic_ellipse", "biquadratic_sphere", "build_convergence_formula", "build_formula",
    "build_invariance_formula", "closed_form_ellipse_bound", "closed_form_sphere_bound", "ellipsoid_volume",
    "find_bound", "lorenz_candidate", "minimize_center", "monte_carlo_search", "quadratic_candidate",
    "FALSE", "TRUE", "And", "Atom", "Not", "Or", "eval_ground", "exists", "forall", "simplify_basic",
    "to_prenex", "parse", "parse_polynomial", "print_formula", "Polynomial", "DegreeTooHigh", "QEOptions",
    "QEOverflow", "decide", "qe", "qe_with_stats", "DynSystem", "lie_derivative", "load_system", "lorenz",
    "lorenz_standard", "parse_system", "check_positive_invariance", "integrate_rk4", "sample_falsify",
]
