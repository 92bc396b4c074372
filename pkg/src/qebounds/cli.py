"""Command-line interface: ``qebounds {qe,bound,montecarlo,plot,verify}``.

Results go to stdout (or ``--json FILE``) as sorted-key JSON. Timing lines
go to stderr so that JSON output is byte-identical across runs.

Exit codes: 0 success, 1 usage error or infeasible problem, 2 engine
limitation (degree too high or formula overflow).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .bounds import (TABLE1, BoundResult, BracketError, EllipsoidBound, InfeasibleError, NoRealRoot,
                     SearchRanges, biquadratic_ellipse, biquadratic_sphere,
                     closed_form_ellipse_bound, closed_form_sphere_bound, ellipsoid_volume, find_bound,
                     lorenz_candidate, minimize_center, monte_carlo_search, plane_axes)
from .formula import simplify_basic
from .parsing import ParseError, parse, print_formula
from .plotting import Overlay, render_svg
from .qe import DegreeTooHigh, QEOptions, QEOverflow, qe_with_stats
from .system import DynSystem, SystemFileError, load_system, lorenz, lorenz_standard
from .verify import check_positive_invariance

EXIT_OK, EXIT_USAGE, EXIT_ENGINE = 0, 1, 2
CANDIDATES = ("sphere-fixed", "sphere-center", "ellipse-fixed", "ellipse-center", "general", "custom")
METHODS = ("auto", "closed-form", "biquadratic", "bisection")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated command line."""

    subcommand: str
    system: str | None = None
    inputs: list = field(default_factory=list)
    candidate: str = "sphere-fixed"
    method: str = "auto"
    formula: str = "invariance"
    p: tuple | None = None
    x30: str | None = None
    c: str | None = None
    minimize: bool = False
    tol: float = 1e-3
    seed: int = 0
    n: int = 500
    p_range: tuple = (0.1, 5.0)
    x30_range: tuple = (10.0, 80.0)
    unconstrained: bool = False
    min_gap: float = 0.1
    json_out: str | None = None
    svg_out: str | None = None
    plane: str = "x1x3"
    table_row: str | None = None
    scale: float = 1.0
    n_starts: int = 100
    horizon: float = 50.0
    step: float = 1e-3
    rel_tol: float = 1e-4
    ellipsoids: list = field(default_factory=list)
    verbose: bool = False

    def validate(self) -> "RunConfig":
        if self.tol <= 0:
            raise UsageError("--tol must be positive")
        if self.n < 0:
            raise UsageError("--n must be non-negative")
        try:
            plane_axes(self.plane)
        except ValueError as e:
            raise UsageError(str(e)) from None
        if self.candidate not in CANDIDATES:
            raise UsageError(f"unknown candidate {self.candidate!r}")
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}")
        if self.formula not in ("invariance", "convergence"):
            raise UsageError("--formula must be 'invariance' or 'convergence'")
        if self.p is not None and len(self.p) != 3:
            raise UsageError("--p takes three weights")
        if self.p_range[0] <= 0 or self.p_range[0] >= self.p_range[1]:
            raise UsageError("--p-range needs 0 < lo < hi")
        if self.x30_range[0] >= self.x30_range[1]:
            raise UsageError("--x30-range needs lo < hi")
        for k in ("n_starts", "horizon", "step", "rel_tol"):
            if getattr(self, k) <= 0:
                raise UsageError(f"--{k.replace('_', '-')} must be positive")
        if self.scale <= 0:
            raise UsageError("--scale must be positive")
        return self


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qebounds", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true", help="engine statistics on stderr")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--system", help="system file (default: Lorenz with s=10, r=28, b=8/3)")
        p.add_argument("--json", dest="json_out", metavar="OUT", help="write JSON here instead of stdout")

    q = sub.add_parser("qe", help="eliminate quantifiers from a formula file",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    q.add_argument("inputs", nargs=1, metavar="FORMULA_FILE")

    b = sub.add_parser("bound", help="smallest invariant level for one candidate",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(b)
    b.add_argument("--candidate", default="sphere-fixed", choices=CANDIDATES)
    b.add_argument("--method", default="auto", choices=METHODS,
                   help="auto: closed-form for *-fixed, biquadratic for *-center, bisection otherwise")
    b.add_argument("--formula", default="invariance", choices=("invariance", "convergence"),
                   help="which certificate bisection decides")
    b.add_argument("--p", nargs=3, metavar=("P1", "P2", "P3"), help="weights for custom/general")
    b.add_argument("--x30", help="center offset")
    b.add_argument("--minimize", action="store_true", help="optimize the center offset")
    b.add_argument("--tol", type=float, default=1e-3)

    m = sub.add_parser("montecarlo", help="random search over general ellipsoids",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(m)
    m.add_argument("--n", type=int, default=500, help="number of samples")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--tol", type=float, default=1e-3)
    m.add_argument("--p-range", nargs=2, type=float, default=(0.1, 5.0), metavar=("LO", "HI"))
    m.add_argument("--x30-range", nargs=2, type=float, default=(10.0, 80.0), metavar=("LO", "HI"))
    m.add_argument("--unconstrained", action="store_true", help="draw p3 independently of p2")
    m.add_argument("--min-gap", type=float, default=0.1, help="minimum |p2 - p3| when unconstrained")
    m.add_argument("--svg", dest="svg_out", metavar="OUT", help="also plot the union")
    m.add_argument("--plane", default="x1x3")

    pl = sub.add_parser("plot", help="SVG projection of montecarlo results or single ellipsoids",
                        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    pl.add_argument("inputs", nargs="*", metavar="RESULTS_JSON")
    pl.add_argument("--ellipsoid", dest="ellipsoids", nargs=5, action="append", default=[],
                    metavar=("P1", "P2", "P3", "X30", "C"), help="extra ellipsoid (repeatable)")
    pl.add_argument("--svg", dest="svg_out", metavar="OUT", required=True)
    pl.add_argument("--plane", default="x1x3")

    v = sub.add_parser("verify", help="integration check of positive invariance",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common(v)
    v.add_argument("--table-row", choices=[r[0] for r in TABLE1], help="use a reference ellipsoid")
    v.add_argument("--p", nargs=3, metavar=("P1", "P2", "P3"))
    v.add_argument("--x30")
    v.add_argument("--c")
    v.add_argument("--scale", type=float, default=1.0, help="multiply the level c")
    v.add_argument("--n-starts", type=int, default=100)
    v.add_argument("--horizon", type=float, default=50.0, help="integration time T")
    v.add_argument("--step", type=float, default=1e-3, help="RK4 step h")
    v.add_argument("--rel-tol", type=float, default=1e-4)
    v.add_argument("--seed", type=int, default=0)
    return ap


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    kw = {k: v for k, v in vars(ns).items() if v is not None and k in RunConfig.__dataclass_fields__}
    for k in ("p", "p_range", "x30_range"):
        if k in kw:
            kw[k] = tuple(kw[k])
    return RunConfig(**kw).validate()


# -- helpers -----------------------------------------------------------------------

def _system(cfg: RunConfig) -> DynSystem:
    if cfg.system is None:
        return lorenz_standard()
    try:
        return load_system(cfg.system)
    except OSError as e:
        raise UsageError(f"cannot read system file: {e}") from None
    except SystemFileError as e:
        raise UsageError(f"{cfg.system}: {e}") from None


def _lorenz_params(sys: DynSystem) -> dict:
    """``s, r, b`` when ``sys`` is a fully fixed Lorenz system."""
    fixed = sys.meta.get("fixed", {})
    if set(fixed) >= {"s", "r", "b"} and lorenz({k: fixed[k] for k in "srb"}).rhs == sys.rhs:
        return {k: fixed[k] for k in "srb"}
    raise UsageError("closed forms and bound curves need a Lorenz system with s, r, b fixed")


def _emit(cfg: RunConfig, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if cfg.json_out:
        Path(cfg.json_out).write_text(text)
    else:
        sys.stdout.write(text)


def _timing(label: str, t0: float) -> None:
    print(f"{label}: {1000 * (time.perf_counter() - t0):.1f} ms", file=sys.stderr)


# -- subcommands -------------------------------------------------------------------

def cmd_qe(cfg: RunConfig) -> int:
    path = cfg.inputs[0]
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read formula file: {e}") from None
    try:
        f = parse(text)
    except ParseError as e:
        raise UsageError(f"{path}: {e}") from None
    t0 = time.perf_counter()
    out, stats = qe_with_stats(f, QEOptions(verbose=cfg.verbose))
    print(print_formula(simplify_basic(out)))
    if cfg.verbose:
        print(f"substitutions={stats.substitutions} univariate={stats.univariate_calls} "
              f"even_reductions={stats.even_reductions} max_atoms={stats.max_atoms_seen}", file=sys.stderr)
        _timing("qe", t0)
    return EXIT_OK


def _bound_result(cfg: RunConfig, sys_: DynSystem) -> BoundResult:
    name, method = cfg.candidate, cfg.method
    if method == "auto":
        method = {"sphere-fixed": "closed-form", "ellipse-fixed": "closed-form",
                  "sphere-center": "biquadratic", "ellipse-center": "biquadratic"}.get(name, "bisection")
    fixed = dict(sys_.meta.get("fixed", {}))
    t0 = time.perf_counter()
    if method == "closed-form":
        P = _lorenz_params(sys_)
        if name == "sphere-fixed":
            cf = closed_form_sphere_bound(P["s"], P["r"], P["b"])
            x30 = float(P["r"] + P["s"])
            e = EllipsoidBound(1, 1, 1, x30, cf.value)
        elif name == "ellipse-fixed":
            cf = closed_form_ellipse_bound(P["s"], P["r"], P["b"])
            x30 = float(2 * P["r"])
            e = EllipsoidBound(float(P["r"]), float(P["s"]), float(P["s"]), x30, cf.value)
        else:
            raise UsageError(f"no closed form for candidate {name!r}")
        return BoundResult(cf.value, f"closed-form (case {cf.case}): c = {cf.expression}, c^2 = {cf.c_squared}", name, x30,
                           ellipsoid_volume(e), time.perf_counter() - t0, fixed)
    if method == "biquadratic":
        P = _lorenz_params(sys_)
        if (P["s"], P["r"], 3 * P["b"]) != (10, 28, 8):
            raise UsageError("bound curves are tabulated for s=10, r=28, b=8/3 only")
        if name == "sphere-center":
            curve, weights = biquadratic_sphere(), (1.0, 1.0, 1.0)
        elif name == "ellipse-center":
            curve, weights = biquadratic_ellipse(), (28.0, 10.0, 10.0)
        else:
            raise UsageError(f"no bound curve for candidate {name!r}")
        if cfg.minimize:
            x30, c = minimize_center(curve, curve.validity_interval(), tol=1e-6)
        else:
            if cfg.x30 is None:
                raise UsageError("biquadratic needs --x30 or --minimize")
            x30 = float(cfg.x30)
            c = curve(cfg.x30)
        lo, hi = curve.validity_interval()
        res = BoundResult(c, f"biquadratic curve, x30 valid in ({lo:.6f}, {hi:.6f})", name, x30,
                          ellipsoid_volume(EllipsoidBound(*weights, x30, c)), time.perf_counter() - t0, fixed)
        return res
    # bisection on ground instances
    if cfg.minimize:
        raise UsageError("--minimize is available with the biquadratic method only")
    if name in ("custom", "general") and cfg.p is None:
        raise UsageError(f"candidate {name!r} needs --p P1 P2 P3")
    if name in ("custom", "general", "sphere-center", "ellipse-center") and cfg.x30 is None:
        raise UsageError(f"candidate {name!r} needs --x30")
    cand = lorenz_candidate(name, cfg.x30, cfg.p, fixed)
    extra = cand.V.variables - set(sys_.state_vars)
    if extra:
        raise UsageError(f"candidate has unfixed symbols: {', '.join(sorted(extra))}")
    res = find_bound(sys_, cand, tol=cfg.tol, method=cfg.formula)
    V = cand.V
    w = [float(V.coefficient("x1", 2).constant_value()), float(V.coefficient("x2", 2).constant_value()),
         float(V.coefficient("x3", 2).constant_value())]
    x30 = -float(V.coefficient("x3", 1).constant_value()) / (2 * w[2])
    res.x30 = x30
    res.volume = ellipsoid_volume(EllipsoidBound(*w, x30, res.c))
    res.params = fixed
    res.certificate = f"bisection ({cfg.formula}), bracket [{res.bracket[0]:.6f}, {res.bracket[1]:.6f}]"
    return res


def cmd_bound(cfg: RunConfig) -> int:
    sys_ = _system(cfg)
    try:
        res = _bound_result(cfg, sys_)
    except (InfeasibleError, NoRealRoot, BracketError) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_USAGE
    _emit(cfg, res.as_json(include_time=False))
    print(f"bound: {1000 * res.wall_time:.1f} ms", file=sys.stderr)
    return EXIT_OK


def _table_rows(best: EllipsoidBound | None) -> list:
    rows = [{"name": n, **e.as_dict(), "volume": ellipsoid_volume(e), "reference_volume": ref}
            for n, e, ref in TABLE1]
    if best is not None:
        rows.append({"name": "best", **best.as_dict(), "volume": ellipsoid_volume(best)})
    return rows


def _overlays(best: EllipsoidBound | None) -> list:
    ref = {n: e for n, e, _ in TABLE1}
    out = [Overlay(ref["V1"], "V1 sphere", "#1f77b4"), Overlay(ref["V3"], "V3 ellipsoid", "#2ca02c", "6,3")]
    if best is not None:
        out.append(Overlay(best, "best sample", "#d62728"))
    return out


def cmd_montecarlo(cfg: RunConfig) -> int:
    if cfg.n == 0:
        print("empty union: no samples requested (n=0)", file=sys.stderr)
        return EXIT_USAGE
    sys_ = _system(cfg)
    def progress(k, e):
        print(f"sample {k}: " + ("infeasible" if e is None else f"c={e.c:.4f} vol={e.volume:.4e}"),
              file=sys.stderr)
    res = monte_carlo_search(sys_, SearchRanges(cfg.p_range, cfg.x30_range), cfg.n, cfg.seed,
                             not cfg.unconstrained, cfg.min_gap if cfg.unconstrained else 0.0, cfg.tol,
                             progress=progress if cfg.verbose else None)
    payload = {
        "seed": cfg.seed,
        "n_samples": cfg.n,
        "constrained_p2_eq_p3": not cfg.unconstrained,
        "n_feasible": res.n_feasible,
        "best": None if res.best is None else {**res.best.as_dict(), "volume": ellipsoid_volume(res.best)},
        "table": _table_rows(res.best),
        "feasible": [e.as_dict() for e in res.feasible],
        "samples": res.samples,
    }
    _emit(cfg, payload)
    print(f"montecarlo: {res.wall_time:.1f} s, {res.n_feasible}/{cfg.n} feasible", file=sys.stderr)
    if cfg.svg_out:
        if not res.feasible:
            print("empty union: no feasible ellipsoid to plot", file=sys.stderr)
            return EXIT_USAGE
        Path(cfg.svg_out).write_text(render_svg(res.feasible, _overlays(res.best), cfg.plane,
                                                title=f"union of {res.n_feasible} ellipsoids"))
    return EXIT_OK


def _ellipsoid(d: dict) -> EllipsoidBound:
    return EllipsoidBound(d["p1"], d["p2"], d["p3"], d["x30"], d["c"])


def cmd_plot(cfg: RunConfig) -> int:
    union: list[EllipsoidBound] = []
    best = None
    for path in cfg.inputs:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read results {path}: {e}") from None
        union.extend(_ellipsoid(d) for d in data.get("feasible", []))
        if data.get("best"):
            best = _ellipsoid(data["best"])
    singles = []
    for vals in cfg.ellipsoids:
        try:
            singles.append(EllipsoidBound(*(float(v) for v in vals)))
        except ValueError as e:
            raise UsageError(f"bad --ellipsoid: {e}") from None
    if not union and not singles:
        print("empty union: nothing to plot", file=sys.stderr)
        return EXIT_USAGE
    if union:
        overlays = _overlays(best) + [Overlay(e, f"ellipsoid {k + 1}", "black") for k, e in enumerate(singles)]
        svg = render_svg(union, overlays, cfg.plane, title=f"union of {len(union)} ellipsoids")
    else:
        overlays = [Overlay(e, f"ellipsoid {k + 1}", "#1f77b4") for k, e in enumerate(singles)]
        svg = render_svg((), overlays, cfg.plane)
    Path(cfg.svg_out).write_text(svg)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    sys_ = _system(cfg)
    if cfg.table_row:
        e = {n: e for n, e, _ in TABLE1}[cfg.table_row]
    else:
        if cfg.p is None or cfg.x30 is None or cfg.c is None:
            raise UsageError("verify needs --table-row or all of --p, --x30, --c")
        try:
            e = EllipsoidBound(*(float(v) for v in cfg.p), float(cfg.x30), float(cfg.c))
        except ValueError as err:
            raise UsageError(str(err)) from None
    if cfg.scale != 1.0:
        e = e.scaled(cfg.scale)
    if not sys_.is_ground():
        raise UsageError("verify needs every system parameter fixed")
    t0 = time.perf_counter()
    rep = check_positive_invariance(e, sys_, cfg.n_starts, cfg.horizon, cfg.rel_tol, cfg.step, cfg.seed)
    _emit(cfg, {"ellipsoid": e.as_dict(), **rep.as_json()})
    _timing("verify", t0)
    return EXIT_OK


COMMANDS = {"qe": cmd_qe, "bound": cmd_bound, "montecarlo": cmd_montecarlo, "plot": cmd_plot,
            "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # argparse
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DegreeTooHigh as e:
        r = e.report
        print(f"engine limitation: degree too high\n  variable: {r.variable}\n  degree: {r.max_degree}\n"
              f"  atom #{r.atom_index}: {r.atom}\n  step: {r.step}", file=sys.stderr)
        return EXIT_ENGINE
    except QEOverflow as e:
        print(f"engine limitation: {e}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
