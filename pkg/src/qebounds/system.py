"""Polynomial vector fields and Lie derivatives."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

from .poly import Number, Polynomial, as_rational


class UnknownSymbolError(ValueError):
    pass


@dataclass(frozen=True)
class DynSystem:
    """``dx_i/dt = rhs[i]`` with named state variables and parameters."""

    state_vars: tuple
    params: tuple
    rhs: tuple
    name: str = "system"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "state_vars", tuple(self.state_vars))
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "rhs", tuple(Polynomial.lift(p) for p in self.rhs))
        if len(self.rhs) != len(self.state_vars):
            raise ValueError(f"{len(self.state_vars)} state variables but {len(self.rhs)} right-hand sides")
        if len(set(self.state_vars) | set(self.params)) != len(self.state_vars) + len(self.params):
            raise ValueError("state variable and parameter names must be distinct")
        known = set(self.state_vars) | set(self.params)
        for x, p in zip(self.state_vars, self.rhs):
            extra = p.variables - known
            if extra:
                raise UnknownSymbolError(f"right-hand side of {x} uses unknown symbol(s) {', '.join(sorted(extra))}")

    @property
    def dim(self) -> int:
        return len(self.state_vars)

    def substitute_params(self, values: Mapping[str, Number]) -> "DynSystem":
        """Fix some or all parameters to rational values."""
        vals = {k: as_rational(v) for k, v in values.items()}
        unknown = set(vals) - set(self.params)
        if unknown:
            raise UnknownSymbolError(f"not a parameter: {', '.join(sorted(unknown))}")
        rhs = [p.partial_evaluate(vals) for p in self.rhs]
        params = [q for q in self.params if q not in vals]
        return DynSystem(self.state_vars, params, rhs, self.name, dict(self.meta, **{"fixed": vals}))

    def is_ground(self) -> bool:
        return all(not (p.variables - set(self.state_vars)) for p in self.rhs)

    def vector_field(self):
        """Float callable ``f(x) -> list`` for a ground system."""
        if not self.is_ground():
            raise ValueError("vector field needs all parameters fixed")
        compiled = [_compile_float(p, self.state_vars) for p in self.rhs]

        def f(x):
            return [g(x) for g in compiled]

        return f

    def to_text(self) -> str:
        lines = ["vars " + " ".join(self.state_vars)]
        if self.params:
            lines.append("params " + " ".join(self.params))
        for x, p in zip(self.state_vars, self.rhs):
            lines.append(f"ode {x} = {p}")
        return "\n".join(lines) + "\n"


def _compile_float(p: Polynomial, names):
    idx = {n: i for i, n in enumerate(names)}
    terms = [(float(c), [(idx[w], e) for w, e in m]) for m, c in p.items()]

    def g(x):
        total = 0.0
        for c, mono in terms:
            t = c
            for i, e in mono:
                t *= x[i] ** e
            total += t
        return total

    return g


def lie_derivative(V: Polynomial, sys: DynSystem) -> Polynomial:
    """``sum_i dV/dx_i * f_i``. ``V`` may use state variables and parameters
    of ``sys`` plus any extra symbols listed in ``sys.meta['extra']``."""
    known = set(sys.state_vars) | set(sys.params) | set(sys.meta.get("extra", ()))
    extra = V.variables - known
    if extra:
        raise UnknownSymbolError(f"unknown variable {sorted(extra)[0]!r} in V")
    out = Polynomial.const(0)
    for x, f in zip(sys.state_vars, sys.rhs):
        d = V.diff(x)
        if not d.is_zero():
            out = out + d * f
    return out


def lie_derivative_free(V: Polynomial, sys: DynSystem) -> Polynomial:
    """Lie derivative that treats symbols foreign to ``sys`` as constants."""
    out = Polynomial.const(0)
    for x, f in zip(sys.state_vars, sys.rhs):
        d = V.diff(x)
        if not d.is_zero():
            out = out + d * f
    return out


LORENZ_PARAMS = {"s": 10, "r": 28, "b": "8/3"}


def lorenz(params: Mapping[str, Number] | None = None) -> DynSystem:
    """Lorenz system, symbolic in ``s, r, b`` unless values are given."""
    x1, x2, x3 = (Polynomial.var(v) for v in ("x1", "x2", "x3"))
    s, r, b = (Polynomial.var(v) for v in ("s", "r", "b"))
    sys = DynSystem(("x1", "x2", "x3"), ("s", "r", "b"),
                    (s * (x2 - x1), r * x1 - x2 - x1 * x3, x1 * x2 - b * x3), name="lorenz")
    if params:
        sys = sys.substitute_params(params)
    return sys


def lorenz_standard() -> DynSystem:
    return lorenz(LORENZ_PARAMS)


# -- system files --------------------------------------------------------------

class SystemFileError(ValueError):
    pass


def parse_system(text: str, name: str = "system") -> DynSystem:
    """Read the plain-text system format::

        vars x1 x2 x3
        params s r b
        ode x1 = s*(x2 - x1)
        ...
        set s = 10          # optional parameter values

    Lines starting with ``#`` are comments.
    """
    from .parsing import ParseError, parse_polynomial

    state: list[str] = []
    params: list[str] = []
    odes: dict[str, Polynomial] = {}
    values: dict[str, Number] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "vars":
            state.extend(rest.split())
        elif head == "params":
            params.extend(rest.split())
        elif head in ("ode", "set"):
            m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_']*)\s*=\s*(.+)", rest)
            if not m:
                raise SystemFileError(f"line {lineno}: expected '{head} NAME = EXPRESSION'")
            lhs, expr = m.groups()
            try:
                p = parse_polynomial(expr)
            except ParseError as e:
                raise SystemFileError(f"line {lineno}: {e}") from None
            if head == "ode":
                if lhs in odes:
                    raise SystemFileError(f"line {lineno}: duplicate equation for {lhs}")
                odes[lhs] = p
            else:
                if not p.is_constant():
                    raise SystemFileError(f"line {lineno}: value of {lhs} must be a number")
                values[lhs] = p.constant_value()
        else:
            raise SystemFileError(f"line {lineno}: unknown directive {head!r}")
    if not state:
        raise SystemFileError("no 'vars' line")
    missing = [x for x in state if x not in odes]
    if missing:
        raise SystemFileError(f"no equation for {', '.join(missing)}")
    stray = set(odes) - set(state)
    if stray:
        raise SystemFileError(f"equation for undeclared variable {sorted(stray)[0]}")
    try:
        sys = DynSystem(state, params, [odes[x] for x in state], name=name)
    except UnknownSymbolError as e:
        raise SystemFileError(str(e)) from None
    if values:
        sys = sys.substitute_params(values)
    return sys


def load_system(path) -> DynSystem:
    from pathlib import Path
    p = Path(path)
    return parse_system(p.read_text(), name=p.stem)
