"""
Determining equations of third-order integrals.

Residuals of the second-order and zeroth-order determining equations, the
general linear compatibility condition and its chart-specific forms, the
regular-point reduction of a chart condition to a linear ODE, and the exact
kernel analysis deciding when selected leading-term functions vanish.

Author: Analysis Team
Date: October 2026
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import sympy

import charts
import symcore
from charts import ChartTag, Coeffs10, SeparablePotential  # noqa: F401  (re-exported)
from errors import (
    CompatibilityError,
    DomainError,
    SchemaError,
    SingularPointError,
)


logger = logging.getLogger(__name__)

# Names of the two potential components per chart.
COMPONENT_NAMES = {
    ChartTag.CARTESIAN: ('V1', 'V2'),
    ChartTag.POLAR: ('R', 'S'),
    ChartTag.PARABOLIC: ('W1', 'W2'),
    ChartTag.ELLIPTIC: ('W1', 'W2'),
}

F_NAMES = ('F1', 'F2', 'F3', 'F4')


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _cartesian_potential(V):
    if isinstance(V, SeparablePotential):
        return charts.cartesian_potential(V)
    if isinstance(V, str):
        return symcore.parse(V)
    return sympy.sympify(V)


def _check_gauge(g):
    g = symcore.parse(g) if isinstance(g, str) else sympy.sympify(g)
    names = {s.name for s in g.free_symbols}
    if names & {'p1', 'p2'}:
        raise DomainError(f"gauge field {symcore.to_text(g)} depends on momenta")
    return g


def tidy(expr):
    """Expanded form, with rational functions brought over a common denominator first."""
    expr = sympy.sympify(expr)
    if expr.is_polynomial(*expr.free_symbols):
        return symcore.normalize(expr)
    return symcore.normalize(sympy.cancel(sympy.together(expr)))


def is_identically_zero(expr):
    return tidy(expr) == 0


class _Derivatives:
    """Memoized partial derivatives d1^i d2^k of a function of (x1, x2)."""

    def __init__(self, expr, x1, x2):
        self._cache = {(0, 0): expr}
        self._x1, self._x2 = x1, x2

    def __call__(self, i, k):
        if (i, k) not in self._cache:
            if k > 0:
                self._cache[(i, k)] = sympy.diff(self(i, k - 1), self._x2)
            else:
                self._cache[(i, k)] = sympy.diff(self(i - 1, k), self._x1)
        return self._cache[(i, k)]


def _compat_combination(Fd, Vd):
    """
    Linear compatibility condition assembled from derivative lookups.

    Fd(j, i, k) is d1^i d2^k F_j and Vd(i, k) is d1^i d2^k V; both may return
    sympy expressions or numpy arrays.
    """
    return (
        -Fd(3, 0, 0) * Vd(3, 0)
        + (2 * Fd(2, 0, 0) - 3 * Fd(4, 0, 0)) * Vd(2, 1)
        + (-3 * Fd(1, 0, 0) + 2 * Fd(3, 0, 0)) * Vd(1, 2)
        - Fd(2, 0, 0) * Vd(0, 3)
        + 2 * (Fd(2, 0, 1) - Fd(3, 1, 0)) * Vd(2, 0)
        + 2 * (-3 * Fd(1, 0, 1) + Fd(2, 1, 0) + Fd(3, 0, 1) - 3 * Fd(4, 1, 0)) * Vd(1, 1)
        + 2 * (-Fd(2, 0, 1) + Fd(3, 1, 0)) * Vd(0, 2)
        + (-3 * Fd(1, 0, 2) + 2 * Fd(2, 1, 1) - Fd(3, 2, 0)) * Vd(1, 0)
        + (-Fd(2, 0, 2) + 2 * Fd(3, 1, 1) - 3 * Fd(4, 2, 0)) * Vd(0, 1)
    )


def _zeroth_combination(A, x1, x2, g1, g2, F, Vd, hbar):
    """Zeroth-order determining equation; F = (F1..F4), Vd(i, k) as above."""
    h2 = hbar ** 2
    return (
        (g1 - h2 * (-2 * A.A300 * x2 + sympy.Rational(1, 2) * A.A210)) * Vd(1, 0)
        + (g2 - h2 * (2 * A.A300 * x1 + sympy.Rational(1, 2) * A.A201)) * Vd(0, 1)
        - h2 / 4 * (F[0] * Vd(3, 0) + F[1] * Vd(2, 1) + F[2] * Vd(1, 2) + F[3] * Vd(0, 3))
    )


def cartesian_leading_derivatives(A):
    """Memoized derivative lookups of the Cartesian F1..F4."""
    x1, x2 = symcore.symbols('x1', 'x2')
    F = charts.leading_terms(ChartTag.CARTESIAN, A).F
    return [_Derivatives(f, x1, x2) for f in F]


# ---------------------------------------------------------------------------
# Determining equations in Cartesian variables
# ---------------------------------------------------------------------------

def g_residuals(V, A, g1, g2):
    """
    Residuals of the three second-order determining equations.

    Args:
        V: Potential in (x1, x2), or a SeparablePotential
        A (Coeffs10): Leading coefficients
        g1, g2: Gauge fields in (x1, x2)

    Returns:
        tuple: (g1,1 - (3F1V,1 + F2V,2),
                g1,2 + g2,1 - 2(F2V,1 + F3V,2),
                g2,2 - (F3V,1 + 3F4V,2))

    Raises:
        DomainError: a gauge field depends on the momenta
    """
    x1, x2 = symcore.symbols('x1', 'x2')
    V = _cartesian_potential(V)
    g1, g2 = _check_gauge(g1), _check_gauge(g2)
    F1, F2, F3, F4 = charts.leading_terms(ChartTag.CARTESIAN, A).F
    V1, V2 = sympy.diff(V, x1), sympy.diff(V, x2)

    first = sympy.diff(g1, x1) - (3 * F1 * V1 + F2 * V2)
    mixed = sympy.diff(g1, x2) + sympy.diff(g2, x1) - 2 * (F2 * V1 + F3 * V2)
    last = sympy.diff(g2, x2) - (F3 * V1 + 3 * F4 * V2)
    return tuple(tidy(r) for r in (first, mixed, last))


def zeroth_residual(V, A, g1, g2, hbar=0):
    """
    Residual of the zeroth-order determining equation, including the hbar^2
    corrections; hbar = 0 gives the classical condition.
    """
    x1, x2 = symcore.symbols('x1', 'x2')
    V = _cartesian_potential(V)
    g1, g2 = _check_gauge(g1), _check_gauge(g2)
    hbar = symcore.parse(hbar) if isinstance(hbar, str) else sympy.sympify(hbar)
    F = charts.leading_terms(ChartTag.CARTESIAN, A).F
    Vd = _Derivatives(V, x1, x2)
    return tidy(_zeroth_combination(A, x1, x2, g1, g2, F, Vd, hbar))


def linear_compat(V, A):
    """Linear compatibility condition of the second-order determining equations."""
    x1, x2 = symcore.symbols('x1', 'x2')
    V = _cartesian_potential(V)
    Fd = cartesian_leading_derivatives(A)
    Vd = _Derivatives(V, x1, x2)
    return tidy(_compat_combination(lambda j, i, k: Fd[j - 1](i, k), Vd))


def linear_compat_numeric(A, x1, x2, potential_derivative):
    """
    Linear compatibility condition on sampled points.

    Args:
        A (Coeffs10): Leading coefficients
        x1, x2 (numpy.ndarray): Sample coordinates
        potential_derivative: callable (i, k, x1, x2) -> d1^i d2^k V on the samples

    Returns:
        numpy.ndarray: Condition values at the samples
    """
    names = ('x1', 'x2')
    Fd = cartesian_leading_derivatives(A)
    cache = {}

    def F_at(j, i, k):
        if (j, i, k) not in cache:
            f = symcore.lambdify(Fd[j - 1](i, k), names)
            cache[(j, i, k)] = np.broadcast_to(f(x1, x2), np.shape(x1)).astype(float)
        return cache[(j, i, k)]

    return _compat_combination(F_at, lambda i, k: potential_derivative(i, k, x1, x2))


def zeroth_residual_numeric(A, x1, x2, g1, g2, potential_derivative, hbar=0.0):
    """Zeroth-order residual on sampled points with sampled gauge fields."""
    F = [symcore.lambdify(f, ('x1', 'x2')) for f in charts.leading_terms(ChartTag.CARTESIAN, A).F]
    F = [np.broadcast_to(f(x1, x2), np.shape(x1)).astype(float) for f in F]
    Vd = lambda i, k: potential_derivative(i, k, x1, x2)  # noqa: E731
    h2 = float(hbar) ** 2
    return (
        (g1 - h2 * (-2 * float(A.A300) * x2 + 0.5 * float(A.A210))) * Vd(1, 0)
        + (g2 - h2 * (2 * float(A.A300) * x1 + 0.5 * float(A.A201))) * Vd(0, 1)
        - h2 / 4 * (F[0] * Vd(3, 0) + F[1] * Vd(2, 1) + F[2] * Vd(1, 2) + F[3] * Vd(0, 3))
    )


# ---------------------------------------------------------------------------
# Chart-specific linear compatibility
# ---------------------------------------------------------------------------

def _component(chart, index, value):
    q = chart.symbols[index]
    if value is None:
        return sympy.Function(COMPONENT_NAMES[chart.tag][index])(q)
    value = symcore.parse(value) if isinstance(value, str) else sympy.sympify(value)
    foreign = {s.name for s in value.free_symbols if symcore.is_variable(s.name)} - {q.name}
    if foreign:
        raise DomainError(f"component {index + 1} may depend only on {q.name}, found {sorted(foreign)}")
    return value


def _cartesian_condition(F, V1, V2, x, y):
    F1, F2, F3, F4 = F
    d = sympy.diff
    lhs = -F3 * d(V1, x, 3) - 4 * d(F3, x) * d(V1, x, 2) - 6 * d(F3, x, 2) * d(V1, x)
    rhs = F2 * d(V2, y, 3) + 4 * d(F2, y) * d(V2, y, 2) + 6 * d(F2, y, 2) * d(V2, y)
    return lhs - rhs


def _polar_condition(F, R, S, r, th):
    F1, F2, F3, F4 = F
    d = sympy.diff
    lhs = (r ** 4 * F3 * d(R, r, 3)
           + r * (4 * r ** 3 * d(F3, r) + 6 * r ** 2 * F3 + 3 * F1) * d(R, r, 2)
           + (6 * r ** 4 * d(F3, r, 2) + 20 * r ** 3 * d(F3, r) + 6 * r ** 2 * F3 - 3 * F1) * d(R, r))
    rhs = (-(F2 * d(S, th, 3) + 4 * d(F2, th) * d(S, th, 2)
             + (6 * d(F2, th, 2) - 6 * d(F2, r) * r + 4 * F2) * d(S, th)
             + (12 * r * d(F2, th, r) - 8 * d(F2, th)) * S) / r ** 2
           + 36 * F1 * S / r ** 3)
    return lhs - rhs


def parabolic_c_coefficients(F, xi, eta):
    """The zeroth-derivative coefficients C1, C2 of the parabolic condition."""
    F1, F2, F3, F4 = F
    d = sympy.diff
    s = xi ** 2 + eta ** 2
    C1 = (-(12 * xi * d(F3, xi, 2) - 12 * eta * d(F3, eta, xi)
            + 12 * (2 * eta ** 2 - xi ** 2) * d(F1, xi, eta) / eta) / s
          - (24 * (xi ** 2 - eta ** 2) * d(F3, xi) - 24 * xi * eta * d(F3, eta)
             + 12 * (4 * eta ** 4 - 2 * eta ** 2 * xi ** 2 + xi ** 4) * d(F1, xi) / eta ** 2
             + 12 * (4 * eta ** 2 - 3 * xi ** 2) * xi * d(F1, eta) / eta) / s ** 2
          - 12 * xi * (2 * eta ** 4 * F3 + 3 * (xi ** 4 - xi ** 2 * eta ** 2) * F1) / (eta ** 2 * s ** 3))
    C2 = (-(12 * eta * d(F2, eta, 2) - 12 * xi * d(F2, eta, xi)
            + 12 * (2 * xi ** 2 - eta ** 2) * d(F4, xi, eta) / xi) / s
          + (24 * (xi ** 2 - eta ** 2) * d(F2, eta) + 24 * xi * eta * d(F2, xi)
             - 12 * (4 * xi ** 4 - 2 * eta ** 2 * xi ** 2 + eta ** 4) * d(F4, eta) / xi ** 2
             - 12 * (4 * xi ** 2 - 3 * eta ** 2) * eta * d(F4, xi) / xi) / s ** 2
          - 12 * eta * (2 * xi ** 4 * F2 + 3 * (eta ** 4 - xi ** 2 * eta ** 2) * F4) / (xi ** 2 * s ** 3))
    return C1, C2


def _parabolic_condition(F, W1, W2, xi, eta):
    F1, F2, F3, F4 = F
    d = sympy.diff
    s = xi ** 2 + eta ** 2
    C1, C2 = parabolic_c_coefficients(F, xi, eta)
    lhs = (F3 * d(W1, xi, 3)
           + (4 * d(F3, xi) + (F3 + 3 * F1) * xi / s) * d(W1, xi, 2)
           + (6 * d(F3, xi, 2) + (6 * xi * d(F3, xi) - 6 * eta * d(F3, eta)
                                  + 12 * xi * d(F1, xi) - 3 * (F3 - 3 * F1)) / s) * d(W1, xi)
           + C1 * W1)
    rhs = (-F2 * d(W2, eta, 3)
           - (4 * d(F2, eta) + (F2 + 3 * F4) * eta / s) * d(W2, eta, 2)
           - (6 * d(F2, eta, 2) + (6 * (eta * d(F2, eta) - xi * d(F2, xi) + 2 * eta * d(F4, eta))
                                   - 3 * (F2 - 3 * F4)) / s) * d(W2, eta)
           - C2 * W2)
    return lhs - rhs


def elliptic_c_coefficients(F, u, v):
    """
    The zeroth-derivative coefficients C1, C2 of the elliptic condition.

    The F3 term of C1 carries the sign that makes C1 = C2 (the pair
    W1 = c, W2 = -c is the zero potential).
    """
    F1, F2, F3, F4 = F
    d = sympy.diff
    D, M, N = u ** 2 - v ** 2, 1 - u ** 2, v ** 2 - 1
    C1 = (-12 * u * M * d(F3, u, 2) / (N * D)
          - 12 * v * d(F3, v, u) / D
          + 4 * (4 * u ** 4 + 7 * u ** 2 * v ** 2 + v ** 4 - 6 * u ** 2 - 6 * v ** 2) * d(F3, u) / (D ** 2 * N)
          + 12 * v * u * (u ** 2 + v ** 2 - 2) * d(F3, v) / (D ** 2 * M)
          - 4 * u * (u ** 4 * v ** 2 - 8 * u ** 2 * v ** 4 + v ** 6 + 5 * u ** 4 - 4 * u ** 2 * v ** 2
                     + 11 * v ** 4 - 6 * v ** 2) * F3 / (D ** 3 * M * N)
          + 12 * (2 * u ** 2 * v ** 2 + v ** 4 - u ** 2 - 2 * v ** 2) * d(F1, v, u) / (D * M * v)
          - 12 * (2 * u ** 4 * v ** 4 + 4 * u ** 2 * v ** 6 + v ** 8 - 2 * u ** 4 * v ** 2 - 8 * u ** 2 * v ** 4
                  - 4 * v ** 6 + u ** 4 + 2 * u ** 2 * v ** 2 + 4 * v ** 4) * d(F1, u) / (D ** 2 * M * N * v ** 2)
          - 12 * u * (4 * u ** 2 * v ** 4 + 3 * v ** 6 - 7 * u ** 2 * v ** 2 - 7 * v ** 4 + 3 * u ** 2
                      + 4 * v ** 2) * d(F1, v) / (D ** 2 * M ** 2 * v)
          + 12 * u * (2 * u ** 6 * v ** 2 - 4 * u ** 4 * v ** 4 + 5 * u ** 2 * v ** 6 + 3 * v ** 8 - 5 * u ** 4 * v ** 2
                      - 2 * u ** 2 * v ** 4 - 5 * v ** 6 + 3 * u ** 4 + 3 * u ** 2 * v ** 2) * F1 / (D ** 3 * M ** 2 * v ** 2))
    C2 = (12 * v * N * d(F2, v, 2) / (M * D)
          + 12 * u * d(F2, v, u) / D
          - 4 * (u ** 4 + 7 * u ** 2 * v ** 2 + 4 * v ** 4 - 6 * u ** 2 - 6 * v ** 2) * d(F2, v) / (D ** 2 * M)
          - 12 * v * u * (u ** 2 + v ** 2 - 2) * d(F2, u) / (D ** 2 * N)
          + 4 * v * (u ** 6 - 8 * u ** 4 * v ** 2 + u ** 2 * v ** 4 + 11 * u ** 4 - 4 * u ** 2 * v ** 2
                     + 5 * v ** 4 - 6 * u ** 2) * F2 / (D ** 3 * M * N)
          + 12 * (u ** 4 + 2 * u ** 2 * v ** 2 - 2 * u ** 2 - v ** 2) * d(F4, v, u) / (D * N * u)
          - 12 * (u ** 8 + 4 * u ** 6 * v ** 2 + 2 * u ** 4 * v ** 4 - 4 * u ** 6 - 8 * u ** 4 * v ** 2
                  - 2 * u ** 2 * v ** 4 + 4 * u ** 4 + 2 * u ** 2 * v ** 2 + v ** 4) * d(F4, v) / (D ** 2 * M * N * u ** 2)
          - 12 * v * (3 * u ** 6 + 4 * u ** 4 * v ** 2 - 7 * u ** 4 - 7 * u ** 2 * v ** 2 + 4 * u ** 2
                      + 3 * v ** 2) * d(F4, u) / (D ** 2 * N ** 2 * u)
          - 12 * v * (3 * u ** 8 + 5 * u ** 6 * v ** 2 - 4 * u ** 4 * v ** 4 + 2 * u ** 2 * v ** 6 - 5 * u ** 6
                      - 2 * u ** 4 * v ** 2 - 5 * u ** 2 * v ** 4 + 3 * u ** 2 * v ** 2 + 3 * v ** 4) * F4
          / (D ** 3 * N ** 2 * u ** 2))
    return C1, C2


def _elliptic_condition(F, W1, W2, u, v):
    F1, F2, F3, F4 = F
    d = sympy.diff
    D, M, N = u ** 2 - v ** 2, 1 - u ** 2, v ** 2 - 1
    C1, C2 = elliptic_c_coefficients(F, u, v)
    lhs = (F3 * M / N * d(W1, u, 3)
           + (4 * M * d(F3, u) / N - u * (F3 - 3 * F1) / D) * d(W1, u, 2)
           + (6 * d(F3, u, 2) * M / N
              + (-2 * u * (2 * u ** 2 + v ** 2 - 3) * d(F3, u) + 6 * N * (v * d(F3, v) + 2 * u * d(F1, u))) / (N * D)
              + ((u ** 2 * v ** 2 + 11 * u ** 2 - 9 * v ** 2 - 3) * F3 + 3 * (5 * u ** 2 + 3) * N * F1) / (M * N * D)
              ) * d(W1, u)
           + C1 * W1)
    rhs = (-F2 * N / M * d(W2, v, 3)
           - (4 * N * d(F2, v) / M + v * (F2 - 3 * F4) / D) * d(W2, v, 2)
           - (6 * d(F2, v, 2) * N / M
              - (2 * v * (u ** 2 + 2 * v ** 2 - 3) * d(F2, v) + 6 * M * (u * d(F2, u) + 2 * v * d(F4, v))) / (M * D)
              - ((u ** 2 * v ** 2 + 11 * v ** 2 - 9 * u ** 2 - 3) * F2 - 3 * (5 * v ** 2 + 3) * M * F4) / (M * N * D)
              ) * d(W2, v)
           - C2 * W2)
    return lhs - rhs


_CONDITIONS = {
    ChartTag.CARTESIAN: _cartesian_condition,
    ChartTag.POLAR: _polar_condition,
    ChartTag.PARABOLIC: _parabolic_condition,
    ChartTag.ELLIPTIC: _elliptic_condition,
}


def chart_compat(chart, A, V1=None, V2=None):
    """
    Left minus right side of the chart-specific linear compatibility condition.

    Args:
        chart: Chart, tag or name
        A (Coeffs10): Leading coefficients (numeric or symbolic)
        V1, V2: Components in the chart's own variables; None leaves an
            undefined function (V1/V2, R/S or W1/W2)

    Returns:
        sympy.Expr: Condition in the chart variables
    """
    chart = charts.get_chart(chart)
    q1, q2 = chart.symbols
    F = charts.leading_terms(chart, A).F
    return _CONDITIONS[chart.tag](F, _component(chart, 0, V1), _component(chart, 1, V2), q1, q2)


def singular_locus(chart, point):
    """Reason why a chart point is singular for the chart condition, or None."""
    chart = charts.get_chart(chart)
    q1, q2 = (float(symcore.coordinate(c)) for c in point)
    if chart.tag is ChartTag.POLAR and q1 == 0:
        return 'r = 0'
    if chart.tag is ChartTag.PARABOLIC and (q1 == 0 or q2 == 0):
        return 'xi = 0 or eta = 0'
    if chart.tag is ChartTag.ELLIPTIC:
        if abs(q1) == 1:
            return 'u = +-1'
        if q2 == 1:
            return 'v = 1'
        if q1 == 0:
            return 'u = 0'
    return None


def evaluate_chart_compat(chart, expr, point, binding=None):
    """
    Float value of a chart condition at a chart point.

    Raises:
        SingularPointError: point on a singular locus of the chart condition
    """
    chart = charts.get_chart(chart)
    reason = singular_locus(chart, point)
    if reason:
        raise SingularPointError(f"{chart.tag.value} condition is singular at {tuple(point)} ({reason})")
    values = dict(zip(chart.variables, point))
    values.update(binding or {})
    return symcore.evaluate(expr, values, mode='float')


# ---------------------------------------------------------------------------
# Consistency of the chart forms with the general condition
# ---------------------------------------------------------------------------

_JET_ORDER = 3


def _jet_symbols(prefix):
    return sympy.symbols(f'{prefix}_0:{_JET_ORDER + 1}', real=True)


def _jet_substitution(expr, functions, variables, jets):
    mapping = {}
    for f, q, jet in zip(functions, variables, jets):
        for k in range(_JET_ORDER, 0, -1):
            mapping[sympy.Derivative(f, (q, k))] = jet[k]
        mapping[f] = jet[0]
    return expr.xreplace(mapping)


@dataclass(frozen=True)
class PointConsistency:
    index: int
    point: tuple
    multiplier: float
    residual: float
    degenerate: bool

    def to_json(self):
        return {
            'index': self.index,
            'point': [float(symcore.coordinate(c)) for c in self.point],
            'multiplier': None if self.multiplier is None else float(self.multiplier),
            'residual': float(self.residual),
            'degenerate': self.degenerate,
        }


@dataclass(frozen=True)
class ConsistencyReport:
    chart: ChartTag
    coefficients: Coeffs10
    rows: tuple

    @property
    def max_residual(self):
        values = [r.residual for r in self.rows if not r.degenerate]
        return max(values) if values else 0.0

    @property
    def degenerate(self):
        return all(r.degenerate for r in self.rows)

    def to_json(self):
        return {
            'chart': self.chart.value,
            'coefficients': self.coefficients.to_json(),
            'max_residual': float(self.max_residual),
            'degenerate': self.degenerate,
            'points': [r.to_json() for r in self.rows],
        }


class _CompatFunctionals:
    """
    Both sides of the consistency check as compiled functions of the chart
    point, the ten coefficients and the 3-jets of the two components.
    """

    _cache = {}

    @classmethod
    def for_chart(cls, chart):
        if chart.tag not in cls._cache:
            cls._cache[chart.tag] = cls(chart)
        return cls._cache[chart.tag]

    def __init__(self, chart):
        q1, q2 = chart.symbols
        A = Coeffs10.symbolic()
        names = COMPONENT_NAMES[chart.tag]
        W1, W2 = sympy.Function(names[0])(q1), sympy.Function(names[1])(q2)
        jets = (_jet_symbols('J1'), _jet_symbols('J2'))

        # General condition with V and F pulled back into the chart.
        x1, x2 = symcore.symbols('x1', 'x2')
        xs = charts.cartesian_map(chart)
        V = charts.assemble_potential(chart, W1, W2)
        inverse = charts.jacobian(chart).inv()

        def cartesian_derivative(f, i):
            return sum(inverse[k, i] * sympy.diff(f, chart.symbols[k]) for k in range(2))

        Vcache = {(0, 0): V}

        def Vd(i, k):
            if (i, k) not in Vcache:
                if k > 0:
                    Vcache[(i, k)] = cartesian_derivative(Vd(i, k - 1), 1)
                else:
                    Vcache[(i, k)] = cartesian_derivative(Vd(i - 1, k), 0)
            return Vcache[(i, k)]

        Fd = cartesian_leading_derivatives(A)
        subs = dict(zip((x1, x2), xs))
        general = _compat_combination(lambda j, i, k: Fd[j - 1](i, k).subs(subs, simultaneous=True), Vd)
        general = _jet_substitution(general, (W1, W2), (q1, q2), jets)

        specific = chart_compat(chart, A)
        specific = _jet_substitution(specific, (W1, W2), (q1, q2), jets)

        args = (q1, q2) + A.as_tuple() + jets[0] + jets[1]
        self.general = sympy.lambdify(args, general, modules='numpy', cse=True)
        self.specific = sympy.lambdify(args, specific, modules='numpy', cse=True)
        self.general_magnitude = sympy.lambdify(args, term_magnitude(general), modules='numpy', cse=True)
        self.specific_magnitude = sympy.lambdify(args, term_magnitude(specific), modules='numpy', cse=True)


def term_magnitude(expr):
    """
    Majorant of an expression tree: every sum becomes a sum of absolute values.

    Evaluating an expression in floating point leaves a rounding error of
    order eps times this value, so it sets the floor below which a computed
    value cannot be told apart from zero.
    """
    if expr.is_Add:
        return sympy.Add(*[term_magnitude(a) for a in expr.args])
    if expr.is_Mul:
        return sympy.Mul(*[term_magnitude(a) for a in expr.args])
    if expr.is_Pow and expr.exp.is_Integer and expr.exp > 0:
        return term_magnitude(expr.base) ** expr.exp
    return sympy.Abs(expr)


def random_chart_points(chart, count, rng):
    """Points well inside the regular part of a chart."""
    chart = charts.get_chart(chart)
    points = []
    while len(points) < count:
        if chart.tag is ChartTag.CARTESIAN:
            p = tuple(rng.uniform(-2.0, 2.0, size=2))
        elif chart.tag is ChartTag.POLAR:
            p = (rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0 * np.pi))
        elif chart.tag is ChartTag.PARABOLIC:
            p = tuple(rng.uniform(0.3, 1.5, size=2) * rng.choice([-1.0, 1.0], size=2))
        else:
            p = (rng.uniform(0.15, 0.85) * rng.choice([-1.0, 1.0]), rng.uniform(1.2, 2.5))
        if singular_locus(chart, p) is None:
            points.append(p)
    return points


def _random_jets(rng, degree, x):
    coeffs = rng.uniform(-1.0, 1.0, size=degree + 1)
    jets = []
    for _ in range(_JET_ORDER + 1):
        jets.append(np.polynomial.polynomial.polyval(x, coeffs))
        coeffs = np.polynomial.polynomial.polyder(coeffs)
    return jets


def compat_consistency(chart, A, points=None, trials=10, seed=0, degree=5, rounding_factor=1e4):
    """
    Compare the chart-specific condition with the pulled-back general one.

    At each point both sides are evaluated on `trials` random polynomial
    component pairs; since both are linear in the components they must be
    proportional. The fitted multiplier and the relative residual of
    proportionality are reported per point.

    A side counts as vanishing at a point when its values stay below
    rounding_factor * eps times the magnitude of the terms it sums. A point
    where both sides vanish is degenerate and consistent.

    Args:
        chart: Chart, tag or name
        A (Coeffs10): Leading coefficients
        points (list | int): Chart points, or the number of random regular points (default 20)
        trials (int): Random component pairs per point
        seed (int): Seed of numpy.random.default_rng
        degree (int): Degree of the random polynomial components
        rounding_factor (float): Multiple of machine epsilon, relative to the
            term magnitude, below which a side counts as zero

    Returns:
        ConsistencyReport: Per-point multipliers and residuals
    """
    chart = charts.get_chart(chart)
    rng = np.random.default_rng(seed)
    if points is None or isinstance(points, int):
        points = random_chart_points(chart, points or 20, rng)
    functionals = _CompatFunctionals.for_chart(chart)
    coefficient_values = [float(c) for c in A.as_tuple()]

    rows = []
    for index, point in enumerate(points):
        reason = singular_locus(chart, point)
        if reason:
            raise SingularPointError(f"consistency point {tuple(point)} is singular ({reason})")
        q1, q2 = (float(symcore.coordinate(c)) for c in point)
        general, specific, floor_g, floor_s = [], [], [], []
        for _ in range(trials):
            jets = _random_jets(rng, degree, q1) + _random_jets(rng, degree, q2)
            args = [q1, q2] + coefficient_values + jets
            general.append(float(functionals.general(*args)))
            specific.append(float(functionals.specific(*args)))
            floor_g.append(float(functionals.general_magnitude(*args)))
            floor_s.append(float(functionals.specific_magnitude(*args)))
        general, specific = np.array(general), np.array(specific)

        norm_g, norm_s = float(general @ general), float(specific @ specific)
        eps = rounding_factor * np.finfo(float).eps
        zero_g = norm_g <= eps ** 2 * float(np.dot(floor_g, floor_g))
        zero_s = norm_s <= eps ** 2 * float(np.dot(floor_s, floor_s))
        if zero_g and zero_s:
            rows.append(PointConsistency(index, tuple(point), None, 0.0, True))
            continue
        if zero_s or zero_g:
            rows.append(PointConsistency(index, tuple(point), None, 1.0, False))
            continue
        multiplier = float(general @ specific) / norm_s
        misfit = general - multiplier * specific
        residual = float(np.sqrt(misfit @ misfit / max(norm_g, multiplier ** 2 * norm_s)))
        rows.append(PointConsistency(index, tuple(point), multiplier, residual, False))

    report = ConsistencyReport(chart.tag, A, tuple(rows))
    if report.degenerate:
        logger.warning(f"{chart.tag.value}: both conditions vanish at every point (degenerate)")
    else:
        logger.info(f"{chart.tag.value}: max proportionality residual {report.max_residual:.3e}")
    return report


# ---------------------------------------------------------------------------
# Regular-point reduction
# ---------------------------------------------------------------------------

_TARGET_ALIASES = {
    'component1': 0, 'component2': 1,
    'V1': 0, 'V2': 1, 'R': 0, 'S': 1, 'W1': 0, 'W2': 1,
}


@dataclass(frozen=True)
class LinearOdeSpec:
    """
    Reduced equation c3 f''' + c2 f'' + c1 f' + c0 f = sum K_j * h_j.

    The K_j are the unknown values of the frozen component and its
    derivatives at the fixed point.
    """

    chart: ChartTag
    target: str
    variable: str
    coefficients: tuple
    inhomogeneity: tuple
    fixed_variable: str
    fixed_value: object
    degenerate: bool = False

    @property
    def order(self):
        for k in range(3, -1, -1):
            if self.coefficients[3 - k] != 0:
                return k
        return None

    def to_json(self):
        return {
            'chart': self.chart.value,
            'target': self.target,
            'variable': self.variable,
            'coefficients': {f'c{3 - i}': symcore.to_text(c) for i, c in enumerate(self.coefficients)},
            'inhomogeneity': [{'unknown': str(k), 'expr': symcore.to_text(h)} for k, h in self.inhomogeneity],
            'fixed': {self.fixed_variable: str(self.fixed_value)},
            'degenerate': self.degenerate,
        }


def _regular_fixed_value(chart, index, value):
    """
    Raises:
        SingularPointError: value lies on a singular locus of the frozen variable
    """
    name = chart.variables[index]
    numeric = float(value)
    bad = {
        ('polar', 'r'): numeric <= 0,
        ('parabolic', 'xi'): numeric == 0,
        ('parabolic', 'eta'): numeric == 0,
        ('elliptic', 'u'): abs(numeric) >= 1 or numeric == 0,
        ('elliptic', 'v'): numeric <= 1,
    }.get((chart.tag.value, name), False)
    if bad:
        raise SingularPointError(f"{name} = {value} is not a regular point of the {chart.tag.value} condition")


def reduce_to_ode(chart, A, target, fixed):
    """
    Freeze the other chart variable at a regular point and read off a linear
    ODE for the target component.

    Args:
        chart: Chart, tag or name
        A (Coeffs10): Leading coefficients (exact)
        target (str): 'component1'/'component2' or a component name (V2, R, ...)
        fixed: Exact value of the other variable

    Returns:
        LinearOdeSpec: Coefficients c3..c0 and the inhomogeneity
    """
    chart = charts.get_chart(chart)
    try:
        index = _TARGET_ALIASES[target]
    except KeyError:
        raise SchemaError(f"Unknown reduction target '{target}'") from None
    other = 1 - index
    fixed = symcore.as_rational(fixed) if not isinstance(fixed, sympy.Basic) else fixed
    _regular_fixed_value(chart, other, fixed)

    q = chart.symbols
    names = COMPONENT_NAMES[chart.tag]
    functions = (sympy.Function(names[0])(q[0]), sympy.Function(names[1])(q[1]))
    condition = chart_compat(chart, A)

    unknowns = sympy.symbols(f'K0:{_JET_ORDER + 1}', real=True)
    target_jet = sympy.symbols(f'T0:{_JET_ORDER + 1}', real=True)
    condition = _jet_substitution(condition, (functions[other],), (q[other],), (unknowns,))
    condition = _jet_substitution(condition, (functions[index],), (q[index],), (target_jet,))
    condition = condition.subs(q[other], fixed)

    def coefficient(sym):
        return sympy.factor(sympy.cancel(sympy.together(sympy.diff(condition, sym))))

    coefficients = tuple(coefficient(target_jet[k]) for k in range(3, -1, -1))
    inhomogeneity = []
    for k, K in enumerate(unknowns):
        h = -coefficient(K)
        if h != 0:
            inhomogeneity.append((K, h))

    degenerate = all(c == 0 for c in coefficients[:3])
    spec = LinearOdeSpec(
        chart=chart.tag, target=names[index], variable=chart.variables[index],
        coefficients=coefficients, inhomogeneity=tuple(inhomogeneity),
        fixed_variable=chart.variables[other], fixed_value=fixed, degenerate=degenerate,
    )
    if degenerate:
        logger.warning(f"{chart.tag.value} reduction for {names[index]} is identically satisfied (degenerate)")
    return spec


def homogeneous_solution_basis(spec, modulo_constants=True):
    """
    Solution basis of a reduced ODE without inhomogeneity.

    Args:
        spec (LinearOdeSpec): Reduced equation
        modulo_constants (bool): Drop the constant solution (potentials are
            defined up to an additive constant)

    Returns:
        list: Basis functions of the chart variable

    Raises:
        CompatibilityError: degenerate reduction, inhomogeneous equation or
            an equation sympy cannot solve
    """
    if spec.degenerate:
        raise CompatibilityError("degenerate reduction has no ODE to solve")
    if spec.inhomogeneity:
        raise CompatibilityError("equation has an inhomogeneity in the frozen component")
    x = symcore.symbol(spec.variable)
    f = sympy.Function('f')(x)
    ode = sum(c * sympy.diff(f, x, 3 - i) for i, c in enumerate(spec.coefficients))
    try:
        solution = sympy.dsolve(ode, f)
    except (NotImplementedError, ValueError) as exc:
        raise CompatibilityError(f"could not solve reduced equation: {exc}") from None

    constants = sorted(solution.rhs.free_symbols - {x} - ode.free_symbols, key=sympy.default_sort_key)
    basis = [sympy.expand(sympy.diff(solution.rhs, C)) for C in constants]
    if modulo_constants:
        basis = [b for b in basis if b.has(x)]
    return sorted(basis, key=sympy.default_sort_key)


# ---------------------------------------------------------------------------
# Kernel analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelReport:
    chart: ChartTag
    selected: tuple
    basis: tuple
    method: str
    methods_agree: bool = True
    verified: bool = False
    dimensions: dict = field(default_factory=dict)

    @property
    def dimension(self):
        return len(self.basis)

    def to_json(self):
        return {
            'chart': self.chart.value,
            'selected': [F_NAMES[i - 1] for i in self.selected],
            'dimension': self.dimension,
            'basis': [Coeffs10.from_sequence(b).to_json() for b in self.basis],
            'method': self.method,
            'methods_agree': self.methods_agree,
            'verified': self.verified,
            'dimensions': dict(sorted(self.dimensions.items())),
        }


def parse_selection(selected):
    """'F2,F3', ['F2', 'F3'] or [2, 3] -> (2, 3)."""
    if isinstance(selected, str):
        selected = [s for s in selected.replace(' ', '').split(',') if s]
    indices = set()
    for item in selected:
        text = str(item).upper().lstrip('F')
        if text not in ('1', '2', '3', '4'):
            raise SchemaError(f"Unknown leading term '{item}' (expected F1..F4)")
        indices.add(int(text))
    if not indices:
        raise SchemaError("Empty selection of leading terms")
    return tuple(sorted(indices))


_SA, _SB = sympy.symbols('sa sb', positive=True)


def _numerator_forms(chart, selected):
    """
    The selected F's with symbolic coefficients, as expressions whose
    vanishing is equivalent and which are polynomial in the returned
    generators.
    """
    chart = charts.get_chart(chart)
    A = Coeffs10.symbolic()
    q1, q2 = chart.symbols
    if chart.tag is ChartTag.ELLIPTIC:
        numerators = charts.elliptic_numerators(A, q1, q2, _SA, _SB)
        return [sympy.expand(numerators[i - 1]) for i in selected], (q1, q2, _SA, _SB)

    F = charts.leading_terms(chart, A).F
    forms = []
    for i in selected:
        expr = F[i - 1]
        if chart.tag is ChartTag.POLAR:
            expr = symcore.normalize(expr * q1 ** 3)
        else:
            expr = sympy.expand(sympy.fraction(sympy.together(expr))[0])
        forms.append(expr)
    if chart.tag is ChartTag.POLAR:
        generators = set()
        for expr in forms:
            generators |= expr.atoms(sympy.sin, sympy.cos)
        return forms, (q1,) + tuple(sorted(generators, key=sympy.default_sort_key))
    return forms, (q1, q2)


def _nullspace(rows):
    A = Coeffs10.symbolic().as_tuple()
    if not rows:
        return [tuple(1 if k == j else 0 for k in range(10)) for j in range(10)]
    matrix, _ = sympy.linear_eq_to_matrix(rows, A)
    return [tuple(sympy.nsimplify(c) for c in vector) for vector in matrix.nullspace()]


def _symbolic_kernel(chart, selected):
    forms, generators = _numerator_forms(chart, selected)
    rows = []
    for expr in forms:
        if expr == 0:
            continue
        rows.extend(sympy.Poly(expr, *generators).coeffs())
    return _nullspace(rows)


def _rational_chart_points(chart, count, rng):
    """Rational points at which every radical of the chart is rational."""
    chart = charts.get_chart(chart)
    points, seen = [], set()

    def fraction(low, high):
        return sympy.Rational(int(rng.integers(low, high)), int(rng.integers(low + 1, high + 7)))

    while len(points) < count:
        if chart.tag is ChartTag.POLAR:
            t = fraction(1, 40)
            point = {'r': fraction(1, 40) + 1, 'cos': (1 - t ** 2) / (1 + t ** 2), 'sin': 2 * t / (1 + t ** 2)}
            key = (point['r'], t)
        elif chart.tag is ChartTag.ELLIPTIC:
            t, s = fraction(1, 40), fraction(1, 40)
            if t >= 1 or s >= 1:
                continue
            u, v = (1 - t ** 2) / (1 + t ** 2), (1 + s ** 2) / (2 * s)
            point = {'u': u, 'v': v, 'sa': 2 * t / (1 + t ** 2), 'sb': (1 - s ** 2) / (2 * s)}
            key = (u, v)
        else:
            sign = int(rng.choice([-1, 1]))
            a, b = sign * fraction(1, 40), fraction(1, 40)
            point = dict(zip(chart.variables, (a, b)))
            key = (a, b)
        if key not in seen:
            seen.add(key)
            points.append(point)
    return points


def _sampled_kernel(chart, selected, points, rng):
    chart = charts.get_chart(chart)
    A = Coeffs10.symbolic()
    q1, q2 = chart.symbols
    if chart.tag is ChartTag.ELLIPTIC:
        functions = [charts.elliptic_numerators(A, q1, q2, _SA, _SB)[i - 1] for i in selected]
    elif chart.tag is ChartTag.POLAR:
        F = charts.leading_terms(chart, A).F
        functions = [sympy.expand_trig(sympy.expand(F[i - 1])) for i in selected]
    else:
        F = charts.leading_terms(chart, A).F
        functions = [F[i - 1] for i in selected]

    rows = []
    for point in _rational_chart_points(chart, points, rng):
        if chart.tag is ChartTag.POLAR:
            th = q2
            subs = {q1: point['r'], sympy.cos(th): point['cos'], sympy.sin(th): point['sin']}
        elif chart.tag is ChartTag.ELLIPTIC:
            subs = {q1: point['u'], q2: point['v'], _SA: point['sa'], _SB: point['sb']}
        else:
            subs = {q1: point[chart.variables[0]], q2: point[chart.variables[1]]}
        for f in functions:
            value = sympy.expand(f.xreplace(subs) if chart.tag is not ChartTag.POLAR else f.subs(subs))
            if value != 0:
                rows.append(value)
    return _nullspace(rows)


def _same_span(first, second):
    if len(first) != len(second):
        return False
    if not first:
        return True
    m1, m2 = sympy.Matrix(first), sympy.Matrix(second)
    return m1.rank() == m2.rank() == sympy.Matrix.vstack(m1, m2).rank()


def verify_kernel_basis(chart, selected, basis):
    """Substitute every basis vector into the leading terms; all selected must vanish."""
    chart = charts.get_chart(chart)
    q1, q2 = chart.symbols
    for vector in basis:
        A = Coeffs10.from_sequence(vector)
        if chart.tag is ChartTag.ELLIPTIC:
            functions = charts.elliptic_numerators(A, q1, q2, _SA, _SB)
        else:
            functions = charts.leading_terms(chart, A).F
        for i in selected:
            f = functions[i - 1]
            residual = symcore.normalize(f) if chart.tag is ChartTag.POLAR else tidy(f)
            if residual != 0:
                return False
    return True


def vanishing_kernel(chart, selected, method='both', points=24, seed=0):
    """
    Exact subspace of coefficient vectors for which the selected F's vanish identically.

    Args:
        chart: Chart, tag or name
        selected: Selection such as 'F2,F3' or (2, 3)
        method (str): 'symbolic', 'sampled' or 'both'
        points (int): Rational sample points of the sampled method (>= 12)
        seed (int): Seed of the point sampler

    Returns:
        KernelReport: Basis vectors over the rationals and their verification
    """
    chart = charts.get_chart(chart)
    selected = parse_selection(selected)
    if method not in ('symbolic', 'sampled', 'both'):
        raise SchemaError(f"Unknown kernel method '{method}'")
    if points < 12:
        raise SchemaError(f"Sampled kernel method needs at least 12 points, got {points}")

    dimensions = {}
    basis = None
    agree = True
    if method in ('symbolic', 'both'):
        basis = _symbolic_kernel(chart, selected)
        dimensions['symbolic'] = len(basis)
    if method in ('sampled', 'both'):
        sampled = _sampled_kernel(chart, selected, points, np.random.default_rng(seed))
        dimensions['sampled'] = len(sampled)
        if basis is None:
            basis = sampled
        elif not _same_span(basis, sampled):
            agree = False
            logger.warning(f"{chart.tag.value} {selected}: symbolic and sampled kernels disagree "
                           f"(dimensions {dimensions})")

    verified = verify_kernel_basis(chart, selected, basis)
    if not verified:
        logger.warning(f"{chart.tag.value} {selected}: kernel basis failed verification")
    logger.info(f"{chart.tag.value} kernel of {[F_NAMES[i - 1] for i in selected]}: dimension {len(basis)}")
    return KernelReport(chart.tag, selected, tuple(tuple(b) for b in basis), method,
                        methods_agree=agree, verified=verified, dimensions=dimensions)


# ---------------------------------------------------------------------------
# Branch classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchReport:
    chart: ChartTag
    branch: str
    vanishing: tuple
    first_order_integrable: bool = False

    def to_json(self):
        return {
            'chart': self.chart.value,
            'branch': self.branch,
            'vanishing': [F_NAMES[i - 1] for i in self.vanishing],
            'first_order_integrable': self.first_order_integrable,
        }


def classify_branch(chart, A):
    """
    Decide which side of the chart condition is identically satisfied.

    Branches: 'trivial' (A = 0), 'case1' (both sides identically satisfied,
    nonlinear potentials possible in both components), 'case2' (one side
    identically satisfied) and 'linear' (both components obey linear ODEs).
    """
    chart = charts.get_chart(chart)
    if A.is_zero():
        return BranchReport(chart.tag, 'trivial', (1, 2, 3, 4))
    F = charts.leading_terms(chart, A).F
    zero = tuple(i for i in range(1, 5)
                 if (symcore.normalize(F[i - 1]) if chart.tag is ChartTag.POLAR else tidy(F[i - 1])) == 0)

    if chart.tag is ChartTag.CARTESIAN:
        if 2 in zero and 3 in zero:
            return BranchReport(chart.tag, 'case1', zero)
        if 2 in zero or 3 in zero:
            return BranchReport(chart.tag, 'case2', zero)
    elif chart.tag is ChartTag.POLAR:
        if 1 in zero and 3 in zero:
            B0 = charts.cartesian_to_polar_coeffs(A).B0
            return BranchReport(chart.tag, 'case1', zero, first_order_integrable=B0 != 0)
        if 1 in zero and 2 in zero:
            return BranchReport(chart.tag, 'case2', zero)
    return BranchReport(chart.tag, 'linear', zero)
