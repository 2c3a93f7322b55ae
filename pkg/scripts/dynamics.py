"""
Classical verification layer.

Poisson brackets of phase-space polynomials, assembly of candidate
third-order integrals, the second-order integrals that come with each
separable chart, numerical recovery of the gauge fields g1, g2 from the
second-order determining equations, and conserved-quantity drift along
Hamiltonian trajectories.

Author: Analysis Team
Date: October 2026
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import sympy
from scipy.integrate import cumulative_trapezoid, solve_ivp

import charts
import determine
import symcore
from charts import ChartTag, Coeffs10, SeparablePotential
from errors import (
    ChartMismatchError,
    CompatibilityError,
    DomainError,
    NonPolynomialError,
    SchemaError,
    UnboundSymbolError,
)


logger = logging.getLogger(__name__)

MOMENTA = ('p1', 'p2')
POSITIONS = ('x1', 'x2')

COMPAT_THRESHOLD = 1e-8
GRADIENT_LIMIT = 1e8


# ---------------------------------------------------------------------------
# Brackets and integrals
# ---------------------------------------------------------------------------

def _phase_expr(expr):
    expr = symcore.parse(expr) if isinstance(expr, str) else sympy.sympify(expr)
    if not expr.is_polynomial(*symcore.symbols(*MOMENTA)):
        raise NonPolynomialError(f"{symcore.to_text(expr)} is not polynomial in the momenta")
    return expr


def poisson_bracket(f, h):
    """
    Canonical Poisson bracket {f, h} on the Cartesian phase space.

    Args:
        f, h: Expressions polynomial in p1, p2 with coefficients in x1, x2

    Returns:
        sympy.Expr: sum_i (df/dx_i dh/dp_i - df/dp_i dh/dx_i), normalized

    Raises:
        NonPolynomialError: f or h is not polynomial in the momenta
    """
    f, h = _phase_expr(f), _phase_expr(h)
    total = 0
    for x, p in zip(symcore.symbols(*POSITIONS), symcore.symbols(*MOMENTA)):
        total += sympy.diff(f, x) * sympy.diff(h, p) - sympy.diff(f, p) * sympy.diff(h, x)
    return determine.tidy(total)


def angular_momentum():
    x1, x2, p1, p2 = symcore.symbols('x1', 'x2', 'p1', 'p2')
    return x1 * p2 - x2 * p1


def _gauge_text(g):
    if isinstance(g, sympy.Basic):
        return symcore.to_text(g)
    raise SchemaError("sampled gauge fields have no text form")


@dataclass(frozen=True)
class IntegralCandidate:
    """
    Candidate third-order integral: leading coefficients, gauge fields and hbar.

    g1, g2 are expressions in (x1, x2) or a GaugeFieldGrid-backed sample;
    `potential` is the Cartesian potential expression or a SeparablePotential.
    """

    A: Coeffs10
    g1: object = 0
    g2: object = 0
    hbar: object = 0
    potential: object = None
    name: str = 'candidate'

    def __post_init__(self):
        for attr in ('g1', 'g2'):
            value = getattr(self, attr)
            if isinstance(value, (str, int)):
                value = symcore.parse(value) if isinstance(value, str) else sympy.Integer(value)
                object.__setattr__(self, attr, value)
        object.__setattr__(self, 'hbar', symcore.as_rational(self.hbar))
        if isinstance(self.potential, str):
            object.__setattr__(self, 'potential', symcore.parse(self.potential))

    @property
    def is_symbolic(self):
        return isinstance(self.g1, sympy.Basic) and isinstance(self.g2, sympy.Basic)

    def cartesian_potential(self):
        if self.potential is None:
            raise SchemaError(f"candidate '{self.name}' has no potential")
        if isinstance(self.potential, SeparablePotential):
            return charts.cartesian_potential(self.potential)
        return self.potential

    @classmethod
    def from_json(cls, data):
        """
        Build from the candidate file layout.

        The potential is either expression text in (x1, x2) or an object
        {"chart", "components", "parameters"} describing a separable potential.

        Raises:
            SchemaError: malformed coefficients or potential block
        """
        potential = data.get('potential')
        if isinstance(potential, dict):
            components = potential.get('components', [])
            if len(components) != 2:
                raise SchemaError("a separable potential needs exactly two components")
            potential = SeparablePotential(
                charts.get_chart(potential.get('chart', 'cartesian')).tag,
                components[0], components[1], dict(potential.get('parameters', {})),
            )
        return cls(
            A=Coeffs10.from_mapping(data.get('A', {})),
            g1=data.get('g1', '0'),
            g2=data.get('g2', '0'),
            hbar=data.get('hbar', '0'),
            potential=potential,
            name=data.get('name', 'candidate'),
        )

    def to_json(self):
        if isinstance(self.potential, SeparablePotential):
            potential = {
                'chart': self.potential.chart.value,
                'components': [symcore.to_text(c) for c in (self.potential.component1,
                                                           self.potential.component2)],
                'parameters': {k: str(v) for k, v in sorted(self.potential.parameters.items())},
            }
        elif self.potential is None:
            potential = None
        else:
            potential = symcore.to_text(self.potential)
        return {
            'name': self.name,
            'A': self.A.to_json(),
            'g1': _gauge_text(self.g1),
            'g2': _gauge_text(self.g2),
            'hbar': symcore.rational_text(self.hbar),
            'potential': potential,
        }


def build_integral(candidate):
    """
    Classical phase-space form of a candidate integral.

    X = F1 p1^3 + F2 p1^2 p2 + F3 p1 p2^2 + F4 p2^3 + g1 p1 + g2 p2 with the
    Cartesian F_j of the candidate's coefficients.

    Raises:
        SchemaError: the gauge fields are sampled rather than symbolic
    """
    if not candidate.is_symbolic:
        raise SchemaError("build_integral needs symbolic g1, g2; use the grid residuals for sampled fields")
    p1, p2 = symcore.symbols(*MOMENTA)
    X = charts.cartesian_symbol(candidate.A) + candidate.g1 * p1 + candidate.g2 * p2
    return symcore.normalize(X)


def cartesian_hamiltonian(V):
    """H = (p1^2 + p2^2)/2 + V for a potential expression or SeparablePotential."""
    p1, p2 = symcore.symbols(*MOMENTA)
    if isinstance(V, SeparablePotential):
        V = charts.cartesian_potential(V)
    elif isinstance(V, str):
        V = symcore.parse(V)
    return (p1 ** 2 + p2 ** 2) / 2 + sympy.sympify(V)


# ---------------------------------------------------------------------------
# Second-order integrals of the separable charts
# ---------------------------------------------------------------------------

def _chart_kinetic(chart):
    """Kinetic energy in chart variables and conjugate momenta."""
    J = charts.jacobian(chart)
    metric = (J.T * J).applyfunc(sympy.simplify)
    P = sympy.Matrix([charts.P1, charts.P2])
    return sympy.simplify((P.T * metric.inv() * P)[0, 0] / 2)


@dataclass(frozen=True)
class SecondOrderIntegral:
    """
    Separation constant Y of a separable potential.

    `chart_expr` and `chart_hamiltonian` are written in the chart variables
    and their conjugate momenta (charts.P1, charts.P2); `expr` is Y with the
    Cartesian momenta p1, p2 substituted through P = J^T p.
    """

    chart: ChartTag
    chart_expr: sympy.Expr
    chart_hamiltonian: sympy.Expr

    @property
    def expr(self):
        chart = charts.get_chart(self.chart)
        p = sympy.Matrix(symcore.symbols(*MOMENTA))
        conjugate = charts.jacobian(chart).T * p
        return sympy.expand(self.chart_expr.subs({charts.P1: conjugate[0], charts.P2: conjugate[1]},
                                                 simultaneous=True))

    def bracket(self):
        """{Y, H} computed in the canonical chart coordinates."""
        q1, q2 = charts.get_chart(self.chart).symbols
        total = 0
        for q, P in ((q1, charts.P1), (q2, charts.P2)):
            total += (sympy.diff(self.chart_expr, q) * sympy.diff(self.chart_hamiltonian, P)
                      - sympy.diff(self.chart_expr, P) * sympy.diff(self.chart_hamiltonian, q))
        return total

    def bracket_residual(self, points=20, seed=0):
        """
        Max |{Y, H}| / max(1, |Y|) over random regular phase points.
        """
        chart = charts.get_chart(self.chart)
        rng = np.random.default_rng(seed)
        names = chart.symbols + (charts.P1, charts.P2)
        bracket = sympy.lambdify(names, self.bracket(), modules='numpy', cse=True)
        value = sympy.lambdify(names, self.chart_expr, modules='numpy', cse=True)
        worst = 0.0
        for q1, q2 in determine.random_chart_points(chart, points, rng):
            P1, P2 = rng.uniform(-1.0, 1.0, size=2)
            b = float(bracket(float(q1), float(q2), P1, P2))
            y = float(value(float(q1), float(q2), P1, P2))
            worst = max(worst, abs(b) / max(1.0, abs(y)))
        return worst


def second_order_integral(W):
    """
    The integral responsible for separation of a separable potential.

    Cartesian: P1^2/2 + V1(x1). Polar: P_th^2/2 + S(th). Parabolic and
    elliptic: the Staeckel separation constant of the first variable,
    equal to the parabolic (eta^2 K_xi - xi^2 K_eta)/(xi^2 + eta^2) and the
    elliptic (1 - u^2) P_u^2 / 2 - W1(u) + u^2 H. Only defined up to adding
    multiples of H and constants.

    Raises:
        ChartMismatchError: W has sampled components
    """
    if not W.is_symbolic:
        raise ChartMismatchError("second-order integrals need symbolic components")
    chart = charts.get_chart(W.chart)
    q1, q2 = chart.symbols
    W1, W2 = W.bound()
    P1, P2 = charts.P1, charts.P2
    H = _chart_kinetic(chart) + charts.assemble_potential(chart, W1, W2)

    if chart.tag is ChartTag.CARTESIAN:
        Y = P1 ** 2 / 2 + W1
    elif chart.tag is ChartTag.POLAR:
        Y = P2 ** 2 / 2 + W2
    elif chart.tag is ChartTag.PARABOLIC:
        Y = (q2 ** 2 * (P1 ** 2 / 2 + W1) - q1 ** 2 * (P2 ** 2 / 2 + W2)) / (q1 ** 2 + q2 ** 2)
    else:
        Y = (1 - q1 ** 2) * P1 ** 2 / 2 - W1 + q1 ** 2 * H
    return SecondOrderIntegral(chart.tag, Y, H)


# ---------------------------------------------------------------------------
# Potentials on grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseState:
    x1: float
    x2: float
    p1: float
    p2: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise DomainError(f"phase state {self} is not finite")

    def as_array(self):
        return np.array([self.x1, self.x2, self.p1, self.p2], dtype=float)


@dataclass(frozen=True)
class SampledComponent:
    """
    Potential component V(x) = alpha * w(beta * x) + offset backed by a
    sampled special-function solution.
    """

    solution: object
    alpha: float = 1.0
    beta: float = 1.0
    offset: float = 0.0

    def jet(self, x, order=3):
        """V and its derivatives up to `order` at x."""
        z = self.beta * np.asarray(x, dtype=float)
        w = self.solution.jets(z, order)
        values = [self.alpha * self.beta ** k * w[k] for k in range(order + 1)]
        values[0] = values[0] + self.offset
        return values

    @classmethod
    def from_scaling(cls, solution, scaling):
        return cls(solution, alpha=scaling.alpha, beta=scaling.beta)


def _component_callable(component, variable, order):
    if isinstance(component, SampledComponent):
        return lambda x: component.jet(x, order)[order]
    expr = sympy.diff(component, symcore.symbol(variable), order) if order else component
    unbound = {s.name for s in expr.free_symbols} - {variable}
    if unbound:
        raise UnboundSymbolError(unbound)
    f = symcore.lambdify(expr, (variable,))
    return lambda x: np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x))


class PotentialField:
    """Numeric access to d1^i d2^k V on arrays of Cartesian points."""

    def __init__(self, derivative, description):
        self._derivative = derivative
        self.description = description

    def derivative(self, i, k, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        return np.asarray(self._derivative(i, k, x1, x2), dtype=float)

    def __call__(self, x1, x2):
        return self.derivative(0, 0, x1, x2)

    def gradient(self, x1, x2):
        return self.derivative(1, 0, x1, x2), self.derivative(0, 1, x1, x2)

    @classmethod
    def from_expression(cls, expr):
        expr = symcore.parse(expr) if isinstance(expr, str) else sympy.sympify(expr)
        unbound = {s.name for s in expr.free_symbols} - set(POSITIONS)
        if unbound:
            raise UnboundSymbolError(unbound)
        x1, x2 = symcore.symbols(*POSITIONS)
        cache = {}

        def derivative(i, k, a, b):
            if (i, k) not in cache:
                d = sympy.diff(expr, x1, i, x2, k) if i or k else expr
                f = symcore.lambdify(d, POSITIONS)
                cache[(i, k)] = lambda a, b, f=f: np.broadcast_to(f(a, b), np.shape(a))
            return cache[(i, k)](a, b)

        return cls(derivative, symcore.to_text(expr))

    @classmethod
    def from_separable(cls, W):
        """
        Raises:
            ChartMismatchError: sampled components in a non-Cartesian chart
        """
        if W.is_symbolic:
            return cls.from_expression(charts.cartesian_potential(W))
        if W.chart is not ChartTag.CARTESIAN:
            raise ChartMismatchError("sampled components are only supported in Cartesian charts")
        components = W.bound()
        cache = {}

        def derivative(i, k, a, b):
            if i and k:
                return np.zeros(np.shape(a))
            if i == 0 and k == 0:
                return derivative_of(0, 0, a) + derivative_of(1, 0, b)
            return derivative_of(0, i, a) if i else derivative_of(1, k, b)

        def derivative_of(index, order, x):
            if (index, order) not in cache:
                cache[(index, order)] = _component_callable(components[index], POSITIONS[index], order)
            return cache[(index, order)](x)

        return cls(derivative, 'separable cartesian potential with sampled components')

    @classmethod
    def coerce(cls, V):
        if isinstance(V, PotentialField):
            return V
        if isinstance(V, SeparablePotential):
            return cls.from_separable(V)
        return cls.from_expression(V)


# ---------------------------------------------------------------------------
# Gauge quadrature
# ---------------------------------------------------------------------------

def _cumulative(values, t, axis, origin):
    out = cumulative_trapezoid(values, t, axis=axis, initial=0)
    return out - np.take(out, [origin], axis=axis)


def _every_other(values, axis):
    index = [slice(None)] * values.ndim
    index[axis] = slice(None, None, 2)
    return values[tuple(index)]


def _richardson(values, t, origin, axis=0):
    """
    Signed integral from the coarse node `origin` to every coarse node.

    `values` live on a grid twice as fine as the result along `axis`; the
    trapezoid rule on both grids is combined by Richardson extrapolation.
    """
    fine = _every_other(_cumulative(values, t, axis, 2 * origin), axis)
    coarse = _cumulative(_every_other(values, axis), t[::2], axis, origin)
    return (4 * fine - coarse) / 3


def _central_difference(values, h, axis):
    """Fourth-order central first derivative, interior points only."""
    n = values.shape[axis]
    take = lambda s: np.take(values, range(2 + s, n - 2 + s), axis=axis)  # noqa: E731
    return (-take(2) + 8 * take(1) - 8 * take(-1) + take(-2)) / (12 * h)


def _interior(values):
    return values[2:-2, 2:-2]


@dataclass(frozen=True, eq=False)
class GaugeFieldGrid:
    """Gauge fields sampled on a rectangular Cartesian grid (axis 0 is x1)."""

    x1: np.ndarray
    x2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    basepoint: tuple
    anchor: tuple
    residuals: dict = field(default_factory=dict)
    compat_residual: float = 0.0

    @property
    def max_residual(self):
        return max(self.residuals.values()) if self.residuals else 0.0

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing='ij')

    def to_frame(self):
        X, Y = self.mesh()
        return pd.DataFrame({'x1': X.ravel(), 'x2': Y.ravel(), 'g1': self.g1.ravel(), 'g2': self.g2.ravel()})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

    def to_json(self):
        return {
            'shape': [len(self.x1), len(self.x2)],
            'basepoint': [float(c) for c in self.basepoint],
            'anchor': [float(c) for c in self.anchor],
            'residuals': {k: float(v) for k, v in sorted(self.residuals.items())},
            'compat_residual': float(self.compat_residual),
        }


def _snap(t, value, label):
    index = int(np.argmin(np.abs(t - value)))
    if not np.isclose(t[index], value, rtol=0, atol=1e-12):
        logger.info(f"{label} {value:.6g} moved to grid node {t[index]:.6g}")
    return index


def _leading_on_grid(A, X, Y):
    """F_j and their first partials on a grid: dict (j, i, k) -> array."""
    Fd = determine.cartesian_leading_derivatives(A)
    values = {}
    for j in range(1, 5):
        for i, k in ((0, 0), (1, 0), (0, 1)):
            f = symcore.lambdify(Fd[j - 1](i, k), POSITIONS)
            values[(j, i, k)] = np.broadcast_to(f(X, Y), X.shape).astype(float)
    return values


def _right_hand_sides(F, Vd):
    """a, b, c of the second-order equations g1,1 = a, g1,2 + g2,1 = b, g2,2 = c."""
    a = 3 * F[(1, 0, 0)] * Vd(1, 0) + F[(2, 0, 0)] * Vd(0, 1)
    b = 2 * (F[(2, 0, 0)] * Vd(1, 0) + F[(3, 0, 0)] * Vd(0, 1))
    c = F[(3, 0, 0)] * Vd(1, 0) + 3 * F[(4, 0, 0)] * Vd(0, 1)
    return a, b, c


def solve_g_numeric(V, A, window, basepoint=None, resolution=201, anchor=None,
                    compat_tol=COMPAT_THRESHOLD, gradient_limit=GRADIENT_LIMIT):
    """
    Recover g1, g2 on a grid by line quadrature of the second-order
    determining equations.

    With psi = g1,2 the system gives psi,1 = a,2 and psi,2 = b,2 - c,1, which
    is path independent exactly when the linear compatibility condition
    holds. g1 is integrated up the base column and across rows, g2 along the
    base row and up columns. The gauge is fixed by g1 = g2 = 0 at the base
    point and by a vanishing antisymmetric part (g1,2 - g2,1)/2 at the
    anchor, so a change of base point only shifts g1, g2 by constants.

    Args:
        V: Potential expression, SeparablePotential (sampled components allowed
           in the Cartesian chart) or PotentialField
        A (Coeffs10): Leading coefficients
        window (tuple): ((x1_min, x1_max), (x2_min, x2_max))
        basepoint (tuple): Base point, snapped to the nearest grid node (default: lower corner)
        resolution (int | tuple): Grid points per axis
        anchor (tuple): Rotation anchor, snapped to a node (default: window centre)
        compat_tol (float): Allowed max |linear compatibility| on the grid
        gradient_limit (float): |grad V| treated as a singularity

    Returns:
        GaugeFieldGrid: Sampled g1, g2 with the max residual of each equation

    Raises:
        CompatibilityError: compatibility condition fails on the window
        DomainError: the window touches a singularity of the potential
    """
    field_ = PotentialField.coerce(V)
    (xa, xb), (ya, yb) = window
    n, m = (resolution, resolution) if np.isscalar(resolution) else resolution
    if n < 5 or m < 5:
        raise SchemaError("resolution must be at least 5 points per axis")
    xf, yf = np.linspace(xa, xb, 2 * n - 1), np.linspace(ya, yb, 2 * m - 1)
    x, y = xf[::2], yf[::2]
    Xf, Yf = np.meshgrid(xf, yf, indexing='ij')
    X, Y = Xf[::2, ::2], Yf[::2, ::2]

    basepoint = basepoint if basepoint is not None else (xa, ya)
    anchor = anchor if anchor is not None else ((xa + xb) / 2, (ya + yb) / 2)
    ix, iy = _snap(x, basepoint[0], 'base x1'), _snap(y, basepoint[1], 'base x2')
    ia, ja = _snap(x, anchor[0], 'anchor x1'), _snap(y, anchor[1], 'anchor x2')
    x0, y0 = x[ix], y[iy]

    cache = {}

    def Vd(i, k):
        if (i, k) not in cache:
            cache[(i, k)] = field_.derivative(i, k, Xf, Yf)
        return cache[(i, k)]

    gradient = np.hypot(Vd(1, 0), Vd(0, 1))
    if not np.all(np.isfinite(gradient)) or gradient.max() > gradient_limit:
        raise DomainError(f"window {window} touches a singularity of the potential")

    compat = determine.linear_compat_numeric(A, X, Y, lambda i, k, a, b: Vd(i, k)[::2, ::2])
    compat_residual = float(np.max(np.abs(compat)))
    if compat_residual > compat_tol:
        raise CompatibilityError(f"linear compatibility residual {compat_residual:.3e} exceeds {compat_tol:g}")

    F = _leading_on_grid(A, Xf, Yf)
    a, b, c = _right_hand_sides(F, Vd)
    a_y = (3 * (F[(1, 0, 1)] * Vd(1, 0) + F[(1, 0, 0)] * Vd(1, 1))
           + F[(2, 0, 1)] * Vd(0, 1) + F[(2, 0, 0)] * Vd(0, 2))
    psi_y = (2 * (F[(2, 0, 1)] * Vd(1, 0) + F[(2, 0, 0)] * Vd(1, 1)
                  + F[(3, 0, 1)] * Vd(0, 1) + F[(3, 0, 0)] * Vd(0, 2))
             - (F[(3, 1, 0)] * Vd(1, 0) + F[(3, 0, 0)] * Vd(2, 0)
                + 3 * (F[(4, 1, 0)] * Vd(0, 1) + F[(4, 0, 0)] * Vd(1, 1))))

    # psi along the base column, g1 there as a repeated integral
    column = psi_y[2 * ix, :]
    psi_column = _richardson(column, yf, iy)
    g1_column = y * psi_column - _richardson(yf * column, yf, iy)
    g1 = g1_column[None, :] + _richardson(a[:, ::2], xf, ix, axis=0)

    row = a_y[:, 2 * iy]
    moment = x * _richardson(row, xf, ix) - _richardson(xf * row, xf, ix)
    g2_row = _richardson(b[:, 2 * iy], xf, ix) - moment
    g2 = g2_row[:, None] + _richardson(c[::2, :], yf, iy, axis=1)

    psi_anchor = psi_column[ja] + _richardson(a_y[:, 2 * ja], xf, ix)[ia]
    delta = -(psi_anchor - b[2 * ia, 2 * ja] / 2)
    g1 = g1 + delta * (Y - y0)
    g2 = g2 - delta * (X - x0)

    hx, hy = x[1] - x[0], y[1] - y[0]
    a_c, b_c, c_c = a[::2, ::2], b[::2, ::2], c[::2, ::2]
    residuals = {
        'g1_x1': float(np.max(np.abs(_central_difference(g1, hx, 0)[:, 2:-2] - _interior(a_c)))),
        'mixed': float(np.max(np.abs(_central_difference(g1, hy, 1)[2:-2, :]
                                     + _central_difference(g2, hx, 0)[:, 2:-2] - _interior(b_c)))),
        'g2_x2': float(np.max(np.abs(_central_difference(g2, hy, 1)[2:-2, :] - _interior(c_c)))),
    }
    logger.info(f"Gauge quadrature on {n}x{m} grid: max equation residual {max(residuals.values()):.3e}")
    return GaugeFieldGrid(x, y, g1, g2, (float(x0), float(y0)), (float(x[ia]), float(y[ja])),
                          residuals, compat_residual)


@dataclass(frozen=True)
class GaugeFit:
    """Killing-field shift (c1, c2, omega) fitted into the zeroth-order equation."""

    c1: float
    c2: float
    omega: float
    raw_residual: float
    max_residual: float

    def to_json(self):
        return {k: float(getattr(self, k)) for k in ('c1', 'c2', 'omega', 'raw_residual', 'max_residual')}


def gauge_grid_residuals(grid, V, A, hbar=0.0):
    """
    Zeroth-order residual of sampled gauge fields after fitting the gauge
    freedom g1 += c1 - omega (x2 - y0), g2 += c2 + omega (x1 - x0) by least squares.

    Only interior nodes are used, matching the equation residuals of the grid.
    """
    field_ = PotentialField.coerce(V)
    X, Y = grid.mesh()
    x0, y0 = grid.basepoint
    residual = determine.zeroth_residual_numeric(
        A, X, Y, grid.g1, grid.g2, lambda i, k, a, b: field_.derivative(i, k, a, b), hbar)
    V1, V2 = field_.gradient(X, Y)
    columns = np.column_stack([_interior(V1).ravel(), _interior(V2).ravel(),
                               _interior(-(Y - y0) * V1 + (X - x0) * V2).ravel()])
    target = _interior(residual).ravel()
    shift, *_ = np.linalg.lstsq(columns, -target, rcond=None)
    remaining = target + columns @ shift
    fit = GaugeFit(float(shift[0]), float(shift[1]), float(shift[2]),
                   float(np.max(np.abs(target))), float(np.max(np.abs(remaining))))
    logger.info(f"Zeroth-order grid residual {fit.max_residual:.3e} after gauge fit")
    return fit


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DriftReport:
    """Time series of monitored quantities and their relative drift."""

    t: np.ndarray
    names: tuple
    values: np.ndarray
    truncated: bool = False

    @property
    def drifts(self):
        initial = self.values[0]
        scale = np.maximum(1.0, np.abs(initial))
        drift = np.max(np.abs(self.values - initial), axis=0) / scale
        return dict(zip(self.names, (float(d) for d in drift)))

    @property
    def max_drift(self):
        return max(self.drifts.values(), default=0.0)

    def to_frame(self):
        frame = pd.DataFrame(self.values, columns=list(self.names))
        frame.insert(0, 't', self.t)
        return frame

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

    def to_json(self):
        return {'drifts': self.drifts, 't_end': float(self.t[-1]), 'truncated': self.truncated}


def trajectory_drift(H, integrals, state, T, dt, tol=1e-10, gradient_limit=GRADIENT_LIMIT, names=None):
    """
    Integrate Hamilton's equations and monitor conserved quantities.

    Args:
        H: Hamiltonian in (x1, x2, p1, p2)
        integrals (list): Phase-space expressions to monitor
        state (PhaseState): Initial state
        T (float): Duration
        dt (float): Sampling interval of the report
        tol (float): Relative tolerance of DOP853 (absolute tolerance is tol/100)
        gradient_limit (float): |dH/dx| at which the run stops as singular
        names (list): Column names, default Q1..Qn

    Returns:
        DriftReport: Sampled quantities; truncated if a singularity was hit
    """
    H = symcore.parse(H) if isinstance(H, str) else sympy.sympify(H)
    integrals = [symcore.parse(q) if isinstance(q, str) else sympy.sympify(q) for q in integrals]
    names = tuple(names or [f"Q{i + 1}" for i in range(len(integrals))])
    if len(names) != len(integrals):
        raise SchemaError("one name per monitored quantity")
    phase = POSITIONS + MOMENTA
    x1, x2, p1, p2 = symcore.symbols(*phase)
    flow = symcore.lambdify([sympy.diff(H, p1), sympy.diff(H, p2), -sympy.diff(H, x1), -sympy.diff(H, x2)],
                           phase)

    def rhs(t, s):
        return np.asarray(flow(*s), dtype=float)

    def singular(t, s):
        return gradient_limit - np.hypot(*rhs(t, s)[2:])

    singular.terminal = True
    t_eval = np.arange(0.0, T, dt)
    t_eval = np.append(t_eval[t_eval < T - 1e-9 * dt], T)
    result = solve_ivp(rhs, (0.0, T), state.as_array(), method='DOP853', t_eval=t_eval,
                       rtol=tol, atol=tol * 1e-2, events=singular)
    truncated = result.status != 0
    if truncated:
        logger.warning(f"trajectory stopped at t = {result.t[-1]:.6g}: {result.message}")
    values = np.zeros((len(result.t), len(integrals)))
    if integrals:
        monitor = symcore.lambdify(integrals, phase)
        for row, s in zip(values, result.y.T):
            row[:] = np.broadcast_to(np.asarray(monitor(*s), dtype=float), (len(integrals),))
    report = DriftReport(result.t, names, values, truncated)
    logger.info(f"Trajectory drift over T = {result.t[-1]:.6g}: "
                + ', '.join(f"{k} {v:.2e}" for k, v in report.drifts.items()))
    return report
