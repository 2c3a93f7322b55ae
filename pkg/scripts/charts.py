"""
Coordinate charts and leading-order terms of third-order integrals.

Holds the four separable charts of the Euclidean plane (Cartesian, polar,
parabolic, elliptic), their maps to Cartesian coordinates, the leading-term
functions F1..F4 of a third-order integral in each chart, the Cartesian to
polar coefficient dictionary and the separable potentials themselves.

Convention: for chart variables (q1, q2) the classical leading symbol of the
integral is F1*P1^3 + F2*P1^2*P2 + F3*P1*P2^2 + F4*P2^3, Pk conjugate to qk.

Author: Analysis Team
Date: October 2026
"""

import logging
from dataclasses import dataclass, field, fields
from enum import Enum

import sympy

import symcore
from errors import ChartMismatchError, DomainError, SchemaError


logger = logging.getLogger(__name__)


class ChartTag(str, Enum):
    CARTESIAN = 'cartesian'
    POLAR = 'polar'
    PARABOLIC = 'parabolic'
    ELLIPTIC = 'elliptic'


@dataclass(frozen=True)
class Chart:
    """A separable coordinate chart of the Euclidean plane."""

    tag: ChartTag
    variables: tuple
    constraints: tuple

    @property
    def symbols(self):
        return symcore.symbols(*self.variables)


CHARTS = {
    ChartTag.CARTESIAN: Chart(ChartTag.CARTESIAN, ('x1', 'x2'), ()),
    ChartTag.POLAR: Chart(ChartTag.POLAR, ('r', 'th'), ('r > 0',)),
    ChartTag.PARABOLIC: Chart(ChartTag.PARABOLIC, ('xi', 'eta'), ('xi^2 + eta^2 > 0',)),
    ChartTag.ELLIPTIC: Chart(ChartTag.ELLIPTIC, ('u', 'v'), ('-1 <= u <= 1', 'v >= 1')),
}

# Conjugate momenta of the chart variables, internal to the pullback.
P1, P2 = sympy.symbols('P1 P2', real=True)


def get_chart(chart):
    """
    Resolve a chart from a Chart, a ChartTag or its name.

    Raises:
        SchemaError: unknown chart name
    """
    if isinstance(chart, Chart):
        return chart
    try:
        return CHARTS[ChartTag(str(getattr(chart, 'value', chart)).lower())]
    except ValueError:
        raise SchemaError(f"Unknown chart '{chart}' (expected one of "
                          f"{', '.join(t.value for t in ChartTag)})") from None


# ---------------------------------------------------------------------------
# Coefficients
# ---------------------------------------------------------------------------

class _ExactCoefficients:
    """Shared behaviour of the two exact coefficient records."""

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, sympy.sympify(getattr(self, f.name)))

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    def as_tuple(self):
        return tuple(getattr(self, n) for n in self.names())

    @classmethod
    def from_sequence(cls, values):
        values = tuple(values)
        if len(values) != len(cls.names()):
            raise SchemaError(f"{cls.__name__} needs {len(cls.names())} values, got {len(values)}")
        return cls(*values)

    @classmethod
    def from_mapping(cls, mapping):
        """
        Build from a name -> value mapping; missing names are zero.

        Values may be ints, Fractions, sympy rationals or "p/q" strings.

        Raises:
            SchemaError: unknown name or non-rational value
        """
        unknown = set(mapping) - set(cls.names())
        if unknown:
            raise SchemaError(f"Unknown coefficient names: {', '.join(sorted(unknown))}")
        values = {}
        for name, value in mapping.items():
            try:
                values[name] = symcore.as_rational(value)
            except Exception as exc:
                raise SchemaError(f"Coefficient {name}: {exc}") from None
        return cls(**values)

    @classmethod
    def unit(cls, name):
        return cls.from_mapping({name: 1})

    def to_json(self):
        return {n: symcore.rational_text(v) for n, v in zip(self.names(), self.as_tuple())}

    def scaled(self, factor):
        return type(self)(*[factor * v for v in self.as_tuple()])

    def is_zero(self):
        return all(v == 0 for v in self.as_tuple())


@dataclass(frozen=True)
class Coeffs10(_ExactCoefficients):
    """The ten constants A_jkl of the leading part sum A_jkl L3^j p1^k p2^l."""

    A300: object = 0
    A210: object = 0
    A201: object = 0
    A120: object = 0
    A111: object = 0
    A102: object = 0
    A030: object = 0
    A021: object = 0
    A012: object = 0
    A003: object = 0

    @classmethod
    def symbolic(cls):
        """Coefficients as the parameter symbols A300..A003."""
        return cls(*symcore.symbols(*symcore.COEFFICIENT_NAMES))


@dataclass(frozen=True)
class PolarCoeffs(_ExactCoefficients):
    A1: object = 0
    A2: object = 0
    A3: object = 0
    A4: object = 0
    B0: object = 0
    B1: object = 0
    B2: object = 0
    C1: object = 0
    C2: object = 0
    D0: object = 0


def cartesian_to_polar_coeffs(A):
    """Linear dictionary from the A_jkl to the polar constants A1..D0."""
    half, quarter = sympy.Rational(1, 2), sympy.Rational(1, 4)
    return PolarCoeffs(
        A1=(A.A030 - A.A012) * quarter,
        A2=(A.A021 - A.A003) * quarter,
        A3=(3 * A.A030 + A.A012) * quarter,
        A4=(3 * A.A003 + A.A021) * quarter,
        B0=(A.A120 + A.A102) * half,
        B1=(A.A120 - A.A102) * half,
        B2=A.A111 * half,
        C1=A.A210,
        C2=A.A201,
        D0=A.A300,
    )


def polar_to_cartesian_coeffs(P):
    """Inverse of cartesian_to_polar_coeffs."""
    return Coeffs10(
        A300=P.D0,
        A210=P.C1,
        A201=P.C2,
        A120=P.B0 + P.B1,
        A111=2 * P.B2,
        A102=P.B0 - P.B1,
        A030=P.A1 + P.A3,
        A021=P.A4 + 3 * P.A2,
        A012=P.A3 - 3 * P.A1,
        A003=P.A4 - P.A2,
    )


def polar_coefficient_matrix():
    """10x10 rational matrix of the Cartesian -> polar dictionary."""
    images = [cartesian_to_polar_coeffs(Coeffs10.unit(n)).as_tuple() for n in Coeffs10.names()]
    return sympy.Matrix(images).T


# ---------------------------------------------------------------------------
# Maps
# ---------------------------------------------------------------------------

def cartesian_map(chart):
    """(x1, x2) as expressions in the chart variables."""
    chart = get_chart(chart)
    q1, q2 = chart.symbols
    if chart.tag is ChartTag.CARTESIAN:
        return q1, q2
    if chart.tag is ChartTag.POLAR:
        return q1 * sympy.cos(q2), q1 * sympy.sin(q2)
    if chart.tag is ChartTag.PARABOLIC:
        return (q1 ** 2 - q2 ** 2) / 2, q1 * q2
    return q1 * q2, sympy.sqrt(1 - q1 ** 2) * sympy.sqrt(q2 ** 2 - 1)


def inverse_map(chart):
    """
    Chart variables as expressions in (x1, x2).

    Parabolic and elliptic inverses are the branches covering x2 >= 0.
    """
    chart = get_chart(chart)
    x1, x2 = symcore.symbols('x1', 'x2')
    radius = sympy.sqrt(x1 ** 2 + x2 ** 2)
    if chart.tag is ChartTag.CARTESIAN:
        return x1, x2
    if chart.tag is ChartTag.POLAR:
        return radius, sympy.atan2(x2, x1)
    if chart.tag is ChartTag.PARABOLIC:
        return sympy.sqrt(radius + x1), sympy.sqrt(radius - x1)
    rho = x1 ** 2 + x2 ** 2 + 1
    v = sympy.sqrt((rho + sympy.sqrt(rho ** 2 - 4 * x1 ** 2)) / 2)
    return x1 / v, v


def check_domain(chart, point):
    """
    Raises:
        DomainError: point violates one of the chart constraints
    """
    chart = get_chart(chart)
    q1, q2 = (float(symcore.coordinate(c)) for c in point)
    if chart.tag is ChartTag.POLAR and not q1 > 0:
        raise DomainError(f"polar point {point} violates r > 0")
    if chart.tag is ChartTag.PARABOLIC and not q1 ** 2 + q2 ** 2 > 0:
        raise DomainError(f"parabolic point {point} violates xi^2 + eta^2 > 0")
    if chart.tag is ChartTag.ELLIPTIC:
        if not -1 <= q1 <= 1:
            raise DomainError(f"elliptic point {point} violates -1 <= u <= 1")
        if not q2 >= 1:
            raise DomainError(f"elliptic point {point} violates v >= 1")


def to_cartesian(chart, point):
    """
    Cartesian image (x1, x2) of a chart point.

    Exact inputs give exact outputs; float inputs give sympy Floats.

    Raises:
        DomainError: point outside the chart domain
    """
    chart = get_chart(chart)
    check_domain(chart, point)
    subs = dict(zip(chart.symbols, (symcore.coordinate(c) for c in point)))
    return tuple(sympy.sympify(e).subs(subs) for e in cartesian_map(chart))


def jacobian(chart):
    """Matrix d x_i / d q_k in chart variables."""
    chart = get_chart(chart)
    xs = cartesian_map(chart)
    return sympy.Matrix(2, 2, lambda i, k: sympy.diff(xs[i], chart.symbols[k]))


def chart_momenta(chart):
    """
    Cartesian momenta (p1, p2) in chart variables and conjugate momenta P1, P2.

    From P = J^T p, so p = (J^T)^-1 P.
    """
    chart = get_chart(chart)
    inverse = jacobian(chart).T.inv()
    p = inverse * sympy.Matrix([P1, P2])
    return tuple(sympy.simplify(c) for c in p)


# ---------------------------------------------------------------------------
# Leading terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeadingTerms:
    """F1..F4 of one chart; elliptic charts also carry the numerators F^_j."""

    chart: ChartTag
    F: tuple
    numerators: tuple = None

    def select(self, indices):
        """Functions for 1-based indices, numerators when present."""
        source = self.numerators if self.numerators is not None else self.F
        return tuple(source[i - 1] for i in indices)


def _cartesian_terms(A, x1, x2):
    F1 = -A.A300 * x2 ** 3 + A.A210 * x2 ** 2 - A.A120 * x2 + A.A030
    F2 = (3 * A.A300 * x1 * x2 ** 2 - 2 * A.A210 * x1 * x2 + A.A201 * x2 ** 2
          + A.A120 * x1 - A.A111 * x2 + A.A021)
    F3 = (-3 * A.A300 * x1 ** 2 * x2 - 2 * A.A201 * x1 * x2 + A.A210 * x1 ** 2
          + A.A111 * x1 - A.A102 * x2 + A.A012)
    F4 = A.A300 * x1 ** 3 + A.A201 * x1 ** 2 + A.A102 * x1 + A.A003
    return F1, F2, F3, F4


def _polar_terms(A, r, th):
    P = cartesian_to_polar_coeffs(A)
    sin, cos = sympy.sin, sympy.cos
    F1 = P.A1 * cos(3 * th) + P.A2 * sin(3 * th) + P.A3 * cos(th) + P.A4 * sin(th)
    F2 = ((-3 * P.A1 * sin(3 * th) + 3 * P.A2 * cos(3 * th) - P.A3 * sin(th) + P.A4 * cos(th)) / r
          + P.B1 * cos(2 * th) + P.B2 * sin(2 * th) + P.B0)
    F3 = ((-3 * P.A1 * cos(3 * th) - 3 * P.A2 * sin(3 * th) + P.A3 * cos(th) + P.A4 * sin(th)) / r ** 2
          + (-2 * P.B1 * sin(2 * th) + 2 * P.B2 * cos(2 * th)) / r
          + P.C1 * cos(th) + P.C2 * sin(th))
    F4 = ((P.A1 * sin(3 * th) - P.A2 * cos(3 * th) - P.A3 * sin(th) + P.A4 * cos(th)) / r ** 3
          - (P.B1 * cos(2 * th) + P.B2 * sin(2 * th) - P.B0) / r ** 2
          - (P.C1 * sin(th) - P.C2 * cos(th)) / r
          + P.D0)
    return F1, F2, F3, F4


def _parabolic_terms(A, xi, eta):
    s = xi ** 2 + eta ** 2
    F1 = (-eta ** 3 * A.A300 / 8
          + eta ** 2 * (xi * A.A210 + eta * A.A201) / (4 * s)
          - (xi ** 2 * eta * A.A120 + eta ** 2 * xi * A.A111 + eta ** 3 * A.A102) / (2 * s ** 2)
          + (xi ** 3 * A.A030 + xi ** 2 * eta * A.A021 + eta ** 2 * xi * A.A012
             + eta ** 3 * A.A003) / s ** 3)
    F2 = (3 * eta ** 2 * xi * A.A300 / 8
          - (eta * (eta ** 2 + 2 * xi ** 2) * A.A210 + eta ** 2 * xi * A.A201) / (4 * s)
          + (xi * (2 * eta ** 2 + xi ** 2) * A.A120 + eta ** 3 * A.A111
             - eta ** 2 * xi * A.A102) / (2 * s ** 2)
          - (3 * xi ** 2 * eta * A.A030 + xi * (2 * eta ** 2 - xi ** 2) * A.A021
             + eta * (eta ** 2 - 2 * xi ** 2) * A.A012 - 3 * eta ** 2 * xi * A.A003) / s ** 3)
    F3 = (-3 * eta * xi ** 2 * A.A300 / 8
          + (xi * (2 * eta ** 2 + xi ** 2) * A.A210 - eta * xi ** 2 * A.A201) / (4 * s)
          + (xi ** 3 * A.A111 + eta * xi ** 2 * A.A102
             - eta * (eta ** 2 + 2 * xi ** 2) * A.A120) / (2 * s ** 2)
          + (3 * eta ** 2 * xi * A.A030 + eta * (eta ** 2 - 2 * xi ** 2) * A.A021
             + xi * (xi ** 2 - 2 * eta ** 2) * A.A012 + 3 * eta * xi ** 2 * A.A003) / s ** 3)
    F4 = (xi ** 3 * A.A300 / 8
          + (xi ** 3 * A.A201 - eta * xi ** 2 * A.A210) / (4 * s)
          + (eta ** 2 * xi * A.A120 - eta * xi ** 2 * A.A111 + xi ** 3 * A.A102) / (2 * s ** 2)
          + (xi ** 3 * A.A003 + eta ** 2 * xi * A.A021 - eta * xi ** 2 * A.A012
             - eta ** 3 * A.A030) / s ** 3)
    return F1, F2, F3, F4


def elliptic_numerators(A, u, v, sa, sb):
    """
    Numerators F^_j with F_j = F^_j / (u^2 - v^2)^3.

    `sa` and `sb` stand for sqrt(1 - u^2) and sqrt(v^2 - 1); passing plain
    symbols keeps the result polynomial in (u, v, sa, sb) with sa, sb of
    degree at most one, which is what the kernel analysis needs.
    """
    M, N = 1 - u ** 2, v ** 2 - 1
    F1 = (M * sa * N * sb * (v ** 3 * A.A300 + u * v ** 2 * A.A201 + u ** 2 * v * A.A102 + u ** 3 * A.A003)
          + M ** 2 * sa * sb * (v ** 3 * A.A120 + u * v ** 2 * A.A021)
          - M ** 2 * N * (v ** 3 * A.A210 + u * v ** 2 * A.A111 + u ** 2 * v * A.A012)
          - M ** 3 * v ** 3 * A.A030)
    F2 = (-M * sa * N * sb * (3 * u * v ** 2 * A.A300 + v * (2 * u ** 2 + v ** 2) * A.A201
                              + u * (u ** 2 + 2 * v ** 2) * A.A102 + 3 * u ** 2 * v * A.A003)
          + M * sa * sb * ((u ** 2 + 2 * v ** 2 - 3) * u * v ** 2 * A.A120
                           + v * (3 * u ** 2 * v ** 2 - 2 * u ** 2 - v ** 2) * A.A021)
          - M * N * (v ** 2 * u * (2 * u ** 2 + v ** 2 - 3) * A.A210
                     + v * (u ** 4 + 2 * u ** 2 * v ** 2 - 2 * u ** 2 - v ** 2) * A.A111
                     + u * (3 * u ** 2 * v ** 2 - u ** 2 - 2 * v ** 2) * A.A012)
          - 3 * M ** 2 * N * u * v ** 2 * A.A030)
    F3 = (M * sa * N * sb * (3 * u ** 2 * v * A.A300 + u * (u ** 2 + 2 * v ** 2) * A.A201
                             + v * (2 * u ** 2 + v ** 2) * A.A102 + 3 * u * v ** 2 * A.A003)
          + sa * N * sb * ((2 * u ** 2 + v ** 2 - 3) * u ** 2 * v * A.A120
                           + u * (3 * u ** 2 * v ** 2 - u ** 2 - 2 * v ** 2) * A.A021)
          + M * N * (u ** 2 * v * (u ** 2 + 2 * v ** 2 - 3) * A.A210
                     + u * (v ** 4 + 2 * u ** 2 * v ** 2 - u ** 2 - 2 * v ** 2) * A.A111
                     + v * (3 * u ** 2 * v ** 2 - 2 * u ** 2 - v ** 2) * A.A012)
          - 3 * M * N ** 2 * u ** 2 * v * A.A030)
    F4 = (-M * sa * N * sb * (u ** 3 * A.A300 + u ** 2 * v * A.A201 + u * v ** 2 * A.A102 + v ** 3 * A.A003)
          - sa * N ** 2 * sb * (u ** 3 * A.A120 + u ** 2 * v * A.A021)
          - M * N ** 2 * (u ** 3 * A.A210 + u ** 2 * v * A.A111 + u * v ** 2 * A.A012)
          - N ** 3 * u ** 3 * A.A030)
    return F1, F2, F3, F4


def leading_terms(chart, A):
    """
    F1..F4 of a chart for the coefficients A (numeric or symbolic).

    Args:
        chart: Chart, tag or name
        A (Coeffs10): Leading coefficients

    Returns:
        LeadingTerms: Functions in the chart variables
    """
    chart = get_chart(chart)
    q1, q2 = chart.symbols
    if chart.tag is ChartTag.CARTESIAN:
        return LeadingTerms(chart.tag, _cartesian_terms(A, q1, q2))
    if chart.tag is ChartTag.POLAR:
        return LeadingTerms(chart.tag, _polar_terms(A, q1, q2))
    if chart.tag is ChartTag.PARABOLIC:
        return LeadingTerms(chart.tag, _parabolic_terms(A, q1, q2))

    sa, sb = sympy.sqrt(1 - q1 ** 2), sympy.sqrt(q2 ** 2 - 1)
    numerators = elliptic_numerators(A, q1, q2, sa, sb)
    denominator = (q1 ** 2 - q2 ** 2) ** 3
    return LeadingTerms(chart.tag, tuple(n / denominator for n in numerators), numerators)


def cartesian_symbol(A, p1=None, p2=None):
    """Classical leading symbol F1 p1^3 + F2 p1^2 p2 + F3 p1 p2^2 + F4 p2^3."""
    x1, x2 = symcore.symbols('x1', 'x2')
    if p1 is None:
        p1, p2 = symcore.symbols('p1', 'p2')
    F1, F2, F3, F4 = _cartesian_terms(A, x1, x2)
    return F1 * p1 ** 3 + F2 * p1 ** 2 * p2 + F3 * p1 * p2 ** 2 + F4 * p2 ** 3


def pulled_back_leading_terms(chart, A):
    """
    Leading terms obtained by transforming the Cartesian symbol into the chart.

    Independent of the transcribed chart formulas; used to cross-check them.
    """
    chart = get_chart(chart)
    x1, x2 = symcore.symbols('x1', 'x2')
    p1, p2 = chart_momenta(chart)
    symbol = cartesian_symbol(A, p1, p2)
    symbol = symbol.subs(dict(zip((x1, x2), cartesian_map(chart))), simultaneous=True)
    poly = sympy.Poly(sympy.expand(symbol), P1, P2)
    return tuple(poly.coeff_monomial(P1 ** (3 - k) * P2 ** k) for k in range(4))


# ---------------------------------------------------------------------------
# Separable potentials and Hamiltonians
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparablePotential:
    """
    A chart tag plus two one-variable potential components.

    Components are expressions in their own chart variable or sampled
    components (objects with a `jet(x, order)` method, see dynamics). The
    parameters map (a, ap, a1, a2, sigma, ...) is substituted by `bound()`.
    """

    chart: ChartTag
    component1: object
    component2: object
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        chart = get_chart(self.chart)
        object.__setattr__(self, 'chart', chart.tag)
        for index, comp in enumerate((self.component1, self.component2)):
            if isinstance(comp, (sympy.Basic, int, float, str)):
                comp = symcore.parse(comp) if isinstance(comp, str) else sympy.sympify(comp)
                object.__setattr__(self, f'component{index + 1}', comp)
                own = chart.variables[index]
                foreign = {s.name for s in comp.free_symbols if symcore.is_variable(s.name)} - {own}
                if foreign:
                    raise DomainError(f"component {index + 1} of a {chart.tag.value} potential "
                                      f"may depend only on {own}, found {sorted(foreign)}")

    @property
    def is_symbolic(self):
        return all(isinstance(c, sympy.Basic) for c in (self.component1, self.component2))

    def bound(self):
        """Components with the parameter bindings substituted."""
        subs = {symcore.symbol(k): symcore.as_rational(v) if isinstance(v, str) else v
                for k, v in self.parameters.items()}
        return tuple(c.subs(subs) if isinstance(c, sympy.Basic) else c
                     for c in (self.component1, self.component2))


def assemble_potential(chart, W1, W2):
    """Potential in chart variables from its two components."""
    chart = get_chart(chart)
    q1, q2 = chart.symbols
    if chart.tag is ChartTag.CARTESIAN:
        return W1 + W2
    if chart.tag is ChartTag.POLAR:
        return W1 + W2 / q1 ** 2
    if chart.tag is ChartTag.PARABOLIC:
        return (W1 + W2) / (q1 ** 2 + q2 ** 2)
    return (W1 + W2) / (q1 ** 2 - q2 ** 2)


def cartesian_potential(W):
    """
    Potential of a symbolic SeparablePotential as an expression in (x1, x2).

    Raises:
        ChartMismatchError: the potential has sampled components
    """
    if not W.is_symbolic:
        raise ChartMismatchError("sampled components have no symbolic Cartesian form")
    chart = get_chart(W.chart)
    W1, W2 = W.bound()
    in_chart = assemble_potential(chart, W1, W2)
    if chart.tag is ChartTag.CARTESIAN:
        return in_chart
    return in_chart.subs(dict(zip(chart.symbols, inverse_map(chart))), simultaneous=True)


def hamiltonian(chart, W, hbar=0):
    """
    Classical Hamiltonian of a separable potential, in Cartesian phase space.

    `hbar` is accepted for symmetry with the quantum determining equations;
    the phase-space function does not depend on it.

    Returns:
        tuple: (kinetic term in p1, p2; scalar potential in x1, x2)

    Raises:
        ChartMismatchError: W is tagged with another chart
    """
    chart = get_chart(chart)
    if W.chart is not chart.tag:
        raise ChartMismatchError(f"potential is tagged {W.chart.value}, chart is {chart.tag.value}")
    p1, p2 = symcore.symbols('p1', 'p2')
    kinetic = (p1 ** 2 + p2 ** 2) / 2
    potential = cartesian_potential(W)
    logger.debug(f"{chart.tag.value} Hamiltonian potential: {symcore.to_text(potential)}")
    return kinetic, potential
