import numpy as np
import pytest
import sympy

import charts
import determine
import symcore
from charts import ChartTag, Coeffs10
from errors import CompatibilityError, DomainError, SchemaError, SingularPointError


def sample_coefficients(seed):
    rng = np.random.default_rng(seed)
    return Coeffs10.from_sequence(
        [sympy.Rational(int(rng.integers(-6, 7)), int(rng.integers(1, 4))) for _ in range(10)])


# ---------------------------------------------------------------------------
# Cartesian determining equations
# ---------------------------------------------------------------------------

def test_oscillator_satisfies_every_equation(oscillator):
    V, A, g1, g2 = oscillator['V'], oscillator['A'], oscillator['g1'], oscillator['g2']
    assert determine.g_residuals(V, A, g1, g2) == (0, 0, 0)
    assert determine.zeroth_residual(V, A, g1, g2) == 0
    assert determine.zeroth_residual(V, A, g1, g2, hbar='3/2') == 0
    assert determine.linear_compat(V, A) == 0


def test_corrupted_gauge_field_is_detected(oscillator):
    V, A, g2 = oscillator['V'], oscillator['A'], oscillator['g2']
    g1 = oscillator['g1'] + symcore.symbol('x1') / 10
    first, mixed, last = determine.g_residuals(V, A, g1, g2)
    assert first == sympy.Rational(1, 10)
    assert mixed == 0 and last == 0
    assert determine.zeroth_residual(V, A, g1, g2) == symcore.symbol('x1') ** 2 / 10


def test_gauge_fields_must_not_depend_on_momenta(oscillator):
    with pytest.raises(DomainError):
        determine.g_residuals(oscillator['V'], oscillator['A'], 'p1*x1', '0')


def test_zeroth_equation_carries_hbar_corrections():
    x1, x2, hbar = symcore.symbols('x1', 'x2', 'hbar')
    A = Coeffs10.unit('A003')
    residual = determine.zeroth_residual('x2^4', A, 0, 0, hbar='hbar')
    # F4 = 1 multiplies V,222 = 24 x2
    assert residual == -6 * hbar ** 2 * x2


def test_linear_compat_is_the_integrability_condition_of_the_gauge_system():
    x1, x2 = symcore.symbols('x1', 'x2')
    V = sympy.sin(x1) * x2 ** 3 + x1 ** 4 * x2 + sympy.cos(x2) * x1
    A = sample_coefficients(1)
    F1, F2, F3, F4 = charts.leading_terms('cartesian', A).F
    V1, V2 = sympy.diff(V, x1), sympy.diff(V, x2)
    a = 3 * F1 * V1 + F2 * V2
    b = 2 * (F2 * V1 + F3 * V2)
    c = F3 * V1 + 3 * F4 * V2
    integrability = sympy.diff(a, x2, 2) - sympy.diff(b, x1, x2) + sympy.diff(c, x1, 2)
    assert determine.tidy(determine.linear_compat(V, A) + integrability) == 0


def test_numeric_compat_matches_symbolic():
    x1, x2 = symcore.symbols('x1', 'x2')
    V = x1 ** 3 * x2 + x2 ** 4 - x1 ** 2 * x2 ** 2
    A = sample_coefficients(2)
    exact = symcore.lambdify(determine.linear_compat(V, A), ('x1', 'x2'))

    def derivative(i, k, a, b):
        expr = V
        if i:
            expr = sympy.diff(expr, x1, i)
        if k:
            expr = sympy.diff(expr, x2, k)
        return np.broadcast_to(symcore.lambdify(expr, ('x1', 'x2'))(a, b), np.shape(a)).astype(float)

    grid = np.meshgrid(np.linspace(-1, 1, 7), np.linspace(-2, 1, 5), indexing='ij')
    values = determine.linear_compat_numeric(A, grid[0], grid[1], derivative)
    np.testing.assert_allclose(values, np.broadcast_to(exact(*grid), grid[0].shape), rtol=1e-12, atol=1e-9)


# ---------------------------------------------------------------------------
# Chart conditions
# ---------------------------------------------------------------------------

def test_cartesian_chart_condition_matches_general_condition():
    A = Coeffs10.symbolic()
    V1, V2 = symcore.parse('x1^5 + x1^2'), symcore.parse('x2^4 - x2^3')
    specific = determine.chart_compat('cartesian', A, V1, V2)
    assert determine.tidy(specific - determine.linear_compat(V1 + V2, A)) == 0


def test_chart_components_depend_on_their_own_variable():
    with pytest.raises(DomainError):
        determine.chart_compat('polar', Coeffs10.unit('A300'), 'th', None)


@pytest.mark.parametrize('chart, seed', [
    ('cartesian', 0), ('polar', 1), ('parabolic', 2), ('elliptic', 3),
])
def test_chart_condition_is_proportional_to_pulled_back_condition(chart, seed):
    report = determine.compat_consistency(chart, sample_coefficients(seed), points=4, trials=6, seed=seed)
    assert not report.degenerate
    assert report.max_residual < 1e-9
    assert report.to_json()['chart'] == chart


@pytest.mark.slow
@pytest.mark.parametrize('chart', ['polar', 'parabolic', 'elliptic'])
def test_chart_condition_consistency_sweep(chart):
    for seed in range(20):
        report = determine.compat_consistency(chart, sample_coefficients(10 + seed), points=20, trials=10, seed=seed)
        assert report.max_residual < 1e-9


def test_consistency_on_unit_vectors():
    for name in ('A300', 'A120', 'A003'):
        report = determine.compat_consistency('polar', Coeffs10.unit(name), points=3, trials=5)
        assert report.max_residual < 1e-9


def test_angular_momentum_cubed_is_a_consistent_degenerate_case():
    # A300 alone is the D0 direction: both conditions vanish identically
    report = determine.compat_consistency('polar', Coeffs10.unit('A300'), points=12, trials=5, seed=3)
    assert report.degenerate
    assert report.max_residual == 0.0
    assert all(row.multiplier is None for row in report.rows)


def test_consistency_accepts_rational_string_points():
    report = determine.compat_consistency('elliptic', sample_coefficients(6), points=[('1/2', '5/4'), ('-1/3', '2')],
                                          trials=6)
    assert [row.point for row in report.rows] == [('1/2', '5/4'), ('-1/3', '2')]
    assert report.to_json()['points'][0]['point'] == [0.5, 1.25]
    assert report.max_residual < 1e-9
    assert determine.singular_locus('elliptic', ('1/2', '1')) == 'v = 1'


def test_term_magnitude_sums_absolute_values():
    x1, x2 = symcore.symbols('x1', 'x2')
    magnitude = determine.term_magnitude(x1 - 3 * x2 * (x1 - x2) ** 2)
    assert magnitude.subs({x1: 1, x2: 1}) == 13


@pytest.mark.parametrize('chart, points', [
    ('parabolic', [(0.7, 1.3), (-1.1, 0.4)]),
    ('elliptic', [(0.3, 1.7), (-0.6, 1.2)]),
])
def test_zeroth_derivative_coefficients_coincide(chart, points):
    chart = charts.get_chart(chart)
    q1, q2 = chart.symbols
    F = charts.leading_terms(chart, sample_coefficients(4)).F
    coefficients = (determine.parabolic_c_coefficients if chart.tag is ChartTag.PARABOLIC
                    else determine.elliptic_c_coefficients)
    C1, C2 = coefficients(F, q1, q2)
    for a, b in points:
        subs = {q1: a, q2: b}
        first, second = float(C1.subs(subs)), float(C2.subs(subs))
        assert first == pytest.approx(second, rel=1e-9, abs=1e-9)


def test_singular_points_are_refused():
    expr = determine.chart_compat('polar', Coeffs10.unit('A120'), 'r^2', 'cos(2*th)')
    assert determine.singular_locus('polar', (0, 1)) == 'r = 0'
    with pytest.raises(SingularPointError):
        determine.evaluate_chart_compat('polar', expr, (0, 1))
    assert np.isfinite(determine.evaluate_chart_compat('polar', expr, (1.5, 0.3)))


# ---------------------------------------------------------------------------
# Reduction to ODEs
# ---------------------------------------------------------------------------

def test_reduction_of_cartesian_condition():
    spec = determine.reduce_to_ode('cartesian', Coeffs10.unit('A120'), 'V2', 1)
    assert spec.coefficients == (-1, 0, 0, 0)
    assert spec.inhomogeneity == ()
    assert spec.order == 3
    assert spec.to_json()['coefficients']['c3'] == '-1'
    x2 = symcore.symbol('x2')
    assert determine.homogeneous_solution_basis(spec) == sorted([x2, x2 ** 2], key=sympy.default_sort_key)


def test_reduction_refuses_singular_fixed_value():
    with pytest.raises(SingularPointError):
        determine.reduce_to_ode('polar', Coeffs10.unit('A300'), 'S', 0)


def test_reduction_refuses_unknown_target():
    with pytest.raises(SchemaError):
        determine.reduce_to_ode('cartesian', Coeffs10.unit('A120'), 'W7', 1)


def test_degenerate_reduction_has_no_basis():
    spec = determine.reduce_to_ode('cartesian', Coeffs10.unit('A030'), 'V1', 1)
    assert spec.degenerate
    with pytest.raises(CompatibilityError):
        determine.homogeneous_solution_basis(spec)


def _reduced_action(spec, component, other):
    """Homogeneous part applied to the target and the inhomogeneity at the other component's jet."""
    x, y = symcore.symbols(spec.variable, spec.fixed_variable)
    f, g = symcore.parse(component), symcore.parse(other)
    homogeneous = sum(c * sympy.diff(f, x, 3 - i) for i, c in enumerate(spec.coefficients))
    jet = {K: sympy.diff(g, y, int(K.name[1:])).subs(y, spec.fixed_value) for K, _ in spec.inhomogeneity}
    return homogeneous, sum((jet[K] * h for K, h in spec.inhomogeneity), sympy.Integer(0))


def test_reduction_reproduces_the_frozen_condition_and_is_linear():
    A = sample_coefficients(7)
    spec = determine.reduce_to_ode('polar', A, 'S', '3/2')
    r, th = symcore.symbols('r', 'th')
    R, S1, S2 = 'r^3 - 2*r', 'cos(2*th) + th^2', 'sin(th)^3'

    homogeneous, inhomogeneous = _reduced_action(spec, S1, R)
    frozen = determine.chart_compat('polar', A, R, S1).subs(r, sympy.Rational(3, 2))
    doubled, _ = _reduced_action(spec, f'2*({S1}) - 3*({S2})', R)
    second, _ = _reduced_action(spec, S2, R)
    for value in (0.3, 1.1, 2.0):
        at = {th: sympy.Float(value, 30)}
        scale = max(1.0, abs(float(sympy.N(frozen.subs(at), 30))))
        assert abs(sympy.N((frozen - (homogeneous - inhomogeneous)).subs(at), 30)) < 1e-20 * scale
        assert abs(sympy.N((doubled - 2 * homogeneous + 3 * second).subs(at), 30)) < 1e-20 * scale


# ---------------------------------------------------------------------------
# Kernels and branches
# ---------------------------------------------------------------------------

def _support(basis):
    names = Coeffs10.names()
    return {names[i] for vector in basis for i, c in enumerate(vector) if c != 0}


def test_parse_selection():
    assert determine.parse_selection('F3, F2') == (2, 3)
    assert determine.parse_selection([1, 'f4']) == (1, 4)
    with pytest.raises(SchemaError):
        determine.parse_selection('F5')


def test_cartesian_kernel_of_f2_f3():
    report = determine.vanishing_kernel('cartesian', 'F2,F3')
    assert report.dimension == 2
    assert report.methods_agree and report.verified
    assert _support(report.basis) == {'A030', 'A003'}


def test_polar_kernel_of_f1_f3():
    report = determine.vanishing_kernel('polar', 'F1,F3')
    assert report.dimension == 2
    assert report.methods_agree and report.verified
    images = {n for vector in report.basis
              for n, v in zip(charts.PolarCoeffs.names(),
                              charts.cartesian_to_polar_coeffs(Coeffs10.from_sequence(vector)).as_tuple())
              if v != 0}
    assert images == {'B0', 'D0'}


@pytest.mark.parametrize('chart', ['parabolic', 'elliptic'])
@pytest.mark.parametrize('selection', ['F2', 'F3'])
@pytest.mark.parametrize('method', ['symbolic', 'sampled'])
def test_parabolic_and_elliptic_single_functions_force_zero_coefficients(chart, selection, method):
    report = determine.vanishing_kernel(chart, selection, method=method)
    assert report.dimensions == {method: 0}
    assert report.dimension == 0
    assert report.basis == ()
    assert report.verified
    assert determine.verify_kernel_basis(chart, determine.parse_selection(selection), report.basis)


@pytest.mark.parametrize('chart', ['parabolic', 'elliptic'])
@pytest.mark.parametrize('selection', ['F2', 'F3'])
def test_kernel_methods_agree_on_single_functions(chart, selection):
    report = determine.vanishing_kernel(chart, selection)
    assert report.dimensions == {'symbolic': 0, 'sampled': 0}
    assert report.methods_agree


def test_kernel_rejects_too_few_points():
    with pytest.raises(SchemaError):
        determine.vanishing_kernel('cartesian', 'F1', method='sampled', points=5)


def test_kernel_report_serializes():
    document = determine.vanishing_kernel('cartesian', 'F2,F3', method='symbolic').to_json()
    assert document['selected'] == ['F2', 'F3']
    assert document['dimension'] == 2
    assert document['dimensions'] == {'symbolic': 2}


@pytest.mark.parametrize('chart, mapping, branch, integrable', [
    ('cartesian', {}, 'trivial', False),
    ('cartesian', {'A030': 1}, 'case1', False),
    ('cartesian', {'A120': 1}, 'case2', False),
    ('cartesian', {'A111': 1}, 'linear', False),
    ('polar', {'A120': 1, 'A102': 1}, 'case1', True),
    ('polar', {'A300': 1}, 'case1', False),
])
def test_classify_branch(chart, mapping, branch, integrable):
    report = determine.classify_branch(chart, Coeffs10.from_mapping(mapping))
    assert report.branch == branch
    assert report.first_order_integrable is integrable
