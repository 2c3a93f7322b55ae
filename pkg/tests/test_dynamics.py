import numpy as np
import pytest
import sympy

import dynamics
import symcore
from charts import Coeffs10, SeparablePotential
from dynamics import IntegralCandidate, PhaseState
from errors import (
    ChartMismatchError,
    CompatibilityError,
    DomainError,
    NonPolynomialError,
    SchemaError,
)
from job_loader import load_job


@pytest.fixture
def oscillator_candidate(oscillator):
    return IntegralCandidate(A=oscillator['A'], g1=oscillator['g1'], g2=oscillator['g2'],
                             potential=oscillator['V'], name='oscillator')


# ---------------------------------------------------------------------------
# Brackets
# ---------------------------------------------------------------------------

def test_canonical_brackets():
    assert dynamics.poisson_bracket('x1', 'p1') == 1
    assert dynamics.poisson_bracket('x1', 'p2') == 0
    free = '(p1^2 + p2^2)/2'
    assert dynamics.poisson_bracket(dynamics.angular_momentum(), free) == 0


def test_bracket_is_antisymmetric_and_satisfies_jacobi():
    f = symcore.parse('x1^2*p2 + p1')
    g = symcore.parse('x2*p1^2 - x1*p2')
    h = symcore.parse('x1*x2*p1*p2 + p2^3')
    bracket = dynamics.poisson_bracket
    assert bracket(f, g) == -bracket(g, f)
    jacobi = bracket(f, bracket(g, h)) + bracket(g, bracket(h, f)) + bracket(h, bracket(f, g))
    assert sympy.expand(jacobi) == 0


def test_bracket_needs_polynomial_momenta():
    with pytest.raises(NonPolynomialError):
        dynamics.poisson_bracket('sqrt(p1)', 'x1')


def test_build_integral_leading_parts():
    p1, p2 = symcore.symbols('p1', 'p2')
    assert dynamics.build_integral(IntegralCandidate(A=Coeffs10.unit('A003'))) == p2 ** 3
    L3 = dynamics.angular_momentum()
    X = dynamics.build_integral(IntegralCandidate(A=Coeffs10.unit('A300')))
    assert sympy.expand(X - L3 ** 3) == 0


def test_oscillator_integral_commutes_with_hamiltonian(oscillator_candidate):
    H = dynamics.cartesian_hamiltonian(oscillator_candidate.potential)
    assert dynamics.poisson_bracket(H, dynamics.build_integral(oscillator_candidate)) == 0


def test_candidate_from_json_with_separable_potential():
    candidate = IntegralCandidate.from_json({
        'name': 'polar',
        'A': {'A300': 1},
        'potential': {'chart': 'polar', 'components': ['0', 'a*cos(2*th)'], 'parameters': {'a': '2'}},
    })
    assert candidate.is_symbolic
    x1, x2 = symcore.symbols('x1', 'x2')
    V = candidate.cartesian_potential()
    point = {x1: sympy.Rational(3, 5), x2: sympy.Rational(4, 5)}
    # cos(2 th) = (x1^2 - x2^2) / r^2 with r = 1
    assert float(V.subs(point)) == pytest.approx(2 * (9 - 16) / 25, rel=1e-12)
    assert candidate.to_json()['potential']['chart'] == 'polar'


def test_candidate_without_potential():
    with pytest.raises(SchemaError):
        IntegralCandidate(A=Coeffs10()).cartesian_potential()


# ---------------------------------------------------------------------------
# Second-order integrals
# ---------------------------------------------------------------------------

@pytest.mark.parametrize('chart, W1, W2', [
    ('cartesian', 'x1^4', 'x2^2'),
    ('polar', 'r^2', 'cos(2*th)'),
    ('parabolic', 'xi^4', 'eta^2'),
    ('elliptic', 'u^2', 'v^4'),
])
def test_second_order_integral_is_conserved(chart, W1, W2):
    Y = dynamics.second_order_integral(SeparablePotential(chart, W1, W2))
    assert Y.bracket_residual(points=20, seed=1) < 1e-9


def test_cartesian_second_order_integral_in_cartesian_momenta():
    Y = dynamics.second_order_integral(SeparablePotential('cartesian', 'x1^4', 'x2^2'))
    x1, p1 = symcore.symbols('x1', 'p1')
    assert sympy.expand(Y.expr - (p1 ** 2 / 2 + x1 ** 4)) == 0


def test_second_order_integral_needs_symbolic_components():
    sampled = dynamics.SampledComponent(solution=None)
    with pytest.raises(ChartMismatchError):
        dynamics.second_order_integral(SeparablePotential('cartesian', 'x1', sampled))


# ---------------------------------------------------------------------------
# Gauge quadrature
# ---------------------------------------------------------------------------

def _exact_on_grid(expr, grid):
    X, Y = grid.mesh()
    f = symcore.lambdify(expr, ('x1', 'x2'))
    return np.broadcast_to(f(X, Y), X.shape).astype(float)


def test_oscillator_gauge_fields_are_recovered(oscillator):
    grid = dynamics.solve_g_numeric(oscillator['V'], oscillator['A'], ((-1.0, 1.0), (-1.0, 1.0)),
                                    basepoint=(-1.0, -1.0), resolution=201)
    g1 = _exact_on_grid(oscillator['g1'], grid)
    g2 = _exact_on_grid(oscillator['g2'], grid)
    # shift that puts the base point at zero
    g1, g2 = g1 - g1[0, 0], g2 - g2[0, 0]
    scale = max(np.abs(g1).max(), np.abs(g2).max())
    assert np.abs(grid.g1 - g1).max() / scale < 1e-6
    assert np.abs(grid.g2 - g2).max() / scale < 1e-6
    assert grid.max_residual < 1e-8
    assert grid.anchor == pytest.approx((0.0, 0.0), abs=1e-12)


def test_base_point_only_shifts_by_constants(oscillator):
    window = ((-1.0, 1.0), (-1.0, 1.0))
    first = dynamics.solve_g_numeric(oscillator['V'], oscillator['A'], window, (-1.0, -1.0), 201)
    second = dynamics.solve_g_numeric(oscillator['V'], oscillator['A'], window, (0.5, -0.2), 201)
    assert np.ptp(first.g1 - second.g1) < 1e-7
    assert np.ptp(first.g2 - second.g2) < 1e-7


def test_zero_potential_gives_zero_gauge(oscillator):
    grid = dynamics.solve_g_numeric('0', oscillator['A'], ((-1.0, 1.0), (0.0, 2.0)), resolution=21)
    assert np.abs(grid.g1).max() == 0
    assert np.abs(grid.g2).max() == 0


def test_root_potential_gauge_fields():
    A = Coeffs10.from_mapping({'A030': 1, 'A003': 1})
    grid = dynamics.solve_g_numeric('sqrt(x1) + sqrt(x2)', A, ((0.5, 1.5), (0.5, 1.5)), resolution=101)
    X, Y = grid.mesh()
    x0, y0 = grid.basepoint
    np.testing.assert_allclose(grid.g1, 3 * (np.sqrt(X) - np.sqrt(x0)), atol=1e-6)
    np.testing.assert_allclose(grid.g2, 3 * (np.sqrt(Y) - np.sqrt(y0)), atol=1e-6)
    assert grid.max_residual < 1e-5


def test_incompatible_potential_is_refused():
    A = Coeffs10.unit('A120')
    with pytest.raises(CompatibilityError):
        dynamics.solve_g_numeric('x2^4', A, ((-1.0, 1.0), (-1.0, 1.0)), resolution=21)


def test_singular_window_is_refused():
    with pytest.raises(DomainError):
        dynamics.solve_g_numeric('1/x1', Coeffs10.unit('A003'), ((0.0, 1.0), (0.0, 1.0)), resolution=21)


def test_resolution_lower_bound(oscillator):
    with pytest.raises(SchemaError):
        dynamics.solve_g_numeric(oscillator['V'], oscillator['A'], ((0, 1), (0, 1)), resolution=3)


def test_oscillator_zeroth_equation_on_the_grid(oscillator):
    grid = dynamics.solve_g_numeric(oscillator['V'], oscillator['A'], ((-1.0, 1.0), (-1.0, 1.0)),
                                    resolution=51)
    fit = dynamics.gauge_grid_residuals(grid, oscillator['V'], oscillator['A'])
    assert fit.max_residual < 1e-8


def test_painleve_one_potential_admits_a_quantum_integral(root):
    job = load_job(root / 'data' / 'jobs' / 'solveg_painleve_one.json')
    grid = dynamics.solve_g_numeric(job.potential, job.A, job.settings['window'],
                                    resolution=job.settings['resolution'])
    assert grid.max_residual < 1e-5
    fit = dynamics.gauge_grid_residuals(grid, job.potential, job.A, hbar=float(job.hbar))
    assert fit.max_residual < 1e-5
    # g1 is the constant kappa / (4 lambda) with lambda = 1, kappa = 1
    assert fit.c1 == pytest.approx(0.25, abs=1e-6)
    assert fit.omega == pytest.approx(0.0, abs=1e-6)


def test_sampled_components_outside_cartesian_chart():
    sampled = dynamics.SampledComponent(solution=None)
    with pytest.raises(ChartMismatchError):
        dynamics.PotentialField.from_separable(SeparablePotential('polar', 'r^2', sampled))


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def test_phase_state_must_be_finite():
    with pytest.raises(DomainError):
        PhaseState(1.0, float('nan'), 0.0, 0.0)


def test_free_particle_conserves_momentum_and_angular_momentum():
    H = '(p1^2 + p2^2)/2'
    report = dynamics.trajectory_drift(H, [H, dynamics.angular_momentum(), 'p1'],
                                       PhaseState(1.0, 0.5, 0.3, -0.2), T=100.0, dt=0.5,
                                       names=['H', 'L3', 'p1'])
    assert report.max_drift < 1e-12
    assert list(report.to_frame().columns) == ['t', 'H', 'L3', 'p1']
    assert report.t[-1] == pytest.approx(100.0)


def test_oscillator_integrals_are_conserved(oscillator_candidate):
    H = dynamics.cartesian_hamiltonian(oscillator_candidate.potential)
    Y = dynamics.second_order_integral(SeparablePotential('cartesian', 'x1^2/2', 'x2^2/2')).expr
    X = dynamics.build_integral(oscillator_candidate)
    report = dynamics.trajectory_drift(H, [H, Y, X], PhaseState(1.0, 0.5, 0.0, 0.8), T=50.0, dt=0.1,
                                       tol=1e-10, names=['H', 'Y', 'X'])
    assert not report.truncated
    assert report.t[-1] == pytest.approx(50.0)
    for name in ('H', 'Y', 'X'):
        assert report.drifts[name] < 1e-8


def test_samples_end_exactly_at_the_final_time():
    report = dynamics.trajectory_drift('p1^2/2', ['p1'], PhaseState(0.0, 0.0, 1.0, 0.0), T=1.05, dt=0.1)
    assert report.t[-1] == pytest.approx(1.05)
    assert len(report.t) == 12
    assert np.all(np.diff(report.t) > 0)


def test_run_without_monitored_quantities():
    report = dynamics.trajectory_drift('p1^2/2', [], PhaseState(0.0, 0.0, 1.0, 0.0), T=1.0, dt=0.1)
    assert report.drifts == {}
    assert report.max_drift == 0.0
    assert report.t[-1] == pytest.approx(1.0)


def test_corrupted_integral_drifts(oscillator_candidate):
    H = dynamics.cartesian_hamiltonian(oscillator_candidate.potential)
    x1, p1 = symcore.symbols('x1', 'p1')
    X = dynamics.build_integral(oscillator_candidate) + x1 * p1 / 10
    report = dynamics.trajectory_drift(H, [X], PhaseState(1.0, 0.5, 0.0, 0.8), T=10.0, dt=0.1,
                                       names=['X'])
    assert report.drifts['X'] > 1e-3


def test_collision_truncates_the_run():
    H = '(p1^2 + p2^2)/2 - 1/sqrt(x1^2 + x2^2)'
    report = dynamics.trajectory_drift(H, [H], PhaseState(1.0, 0.0, 0.0, 0.0), T=5.0, dt=0.05)
    assert report.truncated
    assert report.t[-1] < 2.0


def test_names_must_match_integrals():
    with pytest.raises(SchemaError):
        dynamics.trajectory_drift('p1^2/2', ['p1'], PhaseState(0, 0, 1, 0), T=1.0, dt=0.1,
                                  names=['a', 'b'])
