import numpy as np
import pytest
import sympy

import specfun
from errors import (
    DomainError,
    InitialDataError,
    NoRealRootError,
    PoleRegionError,
    SchemaError,
    SingularCoefficientError,
)
from job_loader import load_sampled_solution
from specfun import EquationKind, PainleveSpec, WeierstrassSpec


# (V - x^2)(V - 10)(V^2 + 1), expanded
QUARTIC = ('1', '-(x1^2 + 10)', '10*x1^2 + 1', '-(x1^2 + 10)', '10*x1^2')


@pytest.fixture(scope='module')
def p1_solution():
    spec = PainleveSpec(kind='P1', z0=0.0, w0=0.0, dw0=0.0, span=(-0.3, 0.3), tol=1e-12, samples=201)
    return specfun.integrate_painleve(spec)


def test_zero_data_give_the_zero_p2_solution():
    spec = PainleveSpec(kind='P2', span=(0.0, 1.0), tol=1e-10, samples=11)
    solution = specfun.integrate_painleve(spec)
    assert len(solution.z) == 11
    assert np.max(np.abs(solution.w)) < 1e-14
    assert not solution.halted


def test_p1_matches_its_taylor_expansion(p1_solution):
    z = p1_solution.z
    taylor = z ** 3 / 6 + z ** 8 / 336
    np.testing.assert_allclose(p1_solution.w, taylor, atol=1e-10)
    assert p1_solution.interval == pytest.approx((-0.3, 0.3))


def test_p1_matches_its_taylor_expansion_near_the_origin(p1_solution):
    near = np.abs(p1_solution.z) <= 0.1
    z = p1_solution.z[near]
    np.testing.assert_allclose(p1_solution.w[near], z ** 3 / 6 + z ** 8 / 336, rtol=1e-8, atol=1e-12)


def test_finite_difference_residual_is_small(p1_solution):
    assert specfun.finite_difference_residual(p1_solution) < 1e-6


@pytest.mark.parametrize('fields', [
    {'kind': 'P1', 'span': (-0.3, 0.3)},
    {'kind': 'P2', 'w0': 0.01, 'span': (-0.3, 0.3)},
])
def test_finite_difference_residual_at_working_tolerance(fields):
    solution = specfun.integrate_painleve(PainleveSpec(tol=1e-10, samples=201, **fields))
    assert not solution.halted
    assert specfun.finite_difference_residual(solution) < 1e-6


@pytest.mark.parametrize('tol', [1e-6, 1e-8])
def test_halving_the_tolerance_reduces_the_error(tol):
    def run(t):
        return specfun.integrate_painleve(
            PainleveSpec(kind='P2', w0=0.5, dw0=0.0, span=(0.0, 1.0), tol=t, samples=51)).w

    reference = run(1e-13)
    coarse = np.max(np.abs(run(tol) - reference))
    fine = np.max(np.abs(run(tol / 2) - reference))
    assert fine < coarse


def test_jets_follow_the_equation(p1_solution):
    w, dw, ddw, dddw = p1_solution.jets(0.1)
    assert ddw == pytest.approx(6 * w ** 2 + 0.1, rel=1e-12)
    assert dddw == pytest.approx(12 * w * dw + 1, rel=1e-12)
    assert w == pytest.approx(0.1 ** 3 / 6, rel=1e-4)


def test_sampled_solution_csv_columns(p1_solution, tmp_path):
    path = tmp_path / 'p1.csv'
    p1_solution.to_csv(path)
    assert list(p1_solution.to_frame().columns) == ['z', 'w', 'dw', 'err', 'pole_flag']
    loaded = load_sampled_solution(path, 'P1')
    np.testing.assert_array_equal(loaded.w, p1_solution.w)
    np.testing.assert_array_equal(loaded.z, p1_solution.z)
    np.testing.assert_array_equal(loaded.dw, p1_solution.dw)


def test_evaluation_outside_the_interval_is_refused(p1_solution):
    with pytest.raises(PoleRegionError):
        p1_solution.evaluate(0.5)


def test_pole_is_flagged_and_integration_halts():
    spec = PainleveSpec(kind='P1', w0=1.0, dw0=0.0, span=(0.0, 5.0), tol=1e-10, samples=501)
    solution = specfun.integrate_painleve(spec)
    assert solution.halted
    assert solution.interval[1] < 5.0
    with pytest.raises(PoleRegionError):
        solution.evaluate(4.9)


def test_initial_value_inside_a_pole_region():
    spec = PainleveSpec(kind='P1', w0=1e7, span=(0.0, 1.0))
    with pytest.raises(PoleRegionError):
        specfun.integrate_painleve(spec)


def test_p4_refuses_the_singular_coefficient():
    with pytest.raises(SingularCoefficientError):
        specfun.integrate_painleve(PainleveSpec(kind='P4', w0=0.0, dw0=1.0))


@pytest.mark.parametrize('fields', [
    {'kind': 'WP'},
    {'kind': 'P1', 'z0': 2.0, 'span': (0.0, 1.0)},
    {'kind': 'P2', 'tol': 0.0},
    {'kind': 'P6'},
])
def test_invalid_specs(fields):
    with pytest.raises((SchemaError, ValueError)):
        PainleveSpec(**fields)


def test_weierstrass_first_integral_is_conserved():
    spec = WeierstrassSpec(g2=1.0, g3=2.0, p0=1.0, dp0=1.0, span=(0.0, 0.3), tol=1e-12, samples=101)
    report = specfun.weierstrass_p(spec)
    assert report.max_drift < 1e-9
    assert report.to_json()['halted'] is False


def test_weierstrass_drift_over_a_unit_span():
    spec = WeierstrassSpec(g2=1.0, g3=2.0, p0=1.0, dp0=1.0, span=(0.0, 1.0), tol=1e-12, samples=201)
    assert specfun.weierstrass_p(spec).max_drift < 1e-10


def test_weierstrass_drift_scales_with_the_tolerance():
    drifts = [
        specfun.weierstrass_p(WeierstrassSpec(g2=1.0, g3=2.0, p0=1.0, dp0=1.0, span=(0.0, 1.0),
                                              tol=tol, samples=201)).max_drift
        for tol in (1e-8, 1e-10, 1e-12)
    ]
    assert drifts[0] > drifts[1] > drifts[2]
    assert drifts[2] < 1e-10


def test_equianharmonic_solution_satisfies_its_equation():
    # g2 = 0 with data on p'^2 = 4p^3 - g3
    spec = WeierstrassSpec(g2=0.0, g3=3e-6, p0=0.01, dp0=1e-3, span=(-0.5, 0.5), tol=1e-10, samples=51)
    report = specfun.weierstrass_p(spec)
    assert not report.solution.halted
    assert specfun.finite_difference_residual(report.solution) < 1e-6
    assert report.max_drift < 1e-10


def test_degenerate_weierstrass_is_a_double_pole():
    spec = WeierstrassSpec(g2=0.0, g3=0.0, p0=1.0, dp0=-2.0, span=(0.0, 1.0), tol=1e-12, samples=51)
    solution = specfun.weierstrass_p(spec).solution
    np.testing.assert_allclose(solution.w, 1 / (solution.z + 1) ** 2, rtol=1e-8)


def test_weierstrass_rejects_data_off_the_curve():
    spec = WeierstrassSpec(g2=0.0, g3=0.0, p0=1.0, dp0=0.0)
    with pytest.raises(InitialDataError):
        specfun.weierstrass_p(spec)


def test_weierstrass_kind_uses_its_own_equation():
    second, _ = specfun.EQUATIONS[EquationKind.WEIERSTRASS]
    assert second(0.0, 1.0, 0.0, {'g2': 2.0}) == pytest.approx(5.0)


@pytest.mark.parametrize('hbar, kappa', [(1.0, 1.0), (2.0, 32.0), (0.5, -3.0)])
def test_painleve_one_scaling(hbar, kappa):
    scaling = specfun.painleve_one_scaling(hbar, kappa)
    assert hbar ** 4 * scaling.beta ** 5 == pytest.approx(kappa)
    assert scaling.alpha == pytest.approx(hbar ** 2 * scaling.beta ** 2)


def test_painleve_scaling_needs_a_quantum_system():
    with pytest.raises(DomainError):
        specfun.painleve_one_scaling(0.0, 1.0)
    with pytest.raises(DomainError):
        specfun.painleve_one_scaling(1.0, 0.0)


def test_root_potential():
    V = specfun.classical_case1_potential('3/2')
    assert V.value(4) == 3
    assert V.value(2.0) == pytest.approx(1.5 * np.sqrt(2.0))
    assert V.expr == sympy.Rational(3, 2) * sympy.sqrt(V.expr.free_symbols.pop())
    with pytest.raises(DomainError):
        V.value(0)
    assert specfun.classical_case1_potential(2, sign='-').value(1) == -2
    with pytest.raises(SchemaError):
        specfun.classical_case1_potential(1, sign='*')


def test_quartic_branch_follows_the_parabola():
    xs = np.linspace(0.5, 2.0, 61)
    branch = specfun.track_quartic_branch(QUARTIC, xs, start=0.25)
    np.testing.assert_allclose(branch.values, xs ** 2, rtol=1e-12)
    assert not branch.collided


def test_case2_potential_value():
    result = specfun.classical_case2_potential(QUARTIC, 2.0, anchor=(0.5, 0.25))
    assert result.value == pytest.approx(4.0, rel=1e-12)
    assert not result.collided


def test_quadruple_root_within_tolerance():
    branch = specfun.track_quartic_branch(('1', '-4', '6', '-4', '1'), [0.0, 1.0], start=1.0)
    np.testing.assert_allclose(branch.values, 1.0, atol=5e-3)


def test_quartic_without_real_roots():
    with pytest.raises(NoRealRootError):
        specfun.track_quartic_branch(('0', '0', '1', '0', '1'), [0.0], start=0.0)
