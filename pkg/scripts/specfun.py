"""
Nonlinear potentials: Painleve transcendents, Weierstrass p and the
classical root families.

Integration uses scipy's Dormand-Prince RK45 stepped by hand so that every
accepted step can be inspected: its embedded error estimate is recorded and
the solution is watched for movable poles (|w| above a threshold or a
collapsing step). Output is sampled from the dense interpolant on a uniform
grid.

Author: Analysis Team
Date: October 2026
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
import sympy
from scipy.integrate import RK45
from scipy.interpolate import CubicHermiteSpline

import symcore
from errors import (
    DomainError,
    InitialDataError,
    NoRealRootError,
    PoleRegionError,
    SchemaError,
    SingularCoefficientError,
)


logger = logging.getLogger(__name__)

POLE_THRESHOLD = 1e6
P4_GUARD = 1e-8
FIRST_INTEGRAL_TOL = 1e-12


class EquationKind(str, Enum):
    P1 = 'P1'
    P2 = 'P2'
    P4 = 'P4'
    WEIERSTRASS = 'WP'


def _p1(z, w, dw, params):
    return 6 * w ** 2 + z


def _p2(z, w, dw, params):
    return 2 * w ** 3 + z * w + params.get('alpha', 0.0)


def _p4(z, w, dw, params):
    if np.any(np.abs(w) < params.get('guard', P4_GUARD)):
        raise SingularCoefficientError(f"P4 solution reached w = 0 near z = {np.ravel(z)[0]:.6g}")
    alpha, beta = params.get('alpha', 0.0), params.get('beta', 0.0)
    return dw ** 2 / (2 * w) + 1.5 * w ** 3 + 4 * z * w ** 2 + 2 * (z ** 2 - alpha) * w + beta / w


def _wp(z, w, dw, params):
    return 6 * w ** 2 - params['g2'] / 2


def _p1_third(z, w, dw, ddw, params):
    return 12 * w * dw + 1


def _p2_third(z, w, dw, ddw, params):
    return 6 * w ** 2 * dw + w + z * dw


def _p4_third(z, w, dw, ddw, params):
    alpha, beta = params.get('alpha', 0.0), params.get('beta', 0.0)
    return (dw * ddw / w - dw ** 3 / (2 * w ** 2) + 4.5 * w ** 2 * dw + 4 * w ** 2
            + 8 * z * w * dw + 4 * z * w + 2 * (z ** 2 - alpha) * dw - beta * dw / w ** 2)


def _wp_third(z, w, dw, ddw, params):
    return 12 * w * dw


# Second and third derivative of each equation in terms of (z, w, w').
EQUATIONS = {
    EquationKind.P1: (_p1, _p1_third),
    EquationKind.P2: (_p2, _p2_third),
    EquationKind.P4: (_p4, _p4_third),
    EquationKind.WEIERSTRASS: (_wp, _wp_third),
}


@dataclass(frozen=True)
class PainleveSpec:
    """
    Initial value problem for P1, P2 or P4 in normal form.

    span is (start, end) and must contain z0; the solution is integrated
    from z0 towards both ends.
    """

    kind: EquationKind
    z0: float = 0.0
    w0: float = 0.0
    dw0: float = 0.0
    span: tuple = (0.0, 1.0)
    alpha: float = 0.0
    beta: float = 0.0
    tol: float = 1e-10
    samples: int = 201
    max_step: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, 'kind', EquationKind(self.kind))
        if self.kind is EquationKind.WEIERSTRASS:
            raise SchemaError("use WeierstrassSpec for the Weierstrass equation")
        if not self.tol > 0:
            raise SchemaError(f"tolerance must be positive, got {self.tol}")
        if not self.span[0] <= self.z0 <= self.span[1] or self.span[0] == self.span[1]:
            raise SchemaError(f"span {self.span} must be an interval containing z0 = {self.z0}")
        if self.samples < 2:
            raise SchemaError("need at least two samples")

    @property
    def parameters(self):
        return {'alpha': self.alpha, 'beta': self.beta}


@dataclass(frozen=True)
class WeierstrassSpec:
    """p'' = 6p^2 - g2/2 with data on the curve p'^2 = 4p^3 - g2 p - g3."""

    g2: float
    g3: float
    z0: float = 0.0
    p0: float = 1.0
    dp0: float = 1.0
    span: tuple = (0.0, 1.0)
    tol: float = 1e-10
    samples: int = 201
    max_step: float = np.inf

    def __post_init__(self):
        if not self.tol > 0:
            raise SchemaError(f"tolerance must be positive, got {self.tol}")
        if not self.span[0] <= self.z0 <= self.span[1] or self.span[0] == self.span[1]:
            raise SchemaError(f"span {self.span} must be an interval containing z0 = {self.z0}")

    def first_integral(self, p, dp):
        return dp ** 2 - 4 * p ** 3 + self.g2 * p + self.g3


@dataclass(frozen=True, eq=False)
class SampledSolution:
    """Solution of a second-order special-function ODE on a uniform grid."""

    kind: EquationKind
    parameters: dict
    z: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    err: np.ndarray
    pole: np.ndarray
    halted: bool = False

    @property
    def valid(self):
        return ~self.pole

    @property
    def interval(self):
        z = self.z[self.valid]
        return float(z.min()), float(z.max())

    def to_frame(self):
        return pd.DataFrame({
            'z': self.z, 'w': self.w, 'dw': self.dw, 'err': self.err, 'pole_flag': self.pole,
        })

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

    def _spline(self):
        if not hasattr(self, '_cached_spline'):
            valid = self.valid
            object.__setattr__(self, '_cached_spline',
                               CubicHermiteSpline(self.z[valid], self.w[valid], self.dw[valid]))
        return self._cached_spline

    def evaluate(self, z):
        """
        Interpolated (w, w') at z.

        Raises:
            PoleRegionError: z outside the unflagged part of the grid
        """
        z = np.asarray(z, dtype=float)
        low, high = self.interval
        if np.any(z < low - 1e-12) or np.any(z > high + 1e-12):
            raise PoleRegionError(f"z outside sampled pole-free interval [{low:.6g}, {high:.6g}]")
        spline = self._spline()
        return spline(z), spline(z, 1)

    def jets(self, z, order=3):
        """w and its derivatives up to `order` (<= 3), the higher ones from the ODE."""
        second, third = EQUATIONS[self.kind]
        w, dw = self.evaluate(z)
        z = np.asarray(z, dtype=float)
        values = [w, dw]
        if order >= 2:
            ddw = second(z, w, dw, self.parameters)
            values.append(ddw)
        if order >= 3:
            values.append(third(z, w, dw, ddw, self.parameters))
        return values[:order + 1]


def _integrate_side(kind, params, z0, y0, end, tol, max_step, grid, pole_threshold):
    """One-directional RK45 run sampled at the grid points between z0 and end."""
    second, _ = EQUATIONS[kind]

    def rhs(z, y):
        return np.array([y[1], second(z, y[0], y[1], params)])

    solver = RK45(rhs, z0, np.array(y0, dtype=float), end, rtol=tol, atol=tol * 1e-2, max_step=max_step)
    direction = np.sign(end - z0)
    rows, halted = [], False
    while solver.status == 'running':
        z_old = solver.t
        message = solver.step()
        if solver.status == 'failed':
            logger.warning(f"{kind.value}: step size collapsed near z = {z_old:.6g} ({message})")
            halted = True
            break
        local_error = float(np.max(np.abs(solver.h_previous * (solver.K.T @ solver.E))))
        inside = (direction * (grid - z_old) >= 0) & (direction * (grid - solver.t) <= 0)
        dense = solver.dense_output()
        for zi in grid[inside]:
            w, dw = dense(zi)
            rows.append((zi, w, dw, local_error, False))
        if not np.all(np.isfinite(solver.y)) or abs(solver.y[0]) > pole_threshold:
            logger.warning(f"{kind.value}: |w| exceeded {pole_threshold:g} near z = {solver.t:.6g}")
            rows = [r[:4] + (True,) if direction * (r[0] - z_old) >= 0 else r for r in rows]
            halted = True
            break
    return rows, halted


def _integrate(kind, params, z0, y0, span, tol, samples, max_step, pole_threshold):
    if not np.all(np.isfinite(y0)) or abs(y0[0]) > pole_threshold:
        raise PoleRegionError(f"initial value {y0[0]} at z0 = {z0} lies in a pole region")
    grid = np.linspace(span[0], span[1], samples)
    rows, halted = [], False
    for end in (span[1], span[0]):
        if end == z0:
            continue
        side, stopped = _integrate_side(kind, params, z0, y0, end, tol, max_step, grid, pole_threshold)
        rows.extend(side)
        halted = halted or stopped
    if np.any(np.isclose(grid, z0, rtol=0, atol=0)):
        rows.append((z0, y0[0], y0[1], 0.0, False))

    table = {}
    for row in rows:
        table.setdefault(row[0], row)
    z = np.array(sorted(table))
    data = np.array([table[zi] for zi in z], dtype=object)
    return SampledSolution(
        kind=kind, parameters=dict(params),
        z=z.astype(float),
        w=data[:, 1].astype(float),
        dw=data[:, 2].astype(float),
        err=data[:, 3].astype(float),
        pole=data[:, 4].astype(bool),
        halted=halted,
    )


def integrate_painleve(spec, pole_threshold=POLE_THRESHOLD, guard=P4_GUARD):
    """
    Integrate a Painleve equation in normal form.

    P1: w'' = 6w^2 + z; P2: w'' = 2w^3 + zw + alpha;
    P4: w'' = w'^2/(2w) + 3w^3/2 + 4zw^2 + 2(z^2 - alpha)w + beta/w.

    Args:
        spec (PainleveSpec): Initial value problem
        pole_threshold (float): |w| above which a pole is flagged and the run stops
        guard (float): P4 band |w| < guard treated as the singular coefficient

    Returns:
        SampledSolution: Uniformly sampled solution with error and pole flags

    Raises:
        SingularCoefficientError: P4 data at or integration through w = 0
        PoleRegionError: initial data already inside a pole region
    """
    params = dict(spec.parameters, guard=guard)
    if spec.kind is EquationKind.P4 and abs(spec.w0) < guard:
        raise SingularCoefficientError(f"P4 initial value w0 = {spec.w0} is inside the guard band")
    logger.info(f"Integrating {spec.kind.value} on {spec.span} from z0 = {spec.z0} (tol {spec.tol:g})")
    return _integrate(spec.kind, params, spec.z0, (spec.w0, spec.dw0), spec.span, spec.tol,
                      spec.samples, spec.max_step, pole_threshold)


@dataclass(frozen=True)
class WeierstrassReport:
    solution: SampledSolution
    max_drift: float

    def to_json(self):
        return {'max_drift': float(self.max_drift), 'halted': self.solution.halted,
                'interval': list(self.solution.interval)}


def weierstrass_p(spec, pole_threshold=POLE_THRESHOLD, first_integral_tol=FIRST_INTEGRAL_TOL):
    """
    Integrate p'' = 6p^2 - g2/2 and measure the drift of the first integral.

    Drift is |p'^2 - 4p^3 + g2 p + g3| / max(1, p'^2), maximised over the
    pole-free samples.

    Raises:
        InitialDataError: initial data off the curve p'^2 = 4p^3 - g2 p - g3
    """
    defect = abs(spec.first_integral(spec.p0, spec.dp0))
    if defect > first_integral_tol * max(1.0, spec.dp0 ** 2):
        raise InitialDataError(f"initial data violate the first integral by {defect:.3e}")
    params = {'g2': spec.g2, 'g3': spec.g3}
    solution = _integrate(EquationKind.WEIERSTRASS, params, spec.z0, (spec.p0, spec.dp0), spec.span,
                          spec.tol, spec.samples, spec.max_step, pole_threshold)
    valid = solution.valid
    drift = np.abs(spec.first_integral(solution.w[valid], solution.dw[valid])) / np.maximum(
        1.0, solution.dw[valid] ** 2)
    max_drift = float(drift.max()) if drift.size else 0.0
    logger.info(f"Weierstrass first-integral drift {max_drift:.3e}")
    return WeierstrassReport(solution, max_drift)


def finite_difference_residual(solution):
    """
    Max-norm of the second difference of w minus the ODE right-hand side on
    interior unflagged points of a uniform grid.
    """
    second, _ = EQUATIONS[solution.kind]
    z, w, dw = solution.z, solution.w, solution.dw
    h = np.diff(z)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise SchemaError("finite-difference residual needs a uniform grid")
    ok = solution.valid[:-2] & solution.valid[1:-1] & solution.valid[2:]
    fd = (w[2:] - 2 * w[1:-1] + w[:-2]) / h[0] ** 2
    rhs = second(z[1:-1], w[1:-1], dw[1:-1], solution.parameters)
    residual = np.abs(fd - rhs)[ok]
    return float(residual.max()) if residual.size else 0.0


# ---------------------------------------------------------------------------
# Scaling and classical families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PainleveScaling:
    """V(x) = alpha * w(beta * x) maps hbar^2 V'' = 6V^2 + kappa x onto w'' = 6w^2 + z."""

    alpha: float
    beta: float

    def potential(self, w, dw, x):
        return self.alpha * w, self.alpha * self.beta * dw


def painleve_one_scaling(hbar, kappa):
    """
    Affine change of variables onto the P1 normal form.

    beta^5 = kappa / hbar^4 and alpha = hbar^2 beta^2.

    Raises:
        DomainError: hbar = 0 (the classical limit has no P1 form)
    """
    hbar, kappa = float(hbar), float(kappa)
    if hbar == 0:
        raise DomainError("the classical limit hbar = 0 has no Painleve form")
    if kappa == 0:
        raise DomainError("kappa = 0 is the Weierstrass case, not P1")
    beta = np.sign(kappa) * abs(kappa / hbar ** 4) ** 0.2
    return PainleveScaling(alpha=hbar ** 2 * beta ** 2, beta=beta)


@dataclass(frozen=True)
class ClassicalRootPotential:
    """V(x) = sign * c * sqrt(x), defined for x > 0."""

    coefficient: object
    sign: int
    variable: str = 'x1'

    @property
    def expr(self):
        return self.sign * self.coefficient * sympy.sqrt(symcore.symbol(self.variable))

    def value(self, x):
        """
        Raises:
            DomainError: x <= 0
        """
        if float(x) <= 0:
            raise DomainError(f"sqrt potential is defined for {self.variable} > 0, got {x}")
        try:
            return symcore.evaluate(self.expr, {self.variable: x}, mode='exact')
        except Exception:
            return symcore.evaluate(self.expr, {self.variable: x}, mode='float')


def classical_case1_potential(coefficient, sign='+', variable='x1'):
    """
    The classical square-root potential of the identically satisfied branch.

    Args:
        coefficient: Exact rational c
        sign (str | int): '+' / '-' or +1 / -1
        variable (str): Cartesian variable
    """
    signs = {'+': 1, '-': -1, 1: 1, -1: -1}
    if sign not in signs:
        raise SchemaError(f"sign must be + or -, got {sign!r}")
    return ClassicalRootPotential(symcore.as_rational(coefficient), signs[sign], variable)


@dataclass(frozen=True)
class QuarticBranch:
    x: np.ndarray
    values: np.ndarray
    collisions: np.ndarray

    @property
    def collided(self):
        return bool(self.collisions.any())

    def to_frame(self):
        return pd.DataFrame({'x': self.x, 'V': self.values, 'collision': self.collisions})


def _quartic_callables(coefficients, variable):
    out = []
    for c in coefficients:
        if callable(c):
            out.append(c)
            continue
        expr = symcore.parse(c) if isinstance(c, str) else sympy.sympify(c)
        out.append(symcore.lambdify(expr, (variable,)))
    return out


def _real_roots(coeffs, tol):
    roots = np.roots(coeffs)
    scale = np.maximum(1.0, np.abs(roots))
    return np.sort(roots[np.abs(roots.imag) <= tol * scale].real)


def _polish(coeffs, root, iterations=100):
    poly = np.poly1d(coeffs)
    deriv = poly.deriv()
    for _ in range(iterations):
        slope = deriv(root)
        if slope == 0:
            break
        step = poly(root) / slope
        root -= step
        if abs(step) <= 1e-15 * max(1.0, abs(root)):
            break
    return root


def track_quartic_branch(coefficients, xs, start, variable='x1', imag_tol=1e-3):
    """
    Follow one real root of c4(x)V^4 + c3(x)V^3 + c2(x)V^2 + c1(x)V + c0(x) = 0.

    At every x the real root nearest the previous value is taken and polished
    by Newton's method. A change in the number of real roots between
    neighbouring points is flagged as a collision.

    Raises:
        NoRealRootError: some x has no real root
    """
    functions = _quartic_callables(coefficients, variable)
    xs = np.asarray(xs, dtype=float)
    values, collisions = [], []
    previous, count = float(start), None
    for x in xs:
        coeffs = [float(f(x)) for f in functions]
        roots = _real_roots(coeffs, imag_tol)
        if roots.size == 0:
            raise NoRealRootError(f"quartic has no real root at {variable} = {x:.6g}")
        root = _polish(coeffs, float(roots[np.argmin(np.abs(roots - previous))]))
        collisions.append(count is not None and roots.size != count)
        count = roots.size
        values.append(root)
        previous = root
    branch = QuarticBranch(xs, np.array(values), np.array(collisions, dtype=bool))
    if branch.collided:
        logger.warning(f"quartic branch met a root collision at {variable} = "
                       f"{xs[branch.collisions][0]:.6g}")
    return branch


@dataclass(frozen=True)
class BranchValue:
    value: float
    collided: bool


def classical_case2_potential(coefficients, x, anchor, steps=200, variable='x1'):
    """
    Value at x of the real quartic branch continued from an anchor root.

    Args:
        coefficients: Quartic coefficients c4..c0 as expressions in `variable` or callables
        x (float): Evaluation point
        anchor (tuple): (x_a, V_a) with V_a a root at x_a
        steps (int): Continuation steps between x_a and x

    Returns:
        BranchValue: Root value and collision flag
    """
    x_a, v_a = (float(c) for c in anchor)
    branch = track_quartic_branch(coefficients, np.linspace(x_a, float(x), steps), v_a, variable)
    return BranchValue(float(branch.values[-1]), branch.collided)
