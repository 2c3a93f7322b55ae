"""
Command line front end of the superintegrability toolkit

Subcommands:
  kernel    vanishing analysis of selected leading terms
  check     determining-equation residuals of a candidate integral
  reduce    linear ODE for one potential component at a frozen point
  compat    consistency of a chart condition with the general condition
  simulate  conserved-quantity drift along trajectories
  specfun   Painleve / Weierstrass solutions on a grid
  solveg    numerical recovery of the gauge fields g1, g2
  verify    batch verification of a directory of candidates

JSON reports go to stdout, logs to stderr. Exit codes: 0 ok, 1 mathematical
failure, 2 usage or schema error.

Author: Analysis Team
Date: October 2026
"""

import argparse
import logging
import sys
from pathlib import Path

# Add scripts directory to path
sys.path.append(str(Path(__file__).resolve().parent / 'scripts'))

import charts  # noqa: E402
import determine  # noqa: E402
import dynamics  # noqa: E402
import job_loader  # noqa: E402
import specfun  # noqa: E402
import symcore  # noqa: E402
from errors import SchemaError, SuperintegrabilityError  # noqa: E402
from utils import dumps_json, load_config, numerics, setup_logging, write_csv  # noqa: E402
from verification_pipeline import VerificationPipeline, check_candidate  # noqa: E402


logger = logging.getLogger('superint')

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2

# Short names accepted by --fix.
_FIX_ALIASES = {'x': 'x1', 'y': 'x2'}


def parse_assignments(items):
    """['A120=1', 'A102=1/2,A300=-1'] -> {'A120': '1', ...}."""
    values = {}
    for item in items or []:
        for part in item.split(','):
            if not part.strip():
                continue
            if '=' not in part:
                raise SchemaError(f"Expected NAME=VALUE, got '{part}'")
            name, value = part.split('=', 1)
            values[name.strip()] = value.strip()
    return values


def emit(report, schema, schema_dir=None):
    """Validate a report against its published schema and print it."""
    job_loader.validate_document(report, schema, schema_dir)
    print(dumps_json(report))


def _output_path(args, config, default_name):
    if args.output:
        return args.output
    return str(Path(config.get('paths', {}).get('output', 'results')) / default_name)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_kernel(args, config):
    points = args.points or numerics(config, 'kernel_points', 24)
    report = determine.vanishing_kernel(args.chart, args.select, method=args.method,
                                        points=points, seed=args.seed)
    emit(report.to_json(), 'kernel_report', args.schemas)
    return EXIT_OK if report.methods_agree and report.verified else EXIT_FAILURE


def cmd_check(args, config):
    candidate = job_loader.load_candidate(args.candidate, args.schemas)
    report = check_candidate(candidate, hbar=args.hbar)
    emit(report.to_json(), 'residual_report', args.schemas)
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_reduce(args, config):
    A = charts.Coeffs10.from_mapping(parse_assignments(args.A))
    fixed = parse_assignments([args.fix]) if '=' in args.fix else {'': args.fix}
    (name, value), = fixed.items()
    chart = charts.get_chart(args.chart)
    name = _FIX_ALIASES.get(name, name)
    if name and name not in chart.variables:
        raise SchemaError(f"--fix names '{name}', not a {chart.tag.value} variable")
    spec = determine.reduce_to_ode(chart, A, args.target, value)
    report = spec.to_json()
    if args.basis:
        report['basis'] = [symcore.to_text(b) for b in determine.homogeneous_solution_basis(spec)]
    emit(report, 'ode_spec', args.schemas)
    return EXIT_OK


def cmd_compat(args, config):
    A = charts.Coeffs10.from_mapping(parse_assignments(args.A))
    report = determine.compat_consistency(
        args.chart, A,
        points=args.points or numerics(config, 'consistency_points', 20),
        trials=args.trials or numerics(config, 'consistency_trials', 10),
        seed=args.seed,
    )
    document = report.to_json()
    document['branch'] = determine.classify_branch(args.chart, A).to_json()
    emit(document, 'consistency_report', args.schemas)
    return EXIT_OK if report.max_residual < args.tol else EXIT_FAILURE


def cmd_simulate(args, config):
    job = job_loader.load_job(args.job, args.schemas)
    settings = job.settings
    if 'state' not in settings or 'T' not in settings:
        raise SchemaError("simulate job needs 'state' and 'T'")
    H = dynamics.cartesian_hamiltonian(job.potential)
    report = dynamics.trajectory_drift(
        H, settings.get('integrals', [str(H)]), dynamics.PhaseState(*settings['state']),
        T=settings['T'], dt=settings.get('dt', 0.1),
        tol=settings.get('tol', numerics(config, 'trajectory_tol', 1e-10)),
        gradient_limit=numerics(config, 'gradient_limit', dynamics.GRADIENT_LIMIT),
        names=settings.get('names'),
    )
    document = report.to_json()
    document['csv'] = write_csv(report.to_frame(), _output_path(args, config, f"drift_{Path(args.job).stem}.csv"))
    emit(document, 'drift_report', args.schemas)
    if report.truncated:
        return EXIT_FAILURE
    if args.max_drift is not None and report.max_drift > args.max_drift:
        return EXIT_FAILURE
    return EXIT_OK


def _specfun_settings(args):
    if args.job:
        return job_loader.load_job(args.job, args.schemas).settings
    settings = {k: getattr(args, k) for k in ('kind', 'alpha', 'beta', 'z0', 'w0', 'dw0', 'tol',
                                                  'samples', 'g2', 'g3') if getattr(args, k) is not None}
    if args.span:
        settings['span'] = args.span
    return settings


def cmd_specfun(args, config):
    settings = _specfun_settings(args)
    try:
        kind = specfun.EquationKind(settings.get('kind', 'P1'))
    except ValueError:
        raise SchemaError(f"Unknown equation kind '{settings.get('kind')}'") from None
    common = {
        'z0': settings.get('z0', 0.0),
        'span': tuple(settings.get('span', (0.0, 1.0))),
        'tol': settings.get('tol', numerics(config, 'special_tol', 1e-10)),
        'samples': settings.get('samples', numerics(config, 'special_samples', 201)),
    }
    threshold = numerics(config, 'pole_threshold', specfun.POLE_THRESHOLD)
    document = {}
    if kind is specfun.EquationKind.WEIERSTRASS:
        if 'g2' not in settings or 'g3' not in settings:
            raise SchemaError("Weierstrass runs need g2 and g3")
        spec = specfun.WeierstrassSpec(g2=settings['g2'], g3=settings['g3'],
                                       p0=settings.get('w0', 1.0), dp0=settings.get('dw0', 1.0), **common)
        result = specfun.weierstrass_p(spec, pole_threshold=threshold,
                                       first_integral_tol=numerics(config, 'first_integral_tol', 1e-12))
        solution = result.solution
        document['max_drift'] = result.max_drift
    else:
        spec = specfun.PainleveSpec(kind=kind, alpha=settings.get('alpha', 0.0), beta=settings.get('beta', 0.0),
                                    w0=settings.get('w0', 0.0), dw0=settings.get('dw0', 0.0), **common)
        solution = specfun.integrate_painleve(spec, pole_threshold=threshold,
                                              guard=numerics(config, 'p4_guard', specfun.P4_GUARD))
        if len(solution.z) >= 3:
            document['fd_residual'] = specfun.finite_difference_residual(solution)

    document.update({
        'kind': kind.value,
        'samples': int(len(solution.z)),
        'interval': list(solution.interval),
        'halted': solution.halted,
        'poles': int(solution.pole.sum()),
        'max_error': float(solution.err.max()),
        'csv': write_csv(solution.to_frame(), _output_path(args, config, f"specfun_{kind.value}.csv")),
    })
    emit(document, 'specfun_report', args.schemas)
    return EXIT_OK


def cmd_solveg(args, config):
    job = job_loader.load_job(args.job, args.schemas)
    settings = job.settings
    if 'window' not in settings:
        raise SchemaError("solveg job needs a 'window'")
    potential = job.potential
    grid = dynamics.solve_g_numeric(
        potential, job.A, settings['window'],
        basepoint=settings.get('basepoint'),
        resolution=settings.get('resolution', numerics(config, 'quadrature_resolution', 201)),
        anchor=settings.get('anchor'),
        compat_tol=numerics(config, 'compat_threshold', dynamics.COMPAT_THRESHOLD),
        gradient_limit=numerics(config, 'gradient_limit', dynamics.GRADIENT_LIMIT),
    )
    document = grid.to_json()
    fit = dynamics.gauge_grid_residuals(grid, potential, job.A, hbar=float(symcore.as_rational(job.hbar)))
    document['zeroth'] = fit.to_json()
    document['csv'] = write_csv(grid.to_frame(), _output_path(args, config, f"gauge_{Path(args.job).stem}.csv"))
    emit(document, 'gauge_report', args.schemas)
    return EXIT_OK if grid.max_residual < args.tol and fit.max_residual < args.tol else EXIT_FAILURE


def cmd_verify(args, config):
    summary = VerificationPipeline(config).run_pipeline(args.directory)
    print(dumps_json({k: summary[k] for k in ('verified', 'rejected', 'total')}))
    return EXIT_OK if not summary['rejected'] else EXIT_FAILURE


COMMANDS = {
    'kernel': cmd_kernel,
    'check': cmd_check,
    'reduce': cmd_reduce,
    'compat': cmd_compat,
    'simulate': cmd_simulate,
    'specfun': cmd_specfun,
    'solveg': cmd_solveg,
    'verify': cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(
        description='Third-order integrals of separable two-dimensional Hamiltonians',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Leading terms that can vanish in the elliptic chart
  python main.py kernel --chart elliptic --select F2

  # Check a candidate integral
  python main.py check data/candidates/oscillator.json

  # Linear ODE for V2 with x frozen at 1
  python main.py reduce --chart cartesian --A A120=1 --target V2 --fix x=1

  # Trajectory drift of the oscillator integrals
  python main.py simulate data/jobs/simulate_oscillator.json
        """
    )
    parser.add_argument('--config', default='config/config.yaml', help='Path to configuration file')
    parser.add_argument('--seed', type=int, default=None, help='Seed of randomized checks (default from config)')
    parser.add_argument('--schemas', default=None, help='Directory of JSON schemas (default: schemas/)')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('kernel', help='Vanishing kernel of selected leading terms')
    p.add_argument('--chart', required=True)
    p.add_argument('--select', required=True, help='Comma separated subset of F1..F4')
    p.add_argument('--method', default='both', choices=['symbolic', 'sampled', 'both'])
    p.add_argument('--points', type=int, default=None)

    p = sub.add_parser('check', help='Determining-equation residuals of a candidate')
    p.add_argument('candidate')
    p.add_argument('--hbar', default=None, help='Override hbar (exact rational)')

    p = sub.add_parser('reduce', help='Reduce the chart condition to a linear ODE')
    p.add_argument('--chart', required=True)
    p.add_argument('--A', action='append', default=[], help='Coefficients as NAME=VALUE (repeatable)')
    p.add_argument('--target', required=True)
    p.add_argument('--fix', required=True, help='Frozen variable, e.g. x=1')
    p.add_argument('--basis', action='store_true', help='Add the solution basis modulo constants')

    p = sub.add_parser('compat', help='Chart condition against the pulled-back general condition')
    p.add_argument('--chart', required=True)
    p.add_argument('--A', action='append', default=[])
    p.add_argument('--points', type=int, default=None)
    p.add_argument('--trials', type=int, default=None)
    p.add_argument('--tol', type=float, default=1e-9)

    p = sub.add_parser('simulate', help='Conserved-quantity drift along a trajectory')
    p.add_argument('job')
    p.add_argument('--output', default=None, help='Drift CSV path')
    p.add_argument('--max-drift', type=float, default=None, help='Fail above this drift')

    p = sub.add_parser('specfun', help='Sampled Painleve or Weierstrass solution')
    p.add_argument('--job', default=None)
    p.add_argument('--kind', choices=[k.value for k in specfun.EquationKind])
    for name in ('alpha', 'beta', 'z0', 'w0', 'dw0', 'tol', 'g2', 'g3'):
        p.add_argument(f'--{name}', type=float, default=None)
    p.add_argument('--samples', type=int, default=None)
    p.add_argument('--span', type=float, nargs=2, default=None)
    p.add_argument('--output', default=None, help='Solution CSV path')

    p = sub.add_parser('solveg', help='Recover g1, g2 by quadrature')
    p.add_argument('job')
    p.add_argument('--output', default=None, help='Gauge grid CSV path')
    p.add_argument('--tol', type=float, default=1e-5)

    p = sub.add_parser('verify', help='Verify every candidate file in a directory')
    p.add_argument('directory')
    return parser


def main(argv=None):
    """Main execution function."""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except SchemaError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_USAGE
    setup_logging(config)
    if args.seed is None:
        args.seed = int(config.get('defaults', {}).get('seed', 0))

    try:
        return COMMANDS[args.command](args, config)
    except SchemaError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except SuperintegrabilityError as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_FAILURE
    except KeyboardInterrupt:
        logger.error("Interrupted by user")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"{args.command} failed with error: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
