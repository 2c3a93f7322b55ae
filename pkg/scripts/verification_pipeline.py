"""
Verification pipeline for candidate third-order integrals

Checks candidate files against the determining equations:
1. Loads and validates every candidate JSON in a directory
2. Computes the determining-equation residuals (and {H, X} when classical)
3. Routes each candidate to the verified or rejected directory
4. Writes a summary report

Author: Analysis Team
Date: October 2026
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import determine
import dynamics
import symcore
from errors import SuperintegrabilityError
from job_loader import load_candidate
from utils import load_config, setup_directories, write_json


logger = logging.getLogger(__name__)

# Residual names in the order the determining equations are usually listed.
RESIDUAL_NAMES = ('g1_x1', 'mixed', 'g2_x2', 'zeroth', 'linear_compat')


@dataclass(frozen=True)
class ResidualReport:
    """Symbolic residuals of a candidate; `failing` lists the nonzero ones."""

    name: str
    residuals: dict
    bracket: object = None
    hbar: object = 0

    @property
    def failing(self):
        return [k for k in RESIDUAL_NAMES if self.residuals[k] != 0]

    @property
    def passed(self):
        return not self.failing and (self.bracket is None or self.bracket == 0)

    def to_json(self):
        report = {
            'name': self.name,
            'hbar': symcore.rational_text(self.hbar),
            'residuals': {k: symcore.to_text(v) for k, v in self.residuals.items()},
            'failing': self.failing,
            'passed': self.passed,
        }
        if self.bracket is not None:
            report['bracket'] = symcore.to_text(self.bracket)
        return report


def check_candidate(candidate, hbar=None):
    """
    Evaluate every determining equation for a candidate.

    Args:
        candidate (IntegralCandidate): Candidate with symbolic gauge fields and a potential
        hbar: Override of the candidate's hbar

    Returns:
        ResidualReport: Residuals of the three second-order equations, the
        zeroth-order equation, the linear compatibility condition and, for
        hbar = 0, the Poisson bracket {H, X}
    """
    hbar = candidate.hbar if hbar is None else symcore.as_rational(hbar)
    V = candidate.cartesian_potential()
    first, mixed, last = determine.g_residuals(V, candidate.A, candidate.g1, candidate.g2)
    residuals = {
        'g1_x1': first,
        'mixed': mixed,
        'g2_x2': last,
        'zeroth': determine.zeroth_residual(V, candidate.A, candidate.g1, candidate.g2, hbar),
        'linear_compat': determine.linear_compat(V, candidate.A),
    }
    bracket = None
    if hbar == 0:
        H = dynamics.cartesian_hamiltonian(V)
        bracket = dynamics.poisson_bracket(H, dynamics.build_integral(candidate))
    report = ResidualReport(candidate.name, residuals, bracket, hbar)
    if report.passed:
        logger.info(f"Candidate '{candidate.name}' satisfies all determining equations")
    else:
        logger.warning(f"Candidate '{candidate.name}' fails: {', '.join(report.failing) or 'bracket'}")
    return report


class VerificationPipeline:
    """Batch verification of candidate files with verified/rejected routing."""

    def __init__(self, config=None, config_path='config/config.yaml'):
        """
        Args:
            config (dict): Loaded configuration; read from `config_path` when None
            config_path (str): Path to configuration file
        """
        self.config = config if config is not None else load_config(config_path)
        self.paths = self.config.get('paths', {})
        setup_directories(self.config)

    def verify_file(self, path):
        """
        Check one candidate file.

        Returns:
            dict: Report with 'passed' and either residuals or an 'error'
        """
        try:
            candidate = load_candidate(path, self.paths.get('schemas'))
            return check_candidate(candidate).to_json()
        except SuperintegrabilityError as e:
            logger.error(f"Candidate {path} could not be checked: {e}")
            return {'name': Path(path).stem, 'passed': False, 'error': str(e)}

    def route(self, path, report):
        """Write the report next to the candidate's verdict directory."""
        key = 'verified' if report['passed'] else 'rejected'
        destination = Path(self.paths.get(key, f"results/{key}")) / f"{Path(path).stem}.json"
        write_json(report, destination)
        return str(destination)

    def run_pipeline(self, directory, pattern='*.json'):
        """
        Verify every candidate in a directory.

        Args:
            directory (str): Directory of candidate files
            pattern (str): File pattern

        Returns:
            dict: Summary with verified and rejected candidate names
        """
        files = sorted(Path(directory).glob(pattern))
        logger.info(f"Verifying {len(files)} candidates from {directory}")
        summary = {'verified': [], 'rejected': [], 'reports': {}}
        for path in files:
            report = self.verify_file(path)
            destination = self.route(path, report)
            summary['verified' if report['passed'] else 'rejected'].append(report['name'])
            summary['reports'][report['name']] = destination

        summary['total'] = len(files)
        summary['generated'] = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
        output = Path(self.paths.get('output', 'results')) / 'verification_summary.json'
        write_json(summary, output)
        logger.info(f"Verification completed: {len(summary['verified'])} verified, "
                    f"{len(summary['rejected'])} rejected")
        return summary
