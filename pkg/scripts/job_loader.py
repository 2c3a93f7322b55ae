"""
Job and candidate ingestion for the superintegrability toolkit

Reads JSON job specifications and candidate integrals, validates them
against the schemas shipped in `schemas/` and turns potential component
descriptors (expression text, special-function specs, sampled CSV files)
into SeparablePotential objects.

Author: Analysis Team
Date: October 2026
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd

import charts
import specfun
from charts import Coeffs10, SeparablePotential
from dynamics import IntegralCandidate, SampledComponent
from errors import SchemaError


logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parent.parent
SCHEMA_DIR = ROOT / 'schemas'


def load_schema(name, schema_dir=None):
    """Schema `<name>.schema.json` from the schema directory."""
    base = Path(schema_dir) if schema_dir else SCHEMA_DIR
    if not base.is_absolute():
        base = ROOT / base
    path = base / f"{name}.schema.json"
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError:
        raise SchemaError(f"Schema file not found at {path}") from None


def validate_document(document, name, schema_dir=None):
    """
    Validate a JSON document against a named schema.

    Raises:
        SchemaError: the document does not match
    """
    try:
        jsonschema.validate(instance=document, schema=load_schema(name, schema_dir))
    except jsonschema.ValidationError as e:
        where = '/'.join(str(p) for p in e.absolute_path) or '<root>'
        raise SchemaError(f"{name} document invalid at {where}: {e.message}") from None
    return document


def read_json(path):
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError:
        raise SchemaError(f"File not found: {path}") from None
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}") from None


@dataclass(frozen=True)
class JobSpec:
    """A validated job: command, chart, coefficients, potential and numeric settings."""

    command: str
    chart: charts.ChartTag
    A: Coeffs10
    potential: object = None
    hbar: str = '0'
    settings: dict = field(default_factory=dict)
    source: str = None


def _resolve(path, base):
    path = Path(path)
    if not path.is_absolute() and base is not None:
        path = Path(base) / path
    if not path.exists():
        raise SchemaError(f"Referenced file does not exist: {path}")
    return path


def load_sampled_solution(path, kind, parameters=None):
    """SampledSolution from a CSV written by SampledSolution.to_csv."""
    frame = pd.read_csv(path, float_precision='round_trip')
    missing = {'z', 'w', 'dw'} - set(frame.columns)
    if missing:
        raise SchemaError(f"{path} lacks columns {sorted(missing)}")
    n = len(frame)
    return specfun.SampledSolution(
        kind=specfun.EquationKind(kind),
        parameters=dict(parameters or {}),
        z=frame['z'].to_numpy(float),
        w=frame['w'].to_numpy(float),
        dw=frame['dw'].to_numpy(float),
        err=frame['err'].to_numpy(float) if 'err' in frame else np.zeros(n),
        pole=frame['pole_flag'].to_numpy(bool) if 'pole_flag' in frame else np.zeros(n, dtype=bool),
    )


def build_component(descriptor, base=None):
    """
    Turn a component descriptor into an expression or SampledComponent.

    Descriptors are expression text, {"expr": text},
    {"special": {...PainleveSpec fields}, "scaling": {"hbar", "kappa"}} or
    {"sampled": csv path, "kind", "parameters", "alpha", "beta"}.
    """
    if isinstance(descriptor, str):
        return descriptor
    if 'expr' in descriptor:
        return descriptor['expr']
    if 'special' in descriptor:
        spec = dict(descriptor['special'])
        spec['span'] = tuple(spec.get('span', (0.0, 1.0)))
        solution = specfun.integrate_painleve(specfun.PainleveSpec(**spec))
        scaling = descriptor.get('scaling')
        if scaling:
            return SampledComponent.from_scaling(
                solution, specfun.painleve_one_scaling(scaling['hbar'], scaling['kappa']))
        return SampledComponent(solution)
    if 'sampled' in descriptor:
        solution = load_sampled_solution(_resolve(descriptor['sampled'], base), descriptor['kind'],
                                         descriptor.get('parameters'))
        return SampledComponent(solution, alpha=descriptor.get('alpha', 1.0),
                                beta=descriptor.get('beta', 1.0))
    raise SchemaError(f"Unrecognised component descriptor: {descriptor}")


def build_potential(document, chart, base=None):
    """Potential block of a job: expression text or a separable description."""
    if document is None or isinstance(document, str):
        return document
    components = [build_component(d, base) for d in document['components']]
    return SeparablePotential(chart, components[0], components[1], dict(document.get('parameters', {})))


def load_job(path, schema_dir=None):
    """
    Load and validate a job file.

    Args:
        path (str): Job JSON path
        schema_dir (str): Directory holding the schemas

    Returns:
        JobSpec: Validated job

    Raises:
        SchemaError: invalid document or missing referenced file
    """
    document = validate_document(read_json(path), 'job', schema_dir)
    base = Path(path).parent
    chart = charts.get_chart(document.get('chart', 'cartesian')).tag
    reserved = {'command', 'chart', 'A', 'potential', 'hbar'}
    job = JobSpec(
        command=document['command'],
        chart=chart,
        A=Coeffs10.from_mapping(document.get('A', {})),
        potential=build_potential(document.get('potential'), chart, base),
        hbar=str(document.get('hbar', '0')),
        settings={k: v for k, v in document.items() if k not in reserved},
        source=str(path),
    )
    logger.info(f"Loaded {job.command} job from {path}")
    return job


def load_candidate(path, schema_dir=None):
    """
    Load and validate a candidate integral file.

    Raises:
        SchemaError: invalid document
    """
    document = validate_document(read_json(path), 'candidate', schema_dir)
    candidate = IntegralCandidate.from_json(document)
    logger.info(f"Loaded candidate '{candidate.name}' from {path}")
    return candidate
