"""
Utility functions for the superintegrability toolkit

Configuration loading, logging setup and the JSON/CSV writers shared by
the command line and the batch pipeline.

Author: Analysis Team
Date: October 2026
"""

import json
import logging
import os
import sys
from pathlib import Path

import yaml
from dotenv import load_dotenv

from errors import SchemaError


DEFAULT_CONFIG = 'config/config.yaml'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Environment variables that override config values.
ENV_OVERRIDES = {
    'SUPERINT_LOG_LEVEL': ('logging', 'level'),
    'SUPERINT_OUTPUT_DIR': ('paths', 'output'),
    'SUPERINT_SEED': ('defaults', 'seed'),
}


def load_config(config_path=DEFAULT_CONFIG):
    """
    Load configuration from a YAML file and apply environment overrides.

    Args:
        config_path (str): Path to configuration file

    Returns:
        dict: Configuration dictionary

    Raises:
        SchemaError: file missing or not valid YAML
    """
    load_dotenv()
    try:
        with open(config_path, 'r') as file:
            config = yaml.safe_load(file) or {}
    except FileNotFoundError:
        raise SchemaError(f"Configuration file not found at {config_path}") from None
    except yaml.YAMLError as e:
        raise SchemaError(f"Error parsing YAML configuration: {e}") from None

    for variable, (section, key) in ENV_OVERRIDES.items():
        value = os.getenv(variable)
        if value:
            config.setdefault(section, {})[key] = int(value) if key == 'seed' else value
    return config


def setup_logging(config, stream=sys.stderr):
    """
    Configure logging from the `logging` section of the config.

    Logs go to the configured file and to `stream`; stderr keeps stdout
    free for JSON and CSV output.
    """
    log_config = config.get('logging', {})
    log_level = getattr(logging, str(log_config.get('level', 'INFO')).upper(), logging.INFO)
    log_format = log_config.get('format', LOG_FORMAT)
    handlers = [logging.StreamHandler(stream)]

    log_file = log_config.get('file')
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(level=log_level, format=log_format, handlers=handlers, force=True)
    return logging.getLogger('superint')


def setup_directories(config):
    """
    Create all output directories named in the config.

    Args:
        config (dict): Configuration dictionary
    """
    for path_name, path_value in config.get('paths', {}).items():
        if path_name != 'schemas':
            Path(path_value).mkdir(parents=True, exist_ok=True)


def numerics(config, key, default):
    """Value from the `numerics` section, or `default`."""
    return config.get('numerics', {}).get(key, default)


def dumps_json(report):
    """Canonical JSON text: sorted keys, two-space indent."""
    return json.dumps(report, sort_keys=True, indent=2)


def write_json(report, path):
    """
    Write a report as canonical JSON.

    Args:
        report (dict): JSON-ready report
        path (str): Output file path

    Returns:
        str: The written path
    """
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        f.write(dumps_json(report) + '\n')
    return str(path)


def write_csv(frame, path):
    """Write a DataFrame with 17 significant digits, no index."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.17g')
    return str(path)
