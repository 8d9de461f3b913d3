"""Configuration management for hubforge."""
import configparser
import dataclasses
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from platformdirs import user_config_dir

APP_NAME = "hubforge"
CONFIG_FILE_NAME = "config.ini"
TOL_ENV_VAR = "HUBFORGE_TOL"

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerance pack shared by the LP engine, separation and search.

    Attributes:
        feasibility_tol: Absolute primal/dual feasibility tolerance.
        pivot_tol: Smallest pivot element accepted by the ratio test.
        zero_drop: Coefficients below this magnitude are dropped.
        cut_violation_tol: Minimum violation for a cut to be emitted.
        integrality_tol: Distance from an integer accepted as integral.
        gap_tol: Relative gap at which branch-and-cut stops.
        refactor_every: Pivots between basis refactorizations.
    """
    feasibility_tol: float = 1e-7
    pivot_tol: float = 1e-9
    zero_drop: float = 1e-12
    cut_violation_tol: float = 1e-6
    integrality_tol: float = 1e-6
    gap_tol: float = 1e-6
    refactor_every: int = 100


DEFAULT_SETTINGS = {
    'feasibility_tol': '1e-7',
    'pivot_tol': '1e-9',
    'zero_drop': '1e-12',
    'cut_violation_tol': '1e-6',
    'integrality_tol': '1e-6',
    'gap_tol': '1e-6',
    'refactor_every': '100',
    'time_limit': '3600',
    'alpha_sweep': '0.2,0.5,0.8',
    'oracle_max_nodes': '20',
    'cross_check_max_nodes': '15',
}


def get_config_path():
    """Get the path to the configuration file."""
    config_dir = Path(user_config_dir(APP_NAME, APP_NAME))
    return config_dir / CONFIG_FILE_NAME


def load_config():
    """Load configuration from file."""
    config_parser = configparser.ConfigParser()
    config_parser.read(get_config_path())
    return config_parser


def _coerce(field, raw):
    """Convert a raw string to the type of a Tolerances field."""
    return int(float(raw)) if field.type in (int, 'int') else float(raw)


def _parse_env_overrides(raw):
    """Parse HUBFORGE_TOL into a dict of field overrides.

    A bare number overrides ``feasibility_tol``; otherwise the value is a
    comma separated list of ``name=value`` pairs.
    """
    fields = {f.name: f for f in dataclasses.fields(Tolerances)}
    overrides = {}
    raw = raw.strip()
    if not raw:
        return overrides
    try:
        overrides['feasibility_tol'] = float(raw)
        return overrides
    except ValueError:
        pass
    for item in raw.split(','):
        name, sep, value = item.partition('=')
        name = name.strip()
        if not sep or name not in fields:
            logger.warning("Ignoring malformed %s entry: %r", TOL_ENV_VAR, item)
            continue
        try:
            overrides[name] = _coerce(fields[name], value.strip())
        except ValueError:
            logger.warning("Ignoring non-numeric %s entry: %r", TOL_ENV_VAR, item)
    return overrides


def get_tolerances(parser=None) -> Tolerances:
    """Build the tolerance pack from defaults, config file and environment.

    Args:
        parser: Optional ConfigParser; defaults to the module-level config.

    Returns:
        Tolerances: The effective tolerance pack.
    """
    parser = config if parser is None else parser
    values = {}
    for field in dataclasses.fields(Tolerances):
        try:
            raw = parser.get('DEFAULT', field.name, fallback=None)
        except (configparser.Error, AttributeError):
            raw = None
        if raw is None:
            continue
        try:
            values[field.name] = _coerce(field, raw)
        except ValueError:
            logger.warning("Ignoring invalid config value %s=%r", field.name, raw)
    values.update(_parse_env_overrides(os.getenv(TOL_ENV_VAR, '')))
    return Tolerances(**values)


def get_setting(key, fallback=None):
    """Read a raw DEFAULT-section setting from the configuration.

    Args:
        key: Setting name.
        fallback: Value returned when the key is absent.

    Returns:
        str or the fallback.
    """
    try:
        return config.get('DEFAULT', key, fallback=fallback)
    except (configparser.Error, AttributeError):
        return fallback


def get_alpha_sweep():
    """Interhub discount factors used by batch commands."""
    raw = get_setting('alpha_sweep', DEFAULT_SETTINGS['alpha_sweep'])
    try:
        return [float(part) for part in raw.split(',') if part.strip()]
    except ValueError:
        logger.warning("Invalid alpha_sweep %r, using defaults", raw)
        return [0.2, 0.5, 0.8]


config = load_config()
