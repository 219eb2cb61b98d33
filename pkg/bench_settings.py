"""
Settings Module
Centralized defaults for solvers, bench runs and the API server

Priority everywhere: explicit argument > environment variable > built-in default
"""

import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

VERSION = "1.0.0"


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {raw!r}. Please fix it in .env file.")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}. Please fix it in .env file.")


def get_default_rho(rho: Optional[float] = None) -> float:
    """
    Returns the ADMM penalty parameter.

    Returns:
        rho from argument, BOUNDLDA_RHO, or 100.0
    """
    return rho if rho is not None else _env_float('BOUNDLDA_RHO', 100.0)


def get_default_tolerances() -> tuple:
    """
    Returns the ADMM stopping tolerances.

    Returns:
        (eps_pri, eps_dual), default (1e-4, 1e-4)
    """
    return (
        _env_float('BOUNDLDA_EPS_PRI', 1e-4),
        _env_float('BOUNDLDA_EPS_DUAL', 1e-4),
    )


def get_default_it_max() -> int:
    """Maximum ADMM iterations (BOUNDLDA_IT_MAX, default 500)"""
    return _env_int('BOUNDLDA_IT_MAX', 500)


def get_default_seed() -> int:
    """Base random seed (BOUNDLDA_SEED, default 0)"""
    return _env_int('BOUNDLDA_SEED', 0)


def get_default_workers() -> int:
    """Concurrent bench runs (BOUNDLDA_WORKERS, default 1)"""
    return max(1, _env_int('BOUNDLDA_WORKERS', 1))


def get_default_output_dir() -> str:
    """Report directory (BOUNDLDA_OUTPUT_DIR, default ./reports)"""
    return os.getenv('BOUNDLDA_OUTPUT_DIR', 'reports')


def get_default_data_dir() -> str:
    """
    Returns the directory bundled datasets are read from.

    Returns:
        BOUNDLDA_DATA_DIR, or the data/ folder next to this file
    """
    return os.getenv('BOUNDLDA_DATA_DIR', os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data'))


def get_api_bind() -> tuple:
    """
    Returns host and port for the HTTP server.

    Returns:
        (host, port), default ('127.0.0.1', 8001)
    """
    return os.getenv('API_HOST', '127.0.0.1'), _env_int('API_PORT', 8001)
