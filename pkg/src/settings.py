"""
Settings - Loads config.json over built-in defaults and configures logging
"""

import copy
import json
import logging
import logging.handlers
import re
from pathlib import Path
from typing import Optional

from src.errors import ConfigError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

DEFAULT_CONFIG = {
    "compile": {
        "var_order": "min-fill",
        "elide_summed": True,
        "cache_budget": 200000,
    },
    "query": {
        "enumeration_limit": 1 << 20,
        "batch_size": 4096,
        "zero_tolerance": 1e-20,
    },
    "sampler": {
        "burn_in_factor": 10,
        "scan": "fixed",
        "init_retries": 32,
        "restart_every": 0,
        "memo_size": 65536,
        "chains": 1,
    },
    "oracle": {
        "max_statevector_qubits": 20,
        "max_density_qubits": 10,
        "max_wmc_vars": 24,
    },
    "workloads": {
        "qaoa_gamma": 0.8,
        "qaoa_beta": 0.4,
        "vqe_coupling": 0.6,
        "vqe_rx": 0.5,
        "vqe_rz": 0.3,
    },
    "bench": {
        "queries_per_binding": 4,
        "sweep_seed": 2024,
    },
    "logging": {
        "level": "WARNING",
        "file": "",
        "max_size": "10MB",
        "backup_count": 3,
    },
}

_SIZE_UNITS = {"": 1, "B": 1, "KB": 1024, "MB": 1024 ** 2, "GB": 1024 ** 3}


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[str] = None) -> dict:
    """Load config.json (or the given file) on top of the defaults"""
    config_path = Path(path) if path else Path(__file__).resolve().parent.parent / "config.json"

    if not config_path.exists():
        logger.warning(f"Config file not found at: {config_path}, using defaults")
        return copy.deepcopy(DEFAULT_CONFIG)

    try:
        with open(config_path, 'r', encoding='utf-8') as f:
            user_config = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Failed to read config {config_path}: {e}") from e

    if not isinstance(user_config, dict):
        raise ConfigError(f"Config {config_path} must hold a JSON object")

    return _merge(DEFAULT_CONFIG, user_config)


_config = None


def get_config() -> dict:
    """Get or load the process-wide configuration"""
    global _config
    if _config is None:
        _config = load_config()
    return _config


def parse_size(text) -> int:
    """Parse sizes such as '10MB' into bytes"""
    if isinstance(text, (int, float)):
        return int(text)
    match = re.fullmatch(r'\s*(\d+(?:\.\d+)?)\s*([KMG]?B?)\s*', str(text).upper())
    if not match:
        raise ConfigError(f"Invalid size: {text}")
    return int(float(match.group(1)) * _SIZE_UNITS[match.group(2)])


def setup_logging(config: dict, verbose: bool = False):
    log_config = config.get('logging', {})
    level_name = 'DEBUG' if verbose else str(log_config.get('level', 'WARNING')).upper()
    level = getattr(logging, level_name, logging.WARNING)

    # stdout is reserved for JSON results
    handlers = [logging.StreamHandler()]

    log_file = log_config.get('file')
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.handlers.RotatingFileHandler(
            log_file,
            maxBytes=parse_size(log_config.get('max_size', '10MB')),
            backupCount=int(log_config.get('backup_count', 3)),
            encoding='utf-8'
        ))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
    logger.debug(f"Logging configured at {level_name}")
