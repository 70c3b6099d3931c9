"""
I/O modules for thoughtrec.
"""

from .config_io import load_config, save_config, get_default_config, TairaConfig
from .catalog_io import load_catalog_file, save_store, load_store
from .pattern_io import save_pattern_store, load_pattern_store, load_bootstrap_patterns
from .run_io import save_session, load_trajectory

__all__ = [
    "load_config",
    "save_config",
    "get_default_config",
    "TairaConfig",
    "load_catalog_file",
    "save_store",
    "load_store",
    "save_pattern_store",
    "load_pattern_store",
    "load_bootstrap_patterns",
    "save_session",
    "load_trajectory",
]
