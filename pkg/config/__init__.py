"""
Configuration package for taperlink
"""

from config.settings import RunConfig, load_config, bundled

__all__ = ["RunConfig", "load_config", "bundled"]
