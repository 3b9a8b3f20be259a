"""
Configuration Manager for the big-bang regularization toolkit
Handles reading and parsing of configuration files with thread-safe implementation.
"""

import configparser
import os
import threading
from typing import Dict, Any, Optional


PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class ConfigManager:
    """Thread-safe configuration manager for integrator, bounce and sweep settings."""

    _instance = None
    _lock = threading.Lock()

    def __new__(cls):
        """Singleton pattern implementation with thread safety."""
        if cls._instance is None:
            with cls._lock:
                if cls._instance is None:
                    cls._instance = super(ConfigManager, cls).__new__(cls)
                    cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        """Initialize configuration manager."""
        if not self._initialized:
            self.config = configparser.ConfigParser()
            self.config_path = os.path.join(os.path.dirname(__file__), 'config.ini')
            self._load_config()
            self._initialized = True

    def _load_config(self) -> None:
        """Load configuration from config.ini file."""
        if not os.path.exists(self.config_path):
            raise FileNotFoundError(f"Configuration file not found: {self.config_path}")
        self.config.read(self.config_path)

    def get_integrator_config(self) -> Dict[str, Any]:
        """Get adaptive integrator defaults."""
        section = self.config['INTEGRATOR']

        return {
            'rel_tol': section.getfloat('rel_tol'),
            'abs_tol': section.getfloat('abs_tol'),
            'max_steps': section.getint('max_steps'),
            'stop_a_min': section.getfloat('stop_a_min'),
            'stop_r_min': section.getfloat('stop_r_min'),
            'stop_time_left': section.getfloat('stop_time_left'),
            'event_tol': section.getfloat('event_tol'),
            'safety': section.getfloat('safety'),
            'min_factor': section.getfloat('min_factor'),
            'max_factor': section.getfloat('max_factor')
        }

    def get_bounce_config(self) -> Dict[str, Any]:
        """Get bounce construction and exponent-fit settings."""
        section = self.config['BOUNCE']

        return {
            'min_time_to_singularity': section.getfloat('min_time_to_singularity'),
            'asymptotic_tol': section.getfloat('asymptotic_tol'),
            'fit_min_samples': section.getint('fit_min_samples'),
            'epoch_tol': section.getfloat('epoch_tol'),
            'initial_scale_factor': section.getfloat('initial_scale_factor'),
            'match_time_to_singularity': section.getfloat('match_time_to_singularity'),
            'fit_time_min': section.getfloat('fit_time_min'),
            'fit_time_max': section.getfloat('fit_time_max'),
            'junction_epoch_tol': section.getfloat('junction_epoch_tol')
        }

    def get_sweep_config(self) -> Dict[str, int]:
        """Get parameter sweep settings."""
        section = self.config['SWEEP']

        max_workers = section.getint('max_workers')
        if max_workers <= 0:
            max_workers = os.cpu_count() or 1
        return {'max_workers': max_workers}

    def get_logging_config(self) -> Dict[str, str]:
        """Get logging configuration."""
        default_section = self.config['DEFAULT']

        return {
            'log_level': default_section.get('log_level'),
            'log_file': default_section.get('log_file')
        }

    def get_paths_config(self) -> Dict[str, str]:
        """Get file locations, resolved against the project root."""
        section = self.config['PATHS']

        return {
            key: os.path.join(PROJECT_ROOT, section.get(key))
            for key in ('default_params', 'schema_directory', 'output_dir')
        }

    def get_config_value(self, section: str, key: str, fallback: Optional[str] = None) -> str:
        """Get a specific configuration value."""
        try:
            return self.config.get(section, key, fallback=fallback)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if fallback is not None:
                return fallback
            raise


# Global configuration instance
config_manager = ConfigManager()
