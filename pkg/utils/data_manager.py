"""
Data Manager Module

Centralized file I/O for the toolkit:
- parameter files (JSON, validated against the params schema)
- JSON artifacts with stable key order and NaN written as null
- trajectory CSV files at 17 significant digits through pandas
"""

import json
import math
import threading
from datetime import datetime
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from bigbang.cosmo import CosmologyParams
from bigbang.exceptions import ParameterFileError, RejectedInputError
from bigbang.ratnum import format_rational
from config.config_manager import config_manager
from utils.data_validator import SchemaManager
from utils.logger import get_logger


CSV_FLOAT_FORMAT = "%.17g"
TRAJECTORY_COLUMNS = ("tau", "s", "a", "P", "r", "v", "H_residual", "M_residual")

PathLike = Union[str, Path]


def to_json_compatible(value: Any) -> Any:
    """Recursively convert numpy scalars, Fractions, enums and non-finite floats (to None)."""
    if isinstance(value, dict):
        return {str(key): to_json_compatible(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_json_compatible(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_json_compatible(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Enum):
        return value.value
    return value


def dumps_json(data: Any) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, NaN as null."""
    return json.dumps(to_json_compatible(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


class DataManager:
    """
    File I/O manager for parameter files and run artifacts

    Features:
    - Schema-validated parameter loading with caching by modification time
    - Thread-safe operations
    - Deterministic JSON and CSV output
    """

    def __init__(self, output_directory: Optional[PathLike] = None, schema_manager: Optional[SchemaManager] = None):
        """
        Initialize DataManager

        Args:
            output_directory: Default directory for artifacts ([PATHS] output_dir when omitted)
            schema_manager: Schema lookup; the default schema directory when omitted
        """
        self.logger = get_logger(__name__)
        paths = config_manager.get_paths_config()
        self.output_directory = Path(output_directory) if output_directory else Path(paths['output_dir'])
        self.default_params_path = Path(paths['default_params'])
        self.schema_manager = schema_manager or SchemaManager()

        self._lock = threading.RLock()
        self._cache: Dict[str, Any] = {}

    def _load_json(self, file_path: Path) -> Any:
        """Load JSON data"""
        try:
            with open(file_path, 'r', encoding='utf-8') as file:
                return json.load(file)
        except json.JSONDecodeError as e:
            raise ParameterFileError(f"Invalid JSON in {file_path}: {e}")
        except OSError as e:
            raise ParameterFileError(f"Failed to read {file_path}: {e}", reason="params-unreadable")

    def load_params(self, path: Optional[PathLike] = None, force_reload: bool = False) -> CosmologyParams:
        """
        Load and validate a parameter file

        Args:
            path: Parameter JSON file; the shipped default when omitted
            force_reload: Ignore the cache

        Returns:
            CosmologyParams

        Raises:
            ParameterFileError: missing file, invalid JSON or schema violation
        """
        file_path = Path(path) if path else self.default_params_path
        with self._lock:
            if not file_path.exists():
                raise ParameterFileError(f"Parameter file not found: {file_path}", reason="params-not-found")

            cache_key = str(file_path.resolve())
            mtime = datetime.fromtimestamp(file_path.stat().st_mtime)
            cached = self._cache.get(cache_key)
            if not force_reload and cached is not None and cached[0] >= mtime:
                self.logger.debug(f"Using cached parameters for {file_path}")
                return cached[1]

            data = self._load_json(file_path)
            result = self.schema_manager.validate_with_schema(data, "params")
            if not result.is_valid:
                raise ParameterFileError(f"Invalid parameter file {file_path}: " + "; ".join(result.errors))
            try:
                params = CosmologyParams.from_dict(data)
            except RejectedInputError as e:
                raise ParameterFileError(f"Invalid parameter file {file_path}: {e}", reason=e.reason) from e

            self._cache[cache_key] = (mtime, params)
            self.logger.debug(f"Loaded parameters from {file_path}")
            return params

    def resolve_output(self, filename: str, output_directory: Optional[PathLike] = None) -> Path:
        """Path of an artifact, creating its directory."""
        directory = Path(output_directory) if output_directory else self.output_directory
        directory.mkdir(parents=True, exist_ok=True)
        return directory / filename

    def write_json(self, data: Any, file_path: PathLike) -> Path:
        """Write a JSON artifact with stable key order."""
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            file_path.write_text(dumps_json(data), encoding='utf-8')
        self.logger.debug(f"Wrote {file_path}")
        return file_path

    def write_trajectory_csv(self, frame: pd.DataFrame, file_path: PathLike) -> Path:
        """Write a trajectory table; floats at 17 significant digits, NaN as empty field."""
        missing = [column for column in TRAJECTORY_COLUMNS if column not in frame.columns]
        if missing:
            raise ValueError(f"Trajectory frame lacks columns {missing}")
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        frame.loc[:, list(TRAJECTORY_COLUMNS)].to_csv(file_path, index=False, float_format=CSV_FLOAT_FORMAT)
        self.logger.debug(f"Wrote {len(frame)} rows to {file_path}")
        return file_path

    def read_trajectory_csv(self, file_path: PathLike) -> pd.DataFrame:
        """Read a trajectory table back; values round-trip exactly."""
        return pd.read_csv(file_path, dtype=float, float_precision="round_trip")


_data_manager_instance = None
_data_manager_lock = threading.Lock()


def get_data_manager() -> DataManager:
    """
    Get singleton DataManager instance

    Returns:
        DataManager instance
    """
    global _data_manager_instance

    if _data_manager_instance is None:
        with _data_manager_lock:
            if _data_manager_instance is None:
                _data_manager_instance = DataManager()

    return _data_manager_instance
