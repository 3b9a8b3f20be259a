"""
Data Validator Module

Schema validation for parameter files. Schemas are JSON Schema (draft-07)
documents kept under config/schemas and checked with ``jsonschema``.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from jsonschema import Draft7Validator
from jsonschema.exceptions import SchemaError

from config.config_manager import config_manager


class ValidationLevel(Enum):
    """Validation severity levels"""
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class ValidationResult:
    """Validation result container"""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    info: List[str] = field(default_factory=list)

    def add_message(self, message: str, level: ValidationLevel):
        """Add validation message"""
        if level == ValidationLevel.ERROR:
            self.errors.append(message)
            self.is_valid = False
        elif level == ValidationLevel.WARNING:
            self.warnings.append(message)
        else:
            self.info.append(message)

    def get_all_messages(self) -> List[str]:
        """Get all validation messages"""
        messages = []
        messages.extend([f"ERROR: {msg}" for msg in self.errors])
        messages.extend([f"WARNING: {msg}" for msg in self.warnings])
        messages.extend([f"INFO: {msg}" for msg in self.info])
        return messages


class SchemaManager:
    """
    Schema management for parameter file validation

    Features:
    - Load schemas from files
    - Cache schemas and their compiled validators
    - Error messages carry the JSON path of the offending field
    """

    def __init__(self, schema_directory: Optional[str] = None):
        """
        Initialize SchemaManager

        Args:
            schema_directory: Directory containing schema files; defaults to
                the [PATHS] schema_directory setting
        """
        self.logger = logging.getLogger(__name__)

        if schema_directory:
            self.schema_directory = Path(schema_directory)
        else:
            self.schema_directory = Path(config_manager.get_paths_config()['schema_directory'])

        self._schemas: Dict[str, Dict[str, Any]] = {}
        self._validators: Dict[str, Draft7Validator] = {}

    def load_schema(self, schema_name: str) -> Optional[Dict[str, Any]]:
        """
        Load schema from file

        Args:
            schema_name: Name of the schema file (without extension)

        Returns:
            Schema dictionary or None if not found or not a valid schema
        """
        if schema_name in self._schemas:
            return self._schemas[schema_name]

        schema_file = self.schema_directory / f"{schema_name}.json"

        if not schema_file.exists():
            self.logger.warning(f"Schema file not found: {schema_file}")
            return None

        try:
            with open(schema_file, 'r', encoding='utf-8') as file:
                schema = json.load(file)
            Draft7Validator.check_schema(schema)
        except (OSError, json.JSONDecodeError, SchemaError) as e:
            self.logger.error(f"Failed to load schema {schema_name}: {e}")
            return None

        self._schemas[schema_name] = schema
        self._validators[schema_name] = Draft7Validator(schema)
        self.logger.debug(f"Loaded schema: {schema_name}")
        return schema

    def validate_with_schema(self, data: Any, schema_name: str) -> ValidationResult:
        """
        Validate data using named schema

        Args:
            data: Data to validate
            schema_name: Name of the schema to use

        Returns:
            ValidationResult object, one error per schema violation
        """
        result = ValidationResult(is_valid=True)
        if self.load_schema(schema_name) is None:
            result.add_message(f"Schema '{schema_name}' not found", ValidationLevel.ERROR)
            return result

        validator = self._validators[schema_name]
        for error in sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path)):
            path = ".".join(str(part) for part in error.absolute_path) or "root"
            result.add_message(f"{path}: {error.message}", ValidationLevel.ERROR)
        return result

    def list_schemas(self) -> List[str]:
        """Names of the schema files available in the schema directory."""
        if not self.schema_directory.is_dir():
            return []
        return sorted(path.stem for path in self.schema_directory.glob("*.json"))
