"""
Exception hierarchy for the simulator and the analytics toolkit.

Library code raises these; `main.py` maps them to process exit codes
(ConfigError → 2, OSError → 3, SchemaError → 4).
"""

# External imports
from typing import List, Optional


class SpotSprayError(Exception):
    """Base class for every error raised by this package."""


class InvalidGeometryError(SpotSprayError, ValueError):
    """Camera or tile geometry that cannot be realised on a flat ground plane."""


class DomainError(SpotSprayError, ValueError):
    """An argument outside the domain of an operation (negative speed, zero area...)."""


class ProtocolError(SpotSprayError):
    """Events delivered to a stateful component in an order it cannot accept."""


class UndefinedStatisticError(SpotSprayError, ValueError):
    """A rate or statistic whose value is undefined for the given inputs."""


class ConfigError(SpotSprayError):
    """
    Invalid run configuration.

    Attributes:
        diagnostics (List[str]): One human-readable line per failing field or
            parse location, e.g. ``"camera.mount_height: Input should be greater than 0"``.
    """

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def __str__(self) -> str:
        if not self.diagnostics:
            return super().__str__()
        return super().__str__() + "\n" + "\n".join(f"  - {d}" for d in self.diagnostics)


class SchemaError(SpotSprayError):
    """
    Tabular input that does not follow its declared schema.

    Attributes:
        row (Optional[int]): 1-based data row (header excluded), when known.
        column (Optional[str]): Offending column name, when known.
    """

    def __init__(
        self, message: str, row: Optional[int] = None, column: Optional[str] = None
    ) -> None:
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(prefix + message)
        self.row = row
        self.column = column


class EmptyInputError(SchemaError):
    """An input file that holds a header at most and no data rows."""
