from __future__ import annotations

from typing import Optional


class HarvestError(Exception):
    pass


class DomainError(HarvestError):
    """A model quantity was asked for outside its domain."""


class ConfigError(DomainError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FileSystemError(HarvestError):
    pass


class ParsingError(HarvestError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class CalibrationError(HarvestError):
    pass


class NumericalError(HarvestError):
    def __init__(self, message: str, stage: Optional[int] = None, node: Optional[float] = None):
        where = []
        if stage is not None:
            where.append(f"stage {stage}")
        if node is not None:
            where.append(f"node {node!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.stage = stage
        self.node = node
