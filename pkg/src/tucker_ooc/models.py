"""Models and errors for the Tucker toolkit."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from .config import settings


class TuckerError(Exception):
    """Base exception for every failure raised by the toolkit."""

    def __init__(self, message: str, detailed_message: Optional[str] = None):
        """Initialize the error.

        Args:
            message: Error message
            detailed_message: Detailed error information
        """
        self.message = message
        self.detailed_message = detailed_message
        super().__init__(message, detailed_message)

    def __str__(self) -> str:
        """String representation of the error."""
        if self.detailed_message:
            return f"{self.message} - {self.detailed_message}"
        return self.message


class DimensionError(TuckerError):
    """Shape, mode or order mismatch."""


class ZeroNormError(TuckerError):
    """Operation undefined for an all-zero tensor."""


class CooFormatError(TuckerError):
    """Malformed coordinate-format input."""

    def __init__(self, message: str, line_number: int, detailed_message: Optional[str] = None):
        super().__init__(f"line {line_number}: {message}", detailed_message)
        self.line_number = line_number
        # constructor arguments, so the error survives pickling
        self.args = (message, line_number, detailed_message)


class SliceStoreError(TuckerError):
    """Missing, corrupt or inconsistent slice store."""


class ContainerError(TuckerError):
    """Unreadable decomposition container."""


class MemoryBudgetError(TuckerError):
    """Tracked allocations exceeded the configured cap."""


class BenchSpecError(TuckerError):
    """Malformed benchmark spec file."""

    def __init__(self, message: str, line_number: int = 0):
        prefix = f"line {line_number}: " if line_number else ""
        super().__init__(f"{prefix}{message}")
        self.line_number = line_number
        self.args = (message, line_number)


class ConvergenceConfig(BaseModel):
    """Stopping rules shared by the iterative algorithms."""

    fit_threshold: float = Field(default_factory=lambda: settings.FIT_THRESHOLD, gt=0)
    core_growth_threshold: float = Field(
        default_factory=lambda: settings.CORE_GROWTH_THRESHOLD, gt=0
    )
    max_iterations: int = Field(default_factory=lambda: settings.MAX_ITERATIONS, ge=1)


@dataclass
class TuckerModel:
    """Core tensor plus one factor matrix per mode."""

    core: np.ndarray
    factors: List[np.ndarray]

    def __post_init__(self):
        if len(self.factors) != self.core.ndim:
            raise DimensionError(
                f"expected {self.core.ndim} factors, got {len(self.factors)}"
            )
        for n, factor in enumerate(self.factors):
            if factor.ndim != 2 or factor.shape[1] != self.core.shape[n]:
                raise DimensionError(
                    f"factor {n} has shape {factor.shape}, core dim is {self.core.shape[n]}"
                )

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(int(f.shape[0]) for f in self.factors)

    @property
    def core_dims(self) -> Tuple[int, ...]:
        return tuple(int(d) for d in self.core.shape)

    @property
    def order(self) -> int:
        return self.core.ndim

    def orthonormality_error(self) -> float:
        """Largest ``|AᵀA - I|`` entry over all factors."""
        worst = 0.0
        for factor in self.factors:
            gram = factor.T @ factor
            worst = max(worst, float(np.abs(gram - np.eye(gram.shape[0])).max()))
        return worst


@dataclass
class RunResult:
    """Outcome of one decomposition run."""

    model: TuckerModel
    fit_history: List[float]
    iterations: int
    terminated_by: Literal["threshold", "max_iterations", "single_pass"]
    final_fit: Optional[float] = None
    flags: Dict[str, Any] = field(default_factory=dict)


class RunMetrics(BaseModel):
    """Per-run record mirroring the columns of the published result tables."""

    algorithm: str
    dims: Tuple[int, ...]
    core_dims: Tuple[int, ...]
    density: float = Field(ge=0, le=1)
    nnz: int = Field(ge=0)
    seed: int = 0
    fit: float = Field(le=1 + 1e-12)
    iterations: int = Field(ge=0)
    terminated_by: str = ""
    wall_seconds: float = Field(ge=0)
    store_build_seconds: float = Field(default=0.0, ge=0)
    peak_bytes: int = Field(ge=0)
    sort_buffer_bytes: int = Field(default=0, ge=0)
    input_bytes: int = Field(ge=0)
    output_bytes: int = Field(ge=0)

    @field_validator("nnz")
    def validate_nnz(cls, v: int, info) -> int:
        dims = info.data.get("dims")
        if dims is not None and v > int(np.prod(dims, dtype=np.float64)):
            raise ValueError("nnz exceeds the number of cells")
        return v
