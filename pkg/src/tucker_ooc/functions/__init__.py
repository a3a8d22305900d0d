"""Tool functions registered with the MCP server."""

from .benchmark import run_benchmark
from .decompose import decompose, inspect_model
from .generate import generate_tensor

__all__ = [
    "decompose",
    "generate_tensor",
    "inspect_model",
    "run_benchmark",
]
