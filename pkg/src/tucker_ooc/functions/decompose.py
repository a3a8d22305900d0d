"""Decomposition and model inspection tools."""

import asyncio
import logging
from typing import Any, Dict, List, Optional

from ..harness.runner import inspect_model as inspect_container
from ..harness.runner import run
from ..mcp_server import mcp
from ..models import ConvergenceConfig

logger = logging.getLogger("tucker_ooc.functions.decompose")


# Implementation functions (for direct testing)
def decompose_impl(
    algorithm: str,
    input_path: str,
    dims: List[int],
    core_dims: List[int],
    seed: int = 0,
    out: Optional[str] = None,
    max_iterations: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> Dict[str, Any]:
    """Run one algorithm on a coordinate file.

    Args:
        algorithm: hosvd, hooi, sp or mp
        input_path: Coordinate-format input
        dims: Tensor dims
        core_dims: Target core dims
        seed: Seed of the SP random initialization
        out: Container destination
        max_iterations: Iteration cap
        tolerance: Fit (or core growth, for sp) threshold

    Returns:
        Run metrics
    """
    overrides = {}
    if max_iterations is not None:
        overrides["max_iterations"] = max_iterations
    if tolerance is not None:
        overrides["fit_threshold"] = tolerance
        overrides["core_growth_threshold"] = tolerance
    cfg = ConvergenceConfig(**overrides)

    logger.info(f"Decomposing {input_path} with {algorithm} into core {core_dims}")
    try:
        metrics = run(algorithm, input_path, dims, core_dims, cfg, seed=seed, out_path=out)
    except Exception as e:
        logger.error(f"Error decomposing {input_path}: {str(e)}")
        raise
    return {
        "metrics": metrics.model_dump(),
        "message": (
            f"{algorithm} fit {metrics.fit:.6f} after {metrics.iterations} iterations "
            f"({metrics.terminated_by})"
        ),
    }


def inspect_model_impl(
    model_path: str, input_path: Optional[str] = None, dims: Optional[List[int]] = None
) -> Dict[str, Any]:
    """Describe a decomposition container.

    Args:
        model_path: Container file
        input_path: Optional coordinate file to measure the fit against
        dims: Dims of the input (defaults to the model's)

    Returns:
        Dims, core dims, orthonormality error and, with an input, the fit
    """
    summary = inspect_container(model_path, input_path, dims)
    message = f"Core {summary['core_dims']} over {summary['dims']}"
    if "fit" in summary:
        message += f", fit {summary['fit']:.6f}"
    return {**summary, "message": message}


@mcp.tool
async def decompose(
    algorithm: str,
    input_path: str,
    dims: List[int],
    core_dims: List[int],
    seed: int = 0,
    out: Optional[str] = None,
    max_iterations: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> Dict[str, Any]:
    """Run a Tucker decomposition on a sparse tensor file."""
    return await asyncio.to_thread(
        decompose_impl, algorithm, input_path, dims, core_dims, seed, out, max_iterations, tolerance
    )


@mcp.tool
async def inspect_model(
    model_path: str, input_path: Optional[str] = None, dims: Optional[List[int]] = None
) -> Dict[str, Any]:
    """Describe a decomposition container."""
    return await asyncio.to_thread(inspect_model_impl, model_path, input_path, dims)
