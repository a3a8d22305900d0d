"""Tensor generation tool."""

import asyncio
import logging
from typing import Any, Dict, List

from ..harness.generate import gen_random_tensor
from ..mcp_server import mcp

logger = logging.getLogger("tucker_ooc.functions.generate")


# Implementation functions (for direct testing)
def generate_tensor_impl(dims: List[int], density: float, seed: int, out: str) -> Dict[str, Any]:
    """Write a random sparse tensor file.

    Args:
        dims: Tensor dims (order 2 to 4)
        density: Probability that a cell is nonzero
        seed: Generator seed
        out: Destination path

    Returns:
        File path, dims and nonzero count
    """
    logger.info(f"Generating tensor dims={dims} density={density} seed={seed}")
    try:
        coo = gen_random_tensor(dims, density, seed, out)
    except Exception as e:
        logger.error(f"Error generating {out}: {str(e)}")
        raise
    return {
        "path": str(coo.path),
        "dims": list(coo.dims),
        "nnz": coo.nnz,
        "message": f"Wrote {coo.nnz} nonzeros of a {'x'.join(map(str, coo.dims))} tensor",
    }


@mcp.tool
async def generate_tensor(dims: List[int], density: float, seed: int, out: str) -> Dict[str, Any]:
    """Generate a random sparse tensor file."""
    return await asyncio.to_thread(generate_tensor_impl, dims, density, seed, out)
