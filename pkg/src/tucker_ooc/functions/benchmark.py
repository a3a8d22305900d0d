"""Benchmark tool."""

import asyncio
import logging
from typing import Any, Dict, Optional

from ..harness.bench import aggregate, bench_suite
from ..mcp_server import mcp

logger = logging.getLogger("tucker_ooc.functions.benchmark")


def run_benchmark_impl(
    spec: str, out_csv: str, aggregate_csv: Optional[str] = None
) -> Dict[str, Any]:
    """Run a benchmark spec and write its CSV report.

    Args:
        spec: Benchmark spec file
        out_csv: Per-run report destination
        aggregate_csv: Optional destination for the means over seeds

    Returns:
        Row counts and report paths
    """
    logger.info(f"Running benchmark spec {spec}")
    try:
        rows = bench_suite(spec, out_csv)
        table = aggregate(out_csv, aggregate_csv) if aggregate_csv else None
    except Exception as e:
        logger.error(f"Error running benchmark {spec}: {str(e)}")
        raise
    result: Dict[str, Any] = {"rows": len(rows), "csv": out_csv}
    message = f"Wrote {len(rows)} runs to {out_csv}"
    if aggregate_csv:
        result["aggregate_csv"] = aggregate_csv
        message += f" and {len(table)} aggregate rows to {aggregate_csv}"
    result["message"] = message
    return result


@mcp.tool
async def run_benchmark(
    spec: str, out_csv: str, aggregate_csv: Optional[str] = None
) -> Dict[str, Any]:
    """Run a benchmark spec file."""
    return await asyncio.to_thread(run_benchmark_impl, spec, out_csv, aggregate_csv)
