"""MCP server instance; tools register themselves on import of ``functions``."""

from fastmcp import FastMCP

mcp = FastMCP(
    name="Tucker",
    instructions=(
        "Generate sparse tensors, decompose them with hosvd, hooi, sp or mp, "
        "inspect saved models and run benchmark suites."
    ),
)
