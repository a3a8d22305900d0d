"""Tests for tool registration on the MCP server."""

import pytest

import src.tucker_ooc.functions  # noqa: F401
from src.tucker_ooc.mcp_server import mcp


@pytest.mark.asyncio
async def test_tools_registered():
    """Test that every tool is exposed by the server."""
    tools = await mcp.get_tools()

    assert {"decompose", "generate_tensor", "inspect_model", "run_benchmark"} <= set(tools)
