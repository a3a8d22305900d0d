"""Tool tests."""
