"""Test storage package initialization."""
