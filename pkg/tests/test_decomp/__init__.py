"""Test decomp package initialization."""
