"""Test harness package initialization."""
