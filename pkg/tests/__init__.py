"""Test suite for tucker_ooc."""
