"""Out-of-core Tucker decompositions of sparse tensors."""

__version__ = "0.1.0"
