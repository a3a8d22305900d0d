"""Random inputs, single runs and benchmark suites."""

from .bench import aggregate, bench_suite, parse_bench_spec
from .generate import gen_random_tensor
from .runner import inspect_model, prepare_stores, run

__all__ = [
    "aggregate",
    "bench_suite",
    "gen_random_tensor",
    "inspect_model",
    "parse_bench_spec",
    "prepare_stores",
    "run",
]
