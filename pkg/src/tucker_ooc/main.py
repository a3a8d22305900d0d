"""Command-line entry point for the Tucker toolkit."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import settings
from .decomp import ALGORITHMS
from .models import ConvergenceConfig, TuckerError

# Configure logging
logging.basicConfig(
    level=logging.DEBUG if settings.DEBUG else logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger("tucker_ooc")


def _int_list(text: str) -> List[int]:
    """Parse ``60x60x60``, ``60,60,60`` or ``60 60 60``."""
    parts = text.replace("x", " ").replace(",", " ").split()
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}")


def _update_order(text: str) -> List[int]:
    # 1-based on the command line
    return [n - 1 for n in _int_list(text)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tucker-ooc", description="Out-of-core Tucker decomposition of sparse tensors"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a random sparse tensor")
    gen.add_argument("--dims", type=_int_list, required=True)
    gen.add_argument("--density", type=float, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="decompose a coordinate file")
    run.add_argument("--algo", choices=ALGORITHMS, required=True)
    run.add_argument("--input", required=True)
    run.add_argument("--dims", type=_int_list, required=True)
    run.add_argument("--core", type=_int_list, required=True)
    run.add_argument("--tol", type=float, help="fit threshold (core growth threshold for sp)")
    run.add_argument("--max-iters", type=int)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--sort-buffer", type=int, help="external sort buffer in bytes")
    run.add_argument("--slab-size", type=int, help="slices per slab file")
    run.add_argument("--update-order", type=_update_order, help="sp factor order, e.g. 1,2,3")
    run.add_argument("--work-dir", help="slice store cache root")
    run.add_argument("--out", help="container destination")
    run.add_argument("--metrics", help="write the run metrics as JSON here")

    bench = sub.add_parser("bench", help="run a benchmark spec")
    bench.add_argument("--spec", required=True)
    bench.add_argument("--out-csv", required=True)
    bench.add_argument("--work-dir")

    inspect = sub.add_parser("inspect", help="describe a decomposition container")
    inspect.add_argument("--model", required=True)
    inspect.add_argument("--input")
    inspect.add_argument("--dims", type=_int_list)

    agg = sub.add_parser("aggregate", help="means over seeds of a bench CSV")
    agg.add_argument("--csv", required=True)
    agg.add_argument("--out", required=True)

    sub.add_parser("serve", help="start the MCP tool server")
    return parser


def _convergence(args: argparse.Namespace) -> ConvergenceConfig:
    overrides = {}
    if args.max_iters is not None:
        overrides["max_iterations"] = args.max_iters
    if args.tol is not None:
        overrides["fit_threshold"] = args.tol
        overrides["core_growth_threshold"] = args.tol
    return ConvergenceConfig(**overrides)


def _print(payload) -> None:
    print(json.dumps(payload, indent=2))


def serve() -> None:
    """Run the MCP server."""
    from .mcp_server import mcp

    # Import functions to register them with the MCP server
    from .functions import decompose, generate_tensor, inspect_model, run_benchmark  # noqa: F401

    logger.info(f"Starting Tucker MCP server on {settings.HOST}:{settings.PORT}")
    logger.debug(f"  WORK_DIR: {settings.WORK_DIR}")
    logger.debug(f"  SORT_BUFFER_BYTES: {settings.SORT_BUFFER_BYTES}")
    mcp.run()


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        if args.command == "gen":
            from .harness import gen_random_tensor

            coo = gen_random_tensor(args.dims, args.density, args.seed, args.out)
            _print({"path": str(coo.path), "dims": list(coo.dims), "nnz": coo.nnz})
        elif args.command == "run":
            from .harness import run

            metrics = run(
                args.algo,
                args.input,
                args.dims,
                args.core,
                _convergence(args),
                seed=args.seed,
                out_path=args.out,
                sort_buffer_bytes=args.sort_buffer,
                slab_size=args.slab_size,
                work_dir=args.work_dir,
                update_order=args.update_order,
            )
            payload = metrics.model_dump(mode="json")
            if args.metrics:
                Path(args.metrics).write_text(json.dumps(payload, indent=2) + "\n")
            _print(payload)
        elif args.command == "bench":
            from .harness import bench_suite

            rows = bench_suite(args.spec, args.out_csv, args.work_dir)
            logger.info(f"Wrote {len(rows)} rows to {args.out_csv}")
        elif args.command == "inspect":
            from .harness import inspect_model

            _print(inspect_model(args.model, args.input, args.dims))
        elif args.command == "aggregate":
            from .harness import aggregate

            table = aggregate(args.csv, args.out)
            logger.info(f"Wrote {len(table)} aggregate rows to {args.out}")
        elif args.command == "serve":
            serve()
    except TuckerError as e:
        logger.error(str(e))
        return 1
    return 0


def run() -> None:
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
