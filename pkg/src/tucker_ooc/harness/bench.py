"""Benchmark suites: spec parsing, execution and CSV reports.

A spec file is line-oriented ``key = value`` text. ``#`` starts a comment.
``[name]`` opens an instance; keys before the first instance (or inside a
``[defaults]`` section) apply to every instance that does not override them.

Instance keys:

    group           label carried into the report (e.g. size, ratio, core4)
    dims            tensor dims, e.g. ``60x60x60``
    density         inclusion probability of each cell
    seeds           ``1-10`` or ``1, 2, 5``
    algorithms      subset of ``hosvd, hooi, sp, mp``
    cores           explicit core dims, ``;``-separated: ``6x6x6; 25x10x4``
    ratios          third-order ratio sweep ``5, 2, 1, 0.5, 0.2`` around ``middle``:
                    core ``(round(m*r), m, round(m/r))``
    middle          middle core dim of the ratio sweep
    core_fractions  core side as a fraction of each tensor side, e.g. ``0.9, 0.5, 0.1``
    max_iterations, fit_threshold, core_growth_threshold, sort_buffer, slab_size

Global keys: ``timing`` (``false`` writes zero times so reports are
byte-identical across runs) and ``workers`` (independent cells run in that
many processes).
"""

import csv
import logging
import re
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..config import settings
from ..decomp import ALGORITHMS
from ..models import BenchSpecError, ConvergenceConfig
from ..tensor import relative_fit
from .generate import gen_random_tensor
from .runner import run

logger = logging.getLogger("tucker_ooc.harness.bench")

CSV_SCHEMA_VERSION = 1
CSV_FIELDS = [
    "schema",
    "instance",
    "group",
    "variant",
    "algorithm",
    "dims",
    "core_dims",
    "density",
    "nnz",
    "seed",
    "fit",
    "iterations",
    "terminated_by",
    "wall_seconds",
    "store_build_seconds",
    "peak_bytes",
    "sort_buffer_bytes",
    "input_bytes",
    "output_bytes",
]
AGGREGATE_FIELDS = [
    "instance",
    "group",
    "variant",
    "algorithm",
    "dims",
    "core_dims",
    "seeds",
    "mean_fit",
    "relative_fit",
    "mean_iterations",
    "mean_wall_seconds",
    "mean_peak_bytes",
]

_SECTION = re.compile(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]$")


class InstanceSpec(BaseModel):
    """One tensor family: dims, density, seeds and the core grid to run."""

    name: str
    group: str = "custom"
    dims: Tuple[int, ...]
    density: float = Field(gt=0, le=1)
    seeds: List[int]
    algorithms: List[str] = list(ALGORITHMS)
    cores: List[Tuple[str, Tuple[int, ...]]]
    max_iterations: int = Field(default_factory=lambda: settings.MAX_ITERATIONS, ge=1)
    fit_threshold: float = Field(default_factory=lambda: settings.FIT_THRESHOLD, gt=0)
    core_growth_threshold: float = Field(
        default_factory=lambda: settings.CORE_GROWTH_THRESHOLD, gt=0
    )
    sort_buffer: Optional[int] = None
    slab_size: Optional[int] = None

    def convergence(self) -> ConvergenceConfig:
        return ConvergenceConfig(
            fit_threshold=self.fit_threshold,
            core_growth_threshold=self.core_growth_threshold,
            max_iterations=self.max_iterations,
        )


class BenchSpec(BaseModel):
    instances: List[InstanceSpec]
    timing: bool = True
    workers: int = Field(default=1, ge=1)


def parse_dims(text: str) -> Tuple[int, ...]:
    """``60x60x60`` or ``60,60,60``."""
    parts = [p for p in re.split(r"[x,\s]+", text.strip()) if p]
    if not parts:
        raise ValueError(f"empty dims {text!r}")
    return tuple(int(p) for p in parts)


def _parse_seeds(text: str) -> List[int]:
    seeds = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if "-" in part[1:]:
            low, high = part.split("-", 1)
            seeds.extend(range(int(low), int(high) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def _floats(text: str) -> List[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def ratio_cores(middle: int, ratios: List[float]) -> List[Tuple[str, Tuple[int, ...]]]:
    """Third-order cores with ``J1/J2 = J2/J3 = r``."""
    return [
        (f"ratio={r:g}", (max(1, round(middle * r)), middle, max(1, round(middle / r))))
        for r in ratios
    ]


def fraction_cores(
    dims: Tuple[int, ...], fractions: List[float]
) -> List[Tuple[str, Tuple[int, ...]]]:
    """Cores whose side is a fixed fraction of each tensor side."""
    return [
        (f"fraction={f:g}", tuple(max(1, round(d * f)) for d in dims)) for f in fractions
    ]


def _build_instance(name: str, keys: Dict[str, Tuple[str, int]]) -> InstanceSpec:
    def value(key: str) -> str:
        return keys[key][0]

    def line(key: str) -> int:
        return keys.get(key, ("", 0))[1]

    for required in ("dims", "density", "seeds"):
        if required not in keys:
            raise BenchSpecError(f"instance [{name}] has no {required}")
    current = "dims"
    try:
        dims = parse_dims(value("dims"))
        fields: Dict[str, Any] = {"name": name, "dims": dims}
        current = "density"
        fields["density"] = float(value("density"))
        current = "seeds"
        fields["seeds"] = _parse_seeds(value("seeds"))
        if "group" in keys:
            fields["group"] = value("group").strip()
        if "algorithms" in keys:
            current = "algorithms"
            algorithms = [a.strip().lower() for a in value("algorithms").split(",") if a.strip()]
            unknown = [a for a in algorithms if a not in ALGORITHMS]
            if unknown:
                raise ValueError(f"unknown algorithms {unknown}")
            fields["algorithms"] = algorithms
        cores: List[Tuple[str, Tuple[int, ...]]] = []
        if "cores" in keys:
            current = "cores"
            for text in value("cores").split(";"):
                if text.strip():
                    core = parse_dims(text)
                    cores.append(("x".join(map(str, core)), core))
        if "ratios" in keys:
            current = "ratios"
            if "middle" not in keys:
                raise ValueError("ratios need a middle core dim")
            cores.extend(ratio_cores(int(value("middle")), _floats(value("ratios"))))
        if "core_fractions" in keys:
            current = "core_fractions"
            cores.extend(fraction_cores(dims, _floats(value("core_fractions"))))
        if not cores:
            raise BenchSpecError(f"instance [{name}] defines no cores", line("dims"))
        fields["cores"] = cores
        for key, cast in (
            ("max_iterations", int),
            ("fit_threshold", float),
            ("core_growth_threshold", float),
            ("sort_buffer", int),
            ("slab_size", int),
        ):
            if key in keys:
                current = key
                fields[key] = cast(value(key))
        current = "dims"
        return InstanceSpec(**fields)
    except ValidationError as e:
        error = e.errors()[0]
        key = str(error["loc"][0]) if error["loc"] else current
        raise BenchSpecError(f"instance [{name}] {key}: {error['msg']}", line(key))
    except ValueError as e:
        raise BenchSpecError(f"instance [{name}] {current}: {e}", line(current))


def parse_bench_spec(path) -> BenchSpec:
    """Parse a spec file.

    Raises:
        BenchSpecError: On unknown syntax or invalid values, with the line number
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise BenchSpecError(f"cannot read {path}: {e}")

    defaults: Dict[str, Tuple[str, int]] = {}
    sections: List[Tuple[str, Dict[str, Tuple[str, int]]]] = []
    current = defaults
    known = {
        "group", "dims", "density", "seeds", "algorithms", "cores", "ratios", "middle",
        "core_fractions", "max_iterations", "fit_threshold", "core_growth_threshold",
        "sort_buffer", "slab_size", "timing", "workers",
    }
    for number, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        match = _SECTION.match(text)
        if match:
            name = match.group(1)
            if name == "defaults":
                current = defaults
            else:
                if any(existing == name for existing, _ in sections):
                    raise BenchSpecError(f"duplicate instance [{name}]", number)
                current = {}
                sections.append((name, current))
            continue
        if "=" not in text:
            raise BenchSpecError(f"expected key = value, found {text!r}", number)
        key, value = (part.strip() for part in text.split("=", 1))
        key = key.lower()
        if key not in known:
            raise BenchSpecError(f"unknown key {key!r}", number)
        if key in ("timing", "workers") and current is not defaults:
            raise BenchSpecError(f"{key} is a global key", number)
        current[key] = (value, number)

    if not sections:
        raise BenchSpecError(f"{path} defines no instances")
    instances = []
    for name, keys in sections:
        merged = {k: v for k, v in defaults.items() if k not in ("timing", "workers")}
        merged.update(keys)
        instances.append(_build_instance(name, merged))
    try:
        timing = _bool(defaults["timing"][0]) if "timing" in defaults else True
        workers = int(defaults["workers"][0]) if "workers" in defaults else 1
        return BenchSpec(instances=instances, timing=timing, workers=workers)
    except (ValueError, ValidationError) as e:
        raise BenchSpecError(f"invalid global setting: {e}")


def _run_cell(
    instance: InstanceSpec, seed: int, work_dir: str, timing: bool
) -> List[Dict[str, Any]]:
    """Generate one input and run every (core, algorithm) pair on it."""
    work = Path(work_dir)
    input_path = work / "inputs" / f"{instance.name}_seed{seed}.txt"
    coo = gen_random_tensor(instance.dims, instance.density, seed, input_path)
    cfg = instance.convergence()
    rows = []
    for label, core in instance.cores:
        for algorithm in instance.algorithms:
            name = f"{instance.name}_seed{seed}_{'x'.join(map(str, core))}.{algorithm}.tkrd"
            out = work / "models" / name
            metrics = run(
                algorithm,
                input_path,
                instance.dims,
                core,
                cfg,
                seed=seed,
                out_path=out,
                sort_buffer_bytes=instance.sort_buffer,
                slab_size=instance.slab_size,
                work_dir=work / "stores",
                coo=coo,
            )
            row = {
                "schema": CSV_SCHEMA_VERSION,
                "instance": instance.name,
                "group": instance.group,
                "variant": label,
                "algorithm": algorithm,
                "dims": "x".join(map(str, metrics.dims)),
                "core_dims": "x".join(map(str, metrics.core_dims)),
                "density": repr(metrics.density),
                "nnz": metrics.nnz,
                "seed": seed,
                "fit": repr(metrics.fit),
                "iterations": metrics.iterations,
                "terminated_by": metrics.terminated_by,
                "wall_seconds": repr(metrics.wall_seconds) if timing else "0",
                "store_build_seconds": repr(metrics.store_build_seconds) if timing else "0",
                "peak_bytes": metrics.peak_bytes,
                "sort_buffer_bytes": metrics.sort_buffer_bytes,
                "input_bytes": metrics.input_bytes,
                "output_bytes": metrics.output_bytes,
            }
            rows.append(row)
    return rows


def bench_suite(spec_path, out_csv, work_dir=None) -> List[Dict[str, Any]]:
    """Run every (instance, seed) cell of a spec and write one CSV row per run.

    Args:
        spec_path: Benchmark spec file
        out_csv: Report destination
        work_dir: Scratch root for inputs, stores and models
            (default ``<WORK_DIR>/bench``)

    Returns:
        The rows written, in report order
    """
    spec = parse_bench_spec(spec_path)
    work_dir = str(Path(settings.WORK_DIR) / "bench" if work_dir is None else work_dir)
    cells = [(instance, seed) for instance in spec.instances for seed in instance.seeds]
    logger.info(f"Running {len(cells)} benchmark cells with {spec.workers} worker(s)")

    rows: List[Dict[str, Any]] = []
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [
                pool.submit(_run_cell, instance, seed, work_dir, spec.timing)
                for instance, seed in cells
            ]
            for future in futures:
                rows.extend(future.result())
    else:
        for instance, seed in cells:
            rows.extend(_run_cell(instance, seed, work_dir, spec.timing))

    write_rows(rows, out_csv, CSV_FIELDS)
    logger.info(f"Wrote {len(rows)} rows to {out_csv}")
    return rows


def write_rows(rows: List[Dict[str, Any]], path, fieldnames: List[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_rows(path) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def aggregate(csv_path, out_path=None) -> List[Dict[str, Any]]:
    """Means over seeds per (instance, variant, algorithm), with fit relative to HO-SVD.

    ``relative_fit`` is ``100 * (fit / fit_hosvd - 1)`` on the seed means; it is
    empty when the report has no hosvd rows for that instance and variant.
    """
    groups: Dict[Tuple[str, ...], List[Dict[str, str]]] = defaultdict(list)
    for row in read_rows(csv_path):
        key = tuple(row[field] for field in AGGREGATE_FIELDS[:6])
        groups[key].append(row)

    means = {}
    for key, rows in groups.items():
        means[key] = {
            "seeds": len(rows),
            "mean_fit": float(np.mean([float(r["fit"]) for r in rows])),
            "mean_iterations": float(np.mean([float(r["iterations"]) for r in rows])),
            "mean_wall_seconds": float(np.mean([float(r["wall_seconds"]) for r in rows])),
            "mean_peak_bytes": float(np.mean([float(r["peak_bytes"]) for r in rows])),
        }

    table = []
    for key, stats in means.items():
        instance, group, variant, algorithm, dims, core_dims = key
        baseline = means.get((instance, group, variant, "hosvd", dims, core_dims))
        rel = ""
        if baseline is not None and baseline["mean_fit"] != 0.0:
            rel = relative_fit(stats["mean_fit"], baseline["mean_fit"])
        table.append(
            {
                "instance": instance,
                "group": group,
                "variant": variant,
                "algorithm": algorithm,
                "dims": dims,
                "core_dims": core_dims,
                "relative_fit": rel,
                **stats,
            }
        )
    if out_path is not None:
        write_rows(table, out_path, AGGREGATE_FIELDS)
    return table
