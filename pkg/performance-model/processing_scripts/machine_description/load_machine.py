import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import yaml

from processing_scripts.model_errors import ConsistencyError, SchemaError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


class UnitPrefix(Enum):
    """Enum for decimal unit prefixes."""
    k = 1e3
    M = 1e6
    G = 1e9
    T = 1e12


class BaseUnit(Enum):
    """Enum for the base units used in machine files."""
    HERTZ = "Hz"
    BYTES = "B"
    BYTES_PER_SECOND = "B/s"


class MachineKey(Enum):
    """Enum for the top-level keys of a machine description file."""
    CLOCK = "clock"
    CORES_PER_SOCKET = "cores per socket"
    SOCKETS = "sockets"
    THREADS_PER_CORE = "threads per core"
    CACHELINE_SIZE = "cacheline size"
    FLOPS_PER_CYCLE = "FLOPs per cycle"
    OVERLAPPING_PORTS = "overlapping ports"
    NON_OVERLAPPING_PORTS = "non-overlapping ports"
    MEMORY_HIERARCHY = "memory hierarchy"
    BENCHMARKS = "benchmarks"
    MICRO_ARCHITECTURE = "micro-architecture"


MEMORY_LEVEL_NAME = "MEM"
MEASUREMENT_COLUMNS = ["level", "kernel", "threads", "bandwidth"]
STREAM_KEYS = ("read streams", "read+write streams", "write streams")

QUANTITY_PATTERN = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([kMGT]?)(Hz|B/s|B)\s*$")


@dataclass(frozen=True)
class MemoryLevelSpec:
    level_name: str
    cores_per_group: int
    threads_per_group: int
    groups: int
    size_per_group_bytes: Optional[float]
    cycles_per_cacheline_transfer: Optional[float]
    bandwidth_bytes_per_s: Optional[float] = None
    latency_penalty_cycles: float = 0.0


@dataclass(frozen=True)
class BenchmarkKernelSpec:
    name: str
    flops_per_iteration: int
    read_streams: int
    readwrite_streams: int
    write_streams: int
    stream_bytes: Dict[str, float] = field(default_factory=dict)

    @property
    def signature_reads(self) -> int:
        # write-allocate: written lines are read first
        return self.read_streams + self.readwrite_streams + self.write_streams

    @property
    def signature_writes(self) -> int:
        return self.write_streams + self.readwrite_streams

    @property
    def total_streams(self) -> int:
        return self.read_streams + self.readwrite_streams + self.write_streams


@dataclass
class MachineDescription:
    clock_hz: float
    cores_per_socket: int
    sockets: int
    threads_per_core: int
    cacheline_bytes: int
    flops_per_cycle: Dict[str, Dict[str, float]]
    overlapping_ports: List[str]
    non_overlapping_ports: List[str]
    memory_hierarchy: List[MemoryLevelSpec]
    benchmark_kernels: Dict[str, BenchmarkKernelSpec]
    measurements: pd.DataFrame = field(repr=False, compare=False)
    micro_architecture: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    source_path: Optional[str] = field(default=None, compare=False)

    def level(self, level_name: str) -> MemoryLevelSpec:
        for level in self.memory_hierarchy:
            if level.level_name == level_name:
                return level
        raise KeyError(level_name)

    @property
    def cache_levels(self) -> List[MemoryLevelSpec]:
        return [level for level in self.memory_hierarchy if level.level_name != MEMORY_LEVEL_NAME]

    @property
    def level_names(self) -> List[str]:
        return [level.level_name for level in self.memory_hierarchy]

    @property
    def memory_group_cores(self) -> int:
        return self.memory_hierarchy[-1].cores_per_group

    def effective_cache_size(self, level_name: str, cores: int = 1) -> float:
        """Bytes of a cache level available to one core when `cores` cores share its group."""
        level = self.level(level_name)
        sharing = max(1, min(cores, level.cores_per_group))
        return level.size_per_group_bytes / sharing

    @property
    def arch(self) -> str:
        if self.micro_architecture:
            return self.micro_architecture
        return Path(self.source_path).stem if self.source_path else "unknown"


def parse_quantity(value: Any, unit: BaseUnit, key: str) -> float:
    """
    Parse a unit-suffixed value such as '2.7 GHz', '32.00 kB' or '17.40 GB/s' into base units.
    """
    if isinstance(value, bool):
        raise SchemaError(f"'{key}' must be a quantity in {unit.value}, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise SchemaError(f"'{key}' must be a quantity in {unit.value}, got {value!r}")
    match = QUANTITY_PATTERN.match(value)
    if match is None or match.group(3) != unit.value:
        raise SchemaError(f"'{key}' must be a quantity in {unit.value}, got '{value}'")
    number, prefix = float(match.group(1)), match.group(2)
    return number * (UnitPrefix[prefix].value if prefix else 1.0)


def format_quantity(value: float, unit: BaseUnit) -> str:
    return f"{value!r} {unit.value}"


def require(mapping: Dict[str, Any], key: str, types, context: str) -> Any:
    if key not in mapping:
        raise SchemaError(f"Missing key '{key}' in {context}")
    value = mapping[key]
    if not isinstance(value, types) or isinstance(value, bool) and bool not in _as_tuple(types):
        raise SchemaError(f"Key '{key}' in {context} has wrong type {type(value).__name__}")
    return value


def _as_tuple(types) -> tuple:
    return types if isinstance(types, tuple) else (types,)


def parse_memory_level(entry: Dict[str, Any], position: int) -> MemoryLevelSpec:
    context = f"memory hierarchy entry {position}"
    if not isinstance(entry, dict):
        raise SchemaError(f"{context} must be a mapping")
    name = require(entry, "level", str, context)
    context = f"memory level '{name}'"
    size = entry.get("size per group")
    cycles = entry.get("cycles per cacheline transfer")
    bandwidth = entry.get("bandwidth")
    penalty = entry.get("penalty cycles per cacheline", 0.0)
    if cycles is not None and (not isinstance(cycles, (int, float)) or isinstance(cycles, bool)):
        raise SchemaError(f"'cycles per cacheline transfer' of {context} must be a number or null")
    if not isinstance(penalty, (int, float)) or isinstance(penalty, bool):
        raise SchemaError(f"'penalty cycles per cacheline' of {context} must be a number")
    return MemoryLevelSpec(
        level_name=name,
        cores_per_group=require(entry, "cores per group", int, context),
        threads_per_group=require(entry, "threads per group", int, context),
        groups=require(entry, "groups", int, context),
        size_per_group_bytes=None if size is None else parse_quantity(size, BaseUnit.BYTES, f"{context} size per group"),
        cycles_per_cacheline_transfer=None if cycles is None else float(cycles),
        bandwidth_bytes_per_s=None if bandwidth is None else parse_quantity(bandwidth, BaseUnit.BYTES_PER_SECOND, f"{context} bandwidth"),
        latency_penalty_cycles=float(penalty),
    )


def parse_benchmark_kernel(name: str, entry: Dict[str, Any]) -> BenchmarkKernelSpec:
    context = f"benchmark kernel '{name}'"
    if not isinstance(entry, dict):
        raise SchemaError(f"{context} must be a mapping")
    counts, stream_bytes = {}, {}
    for key in STREAM_KEYS:
        stream = require(entry, key, dict, context)
        count = require(stream, "streams", int, f"{context} {key}")
        if count < 0:
            raise ConsistencyError(f"{context} has a negative number of {key}")
        counts[key] = count
        stream_bytes[key] = parse_quantity(stream.get("bytes", 0), BaseUnit.BYTES, f"{context} {key} bytes")
    return BenchmarkKernelSpec(
        name=name,
        flops_per_iteration=require(entry, "FLOPs per iteration", int, context),
        read_streams=counts["read streams"],
        readwrite_streams=counts["read+write streams"],
        write_streams=counts["write streams"],
        stream_bytes=stream_bytes,
    )


def parse_measurements(records: List[Dict[str, Any]]) -> pd.DataFrame:
    """
    Explode measurement records {level, kernel, threads: [...], bandwidth: [...]} into one row per thread count.
    """
    rows = []
    for position, record in enumerate(records or []):
        context = f"measurement record {position}"
        if not isinstance(record, dict):
            raise SchemaError(f"{context} must be a mapping")
        level = require(record, "level", str, context)
        kernel = require(record, "kernel", str, context)
        threads = require(record, "threads", list, context)
        bandwidths = require(record, "bandwidth", list, context)
        if len(threads) != len(bandwidths):
            raise ConsistencyError(f"{context} ({level}, {kernel}) lists {len(threads)} thread counts but {len(bandwidths)} bandwidths")
        for count, bandwidth in zip(threads, bandwidths):
            if not isinstance(count, int) or count < 1:
                raise SchemaError(f"{context} has an invalid thread count {count!r}")
            rows.append({
                "level": level,
                "kernel": kernel,
                "threads": count,
                "bandwidth": parse_quantity(bandwidth, BaseUnit.BYTES_PER_SECOND, f"{context} bandwidth"),
            })
    return pd.DataFrame(rows, columns=MEASUREMENT_COLUMNS)


def check_consistency(machine: MachineDescription) -> None:
    """
    Validate relations between machine values.

    Raises:
        ConsistencyError: If the description contradicts itself.
    """
    overlap = set(machine.overlapping_ports) & set(machine.non_overlapping_ports)
    if overlap:
        raise ConsistencyError(f"Ports listed as overlapping and non-overlapping: {sorted(overlap)}")

    cacheline = machine.cacheline_bytes
    if cacheline <= 0 or cacheline & (cacheline - 1):
        raise ConsistencyError(f"Cache line size {cacheline} B is not a power of two")

    names = machine.level_names
    if len(set(names)) != len(names):
        raise ConsistencyError(f"Duplicate memory level names: {names}")
    if names[-1] != MEMORY_LEVEL_NAME or len(names) < 2:
        raise ConsistencyError(f"The memory hierarchy must end with '{MEMORY_LEVEL_NAME}' below at least one cache")

    previous = 0.0
    caches = machine.cache_levels
    for position, level in enumerate(caches):
        if level.size_per_group_bytes is None or level.size_per_group_bytes <= previous:
            raise ConsistencyError(f"Cache sizes must be set and strictly increasing, '{level.level_name}' is not")
        previous = level.size_per_group_bytes
        # only the last cache may rely on the bandwidth of the level below it
        if position < len(caches) - 1 and level.cycles_per_cacheline_transfer is None:
            raise ConsistencyError(f"'{level.level_name}' needs 'cycles per cacheline transfer'")

    known_levels, known_kernels = set(names), set(machine.benchmark_kernels)
    unknown_levels = set(machine.measurements["level"]) - known_levels
    unknown_kernels = set(machine.measurements["kernel"]) - known_kernels
    if unknown_levels or unknown_kernels:
        raise ConsistencyError(
            f"Measurements reference unknown levels {sorted(unknown_levels)} or kernels {sorted(unknown_kernels)}"
        )


def machine_from_dict(data: Dict[str, Any], source_path: Optional[str] = None) -> MachineDescription:
    if not isinstance(data, dict):
        raise SchemaError("A machine description must be a mapping")
    context = "machine description"

    flops = require(data, MachineKey.FLOPS_PER_CYCLE.value, dict, context)
    for precision, figures in flops.items():
        if not isinstance(figures, dict) or "total" not in figures:
            raise SchemaError(f"'FLOPs per cycle' entry '{precision}' needs a 'total'")

    hierarchy = require(data, MachineKey.MEMORY_HIERARCHY.value, list, context)
    benchmarks = require(data, MachineKey.BENCHMARKS.value, dict, context)
    kernels = require(benchmarks, "kernels", dict, "benchmarks")
    records = benchmarks.get("measurements") or []
    if not isinstance(records, list):
        raise SchemaError("'benchmarks: measurements' must be a list of records")

    overlapping = [str(port) for port in require(data, MachineKey.OVERLAPPING_PORTS.value, list, context)]
    non_overlapping = [str(port) for port in require(data, MachineKey.NON_OVERLAPPING_PORTS.value, list, context)]

    known = {key.value for key in MachineKey}
    metadata = {key: value for key, value in data.items() if key not in known}
    if metadata:
        logger.info(f"Keeping {len(metadata)} descriptive machine keys as metadata: {', '.join(sorted(metadata))}")

    machine = MachineDescription(
        clock_hz=parse_quantity(require(data, MachineKey.CLOCK.value, (str, int, float), context), BaseUnit.HERTZ, "clock"),
        cores_per_socket=require(data, MachineKey.CORES_PER_SOCKET.value, int, context),
        sockets=require(data, MachineKey.SOCKETS.value, int, context),
        threads_per_core=require(data, MachineKey.THREADS_PER_CORE.value, int, context),
        cacheline_bytes=int(parse_quantity(require(data, MachineKey.CACHELINE_SIZE.value, (str, int), context), BaseUnit.BYTES, "cacheline size")),
        flops_per_cycle={precision: dict(figures) for precision, figures in flops.items()},
        overlapping_ports=overlapping,
        non_overlapping_ports=non_overlapping,
        memory_hierarchy=[parse_memory_level(entry, position) for position, entry in enumerate(hierarchy)],
        benchmark_kernels={name: parse_benchmark_kernel(name, entry) for name, entry in kernels.items()},
        measurements=parse_measurements(records),
        micro_architecture=data.get(MachineKey.MICRO_ARCHITECTURE.value),
        metadata=metadata,
        source_path=source_path,
    )
    check_consistency(machine)
    return machine


def load_machine(file_path: str) -> MachineDescription:
    """
    Load and validate a machine description file.

    Args:
        file_path (str): Path to the YAML machine file.

    Returns:
        MachineDescription: Validated description with measurements as a DataFrame.

    Raises:
        SchemaError: If the file is unreadable, misses keys or has wrong types or units.
        ConsistencyError: If values contradict each other.
    """
    try:
        with open(file_path, "r") as file:
            data = yaml.safe_load(file)
    except (OSError, yaml.YAMLError) as e:
        logger.error(f"Error reading machine file {file_path}: {str(e)}")
        raise SchemaError(f"Failed to read machine file: {file_path}") from e
    machine = machine_from_dict(data, source_path=str(file_path))
    logger.info(
        f"Loaded machine '{machine.arch}': {machine.clock_hz / 1e9:.2f} GHz, "
        f"levels {' > '.join(machine.level_names)}, {len(machine.measurements)} bandwidth measurements"
    )
    return machine


def machine_to_dict(machine: MachineDescription) -> Dict[str, Any]:
    """Serialize a machine description back to the file layout, quantities in base units."""
    data = dict(machine.metadata)
    data.update({
        MachineKey.CLOCK.value: format_quantity(machine.clock_hz, BaseUnit.HERTZ),
        MachineKey.CORES_PER_SOCKET.value: machine.cores_per_socket,
        MachineKey.SOCKETS.value: machine.sockets,
        MachineKey.THREADS_PER_CORE.value: machine.threads_per_core,
        MachineKey.CACHELINE_SIZE.value: format_quantity(float(machine.cacheline_bytes), BaseUnit.BYTES),
        MachineKey.FLOPS_PER_CYCLE.value: {precision: dict(figures) for precision, figures in machine.flops_per_cycle.items()},
        MachineKey.OVERLAPPING_PORTS.value: list(machine.overlapping_ports),
        MachineKey.NON_OVERLAPPING_PORTS.value: list(machine.non_overlapping_ports),
    })
    if machine.micro_architecture is not None:
        data[MachineKey.MICRO_ARCHITECTURE.value] = machine.micro_architecture

    data[MachineKey.MEMORY_HIERARCHY.value] = [
        {
            "level": level.level_name,
            "cores per group": level.cores_per_group,
            "threads per group": level.threads_per_group,
            "groups": level.groups,
            "size per group": None if level.size_per_group_bytes is None else format_quantity(level.size_per_group_bytes, BaseUnit.BYTES),
            "cycles per cacheline transfer": level.cycles_per_cacheline_transfer,
            "bandwidth": None if level.bandwidth_bytes_per_s is None else format_quantity(level.bandwidth_bytes_per_s, BaseUnit.BYTES_PER_SECOND),
            "penalty cycles per cacheline": level.latency_penalty_cycles,
        }
        for level in machine.memory_hierarchy
    ]

    kernels = {}
    for name, kernel in machine.benchmark_kernels.items():
        counts = {"read streams": kernel.read_streams, "read+write streams": kernel.readwrite_streams, "write streams": kernel.write_streams}
        kernels[name] = {"FLOPs per iteration": kernel.flops_per_iteration}
        for key in STREAM_KEYS:
            kernels[name][key] = {"bytes": format_quantity(kernel.stream_bytes.get(key, 0.0), BaseUnit.BYTES), "streams": counts[key]}

    records = []
    for (level, kernel), group in machine.measurements.groupby(["level", "kernel"], sort=False):
        group = group.sort_values("threads")
        records.append({
            "level": level,
            "kernel": kernel,
            "threads": [int(count) for count in group["threads"]],
            "bandwidth": [format_quantity(float(value), BaseUnit.BYTES_PER_SECOND) for value in group["bandwidth"]],
        })
    data[MachineKey.BENCHMARKS.value] = {"kernels": kernels, "measurements": records}
    return data


def dump_machine(machine: MachineDescription, file_path: str) -> None:
    with open(file_path, "w") as file:
        yaml.safe_dump(machine_to_dict(machine), file, sort_keys=False, allow_unicode=True)
    print(f"Output file: {file_path} has been created successfully!")
