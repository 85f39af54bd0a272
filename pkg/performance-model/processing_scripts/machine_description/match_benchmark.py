import logging
from dataclasses import dataclass
from typing import List, Optional

import pandas as pd

from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.model_errors import NoMeasurement

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandwidthMeasurement:
    level_name: str
    kernel_name: str
    threads: int
    bandwidth_bytes_per_s: float


def rank_kernels(machine: MachineDescription, candidates: List[str], read_streams: int, write_streams: int) -> List[str]:
    """
    Order benchmark kernels by closeness of their stream signature to a query.

    The signature counts write-allocate reads, distance is |Δreads| + |Δwrites|.
    Ties go to the kernel with fewer streams, then to the alphabetically first name.
    Preferring more streams on a tie would pick copy or daxpy for a two-read, no-write
    query; a pure read stream pair is expected to map to load, which only the
    fewer-streams order yields.
    """
    def key(name):
        kernel = machine.benchmark_kernels[name]
        distance = abs(kernel.signature_reads - read_streams) + abs(kernel.signature_writes - write_streams)
        return distance, kernel.total_streams, name

    return sorted(candidates, key=key)


def _level_measurements(machine: MachineDescription, level: str) -> pd.DataFrame:
    table = machine.measurements
    return table[table["level"] == level]


def match_benchmark(
    machine: MachineDescription, level: str, read_streams: int, write_streams: int, threads: int = 1
) -> BandwidthMeasurement:
    """
    Select the benchmark measurement whose stream signature best resembles the query.

    Args:
        machine (MachineDescription): Machine with benchmark kernels and measurements.
        level (str): Memory level the data is streamed from.
        read_streams (int): Cache lines read per unit of work, write-allocates included.
        write_streams (int): Cache lines written back per unit of work.
        threads (int): Thread count of the measurement.

    Returns:
        BandwidthMeasurement: The chosen kernel's measurement.

    Raises:
        NoMeasurement: If no kernel has a measurement at this level and thread count.
    """
    table = _level_measurements(machine, level)
    table = table[table["threads"] == threads]
    if table.empty:
        measured = measured_thread_counts(machine, level)
        raise NoMeasurement(f"No bandwidth measurement for level '{level}' with {threads} threads (measured: {measured})")

    kernel = rank_kernels(machine, sorted(set(table["kernel"])), read_streams, write_streams)[0]
    row = table[table["kernel"] == kernel].iloc[0]
    return BandwidthMeasurement(level, kernel, int(row["threads"]), float(row["bandwidth"]))


def saturated_measurement(
    machine: MachineDescription, level: str, read_streams: int, write_streams: int
) -> BandwidthMeasurement:
    """
    Select the best matching kernel at a level and return its highest bandwidth over all thread counts.
    """
    table = _level_measurements(machine, level)
    if table.empty:
        raise NoMeasurement(f"No bandwidth measurement for level '{level}'")

    kernel = rank_kernels(machine, sorted(set(table["kernel"])), read_streams, write_streams)[0]
    rows = table[table["kernel"] == kernel]
    best = rows.loc[rows["bandwidth"].idxmax()]
    return BandwidthMeasurement(level, kernel, int(best["threads"]), float(best["bandwidth"]))


def measured_thread_counts(machine: MachineDescription, level: str, kernel: Optional[str] = None) -> List[int]:
    table = _level_measurements(machine, level)
    if kernel is not None:
        table = table[table["kernel"] == kernel]
    return sorted(int(count) for count in set(table["threads"]))
