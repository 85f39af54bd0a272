import logging
from collections import OrderedDict
from typing import Dict, List, Optional

import numpy as np

from processing_scripts.cache_predict.flatten_accesses import array_base_lines, row_major_strides
from processing_scripts.cache_predict.predict_traffic import LevelTraffic, TrafficProfile, cache_capacities
from processing_scripts.kernel_frontend.parse_kernel import AccessKind, IndexKind, KernelIR
from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.model_errors import TooLarge

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

TRACE_CHUNK_ITERATIONS = 65536


def iteration_indices(ir: KernelIR, first: int, last: int) -> Dict[str, np.ndarray]:
    """Loop index values of iterations [first, last) in execution order."""
    trips = [loop.trip_count for loop in ir.loops]
    flat_iterations = np.arange(first, last, dtype=np.int64)
    positions = np.unravel_index(flat_iterations, trips)
    return {
        loop.index_name: loop.start + position * loop.step
        for loop, position in zip(ir.loops, positions)
    }


def access_lines(ir: KernelIR, cacheline_bytes: int, first: int, last: int) -> np.ndarray:
    """
    Cache line of every access of iterations [first, last), shape (iterations, references).
    """
    bases = array_base_lines(ir, cacheline_bytes)
    indices = iteration_indices(ir, first, last)
    columns = []
    for access in ir.accesses:
        array = ir.arrays[access.array_name]
        element = np.zeros(last - first, dtype=np.int64)
        for term, stride in zip(access.indices, row_major_strides(array.dims)):
            if term.kind is IndexKind.DIRECT:
                element += term.offset * stride
            else:
                element += (indices[term.loop_index] + term.offset) * stride
        columns.append(bases[access.array_name] + element * array.element_size_bytes // cacheline_bytes)
    return np.stack(columns, axis=1)


class InclusiveLRU:
    """
    Inclusive fully-associative LRU hierarchy with write-allocate and write-back.

    Every level sees every access, so level k holds the C_k most recently used lines. The
    hierarchy is kept as one LRU order cut into exclusive parts of C_1, C_2 - C_1, ... lines.
    Each line carries a dirty bit per level.
    """

    def __init__(self, capacities_lines: List[int]):
        self.limits = [capacities_lines[0]] + [
            max(upper - lower, 0) for lower, upper in zip(capacities_lines, capacities_lines[1:])
        ]
        self.parts = [OrderedDict() for _ in self.limits]
        self.loads = [0] * len(self.limits)
        self.stores = [0] * len(self.limits)
        self.counting = False

    def access(self, line: int, is_write: bool) -> None:
        parts = self.parts
        first = parts[0]
        if line in first:
            first.move_to_end(line)
            if is_write:
                first[line] |= 1
            return

        mask = 0
        hit_level = len(parts)
        for level in range(1, len(parts)):
            if line in parts[level]:
                mask = parts[level].pop(line)
                hit_level = level
                break
        if self.counting:
            for level in range(hit_level):
                self.loads[level] += 1

        first[line] = mask | 1 if is_write else mask
        for level in range(hit_level):
            if len(parts[level]) <= self.limits[level]:
                break
            evicted, evicted_mask = parts[level].popitem(last=False)
            if evicted_mask & (1 << level):
                if self.counting:
                    self.stores[level] += 1
                evicted_mask = (evicted_mask & ~(1 << level)) | (1 << (level + 1))
            if level + 1 < len(parts):
                parts[level + 1][evicted] = evicted_mask


def lru_oracle(
    ir: KernelIR, machine: MachineDescription, cache_sizes: Optional[Dict[str, float]] = None,
    max_accesses: int = 10**7, interior_fraction: float = 0.1, cores: int = 1,
) -> TrafficProfile:
    """
    Measure per-level traffic by simulating the full access trace through an LRU hierarchy.

    Args:
        ir (KernelIR): Parsed kernel, usually with small constants.
        machine (MachineDescription): Cache hierarchy.
        cache_sizes (dict): Optional per-level capacity overrides in bytes.
        max_accesses (int): Largest trace that will be simulated.
        interior_fraction (float): Share of iterations at either end left out of the counts.

    Returns:
        TrafficProfile: Loads and evicts per cache level per unit of work.

    Raises:
        TooLarge: If the trace holds more than `max_accesses` accesses.
    """
    cacheline = machine.cacheline_bytes
    total = ir.total_iterations
    references = len(ir.accesses)
    if total * references > max_accesses:
        raise TooLarge(f"Trace of {total * references} accesses exceeds the limit of {max_accesses}")

    capacities = cache_capacities(machine, cores, cache_sizes)
    level_names = list(capacities)
    hierarchy = InclusiveLRU([int(capacities[name] // cacheline) for name in level_names])
    writes = [access.kind is AccessKind.DESTINATION for access in ir.accesses]

    warm_up = int(total * interior_fraction)
    cool_down = total - int(total * interior_fraction)
    written_lines = set()
    destination_columns = [position for position, is_write in enumerate(writes) if is_write]

    for first in range(0, total, TRACE_CHUNK_ITERATIONS):
        last = min(first + TRACE_CHUNK_ITERATIONS, total)
        lines = access_lines(ir, cacheline, first, last)
        for iteration, row in enumerate(lines.tolist(), start=first):
            if iteration == warm_up:
                hierarchy.counting = True
            elif iteration == cool_down:
                hierarchy.counting = False
            if hierarchy.counting:
                for position in destination_columns:
                    written_lines.add(row[position])
            for line, is_write in zip(row, writes):
                hierarchy.access(line, is_write)

    units = unit_count(ir, cacheline, cool_down - warm_up, written_lines)
    levels = [
        LevelTraffic(name, hierarchy.loads[position] / units, hierarchy.stores[position] / units, cacheline)
        for position, name in enumerate(level_names)
    ]
    logger.info(f"Simulated {total * references} accesses of '{ir.name}' over {units:.1f} units of work")
    return TrafficProfile(levels, ir.iterations_per_cacheline(cacheline), cacheline, source="lru")


def unit_count(ir: KernelIR, cacheline_bytes: int, iterations: int, written_lines: set) -> float:
    """
    Units of work in the counted interior: result cache lines written there, per written stream.

    Kernels without contiguous array results fall back to iterations per cache line.
    """
    destinations = {(access.array_name, access.indices) for access in ir.destinations()}
    inner = ir.loops[-1].index_name
    contiguous = destinations and all(
        indices[-1].kind is IndexKind.RELATIVE and indices[-1].loop_index == inner
        and ir.loops[-1].step == 1
        for _, indices in destinations
    )
    if contiguous and written_lines:
        return len(written_lines) / len(destinations)
    return iterations / ir.iterations_per_cacheline(cacheline_bytes)
