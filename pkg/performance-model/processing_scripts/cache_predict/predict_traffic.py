import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from processing_scripts.cache_predict.flatten_accesses import FlatAccess, array_base_lines
from processing_scripts.kernel_frontend.parse_kernel import KernelIR
from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.model_errors import UnresolvableFootprint

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = 4
SAMPLE_ROWS = 3


@dataclass
class StreamRef:
    """
    One distinct reference of a stream and the reuse that can serve its cache lines.

    `distance` is the number of iterations since another reference (or the same reference
    one iteration of an outer loop earlier) last touched the lines this reference needs;
    None marks the leading reference of a stream without reuse. `position` is the loop
    carrying that reuse, 0 being the outermost.
    """
    offset: int
    displacement: float
    is_write: bool
    loop_offsets: Tuple[float, ...]
    distance: Optional[int] = None
    position: Optional[int] = None


@dataclass
class StreamGroup:
    """References to one array that can share cache lines, leading reference first."""
    key: tuple
    array_name: str
    refs: List[StreamRef]
    stride: int


@dataclass
class LevelTraffic:
    """Cache lines per unit of work moved between a cache level and the level below it."""
    level: str
    load_cachelines: float
    store_cachelines: float
    cacheline_bytes: int
    missed_offsets: Dict[str, List[int]] = field(default_factory=dict)
    reuse_window_iterations: Optional[int] = None

    @property
    def total_cachelines(self) -> float:
        return self.load_cachelines + self.store_cachelines

    @property
    def total_bytes(self) -> float:
        return self.total_cachelines * self.cacheline_bytes


@dataclass
class TrafficProfile:
    levels: List[LevelTraffic]
    iterations_per_unit: int
    cacheline_bytes: int
    register_reads: int = 0
    register_writes: int = 0
    source: str = "analytic"
    notes: List[str] = field(default_factory=list)

    def level(self, level_name: str) -> LevelTraffic:
        for level in self.levels:
            if level.level == level_name:
                return level
        raise KeyError(level_name)

    @property
    def memory_bytes(self) -> float:
        return self.levels[-1].total_bytes


def loop_weights(ir: KernelIR) -> List[int]:
    """Iterations between two consecutive index values of every loop."""
    weights, inner = [], 1
    for loop in reversed(ir.loops):
        weights.append(inner)
        inner *= loop.trip_count
    return weights[::-1]


def loop_offsets(access: FlatAccess, ir: KernelIR) -> Tuple[float, ...]:
    """Offset of a reference from the current iteration, counted in iterations of every loop."""
    positions = {loop.index_name: position for position, loop in enumerate(ir.loops)}
    offsets = [0.0] * len(ir.loops)
    for loop_name, offset in zip(access.dim_loops, access.index_offsets):
        if loop_name is not None:
            position = positions[loop_name]
            offsets[position] += offset / ir.loops[position].step
    return tuple(offsets)


def line_slack(stride: int, ir: KernelIR, cacheline_bytes: int) -> int:
    """Iterations a line of a stream stays in use after the iteration that first touched it."""
    per_line = max(cacheline_bytes // ir.element_size_bytes, 1)
    if 0 < stride < per_line:
        return per_line // stride - 1
    return 0


def group_streams(flat: List[FlatAccess], ir: KernelIR, cacheline_bytes: int) -> List[StreamGroup]:
    """
    Group flat references into streams and link every reference to the reuse that serves it.

    References of a stream are ordered by how many iterations ahead of the current one they
    run; each reuses the lines of the next reference ahead of it. A stream not indexed by
    an outer loop also reuses its own lines one iteration of that loop later. Write offsets
    belong to the read set (write-allocate).
    """
    weights = loop_weights(ir)
    groups: Dict[tuple, StreamGroup] = {}
    refs: Dict[tuple, Dict[int, StreamRef]] = {}
    self_loops: Dict[tuple, Optional[int]] = {}
    for access in flat:
        group = groups.get(access.stream_key)
        if group is None:
            group = StreamGroup(access.stream_key, access.array_name, [], access.inner_stride_elements)
            groups[access.stream_key] = group
            refs[access.stream_key] = {}
            unused = [position for position, stride in enumerate(access.loop_strides[:-1]) if stride == 0]
            self_loops[access.stream_key] = max(unused) if unused else None
        by_offset = refs[access.stream_key]
        ref = by_offset.get(access.linear_offset_elements)
        if ref is None:
            offsets = loop_offsets(access, ir)
            displacement = sum(offset * weight for offset, weight in zip(offsets, weights))
            by_offset[access.linear_offset_elements] = StreamRef(
                access.linear_offset_elements, displacement, access.is_write, offsets,
            )
        elif access.is_write:
            ref.is_write = True

    for key, group in groups.items():
        group.refs = sorted(refs[key].values(), key=lambda ref: ref.displacement, reverse=True)
        slack = line_slack(group.stride, ir, cacheline_bytes)
        self_loop = self_loops[key]
        for ahead, ref in zip([None] + group.refs[:-1], group.refs):
            gap, position = None, None
            if ahead is not None:
                gap = ahead.displacement - ref.displacement
                position = next(
                    (loop for loop, (a, b) in enumerate(zip(ahead.loop_offsets, ref.loop_offsets)) if a != b),
                    len(ir.loops) - 1,
                )
            if self_loop is not None and group.stride != 0 and (gap is None or weights[self_loop] < gap):
                gap, position = weights[self_loop], self_loop
            if gap is not None:
                ref.distance = max(0, math.ceil(gap - slack))
                ref.position = position
    return list(groups.values())


def _union_length(lows: np.ndarray, highs: np.ndarray) -> int:
    order = np.argsort(lows, kind="stable")
    lows, highs = lows[order], highs[order]
    running_high = np.maximum.accumulate(highs)
    starts = np.concatenate(([0], np.nonzero(lows[1:] > running_high[:-1])[0] + 1))
    ends = np.concatenate((starts[1:] - 1, [len(lows) - 1]))
    return int(np.sum(running_high[ends] - lows[starts] + 1))


class IterationFootprint:
    """
    Distinct cache lines touched by runs of consecutive iterations of the loop nest.

    Iterations are numbered in execution order; arrays follow each other on cache-line
    boundaries. Each run is cut into rows of the innermost loop: a reference advancing at
    most one line per iteration covers an interval of lines per row, wider strides touch
    one line per iteration.
    """

    def __init__(self, flat: List[FlatAccess], ir: KernelIR, cacheline_bytes: int):
        self.cacheline = cacheline_bytes
        self.trips = [loop.trip_count for loop in ir.loops]
        self.total = ir.total_iterations
        bases = array_base_lines(ir, cacheline_bytes)
        distinct: Dict[tuple, FlatAccess] = {}
        for access in flat:
            distinct.setdefault(
                (access.array_name, access.fixed_elements + access.linear_offset_elements, access.loop_strides), access,
            )
        loop_names = {loop.index_name for loop in ir.loops}
        starts = np.array([loop.start for loop in ir.loops], dtype=np.int64)
        steps = np.array([loop.step for loop in ir.loops], dtype=np.int64)
        sizes = np.array([ir.arrays[name].element_size_bytes for name, _, _ in distinct], dtype=np.int64)
        coefficients = np.array([strides for _, _, strides in distinct], dtype=np.int64).reshape(len(distinct), len(self.trips))
        constants = np.array([constant for _, constant, _ in distinct], dtype=np.int64) + coefficients @ starts
        origins = np.array([bases[name] for name, _, _ in distinct], dtype=np.int64) * cacheline_bytes

        self.origin_bytes = origins + constants * sizes
        self.position_bytes = coefficients * steps[None, :] * sizes[:, None]
        self.inner_bytes = self.position_bytes[:, -1]
        self.dense = np.abs(self.inner_bytes) <= cacheline_bytes
        injective = [
            len([loop for loop in access.dim_loops if loop is not None]) == len(loop_names)
            and {loop for loop in access.dim_loops if loop is not None} == loop_names
            for access in distinct.values()
        ]
        self.bound_bytes = max(
            [min(abs(int(step)), cacheline_bytes) for step, keep in zip(self.inner_bytes, injective) if keep],
            default=0,
        )
        self.cache: Dict[Tuple[int, int], int] = {}

    def lines(self, last: int, length: int, limit: Optional[int] = None) -> int:
        """
        Distinct lines touched by the `length` iterations ending with iteration `last`.

        When `limit` is given, runs whose lower bound already exceeds it may be answered
        with that bound instead of the exact count.
        """
        first = max(last - length + 1, 0)
        count = last - first + 1
        if limit is not None and count * self.bound_bytes // self.cacheline > limit:
            return count * self.bound_bytes // self.cacheline
        key = (first, last)
        if key not in self.cache:
            self.cache[key] = self._count(first, last)
        return self.cache[key]

    def _count(self, first: int, last: int) -> int:
        inner = self.trips[-1]
        first_row, first_column = divmod(first, inner)
        last_row, last_column = divmod(last, inner)
        rows = np.arange(first_row, last_row + 1, dtype=np.int64)
        lows = np.where(rows == first_row, first_column, 0)
        highs = np.where(rows == last_row, last_column, inner - 1)
        if len(self.trips) > 1:
            outer = np.stack(np.unravel_index(rows, self.trips[:-1]), axis=1)
            row_bytes = self.origin_bytes[None, :] + outer @ self.position_bytes[:, :-1].T
        else:
            row_bytes = self.origin_bytes[None, :]
        low_bytes = row_bytes + lows[:, None] * self.inner_bytes[None, :]
        high_bytes = row_bytes + highs[:, None] * self.inner_bytes[None, :]
        begin = np.minimum(low_bytes, high_bytes)[:, self.dense].ravel() // self.cacheline
        end = np.maximum(low_bytes, high_bytes)[:, self.dense].ravel() // self.cacheline
        starts, ends = [begin], [end]
        sparse = np.nonzero(~self.dense)[0]
        if len(sparse):
            counts = highs - lows + 1
            steps_in_row = np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
        for column in sparse:
            lines = (np.repeat(low_bytes[:, column], counts) + steps_in_row * self.inner_bytes[column]) // self.cacheline
            starts.append(lines)
            ends.append(lines)
        return _union_length(np.concatenate(starts), np.concatenate(ends))


def cache_capacities(machine: MachineDescription, cores: int = 1, cache_sizes: Optional[Dict[str, float]] = None) -> Dict[str, float]:
    """Effective bytes per cache level for one core, optionally overridden per level."""
    capacities = {}
    for level in machine.cache_levels:
        if cache_sizes and level.level_name in cache_sizes:
            capacities[level.level_name] = float(cache_sizes[level.level_name])
        else:
            capacities[level.level_name] = machine.effective_cache_size(level.level_name, cores)
    return capacities


def _spread(low: int, high: int, count: int) -> List[int]:
    high = max(high, low)
    return sorted({int(round(low + (high - low) * (sample + 0.5) / count)) for sample in range(count)})


def sample_iterations(ir: KernelIR, flat: List[FlatAccess], iterations_per_unit: int) -> List[int]:
    """
    Iterations standing for the steady state: spread over the interior of the innermost
    loop, in a few rows around the middle of the next outer loop and the middle of the rest.
    """
    trips = [loop.trip_count for loop in ir.loops]
    inner_offsets = [
        abs(offset) for access in flat
        for loop, offset in zip(access.dim_loops, access.index_offsets)
        if loop == ir.loops[-1].index_name
    ]
    margin = -(-max(inner_offsets, default=0) // ir.loops[-1].step) + 1
    columns = _spread(min(margin, trips[-1] - 1), trips[-1] - 1 - margin - iterations_per_unit, SAMPLE_COLUMNS)
    if len(trips) == 1:
        return [min(column, trips[-1] - 1) for column in columns]

    middle = [trip // 2 for trip in trips[:-1]]
    rows = []
    for position in _spread(trips[-2] // 4, (3 * trips[-2]) // 4, SAMPLE_ROWS):
        middle[-1] = min(position, trips[-2] - 1)
        rows.append(int(np.ravel_multi_index(middle, trips[:-1])))
    return [row * trips[-1] + min(column, trips[-1] - 1) for row in rows for column in columns]


def lines_per_unit(stride: int, ir: KernelIR, cacheline_bytes: int) -> float:
    iterations = ir.iterations_per_cacheline(cacheline_bytes)
    return min(abs(stride) * iterations * ir.element_size_bytes / cacheline_bytes, float(iterations))


class ReuseAnalysis:
    """
    Reuse of every reference checked against every cache level of one machine.

    A reference hits in a level when the distinct lines touched since its lines were last
    used fit into that level's capacity; the check runs at several iterations of the
    steady state and the results are kept per sample.
    """

    def __init__(
        self, flat: List[FlatAccess], machine: MachineDescription, ir: KernelIR, cores: int = 1,
        cache_sizes: Optional[Dict[str, float]] = None,
    ):
        self.ir = ir
        self.cacheline = machine.cacheline_bytes
        self.groups = group_streams(flat, ir, self.cacheline)
        self.footprint = IterationFootprint(flat, ir, self.cacheline)
        self.capacities = cache_capacities(machine, cores, cache_sizes)
        self.samples = sample_iterations(ir, flat, ir.iterations_per_cacheline(self.cacheline))
        self.capacity_lines = {name: int(capacity // self.cacheline) for name, capacity in self.capacities.items()}
        largest = max(self.capacity_lines.values())
        self.whole_lines = self.footprint.lines(self.footprint.total - 1, self.footprint.total, limit=largest)
        self.hits = {
            name: [np.array([[self._hits(ref, sample, lines) for sample in self.samples] for ref in group.refs], dtype=bool)
                   for group in self.groups]
            for name, lines in self.capacity_lines.items()
        }

    @property
    def level_names(self) -> List[str]:
        return list(self.capacities)

    @property
    def whole_bytes(self) -> int:
        return self.whole_lines * self.cacheline

    def resident(self, level_name: str) -> bool:
        """True if the level holds every line the kernel touches."""
        return self.whole_lines <= self.capacity_lines[level_name]

    def _hits(self, ref: StreamRef, sample: int, capacity_lines: int) -> bool:
        if ref.distance is None:
            return False
        return self.footprint.lines(sample, ref.distance + 1, limit=capacity_lines) <= capacity_lines

    def majority_hits(self, level_name: str) -> List[Tuple[StreamRef, bool]]:
        """Every linked reference with whether it hits in at least half of the samples."""
        return [
            (ref, bool(2 * hits.sum() >= hits.size))
            for group, group_hits in zip(self.groups, self.hits[level_name])
            for ref, hits in zip(group.refs, group_hits)
            if ref.distance is not None
        ]

    def level_traffic(self, level_name: str) -> LevelTraffic:
        """
        Average loads and evicts of one level over the samples.

        A missing reference starts a chain that every following hitting reference joins;
        each chain holding a write is evicted once. A level that holds the whole kernel
        never evicts during the pass.
        """
        loads, stores = 0.0, 0.0
        missed: Dict[str, List[int]] = {}
        for group, hits in zip(self.groups, self.hits[level_name]):
            if group.stride == 0:
                continue
            per_unit = lines_per_unit(group.stride, self.ir, self.cacheline)
            for sample in range(len(self.samples)):
                chain_missed, chain_write = False, False
                for ref, hit in zip(group.refs, hits[:, sample]):
                    if hit:
                        chain_write = chain_write or ref.is_write
                        continue
                    if chain_missed and chain_write:
                        stores += per_unit
                    chain_missed, chain_write = True, ref.is_write
                    loads += per_unit
                if chain_missed and chain_write:
                    stores += per_unit
            for ref, ref_hits in zip(group.refs, hits):
                if 2 * ref_hits.sum() <= ref_hits.size:
                    missed.setdefault(group.array_name, []).append(ref.offset)

        samples = len(self.samples)
        if self.resident(level_name):
            stores = 0.0
        for offsets in missed.values():
            offsets.sort()
        served = [ref.distance for ref, hit in self.majority_hits(level_name) if hit]
        return LevelTraffic(
            level_name, loads / samples, stores / samples, self.cacheline, missed, max(served, default=None),
        )


def predict_traffic(
    flat: List[FlatAccess], machine: MachineDescription, ir: KernelIR, cores: int = 1,
    cache_sizes: Optional[Dict[str, float]] = None, strict: bool = False,
    analysis: Optional[ReuseAnalysis] = None,
) -> TrafficProfile:
    """
    Predict per-level cache-line traffic per unit of work from the reuse distances of every reference.

    Args:
        flat (list): Flattened references of the kernel.
        machine (MachineDescription): Cache hierarchy.
        ir (KernelIR): Parsed kernel.
        cores (int): Cores sharing each cache group.
        cache_sizes (dict): Optional per-level capacity overrides in bytes.
        strict (bool): Raise instead of noting a loop nest too short to reach steady state.
        analysis (ReuseAnalysis): Reuse already checked for the same kernel and machine.

    Returns:
        TrafficProfile: Loads and evicts per cache level.

    Raises:
        UnresolvableFootprint: In strict mode, if the whole iteration space fits into the first cache.
    """
    if analysis is None:
        analysis = ReuseAnalysis(flat, machine, ir, cores, cache_sizes)
    cacheline = machine.cacheline_bytes

    notes = []
    first_level = analysis.level_names[0]
    if analysis.resident(first_level):
        message = (
            f"The whole iteration space of '{ir.name}' touches {analysis.whole_bytes} B and fits into {first_level}; "
            f"the steady-state prediction does not apply"
        )
        if strict:
            raise UnresolvableFootprint(message)
        logger.warning(message)
        notes.append(message)

    levels = [analysis.level_traffic(name) for name in analysis.level_names]
    register_reads = len({(a.stream_key, a.linear_offset_elements) for a in flat if not a.is_write})
    register_writes = len({(a.stream_key, a.linear_offset_elements) for a in flat if a.is_write})
    return TrafficProfile(levels, ir.iterations_per_cacheline(cacheline), cacheline, register_reads, register_writes, "analytic", notes)
