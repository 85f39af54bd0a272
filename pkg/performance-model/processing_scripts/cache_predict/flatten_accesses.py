import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from processing_scripts.kernel_frontend.parse_kernel import AccessKind, IndexKind, KernelIR

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlatAccess:
    """
    One array reference as a row-major element offset from the current iteration's center.

    `stream_key` identifies references that can reuse each other's cache lines: same array,
    same fixed subscripts and same loop-to-dimension mapping. The element touched at loop
    index values idx is fixed_elements + linear_offset_elements + sum(loop_strides * idx).
    """
    array_name: str
    linear_offset_elements: int
    is_write: bool
    index_offsets: Tuple[Optional[int], ...]
    stream_key: Tuple
    dim_loops: Tuple[Optional[str], ...]
    inner_stride_elements: int
    fixed_elements: int = 0
    loop_strides: Tuple[int, ...] = ()


def row_major_strides(dims: Tuple[int, ...]) -> List[int]:
    strides = [1] * len(dims)
    for position in range(len(dims) - 2, -1, -1):
        strides[position] = strides[position + 1] * dims[position + 1]
    return strides


def array_base_lines(ir: KernelIR, cacheline_bytes: int) -> Dict[str, int]:
    """First cache line of every array; arrays follow each other on cache-line boundaries."""
    bases, next_line = {}, 0
    for name, array in ir.arrays.items():
        bases[name] = next_line
        size = int(np.prod(array.dims)) * array.element_size_bytes
        next_line += -(-size // cacheline_bytes)
    return bases


def flatten(ir: KernelIR) -> List[FlatAccess]:
    """
    Flatten every array reference of the IR into a linear element offset.

    Args:
        ir (KernelIR): Parsed kernel.

    Returns:
        list: One FlatAccess per array reference, in reference order.
    """
    inner_loop = ir.loops[-1]
    loop_positions = {loop.index_name: position for position, loop in enumerate(ir.loops)}
    flat = []
    warned = set()
    for access in ir.accesses:
        array = ir.arrays[access.array_name]
        strides = row_major_strides(array.dims)
        offset, fixed_elements = 0, 0
        loop_strides = [0] * len(ir.loops)
        index_offsets, dim_loops, fixed = [], [], []
        for term, stride in zip(access.indices, strides):
            if term.kind is IndexKind.DIRECT:
                index_offsets.append(None)
                dim_loops.append(None)
                fixed.append(term.offset)
                fixed_elements += term.offset * stride
                continue
            offset += term.offset * stride
            index_offsets.append(term.offset)
            dim_loops.append(term.loop_index)
            fixed.append(None)
            loop_strides[loop_positions[term.loop_index]] += stride

        inner_stride = loop_strides[-1] * inner_loop.step
        if inner_stride > 1 and access.array_name not in warned:
            warned.add(access.array_name)
            logger.warning(
                f"Array '{access.array_name}' is accessed with stride {inner_stride} in the inner loop "
                f"'{inner_loop.index_name}'; every iteration touches a new cache line"
            )
        flat.append(FlatAccess(
            array_name=access.array_name,
            linear_offset_elements=offset,
            is_write=access.kind is AccessKind.DESTINATION,
            index_offsets=tuple(index_offsets),
            stream_key=(access.array_name, tuple(fixed), tuple(dim_loops)),
            dim_loops=tuple(dim_loops),
            inner_stride_elements=inner_stride,
            fixed_elements=fixed_elements,
            loop_strides=tuple(loop_strides),
        ))
    return flat


def offsets_by_array(flat: List[FlatAccess]) -> Dict[str, List[int]]:
    """Sorted unique offsets per array, writes merged into reads."""
    grouped: Dict[str, set] = {}
    for access in flat:
        grouped.setdefault(access.array_name, set()).add(access.linear_offset_elements)
    return {name: sorted(offsets) for name, offsets in grouped.items()}
