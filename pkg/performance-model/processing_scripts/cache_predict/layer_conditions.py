from dataclasses import dataclass
from typing import Dict, List, Optional

from processing_scripts.cache_predict.flatten_accesses import FlatAccess
from processing_scripts.cache_predict.predict_traffic import ReuseAnalysis
from processing_scripts.kernel_frontend.parse_kernel import KernelIR
from processing_scripts.machine_description.load_machine import MachineDescription

NO_CONDITION = "none"


@dataclass
class LayerConditionReport:
    tags: Dict[str, str]

    @property
    def label(self) -> str:
        return " ".join(f"{level}:{tag}" for level, tag in self.tags.items())


def classify(pairs: List[tuple], depth: int) -> str:
    """
    Tag for (loop position, hit) pairs: kD when every reuse carried by the innermost k loops hits.
    """
    for position in range(depth):
        if all(hit for pair_position, hit in pairs if pair_position >= position):
            return f"{depth - position}D"
    return NO_CONDITION


def layer_conditions(
    flat: List[FlatAccess], machine: MachineDescription, ir: KernelIR, cores: int = 1,
    cache_sizes: Optional[Dict[str, float]] = None, analysis: Optional[ReuseAnalysis] = None,
) -> LayerConditionReport:
    """
    Report, per cache level, the outermost loop dimension whose reuse is satisfied.

    A tag kD means every reuse between iterations of the innermost k loops hits in that level;
    'none' means even reuse along the innermost loop misses. A level holding every line of the
    kernel is tagged one dimension above the loop depth.
    """
    if analysis is None:
        analysis = ReuseAnalysis(flat, machine, ir, cores, cache_sizes)
    depth = len(ir.loops)
    tags = {}
    for level in analysis.level_names:
        pairs = [(ref.position, hit) for ref, hit in analysis.majority_hits(level)]
        tags[level] = f"{depth + 1}D" if analysis.resident(level) else classify(pairs, depth)
    return LayerConditionReport(tags)
