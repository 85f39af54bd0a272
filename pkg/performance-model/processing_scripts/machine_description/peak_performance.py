from enum import Enum
from typing import Dict

from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.model_errors import UnknownPrecision


class Precision(Enum):
    """Enum for floating-point precisions listed in machine files."""
    SP = "SP"
    DP = "DP"


def peak_cycles(flops: Dict[str, int], machine: MachineDescription, precision: str = Precision.DP.value) -> float:
    """
    Cycles per iteration at peak arithmetic throughput: total flops over peak flops per cycle.
    """
    if precision not in machine.flops_per_cycle:
        raise UnknownPrecision(
            f"Machine has no '{precision}' peak; known precisions: {', '.join(sorted(machine.flops_per_cycle))}"
        )
    peak = float(machine.flops_per_cycle[precision]["total"])
    return flops.get("total", 0) / peak
