import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from processing_scripts.cache_predict.predict_traffic import TrafficProfile
from processing_scripts.incore_model.port_timings import InCoreTiming
from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.machine_description.match_benchmark import saturated_measurement
from processing_scripts.model_errors import MissingBandwidth, NoMeasurement

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

# integer ratios computed in floating point must not round up to the next core
SATURATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DataTransfer:
    """Time to move one unit of work's cache lines across one boundary of the hierarchy."""
    boundary: str
    cachelines: float
    bytes: float
    cycles: float
    penalty_cycles: float = 0.0
    kernel: Optional[str] = None
    bandwidth_bytes_per_s: Optional[float] = None


@dataclass
class EcmContributions:
    t_ol: float
    t_nol: float
    transfers: Dict[str, float]
    first_level: str = "L1"
    details: List[DataTransfer] = field(default_factory=list, repr=False)

    @property
    def notation(self) -> str:
        parts = " | ".join(f"{cycles:.1f}" for cycles in self.transfers.values())
        return f"{{ {self.t_ol:.1f} ‖ {self.t_nol:.1f} | {parts} }} cy/CL"

    @property
    def data_notation(self) -> str:
        return "{ " + " | ".join(f"{cycles:.1f}" for cycles in self.transfers.values()) + " } cy/CL"


@dataclass
class EcmPrediction:
    levels: Dict[str, float]
    saturation_cores: Optional[int]
    saturation_ratio: Optional[float]
    scaling: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def memory(self) -> float:
        return list(self.levels.values())[-1]

    @property
    def notation(self) -> str:
        return "{ " + " ⌉ ".join(f"{cycles:.1f}" for cycles in self.levels.values()) + " } cy/CL"


def describe_transfers(traffic: TrafficProfile, machine: MachineDescription, use_penalties: bool = False) -> List[DataTransfer]:
    """
    Cycles per unit of work for every boundary between adjacent memory levels.

    Levels with 'cycles per cacheline transfer' move lines at that fixed cost; the last cache
    uses the saturated bandwidth of the best matching benchmark of the level below it.

    Raises:
        MissingBandwidth: If a boundary has neither transfer cycles nor any bandwidth.
    """
    names = machine.level_names
    transfers = []
    for level_traffic in traffic.levels:
        level = machine.level(level_traffic.level)
        below = machine.level(names[names.index(level.level_name) + 1])
        boundary = f"{level.level_name}-{below.level_name}"
        lines = level_traffic.total_cachelines
        kernel, bandwidth = None, None

        if level.cycles_per_cacheline_transfer is not None:
            cycles = lines * level.cycles_per_cacheline_transfer
        else:
            try:
                measurement = saturated_measurement(
                    machine, below.level_name,
                    round(level_traffic.load_cachelines), round(level_traffic.store_cachelines),
                )
                kernel, bandwidth = measurement.kernel_name, measurement.bandwidth_bytes_per_s
            except NoMeasurement:
                bandwidth = below.bandwidth_bytes_per_s
            if bandwidth is None:
                raise MissingBandwidth(f"No transfer cycles or bandwidth to move data across {boundary}")
            cycles = level_traffic.total_bytes * machine.clock_hz / bandwidth

        penalty = level_traffic.load_cachelines * below.latency_penalty_cycles if use_penalties else 0.0
        transfers.append(DataTransfer(boundary, lines, level_traffic.total_bytes, cycles + penalty, penalty, kernel, bandwidth))
    return transfers


def transfer_cycles(traffic: TrafficProfile, machine: MachineDescription, use_penalties: bool = False) -> Dict[str, float]:
    """Boundary name (e.g. 'L3-MEM') to cycles per cache line of work."""
    return {transfer.boundary: transfer.cycles for transfer in describe_transfers(traffic, machine, use_penalties)}


def ecm_contributions(timing: InCoreTiming, traffic: TrafficProfile, machine: MachineDescription, use_penalties: bool = False) -> EcmContributions:
    details = describe_transfers(traffic, machine, use_penalties)
    return EcmContributions(
        t_ol=timing.t_ol_cy_per_cl,
        t_nol=timing.t_nol_cy_per_cl,
        transfers={transfer.boundary: transfer.cycles for transfer in details},
        first_level=machine.level_names[0],
        details=details,
    )


def compose_ecm(contributions: EcmContributions, cores: Optional[int] = None) -> EcmPrediction:
    """
    Combine ECM contributions into per-residence-level predictions.

    Non-overlapping time and data transfers add up, overlapping time runs in parallel:
    T_ECM = max(T_OL, T_nOL + sum of transfers down to the residence level).

    Args:
        contributions (EcmContributions): In-core and transfer times in cy/CL.
        cores (int): Largest core count of the scaling curve; defaults to the saturation point.

    Returns:
        EcmPrediction: Predictions, saturation point and multicore scaling.
    """
    levels = {contributions.first_level: max(contributions.t_ol, contributions.t_nol)}
    accumulated = contributions.t_nol
    for boundary, cycles in contributions.transfers.items():
        accumulated += cycles
        levels[boundary.split("-")[-1]] = max(contributions.t_ol, accumulated)

    memory = list(levels.values())[-1]
    last_transfer = list(contributions.transfers.values())[-1] if contributions.transfers else 0.0
    if last_transfer > 0:
        ratio = memory / last_transfer
        saturation = max(1, math.ceil(ratio - SATURATION_TOLERANCE))
    else:
        logger.info("No traffic reaches main memory; the kernel does not saturate")
        ratio, saturation = None, None

    limit = cores or saturation or 1
    scaling = [(count, max(memory / count, last_transfer)) for count in range(1, limit + 1)]
    return EcmPrediction(levels, saturation, ratio, scaling)
