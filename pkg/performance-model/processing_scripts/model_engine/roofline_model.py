import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from processing_scripts.cache_predict.predict_traffic import TrafficProfile
from processing_scripts.incore_model.port_timings import InCoreTiming, TimingMode
from processing_scripts.kernel_frontend.parse_kernel import KernelIR
from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.machine_description.match_benchmark import match_benchmark, saturated_measurement
from processing_scripts.model_engine.ecm_model import SATURATION_TOLERANCE

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

CORE_ROW = "CPU"
REGISTER_ROW = "REG"


@dataclass(frozen=True)
class RooflineBottleneck:
    level_name: str
    cycles: float
    arithmetic_intensity: Optional[float] = None
    bytes: float = 0.0
    bandwidth_bytes_per_s: Optional[float] = None
    kernel: Optional[str] = None


@dataclass
class RooflineReport:
    rows: List[RooflineBottleneck]
    prediction: float
    dominant: str
    threads: int = 1
    saturation_cores: Optional[int] = None
    notes: List[str] = field(default_factory=list)

    @property
    def dominant_row(self) -> RooflineBottleneck:
        return next(row for row in self.rows if row.level_name == self.dominant)


def _bandwidth_row(label: str, volume: float, level: str, reads: int, writes: int, flops_per_cl: float,
                   machine: MachineDescription, threads: int) -> RooflineBottleneck:
    if volume <= 0:
        return RooflineBottleneck(label, 0.0, None, 0.0)
    measurement = match_benchmark(machine, level, reads, writes, threads)
    cycles = volume * machine.clock_hz / measurement.bandwidth_bytes_per_s
    return RooflineBottleneck(
        label, cycles, flops_per_cl / volume, volume, measurement.bandwidth_bytes_per_s, measurement.kernel_name,
    )


def delivered_volume(traffic: TrafficProfile, ir: KernelIR, machine: MachineDescription, level: str) -> Tuple[float, int, int]:
    """
    Bytes per unit of work that reach the registers from `level` or beyond, with their stream signature.

    This is everything that misses in the level above; the first cache and the register file
    deliver the full register traffic of the loop body.
    """
    names = machine.level_names
    if level == REGISTER_ROW or level == names[0]:
        iterations = ir.iterations_per_cacheline(machine.cacheline_bytes)
        volume = (traffic.register_reads + traffic.register_writes) * ir.element_size_bytes * iterations
        return volume, traffic.register_reads, traffic.register_writes
    above = traffic.level(names[names.index(level) - 1])
    return above.total_bytes, round(above.load_cachelines), round(above.store_cachelines)


def compose_roofline(
    timing: InCoreTiming, traffic: TrafficProfile, machine: MachineDescription, ir: KernelIR, threads: int = 1,
) -> RooflineReport:
    """
    Build the Roofline bottleneck table: in-core time against the time of every data path.

    The row of the path from level k to the next level out carries the full volume level k hands on
    towards the registers, so it includes everything missing in the level above k. It is timed with the
    measured bandwidth of the best matching benchmark kernel one level out, at the requested thread count.
    Peak-based timings add the register to L1 path.

    Args:
        timing (InCoreTiming): Port-based or peak-based in-core time.
        traffic (TrafficProfile): Per-level cache-line traffic.
        machine (MachineDescription): Machine with benchmark measurements.
        ir (KernelIR): Parsed kernel.
        threads (int): Number of cores running the kernel.

    Returns:
        RooflineReport: Bottleneck rows, prediction and dominant bottleneck.

    Raises:
        NoMeasurement: If a level lacks measurements for the thread count.
    """
    iterations = ir.iterations_per_cacheline(machine.cacheline_bytes)
    flops_per_cl = ir.flops["total"] * iterations
    t_core = timing.t_ol_cy_per_cl if timing.mode is TimingMode.PEAK else timing.t_core_cy_per_cl
    rows = [RooflineBottleneck(CORE_ROW, t_core / threads)]

    names = machine.level_names
    paths = list(zip(names[:-1], names[1:]))
    if timing.mode is TimingMode.PEAK:
        paths.insert(0, (REGISTER_ROW, names[0]))

    for upper, lower in paths:
        volume, reads, writes = delivered_volume(traffic, ir, machine, upper)
        rows.append(_bandwidth_row(f"{upper}-{lower}", volume, lower, reads, writes, flops_per_cl, machine, threads))

    dominant_row = max(rows, key=lambda row: row.cycles)
    report = RooflineReport(rows, dominant_row.cycles, dominant_row.level_name, threads)

    memory_volume, reads, writes = delivered_volume(traffic, ir, machine, names[-2])
    if memory_volume > 0 and threads == 1:
        saturated = saturated_measurement(machine, names[-1], reads, writes)
        memory_time = memory_volume * machine.clock_hz / saturated.bandwidth_bytes_per_s
        report.saturation_cores = max(1, math.ceil(report.prediction / memory_time - SATURATION_TOLERANCE))
    logger.info(f"Roofline for '{ir.name}' on {threads} cores: {report.prediction:.1f} cy/CL, bound by {report.dominant}")
    return report
