import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict

import yaml
from fuzzywuzzy import process

from processing_scripts.kernel_frontend.parse_kernel import KernelIR
from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.machine_description.peak_performance import Precision, peak_cycles
from processing_scripts.model_errors import FormatError, PortTableSchemaError, UnknownPort, ZeroIterations

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


class TimingMode(Enum):
    """Enum for the origin of in-core timings."""
    PORTS = "ports"
    PEAK = "peak"


class PortTableKey(Enum):
    """Enum for the keys of a port-cycle table file."""
    SOURCE = "source"
    ITERATIONS_PER_BODY = "iterations per body"
    PORT_CYCLES = "port cycles"


@dataclass(frozen=True)
class PortCycleTable:
    port_cycles: Dict[str, float]
    iterations_per_body: int
    source_tag: str = ""


@dataclass(frozen=True)
class InCoreTiming:
    t_ol_cy_per_cl: float
    t_nol_cy_per_cl: float
    mode: TimingMode = TimingMode.PORTS
    port_cycles_per_cl: Dict[str, float] = field(default_factory=dict)

    @property
    def t_core_cy_per_cl(self) -> float:
        return max(self.t_ol_cy_per_cl, self.t_nol_cy_per_cl)


def load_port_table(file_path: str) -> PortCycleTable:
    """
    Read a port-cycle table transcribed from a throughput analysis of the compiled loop body.

    Raises:
        FormatError: If the file is not valid YAML.
        PortTableSchemaError: If required keys are missing or mistyped.
    """
    try:
        with open(file_path, "r") as file:
            data = yaml.safe_load(file)
    except OSError as e:
        logger.error(f"Error reading port table {file_path}: {str(e)}")
        raise PortTableSchemaError(f"Cannot read port table: {file_path}") from e
    except yaml.YAMLError as e:
        logger.error(f"Error parsing port table {file_path}: {str(e)}")
        raise FormatError(f"Port table is not valid YAML: {file_path}") from e

    if not isinstance(data, dict):
        raise PortTableSchemaError(f"Port table {file_path} must be a mapping")
    iterations = data.get(PortTableKey.ITERATIONS_PER_BODY.value)
    cycles = data.get(PortTableKey.PORT_CYCLES.value)
    if not isinstance(iterations, int) or isinstance(iterations, bool):
        raise PortTableSchemaError(f"Port table {file_path} needs an integer '{PortTableKey.ITERATIONS_PER_BODY.value}'")
    if not isinstance(cycles, dict) or not all(isinstance(value, (int, float)) for value in cycles.values()):
        raise PortTableSchemaError(f"Port table {file_path} needs a '{PortTableKey.PORT_CYCLES.value}' mapping of numbers")
    return PortCycleTable(
        port_cycles={str(port): float(value) for port, value in cycles.items()},
        iterations_per_body=iterations,
        source_tag=str(data.get(PortTableKey.SOURCE.value, "")),
    )


def timings_from_ports(table: PortCycleTable, machine: MachineDescription, ir: KernelIR) -> InCoreTiming:
    """
    Scale port cycles of one loop body to one cache line of work.

    T_nOL is the busiest non-overlapping (load data) port, T_OL the busiest overlapping port.

    Raises:
        UnknownPort: If the table names a port the machine does not list.
        ZeroIterations: If the loop body covers no iterations.
    """
    known = machine.overlapping_ports + machine.non_overlapping_ports
    for port in table.port_cycles:
        if port not in known:
            suggestion = process.extractOne(port, known)
            hint = f"; did you mean '{suggestion[0]}'?" if suggestion else ""
            raise UnknownPort(f"Port '{port}' is not a port of {machine.arch}{hint}")
    if table.iterations_per_body <= 0:
        raise ZeroIterations("Port table covers zero iterations per loop body")

    scale = ir.iterations_per_cacheline(machine.cacheline_bytes) / table.iterations_per_body
    scaled = {port: cycles * scale for port, cycles in table.port_cycles.items()}
    t_ol = max((scaled[port] for port in machine.overlapping_ports if port in scaled), default=0.0)
    t_nol = max((scaled[port] for port in machine.non_overlapping_ports if port in scaled), default=0.0)
    return InCoreTiming(t_ol, t_nol, TimingMode.PORTS, scaled)


def timings_from_peak(ir: KernelIR, machine: MachineDescription, precision: str = Precision.DP.value) -> InCoreTiming:
    """Optimistic in-core time: the kernel's flops per cache line of work at peak throughput."""
    per_iteration = peak_cycles(ir.flops, machine, precision)
    t_ol = per_iteration * ir.iterations_per_cacheline(machine.cacheline_bytes)
    return InCoreTiming(t_ol, 0.0, TimingMode.PEAK)
