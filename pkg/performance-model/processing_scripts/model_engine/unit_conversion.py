from enum import Enum

from processing_scripts.kernel_frontend.parse_kernel import KernelIR
from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.model_errors import UsageError, ZeroCycles


class Unit(Enum):
    """Enum for report units."""
    CY_PER_CL = "cy/CL"
    IT_PER_S = "It/s"
    FLOP_PER_S = "FLOP/s"


def parse_unit(name: str) -> Unit:
    for unit in Unit:
        if unit.value.lower() == name.lower():
            return unit
    raise UsageError(f"Unknown unit '{name}'; choose one of {', '.join(unit.value for unit in Unit)}")


def convert_units(cy_per_cl: float, ir: KernelIR, machine: MachineDescription, unit: Unit) -> float:
    """
    Convert cycles per cache line of work into the requested unit.

    Raises:
        ZeroCycles: If a zero cycle count is converted to a rate.
    """
    if unit is Unit.CY_PER_CL:
        return cy_per_cl
    if cy_per_cl <= 0:
        raise ZeroCycles(f"Cannot express {cy_per_cl} cy/CL as {unit.value}")
    iterations_per_second = ir.iterations_per_cacheline(machine.cacheline_bytes) * machine.clock_hz / cy_per_cl
    if unit is Unit.IT_PER_S:
        return iterations_per_second
    return iterations_per_second * ir.flops["total"]


def to_cycles(value: float, ir: KernelIR, machine: MachineDescription, unit: Unit) -> float:
    """Inverse of convert_units."""
    if unit is Unit.CY_PER_CL:
        return value
    if unit is Unit.FLOP_PER_S:
        if ir.flops["total"] == 0:
            raise ZeroCycles("A kernel without flops has no FLOP/s rate to convert back")
        value = value / ir.flops["total"]
    if value <= 0:
        raise ZeroCycles(f"Cannot express a rate of {value} as cycles")
    return ir.iterations_per_cacheline(machine.cacheline_bytes) * machine.clock_hz / value


def format_value(value: float, unit: Unit) -> str:
    if unit is Unit.CY_PER_CL:
        return f"{value:.1f} {unit.value}"
    for prefix, scale in (("G", 1e9), ("M", 1e6), ("k", 1e3)):
        if abs(value) >= scale:
            return f"{value / scale:.2f} {prefix}{unit.value}"
    return f"{value:.2f} {unit.value}"
