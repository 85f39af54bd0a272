import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

from fuzzywuzzy import process

from processing_scripts.cache_predict.flatten_accesses import flatten
from processing_scripts.cache_predict.layer_conditions import layer_conditions
from processing_scripts.cache_predict.predict_traffic import ReuseAnalysis, predict_traffic
from processing_scripts.incore_model.port_timings import (
    InCoreTiming,
    TimingMode,
    load_port_table,
    timings_from_peak,
    timings_from_ports,
)
from processing_scripts.kernel_frontend.parse_kernel import KernelSource, parse_kernel, read_kernel_file
from processing_scripts.kernel_frontend.scalar_dependencies import loop_carried_scalars
from processing_scripts.machine_description.load_machine import MachineDescription, load_machine
from processing_scripts.model_engine.ecm_model import compose_ecm, ecm_contributions
from processing_scripts.model_engine.model_report import ModelMode, ModelReport
from processing_scripts.model_engine.roofline_model import compose_roofline
from processing_scripts.model_engine.unit_conversion import parse_unit
from processing_scripts.model_errors import UsageError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnalysisRequest:
    kernel_path: str
    machine_path: str
    mode: str = ModelMode.ECM.value
    constants: Dict[str, int] = field(default_factory=dict)
    unit: Optional[str] = None
    cores: int = 1
    port_table_path: Optional[str] = None
    measured_path: Optional[str] = None
    use_latency_penalties: bool = False
    strict: bool = False

    def with_constants(self, **constants) -> "AnalysisRequest":
        merged = dict(self.constants)
        merged.update(constants)
        return replace(self, constants=merged)


def parse_mode(name: str) -> ModelMode:
    """
    Resolve a mode name; unknown names are reported with the closest valid one.
    """
    for mode in ModelMode:
        if mode.value.lower() == name.lower():
            return mode
    choices = [mode.value for mode in ModelMode]
    suggestion = process.extractOne(name, choices)
    hint = f"; did you mean '{suggestion[0]}'?" if suggestion else ""
    raise UsageError(f"Unknown mode '{name}'{hint}")


def incore_timing(mode: ModelMode, request: AnalysisRequest, machine: MachineDescription, ir) -> Optional[InCoreTiming]:
    if mode is ModelMode.ROOFLINE:
        return timings_from_peak(ir, machine)
    if mode.needs_ports:
        if request.port_table_path is None:
            raise UsageError(f"Mode {mode.value} needs a port-cycle table (--ports)")
        return timings_from_ports(load_port_table(request.port_table_path), machine, ir)
    return None


def analyze(request: AnalysisRequest, mode: ModelMode, machine: MachineDescription, source: KernelSource) -> ModelReport:
    """
    Evaluate one model for an already loaded machine and kernel text.
    """
    if request.cores < 1:
        raise UsageError(f"Core count must be positive, got {request.cores}")
    unit = parse_unit(request.unit) if request.unit else mode.default_unit

    ir = parse_kernel(source)
    report = ModelReport(mode, ir, machine, unit, request.cores)
    report.loop_carried = loop_carried_scalars(ir)
    for cycle in report.loop_carried:
        report.notes.append(f"loop-carried dependency through {', '.join(cycle)}")

    report.incore = incore_timing(mode, request, machine, ir)
    if mode is ModelMode.ECM_CORE:
        return report

    flat = flatten(ir)
    reuse = ReuseAnalysis(flat, machine, ir, request.cores)
    report.traffic = predict_traffic(flat, machine, ir, request.cores, strict=request.strict, analysis=reuse)
    report.notes.extend(report.traffic.notes)
    report.layer_conditions = layer_conditions(flat, machine, ir, request.cores, analysis=reuse)

    if mode in (ModelMode.ROOFLINE, ModelMode.ROOFLINE_PORTS):
        report.roofline = compose_roofline(report.incore, report.traffic, machine, ir, request.cores)
        return report

    timing = report.incore or InCoreTiming(0.0, 0.0, TimingMode.PORTS)
    report.ecm_contributions = ecm_contributions(timing, report.traffic, machine, request.use_latency_penalties)
    report.ecm = compose_ecm(report.ecm_contributions, cores=machine.memory_group_cores)
    return report


def run(request: AnalysisRequest, machine: Optional[MachineDescription] = None) -> ModelReport:
    """
    Run one analysis: load the inputs, evaluate the selected model and collect the report.

    Args:
        request (AnalysisRequest): Kernel, machine, mode, constants and options.
        machine (MachineDescription): Already loaded machine, reused by sweeps.

    Returns:
        ModelReport: Report holding every intermediate result of the mode.
    """
    mode = parse_mode(request.mode)
    if mode in (ModelMode.COMPARE, ModelMode.SWEEP):
        raise UsageError(f"Mode {mode.value} is not a single-point analysis")
    if machine is None:
        machine = load_machine(request.machine_path)
    source = read_kernel_file(request.kernel_path, request.constants)
    return analyze(request, mode, machine, source)
