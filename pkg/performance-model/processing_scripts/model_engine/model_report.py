from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from processing_scripts.cache_predict.layer_conditions import LayerConditionReport
from processing_scripts.cache_predict.predict_traffic import TrafficProfile
from processing_scripts.incore_model.port_timings import InCoreTiming
from processing_scripts.kernel_frontend.parse_kernel import KernelIR
from processing_scripts.machine_description.load_machine import MachineDescription
from processing_scripts.model_engine.ecm_model import EcmContributions, EcmPrediction
from processing_scripts.model_engine.roofline_model import RooflineReport
from processing_scripts.model_engine.unit_conversion import Unit, convert_units

REPORT_SCHEMA = "kernel-performance-report"
REPORT_VERSION = 1


class ModelMode(Enum):
    """Enum for the analysis modes."""
    ECM = "ECM"
    ECM_DATA = "ECMData"
    ECM_CORE = "ECMCore"
    ROOFLINE = "Roofline"
    ROOFLINE_PORTS = "RooflinePorts"
    COMPARE = "Compare"
    SWEEP = "Sweep"

    @property
    def default_unit(self) -> Unit:
        if self in (ModelMode.ROOFLINE, ModelMode.ROOFLINE_PORTS):
            return Unit.FLOP_PER_S
        return Unit.CY_PER_CL

    @property
    def needs_ports(self) -> bool:
        return self in (ModelMode.ECM, ModelMode.ECM_CORE, ModelMode.ROOFLINE_PORTS)


@dataclass
class ModelReport:
    mode: ModelMode
    ir: KernelIR
    machine: MachineDescription
    unit: Unit
    cores: int = 1
    incore: Optional[InCoreTiming] = None
    traffic: Optional[TrafficProfile] = None
    layer_conditions: Optional[LayerConditionReport] = None
    ecm_contributions: Optional[EcmContributions] = None
    ecm: Optional[EcmPrediction] = None
    roofline: Optional[RooflineReport] = None
    loop_carried: List[List[str]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def prediction_cy_per_cl(self) -> float:
        """The single headline number of the mode, in cy/CL."""
        if self.roofline is not None:
            return self.roofline.prediction
        if self.mode is ModelMode.ECM_DATA:
            return sum(self.ecm_contributions.transfers.values())
        if self.mode is ModelMode.ECM_CORE:
            return self.incore.t_core_cy_per_cl
        return self.ecm.memory

    def converted(self, cy_per_cl: float) -> Optional[float]:
        if self.unit is Unit.CY_PER_CL:
            return cy_per_cl
        if cy_per_cl <= 0:
            return None
        return convert_units(cy_per_cl, self.ir, self.machine, self.unit)

    def to_document(self) -> Dict[str, Any]:
        """Versioned plain-data report; the text report is rendered from this document."""
        document: Dict[str, Any] = {
            "schema": REPORT_SCHEMA,
            "version": REPORT_VERSION,
            "mode": self.mode.value,
            "unit": self.unit.value,
            "cores": self.cores,
            "kernel": {
                "name": self.ir.name,
                "constants": dict(sorted(self.ir.constants.items())),
                "flops per iteration": dict(self.ir.flops),
                "loop-carried scalars": [list(cycle) for cycle in self.loop_carried],
            },
            "machine": {
                "arch": self.machine.arch,
                "clock GHz": self.machine.clock_hz / 1e9,
                "cacheline bytes": self.machine.cacheline_bytes,
            },
        }

        if self.incore is not None:
            document["in-core"] = {
                "mode": self.incore.mode.value,
                "T_OL": self.incore.t_ol_cy_per_cl,
                "T_nOL": self.incore.t_nol_cy_per_cl,
            }

        if self.traffic is not None:
            levels = []
            for level in self.traffic.levels:
                entry = {
                    "level": level.level,
                    "load cachelines": level.load_cachelines,
                    "store cachelines": level.store_cachelines,
                    "bytes": level.total_bytes,
                    "reuse distance": level.reuse_window_iterations,
                }
                if self.layer_conditions is not None:
                    entry["layer condition"] = self.layer_conditions.tags.get(level.level)
                levels.append(entry)
            document["traffic"] = {"source": self.traffic.source, "levels": levels}

        if self.ecm_contributions is not None:
            contributions = {"T_OL": self.ecm_contributions.t_ol, "T_nOL": self.ecm_contributions.t_nol}
            contributions.update(self.ecm_contributions.transfers)
            document["ecm"] = {
                "contributions": contributions,
                "notation": (
                    self.ecm_contributions.data_notation if self.mode is ModelMode.ECM_DATA
                    else self.ecm_contributions.notation
                ),
                "memory bandwidth kernel": self.ecm_contributions.details[-1].kernel if self.ecm_contributions.details else None,
            }
            if self.ecm is not None:
                document["ecm"].update({
                    "prediction": dict(self.ecm.levels),
                    "prediction notation": self.ecm.notation,
                    "saturation cores": self.ecm.saturation_cores,
                    "saturation ratio": self.ecm.saturation_ratio,
                    "scaling": [
                        {"cores": count, "cy/CL": cycles, self.unit.value: self.converted(cycles)}
                        for count, cycles in self.ecm.scaling
                    ],
                })

        if self.roofline is not None:
            document["roofline"] = {
                "threads": self.roofline.threads,
                "rows": [
                    {
                        "level": row.level_name,
                        "cy/CL": row.cycles,
                        "arithmetic intensity": row.arithmetic_intensity,
                        "bandwidth GB/s": None if row.bandwidth_bytes_per_s is None else row.bandwidth_bytes_per_s / 1e9,
                        "kernel": row.kernel,
                    }
                    for row in self.roofline.rows
                ],
                "dominant": self.roofline.dominant,
                "prediction": self.roofline.prediction,
                "saturation cores": self.roofline.saturation_cores,
            }

        headline = self.prediction_cy_per_cl
        document["result"] = {"cy/CL": headline, "value": self.converted(headline), "unit": self.unit.value}
        document["notes"] = list(self.notes)
        return document
