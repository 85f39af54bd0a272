import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import dask
import numpy as np
import pandas as pd

from processing_scripts.cli_report.run_analysis import AnalysisRequest, analyze
from processing_scripts.kernel_frontend.parse_kernel import KernelSource, read_kernel_file
from processing_scripts.machine_description.load_machine import MachineDescription, load_machine
from processing_scripts.model_engine.model_report import ModelMode
from processing_scripts.model_errors import KernelParseError, RangeError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

SWEEP_CONSTANT = "N"


@dataclass
class SweepResult:
    table: pd.DataFrame
    boundaries: List[Dict] = field(default_factory=list)

    @property
    def regimes(self) -> List[str]:
        labels = self.table["regime"].tolist()
        return [label for position, label in enumerate(labels) if position == 0 or labels[position - 1] != label]

    def to_csv(self, file_path: str) -> None:
        self.table.to_csv(file_path, index=False)
        print(f"Output file: {file_path} has been created successfully!")


def sweep_points(start: int, stop: int, count: int) -> List[int]:
    """
    Logarithmically spaced distinct integer sizes from start to stop, both included.
    """
    if start < 1 or stop < start or count < 1:
        raise RangeError(f"Invalid sweep range {start}..{stop} with {count} points")
    if count == 1 or start == stop:
        return [start]
    return sorted(set(int(round(value)) for value in np.geomspace(start, stop, count)))


def evaluate_point(request: AnalysisRequest, mode: ModelMode, machine: MachineDescription, text: str, name: str, size: int) -> Dict:
    constants = dict(request.constants)
    constants[SWEEP_CONSTANT] = size
    try:
        report = analyze(request, mode, machine, KernelSource(text, constants, name))
    except KernelParseError as e:
        raise RangeError(f"{SWEEP_CONSTANT}={size} does not give a valid loop nest: {str(e)}") from e

    row = {SWEEP_CONSTANT: size}
    contributions = report.ecm_contributions
    row["T_OL"] = contributions.t_ol
    row["T_nOL"] = contributions.t_nol
    row.update(contributions.transfers)
    for level, tag in report.layer_conditions.tags.items():
        row[f"{level} layer condition"] = tag
    row["prediction cy/CL"] = report.prediction_cy_per_cl
    row["regime"] = report.layer_conditions.label
    return row


def regime_boundaries(table: pd.DataFrame) -> List[Dict]:
    boundaries = []
    previous = None
    for _, row in table.iterrows():
        if previous is not None and row["regime"] != previous["regime"]:
            boundaries.append({
                "below": int(previous[SWEEP_CONSTANT]),
                "above": int(row[SWEEP_CONSTANT]),
                "from": previous["regime"],
                "to": row["regime"],
            })
        previous = row
    return boundaries


def sweep(request: AnalysisRequest, n_values: Sequence[int], machine: Optional[MachineDescription] = None) -> SweepResult:
    """
    Evaluate the data-transfer model over a range of problem sizes.

    The constant N is bound to every value; points are independent and computed concurrently.

    Args:
        request (AnalysisRequest): Kernel, machine and options; a port table adds in-core times.
        n_values (Sequence[int]): Sizes to evaluate.
        machine (MachineDescription): Already loaded machine.

    Returns:
        SweepResult: One row per size with contributions, layer conditions and regime label.

    Raises:
        RangeError: If the range is empty or a size yields an invalid loop nest.
    """
    n_values = sorted(set(int(value) for value in n_values))
    if not n_values or n_values[0] < 1:
        raise RangeError(f"Sweep sizes must be positive integers, got {n_values}")
    if machine is None:
        machine = load_machine(request.machine_path)
    source = read_kernel_file(request.kernel_path, request.constants)
    mode = ModelMode.ECM if request.port_table_path else ModelMode.ECM_DATA

    tasks = [
        dask.delayed(evaluate_point)(request, mode, machine, source.text, source.name, size)
        for size in n_values
    ]
    rows = dask.compute(*tasks, scheduler="threads")
    table = pd.DataFrame(list(rows))
    result = SweepResult(table, regime_boundaries(table))
    logger.info(f"Swept {len(n_values)} sizes of '{source.name}': {len(result.regimes)} layer-condition regimes")
    return result
