import logging
from dataclasses import replace
from typing import Optional

import pandas as pd

from processing_scripts.cli_report.run_analysis import AnalysisRequest, run
from processing_scripts.kernel_frontend.parse_kernel import read_kernel_file
from processing_scripts.machine_description.load_machine import MachineDescription, load_machine
from processing_scripts.model_errors import FormatError, UsageError

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

MEASURED_COLUMNS = ["kernel", "arch", "mode", "value_cy_per_cl"]
DEFAULT_DEVIATION_THRESHOLD = 20.0


def read_measured_results(file_path: str) -> pd.DataFrame:
    """
    Read measured results with columns kernel, arch, mode and value_cy_per_cl.

    Raises:
        FormatError: If the file cannot be parsed or misses columns or numeric values.
    """
    try:
        table = pd.read_csv(file_path, comment="#", skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        logger.error(f"Error reading measured results {file_path}: {str(e)}")
        raise FormatError(f"Cannot parse measured results: {file_path}") from e

    missing = [column for column in MEASURED_COLUMNS if column not in table.columns]
    if missing:
        raise FormatError(f"Measured results {file_path} miss columns: {', '.join(missing)}")
    try:
        table["value_cy_per_cl"] = pd.to_numeric(table["value_cy_per_cl"], errors="raise")
    except (ValueError, TypeError) as e:
        raise FormatError(f"Measured results {file_path} hold non-numeric cycle counts") from e
    return table[MEASURED_COLUMNS]


def compare(
    request: AnalysisRequest, machine: Optional[MachineDescription] = None,
    threshold_percent: float = DEFAULT_DEVIATION_THRESHOLD,
) -> pd.DataFrame:
    """
    Compare predictions with measured cycles per cache line for the requested kernel and machine.

    Deviation is (measured - predicted) / predicted in percent; rows beyond the threshold are flagged.

    Args:
        request (AnalysisRequest): Kernel, machine, constants, port table and measured results CSV.
        machine (MachineDescription): Already loaded machine.
        threshold_percent (float): Absolute deviation above which a row is flagged.

    Returns:
        pd.DataFrame: One row per matching measurement.

    Raises:
        UsageError: If the request names no measured results.
    """
    measured_file = request.measured_path
    if not measured_file:
        raise UsageError("Compare needs a measured results file")
    if machine is None:
        machine = load_machine(request.machine_path)
    kernel_name = read_kernel_file(request.kernel_path, request.constants).name
    measured = read_measured_results(measured_file)
    matching = measured[(measured["kernel"] == kernel_name) & (measured["arch"] == machine.arch)]
    if matching.empty:
        logger.warning(f"No measured results for kernel '{kernel_name}' on {machine.arch} in {measured_file}")

    rows = []
    for _, entry in matching.iterrows():
        report = run(replace(request, mode=entry["mode"], unit="cy/CL"), machine)
        predicted = report.prediction_cy_per_cl
        deviation = (entry["value_cy_per_cl"] - predicted) / predicted * 100.0
        rows.append({
            "kernel": kernel_name,
            "arch": machine.arch,
            "mode": entry["mode"],
            "measured cy/CL": float(entry["value_cy_per_cl"]),
            "predicted cy/CL": predicted,
            "deviation %": deviation,
            "flagged": abs(deviation) > threshold_percent,
        })
    columns = ["kernel", "arch", "mode", "measured cy/CL", "predicted cy/CL", "deviation %", "flagged"]
    return pd.DataFrame(rows, columns=columns)


def render_comparison(table: pd.DataFrame) -> str:
    lines = []
    for _, row in table.iterrows():
        flag = "  <-- deviation beyond threshold" if row["flagged"] else ""
        lines.append(
            f"{row['kernel']} on {row['arch']} ({row['mode']}): measured {row['measured cy/CL']:.1f} cy/CL, "
            f"predicted {row['predicted cy/CL']:.1f} cy/CL, deviation {row['deviation %']:+.1f} %{flag}"
        )
    return "\n".join(lines) + "\n"
