from typing import Any, Dict, List

import yaml

from processing_scripts.model_engine.unit_conversion import Unit, format_value


def _cycles(value) -> str:
    return "" if value is None else f"{value:.1f}"


def _table(header: List[str], rows: List[List[str]]) -> List[str]:
    widths = [max([len(header[i])] + [len(row[i]) for row in rows]) for i in range(len(header))]
    lines = [" | ".join(cell.rjust(width) for cell, width in zip(header, widths))]
    lines.append("-+-".join("-" * width for width in widths))
    lines.extend(" | ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in rows)
    return lines


def render_text(document: Dict[str, Any], verbose: bool = False) -> str:
    """
    Human-readable report rendered from the machine-readable document.
    """
    kernel = document["kernel"]
    unit = Unit(document["unit"])
    constants = ", ".join(f"{name}={value}" for name, value in kernel["constants"].items())
    lines = [
        f"kernel {kernel['name']} ({constants}) on {document['machine']['arch']}, "
        f"mode {document['mode']}, {document['cores']} core{'s' if document['cores'] != 1 else ''}",
        f"flops per iteration: {kernel['flops per iteration']['total']} "
        f"(ADD {kernel['flops per iteration']['ADD']}, MUL {kernel['flops per iteration']['MUL']}, "
        f"DIV {kernel['flops per iteration']['DIV']})",
    ]
    for cycle in kernel["loop-carried scalars"]:
        lines.append(f"loop-carried dependency: {', '.join(cycle)}")

    if verbose and "traffic" in document:
        lines.append("")
        lines.append(f"Data traffic per cache line of work ({document['traffic']['source']}):")
        rows = [
            [
                entry["level"],
                f"{entry['load cachelines']:.1f}",
                f"{entry['store cachelines']:.1f}",
                f"{entry['bytes']:.0f}",
                "" if entry.get("reuse distance") is None else str(entry["reuse distance"]),
                entry.get("layer condition") or "",
            ]
            for entry in document["traffic"]["levels"]
        ]
        lines.extend(_table(["level", "loads CL", "evicts CL", "bytes", "reuse it", "layer condition"], rows))

    if "in-core" in document and "ecm" not in document and "roofline" not in document:
        incore = document["in-core"]
        lines.append(f"T_OL = {_cycles(incore['T_OL'])} cy/CL, T_nOL = {_cycles(incore['T_nOL'])} cy/CL")

    if "ecm" in document:
        ecm = document["ecm"]
        lines.append("")
        lines.append(ecm["notation"])
        if "prediction" in ecm:
            lines.append(ecm["prediction notation"])
            if ecm["saturation cores"] is None:
                lines.append("no saturation / cache-resident")
            else:
                lines.append(f"saturating at {ecm['saturation cores']} cores")
            if verbose:
                lines.append("")
                lines.append("Multicore scaling:")
                header = ["cores", "cy/CL"]
                rows = [[str(entry["cores"]), _cycles(entry["cy/CL"])] for entry in ecm["scaling"]]
                if unit is not Unit.CY_PER_CL:
                    header.append(unit.value)
                    for row, entry in zip(rows, ecm["scaling"]):
                        row.append("" if entry[unit.value] is None else format_value(entry[unit.value], unit))
                lines.extend(_table(header, rows))

    if "roofline" in document:
        roofline = document["roofline"]
        rows = [
            [
                row["level"],
                "" if row["arithmetic intensity"] is None else f"{row['arithmetic intensity']:.2f}",
                _cycles(row["cy/CL"]),
                "" if row["bandwidth GB/s"] is None else f"{row['bandwidth GB/s']:.2f}",
                row["kernel"] or "",
            ]
            for row in roofline["rows"]
        ]
        lines.append("")
        lines.append("Bottlenecks:")
        lines.extend(_table(["level", "FLOP/B", "cy/CL", "GB/s", "kernel"], rows))
        dominant = next(row for row in roofline["rows"] if row["level"] == roofline["dominant"])
        lines.append("")
        if dominant["kernel"] is None:
            lines.append("CPU bound")
        else:
            lines.append(f"Cache or mem bound ({dominant['level']}, bandwidth from {dominant['kernel']} benchmark)")
            lines.append(f"Arithmetic intensity: {dominant['arithmetic intensity']:.2f} FLOP/B")
        if roofline["saturation cores"] is not None:
            lines.append(f"saturating at {roofline['saturation cores']} cores")

    result = document["result"]
    headline = f"prediction: {_cycles(result['cy/CL'])} cy/CL"
    if unit is not Unit.CY_PER_CL and result["value"] is not None:
        headline += f" = {format_value(result['value'], unit)}"
    lines.append("")
    lines.append(headline)
    for note in document["notes"]:
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


def render_yaml(document: Dict[str, Any]) -> str:
    return yaml.safe_dump(document, sort_keys=True, allow_unicode=True)
