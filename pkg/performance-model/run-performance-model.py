import argparse
import logging
import os
import sys
from pathlib import Path

import yaml
from jinja2 import Environment, FileSystemLoader, select_autoescape

from processing_scripts.cli_report import compare_measurements, render_report, run_analysis, sweep_sizes
from processing_scripts.machine_description.load_machine import load_machine
from processing_scripts.model_engine.model_report import ModelMode
from processing_scripts.model_errors import ExitCode, PerformanceModelError, UsageError

logger = logging.getLogger(__name__)

APPROACH_FOLDER = Path(__file__).resolve().parent


class ModelArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_config(kernel_name, arch, mode):
    """
    Load configuration
    """
    env = Environment(
        loader=FileSystemLoader(str(APPROACH_FOLDER)), autoescape=select_autoescape(["yaml"])
    )

    with open(APPROACH_FOLDER / "config.yml", "r") as file:
        template = env.from_string(file.read())
        rendered_yaml = template.render(kernel=kernel_name, arch=arch, mode=mode)
        config = yaml.safe_load(rendered_yaml)

    return config


def build_parser():
    parser = ModelArgumentParser(
        prog="run-performance-model.py",
        description="Static ECM and Roofline performance model for loop kernels.",
    )
    parser.add_argument("kernel", help="kernel source file")
    parser.add_argument("mode", nargs="?", help="ECM, ECMData, ECMCore, Roofline, RooflinePorts, Compare or Sweep")
    parser.add_argument("-p", "--mode", dest="mode_option", help="analysis mode (alternative to the positional)")
    parser.add_argument("-m", "--machine", required=True, help="machine description file")
    parser.add_argument("-D", "--define", nargs=2, action="append", default=[], metavar=("NAME", "VALUE"),
                        help="bind a kernel constant, repeatable")
    parser.add_argument("--unit", help="cy/CL, It/s or FLOP/s")
    parser.add_argument("--cores", type=int, default=1, help="number of cores")
    parser.add_argument("--ports", help="port-cycle table of the compiled loop body")
    parser.add_argument("--measured", help="measured results CSV for Compare")
    parser.add_argument("--sweep", nargs=2, type=int, metavar=("START", "STOP"), help="size range for Sweep")
    parser.add_argument("--sweep-points", type=int, help="number of sizes in the sweep range")
    parser.add_argument("--output", help="write the machine-readable result to this file")
    parser.add_argument("--save", action="store_true", help="write results to the configured output folder")
    parser.add_argument("--latency-penalties", action="store_true", help="add machine latency penalties")
    parser.add_argument("-v", "--verbose", action="store_true", help="include traffic and bottleneck tables")
    return parser


def parse_constants(pairs):
    constants = {}
    for name, value in pairs:
        try:
            constants[name] = int(value)
        except ValueError:
            raise UsageError(f"Constant {name} needs an integer value, got '{value}'")
        if constants[name] <= 0:
            raise UsageError(f"Constant {name} must be positive, got {value}")
    return constants


def write_output(path, content):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as file:
        file.write(content)
    print(f"Output file: {path} has been created successfully!")


def execute(args):
    if args.mode and args.mode_option and args.mode.lower() != args.mode_option.lower():
        raise UsageError(f"Conflicting modes '{args.mode}' and '{args.mode_option}'")
    mode = run_analysis.parse_mode(args.mode_option or args.mode or ModelMode.ECM.value)
    kernel_name = Path(args.kernel).stem

    # --------------------------------------------Load machine and config--------------------------------------------
    logger.info("Loading the machine description.")
    machine = load_machine(args.machine)

    logger.info("Loading the config file.")
    config = load_config(kernel_name, machine.arch, mode.value)

    port_table = args.ports
    default_table = APPROACH_FOLDER / config["input_data_folder"]["port_table"]
    if port_table is None and default_table.exists():
        port_table = str(default_table)

    request = run_analysis.AnalysisRequest(
        kernel_path=args.kernel,
        machine_path=args.machine,
        mode=mode.value,
        constants=parse_constants(args.define),
        unit=args.unit,
        cores=args.cores,
        port_table_path=port_table,
        measured_path=args.measured or str(APPROACH_FOLDER / config["input_data_folder"]["measured_results"]),
        use_latency_penalties=args.latency_penalties or config["model"]["use_latency_penalties"],
    )

    if args.save:
        os.makedirs(APPROACH_FOLDER / config["output_data_folders"]["kernel_folder"], exist_ok=True)

    # --------------------------------------------Sweep problem sizes--------------------------------------------
    if mode is ModelMode.SWEEP:
        if args.sweep is None:
            raise UsageError("Sweep needs a size range (--sweep START STOP)")
        points = sweep_sizes.sweep_points(args.sweep[0], args.sweep[1], args.sweep_points or config["model"]["sweep_points"])
        result = sweep_sizes.sweep(request, points, machine)
        print(result.table.to_string(index=False))
        for boundary in result.boundaries:
            print(f"N {boundary['below']} -> {boundary['above']}: {boundary['from']} -> {boundary['to']}")
        output = args.output or (APPROACH_FOLDER / config["output_files"]["sweep_csv"] if args.save else None)
        if output:
            result.to_csv(str(output))
        return ExitCode.OK

    # --------------------------------------------Compare with measurements--------------------------------------------
    if mode is ModelMode.COMPARE:
        table = compare_measurements.compare(
            request, machine, config["model"]["deviation_threshold_percent"],
        )
        print(compare_measurements.render_comparison(table), end="")
        output = args.output or (APPROACH_FOLDER / config["output_files"]["comparison_csv"] if args.save else None)
        if output:
            table.to_csv(str(output), index=False)
            print(f"Output file: {output} has been created successfully!")
        return ExitCode.OK

    # --------------------------------------------Single analysis--------------------------------------------
    report = run_analysis.run(request, machine)
    document = report.to_document()
    print(render_report.render_text(document, args.verbose), end="")
    output = args.output or (APPROACH_FOLDER / config["output_files"]["report_yaml"] if args.save else None)
    if output:
        write_output(str(output), render_report.render_yaml(document))
    return ExitCode.OK


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    try:
        args = build_parser().parse_args(argv)
        return execute(args).value
    except PerformanceModelError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        print(f"error: {str(e)}", file=sys.stderr)
        return e.exit_code.value


if __name__ == "__main__":
    sys.exit(main())
