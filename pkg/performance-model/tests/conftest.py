import importlib.util
import sys
from pathlib import Path

import pytest

APPROACH_FOLDER = Path(__file__).resolve().parents[1]
if str(APPROACH_FOLDER) not in sys.path:
    sys.path.insert(0, str(APPROACH_FOLDER))

from processing_scripts.cli_report.run_analysis import AnalysisRequest  # noqa: E402
from processing_scripts.kernel_frontend.parse_kernel import KernelSource, parse_kernel, read_kernel_file  # noqa: E402
from processing_scripts.machine_description.load_machine import load_machine  # noqa: E402

INPUT_FOLDER = APPROACH_FOLDER / "input-data"
MACHINE_FILES = {"SNB": INPUT_FOLDER / "machine-files" / "snb.yml", "HSW": INPUT_FOLDER / "machine-files" / "hsw.yml"}

# sizes used for the in-memory predictions
LARGE_SIZES = {
    "2d-5pt": {"N": 6000, "M": 6000},
    "uxx": {"N": 150, "M": 150},
    "long-range": {"N": 100, "M": 100},
    "kahan-ddot": {"N": 10_000_000},
    "triad": {"N": 10_000_000},
}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: trace-simulation checks that take minutes")


def kernel_path(name: str) -> Path:
    return INPUT_FOLDER / "kernels" / f"{name}.c"


def port_table_path(name: str, arch: str) -> Path:
    return INPUT_FOLDER / "port-tables" / f"{name}-{arch}.yml"


def parse_fixture_kernel(name: str, **constants):
    return parse_kernel(read_kernel_file(str(kernel_path(name)), constants))


def parse_text(text: str, name: str = "kernel", **constants):
    return parse_kernel(KernelSource(text, constants, name))


def make_request(name: str, arch: str, mode: str, with_ports: bool = True, **overrides) -> AnalysisRequest:
    constants = dict(LARGE_SIZES[name])
    constants.update(overrides.pop("constants", {}))
    return AnalysisRequest(
        kernel_path=str(kernel_path(name)),
        machine_path=str(MACHINE_FILES[arch]),
        mode=mode,
        constants=constants,
        port_table_path=str(port_table_path(name, arch)) if with_ports else None,
        **overrides,
    )


@pytest.fixture(scope="session")
def snb():
    return load_machine(str(MACHINE_FILES["SNB"]))


@pytest.fixture(scope="session")
def hsw():
    return load_machine(str(MACHINE_FILES["HSW"]))


@pytest.fixture(scope="session")
def machines(snb, hsw):
    return {"SNB": snb, "HSW": hsw}


@pytest.fixture(scope="session")
def runner():
    spec = importlib.util.spec_from_file_location("run_performance_model", APPROACH_FOLDER / "run-performance-model.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module
