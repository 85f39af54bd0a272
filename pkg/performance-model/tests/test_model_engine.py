from dataclasses import replace

import numpy as np
import pytest
import yaml

from conftest import LARGE_SIZES, MACHINE_FILES, make_request, parse_fixture_kernel
from processing_scripts.cache_predict.flatten_accesses import flatten
from processing_scripts.cache_predict.predict_traffic import predict_traffic
from processing_scripts.cli_report.run_analysis import run
from processing_scripts.machine_description.load_machine import machine_from_dict
from processing_scripts.model_engine.ecm_model import EcmContributions, compose_ecm, describe_transfers, transfer_cycles
from processing_scripts.model_engine.unit_conversion import Unit, convert_units, format_value, parse_unit, to_cycles
from processing_scripts.model_errors import MissingBandwidth, UsageError, ZeroCycles

ECM_EXPECTED = [
    ("2d-5pt", "SNB", 36.7), ("2d-5pt", "HSW", 35.7),
    ("uxx", "SNB", 98.8), ("uxx", "HSW", 89.1),
    ("long-range", "SNB", 117.9), ("long-range", "HSW", 105.8),
    ("kahan-ddot", "SNB", 96.0), ("kahan-ddot", "HSW", 96.0),
    ("triad", "SNB", 47.9), ("triad", "HSW", 44.3),
]

ECM_DATA_EXPECTED = [
    ("2d-5pt", [10.0, 6.0, 12.7]),
    ("uxx", [20.0, 20.0, 26.3]),
    ("long-range", [24.0, 24.0, 17.0]),
    ("kahan-ddot", [4.0, 4.0, 7.8]),
    ("triad", [10.0, 10.0, 21.9]),
]

ROOFLINE_PORTS_EXPECTED = [
    ("2d-5pt", "SNB", 29.8), ("2d-5pt", "HSW", 26.6),
    ("uxx", "SNB", 108.6), ("uxx", "HSW", 92.8),
    ("long-range", "SNB", 130.3), ("long-range", "HSW", 111.4),
    ("kahan-ddot", "SNB", 96.0), ("kahan-ddot", "HSW", 96.0),
    ("triad", "SNB", 54.3), ("triad", "HSW", 46.4),
]


@pytest.mark.parametrize("name, arch, expected", ECM_EXPECTED)
def test_ecm_prediction(machines, name, arch, expected):
    report = run(make_request(name, arch, "ECM"), machines[arch])
    assert report.prediction_cy_per_cl == pytest.approx(expected, abs=0.3)


@pytest.mark.parametrize("name, transfers", ECM_DATA_EXPECTED)
def test_ecm_data_contributions(snb, name, transfers):
    report = run(make_request(name, "SNB", "ECMData", with_ports=False), snb)
    assert list(report.ecm_contributions.transfers) == ["L1-L2", "L2-L3", "L3-MEM"]
    assert list(report.ecm_contributions.transfers.values()) == pytest.approx(transfers, abs=0.1)
    assert report.prediction_cy_per_cl == pytest.approx(sum(transfers), abs=0.2)
    assert report.incore is None


@pytest.mark.parametrize("name, arch, expected", ROOFLINE_PORTS_EXPECTED)
def test_roofline_with_port_timings(machines, name, arch, expected):
    report = run(make_request(name, arch, "RooflinePorts"), machines[arch])
    assert report.prediction_cy_per_cl == pytest.approx(expected, abs=0.3)


def test_ecm_notation_and_saturation(snb):
    report = run(make_request("2d-5pt", "SNB", "ECM"), snb)
    assert report.ecm_contributions.notation == "{ 9.5 ‖ 8.0 | 10.0 | 6.0 | 12.7 } cy/CL"
    assert report.ecm.notation == "{ 9.5 ⌉ 18.0 ⌉ 24.0 ⌉ 36.7 } cy/CL"
    assert report.ecm.saturation_cores == 3
    assert report.ecm.saturation_ratio == pytest.approx(2.89, abs=0.01)
    assert report.ecm_contributions.details[-1].kernel == "copy"


def test_ecm_scaling_curve_levels_off_at_memory_time(snb):
    report = run(make_request("2d-5pt", "SNB", "ECM"), snb)
    scaling = dict(report.ecm.scaling)
    assert len(scaling) == snb.memory_group_cores
    assert scaling[1] == pytest.approx(36.7, abs=0.1)
    assert scaling[2] == pytest.approx(36.7 / 2, abs=0.1)
    assert scaling[3] == pytest.approx(12.7, abs=0.1)
    assert scaling[8] == scaling[3]


def test_core_only_mode_skips_data_transfers(snb):
    report = run(make_request("uxx", "SNB", "ECMCore"), snb)
    assert report.traffic is None
    assert report.prediction_cy_per_cl == pytest.approx(84.0)


def test_peak_roofline_table(snb):
    report = run(make_request("2d-5pt", "SNB", "Roofline"), snb)
    roofline = report.roofline
    table = [
        (row.level_name, row.cycles, row.arithmetic_intensity, row.bandwidth_bytes_per_s, row.kernel)
        for row in roofline.rows
    ]
    expected = [
        ("CPU", 4.0, None, None, None),
        ("REG-L1", 11.1, 0.1, 78.0e9, "triad"),
        ("L1-L2", 16.9, 0.1, 51.2e9, "triad"),
        ("L2-L3", 27.4, 0.1, 31.5e9, "triad"),
        ("L3-MEM", 29.8, 0.17, 17.4e9, "copy"),
    ]
    assert [row[0] for row in table] == [row[0] for row in expected]
    for (_, cycles, intensity, bandwidth, kernel), (_, want_cycles, want_intensity, want_bandwidth, want_kernel) in zip(table, expected):
        assert cycles == pytest.approx(want_cycles, abs=0.1)
        assert kernel == want_kernel
        if want_intensity is None:
            assert intensity is None and bandwidth is None
        else:
            assert intensity == pytest.approx(want_intensity, abs=0.01)
            assert bandwidth == pytest.approx(want_bandwidth)
    assert roofline.dominant == "L3-MEM"
    assert roofline.prediction == pytest.approx(29.8, abs=0.1)
    assert roofline.saturation_cores == 3
    assert report.unit is Unit.FLOP_PER_S


def test_roofline_paths_carry_everything_missing_above(snb):
    report = run(make_request("long-range", "SNB", "RooflinePorts"), snb)
    volumes = {row.level_name: row.bytes for row in report.roofline.rows}
    traffic = report.traffic
    assert volumes["L1-L2"] == pytest.approx((traffic.register_reads + traffic.register_writes) * 8 * 8)
    assert volumes["L2-L3"] == pytest.approx(traffic.level("L1").total_bytes)
    assert volumes["L3-MEM"] == pytest.approx(traffic.level("L2").total_bytes)
    assert volumes["L1-L2"] >= volumes["L2-L3"] >= volumes["L3-MEM"]


def test_roofline_maximum_is_reproducible(machines):
    for name in ("2d-5pt", "uxx", "long-range", "kahan-ddot", "triad"):
        for arch, machine in machines.items():
            roofline = run(make_request(name, arch, "RooflinePorts"), machine).roofline
            assert max(row.cycles for row in roofline.rows) == roofline.prediction
            assert roofline.dominant_row.cycles == roofline.prediction


def test_roofline_on_several_cores_uses_multicore_bandwidth(snb):
    single = run(make_request("2d-5pt", "SNB", "Roofline"), snb).roofline
    quad = run(make_request("2d-5pt", "SNB", "Roofline", cores=4), snb).roofline
    assert quad.threads == 4
    assert quad.saturation_cores is None
    assert quad.dominant_row.cycles == pytest.approx(192 * 2.7e9 / 39.6e9, abs=0.05)
    assert quad.prediction < single.prediction


def test_no_memory_traffic_means_no_saturation():
    contributions = EcmContributions(1.0, 2.0, {"L1-L2": 4.0, "L2-L3": 0.0, "L3-MEM": 0.0})
    prediction = compose_ecm(contributions)
    assert prediction.levels == {"L1": 2.0, "L2": 6.0, "L3": 6.0, "MEM": 6.0}
    assert prediction.saturation_cores is None
    assert prediction.scaling == [(1, 6.0)]


def test_overlapping_time_can_hide_all_transfers():
    prediction = compose_ecm(EcmContributions(96.0, 8.0, {"L1-L2": 4.0, "L2-L3": 4.0, "L3-MEM": 7.8}))
    assert set(prediction.levels.values()) == {96.0}
    assert prediction.saturation_cores == 13


def test_last_cache_without_any_bandwidth():
    with open(MACHINE_FILES["SNB"]) as file:
        data = yaml.safe_load(file)
    data["benchmarks"]["measurements"] = [
        record for record in data["benchmarks"]["measurements"] if record["level"] != "MEM"
    ]
    machine = machine_from_dict(data)
    ir = parse_fixture_kernel("triad", N=10_000_000)
    traffic = predict_traffic(flatten(ir), machine, ir)
    with pytest.raises(MissingBandwidth):
        transfer_cycles(traffic, machine)


def test_latency_penalties_slow_down_the_transfers(snb):
    plain = run(make_request("triad", "SNB", "ECM"), snb)
    penalised = run(make_request("triad", "SNB", "ECM", use_latency_penalties=True), snb)
    # 4 lines loaded across every boundary, at 0.5, 1.5 and 3 cycles each
    assert penalised.prediction_cy_per_cl == pytest.approx(plain.prediction_cy_per_cl + 4 * (0.5 + 1.5 + 3.0), abs=0.01)
    assert penalised.ecm_contributions.details[0].penalty_cycles == pytest.approx(2.0)


def test_unit_conversion(snb):
    ir = parse_fixture_kernel("2d-5pt", N=6000, M=6000)
    iterations_per_second = 8 * 2.7e9 / 36.0
    assert convert_units(36.0, ir, snb, Unit.CY_PER_CL) == 36.0
    assert convert_units(36.0, ir, snb, Unit.IT_PER_S) == pytest.approx(iterations_per_second)
    assert convert_units(36.0, ir, snb, Unit.FLOP_PER_S) == pytest.approx(4 * iterations_per_second)
    assert to_cycles(4 * iterations_per_second, ir, snb, Unit.FLOP_PER_S) == pytest.approx(36.0)
    with pytest.raises(ZeroCycles):
        convert_units(0.0, ir, snb, Unit.IT_PER_S)


def test_unit_names_and_formatting():
    assert parse_unit("flop/s") is Unit.FLOP_PER_S
    assert format_value(2.4e9, Unit.FLOP_PER_S) == "2.40 GFLOP/s"
    assert format_value(36.66, Unit.CY_PER_CL) == "36.7 cy/CL"
    assert format_value(512.0, Unit.IT_PER_S) == "512.00 It/s"
    with pytest.raises(UsageError):
        parse_unit("cycles")


@pytest.mark.parametrize("name, arch, expected", ECM_EXPECTED)
def test_ecm_prediction_dominates_every_contribution(machines, name, arch, expected):
    report = run(make_request(name, arch, "ECM"), machines[arch])
    contributions = report.ecm_contributions
    serial = contributions.t_nol + sum(contributions.transfers.values())
    assert report.prediction_cy_per_cl >= contributions.t_ol
    assert report.prediction_cy_per_cl >= contributions.t_nol
    assert all(report.prediction_cy_per_cl >= cycles for cycles in contributions.transfers.values())
    if contributions.t_ol >= serial:
        assert report.prediction_cy_per_cl == contributions.t_ol
    else:
        assert report.prediction_cy_per_cl == pytest.approx(serial)


@pytest.mark.parametrize("seed", range(5))
def test_deeper_residence_never_predicts_less(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        t_ol, t_nol, *transfers = rng.uniform(0.0, 50.0, size=5).tolist()
        prediction = compose_ecm(EcmContributions(t_ol, t_nol, dict(zip(["L1-L2", "L2-L3", "L3-MEM"], transfers))))
        levels = list(prediction.levels.values())
        assert levels == sorted(levels)
        assert levels[0] == max(t_ol, t_nol)
        assert levels[-1] == pytest.approx(max(t_ol, t_nol + sum(transfers)))


def _scaled_bandwidths(machine, factor):
    measurements = machine.measurements.assign(bandwidth=machine.measurements["bandwidth"] * factor)
    return replace(machine, measurements=measurements)


@pytest.mark.parametrize("factor", [0.5, 2.5])
@pytest.mark.parametrize("name", ["2d-5pt", "uxx", "long-range", "kahan-ddot", "triad"])
def test_bandwidth_scaling_divides_transfer_times(snb, name, factor):
    ir = parse_fixture_kernel(name, **LARGE_SIZES[name])
    traffic = predict_traffic(flatten(ir), snb, ir)
    scaled = _scaled_bandwidths(snb, factor)
    for plain, faster in zip(describe_transfers(traffic, snb), describe_transfers(traffic, scaled)):
        if plain.bandwidth_bytes_per_s is None:
            assert faster.cycles == plain.cycles
        else:
            assert faster.cycles == pytest.approx(plain.cycles / factor, rel=1e-12)
            assert faster.kernel == plain.kernel

    request = make_request(name, "SNB", "Roofline")
    rows = [row for row in run(request, snb).roofline.rows if row.bandwidth_bytes_per_s is not None]
    scaled_rows = [row for row in run(request, scaled).roofline.rows if row.bandwidth_bytes_per_s is not None]
    for row, scaled_row in zip(rows, scaled_rows):
        assert scaled_row.cycles == pytest.approx(row.cycles / factor, rel=1e-12)
        assert scaled_row.kernel == row.kernel
    slowest = max(rows, key=lambda row: row.cycles).level_name
    assert max(scaled_rows, key=lambda row: row.cycles).level_name == slowest


@pytest.mark.parametrize("unit", [Unit.CY_PER_CL, Unit.IT_PER_S, Unit.FLOP_PER_S])
@pytest.mark.parametrize("cycles", [0.37, 36.7, 96.0, 12345.6])
def test_unit_round_trip(snb, hsw, unit, cycles):
    ir = parse_fixture_kernel("2d-5pt", N=6000, M=6000)
    for machine in (snb, hsw):
        value = convert_units(cycles, ir, machine, unit)
        assert to_cycles(value, ir, machine, unit) == pytest.approx(cycles, rel=1e-9)


def test_unit_examples(snb):
    jacobi = parse_fixture_kernel("2d-5pt", N=6000, M=6000)
    assert format_value(convert_units(36.7, jacobi, snb, Unit.FLOP_PER_S), Unit.FLOP_PER_S) == "2.35 GFLOP/s"
    assert format_value(convert_units(96.0, jacobi, snb, Unit.IT_PER_S), Unit.IT_PER_S) == "225.00 MIt/s"
