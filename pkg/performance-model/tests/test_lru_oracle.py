import numpy as np
import pytest

from conftest import parse_fixture_kernel
from processing_scripts.cache_predict.flatten_accesses import array_base_lines, flatten
from processing_scripts.cache_predict.lru_oracle import InclusiveLRU, lru_oracle
from processing_scripts.cache_predict.predict_traffic import predict_traffic
from processing_scripts.model_errors import TooLarge

SMALL_CACHES = {"L1": 2_000, "L2": 16_000, "L3": 128_000}
# size ranges per kernel; under SMALL_CACHES each range stays inside one set of layer conditions
ORACLE_SIZES = {
    "2d-5pt": [(24, 40), (72, 420), (600, 1000)],
    "uxx": [(28, 34), (50, 64)],
    "long-range": [(34, 38), (48, 64)],
    "kahan-ddot": [(2000, 40000)],
    "triad": [(2000, 40000)],
}
FIXED_SIZES = {"2d-5pt": {"M": 36}, "uxx": {"M": 12}, "long-range": {"M": 16}}


def test_arrays_start_on_cacheline_boundaries(snb):
    ir = parse_fixture_kernel("triad", N=100)
    # 800 B per array rounds up to 13 lines
    assert array_base_lines(ir, snb.cacheline_bytes) == {"a": 0, "b": 13, "c": 26, "d": 39}


def test_dirty_lines_are_written_back_once_per_level():
    hierarchy = InclusiveLRU([2, 4])
    hierarchy.counting = True
    hierarchy.access(0, True)
    for line in range(1, 7):
        hierarchy.access(line, False)
    assert hierarchy.loads == [7, 7]
    assert hierarchy.stores == [1, 1]


def test_oracle_on_jacobi_rows(snb):
    ir = parse_fixture_kernel("2d-5pt", N=40, M=24)
    traffic = lru_oracle(ir, snb, cache_sizes=SMALL_CACHES)
    l1 = traffic.level("L1")
    assert traffic.source == "lru"
    assert l1.load_cachelines == pytest.approx(2, abs=0.2)
    assert l1.store_cachelines == pytest.approx(1, abs=0.2)


def test_oracle_refuses_long_traces(snb):
    ir = parse_fixture_kernel("2d-5pt", N=40, M=24)
    with pytest.raises(TooLarge):
        lru_oracle(ir, snb, max_accesses=100)


def _draw_size(rng, ranges):
    low, high = ranges[int(rng.integers(len(ranges)))]
    return int(rng.integers(low, high + 1))


def _random_configurations(seed=7, count=20):
    rng = np.random.default_rng(seed)
    configurations = []
    for name, ranges in ORACLE_SIZES.items():
        for _ in range(count):
            constants = {"N": _draw_size(rng, ranges), **FIXED_SIZES.get(name, {})}
            configurations.append((name, constants))
    return configurations


def test_every_kernel_gets_twenty_configurations():
    names = [name for name, _ in _random_configurations()]
    assert all(names.count(name) >= 20 for name in ORACLE_SIZES)


@pytest.mark.slow
@pytest.mark.parametrize("name, constants", _random_configurations())
def test_analytic_traffic_matches_trace_simulation(snb, name, constants):
    ir = parse_fixture_kernel(name, **constants)
    analytic = predict_traffic(flatten(ir), snb, ir, cache_sizes=SMALL_CACHES)
    simulated = lru_oracle(ir, snb, cache_sizes=SMALL_CACHES)
    for predicted, measured in zip(analytic.levels, simulated.levels):
        assert predicted.level == measured.level
        assert measured.load_cachelines == pytest.approx(predicted.load_cachelines, abs=1.0)
        assert measured.store_cachelines == pytest.approx(predicted.store_cachelines, abs=1.0)


@pytest.mark.slow
def test_stencil_cluster_matches_trace_simulation(snb):
    ir = parse_fixture_kernel("long-range", N=64, M=16)
    analytic = predict_traffic(flatten(ir), snb, ir, cache_sizes=SMALL_CACHES).level("L1")
    simulated = lru_oracle(ir, snb, cache_sizes=SMALL_CACHES).level("L1")
    assert analytic.load_cachelines == 19
    assert simulated.load_cachelines == pytest.approx(analytic.load_cachelines, abs=1.0)
