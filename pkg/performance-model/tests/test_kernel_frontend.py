import pytest

from conftest import parse_fixture_kernel, parse_text
from processing_scripts.kernel_frontend.parse_kernel import (
    AccessKind,
    IndexTerm,
    KernelSource,
    LoopSpec,
    ir_to_dict,
    parse_kernel,
    render_kernel,
)
from processing_scripts.kernel_frontend.scalar_dependencies import loop_carried_scalars
from processing_scripts.model_errors import KernelSyntaxError, MissingConstant, RestrictionViolation


def test_jacobi_loop_stack_has_exclusive_ends():
    ir = parse_fixture_kernel("2d-5pt", N=5000, M=500)
    assert ir.loops == [LoopSpec("j", 1, 499, 1), LoopSpec("i", 1, 4999, 1)]
    assert ir.total_iterations == 498 * 4998


def test_jacobi_sources_and_destination():
    ir = parse_fixture_kernel("2d-5pt", N=5000, M=500)
    sources = {tuple(str(term) for term in access.indices) for access in ir.sources() if access.array_name == "a"}
    assert sources == {("j", "i-1"), ("j", "i+1"), ("j-1", "i"), ("j+1", "i")}
    destinations = ir.destinations()
    assert len(destinations) == 1
    assert destinations[0].array_name == "b"
    assert destinations[0].indices == (IndexTerm.relative("j"), IndexTerm.relative("i"))
    assert ir.scalars == ["s"]
    assert ir.arrays["a"].dims == (500, 5000)


@pytest.mark.parametrize(
    "name, constants, expected",
    [
        ("2d-5pt", {"N": 100, "M": 100}, {"ADD": 3, "MUL": 1, "DIV": 0, "total": 4}),
        ("kahan-ddot", {"N": 1000}, {"ADD": 4, "MUL": 1, "DIV": 0, "total": 5}),
        ("triad", {"N": 1000}, {"ADD": 1, "MUL": 1, "DIV": 0, "total": 2}),
        ("uxx", {"N": 20, "M": 20}, {"ADD": 15, "MUL": 8, "DIV": 1, "total": 24}),
        # literal count: 12 coefficient products, 12 inner and 12 outer additions, c0*V, and 4 in the update
        ("long-range", {"N": 20, "M": 20}, {"ADD": 26, "MUL": 15, "DIV": 0, "total": 41}),
    ],
)
def test_flop_counts(name, constants, expected):
    assert parse_fixture_kernel(name, **constants).flops == expected


def test_read_modify_write_gives_source_and_destination():
    ir = parse_fixture_kernel("uxx", N=20, M=20)
    u1 = [access for access in ir.accesses if access.array_name == "u1"]
    assert sorted(access.kind.value for access in u1) == ["destination", "source"]


def test_reference_count_matches_subscripted_references():
    ir = parse_fixture_kernel("long-range", N=20, M=20)
    assert len([access for access in ir.accesses if access.array_name == "V"]) == 26
    assert len(ir.accesses) == 26 + 3


def test_compound_assignment_reads_its_target():
    ir = parse_text("double a[N], b[N];\nfor (int i = 0; i < N; i++) a[i] += b[i];", N=64)
    kinds = [(access.array_name, access.kind) for access in ir.accesses]
    assert ("a", AccessKind.SOURCE) in kinds and ("a", AccessKind.DESTINATION) in kinds
    assert ir.flops["ADD"] == 1


def test_comments_are_ignored():
    ir = parse_text(
        "double a[N], b[N]; // arrays\n/* copy\n loop */\nfor (int i = 0; i < N; ++i) b[i] = a[i];", N=32,
    )
    assert ir.loops == [LoopSpec("i", 0, 32, 1)]


def test_strided_step():
    ir = parse_text("double a[N];\nfor (int i = 0; i < N-1; i += 2) a[i] = a[i] * 2.0;", N=100)
    assert ir.loops == [LoopSpec("i", 0, 99, 2)]
    assert ir.loops[0].trip_count == 50


def test_missing_constant():
    with pytest.raises(MissingConstant):
        parse_fixture_kernel("2d-5pt", N=100)


@pytest.mark.parametrize(
    "text",
    [
        "#include <stdio.h>\ndouble a[N];\nfor (int i = 0; i < N; ++i) a[i] = 1.0;",
        "float a[N];\nfor (int i = 0; i < N; ++i) a[i] = 1.0;",
        "double a[N];\nfor (int i = 0; i < N; ++i) { a[i] = 1.0; for (int j = 0; j < N; ++j) a[j] = 2.0; }",
        "double a[N];\nfor (int i = 0; i < N; ++i) a[i*2] = 1.0;",
        "double a[N];\nfor (int i = 0; i < N; ++i) if (i) a[i] = 1.0;",
        "double a[N];\nfor (int i = N; i < N; ++i) a[i] = 1.0;",
        "double a[N];\nfor (int i = 0; i < N; --i) a[i] = 1.0;",
        "double a[N];\nfor (int i = 0; i <= N-2; ++i) a[i] = 1.0;",
        "double a[N];\nfor (int i = 0; N > i; ++i) a[i] = 1.0;",
        "double a[N][N];\nfor (int i = 0; i < N; ++i) a[i] = 1.0;",
    ],
    ids=["preprocessor", "float", "imperfect-nest", "scaled-index", "branch", "empty-loop", "decrement", "inclusive-bound",
         "reversed-condition", "rank-mismatch"],
)
def test_restriction_violations(text):
    with pytest.raises(RestrictionViolation):
        parse_text(text, N=16)


def test_malformed_source():
    with pytest.raises(KernelSyntaxError):
        parse_text("double a[N];\nfor (int i = 0; i < N; ++i a[i] = 1.0;", N=16)


def test_render_round_trips_the_loop_stack():
    ir = parse_fixture_kernel("long-range", N=40, M=30)
    rendered = parse_kernel(KernelSource(render_kernel(ir), {}, ir.name))
    assert rendered.loops == ir.loops
    assert [str(access) for access in rendered.accesses] == [str(access) for access in ir.accesses]
    assert rendered.flops == ir.flops


def test_identical_inputs_give_identical_ir():
    first = parse_fixture_kernel("uxx", N=30, M=30)
    second = parse_fixture_kernel("uxx", N=30, M=30)
    assert ir_to_dict(first) == ir_to_dict(second)


def test_kahan_recurrences_are_reported():
    cycles = loop_carried_scalars(parse_fixture_kernel("kahan-ddot", N=1000))
    assert ["sum", "t"] in cycles
    assert any("c" in cycle for cycle in cycles)


def test_streaming_kernels_have_no_recurrence():
    assert loop_carried_scalars(parse_fixture_kernel("triad", N=1000)) == []
    assert loop_carried_scalars(parse_fixture_kernel("uxx", N=20, M=20)) == []
