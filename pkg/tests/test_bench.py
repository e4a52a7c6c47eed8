import csv
import io
import threading

import numpy as np
import pytest

from dualground.attention import gated_cross_attention, text_gate
from dualground.bench import (
    MIN_REPS,
    REPORT_COLUMNS,
    WARMUP,
    BenchBusyError,
    BenchResult,
    bench_pe,
    bench_schemes,
    compare_report,
    exclusive_measurement,
    resident_heap,
    make_inputs,
    pe_layer_forward,
)
from dualground.geometry import offset_field
from dualground.numerics import default_dtype, no_grad
from dualground.posenc import pe_bias, pe_cost_model

SMALL = dict(K=8, N=32, D=16, H=2)


@pytest.fixture(scope="module")
def small_results():
    return [bench_pe(s, **SMALL) for s in ("box_surface", "center", "vertex")]


def test_small_run_contract(small_results):
    for r in small_results:
        assert r.reps >= MIN_REPS and r.warmup == WARMUP
        assert r.p10_ms <= r.median_ms <= r.p90_ms
        assert r.peak_alloc_bytes > 0
    box, _, vtx = small_results
    assert vtx.offset_bytes == 8 * box.offset_bytes
    cost = pe_cost_model("vertex", 8, 32, 32, 2)
    assert cost.mlp_applications / pe_cost_model("box_surface", 8, 32, 32, 2).mlp_applications == 8


def test_result_invariants():
    with pytest.raises(ValueError):
        BenchResult("center", 1, 1, 1, 1, 5, 19, 1.0, 0.5, 2.0, 0, 0, 0)
    with pytest.raises(ValueError):
        BenchResult("center", 1, 1, 1, 1, 5, 20, 3.0, 0.5, 2.0, 0, 0, 0)


def test_argument_errors():
    with pytest.raises(ValueError):
        bench_pe("corner", **SMALL)
    with pytest.raises(ValueError):
        bench_pe("center", K=0, N=4, D=4, H=1)
    with pytest.raises(ValueError):
        bench_pe("center", K=4, N=4, D=6, H=4)
    with pytest.raises(ValueError):
        bench_pe("center", **SMALL, reps=5)


def test_report_csv_parses_back(small_results):
    text, data = compare_report(small_results)
    rows = list(csv.DictReader(io.StringIO(data)))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert [r["scheme"] for r in rows] == ["box_surface", "center", "vertex"]
    assert float(rows[0]["latency_ratio"]) == 1.0 and float(rows[0]["offset_bytes_ratio"]) == 1.0
    assert float(rows[2]["offset_bytes_ratio"]) == 8.0
    for r, res in zip(rows, small_results):
        assert float(r["median_ms"]) == pytest.approx(res.median_ms, rel=1e-5)
    assert "PE-attributable" in text and len(text.splitlines()) == 3 + 3


def test_baseline_is_box_surface_row_wherever_it_sits(small_results):
    _, data = compare_report(small_results[::-1])
    rows = {r["scheme"]: r for r in csv.DictReader(io.StringIO(data))}
    assert float(rows["box_surface"]["latency_ratio"]) == 1.0


def test_single_result_rejected(small_results):
    with pytest.raises(ValueError):
        compare_report(small_results[:1])


def test_forward_matches_library_path():
    with default_dtype(np.float32), no_grad():
        pts, boxes, pe, attn, Q, V, T_s = make_inputs("vertex", **SMALL)
        got = pe_layer_forward(pts, boxes, pe, attn, Q, V, T_s, 2).data
        E = pe_bias(offset_field(pts, boxes, "vertex", dtype=np.float32), pe)
        want, _ = gated_cross_attention(Q, V, V, attn, 2, E, text_gate(V, T_s), "gate_on_all")
    assert got.dtype == np.float32
    assert np.array_equal(got, want.data)


def test_concurrent_measurement_refused():
    started, release = threading.Event(), threading.Event()

    def hold():
        with exclusive_measurement():
            started.set()
            release.wait(5)

    t = threading.Thread(target=hold)
    t.start()
    started.wait(5)
    try:
        with pytest.raises(BenchBusyError):
            bench_pe("center", **SMALL)
    finally:
        release.set()
        t.join()
    bench_pe("center", **SMALL)  # lock released again


def test_bench_schemes_matches_per_scheme_contract():
    results = bench_schemes(["vertex", "center"], **SMALL, seed=3)
    assert [r.scheme for r in results] == ["vertex", "center"]
    assert all(r.reps == MIN_REPS and r.p10_ms <= r.median_ms <= r.p90_ms for r in results)
    assert results[0].offset_bytes == 8 * results[1].offset_bytes


def test_bench_schemes_rejects_duplicates():
    with pytest.raises(ValueError, match="distinct"):
        bench_schemes(["center", "center"], **SMALL)


def test_resident_heap_is_reentrant_and_harmless():
    with resident_heap(), resident_heap():
        a = np.ones((1 << 20,), dtype=np.float32)
        assert a.sum() == 1 << 20
