"""CPU microbenchmark of the three position-encoding schemes.

Each repetition runs the same code path a decoder layer uses: the offset
field, the bias MLP(s), and one gated cross-attention forward. Only the
relative ordering between schemes is meaningful.
"""

from __future__ import annotations

import contextlib
import csv
import ctypes
import fcntl
import io
import os
import tempfile
import threading
import time
import tracemalloc
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .attention import GateWiring, gated_cross_attention, init_attn, text_gate
from .geometry import SCHEMES
from .numerics import Tensor, default_dtype, no_grad
from .posenc import attention_bias, make_posenc, pe_cost_model

WARMUP = 5
MIN_REPS = 20
PE_HIDDEN = 32
_LOCK = threading.Lock()
_LOCK_PATH = os.path.join(tempfile.gettempdir(), "dualground-bench.lock")


class BenchBusyError(RuntimeError):
    """Raised when another measurement already holds the benchmark lock."""


@dataclass
class BenchResult:
    scheme: str
    K: int
    N: int
    D: int
    H: int
    warmup: int
    reps: int
    median_ms: float
    p10_ms: float
    p90_ms: float
    offset_bytes: int
    bias_bytes: int
    peak_alloc_bytes: int

    def __post_init__(self):
        if self.reps < MIN_REPS:
            raise ValueError(f"need at least {MIN_REPS} measured reps, got {self.reps}")
        if not self.p10_ms <= self.median_ms <= self.p90_ms:
            raise ValueError("median outside [p10, p90]")

    @property
    def buffer_bytes(self) -> int:
        return self.offset_bytes + self.bias_bytes


@contextlib.contextmanager
def exclusive_measurement():
    """Hold both an in-process and a cross-process lock; refuse rather than wait."""
    if not _LOCK.acquire(blocking=False):
        raise BenchBusyError("a benchmark is already running in this process")
    try:
        with open(_LOCK_PATH, "w") as fh:
            try:
                fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError as exc:
                raise BenchBusyError(f"another process holds {_LOCK_PATH}") from exc
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)
    finally:
        _LOCK.release()


@contextlib.contextmanager
def single_pinned_thread():
    """One BLAS thread, and the process pinned to a single CPU where supported."""
    old = os.sched_getaffinity(0) if hasattr(os, "sched_getaffinity") else None
    if old:
        os.sched_setaffinity(0, {min(old)})
    try:
        with threadpool_limits(limits=1):
            yield
    finally:
        if old:
            os.sched_setaffinity(0, old)


# glibc mallopt parameters and their defaults
_M_TRIM_THRESHOLD, _M_MMAP_MAX = -1, -4
_TRIM_DEFAULT, _MMAP_MAX_DEFAULT = 128 * 1024, 65536


@contextlib.contextmanager
def resident_heap():
    """Serve large arrays from a heap that is never trimmed (glibc only).

    Otherwise every multi-megabyte buffer is a fresh mmap and each pass pays
    its page faults, which swamps the difference between the cheaper schemes.
    """
    try:
        mallopt = ctypes.CDLL(None).mallopt
    except (OSError, AttributeError):
        yield
        return
    mallopt(_M_MMAP_MAX, 0)
    mallopt(_M_TRIM_THRESHOLD, 2**31 - 1)
    try:
        yield
    finally:
        mallopt(_M_MMAP_MAX, _MMAP_MAX_DEFAULT)
        mallopt(_M_TRIM_THRESHOLD, _TRIM_DEFAULT)


def make_inputs(scheme: str, K: int, N: int, D: int, H: int, seed: int = 0):
    """Deterministic random workload for one scheme at the given shapes."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 4.0, size=(N, 3))
    centers = rng.uniform(0.0, 4.0, size=(K, 3))
    sizes = rng.uniform(0.2, 1.5, size=(K, 3))
    boxes = np.concatenate([centers, sizes], axis=1)
    pe = make_posenc(scheme, num_heads=H, hidden_dim=PE_HIDDEN, seed=rng)
    attn = init_attn(D, rng)
    Q = Tensor(rng.normal(size=(K, D)))
    V = Tensor(rng.normal(size=(N, D)))
    T_s = Tensor(rng.normal(size=(3, D)) / np.sqrt(D))
    return points, boxes, pe, attn, Q, V, T_s


def pe_layer_forward(points, boxes, pe, attn, Q, V, T_s, H):
    """The timed unit: offsets, bias, gate and one attention pass."""
    E = attention_bias(points, boxes, pe)
    gate = text_gate(V, T_s)
    out, _ = gated_cross_attention(Q, V, V, attn, H, E=E, gate=gate, wiring=GateWiring.GATE_ON_ALL)
    return out


def _check_args(scheme: str, K: int, N: int, D: int, H: int, reps: int) -> None:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if min(K, N, D, H) < 1:
        raise ValueError("shapes must be positive")
    if D % H:
        raise ValueError(f"D={D} not divisible by H={H}")
    if reps < MIN_REPS:
        raise ValueError(f"reps must be >= {MIN_REPS}")


def bench_schemes(schemes, K: int, N: int, D: int, H: int, reps: int = MIN_REPS, seed: int = 0) -> list:
    """Benchmark several schemes with their repetitions interleaved.

    Each round runs every scheme once in a freshly shuffled order. Slow
    periods of the machine and allocator state left behind by the previous
    scheme are then spread evenly, which keeps latency ratios stable.
    """
    schemes = list(schemes)
    for s in schemes:
        _check_args(s, K, N, D, H, reps)
    if len(set(schemes)) != len(schemes):
        raise ValueError("schemes must be distinct")

    with exclusive_measurement(), single_pinned_thread(), resident_heap(), default_dtype(np.float32), no_grad():
        inputs = [make_inputs(s, K, N, D, H, seed) for s in schemes]
        for args in inputs:
            for _ in range(WARMUP):
                pe_layer_forward(*args, H)
        times = np.empty((len(schemes), reps))
        order_rng = np.random.default_rng(seed)
        for i in range(reps):
            for j in order_rng.permutation(len(schemes)):
                t0 = time.perf_counter()
                pe_layer_forward(*inputs[j], H)
                times[j, i] = time.perf_counter() - t0
        # allocation tracing slows numpy down, so it gets its own untimed pass
        peaks = []
        for args in inputs:
            tracemalloc.start()
            try:
                pe_layer_forward(*args, H)
                peaks.append(tracemalloc.get_traced_memory()[1])
            finally:
                tracemalloc.stop()

    itemsize = np.dtype(np.float32).itemsize
    out = []
    for s, t, peak in zip(schemes, times, peaks):
        cost = pe_cost_model(s, K, N, PE_HIDDEN, H)
        ms = t * 1e3
        out.append(BenchResult(
            scheme=s,
            K=K,
            N=N,
            D=D,
            H=H,
            warmup=WARMUP,
            reps=reps,
            median_ms=float(np.median(ms)),
            p10_ms=float(np.percentile(ms, 10)),
            p90_ms=float(np.percentile(ms, 90)),
            offset_bytes=cost.offset_scalars * itemsize,
            bias_bytes=cost.bias_scalars * itemsize,
            peak_alloc_bytes=int(peak),
        ))
    return out


def bench_pe(scheme: str, K: int, N: int, D: int, H: int, reps: int = MIN_REPS, seed: int = 0) -> BenchResult:
    return bench_schemes([scheme], K, N, D, H, reps, seed)[0]


REPORT_COLUMNS = (
    "scheme", "median_ms", "p10_ms", "p90_ms", "offset_bytes", "bias_bytes",
    "peak_alloc_bytes", "latency_ratio", "offset_bytes_ratio",
)


def _rows(results):
    base = next((r for r in results if r.scheme == "box_surface"), results[0])
    for r in results:
        yield {
            "scheme": r.scheme,
            "median_ms": r.median_ms,
            "p10_ms": r.p10_ms,
            "p90_ms": r.p90_ms,
            "offset_bytes": r.offset_bytes,
            "bias_bytes": r.bias_bytes,
            "peak_alloc_bytes": r.peak_alloc_bytes,
            "latency_ratio": r.median_ms / base.median_ms,
            "offset_bytes_ratio": r.offset_bytes / base.offset_bytes,
        }


def compare_report(results) -> tuple[str, str]:
    """Aligned text table and CSV; ratios are relative to the box-surface row."""
    results = list(results)
    if len(results) < 2:
        raise ValueError("a comparison needs at least two results")
    rows = list(_rows(results))
    r0 = results[0]
    header = [
        f"# PE cost at K={r0.K} N={r0.N} D={r0.D} H={r0.H}, float32, 1 thread, {r0.reps} reps",
        "# bytes cover PE-attributable buffers only (offsets and bias), not the whole model",
    ]
    lines = header + [
        f"{'scheme':<12}{'median_ms':>11}{'p10_ms':>9}{'p90_ms':>9}{'offset_B':>12}{'bias_B':>11}"
        f"{'peak_B':>12}{'lat_x':>8}{'off_x':>7}"
    ]
    for row in rows:
        lines.append(
            f"{row['scheme']:<12}{row['median_ms']:>11.3f}{row['p10_ms']:>9.3f}{row['p90_ms']:>9.3f}"
            f"{row['offset_bytes']:>12d}{row['bias_bytes']:>11d}{row['peak_alloc_bytes']:>12d}"
            f"{row['latency_ratio']:>8.3f}{row['offset_bytes_ratio']:>7.2f}"
        )
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return "\n".join(lines), buf.getvalue()
